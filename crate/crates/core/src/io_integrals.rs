//! FCIDUMP reading/writing and the spatial-orbital integral container.
//!
//! Two-electron integrals are kept in chemist notation `(pq|rs)` as a dense
//! four-index array; every symmetry-equivalent slot is filled so lookups never
//! have to canonicalize indices.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;
const DUPLICATE_TOL: f64 = 1e-10;

/// One- and two-electron integrals over an orthonormal set of spatial orbitals.
#[derive(Clone, Debug, PartialEq)]
pub struct IntegralSet {
    pub n_orb: usize,
    pub n_elec: usize,
    pub ms2: i32,
    /// One-electron integrals `h[p][q]` (Hartree).
    pub h_core: DMatrix<f64>,
    eri: Vec<f64>,
    /// Nuclear repulsion plus any frozen-orbital energy (Hartree).
    pub e_core: f64,
}

impl IntegralSet {
    /// All-zero integrals for `n_orb` orbitals.
    pub fn zeros(n_orb: usize, n_elec: usize) -> Self {
        Self {
            n_orb,
            n_elec,
            ms2: 0,
            h_core: DMatrix::zeros(n_orb, n_orb),
            eri: vec![0.0; n_orb.pow(4)],
            e_core: 0.0,
        }
    }

    #[inline]
    fn idx(&self, p: usize, q: usize, r: usize, s: usize) -> usize {
        let n = self.n_orb;
        ((p * n + q) * n + r) * n + s
    }

    /// Chemist-notation integral `(pq|rs)`.
    #[inline]
    pub fn eri(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        self.eri[self.idx(p, q, r, s)]
    }

    /// Raw dense ERI storage, row-major over `(p, q, r, s)`.
    pub fn eri_slice(&self) -> &[f64] {
        &self.eri
    }

    pub(crate) fn eri_mut(&mut self) -> &mut [f64] {
        &mut self.eri
    }

    /// Physicist-notation integral `<pq|rs> = (pr|qs)`.
    #[inline]
    pub fn eri_phys(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        self.eri(p, r, q, s)
    }

    /// Writes `value` into all eight permutation-equivalent slots of `(pq|rs)`.
    pub fn set_eri(&mut self, p: usize, q: usize, r: usize, s: usize, value: f64) {
        for (a, b, c, d) in eri_orbit(p, q, r, s) {
            let i = self.idx(a, b, c, d);
            self.eri[i] = value;
        }
    }

    /// Sets `h[p][q]` and `h[q][p]`.
    pub fn set_h(&mut self, p: usize, q: usize, value: f64) {
        self.h_core[(p, q)] = value;
        self.h_core[(q, p)] = value;
    }

    /// Number of doubly occupied orbitals in the closed-shell reference.
    pub fn n_occ(&self) -> usize {
        self.n_elec / 2
    }

    /// Largest violation of the h and ERI permutational symmetries.
    pub fn symmetry_violation(&self) -> f64 {
        let n = self.n_orb;
        let mut worst: f64 = 0.0;
        for p in 0..n {
            for q in 0..n {
                worst = worst.max((self.h_core[(p, q)] - self.h_core[(q, p)]).abs());
                for r in 0..n {
                    for s in 0..n {
                        let v = self.eri(p, q, r, s);
                        for (a, b, c, d) in eri_orbit(p, q, r, s) {
                            worst = worst.max((v - self.eri(a, b, c, d)).abs());
                        }
                    }
                }
            }
        }
        worst
    }

    /// Copies every stored value into its symmetry-equivalent slots, using the
    /// canonical representative of each orbit as the source.
    pub fn symmetrize(&mut self) {
        let n = self.n_orb;
        for p in 0..n {
            for q in 0..=p {
                let v = self.h_core[(p, q)];
                self.h_core[(q, p)] = v;
            }
        }
        for p in 0..n {
            for q in 0..=p {
                for r in 0..n {
                    for s in 0..=r {
                        if pair_index(p, q) >= pair_index(r, s) {
                            let v = self.eri(p, q, r, s);
                            self.set_eri(p, q, r, s, v);
                        }
                    }
                }
            }
        }
    }

    /// Returns an error unless the stored integrals satisfy the permutational
    /// symmetries to 1e-12.
    pub fn validate(&self) -> Result<()> {
        if self.h_core.nrows() != self.n_orb || self.h_core.ncols() != self.n_orb {
            return Err(Error::Dimension("h_core shape does not match n_orb".into()));
        }
        if self.eri.len() != self.n_orb.pow(4) {
            return Err(Error::Dimension("ERI length does not match n_orb^4".into()));
        }
        let v = self.symmetry_violation();
        if v > SYMMETRY_TOL {
            return Err(Error::InvalidInput(format!(
                "integrals violate permutational symmetry by {v:.3e}"
            )));
        }
        Ok(())
    }

    /// Largest field-wise absolute difference to `other`; infinite when the
    /// shapes or metadata differ.
    pub fn max_abs_diff(&self, other: &IntegralSet) -> f64 {
        if self.n_orb != other.n_orb || self.n_elec != other.n_elec || self.ms2 != other.ms2 {
            return f64::INFINITY;
        }
        let h = (&self.h_core - &other.h_core).amax();
        let e = self
            .eri
            .iter()
            .zip(&other.eri)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        h.max(e).max((self.e_core - other.e_core).abs())
    }
}

#[inline]
fn pair_index(p: usize, q: usize) -> usize {
    let (a, b) = if p >= q { (p, q) } else { (q, p) };
    a * (a + 1) / 2 + b
}

fn eri_orbit(p: usize, q: usize, r: usize, s: usize) -> [(usize, usize, usize, usize); 8] {
    [
        (p, q, r, s),
        (q, p, r, s),
        (p, q, s, r),
        (q, p, s, r),
        (r, s, p, q),
        (s, r, p, q),
        (r, s, q, p),
        (s, r, q, p),
    ]
}

/// Canonical key of an ERI orbit: `p >= q`, `r >= s`, `pq >= rs`.
fn eri_key(p: usize, q: usize, r: usize, s: usize) -> (usize, usize, usize, usize) {
    let (p, q) = if p >= q { (p, q) } else { (q, p) };
    let (r, s) = if r >= s { (r, s) } else { (s, r) };
    if pair_index(p, q) >= pair_index(r, s) {
        (p, q, r, s)
    } else {
        (r, s, p, q)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum EntryKey {
    Core,
    One(usize, usize),
    Two(usize, usize, usize, usize),
}

struct Namelist {
    norb: usize,
    nelec: usize,
    ms2: i32,
}

fn parse_namelist(body: &str, line: usize) -> Result<Namelist> {
    let err = |msg: String| Error::Parse { line, msg };
    let spaced = body.replace('=', "= ");
    let mut values: HashMap<String, Vec<String>> = HashMap::new();
    let mut current: Option<String> = None;
    for tok in spaced.split(|c: char| c == ',' || c.is_whitespace()) {
        if tok.is_empty() {
            continue;
        }
        if let Some(key) = tok.strip_suffix('=') {
            let key = key.trim().to_ascii_uppercase();
            values.insert(key.clone(), Vec::new());
            current = Some(key);
        } else if let Some(key) = &current {
            values.get_mut(key).unwrap().push(tok.to_string());
        } else {
            return Err(err(format!("unexpected token `{tok}` in namelist")));
        }
    }
    let scalar = |key: &str| -> Result<i64> {
        let v = values
            .get(key)
            .and_then(|v| v.first())
            .ok_or_else(|| err(format!("namelist is missing {key}")))?;
        v.parse::<i64>()
            .map_err(|_| err(format!("{key} value `{v}` is not an integer")))
    };
    let norb = scalar("NORB")?;
    let nelec = scalar("NELEC")?;
    let ms2 = match values.get("MS2") {
        Some(_) => scalar("MS2")?,
        None => 0,
    };
    if norb <= 0 || nelec < 0 {
        return Err(err(format!("invalid NORB={norb} / NELEC={nelec}")));
    }
    if nelec > 2 * norb {
        return Err(err(format!("NELEC={nelec} exceeds 2*NORB")));
    }
    Ok(Namelist {
        norb: norb as usize,
        nelec: nelec as usize,
        ms2: ms2 as i32,
    })
}

/// Parses Molpro-style FCIDUMP text.
///
/// ORBSYM/ISYM are accepted and ignored. Orbital-energy lines (`e i 0 0 0`)
/// are skipped.
pub fn parse_fcidump(text: &str) -> Result<IntegralSet> {
    let lines: Vec<&str> = text.lines().collect();
    let start = lines
        .iter()
        .position(|l| l.trim_start().to_ascii_uppercase().starts_with("&FCI"))
        .ok_or(Error::Parse {
            line: 1,
            msg: "missing &FCI namelist".into(),
        })?;
    let mut header = String::new();
    let mut body_start = None;
    for (k, raw) in lines.iter().enumerate().skip(start) {
        let mut l = raw.trim().to_string();
        if k == start {
            l = l[4..].to_string();
        }
        let upper = l.to_ascii_uppercase();
        let end = upper
            .find("&END")
            .map(|i| (i, 4))
            .or_else(|| upper.find('/').map(|i| (i, 1)));
        if let Some((i, _)) = end {
            header.push_str(&l[..i]);
            header.push(' ');
            body_start = Some(k + 1);
            break;
        }
        header.push_str(&l);
        header.push(' ');
    }
    let body_start = body_start.ok_or(Error::Parse {
        line: start + 1,
        msg: "namelist is not terminated by &END or /".into(),
    })?;
    let nl = parse_namelist(&header, start + 1)?;
    let n = nl.norb;
    let mut ints = IntegralSet::zeros(n, nl.nelec);
    ints.ms2 = nl.ms2;

    let mut seen: HashMap<EntryKey, (f64, usize)> = HashMap::new();
    for (k, raw) in lines.iter().enumerate().skip(body_start) {
        let line_no = k + 1;
        let l = raw.trim();
        if l.is_empty() {
            continue;
        }
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != 5 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected `value i j k l`, found {} fields", toks.len()),
            });
        }
        let value: f64 = toks[0]
            .replace(['D', 'd'], "E")
            .parse()
            .map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad value `{}`", toks[0]),
            })?;
        let mut idx = [0usize; 4];
        for (slot, t) in idx.iter_mut().zip(&toks[1..]) {
            let v: i64 = t.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad index `{t}`"),
            })?;
            if v < 0 || v as usize > n {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("index {v} out of range 1..={n}"),
                });
            }
            *slot = v as usize;
        }
        let [i, j, kk, ll] = idx;
        let key = match (i, j, kk, ll) {
            (0, 0, 0, 0) => EntryKey::Core,
            (_, 0, 0, 0) => continue,
            (i, j, 0, 0) if i > 0 && j > 0 => {
                let (a, b) = if i >= j { (i, j) } else { (j, i) };
                EntryKey::One(a - 1, b - 1)
            }
            (i, j, k, l) if i > 0 && j > 0 && k > 0 && l > 0 => {
                let (a, b, c, d) = eri_key(i - 1, j - 1, k - 1, l - 1);
                EntryKey::Two(a, b, c, d)
            }
            _ => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("unsupported index pattern {i} {j} {kk} {ll}"),
                })
            }
        };
        if let Some(&(prev, prev_line)) = seen.get(&key) {
            if (prev - value).abs() > DUPLICATE_TOL {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!(
                        "conflicting duplicate entry ({value} vs {prev} on line {prev_line})"
                    ),
                });
            }
            continue;
        }
        seen.insert(key, (value, line_no));
        match key {
            EntryKey::Core => ints.e_core = value,
            EntryKey::One(p, q) => ints.set_h(p, q, value),
            EntryKey::Two(p, q, r, s) => ints.set_eri(p, q, r, s, value),
        }
    }
    Ok(ints)
}

/// Serializes integrals as FCIDUMP text, emitting one representative per ERI
/// orbit and skipping exact zeros. Floats use shortest round-trip formatting.
pub fn write_fcidump(ints: &IntegralSet) -> String {
    let n = ints.n_orb;
    let mut out = String::new();
    let _ = writeln!(
        out,
        " &FCI NORB={:4},NELEC={:2},MS2={},",
        n, ints.n_elec, ints.ms2
    );
    let _ = writeln!(out, "  ORBSYM={}", "1,".repeat(n));
    let _ = writeln!(out, "  ISYM=1,");
    let _ = writeln!(out, " &END");
    for p in 0..n {
        for q in 0..=p {
            for r in 0..=p {
                let s_max = if r == p { q } else { r };
                for s in 0..=s_max {
                    let v = ints.eri(p, q, r, s);
                    if v != 0.0 {
                        let _ = writeln!(
                            out,
                            "{v:>24e} {:4} {:4} {:4} {:4}",
                            p + 1,
                            q + 1,
                            r + 1,
                            s + 1
                        );
                    }
                }
            }
        }
    }
    for p in 0..n {
        for q in 0..=p {
            let v = ints.h_core[(p, q)];
            if v != 0.0 {
                let _ = writeln!(out, "{v:>24e} {:4} {:4} {:4} {:4}", p + 1, q + 1, 0, 0);
            }
        }
    }
    let _ = writeln!(out, "{:>24e} {:4} {:4} {:4} {:4}", ints.e_core, 0, 0, 0, 0);
    out
}

/// Reference data written next to each committed fixture.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct FixtureSidecar {
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub method: Option<String>,
    #[serde(default)]
    pub basis: Option<String>,
    #[serde(default)]
    pub geometry: Option<serde_json::Value>,
    #[serde(default)]
    pub rhf_energy: Option<f64>,
    #[serde(default)]
    pub uhf_energy: Option<f64>,
    #[serde(default, alias = "fci_energy_when_feasible")]
    pub fci_energy: Option<f64>,
    #[serde(default)]
    pub fci_kind: Option<String>,
    #[serde(default)]
    pub checksum: Option<String>,
    /// Generic `{method, energy}` form.
    #[serde(default)]
    pub energy: Option<f64>,
}

/// A parsed fixture with its on-disk provenance.
#[derive(Clone, Debug)]
pub struct Fixture {
    pub id: String,
    pub path: PathBuf,
    pub ints: IntegralSet,
    pub sidecar: Option<FixtureSidecar>,
    /// Hex SHA-256 of the FCIDUMP bytes.
    pub checksum: String,
}

/// Environment variable overriding the fixture directory.
pub const FIXTURES_ENV: &str = "ADAPTFORGE_FIXTURES";

/// Fixture directory: `$ADAPTFORGE_FIXTURES`, else the repository copy.
pub fn fixtures_dir() -> PathBuf {
    match std::env::var_os(FIXTURES_ENV) {
        Some(p) => PathBuf::from(p),
        None => Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures"),
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl Fixture {
    /// Loads `<dir>/<id>.FCIDUMP` and the optional `<dir>/<id>.json` sidecar.
    pub fn load_from(dir: &Path, id: &str) -> Result<Self> {
        let path = dir.join(format!("{id}.FCIDUMP"));
        let bytes = std::fs::read(&path).map_err(|e| Error::Fixture {
            id: id.to_string(),
            msg: format!("cannot read {}: {e}", path.display()),
        })?;
        let text = String::from_utf8(bytes.clone()).map_err(|_| Error::Fixture {
            id: id.to_string(),
            msg: "FCIDUMP is not UTF-8".into(),
        })?;
        let ints = parse_fcidump(&text).map_err(|e| Error::Fixture {
            id: id.to_string(),
            msg: e.to_string(),
        })?;
        let side_path = dir.join(format!("{id}.json"));
        let sidecar = if side_path.exists() {
            let s = std::fs::read_to_string(&side_path)?;
            Some(serde_json::from_str(&s)?)
        } else {
            None
        };
        Ok(Self {
            id: id.to_string(),
            path,
            ints,
            sidecar,
            checksum: sha256_hex(&bytes),
        })
    }

    pub fn load(id: &str) -> Result<Self> {
        Self::load_from(&fixtures_dir(), id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE_ORBITAL: &str = " &FCI NORB=1,NELEC=2,MS2=0,\n  ORBSYM=1,\n  ISYM=1,\n &END\n\
        1.0 1 1 0 0\n0.5 1 1 1 1\n0.7 0 0 0 0\n";

    #[test]
    fn parses_single_orbital_file() {
        let ints = parse_fcidump(ONE_ORBITAL).unwrap();
        assert_eq!(ints.n_orb, 1);
        assert_eq!(ints.n_elec, 2);
        assert_eq!(ints.h_core[(0, 0)], 1.0);
        assert_eq!(ints.eri(0, 0, 0, 0), 0.5);
        assert_eq!(ints.e_core, 0.7);
    }

    #[test]
    fn one_electron_entry_is_symmetrized() {
        let text = "&FCI NORB=2,NELEC=2,MS2=0 &END\n0.3 2 1 0 0\n";
        let ints = parse_fcidump(text).unwrap();
        assert_eq!(ints.h_core[(1, 0)], 0.3);
        assert_eq!(ints.h_core[(0, 1)], 0.3);
    }

    #[test]
    fn eri_entry_fills_all_eight_slots() {
        let text = "&FCI NORB=3,NELEC=2 /\n0.25 3 1 2 1\n";
        let ints = parse_fcidump(text).unwrap();
        for (p, q, r, s) in eri_orbit(2, 0, 1, 0) {
            assert_eq!(ints.eri(p, q, r, s), 0.25);
        }
        assert_eq!(ints.symmetry_violation(), 0.0);
    }

    #[test]
    fn fortran_exponent_is_accepted() {
        let text = "&FCI NORB=1,NELEC=2 &END\n1.5D-01 1 1 0 0\n";
        assert_eq!(parse_fcidump(text).unwrap().h_core[(0, 0)], 0.15);
    }

    #[test]
    fn index_out_of_range_names_line() {
        let text = "&FCI NORB=1,NELEC=2 &END\n1.0 1 1 0 0\n0.5 2 1 1 1\n";
        match parse_fcidump(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn conflicting_duplicate_rejected() {
        let text = "&FCI NORB=2,NELEC=2 &END\n0.5 1 2 1 2\n0.6 2 1 2 1\n";
        match parse_fcidump(text) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("duplicate"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        // identical duplicates are fine
        let ok = "&FCI NORB=2,NELEC=2 &END\n0.5 1 2 1 2\n0.5 2 1 2 1\n";
        assert!(parse_fcidump(ok).is_ok());
    }

    #[test]
    fn malformed_namelist_rejected() {
        assert!(parse_fcidump("NORB=1\n1.0 1 1 0 0\n").is_err());
        assert!(parse_fcidump("&FCI NELEC=2 &END\n").is_err());
        assert!(parse_fcidump("&FCI NORB=x,NELEC=2 &END\n").is_err());
        assert!(parse_fcidump("&FCI NORB=1,NELEC=2\n1.0 1 1 0 0\n").is_err());
    }

    #[test]
    fn round_trip_single_orbital() {
        let ints = parse_fcidump(ONE_ORBITAL).unwrap();
        let again = parse_fcidump(&write_fcidump(&ints)).unwrap();
        assert_eq!(ints, again);
    }

    #[test]
    fn zero_eri_writes_only_header_h_and_core() {
        let mut ints = IntegralSet::zeros(2, 2);
        ints.set_h(0, 0, -1.0);
        ints.set_h(1, 0, 0.2);
        ints.e_core = 0.5;
        let text = write_fcidump(&ints);
        let body: Vec<&str> = text.lines().skip(4).collect();
        assert_eq!(body.len(), 3);
        assert!(body
            .iter()
            .all(|l| l.split_whitespace().nth(3) == Some("0")));
        assert_eq!(parse_fcidump(&text).unwrap(), ints);
    }

    #[test]
    fn symmetrize_is_idempotent() {
        let ints = parse_fcidump("&FCI NORB=3,NELEC=2 /\n0.25 3 1 2 1\n0.1 2 2 3 1\n").unwrap();
        let mut once = ints.clone();
        once.symmetrize();
        let mut twice = once.clone();
        twice.symmetrize();
        assert_eq!(once, twice);
        assert_eq!(once, ints);
    }
}
