//! Command implementations behind the `adaptforge` binary.
//!
//! Every command validates its inputs, computes in memory and only then
//! writes artifacts, so a failed run leaves no partial output behind.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use adaptforge::engine::{run_problem, AdaptResult, OrbitalBasis, PhasePlan, Problem, RunConfig};
use adaptforge::io_integrals::{fixtures_dir, Fixture};
use adaptforge::resources::{resource_csv, resource_curve};
use adaptforge::scf::run_rhf;
use adaptforge::CHEMICAL_ACCURACY;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("fixture error: {0}")]
    Fixture(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
            CliError::Fixture(_) => 4,
        }
    }
}

impl From<adaptforge::Error> for CliError {
    fn from(e: adaptforge::Error) -> Self {
        use adaptforge::Error as E;
        match e {
            E::Config(_) | E::Selection(_) => CliError::Config(e.to_string()),
            E::Fixture { .. } | E::Parse { .. } => CliError::Fixture(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn read_config(path: &Path) -> CliResult<RunConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    RunConfig::from_json(&text).map_err(CliError::from)
}

fn load_fixture(id: &str) -> CliResult<Fixture> {
    Fixture::load_from(&fixtures_dir(), id).map_err(|e| CliError::Fixture(e.to_string()))
}

/// Reproducibility header written as the first trace line.
#[derive(Debug, Serialize, Deserialize)]
pub struct Header {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub fixture_id: String,
    pub fixture_sha256: String,
}

/// Headline numbers of one run, stored as `run.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub fixture: String,
    pub variant: String,
    pub fci_energy: f64,
    pub rhf_energy: f64,
    pub reference_energy: f64,
    pub final_energy: f64,
    pub final_error: f64,
    pub n_operators: usize,
    pub operators_to_chemical_accuracy: Option<usize>,
    pub cnots_to_chemical_accuracy: Option<usize>,
    pub stop: String,
    pub n_qubits: usize,
    pub pool_size: usize,
    pub subspace: Option<Vec<usize>>,
    pub total_energy_evaluations: usize,
    pub total_gradient_evaluations: usize,
    pub total_optimizer_gradient_calls: usize,
}

impl RunSummary {
    fn new(config: &RunConfig, r: &AdaptResult) -> Self {
        let crossing = r.trace.first_within(CHEMICAL_ACCURACY);
        Self {
            fixture: config.fixture.clone(),
            variant: config.variant(),
            fci_energy: r.fci_energy,
            rhf_energy: r.rhf_energy,
            reference_energy: r.reference_energy,
            final_energy: r.final_energy,
            final_error: r.final_energy - r.fci_energy,
            n_operators: r.ansatz.len(),
            operators_to_chemical_accuracy: crossing.map(|row| row.n_operators),
            cnots_to_chemical_accuracy: crossing.map(|row| row.gate_counts.cnot_gates),
            stop: serde_json::to_value(r.stop)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default(),
            n_qubits: r.n_qubits,
            pool_size: r.pool_size,
            subspace: r.subspace.clone(),
            total_energy_evaluations: r.total_energy_evaluations,
            total_gradient_evaluations: r.total_gradient_evaluations,
            total_optimizer_gradient_calls: r.total_optimizer_gradient_calls,
        }
    }
}

/// All artifact files of one run, rendered in memory.
pub struct Artifacts {
    files: Vec<(&'static str, String)>,
    pub summary: RunSummary,
}

impl Artifacts {
    pub fn render(config: &RunConfig, fixture: &Fixture, r: &AdaptResult) -> CliResult<Self> {
        let header = Header {
            tool: "adaptforge".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: config.clone(),
            fixture_id: fixture.id.clone(),
            fixture_sha256: fixture.checksum.clone(),
        };
        let json = |e: serde_json::Error| CliError::Numerical(e.to_string());
        let mut trace =
            serde_json::to_string(&serde_json::json!({ "header": header })).map_err(json)?;
        trace.push('\n');
        trace.push_str(&r.trace.to_jsonl()?);

        let echo = format!(
            "# adaptforge {} fixture={} sha256={} config={}\n",
            env!("CARGO_PKG_VERSION"),
            fixture.id,
            fixture.checksum,
            serde_json::to_string(config).map_err(json)?
        );
        let mut energy = echo.clone();
        energy.push_str("iteration,phase,event,n_operators,energy_Ha,energy_error_Ha\n");
        let mut fidelity = echo.clone();
        fidelity.push_str("iteration,n_operators,fidelity,infidelity,s2,n_elec\n");
        let mut meas = echo.clone();
        meas.push_str(
            "iteration,n_operators,cumulative_energy_evaluations,cumulative_gradient_evaluations,cumulative_optimizer_gradient_calls\n",
        );
        for row in &r.trace.rows {
            let phase = serde_json::to_value(row.phase).map_err(json)?;
            let event = serde_json::to_value(row.event).map_err(json)?;
            let _ = writeln!(
                energy,
                "{},{},{},{},{:.12},{:.12e}",
                row.iteration,
                phase.as_str().unwrap_or_default(),
                event.as_str().unwrap_or_default(),
                row.n_operators,
                row.energy,
                row.energy_error_vs_fci
            );
            let _ = writeln!(
                fidelity,
                "{},{},{:.12},{:.12e},{:.3e},{:.10}",
                row.iteration,
                row.n_operators,
                row.fidelity,
                1.0 - row.fidelity,
                row.s2,
                row.n_elec
            );
            let _ = writeln!(
                meas,
                "{},{},{},{},{}",
                row.iteration,
                row.n_operators,
                row.cumulative_energy_evaluations,
                row.cumulative_gradient_evaluations,
                row.cumulative_optimizer_gradient_calls
            );
        }
        let mut resources = echo.clone();
        resources.push_str(&resource_csv(&resource_curve(&r.trace, &r.history)?));
        let mut amps = echo;
        amps.push_str("position,operator_id,operator,theta,abs_theta\n");
        for (k, e) in r.ansatz.iter().enumerate() {
            let _ = writeln!(
                amps,
                "{k},{},{},{:.12e},{:.12e}",
                e.operator_id,
                e.operator,
                e.theta,
                e.theta.abs()
            );
        }
        let summary = RunSummary::new(config, r);
        let run_json = serde_json::to_string_pretty(&serde_json::json!({
            "header": header,
            "summary": summary,
            "ansatz": r.ansatz,
        }))
        .map_err(json)?;
        Ok(Self {
            files: vec![
                ("trace.jsonl", trace),
                ("energy_error.csv", energy),
                ("fidelity.csv", fidelity),
                ("measurements.csv", meas),
                ("resources.csv", resources),
                ("amplitudes.csv", amps),
                ("run.json", run_json + "\n"),
            ],
            summary,
        })
    }

    pub fn file_names(&self) -> Vec<&'static str> {
        self.files.iter().map(|(n, _)| *n).collect()
    }

    /// Writes into `dir` via a sibling staging directory that is renamed into
    /// place, so readers never see a half-written run.
    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let parent = dir.parent().filter(|p| !p.as_os_str().is_empty());
        if let Some(p) = parent {
            fs::create_dir_all(p)?;
        }
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "out".into());
        let staging = parent
            .unwrap_or_else(|| Path::new("."))
            .join(format!(".{name}.partial-{}", std::process::id()));
        if staging.exists() {
            fs::remove_dir_all(&staging)?;
        }
        fs::create_dir_all(&staging)?;
        let result = (|| -> CliResult<()> {
            for (file, body) in &self.files {
                fs::write(staging.join(file), body)?;
            }
            if dir.exists() {
                fs::remove_dir_all(dir)?;
            }
            fs::rename(&staging, dir)?;
            Ok(())
        })();
        if result.is_err() {
            let _ = fs::remove_dir_all(&staging);
        }
        result
    }
}

/// Validates a config against its fixture without computing anything.
pub fn plan(config: &RunConfig) -> CliResult<String> {
    config.validate()?;
    let f = load_fixture(&config.fixture)?;
    let n_orb = f.ints.n_orb - config.frozen.len() - config.deleted.len();
    let n_elec = f.ints.n_elec - 2 * config.frozen.len();
    let mut out = format!(
        "fixture {} ({} orbitals, {} electrons, sha256 {})\n",
        f.id, f.ints.n_orb, f.ints.n_elec, f.checksum
    );
    let _ = writeln!(
        out,
        "active space: {n_orb} orbitals, {n_elec} electrons, {} qubits",
        2 * n_orb
    );
    let _ = writeln!(out, "variant: {}", config.variant());
    let _ = writeln!(
        out,
        "tol {:e}, max operators {}",
        config.tol, config.max_iters
    );
    if let Some(n_s) = config.phase_plan.n_s {
        if n_s > n_orb {
            return Err(CliError::Config(format!(
                "n_s = {n_s} exceeds the {n_orb} active orbitals"
            )));
        }
    }
    Ok(out)
}

/// Runs one config and writes its artifacts to `out`.
pub fn cmd_run(config: &RunConfig, out: &Path) -> CliResult<RunSummary> {
    config.validate()?;
    let fixture = load_fixture(&config.fixture)?;
    let problem = Problem::prepare(&fixture.ints, config.basis, &config.frozen, &config.deleted)?;
    let result = run_problem(&problem, config)?;
    let art = Artifacts::render(config, &fixture, &result)?;
    art.write(out)?;
    Ok(art.summary)
}

/// A sweep file: `{"runs": [config, ...]}`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Suite {
    pub runs: Vec<RunConfig>,
}

pub fn read_suite(path: &Path) -> CliResult<Suite> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let suite: Suite = serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
    for c in &suite.runs {
        c.validate()?;
    }
    Ok(suite)
}

/// Output directory name of one suite entry.
pub fn run_dir_name(config: &RunConfig) -> String {
    format!("{}__{}", config.fixture, config.variant().replace('/', "_"))
}

pub struct SweepReport {
    pub rows: Vec<(RunConfig, CliResult<RunSummary>)>,
}

impl SweepReport {
    pub fn comparison_csv(&self) -> String {
        let mut out = String::from(
            "fixture,variant,status,operators_to_chemical_accuracy,cnots_to_chemical_accuracy,final_error_Ha,n_operators,total_energy_evaluations\n",
        );
        for (c, r) in &self.rows {
            match r {
                Ok(s) => {
                    let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
                    let _ = writeln!(
                        out,
                        "{},{},ok,{},{},{:.12e},{},{}",
                        c.fixture,
                        c.variant(),
                        opt(s.operators_to_chemical_accuracy),
                        opt(s.cnots_to_chemical_accuracy),
                        s.final_error,
                        s.n_operators,
                        s.total_energy_evaluations
                    );
                }
                Err(e) => {
                    let _ = writeln!(
                        out,
                        "{},{},error {},,,,,",
                        c.fixture,
                        c.variant(),
                        e.exit_code()
                    );
                }
            }
        }
        out
    }

    /// 0 when every run succeeded, else the exit code of the first failure.
    pub fn exit_code(&self) -> i32 {
        self.rows
            .iter()
            .find_map(|(_, r)| r.as_ref().err().map(CliError::exit_code))
            .unwrap_or(0)
    }
}

/// Runs every suite entry, `jobs` at a time, continuing past failures.
pub fn cmd_sweep(suite: &Suite, out: &Path, jobs: usize) -> CliResult<SweepReport> {
    let n = suite.runs.len();
    let results: Mutex<Vec<Option<CliResult<RunSummary>>>> =
        Mutex::new((0..n).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..jobs.max(1).min(n.max(1)) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                if k >= n {
                    break;
                }
                let c = &suite.runs[k];
                let r = cmd_run(c, &out.join(run_dir_name(c)));
                results.lock().expect("results lock")[k] = Some(r);
            });
        }
    });
    let rows = suite
        .runs
        .iter()
        .cloned()
        .zip(results.into_inner().expect("results lock"))
        .map(|(c, r)| (c, r.expect("every run visited")))
        .collect();
    let report = SweepReport { rows };
    fs::create_dir_all(out)?;
    fs::write(out.join("comparison.csv"), report.comparison_csv())?;
    Ok(report)
}

/// Orbital energy below which an occupied orbital counts as core.
pub const CORE_ENERGY: f64 = -2.0;

/// Frozen and deleted orbitals (canonical RHF indices) for a `k`-orbital
/// active space: core orbitals stay frozen, then up to `ceil(k/2)` of the
/// highest occupied orbitals and the lowest virtuals fill the space.
pub fn active_space_lists(fixture: &Fixture, k: usize) -> CliResult<(Vec<usize>, Vec<usize>)> {
    let ints = &fixture.ints;
    let rhf = run_rhf(ints)?;
    let n_occ = ints.n_occ();
    let n_core = rhf
        .eps_alpha
        .iter()
        .take(n_occ)
        .filter(|&&e| e < CORE_ENERGY)
        .count();
    let occ = (n_occ - n_core).min(k.div_ceil(2));
    let virt = k.checked_sub(occ).unwrap_or(0);
    if k < 2 || occ == 0 || virt == 0 || virt > ints.n_orb - n_occ {
        return Err(CliError::Config(format!(
            "no {k}-orbital active space in {} ({} orbitals, {} occupied, {} core)",
            fixture.id, ints.n_orb, n_occ, n_core
        )));
    }
    let frozen = (0..n_occ - occ).collect();
    let deleted = (n_occ + virt..ints.n_orb).collect();
    Ok((frozen, deleted))
}

/// One direct run per active-space size; returns `(size, summary)` pairs.
pub fn cmd_active_scan(
    fixture_id: &str,
    basis: OrbitalBasis,
    min: usize,
    max: usize,
    out: &Path,
) -> CliResult<Vec<(usize, RunSummary)>> {
    if min > max {
        return Err(CliError::Config(format!("--min {min} exceeds --max {max}")));
    }
    let fixture = load_fixture(fixture_id)?;
    let mut configs = Vec::new();
    for k in min..=max {
        let (frozen, deleted) = active_space_lists(&fixture, k)?;
        let mut c = RunConfig::new(fixture_id, basis, PhasePlan::direct());
        c.frozen = frozen;
        c.deleted = deleted;
        configs.push((k, c));
    }
    let mut rendered = Vec::new();
    let mut table = String::from("n_active,iteration,n_operators,energy_error_Ha\n");
    for (k, c) in &configs {
        let problem = Problem::prepare(&fixture.ints, c.basis, &c.frozen, &c.deleted)?;
        let r = run_problem(&problem, c)?;
        for row in &r.trace.rows {
            let _ = writeln!(
                table,
                "{k},{},{},{:.12e}",
                row.iteration, row.n_operators, row.energy_error_vs_fci
            );
        }
        rendered.push((*k, Artifacts::render(c, &fixture, &r)?));
    }
    let mut summaries = Vec::new();
    for (k, art) in rendered {
        art.write(&out.join(format!("active_{k}")))?;
        summaries.push((k, art.summary));
    }
    fs::create_dir_all(out)?;
    fs::write(out.join("active_scan.csv"), table)?;
    Ok(summaries)
}

pub fn default_out() -> PathBuf {
    PathBuf::from("adaptforge-out")
}
