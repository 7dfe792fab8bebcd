#![allow(dead_code)]

use std::path::PathBuf;

use adaptforge::io_integrals::Fixture;
use adaptforge::IntegralSet;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub const H4_IDS: [&str; 6] = [
    "h4_linear_1.5",
    "h4_linear_3.0",
    "h4_square_1.5",
    "h4_square_3.0",
    "h4_tetra_1.5",
    "h4_tetra_3.0",
];

pub const H2O_IDS: [&str; 2] = ["h2o_1.0", "h2o_3.0"];

pub fn fixtures_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn load(id: &str) -> Fixture {
    Fixture::load_from(&fixtures_path(), id).unwrap_or_else(|e| panic!("{id}: {e}"))
}

/// Frozen core and deleted virtuals of the H2O (8e, 10o) active space.
pub fn active_space(id: &str) -> (Vec<usize>, Vec<usize>) {
    if id.starts_with("h2o") {
        (vec![0], vec![11, 12])
    } else {
        (vec![], vec![])
    }
}

/// Random real integrals with the full 8-fold symmetry and a positive
/// diagonal, loosely shaped like a small molecule.
pub fn random_ints(n_orb: usize, n_elec: usize, seed: u64) -> IntegralSet {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut ints = IntegralSet::zeros(n_orb, n_elec);
    for p in 0..n_orb {
        ints.set_h(p, p, -1.5 + 0.6 * p as f64 + rng.gen_range(-0.1..0.1));
        for q in 0..p {
            ints.set_h(p, q, rng.gen_range(-0.2..0.2));
        }
    }
    for p in 0..n_orb {
        for q in 0..=p {
            for r in 0..n_orb {
                for s in 0..=r {
                    if p * (p + 1) / 2 + q < r * (r + 1) / 2 + s {
                        continue;
                    }
                    let v = if p == q && r == s {
                        0.5 + rng.gen_range(0.0..0.2)
                    } else {
                        rng.gen_range(-0.08..0.08)
                    };
                    ints.set_eri(p, q, r, s, v);
                }
            }
        }
    }
    ints.e_core = 0.5;
    ints
}
