use serde::{Deserialize, Serialize};

use crate::oracle::FidelityNormalization;
use crate::pool::SubspaceCriterion;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrbitalBasis {
    /// Canonical RHF orbitals.
    #[default]
    Canonical,
    /// Natural orbitals of a broken-symmetry UHF solution.
    UhfNo,
}

impl OrbitalBasis {
    pub fn as_str(self) -> &'static str {
        match self {
            OrbitalBasis::Canonical => "canonical",
            OrbitalBasis::UhfNo => "uhf-no",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseMode {
    #[default]
    Direct,
    /// ADAPT in an `n_s`-orbital subspace, then projection onto the full space.
    Projected,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhasePlan {
    pub mode: PhaseMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_s: Option<usize>,
}

impl PhasePlan {
    pub fn direct() -> Self {
        Self::default()
    }

    pub fn projected(n_s: usize) -> Self {
        Self {
            mode: PhaseMode::Projected,
            n_s: Some(n_s),
        }
    }
}

fn default_tol() -> f64 {
    1e-4
}

fn default_max_iters() -> usize {
    120
}

fn default_true() -> bool {
    true
}

/// One ADAPT run. Deserializes from the JSON run file; unknown keys are
/// rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub fixture: String,
    #[serde(default)]
    pub basis: OrbitalBasis,
    #[serde(default)]
    pub phase_plan: PhasePlan,
    /// Doubly occupied orbitals removed from the correlated space (indices in
    /// the canonical RHF basis of the fixture).
    #[serde(default)]
    pub frozen: Vec<usize>,
    /// Virtual orbitals dropped from the correlated space.
    #[serde(default)]
    pub deleted: Vec<usize>,
    /// Inner optimizer tolerance.
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Cap on the total number of ansatz operators.
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default)]
    pub subspace_criterion: SubspaceCriterion,
    /// Re-optimize all amplitudes once after projecting onto the full space.
    #[serde(default = "default_true")]
    pub reoptimize_on_embed: bool,
    /// Optimizer tolerance in the subspace phase; `tol` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subspace_tol: Option<f64>,
    #[serde(default)]
    pub fidelity_normalization: FidelityNormalization,
    /// Stop once `|E - E_FCI|` is at or below this value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_at_error: Option<f64>,
}

impl RunConfig {
    pub fn new(fixture: impl Into<String>, basis: OrbitalBasis, phase_plan: PhasePlan) -> Self {
        Self {
            fixture: fixture.into(),
            basis,
            phase_plan,
            frozen: Vec::new(),
            deleted: Vec::new(),
            tol: default_tol(),
            max_iters: default_max_iters(),
            subspace_criterion: SubspaceCriterion::default(),
            reoptimize_on_embed: true,
            subspace_tol: None,
            fidelity_normalization: FidelityNormalization::default(),
            stop_at_error: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks everything that does not need the integrals.
    pub fn validate(&self) -> Result<()> {
        if self.fixture.trim().is_empty() {
            return Err(Error::Config("fixture id is empty".into()));
        }
        for (name, v) in [("tol", Some(self.tol)), ("subspace_tol", self.subspace_tol)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::Config(format!("{name} must be positive, got {v}")));
                }
            }
        }
        if let Some(e) = self.stop_at_error {
            if !(e.is_finite() && e >= 0.0) {
                return Err(Error::Config(format!(
                    "stop_at_error must be >= 0, got {e}"
                )));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        match (self.phase_plan.mode, self.phase_plan.n_s) {
            (PhaseMode::Projected, None) => {
                return Err(Error::Config("projected phase plan needs n_s".into()))
            }
            (PhaseMode::Projected, Some(n)) if n == 0 || n % 2 != 0 => {
                return Err(Error::Config(format!(
                    "n_s must be even and positive, got {n}"
                )))
            }
            (PhaseMode::Direct, Some(_)) => {
                return Err(Error::Config(
                    "n_s is only valid with mode \"projected\"".into(),
                ))
            }
            _ => {}
        }
        let mut seen = self.frozen.clone();
        seen.extend(&self.deleted);
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config(
                "frozen/deleted lists repeat an orbital".into(),
            ));
        }
        Ok(())
    }

    /// Short variant name, e.g. `uhf-no/projected-4`.
    pub fn variant(&self) -> String {
        match self.phase_plan.n_s {
            Some(n) => format!("{}/projected-{n}", self.basis.as_str()),
            None => format!("{}/direct", self.basis.as_str()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_in() {
        let c = RunConfig::from_json(r#"{"fixture": "h4_linear_3.0"}"#).unwrap();
        assert_eq!(c.tol, 1e-4);
        assert_eq!(c.max_iters, 120);
        assert_eq!(c.basis, OrbitalBasis::Canonical);
        assert!(c.reoptimize_on_embed);
        assert_eq!(c.variant(), "canonical/direct");
    }

    #[test]
    fn full_round_trip() {
        let text = r#"{"fixture": "h2o_3.0", "basis": "uhf-no",
            "phase_plan": {"mode": "projected", "n_s": 6},
            "frozen": [0], "deleted": [11, 12], "tol": 1e-5}"#;
        let c = RunConfig::from_json(text).unwrap();
        assert_eq!(c.phase_plan, PhasePlan::projected(6));
        let back = RunConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            r#"{"fixture": "x", "colour": 1}"#,
            r#"{"fixture": "x", "basis": "mp2"}"#,
            r#"{"fixture": "x", "tol": -1}"#,
            r#"{"fixture": "x", "phase_plan": {"mode": "projected"}}"#,
            r#"{"fixture": "x", "phase_plan": {"mode": "projected", "n_s": 3}}"#,
            r#"{"fixture": "x", "phase_plan": {"mode": "direct", "n_s": 4}}"#,
            r#"{"fixture": "x", "frozen": [0], "deleted": [0]}"#,
            r#"{"fixture": ""}"#,
        ] {
            assert!(
                matches!(RunConfig::from_json(text), Err(Error::Config(_))),
                "{text}"
            );
        }
    }
}
