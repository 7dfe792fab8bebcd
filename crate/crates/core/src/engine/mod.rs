//! The adaptive ansatz loop and the subspace-then-full-space protocol.

pub mod ansatz;
pub mod bfgs;
pub mod config;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use ansatz::{
    energy_and_gradient, optimize, pool_gradients, pool_gradients_full, prepare_state,
    select_operator, AnsatzElement, AnsatzState, OptimizeOutcome, GRADIENT_FLOOR,
};
pub use config::{OrbitalBasis, PhaseMode, PhasePlan, RunConfig};

use crate::io_integrals::{Fixture, IntegralSet};
use crate::oracle::{fci, fidelity, one_rdm_sector, FciSolution, OneParticleDensity, SpinProbe};
use crate::pool::{
    build_pool, embed_ansatz, restrict_pool, select_subspace, Excitation, PoolOperator, SubspaceMap,
};
use crate::qubit_map::{build_hamiltonian, CsrMatrix, SectorBasis, SectorGenerator};
use crate::resources::{ansatz_resources, Circuit, ResourceCount};
use crate::scf::{
    fock_matrix, freeze_and_select, natural_orbitals, rotate_integrals, run_rhf, run_uhf,
    OrbitalRotation, UhfGuess,
};
use crate::{Error, Result};

/// An iteration whose energy change is above this is rejected and ends the
/// phase.
pub const ENERGY_DECREASE_TOL: f64 = 1e-9;

/// Largest mismatch allowed between the subspace energy and the energy of the
/// same ansatz evaluated in the full space.
const EMBED_ENERGY_TOL: f64 = 1e-8;

/// Correlated problem in the chosen orbital basis.
#[derive(Clone, Debug)]
pub struct Problem {
    /// Active-space integrals rotated into the chosen basis.
    pub ints: IntegralSet,
    pub rotation: OrbitalRotation,
    pub basis: OrbitalBasis,
    /// RHF energy of the active space.
    pub rhf_energy: f64,
    /// UHF energy of the active space (natural-orbital basis only).
    pub uhf_energy: Option<f64>,
    /// Energy of the closed-shell reference determinant in this basis.
    pub reference_energy: f64,
    pub fci: FciSolution,
    pub fci_rdm: OneParticleDensity,
    pub n_occ: usize,
}

impl Problem {
    /// RHF on the fixture, freezing/deleting in its canonical basis, RHF on the
    /// active space, then the requested orbitals.
    pub fn prepare(
        full: &IntegralSet,
        basis: OrbitalBasis,
        frozen: &[usize],
        deleted: &[usize],
    ) -> Result<Self> {
        full.validate()?;
        if full.ms2 != 0 || full.n_elec % 2 != 0 {
            return Err(Error::Config(format!(
                "singlet pool needs a closed-shell reference, got NELEC={} MS2={}",
                full.n_elec, full.ms2
            )));
        }
        let rhf_full = run_rhf(full)?;
        let canonical = rotate_integrals(full, &OrbitalRotation::canonical(&rhf_full))?;
        let active = freeze_and_select(&canonical, frozen, deleted)?;
        if active.n_elec == 0 || 2 * active.n_orb == active.n_elec {
            return Err(Error::Config("active space has no correlation".into()));
        }
        let rhf = run_rhf(&active)?;
        let (rotation, uhf_energy) = match basis {
            OrbitalBasis::Canonical => (OrbitalRotation::canonical(&rhf), None),
            OrbitalBasis::UhfNo => {
                let mut uhf = run_uhf(&active, UhfGuess::default())?;
                if uhf.energy > rhf.energy + 1e-10 {
                    // The mixed guess converged to a higher saddle point; the
                    // symmetric start cannot end above RHF.
                    uhf = run_uhf(&active, UhfGuess::symmetric())?;
                }
                let mut rot = natural_orbitals(&uhf);
                rot.attach_fock_diagonal(&fock_matrix(&active, &rhf));
                (rot, Some(uhf.energy))
            }
        };
        let ints = rotate_integrals(&active, &rotation)?;
        let n_occ = ints.n_occ();
        let fci = fci(&ints)?;
        let fci_rdm = fci.ground_rdm()?;
        let h = fci.basis.to_sparse(&build_hamiltonian(&ints))?;
        let reference = fci.basis.reference_vector();
        let reference_energy = dot(&reference, &h.matvec(&reference));
        Ok(Self {
            ints,
            rotation,
            basis,
            rhf_energy: rhf.energy,
            uhf_energy,
            reference_energy,
            fci,
            fci_rdm,
            n_occ,
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Subspace,
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowEvent {
    /// The reference determinant before any operator.
    Reference,
    /// An accepted ADAPT iteration.
    Iteration,
    /// The subspace ansatz projected onto the full space.
    Embed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    /// An iteration failed to lower the energy.
    NoImprovement,
    /// Every pool gradient was at or below the floor.
    GradientFloor,
    IterationCap,
    ErrorTarget,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    /// Row index: 0 is the reference.
    pub iteration: usize,
    pub phase: Phase,
    pub event: RowEvent,
    pub n_operators: usize,
    /// Operator id in the full pool.
    pub selected_operator_id: Option<usize>,
    pub selected_operator: Option<String>,
    pub max_abs_gradient: Option<f64>,
    pub energy: f64,
    pub energy_error_vs_fci: f64,
    /// Objective evaluations by the optimizer, plus one for the reference.
    pub cumulative_energy_evaluations: usize,
    /// Pool-gradient evaluations (one per operator per screening).
    pub cumulative_gradient_evaluations: usize,
    /// Analytic gradient-vector calls by the optimizer.
    pub cumulative_optimizer_gradient_calls: usize,
    pub fidelity: f64,
    pub s2: f64,
    pub n_elec: f64,
    pub gate_counts: ResourceCount,
    pub degraded: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AdaptTrace {
    pub rows: Vec<TraceRow>,
}

impl AdaptTrace {
    /// First row within `threshold` of FCI.
    pub fn first_within(&self, threshold: f64) -> Option<&TraceRow> {
        self.rows
            .iter()
            .find(|r| r.energy_error_vs_fci <= threshold)
    }

    /// Ansatz length when the error first drops to `threshold`.
    pub fn operators_to_accuracy(&self, threshold: f64) -> Option<usize> {
        self.first_within(threshold).map(|r| r.n_operators)
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.rows {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalElement {
    pub operator_id: usize,
    pub operator: String,
    pub theta: f64,
}

#[derive(Clone, Debug)]
pub struct AdaptResult {
    pub trace: AdaptTrace,
    /// Circuit behind each trace row.
    pub history: Vec<Circuit>,
    pub ansatz: Vec<FinalElement>,
    pub final_energy: f64,
    pub fci_energy: f64,
    pub rhf_energy: f64,
    pub reference_energy: f64,
    pub stop: StopReason,
    pub n_qubits: usize,
    pub pool_size: usize,
    /// Subspace orbitals (full-space indices) for projected runs.
    pub subspace: Option<Vec<usize>>,
    /// Totals including work spent on a rejected final iteration.
    pub total_energy_evaluations: usize,
    pub total_gradient_evaluations: usize,
    pub total_optimizer_gradient_calls: usize,
}

/// Sector Hamiltonian, pool and probes for one register.
struct Register<'a> {
    basis: SectorBasis,
    h: CsrMatrix<f64>,
    pool: &'a [PoolOperator],
    gens: Vec<SectorGenerator>,
    probe: SpinProbe,
    /// Subspace relation to the full space; `None` for the full register.
    map: Option<SubspaceMap>,
    /// Electrons outside the register (frozen doubly occupied orbitals).
    extra_electrons: usize,
}

impl<'a> Register<'a> {
    fn new(ints: &IntegralSet, pool: &'a [PoolOperator], map: Option<SubspaceMap>) -> Result<Self> {
        let basis = SectorBasis::for_electrons(ints.n_orb, ints.n_elec, ints.ms2)?;
        let h = basis.to_sparse(&build_hamiltonian(ints))?;
        let gens = pool
            .iter()
            .map(|op| SectorGenerator::new(&op.qubit_form, &basis))
            .collect::<Result<Vec<_>>>()?;
        let probe = SpinProbe::new(&basis)?;
        let extra_electrons = map.as_ref().map_or(0, |m| 2 * m.frozen_occupied().len());
        Ok(Self {
            basis,
            h,
            pool,
            gens,
            probe,
            map,
            extra_electrons,
        })
    }

    fn circuit(&self, ops: &[usize]) -> Circuit {
        Circuit {
            n_qubits: self.basis.n_qubits(),
            occupied: (0..self.basis.n_elec()).collect(),
            generators: ops
                .iter()
                .map(|&k| self.pool[k].qubit_form.clone())
                .collect(),
        }
    }

    fn density(&self, v: &[f64], n_orb_full: usize) -> Result<OneParticleDensity> {
        let rdm = one_rdm_sector(&self.basis, v)?;
        Ok(match &self.map {
            Some(m) => rdm.embed(n_orb_full, &m.active_spatial, &m.frozen_occupied()),
            None => rdm,
        })
    }
}

#[derive(Default)]
struct Counters {
    energy: usize,
    pool_gradients: usize,
    optimizer_gradients: usize,
}

struct Runner<'a> {
    problem: &'a Problem,
    config: &'a RunConfig,
    full_ids: BTreeMap<Excitation, usize>,
    counters: Counters,
    trace: AdaptTrace,
    history: Vec<Circuit>,
}

struct Selected {
    id: usize,
    label: String,
    max_abs_gradient: f64,
}

impl Runner<'_> {
    fn push_row(
        &mut self,
        reg: &Register,
        phase: Phase,
        event: RowEvent,
        ansatz: &AnsatzState,
        energy: f64,
        selected: Option<Selected>,
        degraded: bool,
    ) -> Result<()> {
        let rho = reg.density(&ansatz.state, self.problem.ints.n_orb)?;
        let fid = fidelity(
            &self.problem.fci_rdm,
            &rho,
            self.config.fidelity_normalization,
        )?;
        let (s2, n) = reg.probe.evaluate(&ansatz.state);
        let circuit = reg.circuit(&ansatz.ops());
        let gates = ansatz_resources(&circuit)?;
        let (id, label, g) = match selected {
            Some(s) => (Some(s.id), Some(s.label), Some(s.max_abs_gradient)),
            None => (None, None, None),
        };
        self.trace.rows.push(TraceRow {
            iteration: self.trace.rows.len(),
            phase,
            event,
            n_operators: ansatz.len(),
            selected_operator_id: id,
            selected_operator: label,
            max_abs_gradient: g,
            energy,
            energy_error_vs_fci: energy - self.problem.fci.energy,
            cumulative_energy_evaluations: self.counters.energy,
            cumulative_gradient_evaluations: self.counters.pool_gradients,
            cumulative_optimizer_gradient_calls: self.counters.optimizer_gradients,
            fidelity: fid,
            s2,
            n_elec: n + reg.extra_electrons as f64,
            gate_counts: gates,
            degraded,
        });
        self.history.push(circuit);
        Ok(())
    }

    fn reached_target(&self, energy: f64) -> bool {
        self.config
            .stop_at_error
            .is_some_and(|t| energy - self.problem.fci.energy <= t)
    }

    fn optimize(&mut self, reg: &Register, ansatz: &mut AnsatzState, tol: f64) -> OptimizeOutcome {
        let out = optimize(&reg.h, &reg.gens, ansatz, tol);
        self.counters.energy += out.value_calls;
        self.counters.optimizer_gradients += out.gradient_calls;
        out
    }

    /// Screen, select, append, optimize until a stop condition. Returns the
    /// final energy and why the loop ended.
    fn adapt_loop(
        &mut self,
        reg: &Register,
        phase: Phase,
        ansatz: &mut AnsatzState,
        mut energy: f64,
        tol: f64,
    ) -> Result<(f64, StopReason)> {
        loop {
            if self.reached_target(energy) {
                return Ok((energy, StopReason::ErrorTarget));
            }
            if ansatz.len() >= self.config.max_iters {
                return Ok((energy, StopReason::IterationCap));
            }
            let grads = pool_gradients(&reg.h, &reg.gens, &ansatz.state);
            self.counters.pool_gradients += grads.len();
            let Some(k) = select_operator(&grads) else {
                return Ok((energy, StopReason::GradientFloor));
            };
            let saved = ansatz.clone();
            ansatz.elements.push(AnsatzElement {
                op_id: k,
                theta: 0.0,
            });
            let out = self.optimize(reg, ansatz, tol);
            if out.energy - energy > -ENERGY_DECREASE_TOL {
                *ansatz = saved;
                return Ok((energy, StopReason::NoImprovement));
            }
            energy = out.energy;
            let label = self.full_label(reg, k);
            let selected = Selected {
                id: self.full_ids[&label],
                label: label.to_string(),
                max_abs_gradient: grads[k].abs(),
            };
            self.push_row(
                reg,
                phase,
                RowEvent::Iteration,
                ansatz,
                energy,
                Some(selected),
                out.degraded,
            )?;
        }
    }

    fn full_label(&self, reg: &Register, k: usize) -> Excitation {
        let label = reg.pool[k].label;
        match &reg.map {
            Some(m) => label.map(|p| m.to_full(p)),
            None => label,
        }
    }
}

/// Loads the fixture named in `config` and runs.
pub fn run_adapt(config: &RunConfig) -> Result<AdaptResult> {
    config.validate()?;
    let fixture = Fixture::load(&config.fixture)?;
    run_adapt_with(&fixture.ints, config)
}

/// Runs on explicit integrals; `config.fixture` is only echoed.
pub fn run_adapt_with(full: &IntegralSet, config: &RunConfig) -> Result<AdaptResult> {
    config.validate()?;
    let problem = Problem::prepare(full, config.basis, &config.frozen, &config.deleted)?;
    run_problem(&problem, config)
}

/// Runs on an already prepared problem (the basis fields of `config` are not
/// consulted again).
pub fn run_problem(problem: &Problem, config: &RunConfig) -> Result<AdaptResult> {
    config.validate()?;
    let ints = &problem.ints;
    let pool = build_pool(ints.n_orb, problem.n_occ)?;
    let full_ids: BTreeMap<Excitation, usize> = pool.iter().map(|op| (op.label, op.id)).collect();
    let map = match config.phase_plan.n_s {
        Some(n_s) => {
            let m = select_subspace(
                &problem.rotation,
                problem.n_occ,
                n_s,
                config.subspace_criterion,
            )?;
            (!m.is_identity()).then_some(m)
        }
        None => None,
    };
    let mut runner = Runner {
        problem,
        config,
        full_ids,
        counters: Counters::default(),
        trace: AdaptTrace::default(),
        history: Vec::new(),
    };
    // One objective call for the reference energy.
    runner.counters.energy = 1;
    let subspace = map.as_ref().map(|m| m.active_spatial.clone());
    let (full_reg, mut ansatz, mut energy, mut stop);
    if let Some(map) = map {
        let sub_ints = freeze_and_select(ints, &map.frozen_occupied(), &map.deleted_virtual())?;
        let sub_pool = restrict_pool(&pool, &map);
        let sub_reg = Register::new(&sub_ints, &sub_pool, Some(map.clone()))?;
        let mut sub = AnsatzState::new(sub_reg.basis.reference_vector());
        let e_ref = dot(&sub.state, &sub_reg.h.matvec(&sub.state));
        runner.push_row(
            &sub_reg,
            Phase::Subspace,
            RowEvent::Reference,
            &sub,
            e_ref,
            None,
            false,
        )?;
        let tol = config.subspace_tol.unwrap_or(config.tol);
        let (e_sub, sub_stop) =
            runner.adapt_loop(&sub_reg, Phase::Subspace, &mut sub, e_ref, tol)?;
        drop(sub_reg);

        full_reg = Register::new(ints, &pool, None)?;
        let pairs: Vec<(&PoolOperator, f64)> = sub
            .elements
            .iter()
            .map(|e| (&sub_pool[e.op_id], e.theta))
            .collect();
        let embedded = embed_ansatz(&pairs, &map, &pool)?;
        ansatz = AnsatzState::new(full_reg.basis.reference_vector());
        ansatz.elements = embedded
            .iter()
            .map(|(op, theta)| AnsatzElement {
                op_id: op.id,
                theta: *theta,
            })
            .collect();
        ansatz.refresh(&full_reg.gens);
        let e_embed = dot(&ansatz.state, &full_reg.h.matvec(&ansatz.state));
        if (e_embed - e_sub).abs() > EMBED_ENERGY_TOL {
            return Err(Error::Internal(format!(
                "embedded energy {e_embed:.12} differs from subspace energy {e_sub:.12}"
            )));
        }
        energy = e_embed;
        let mut degraded = false;
        if config.reoptimize_on_embed && !ansatz.is_empty() {
            let out = runner.optimize(&full_reg, &mut ansatz, config.tol);
            energy = out.energy;
            degraded = out.degraded;
        }
        runner.push_row(
            &full_reg,
            Phase::Full,
            RowEvent::Embed,
            &ansatz,
            energy,
            None,
            degraded,
        )?;
        stop = sub_stop;
        if !matches!(sub_stop, StopReason::ErrorTarget | StopReason::IterationCap) {
            (energy, stop) =
                runner.adapt_loop(&full_reg, Phase::Full, &mut ansatz, energy, config.tol)?;
        }
    } else {
        full_reg = Register::new(ints, &pool, None)?;
        ansatz = AnsatzState::new(full_reg.basis.reference_vector());
        energy = problem.reference_energy;
        runner.push_row(
            &full_reg,
            Phase::Full,
            RowEvent::Reference,
            &ansatz,
            energy,
            None,
            false,
        )?;
        (energy, stop) =
            runner.adapt_loop(&full_reg, Phase::Full, &mut ansatz, energy, config.tol)?;
    }

    let final_elements = ansatz
        .elements
        .iter()
        .map(|e| FinalElement {
            operator_id: e.op_id,
            operator: pool[e.op_id].label.to_string(),
            theta: e.theta,
        })
        .collect();
    Ok(AdaptResult {
        total_energy_evaluations: runner.counters.energy,
        total_gradient_evaluations: runner.counters.pool_gradients,
        total_optimizer_gradient_calls: runner.counters.optimizer_gradients,
        trace: runner.trace,
        history: runner.history,
        ansatz: final_elements,
        final_energy: energy,
        fci_energy: problem.fci.energy,
        rhf_energy: problem.rhf_energy,
        reference_energy: problem.reference_energy,
        stop,
        n_qubits: full_reg.basis.n_qubits(),
        pool_size: pool.len(),
        subspace,
    })
}
