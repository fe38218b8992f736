//! Command runners. Each takes its parsed config plus resolved tolerances and
//! produces the `results` document, optional CSV rows, and a pass/fail flag.

use crate::config::{
    complex, BoundsConfig, CoeffLiteral, Cx, DesignCloneConfig, DesignTrials, NogoConfig,
    SelftestConfig, SuperposeFiniteConfig, SuperposeOverlapConfig, Tolerances,
};
use crate::report::{fnum, tv, TolValue};
use num_complex::Complex64 as C64;
use qslab::finite_superpose::{
    average_efficiency_bound_check, average_efficiency_bound_from_terms,
    design_copy_superposer_with, simulate_pair_superposer, QuadBoundTerm, QuadOverlaps,
    SuperposeCoefficients, SuperposeError,
};
use qslab::linalg::{hermitian_eigen, psd_factor, unitarity_defect, CMatrix, CVector};
use qslab::nogo::{
    consistency_residual, phase_covariance_violation, solve_consistency, EncodingCandidate,
    NogoError,
};
use qslab::overlap_superpose::{
    build_superposer_circuit, multi_superposer, rescaled_superposer, OverlapError, OverlapTask,
};
use qslab::set_transform::{
    build_target_family, design_machine, efficiency_bound_check, efficiency_bound_from_terms,
    simulate_machine, DesignError, DesignOptions, EfficiencyPolicy, MachineDesign, PairBoundTerm,
    TargetRecipe,
};
use qslab::states::{haar_state_from_rng, Permutation, StateError};
use qslab::{PureState, StateSet};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Outcome of a runner: the results document plus CSV rows when the command
/// produced per-sample data.
pub struct RunOutput {
    pub results: serde_json::Value,
    pub csv: Option<(Vec<&'static str>, Vec<Vec<String>>)>,
    /// Set by `selftest` when a suite fails; maps to exit 1.
    pub failed: bool,
}

impl RunOutput {
    fn json<T: Serialize>(results: &T) -> Result<Self, CliError> {
        Ok(Self {
            results: serde_json::to_value(results)
                .map_err(|e| CliError::Config(format!("serializing results: {e}")))?,
            csv: None,
            failed: false,
        })
    }
}

/// Runner errors carrying the exit-code classification.
#[derive(Debug)]
pub enum CliError {
    /// Unusable config or input (exit 1).
    Config(String),
    /// Engine failure surfaced with a module-qualified code (exit 1).
    Engine { code: String, message: String },
    /// Infeasible design: a reported outcome, not a crash (exit 2).
    Infeasible { code: String, message: String },
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "{m}"),
            CliError::Engine { code, message } | CliError::Infeasible { code, message } => {
                write!(f, "{code}: {message}")
            }
        }
    }
}

fn design_err(e: DesignError) -> CliError {
    let code = match &e {
        DesignError::InfeasibleEfficiency(_) => {
            return CliError::Infeasible {
                code: "set-transform::infeasible-efficiency".into(),
                message: e.to_string(),
            }
        }
        DesignError::LinearDependence => "set-transform::linear-dependence",
        DesignError::DegenerateTarget { .. } => "set-transform::degenerate-target",
        DesignError::BadCoefficients(_) => "set-transform::bad-coefficients",
        DesignError::ComplementUndefined(_) => "set-transform::complement-undefined",
        DesignError::IndexOutOfRange { .. } => "set-transform::index-out-of-range",
        DesignError::Linalg(_) => "linalg-core::failure",
        DesignError::State(_) => "states::failure",
    };
    CliError::Engine {
        code: code.into(),
        message: e.to_string(),
    }
}

fn superpose_err(e: SuperposeError) -> CliError {
    let code = match &e {
        SuperposeError::InfeasibleEfficiency(_) => {
            return CliError::Infeasible {
                code: "finite-superpose::infeasible-efficiency".into(),
                message: e.to_string(),
            }
        }
        SuperposeError::LinearDependence => "finite-superpose::linear-dependence",
        SuperposeError::ZeroCoefficient { .. } => "finite-superpose::zero-coefficient",
        SuperposeError::DegenerateTarget { .. } => "finite-superpose::degenerate-target",
        SuperposeError::BadInput(_) => "finite-superpose::bad-input",
        SuperposeError::IndexOutOfRange { .. } => "finite-superpose::index-out-of-range",
        SuperposeError::Linalg(_) => "linalg-core::failure",
        SuperposeError::State(_) => "states::failure",
    };
    CliError::Engine {
        code: code.into(),
        message: e.to_string(),
    }
}

fn overlap_err(e: OverlapError) -> CliError {
    let code = match &e {
        OverlapError::DimensionMismatch(_) => "overlap-superpose::dimension-mismatch",
        OverlapError::ZeroOverlap { .. } => "overlap-superpose::zero-overlap",
        OverlapError::BadInput(_) => "overlap-superpose::bad-input",
        OverlapError::Linalg(_) => "linalg-core::failure",
        OverlapError::State(_) => "states::failure",
    };
    CliError::Engine {
        code: code.into(),
        message: e.to_string(),
    }
}

fn nogo_err(e: NogoError) -> CliError {
    let code = match &e {
        NogoError::BadInput(_) => "nogo-lab::bad-input",
        NogoError::DimensionMismatch(_) => "nogo-lab::dimension-mismatch",
        NogoError::State(_) => "states::failure",
    };
    CliError::Engine {
        code: code.into(),
        message: e.to_string(),
    }
}

fn state_err(e: StateError) -> CliError {
    CliError::Engine {
        code: "states::failure".into(),
        message: e.to_string(),
    }
}

fn cfg_err(e: anyhow::Error) -> CliError {
    CliError::Config(e.to_string())
}

/// Per-trial seed derivation for batched runs.
fn trial_seed(base: u64, trial: usize) -> u64 {
    base ^ trial as u64
}

/// Draws `m` Haar states of dimension `d`, rejecting nearly dependent sets.
fn random_independent_set(rng: &mut ChaCha8Rng, m: usize, d: usize) -> StateSet {
    loop {
        let states: Vec<PureState> = (0..m)
            .map(|_| haar_state_from_rng(d, rng).expect("dim >= 2"))
            .collect();
        let set = StateSet::new(states).expect("matching dims");
        let eig = hermitian_eigen(&set.gram(1)).expect("gram is hermitian");
        if eig.min() > 1e-6 {
            return set;
        }
    }
}

fn random_outcomes(rng: &mut ChaCha8Rng, max_outcomes: usize, max_copies: usize) -> Vec<usize> {
    let top = max_copies.max(1);
    let n = rng.gen_range(1..=max_outcomes.max(1).min(top));
    let mut pool: Vec<usize> = (1..=top).collect();
    pool.shuffle(rng);
    let mut outcomes = pool[..n].to_vec();
    outcomes.sort_unstable();
    outcomes
}

fn parse_states(literals: &[crate::config::StateLiteral], at: &str) -> Result<StateSet, CliError> {
    let mut states = Vec::with_capacity(literals.len());
    for (i, lit) in literals.iter().enumerate() {
        states.push(lit.to_state(&format!("{at}[{i}]")).map_err(cfg_err)?);
    }
    StateSet::new(states).map_err(state_err)
}

// ---------------------------------------------------------------- design-clone

#[derive(Serialize)]
struct DesignSummary {
    states: usize,
    dim: usize,
    copies: usize,
    outcomes: Vec<usize>,
    gram_residual: TolValue,
    symbolic_defect: TolValue,
    feasibility_margin: TolValue,
    unitary_defect: Option<TolValue>,
    work_dim: usize,
    ancilla_dim: usize,
    probe_dim: usize,
    total_dim: usize,
}

fn summarize_design(design: &MachineDesign, tol: &Tolerances) -> DesignSummary {
    DesignSummary {
        states: design.set().len(),
        dim: design.set().dim(),
        copies: design.input_copies(),
        outcomes: design.outcomes().to_vec(),
        gram_residual: tv(design.gram_residual(), tol.residual),
        symbolic_defect: tv(design.symbolic_defect(), tol.residual),
        feasibility_margin: tv(design.feasibility_margin(), tol.residual),
        unitary_defect: design.unitary_defect().map(|d| tv(d, tol.residual)),
        work_dim: design.work_dim(),
        ancilla_dim: design.ancilla_dim(),
        probe_dim: design.probe_dim(),
        total_dim: design.total_dim(),
    }
}

#[derive(Serialize)]
struct OutcomeReport {
    copies: usize,
    designed: TolValue,
    simulated: TolValue,
    deviation: TolValue,
    fidelity_defect: Option<TolValue>,
}

#[derive(Serialize)]
struct StateReport {
    state: usize,
    outcomes: Vec<OutcomeReport>,
    failure_designed: TolValue,
    failure_simulated: TolValue,
    start_leak: TolValue,
}

#[derive(Serialize)]
struct DumpInfo {
    path: String,
    rows: usize,
    cols: usize,
}

#[derive(Serialize)]
struct DesignCloneResults {
    design: DesignSummary,
    simulations: Vec<StateReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    unitary_dump: Option<DumpInfo>,
}

#[derive(Serialize, Clone)]
struct DesignTrialRow {
    trial: usize,
    seed: u64,
    states: usize,
    dim: usize,
    copies: usize,
    outcomes: Vec<usize>,
    gram_residual: TolValue,
    unitary_defect: TolValue,
    probability_deviation: TolValue,
    fidelity_defect: TolValue,
}

#[derive(Serialize)]
struct DesignBatchResults {
    trials: usize,
    worst_gram_residual: TolValue,
    worst_unitary_defect: TolValue,
    worst_probability_deviation: TolValue,
    worst_fidelity_defect: TolValue,
    rows: Vec<DesignTrialRow>,
}

fn design_trial(
    trial: usize,
    base_seed: u64,
    spec: &DesignTrials,
    tol: &Tolerances,
) -> Result<DesignTrialRow, CliError> {
    let seed = trial_seed(base_seed, trial);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.gen_range(2..=spec.max_dim.max(2));
    let m = rng.gen_range(2..=spec.max_states.clamp(2, d));
    let k = rng.gen_range(1..=spec.max_copies.max(1));
    let outcomes = random_outcomes(&mut rng, spec.max_outcomes, spec.max_target_copies);
    let set = random_independent_set(&mut rng, m, d);
    let family = build_target_family(&set, &TargetRecipe::cloning(&set, outcomes.clone()))
        .map_err(design_err)?;
    let design = design_machine(
        &set,
        k,
        &family,
        &EfficiencyPolicy::default(),
        &DesignOptions {
            tol: tol.residual,
            assemble_unitary: true,
        },
    )
    .map_err(design_err)?;
    let mut p_dev = 0.0f64;
    let mut fid_def = 0.0f64;
    for i in 0..m {
        let rec = simulate_machine(&design, i).map_err(design_err)?;
        for o in &rec.outcomes {
            p_dev = p_dev.max((o.probability - o.designed_probability).abs());
            if let Some(f) = o.target_fidelity {
                fid_def = fid_def.max(1.0 - f);
            }
        }
        p_dev = p_dev.max((rec.failure_probability - rec.designed_failure_probability).abs());
        p_dev = p_dev.max(rec.start_leak);
    }
    Ok(DesignTrialRow {
        trial,
        seed,
        states: m,
        dim: d,
        copies: k,
        outcomes,
        gram_residual: tv(design.gram_residual(), tol.residual),
        unitary_defect: tv(design.unitary_defect().unwrap_or(0.0), tol.residual),
        probability_deviation: tv(p_dev, tol.probability),
        fidelity_defect: tv(fid_def, tol.residual),
    })
}

pub fn run_design_clone(cfg: &DesignCloneConfig, tol: &Tolerances) -> Result<RunOutput, CliError> {
    if let Some(spec) = &cfg.random_trials {
        if cfg.states.is_some() {
            return Err(CliError::Config(
                "design-clone: states and random_trials are mutually exclusive".into(),
            ));
        }
        let rows = (0..spec.count)
            .into_par_iter()
            .map(|t| design_trial(t, cfg.seed, spec, tol))
            .collect::<Result<Vec<_>, _>>()?;
        let worst = |f: fn(&DesignTrialRow) -> f64| rows.iter().map(f).fold(0.0f64, f64::max);
        let results = DesignBatchResults {
            trials: spec.count,
            worst_gram_residual: tv(worst(|r| r.gram_residual.value), tol.residual),
            worst_unitary_defect: tv(worst(|r| r.unitary_defect.value), tol.residual),
            worst_probability_deviation: tv(worst(|r| r.probability_deviation.value), tol.probability),
            worst_fidelity_defect: tv(worst(|r| r.fidelity_defect.value), tol.residual),
            rows: rows.clone(),
        };
        let csv_rows = rows
            .iter()
            .map(|r| {
                vec![
                    r.trial.to_string(),
                    r.seed.to_string(),
                    r.states.to_string(),
                    r.dim.to_string(),
                    r.copies.to_string(),
                    r.outcomes
                        .iter()
                        .map(|o| o.to_string())
                        .collect::<Vec<_>>()
                        .join("|"),
                    fnum(r.gram_residual.value),
                    fnum(r.unitary_defect.value),
                    fnum(r.probability_deviation.value),
                    fnum(r.fidelity_defect.value),
                ]
            })
            .collect();
        let mut out = RunOutput::json(&results)?;
        out.csv = Some((
            vec![
                "trial",
                "seed",
                "states",
                "dim",
                "copies",
                "outcomes",
                "gram_residual",
                "unitary_defect",
                "probability_deviation",
                "fidelity_defect",
            ],
            csv_rows,
        ));
        return Ok(out);
    }

    let literals = cfg.states.as_ref().ok_or_else(|| {
        CliError::Config("design-clone: provide states or random_trials".into())
    })?;
    let set = parse_states(literals, "states")?;
    if cfg.target_copies.is_empty() {
        return Err(CliError::Config(
            "design-clone: target_copies must name at least one outcome".into(),
        ));
    }
    let family = build_target_family(&set, &TargetRecipe::cloning(&set, cfg.target_copies.clone()))
        .map_err(design_err)?;
    let design = design_machine(
        &set,
        cfg.copies,
        &family,
        &cfg.policy.to_policy(),
        &DesignOptions {
            tol: tol.residual,
            assemble_unitary: true,
        },
    )
    .map_err(design_err)?;

    let mut simulations = Vec::with_capacity(set.len());
    for i in 0..set.len() {
        let rec = simulate_machine(&design, i).map_err(design_err)?;
        simulations.push(StateReport {
            state: i,
            outcomes: rec
                .outcomes
                .iter()
                .map(|o| OutcomeReport {
                    copies: o.label,
                    designed: tv(o.designed_probability, tol.probability),
                    simulated: tv(o.probability, tol.probability),
                    deviation: tv(
                        (o.probability - o.designed_probability).abs(),
                        tol.probability,
                    ),
                    fidelity_defect: o.target_fidelity.map(|f| tv(1.0 - f, tol.residual)),
                })
                .collect(),
            failure_designed: tv(rec.designed_failure_probability, tol.probability),
            failure_simulated: tv(rec.failure_probability, tol.probability),
            start_leak: tv(rec.start_leak, tol.residual),
        });
    }

    let unitary_dump = match (&cfg.dump_unitary, design.unitary()) {
        (Some(path), Some(u)) => {
            crate::report::write_unitary(std::path::Path::new(path), u)
                .map_err(|e| CliError::Config(format!("dump_unitary: {e}")))?;
            Some(DumpInfo {
                path: path.clone(),
                rows: u.nrows(),
                cols: u.ncols(),
            })
        }
        (Some(_), None) => {
            return Err(CliError::Config(
                "design-clone: dump_unitary needs an assembled unitary".into(),
            ))
        }
        _ => None,
    };

    RunOutput::json(&DesignCloneResults {
        design: summarize_design(&design, tol),
        simulations,
        unitary_dump,
    })
}

// ------------------------------------------------------------ superpose-finite

#[derive(Serialize)]
struct QuadBoundResult {
    quad: [usize; 4],
    lhs: TolValue,
    rhs: TolValue,
    slack: TolValue,
    holds: bool,
}

#[derive(Serialize)]
struct FiniteResults {
    states: usize,
    dim: usize,
    copies: usize,
    outcomes: Vec<usize>,
    gram_residual: TolValue,
    symbolic_defect: TolValue,
    swap_symmetry_defect: TolValue,
    feasibility_margin: TolValue,
    unitary_defect: Option<TolValue>,
    work_dim: usize,
    total_dim: usize,
    pair: [usize; 2],
    pair_outcomes: Vec<OutcomeReport>,
    failure_designed: TolValue,
    failure_simulated: TolValue,
    start_leak: TolValue,
    #[serde(skip_serializing_if = "Option::is_none")]
    quad_bound: Option<QuadBoundResult>,
}

pub fn run_superpose_finite(
    cfg: &SuperposeFiniteConfig,
    tol: &Tolerances,
) -> Result<RunOutput, CliError> {
    let set = parse_states(&cfg.states, "states")?;
    let m = set.len();
    let coeffs = match &cfg.coefficients {
        CoeffLiteral::Uniform => SuperposeCoefficients::uniform(m),
        CoeffLiteral::Tables { alpha, beta } => {
            let conv = |t: &Vec<Vec<Cx>>| -> Vec<Vec<C64>> {
                t.iter()
                    .map(|row| row.iter().map(|&c| complex(c)).collect())
                    .collect()
            };
            SuperposeCoefficients::new(conv(alpha), conv(beta)).map_err(superpose_err)?
        }
    };
    let design = design_copy_superposer_with(
        &set,
        cfg.copies,
        &coeffs,
        &cfg.outcomes,
        &DesignOptions {
            tol: tol.residual,
            assemble_unitary: true,
        },
    )
    .map_err(superpose_err)?;
    let pair = cfg.pair.unwrap_or([0, 1]);
    let rec = simulate_pair_superposer(&design, (pair[0], pair[1])).map_err(superpose_err)?;
    let quad_bound = match cfg.quad {
        None => None,
        Some(q) => {
            let report = average_efficiency_bound_check(&design, (q[0], q[1], q[2], q[3]))
                .map_err(superpose_err)?;
            Some(QuadBoundResult {
                quad: q,
                lhs: tv(report.lhs, tol.slack),
                rhs: tv(report.rhs, tol.slack),
                slack: tv(report.slack, tol.slack),
                holds: report.slack >= -tol.slack,
            })
        }
    };
    RunOutput::json(&FiniteResults {
        states: m,
        dim: set.dim(),
        copies: cfg.copies,
        outcomes: cfg.outcomes.clone(),
        gram_residual: tv(design.gram_residual(), tol.residual),
        symbolic_defect: tv(design.symbolic_defect(), tol.residual),
        swap_symmetry_defect: tv(design.swap_symmetry_defect(), tol.residual),
        feasibility_margin: tv(design.feasibility_margin(), tol.residual),
        unitary_defect: design.unitary_defect().map(|d| tv(d, tol.residual)),
        work_dim: design.work_dim(),
        total_dim: design.total_dim(),
        pair,
        pair_outcomes: rec
            .outcomes
            .iter()
            .map(|o| OutcomeReport {
                copies: o.label,
                designed: tv(o.designed_probability, tol.probability),
                simulated: tv(o.probability, tol.probability),
                deviation: tv((o.probability - o.designed_probability).abs(), tol.probability),
                fidelity_defect: o.target_fidelity.map(|f| tv(1.0 - f, tol.residual)),
            })
            .collect(),
        failure_designed: tv(rec.designed_failure_probability, tol.probability),
        failure_simulated: tv(rec.failure_probability, tol.probability),
        start_leak: tv(rec.start_leak, tol.residual),
        quad_bound,
    })
}

// ----------------------------------------------------------- superpose-overlap

#[derive(Serialize)]
struct RescaledResults {
    c_alpha: TolValue,
    c_beta: TolValue,
    lambda_max_eigen: TolValue,
    lambda_max_closed_form: TolValue,
    closed_form_deviation: TolValue,
    success_probability: TolValue,
    baseline_probability: TolValue,
    improved: bool,
}

#[derive(Serialize)]
struct OverlapResults {
    branches: usize,
    dim: usize,
    copies: usize,
    configurations: Vec<Vec<usize>>,
    branch_c: Vec<TolValue>,
    branch_theta: Vec<TolValue>,
    predicted_probability: TolValue,
    simulated_probability: TolValue,
    probability_deviation: TolValue,
    output_fidelity_defect: Option<TolValue>,
    contraction_defect: TolValue,
    #[serde(skip_serializing_if = "Option::is_none")]
    rescaled: Option<RescaledResults>,
}

#[derive(Serialize, Clone)]
struct OverlapTrialRow {
    trial: usize,
    seed: u64,
    c1: TolValue,
    c2: TolValue,
    predicted: TolValue,
    simulated: TolValue,
    deviation: TolValue,
    fidelity_defect: TolValue,
    contraction_defect: TolValue,
}

#[derive(Serialize)]
struct OverlapBatchResults {
    trials: usize,
    worst_probability_deviation: TolValue,
    worst_fidelity_defect: TolValue,
    worst_contraction_defect: TolValue,
    rows: Vec<OverlapTrialRow>,
}

fn uniform_mu(n: usize) -> PureState {
    let amp = C64::new(1.0 / (n as f64).sqrt(), 0.0);
    PureState::from_vector_exact(CVector::from_element(n, amp)).expect("n >= 2")
}

fn overlap_trial(
    trial: usize,
    base_seed: u64,
    dim: usize,
    copies: usize,
    tol: &Tolerances,
) -> Result<OverlapTrialRow, CliError> {
    let seed = trial_seed(base_seed, trial);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ref_dim = dim.pow(2 * copies as u32 - 1);
    let task = loop {
        let psi = haar_state_from_rng(dim, &mut rng).map_err(state_err)?;
        let phi = haar_state_from_rng(dim, &mut rng).map_err(state_err)?;
        let reference = haar_state_from_rng(ref_dim, &mut rng).map_err(state_err)?;
        match OverlapTask::pair(&psi, &phi, copies, reference) {
            Ok(t) if (0..2).all(|j| t.branch_c(j) > 1e-6) => break t,
            Ok(_) | Err(OverlapError::ZeroOverlap { .. }) => continue,
            Err(e) => return Err(overlap_err(e)),
        }
    };
    let mu = uniform_mu(2);
    let predicted = task.predicted_probability(&mu).map_err(overlap_err)?;
    let outcome = multi_superposer(&task, &mu).map_err(overlap_err)?;
    let (target, _) = task.target_output(&mu).map_err(overlap_err)?;
    let fidelity_defect = match (target, &outcome.output) {
        (Some(t), Some(o)) => 1.0 - t.fidelity_with(o),
        _ => 0.0,
    };
    let contraction = build_superposer_circuit(&task)
        .map_err(overlap_err)?
        .contraction_defect()
        .map_err(overlap_err)?;
    Ok(OverlapTrialRow {
        trial,
        seed,
        c1: tv(task.report().c1(), tol.probability),
        c2: tv(task.report().c2(), tol.probability),
        predicted: tv(predicted, tol.probability),
        simulated: tv(outcome.success_probability, tol.probability),
        deviation: tv(
            (predicted - outcome.success_probability).abs(),
            tol.probability,
        ),
        fidelity_defect: tv(fidelity_defect, tol.residual),
        contraction_defect: tv(contraction, tol.residual),
    })
}

pub fn run_superpose_overlap(
    cfg: &SuperposeOverlapConfig,
    tol: &Tolerances,
) -> Result<RunOutput, CliError> {
    if let Some(spec) = &cfg.random_trials {
        if cfg.states.is_some() || cfg.reference.is_some() {
            return Err(CliError::Config(
                "superpose-overlap: explicit inputs and random_trials are mutually exclusive"
                    .into(),
            ));
        }
        if spec.dim < 2 || spec.copies == 0 {
            return Err(CliError::Config(
                "superpose-overlap: random_trials needs dim >= 2 and copies >= 1".into(),
            ));
        }
        let rows = (0..spec.count)
            .into_par_iter()
            .map(|t| overlap_trial(t, cfg.seed, spec.dim, spec.copies, tol))
            .collect::<Result<Vec<_>, _>>()?;
        let worst = |f: fn(&OverlapTrialRow) -> f64| rows.iter().map(f).fold(0.0f64, f64::max);
        let results = OverlapBatchResults {
            trials: spec.count,
            worst_probability_deviation: tv(worst(|r| r.deviation.value), tol.probability),
            worst_fidelity_defect: tv(worst(|r| r.fidelity_defect.value), tol.residual),
            worst_contraction_defect: tv(worst(|r| r.contraction_defect.value), tol.residual),
            rows: rows.clone(),
        };
        let csv_rows = rows
            .iter()
            .map(|r| {
                vec![
                    r.trial.to_string(),
                    r.seed.to_string(),
                    fnum(r.c1.value),
                    fnum(r.c2.value),
                    fnum(r.predicted.value),
                    fnum(r.simulated.value),
                    fnum(r.deviation.value),
                    fnum(r.fidelity_defect.value),
                    fnum(r.contraction_defect.value),
                ]
            })
            .collect();
        let mut out = RunOutput::json(&results)?;
        out.csv = Some((
            vec![
                "trial",
                "seed",
                "c1",
                "c2",
                "predicted",
                "simulated",
                "deviation",
                "fidelity_defect",
                "contraction_defect",
            ],
            csv_rows,
        ));
        return Ok(out);
    }

    let literals = cfg.states.as_ref().ok_or_else(|| {
        CliError::Config("superpose-overlap: provide states or random_trials".into())
    })?;
    let mut states = Vec::with_capacity(literals.len());
    for (i, lit) in literals.iter().enumerate() {
        states.push(lit.to_state(&format!("states[{i}]")).map_err(cfg_err)?);
    }
    let reference = cfg
        .reference
        .as_ref()
        .ok_or_else(|| CliError::Config("superpose-overlap: reference is required".into()))?
        .to_state("reference")
        .map_err(cfg_err)?;
    let taus: Option<Vec<Permutation>> = match &cfg.taus {
        None => None,
        Some(lists) => {
            let mut perms = Vec::with_capacity(lists.len());
            for (j, images) in lists.iter().enumerate() {
                perms.push(
                    Permutation::from_images(images.clone())
                        .map_err(|e| CliError::Config(format!("taus[{j}]: {e}")))?,
                );
            }
            Some(perms)
        }
    };
    let task = OverlapTask::new(&states, cfg.copies, reference, taus.as_deref())
        .map_err(overlap_err)?;
    let n = task.branch_count();
    let mu = match &cfg.mu {
        None => uniform_mu(n),
        Some(raw) => {
            if raw.len() != n {
                return Err(CliError::Config(format!(
                    "mu: expected {n} coefficients, got {}",
                    raw.len()
                )));
            }
            PureState::new(CVector::from_vec(raw.iter().map(|&c| complex(c)).collect()))
                .map_err(|e| CliError::Config(format!("mu: {e}")))?
        }
    };
    let report = task.report();
    let predicted = task.predicted_probability(&mu).map_err(overlap_err)?;
    let outcome = multi_superposer(&task, &mu).map_err(overlap_err)?;
    let (target, _) = task.target_output(&mu).map_err(overlap_err)?;
    let output_fidelity_defect = match (target, &outcome.output) {
        (Some(t), Some(o)) => Some(tv(1.0 - t.fidelity_with(o), tol.residual)),
        _ => None,
    };
    let contraction = build_superposer_circuit(&task)
        .map_err(overlap_err)?
        .contraction_defect()
        .map_err(overlap_err)?;

    let rescaled = match &cfg.rescaled {
        None => None,
        Some(spec) => {
            if n != 2 || cfg.copies != 2 {
                return Err(CliError::Config(
                    "rescaled: needs exactly two states and two copies".into(),
                ));
            }
            let rec = rescaled_superposer(
                task.state(0),
                task.state(1),
                task.reference(),
                complex(spec.alpha),
                complex(spec.beta),
            )
            .map_err(overlap_err)?;
            Some(RescaledResults {
                c_alpha: tv(rec.c_alpha_branch, tol.probability),
                c_beta: tv(rec.c_beta_branch, tol.probability),
                lambda_max_eigen: tv(rec.lambda_max, tol.spectral),
                lambda_max_closed_form: tv(rec.lambda_max_closed_form, tol.spectral),
                closed_form_deviation: tv(
                    (rec.lambda_max - rec.lambda_max_closed_form).abs(),
                    tol.spectral,
                ),
                success_probability: tv(rec.success_probability, tol.probability),
                baseline_probability: tv(rec.baseline_probability, tol.probability),
                improved: rec.improved,
            })
        }
    };

    RunOutput::json(&OverlapResults {
        branches: n,
        dim: task.dim(),
        copies: cfg.copies,
        configurations: (0..n).map(|j| task.branch_configuration(j).to_vec()).collect(),
        branch_c: report
            .branch_c
            .iter()
            .map(|&c| tv(c, tol.probability))
            .collect(),
        branch_theta: report
            .branch_theta
            .iter()
            .map(|&t| tv(t, tol.residual))
            .collect(),
        predicted_probability: tv(predicted, tol.probability),
        simulated_probability: tv(outcome.success_probability, tol.probability),
        probability_deviation: tv(
            (predicted - outcome.success_probability).abs(),
            tol.probability,
        ),
        output_fidelity_defect,
        contraction_defect: tv(contraction, tol.residual),
        rescaled,
    })
}

// ----------------------------------------------------------------------- nogo

#[derive(Serialize)]
struct SolutionRow {
    a: Cx,
    b: Cx,
    equation_residual: TolValue,
    physical_residual: TolValue,
}

#[derive(Serialize)]
struct ConsistencyResults {
    solutions: Vec<SolutionRow>,
    degenerate: Option<String>,
    only_trivial: bool,
}

#[derive(Serialize)]
struct GapResults {
    samples: usize,
    min_residual: TolValue,
    mean_residual: TolValue,
    percentile_residual: TolValue,
}

#[derive(Serialize)]
struct PhaseResults {
    max_violation: TolValue,
    argmax_theta: TolValue,
    vanishes: bool,
}

#[derive(Serialize, Clone)]
struct GridCell {
    p0: f64,
    p0_prime: f64,
    branch_phase: f64,
    mean_residual: TolValue,
    min_residual: TolValue,
}

#[derive(Serialize)]
struct GridResults {
    resolution: usize,
    samples: usize,
    cells: usize,
    worst_mean_residual: TolValue,
    worst_cell: GridCell,
}

#[derive(Serialize)]
struct NogoResults {
    #[serde(skip_serializing_if = "Option::is_none")]
    consistency: Option<ConsistencyResults>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gap: Option<GapResults>,
    #[serde(skip_serializing_if = "Option::is_none")]
    phase: Option<PhaseResults>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<GridResults>,
}

pub fn run_nogo(cfg: &NogoConfig, tol: &Tolerances) -> Result<RunOutput, CliError> {
    if !cfg.consistency && cfg.gap.is_none() && cfg.phase.is_none() && cfg.grid.is_none() {
        return Err(CliError::Config(
            "nogo: request at least one of consistency, gap, phase, grid".into(),
        ));
    }
    let needs_candidate = cfg.consistency || cfg.gap.is_some() || cfg.grid.is_some();
    let candidate: Option<EncodingCandidate> = match (&cfg.candidate, needs_candidate) {
        (Some(spec), _) => Some(spec.to_candidate("candidate").map_err(cfg_err)?),
        (None, true) => {
            return Err(CliError::Config(
                "nogo: consistency/gap/grid need a candidate".into(),
            ))
        }
        (None, false) => None,
    };

    let mut gap_rows: Option<Vec<Vec<String>>> = None;
    let mut grid_rows: Option<Vec<Vec<String>>> = None;

    let consistency = if cfg.consistency {
        let cand = candidate.as_ref().expect("checked above");
        let report = solve_consistency(cand);
        Some(ConsistencyResults {
            solutions: report
                .solutions
                .iter()
                .map(|&(a, b)| SolutionRow {
                    a: [a.re, a.im],
                    b: [b.re, b.im],
                    equation_residual: tv(consistency_residual(cand, a, b), tol.residual),
                    physical_residual: tv(cand.residual(a, b), tol.residual),
                })
                .collect(),
            degenerate: report.degenerate.clone(),
            only_trivial: report.only_trivial(),
        })
    } else {
        None
    };

    let gap = match &cfg.gap {
        None => None,
        Some(spec) => {
            let cand = candidate.as_ref().expect("checked above");
            let report = cand
                .encoding_gap(spec.samples, cfg.seed)
                .map_err(nogo_err)?;
            let samples = cand
                .residual_samples(spec.samples, cfg.seed)
                .map_err(nogo_err)?;
            gap_rows = Some(
                samples
                    .iter()
                    .enumerate()
                    .map(|(i, &r)| vec![i.to_string(), fnum(r)])
                    .collect(),
            );
            Some(GapResults {
                samples: spec.samples,
                min_residual: tv(report.min_residual, tol.witness_zero),
                mean_residual: tv(report.mean_residual, tol.witness_zero),
                percentile_residual: tv(report.percentile_residual, tol.witness_zero),
            })
        }
    };

    let phase = match &cfg.phase {
        None => None,
        Some(spec) => {
            let psi = spec.psi.to_state("phase.psi").map_err(cfg_err)?;
            let big_phi = spec.big_phi.to_state("phase.big_phi").map_err(cfg_err)?;
            let report = phase_covariance_violation(
                spec.n,
                complex(spec.alpha),
                complex(spec.beta),
                &psi,
                &big_phi,
                spec.grid_size,
            )
            .map_err(nogo_err)?;
            Some(PhaseResults {
                max_violation: tv(report.max_violation, tol.witness_zero),
                argmax_theta: tv(report.argmax_theta, tol.residual),
                vanishes: report.max_violation <= tol.witness_zero,
            })
        }
    };

    let grid = match &cfg.grid {
        None => None,
        Some(spec) => {
            let cand_spec = cfg.candidate.as_ref().expect("checked above");
            if spec.resolution == 0 || spec.samples == 0 {
                return Err(CliError::Config(
                    "nogo: grid resolution and samples must be positive".into(),
                ));
            }
            let r = spec.resolution;
            let alpha = complex(cand_spec.alpha);
            let beta = complex(cand_spec.beta);
            let cells: Vec<GridCell> = (0..r * r * r)
                .into_par_iter()
                .map(|cell| -> Result<GridCell, CliError> {
                    let (i, j, l) = (cell / (r * r), (cell / r) % r, cell % r);
                    let p0 = (i + 1) as f64 / r as f64;
                    let p0_prime = (j + 1) as f64 / r as f64;
                    let phase = std::f64::consts::TAU * l as f64 / r as f64;
                    let cand = EncodingCandidate::new(p0, p0_prime, phase, alpha, beta)
                        .map_err(nogo_err)?;
                    let report = cand
                        .encoding_gap(spec.samples, trial_seed(cfg.seed, cell))
                        .map_err(nogo_err)?;
                    Ok(GridCell {
                        p0,
                        p0_prime,
                        branch_phase: phase,
                        mean_residual: tv(report.mean_residual, tol.witness_zero),
                        min_residual: tv(report.min_residual, tol.witness_zero),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            let worst = cells
                .iter()
                .min_by(|a, b| {
                    a.mean_residual
                        .value
                        .partial_cmp(&b.mean_residual.value)
                        .expect("finite means")
                })
                .expect("grid nonempty")
                .clone();
            grid_rows = Some(
                cells
                    .iter()
                    .map(|c| {
                        vec![
                            fnum(c.p0),
                            fnum(c.p0_prime),
                            fnum(c.branch_phase),
                            fnum(c.mean_residual.value),
                            fnum(c.min_residual.value),
                        ]
                    })
                    .collect(),
            );
            Some(GridResults {
                resolution: r,
                samples: spec.samples,
                cells: cells.len(),
                worst_mean_residual: tv(worst.mean_residual.value, tol.witness_zero),
                worst_cell: worst,
            })
        }
    };

    let mut out = RunOutput::json(&NogoResults {
        consistency,
        gap,
        phase,
        grid,
    })?;
    // Row data is unambiguous only when exactly one sampling section ran.
    out.csv = match (gap_rows, grid_rows) {
        (Some(rows), None) => Some((vec!["sample", "residual"], rows)),
        (None, Some(rows)) => Some((
            vec!["p0", "p0_prime", "branch_phase", "mean_residual", "min_residual"],
            rows,
        )),
        _ => None,
    };
    Ok(out)
}

// --------------------------------------------------------------------- bounds

#[derive(Serialize)]
struct WitnessResult {
    lhs: TolValue,
    rhs: TolValue,
    slack: TolValue,
    negative: bool,
}

#[derive(Serialize)]
struct BoundsWitnesses {
    /// Certain 1->2 cloning of a pair with overlap 0.9.
    pair: WitnessResult,
    /// Certain mass cloning (1000 copies) of a pair with overlap 0.999.
    quad: WitnessResult,
}

#[derive(Serialize, Clone)]
struct BoundsRow {
    trial: usize,
    seed: u64,
    kind: &'static str,
    lhs: TolValue,
    rhs: TolValue,
    slack: TolValue,
}

#[derive(Serialize)]
struct BoundsRandomResults {
    trials: usize,
    evaluations: usize,
    min_slack: TolValue,
    rows: Vec<BoundsRow>,
}

#[derive(Serialize)]
struct BoundsResults {
    #[serde(skip_serializing_if = "Option::is_none")]
    witnesses: Option<BoundsWitnesses>,
    #[serde(skip_serializing_if = "Option::is_none")]
    random: Option<BoundsRandomResults>,
}

fn pair_witness(tol: &Tolerances) -> WitnessResult {
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let term = PairBoundTerm {
        outcome: 2,
        p_i: 1.0,
        p_j: 1.0,
        alpha_i: one,
        alpha_j: one,
        beta_i: zero,
        beta_j: zero,
        r_i: 1.0,
        r_j: 1.0,
        lambda_ij: zero,
        lambda_ji: zero,
        fixed_overlap: zero,
    };
    let report = efficiency_bound_from_terms(C64::new(0.9, 0.0), 1, &[term]);
    WitnessResult {
        lhs: tv(report.lhs, tol.slack),
        rhs: tv(report.rhs, tol.slack),
        slack: tv(report.slack, tol.slack),
        negative: report.slack < -tol.slack,
    }
}

fn quad_witness(tol: &Tolerances) -> WitnessResult {
    let a = C64::new(0.999, 0.0);
    let overlaps = QuadOverlaps {
        a_i1j1: a,
        a_i1j2: a,
        a_i2j1: a,
        a_i2j2: a,
    };
    let term = QuadBoundTerm {
        outcome: 1000,
        p_first: 1.0,
        p_second: 1.0,
        r_first: 0.5,
        r_second: 0.5,
    };
    let report = average_efficiency_bound_from_terms(overlaps, 1, &[term]);
    WitnessResult {
        lhs: tv(report.lhs, tol.slack),
        rhs: tv(report.rhs, tol.slack),
        slack: tv(report.slack, tol.slack),
        negative: report.slack < -tol.slack,
    }
}

fn bounds_trial(
    trial: usize,
    base_seed: u64,
    spec: &crate::config::BoundsTrials,
    tol: &Tolerances,
) -> Result<Vec<BoundsRow>, CliError> {
    let seed = trial_seed(base_seed, trial);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.gen_range(2..=spec.max_dim.max(2));
    let m = rng.gen_range(2..=spec.max_states.clamp(2, d));
    let k = rng.gen_range(1..=spec.max_copies.max(1));
    let options = DesignOptions {
        tol: tol.residual,
        assemble_unitary: false,
    };
    let mut rows = Vec::new();
    if trial % 2 == 0 {
        // Transformation machine, pairwise bound over every pair.
        let outcomes = random_outcomes(&mut rng, 3, 3);
        let set = random_independent_set(&mut rng, m, d);
        let family = build_target_family(&set, &TargetRecipe::cloning(&set, outcomes))
            .map_err(design_err)?;
        let design = design_machine(&set, k, &family, &EfficiencyPolicy::default(), &options)
            .map_err(design_err)?;
        for i in 0..m {
            for j in (i + 1)..m {
                let report = efficiency_bound_check(&design, (i, j)).map_err(design_err)?;
                rows.push(BoundsRow {
                    trial,
                    seed,
                    kind: "pair",
                    lhs: tv(report.lhs, tol.slack),
                    rhs: tv(report.rhs, tol.slack),
                    slack: tv(report.slack, tol.slack),
                });
            }
        }
    } else {
        // Copy superposer, averaged bound on sampled quadruples.
        let outcomes = random_outcomes(&mut rng, 2, 2);
        let set = random_independent_set(&mut rng, m, d);
        let coeffs = SuperposeCoefficients::uniform(m);
        let design = design_copy_superposer_with(&set, k, &coeffs, &outcomes, &options)
            .map_err(superpose_err)?;
        for _ in 0..3 {
            let q = (
                rng.gen_range(0..m),
                rng.gen_range(0..m),
                rng.gen_range(0..m),
                rng.gen_range(0..m),
            );
            let report = average_efficiency_bound_check(&design, q).map_err(superpose_err)?;
            rows.push(BoundsRow {
                trial,
                seed,
                kind: "quad",
                lhs: tv(report.lhs, tol.slack),
                rhs: tv(report.rhs, tol.slack),
                slack: tv(report.slack, tol.slack),
            });
        }
    }
    Ok(rows)
}

pub fn run_bounds(cfg: &BoundsConfig, tol: &Tolerances) -> Result<RunOutput, CliError> {
    if !cfg.witnesses && cfg.random_trials.is_none() {
        return Err(CliError::Config(
            "bounds: request witnesses and/or random_trials".into(),
        ));
    }
    let witnesses = cfg.witnesses.then(|| BoundsWitnesses {
        pair: pair_witness(tol),
        quad: quad_witness(tol),
    });
    let mut csv = None;
    let random = match &cfg.random_trials {
        None => None,
        Some(spec) => {
            let nested = (0..spec.count)
                .into_par_iter()
                .map(|t| bounds_trial(t, cfg.seed, spec, tol))
                .collect::<Result<Vec<_>, _>>()?;
            let rows: Vec<BoundsRow> = nested.into_iter().flatten().collect();
            let min_slack = rows
                .iter()
                .map(|r| r.slack.value)
                .fold(f64::INFINITY, f64::min);
            csv = Some((
                vec!["trial", "seed", "kind", "lhs", "rhs", "slack"],
                rows.iter()
                    .map(|r| {
                        vec![
                            r.trial.to_string(),
                            r.seed.to_string(),
                            r.kind.to_string(),
                            fnum(r.lhs.value),
                            fnum(r.rhs.value),
                            fnum(r.slack.value),
                        ]
                    })
                    .collect(),
            ));
            Some(BoundsRandomResults {
                trials: spec.count,
                evaluations: rows.len(),
                min_slack: tv(min_slack, tol.slack),
                rows,
            })
        }
    };
    let mut out = RunOutput::json(&BoundsResults { witnesses, random })?;
    out.csv = csv;
    Ok(out)
}

// ------------------------------------------------------------------- selftest

#[derive(Serialize)]
struct SuiteRow {
    suite: &'static str,
    cases: usize,
    observed: f64,
    requirement: String,
    pass: bool,
}

#[derive(Serialize)]
struct SelftestResults {
    quick: bool,
    suites: Vec<SuiteRow>,
    all_pass: bool,
}

pub fn run_selftest(cfg: &SelftestConfig, tol: &Tolerances) -> Result<RunOutput, CliError> {
    let n = |full: usize, quick: usize| if cfg.quick { quick } else { full };
    let mut suites = Vec::new();

    // Machine designs reproduce their probability tables.
    {
        let cases = n(20, 5);
        let spec = DesignTrials {
            count: cases,
            max_states: 3,
            max_dim: 3,
            max_copies: 2,
            max_outcomes: 2,
            max_target_copies: 3,
        };
        let mut worst = 0.0f64;
        for t in 0..cases {
            let row = design_trial(t, cfg.seed, &spec, tol)?;
            worst = worst
                .max(row.gram_residual.value)
                .max(row.unitary_defect.value)
                .max(row.probability_deviation.value)
                .max(row.fidelity_defect.value);
        }
        suites.push(SuiteRow {
            suite: "design-grams",
            cases,
            observed: worst,
            requirement: format!("<= {}", tol.residual),
            pass: worst <= tol.residual,
        });
    }

    // Overlap superposer matches its probability formula.
    {
        let cases = n(100, 20);
        let mut worst = 0.0f64;
        for t in 0..cases {
            let row = overlap_trial(t, cfg.seed.wrapping_add(1), 2, 2, tol)?;
            worst = worst
                .max(row.deviation.value)
                .max(row.fidelity_defect.value)
                .max(row.contraction_defect.value);
        }
        suites.push(SuiteRow {
            suite: "overlap-probability",
            cases,
            observed: worst,
            requirement: format!("<= {}", tol.residual),
            pass: worst <= tol.residual,
        });
    }

    // Efficiency bounds hold on feasible designs.
    {
        let cases = n(200, 40);
        let spec = crate::config::BoundsTrials {
            count: cases,
            max_states: 3,
            max_dim: 3,
            max_copies: 2,
        };
        let mut min_slack = f64::INFINITY;
        for t in 0..cases {
            for row in bounds_trial(t, cfg.seed.wrapping_add(2), &spec, tol)? {
                min_slack = min_slack.min(row.slack.value);
            }
        }
        suites.push(SuiteRow {
            suite: "bound-slacks",
            cases,
            observed: min_slack,
            requirement: format!(">= -{}", tol.slack),
            pass: min_slack >= -tol.slack,
        });
    }

    // Phase witness vanishes exactly on the covariant cases.
    {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(3));
        let mut worst_zero = 0.0f64;
        for _ in 0..n(10, 3) {
            let psi = haar_state_from_rng(2, &mut rng).map_err(state_err)?;
            let phi = haar_state_from_rng(4, &mut rng).map_err(state_err)?;
            let lone = phase_covariance_violation(
                2,
                C64::new(1.0, 0.0),
                C64::new(0.0, 0.0),
                &psi,
                &phi,
                360,
            )
            .map_err(nogo_err)?;
            let parallel = phase_covariance_violation(
                2,
                C64::new(0.6, 0.0),
                C64::new(0.0, 0.8),
                &psi,
                &psi.tensor_power(2),
                360,
            )
            .map_err(nogo_err)?;
            worst_zero = worst_zero.max(lone.max_violation).max(parallel.max_violation);
        }
        suites.push(SuiteRow {
            suite: "phase-witness-zeros",
            cases: n(10, 3) * 2,
            observed: worst_zero,
            requirement: format!("<= {}", tol.witness_zero),
            pass: worst_zero <= tol.witness_zero,
        });

        let mut min_positive = f64::INFINITY;
        let mut cases = 0usize;
        while cases < n(20, 5) {
            let psi = haar_state_from_rng(2, &mut rng).map_err(state_err)?;
            let phi = haar_state_from_rng(4, &mut rng).map_err(state_err)?;
            let coeffs = haar_state_from_rng(2, &mut rng).map_err(state_err)?;
            let alpha = coeffs.amplitudes()[0];
            let beta = coeffs.amplitudes()[1];
            if beta.norm_sqr() < 0.05 || beta.norm_sqr() > 0.95 {
                continue;
            }
            let report = phase_covariance_violation(2, alpha, beta, &psi, &phi, 360)
                .map_err(nogo_err)?;
            min_positive = min_positive.min(report.max_violation);
            cases += 1;
        }
        suites.push(SuiteRow {
            suite: "phase-witness-positives",
            cases,
            observed: min_positive,
            requirement: "> 1e-8".into(),
            pass: min_positive > 1e-8,
        });
    }

    // Encoding gap: basis inputs consistent, generic candidate bounded away.
    {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let cand = EncodingCandidate::new(0.5, 0.5, 0.0, C64::new(h, 0.0), C64::new(h, 0.0))
            .map_err(nogo_err)?;
        let basis = cand
            .residual(C64::new(1.0, 0.0), C64::new(0.0, 0.0))
            .max(cand.residual(C64::new(0.0, 0.0), C64::new(1.0, 0.0)));
        let gap = cand
            .encoding_gap(n(300, 60), cfg.seed.wrapping_add(4))
            .map_err(nogo_err)?;
        let pass = basis <= tol.witness_zero && gap.mean_residual > 0.02;
        suites.push(SuiteRow {
            suite: "encoding-gap",
            cases: n(300, 60),
            observed: gap.mean_residual,
            requirement: "> 0.02 with exact basis consistency".into(),
            pass,
        });
    }

    // Factorization, isometry completion and swap algebra round-trip.
    {
        let cases = n(50, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(5));
        let mut worst = 0.0f64;
        for _ in 0..cases {
            let m = rng.gen_range(2..=4usize);
            // PSD factorization reproduces the matrix as a column Gram.
            let b = CMatrix::from_fn(m, m, |_, _| {
                C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            let q = &b * b.adjoint();
            let fac = psd_factor(&q, 1e-10).map_err(|e| CliError::Engine {
                code: "linalg-core::failure".into(),
                message: e.to_string(),
            })?;
            for i in 0..m {
                for j in 0..m {
                    let rebuilt = fac.unit_vectors[i].dotc(&fac.unit_vectors[j])
                        * fac.column_norms[i]
                        * fac.column_norms[j];
                    worst = worst.max((rebuilt - q[(i, j)]).norm());
                }
            }
            // Isometry completion is unitary and matches its columns.
            let dim = rng.gen_range(2..=6usize);
            let target = haar_state_from_rng(dim, &mut rng).map_err(state_err)?;
            let seed_u = qslab::linalg::complete_isometry(
                &[CVector::from_fn(dim, |r, _| {
                    C64::new(if r == 0 { 1.0 } else { 0.0 }, 0.0)
                })],
                &[target.amplitudes().clone_owned()],
                1e-10,
            )
            .map_err(|e| CliError::Engine {
                code: "linalg-core::failure".into(),
                message: e.to_string(),
            })?;
            worst = worst.max(unitarity_defect(&seed_u));
            // Swap operators compose like their permutations.
            let factors = rng.gen_range(2..=4usize);
            let dims = vec![2usize; factors];
            let mut im1: Vec<usize> = (0..factors).collect();
            let mut im2 = im1.clone();
            im1.shuffle(&mut rng);
            im2.shuffle(&mut rng);
            let g = Permutation::from_images(im1).map_err(state_err)?;
            let hperm = Permutation::from_images(im2).map_err(state_err)?;
            let sg = qslab::states::swap_operator(&g, &dims).map_err(state_err)?;
            let sh = qslab::states::swap_operator(&hperm, &dims).map_err(state_err)?;
            let sgh = qslab::states::swap_operator(&g.compose(&hperm), &dims).map_err(state_err)?;
            worst = worst.max((&sg * &sh - sgh).norm());
        }
        suites.push(SuiteRow {
            suite: "factor-roundtrips",
            cases,
            observed: worst,
            requirement: format!("<= {}", tol.residual),
            pass: worst <= tol.residual,
        });
    }

    let all_pass = suites.iter().all(|s| s.pass);
    let mut out = RunOutput::json(&SelftestResults {
        quick: cfg.quick,
        suites,
        all_pass,
    })?;
    out.failed = !all_pass;
    Ok(out)
}
