//! Superposition machines on finite sets: every ordered input pair
//! `(ψ_i, ψ_j)` is sent to `√r_ij(α_ij ψ_i + β_ij ψ_j)`, or with `k`-copy
//! inputs to the per-outcome targets `√r_ij,s(α_ij ψ_i^{⊗s} + β_ij ψ_j^{⊗s})`.
//!
//! The pair machine is fixed by the m²×m² Gram equation `A = Λ H Λ† + Q` with
//! `A` the Gram matrix of the product inputs, `H` the Gram matrix of the unit
//! targets and `Λ = diag(√p_ij)`; the copy variant sums one `Λ_s H_s Λ_s†`
//! block per outcome. Efficiencies follow the sufficient norm bound
//! `‖Σ_s Λ_s H_s Λ_s†‖₂ < λ_min(A)` with a 0.99 safety factor, which keeps
//! the failure block `Q` positive definite.

use crate::linalg::{
    self, hermitian_eigen, is_positive_definite, psd_factor, spectral_norm, CMatrix, CVector,
    Definiteness, LinalgError,
};
use crate::set_transform::{DesignOptions, SimulatedOutcome};
use crate::states::{kron_vec, overlap_metric, PureState, StateError, StateSet};
use num_complex::Complex64 as C64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SuperposeError {
    #[error("state set is linearly dependent; no exact machine exists")]
    LinearDependence,
    #[error("coefficient at pair ({i},{j}) is zero; both amplitudes must be nonzero")]
    ZeroCoefficient { i: usize, j: usize },
    #[error("efficiency matrices violate the feasibility bound: {0}")]
    InfeasibleEfficiency(String),
    #[error("target for pair ({i},{j}) at outcome {outcome} is degenerate (norm below 1e-8)")]
    DegenerateTarget { i: usize, j: usize, outcome: usize },
    #[error("bad input: {0}")]
    BadInput(String),
    #[error("index {index} out of range for {len} states")]
    IndexOutOfRange { index: usize, len: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    State(#[from] StateError),
}

pub type SuperposeResult<T> = Result<T, SuperposeError>;

const MAX_TOTAL_DIM: usize = 4_000_000;

fn basis_vec(dim: usize, idx: usize) -> CVector {
    CVector::from_fn(dim, |t, _| C64::new(if t == idx { 1.0 } else { 0.0 }, 0.0))
}

/// Pairwise superposition coefficients, one `(α_ij, β_ij)` per ordered pair.
/// Both entries must be nonzero and `|α|² + |β|² = 1` within 1e-10.
#[derive(Debug, Clone)]
pub struct SuperposeCoefficients {
    alpha: Vec<Vec<C64>>,
    beta: Vec<Vec<C64>>,
}

impl SuperposeCoefficients {
    pub fn new(alpha: Vec<Vec<C64>>, beta: Vec<Vec<C64>>) -> SuperposeResult<Self> {
        let m = alpha.len();
        if m == 0
            || beta.len() != m
            || alpha.iter().any(|row| row.len() != m)
            || beta.iter().any(|row| row.len() != m)
        {
            return Err(SuperposeError::BadInput(
                "coefficient tables must be square and equal-sized".into(),
            ));
        }
        for i in 0..m {
            for j in 0..m {
                if alpha[i][j].norm() < 1e-12 || beta[i][j].norm() < 1e-12 {
                    return Err(SuperposeError::ZeroCoefficient { i, j });
                }
                let unit = (alpha[i][j].norm_sqr() + beta[i][j].norm_sqr() - 1.0).abs();
                if unit > 1e-10 {
                    return Err(SuperposeError::BadInput(format!(
                        "|alpha|^2+|beta|^2 deviates from 1 by {unit:.3e} at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self { alpha, beta })
    }

    /// Balanced real coefficients `α = β = 1/√2` for every pair.
    pub fn uniform(m: usize) -> Self {
        let x = C64::new(1.0 / 2.0f64.sqrt(), 0.0);
        Self {
            alpha: vec![vec![x; m]; m],
            beta: vec![vec![x; m]; m],
        }
    }

    pub fn size(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self, i: usize, j: usize) -> C64 {
        self.alpha[i][j]
    }

    pub fn beta(&self, i: usize, j: usize) -> C64 {
        self.beta[i][j]
    }
}

/// A designed pair or copy superposer: probability tables, failure branch and
/// the assembled unitary over input pair ⊗ padding ⊗ probe.
#[derive(Debug, Clone)]
pub struct PairSuperposerDesign {
    set: StateSet,
    k: usize,
    outcomes: Vec<usize>,
    coeffs: SuperposeCoefficients,
    /// Normalizations `[i][j][outcome]`.
    r: Vec<Vec<Vec<f64>>>,
    /// Unit targets `[i][j][outcome]`, exact representatives.
    targets: Vec<Vec<Vec<PureState>>>,
    /// Success probabilities `[i][j][outcome]` (uniform under this policy).
    p: Vec<Vec<Vec<f64>>>,
    /// Failure probabilities `[i][j]`.
    q: Vec<Vec<f64>>,
    /// Unit failure directions, pair-major, in the m²-dimensional factor space.
    failure_states: Vec<CVector>,
    a_mat: CMatrix,
    h_mats: Vec<CMatrix>,
    gram_residual: f64,
    symbolic_defect: f64,
    feasibility_margin: f64,
    /// Largest `|p_ij,s − p_ji,s|`; no symmetry is enforced, only reported.
    swap_symmetry_defect: f64,
    unitary: Option<CMatrix>,
    unitary_defect: Option<f64>,
    work_factors: usize,
    work_dim: usize,
    input_pad_dim: usize,
    probe_dim: usize,
}

impl PairSuperposerDesign {
    pub fn set(&self) -> &StateSet {
        &self.set
    }

    pub fn input_copies(&self) -> usize {
        self.k
    }

    pub fn outcomes(&self) -> &[usize] {
        &self.outcomes
    }

    pub fn coefficients(&self) -> &SuperposeCoefficients {
        &self.coeffs
    }

    pub fn normalization(&self, i: usize, j: usize, t: usize) -> f64 {
        self.r[i][j][t]
    }

    pub fn target(&self, i: usize, j: usize, t: usize) -> &PureState {
        &self.targets[i][j][t]
    }

    pub fn success_probability(&self, i: usize, j: usize, t: usize) -> f64 {
        self.p[i][j][t]
    }

    pub fn failure_probability(&self, i: usize, j: usize) -> f64 {
        self.q[i][j]
    }

    pub fn input_gram(&self) -> &CMatrix {
        &self.a_mat
    }

    pub fn target_gram(&self, t: usize) -> &CMatrix {
        &self.h_mats[t]
    }

    pub fn gram_residual(&self) -> f64 {
        self.gram_residual
    }

    /// Max deviation between target Grams from inner products and from the
    /// coefficient expansion; reported, never repaired.
    pub fn symbolic_defect(&self) -> f64 {
        self.symbolic_defect
    }

    pub fn feasibility_margin(&self) -> f64 {
        self.feasibility_margin
    }

    pub fn swap_symmetry_defect(&self) -> f64 {
        self.swap_symmetry_defect
    }

    pub fn unitary(&self) -> Option<&CMatrix> {
        self.unitary.as_ref()
    }

    pub fn unitary_defect(&self) -> Option<f64> {
        self.unitary_defect
    }

    pub fn work_factors(&self) -> usize {
        self.work_factors
    }

    pub fn work_dim(&self) -> usize {
        self.work_dim
    }

    pub fn probe_dim(&self) -> usize {
        self.probe_dim
    }

    pub fn total_dim(&self) -> usize {
        self.work_dim * self.probe_dim
    }

    fn pair_index(&self, i: usize, j: usize) -> usize {
        i * self.set.len() + j
    }

    /// `ψ_i^{⊗k} ⊗ ψ_j^{⊗k} ⊗ |0…0⟩ ⊗ probe-start`.
    pub fn input_vector(&self, i: usize, j: usize) -> CVector {
        let left = self.set.state(i).tensor_power(self.k);
        let right = self.set.state(j).tensor_power(self.k);
        let mut work = kron_vec(left.amplitudes(), right.amplitudes());
        if self.input_pad_dim > 1 {
            work = kron_vec(&work, &basis_vec(self.input_pad_dim, 0));
        }
        kron_vec(&work, &basis_vec(self.probe_dim, 0))
    }

    /// Outcome-`t` target padded with `|0…0⟩` to the full work space.
    pub fn padded_target(&self, i: usize, j: usize, t: usize) -> CVector {
        let s = self.outcomes[t];
        let pad = self.work_dim / self.set.dim().pow(s as u32);
        let target = self.targets[i][j][t].amplitudes();
        if pad > 1 {
            kron_vec(target, &basis_vec(pad, 0))
        } else {
            target.clone()
        }
    }

    /// Failure direction embedded on the leading coordinates of the work space.
    pub fn failure_vector(&self, i: usize, j: usize) -> CVector {
        let mut v = CVector::zeros(self.work_dim);
        let src = &self.failure_states[self.pair_index(i, j)];
        for t in 0..src.len() {
            v[t] = src[t];
        }
        v
    }

    /// The designed image of `input_vector(i, j)` under the machine unitary.
    pub fn output_vector(&self, i: usize, j: usize) -> CVector {
        let mut out = CVector::zeros(self.total_dim());
        for t in 0..self.outcomes.len() {
            let amp = C64::new(self.p[i][j][t].sqrt(), 0.0);
            let branch = kron_vec(
                &self.padded_target(i, j, t),
                &basis_vec(self.probe_dim, 1 + t),
            );
            out += branch * amp;
        }
        let fail = kron_vec(
            &self.failure_vector(i, j),
            &basis_vec(self.probe_dim, self.probe_dim - 1),
        );
        out += fail * C64::new(self.q[i][j].sqrt(), 0.0);
        out
    }
}

fn validate_outcomes(outcomes: &[usize]) -> SuperposeResult<()> {
    if outcomes.is_empty() {
        return Err(SuperposeError::BadInput("at least one outcome required".into()));
    }
    if outcomes[0] == 0 {
        return Err(SuperposeError::BadInput("outcome copy counts start at 1".into()));
    }
    for w in outcomes.windows(2) {
        if w[1] <= w[0] {
            return Err(SuperposeError::BadInput(
                "outcome copy counts must be strictly increasing".into(),
            ));
        }
    }
    Ok(())
}

fn build_design(
    set: &StateSet,
    k: usize,
    coeffs: &SuperposeCoefficients,
    outcomes: &[usize],
    options: &DesignOptions,
) -> SuperposeResult<PairSuperposerDesign> {
    let m = set.len();
    let d = set.dim();
    if coeffs.size() != m {
        return Err(SuperposeError::BadInput(format!(
            "coefficient table is {}x{}, set has {m} states",
            coeffs.size(),
            coeffs.size()
        )));
    }
    if k == 0 {
        return Err(SuperposeError::BadInput(
            "input copy count must be at least 1".into(),
        ));
    }
    validate_outcomes(outcomes)?;
    let s_count = outcomes.len();

    let a1 = set.gram(1);
    let base_k = set.gram(k);
    let eig_base = hermitian_eigen(&base_k)?;
    if eig_base.min() <= 1e-10 {
        return Err(SuperposeError::LinearDependence);
    }

    // Pair-input Gram: A[(i1,i2),(j1,j2)] = a_{i1j1}^k a_{i2j2}^k, pair-major.
    let a_mat = CMatrix::from_fn(m * m, m * m, |row, col| {
        let (i1, i2) = (row / m, row % m);
        let (j1, j2) = (col / m, col % m);
        base_k[(i1, j1)] * base_k[(i2, j2)]
    });
    let eig_a = hermitian_eigen(&a_mat)?;

    // Targets and their normalizations: √r(α ψ_i^{⊗s} + β ψ_j^{⊗s}).
    let mut r = vec![vec![vec![0.0f64; s_count]; m]; m];
    let mut targets: Vec<Vec<Vec<PureState>>> = Vec::with_capacity(m);
    for i in 0..m {
        let mut row = Vec::with_capacity(m);
        for j in 0..m {
            let mut cell = Vec::with_capacity(s_count);
            for (t, &s) in outcomes.iter().enumerate() {
                let left = set.state(i).tensor_power(s);
                let right = set.state(j).tensor_power(s);
                let u = left.amplitudes() * coeffs.alpha(i, j)
                    + right.amplitudes() * coeffs.beta(i, j);
                let norm = u.norm();
                if norm < 1e-8 {
                    return Err(SuperposeError::DegenerateTarget { i, j, outcome: s });
                }
                r[i][j][t] = 1.0 / (norm * norm);
                cell.push(PureState::from_vector_exact(u).expect("norm checked above"));
            }
            row.push(cell);
        }
        targets.push(row);
    }

    // Direct target Grams, with the coefficient expansion as a cross-check.
    let mut h_mats = Vec::with_capacity(s_count);
    let mut symbolic_defect = 0.0f64;
    for (t, &s) in outcomes.iter().enumerate() {
        let direct = CMatrix::from_fn(m * m, m * m, |row, col| {
            let (i1, i2) = (row / m, row % m);
            let (j1, j2) = (col / m, col % m);
            targets[i1][i2][t]
                .amplitudes()
                .dotc(targets[j1][j2][t].amplitudes())
        });
        for row in 0..m * m {
            let (i1, i2) = (row / m, row % m);
            for col in 0..m * m {
                let (j1, j2) = (col / m, col % m);
                let pow = |x: C64| x.powu(s as u32);
                let h = coeffs.alpha(i1, i2).conj() * coeffs.alpha(j1, j2) * pow(a1[(i1, j1)])
                    + coeffs.beta(i1, i2).conj() * coeffs.beta(j1, j2) * pow(a1[(i2, j2)])
                    + coeffs.alpha(i1, i2).conj() * coeffs.beta(j1, j2) * pow(a1[(i1, j2)])
                    + coeffs.beta(i1, i2).conj() * coeffs.alpha(j1, j2) * pow(a1[(i2, j1)]);
                let scaled = C64::new((r[i1][i2][t] * r[j1][j2][t]).sqrt(), 0.0) * h;
                symbolic_defect = symbolic_defect.max((direct[(row, col)] - scaled).norm());
            }
        }
        h_mats.push(direct);
    }

    // Uniform efficiency from the sufficient norm bound, 0.99 safety factor.
    let h_norm_sum: f64 = h_mats.iter().map(spectral_norm).sum();
    if h_norm_sum <= 0.0 {
        return Err(SuperposeError::BadInput("target Grams vanished".into()));
    }
    let lambda_sq = 0.99 * eig_a.min() / h_norm_sum;
    let p = vec![vec![vec![lambda_sq; s_count]; m]; m];

    let mut h_sum = CMatrix::zeros(m * m, m * m);
    for h in &h_mats {
        h_sum += h * C64::new(lambda_sq, 0.0);
    }
    let remainder = linalg::hermitize(&(&a_mat - &h_sum));
    if let Definiteness::Indefinite = is_positive_definite(&remainder, options.tol)? {
        let eig = hermitian_eigen(&remainder)?;
        return Err(SuperposeError::InfeasibleEfficiency(format!(
            "remainder has eigenvalue {:.3e}",
            eig.min()
        )));
    }
    let feasibility_margin = eig_a.min() - spectral_norm(&h_sum);

    let fact = psd_factor(&remainder, options.tol).map_err(|e| match e {
        LinalgError::NotPsd(l) => {
            SuperposeError::InfeasibleEfficiency(format!("remainder eigenvalue {l:.3e}"))
        }
        other => SuperposeError::Linalg(other),
    })?;
    let q: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let n = fact.column_norms[i * m + j];
                    n * n
                })
                .collect()
        })
        .collect();
    let failure_states = fact.unit_vectors;

    let mut gram_residual = 0.0f64;
    for row in 0..m * m {
        for col in 0..m * m {
            let q_entry = failure_states[row].dotc(&failure_states[col])
                * C64::new(
                    (q[row / m][row % m] * q[col / m][col % m]).sqrt(),
                    0.0,
                );
            gram_residual =
                gram_residual.max((a_mat[(row, col)] - h_sum[(row, col)] - q_entry).norm());
        }
    }

    let s_max = *outcomes.last().expect("nonempty outcomes");
    let work_factors = (2 * k).max(s_max);
    let work_dim = d
        .checked_pow(work_factors as u32)
        .filter(|&w| w.saturating_mul(s_count + 2) <= MAX_TOTAL_DIM)
        .ok_or_else(|| SuperposeError::BadInput("work space dimension is too large".into()))?;
    let input_pad_dim = d.pow((work_factors - 2 * k) as u32);
    let probe_dim = s_count + 2;
    assert!(work_dim >= m * m, "independence bounds m² by d^{{2k}}");

    let mut design = PairSuperposerDesign {
        set: set.clone(),
        k,
        outcomes: outcomes.to_vec(),
        coeffs: coeffs.clone(),
        r,
        targets,
        p,
        q,
        failure_states,
        a_mat,
        h_mats,
        gram_residual,
        symbolic_defect,
        feasibility_margin,
        swap_symmetry_defect: 0.0,
        unitary: None,
        unitary_defect: None,
        work_factors,
        work_dim,
        input_pad_dim,
        probe_dim,
    };
    let mut swap_defect = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            for t in 0..s_count {
                swap_defect = swap_defect.max((design.p[i][j][t] - design.p[j][i][t]).abs());
            }
        }
    }
    design.swap_symmetry_defect = swap_defect;

    if options.assemble_unitary {
        let mut inputs = Vec::with_capacity(m * m);
        let mut outputs = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                inputs.push(design.input_vector(i, j));
                outputs.push(design.output_vector(i, j));
            }
        }
        let u = linalg::complete_isometry(&inputs, &outputs, options.tol)?;
        design.unitary_defect = Some(linalg::unitarity_defect(&u));
        design.unitary = Some(u);
    }
    Ok(design)
}

/// Designs the single-copy pair superposer (one success outcome, `s = 1`).
pub fn design_pair_superposer(
    set: &StateSet,
    coeffs: &SuperposeCoefficients,
) -> SuperposeResult<PairSuperposerDesign> {
    build_design(set, 1, coeffs, &[1], &DesignOptions::default())
}

/// Designs the `k`-copy superposer with one success branch per requested
/// outcome `s`.
pub fn design_copy_superposer(
    set: &StateSet,
    k: usize,
    coeffs: &SuperposeCoefficients,
    outcomes: &[usize],
) -> SuperposeResult<PairSuperposerDesign> {
    build_design(set, k, coeffs, outcomes, &DesignOptions::default())
}

/// As [`design_copy_superposer`], with explicit tolerance and assembly control
/// (table-only scans skip the unitary).
pub fn design_copy_superposer_with(
    set: &StateSet,
    k: usize,
    coeffs: &SuperposeCoefficients,
    outcomes: &[usize],
    options: &DesignOptions,
) -> SuperposeResult<PairSuperposerDesign> {
    build_design(set, k, coeffs, outcomes, options)
}

#[derive(Debug, Clone)]
pub struct SuperposeRecord {
    pub pair: (usize, usize),
    pub outcomes: Vec<SimulatedOutcome>,
    pub failure_probability: f64,
    pub designed_failure_probability: f64,
    pub start_leak: f64,
}

/// Applies the superposer unitary to `ψ_i^{⊗k} ⊗ ψ_j^{⊗k} ⊗ |0…0⟩ ⊗ start`
/// and splits the image by probe sector.
pub fn simulate_pair_superposer(
    design: &PairSuperposerDesign,
    pair: (usize, usize),
) -> SuperposeResult<SuperposeRecord> {
    let m = design.set().len();
    let (i, j) = pair;
    if i >= m || j >= m {
        return Err(SuperposeError::IndexOutOfRange {
            index: i.max(j),
            len: m,
        });
    }
    let u = design
        .unitary()
        .expect("simulate_pair_superposer needs a design assembled with its unitary");
    let image = u * design.input_vector(i, j);
    let probe = design.probe_dim();
    let work = design.work_dim();
    let block =
        |sector: usize| -> CVector { CVector::from_fn(work, |w, _| image[w * probe + sector]) };

    let mut outcomes = Vec::with_capacity(design.outcomes().len());
    for t in 0..design.outcomes().len() {
        let b = block(1 + t);
        let prob = b.norm_squared();
        let (state, fidelity) = if prob > 1e-14 {
            let normalized = &b / C64::new(prob.sqrt(), 0.0);
            let fid = design.padded_target(i, j, t).dotc(&normalized).norm_sqr();
            (Some(normalized), Some(fid))
        } else {
            (None, None)
        };
        outcomes.push(SimulatedOutcome {
            label: design.outcomes()[t],
            probability: prob,
            designed_probability: design.success_probability(i, j, t),
            target_fidelity: fidelity,
            state,
        });
    }
    Ok(SuperposeRecord {
        pair,
        outcomes,
        failure_probability: block(probe - 1).norm_squared(),
        designed_failure_probability: design.failure_probability(i, j),
        start_leak: block(0).norm_squared(),
    })
}

/// The four base overlaps entering the quadruple bound.
#[derive(Debug, Clone, Copy)]
pub struct QuadOverlaps {
    pub a_i1j1: C64,
    pub a_i1j2: C64,
    pub a_i2j1: C64,
    pub a_i2j2: C64,
}

/// Per-outcome data for the quadruple bound: probabilities and normalizations
/// of the two ordered pairs `(i₁,i₂)` and `(j₁,j₂)`.
#[derive(Debug, Clone, Copy)]
pub struct QuadBoundTerm {
    pub outcome: usize,
    pub p_first: f64,
    pub p_second: f64,
    pub r_first: f64,
    pub r_second: f64,
}

/// Quadruple bound report; the inequality holds iff `slack ≥ 0`.
#[derive(Debug, Clone, Copy)]
pub struct QuadBoundReport {
    /// `D_{i1j1,k} · D_{i2j2,k}`.
    pub lhs: f64,
    /// Average-efficiency side including the `+4D` diagonal terms.
    pub rhs: f64,
    pub slack: f64,
}

/// Necessary condition on the average success probabilities of two input
/// pairs: `D₁D₂ ≤ (2/3)Σ_s p̄_s[r̄_s(16 − ΣD_s) − 6] + 4D₁ + 4D₂`, where
/// `ΣD_s` runs over the four cross metrics at `s` copies and `D₁, D₂` are the
/// diagonal metrics at `k` copies. Probability tables with negative slack
/// belong to no machine.
pub fn average_efficiency_bound_from_terms(
    overlaps: QuadOverlaps,
    k: usize,
    terms: &[QuadBoundTerm],
) -> QuadBoundReport {
    let d1 = overlap_metric(overlaps.a_i1j1, k);
    let d2 = overlap_metric(overlaps.a_i2j2, k);
    let lhs = d1 * d2;
    let mut sum = 0.0f64;
    for term in terms {
        let p_bar = 0.5 * (term.p_first + term.p_second);
        let r_bar = (term.r_first * term.r_second).sqrt();
        let cross = overlap_metric(overlaps.a_i1j1, term.outcome)
            + overlap_metric(overlaps.a_i1j2, term.outcome)
            + overlap_metric(overlaps.a_i2j1, term.outcome)
            + overlap_metric(overlaps.a_i2j2, term.outcome);
        sum += p_bar * (r_bar * (16.0 - cross) - 6.0);
    }
    let rhs = 2.0 / 3.0 * sum + 4.0 * d1 + 4.0 * d2;
    QuadBoundReport {
        lhs,
        rhs,
        slack: rhs - lhs,
    }
}

/// Evaluates the quadruple bound on a produced design for input pairs
/// `(i₁,i₂)` and `(j₁,j₂)`.
pub fn average_efficiency_bound_check(
    design: &PairSuperposerDesign,
    quad: (usize, usize, usize, usize),
) -> SuperposeResult<QuadBoundReport> {
    let m = design.set().len();
    let (i1, i2, j1, j2) = quad;
    let top = i1.max(i2).max(j1).max(j2);
    if top >= m {
        return Err(SuperposeError::IndexOutOfRange { index: top, len: m });
    }
    let a = design.set().gram(1);
    let overlaps = QuadOverlaps {
        a_i1j1: a[(i1, j1)],
        a_i1j2: a[(i1, j2)],
        a_i2j1: a[(i2, j1)],
        a_i2j2: a[(i2, j2)],
    };
    let terms: Vec<QuadBoundTerm> = (0..design.outcomes().len())
        .map(|t| QuadBoundTerm {
            outcome: design.outcomes()[t],
            p_first: design.success_probability(i1, i2, t),
            p_second: design.success_probability(j1, j2, t),
            r_first: design.normalization(i1, i2, t),
            r_second: design.normalization(j1, j2, t),
        })
        .collect();
    Ok(average_efficiency_bound_from_terms(
        overlaps,
        design.input_copies(),
        &terms,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn qubit(tok: &str) -> PureState {
        PureState::from_token(tok).unwrap()
    }

    fn orthonormal_pair() -> StateSet {
        StateSet::new(vec![qubit("0"), qubit("1")]).unwrap()
    }

    #[test]
    fn coefficient_validation() {
        assert!(SuperposeCoefficients::uniform(2).alpha(0, 1).re > 0.0);
        let x = 1.0 / 2.0f64.sqrt();
        let zero = SuperposeCoefficients::new(
            vec![vec![c(1.0, 0.0); 2]; 2],
            vec![vec![c(0.0, 0.0); 2]; 2],
        );
        assert!(matches!(zero, Err(SuperposeError::ZeroCoefficient { .. })));
        let lopsided = SuperposeCoefficients::new(
            vec![vec![c(x, 0.0); 2]; 2],
            vec![vec![c(x / 2.0, 0.0); 2]; 2],
        );
        assert!(matches!(lopsided, Err(SuperposeError::BadInput(_))));
    }

    #[test]
    fn orthonormal_pair_design_produces_balanced_targets() {
        let set = orthonormal_pair();
        let coeffs = SuperposeCoefficients::uniform(2);
        let design = design_pair_superposer(&set, &coeffs).unwrap();

        assert!(design.success_probability(0, 1, 0) > 0.0);
        assert!(design.gram_residual() <= 1e-9);
        assert!(design.symbolic_defect() <= 1e-10);
        assert!(design.unitary_defect().unwrap() <= 1e-9);
        assert!(design.feasibility_margin() > 0.0);
        assert_eq!(design.swap_symmetry_defect(), 0.0);

        let plus = qubit("+");
        assert!(design.target(0, 1, 0).approx_eq(&plus));
        assert!(design.target(1, 0, 0).approx_eq(&plus));
        // diagonal pairs collapse onto the state itself with r = 1/|α+β|²
        assert!(design.target(0, 0, 0).approx_eq(&qubit("0")));
        assert!((design.normalization(0, 0, 0) - 0.5).abs() < 1e-12);

        for i in 0..2 {
            for j in 0..2 {
                let total: f64 = (0..1)
                    .map(|t| design.success_probability(i, j, t))
                    .sum::<f64>()
                    + design.failure_probability(i, j);
                assert!((total - 1.0).abs() < 1e-9);

                let record = simulate_pair_superposer(&design, (i, j)).unwrap();
                let out = &record.outcomes[0];
                assert!((out.probability - out.designed_probability).abs() < 1e-9);
                assert!(out.target_fidelity.unwrap() >= 1.0 - 1e-9);
                assert!(
                    (record.failure_probability - record.designed_failure_probability).abs()
                        < 1e-9
                );
                assert!(record.start_leak < 1e-12);
            }
        }

        // diagonal run returns the input state exactly
        let diag = simulate_pair_superposer(&design, (1, 1)).unwrap();
        let state = diag.outcomes[0].state.as_ref().unwrap();
        let expect = design.padded_target(1, 1, 0);
        assert!((expect.dotc(state).norm_sqr() - 1.0).abs() < 1e-10);

        assert!(simulate_pair_superposer(&design, (2, 0)).is_err());
    }

    #[test]
    fn duplicate_states_are_rejected() {
        let set = StateSet::new(vec![qubit("0"), qubit("0")]).unwrap();
        let coeffs = SuperposeCoefficients::uniform(2);
        assert!(matches!(
            design_pair_superposer(&set, &coeffs),
            Err(SuperposeError::LinearDependence)
        ));
        assert!(matches!(
            design_copy_superposer(&set, 2, &coeffs, &[1, 2]),
            Err(SuperposeError::LinearDependence)
        ));
    }

    #[test]
    fn canceling_diagonal_coefficients_are_degenerate() {
        let set = orthonormal_pair();
        let x = 1.0 / 2.0f64.sqrt();
        let coeffs = SuperposeCoefficients::new(
            vec![vec![c(x, 0.0); 2]; 2],
            vec![vec![c(-x, 0.0), c(x, 0.0)], vec![c(x, 0.0), c(-x, 0.0)]],
        )
        .unwrap();
        assert!(matches!(
            design_pair_superposer(&set, &coeffs),
            Err(SuperposeError::DegenerateTarget { .. })
        ));
    }

    #[test]
    fn copy_design_with_two_outcomes_is_feasible_and_exact() {
        let set = StateSet::new(vec![qubit("0"), qubit("+")]).unwrap();
        let coeffs = SuperposeCoefficients::uniform(2);
        let design = design_copy_superposer(&set, 2, &coeffs, &[1, 2]).unwrap();

        assert_eq!(design.outcomes(), &[1, 2]);
        assert_eq!(design.work_factors(), 4);
        assert_eq!(design.probe_dim(), 4);
        assert!(design.gram_residual() <= 1e-9);
        assert!(design.symbolic_defect() <= 1e-10);
        assert!(design.unitary_defect().unwrap() <= 1e-9);

        for i in 0..2 {
            for j in 0..2 {
                let total: f64 = (0..2)
                    .map(|t| design.success_probability(i, j, t))
                    .sum::<f64>()
                    + design.failure_probability(i, j);
                assert!((total - 1.0).abs() < 1e-9);

                let record = simulate_pair_superposer(&design, (i, j)).unwrap();
                for out in &record.outcomes {
                    assert!((out.probability - out.designed_probability).abs() < 1e-9);
                    assert!(out.target_fidelity.unwrap() >= 1.0 - 1e-9);
                }
                assert!(record.start_leak < 1e-12);
            }
        }

        for quad in [(0, 1, 1, 0), (0, 0, 1, 1), (0, 1, 0, 1)] {
            let report = average_efficiency_bound_check(&design, quad).unwrap();
            assert!(report.slack >= -1e-9, "slack {}", report.slack);
        }
    }

    #[test]
    fn single_copy_single_outcome_reduces_to_the_pair_design() {
        let set = StateSet::new(vec![qubit("0"), qubit("+")]).unwrap();
        let coeffs = SuperposeCoefficients::uniform(2);
        let pair = design_pair_superposer(&set, &coeffs).unwrap();
        let copy = design_copy_superposer(&set, 1, &coeffs, &[1]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!(
                    (pair.success_probability(i, j, 0) - copy.success_probability(i, j, 0))
                        .abs()
                        < 1e-9
                );
                assert!(
                    (pair.failure_probability(i, j) - copy.failure_probability(i, j)).abs()
                        < 1e-9
                );
            }
        }
        assert_eq!(pair.total_dim(), copy.total_dim());
    }

    #[test]
    fn quad_bound_identical_states_limit_is_frozen() {
        // all overlaps 1, balanced coefficients: r = 1/2, bracket = 2,
        // slack = (2/3)·1·2 = 4/3
        let overlaps = QuadOverlaps {
            a_i1j1: c(1.0, 0.0),
            a_i1j2: c(1.0, 0.0),
            a_i2j1: c(1.0, 0.0),
            a_i2j2: c(1.0, 0.0),
        };
        let term = QuadBoundTerm {
            outcome: 1,
            p_first: 1.0,
            p_second: 1.0,
            r_first: 0.5,
            r_second: 0.5,
        };
        let report = average_efficiency_bound_from_terms(overlaps, 1, &[term]);
        assert!(report.lhs.abs() < 1e-15);
        assert!((report.slack - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn quad_bound_flags_certain_mass_cloning_of_close_states() {
        // quad (i,i),(j,j) over two states with overlap 0.999 and certain
        // production of 1000 copies: the diagonal input pairs with balanced
        // coefficients give r = 1/2 and a strongly negative bracket that the
        // tiny +4D terms cannot compensate
        let a = 0.999f64;
        let s = 1000usize;
        let overlaps = QuadOverlaps {
            a_i1j1: c(a, 0.0),
            a_i1j2: c(a, 0.0),
            a_i2j1: c(a, 0.0),
            a_i2j2: c(a, 0.0),
        };
        let term = QuadBoundTerm {
            outcome: s,
            p_first: 1.0,
            p_second: 1.0,
            r_first: 0.5,
            r_second: 0.5,
        };
        let report = average_efficiency_bound_from_terms(overlaps, 1, &[term]);
        let d_k = 2.0 * (1.0 - a);
        let d_s = 2.0 * (1.0 - a.powi(s as i32));
        assert!((report.lhs - d_k * d_k).abs() < 1e-15);
        let expect = 2.0 / 3.0 * (0.5 * (16.0 - 4.0 * d_s) - 6.0) + 8.0 * d_k - d_k * d_k;
        assert!((report.slack - expect).abs() < 1e-12);
        assert!(report.slack < -0.3, "slack {}", report.slack);
    }
}
