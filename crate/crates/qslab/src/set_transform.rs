//! Design of probabilistic machines that transform every state of a finite,
//! linearly independent set into per-state, per-outcome targets of the form
//! `√r_is(α_is ψ_i^{⊗s} + β_is Φ_is)`.
//!
//! The machine is fixed by a Gram-matrix equation: with `A` the Gram matrix of
//! the inputs and `B_s` the Gram matrix of the normalized outcome-`s` targets,
//! a diagonal efficiency matrix `G_s = diag(√p_is)` per outcome and a PSD
//! failure block `Q` must satisfy `A∘k = Σ_s G_s B_s G_s† + Q` entrywise.
//! Feasibility reduces to keeping `A∘k − Σ_s G_s B_s G_s†` positive
//! semidefinite; the failure branch is recovered from its PSD factorization
//! and the full unitary from Gram-preserving isometry completion.

use crate::linalg::{
    self, hermitian_eigen, is_positive_definite, psd_factor, spectral_norm, CMatrix, CVector,
    Definiteness, LinalgError,
};
use crate::states::{overlap_metric, PureState, StateError, StateSet};
use num_complex::Complex64 as C64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DesignError {
    #[error("state set is linearly dependent; no exact machine exists")]
    LinearDependence,
    #[error("efficiency matrices violate the feasibility bound: {0}")]
    InfeasibleEfficiency(String),
    #[error("target for state {index} at outcome {outcome} is degenerate (norm below 1e-8)")]
    DegenerateTarget { index: usize, outcome: usize },
    #[error("bad coefficients: {0}")]
    BadCoefficients(String),
    #[error("orthogonal complement is ambiguous in dimension {0}; supply complements explicitly")]
    ComplementUndefined(usize),
    #[error("index {index} out of range for {len} states")]
    IndexOutOfRange { index: usize, len: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    State(#[from] StateError),
}

pub type DesignResult<T> = Result<T, DesignError>;

fn basis_vec(dim: usize, idx: usize) -> CVector {
    CVector::from_fn(dim, |t, _| C64::new(if t == idx { 1.0 } else { 0.0 }, 0.0))
}

fn kron(a: &CVector, b: &CVector) -> CVector {
    crate::states::kron_vec(a, b)
}

/// Per-state, per-outcome targets `√r(α ψ^{⊗s} + β Φ)` together with the
/// stored coefficient tables. Coefficients refer to the exact stored
/// representatives, so Gram matrices computed either from the target vectors
/// or from the coefficient tables agree to machine precision.
#[derive(Debug, Clone)]
pub struct TargetFamily {
    dim: usize,
    m: usize,
    outcomes: Vec<usize>,
    alpha: Vec<Vec<C64>>,
    beta: Vec<Vec<C64>>,
    fixed: Vec<Vec<PureState>>,
    targets: Vec<Vec<PureState>>,
    r: Vec<Vec<f64>>,
    psi_powers: Vec<Vec<CVector>>,
    /// `lambda[i][j][t] = ⟨ψ_i^{⊗s_t}|Φ_{j,s_t}⟩`.
    lambda: Vec<Vec<Vec<C64>>>,
}

impl TargetFamily {
    pub fn outcomes(&self) -> &[usize] {
        &self.outcomes
    }

    pub fn state_count(&self) -> usize {
        self.m
    }

    pub fn base_dim(&self) -> usize {
        self.dim
    }

    pub fn target(&self, i: usize, t: usize) -> &PureState {
        &self.targets[i][t]
    }

    pub fn alpha(&self, i: usize, t: usize) -> C64 {
        self.alpha[i][t]
    }

    pub fn beta(&self, i: usize, t: usize) -> C64 {
        self.beta[i][t]
    }

    pub fn fixed_state(&self, i: usize, t: usize) -> &PureState {
        &self.fixed[i][t]
    }

    pub fn normalization(&self, i: usize, t: usize) -> f64 {
        self.r[i][t]
    }

    pub fn lambda(&self, i: usize, j: usize, t: usize) -> C64 {
        self.lambda[i][j][t]
    }

    fn psi_power(&self, i: usize, t: usize) -> &CVector {
        &self.psi_powers[i][t]
    }
}

/// Raw ingredients for [`build_target_family`]: one coefficient pair and one
/// fixed state per (state, outcome) cell. Tables are indexed `[state][outcome]`.
#[derive(Debug, Clone)]
pub struct TargetRecipe {
    pub outcomes: Vec<usize>,
    pub alpha: Vec<Vec<C64>>,
    pub beta: Vec<Vec<C64>>,
    pub fixed_states: Vec<Vec<PureState>>,
}

impl TargetRecipe {
    /// Plain copy targets: `α = 1`, `β = 0`, placeholder fixed states.
    pub fn cloning(set: &StateSet, outcomes: Vec<usize>) -> Self {
        let m = set.len();
        let d = set.dim();
        let alpha = vec![vec![C64::new(1.0, 0.0); outcomes.len()]; m];
        let beta = vec![vec![C64::new(0.0, 0.0); outcomes.len()]; m];
        let fixed_states = (0..m)
            .map(|_| {
                outcomes
                    .iter()
                    .map(|&s| {
                        PureState::basis_state(d.pow(s as u32), 0).expect("basis state exists")
                    })
                    .collect()
            })
            .collect();
        Self {
            outcomes,
            alpha,
            beta,
            fixed_states,
        }
    }
}

fn validate_outcomes(outcomes: &[usize]) -> DesignResult<()> {
    if outcomes.is_empty() {
        return Err(DesignError::BadCoefficients(
            "at least one outcome required".into(),
        ));
    }
    for w in outcomes.windows(2) {
        if w[1] <= w[0] {
            return Err(DesignError::BadCoefficients(
                "outcome copy counts must be strictly increasing".into(),
            ));
        }
    }
    if outcomes[0] == 0 {
        return Err(DesignError::BadCoefficients(
            "outcome copy counts start at 1".into(),
        ));
    }
    Ok(())
}

fn validate_table_shape<T>(table: &[Vec<T>], m: usize, s: usize, what: &str) -> DesignResult<()> {
    if table.len() != m || table.iter().any(|row| row.len() != s) {
        return Err(DesignError::BadCoefficients(format!(
            "{what} table must be {m}x{s}"
        )));
    }
    Ok(())
}

/// Builds the target family from explicit coefficient and fixed-state tables.
///
/// Each pair must satisfy `|α|² + |β|² = 1` within 1e-10, every row needs at
/// least one nonzero `α`, and the combination `α ψ^{⊗s} + β Φ` must keep norm
/// at least 1e-8.
pub fn build_target_family(set: &StateSet, recipe: &TargetRecipe) -> DesignResult<TargetFamily> {
    let m = set.len();
    let d = set.dim();
    validate_outcomes(&recipe.outcomes)?;
    let s_count = recipe.outcomes.len();
    validate_table_shape(&recipe.alpha, m, s_count, "alpha")?;
    validate_table_shape(&recipe.beta, m, s_count, "beta")?;
    validate_table_shape(&recipe.fixed_states, m, s_count, "fixed-state")?;

    let mut alpha = vec![vec![C64::new(0.0, 0.0); s_count]; m];
    let mut beta = vec![vec![C64::new(0.0, 0.0); s_count]; m];
    let mut fixed: Vec<Vec<PureState>> = Vec::with_capacity(m);
    let mut targets: Vec<Vec<PureState>> = Vec::with_capacity(m);
    let mut r = vec![vec![0.0f64; s_count]; m];

    for i in 0..m {
        let mut fixed_row = Vec::with_capacity(s_count);
        let mut target_row = Vec::with_capacity(s_count);
        let mut alpha_mass = 0.0f64;
        for t in 0..s_count {
            let s = recipe.outcomes[t];
            let a = recipe.alpha[i][t];
            let b = recipe.beta[i][t];
            let unit = (a.norm_sqr() + b.norm_sqr() - 1.0).abs();
            if unit > 1e-10 {
                return Err(DesignError::BadCoefficients(format!(
                    "|alpha|^2+|beta|^2 deviates from 1 by {unit:.3e} at ({i},{t})"
                )));
            }
            let phi = &recipe.fixed_states[i][t];
            let expected = d.pow(s as u32);
            if phi.dim() != expected {
                return Err(DesignError::BadCoefficients(format!(
                    "fixed state at ({i},{t}) has dim {}, expected {expected}",
                    phi.dim()
                )));
            }
            let psi_pow = set.state(i).tensor_power(s);
            let u = psi_pow.amplitudes() * a + phi.amplitudes() * b;
            let norm = u.norm();
            if norm < 1e-8 {
                return Err(DesignError::DegenerateTarget {
                    index: i,
                    outcome: s,
                });
            }
            alpha[i][t] = a;
            beta[i][t] = b;
            r[i][t] = 1.0 / (norm * norm);
            fixed_row.push(phi.clone());
            target_row.push(PureState::from_vector_exact(u).expect("norm checked above"));
            alpha_mass += a.norm_sqr();
        }
        if alpha_mass < 1e-16 {
            return Err(DesignError::BadCoefficients(format!(
                "state {i} has alpha = 0 in every outcome"
            )));
        }
        fixed.push(fixed_row);
        targets.push(target_row);
    }

    Ok(finish_family(
        set,
        recipe.outcomes.clone(),
        alpha,
        beta,
        fixed,
        targets,
        r,
    ))
}

fn finish_family(
    set: &StateSet,
    outcomes: Vec<usize>,
    alpha: Vec<Vec<C64>>,
    beta: Vec<Vec<C64>>,
    fixed: Vec<Vec<PureState>>,
    targets: Vec<Vec<PureState>>,
    r: Vec<Vec<f64>>,
) -> TargetFamily {
    let m = set.len();
    let s_count = outcomes.len();
    let psi_powers: Vec<Vec<CVector>> = (0..m)
        .map(|i| {
            outcomes
                .iter()
                .map(|&s| set.state(i).tensor_power(s).amplitudes().clone())
                .collect()
        })
        .collect();
    let lambda: Vec<Vec<Vec<C64>>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    (0..s_count)
                        .map(|t| psi_powers[i][t].dotc(fixed[j][t].amplitudes()))
                        .collect()
                })
                .collect()
        })
        .collect();
    TargetFamily {
        dim: set.dim(),
        m,
        outcomes,
        alpha,
        beta,
        fixed,
        targets,
        r,
        psi_powers,
        lambda,
    }
}

/// Structured product-target constructions layered on the same family type.
#[derive(Debug, Clone)]
pub enum ProductTargetVariant {
    /// Targets `ψ_i^{⊗k₁} ⊗ (α ψ_i^{⊗j} + β Φ_ij)`, i.e. a perfect block of
    /// `k₁` copies next to one coefficient-superposed block.
    PerfectPlusImperfect {
        copies: Vec<usize>,
        alpha: Vec<Vec<C64>>,
        beta: Vec<Vec<C64>>,
        fixed_states: Vec<Vec<PureState>>,
    },
    /// Targets `ψ_i^{⊗k₁} ⊗ φ_ij^{⊗j}` with `φ_ij ∝ α ψ_i + β Φ_ij` applied
    /// per copy; the result is re-expressed in family form by splitting off
    /// the `ψ_i^{⊗s}` component.
    PerCopySuperposed {
        copies: Vec<usize>,
        alpha: Vec<Vec<C64>>,
        beta: Vec<Vec<C64>>,
        fixed_states: Vec<Vec<PureState>>,
    },
    /// Targets `ψ_i^{⊗k₁} ⊗ (ψ_i^⊥)^{⊗j}`. The complement is computed for
    /// qubits and must be supplied for higher dimensions.
    OrthogonalComplement {
        copies: Vec<usize>,
        complements: Option<Vec<PureState>>,
    },
}

/// Splits a unit target against `ψ^{⊗s}`: returns `(α, β, Φ, r)` with
/// `√r(α ψ^{⊗s} + β Φ)` equal to the target exactly and `|α| > 0` always
/// (a fixed oblique split keeps `α = 1/2` when the natural component vanishes).
fn decompose_against_power(
    psi_pow: &CVector,
    target: &CVector,
) -> (C64, C64, CVector, f64) {
    let a0 = psi_pow.dotc(target);
    if a0.norm() >= 1e-6 {
        let resid = target - psi_pow * a0;
        let b = resid.norm();
        if b < 1e-8 {
            (a0, C64::new(0.0, 0.0), basis_vec(psi_pow.len(), 0), 1.0)
        } else {
            (a0, C64::new(b, 0.0), resid / C64::new(b, 0.0), 1.0)
        }
    } else {
        // target ≈ ⟂ ψ^{⊗s}: represent it as √r(ψ^{⊗s}/2 + (√3/2)Φ) with
        // c·target = ψ^{⊗s}/2 + (√3/2)Φ, solving ‖c·target − ψ^{⊗s}/2‖ = √3/2.
        let re = a0.re;
        let c = 0.5 * (re + (re * re + 2.0).sqrt());
        let u = target * C64::new(c, 0.0) - psi_pow * C64::new(0.5, 0.0);
        let norm = u.norm();
        let phi = u / C64::new(norm, 0.0);
        (
            C64::new(0.5, 0.0),
            C64::new(3.0f64.sqrt() / 2.0, 0.0),
            phi,
            1.0 / (c * c),
        )
    }
}

/// Builds product-shaped target families: a perfect `ψ_i^{⊗k₁}` block next to
/// an outcome-dependent tail.
pub fn product_target_family(
    set: &StateSet,
    variant: &ProductTargetVariant,
    k1: usize,
) -> DesignResult<TargetFamily> {
    let m = set.len();
    let d = set.dim();
    match variant {
        ProductTargetVariant::PerfectPlusImperfect {
            copies,
            alpha,
            beta,
            fixed_states,
        } => {
            validate_outcomes(copies)?;
            validate_table_shape(alpha, m, copies.len(), "alpha")?;
            validate_table_shape(beta, m, copies.len(), "beta")?;
            validate_table_shape(fixed_states, m, copies.len(), "fixed-state")?;
            let outcomes: Vec<usize> = copies.iter().map(|&j| k1 + j).collect();
            let mut lifted: Vec<Vec<PureState>> = Vec::with_capacity(m);
            for i in 0..m {
                let mut row = Vec::with_capacity(copies.len());
                for (t, &j) in copies.iter().enumerate() {
                    let phi = &fixed_states[i][t];
                    if phi.dim() != d.pow(j as u32) {
                        return Err(DesignError::BadCoefficients(format!(
                            "fixed state at ({i},{t}) has dim {}, expected {}",
                            phi.dim(),
                            d.pow(j as u32)
                        )));
                    }
                    let v = if k1 == 0 {
                        phi.amplitudes().clone()
                    } else {
                        kron(set.state(i).tensor_power(k1).amplitudes(), phi.amplitudes())
                    };
                    row.push(PureState::from_vector_exact(v).expect("unit product"));
                }
                lifted.push(row);
            }
            let recipe = TargetRecipe {
                outcomes,
                alpha: alpha.clone(),
                beta: beta.clone(),
                fixed_states: lifted,
            };
            build_target_family(set, &recipe)
        }
        ProductTargetVariant::PerCopySuperposed {
            copies,
            alpha,
            beta,
            fixed_states,
        } => {
            validate_outcomes(copies)?;
            validate_table_shape(alpha, m, copies.len(), "alpha")?;
            validate_table_shape(beta, m, copies.len(), "beta")?;
            validate_table_shape(fixed_states, m, copies.len(), "fixed-state")?;
            let mut tails: Vec<Vec<PureState>> = Vec::with_capacity(m);
            for i in 0..m {
                let mut row = Vec::with_capacity(copies.len());
                for (t, &j) in copies.iter().enumerate() {
                    let phi = &fixed_states[i][t];
                    if phi.dim() != d {
                        return Err(DesignError::BadCoefficients(format!(
                            "per-copy fixed state at ({i},{t}) must live on the base space"
                        )));
                    }
                    let a = alpha[i][t];
                    let b = beta[i][t];
                    let unit = (a.norm_sqr() + b.norm_sqr() - 1.0).abs();
                    if unit > 1e-10 {
                        return Err(DesignError::BadCoefficients(format!(
                            "|alpha|^2+|beta|^2 deviates from 1 by {unit:.3e} at ({i},{t})"
                        )));
                    }
                    let u = set.state(i).amplitudes() * a + phi.amplitudes() * b;
                    if u.norm() < 1e-8 {
                        return Err(DesignError::DegenerateTarget {
                            index: i,
                            outcome: k1 + j,
                        });
                    }
                    let single = PureState::from_vector_exact(u).expect("norm checked");
                    row.push(single.tensor_power(j));
                }
                tails.push(row);
            }
            assemble_product_family(set, k1, copies, tails)
        }
        ProductTargetVariant::OrthogonalComplement {
            copies,
            complements,
        } => {
            validate_outcomes(copies)?;
            let comps: Vec<PureState> = match complements {
                Some(given) => {
                    if given.len() != m {
                        return Err(DesignError::BadCoefficients(format!(
                            "{} complements for {m} states",
                            given.len()
                        )));
                    }
                    for (i, c) in given.iter().enumerate() {
                        if c.dim() != d {
                            return Err(DesignError::BadCoefficients(format!(
                                "complement {i} has dim {}, expected {d}",
                                c.dim()
                            )));
                        }
                        if set.state(i).inner(c).norm() > 1e-10 {
                            return Err(DesignError::BadCoefficients(format!(
                                "complement {i} is not orthogonal to its state"
                            )));
                        }
                    }
                    given.clone()
                }
                None => {
                    if d != 2 {
                        return Err(DesignError::ComplementUndefined(d));
                    }
                    (0..m)
                        .map(|i| {
                            let amps = set.state(i).amplitudes();
                            let v = CVector::from_vec(vec![-amps[1].conj(), amps[0].conj()]);
                            PureState::from_vector_exact(v).expect("unit complement")
                        })
                        .collect()
                }
            };
            let tails: Vec<Vec<PureState>> = (0..m)
                .map(|i| copies.iter().map(|&j| comps[i].tensor_power(j)).collect())
                .collect();
            assemble_product_family(set, k1, copies, tails)
        }
    }
}

/// Common tail for product variants: targets `ψ_i^{⊗k₁} ⊗ tail_ij`, split
/// against `ψ_i^{⊗s}` to recover family coefficients.
fn assemble_product_family(
    set: &StateSet,
    k1: usize,
    copies: &[usize],
    tails: Vec<Vec<PureState>>,
) -> DesignResult<TargetFamily> {
    let m = set.len();
    let s_count = copies.len();
    let outcomes: Vec<usize> = copies.iter().map(|&j| k1 + j).collect();
    let mut alpha = vec![vec![C64::new(0.0, 0.0); s_count]; m];
    let mut beta = vec![vec![C64::new(0.0, 0.0); s_count]; m];
    let mut fixed: Vec<Vec<PureState>> = Vec::with_capacity(m);
    let mut targets: Vec<Vec<PureState>> = Vec::with_capacity(m);
    let mut r = vec![vec![0.0f64; s_count]; m];
    for i in 0..m {
        let mut fixed_row = Vec::with_capacity(s_count);
        let mut target_row = Vec::with_capacity(s_count);
        for t in 0..s_count {
            let s = outcomes[t];
            let tail = &tails[i][t];
            let full = if k1 == 0 {
                tail.amplitudes().clone()
            } else {
                kron(set.state(i).tensor_power(k1).amplitudes(), tail.amplitudes())
            };
            let psi_pow = set.state(i).tensor_power(s);
            let (a, b, phi, r_val) = decompose_against_power(psi_pow.amplitudes(), &full);
            alpha[i][t] = a;
            beta[i][t] = b;
            r[i][t] = r_val;
            fixed_row.push(PureState::from_vector_exact(phi).expect("unit fixed state"));
            target_row.push(PureState::from_vector_exact(full).expect("unit product target"));
        }
        fixed.push(fixed_row);
        targets.push(target_row);
    }
    Ok(finish_family(
        set, outcomes, alpha, beta, fixed, targets, r,
    ))
}

/// How the success-branch efficiency diagonals are chosen.
#[derive(Debug, Clone)]
pub enum EfficiencyPolicy {
    /// `G_s = g·diag(w_s)` with the common scale `g` maximized under the
    /// sufficient norm bound `Σ_s ‖G_s‖² ‖B_s‖ < λ_min(A∘k)`, times a 0.99
    /// safety factor. Weights default to 1 and are indexed `[outcome][state]`.
    UniformScale { weights: Option<Vec<Vec<f64>>> },
    /// Caller-supplied diagonals `[outcome][state]`; feasibility is verified
    /// rather than enforced, and the boundary (PSD-only remainder) is allowed.
    Explicit { diagonals: Vec<Vec<f64>> },
}

impl Default for EfficiencyPolicy {
    fn default() -> Self {
        EfficiencyPolicy::UniformScale { weights: None }
    }
}

#[derive(Debug, Clone)]
pub struct DesignOptions {
    /// Tolerance for Gram agreement, PSD clipping and the unitary defect.
    pub tol: f64,
    /// Skip the dense unitary for table-level work (bound scans).
    pub assemble_unitary: bool,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            assemble_unitary: true,
        }
    }
}

/// A fully determined machine: probability tables, failure branch, space
/// accounting and (optionally) the assembled unitary.
#[derive(Debug, Clone)]
pub struct MachineDesign {
    set: StateSet,
    k: usize,
    family: TargetFamily,
    /// Success probabilities `[state][outcome]`.
    p: Vec<Vec<f64>>,
    /// Failure probabilities per state (single failure block).
    q: Vec<f64>,
    /// Efficiency diagonals `[outcome][state]`.
    g: Vec<Vec<f64>>,
    /// Unit failure directions in the m-dimensional factor space.
    failure_states: Vec<CVector>,
    b_direct: Vec<CMatrix>,
    gram_residual: f64,
    symbolic_defect: f64,
    feasibility_margin: f64,
    unitary: Option<CMatrix>,
    unitary_defect: Option<f64>,
    work_factors: usize,
    work_dim: usize,
    ancilla_dim: usize,
    probe_dim: usize,
}

impl MachineDesign {
    pub fn set(&self) -> &StateSet {
        &self.set
    }

    pub fn input_copies(&self) -> usize {
        self.k
    }

    pub fn family(&self) -> &TargetFamily {
        &self.family
    }

    pub fn outcomes(&self) -> &[usize] {
        self.family.outcomes()
    }

    pub fn probabilities(&self) -> &[Vec<f64>] {
        &self.p
    }

    pub fn failure_probabilities(&self) -> &[f64] {
        &self.q
    }

    pub fn efficiency_diagonals(&self) -> &[Vec<f64>] {
        &self.g
    }

    pub fn outcome_gram(&self, t: usize) -> &CMatrix {
        &self.b_direct[t]
    }

    pub fn gram_residual(&self) -> f64 {
        self.gram_residual
    }

    /// Max deviation between target Grams computed from inner products and
    /// from the coefficient tables; values above 1e-10 signal an inconsistent
    /// family and are reported, never repaired.
    pub fn symbolic_defect(&self) -> f64 {
        self.symbolic_defect
    }

    /// `λ_min(A∘k) − ‖Σ_s G_s B_s G_s†‖₂`; positive for every uniform-scale
    /// design, possibly zero or negative at the explicit-policy boundary.
    pub fn feasibility_margin(&self) -> f64 {
        self.feasibility_margin
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

    pub fn ancilla_dim(&self) -> usize {
        self.ancilla_dim
    }

    pub fn probe_dim(&self) -> usize {
        self.probe_dim
    }

    pub fn total_dim(&self) -> usize {
        self.work_dim * self.probe_dim
    }

    /// `ψ_i^{⊗k} ⊗ |0…0⟩ ⊗ probe-start`.
    pub fn input_vector(&self, i: usize) -> CVector {
        let psi_k = self.set.state(i).tensor_power(self.k);
        let work = kron(psi_k.amplitudes(), &basis_vec(self.ancilla_dim, 0));
        kron(&work, &basis_vec(self.probe_dim, 0))
    }

    /// Outcome-`t` target padded with `|0…0⟩` to the full work space.
    pub fn padded_target(&self, i: usize, t: usize) -> CVector {
        let s = self.family.outcomes()[t];
        let pad = self.work_dim / self.set.dim().pow(s as u32);
        kron(
            self.family.target(i, t).amplitudes(),
            &basis_vec(pad, 0),
        )
    }

    /// Failure direction embedded on the leading coordinates of the work space.
    pub fn failure_vector(&self, i: usize) -> CVector {
        let mut v = CVector::zeros(self.work_dim);
        let src = &self.failure_states[i];
        for t in 0..src.len() {
            v[t] = src[t];
        }
        v
    }

    /// The designed image of `input_vector(i)` under the machine unitary.
    pub fn output_vector(&self, i: usize) -> CVector {
        let s_count = self.family.outcomes().len();
        let mut out = CVector::zeros(self.total_dim());
        for t in 0..s_count {
            let amp = C64::new(self.p[i][t].sqrt(), 0.0);
            let branch = kron(&self.padded_target(i, t), &basis_vec(self.probe_dim, 1 + t));
            out += branch * amp;
        }
        let fail = kron(
            &self.failure_vector(i),
            &basis_vec(self.probe_dim, self.probe_dim - 1),
        );
        out += fail * C64::new(self.q[i].sqrt(), 0.0);
        out
    }
}

fn validate_family(set: &StateSet, k: usize, family: &TargetFamily) -> DesignResult<()> {
    if family.state_count() != set.len() || family.base_dim() != set.dim() {
        return Err(DesignError::BadCoefficients(
            "target family does not match the state set".into(),
        ));
    }
    if k == 0 {
        return Err(DesignError::BadCoefficients(
            "input copy count must be at least 1".into(),
        ));
    }
    for i in 0..family.state_count() {
        for t in 0..family.outcomes().len() {
            let rebuilt = family.psi_power(i, t) * family.alpha(i, t)
                + family.fixed_state(i, t).amplitudes() * family.beta(i, t);
            let scaled = rebuilt * C64::new(family.normalization(i, t).sqrt(), 0.0);
            if (scaled - family.target(i, t).amplitudes()).norm() > 1e-8 {
                return Err(DesignError::BadCoefficients(
                    "target family is inconsistent with the state set".into(),
                ));
            }
        }
    }
    Ok(())
}

const MAX_TOTAL_DIM: usize = 4_000_000;

/// Designs the machine: chooses efficiencies per policy, splits off the PSD
/// failure block, and (optionally) assembles the full unitary.
pub fn design_machine(
    set: &StateSet,
    k: usize,
    family: &TargetFamily,
    policy: &EfficiencyPolicy,
    options: &DesignOptions,
) -> DesignResult<MachineDesign> {
    validate_family(set, k, family)?;
    let m = set.len();
    let d = set.dim();
    let s_count = family.outcomes().len();

    let a1 = set.gram(1);
    let a_k = set.gram(k);
    let eig_ak = hermitian_eigen(&a_k)?;
    if eig_ak.min() <= 1e-10 {
        return Err(DesignError::LinearDependence);
    }

    // Direct target Grams are authoritative; the coefficient expansion serves
    // as a cross-check whose deviation is reported, never repaired.
    let mut b_direct = Vec::with_capacity(s_count);
    let mut symbolic_defect = 0.0f64;
    for t in 0..s_count {
        let s = family.outcomes()[t];
        let direct = CMatrix::from_fn(m, m, |i, j| {
            family
                .target(i, t)
                .amplitudes()
                .dotc(family.target(j, t).amplitudes())
        });
        for i in 0..m {
            for j in 0..m {
                let ri = family.normalization(i, t).sqrt();
                let rj = family.normalization(j, t).sqrt();
                let ai = family.alpha(i, t);
                let aj = family.alpha(j, t);
                let bi = family.beta(i, t);
                let bj = family.beta(j, t);
                let a_pow = a1[(i, j)].powu(s as u32);
                let symbolic = C64::new(ri * rj, 0.0)
                    * (ai.conj() * aj * a_pow
                        + ai.conj() * bj * family.lambda(i, j, t)
                        + bi.conj() * aj * family.lambda(j, i, t).conj()
                        + bi.conj()
                            * bj
                            * family
                                .fixed_state(i, t)
                                .amplitudes()
                                .dotc(family.fixed_state(j, t).amplitudes()));
                symbolic_defect = symbolic_defect.max((direct[(i, j)] - symbolic).norm());
            }
        }
        b_direct.push(direct);
    }

    let g: Vec<Vec<f64>> = match policy {
        EfficiencyPolicy::UniformScale { weights } => {
            let w: Vec<Vec<f64>> = match weights {
                Some(given) => {
                    validate_table_shape(given, s_count, m, "weight")?;
                    if given.iter().flatten().any(|&x| !(x >= 0.0)) {
                        return Err(DesignError::BadCoefficients(
                            "weights must be nonnegative".into(),
                        ));
                    }
                    given.clone()
                }
                None => vec![vec![1.0; m]; s_count],
            };
            let denom: f64 = (0..s_count)
                .map(|t| {
                    let top = w[t].iter().cloned().fold(0.0f64, f64::max);
                    top * top * spectral_norm(&b_direct[t])
                })
                .sum();
            if denom <= 0.0 {
                return Err(DesignError::BadCoefficients(
                    "all efficiency weights are zero".into(),
                ));
            }
            let g_scale = (0.99 * eig_ak.min() / denom).sqrt();
            (0..s_count)
                .map(|t| w[t].iter().map(|&x| g_scale * x).collect())
                .collect()
        }
        EfficiencyPolicy::Explicit { diagonals } => {
            validate_table_shape(diagonals, s_count, m, "efficiency diagonal")?;
            if diagonals.iter().flatten().any(|&x| !(x >= 0.0)) {
                return Err(DesignError::BadCoefficients(
                    "efficiency diagonals must be nonnegative".into(),
                ));
            }
            diagonals.clone()
        }
    };

    let p: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..s_count).map(|t| g[t][i] * g[t][i]).collect())
        .collect();

    let mut b_sum = CMatrix::zeros(m, m);
    for t in 0..s_count {
        b_sum += CMatrix::from_fn(m, m, |i, j| {
            b_direct[t][(i, j)] * C64::new(g[t][i] * g[t][j], 0.0)
        });
    }
    let remainder = linalg::hermitize(&(&a_k - &b_sum));
    match is_positive_definite(&remainder, options.tol)? {
        Definiteness::Indefinite => {
            let eig = hermitian_eigen(&remainder)?;
            return Err(DesignError::InfeasibleEfficiency(format!(
                "remainder has eigenvalue {:.3e}",
                eig.min()
            )));
        }
        _ => {}
    }
    let feasibility_margin = eig_ak.min() - spectral_norm(&b_sum);

    let fact = psd_factor(&remainder, options.tol).map_err(|e| match e {
        LinalgError::NotPsd(l) => {
            DesignError::InfeasibleEfficiency(format!("remainder eigenvalue {l:.3e}"))
        }
        other => DesignError::Linalg(other),
    })?;
    let q: Vec<f64> = fact.column_norms.iter().map(|&n| n * n).collect();
    let failure_states = fact.unit_vectors;

    let q_recon = CMatrix::from_fn(m, m, |i, j| {
        failure_states[i].dotc(&failure_states[j])
            * C64::new((q[i] * q[j]).sqrt().max(0.0), 0.0)
    });
    let mut gram_residual = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            gram_residual =
                gram_residual.max((a_k[(i, j)] - b_sum[(i, j)] - q_recon[(i, j)]).norm());
        }
    }

    let s_max = *family.outcomes().last().expect("nonempty outcomes");
    let work_factors = k.max(s_max);
    let work_dim = d
        .checked_pow(work_factors as u32)
        .filter(|&w| w.saturating_mul(s_count + 2) <= MAX_TOTAL_DIM)
        .ok_or_else(|| {
            DesignError::BadCoefficients("work space dimension is too large".into())
        })?;
    let ancilla_dim = d.pow((work_factors - k) as u32);
    let probe_dim = s_count + 2;
    assert!(work_dim >= m, "independence bounds the set size by d^k");

    let mut design = MachineDesign {
        set: set.clone(),
        k,
        family: family.clone(),
        p,
        q,
        g,
        failure_states,
        b_direct,
        gram_residual,
        symbolic_defect,
        feasibility_margin,
        unitary: None,
        unitary_defect: None,
        work_factors,
        work_dim,
        ancilla_dim,
        probe_dim,
    };

    if options.assemble_unitary {
        let inputs: Vec<CVector> = (0..m).map(|i| design.input_vector(i)).collect();
        let outputs: Vec<CVector> = (0..m).map(|i| design.output_vector(i)).collect();
        let u = linalg::complete_isometry(&inputs, &outputs, options.tol)?;
        design.unitary_defect = Some(linalg::unitarity_defect(&u));
        design.unitary = Some(u);
    }
    Ok(design)
}

/// One outcome branch of a simulated run.
#[derive(Debug, Clone)]
pub struct SimulatedOutcome {
    pub label: usize,
    pub probability: f64,
    pub designed_probability: f64,
    /// Fidelity of the post-selected state against the padded target; absent
    /// when the branch carries no weight.
    pub target_fidelity: Option<f64>,
    pub state: Option<CVector>,
}

#[derive(Debug, Clone)]
pub struct SimulationRecord {
    pub input_index: usize,
    pub outcomes: Vec<SimulatedOutcome>,
    pub failure_probability: f64,
    pub designed_failure_probability: f64,
    /// Residual weight left on the probe's start sector; zero for a correct
    /// machine.
    pub start_leak: f64,
}

/// Applies the machine unitary to `ψ_i^{⊗k} ⊗ |0…0⟩ ⊗ probe-start` and splits
/// the image by probe sector.
pub fn simulate_machine(design: &MachineDesign, i: usize) -> DesignResult<SimulationRecord> {
    let m = design.set().len();
    if i >= m {
        return Err(DesignError::IndexOutOfRange { index: i, len: m });
    }
    let u = design
        .unitary()
        .expect("simulate_machine needs a design assembled with its unitary");
    let image = u * design.input_vector(i);
    let probe = design.probe_dim();
    let work = design.work_dim();
    let block = |sector: usize| -> CVector {
        CVector::from_fn(work, |w, _| image[w * probe + sector])
    };

    let mut outcomes = Vec::with_capacity(design.outcomes().len());
    for t in 0..design.outcomes().len() {
        let b = block(1 + t);
        let prob = b.norm_squared();
        let (state, fidelity) = if prob > 1e-14 {
            let normalized = &b / C64::new(prob.sqrt(), 0.0);
            let fid = design.padded_target(i, t).dotc(&normalized).norm_sqr();
            (Some(normalized), Some(fid))
        } else {
            (None, None)
        };
        outcomes.push(SimulatedOutcome {
            label: design.outcomes()[t],
            probability: prob,
            designed_probability: design.probabilities()[i][t],
            target_fidelity: fidelity,
            state,
        });
    }
    let failure_probability = block(probe - 1).norm_squared();
    Ok(SimulationRecord {
        input_index: i,
        outcomes,
        failure_probability,
        designed_failure_probability: design.failure_probabilities()[i],
        start_leak: block(0).norm_squared(),
    })
}

/// Everything the pair bound needs about one outcome, independent of whether
/// the numbers came from a real design or a hypothetical probability table.
#[derive(Debug, Clone)]
pub struct PairBoundTerm {
    pub outcome: usize,
    pub p_i: f64,
    pub p_j: f64,
    pub alpha_i: C64,
    pub alpha_j: C64,
    pub beta_i: C64,
    pub beta_j: C64,
    pub r_i: f64,
    pub r_j: f64,
    /// `⟨ψ_i^{⊗s}|Φ_js⟩`.
    pub lambda_ij: C64,
    /// `⟨ψ_j^{⊗s}|Φ_is⟩`.
    pub lambda_ji: C64,
    /// `⟨Φ_is|Φ_js⟩`.
    pub fixed_overlap: C64,
}

/// Pairwise efficiency bound report; the inequality holds iff `slack ≥ 0`.
#[derive(Debug, Clone, Copy)]
pub struct PairBoundReport {
    /// Aggregated per-outcome demand `Σ_s p̄_s·bracket_s`.
    pub lhs: f64,
    /// Available input distinguishability `D_{ij,k} = 2(1−|a_ij|^k)`.
    pub rhs: f64,
    pub slack: f64,
}

/// Pairwise necessary condition on success probabilities: the input
/// distinguishability `2(1−|a_ij|^k)` must cover, outcome by outcome, the
/// demand `p̄_s·[2 − 2r̄ᾱ(1−D_s/2) − 2r̄X_s]` with `X_s` collecting the
/// fixed-state cross terms. Violated (negative slack) probability tables
/// belong to no machine.
pub fn efficiency_bound_from_terms(
    a_ij: C64,
    k: usize,
    terms: &[PairBoundTerm],
) -> PairBoundReport {
    let rhs = overlap_metric(a_ij, k);
    let mut lhs = 0.0f64;
    for term in terms {
        let p_bar = 0.5 * (term.p_i + term.p_j);
        let alpha_bar = term.alpha_i.norm() * term.alpha_j.norm();
        let r_bar = (term.r_i * term.r_j).sqrt();
        let d_s = overlap_metric(a_ij, term.outcome);
        let cross = term.alpha_i.norm() * term.beta_j.norm() * term.lambda_ij.norm()
            + term.beta_i.norm() * term.alpha_j.norm() * term.lambda_ji.norm()
            + term.beta_i.norm() * term.beta_j.norm() * term.fixed_overlap.norm();
        let bracket =
            (2.0 - 2.0 * r_bar * alpha_bar + r_bar * alpha_bar * d_s - 2.0 * r_bar * cross)
                .max(0.0);
        lhs += p_bar * bracket;
    }
    PairBoundReport {
        lhs,
        rhs,
        slack: rhs - lhs,
    }
}

/// Evaluates the pair bound on a produced design.
pub fn efficiency_bound_check(
    design: &MachineDesign,
    pair: (usize, usize),
) -> DesignResult<PairBoundReport> {
    let m = design.set().len();
    let (i, j) = pair;
    if i >= m || j >= m {
        return Err(DesignError::IndexOutOfRange {
            index: i.max(j),
            len: m,
        });
    }
    if i == j {
        return Err(DesignError::BadCoefficients(
            "pair bound needs two distinct states".into(),
        ));
    }
    let family = design.family();
    let a_ij = design.set().state(i).inner(design.set().state(j));
    let terms: Vec<PairBoundTerm> = (0..family.outcomes().len())
        .map(|t| PairBoundTerm {
            outcome: family.outcomes()[t],
            p_i: design.probabilities()[i][t],
            p_j: design.probabilities()[j][t],
            alpha_i: family.alpha(i, t),
            alpha_j: family.alpha(j, t),
            beta_i: family.beta(i, t),
            beta_j: family.beta(j, t),
            r_i: family.normalization(i, t),
            r_j: family.normalization(j, t),
            lambda_ij: family.lambda(i, j, t),
            lambda_ji: family.lambda(j, i, t),
            fixed_overlap: family
                .fixed_state(i, t)
                .amplitudes()
                .dotc(family.fixed_state(j, t).amplitudes()),
        })
        .collect();
    Ok(efficiency_bound_from_terms(a_ij, design.input_copies(), &terms))
}
