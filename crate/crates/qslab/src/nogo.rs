//! Consistency witnesses for machines that would encode an unknown qubit into
//! a fixed superposition with a known basis state.
//!
//! A hypothetical universal machine is pinned down by what it does to the two
//! basis inputs: each succeeds with some probability and some relative phase
//! between the two success branches. Linearity then forces its action on every
//! other input, and the forced output can be compared with the output the
//! machine is supposed to produce. [`EncodingCandidate`] packages the basis
//! behaviour, [`solve_consistency`] enumerates the inputs where the forced and
//! required outputs agree, and [`encoding_gap`] measures the disagreement on
//! Haar-random inputs. [`phase_covariance_violation`] quantifies a second
//! obstruction: the required output ray moves when the input state is rotated
//! by a global phase, while the machine's output ray cannot.
//!
//! These functions report gaps and witnesses; they do not claim proofs.

use crate::linalg::CVector;
use crate::states::{haar_state_from_rng, PureState, StateError};
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Errors from candidate construction and witness evaluation.
#[derive(Debug, Error)]
pub enum NogoError {
    /// A parameter is outside its admissible range.
    #[error("bad input: {0}")]
    BadInput(String),
    /// Two states that must live on matching spaces do not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    /// State-layer failure.
    #[error(transparent)]
    State(#[from] StateError),
}

/// Convenience alias for fallible operations in this module.
pub type NogoResult<T> = Result<T, NogoError>;

/// Tolerance for the normalization `|alpha|^2 + |beta|^2 = 1`.
pub const NORMALIZATION_TOL: f64 = 1e-10;

/// Coefficient magnitude below which the consistency equation is treated as
/// degenerate rather than solved.
pub const DEGENERACY_TOL: f64 = 1e-9;

/// Magnitude below which a required coefficient counts as zero.
const ZERO_AMPLITUDE_TOL: f64 = 1e-12;

/// Norm-squared below which a branch vector counts as vanished.
const VANISHING_NORM_TOL: f64 = 1e-14;

/// Hypothetical machine turning an unknown qubit `h = a|0> + b|1>` into the
/// superposition `alpha h + beta |0>`, described by its action on the basis.
///
/// Input `|0>` succeeds with probability `p0` and leaves the system in `|0>`;
/// input `|1>` succeeds with probability `p0_prime` and leaves the system in
/// `chi' = alpha|1> + beta|0>`. The two success branches are each defined up
/// to phase, so their relative phase `branch_phase` is a free parameter of the
/// candidate. Optionally each branch carries its own ancilla output state.
#[derive(Debug, Clone)]
pub struct EncodingCandidate {
    p0: f64,
    p0_prime: f64,
    branch_phase: f64,
    alpha: C64,
    beta: C64,
    ancilla: Option<(PureState, PureState)>,
}

impl EncodingCandidate {
    /// Candidate without ancilla outputs.
    ///
    /// `p0` and `p0_prime` must lie in `(0, 1]`; `alpha` and `beta` must be
    /// nonzero and normalized to `|alpha|^2 + |beta|^2 = 1` within
    /// [`NORMALIZATION_TOL`].
    pub fn new(
        p0: f64,
        p0_prime: f64,
        branch_phase: f64,
        alpha: C64,
        beta: C64,
    ) -> NogoResult<Self> {
        for (name, p) in [("p0", p0), ("p0_prime", p0_prime)] {
            if !p.is_finite() || p <= 0.0 || p > 1.0 {
                return Err(NogoError::BadInput(format!(
                    "{name} must lie in (0, 1], got {p}"
                )));
            }
        }
        if !branch_phase.is_finite() {
            return Err(NogoError::BadInput("branch phase must be finite".into()));
        }
        if alpha.norm() <= ZERO_AMPLITUDE_TOL || beta.norm() <= ZERO_AMPLITUDE_TOL {
            return Err(NogoError::BadInput(
                "superposition coefficients must both be nonzero".into(),
            ));
        }
        let norm = alpha.norm_sqr() + beta.norm_sqr();
        if (norm - 1.0).abs() > NORMALIZATION_TOL {
            return Err(NogoError::BadInput(format!(
                "|alpha|^2 + |beta|^2 must be 1 within {NORMALIZATION_TOL}, got {norm}"
            )));
        }
        Ok(Self {
            p0,
            p0_prime,
            branch_phase,
            alpha,
            beta,
            ancilla: None,
        })
    }

    /// Candidate whose basis success branches carry ancilla outputs `sigma0`
    /// and `sigma1` of equal dimension.
    pub fn with_ancilla(
        p0: f64,
        p0_prime: f64,
        branch_phase: f64,
        alpha: C64,
        beta: C64,
        sigma0: PureState,
        sigma1: PureState,
    ) -> NogoResult<Self> {
        let mut candidate = Self::new(p0, p0_prime, branch_phase, alpha, beta)?;
        if sigma0.dim() != sigma1.dim() {
            return Err(NogoError::DimensionMismatch(format!(
                "ancilla outputs must share a dimension, got {} and {}",
                sigma0.dim(),
                sigma1.dim()
            )));
        }
        candidate.ancilla = Some((sigma0, sigma1));
        Ok(candidate)
    }

    /// Success probability of the basis input `|0>`.
    pub fn p0(&self) -> f64 {
        self.p0
    }

    /// Success probability of the basis input `|1>`.
    pub fn p0_prime(&self) -> f64 {
        self.p0_prime
    }

    /// Relative phase between the two basis success branches.
    pub fn branch_phase(&self) -> f64 {
        self.branch_phase
    }

    /// Coefficient on the unknown input in the required output.
    pub fn alpha(&self) -> C64 {
        self.alpha
    }

    /// Coefficient on the fixed `|0>` component in the required output.
    pub fn beta(&self) -> C64 {
        self.beta
    }

    /// Ancilla outputs of the two basis branches, if the candidate has them.
    pub fn ancilla(&self) -> Option<(&PureState, &PureState)> {
        self.ancilla.as_ref().map(|(s0, s1)| (s0, s1))
    }

    /// Success output of the basis input `|1>`: `alpha|1> + beta|0>`, exactly
    /// normalized because the coefficients are.
    pub fn chi_prime(&self) -> CVector {
        CVector::from_vec(vec![self.beta, self.alpha])
    }

    /// Success branch forced by linearity for the input representative
    /// `h = a|0> + b|1>` (unnormalized).
    ///
    /// Without ancillas the vector lives on the qubit; with ancillas on
    /// qubit (x) ancilla, ancilla index fastest.
    pub fn success_branch(&self, a: C64, b: C64) -> CVector {
        let wa = a * self.p0.sqrt();
        let wb = b * C64::from_polar(self.p0_prime.sqrt(), self.branch_phase);
        let chi = self.chi_prime();
        match &self.ancilla {
            None => CVector::from_vec(vec![wa + wb * chi[0], wb * chi[1]]),
            Some((s0, s1)) => {
                let da = s0.dim();
                let mut out = CVector::zeros(2 * da);
                for (t, &s) in s0.amplitudes().iter().enumerate() {
                    out[t] += wa * s;
                }
                for f in 0..2 {
                    for (t, &s) in s1.amplitudes().iter().enumerate() {
                        out[f * da + t] += wb * chi[f] * s;
                    }
                }
                out
            }
        }
    }

    /// Output the machine is required to produce for the representative
    /// `h = a|0> + b|1>`: `alpha h + beta |0>` (unnormalized, qubit only).
    pub fn required_branch(&self, a: C64, b: C64) -> CVector {
        CVector::from_vec(vec![self.alpha * a + self.beta, self.alpha * b])
    }

    /// Disagreement between the forced and required success outputs for the
    /// input representative `(a, b)`: one minus the fidelity after
    /// post-selecting on success and renormalizing.
    ///
    /// With ancillas the forced branch is reduced over the ancilla before the
    /// fidelity is taken. The result depends on the representative, not just
    /// on the ray, because the required output mixes `h` with a fixed state;
    /// sampling routines use the canonical representative (first amplitude
    /// real and nonnegative).
    pub fn residual(&self, a: C64, b: C64) -> f64 {
        let forced = self.success_branch(a, b);
        let required = self.required_branch(a, b);
        let req_norm_sq = required.norm_squared();
        if req_norm_sq < VANISHING_NORM_TOL {
            // The required output cancels to zero; nothing to disagree with.
            return 0.0;
        }
        let forced_norm_sq = forced.norm_squared();
        if forced_norm_sq < VANISHING_NORM_TOL {
            return 1.0;
        }
        let fidelity = match &self.ancilla {
            None => {
                let overlap = forced.dotc(&required).norm_sqr();
                overlap / (forced_norm_sq * req_norm_sq)
            }
            Some((s0, _)) => {
                let da = s0.dim();
                // <r|rho|r> / (tr rho * <r|r>) with rho the ancilla-reduced
                // forced branch; expanded directly from the block layout.
                let mut numer = C64::new(0.0, 0.0);
                for t in 0..da {
                    let mut c = C64::new(0.0, 0.0);
                    for f in 0..2 {
                        c += required[f].conj() * forced[f * da + t];
                    }
                    numer += c * c.conj();
                }
                numer.re / (forced_norm_sq * req_norm_sq)
            }
        };
        (1.0 - fidelity).clamp(0.0, 1.0)
    }

    /// Residuals of `samples` Haar-random qubit inputs, in draw order.
    ///
    /// This is the raw stream behind [`encoding_gap`], exposed so callers can
    /// emit one row per sample.
    pub fn residual_samples(&self, samples: usize, seed: u64) -> NogoResult<Vec<f64>> {
        if samples == 0 {
            return Err(NogoError::BadInput("need at least one sample".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut residuals = Vec::with_capacity(samples);
        for _ in 0..samples {
            let h = haar_state_from_rng(2, &mut rng)?;
            let amps = h.amplitudes();
            residuals.push(self.residual(amps[0], amps[1]));
        }
        Ok(residuals)
    }

    /// Residual statistics over Haar-random qubit inputs. See [`encoding_gap`].
    pub fn encoding_gap(&self, samples: usize, seed: u64) -> NogoResult<GapReport> {
        let mut residuals = self.residual_samples(samples, seed)?;
        let mean = residuals.iter().sum::<f64>() / samples as f64;
        residuals.sort_by(|x, y| x.partial_cmp(y).expect("residuals are finite"));
        let idx = ((samples as f64 * PERCENTILE_Q / 100.0).ceil() as usize)
            .saturating_sub(1)
            .min(samples - 1);
        Ok(GapReport {
            min_residual: residuals[0],
            mean_residual: mean,
            percentile_residual: residuals[idx],
            samples,
        })
    }
}

/// Percentile (in percent) reported by [`encoding_gap`] as a robust floor.
pub const PERCENTILE_Q: f64 = 1.0;

/// Residual statistics of a candidate over random inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    /// Smallest observed residual.
    pub min_residual: f64,
    /// Mean residual over all samples.
    pub mean_residual: f64,
    /// [`PERCENTILE_Q`]-th percentile of the residuals. The inputs where the
    /// candidate is exactly consistent form a measure-zero set, so this floor
    /// ignores lucky near-hits that the minimum would report.
    pub percentile_residual: f64,
    /// Number of samples drawn.
    pub samples: usize,
}

/// Consistent inputs of a candidate, as found by [`solve_consistency`].
#[derive(Debug, Clone)]
pub struct ConsistencyReport {
    /// Normalized input representatives `(a, b)` with `a` real and
    /// nonnegative whose forced and required outputs are proportional. The
    /// basis input `|0>` (`b = 0`) is consistent by construction and never
    /// listed.
    pub solutions: Vec<(C64, C64)>,
    /// Set when the equation collapses and constrains a continuum of inputs
    /// instead of isolated points; `solutions` is then empty.
    pub degenerate: Option<String>,
}

impl ConsistencyReport {
    /// True when every listed solution has `a = 0`, i.e. no input outside the
    /// basis is consistent with the candidate.
    pub fn only_trivial(&self) -> bool {
        self.degenerate.is_none()
            && self
                .solutions
                .iter()
                .all(|(a, _)| a.norm() <= ZERO_AMPLITUDE_TOL)
    }
}

/// Equation coefficients for a candidate after folding parallel ancillas into
/// the branch phase: `a * lin + beta * b = beta`, or `None` when the ancilla
/// outputs are essentially independent.
fn scalar_equation(candidate: &EncodingCandidate) -> Option<(C64, C64)> {
    let mut phase = candidate.branch_phase;
    if let Some((s0, s1)) = &candidate.ancilla {
        let overlap = s0.inner(s1);
        if overlap.norm() < 1.0 - NORMALIZATION_TOL {
            return None;
        }
        phase += overlap.arg();
    }
    let ratio = (candidate.p0 / candidate.p0_prime).sqrt();
    let lin = C64::from_polar(ratio, -phase) - candidate.alpha;
    Some((lin, candidate.beta))
}

/// Mismatch of the input representative `(a, b)` against the candidate's
/// scalar consistency equation, `|a*lin + beta*b - beta|`.
///
/// Zero exactly on the consistent inputs found by [`solve_consistency`];
/// strictly positive almost surely for a Haar-random `(a, b)`. Candidates
/// with essentially independent ancilla outputs have no scalar equation and
/// get the stricter product-form mismatch `|a| * |b| * sqrt(p0) * |alpha|`.
pub fn consistency_residual(candidate: &EncodingCandidate, a: C64, b: C64) -> f64 {
    match scalar_equation(candidate) {
        Some((lin, beta)) => (a * lin + beta * b - beta).norm(),
        None => a.norm() * b.norm() * candidate.p0.sqrt() * candidate.alpha.norm(),
    }
}

/// Enumerates the normalized inputs whose forced output is proportional to
/// the required one.
///
/// Solutions are representatives with the first amplitude real and
/// nonnegative; the consistency condition depends on the representative
/// because the required output mixes the input with a fixed state. The basis
/// input `|0>` is proportional by construction and not listed. Generic
/// candidates yield one or two solutions, always including the forced
/// `a = 0` point; parameter coincidences that admit a continuum are reported
/// through [`ConsistencyReport::degenerate`] instead of being enumerated.
/// Candidates whose two ancilla outputs are essentially independent force
/// `a = 0` outright: the branch carrying `|0>` (x) `sigma0` cannot appear in
/// any product output, so the only listed solution is the basis input `|1>`.
pub fn solve_consistency(candidate: &EncodingCandidate) -> ConsistencyReport {
    let Some((lin, beta)) = scalar_equation(candidate) else {
        return ConsistencyReport {
            solutions: vec![(C64::new(0.0, 0.0), C64::new(1.0, 0.0))],
            degenerate: None,
        };
    };
    if beta.norm() < DEGENERACY_TOL {
        return ConsistencyReport {
            solutions: Vec::new(),
            degenerate: Some(
                "the fixed-component coefficient is too small to constrain the input".into(),
            ),
        };
    }
    // Substituting a = r >= 0 and b = (beta - r*lin)/beta into the norm
    // constraint gives (|lin|^2 + |beta|^2) r^2 - 2 Re(conj(lin) beta) r = 0:
    // the trivial root r = 0 and one more.
    let quad = lin.norm_sqr() + beta.norm_sqr();
    let r2 = 2.0 * (lin.conj() * beta).re / quad;
    let mut solutions = vec![(C64::new(0.0, 0.0), C64::new(1.0, 0.0))];
    if r2 > ZERO_AMPLITUDE_TOL && r2 <= 1.0 + ZERO_AMPLITUDE_TOL {
        let a = C64::new(r2.min(1.0), 0.0);
        let b = (beta - a * lin) / beta;
        let norm = (a.norm_sqr() + b.norm_sqr()).sqrt();
        solutions.push((a / norm, b / norm));
    }
    ConsistencyReport {
        solutions,
        degenerate: None,
    }
}

/// Residual statistics of `candidate` over `samples` Haar-random qubit
/// inputs drawn from a ChaCha stream seeded with `seed`.
///
/// Each sample's residual is one minus the success-branch fidelity, as in
/// [`EncodingCandidate::residual`]. The same seed always reproduces the same
/// report.
pub fn encoding_gap(
    candidate: &EncodingCandidate,
    samples: usize,
    seed: u64,
) -> NogoResult<GapReport> {
    candidate.encoding_gap(samples, seed)
}

/// Outcome of the phase-covariance scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseCovarianceReport {
    /// Largest observed value of one minus the fidelity between the required
    /// outputs at input phase `theta` and at phase zero.
    pub max_violation: f64,
    /// Phase in `[0, 2*pi)` attaining the maximum.
    pub argmax_theta: f64,
}

/// Measures how far the required output family `alpha e^{i n theta}
/// psi^{(x)n} + beta big_phi` is from being a single ray as the input phase
/// `theta` varies.
///
/// A machine's output ray cannot depend on the global phase of its input
/// state, while the required output ray generally does; the maximum over
/// `theta` of one minus the fidelity with the `theta = 0` output witnesses
/// the obstruction. Scans `grid_size` evenly spaced phases, then refines the
/// best bracket by golden-section search. The violation vanishes (at most
/// `1e-12`) exactly when `beta = 0` or `big_phi` is parallel to
/// `psi^{(x)n}`.
pub fn phase_covariance_violation(
    n: usize,
    alpha: C64,
    beta: C64,
    psi: &PureState,
    big_phi: &PureState,
    grid_size: usize,
) -> NogoResult<PhaseCovarianceReport> {
    if n == 0 {
        return Err(NogoError::BadInput("need at least one copy".into()));
    }
    if grid_size < 8 {
        return Err(NogoError::BadInput(format!(
            "grid size must be at least 8, got {grid_size}"
        )));
    }
    let norm = alpha.norm_sqr() + beta.norm_sqr();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(NogoError::BadInput(format!(
            "|alpha|^2 + |beta|^2 must be 1 within 1e-8, got {norm}"
        )));
    }
    let expected = psi
        .dim()
        .checked_pow(u32::try_from(n).map_err(|_| NogoError::BadInput("copy count overflow".into()))?)
        .ok_or_else(|| NogoError::BadInput("copy count overflows the product space".into()))?;
    if big_phi.dim() != expected {
        return Err(NogoError::DimensionMismatch(format!(
            "fixed component has dimension {}, expected {expected}",
            big_phi.dim()
        )));
    }
    let lambda = psi.tensor_power(n).inner(big_phi);

    // <Psi(theta)|Psi(0)> = e^{-i n theta} u + v and ||Psi(theta)||^2 =
    // 1 + 2 Re(w e^{-i n theta}) with the scalars below; everything reduces
    // to the single overlap lambda.
    let u = C64::new(alpha.norm_sqr(), 0.0) + alpha.conj() * beta * lambda;
    let v = C64::new(beta.norm_sqr(), 0.0) + alpha * beta.conj() * lambda.conj();
    let w = alpha.conj() * beta * lambda;
    let norm0 = 1.0 + 2.0 * w.re;
    let violation = |theta: f64| -> f64 {
        let rot = C64::from_polar(1.0, -(n as f64) * theta);
        let norm_theta = 1.0 + 2.0 * (w * rot).re;
        if norm_theta < VANISHING_NORM_TOL || norm0 < VANISHING_NORM_TOL {
            return 0.0;
        }
        let fidelity = (rot * u + v).norm_sqr() / (norm_theta * norm0);
        (1.0 - fidelity).clamp(0.0, 1.0)
    };

    let step = std::f64::consts::TAU / grid_size as f64;
    let mut best_idx = 0;
    let mut best = violation(0.0);
    for t in 1..grid_size {
        let value = violation(step * t as f64);
        if value > best {
            best = value;
            best_idx = t;
        }
    }
    // Golden-section refinement on the bracket around the best grid point.
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut lo = step * (best_idx as f64 - 1.0);
    let mut hi = step * (best_idx as f64 + 1.0);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = violation(x1);
    let mut f2 = violation(x2);
    for _ in 0..90 {
        if f1 > f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = violation(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = violation(x2);
        }
    }
    let (refined_theta, refined) = if f1 > f2 { (x1, f1) } else { (x2, f2) };
    let (mut argmax, max_violation) = if refined > best {
        (refined_theta, refined)
    } else {
        (step * best_idx as f64, best)
    };
    argmax = argmax.rem_euclid(std::f64::consts::TAU);
    Ok(PhaseCovarianceReport {
        max_violation,
        argmax_theta: argmax,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::haar_random_state;

    const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn symmetric_candidate() -> EncodingCandidate {
        EncodingCandidate::new(
            0.5,
            0.5,
            0.0,
            C64::new(SQRT_HALF, 0.0),
            C64::new(SQRT_HALF, 0.0),
        )
        .unwrap()
    }

    #[test]
    fn construction_rejects_bad_parameters() {
        let a = C64::new(SQRT_HALF, 0.0);
        assert!(matches!(
            EncodingCandidate::new(0.0, 0.5, 0.0, a, a),
            Err(NogoError::BadInput(_))
        ));
        assert!(matches!(
            EncodingCandidate::new(0.5, 1.5, 0.0, a, a),
            Err(NogoError::BadInput(_))
        ));
        assert!(matches!(
            EncodingCandidate::new(0.5, 0.5, 0.0, C64::new(1.0, 0.0), C64::new(0.0, 0.0)),
            Err(NogoError::BadInput(_))
        ));
        assert!(matches!(
            EncodingCandidate::new(0.5, 0.5, 0.0, C64::new(0.9, 0.0), C64::new(0.9, 0.0)),
            Err(NogoError::BadInput(_))
        ));
        let s0 = PureState::basis_state(2, 0).unwrap();
        let s1 = PureState::basis_state(3, 1).unwrap();
        assert!(matches!(
            EncodingCandidate::with_ancilla(0.5, 0.5, 0.0, a, a, s0, s1),
            Err(NogoError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn basis_inputs_are_consistent_by_construction() {
        let alpha = C64::new(0.6, 0.1);
        let beta = C64::new(0.0, (1.0 - alpha.norm_sqr()).sqrt());
        let candidate = EncodingCandidate::new(0.37, 0.81, 1.2, alpha, beta).unwrap();
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        assert!(candidate.residual(one, zero) <= 1e-12);
        assert!(candidate.residual(zero, one) <= 1e-12);
    }

    #[test]
    fn symmetric_candidate_admits_the_balanced_input() {
        let report = solve_consistency(&symmetric_candidate());
        assert!(report.degenerate.is_none());
        assert_eq!(report.solutions.len(), 2);
        assert!(report.solutions[0].0.norm() <= 1e-12);
        let (a, b) = report.solutions[1];
        assert!((a.re - SQRT_HALF).abs() <= 1e-12);
        assert!((b - C64::new(SQRT_HALF, 0.0)).norm() <= 1e-12);
        for &(a, b) in &report.solutions {
            assert!(consistency_residual(&symmetric_candidate(), a, b) <= 1e-10);
            assert!(symmetric_candidate().residual(a, b) <= 1e-10);
        }
        assert!(!report.only_trivial());
    }

    #[test]
    fn equation_solutions_are_physically_consistent() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut nontrivial = 0;
        for _ in 0..60 {
            let coeffs = haar_state_from_rng(2, &mut rng).unwrap();
            let alpha = coeffs.amplitudes()[0];
            let beta = coeffs.amplitudes()[1];
            if alpha.norm() < 0.2 || beta.norm() < 0.2 {
                continue;
            }
            let p0 = rng.gen_range(0.05..1.0);
            let p0p = rng.gen_range(0.05..1.0);
            let theta = rng.gen_range(0.0..std::f64::consts::TAU);
            let candidate = EncodingCandidate::new(p0, p0p, theta, alpha, beta).unwrap();
            let report = solve_consistency(&candidate);
            assert!(report.degenerate.is_none());
            for &(a, b) in &report.solutions {
                assert!((a.norm_sqr() + b.norm_sqr() - 1.0).abs() <= 1e-10);
                assert!(consistency_residual(&candidate, a, b) <= 1e-9);
                assert!(candidate.residual(a, b) <= 1e-9);
                if a.norm() > 1e-6 {
                    nontrivial += 1;
                }
            }
        }
        assert!(nontrivial >= 10);
    }

    #[test]
    fn haar_random_inputs_violate_the_equation() {
        let candidate = symmetric_candidate();
        let mut rng = ChaCha8Rng::seed_from_u64(97);
        for _ in 0..200 {
            let h = haar_state_from_rng(2, &mut rng).unwrap();
            let a = h.amplitudes()[0];
            let b = h.amplitudes()[1];
            assert!(consistency_residual(&candidate, a, b) > 1e-6);
        }
    }

    #[test]
    fn tiny_fixed_component_is_degenerate() {
        let beta = C64::new(1e-10, 0.0);
        let alpha = C64::new((1.0 - beta.norm_sqr()).sqrt(), 0.0);
        let candidate = EncodingCandidate::new(0.5, 0.5, 0.0, alpha, beta).unwrap();
        let report = solve_consistency(&candidate);
        assert!(report.degenerate.is_some());
        assert!(report.solutions.is_empty());
    }

    #[test]
    fn independent_ancilla_outputs_force_the_trivial_input() {
        let alpha = C64::new(SQRT_HALF, 0.0);
        let candidate = EncodingCandidate::with_ancilla(
            0.5,
            0.5,
            0.0,
            alpha,
            alpha,
            PureState::basis_state(2, 0).unwrap(),
            PureState::basis_state(2, 1).unwrap(),
        )
        .unwrap();
        let report = solve_consistency(&candidate);
        assert!(report.degenerate.is_none());
        assert_eq!(report.solutions.len(), 1);
        assert!(report.solutions[0].0.norm() <= 1e-12);
        assert!(report.only_trivial());
        // The trivial input really is consistent, and a generic one is not.
        assert!(candidate.residual(C64::new(0.0, 0.0), C64::new(1.0, 0.0)) <= 1e-12);
        assert!(candidate.residual(C64::new(0.6, 0.0), C64::new(0.8, 0.0)) > 1e-2);
    }

    #[test]
    fn parallel_ancillas_fold_into_the_branch_phase() {
        let alpha = C64::new(SQRT_HALF, 0.0);
        let delta = 0.9_f64;
        let s0 =
            PureState::new(CVector::from_vec(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]))
                .unwrap();
        let rotated: Vec<C64> = s0
            .amplitudes()
            .iter()
            .map(|&z| z * C64::from_polar(1.0, delta))
            .collect();
        let s1 = PureState::from_vector_exact(CVector::from_vec(rotated)).unwrap();
        let with_anc =
            EncodingCandidate::with_ancilla(0.3, 0.7, 0.4, alpha, alpha, s0, s1).unwrap();
        let folded = EncodingCandidate::new(0.3, 0.7, 0.4 + delta, alpha, alpha).unwrap();
        let ra = solve_consistency(&with_anc);
        let rb = solve_consistency(&folded);
        assert_eq!(ra.solutions.len(), rb.solutions.len());
        for (&(a1, b1), &(a2, b2)) in ra.solutions.iter().zip(&rb.solutions) {
            assert!((a1 - a2).norm() <= 1e-10);
            assert!((b1 - b2).norm() <= 1e-10);
        }
    }

    #[test]
    fn encoding_gap_matches_a_direct_recomputation() {
        let candidate = symmetric_candidate();
        let report = candidate.encoding_gap(2000, 7).unwrap();

        // Same stream, same arithmetic built from scratch.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut residuals = Vec::new();
        for _ in 0..2000 {
            let h = haar_state_from_rng(2, &mut rng).unwrap();
            let a = h.amplitudes()[0];
            let b = h.amplitudes()[1];
            let w1 = [
                a * 0.5_f64.sqrt() + b * 0.5_f64.sqrt() * SQRT_HALF,
                b * 0.5_f64.sqrt() * SQRT_HALF,
            ];
            let w2 = [(a + C64::new(1.0, 0.0)) * SQRT_HALF, b * SQRT_HALF];
            let n1 = w1[0].norm_sqr() + w1[1].norm_sqr();
            let n2 = w2[0].norm_sqr() + w2[1].norm_sqr();
            let ip = w1[0].conj() * w2[0] + w1[1].conj() * w2[1];
            residuals.push(1.0 - ip.norm_sqr() / (n1 * n2));
        }
        let mean = residuals.iter().sum::<f64>() / residuals.len() as f64;
        assert!((report.mean_residual - mean).abs() <= 1e-12);

        assert!(report.min_residual >= 0.0);
        assert!(report.percentile_residual >= report.min_residual);
        assert!(report.mean_residual > report.percentile_residual);
        assert!(report.mean_residual > 0.01);
    }

    #[test]
    fn encoding_gap_is_deterministic_and_positive_with_ancillas() {
        let alpha = C64::new(SQRT_HALF, 0.0);
        let candidate = EncodingCandidate::with_ancilla(
            0.5,
            0.5,
            0.0,
            alpha,
            alpha,
            PureState::basis_state(2, 0).unwrap(),
            PureState::basis_state(2, 1).unwrap(),
        )
        .unwrap();
        let r1 = encoding_gap(&candidate, 500, 11).unwrap();
        let r2 = encoding_gap(&candidate, 500, 11).unwrap();
        assert_eq!(r1, r2);
        assert!(r1.mean_residual > 0.05);
        assert!(r1.percentile_residual > 0.0);
    }

    #[test]
    fn ancilla_free_and_equal_ancilla_gaps_agree() {
        let alpha = C64::new(0.8, 0.0);
        let beta = C64::new(0.0, 0.6);
        let bare = EncodingCandidate::new(0.4, 0.9, 0.3, alpha, beta).unwrap();
        let sigma =
            PureState::new(CVector::from_vec(vec![C64::new(0.6, 0.0), C64::new(0.8, 0.0)]))
                .unwrap();
        let dressed = EncodingCandidate::with_ancilla(
            0.4,
            0.9,
            0.3,
            alpha,
            beta,
            sigma.clone(),
            sigma,
        )
        .unwrap();
        let ra = bare.encoding_gap(300, 3).unwrap();
        let rb = dressed.encoding_gap(300, 3).unwrap();
        assert!((ra.mean_residual - rb.mean_residual).abs() <= 1e-12);
        assert!((ra.min_residual - rb.min_residual).abs() <= 1e-12);
    }

    #[test]
    fn phase_violation_vanishes_without_a_fixed_component() {
        let psi = haar_random_state(2, 5).unwrap();
        let phi = haar_random_state(4, 6).unwrap();
        let report = phase_covariance_violation(
            2,
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
            &psi,
            &phi,
            720,
        )
        .unwrap();
        assert!(report.max_violation <= 1e-12);
    }

    #[test]
    fn phase_violation_vanishes_on_parallel_components() {
        let psi = haar_random_state(2, 8).unwrap();
        let phi = psi.tensor_power(3);
        let report = phase_covariance_violation(
            3,
            C64::new(0.6, 0.0),
            C64::new(0.0, 0.8),
            &psi,
            &phi,
            720,
        )
        .unwrap();
        assert!(report.max_violation <= 1e-12);
    }

    #[test]
    fn balanced_orthogonal_pair_reaches_full_violation_at_pi() {
        let psi = PureState::basis_state(2, 0).unwrap();
        let phi = PureState::basis_state(2, 1).unwrap();
        let alpha = C64::new(SQRT_HALF, 0.0);
        let report = phase_covariance_violation(1, alpha, alpha, &psi, &phi, 720).unwrap();
        assert!((report.max_violation - 1.0).abs() <= 1e-9);
        assert!((report.argmax_theta - std::f64::consts::PI).abs() <= 1e-6);
    }

    #[test]
    fn generic_superpositions_are_phase_sensitive() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..40 {
            let psi = haar_state_from_rng(2, &mut rng).unwrap();
            let phi = haar_state_from_rng(4, &mut rng).unwrap();
            let coeffs = haar_state_from_rng(2, &mut rng).unwrap();
            let alpha = coeffs.amplitudes()[0];
            let beta = coeffs.amplitudes()[1];
            if beta.norm_sqr() < 0.05 || beta.norm_sqr() > 0.95 {
                continue;
            }
            let overlap = psi.tensor_power(2).inner(&phi).norm();
            if overlap > 1.0 - 1e-6 {
                continue;
            }
            let report = phase_covariance_violation(2, alpha, beta, &psi, &phi, 720).unwrap();
            assert!(report.max_violation > 1e-8);
            assert!(report.argmax_theta >= 0.0 && report.argmax_theta < std::f64::consts::TAU);
        }
    }

    #[test]
    fn refinement_never_loses_to_the_grid() {
        let psi = haar_random_state(2, 31).unwrap();
        let phi = haar_random_state(2, 32).unwrap();
        let alpha = C64::new(0.6, 0.0);
        let beta = C64::new(0.48, 0.64);
        let coarse = phase_covariance_violation(1, alpha, beta, &psi, &phi, 16).unwrap();
        let fine = phase_covariance_violation(1, alpha, beta, &psi, &phi, 720).unwrap();
        assert!(fine.max_violation + 1e-12 >= coarse.max_violation);
        assert!(matches!(
            phase_covariance_violation(1, alpha, beta, &psi, &phi, 4),
            Err(NogoError::BadInput(_))
        ));
        let wrong_dim = haar_random_state(3, 33).unwrap();
        assert!(matches!(
            phase_covariance_violation(1, alpha, beta, &psi, &wrong_dim, 720),
            Err(NogoError::DimensionMismatch(_))
        ));
    }
}
