//! Pure states, state sets and tensor-factor permutations.
//!
//! States are rays: equality is modulo global phase. Stored representatives
//! are canonicalized so the first amplitude of magnitude above 1e-8 is real
//! positive, which keeps serialization and comparisons deterministic.

use crate::linalg::{self, CMatrix, CVector};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// PRNG identifier recorded alongside exported results.
pub const RNG_ALGORITHM: &str = "chacha8";

#[derive(Debug, Error)]
pub enum StateError {
    #[error("amplitude vector has zero norm")]
    ZeroVector,
    #[error("dimension {0} is too small; need at least 2")]
    DimTooSmall(usize),
    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("states in a set must share one dimension")]
    DimMismatch,
    #[error("no admissible value found up to the stated limit")]
    NotFound,
    #[error("unknown state token {0:?}; expected \"0\", \"1\", \"+\" or \"-\"")]
    BadToken(String),
    #[error("images do not form a bijection")]
    NotBijection,
}

pub type StateResult<T> = Result<T, StateError>;

/// Normalized pure state with a phase-canonical representative vector.
#[derive(Debug, Clone)]
pub struct PureState {
    amplitudes: CVector,
}

fn canonical_phase(v: &mut CVector) {
    for i in 0..v.len() {
        let a = v[i];
        if a.norm() > 1e-8 {
            let rot = a.conj() / C64::new(a.norm(), 0.0);
            *v *= rot;
            return;
        }
    }
}

impl PureState {
    /// Normalizes and phase-canonicalizes the given amplitudes.
    pub fn new(amplitudes: CVector) -> StateResult<Self> {
        if amplitudes.len() < 2 {
            return Err(StateError::DimTooSmall(amplitudes.len()));
        }
        let norm = amplitudes.norm();
        if norm < 1e-12 {
            return Err(StateError::ZeroVector);
        }
        let mut v = amplitudes / C64::new(norm, 0.0);
        canonical_phase(&mut v);
        Ok(Self { amplitudes: v })
    }

    /// Normalizes without touching the phase. Use when coefficients elsewhere
    /// refer to this exact representative; [`PureState::new`] would rotate it.
    pub fn from_vector_exact(amplitudes: CVector) -> StateResult<Self> {
        if amplitudes.len() < 2 {
            return Err(StateError::DimTooSmall(amplitudes.len()));
        }
        let norm = amplitudes.norm();
        if norm < 1e-12 {
            return Err(StateError::ZeroVector);
        }
        Ok(Self {
            amplitudes: amplitudes / C64::new(norm, 0.0),
        })
    }

    pub fn basis_state(dim: usize, index: usize) -> StateResult<Self> {
        if dim < 2 {
            return Err(StateError::DimTooSmall(dim));
        }
        if index >= dim {
            return Err(StateError::SizeMismatch {
                expected: dim,
                got: index,
            });
        }
        let v = CVector::from_fn(dim, |t, _| {
            C64::new(if t == index { 1.0 } else { 0.0 }, 0.0)
        });
        Ok(Self { amplitudes: v })
    }

    /// Qubit shorthand: `"0"`, `"1"`, `"+"`, `"-"`.
    pub fn from_token(token: &str) -> StateResult<Self> {
        let x = 1.0 / 2.0f64.sqrt();
        let amps = match token {
            "0" => vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            "1" => vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
            "+" => vec![C64::new(x, 0.0), C64::new(x, 0.0)],
            "-" => vec![C64::new(x, 0.0), C64::new(-x, 0.0)],
            other => return Err(StateError::BadToken(other.to_string())),
        };
        Self::new(CVector::from_vec(amps))
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    /// `⟨self|other⟩` on the canonical representatives.
    pub fn inner(&self, other: &PureState) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity_with(&self, other: &PureState) -> f64 {
        let dims_match = self.dim() == other.dim();
        assert!(dims_match, "fidelity needs equal dimensions");
        self.inner(other).norm_sqr()
    }

    /// Ray equality: `|⟨ψ|φ⟩| = 1` within 1e-10.
    pub fn approx_eq(&self, other: &PureState) -> bool {
        self.dim() == other.dim() && (self.inner(other).norm() - 1.0).abs() <= 1e-10
    }

    pub fn tensor(&self, other: &PureState) -> PureState {
        PureState {
            amplitudes: kron_vec(&self.amplitudes, &other.amplitudes),
        }
    }

    pub fn tensor_power(&self, k: usize) -> PureState {
        assert!(k >= 1, "tensor power needs k >= 1");
        let mut v = self.amplitudes.clone();
        for _ in 1..k {
            v = kron_vec(&v, &self.amplitudes);
        }
        PureState { amplitudes: v }
    }

    /// Rank-one projector `|ψ⟩⟨ψ|`.
    pub fn projector(&self) -> CMatrix {
        let d = self.dim();
        CMatrix::from_fn(d, d, |i, j| self.amplitudes[i] * self.amplitudes[j].conj())
    }
}

/// Kronecker product with the first factor most significant:
/// `(a ⊗ b)[i·len(b) + j] = a[i]·b[j]`.
pub fn kron_vec(a: &CVector, b: &CVector) -> CVector {
    let (na, nb) = (a.len(), b.len());
    CVector::from_fn(na * nb, |t, _| a[t / nb] * b[t % nb])
}

/// Ordered collection of equal-dimension pure states with labels.
#[derive(Debug, Clone)]
pub struct StateSet {
    states: Vec<PureState>,
    labels: Vec<String>,
}

impl StateSet {
    pub fn new(states: Vec<PureState>) -> StateResult<Self> {
        let labels = (1..=states.len()).map(|i| format!("s{i}")).collect();
        Self::with_labels(states, labels)
    }

    pub fn with_labels(states: Vec<PureState>, labels: Vec<String>) -> StateResult<Self> {
        if states.is_empty() {
            return Err(StateError::SizeMismatch {
                expected: 1,
                got: 0,
            });
        }
        if labels.len() != states.len() {
            return Err(StateError::SizeMismatch {
                expected: states.len(),
                got: labels.len(),
            });
        }
        let dim = states[0].dim();
        if states.iter().any(|s| s.dim() != dim) {
            return Err(StateError::DimMismatch);
        }
        Ok(Self { states, labels })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    pub fn states(&self) -> &[PureState] {
        &self.states
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn state(&self, i: usize) -> &PureState {
        &self.states[i]
    }

    /// Gram matrix of `k`-fold tensor powers: entry `(i,j) = ⟨ψ_i|ψ_j⟩^k`.
    pub fn gram(&self, k: usize) -> CMatrix {
        assert!(k >= 1, "gram needs k >= 1");
        let m = self.len();
        CMatrix::from_fn(m, m, |i, j| self.states[i].inner(&self.states[j]).powu(k as u32))
    }
}

/// Verdict of [`linear_independence`].
#[derive(Debug, Clone)]
pub enum IndependenceVerdict {
    Independent,
    /// Unit coefficient vector `c` with `‖Σ c_i ψ_i‖ ≤ √tol`.
    Dependent { witness: Vec<C64> },
}

impl IndependenceVerdict {
    pub fn is_independent(&self) -> bool {
        matches!(self, IndependenceVerdict::Independent)
    }
}

/// Tests linear independence via the smallest Gram eigenvalue.
pub fn linear_independence(set: &StateSet, tol: f64) -> IndependenceVerdict {
    let gram = set.gram(1);
    let eig = linalg::hermitian_eigen(&gram).expect("gram matrices are Hermitian");
    if eig.min() > tol {
        IndependenceVerdict::Independent
    } else {
        let m = set.len();
        let witness = (0..m).map(|i| eig.eigenvectors[(i, 0)]).collect();
        IndependenceVerdict::Dependent { witness }
    }
}

/// Distinguishability metric `D = 2(1 − |a|^t)` for an overlap `a` between
/// `t`-fold tensor powers.
pub fn overlap_metric(a: C64, t: usize) -> f64 {
    let mag = a.norm();
    assert!(mag <= 1.0 + 1e-12, "overlap magnitude {mag} exceeds 1");
    2.0 * (1.0 - mag.min(1.0).powi(t as i32))
}

/// Permutation on tensor-factor positions, stored as 0-based images.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    /// `images[u] = g(u)` with 0-based positions.
    pub fn from_images(images: Vec<usize>) -> StateResult<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &im in &images {
            if im >= n || seen[im] {
                return Err(StateError::NotBijection);
            }
            seen[im] = true;
        }
        Ok(Self { images })
    }

    /// Accepts 1-based images, the convention of cycle notation tables.
    pub fn from_images_one_based(images: Vec<usize>) -> StateResult<Self> {
        if images.iter().any(|&im| im == 0) {
            return Err(StateError::NotBijection);
        }
        Self::from_images(images.into_iter().map(|im| im - 1).collect())
    }

    pub fn identity(n: usize) -> Self {
        Self {
            images: (0..n).collect(),
        }
    }

    pub fn transposition(n: usize, a: usize, b: usize) -> Self {
        assert!(a < n && b < n, "transposition positions must lie below n");
        let mut images: Vec<usize> = (0..n).collect();
        images.swap(a, b);
        Self { images }
    }

    pub fn size(&self) -> usize {
        self.images.len()
    }

    pub fn image(&self, u: usize) -> usize {
        self.images[u]
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0usize; self.images.len()];
        for (u, &im) in self.images.iter().enumerate() {
            inv[im] = u;
        }
        Self { images: inv }
    }

    /// `(self ∘ other)(u) = self(other(u))`: apply `other` first.
    pub fn compose(&self, other: &Permutation) -> Self {
        assert_eq!(self.size(), other.size(), "composition needs equal sizes");
        Self {
            images: other.images.iter().map(|&u| self.images[u]).collect(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(u, &im)| u == im)
    }
}

fn check_swap_dims(perm: &Permutation, dims: &[usize]) -> StateResult<usize> {
    if perm.size() != dims.len() {
        return Err(StateError::SizeMismatch {
            expected: dims.len(),
            got: perm.size(),
        });
    }
    // S_g maps factor g⁻¹(t) to slot t, so those dimensions must agree.
    for t in 0..dims.len() {
        if dims[perm.image(t)] != dims[t] {
            return Err(StateError::DimMismatch);
        }
    }
    Ok(dims.iter().product())
}

fn decompose_index(mut idx: usize, dims: &[usize], digits: &mut [usize]) {
    for t in (0..dims.len()).rev() {
        digits[t] = idx % dims[t];
        idx /= dims[t];
    }
}

fn compose_index(digits: &[usize], dims: &[usize]) -> usize {
    let mut idx = 0usize;
    for t in 0..dims.len() {
        idx = idx * dims[t] + digits[t];
    }
    idx
}

/// Unitary permuting tensor factors: `S_g(x₁⊗…⊗x_n) = x_{g⁻¹(1)}⊗…⊗x_{g⁻¹(n)}`,
/// so `S_g S_h = S_{g∘h}`.
pub fn swap_operator(perm: &Permutation, dims: &[usize]) -> StateResult<CMatrix> {
    let total = check_swap_dims(perm, dims)?;
    let n = dims.len();
    let mut mat = CMatrix::zeros(total, total);
    let mut col_digits = vec![0usize; n];
    let mut row_digits = vec![0usize; n];
    for col in 0..total {
        decompose_index(col, dims, &mut col_digits);
        for t in 0..n {
            row_digits[t] = col_digits[perm.inverse_image_cached(t)];
        }
        let row = compose_index(&row_digits, dims);
        mat[(row, col)] = C64::new(1.0, 0.0);
    }
    Ok(mat)
}

impl Permutation {
    fn inverse_image_cached(&self, t: usize) -> usize {
        // n is tiny (tensor-factor counts), linear scan beats allocating.
        self.images
            .iter()
            .position(|&im| im == t)
            .expect("bijection")
    }
}

/// Applies the swap unitary to a statevector without materializing the matrix.
pub fn apply_swap(perm: &Permutation, dims: &[usize], v: &CVector) -> StateResult<CVector> {
    let total = check_swap_dims(perm, dims)?;
    if v.len() != total {
        return Err(StateError::SizeMismatch {
            expected: total,
            got: v.len(),
        });
    }
    let n = dims.len();
    let inv = perm.inverse();
    let mut out = CVector::zeros(total);
    let mut col_digits = vec![0usize; n];
    let mut row_digits = vec![0usize; n];
    for col in 0..total {
        decompose_index(col, dims, &mut col_digits);
        for t in 0..n {
            row_digits[t] = col_digits[inv.image(t)];
        }
        out[compose_index(&row_digits, dims)] = v[col];
    }
    Ok(out)
}

/// Smallest `k ≤ k_max` making the Hadamard power `A∘k` strictly diagonally
/// dominant, which certifies independence of the `k`-fold tensor powers.
pub fn gershgorin_k(gram: &CMatrix, k_max: usize) -> StateResult<usize> {
    let m = gram.nrows();
    assert!(gram.is_square(), "gram must be square");
    for i in 0..m {
        let diag = gram[(i, i)];
        assert!(
            (diag - C64::new(1.0, 0.0)).norm() < 1e-9,
            "gram must have unit diagonal"
        );
    }
    for k in 1..=k_max {
        let dominant = (0..m).all(|i| {
            let off: f64 = (0..m)
                .filter(|&j| j != i)
                .map(|j| gram[(i, j)].norm().powi(k as i32))
                .sum();
            off < 1.0
        });
        if dominant {
            return Ok(k);
        }
    }
    Err(StateError::NotFound)
}

/// One standard complex normal sample via Box-Muller.
fn complex_normal(rng: &mut ChaCha8Rng) -> C64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    let r = (-2.0 * u1.ln()).sqrt();
    let angle = 2.0 * std::f64::consts::PI * u2;
    C64::new(r * angle.cos(), r * angle.sin())
}

/// Haar-distributed state from an explicitly threaded PRNG.
pub fn haar_state_from_rng(dim: usize, rng: &mut ChaCha8Rng) -> StateResult<PureState> {
    if dim < 2 {
        return Err(StateError::DimTooSmall(dim));
    }
    loop {
        let v = CVector::from_fn(dim, |_, _| complex_normal(rng));
        if v.norm() > 1e-6 {
            return PureState::new(v);
        }
    }
}

/// Haar-distributed state, deterministic per seed (ChaCha8 keyed by the seed).
pub fn haar_random_state(dim: usize, seed: u64) -> StateResult<PureState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    haar_state_from_rng(dim, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn construction_normalizes_and_canonicalizes_phase() {
        let raw = CVector::from_vec(vec![c(0.0, 3.0), c(0.0, 3.0)]);
        let psi = PureState::new(raw).unwrap();
        assert!((psi.amplitudes().norm() - 1.0).abs() < 1e-12);
        assert!(psi.amplitudes()[0].im.abs() < 1e-12);
        assert!(psi.amplitudes()[0].re > 0.0);

        let a = PureState::from_token("+").unwrap();
        let rotated = PureState::new(a.amplitudes() * c(0.0, 1.0)).unwrap();
        assert!(a.approx_eq(&rotated));
    }

    #[test]
    fn construction_rejects_degenerate_input() {
        assert!(matches!(
            PureState::new(CVector::from_vec(vec![c(0.0, 0.0), c(0.0, 0.0)])),
            Err(StateError::ZeroVector)
        ));
        assert!(matches!(
            PureState::new(CVector::from_vec(vec![c(1.0, 0.0)])),
            Err(StateError::DimTooSmall(1))
        ));
    }

    #[test]
    fn gram_examples() {
        let zero = PureState::from_token("0").unwrap();
        let one = PureState::from_token("1").unwrap();
        let plus = PureState::from_token("+").unwrap();

        let ortho = StateSet::new(vec![zero.clone(), one.clone()]).unwrap();
        let g = ortho.gram(1);
        assert!((g[(0, 0)].re - 1.0).abs() < 1e-12 && g[(0, 1)].norm() < 1e-12);

        let pair = StateSet::new(vec![zero.clone(), plus]).unwrap();
        let g2 = pair.gram(2);
        assert!((g2[(0, 1)].re - 0.5).abs() < 1e-12);

        let psi2 = PureState::new(CVector::from_vec(vec![
            c((2.0f64 / 3.0).sqrt(), 0.0),
            c((1.0f64 / 3.0).sqrt(), 0.0),
        ]))
        .unwrap();
        let fig = StateSet::new(vec![zero, psi2]).unwrap();
        let overlap = fig.gram(1)[(0, 1)];
        assert!((overlap.re - 0.816_496_580_927_726).abs() < 1e-12);
    }

    #[test]
    fn gram_matches_hadamard_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let states: Vec<PureState> = (0..3)
            .map(|_| haar_state_from_rng(3, &mut rng).unwrap())
            .collect();
        let set = StateSet::new(states).unwrap();
        let direct = set.gram(3);
        let powered = crate::linalg::hadamard_power(&set.gram(1), 3).unwrap();
        assert!(crate::linalg::spectral_norm(&(direct - powered)) < 1e-12);
    }

    #[test]
    fn independence_verdicts() {
        let zero = PureState::from_token("0").unwrap();
        let one = PureState::from_token("1").unwrap();
        let plus = PureState::from_token("+").unwrap();

        let basis = StateSet::new(vec![zero.clone(), one.clone()]).unwrap();
        assert!(linear_independence(&basis, 1e-10).is_independent());

        let dup = StateSet::new(vec![zero.clone(), zero.clone()]).unwrap();
        match linear_independence(&dup, 1e-10) {
            IndependenceVerdict::Dependent { witness } => {
                let x = 1.0 / 2.0f64.sqrt();
                assert!((witness[0].norm() - x).abs() < 1e-9);
                assert!((witness[1].norm() - x).abs() < 1e-9);
                assert!((witness[0] + witness[1]).norm() < 1e-9);
                let combo = zero.amplitudes() * witness[0] + zero.amplitudes() * witness[1];
                assert!(combo.norm() <= 1e-6);
            }
            _ => panic!("duplicate states must be dependent"),
        }

        let crowded = StateSet::new(vec![zero, plus, one]).unwrap();
        assert!(!linear_independence(&crowded, 1e-10).is_independent());
    }

    #[test]
    fn overlap_metric_examples_and_monotonicity() {
        assert!((overlap_metric(c(0.0, 0.0), 1) - 2.0).abs() < 1e-15);
        assert!(overlap_metric(c(1.0, 0.0), 3).abs() < 1e-15);
        assert!((overlap_metric(c(1.0 / 2.0f64.sqrt(), 0.0), 2) - 1.0).abs() < 1e-15);
        assert!(overlap_metric(c(0.9, 0.0), 1) > overlap_metric(c(0.95, 0.0), 1));
        assert!(overlap_metric(c(0.9, 0.0), 3) > overlap_metric(c(0.9, 0.0), 2));
    }

    #[test]
    fn swap_operator_examples() {
        let id = Permutation::identity(2);
        let s_id = swap_operator(&id, &[2, 2]).unwrap();
        assert!(crate::linalg::spectral_norm(&(s_id - CMatrix::identity(4, 4))) < 1e-15);

        let swap = Permutation::transposition(2, 0, 1);
        let s = swap_operator(&swap, &[2, 2]).unwrap();
        let zero = PureState::from_token("0").unwrap();
        let one = PureState::from_token("1").unwrap();
        let in01 = zero.tensor(&one);
        let out = &s * in01.amplitudes();
        let expect = one.tensor(&zero);
        assert!((out - expect.amplitudes()).norm() < 1e-15);
    }

    #[test]
    fn swap_group_law_and_unitarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let dims = [2usize, 2, 2, 2];
        for _ in 0..20 {
            let mut images: Vec<usize> = (0..4).collect();
            for u in (1..4).rev() {
                let pick = rng.gen_range(0..=u);
                images.swap(u, pick);
            }
            let g = Permutation::from_images(images).unwrap();
            let mut h_images: Vec<usize> = (0..4).collect();
            for u in (1..4).rev() {
                let pick = rng.gen_range(0..=u);
                h_images.swap(u, pick);
            }
            let h = Permutation::from_images(h_images).unwrap();

            let sg = swap_operator(&g, &dims).unwrap();
            let sh = swap_operator(&h, &dims).unwrap();
            let sgh = swap_operator(&g.compose(&h), &dims).unwrap();
            assert!(crate::linalg::spectral_norm(&(&sg * &sh - sgh)) < 1e-13);

            let sginv = swap_operator(&g.inverse(), &dims).unwrap();
            let prod = &sg * &sginv;
            assert!(
                crate::linalg::spectral_norm(&(prod - CMatrix::identity(16, 16))) < 1e-13
            );
            assert!(crate::linalg::unitarity_defect(&sg) < 1e-12);
        }
    }

    #[test]
    fn apply_swap_matches_matrix_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let dims = [2usize, 3, 2, 3];
        // factors 0<->2 and 1<->3 swap like dimensions.
        let g = Permutation::from_images(vec![2, 3, 0, 1]).unwrap();
        let s = swap_operator(&g, &dims).unwrap();
        let v = CVector::from_fn(36, |_, _| complex_normal(&mut rng));
        let fast = apply_swap(&g, &dims, &v).unwrap();
        assert!((&s * &v - fast).norm() < 1e-12);
    }

    #[test]
    fn swap_rejects_dimension_conflicts() {
        let g = Permutation::transposition(2, 0, 1);
        assert!(matches!(
            swap_operator(&g, &[2, 3]),
            Err(StateError::DimMismatch)
        ));
        assert!(matches!(
            swap_operator(&g, &[2, 2, 2]),
            Err(StateError::SizeMismatch { .. })
        ));
    }

    #[test]
    fn permutation_validation() {
        assert!(Permutation::from_images(vec![0, 0]).is_err());
        assert!(Permutation::from_images(vec![0, 2]).is_err());
        let one_based = Permutation::from_images_one_based(vec![2, 3, 1]).unwrap();
        assert_eq!(one_based.images(), &[1, 2, 0]);
        assert!(one_based.compose(&one_based.inverse()).is_identity());
    }

    #[test]
    fn gershgorin_examples() {
        let id = CMatrix::identity(3, 3);
        assert_eq!(gershgorin_k(&id, 5).unwrap(), 1);

        let g = CMatrix::from_fn(3, 3, |i, j| {
            if i == j {
                c(1.0, 0.0)
            } else {
                c(0.6, 0.0)
            }
        });
        assert_eq!(gershgorin_k(&g, 5).unwrap(), 2);

        let dup = CMatrix::from_element(2, 2, c(1.0, 0.0));
        assert!(matches!(gershgorin_k(&dup, 8), Err(StateError::NotFound)));
    }

    #[test]
    fn haar_sampling_is_deterministic_and_unbiased() {
        let a = haar_random_state(4, 99).unwrap();
        let b = haar_random_state(4, 99).unwrap();
        assert!((a.inner(&b).norm() - 1.0).abs() < 1e-12);
        let other = haar_random_state(4, 100).unwrap();
        assert!(a.inner(&other).norm() < 0.999);
        assert!(matches!(
            haar_random_state(1, 5),
            Err(StateError::DimTooSmall(1))
        ));

        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let mut mean = 0.0f64;
        let trials = 10_000;
        for _ in 0..trials {
            let psi = haar_state_from_rng(2, &mut rng).unwrap();
            mean += psi.amplitudes()[0].norm_sqr();
        }
        mean /= trials as f64;
        assert!((mean - 0.5).abs() < 0.02, "mean fidelity {mean}");
    }

    #[test]
    fn tensor_products_and_projector() {
        let zero = PureState::from_token("0").unwrap();
        let one = PureState::from_token("1").unwrap();
        let z01 = zero.tensor(&one);
        assert_eq!(z01.dim(), 4);
        assert!((z01.amplitudes()[1].re - 1.0).abs() < 1e-15);

        let cube = one.tensor_power(3);
        assert_eq!(cube.dim(), 8);
        assert!((cube.amplitudes()[7].re - 1.0).abs() < 1e-15);

        let p = zero.projector();
        assert!((p[(0, 0)].re - 1.0).abs() < 1e-15);
        assert!(p[(1, 1)].norm() < 1e-15);
    }
}
