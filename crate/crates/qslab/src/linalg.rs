//! Dense complex-matrix kernel: Hadamard products, Hermitian and PSD testing,
//! spectral norms, eigendecomposition, PSD factorization and completion of a
//! partial isometry to a full unitary.
//!
//! All predicates use a relative tolerance against `max(1, scale)` where the
//! scale is the largest eigenvalue magnitude involved, so verdicts stay
//! reproducible under floating-point noise.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use thiserror::Error;

/// Dense complex matrix used throughout the crate.
pub type CMatrix = DMatrix<C64>;
/// Dense complex column vector.
pub type CVector = DVector<C64>;

/// Default relative tolerance for predicates when a caller has no opinion.
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("shape mismatch: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("matrix is not square: {0}x{1}")]
    NotSquare(usize, usize),
    #[error("matrix is not Hermitian: max asymmetry {0:.3e}")]
    NotHermitian(f64),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("matrix is not positive semidefinite: min eigenvalue {0:.3e}")]
    NotPsd(f64),
    #[error("gram matrices disagree: max entry deviation {0:.3e} exceeds tolerance {1:.3e}")]
    GramMismatch(f64, f64),
    #[error("dimension error: {0}")]
    DimensionError(String),
    #[error("non-finite entry at ({0},{1})")]
    NonFinite(usize, usize),
}

pub type LinalgResult<T> = Result<T, LinalgError>;

/// Verdict of [`is_positive_definite`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Definiteness {
    PositiveDefinite,
    /// Positive semidefinite with at least one eigenvalue at zero within tolerance.
    PsdOnly,
    Indefinite,
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub eigenvalues: Vec<f64>,
    /// Unitary matrix whose column `t` is the eigenvector for `eigenvalues[t]`.
    pub eigenvectors: CMatrix,
}

/// Factorization of a PSD matrix `Q` into `Q_ij = norm_i * norm_j * <unit_i|unit_j>`.
#[derive(Debug, Clone)]
pub struct PsdFactorization {
    pub column_norms: Vec<f64>,
    pub unit_vectors: Vec<CVector>,
}

/// Result of the perturbation-margin test of [`lemma1_check`].
#[derive(Debug, Clone, Copy)]
pub struct Lemma1Report {
    /// `‖A⁻¹‖₂⁻¹ − ‖B‖₂`; positive margin certifies that `A − B` stays PD.
    pub margin: f64,
    pub holds: bool,
}

pub fn ensure_finite(m: &CMatrix) -> LinalgResult<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let z = m[(i, j)];
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(LinalgError::NonFinite(i, j));
            }
        }
    }
    Ok(())
}

/// Max entry magnitude of `M − M†`; zero for exactly Hermitian input.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            worst = worst.max(d);
        }
    }
    worst
}

pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    m.is_square() && hermitian_defect(m) <= tol * scale_of(m)
}

fn scale_of(m: &CMatrix) -> f64 {
    let mut s = 1.0f64;
    for z in m.iter() {
        s = s.max(z.norm());
    }
    s
}

/// `(M + M†)/2`, used to strip numerical drift before eigendecomposition.
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Entrywise product. Commutative, associative, Hermitian- and PSD-preserving.
pub fn hadamard_product(a: &CMatrix, b: &CMatrix) -> LinalgResult<CMatrix> {
    if a.shape() != b.shape() {
        return Err(LinalgError::ShapeMismatch(
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols(),
        ));
    }
    Ok(a.component_mul(b))
}

/// Entrywise `k`-th power of a square matrix, `k ≥ 1`.
pub fn hadamard_power(a: &CMatrix, k: usize) -> LinalgResult<CMatrix> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare(a.nrows(), a.ncols()));
    }
    assert!(k >= 1, "hadamard_power requires k >= 1");
    Ok(a.map(|z| z.powu(k as u32)))
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues sorted ascending.
pub fn hermitian_eigen(m: &CMatrix) -> LinalgResult<EigenResult> {
    if !m.is_square() {
        return Err(LinalgError::NotSquare(m.nrows(), m.ncols()));
    }
    ensure_finite(m)?;
    let defect = hermitian_defect(m);
    if defect > 1e-8 * scale_of(m) {
        return Err(LinalgError::NotHermitian(defect));
    }
    let se = hermitize(m).symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&t| se.eigenvalues[t]).collect();
    let eigenvectors =
        CMatrix::from_fn(n, n, |i, j| se.eigenvectors[(i, order[j])]);
    Ok(EigenResult {
        eigenvalues,
        eigenvectors,
    })
}

impl EigenResult {
    pub fn min(&self) -> f64 {
        *self.eigenvalues.first().expect("empty eigendecomposition")
    }

    pub fn max(&self) -> f64 {
        *self.eigenvalues.last().expect("empty eigendecomposition")
    }

    /// Rebuilds `V Λ V†`; used by round-trip checks.
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.eigenvalues.len();
        let lambda = CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(self.eigenvalues[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        &self.eigenvectors * lambda * self.eigenvectors.adjoint()
    }
}

/// Largest singular value. For Hermitian input this is the largest
/// eigenvalue magnitude.
pub fn spectral_norm(a: &CMatrix) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    if is_hermitian(a, 1e-12) {
        let eig = hermitian_eigen(a).expect("hermitian eigen on checked input");
        return eig.min().abs().max(eig.max().abs());
    }
    // Gram trick on the smaller side keeps the eigenproblem compact.
    let gram = if a.nrows() <= a.ncols() {
        a * a.adjoint()
    } else {
        a.adjoint() * a
    };
    let eig = hermitian_eigen(&gram).expect("A·A† is Hermitian by construction");
    eig.max().max(0.0).sqrt()
}

/// `‖A⁻¹‖₂⁻¹` for positive-definite Hermitian `A`, i.e. its smallest eigenvalue.
pub fn inverse_norm_bound(a: &CMatrix) -> LinalgResult<f64> {
    let eig = hermitian_eigen(a)?;
    if eig.min() <= DEFAULT_TOL * eig.max().max(1.0) {
        return Err(LinalgError::NotPositiveDefinite);
    }
    Ok(eig.min())
}

/// Classifies a Hermitian matrix as PD, PSD-only or indefinite.
///
/// PD requires `λ_min > tol·max(1, λ_max)`; eigenvalues within `±tol·max(1, λ_max)`
/// of zero are classed PSD-only.
pub fn is_positive_definite(a: &CMatrix, tol: f64) -> LinalgResult<Definiteness> {
    let eig = hermitian_eigen(a)?;
    let threshold = tol * eig.max().max(1.0);
    if eig.min() > threshold {
        Ok(Definiteness::PositiveDefinite)
    } else if eig.min() >= -threshold {
        Ok(Definiteness::PsdOnly)
    } else {
        Ok(Definiteness::Indefinite)
    }
}

/// Sufficient perturbation test: `A − B` stays PD whenever `‖B‖₂ < ‖A⁻¹‖₂⁻¹`.
///
/// `holds == false` is not evidence of indefiniteness; the criterion is
/// sufficient only.
pub fn lemma1_check(a: &CMatrix, b: &CMatrix) -> LinalgResult<Lemma1Report> {
    if is_positive_definite(a, DEFAULT_TOL)? != Definiteness::PositiveDefinite {
        return Err(LinalgError::NotPositiveDefinite);
    }
    if !is_hermitian(b, 1e-8) {
        return Err(LinalgError::NotHermitian(hermitian_defect(b)));
    }
    let margin = inverse_norm_bound(a)? - spectral_norm(b);
    Ok(Lemma1Report {
        margin,
        holds: margin > 0.0,
    })
}

/// Factors PSD `Q` into column norms `√q_i` and unit vectors `Φ̃_i` with
/// `√(q_i q_j)·<Φ̃_i|Φ̃_j> = Q_ij`.
///
/// Eigenvalues in `[−tol·max(1,λ_max), 0)` are clipped to zero; anything more
/// negative is an error. Columns of exactly zero norm are paired with a
/// canonical basis unit vector so every reported vector stays normalized.
pub fn psd_factor(q: &CMatrix, tol: f64) -> LinalgResult<PsdFactorization> {
    let eig = hermitian_eigen(q)?;
    let threshold = tol * eig.max().max(1.0);
    if eig.min() < -threshold {
        return Err(LinalgError::NotPsd(eig.min()));
    }
    let m = q.nrows();
    let mut column_norms = Vec::with_capacity(m);
    let mut unit_vectors = Vec::with_capacity(m);
    let roots: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).collect();
    for i in 0..m {
        // w_i[t] = √λ_t · conj(V_it) satisfies <w_i|w_j> = Q_ij exactly.
        let w = CVector::from_fn(m, |t, _| eig.eigenvectors[(i, t)].conj() * roots[t]);
        let norm = w.norm();
        if norm <= 1e-15 * roots.last().copied().unwrap_or(0.0).max(1.0) {
            column_norms.push(0.0);
            unit_vectors.push(CVector::from_fn(m, |t, _| {
                C64::new(if t == i { 1.0 } else { 0.0 }, 0.0)
            }));
        } else {
            column_norms.push(norm);
            unit_vectors.push(w / C64::new(norm, 0.0));
        }
    }
    Ok(PsdFactorization {
        column_norms,
        unit_vectors,
    })
}

impl PsdFactorization {
    /// Rebuilds the matrix `√(q_i q_j)·<Φ̃_i|Φ̃_j>`.
    pub fn reconstruct(&self) -> CMatrix {
        let m = self.column_norms.len();
        CMatrix::from_fn(m, m, |i, j| {
            self.unit_vectors[i].dotc(&self.unit_vectors[j])
                * C64::new(self.column_norms[i] * self.column_norms[j], 0.0)
        })
    }
}

fn gram_of(columns: &[CVector]) -> CMatrix {
    let m = columns.len();
    CMatrix::from_fn(m, m, |i, j| columns[i].dotc(&columns[j]))
}

/// Residual-norm threshold below which a column adds no new direction.
const RANK_TOL: f64 = 1e-8;

/// Modified Gram-Schmidt with a fixed pivot order and re-orthogonalization.
/// Returns the orthonormal basis of the span, in pivot order, skipping columns
/// whose residual is below `RANK_TOL`.
fn orthonormalize_in_order(columns: &[CVector], order: &[usize], dim: usize) -> Vec<CVector> {
    let mut basis: Vec<CVector> = Vec::new();
    for &idx in order {
        let mut v = columns[idx].clone();
        for _pass in 0..2 {
            for b in &basis {
                let c = b.dotc(&v);
                v -= b * c;
            }
        }
        let norm = v.norm();
        if norm > RANK_TOL * (1.0 + columns[idx].norm()) {
            basis.push(v / C64::new(norm, 0.0));
        }
        if basis.len() == dim {
            break;
        }
    }
    basis
}

/// Extends an orthonormal set to a full basis of `C^dim` using canonical basis
/// vectors, deterministically.
fn complete_basis(mut basis: Vec<CVector>, dim: usize) -> Vec<CVector> {
    let mut canonical = 0usize;
    while basis.len() < dim && canonical < dim {
        let mut v = CVector::from_fn(dim, |t, _| {
            C64::new(if t == canonical { 1.0 } else { 0.0 }, 0.0)
        });
        for _pass in 0..2 {
            for b in &basis {
                let c = b.dotc(&v);
                v -= b * c;
            }
        }
        let norm = v.norm();
        if norm > 1e-6 {
            basis.push(v / C64::new(norm, 0.0));
        }
        canonical += 1;
    }
    assert_eq!(basis.len(), dim, "canonical completion must reach full rank");
    basis
}

/// Builds a unitary `U` on the output space with `U·input_i = output_i`,
/// given that both column sets share the same Gram matrix within `tol`.
///
/// Inputs living in a smaller space are embedded canonically (zero padding).
/// The completion beyond the spanned subspace is deterministic: canonical
/// basis vectors orthogonalized in index order.
pub fn complete_isometry(
    inputs: &[CVector],
    outputs: &[CVector],
    tol: f64,
) -> LinalgResult<CMatrix> {
    if inputs.len() != outputs.len() {
        return Err(LinalgError::DimensionError(format!(
            "{} input columns vs {} output columns",
            inputs.len(),
            outputs.len()
        )));
    }
    if inputs.is_empty() {
        return Err(LinalgError::DimensionError("empty column sets".into()));
    }
    let din = inputs[0].len();
    let dout = outputs[0].len();
    if inputs.iter().any(|v| v.len() != din) || outputs.iter().any(|v| v.len() != dout) {
        return Err(LinalgError::DimensionError(
            "ragged column dimensions".into(),
        ));
    }
    if dout < din {
        return Err(LinalgError::DimensionError(format!(
            "output dimension {dout} smaller than input dimension {din}"
        )));
    }

    let embedded: Vec<CVector> = inputs
        .iter()
        .map(|v| {
            let mut w = CVector::zeros(dout);
            w.rows_mut(0, din).copy_from(v);
            w
        })
        .collect();

    let gin = gram_of(&embedded);
    let gout = gram_of(outputs);
    let mut worst = 0.0f64;
    for i in 0..inputs.len() {
        for j in 0..inputs.len() {
            worst = worst.max((gin[(i, j)] - gout[(i, j)]).norm());
        }
    }
    if worst > tol {
        return Err(LinalgError::GramMismatch(worst, tol));
    }

    // Pivot order chosen on the inputs, then reused verbatim on the outputs so
    // corresponding basis vectors carry identical expansion coefficients.
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    order.sort_by(|&a, &b| embedded[b].norm().total_cmp(&embedded[a].norm()));
    let u_basis = complete_basis(orthonormalize_in_order(&embedded, &order, dout), dout);
    let v_basis = complete_basis(orthonormalize_in_order(outputs, &order, dout), dout);
    if u_basis.len() != v_basis.len() {
        return Err(LinalgError::GramMismatch(worst, tol));
    }

    let u_mat = CMatrix::from_columns(&u_basis);
    let v_mat = CMatrix::from_columns(&v_basis);
    let unitary = v_mat * u_mat.adjoint();

    // Safety net for near-degenerate spans the rank threshold cannot separate.
    for (inp, out) in embedded.iter().zip(outputs.iter()) {
        let residual = (&unitary * inp - out).norm();
        if residual > (1e-6f64).max(100.0 * tol) * (1.0 + inp.norm()) {
            return Err(LinalgError::GramMismatch(residual, tol));
        }
    }
    Ok(unitary)
}

/// Frobenius norm of `U†U − I`; an upper bound on the spectral-norm unitarity
/// defect.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let n = u.ncols();
    let mut g = u.adjoint() * u;
    for i in 0..n {
        g[(i, i)] -= C64::new(1.0, 0.0);
    }
    g.norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_psd(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
        let b = CMatrix::from_fn(n, n, |_, _| {
            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        &b * b.adjoint()
    }

    #[test]
    fn hadamard_identity_mask() {
        let a = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 1.0), c(3.0, -1.0), c(4.0, 0.0)]);
        let id = CMatrix::identity(2, 2);
        let masked = hadamard_product(&id, &a).unwrap();
        assert_eq!(masked[(0, 0)], c(1.0, 0.0));
        assert_eq!(masked[(1, 1)], c(4.0, 0.0));
        assert_eq!(masked[(0, 1)], c(0.0, 0.0));
        assert_eq!(masked[(1, 0)], c(0.0, 0.0));
    }

    #[test]
    fn hadamard_square_of_overlap_gram() {
        let x = 1.0 / 2.0f64.sqrt();
        let a = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(x, 0.0), c(x, 0.0), c(1.0, 0.0)]);
        let sq = hadamard_product(&a, &a).unwrap();
        assert!((sq[(0, 1)].re - 0.5).abs() < 1e-14);
        let pow = hadamard_power(&a, 2).unwrap();
        assert_eq!(sq, pow);
        assert_eq!(hadamard_power(&a, 1).unwrap(), a);
    }

    #[test]
    fn hadamard_shape_mismatch() {
        let a = CMatrix::zeros(2, 2);
        let b = CMatrix::zeros(2, 3);
        assert!(matches!(
            hadamard_product(&a, &b),
            Err(LinalgError::ShapeMismatch(..))
        ));
    }

    #[test]
    fn schur_product_preserves_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..50 {
            let a = random_psd(&mut rng, 4);
            let b = random_psd(&mut rng, 4);
            let prod = hadamard_product(&a, &b).unwrap();
            let eig = hermitian_eigen(&prod).unwrap();
            assert!(eig.min() >= -1e-10, "min eigenvalue {}", eig.min());
            let cubed = hadamard_power(&a, 3).unwrap();
            assert!(hermitian_eigen(&cubed).unwrap().min() >= -1e-10);
        }
    }

    #[test]
    fn spectral_norm_examples() {
        let d = CMatrix::from_row_slice(2, 2, &[c(3.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!((spectral_norm(&d) - 3.0).abs() < 1e-12);
        let x = 1.0 / 2.0f64.sqrt();
        let a = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(x, 0.0), c(x, 0.0), c(1.0, 0.0)]);
        assert!((spectral_norm(&a) - (1.0 + x)).abs() < 1e-12);
        assert!((inverse_norm_bound(&a).unwrap() - (1.0 - x)).abs() < 1e-12);
    }

    #[test]
    fn spectral_norm_non_hermitian() {
        // Shear [[0,2],[0,0]] has singular value 2.
        let a = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!((spectral_norm(&a) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn definiteness_verdicts() {
        let id = CMatrix::identity(3, 3);
        assert_eq!(
            is_positive_definite(&id, DEFAULT_TOL).unwrap(),
            Definiteness::PositiveDefinite
        );
        let ones = CMatrix::from_element(2, 2, c(1.0, 0.0));
        assert_eq!(
            is_positive_definite(&ones, DEFAULT_TOL).unwrap(),
            Definiteness::PsdOnly
        );
        let ind = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(
            is_positive_definite(&ind, DEFAULT_TOL).unwrap(),
            Definiteness::Indefinite
        );
    }

    #[test]
    fn eigen_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [2usize, 4, 6] {
            let m = random_psd(&mut rng, n);
            let eig = hermitian_eigen(&m).unwrap();
            let residual = spectral_norm(&(eig.reconstruct() - &m));
            assert!(residual <= 1e-9 * (1.0 + spectral_norm(&m)));
            for t in 1..n {
                assert!(eig.eigenvalues[t] >= eig.eigenvalues[t - 1]);
            }
        }
    }

    #[test]
    fn lemma1_margin_example() {
        let x = 1.0 / 2.0f64.sqrt();
        let a = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(x, 0.0), c(x, 0.0), c(1.0, 0.0)]);
        let b = CMatrix::identity(2, 2) * c(0.2, 0.0);
        let report = lemma1_check(&a, &b).unwrap();
        assert!((report.margin - (1.0 - x - 0.2)).abs() < 1e-12);
        assert!(report.holds);
        let diff = &a - &b;
        assert_eq!(
            is_positive_definite(&diff, DEFAULT_TOL).unwrap(),
            Definiteness::PositiveDefinite
        );

        let zero = CMatrix::zeros(2, 2);
        let r0 = lemma1_check(&a, &zero).unwrap();
        assert!((r0.margin - (1.0 - x)).abs() < 1e-12);

        let ra = lemma1_check(&a, &a).unwrap();
        assert!(!ra.holds);
    }

    #[test]
    fn lemma1_rejects_bad_inputs() {
        let ind = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(1.0, 0.0)]);
        let id = CMatrix::identity(2, 2);
        assert!(matches!(
            lemma1_check(&ind, &id),
            Err(LinalgError::NotPositiveDefinite)
        ));
        let skew = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(
            lemma1_check(&id, &skew),
            Err(LinalgError::NotHermitian(_))
        ));
    }

    #[test]
    fn psd_factor_diagonal_and_rank_one() {
        let q = CMatrix::from_row_slice(2, 2, &[c(0.25, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.09, 0.0)]);
        let f = psd_factor(&q, DEFAULT_TOL).unwrap();
        assert!((f.column_norms[0] - 0.5).abs() < 1e-12);
        assert!((f.column_norms[1] - 0.3).abs() < 1e-12);
        assert!(f.unit_vectors[0].dotc(&f.unit_vectors[1]).norm() < 1e-12);

        let v = CVector::from_vec(vec![c(0.6, 0.0), c(0.0, 0.8)]);
        let rank1 = CMatrix::from_fn(2, 2, |i, j| v[i] * v[j].conj());
        let f1 = psd_factor(&rank1, DEFAULT_TOL).unwrap();
        let overlap = f1.unit_vectors[0].dotc(&f1.unit_vectors[1]).norm();
        assert!((overlap - 1.0).abs() < 1e-10, "rank-1 directions must align");
        let residual = spectral_norm(&(f1.reconstruct() - &rank1));
        assert!(residual < 1e-9);
    }

    #[test]
    fn psd_factor_handles_zero_matrix_and_rejects_indefinite() {
        let zero = CMatrix::zeros(3, 3);
        let f = psd_factor(&zero, DEFAULT_TOL).unwrap();
        assert!(f.column_norms.iter().all(|&n| n == 0.0));
        for v in &f.unit_vectors {
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
        let ind = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(
            psd_factor(&ind, DEFAULT_TOL),
            Err(LinalgError::NotPsd(_))
        ));
    }

    #[test]
    fn psd_factor_random_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let q = random_psd(&mut rng, 5);
        let f = psd_factor(&q, DEFAULT_TOL).unwrap();
        let residual = spectral_norm(&(f.reconstruct() - &q));
        assert!(residual <= 1e-9 * (1.0 + spectral_norm(&q)));
    }

    #[test]
    fn isometry_trivial_and_bit_flip() {
        let e1 = CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let u = complete_isometry(&[e1.clone()], &[e1.clone()], 1e-9).unwrap();
        assert!((&u * &e1 - &e1).norm() < 1e-12);
        assert!(unitarity_defect(&u) < 1e-12);

        let zero = CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let one = CVector::from_vec(vec![c(0.0, 0.0), c(1.0, 0.0)]);
        let flip = complete_isometry(&[zero.clone()], &[one.clone()], 1e-9).unwrap();
        assert!((&flip * &zero - &one).norm() < 1e-12);
        assert!(unitarity_defect(&flip) < 1e-12);
    }

    #[test]
    fn isometry_gram_mismatch() {
        let v = |a: f64, b: f64| CVector::from_vec(vec![c(a, 0.0), c(b, 0.0)]);
        let inputs = [v(1.0, 0.0), v(0.7, (1.0f64 - 0.49).sqrt())];
        let outputs = [v(1.0, 0.0), v(0.69, (1.0f64 - 0.69 * 0.69).sqrt())];
        assert!(matches!(
            complete_isometry(&inputs, &outputs, 1e-9),
            Err(LinalgError::GramMismatch(..))
        ));
    }

    #[test]
    fn isometry_embeds_smaller_input_space() {
        let inp = CVector::from_vec(vec![c(0.6, 0.0), c(0.8, 0.0)]);
        let out = CVector::from_vec(vec![c(0.0, 0.0), c(0.0, 1.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let u = complete_isometry(&[inp.clone()], &[out.clone()], 1e-9).unwrap();
        let mut embedded = CVector::zeros(4);
        embedded.rows_mut(0, 2).copy_from(&inp);
        assert!((&u * embedded - &out).norm() < 1e-10);
        assert!(unitarity_defect(&u) < 1e-10);
    }
}
