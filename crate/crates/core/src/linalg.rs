//! Dense linear-algebra helpers shared by the frame, unitary and oracle code.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type Complex64 = Complex<f64>;
pub type CMatrix = DMatrix<Complex64>;

/// `re + i im` as a complex matrix.
pub fn complex_from_parts(re: &DMatrix<f64>, im: &DMatrix<f64>) -> CMatrix {
    assert_eq!(re.shape(), im.shape());
    DMatrix::from_fn(re.nrows(), re.ncols(), |i, j| Complex::new(re[(i, j)], im[(i, j)]))
}

pub fn to_complex(a: &DMatrix<f64>) -> CMatrix {
    a.map(|v| Complex::new(v, 0.0))
}

pub fn real_part(a: &CMatrix) -> DMatrix<f64> {
    a.map(|z| z.re)
}

pub fn imag_part(a: &CMatrix) -> DMatrix<f64> {
    a.map(|z| z.im)
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * Complex::new(0.5, 0.0)
}

/// Operator 2-norm (largest singular value).
pub fn op_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone()
        .singular_values()
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

pub fn cop_norm(a: &CMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone()
        .singular_values()
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Singular values of `a`, sorted descending.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = a.clone().singular_values().iter().cloned().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Symmetric eigendecomposition with eigenvalues sorted ascending and
/// eigenvectors permuted to match.
pub fn sym_eigen_sorted(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(symmetrize(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// `A^{-1/2}` for symmetric positive definite `A`, via the symmetric
/// eigendecomposition. Fails if `A` is not positive definite or its condition
/// number exceeds `cond_cap`.
pub fn spd_inv_sqrt(a: &DMatrix<f64>, cond_cap: f64) -> Result<DMatrix<f64>> {
    let (values, vectors) = sym_eigen_sorted(a);
    let lo = values.first().copied().unwrap_or(0.0);
    let hi = values.last().copied().unwrap_or(0.0);
    if !(lo > 0.0) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::NumericalFailure(format!(
            "Gram matrix is not positive definite (eigenvalues in [{lo:.3e}, {hi:.3e}])"
        )));
    }
    if hi / lo > cond_cap {
        return Err(Error::NumericalFailure(format!(
            "Gram matrix condition number {:.3e} exceeds cap {cond_cap:.1e}",
            hi / lo
        )));
    }
    let d = DVector::from_iterator(values.len(), values.iter().map(|v| 1.0 / v.sqrt()));
    Ok(&vectors * DMatrix::from_diagonal(&d) * vectors.transpose())
}

/// `H^{-1/2}` for Hermitian positive definite `H`.
pub fn hpd_inv_sqrt(h: &CMatrix, cond_cap: f64) -> Result<CMatrix> {
    let n = h.nrows();
    let eig = SymmetricEigen::new(hermitian_part(h));
    let lo = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(lo > 0.0) || !hi.is_finite() || hi / lo > cond_cap {
        return Err(Error::NumericalFailure(format!(
            "Hermitian matrix is not safely positive definite (eigenvalues in [{lo:.3e}, {hi:.3e}])"
        )));
    }
    let d = DVector::from_iterator(n, eig.eigenvalues.iter().map(|v| Complex::new(1.0 / v.sqrt(), 0.0)));
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.adjoint())
}

/// Orthonormal basis for the null space of `a`; singular values at or below
/// `rel_tol * sigma_max` count as zero.
pub fn null_space(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let (m, n) = a.shape();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    // pad so that the SVD returns a complete right factor
    let padded = if m < n {
        let mut p = DMatrix::zeros(n, n);
        p.view_mut((0, 0), (m, n)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = rel_tol * smax.max(f64::MIN_POSITIVE);
    let cols: Vec<DVector<f64>> = (0..n)
        .filter(|&k| svd.singular_values[k] <= cutoff)
        .map(|k| v_t.row(k).transpose())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Orthonormal basis for the column space of `a`.
pub fn range_basis(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let (m, n) = a.shape();
    if n == 0 || m == 0 {
        return DMatrix::zeros(m, 0);
    }
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cols: Vec<DVector<f64>> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > rel_tol * smax && smax > 0.0)
        .map(|k| u.column(k).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(m, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Moore-Penrose pseudo-inverse.
pub fn pseudo_inverse(a: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>> {
    let smax = singular_values(a).first().copied().unwrap_or(0.0);
    a.clone()
        .pseudo_inverse(rel_tol * smax.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::NumericalFailure(e.to_string()))
}

pub fn cinverse(a: &CMatrix) -> Result<CMatrix> {
    let inv = a
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::NumericalFailure("complex matrix is singular".into()))?;
    if inv.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NumericalFailure("complex inverse is not finite".into()));
    }
    Ok(inv)
}

const SCHUR_EPS: f64 = 64.0 * f64::EPSILON;

/// Complex Schur factors `(Q, T)` of `u`. The shifted QR iteration can stall
/// on highly structured input (real orthogonal matrices with clustered
/// spectra); a random unitary similarity breaks the structure and leaves the
/// spectrum unchanged.
fn schur_with_retries(u: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    if let Some(s) = nalgebra::linalg::Schur::try_new(u.clone(), SCHUR_EPS, 10_000) {
        return Ok(s.unpack());
    }
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0x5eed);
    for _ in 0..8 {
        let r = crate::lagrangian::random_unitary(u.nrows(), &mut rng);
        let v = &r * u * r.adjoint();
        if let Some(s) = nalgebra::linalg::Schur::try_new(v, SCHUR_EPS, 10_000) {
            let (q, t) = s.unpack();
            return Ok((r.adjoint() * q, t));
        }
    }
    Err(Error::EigensolverFailure("complex Schur iteration did not converge".into()))
}

/// Eigenvalues and an orthonormal eigenbasis of a unitary matrix.
///
/// Uses the complex Schur form; for a normal matrix the triangular factor is
/// diagonal up to roundoff, so the Schur vectors are eigenvectors. Eigenvalues
/// are projected radially onto the unit circle.
pub fn unitary_eigen(u: &CMatrix) -> Result<(Vec<Complex64>, CMatrix)> {
    let n = u.nrows();
    if n == 0 {
        return Ok((Vec::new(), CMatrix::zeros(0, 0)));
    }
    if u.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::EigensolverFailure("matrix has non-finite entries".into()));
    }
    let (q, t) = schur_with_retries(u)?;
    let values = (0..n)
        .map(|i| {
            let z = t[(i, i)];
            let r = z.norm();
            if r > 0.0 {
                z / r
            } else {
                z
            }
        })
        .collect();
    Ok((values, q))
}

/// Eigenvalues of a general real matrix (e.g. an orthogonal one), via the
/// complex Schur form.
pub fn real_matrix_eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    unitary_eigen(&to_complex(a)).map(|(v, _)| v)
}

/// `exp(i H)` for Hermitian `H`.
pub fn expm_i_hermitian(h: &CMatrix) -> CMatrix {
    let n = h.nrows();
    let eig = SymmetricEigen::new(hermitian_part(h));
    let d = DVector::from_iterator(
        n,
        eig.eigenvalues.iter().map(|&l| Complex::new(l.cos(), l.sin())),
    );
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.adjoint()
}

/// Number of eigenvalues of the symmetric matrix `a` that are below `-tol`,
/// within `[-tol, tol]`, and above `tol`.
pub fn inertia(a: &DMatrix<f64>, tol: f64) -> (usize, usize, usize) {
    let (values, _) = sym_eigen_sorted(a);
    let neg = values.iter().filter(|&&v| v < -tol).count();
    let pos = values.iter().filter(|&&v| v > tol).count();
    (neg, values.len() - neg - pos, pos)
}
