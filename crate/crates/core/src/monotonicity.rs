//! Derivative structure `dW/dt = i W Omega` and crossing forms.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lagrangian::{check_same_n, LagrangianFrame};
use crate::linalg::{self, CMatrix, Complex64};
use crate::unitary;
use crate::Tolerances;

/// Derivatives `(X', Y')` of a frame path, for the same frame (not its
/// normalisation).
#[derive(Debug, Clone, PartialEq)]
pub struct FrameDerivative {
    pub dx: DMatrix<f64>,
    pub dy: DMatrix<f64>,
}

impl FrameDerivative {
    pub fn zero(n: usize) -> Self {
        Self {
            dx: DMatrix::zeros(n, n),
            dy: DMatrix::zeros(n, n),
        }
    }
}

/// Central difference of a frame path at `t`.
pub fn central_difference<F>(f: F, t: f64, h: f64) -> Result<FrameDerivative>
where
    F: Fn(f64) -> Result<LagrangianFrame>,
{
    let p = f(t + h)?;
    let m = f(t - h)?;
    Ok(FrameDerivative {
        dx: (p.x() - m.x()) / (2.0 * h),
        dy: (p.y() - m.y()) / (2.0 * h),
    })
}

/// Default finite-difference step: cube root of machine epsilon, scaled.
pub fn default_step(scale: f64) -> f64 {
    f64::EPSILON.cbrt() * scale.abs().max(1.0)
}

/// `X^t Y' - Y^t X'`; symmetric along a path of Lagrangian frames.
fn symplectic_velocity(l: &LagrangianFrame, d: &FrameDerivative) -> DMatrix<f64> {
    l.x().transpose() * &d.dy - l.y().transpose() * &d.dx
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmegaTilde {
    /// `W2* Omega1 W2 + Omega2`.
    pub matrix: CMatrix,
    pub omega1: CMatrix,
    pub omega2: CMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rotation {
    Counterclockwise,
    Clockwise,
    Indefinite,
}

pub fn omega_tilde(
    l1: &LagrangianFrame,
    l2: &LagrangianFrame,
    d1: &FrameDerivative,
    d2: &FrameDerivative,
) -> Result<OmegaTilde> {
    check_same_n(l1, l2)?;
    let two = Complex64::new(2.0, 0.0);
    let b1 = linalg::cinverse(&l1.complex_minus())?;
    let a1 = linalg::to_complex(&symplectic_velocity(l1, d1));
    let omega1 = b1.adjoint() * a1 * &b1 * two;

    let b2 = linalg::cinverse(&l2.complex_plus())?;
    let a2 = linalg::to_complex(&symplectic_velocity(l2, d2));
    let omega2 = -(b2.adjoint() * a2 * &b2 * two);

    let w2 = l2.complex_minus() * &b2;
    let matrix = linalg::hermitian_part(&(w2.adjoint() * &omega1 * &w2 + &omega2));
    Ok(OmegaTilde { matrix, omega1, omega2 })
}

impl OmegaTilde {
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = nalgebra::SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .cloned()
            .collect();
        v.sort_by(f64::total_cmp);
        v
    }
}

/// Counterclockwise if `Omega` is positive definite, clockwise if negative
/// definite, indefinite otherwise (extreme eigenvalues within `tol_def` of 0
/// count as neither).
pub fn rotation_direction(o: &OmegaTilde, tol_def: f64) -> Rotation {
    let ev = o.eigenvalues();
    match (ev.first(), ev.last()) {
        (Some(&lo), _) if lo > tol_def => Rotation::Counterclockwise,
        (_, Some(&hi)) if hi < -tol_def => Rotation::Clockwise,
        _ => Rotation::Indefinite,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub positive: usize,
    pub zero: usize,
    pub negative: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossingForm {
    /// Orthonormal basis of `l1 ∩ l2` in `R^{2n}`, as columns.
    pub basis: DMatrix<f64>,
    pub form: DMatrix<f64>,
    pub signature: Signature,
}

impl CrossingForm {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Local contribution `n_+ - n_-` at a regular crossing.
    pub fn local_index(&self) -> i64 {
        self.signature.positive as i64 - self.signature.negative as i64
    }
}

/// Orthonormal basis (columns of a `2n x k` matrix) of `l1 ∩ l2`.
pub fn intersection_basis(l1: &LagrangianFrame, l2: &LagrangianFrame, rel_tol: f64) -> Result<DMatrix<f64>> {
    check_same_n(l1, l2)?;
    let n = l1.n();
    let f1 = l1.normalize()?.stacked();
    let f2 = l2.normalize()?.stacked();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (2 * n, n)).copy_from(&f1);
    m.view_mut((0, n), (2 * n, n)).copy_from(&(-f2));
    let kernel = linalg::null_space(&m, rel_tol);
    if kernel.ncols() == 0 {
        return Ok(DMatrix::zeros(2 * n, 0));
    }
    let v = f1 * kernel.rows(0, n);
    Ok(linalg::range_basis(&v, 1e-8))
}

fn signature(form: &DMatrix<f64>, tol: f64) -> Signature {
    let (negative, zero, positive) = linalg::inertia(form, tol);
    Signature { positive, zero, negative }
}

/// Quadratic form `(X^tY' - Y^tX') u, u)` of a moving frame, on the given
/// vectors `v = X u` of the subspace.
fn form_on(l: &LagrangianFrame, d: &FrameDerivative, basis: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let s = l.stacked();
    let u = linalg::pseudo_inverse(&s, 1e-12)? * basis;
    Ok(linalg::symmetrize(&(u.transpose() * symplectic_velocity(l, d) * u)))
}

/// Crossing form of the moving `l1` (with derivative `d1`) against the fixed
/// `target` at `t*`.
pub fn crossing_form(
    l1: &LagrangianFrame,
    d1: &FrameDerivative,
    target: &LagrangianFrame,
    tol: &Tolerances,
) -> Result<CrossingForm> {
    let basis = intersection_basis(l1, target, 1e-8)?;
    if basis.ncols() == 0 {
        return Err(Error::NoCrossing { t: f64::NAN });
    }
    let form = form_on(l1, d1, &basis)?;
    let signature = signature(&form, tol.definiteness);
    Ok(CrossingForm { basis, form, signature })
}

/// Crossing form of a pair path where both subspaces move:
/// `Gamma(l1, l2(t*)) - Gamma(l2, l1(t*))`.
pub fn pair_crossing_form(
    l1: &LagrangianFrame,
    l2: &LagrangianFrame,
    d1: &FrameDerivative,
    d2: &FrameDerivative,
    tol: &Tolerances,
) -> Result<CrossingForm> {
    let basis = intersection_basis(l1, l2, 1e-8)?;
    if basis.ncols() == 0 {
        return Err(Error::NoCrossing { t: f64::NAN });
    }
    let form = form_on(l1, d1, &basis)? - form_on(l2, d2, &basis)?;
    let signature = signature(&form, tol.definiteness);
    Ok(CrossingForm { basis, form, signature })
}

/// `Omega_P` at a crossing, with its restriction to `ker(W + I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossingOmega {
    pub matrix: CMatrix,
    /// Orthonormal basis of `ker(W + I)`, as columns.
    pub kernel: CMatrix,
    pub restricted: CMatrix,
    /// Eigenvalues of `restricted`, ascending.
    pub eigenvalues: Vec<f64>,
}

/// `G = (X^tX + Y^tY)^{-1} (X^t - i Y^t)`, which sends `v1 + i v2` to the
/// coordinates `u` of `v = (v1; v2) = (X; Y) u`.
fn coordinate_map(l: &LagrangianFrame) -> Result<CMatrix> {
    let ginv = l
        .gram()
        .try_inverse()
        .ok_or_else(|| Error::NumericalFailure("singular Gram matrix".into()))?;
    let xt = l.x().transpose();
    let yt = l.y().transpose();
    Ok(linalg::to_complex(&ginv) * linalg::complex_from_parts(&xt, &(-yt)))
}

/// Complexification `v1 + i v2` of real vectors `(v1; v2)` given as columns.
pub fn complexify(v: &DMatrix<f64>) -> CMatrix {
    let n = v.nrows() / 2;
    linalg::complex_from_parts(&v.rows(0, n).into_owned(), &v.rows(n, n).into_owned())
}

pub fn omega_at_crossing(
    l1: &LagrangianFrame,
    l2: &LagrangianFrame,
    d1: &FrameDerivative,
    d2: &FrameDerivative,
    tol: &Tolerances,
) -> Result<CrossingOmega> {
    check_same_n(l1, l2)?;
    let two = Complex64::new(2.0, 0.0);
    let g1 = coordinate_map(l1)?;
    let g2 = coordinate_map(l2)?;
    let a1 = linalg::to_complex(&symplectic_velocity(l1, d1));
    let a2 = linalg::to_complex(&symplectic_velocity(l2, d2));
    let matrix = linalg::hermitian_part(&((g1.adjoint() * a1 * &g1 - g2.adjoint() * a2 * &g2) * two));

    let w = unitary::w_tilde_with(l1, l2, tol)?;
    let kernel = unitary::minus_one_eigenspace(&w, tol.phase.max(1e-8))?;
    if kernel.ncols() == 0 {
        return Err(Error::NoCrossing { t: f64::NAN });
    }
    let restricted = linalg::hermitian_part(&(kernel.adjoint() * &matrix * &kernel));
    let mut eigenvalues: Vec<f64> = nalgebra::SymmetricEigen::new(restricted.clone())
        .eigenvalues
        .iter()
        .cloned()
        .collect();
    eigenvalues.sort_by(f64::total_cmp);
    Ok(CrossingOmega {
        matrix,
        kernel,
        restricted,
        eigenvalues,
    })
}
