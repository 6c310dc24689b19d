//! Unitary and orthogonal matrices attached to a pair of Lagrangian subspaces.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lagrangian::{check_same_n, LagrangianFrame};
use crate::linalg::{self, CMatrix, Complex64};
use crate::spectral_flow::{circular_distance, wrap_phase};
use crate::Tolerances;

/// The `n x n` unitary `W = -(X1 + iY1)(X1 - iY1)^{-1}(X2 - iY2)(X2 + iY2)^{-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct WTilde {
    matrix: CMatrix,
}

/// Souriau map `W = -(2P1 - I)(2P2 - I)`, a `2n x 2n` orthogonal matrix
/// commuting with `J`.
#[derive(Debug, Clone, PartialEq)]
pub struct SouriauW {
    matrix: DMatrix<f64>,
}

/// Souriau map of `l1 (+) l2` against the diagonal of `R^{4n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FurutaniW {
    matrix: DMatrix<f64>,
}

impl WTilde {
    /// Wraps a matrix after checking `|W* W - I| <= tol_unitary`.
    pub fn from_matrix(matrix: CMatrix, tol_unitary: f64) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n || n == 0 {
            return Err(Error::InvalidInput("W must be a non-empty square matrix".into()));
        }
        let defect = linalg::cop_norm(&(matrix.adjoint() * &matrix - CMatrix::identity(n, n)));
        if !(defect <= tol_unitary) {
            return Err(Error::NumericalFailure(format!(
                "matrix is not unitary (defect {defect:.3e})"
            )));
        }
        Ok(Self { matrix })
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn unitarity_defect(&self) -> f64 {
        let n = self.n();
        linalg::cop_norm(&(self.matrix.adjoint() * &self.matrix - CMatrix::identity(n, n)))
    }

    /// Eigenvalues on the unit circle with an orthonormal eigenbasis.
    pub fn eigen(&self) -> Result<(Vec<Complex64>, CMatrix)> {
        linalg::unitary_eigen(&self.matrix)
    }

    pub fn determinant(&self) -> Complex64 {
        self.matrix.clone().determinant()
    }
}

impl SouriauW {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `W11 + i W21` read off the `[[W11, -W21], [W21, W11]]` block form.
    pub fn complex_blocks(&self) -> CMatrix {
        let n = self.matrix.nrows() / 2;
        let w11 = self.matrix.view((0, 0), (n, n)).into_owned();
        let w21 = self.matrix.view((n, 0), (n, n)).into_owned();
        linalg::complex_from_parts(&w11, &w21)
    }

    pub fn eigenvalues(&self) -> Result<Vec<Complex64>> {
        linalg::real_matrix_eigenvalues(&self.matrix)
    }
}

impl FurutaniW {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn eigenvalues(&self) -> Result<Vec<Complex64>> {
        linalg::real_matrix_eigenvalues(&self.matrix)
    }
}

/// `(X + iY)(X - iY)^{-1}` for a single frame.
pub fn single_factor(l: &LagrangianFrame) -> Result<CMatrix> {
    let nf = l.normalize()?;
    Ok(nf.complex_plus() * linalg::cinverse(&nf.complex_minus())?)
}

/// The two factors `W1 = (X1 + iY1)(X1 - iY1)^{-1}` and
/// `W2 = (X2 - iY2)(X2 + iY2)^{-1}`, so that `W = -W1 W2`.
pub fn w_tilde_factors(l1: &LagrangianFrame, l2: &LagrangianFrame) -> Result<(CMatrix, CMatrix)> {
    check_same_n(l1, l2)?;
    let w1 = single_factor(l1)?;
    let n2 = l2.normalize()?;
    let w2 = n2.complex_minus() * linalg::cinverse(&n2.complex_plus())?;
    Ok((w1, w2))
}

pub fn w_tilde(l1: &LagrangianFrame, l2: &LagrangianFrame) -> Result<WTilde> {
    w_tilde_with(l1, l2, &Tolerances::default())
}

pub fn w_tilde_with(l1: &LagrangianFrame, l2: &LagrangianFrame, tol: &Tolerances) -> Result<WTilde> {
    let (w1, w2) = w_tilde_factors(l1, l2)?;
    let w = -(w1 * w2);
    WTilde::from_matrix(w, tol.unitary.max(1e-8))
}

pub fn souriau_w(l1: &LagrangianFrame, l2: &LagrangianFrame) -> Result<SouriauW> {
    check_same_n(l1, l2)?;
    let n2 = 2 * l1.n();
    let id = DMatrix::<f64>::identity(n2, n2);
    let r1 = l1.projection()? * 2.0 - &id;
    let r2 = l2.projection()? * 2.0 - &id;
    Ok(SouriauW { matrix: -(r1 * r2) })
}

pub fn furutani_w(l1: &LagrangianFrame, l2: &LagrangianFrame) -> Result<FurutaniW> {
    check_same_n(l1, l2)?;
    let n2 = 2 * l1.n();
    let id = DMatrix::<f64>::identity(n2, n2);
    let mut w = DMatrix::zeros(2 * n2, 2 * n2);
    w.view_mut((0, n2), (n2, n2))
        .copy_from(&(&id - l1.projection()? * 2.0));
    w.view_mut((n2, 0), (n2, n2))
        .copy_from(&(&id - l2.projection()? * 2.0));
    Ok(FurutaniW { matrix: w })
}

/// Number of eigenvalues of `W` within `tol_phase` of `pi`; equals
/// `dim(l1 ∩ l2)`.
pub fn intersection_dim(l1: &LagrangianFrame, l2: &LagrangianFrame, tol_phase: f64) -> Result<usize> {
    let w = w_tilde(l1, l2)?;
    let (values, _) = w.eigen()?;
    Ok(values
        .iter()
        .filter(|z| circular_distance(wrap_phase(z.arg()), std::f64::consts::PI) <= tol_phase)
        .count())
}

/// `Det^2(l1, l2) = det W`.
pub fn det_squared(l1: &LagrangianFrame, l2: &LagrangianFrame) -> Result<Complex64> {
    let d = w_tilde(l1, l2)?.determinant();
    Ok(d / d.norm())
}

/// Orthonormal basis (columns) of the `-1` eigenspace of `W`.
pub fn minus_one_eigenspace(w: &WTilde, tol_phase: f64) -> Result<CMatrix> {
    let (values, vectors) = w.eigen()?;
    let cols: Vec<_> = values
        .iter()
        .enumerate()
        .filter(|(_, z)| circular_distance(wrap_phase(z.arg()), std::f64::consts::PI) <= tol_phase)
        .map(|(k, _)| vectors.column(k).into_owned())
        .collect();
    if cols.is_empty() {
        Ok(CMatrix::zeros(w.n(), 0))
    } else {
        Ok(CMatrix::from_columns(&cols))
    }
}

/// Dirichlet frame `(0; I)`.
pub fn dirichlet_frame(n: usize) -> LagrangianFrame {
    LagrangianFrame::new(DMatrix::zeros(n, n), DMatrix::identity(n, n))
        .expect("(0; I) is Lagrangian")
}

/// Projection onto `ker(W + I)` of the Souriau map, as a real basis.
pub fn souriau_minus_one_kernel(w: &SouriauW, rel_tol: f64) -> DMatrix<f64> {
    let n2 = w.matrix.nrows();
    linalg::null_space(&(&w.matrix + DMatrix::<f64>::identity(n2, n2)), rel_tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagrangian;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn line(c: f64, s: f64) -> LagrangianFrame {
        LagrangianFrame::new(DMatrix::from_element(1, 1, c), DMatrix::from_element(1, 1, s)).unwrap()
    }

    #[test]
    fn normalization_example_gives_i() {
        let w = w_tilde(&line(1.0, 0.0), &line(FRAC_PI_4.cos(), FRAC_PI_4.sin())).unwrap();
        let z = w.matrix()[(0, 0)];
        assert!((z - Complex64::new(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn equal_subspaces_give_minus_identity() {
        let l = lagrangian::random_lagrangian(3, 11);
        let w = w_tilde(&l, &l).unwrap();
        assert!((w.matrix() + CMatrix::identity(3, 3)).norm() < 1e-12);
        assert_eq!(intersection_dim(&l, &l, 1e-6).unwrap(), 3);
        let d = det_squared(&l, &l).unwrap();
        assert!((d - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
        let s = souriau_w(&l, &l).unwrap();
        assert!((s.matrix() + DMatrix::<f64>::identity(6, 6)).norm() < 1e-12);
    }

    #[test]
    fn transverse_lines_do_not_intersect() {
        assert_eq!(intersection_dim(&line(1.0, 0.0), &line(0.0, 1.0), 1e-6).unwrap(), 0);
    }

    #[test]
    fn det_squared_on_rotating_line() {
        for &t in &[-1.0, -0.3, 0.2, 0.9] {
            let d = det_squared(&line(1.0, 0.0), &line(f64::cos(t), f64::sin(t))).unwrap();
            let expected = -Complex64::from_polar(1.0, -2.0 * t);
            assert!((d - expected).norm() < 1e-13, "t = {t}");
        }
    }

    #[test]
    fn souriau_blocks_reproduce_w_tilde() {
        let (a, b) = lagrangian::random_pair_with_intersection(3, 1, 5);
        let s = souriau_w(&a, &b).unwrap();
        let w = w_tilde(&a, &b).unwrap();
        assert!((s.complex_blocks() - w.matrix()).norm() < 1e-10);
    }

    #[test]
    fn souriau_spectrum_for_normalization_example() {
        // W is real, so the W-tilde eigenvalue i comes with its conjugate -i.
        let s = souriau_w(&line(1.0, 0.0), &line(FRAC_PI_4.cos(), FRAC_PI_4.sin())).unwrap();
        let mut args: Vec<f64> = s.eigenvalues().unwrap().iter().map(|z| wrap_phase(z.arg())).collect();
        args.sort_by(f64::total_cmp);
        assert!((args[0] - PI / 2.0).abs() < 1e-12);
        assert!((args[1] - 3.0 * PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn furutani_for_equal_subspaces() {
        let l = lagrangian::random_lagrangian(2, 4);
        let f = furutani_w(&l, &l).unwrap();
        let vals = f.eigenvalues().unwrap();
        let plus = vals.iter().filter(|z| (*z - Complex64::new(1.0, 0.0)).norm() < 1e-8).count();
        let minus = vals.iter().filter(|z| (*z + Complex64::new(1.0, 0.0)).norm() < 1e-8).count();
        assert_eq!((plus, minus), (4, 4));
    }

    #[test]
    fn mismatched_dimensions() {
        let a = lagrangian::random_lagrangian(2, 1);
        let b = lagrangian::random_lagrangian(3, 2);
        assert!(matches!(w_tilde(&a, &b), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(souriau_w(&a, &b), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(furutani_w(&a, &b), Err(Error::DimensionMismatch { .. })));
    }
}
