//! Brute-force checks that share no code with the spectral-flow path.
//!
//! The finite-difference counts discretise the quadratic form of
//! `-y'' + V y` with piecewise-linear elements and a lumped mass matrix, which
//! gives the usual three-point stencil in the interior and second-order
//! mirror conditions at Neumann and Robin ends. Eigenvalue counts below a
//! shift come from the inertia of a block `LDL^t` factorisation (Sylvester's
//! law), so no dense eigensolve of the full matrix is needed.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{bk_decompose, IntervalProblem};
use crate::lagrangian::{check_same_n, LagrangianFrame};
use crate::line::LineProblem;
use crate::linalg;

/// Lowest eigenvalues of a discretised operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FDSpectrum {
    pub eigenvalues: Vec<f64>,
    /// Number of grid intervals minus one (interior nodes).
    pub points: usize,
    pub h: f64,
}

/// Symmetric block-tridiagonal pencil `A - mu M` with diagonal lumped mass.
struct Pencil {
    diag: Vec<DMatrix<f64>>,
    /// `lower[j]` couples block `j + 1` to block `j`.
    lower: Vec<DMatrix<f64>>,
    mass: Vec<f64>,
    /// Gershgorin-type lower bound on the spectrum.
    floor: f64,
}

impl Pencil {
    /// Number of eigenvalues of `M^{-1} A` strictly below `mu`.
    fn count_below(&self, mu: f64) -> usize {
        let mut count = 0;
        let mut prev_inv: Option<DMatrix<f64>> = None;
        for (j, a) in self.diag.iter().enumerate() {
            let s = a.nrows();
            if s == 0 {
                prev_inv = Some(DMatrix::zeros(0, 0));
                continue;
            }
            let mut d = a - DMatrix::<f64>::identity(s, s) * (mu * self.mass[j]);
            if j > 0 {
                if let Some(inv) = &prev_inv {
                    let c = &self.lower[j - 1];
                    if inv.nrows() > 0 {
                        d -= c * inv * c.transpose();
                    }
                }
            }
            let (ev, vecs) = linalg::sym_eigen_sorted(&d);
            count += ev.iter().filter(|&&v| v < 0.0).count();
            let scale = ev.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let inv_ev = nalgebra::DVector::from_iterator(
                s,
                ev.iter().map(|&v| {
                    let v = if v.abs() < 1e-300 * scale { 1e-300 * scale } else { v };
                    1.0 / v
                }),
            );
            prev_inv = Some(&vecs * DMatrix::from_diagonal(&inv_ev) * vecs.transpose());
        }
        count
    }

    /// The `k` lowest eigenvalues by bisection on the inertia count.
    fn lowest(&self, k: usize, tol: f64) -> Vec<f64> {
        let total: usize = self.diag.iter().map(|d| d.nrows()).sum();
        let k = k.min(total);
        let mut upper = self.floor.abs().max(1.0);
        while self.count_below(upper) < k {
            upper *= 2.0;
        }
        (0..k)
            .map(|i| {
                let (mut lo, mut hi) = (self.floor, upper);
                for _ in 0..200 {
                    if hi - lo <= tol * (1.0 + hi.abs().max(lo.abs())) {
                        break;
                    }
                    let mid = 0.5 * (lo + hi);
                    if self.count_below(mid) > i {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                0.5 * (lo + hi)
            })
            .collect()
    }
}

/// Assembles the stiffness and potential blocks on a uniform grid of
/// `points + 2` nodes. Boundary nodes are restricted to the columns of
/// `e0` / `e1` (an empty matrix removes the node) and receive the extra
/// quadratic terms `r0` / `r1`.
#[allow(clippy::too_many_arguments)]
fn assemble<F: Fn(f64) -> DMatrix<f64>>(
    v: F,
    n: usize,
    a: f64,
    b: f64,
    points: usize,
    e0: &DMatrix<f64>,
    e1: &DMatrix<f64>,
    r0: &DMatrix<f64>,
    r1: &DMatrix<f64>,
) -> Pencil {
    let h = (b - a) / (points + 1) as f64;
    let id = DMatrix::<f64>::identity(n, n);
    let mut diag = Vec::with_capacity(points + 2);
    let mut mass = Vec::with_capacity(points + 2);
    let mut vmax: f64 = 0.0;
    let end_block = |x: f64, e: &DMatrix<f64>, r: &DMatrix<f64>| {
        let vx = v(x);
        let full = &id * (1.0 / h) + &vx * (0.5 * h) + r;
        (e.transpose() * full * e, linalg::op_norm(&vx))
    };
    let (d0, v0) = end_block(a, e0, r0);
    diag.push(d0);
    mass.push(0.5 * h);
    vmax = vmax.max(v0);
    for j in 1..=points {
        let vx = v(a + h * j as f64);
        vmax = vmax.max(linalg::op_norm(&vx));
        diag.push(&id * (2.0 / h) + vx * h);
        mass.push(h);
    }
    let (d1, v1) = end_block(b, e1, r1);
    diag.push(d1);
    mass.push(0.5 * h);
    vmax = vmax.max(v1);

    let coupling = -&id * (1.0 / h);
    let mut lower = Vec::with_capacity(points + 1);
    lower.push(&coupling * e0);
    for _ in 1..points {
        lower.push(coupling.clone());
    }
    lower.push(e1.transpose() * &coupling);
    let floor = -(vmax + 2.0 * (linalg::op_norm(r0) + linalg::op_norm(r1)) / h + 1.0);
    Pencil { diag, lower, mass, floor }
}

fn interval_pencil(p: &IntervalProblem, points: usize) -> Result<Pencil> {
    let n = p.n();
    let bk0 = bk_decompose(p.alpha(), 1e-10)?;
    let bk1 = bk_decompose(p.beta(), 1e-10)?;
    let e0 = linalg::null_space(&bk0.p_d, 1e-10);
    let e1 = linalg::null_space(&bk1.p_d, 1e-10);
    let e0 = if bk0.p_d.norm() < 1e-12 { DMatrix::identity(n, n) } else { e0 };
    let e1 = if bk1.p_d.norm() < 1e-12 { DMatrix::identity(n, n) } else { e1 };
    let r0 = bk0.robin_operator();
    let r1 = -bk1.robin_operator();
    let v = |x: f64| p.potential().eval(x, n);
    Ok(assemble(v, n, 0.0, 1.0, points, &e0, &e1, &r0, &r1))
}

fn default_tol(sup: f64) -> f64 {
    1e-8 * (1.0 + sup)
}

fn stable_count(count: impl Fn(usize) -> Result<usize>, points: usize) -> Result<usize> {
    let (c1, c2) = (count(points)?, count(2 * points)?);
    if c1 != c2 {
        return Err(Error::DiscretizationUnstable {
            n: points,
            count_n: c1,
            count_2n: c2,
        });
    }
    Ok(c1)
}

/// Number of eigenvalues below `-tol_eig` of the interval problem, checked
/// for agreement between `points` and `2 points` grid nodes.
pub fn fd_morse_interval(p: &IntervalProblem, points: usize, tol_eig: Option<f64>) -> Result<usize> {
    if points < 200 {
        return Err(Error::InvalidInput("the interval oracle needs at least 200 points".into()));
    }
    let tol = tol_eig.unwrap_or_else(|| default_tol(p.sup_norm()));
    stable_count(|m| Ok(interval_pencil(p, m)?.count_below(-tol)), points)
}

pub fn fd_spectrum_interval(p: &IntervalProblem, points: usize, k: usize) -> Result<FDSpectrum> {
    let pencil = interval_pencil(p, points)?;
    Ok(FDSpectrum {
        eigenvalues: pencil.lowest(k, 1e-12),
        points,
        h: 1.0 / (points + 1) as f64,
    })
}

fn line_pencil(p: &LineProblem, half_width: f64, points: usize) -> Pencil {
    let n = p.n();
    let none = DMatrix::zeros(n, 0);
    let zero = DMatrix::zeros(n, n);
    let v = |x: f64| p.potential().eval(x, n);
    assemble(v, n, -half_width, half_width, points, &none, &none, &zero, &zero)
}

/// Negative-eigenvalue count of the Dirichlet truncation to `[-L, L]`,
/// checked against `[-2L, 2L]` with twice the points.
pub fn fd_morse_line(p: &LineProblem, half_width: f64, points: usize, tol_eig: Option<f64>) -> Result<usize> {
    if points < 1000 {
        return Err(Error::InvalidInput("the line oracle needs at least 1000 points".into()));
    }
    if !(half_width > 0.0) {
        return Err(Error::InvalidInput("truncation half-width must be positive".into()));
    }
    let sup = p.potential().sup_norm(p.n(), -half_width, half_width, 2001);
    let tol = tol_eig.unwrap_or_else(|| default_tol(sup));
    let c1 = line_pencil(p, half_width, points).count_below(-tol);
    let c2 = line_pencil(p, 2.0 * half_width, 2 * points).count_below(-tol);
    if c1 != c2 {
        return Err(Error::DiscretizationUnstable {
            n: points,
            count_n: c1,
            count_2n: c2,
        });
    }
    Ok(c1)
}

pub fn fd_spectrum_line(p: &LineProblem, half_width: f64, points: usize, k: usize) -> FDSpectrum {
    let pencil = line_pencil(p, half_width, points);
    FDSpectrum {
        eigenvalues: pencil.lowest(k, 1e-12),
        points,
        h: 2.0 * half_width / (points + 1) as f64,
    }
}

/// `dim(l1 ∩ l2)` as the nullity of `[X1 | -X2]` for normalised frames.
pub fn brute_intersection_dim(l1: &LagrangianFrame, l2: &LagrangianFrame, tol_rank: f64) -> Result<usize> {
    check_same_n(l1, l2)?;
    let n = l1.n();
    let f1 = l1.normalize()?.stacked();
    let f2 = l2.normalize()?.stacked();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (2 * n, n)).copy_from(&f1);
    m.view_mut((0, n), (2 * n, n)).copy_from(&(-f2));
    let sv = linalg::singular_values(&m);
    let cutoff = tol_rank * sv[0];
    Ok(sv.iter().filter(|&&s| s <= cutoff).count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval::BoundaryCondition;
    use crate::lagrangian::random_pair_with_intersection;
    use crate::potential::Potential;
    use std::f64::consts::PI;

    fn scalar(v: f64, a: BoundaryCondition, b: BoundaryCondition) -> IntervalProblem {
        IntervalProblem::new(Potential::scalar(v), a, b).unwrap()
    }

    #[test]
    fn dirichlet_counts() {
        let d = || BoundaryCondition::dirichlet(1);
        assert_eq!(fd_morse_interval(&scalar(0.0, d(), d()), 400, None).unwrap(), 0);
        assert_eq!(fd_morse_interval(&scalar(-20.0, d(), d()), 400, None).unwrap(), 1);
        assert_eq!(fd_morse_interval(&scalar(-50.0, d(), d()), 400, None).unwrap(), 2);
    }

    #[test]
    fn dirichlet_spectrum_is_second_order() {
        let d = || BoundaryCondition::dirichlet(1);
        let s = fd_spectrum_interval(&scalar(0.0, d(), d()), 400, 3).unwrap();
        for (k, ev) in s.eigenvalues.iter().enumerate() {
            let exact = (PI * (k + 1) as f64).powi(2);
            assert!((ev - exact).abs() < 1e-3 * exact, "{ev} vs {exact}");
        }
    }

    #[test]
    fn neumann_and_robin_spectra() {
        let nn = scalar(-20.0, BoundaryCondition::neumann(1), BoundaryCondition::neumann(1));
        let s = fd_spectrum_interval(&nn, 800, 2).unwrap();
        assert!((s.eigenvalues[0] + 20.0).abs() < 1e-6);
        assert!((s.eigenvalues[1] - (PI * PI - 20.0)).abs() < 1e-3);
        assert_eq!(fd_morse_interval(&nn, 400, None).unwrap(), 2);
        // y'(0) = 2 y(0), y'(1) = 5 y(1): the lowest eigenvalue solves a
        // transcendental equation, found by bisection below
        let rr = scalar(0.0, BoundaryCondition::robin(2.0).unwrap(), BoundaryCondition::robin(5.0).unwrap());
        let s = fd_spectrum_interval(&rr, 1600, 1).unwrap();
        // eigenfunction cosh/sinh mix: y = k cosh(kx) + 2 sinh(kx), lambda = -k^2
        let f = |k: f64| {
            let (c, sh) = ((k).cosh(), (k).sinh());
            let y = k * c + 2.0 * sh;
            let dy = k * k * sh + 2.0 * k * c;
            dy - 5.0 * y
        };
        let (mut lo, mut hi) = (3.0, 6.0);
        assert!(f(lo) * f(hi) < 0.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if f(lo) * f(mid) <= 0.0 {
                hi = mid
            } else {
                lo = mid
            }
        }
        let exact = -(lo * lo);
        assert!((s.eigenvalues[0] - exact).abs() < 1e-3 * exact.abs(), "{} vs {exact}", s.eigenvalues[0]);
    }

    #[test]
    fn too_few_points() {
        let d = || BoundaryCondition::dirichlet(1);
        assert!(fd_morse_interval(&scalar(0.0, d(), d()), 50, None).is_err());
    }

    #[test]
    fn brute_dimension() {
        for k in 0..=3 {
            let (a, b) = random_pair_with_intersection(3, k, 17 + k as u64);
            assert_eq!(brute_intersection_dim(&a, &b, 1e-10).unwrap(), k);
        }
    }
}
