//! Morse index of `H = -d^2/dx^2 + V(x)` on `[0, 1]` with separated
//! self-adjoint boundary conditions
//!
//! ```text
//! alpha1 y(0) + alpha2 y'(0) = 0,    beta1 y(1) + beta2 y'(1) = 0,
//! ```
//!
//! counted through the Maslov index around the box `[-lambda_inf, 0] x [s0, 1]`
//! in the `(lambda, s)` plane.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lagrangian::{self, matrix_from_rows, matrix_to_rows, LagrangianFrame};
use crate::linalg::{self, CMatrix};
use crate::monotonicity::{self, FrameDerivative, OmegaTilde};
use crate::ode::{self, FrameFlow, Grid, PotentialFn, Renormalization};
use crate::oracle;
use crate::potential::Potential;
use crate::spectral_flow::{self, Crossing, LagrangianPairPath, MaslovOptions, PhaseTrace};

const BC_TOL: f64 = 1e-9;

/// `a1 y + a2 y' = 0`, stored with `a1 a1^t + a2 a2^t = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCondition {
    a1: DMatrix<f64>,
    a2: DMatrix<f64>,
}

impl BoundaryCondition {
    pub fn new(a1: DMatrix<f64>, a2: DMatrix<f64>) -> Result<Self> {
        let n = a1.nrows();
        if n == 0 || a1.shape() != (n, n) || a2.shape() != (n, n) {
            return Err(Error::InvalidBoundaryCondition(
                "boundary matrices must be square and of equal size".into(),
            ));
        }
        if a1.iter().chain(a2.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidBoundaryCondition("non-finite entries".into()));
        }
        let mut stacked = DMatrix::zeros(n, 2 * n);
        stacked.view_mut((0, 0), (n, n)).copy_from(&a1);
        stacked.view_mut((0, n), (n, n)).copy_from(&a2);
        let sv = linalg::singular_values(&stacked);
        if sv[n - 1] <= 1e-10 * sv[0] {
            return Err(Error::InvalidBoundaryCondition(format!(
                "[a1 a2] has rank below {n} (smallest singular value {:.3e})",
                sv[n - 1]
            )));
        }
        let m = linalg::spd_inv_sqrt(&(&a1 * a1.transpose() + &a2 * a2.transpose()), 1e12)
            .map_err(|e| Error::InvalidBoundaryCondition(e.to_string()))?;
        let (a1, a2) = (&m * a1, &m * a2);
        let skew = linalg::op_norm(&(&a1 * a2.transpose() - &a2 * a1.transpose()));
        if skew > BC_TOL {
            return Err(Error::InvalidBoundaryCondition(format!(
                "a1 a2^t - a2 a1^t = {skew:.3e}, the condition is not self-adjoint"
            )));
        }
        Ok(Self { a1, a2 })
    }

    pub fn dirichlet(n: usize) -> Self {
        Self::new(DMatrix::identity(n, n), DMatrix::zeros(n, n)).expect("Dirichlet is valid")
    }

    pub fn neumann(n: usize) -> Self {
        Self::new(DMatrix::zeros(n, n), DMatrix::identity(n, n)).expect("Neumann is valid")
    }

    /// `y' = lambda y` in one dimension.
    pub fn robin(lambda: f64) -> Result<Self> {
        Self::new(DMatrix::from_element(1, 1, -lambda), DMatrix::from_element(1, 1, 1.0))
    }

    /// The condition `P_D y = 0`, `P_N y' = 0`, `P_R y' = Lambda P_R y`.
    pub fn from_bk(bk: &BKQuadruple) -> Result<Self> {
        let lam = &bk.p_r * &bk.lambda * &bk.p_r;
        Self::new(&bk.p_d - lam, &bk.p_n + &bk.p_r)
    }

    pub fn n(&self) -> usize {
        self.a1.nrows()
    }

    pub fn a1(&self) -> &DMatrix<f64> {
        &self.a1
    }

    pub fn a2(&self) -> &DMatrix<f64> {
        &self.a2
    }

    /// Frame `(a2^t; -a1^t)` of the boundary values `(y, y')` allowed by the
    /// condition.
    pub fn frame(&self) -> LagrangianFrame {
        LagrangianFrame::new(self.a2.transpose(), -self.a1.transpose()).expect("self-adjoint conditions give Lagrangian frames")
    }
}

/// Separated boundary value problem on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IntervalProblemJson", into = "IntervalProblemJson")]
pub struct IntervalProblem {
    n: usize,
    potential: Potential,
    alpha: BoundaryCondition,
    beta: BoundaryCondition,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntervalProblemJson {
    n: usize,
    potential: Potential,
    alpha1: Vec<Vec<f64>>,
    alpha2: Vec<Vec<f64>>,
    beta1: Vec<Vec<f64>>,
    beta2: Vec<Vec<f64>>,
}

impl TryFrom<IntervalProblemJson> for IntervalProblem {
    type Error = Error;

    fn try_from(j: IntervalProblemJson) -> Result<Self> {
        let m = |rows: &[Vec<f64>], what: &str| {
            matrix_from_rows(rows, j.n, what).map_err(|e| Error::InvalidBoundaryCondition(e.to_string()))
        };
        let alpha = BoundaryCondition::new(m(&j.alpha1, "alpha1")?, m(&j.alpha2, "alpha2")?)?;
        let beta = BoundaryCondition::new(m(&j.beta1, "beta1")?, m(&j.beta2, "beta2")?)?;
        IntervalProblem::new(j.potential, alpha, beta)
    }
}

impl From<IntervalProblem> for IntervalProblemJson {
    fn from(p: IntervalProblem) -> Self {
        IntervalProblemJson {
            n: p.n,
            potential: p.potential,
            alpha1: matrix_to_rows(&p.alpha.a1),
            alpha2: matrix_to_rows(&p.alpha.a2),
            beta1: matrix_to_rows(&p.beta.a1),
            beta2: matrix_to_rows(&p.beta.a2),
        }
    }
}

impl IntervalProblem {
    pub fn new(potential: Potential, alpha: BoundaryCondition, beta: BoundaryCondition) -> Result<Self> {
        let n = alpha.n();
        if beta.n() != n {
            return Err(Error::DimensionMismatch { expected: n, found: beta.n() });
        }
        potential.check_dim(n)?;
        potential.warn_if_asymmetric(n, 0.0, 1.0);
        Ok(Self { n, potential, alpha, beta })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn alpha(&self) -> &BoundaryCondition {
        &self.alpha
    }

    pub fn beta(&self) -> &BoundaryCondition {
        &self.beta
    }

    pub fn potential_fn(&self) -> PotentialFn {
        let p = self.potential.clone();
        let n = self.n;
        Arc::new(move |x| p.eval(x, n))
    }

    /// Sampled `sup |V(x)|_2` on `[0, 1]`.
    pub fn sup_norm(&self) -> f64 {
        self.potential.sup_norm(self.n, 0.0, 1.0, 1001)
    }
}

/// Start frame `(alpha2^t; -alpha1^t)` and target frame `(beta2^t; -beta1^t)`.
pub fn bc_frames(p: &IntervalProblem) -> (LagrangianFrame, LagrangianFrame) {
    (p.alpha.frame(), p.beta.frame())
}

/// `|(b2^t + i b1^t)(b2^t - i b1^t)^{-1} - (b2^t b2 - b1^t b1 + 2i b2^t b1)|`,
/// which vanishes for normalised self-adjoint conditions.
pub fn target_factor_residual(bc: &BoundaryCondition) -> Result<f64> {
    let (b1t, b2t) = (bc.a1.transpose(), bc.a2.transpose());
    let plus = linalg::complex_from_parts(&b2t, &b1t);
    let minus = linalg::complex_from_parts(&b2t, &(-&b1t));
    let lhs: CMatrix = plus * linalg::cinverse(&minus)?;
    let rhs = linalg::complex_from_parts(&(&b2t * &bc.a2 - &b1t * &bc.a1), &(&b2t * &bc.a1 * 2.0));
    Ok(linalg::cop_norm(&(lhs - rhs)))
}

/// Evolved frames along `[0, x_end]` from the left boundary frame.
pub fn evolve_frame(p: &IntervalProblem, lambda: f64, x_end: f64, steps: usize) -> Result<FrameFlow> {
    if steps < 2 {
        return Err(Error::InvalidInput("at least two integration steps are needed".into()));
    }
    let v = p.potential_fn();
    let grid = Grid::new(&v, 0.0, x_end, steps)?;
    FrameFlow::evolve(&p.alpha.frame(), &grid, v, lambda, Renormalization::Unitary)
}

/// Dirichlet, Neumann and Robin parts of a boundary condition, with
/// `Lambda` acting on the Robin part.
#[derive(Debug, Clone, PartialEq)]
pub struct BKQuadruple {
    pub p_d: DMatrix<f64>,
    pub p_n: DMatrix<f64>,
    pub p_r: DMatrix<f64>,
    pub lambda: DMatrix<f64>,
    /// `Lambda` has an eigenvalue within tolerance of 0 on range `P_R`.
    pub degenerate_robin: bool,
}

impl BKQuadruple {
    /// `P_R Lambda P_R` as an operator on all of `R^n`.
    pub fn robin_operator(&self) -> DMatrix<f64> {
        &self.p_r * &self.lambda * &self.p_r
    }
}

fn projector(basis: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    if basis.ncols() == 0 {
        DMatrix::zeros(n, n)
    } else {
        linalg::symmetrize(&(basis * basis.transpose()))
    }
}

pub fn bk_decompose(bc: &BoundaryCondition, tol_rank: f64) -> Result<BKQuadruple> {
    let n = bc.n();
    let ker_a2 = linalg::null_space(&bc.a2, tol_rank.max(1e-12));
    let ker_a1 = linalg::null_space(&bc.a1, tol_rank.max(1e-12));
    let p_d = projector(&ker_a2, n);
    let p_n = projector(&ker_a1, n);
    let id = DMatrix::<f64>::identity(n, n);
    let p_r = linalg::symmetrize(&(&id - &p_d - &p_n));
    let (ev, vecs) = linalg::sym_eigen_sorted(&p_r);
    if ev.iter().any(|&e| e.abs() > 1e-6 && (e - 1.0).abs() > 1e-6) || (&p_d * &p_n).norm() > 1e-6 {
        return Err(Error::InvalidBoundaryCondition(
            "kernels of a1 and a2 are not orthogonal".into(),
        ));
    }
    let cols: Vec<_> = (0..n).filter(|&k| ev[k] > 0.5).map(|k| vecs.column(k).into_owned()).collect();
    let (lambda, degenerate_robin) = if cols.is_empty() {
        (DMatrix::zeros(n, n), false)
    } else {
        let u = DMatrix::from_columns(&cols);
        let y = u.transpose() * bc.a2.transpose();
        let dy = -(u.transpose() * bc.a1.transpose());
        let reduced = linalg::symmetrize(&(dy * linalg::pseudo_inverse(&y, 1e-12)?));
        let (rev, _) = linalg::sym_eigen_sorted(&reduced);
        let scale = 1.0 + rev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let degenerate = rev.iter().any(|v| v.abs() <= 1e-8 * scale);
        if degenerate {
            log::warn!("Robin part of the boundary condition has a near-zero eigenvalue");
        }
        (linalg::symmetrize(&(&u * reduced * u.transpose())), degenerate)
    };
    let p_r = if cols.is_empty() {
        DMatrix::zeros(n, n)
    } else {
        projector(&DMatrix::from_columns(&cols), n)
    };
    let bk = BKQuadruple {
        p_d,
        p_n,
        p_r,
        lambda,
        degenerate_robin,
    };
    let rebuilt = BoundaryCondition::from_bk(&bk)?;
    let d = lagrangian::distance(&rebuilt.frame(), &bc.frame())?;
    if d > 1e-8 {
        return Err(Error::InvalidBoundaryCondition(format!(
            "decomposition does not reproduce the condition (distance {d:.3e})"
        )));
    }
    Ok(bk)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectionTerms {
    pub mor_b: usize,
    pub mor_q: usize,
    pub nondegenerate: bool,
}

pub fn correction_terms(p: &IntervalProblem, tol: f64) -> Result<CorrectionTerms> {
    let n = p.n;
    let bk0 = bk_decompose(&p.alpha, 1e-10)?;
    let bk1 = bk_decompose(&p.beta, 1e-10)?;
    let mut stacked = DMatrix::zeros(2 * n, n);
    stacked.view_mut((0, 0), (n, n)).copy_from(&bk0.p_d);
    stacked.view_mut((n, 0), (n, n)).copy_from(&bk1.p_d);
    let common = linalg::null_space(&stacked, 1e-10);
    if common.ncols() == 0 {
        return Ok(CorrectionTerms {
            mor_b: 0,
            mor_q: 0,
            nondegenerate: true,
        });
    }
    let r0 = bk0.robin_operator();
    let r1 = bk1.robin_operator();
    let b = linalg::symmetrize(&(common.transpose() * (&r0 - &r1) * &common));
    let (bev, bvec) = linalg::sym_eigen_sorted(&b);
    let mor_b = bev.iter().filter(|&&v| v < -tol).count();
    let kernel: Vec<_> = (0..bev.len())
        .filter(|&k| bev[k].abs() <= tol)
        .map(|k| (&common * bvec.column(k)).into_owned())
        .collect();
    if kernel.is_empty() {
        return Ok(CorrectionTerms {
            mor_b,
            mor_q: 0,
            nondegenerate: true,
        });
    }
    let q = DMatrix::from_columns(&kernel);
    let m = p.potential.eval(0.0, n) - &r0 * &r0;
    let restricted = linalg::symmetrize(&(q.transpose() * m * &q));
    let (neg, zero, _) = linalg::inertia(&restricted, tol);
    Ok(CorrectionTerms {
        mor_b,
        mor_q: neg,
        nondegenerate: zero == 0,
    })
}

/// Controls for the box computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntervalOptions {
    pub s0: f64,
    /// `None` selects the energy-bound default.
    pub lambda_inf: Option<f64>,
    /// RK4 steps over `[0, 1]`; shorter intervals use proportionally fewer.
    pub steps: usize,
    /// Initial samples per edge before refinement.
    pub grid: usize,
    pub maslov: MaslovOptions,
    /// Threshold for zero eigenvalues of the correction forms.
    pub tol_correction: f64,
    /// Run the finite-difference oracle.
    pub verify: bool,
    pub oracle_points: usize,
}

impl Default for IntervalOptions {
    fn default() -> Self {
        Self {
            s0: 0.05,
            lambda_inf: None,
            steps: 2000,
            grid: 400,
            maslov: MaslovOptions::default(),
            tol_correction: 1e-8,
            verify: false,
            oracle_points: 800,
        }
    }
}

/// `sup |V| + c / s0 + 10` with `c = 4 (1 + max |Lambda|)`.
pub fn default_lambda_inf(p: &IntervalProblem, s0: f64) -> Result<f64> {
    let bk0 = bk_decompose(&p.alpha, 1e-10)?;
    let bk1 = bk_decompose(&p.beta, 1e-10)?;
    let lam = linalg::op_norm(&bk0.lambda).max(linalg::op_norm(&bk1.lambda));
    let c = 4.0 * (1.0 + lam);
    Ok(p.sup_norm() + c / s0 + 10.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeReport {
    pub name: String,
    pub index: i64,
    pub crossings: Vec<Crossing>,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaslovBoxReport {
    /// Indices on the bottom, right, top and left edges, in loop order.
    pub edge_indices: Vec<i64>,
    pub edges: Vec<EdgeReport>,
    pub box_sum: i64,
    pub mor_b: usize,
    pub mor_q: usize,
    pub nondegenerate: bool,
    pub morse_index: i64,
    /// `-Mas(bottom) = Mor(B) + Mor(Q)`, as expected for small `s0`.
    pub bottom_consistent: bool,
    pub s0: f64,
    pub lambda_inf: f64,
    pub oracle_count: Option<i64>,
    pub oracle_match: Option<bool>,
    #[serde(skip)]
    pub traces: Vec<(String, PhaseTrace)>,
}

fn steps_for(total: usize, length: f64) -> usize {
    ((total as f64 * length).ceil() as usize).max(50)
}

/// Path over a `lambda`-edge at fixed `s`, parametrised by `t` with
/// `lambda = sign * t`.
fn lambda_edge(
    p: &IntervalProblem,
    s: f64,
    t_range: (f64, f64),
    sign: f64,
    opts: &IntervalOptions,
) -> Result<LagrangianPairPath> {
    let v = p.potential_fn();
    let grid = Grid::new(&v, 0.0, s, steps_for(opts.steps, s))?;
    let (start, target) = bc_frames(p);
    LagrangianPairPath::from_fn(t_range.0, t_range.1, opts.grid, move |t| {
        let f = FrameFlow::evolve_end(&start, &grid, sign * t, Renormalization::Unitary)?;
        Ok((f, target.clone()))
    })
}

/// Path over an `s`-edge at fixed `lambda`, parametrised by `t` with
/// `s = sign * t`.
fn s_edge(p: &IntervalProblem, lambda: f64, t_range: (f64, f64), sign: f64, opts: &IntervalOptions) -> Result<LagrangianPairPath> {
    let flow = Arc::new(evolve_frame(p, lambda, 1.0, opts.steps)?);
    let (_, target) = bc_frames(p);
    LagrangianPairPath::from_fn(t_range.0, t_range.1, opts.grid, move |t| Ok((flow.at(sign * t)?, target.clone())))
}

/// Maslov index around the box, with the correction terms.
pub fn maslov_box(p: &IntervalProblem, opts: &IntervalOptions) -> Result<MaslovBoxReport> {
    let s0 = opts.s0;
    if !(s0 > 0.0 && s0 < 1.0) {
        return Err(Error::InvalidInput(format!("s0 = {s0} must lie in (0, 1)")));
    }
    let lambda_inf = match opts.lambda_inf {
        Some(l) if l > 0.0 => l,
        Some(l) => return Err(Error::InvalidInput(format!("lambda_inf = {l} must be positive"))),
        None => default_lambda_inf(p, s0)?,
    };
    let corrections = correction_terms(p, opts.tol_correction)?;
    if !corrections.nondegenerate {
        log::warn!("non-degeneracy assumption fails; the correction term is unreliable");
    }

    let builders: Vec<(&str, Box<dyn Fn() -> Result<LagrangianPairPath> + Send + Sync>)> = vec![
        ("bottom", Box::new(|| lambda_edge(p, s0, (-lambda_inf, 0.0), 1.0, opts))),
        ("right", Box::new(|| s_edge(p, 0.0, (s0, 1.0), 1.0, opts))),
        ("top", Box::new(|| lambda_edge(p, 1.0, (0.0, lambda_inf), -1.0, opts))),
        ("left", Box::new(|| s_edge(p, -lambda_inf, (-1.0, -s0), -1.0, opts))),
    ];
    let results = builders
        .par_iter()
        .map(|(name, build)| {
            let path = build()?;
            let r = spectral_flow::maslov_index_with(&path, &opts.maslov)?;
            Ok((name.to_string(), r))
        })
        .collect::<Result<Vec<_>>>()?;

    let edge_indices: Vec<i64> = results.iter().map(|(_, r)| r.index).collect();
    let box_sum: i64 = edge_indices.iter().sum();
    if box_sum != 0 {
        return Err(Error::BoxNotClosed {
            edges: edge_indices,
            sum: box_sum,
        });
    }
    let morse_index = -edge_indices[1] + corrections.mor_b as i64 + corrections.mor_q as i64;
    let bottom_consistent = -edge_indices[0] == (corrections.mor_b + corrections.mor_q) as i64;
    if !bottom_consistent {
        log::warn!(
            "bottom edge index {} does not match the correction terms {} + {}; s0 may be too large",
            edge_indices[0],
            corrections.mor_b,
            corrections.mor_q
        );
    }
    let mut edges = Vec::new();
    let mut traces = Vec::new();
    for (name, r) in results {
        edges.push(EdgeReport {
            name: name.clone(),
            index: r.index,
            crossings: r.crossings.clone(),
            samples: r.grid_used.len(),
        });
        if let Some(t) = r.trace {
            traces.push((name, t));
        }
    }
    Ok(MaslovBoxReport {
        edge_indices,
        edges,
        box_sum,
        mor_b: corrections.mor_b,
        mor_q: corrections.mor_q,
        nondegenerate: corrections.nondegenerate,
        morse_index,
        bottom_consistent,
        s0,
        lambda_inf,
        oracle_count: None,
        oracle_match: None,
        traces,
    })
}

/// Morse index via the box, optionally checked against the
/// finite-difference count.
pub fn morse_index_interval(p: &IntervalProblem, opts: &IntervalOptions) -> Result<MaslovBoxReport> {
    let mut report = maslov_box(p, opts)?;
    if opts.verify {
        let count = oracle::fd_morse_interval(p, opts.oracle_points, None)? as i64;
        report.oracle_count = Some(count);
        report.oracle_match = Some(count == report.morse_index);
    }
    Ok(report)
}

/// `Omega` for the `lambda`-derivative of `W(s, lambda)` with the target
/// frame held fixed.
pub fn lambda_omega(p: &IntervalProblem, s: f64, lambda: f64, steps: usize) -> Result<OmegaTilde> {
    let v = p.potential_fn();
    let grid = Grid::new(&v, 0.0, s, steps_for(steps, s))?;
    let (start, target) = bc_frames(p);
    let (frame, d) = ode::evolve_with_tangent(&start, &grid, lambda)?;
    monotonicity::omega_tilde(&frame, &target, &d, &FrameDerivative::zero(p.n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn scalar_problem(v: f64, alpha: BoundaryCondition, beta: BoundaryCondition) -> IntervalProblem {
        IntervalProblem::new(Potential::scalar(v), alpha, beta).unwrap()
    }

    #[test]
    fn boundary_frames() {
        let d = BoundaryCondition::dirichlet(2).frame();
        assert_eq!(d.x(), &DMatrix::<f64>::zeros(2, 2));
        assert_eq!(d.y(), &-DMatrix::<f64>::identity(2, 2));
        let nm = BoundaryCondition::neumann(1).frame();
        assert_eq!((nm.x()[(0, 0)], nm.y()[(0, 0)]), (1.0, 0.0));
        let r = BoundaryCondition::new(DMatrix::from_element(1, 1, 0.6), DMatrix::from_element(1, 1, 0.8)).unwrap();
        let f = r.frame();
        assert!((f.x()[(0, 0)] - 0.8).abs() < 1e-15 && (f.y()[(0, 0)] + 0.6).abs() < 1e-15);
        assert!(target_factor_residual(&r).unwrap() < 1e-14);
    }

    #[test]
    fn rejects_bad_conditions() {
        let z = DMatrix::<f64>::zeros(2, 2);
        assert!(matches!(BoundaryCondition::new(z.clone(), z), Err(Error::InvalidBoundaryCondition(_))));
        let a1 = DMatrix::<f64>::identity(2, 2);
        let a2 = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(BoundaryCondition::new(a1, a2), Err(Error::InvalidBoundaryCondition(_))));
    }

    #[test]
    fn bk_of_basic_conditions() {
        let bk = bk_decompose(&BoundaryCondition::dirichlet(2), 1e-10).unwrap();
        assert!((bk.p_d - DMatrix::<f64>::identity(2, 2)).norm() < 1e-12);
        let bk = bk_decompose(&BoundaryCondition::neumann(2), 1e-10).unwrap();
        assert!((bk.p_n - DMatrix::<f64>::identity(2, 2)).norm() < 1e-12);
        let r = BoundaryCondition::new(DMatrix::from_element(1, 1, 0.6), DMatrix::from_element(1, 1, 0.8)).unwrap();
        let bk = bk_decompose(&r, 1e-10).unwrap();
        assert!((bk.p_r[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((bk.lambda[(0, 0)] + 0.75).abs() < 1e-12);
    }

    #[test]
    fn correction_examples() {
        let dd = scalar_problem(0.0, BoundaryCondition::dirichlet(1), BoundaryCondition::dirichlet(1));
        let c = correction_terms(&dd, 1e-8).unwrap();
        assert_eq!((c.mor_b, c.mor_q), (0, 0));
        let nn = IntervalProblem::new(Potential::scalar(-3.0), BoundaryCondition::neumann(2), BoundaryCondition::neumann(2)).unwrap();
        let c = correction_terms(&nn, 1e-8).unwrap();
        assert_eq!((c.mor_b, c.mor_q, c.nondegenerate), (0, 2, true));
        let rr = scalar_problem(0.0, BoundaryCondition::robin(2.0).unwrap(), BoundaryCondition::robin(5.0).unwrap());
        let c = correction_terms(&rr, 1e-8).unwrap();
        assert_eq!(c.mor_b, 1);
    }

    #[test]
    fn conjugate_point_at_pi_squared() {
        let p = scalar_problem(0.0, BoundaryCondition::dirichlet(1), BoundaryCondition::dirichlet(1));
        let (_, target) = bc_frames(&p);
        let at = |lambda: f64| {
            let f = evolve_frame(&p, lambda, 1.0, 2000).unwrap().end();
            crate::unitary::intersection_dim(&f, &target, 1e-6).unwrap()
        };
        assert_eq!(at(PI * PI), 1);
        assert_eq!(at(PI * PI + 1e-3), 0);
        assert_eq!(at(PI * PI - 1e-3), 0);
    }

    #[test]
    fn json_problem() {
        let text = r#"{"n":1,"potential":{"type":"constant","value":-20.0},
            "alpha1":[[1.0]],"alpha2":[[0.0]],"beta1":[[1.0]],"beta2":[[0.0]]}"#;
        let p: IntervalProblem = serde_json::from_str(text).unwrap();
        assert_eq!(p.n(), 1);
        let missing = r#"{"n":1,"potential":{"type":"constant","value":0.0},"alpha1":[[1.0]],"alpha2":[[0.0]]}"#;
        assert!(serde_json::from_str::<IntervalProblem>(missing).is_err());
    }
}
