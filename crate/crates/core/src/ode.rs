//! Fixed-step RK4 for the frame system `X' = Y`, `Y' = (V(x) - lambda) X`,
//! with the frame renormalised after every step.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lagrangian::LagrangianFrame;
use crate::linalg::{self, CMatrix};

/// `x -> V(x)` as a symmetric `n x n` matrix.
pub type PotentialFn = Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>;

/// How the frame is rescaled after each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Renormalization {
    /// Right multiplication by `(X^tX + Y^tY)^{-1/2}`.
    Real,
    /// Replace `X + iY` by its unitary polar factor. Agrees with `Real` on
    /// exactly Lagrangian frames, and also removes the `O(h^5)` per-step
    /// drift of `X^tY - Y^tX` that RK4 introduces.
    #[default]
    Unitary,
}

type Pair = (DMatrix<f64>, DMatrix<f64>);

fn rk4_step(x: &DMatrix<f64>, y: &DMatrix<f64>, k0: &DMatrix<f64>, kh: &DMatrix<f64>, k1: &DMatrix<f64>, h: f64) -> Pair {
    let a1x = y.clone();
    let a1y = k0 * x;
    let x2 = x + &a1x * (0.5 * h);
    let y2 = y + &a1y * (0.5 * h);
    let a2x = y2.clone();
    let a2y = kh * &x2;
    let x3 = x + &a2x * (0.5 * h);
    let y3 = y + &a2y * (0.5 * h);
    let a3x = y3.clone();
    let a3y = kh * &x3;
    let x4 = x + &a3x * h;
    let y4 = y + &a3y * h;
    let a4x = y4;
    let a4y = k1 * &x4;
    (
        x + (a1x + &a2x * 2.0 + &a3x * 2.0 + a4x) * (h / 6.0),
        y + (a1y + &a2y * 2.0 + &a3y * 2.0 + a4y) * (h / 6.0),
    )
}

/// RK4 step of the frame together with its `lambda`-derivative `(P, Q)`,
/// which solves `P' = Q`, `Q' = (V - lambda) P - X`.
#[allow(clippy::too_many_arguments)]
fn rk4_tangent_step(
    s: &[DMatrix<f64>; 4],
    k0: &DMatrix<f64>,
    kh: &DMatrix<f64>,
    k1: &DMatrix<f64>,
    h: f64,
) -> [DMatrix<f64>; 4] {
    let f = |z: &[DMatrix<f64>; 4], k: &DMatrix<f64>| -> [DMatrix<f64>; 4] {
        [z[1].clone(), k * &z[0], z[3].clone(), k * &z[2] - &z[0]]
    };
    let axpy = |z: &[DMatrix<f64>; 4], d: &[DMatrix<f64>; 4], c: f64| -> [DMatrix<f64>; 4] {
        [&z[0] + &d[0] * c, &z[1] + &d[1] * c, &z[2] + &d[2] * c, &z[3] + &d[3] * c]
    };
    let a1 = f(s, k0);
    let a2 = f(&axpy(s, &a1, 0.5 * h), kh);
    let a3 = f(&axpy(s, &a2, 0.5 * h), kh);
    let a4 = f(&axpy(s, &a3, h), k1);
    std::array::from_fn(|i| &s[i] + (&a1[i] + &a2[i] * 2.0 + &a3[i] * 2.0 + &a4[i]) * (h / 6.0))
}

fn check_finite(m: &DMatrix<f64>, x: f64) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::IntegratorFailure(format!("non-finite frame at x = {x}")))
    }
}

/// Rescaled frame, and the real right factor when `mode` is `Real`.
fn renormalize(x: DMatrix<f64>, y: DMatrix<f64>, mode: Renormalization, at: f64) -> Result<(Pair, Option<DMatrix<f64>>)> {
    check_finite(&x, at)?;
    check_finite(&y, at)?;
    let fail = |e: Error| Error::IntegratorFailure(format!("renormalisation failed at x = {at}: {e}"));
    match mode {
        Renormalization::Real => {
            let gram = x.transpose() * &x + y.transpose() * &y;
            let m = linalg::spd_inv_sqrt(&gram, 1e14).map_err(fail)?;
            Ok(((&x * &m, &y * &m), Some(m)))
        }
        Renormalization::Unitary => {
            let u = linalg::complex_from_parts(&x, &y);
            let h: CMatrix = u.adjoint() * &u;
            let m = linalg::hpd_inv_sqrt(&h, 1e14).map_err(fail)?;
            let v = u * m;
            Ok(((linalg::real_part(&v), linalg::imag_part(&v)), None))
        }
    }
}

/// Uniform grid on `[a, b]` with `V - lambda` tabulated at the RK4 nodes.
#[derive(Clone)]
pub struct Grid {
    pub a: f64,
    pub b: f64,
    pub steps: usize,
    /// `V(a + j h / 2)` for `j = 0..=2 steps`.
    nodes: Arc<Vec<DMatrix<f64>>>,
}

impl Grid {
    pub fn new(potential: &PotentialFn, a: f64, b: f64, steps: usize) -> Result<Self> {
        if steps < 1 || !(a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidInput("integration grid needs at least one finite step".into()));
        }
        let h = (b - a) / steps as f64;
        let nodes = (0..=2 * steps)
            .map(|j| potential(if j == 2 * steps { b } else { a + 0.5 * h * j as f64 }))
            .collect();
        Ok(Self {
            a,
            b,
            steps,
            nodes: Arc::new(nodes),
        })
    }

    pub fn h(&self) -> f64 {
        (self.b - self.a) / self.steps as f64
    }

    pub fn x(&self, k: usize) -> f64 {
        if k == self.steps {
            self.b
        } else {
            self.a + self.h() * k as f64
        }
    }

    fn shifted(&self, j: usize, lambda: f64) -> DMatrix<f64> {
        let v = &self.nodes[j];
        let n = v.nrows();
        v - DMatrix::identity(n, n) * lambda
    }
}

/// Evolved frames at every grid node, for a fixed `lambda`.
#[derive(Clone)]
pub struct FrameFlow {
    grid: Grid,
    lambda: f64,
    potential: PotentialFn,
    mode: Renormalization,
    frames: Vec<Pair>,
}

impl FrameFlow {
    pub fn evolve(
        start: &LagrangianFrame,
        grid: &Grid,
        potential: PotentialFn,
        lambda: f64,
        mode: Renormalization,
    ) -> Result<Self> {
        let nf = start.normalize()?;
        let mut frames = Vec::with_capacity(grid.steps + 1);
        frames.push((nf.x().clone(), nf.y().clone()));
        let h = grid.h();
        for k in 0..grid.steps {
            let (x, y) = &frames[k];
            let (xn, yn) = rk4_step(
                x,
                y,
                &grid.shifted(2 * k, lambda),
                &grid.shifted(2 * k + 1, lambda),
                &grid.shifted(2 * k + 2, lambda),
                h,
            );
            let (pair, _) = renormalize(xn, yn, mode, grid.x(k + 1))?;
            frames.push(pair);
        }
        Ok(Self {
            grid: grid.clone(),
            lambda,
            potential,
            mode,
            frames,
        })
    }

    /// Frame at the end of the grid, without storing intermediate nodes.
    pub fn evolve_end(start: &LagrangianFrame, grid: &Grid, lambda: f64, mode: Renormalization) -> Result<LagrangianFrame> {
        let nf = start.normalize()?;
        let (mut x, mut y) = (nf.x().clone(), nf.y().clone());
        let h = grid.h();
        for k in 0..grid.steps {
            let (xn, yn) = rk4_step(
                &x,
                &y,
                &grid.shifted(2 * k, lambda),
                &grid.shifted(2 * k + 1, lambda),
                &grid.shifted(2 * k + 2, lambda),
                h,
            );
            ((x, y), _) = renormalize(xn, yn, mode, grid.x(k + 1))?;
        }
        Ok(LagrangianFrame::from_parts_unchecked(x, y))
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn end(&self) -> LagrangianFrame {
        let (x, y) = self.frames.last().unwrap();
        LagrangianFrame::from_parts_unchecked(x.clone(), y.clone())
    }

    pub fn node(&self, k: usize) -> LagrangianFrame {
        let (x, y) = &self.frames[k];
        LagrangianFrame::from_parts_unchecked(x.clone(), y.clone())
    }

    /// Frame at arbitrary `x` in the grid range: the nearest node at or
    /// before `x`, advanced by one partial RK4 step.
    pub fn at(&self, x: f64) -> Result<LagrangianFrame> {
        let g = &self.grid;
        let (lo, hi) = if g.a <= g.b { (g.a, g.b) } else { (g.b, g.a) };
        if !(x >= lo - 1e-12 * (1.0 + lo.abs()) && x <= hi + 1e-12 * (1.0 + hi.abs())) {
            return Err(Error::InvalidInput(format!("x = {x} is outside [{lo}, {hi}]")));
        }
        let pos = ((x - g.a) / g.h()).clamp(0.0, g.steps as f64);
        let k = (pos.floor() as usize).min(g.steps);
        let xk = g.x(k);
        let dx = x - xk;
        if dx == 0.0 || k == g.steps {
            return Ok(self.node(k));
        }
        let n = self.frames[0].0.nrows();
        let shift = |t: f64| (self.potential)(t) - DMatrix::identity(n, n) * self.lambda;
        let (x0, y0) = &self.frames[k];
        let (xn, yn) = rk4_step(x0, y0, &g.shifted(2 * k, self.lambda), &shift(xk + 0.5 * dx), &shift(x), dx);
        let ((xn, yn), _) = renormalize(xn, yn, self.mode, x)?;
        Ok(LagrangianFrame::from_parts_unchecked(xn, yn))
    }

    /// Largest `|X^tY - Y^tX|_2` over the stored nodes.
    pub fn max_skew(&self) -> f64 {
        self.frames
            .iter()
            .map(|(x, y)| linalg::op_norm(&(x.transpose() * y - y.transpose() * x)))
            .fold(0.0, f64::max)
    }
}

/// Frame at the end of the grid together with its `lambda`-derivative, for
/// the same (renormalised) frame. Right multiplication of both by the same
/// matrices leaves the symplectic velocity `X^t Y_l - Y^t X_l` correct up to
/// congruence, which is all the derivative formulas need.
pub fn evolve_with_tangent(
    start: &LagrangianFrame,
    grid: &Grid,
    lambda: f64,
) -> Result<(LagrangianFrame, crate::monotonicity::FrameDerivative)> {
    let nf = start.normalize()?;
    let n = nf.n();
    let mut s = [
        nf.x().clone(),
        nf.y().clone(),
        DMatrix::zeros(n, n),
        DMatrix::zeros(n, n),
    ];
    let h = grid.h();
    for k in 0..grid.steps {
        let next = rk4_tangent_step(
            &s,
            &grid.shifted(2 * k, lambda),
            &grid.shifted(2 * k + 1, lambda),
            &grid.shifted(2 * k + 2, lambda),
            h,
        );
        let [x, y, p, q] = next;
        let ((x, y), m) = renormalize(x, y, Renormalization::Real, grid.x(k + 1))?;
        let m = m.expect("real renormalisation returns its factor");
        s = [x, y, &p * &m, &q * &m];
    }
    let [x, y, p, q] = s;
    Ok((
        LagrangianFrame::from_parts_unchecked(x, y),
        crate::monotonicity::FrameDerivative { dx: p, dy: q },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn zero_potential() -> PotentialFn {
        Arc::new(|_| DMatrix::zeros(1, 1))
    }

    fn dirichlet() -> LagrangianFrame {
        LagrangianFrame::new(DMatrix::zeros(1, 1), DMatrix::from_element(1, 1, -1.0)).unwrap()
    }

    #[test]
    fn conjugate_point_of_free_particle() {
        let v = zero_potential();
        let grid = Grid::new(&v, 0.0, 1.0, 2000).unwrap();
        let flow = FrameFlow::evolve(&dirichlet(), &grid, v, PI * PI, Renormalization::Real).unwrap();
        let end = flow.end();
        assert!(end.x()[(0, 0)].abs() < 1e-8);
    }

    #[test]
    fn decaying_branch_below_spectrum() {
        let v = zero_potential();
        let grid = Grid::new(&v, 0.0, 1.0, 2000).unwrap();
        let flow = FrameFlow::evolve(&dirichlet(), &grid, v, -1.0, Renormalization::Real).unwrap();
        let end = flow.end();
        // X = -sinh x, Y = -cosh x up to scale
        assert!((end.x()[(0, 0)] / end.y()[(0, 0)] - 1f64.tanh()).abs() < 1e-8);
    }

    #[test]
    fn partial_steps_match_nodes() {
        let v: PotentialFn = Arc::new(|x| DMatrix::from_element(1, 1, -5.0 * x));
        let grid = Grid::new(&v, 0.0, 1.0, 200).unwrap();
        let flow = FrameFlow::evolve(&dirichlet(), &grid, v, -2.0, Renormalization::Unitary).unwrap();
        let mid = flow.at(0.5025).unwrap();
        let fine = Grid::new(&flow.potential, 0.0, 0.5025, 4000).unwrap();
        let reference = FrameFlow::evolve(&dirichlet(), &fine, flow.potential.clone(), -2.0, Renormalization::Unitary).unwrap();
        let d = crate::lagrangian::distance(&mid, &reference.end()).unwrap();
        assert!(d < 1e-10, "{d}");
    }

    #[test]
    fn tangent_matches_difference_quotient() {
        let v: PotentialFn = Arc::new(|x| DMatrix::from_element(1, 1, 3.0 * x * x - 1.0));
        let grid = Grid::new(&v, 0.0, 0.7, 700).unwrap();
        let (f, d) = evolve_with_tangent(&dirichlet(), &grid, -3.0).unwrap();
        let h = 1e-5;
        let fp = FrameFlow::evolve(&dirichlet(), &grid, v.clone(), -3.0 + h, Renormalization::Real).unwrap().end();
        let fm = FrameFlow::evolve(&dirichlet(), &grid, v, -3.0 - h, Renormalization::Real).unwrap().end();
        // compare the symplectic velocity, which is frame-change covariant
        let vel = (f.x().transpose() * &d.dy - f.y().transpose() * &d.dx)[(0, 0)];
        let (xp, yp, xm, ym) = (fp.x()[(0, 0)], fp.y()[(0, 0)], fm.x()[(0, 0)], fm.y()[(0, 0)]);
        // for n = 1 the velocity equals the angular speed of the normalised frame
        let angle = |x: f64, y: f64| y.atan2(x);
        let dtheta = (angle(xp, yp) - angle(xm, ym)) / (2.0 * h);
        assert!((vel - dtheta).abs() < 1e-6, "{vel} vs {dtheta}");
        assert!(vel < 0.0);
    }
}
