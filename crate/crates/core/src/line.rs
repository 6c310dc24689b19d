//! Morse index of `H = -d^2/dx^2 + V(x)` on the whole line, for potentials
//! with limits `V_-`, `V_+` at `-inf`, `+inf` whose eigenvalues are
//! non-negative.
//!
//! The unstable frame of the limiting system at `-inf` is evolved across the
//! truncated line `[-L, L]` at `lambda = -delta` and compared against the
//! stable frame of the limit at `+inf`. Each conjugate point on this shelf
//! corresponds to a negative eigenvalue of `H`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::EdgeReport;
use crate::lagrangian::LagrangianFrame;
use crate::linalg;
use crate::ode::{FrameFlow, Grid, PotentialFn, Renormalization};
use crate::oracle;
use crate::potential::Potential;
use crate::spectral_flow::{self, Crossing, LagrangianPairPath, MaslovOptions, MaslovResult, PhaseTrace};
use crate::unitary::{self, WTilde};

const AUTO_START: f64 = 1.0;
const AUTO_STEP: f64 = 0.5;
const AUTO_CAP: f64 = 40.0;
const TAIL_TOL: f64 = 1e-8;

/// Truncation half-width: fixed, or the smallest value on a `0.5` lattice
/// whose tail integrals fall below `1e-8`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LineProblemJson", into = "LineProblemJson")]
pub struct LineProblem {
    n: usize,
    potential: Potential,
    v_minus: DMatrix<f64>,
    v_plus: DMatrix<f64>,
    truncation: Truncation,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LengthJson {
    Value(f64),
    Name(String),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LineProblemJson {
    n: usize,
    potential: Potential,
    #[serde(rename = "L", default)]
    length: Option<LengthJson>,
}

impl TryFrom<LineProblemJson> for LineProblem {
    type Error = Error;

    fn try_from(j: LineProblemJson) -> Result<Self> {
        let truncation = match j.length {
            None => Truncation::Auto,
            Some(LengthJson::Name(s)) if s == "auto" => Truncation::Auto,
            Some(LengthJson::Name(s)) => return Err(Error::InvalidInput(format!("L must be a number or \"auto\", found {s:?}"))),
            Some(LengthJson::Value(l)) => Truncation::Fixed(l),
        };
        LineProblem::new(j.n, j.potential, truncation)
    }
}

impl From<LineProblem> for LineProblemJson {
    fn from(p: LineProblem) -> Self {
        LineProblemJson {
            n: p.n,
            potential: p.potential,
            length: Some(match p.truncation {
                Truncation::Auto => LengthJson::Name("auto".into()),
                Truncation::Fixed(l) => LengthJson::Value(l),
            }),
        }
    }
}

impl LineProblem {
    pub fn new(n: usize, potential: Potential, truncation: Truncation) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        potential.check_dim(n)?;
        if let Truncation::Fixed(l) = truncation {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidInput(format!("L = {l} must be positive")));
            }
        }
        let (v_minus, v_plus) = potential
            .limits(n)
            .ok_or_else(|| Error::AssumptionViolated("the potential has no limits at infinity".into()))?;
        for (side, v) in [("V_-", &v_minus), ("V_+", &v_plus)] {
            let (ev, _) = linalg::sym_eigen_sorted(v);
            if ev[0] < -1e-12 {
                return Err(Error::AssumptionViolated(format!(
                    "{side} has a negative eigenvalue {:.6e}",
                    ev[0]
                )));
            }
        }
        Ok(Self {
            n,
            potential,
            v_minus,
            v_plus,
            truncation,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn v_minus(&self) -> &DMatrix<f64> {
        &self.v_minus
    }

    pub fn v_plus(&self) -> &DMatrix<f64> {
        &self.v_plus
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    pub fn with_truncation(&self, truncation: Truncation) -> Result<Self> {
        Self::new(self.n, self.potential.clone(), truncation)
    }

    pub fn potential_fn(&self) -> PotentialFn {
        let (p, n) = (self.potential.clone(), self.n);
        Arc::new(move |x| p.eval(x, n))
    }

    /// `int (1 + |x|) |V - V_+|` over `[l, 2l]` plus the mirrored integral
    /// against `V_-` over `[-2l, -l]`.
    pub fn tail_integral(&self, l: f64) -> f64 {
        let samples = 400;
        let h = l / samples as f64;
        let side = |sign: f64, limit: &DMatrix<f64>| {
            (0..=samples)
                .map(|k| {
                    let x = sign * (l + h * k as f64);
                    let w = if k == 0 || k == samples { 0.5 } else { 1.0 };
                    w * (1.0 + x.abs()) * linalg::op_norm(&(self.potential.eval(x, self.n) - limit))
                })
                .sum::<f64>()
                * h
        };
        side(1.0, &self.v_plus) + side(-1.0, &self.v_minus)
    }

    pub fn half_width(&self) -> f64 {
        match self.truncation {
            Truncation::Fixed(l) => l,
            Truncation::Auto => {
                let mut l = AUTO_START;
                while l < AUTO_CAP {
                    if self.tail_integral(l) < TAIL_TOL {
                        return l;
                    }
                    l += AUTO_STEP;
                }
                log::warn!("tail integral still {:.3e} at L = {AUTO_CAP}", self.tail_integral(AUTO_CAP));
                AUTO_CAP
            }
        }
    }
}

/// Frame `(R; S)` with `S = R diag(mu)` for a limit `V = R diag(nu) R^t`.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticFrame {
    pub r: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub mu: Vec<f64>,
}

impl AsymptoticFrame {
    fn build(v: &DMatrix<f64>, lambda: f64, sign: f64) -> Result<Self> {
        let (nu, r) = linalg::sym_eigen_sorted(v);
        let floor = nu[0];
        if floor - lambda <= 1e-10 {
            return Err(Error::LambdaNotBelowSpectrum { lambda, floor });
        }
        let mu: Vec<f64> = nu.iter().map(|v| sign * (v - lambda).sqrt()).collect();
        let s = &r * DMatrix::from_diagonal(&DVector::from_column_slice(&mu));
        Ok(Self { r, s, mu })
    }

    pub fn frame(&self) -> LagrangianFrame {
        LagrangianFrame::new(self.r.clone(), self.s.clone()).expect("asymptotic frames are Lagrangian")
    }
}

/// Unstable frame of `V_-` (growing toward `+inf`) and stable frame of `V_+`.
pub fn asymptotic_frames(p: &LineProblem, lambda: f64) -> Result<(AsymptoticFrame, AsymptoticFrame)> {
    let minus = AsymptoticFrame::build(&p.v_minus, lambda, 1.0)?;
    let plus = AsymptoticFrame::build(&p.v_plus, lambda, -1.0)?;
    Ok((minus, plus))
}

fn steps_for(half_width: f64, per_unit: usize) -> usize {
    ((2.0 * half_width * per_unit as f64).ceil() as usize).max(100)
}

/// Frames along `[-L, L]` started from the unstable frame of `V_-`.
pub fn line_flow(p: &LineProblem, lambda: f64, half_width: f64, steps_per_unit: usize) -> Result<FrameFlow> {
    let (minus, _) = asymptotic_frames(p, lambda)?;
    let v = p.potential_fn();
    let grid = Grid::new(&v, -half_width, half_width, steps_for(half_width, steps_per_unit))?;
    FrameFlow::evolve(&minus.frame(), &grid, v, lambda, Renormalization::Unitary)
}

/// Evolved minus frame at `x_end`, using the problem's truncation.
pub fn evolve_line_frame(p: &LineProblem, lambda: f64, x_end: f64, steps_per_unit: usize) -> Result<LagrangianFrame> {
    let l = p.half_width();
    if !(x_end >= -l && x_end <= l) {
        return Err(Error::InvalidInput(format!("x = {x_end} is outside [-{l}, {l}]")));
    }
    let (minus, _) = asymptotic_frames(p, lambda)?;
    let v = p.potential_fn();
    let steps = ((x_end + l) * steps_per_unit as f64).ceil() as usize;
    if steps == 0 {
        return Ok(minus.frame());
    }
    let grid = Grid::new(&v, -l, x_end, steps)?;
    FrameFlow::evolve_end(&minus.frame(), &grid, lambda, Renormalization::Unitary)
}

pub fn w_tilde_line(p: &LineProblem, x: f64, lambda: f64, steps_per_unit: usize) -> Result<WTilde> {
    let frame = evolve_line_frame(p, lambda, x, steps_per_unit)?;
    let (_, plus) = asymptotic_frames(p, lambda)?;
    unitary::w_tilde(&frame, &plus.frame())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LineOptions {
    /// The shelf sits at `lambda = -delta`.
    pub delta: f64,
    pub steps_per_unit: usize,
    /// Initial samples per shelf before refinement.
    pub grid: usize,
    /// Also run the three remaining shelves and check that the loop closes.
    pub full_box: bool,
    /// Half-width of the closing box. Conjugate points on the `x = L` shelf
    /// sharpen like `exp(-4 mu L)` in `lambda`, so the box is kept narrow
    /// enough for them to be resolved.
    pub box_half_width: f64,
    /// Samples per shelf of the closing box.
    pub box_grid: usize,
    pub lambda_inf: Option<f64>,
    /// Repeat at `2L` and require the same index.
    pub check_truncation: bool,
    pub verify: bool,
    pub oracle_points: usize,
    pub maslov: MaslovOptions,
}

impl Default for LineOptions {
    fn default() -> Self {
        Self {
            delta: 1e-4,
            steps_per_unit: 100,
            grid: 400,
            full_box: false,
            box_half_width: 2.0,
            box_grid: 2000,
            lambda_inf: None,
            check_truncation: true,
            verify: false,
            oracle_points: 2000,
            maslov: MaslovOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineBoxReport {
    /// Shelves in loop order: right (`lambda = -delta`), top (`x = L`),
    /// far (`lambda = -lambda_inf`), bottom (`x = -L`).
    pub edge_indices: Vec<i64>,
    pub edges: Vec<EdgeReport>,
    pub box_sum: i64,
    pub half_width: f64,
    pub lambda_inf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineReport {
    pub morse_index: i64,
    pub shelf_index: i64,
    pub crossings: Vec<Crossing>,
    pub half_width: f64,
    pub delta: f64,
    pub index_at_double_width: Option<i64>,
    pub shelves: Option<LineBoxReport>,
    pub oracle_count: Option<i64>,
    pub oracle_match: Option<bool>,
    #[serde(skip)]
    pub trace: Option<PhaseTrace>,
}

/// The shelf `x in [-L, L]` at `lambda = -delta`.
fn shelf_path(p: &LineProblem, half_width: f64, opts: &LineOptions) -> Result<LagrangianPairPath> {
    let lambda = -opts.delta;
    let flow = Arc::new(line_flow(p, lambda, half_width, opts.steps_per_unit)?);
    let target = asymptotic_frames(p, lambda)?.1.frame();
    let samples = opts.grid.max((20.0 * half_width) as usize);
    LagrangianPairPath::from_fn(-half_width, half_width, samples, move |x| Ok((flow.at(x)?, target.clone())))
}

fn shelf_index(p: &LineProblem, half_width: f64, opts: &LineOptions) -> Result<MaslovResult> {
    spectral_flow::maslov_index_with(&shelf_path(p, half_width, opts)?, &opts.maslov)
}

fn default_lambda_inf(p: &LineProblem, half_width: f64) -> f64 {
    p.potential.sup_norm(p.n, -half_width, half_width, 4001) + 10.0
}

fn full_box(p: &LineProblem, half_width: f64, opts: &LineOptions) -> Result<LineBoxReport> {
    let lambda_inf = match opts.lambda_inf {
        Some(l) if l > opts.delta => l,
        Some(l) => return Err(Error::InvalidInput(format!("lambda_inf = {l} must exceed delta"))),
        None => default_lambda_inf(p, half_width),
    };
    let l = half_width;
    let v = p.potential_fn();
    let grid = Grid::new(&v, -l, l, steps_for(l, opts.steps_per_unit))?;
    let pp = p.clone();
    let top = {
        let (pp, grid) = (pp.clone(), grid.clone());
        move |t: f64| {
            let (minus, plus) = asymptotic_frames(&pp, -t)?;
            let f = FrameFlow::evolve_end(&minus.frame(), &grid, -t, Renormalization::Unitary)?;
            Ok((f, plus.frame()))
        }
    };
    let bottom = {
        let pp = pp.clone();
        move |t: f64| {
            let (minus, plus) = asymptotic_frames(&pp, t)?;
            Ok((minus.frame(), plus.frame()))
        }
    };
    let far_flow = Arc::new(line_flow(p, -lambda_inf, l, opts.steps_per_unit)?);
    let far_target = asymptotic_frames(p, -lambda_inf)?.1.frame();
    let far = move |t: f64| Ok((far_flow.at(-t)?, far_target.clone()));

    let samples = opts.box_grid;
    let paths = vec![
        ("shelf", shelf_path(p, l, &LineOptions { grid: samples, ..*opts })?),
        ("top", LagrangianPairPath::from_fn(opts.delta, lambda_inf, samples, top)?),
        ("far", LagrangianPairPath::from_fn(-l, l, samples.max((20.0 * l) as usize), far)?),
        ("bottom", LagrangianPairPath::from_fn(-lambda_inf, -opts.delta, samples, bottom)?),
    ];
    let edges: Vec<EdgeReport> = paths
        .par_iter()
        .map(|(name, path)| Ok((name.to_string(), spectral_flow::maslov_index_with(path, &opts.maslov)?)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .map(|(name, r)| EdgeReport {
            name,
            index: r.index,
            crossings: r.crossings,
            samples: r.grid_used.len(),
        })
        .collect();
    let edge_indices: Vec<i64> = edges.iter().map(|e| e.index).collect();
    let box_sum = edge_indices.iter().sum();
    if box_sum != 0 {
        return Err(Error::BoxNotClosed {
            edges: edge_indices,
            sum: box_sum,
        });
    }
    Ok(LineBoxReport {
        edge_indices,
        edges,
        box_sum,
        half_width: l,
        lambda_inf,
    })
}

/// `Mor(H) = -Mas` along the shelf, with the optional truncation, box and
/// oracle checks.
pub fn morse_index_line(p: &LineProblem, opts: &LineOptions) -> Result<LineReport> {
    if !(opts.delta > 0.0) {
        return Err(Error::InvalidInput("delta must be positive".into()));
    }
    let l = p.half_width();
    let shelf = shelf_index(p, l, opts)?;
    let morse_index = -shelf.index;
    let index_at_double_width = if opts.check_truncation {
        let twice = -shelf_index(p, 2.0 * l, opts)?.index;
        if twice != morse_index {
            return Err(Error::TruncationInsufficient {
                l,
                at_l: morse_index,
                at_2l: twice,
            });
        }
        Some(twice)
    } else {
        None
    };
    let shelves = if opts.full_box {
        Some(full_box(p, opts.box_half_width.min(l), opts)?)
    } else {
        None
    };
    let (oracle_count, oracle_match) = if opts.verify {
        let c = oracle::fd_morse_line(p, l, opts.oracle_points, None)? as i64;
        (Some(c), Some(c == morse_index))
    } else {
        (None, None)
    };
    Ok(LineReport {
        morse_index,
        shelf_index: shelf.index,
        crossings: shelf.crossings,
        half_width: l,
        delta: opts.delta,
        index_at_double_width,
        shelves,
        oracle_count,
        oracle_match,
        trace: shelf.trace,
    })
}
