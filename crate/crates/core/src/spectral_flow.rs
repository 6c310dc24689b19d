//! Spectral flow of `W(t)` through `-1` along a path of Lagrangian pairs.
//!
//! Phases are tracked sample to sample by minimal circular matching, with
//! adaptive bisection when a step is too coarse to match unambiguously. The
//! index is accumulated with the epsilon-arc count: on each accepted step a
//! half-width `eps` is chosen so that `e^{i(pi +- eps)}` stays off the spectrum,
//! and the step contributes the change in the number of eigenvalues on the arc
//! `[pi, pi + eps)`. A second, independent count from the winding of the lifted
//! phases is computed alongside and must agree.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lagrangian::{self, LagrangianFrame};
use crate::linalg;
use crate::unitary::{self, WTilde};
use crate::Tolerances;

pub type FramePair = (LagrangianFrame, LagrangianFrame);

/// Produces the frame pair at an arbitrary parameter value.
pub type Refiner = Arc<dyn Fn(f64) -> Result<FramePair> + Send + Sync>;

/// `x` mapped into `[0, 2 pi)`.
pub fn wrap_phase(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y >= TAU {
        0.0
    } else {
        y
    }
}

/// `x` mapped into `(-pi, pi]`.
pub fn wrap_signed(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y > PI {
        y - TAU
    } else {
        y
    }
}

/// Angular distance on the circle, in `[0, pi]`.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    wrap_signed(a - b).abs()
}

/// Phase relative to `pi`, in `(-pi, pi]`, snapped to 0 within `tol`.
fn relative(theta: f64, tol: f64) -> f64 {
    let phi = wrap_signed(theta - PI);
    if phi.abs() <= tol {
        0.0
    } else {
        phi
    }
}

/// Sorted eigenvalue phases of `W` in `[0, 2 pi)`.
pub fn unit_eigenvalue_phases(w: &WTilde) -> Result<Vec<f64>> {
    let (values, _) = w.eigen()?;
    let mut phases: Vec<f64> = values.iter().map(|z| wrap_phase(z.arg())).collect();
    if phases.iter().any(|p| !p.is_finite()) {
        return Err(Error::EigensolverFailure("non-finite eigenvalue phase".into()));
    }
    phases.sort_by(f64::total_cmp);
    Ok(phases)
}

/// Sampled path `t -> (l1(t), l2(t))`, optionally with a callback for
/// evaluating it between samples.
#[derive(Clone)]
pub struct LagrangianPairPath {
    grid: Vec<f64>,
    frames: Vec<FramePair>,
    refiner: Option<Refiner>,
}

impl std::fmt::Debug for LagrangianPairPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LagrangianPairPath")
            .field("grid", &self.grid)
            .field("refinable", &self.refiner.is_some())
            .finish()
    }
}

impl LagrangianPairPath {
    /// Samples `f` on `samples` equispaced points of `[a, b]` and keeps `f`
    /// for refinement.
    pub fn from_fn<F>(a: f64, b: f64, samples: usize, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Result<FramePair> + Send + Sync + 'static,
    {
        if samples < 2 {
            return Err(Error::InvalidInput("a path needs at least two samples".into()));
        }
        if !(a.is_finite() && b.is_finite()) || a == b {
            return Err(Error::InvalidInput(format!("degenerate parameter interval [{a}, {b}]")));
        }
        let grid: Vec<f64> = (0..samples)
            .map(|i| {
                if i + 1 == samples {
                    b
                } else {
                    a + (b - a) * i as f64 / (samples - 1) as f64
                }
            })
            .collect();
        let f: Refiner = Arc::new(f);
        let frames = grid.par_iter().map(|&t| f(t)).collect::<Result<Vec<_>>>()?;
        Self::build(grid, frames, Some(f))
    }

    /// A path known only at the given samples; no refinement is possible.
    pub fn from_samples(grid: Vec<f64>, frames: Vec<FramePair>) -> Result<Self> {
        Self::build(grid, frames, None)
    }

    /// Explicit samples plus a refiner.
    pub fn with_refiner(grid: Vec<f64>, frames: Vec<FramePair>, refiner: Refiner) -> Result<Self> {
        Self::build(grid, frames, Some(refiner))
    }

    fn build(grid: Vec<f64>, frames: Vec<FramePair>, refiner: Option<Refiner>) -> Result<Self> {
        if grid.len() < 2 {
            return Err(Error::InvalidInput("a path needs at least two samples".into()));
        }
        if grid.len() != frames.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: frames.len(),
            });
        }
        let increasing = grid.windows(2).all(|w| w[1] > w[0]);
        let decreasing = grid.windows(2).all(|w| w[1] < w[0]);
        if !(increasing || decreasing) || grid.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidInput("parameter grid must be strictly monotone".into()));
        }
        let n = frames[0].0.n();
        for (a, b) in &frames {
            if a.n() != n {
                return Err(Error::DimensionMismatch { expected: n, found: a.n() });
            }
            if b.n() != n {
                return Err(Error::DimensionMismatch { expected: n, found: b.n() });
            }
        }
        Ok(Self { grid, frames, refiner })
    }

    pub fn n(&self) -> usize {
        self.frames[0].0.n()
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn frames(&self) -> &[FramePair] {
        &self.frames
    }

    pub fn start(&self) -> f64 {
        self.grid[0]
    }

    pub fn end(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    pub fn is_refinable(&self) -> bool {
        self.refiner.is_some()
    }

    pub fn refiner(&self) -> Option<&Refiner> {
        self.refiner.as_ref()
    }

    /// The same subspaces traversed backwards, reparametrised by
    /// `t -> a + b - t` so the grid still runs from `a` to `b`.
    pub fn reversed(&self) -> Self {
        let (a, b) = (self.start(), self.end());
        let grid = self.grid.iter().rev().map(|t| a + b - t).collect();
        let frames = self.frames.iter().rev().cloned().collect();
        let refiner = self.refiner.clone().map(|r| {
            let r: Refiner = Arc::new(move |t| r(a + b - t));
            r
        });
        Self { grid, frames, refiner }
    }

    /// Follows `self` by `other`, shifting `other`'s parameter so it starts
    /// where `self` ends. The endpoints must agree to `tol` in the pair
    /// metric.
    pub fn concatenate(&self, other: &Self, tol: f64) -> Result<Self> {
        if self.n() != other.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: other.n(),
            });
        }
        let (ea, eb) = self.frames.last().unwrap();
        let (sa, sb) = &other.frames[0];
        let distance = lagrangian::pair_distance((ea, eb), (sa, sb))?;
        if distance > tol {
            return Err(Error::JunctionMismatch { distance });
        }
        let forward = |p: &Self| p.end() > p.start();
        if forward(self) != forward(other) {
            return Err(Error::InvalidInput("cannot join paths with opposite grid orientation".into()));
        }
        let junction = self.end();
        let offset = junction - other.start();
        let mut grid = self.grid.clone();
        grid.extend(other.grid.iter().skip(1).map(|t| t + offset));
        let mut frames = self.frames.clone();
        frames.extend(other.frames.iter().skip(1).cloned());
        let refiner = match (&self.refiner, &other.refiner) {
            (Some(r1), Some(r2)) => {
                let (r1, r2) = (r1.clone(), r2.clone());
                let before = forward(self);
                let r: Refiner = Arc::new(move |t| {
                    if (t <= junction) == before {
                        r1(t)
                    } else {
                        r2(t - offset)
                    }
                });
                Some(r)
            }
            _ => None,
        };
        Self::build(grid, frames, refiner)
    }

    fn evaluate(&self, t: f64) -> Option<Result<FramePair>> {
        self.refiner.as_ref().map(|r| r(t))
    }
}

/// Controls for phase tracking and the index computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaslovOptions {
    pub tol: Tolerances,
    /// Largest accepted pair-metric step between consecutive samples.
    pub rho_max: f64,
    /// Bisection depth allowed below each initial grid interval.
    pub max_refine: u32,
}

impl Default for MaslovOptions {
    fn default() -> Self {
        Self {
            tol: Tolerances::default(),
            rho_max: 0.5,
            max_refine: 40,
        }
    }
}

/// Matched eigenvalue phases along a refined grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTrace {
    pub grid: Vec<f64>,
    /// `phases[i][k]` is track `k` at `grid[i]`, in `[0, 2 pi)`.
    pub phases: Vec<Vec<f64>>,
    /// `pairing[i][k]` is the index, in the sorted spectrum at `grid[i + 1]`,
    /// of the eigenvalue continuing track `k`.
    pub pairing: Vec<Vec<usize>>,
}

impl PhaseTrace {
    pub fn n(&self) -> usize {
        self.phases.first().map_or(0, Vec::len)
    }

    /// Writes columns `t, phase_1, ..., phase_n`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.n()).map(|k| format!("phase_{k}")));
        let io = |e: csv::Error| Error::InvalidInput(format!("csv write failed: {e}"));
        w.write_record(&header).map_err(io)?;
        for (t, row) in self.grid.iter().zip(&self.phases) {
            let mut rec = vec![format!("{t:.12e}")];
            rec.extend(row.iter().map(|p| format!("{p:.12e}")));
            w.write_record(&rec).map_err(io)?;
        }
        w.flush()
            .map_err(|e| Error::InvalidInput(format!("csv write failed: {e}")))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Ccw,
    Cw,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub t: f64,
    pub multiplicity: usize,
    pub direction: Direction,
    pub contribution: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaslovResult {
    pub index: i64,
    pub crossings: Vec<Crossing>,
    pub grid_used: Vec<f64>,
    #[serde(skip)]
    pub trace: Option<PhaseTrace>,
}

impl MaslovResult {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("result serialises")
    }
}

#[derive(Clone)]
struct Sample {
    t: f64,
    phases: Vec<f64>,
    projections: Option<(DMatrix<f64>, DMatrix<f64>)>,
}

fn sample_at(t: f64, pair: &FramePair, tol: &Tolerances, with_proj: bool) -> Result<Sample> {
    let w = unitary::w_tilde_with(&pair.0, &pair.1, tol)?;
    let phases = unit_eigenvalue_phases(&w)?;
    let projections = if with_proj {
        Some((pair.0.projection()?, pair.1.projection()?))
    } else {
        None
    };
    Ok(Sample { t, phases, projections })
}

/// Optimal assignment of the tracked phases to the sorted phases `next`.
/// On the circle the optimum is a cyclic shift of the two sorted orders.
fn match_phases(tracked: &[f64], next: &[f64]) -> Vec<usize> {
    let n = tracked.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| tracked[i].total_cmp(&tracked[j]));
    let mut best = (f64::INFINITY, f64::INFINITY, 0usize);
    for shift in 0..n {
        let mut total = 0.0;
        let mut worst: f64 = 0.0;
        for (k, &i) in order.iter().enumerate() {
            let d = circular_distance(tracked[i], next[(k + shift) % n]);
            total += d;
            worst = worst.max(d);
        }
        if total < best.0 - 1e-14 || (total <= best.0 + 1e-14 && worst < best.1) {
            best = (total, worst, shift);
        }
    }
    let mut assign = vec![0; n];
    for (k, &i) in order.iter().enumerate() {
        assign[i] = (k + best.2) % n;
    }
    assign
}

enum Refine {
    Motion,
    Rho,
    Epsilon(String),
}

struct Step {
    assign: Vec<usize>,
    contribution: i64,
    events: Vec<Event>,
}

#[derive(Clone, Copy)]
struct Event {
    t: f64,
    track: usize,
    sign: i8,
    contribution: i64,
    width: f64,
}

fn evaluate_step(
    a: &Sample,
    tracked: &[f64],
    b: &Sample,
    opts: &MaslovOptions,
    with_epsilon: bool,
) -> Result<std::result::Result<Step, Refine>> {
    let assign = match_phases(tracked, &b.phases);
    let moves: Vec<f64> = tracked
        .iter()
        .zip(&assign)
        .map(|(&p, &j)| circular_distance(p, b.phases[j]))
        .collect();
    if moves.iter().any(|&m| m >= FRAC_PI_2) {
        return Ok(Err(Refine::Motion));
    }
    if let (Some((pa1, pa2)), Some((pb1, pb2))) = (&a.projections, &b.projections) {
        let rho = linalg::op_norm(&(pa1 - pb1)).hypot(linalg::op_norm(&(pa2 - pb2)));
        if rho > opts.rho_max {
            return Ok(Err(Refine::Rho));
        }
    }
    if !with_epsilon {
        return Ok(Ok(Step {
            assign,
            contribution: 0,
            events: Vec::new(),
        }));
    }

    let tol = opts.tol.phase;
    let n = tracked.len();
    let mut x0 = vec![0.0; n];
    let mut x1 = vec![0.0; n];
    let mut touching = vec![false; n];
    let mut excursion: f64 = 0.0;
    let mut clearance = f64::INFINITY;
    for k in 0..n {
        let pa = relative(tracked[k], tol);
        let pb = relative(b.phases[assign[k]], tol);
        x0[k] = pa;
        // keep a snapped endpoint exactly at zero through the lift
        x1[k] = if pb == 0.0 { 0.0 } else { pa + wrap_signed(pb - pa) };
        if x0[k].min(x1[k]) <= 0.0 && 0.0 <= x0[k].max(x1[k]) {
            touching[k] = true;
            excursion = excursion.max(x0[k].abs()).max(x1[k].abs());
        } else {
            clearance = clearance.min(wrap_signed(x0[k]).abs()).min(wrap_signed(x1[k]).abs());
        }
    }
    let any_touch = touching.iter().any(|&v| v);
    let mut eps = if clearance.is_finite() {
        if any_touch {
            (0.5 * clearance).max(10.0 * tol)
        } else {
            0.5 * clearance
        }
    } else {
        0.5 * (excursion + PI)
    };
    if any_touch && !(excursion < eps && eps < clearance) && excursion < clearance {
        eps = 0.5 * (excursion + clearance);
    }
    if !(excursion < eps && eps < clearance) {
        return Ok(Err(Refine::Epsilon(format!(
            "touching phases move up to {excursion:.3e} from pi while another sits at {clearance:.3e}"
        ))));
    }

    let on_arc = |x: f64| {
        let w = wrap_signed(x);
        (0.0..eps).contains(&w)
    };
    let before = x0.iter().filter(|&&x| on_arc(x)).count() as i64;
    let after = x1.iter().filter(|&&x| on_arc(x)).count() as i64;

    let width = (b.t - a.t).abs();
    let mut events = Vec::new();
    for k in (0..n).filter(|&k| touching[k]) {
        if x0[k] == x1[k] {
            continue;
        }
        let t = if x0[k] == 0.0 {
            a.t
        } else if x1[k] == 0.0 {
            b.t
        } else {
            a.t + (b.t - a.t) * (-x0[k] / (x1[k] - x0[k]))
        };
        events.push(Event {
            t,
            track: k,
            sign: if x1[k] > x0[k] { 1 } else { -1 },
            contribution: (x1[k] >= 0.0) as i64 - (x0[k] >= 0.0) as i64,
            width,
        });
    }
    Ok(Ok(Step {
        assign,
        contribution: after - before,
        events,
    }))
}

struct Walk {
    trace: PhaseTrace,
    index: i64,
    events: Vec<Event>,
}

fn walk(path: &LagrangianPairPath, opts: &MaslovOptions, with_epsilon: bool) -> Result<Walk> {
    let with_proj = path.is_refinable();
    let tol = opts.tol;
    let samples: Vec<Sample> = path
        .grid
        .par_iter()
        .zip(path.frames.par_iter())
        .map(|(&t, pair)| sample_at(t, pair, &tol, with_proj))
        .collect::<Result<_>>()?;

    let mut tracked = samples[0].phases.clone();
    let mut trace = PhaseTrace {
        grid: vec![samples[0].t],
        phases: vec![tracked.clone()],
        pairing: Vec::new(),
    };
    let mut index = 0i64;
    let mut events = Vec::new();

    for w in samples.windows(2) {
        let width0 = (w[1].t - w[0].t).abs();
        let min_width = width0 * 0.5f64.powi(opts.max_refine as i32) * 1.5;
        let mut cur = w[0].clone();
        let mut stack = vec![w[1].clone()];
        while let Some(next) = stack.last() {
            match evaluate_step(&cur, &tracked, next, opts, with_epsilon)? {
                Ok(step) => {
                    let next = stack.pop().unwrap();
                    tracked = step.assign.iter().map(|&j| next.phases[j]).collect();
                    index += step.contribution;
                    events.extend(step.events);
                    trace.grid.push(next.t);
                    trace.phases.push(tracked.clone());
                    trace.pairing.push(step.assign);
                    cur = next;
                }
                Err(reason) => {
                    let width = (next.t - cur.t).abs();
                    let mid = 0.5 * (cur.t + next.t);
                    let exhausted = width <= min_width;
                    let fresh = if exhausted { None } else { path.evaluate(mid) };
                    match fresh {
                        Some(pair) => {
                            let s = sample_at(mid, &pair?, &tol, with_proj)?;
                            stack.push(s);
                        }
                        None => {
                            return Err(match reason {
                                Refine::Motion | Refine::Rho => Error::RefinementExhausted { t: mid },
                                Refine::Epsilon(reason) => Error::AmbiguousCrossing { t: mid, reason },
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(Walk { trace, index, events })
}

/// Tracks the `n` eigenvalue phases of `W` along the path.
pub fn track_eigenvalue_paths(path: &LagrangianPairPath, opts: &MaslovOptions) -> Result<PhaseTrace> {
    Ok(walk(path, opts, false)?.trace)
}

/// Maslov index of the path as the spectral flow of `W` through `-1`.
pub fn maslov_index(path: &LagrangianPairPath) -> Result<MaslovResult> {
    maslov_index_with(path, &MaslovOptions::default())
}

pub fn maslov_index_with(path: &LagrangianPairPath, opts: &MaslovOptions) -> Result<MaslovResult> {
    let walk = walk(path, opts, true)?;
    let check = winding_count(&walk.trace, opts.tol.phase);
    if check != walk.index {
        return Err(Error::NumericalFailure(format!(
            "arc count {} disagrees with winding count {check}",
            walk.index
        )));
    }
    let crossings = group_events(walk.events);
    Ok(MaslovResult {
        index: walk.index,
        crossings,
        grid_used: walk.trace.grid.clone(),
        trace: Some(walk.trace),
    })
}

/// Signed count of passages through `pi` from the lifted phases of a trace:
/// each track contributes `floor(x_end / 2pi) - floor(x_start / 2pi)` where
/// `x` is its continuous lift measured from `pi`.
pub fn winding_count(trace: &PhaseTrace, tol_phase: f64) -> i64 {
    let n = trace.n();
    let mut total = 0i64;
    for k in 0..n {
        let mut sheet = 0i64;
        let mut phi = relative(trace.phases[0][k], tol_phase);
        let start = (phi >= 0.0) as i64;
        for row in &trace.phases[1..] {
            let next = relative(row[k], tol_phase);
            let lifted = phi + wrap_signed(next - phi);
            if lifted > PI {
                sheet += 1;
            } else if lifted <= -PI {
                sheet -= 1;
            }
            phi = next;
        }
        total += sheet + (phi >= 0.0) as i64 - start;
    }
    total
}

fn group_events(mut events: Vec<Event>) -> Vec<Crossing> {
    // arrival and departure of one track at the same sample form one event
    events.sort_by(|a, b| a.track.cmp(&b.track).then(a.t.total_cmp(&b.t)));
    let mut merged: Vec<(Event, Direction)> = Vec::new();
    for e in events {
        let dir = if e.sign > 0 { Direction::Ccw } else { Direction::Cw };
        if let Some((last, d)) = merged.last_mut() {
            if last.track == e.track && last.t == e.t {
                last.contribution += e.contribution;
                last.width = last.width.max(e.width);
                if *d != dir {
                    *d = Direction::Mixed;
                }
                continue;
            }
        }
        merged.push((e, dir));
    }
    merged.sort_by(|a, b| a.0.t.total_cmp(&b.0.t));
    let mut out: Vec<(Crossing, f64)> = Vec::new();
    for (e, dir) in merged {
        if let Some((c, w)) = out.last_mut() {
            if (e.t - c.t).abs() <= w.max(e.width) {
                c.multiplicity += 1;
                c.contribution += e.contribution;
                if c.direction != dir {
                    c.direction = Direction::Mixed;
                }
                *w = w.max(e.width);
                continue;
            }
        }
        out.push((
            Crossing {
                t: e.t,
                multiplicity: 1,
                direction: dir,
                contribution: e.contribution,
            },
            e.width,
        ));
    }
    out.into_iter().map(|(c, _)| c).collect()
}

/// Per-slice indices of an endpoint-fixed homotopy `(s, t) -> pair`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomotopyReport {
    pub consistent: bool,
    pub s: Vec<f64>,
    pub indices: Vec<i64>,
}

/// Computes the index of each slice `s in [0, 1]` of the homotopy and
/// reports whether they agree. The endpoints `h(s, a)` and `h(s, b)` must
/// not depend on `s`.
pub fn homotopy_check<F>(
    h: F,
    t_range: (f64, f64),
    slices: usize,
    t_samples: usize,
    opts: &MaslovOptions,
) -> Result<HomotopyReport>
where
    F: Fn(f64, f64) -> Result<FramePair> + Send + Sync + 'static,
{
    if slices < 1 {
        return Err(Error::InvalidInput("need at least one slice".into()));
    }
    let (a, b) = t_range;
    let h = Arc::new(h);
    let s_values: Vec<f64> = (0..slices)
        .map(|i| if slices == 1 { 0.0 } else { i as f64 / (slices - 1) as f64 })
        .collect();
    let base_a = h(s_values[0], a)?;
    let base_b = h(s_values[0], b)?;
    for &s in &s_values[1..] {
        for (t, base) in [(a, &base_a), (b, &base_b)] {
            let p = h(s, t)?;
            let distance = lagrangian::pair_distance((&p.0, &p.1), (&base.0, &base.1))?;
            if distance > 1e-8 {
                return Err(Error::EndpointsNotFixed { s, distance });
            }
        }
    }
    let indices = s_values
        .iter()
        .map(|&s| {
            let h = h.clone();
            let path = LagrangianPairPath::from_fn(a, b, t_samples, move |t| h(s, t))?;
            Ok(maslov_index_with(&path, opts)?.index)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HomotopyReport {
        consistent: indices.windows(2).all(|w| w[0] == w[1]),
        s: s_values,
        indices,
    })
}
