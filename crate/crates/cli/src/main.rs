use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use maslov::interval::{morse_index_interval, IntervalOptions, IntervalProblem};
use maslov::lagrangian::{frame_from_unitary, random_unitary};
use maslov::line::{morse_index_line, LineOptions, LineProblem};
use maslov::linalg::{self, CMatrix, Complex64};
use maslov::spectral_flow::{maslov_index_with, LagrangianPairPath, MaslovOptions, PhaseTrace};
use maslov::{report, Error, LagrangianFrame, Tolerances};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

const EXIT_ERROR: u8 = 1;
const EXIT_AMBIGUOUS: u8 = 2;
const EXIT_MISMATCH: u8 = 3;

/// Maslov index of Lagrangian pair paths and Morse indices of Schrodinger
/// operators.
///
/// Exit status: 0 on success, 1 on errors, 2 on an unresolvable crossing,
/// 3 when --verify finds an oracle mismatch. MASLOV_THREADS caps the worker
/// pool.
#[derive(Parser, Debug)]
#[command(name = "maslov", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Maslov index of a sampled or built-in pair path.
    Path(RunConfig),
    /// Morse index on [0, 1] via the Maslov box.
    Interval(RunConfig),
    /// Morse index on the real line via the right shelf.
    Line(RunConfig),
}

#[derive(Args, Debug, Clone)]
struct RunConfig {
    /// Problem description (JSON).
    #[arg(long)]
    input: PathBuf,
    /// Report destination (JSON).
    #[arg(long)]
    output: PathBuf,
    /// Also write phase traces as CSV next to the report.
    #[arg(long)]
    trace: bool,
    /// Compare against the finite-difference oracle.
    #[arg(long)]
    verify: bool,
    /// Seed for built-in random paths.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// RK4 steps over [0, 1] for interval (default 2000), per unit length for
    /// line (default 100).
    #[arg(long)]
    steps: Option<usize>,
    /// Initial samples per path before refinement (default 101 for path, 400
    /// otherwise).
    #[arg(long)]
    grid: Option<usize>,
    /// Depth of the spectral box (default: energy bound).
    #[arg(long = "lambda-inf")]
    lambda_inf: Option<f64>,
    /// Left edge of the interval box.
    #[arg(long, default_value_t = 0.05)]
    s0: f64,
    /// Distance of the line shelf below zero.
    #[arg(long, default_value_t = 1e-4)]
    delta: f64,
    /// Also close the four-shelf box on the line.
    #[arg(long = "full-box")]
    full_box: bool,
    /// Grid points for the finite-difference oracle (default 800 for interval,
    /// 2000 for line).
    #[arg(long = "oracle-points")]
    oracle_points: Option<usize>,
    /// Angular tolerance for an eigenvalue to sit at -1.
    #[arg(long = "tol-phase", default_value_t = 1e-6)]
    tol_phase: f64,
    /// Lagrangian residual bound for input frames.
    #[arg(long = "tol-frame", default_value_t = 1e-9)]
    tol_frame: f64,
    /// Relative singular-value cutoff for rank decisions.
    #[arg(long = "tol-rank", default_value_t = 1e-10)]
    tol_rank: f64,
    /// Definiteness threshold for Hermitian forms.
    #[arg(long = "tol-definiteness", default_value_t = 1e-8)]
    tol_definiteness: f64,
    /// Largest projection jump between consecutive samples.
    #[arg(long = "rho-max", default_value_t = 0.5)]
    rho_max: f64,
    /// Bisection depth for refinement.
    #[arg(long = "max-refine", default_value_t = 40)]
    max_refine: u32,
}

impl RunConfig {
    fn validate(&self) -> Result<(), String> {
        if !self.input.exists() {
            return Err(format!("input file {} does not exist", self.input.display()));
        }
        for (name, v) in [
            ("tol-phase", self.tol_phase),
            ("tol-frame", self.tol_frame),
            ("tol-rank", self.tol_rank),
            ("tol-definiteness", self.tol_definiteness),
            ("rho-max", self.rho_max),
            ("delta", self.delta),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("--{name} must be positive"));
            }
        }
        Ok(())
    }

    fn maslov(&self) -> MaslovOptions {
        MaslovOptions {
            tol: Tolerances {
                frame: self.tol_frame,
                rank: self.tol_rank,
                phase: self.tol_phase,
                definiteness: self.tol_definiteness,
                ..Tolerances::default()
            },
            rho_max: self.rho_max,
            max_refine: self.max_refine,
        }
    }
}

enum Failure {
    Error(String),
    Ambiguous(String),
    Mismatch,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::AmbiguousCrossing { .. } => Failure::Ambiguous(e.to_string()),
            other => Failure::Error(other.to_string()),
        }
    }
}

impl From<String> for Failure {
    fn from(s: String) -> Self {
        Failure::Error(s)
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| Failure::Error(format!("cannot parse {}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::Error(format!("cannot write {}: {e}", path.display())))
}

fn trace_path(output: &Path, label: Option<&str>) -> PathBuf {
    let stem = output.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    let name = match label {
        Some(l) => format!("{stem}.{l}.trace.csv"),
        None => format!("{stem}.trace.csv"),
    };
    output.with_file_name(name)
}

fn write_trace(path: &Path, trace: &PhaseTrace) -> Result<(), Failure> {
    write(path, &trace.to_csv_string())?;
    info!("wrote trace {}", path.display());
    Ok(())
}

/// A path endpoint: a number or a multiple of pi such as `"-pi/4"` or
/// `"3*pi/2"`.
#[derive(Deserialize, Debug)]
#[serde(untagged)]
enum Endpoint {
    Number(f64),
    Text(String),
}

impl Endpoint {
    fn value(&self) -> Result<f64, String> {
        match self {
            Endpoint::Number(x) => Ok(*x),
            Endpoint::Text(s) => parse_angle(s).ok_or_else(|| format!("cannot read endpoint {s:?}")),
        }
    }
}

fn parse_angle(text: &str) -> Option<f64> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if let Ok(x) = s.parse::<f64>() {
        return Some(x);
    }
    let (sign, body) = match s.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, s.strip_prefix('+').unwrap_or(&s)),
    };
    let (num, den) = match body.split_once('/') {
        Some((n, d)) => (n, d.parse::<f64>().ok()?),
        None => (body, 1.0),
    };
    let factor = match num.strip_suffix("pi")? {
        "" => 1.0,
        f => f.strip_suffix('*').unwrap_or(f).parse::<f64>().ok()?,
    };
    Some(sign * factor * std::f64::consts::PI / den)
}

#[derive(Deserialize, Debug)]
struct FrameJson {
    x: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
}

#[derive(Deserialize, Debug)]
struct SampleJson {
    l1: FrameJson,
    l2: FrameJson,
}

#[derive(Deserialize, Debug)]
#[serde(untagged)]
enum PathInput {
    Builtin {
        builtin: String,
        interval: [Endpoint; 2],
        #[serde(default)]
        n: Option<usize>,
        #[serde(default)]
        samples: Option<usize>,
    },
    Sampled {
        grid: Vec<f64>,
        frames: Vec<SampleJson>,
    },
}

fn matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, String> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err("frame blocks must be square, non-empty matrices".into());
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn frame(f: &FrameJson, tol: &Tolerances) -> Result<LagrangianFrame, Failure> {
    Ok(LagrangianFrame::with_tolerances(matrix(&f.x)?, matrix(&f.y)?, tol)?)
}

fn line_frame(t: f64) -> LagrangianFrame {
    LagrangianFrame::new(DMatrix::from_element(1, 1, t.cos()), DMatrix::from_element(1, 1, t.sin()))
        .expect("a line through the origin is Lagrangian")
}

/// `l1 = e^{itA} U`, `l2 = e^{itB} V` with seeded Hermitian generators.
fn random_path(n: usize, seed: u64) -> impl Fn(f64) -> maslov::Result<(LagrangianFrame, LagrangianFrame)> + Send + Sync + Clone {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hermitian = |scale: f64| {
        let g = CMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        linalg::hermitian_part(&g) * Complex64::new(scale, 0.0)
    };
    let (a, b) = (hermitian(1.0), hermitian(2.0));
    let u = random_unitary(n, &mut rng);
    let v = random_unitary(n, &mut rng);
    move |t: f64| {
        let one = Complex64::new(t, 0.0);
        let l1 = frame_from_unitary(&(linalg::expm_i_hermitian(&(&a * one)) * &u))?;
        let l2 = frame_from_unitary(&(linalg::expm_i_hermitian(&(&b * one)) * &v))?;
        Ok((l1, l2))
    }
}

fn cmd_path(cfg: &RunConfig) -> Result<(), Failure> {
    let opts = cfg.maslov();
    let input: PathInput = read_json(&cfg.input)?;
    let path = match input {
        PathInput::Builtin {
            builtin,
            interval,
            n,
            samples,
        } => {
            let (a, b) = (interval[0].value()?, interval[1].value()?);
            let samples = samples.or(cfg.grid).unwrap_or(101);
            match builtin.as_str() {
                "arnold_normalization" => LagrangianPairPath::from_fn(a, b, samples, |t| Ok((line_frame(0.0), line_frame(t))))?,
                "random" => LagrangianPairPath::from_fn(a, b, samples, random_path(n.unwrap_or(2), cfg.seed))?,
                other => return Err(Failure::Error(format!("unknown built-in path {other:?}"))),
            }
        }
        PathInput::Sampled { grid, frames } => {
            let frames = frames
                .iter()
                .map(|s| Ok((frame(&s.l1, &opts.tol)?, frame(&s.l2, &opts.tol)?)))
                .collect::<Result<Vec<_>, Failure>>()?;
            LagrangianPairPath::from_samples(grid, frames)?
        }
    };
    let result = maslov_index_with(&path, &opts)?;
    info!("Maslov index {}", result.index);
    write(&cfg.output, &report::to_json_string(&result)?)?;
    if cfg.trace {
        if let Some(t) = &result.trace {
            write_trace(&trace_path(&cfg.output, None), t)?;
        }
    }
    Ok(())
}

fn cmd_interval(cfg: &RunConfig) -> Result<(), Failure> {
    let problem: IntervalProblem = read_json(&cfg.input)?;
    let defaults = IntervalOptions::default();
    let opts = IntervalOptions {
        s0: cfg.s0,
        lambda_inf: cfg.lambda_inf,
        steps: cfg.steps.unwrap_or(defaults.steps),
        grid: cfg.grid.unwrap_or(defaults.grid),
        maslov: cfg.maslov(),
        verify: cfg.verify,
        oracle_points: cfg.oracle_points.unwrap_or(defaults.oracle_points),
        ..defaults
    };
    let r = morse_index_interval(&problem, &opts)?;
    if !r.nondegenerate {
        warn!("the non-degeneracy assumption fails; the reported index may be off");
    }
    write(&cfg.output, &report::to_json_string(&r)?)?;
    if cfg.trace {
        for (name, t) in &r.traces {
            write_trace(&trace_path(&cfg.output, Some(name)), t)?;
        }
    }
    info!("Morse index {}", r.morse_index);
    if r.oracle_match == Some(false) {
        return Err(Failure::Mismatch);
    }
    Ok(())
}

fn cmd_line(cfg: &RunConfig) -> Result<(), Failure> {
    let problem: LineProblem = read_json(&cfg.input)?;
    let defaults = LineOptions::default();
    let opts = LineOptions {
        delta: cfg.delta,
        steps_per_unit: cfg.steps.unwrap_or(defaults.steps_per_unit),
        grid: cfg.grid.unwrap_or(defaults.grid),
        full_box: cfg.full_box,
        lambda_inf: cfg.lambda_inf,
        verify: cfg.verify,
        oracle_points: cfg.oracle_points.unwrap_or(defaults.oracle_points),
        maslov: cfg.maslov(),
        ..defaults
    };
    let r = morse_index_line(&problem, &opts)?;
    write(&cfg.output, &report::to_json_string(&r)?)?;
    if cfg.trace {
        if let Some(t) = &r.trace {
            write_trace(&trace_path(&cfg.output, Some("shelf")), t)?;
        }
    }
    info!("Morse index {}", r.morse_index);
    if r.oracle_match == Some(false) {
        return Err(Failure::Mismatch);
    }
    Ok(())
}

fn configure_threads() {
    let Ok(v) = std::env::var("MASLOV_THREADS") else {
        return;
    };
    match v.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                warn!("cannot size the thread pool: {e}");
            }
        }
        _ => warn!("ignoring MASLOV_THREADS={v:?}"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    configure_threads();
    let (cfg, run): (&RunConfig, fn(&RunConfig) -> Result<(), Failure>) = match &cli.command {
        Command::Path(c) => (c, cmd_path),
        Command::Interval(c) => (c, cmd_interval),
        Command::Line(c) => (c, cmd_line),
    };
    if let Err(e) = cfg.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_ERROR);
    }
    match run(cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
        Err(Failure::Ambiguous(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_AMBIGUOUS)
        }
        Err(Failure::Mismatch) => {
            eprintln!("error: the finite-difference oracle disagrees with the computed index");
            ExitCode::from(EXIT_MISMATCH)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn angles() {
        assert_eq!(parse_angle("-pi/4"), Some(-PI / 4.0));
        assert_eq!(parse_angle("pi"), Some(PI));
        assert_eq!(parse_angle("3*pi/2"), Some(1.5 * PI));
        assert_eq!(parse_angle("2pi"), Some(2.0 * PI));
        assert_eq!(parse_angle("0.25"), Some(0.25));
        assert_eq!(parse_angle("tau"), None);
    }
}
