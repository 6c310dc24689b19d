//! Symmetric matrix potentials `V(x)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lagrangian::{matrix_from_rows, matrix_to_rows};
use crate::linalg;

/// A real number or a square matrix in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixValue {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

impl MatrixValue {
    fn dim(&self) -> Option<usize> {
        match self {
            MatrixValue::Scalar(_) => None,
            MatrixValue::Matrix(rows) => Some(rows.len()),
        }
    }

    fn to_matrix(&self, n: usize) -> Result<DMatrix<f64>> {
        match self {
            MatrixValue::Scalar(v) => Ok(DMatrix::identity(n, n) * *v),
            MatrixValue::Matrix(rows) => matrix_from_rows(rows, n, "potential value"),
        }
    }
}

impl From<&DMatrix<f64>> for MatrixValue {
    fn from(m: &DMatrix<f64>) -> Self {
        MatrixValue::Matrix(matrix_to_rows(m))
    }
}

/// JSON form of a potential, tagged by `"type"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Constant {
        value: MatrixValue,
    },
    /// `sum_k coefficients[k] x^k`.
    Poly {
        coefficients: Vec<MatrixValue>,
    },
    /// Natural cubic spline through the samples, constant outside.
    Table {
        x: Vec<f64>,
        values: Vec<MatrixValue>,
    },
    /// `m2 - a sech^2((x - center) / width)`.
    PoschlTeller {
        m2: f64,
        a: f64,
        #[serde(default = "one")]
        width: f64,
        #[serde(default)]
        center: f64,
    },
    /// `m2 - depth exp(-((x - center) / width)^2)`.
    Gaussian {
        m2: f64,
        depth: f64,
        #[serde(default = "one")]
        width: f64,
        #[serde(default)]
        center: f64,
    },
    /// Block-diagonal combination of scalar potentials.
    Diagonal {
        entries: Vec<PotentialSpec>,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Constant(DMatrix<f64>),
    Poly(Vec<DMatrix<f64>>),
    Table(Spline),
    PoschlTeller { m2: f64, a: f64, width: f64, center: f64 },
    Gaussian { m2: f64, depth: f64, width: f64, center: f64 },
    Diagonal(Vec<Potential>),
}

/// A potential ready for evaluation, always returning a symmetric `n x n`
/// matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PotentialSpec", into = "PotentialSpec")]
pub struct Potential {
    spec: PotentialSpec,
    kind: Kind,
    /// `None` for scalar families, which act as multiples of the identity.
    dim: Option<usize>,
}

impl TryFrom<PotentialSpec> for Potential {
    type Error = Error;

    fn try_from(spec: PotentialSpec) -> Result<Self> {
        Potential::from_spec(spec)
    }
}

impl From<Potential> for PotentialSpec {
    fn from(p: Potential) -> Self {
        p.spec
    }
}

fn common_dim(values: &[MatrixValue]) -> Result<Option<usize>> {
    let mut dim = None;
    for v in values {
        if let Some(d) = v.dim() {
            if dim.is_some_and(|e| e != d) {
                return Err(Error::InvalidInput("potential matrices have inconsistent sizes".into()));
            }
            dim = Some(d);
        }
    }
    if dim == Some(0) {
        return Err(Error::InvalidInput("potential matrices must be non-empty".into()));
    }
    Ok(dim)
}

fn finite(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidInput(format!("{name} must be finite")))
    }
}

impl Potential {
    pub fn from_spec(spec: PotentialSpec) -> Result<Self> {
        let (kind, dim) = match &spec {
            PotentialSpec::Constant { value } => {
                let d = value.dim().unwrap_or(1);
                (Kind::Constant(value.to_matrix(d)?), value.dim())
            }
            PotentialSpec::Poly { coefficients } => {
                if coefficients.is_empty() {
                    return Err(Error::InvalidInput("poly potential needs coefficients".into()));
                }
                let dim = common_dim(coefficients)?;
                let d = dim.unwrap_or(1);
                let c = coefficients.iter().map(|v| v.to_matrix(d)).collect::<Result<_>>()?;
                (Kind::Poly(c), dim)
            }
            PotentialSpec::Table { x, values } => {
                let dim = common_dim(values)?;
                let d = dim.unwrap_or(1);
                let m = values.iter().map(|v| v.to_matrix(d)).collect::<Result<Vec<_>>>()?;
                (Kind::Table(Spline::new(x.clone(), m)?), dim)
            }
            PotentialSpec::PoschlTeller { m2, a, width, center } => {
                if !(*width > 0.0) {
                    return Err(Error::InvalidInput("width must be positive".into()));
                }
                (
                    Kind::PoschlTeller {
                        m2: finite("m2", *m2)?,
                        a: finite("a", *a)?,
                        width: *width,
                        center: finite("center", *center)?,
                    },
                    None,
                )
            }
            PotentialSpec::Gaussian { m2, depth, width, center } => {
                if !(*width > 0.0) {
                    return Err(Error::InvalidInput("width must be positive".into()));
                }
                (
                    Kind::Gaussian {
                        m2: finite("m2", *m2)?,
                        depth: finite("depth", *depth)?,
                        width: *width,
                        center: finite("center", *center)?,
                    },
                    None,
                )
            }
            PotentialSpec::Diagonal { entries } => {
                if entries.is_empty() {
                    return Err(Error::InvalidInput("diagonal potential needs entries".into()));
                }
                let parts = entries
                    .iter()
                    .map(|e| Potential::from_spec(e.clone()))
                    .collect::<Result<Vec<_>>>()?;
                if parts.iter().any(|p| p.dim.is_some_and(|d| d != 1)) {
                    return Err(Error::InvalidInput("diagonal entries must be scalar potentials".into()));
                }
                let d = parts.len();
                (Kind::Diagonal(parts), Some(d))
            }
        };
        if let Kind::Constant(m) | Kind::Table(Spline { first: m, .. }) = &kind {
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("potential has non-finite entries".into()));
            }
        }
        Ok(Self { spec, kind, dim })
    }

    pub fn constant(value: DMatrix<f64>) -> Self {
        Self::from_spec(PotentialSpec::Constant {
            value: MatrixValue::from(&value),
        })
        .expect("finite constant matrix")
    }

    pub fn scalar(value: f64) -> Self {
        Self::from_spec(PotentialSpec::Constant {
            value: MatrixValue::Scalar(value),
        })
        .expect("finite constant")
    }

    pub fn poly(coefficients: Vec<DMatrix<f64>>) -> Result<Self> {
        Self::from_spec(PotentialSpec::Poly {
            coefficients: coefficients.iter().map(MatrixValue::from).collect(),
        })
    }

    pub fn poschl_teller(m2: f64, a: f64) -> Self {
        Self::from_spec(PotentialSpec::PoschlTeller {
            m2,
            a,
            width: 1.0,
            center: 0.0,
        })
        .expect("finite parameters")
    }

    pub fn gaussian(m2: f64, depth: f64, width: f64) -> Result<Self> {
        Self::from_spec(PotentialSpec::Gaussian {
            m2,
            depth,
            width,
            center: 0.0,
        })
    }

    pub fn diagonal(entries: Vec<Potential>) -> Result<Self> {
        Self::from_spec(PotentialSpec::Diagonal {
            entries: entries.into_iter().map(|p| p.spec).collect(),
        })
    }

    pub fn spec(&self) -> &PotentialSpec {
        &self.spec
    }

    /// Intrinsic matrix size, or `None` if the potential is scalar.
    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    /// Checks that the potential can act on `C^n`; scalar potentials always can.
    pub fn check_dim(&self, n: usize) -> Result<()> {
        match self.dim {
            Some(d) if d != n => Err(Error::DimensionMismatch { expected: n, found: d }),
            _ => Ok(()),
        }
    }

    fn raw(&self, x: f64, n: usize) -> DMatrix<f64> {
        match &self.kind {
            Kind::Constant(m) => broadcast(m, n),
            Kind::Poly(c) => {
                let mut acc = DMatrix::zeros(c[0].nrows(), c[0].ncols());
                for m in c.iter().rev() {
                    acc = acc * x + m;
                }
                broadcast(&acc, n)
            }
            Kind::Table(s) => broadcast(&s.eval(x), n),
            Kind::PoschlTeller { m2, a, width, center } => {
                let s = 1.0 / ((x - center) / width).cosh();
                DMatrix::identity(n, n) * (m2 - a * s * s)
            }
            Kind::Gaussian { m2, depth, width, center } => {
                let z = (x - center) / width;
                DMatrix::identity(n, n) * (m2 - depth * (-z * z).exp())
            }
            Kind::Diagonal(parts) => {
                let mut m = DMatrix::zeros(parts.len(), parts.len());
                for (i, p) in parts.iter().enumerate() {
                    m[(i, i)] = p.raw(x, 1)[(0, 0)];
                }
                m
            }
        }
    }

    /// `V(x)` as an `n x n` matrix, symmetrised.
    pub fn eval(&self, x: f64, n: usize) -> DMatrix<f64> {
        linalg::symmetrize(&self.raw(x, n))
    }

    /// Largest asymmetry `|V - V^t|_2` over `samples` points of `[a, b]`.
    pub fn asymmetry(&self, n: usize, a: f64, b: f64, samples: usize) -> f64 {
        sample_points(a, b, samples)
            .map(|x| {
                let m = self.raw(x, n);
                linalg::op_norm(&(&m - m.transpose()))
            })
            .fold(0.0, f64::max)
    }

    /// Logs a warning if the potential is visibly asymmetric on `[a, b]`.
    pub fn warn_if_asymmetric(&self, n: usize, a: f64, b: f64) -> f64 {
        let asym = self.asymmetry(n, a, b, 201);
        if asym > 1e-10 {
            log::warn!("potential is not symmetric (|V - V^t| up to {asym:.3e}); using (V + V^t)/2");
        }
        asym
    }

    /// Sampled `sup_x |V(x)|_2` over `[a, b]`.
    pub fn sup_norm(&self, n: usize, a: f64, b: f64, samples: usize) -> f64 {
        sample_points(a, b, samples)
            .map(|x| linalg::op_norm(&self.eval(x, n)))
            .fold(0.0, f64::max)
    }

    /// Limits `(V_-, V_+)` as `x -> -inf` and `x -> +inf`, when they exist.
    pub fn limits(&self, n: usize) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        match &self.kind {
            Kind::Constant(m) => {
                let v = linalg::symmetrize(&broadcast(m, n));
                Some((v.clone(), v))
            }
            Kind::Poly(c) => {
                if c.iter().skip(1).all(|m| m.iter().all(|v| *v == 0.0)) {
                    let v = linalg::symmetrize(&broadcast(&c[0], n));
                    Some((v.clone(), v))
                } else {
                    None
                }
            }
            Kind::Table(s) => Some((
                linalg::symmetrize(&broadcast(&s.first, n)),
                linalg::symmetrize(&broadcast(&s.last, n)),
            )),
            Kind::PoschlTeller { m2, .. } | Kind::Gaussian { m2, .. } => {
                let v = DMatrix::identity(n, n) * *m2;
                Some((v.clone(), v))
            }
            Kind::Diagonal(parts) => {
                let mut lo = DMatrix::zeros(parts.len(), parts.len());
                let mut hi = lo.clone();
                for (i, p) in parts.iter().enumerate() {
                    let (a, b) = p.limits(1)?;
                    lo[(i, i)] = a[(0, 0)];
                    hi[(i, i)] = b[(0, 0)];
                }
                Some((lo, hi))
            }
        }
    }
}

fn broadcast(m: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    if m.nrows() == n {
        m.clone()
    } else {
        DMatrix::identity(n, n) * m[(0, 0)]
    }
}

fn sample_points(a: f64, b: f64, samples: usize) -> impl Iterator<Item = f64> {
    let samples = samples.max(2);
    (0..samples).map(move |i| a + (b - a) * i as f64 / (samples - 1) as f64)
}

/// Entrywise natural cubic spline of matrix samples.
#[derive(Debug, Clone, PartialEq)]
struct Spline {
    x: Vec<f64>,
    values: Vec<DMatrix<f64>>,
    second: Vec<DMatrix<f64>>,
    first: DMatrix<f64>,
    last: DMatrix<f64>,
}

impl Spline {
    fn new(x: Vec<f64>, values: Vec<DMatrix<f64>>) -> Result<Self> {
        let m = x.len();
        if m < 2 || values.len() != m {
            return Err(Error::InvalidInput("table needs at least two points and one value per point".into()));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("table abscissae must be finite and strictly increasing".into()));
        }
        let (r, c) = values[0].shape();
        let zero = DMatrix::zeros(r, c);
        // Thomas algorithm for the interior second derivatives
        let mut second = vec![zero.clone(); m];
        if m > 2 {
            let mut diag = vec![0.0; m];
            let mut rhs = vec![zero.clone(); m];
            for i in 1..m - 1 {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                diag[i] = 2.0 * (h0 + h1);
                rhs[i] = (&values[i + 1] - &values[i]) * (6.0 / h1) - (&values[i] - &values[i - 1]) * (6.0 / h0);
            }
            for i in 2..m - 1 {
                let h = x[i] - x[i - 1];
                let w = h / diag[i - 1];
                diag[i] -= w * h;
                let prev = rhs[i - 1].clone();
                rhs[i] -= prev * w;
            }
            for i in (1..m - 1).rev() {
                let h1 = x[i + 1] - x[i];
                let next = if i + 1 < m - 1 { second[i + 1].clone() * h1 } else { zero.clone() };
                second[i] = (&rhs[i] - next) / diag[i];
            }
        }
        Ok(Self {
            first: values[0].clone(),
            last: values[m - 1].clone(),
            x,
            values,
            second,
        })
    }

    fn eval(&self, t: f64) -> DMatrix<f64> {
        let m = self.x.len();
        if t <= self.x[0] {
            return self.first.clone();
        }
        if t >= self.x[m - 1] {
            return self.last.clone();
        }
        let i = self.x.partition_point(|&v| v <= t).saturating_sub(1).min(m - 2);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        &self.values[i] * a
            + &self.values[i + 1] * b
            + (&self.second[i] * (a * a * a - a) + &self.second[i + 1] * (b * b * b - b)) * (h * h / 6.0)
    }
}
