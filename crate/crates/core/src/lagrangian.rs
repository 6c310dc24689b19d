//! Frames for Lagrangian subspaces of `R^{2n}`.
//!
//! A frame is a `2n x n` matrix `(X; Y)` of full column rank with
//! `X^t Y = Y^t X`. Two frames span the same subspace iff they differ by right
//! multiplication with an invertible `n x n` matrix; everything here that is a
//! property of the subspace is invariant under that change.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, Complex64};
use crate::Tolerances;

/// Rank and Lagrangian-property checked frame `(X; Y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FrameJson", into = "FrameJson")]
pub struct LagrangianFrame {
    x: DMatrix<f64>,
    y: DMatrix<f64>,
}

/// A frame with `X^t X + Y^t Y = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedFrame(LagrangianFrame);

/// `tau = 2P - I` for the orthogonal projection `P` onto a Lagrangian subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugationOperator {
    tau: DMatrix<f64>,
}

impl LagrangianFrame {
    /// Validates `(X; Y)` with the default tolerances.
    pub fn new(x: DMatrix<f64>, y: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerances(x, y, &Tolerances::default())
    }

    pub fn with_tolerances(x: DMatrix<f64>, y: DMatrix<f64>, tol: &Tolerances) -> Result<Self> {
        let n = x.nrows();
        if n == 0 {
            return Err(Error::InvalidInput("frame dimension must be positive".into()));
        }
        for (name, m) in [("X", &x), ("Y", &y)] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::InvalidInput(format!(
                    "{name} block is {}x{}, expected {n}x{n}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} block has non-finite entries")));
            }
        }
        let mut raw = DMatrix::zeros(2 * n, n);
        raw.view_mut((0, 0), (n, n)).copy_from(&x);
        raw.view_mut((n, 0), (n, n)).copy_from(&y);
        validate_frame(&raw, tol)
    }

    /// Builds the frame without checks. Callers guarantee the invariants.
    pub(crate) fn from_parts_unchecked(x: DMatrix<f64>, y: DMatrix<f64>) -> Self {
        Self { x, y }
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    /// The `2n x n` matrix `(X; Y)`.
    pub fn stacked(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut s = DMatrix::zeros(2 * n, n);
        s.view_mut((0, 0), (n, n)).copy_from(&self.x);
        s.view_mut((n, 0), (n, n)).copy_from(&self.y);
        s
    }

    /// `X^t Y - Y^t X`; zero for a Lagrangian frame.
    pub fn skew_residual(&self) -> DMatrix<f64> {
        self.x.transpose() * &self.y - self.y.transpose() * &self.x
    }

    /// `X^t X + Y^t Y`.
    pub fn gram(&self) -> DMatrix<f64> {
        self.x.transpose() * &self.x + self.y.transpose() * &self.y
    }

    /// `X + iY`.
    pub fn complex_plus(&self) -> CMatrix {
        linalg::complex_from_parts(&self.x, &self.y)
    }

    /// `X - iY`.
    pub fn complex_minus(&self) -> CMatrix {
        linalg::complex_from_parts(&self.x, &(-&self.y))
    }

    /// Right multiplication `(X M; Y M)`; spans the same subspace when `M` is
    /// invertible.
    pub fn right_mul(&self, m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != self.n() || m.ncols() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: m.nrows(),
            });
        }
        Self::new(&self.x * m, &self.y * m)
    }

    pub fn normalize(&self) -> Result<NormalizedFrame> {
        normalize_frame(self)
    }

    pub fn projection(&self) -> Result<DMatrix<f64>> {
        projection(self)
    }
}

impl NormalizedFrame {
    pub fn frame(&self) -> &LagrangianFrame {
        &self.0
    }

    pub fn into_frame(self) -> LagrangianFrame {
        self.0
    }

    /// For a normalised frame `X + iY` is unitary.
    pub fn unitary(&self) -> CMatrix {
        self.0.complex_plus()
    }
}

impl std::ops::Deref for NormalizedFrame {
    type Target = LagrangianFrame;

    fn deref(&self) -> &LagrangianFrame {
        &self.0
    }
}

impl ConjugationOperator {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.tau
    }

    /// `U^T := tau U^t tau`.
    pub fn transpose_of(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        &self.tau * u.transpose() * &self.tau
    }
}

/// Checks rank and the Lagrangian property of a raw `2n x n` matrix.
///
/// Rank is judged by the smallest singular value against
/// `tol.rank * sigma_max`; the Lagrangian test is absolute, `|X^tY - Y^tX|_2 <= tol.frame`.
pub fn validate_frame(raw: &DMatrix<f64>, tol: &Tolerances) -> Result<LagrangianFrame> {
    let (rows, n) = raw.shape();
    if n == 0 || rows != 2 * n {
        return Err(Error::InvalidInput(format!(
            "frame must be 2n x n, got {rows} x {n}"
        )));
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("frame has non-finite entries".into()));
    }
    let sv = linalg::singular_values(raw);
    let smax = sv[0];
    let smin = sv[n - 1];
    if !(smin > tol.rank * smax) {
        return Err(Error::RankDeficient { sigma_min: smin });
    }
    let frame = LagrangianFrame::from_parts_unchecked(
        raw.rows(0, n).into_owned(),
        raw.rows(n, n).into_owned(),
    );
    let residual = linalg::op_norm(&frame.skew_residual());
    if residual > tol.frame {
        return Err(Error::NotLagrangian { residual });
    }
    Ok(frame)
}

/// Right-multiplies by `M = (X^tX + Y^tY)^{-1/2}`.
pub fn normalize_frame(f: &LagrangianFrame) -> Result<NormalizedFrame> {
    normalize_with_cap(f, Tolerances::default().cond_cap)
}

pub(crate) fn normalize_with_cap(f: &LagrangianFrame, cond_cap: f64) -> Result<NormalizedFrame> {
    let m = linalg::spd_inv_sqrt(&f.gram(), cond_cap)?;
    Ok(NormalizedFrame(LagrangianFrame::from_parts_unchecked(
        f.x() * &m,
        f.y() * &m,
    )))
}

/// Orthogonal projection `X (X^t X)^{-1} X^t` onto the subspace.
pub fn projection(f: &LagrangianFrame) -> Result<DMatrix<f64>> {
    let nf = normalize_frame(f)?;
    let s = nf.stacked();
    Ok(linalg::symmetrize(&(&s * s.transpose())))
}

/// `d(l1, l2) = |P1 - P2|_2`.
pub fn distance(l1: &LagrangianFrame, l2: &LagrangianFrame) -> Result<f64> {
    check_same_n(l1, l2)?;
    Ok(linalg::op_norm(&(projection(l1)? - projection(l2)?)))
}

/// Pair metric `rho = (d(l1, m1)^2 + d(l2, m2)^2)^{1/2}`.
pub fn pair_distance(
    a: (&LagrangianFrame, &LagrangianFrame),
    b: (&LagrangianFrame, &LagrangianFrame),
) -> Result<f64> {
    let d1 = distance(a.0, b.0)?;
    let d2 = distance(a.1, b.1)?;
    Ok(d1.hypot(d2))
}

pub fn conjugation_tau(f: &LagrangianFrame) -> Result<ConjugationOperator> {
    let p = projection(f)?;
    let n2 = p.nrows();
    Ok(ConjugationOperator {
        tau: p * 2.0 - DMatrix::identity(n2, n2),
    })
}

/// The standard complex structure `J = [[0, -I], [I, 0]]`.
pub fn symplectic_j(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = -1.0;
        j[(n + i, i)] = 1.0;
    }
    j
}

/// The frame `(Re U; Im U)` of a unitary `U`; Lagrangian and normalised.
pub fn frame_from_unitary(u: &CMatrix) -> Result<LagrangianFrame> {
    let x = linalg::real_part(u);
    let y = linalg::imag_part(u);
    LagrangianFrame::new(x, y)
}

/// Haar-distributed random unitary, via QR of a complex Gaussian matrix with
/// the phases of `R`'s diagonal folded back into `Q`.
pub fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
    });
    let qr = g.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Deterministic random Lagrangian frame.
pub fn random_lagrangian(n: usize, seed: u64) -> LagrangianFrame {
    assert!(n >= 1, "dimension must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = random_unitary(n, &mut rng);
    frame_from_unitary(&u).expect("unitary blocks always form a Lagrangian frame")
}

/// Random invertible matrix with singular values in `[0.5, 2]`.
pub fn random_frame_change(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = random_orthogonal(n, rng);
    let b = random_orthogonal(n, rng);
    let d = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            let u: f64 = rand::Rng::random_range(rng, -1.0..1.0);
            2f64.powf(u)
        } else {
            0.0
        }
    });
    a * d * b
}

fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    g.qr().q()
}

/// Random pair of Lagrangian subspaces whose intersection has dimension
/// exactly `k`, each given by a frame scrambled with a random frame change.
///
/// With `l1` given by the unitary `U`, `l2` uses `U diag(e^{i phi_j})` with
/// `phi_j = 0` for `j < k` and `phi_j` in `[0.3, pi - 0.3]` otherwise, so the
/// non-shared directions stay well separated.
pub fn random_pair_with_intersection(n: usize, k: usize, seed: u64) -> (LagrangianFrame, LagrangianFrame) {
    assert!(k <= n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = random_unitary(n, &mut rng);
    let mut v = u.clone();
    for j in k..n {
        let phi: f64 = rand::Rng::random_range(&mut rng, 0.3..(std::f64::consts::PI - 0.3));
        let z = Complex64::from_polar(1.0, phi);
        for i in 0..n {
            v[(i, j)] *= z;
        }
    }
    let l1 = frame_from_unitary(&u).expect("unitary frame");
    let l2 = frame_from_unitary(&v).expect("unitary frame");
    let m1 = random_frame_change(n, &mut rng);
    let m2 = random_frame_change(n, &mut rng);
    (
        LagrangianFrame::from_parts_unchecked(l1.x() * &m1, l1.y() * &m1),
        LagrangianFrame::from_parts_unchecked(l2.x() * &m2, l2.y() * &m2),
    )
}

pub(crate) fn check_same_n(l1: &LagrangianFrame, l2: &LagrangianFrame) -> Result<()> {
    if l1.n() != l2.n() {
        return Err(Error::DimensionMismatch {
            expected: l1.n(),
            found: l2.n(),
        });
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct FrameJson {
    n: usize,
    #[serde(rename = "X")]
    x: Vec<Vec<f64>>,
    #[serde(rename = "Y")]
    y: Vec<Vec<f64>>,
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>], n: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidInput(format!("{what} must be a {n}x{n} matrix")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub(crate) fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

impl TryFrom<FrameJson> for LagrangianFrame {
    type Error = Error;

    fn try_from(j: FrameJson) -> Result<Self> {
        let x = matrix_from_rows(&j.x, j.n, "X")?;
        let y = matrix_from_rows(&j.y, j.n, "Y")?;
        LagrangianFrame::new(x, y)
    }
}

impl From<LagrangianFrame> for FrameJson {
    fn from(f: LagrangianFrame) -> Self {
        FrameJson {
            n: f.n(),
            x: matrix_to_rows(&f.x),
            y: matrix_to_rows(&f.y),
        }
    }
}
