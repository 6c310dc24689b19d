//! Maslov index for paths of Lagrangian-subspace pairs in `R^{2n}`, computed
//! as the spectral flow through `-1` of the unitary matrix
//!
//! ```text
//! W(t) = -(X1 + iY1)(X1 - iY1)^{-1} (X2 - iY2)(X2 + iY2)^{-1},
//! ```
//!
//! together with two applications: Morse indices of matrix Schrodinger
//! operators `-y'' + V(x) y` on `[0, 1]` with separated self-adjoint boundary
//! conditions, and on the real line. A finite-difference oracle provides an
//! independent eigenvalue count for both.

pub mod error;
pub mod interval;
pub mod lagrangian;
pub mod line;
pub mod linalg;
pub mod monotonicity;
pub mod ode;
pub mod oracle;
pub mod potential;
pub mod report;
pub mod spectral_flow;
pub mod unitary;

pub use error::{Error, Result};
pub use lagrangian::{LagrangianFrame, NormalizedFrame};
pub use spectral_flow::{LagrangianPairPath, MaslovResult, PhaseTrace};
pub use unitary::WTilde;

/// Numerical tolerances shared across the crate.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Absolute bound on `|X^tY - Y^tX|_2` for a frame to count as Lagrangian.
    pub frame: f64,
    /// Relative singular-value cutoff for rank decisions.
    pub rank: f64,
    /// Angular distance from `pi` within which an eigenvalue sits at `-1`.
    pub phase: f64,
    /// Definiteness threshold on extreme eigenvalues of Hermitian forms.
    pub definiteness: f64,
    /// Unitarity bound `|W* W - I|`.
    pub unitary: f64,
    /// Largest accepted condition number of a Gram matrix.
    pub cond_cap: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            frame: 1e-9,
            rank: 1e-10,
            phase: 1e-6,
            definiteness: 1e-8,
            unitary: 1e-10,
            cond_cap: 1e12,
        }
    }
}
