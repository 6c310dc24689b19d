#![allow(dead_code)]

use std::f64::consts::PI;

use maslov::lagrangian::{frame_from_unitary, random_unitary};
use maslov::linalg::{self, CMatrix, Complex64};
use maslov::monotonicity::FrameDerivative;
use maslov::spectral_flow::{circular_distance, wrap_phase};
use maslov::LagrangianFrame;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random Hermitian matrix with entries of size about `scale`.
pub fn random_hermitian(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    linalg::hermitian_part(&g) * Complex64::new(scale, 0.0)
}

/// The subspace `e^{itH} U` with its frame derivative, written in the
/// complex form `Z = X + iY`.
#[derive(Clone)]
pub struct Rotating {
    pub h: CMatrix,
    pub u: CMatrix,
}

impl Rotating {
    pub fn random(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> Self {
        Self {
            h: random_hermitian(n, scale, rng),
            u: random_unitary(n, rng),
        }
    }

    pub fn z(&self, t: f64) -> CMatrix {
        linalg::expm_i_hermitian(&(&self.h * Complex64::new(t, 0.0))) * &self.u
    }

    pub fn frame(&self, t: f64) -> LagrangianFrame {
        frame_from_unitary(&self.z(t)).unwrap()
    }

    pub fn velocity(&self, t: f64) -> FrameDerivative {
        let dz = &self.h * self.z(t) * Complex64::new(0.0, 1.0);
        FrameDerivative {
            dx: linalg::real_part(&dz),
            dy: linalg::imag_part(&dz),
        }
    }
}

/// Frame from a complex `Z = X + iY`, right-multiplied by `m`.
pub fn frame_of(z: &CMatrix, m: &DMatrix<f64>) -> LagrangianFrame {
    LagrangianFrame::new(linalg::real_part(z) * m, linalg::imag_part(z) * m).unwrap()
}

pub fn phases(values: &[Complex64]) -> Vec<f64> {
    values.iter().map(|z| wrap_phase(z.arg())).collect()
}

/// Largest distance in a greedy nearest-neighbour matching of two equal-size
/// multisets of phases; infinite when the sizes differ.
pub fn multiset_gap(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for &x in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, &y)| (j, circular_distance(x, y)))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap();
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

pub fn count_near(phases: &[f64], target: f64, tol: f64) -> usize {
    phases.iter().filter(|&&p| circular_distance(p, target) <= tol).count()
}

pub fn pi() -> f64 {
    PI
}

/// Smooth bump on `[a, b]` vanishing at both ends.
pub fn bump(t: f64, a: f64, b: f64) -> f64 {
    (PI * (t - a) / (b - a)).sin()
}

/// Endpoint-fixed homotopy of pair paths on `[a, b]`: `l1` fixed and
/// `l2(s, t) = e^{itH} e^{i s bump(t) G} U`.
#[derive(Clone)]
pub struct Homotopy {
    pub l1: LagrangianFrame,
    pub h: CMatrix,
    pub g: CMatrix,
    pub u: CMatrix,
    pub range: (f64, f64),
}

impl Homotopy {
    pub fn random(n: usize, seed: u64) -> Self {
        let mut r = rng(seed);
        let l1 = frame_from_unitary(&random_unitary(n, &mut r)).unwrap();
        Self {
            l1,
            h: random_hermitian(n, 1.5, &mut r),
            g: random_hermitian(n, 2.0, &mut r),
            u: random_unitary(n, &mut r),
            range: (-1.0, 1.0),
        }
    }

    pub fn at(&self, s: f64, t: f64) -> (LagrangianFrame, LagrangianFrame) {
        let (a, b) = self.range;
        let one = Complex64::new(1.0, 0.0);
        let e1 = linalg::expm_i_hermitian(&(&self.h * (one * t)));
        let e2 = linalg::expm_i_hermitian(&(&self.g * (one * (s * bump(t, a, b)))));
        (self.l1.clone(), frame_from_unitary(&(e1 * e2 * &self.u)).unwrap())
    }
}
