//! Seeded random instances: SPD matrices with a controlled spectrum,
//! rotations, well-conditioned invertible maps and Gaussian feature blocks.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::spd::SymMatrix;

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian with the sign of R's diagonal folded in).
pub fn rotation(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let qr = gaussian(rng, n, n).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// SPD matrix `Q diag(λ) Q^T` with eigenvalues drawn log-uniformly from `[lo, hi]`.
pub fn spd(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> SymMatrix {
    let q = rotation(rng, n);
    let (llo, lhi) = (lo.ln(), hi.ln());
    let values: Vec<f64> = (0..n).map(|_| rng.random_range(llo..=lhi).exp()).collect();
    SymMatrix::from_spectrum(&q, &values)
}

/// Invertible matrix `U diag(s) V^T` with singular values in `[lo, hi]`.
pub fn invertible(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let u = rotation(rng, n);
    let v = rotation(rng, n);
    let mut us = u;
    for j in 0..n {
        let s = rng.random_range(lo..=hi);
        us.column_mut(j).scale_mut(s);
    }
    us * v.transpose()
}
