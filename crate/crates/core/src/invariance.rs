//! Property suites over random instances: distance invariances, the
//! reduced-space isometry and exactness of the Nyström map.

use std::fmt;

use nalgebra::DMatrix;
use rand::Rng;

use crate::distance::{dist_sq, grad_dist_sq, DistanceKind};
use crate::error::{Error, Result};
use crate::nystrom::{isometric_project, nystrom_map, Kernel};
use crate::random::{self, SeededRng};
use crate::scatter::mean_and_scatter;
use crate::spd::{regularize, spd_fn, SpectralFn, SymMatrix};

/// Outcome of one property over many random instances.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub trials: usize,
    /// Largest error seen (relative or absolute, per check).
    pub worst: f64,
    pub tolerance: f64,
    pub failure: Option<String>,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.failure.is_none() && self.worst <= self.tolerance
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        write!(
            f,
            "{status} {} trials={} worst={:.3e} tol={:.0e}",
            self.name, self.trials, self.worst, self.tolerance
        )?;
        if let Some(msg) = &self.failure {
            write!(f, " error: {msg}")?;
        }
        Ok(())
    }
}

/// `|a − b| / max(|a|, |b|)`, zero when both vanish.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn run(name: String, trials: usize, tolerance: f64, mut trial: impl FnMut() -> Result<f64>) -> Check {
    let mut worst = 0.0f64;
    let mut failure = None;
    for t in 0..trials {
        match trial() {
            Ok(e) if e.is_nan() => {
                failure = Some(format!("trial {t}: NaN error"));
                break;
            }
            Ok(e) => worst = worst.max(e),
            Err(e) => {
                failure = Some(format!("trial {t}: {e}"));
                break;
            }
        }
    }
    Check {
        name,
        trials,
        worst,
        tolerance,
        failure,
    }
}

const SPD_LO: f64 = 0.1;
const SPD_HI: f64 = 10.0;
const MAX_SIDE: usize = 10;

fn spd_pair(rng: &mut SeededRng) -> (SymMatrix, SymMatrix) {
    let n = rng.random_range(1..=MAX_SIDE);
    (random::spd(rng, n, SPD_LO, SPD_HI), random::spd(rng, n, SPD_LO, SPD_HI))
}

pub fn rotation_invariance(kind: DistanceKind, trials: usize, rng: &mut SeededRng) -> Check {
    run(format!("rotation/{kind}"), trials, 1e-8, || {
        let (a, b) = spd_pair(rng);
        let r = random::rotation(rng, a.side());
        Ok(rel_diff(dist_sq(kind, &a.congruence(&r)?, &b.congruence(&r)?)?, dist_sq(kind, &a, &b)?))
    })
}

pub fn affine_invariance(kind: DistanceKind, trials: usize, rng: &mut SeededRng) -> Check {
    run(format!("affine/{kind}"), trials, 1e-7, || {
        let (a, b) = spd_pair(rng);
        let m = random::invertible(rng, a.side(), 0.5, 2.0);
        Ok(rel_diff(dist_sq(kind, &a.congruence(&m)?, &b.congruence(&m)?)?, dist_sq(kind, &a, &b)?))
    })
}

pub fn inversion_invariance(kind: DistanceKind, trials: usize, rng: &mut SeededRng) -> Check {
    run(format!("inversion/{kind}"), trials, 1e-7, || {
        let (a, b) = spd_pair(rng);
        let (ai, bi) = (spd_fn(&a, SpectralFn::Inv)?, spd_fn(&b, SpectralFn::Inv)?);
        Ok(rel_diff(dist_sq(kind, &ai, &bi)?, dist_sq(kind, &a, &b)?))
    })
}

/// Absolute difference between `d²(a, b)` and `d²(b, a)`.
pub fn value_symmetry(kind: DistanceKind, trials: usize, rng: &mut SeededRng) -> Check {
    run(format!("symmetry/{kind}"), trials, 1e-10, || {
        let (a, b) = spd_pair(rng);
        Ok((dist_sq(kind, &a, &b)? - dist_sq(kind, &b, &a)?).abs())
    })
}

/// Largest of `d²(s, s)` and every gradient entry at `(s, s)`.
pub fn coincidence(kind: DistanceKind, trials: usize, rng: &mut SeededRng) -> Check {
    run(format!("coincidence/{kind}"), trials, 1e-10, || {
        let n = rng.random_range(1..=MAX_SIDE);
        let s = random::spd(rng, n, SPD_LO, SPD_HI);
        let (ga, gb) = grad_dist_sq(kind, &s, &s)?;
        Ok(dist_sq(kind, &s, &s)?
            .abs()
            .max(ga.as_matrix().amax())
            .max(gb.as_matrix().amax()))
    })
}

/// Largest `d(a, c) − d(a, b) − d(b, c)` for the AIRM geodesic distance.
pub fn airm_triangle(trials: usize, rng: &mut SeededRng) -> Check {
    run("triangle/airm".into(), trials, 1e-9, || {
        let n = rng.random_range(1..=6);
        let [a, b, c] = [0; 3].map(|_| random::spd(rng, n, SPD_LO, SPD_HI));
        let d = |x: &SymMatrix, y: &SymMatrix| dist_sq(DistanceKind::Airm, x, y).map(f64::sqrt);
        Ok((d(&a, &c)? - d(&a, &b)? - d(&b, &c)?).max(0.0))
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsometryShape {
    pub dim: usize,
    pub source: usize,
    pub target: usize,
    pub eps: f64,
}

impl Default for IsometryShape {
    fn default() -> Self {
        IsometryShape {
            dim: 512,
            source: 12,
            target: 8,
            eps: 1e-6,
        }
    }
}

/// `d²(Σ(Φ)+εI, Σ(Φ*)+εI)` in ambient and in reduced space.
pub fn ambient_and_reduced(kind: DistanceKind, phi: &DMatrix<f64>, phi_star: &DMatrix<f64>, eps: f64) -> Result<(f64, f64)> {
    let ambient = dist_sq(
        kind,
        &regularize(&mean_and_scatter(phi)?.scatter, eps)?,
        &regularize(&mean_and_scatter(phi_star)?.scatter, eps)?,
    )?;
    let r = isometric_project(phi, phi_star)?;
    let reduced = dist_sq(
        kind,
        &regularize(&mean_and_scatter(&r.source)?.scatter, eps)?,
        &regularize(&mean_and_scatter(&r.target)?.scatter, eps)?,
    )?;
    Ok((ambient, reduced))
}

/// Relative gap between ambient and reduced distances, all kinds per instance.
pub fn isometry(kinds: &[DistanceKind], trials: usize, shape: IsometryShape, rng: &mut SeededRng) -> Vec<Check> {
    let mut worst = vec![0.0f64; kinds.len()];
    let mut failure = None;
    for t in 0..trials {
        let phi = random::gaussian(rng, shape.dim, shape.source);
        let phi_star = random::gaussian(rng, shape.dim, shape.target);
        for (i, &k) in kinds.iter().enumerate() {
            match ambient_and_reduced(k, &phi, &phi_star, shape.eps) {
                Ok((a, r)) => worst[i] = worst[i].max(rel_diff(a, r)),
                Err(e) => failure = Some((i, format!("trial {t}: {e}"))),
            }
        }
        if failure.is_some() {
            break;
        }
    }
    kinds
        .iter()
        .enumerate()
        .map(|(i, k)| Check {
            name: format!("isometry/{k}"),
            trials,
            worst: worst[i],
            tolerance: 1e-7,
            failure: failure.as_ref().filter(|(j, _)| *j == i).map(|(_, m)| m.clone()),
        })
        .collect()
}

/// Max-abs error of `Φ̃^T Φ̃` against `X^T X` when every column is a pivot.
pub fn nystrom_exactness(trials: usize, rng: &mut SeededRng) -> Check {
    run("nystrom-exactness".into(), trials, 1e-9, || {
        let n = rng.random_range(2..=24);
        let d = rng.random_range(n..=64);
        let x = random::gaussian(rng, d, n);
        let mapped = nystrom_map(&x, &x, Kernel::Linear)?;
        let gram = x.tr_mul(&x);
        Ok((mapped.tr_mul(&mapped) - gram).amax())
    })
}

#[derive(Debug, Clone)]
pub struct InvarianceOptions {
    pub kinds: Vec<DistanceKind>,
    pub trials: usize,
    pub triangle_trials: usize,
    pub seed: u64,
    pub isometry: Option<IsometryShape>,
}

impl Default for InvarianceOptions {
    fn default() -> Self {
        InvarianceOptions {
            kinds: DistanceKind::ALL.to_vec(),
            trials: 100,
            triangle_trials: 1000,
            seed: 0,
            isometry: Some(IsometryShape::default()),
        }
    }
}

/// Every property check; affine and inversion only for the kinds that have them.
pub fn run_invariance(opts: &InvarianceOptions) -> Result<Vec<Check>> {
    if opts.trials == 0 {
        return Err(Error::param("trials must be at least 1"));
    }
    let mut rng = random::rng(opts.seed);
    let mut out = Vec::new();
    for &k in &opts.kinds {
        out.push(value_symmetry(k, opts.trials, &mut rng));
        out.push(coincidence(k, opts.trials, &mut rng));
        out.push(rotation_invariance(k, opts.trials, &mut rng));
        if k != DistanceKind::Frobenius {
            out.push(affine_invariance(k, opts.trials, &mut rng));
            out.push(inversion_invariance(k, opts.trials, &mut rng));
        }
    }
    if opts.kinds.contains(&DistanceKind::Airm) && opts.triangle_trials > 0 {
        out.push(airm_triangle(opts.triangle_trials, &mut rng));
    }
    out.push(nystrom_exactness(opts.trials, &mut rng));
    if let Some(shape) = opts.isometry {
        out.extend(isometry(&opts.kinds, opts.trials, shape, &mut rng));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rel_diff_cases() {
        assert_eq!(rel_diff(0.0, 0.0), 0.0);
        assert_eq!(rel_diff(1.0, 1.0), 0.0);
        assert!((rel_diff(2.0, 1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn small_suite_passes() {
        let opts = InvarianceOptions {
            trials: 5,
            triangle_trials: 20,
            isometry: Some(IsometryShape {
                dim: 40,
                source: 5,
                target: 3,
                eps: 1e-6,
            }),
            ..Default::default()
        };
        let checks = run_invariance(&opts).unwrap();
        for c in &checks {
            assert!(c.passed(), "{c}");
        }
        // 3 kinds × 3 shared checks + 2 kinds × 2 + triangle + Nyström + 3 isometry.
        assert_eq!(checks.len(), 9 + 4 + 1 + 1 + 3);
    }

    #[test]
    fn frobenius_is_not_affine_invariant() {
        let mut rng = random::rng(4);
        let c = affine_invariance(DistanceKind::Frobenius, 5, &mut rng);
        assert!(!c.passed());
    }

    #[test]
    fn failed_trial_is_reported() {
        let c = run("x".into(), 3, 1.0, || Err(Error::param("boom")));
        assert!(!c.passed());
        assert!(c.to_string().contains("boom"));
    }
}
