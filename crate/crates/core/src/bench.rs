//! Wall-clock comparison of the scatter distance evaluated in ambient space
//! against the same value through the reduced space.

use std::time::Instant;

use nalgebra::DMatrix;

use crate::distance::{dist_sq, DistanceKind};
use crate::error::{Error, Result};
use crate::invariance::rel_diff;
use crate::nystrom::isometric_project;
use crate::random;
use crate::scatter::mean_and_scatter;
use crate::spd::regularize;

pub const WARMUP_REPS: usize = 2;

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub dim: usize,
    pub source: usize,
    pub target: usize,
    pub reps: usize,
    pub kind: DistanceKind,
    pub eps: f64,
    pub seed: u64,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            dim: 4096,
            source: 30,
            target: 3,
            reps: 3,
            kind: DistanceKind::Jbld,
            eps: 1e-6,
            seed: 0,
        }
    }
}

/// Seconds per evaluation.
#[derive(Debug, Clone)]
pub struct Timing {
    pub samples: Vec<f64>,
}

impl Timing {
    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Sample standard deviation.
    pub fn std(&self) -> f64 {
        let n = self.samples.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        (self.samples.iter().map(|s| (s - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub options: BenchOptions,
    pub naive: Timing,
    pub projected: Timing,
    pub naive_value: f64,
    pub projected_value: f64,
}

impl BenchReport {
    pub fn speedup(&self) -> f64 {
        self.naive.mean() / self.projected.mean()
    }

    pub fn value_gap(&self) -> f64 {
        rel_diff(self.naive_value, self.projected_value)
    }

    pub fn to_csv(&self) -> String {
        let o = &self.options;
        format!(
            "path,d,n,nstar,reps,kind,mean_s,std_s,value\n\
             naive,{d},{n},{ns},{r},{k},{:.6},{:.6},{:.6}\n\
             projected,{dp},{n},{ns},{r},{k},{:.6},{:.6},{:.6}\n\
             speedup,,,,,,{:.6},,\n",
            self.naive.mean(),
            self.naive.std(),
            self.naive_value,
            self.projected.mean(),
            self.projected.std(),
            self.projected_value,
            self.speedup(),
            d = o.dim,
            dp = o.source + o.target,
            n = o.source,
            ns = o.target,
            r = o.reps,
            k = o.kind,
        )
    }
}

pub fn naive_distance(kind: DistanceKind, phi: &DMatrix<f64>, phi_star: &DMatrix<f64>, eps: f64) -> Result<f64> {
    let a = regularize(&mean_and_scatter(phi)?.scatter, eps)?;
    let b = regularize(&mean_and_scatter(phi_star)?.scatter, eps)?;
    dist_sq(kind, &a, &b)
}

pub fn projected_distance(kind: DistanceKind, phi: &DMatrix<f64>, phi_star: &DMatrix<f64>, eps: f64) -> Result<f64> {
    let r = isometric_project(phi, phi_star)?;
    let a = regularize(&mean_and_scatter(&r.source)?.scatter, eps)?;
    let b = regularize(&mean_and_scatter(&r.target)?.scatter, eps)?;
    dist_sq(kind, &a, &b)
}

fn time(reps: usize, mut f: impl FnMut() -> Result<f64>) -> Result<(Timing, f64)> {
    let mut value = f64::NAN;
    let mut samples = Vec::with_capacity(reps);
    for i in 0..WARMUP_REPS + reps {
        let start = Instant::now();
        value = f()?;
        let elapsed = start.elapsed().as_secs_f64();
        if i >= WARMUP_REPS {
            samples.push(elapsed);
        }
    }
    Ok((Timing { samples }, value))
}

/// Times both paths serially on one random instance.
pub fn run_bench(opts: &BenchOptions) -> Result<BenchReport> {
    if opts.reps < 3 {
        return Err(Error::param(format!("reps must be at least 3, got {}", opts.reps)));
    }
    if opts.dim == 0 || opts.source == 0 || opts.target == 0 {
        return Err(Error::param("d, n and nstar must be at least 1"));
    }
    let mut rng = random::rng(opts.seed);
    let phi = random::gaussian(&mut rng, opts.dim, opts.source);
    let phi_star = random::gaussian(&mut rng, opts.dim, opts.target);
    let (naive, naive_value) = time(opts.reps, || naive_distance(opts.kind, &phi, &phi_star, opts.eps))?;
    let (projected, projected_value) = time(opts.reps, || projected_distance(opts.kind, &phi, &phi_star, opts.eps))?;
    Ok(BenchReport {
        options: opts.clone(),
        naive,
        projected,
        naive_value,
        projected_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timing_stats() {
        let t = Timing {
            samples: vec![1.0, 2.0, 3.0],
        };
        assert_eq!(t.mean(), 2.0);
        assert!((t.std() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn small_bench_agrees_in_value() {
        let opts = BenchOptions {
            dim: 64,
            source: 6,
            target: 3,
            ..Default::default()
        };
        let r = run_bench(&opts).unwrap();
        assert_eq!(r.naive.samples.len(), 3);
        assert!(r.value_gap() < 1e-7);
        assert!(r.to_csv().starts_with("path,d,n,nstar"));
    }

    #[test]
    fn too_few_reps() {
        let opts = BenchOptions {
            reps: 2,
            ..Default::default()
        };
        assert!(run_bench(&opts).is_err());
    }
}
