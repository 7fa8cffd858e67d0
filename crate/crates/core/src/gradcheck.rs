//! Central finite-difference checks of every analytic gradient in the crate.
//!
//! The numerical side only ever calls value functions (`dist_sq`,
//! `mean_and_scatter`, `isometric_project`, `total_objective(..).value`), so
//! it stays independent of the back-propagation code it verifies.

use std::fmt;

use nalgebra::DMatrix;
use rand::Rng;

use crate::align::{alignment_loss, total_objective, AlignConfig};
use crate::distance::{dist_sq, grad_dist_sq, DistanceKind};
use crate::error::{Error, Result};
use crate::model::{Activation, TwoStreamModel};
use crate::nystrom::isometric_project;
use crate::random::{self, SeededRng};
use crate::scatter::{broadcast_columns, grad_wrt_features, mean_align, mean_and_scatter, FeatureBlock};
use crate::spd::{regularize, symmetrize, SymMatrix};

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;
/// Pass threshold on the maximum relative error of a component.
pub const GRAD_TOLERANCE: f64 = 1e-4;
/// Entries smaller than this fraction of the largest gradient entry are
/// compared against that fraction instead of their own magnitude.
pub const RELATIVE_FLOOR: f64 = 1e-3;

/// Central differences of `f` at `x`.
pub fn central_difference(mut f: impl FnMut(&[f64]) -> Result<f64>, x: &[f64], step: f64) -> Result<Vec<f64>> {
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + step;
        let plus = f(&probe)?;
        probe[i] = orig - step;
        let minus = f(&probe)?;
        probe[i] = orig;
        out.push((plus - minus) / (2.0 * step));
    }
    Ok(out)
}

/// Largest entrywise `|a − n| / max(|a|, |n|, RELATIVE_FLOOR · scale)` where
/// `scale` is the largest magnitude in either vector.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let scale = analytic
        .iter()
        .chain(numeric)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let floor = RELATIVE_FLOOR * scale;
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| {
            if !a.is_finite() || !n.is_finite() {
                return f64::INFINITY;
            }
            (a - n).abs() / a.abs().max(n.abs()).max(floor)
        })
        .fold(0.0, f64::max)
}

/// The chain-rule stages checked by [`run_gradcheck`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Component {
    /// ∂d²/∂Σ and ∂d²/∂Σ* of the distance itself.
    Distance,
    /// Φ ↦ d²(Σ(Φ) + εI, Σ*) through the ambient scatter.
    Scatter,
    /// Φ ↦ d²(Σ(Π(Φ)) + εI, Σ(Π(Φ*)) + εI) through the Nyström reduction.
    Projected,
    /// Φ ↦ ‖μ − μ*‖².
    MeanAlign,
    /// Every parameter of the two-stream objective.
    Objective,
}

impl Component {
    pub const ALL: [Component; 5] = [
        Component::Distance,
        Component::Scatter,
        Component::Projected,
        Component::MeanAlign,
        Component::Objective,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Component::Distance => "distance",
            Component::Scatter => "scatter",
            Component::Projected => "projected",
            Component::MeanAlign => "mean_align",
            Component::Objective => "objective",
        }
    }

    /// Whether the component runs once per distance kind.
    pub fn per_kind(self) -> bool {
        !matches!(self, Component::MeanAlign)
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    pub kinds: Vec<DistanceKind>,
    pub trials: usize,
    pub seed: u64,
    /// Test hook: perturbs the analytic gradient of one component by 1%.
    pub corrupt: Option<Component>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            kinds: DistanceKind::ALL.to_vec(),
            trials: 100,
            seed: 0,
            corrupt: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ComponentResult {
    pub component: Component,
    pub kind: Option<DistanceKind>,
    pub trials: usize,
    pub max_rel_error: f64,
    /// Set when an analytic or numerical gradient was not finite or a value failed.
    pub failure: Option<String>,
}

impl ComponentResult {
    pub fn passed(&self) -> bool {
        self.failure.is_none() && self.max_rel_error < GRAD_TOLERANCE
    }

    pub fn label(&self) -> String {
        match self.kind {
            Some(k) => format!("{}/{}", self.component, k),
            None => self.component.to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub results: Vec<ComponentResult>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(ComponentResult::passed)
    }

    pub fn failures(&self) -> Vec<String> {
        self.results.iter().filter(|r| !r.passed()).map(ComponentResult::label).collect()
    }
}

/// Analytic and numerical gradients of one trial, flattened.
struct Trial {
    analytic: Vec<f64>,
    numeric: Vec<f64>,
}

pub fn run_gradcheck(opts: &GradCheckOptions) -> Result<GradCheckReport> {
    if opts.trials == 0 {
        return Err(Error::param("trials must be at least 1"));
    }
    let mut results = Vec::new();
    for component in Component::ALL {
        let kinds: Vec<Option<DistanceKind>> = if component.per_kind() {
            opts.kinds.iter().copied().map(Some).collect()
        } else {
            vec![None]
        };
        for kind in kinds {
            // Each (component, kind) gets its own stream so subsets of kinds reproduce.
            let stream = opts.seed ^ (component as u64 + 1) << 32 ^ kind.map_or(0, |k| k as u64 + 1) << 40;
            let mut rng = random::rng(stream);
            let mut worst = 0.0f64;
            let mut failure = None;
            for t in 0..opts.trials {
                let trial = match run_trial(component, kind.unwrap_or(DistanceKind::Frobenius), &mut rng) {
                    Ok(mut trial) => {
                        if opts.corrupt == Some(component) {
                            for v in &mut trial.analytic {
                                *v *= 1.01;
                            }
                        }
                        trial
                    }
                    Err(e) => {
                        failure = Some(format!("trial {t}: {e}"));
                        break;
                    }
                };
                if trial.analytic.iter().chain(&trial.numeric).any(|v| !v.is_finite()) {
                    failure = Some(format!("trial {t}: non-finite gradient"));
                    break;
                }
                worst = worst.max(max_relative_error(&trial.analytic, &trial.numeric));
            }
            results.push(ComponentResult {
                component,
                kind,
                trials: opts.trials,
                max_rel_error: worst,
                failure,
            });
        }
    }
    Ok(GradCheckReport { results })
}

fn run_trial(component: Component, kind: DistanceKind, rng: &mut SeededRng) -> Result<Trial> {
    match component {
        Component::Distance => distance_trial(kind, rng),
        Component::Scatter => scatter_trial(kind, rng),
        Component::Projected => projected_trial(kind, rng),
        Component::MeanAlign => mean_trial(rng),
        Component::Objective => objective_trial(kind, rng),
    }
}

fn sym_from(raw: &[f64], side: usize) -> Result<SymMatrix> {
    symmetrize(&DMatrix::from_column_slice(side, side, raw))
}

fn distance_trial(kind: DistanceKind, rng: &mut SeededRng) -> Result<Trial> {
    let side = rng.random_range(1..=16);
    let a = random::spd(rng, side, 0.1, 10.0);
    let b = random::spd(rng, side, 0.1, 10.0);
    let (ga, gb) = grad_dist_sq(kind, &a, &b)?;

    let na = central_difference(|x| dist_sq(kind, &sym_from(x, side)?, &b), a.as_matrix().as_slice(), FD_STEP)?;
    let nb = central_difference(|x| dist_sq(kind, &a, &sym_from(x, side)?), b.as_matrix().as_slice(), FD_STEP)?;
    Ok(Trial {
        analytic: [ga.as_matrix().as_slice(), gb.as_matrix().as_slice()].concat(),
        numeric: [na, nb].concat(),
    })
}

/// Regularizer used by the feature-level checks.
pub const CHECK_EPS: f64 = 1e-2;

/// Random feature columns whose class scatter is well inside the SPD cone.
fn full_rank_block(rng: &mut SeededRng, dim: usize, count: usize) -> DMatrix<f64> {
    random::gaussian(rng, dim, count)
}

fn scatter_trial(kind: DistanceKind, rng: &mut SeededRng) -> Result<Trial> {
    let d = rng.random_range(1..=5);
    let n = rng.random_range((d + 1)..=6);
    let n_star = rng.random_range((d + 1)..=6);
    let phi = full_rank_block(rng, d, n);
    let phi_star = full_rank_block(rng, d, n_star);

    let value = |p: &DMatrix<f64>, q: &DMatrix<f64>| -> Result<f64> {
        let a = regularize(&mean_and_scatter(p)?.scatter, CHECK_EPS)?;
        let b = regularize(&mean_and_scatter(q)?.scatter, CHECK_EPS)?;
        dist_sq(kind, &a, &b)
    };

    let sa = mean_and_scatter(&phi)?;
    let sb = mean_and_scatter(&phi_star)?;
    let (ga, gb) = grad_dist_sq(kind, &regularize(&sa.scatter, CHECK_EPS)?, &regularize(&sb.scatter, CHECK_EPS)?)?;
    let g_phi = grad_wrt_features(&ga, &phi, &sa)?;
    let g_star = grad_wrt_features(&gb, &phi_star, &sb)?;

    let n_phi = central_difference(
        |x| value(&DMatrix::from_column_slice(d, n, x), &phi_star),
        phi.as_slice(),
        FD_STEP,
    )?;
    let n_star = central_difference(
        |x| value(&phi, &DMatrix::from_column_slice(d, n_star, x)),
        phi_star.as_slice(),
        FD_STEP,
    )?;
    Ok(Trial {
        analytic: [g_phi.as_slice(), g_star.as_slice()].concat(),
        numeric: [n_phi, n_star].concat(),
    })
}

/// `d²(Σ(Π(Φ)) + εI, Σ(Π(Φ*)) + εI)` with the projection recomputed from the inputs.
pub fn projected_distance(kind: DistanceKind, eps: f64, phi: &DMatrix<f64>, phi_star: &DMatrix<f64>) -> Result<f64> {
    let r = isometric_project(phi, phi_star)?;
    let a = regularize(&mean_and_scatter(&r.source)?.scatter, eps)?;
    let b = regularize(&mean_and_scatter(&r.target)?.scatter, eps)?;
    dist_sq(kind, &a, &b)
}

fn projected_trial(kind: DistanceKind, rng: &mut SeededRng) -> Result<Trial> {
    let d = rng.random_range(4..=12);
    let n = rng.random_range(2..=6);
    let n_star = rng.random_range(2..=4);
    let phi = random::gaussian(rng, d, n);
    let phi_star = random::gaussian(rng, d, n_star);

    let mut cfg = AlignConfig::new(1);
    cfg.kind = kind;
    cfg.sigma1 = 1.0;
    cfg.sigma2 = 0.0;
    cfg.eps = CHECK_EPS;
    let a = alignment_loss(&[(phi.clone(), phi_star.clone())], &cfg)?;
    let (g_phi, g_star) = &a.grads[0];

    let n_phi = central_difference(
        |x| projected_distance(kind, CHECK_EPS, &DMatrix::from_column_slice(d, n, x), &phi_star),
        phi.as_slice(),
        FD_STEP,
    )?;
    let n_star_fd = central_difference(
        |x| projected_distance(kind, CHECK_EPS, &phi, &DMatrix::from_column_slice(d, n_star, x)),
        phi_star.as_slice(),
        FD_STEP,
    )?;
    Ok(Trial {
        analytic: [g_phi.as_slice(), g_star.as_slice()].concat(),
        numeric: [n_phi, n_star_fd].concat(),
    })
}

fn mean_trial(rng: &mut SeededRng) -> Result<Trial> {
    let d = rng.random_range(1..=8);
    let n = rng.random_range(1..=6);
    let n_star = rng.random_range(1..=6);
    let phi = random::gaussian(rng, d, n);
    let phi_star = random::gaussian(rng, d, n_star);

    let m = mean_align(&mean_and_scatter(&phi)?, &mean_and_scatter(&phi_star)?)?;
    let g_phi = broadcast_columns(&m.source_column_grad, n);
    let g_star = broadcast_columns(&m.target_column_grad, n_star);

    let value = |p: &DMatrix<f64>, q: &DMatrix<f64>| -> Result<f64> {
        Ok((p.column_mean() - q.column_mean()).norm_squared())
    };
    let n_phi = central_difference(|x| value(&DMatrix::from_column_slice(d, n, x), &phi_star), phi.as_slice(), FD_STEP)?;
    let n_star_fd = central_difference(|x| value(&phi, &DMatrix::from_column_slice(d, n_star, x)), phi_star.as_slice(), FD_STEP)?;
    Ok(Trial {
        analytic: [g_phi.as_slice(), g_star.as_slice()].concat(),
        numeric: [n_phi, n_star_fd].concat(),
    })
}

fn random_block(rng: &mut SeededRng, input_dim: usize, per_class: usize, classes: usize) -> Result<FeatureBlock> {
    let labels: Vec<usize> = (0..classes).flat_map(|c| vec![c; per_class]).collect();
    FeatureBlock::new(random::gaussian(rng, input_dim, labels.len()), labels, classes)
}

fn objective_trial(kind: DistanceKind, rng: &mut SeededRng) -> Result<Trial> {
    let input_dim = rng.random_range(2..=5);
    let feature_dim = rng.random_range(2..=5);
    let classes = rng.random_range(2..=3);
    let mut model = TwoStreamModel::init(rng.random(), input_dim, feature_dim, classes, Activation::Tanh);
    // Break the initial symmetry so every term is active.
    for m in [
        &mut model.target_encoder.weights,
        &mut model.source_classifier.weights,
        &mut model.target_classifier.weights,
    ] {
        *m += random::gaussian(rng, m.nrows(), m.ncols()) * 0.3;
    }
    let per_source = rng.random_range(2..=4);
    let per_target = rng.random_range(1..=3);
    let bs = random_block(rng, input_dim, per_source, classes)?;
    let bt = random_block(rng, input_dim, per_target, classes)?;

    let mut cfg = AlignConfig::new(classes);
    cfg.kind = kind;
    cfg.sigma1 = rng.random_range(0.1..1.0);
    cfg.sigma2 = rng.random_range(0.1..1.0);
    cfg.eta = rng.random_range(0.1..1.0);
    cfg.eps = CHECK_EPS;
    // Clip roughly half of the features.
    cfg.tau = Some(0.3 * feature_dim as f64);

    let obj = total_objective(&model, &bs, &bt, &cfg)?;
    let analytic: Vec<f64> = obj.grads.slices().concat();

    let flat: Vec<f64> = model.slices().concat();
    let numeric = central_difference(
        |x| {
            let mut m = model.clone();
            let mut offset = 0;
            for s in m.slices_mut() {
                let len = s.len();
                s.copy_from_slice(&x[offset..offset + len]);
                offset += len;
            }
            Ok(total_objective(&m, &bs, &bt, &cfg)?.value)
        },
        &flat,
        FD_STEP,
    )?;
    Ok(Trial { analytic, numeric })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn central_difference_of_quadratic_is_exact() {
        let g = central_difference(|x| Ok(x[0] * x[0] + 3.0 * x[1]), &[2.0, -1.0], 1e-3).unwrap();
        assert!((g[0] - 4.0).abs() < 1e-9 && (g[1] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn relative_error_uses_floor() {
        assert_eq!(max_relative_error(&[1.0, 0.0], &[1.0, 0.0]), 0.0);
        let e = max_relative_error(&[100.0, 1e-9], &[100.0, 2e-9]);
        assert!((e - 1e-8).abs() < 1e-12);
        let e = max_relative_error(&[1.0], &[1.1]);
        assert!((e - 0.1 / 1.1).abs() < 1e-12);
        assert_eq!(max_relative_error(&[f64::NAN], &[1.0]), f64::INFINITY);
    }

    #[test]
    fn small_run_passes_and_is_deterministic() {
        let opts = GradCheckOptions {
            trials: 2,
            seed: 42,
            ..Default::default()
        };
        let a = run_gradcheck(&opts).unwrap();
        let b = run_gradcheck(&opts).unwrap();
        for r in &a.results {
            assert!(r.passed(), "{} {:e} {:?}", r.label(), r.max_rel_error, r.failure);
        }
        let errs = |r: &GradCheckReport| r.results.iter().map(|x| x.max_rel_error).collect::<Vec<_>>();
        assert_eq!(errs(&a), errs(&b));
    }

    #[test]
    fn corrupted_component_is_named() {
        let opts = GradCheckOptions {
            trials: 1,
            seed: 1,
            kinds: vec![DistanceKind::Jbld],
            corrupt: Some(Component::Scatter),
        };
        let r = run_gradcheck(&opts).unwrap();
        assert!(!r.passed());
        assert_eq!(r.failures(), vec!["scatter/jbld".to_string()]);
    }

    #[test]
    fn zero_trials_rejected() {
        let opts = GradCheckOptions {
            trials: 0,
            ..Default::default()
        };
        assert!(run_gradcheck(&opts).is_err());
    }
}
