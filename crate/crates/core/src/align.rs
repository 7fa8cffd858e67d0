//! The two-stream objective:
//!
//! ```text
//! ℓ(W, Λ) + ℓ(W*, Λ*) + η‖W − W*‖²_F
//!     + (σ1/C) Σ_c d²(Σ_c, Σ*_c) + (σ2/C) Σ_c ‖μ_c − μ*_c‖²
//! ```
//!
//! subject to `‖φ‖² ≤ τ` on every feature vector. Scatter terms are
//! evaluated in the per-class reduced space of [`isometric_project`] and
//! their gradients are pulled back through the constant projector.

use nalgebra::{DMatrix, DVector};

use crate::distance::{dist_sq, grad_dist_sq, DistanceKind};
use crate::error::{Error, Result};
use crate::model::{Classifier, ClassifierGrad, ModelGrads, TwoStreamModel};
use crate::nystrom::{backproject_grad, isometric_project};
use crate::scatter::{broadcast_columns, grad_wrt_features, mean_align, mean_and_scatter, FeatureBlock};
use crate::spd::regularize;

#[derive(Debug, Clone, PartialEq)]
pub struct AlignConfig {
    /// Weight of the scatter alignment term.
    pub sigma1: f64,
    /// Weight of the mean alignment term.
    pub sigma2: f64,
    /// Weight of the classifier proximity term.
    pub eta: f64,
    /// Cap on `‖φ‖²`; `None` disables the constraint.
    pub tau: Option<f64>,
    /// Diagonal regularizer for scatter matrices.
    pub eps: f64,
    pub kind: DistanceKind,
    pub class_count: usize,
}

impl AlignConfig {
    pub fn new(class_count: usize) -> Self {
        AlignConfig {
            sigma1: 0.01,
            sigma2: 0.1,
            eta: 1.0,
            tau: None,
            eps: 1e-6,
            kind: DistanceKind::Jbld,
            class_count,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("sigma1", self.sigma1), ("sigma2", self.sigma2), ("eta", self.eta)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::param(format!("{name} must be a finite non-negative number, got {v}")));
            }
        }
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(Error::param(format!("eps must be positive, got {}", self.eps)));
        }
        if let Some(tau) = self.tau {
            if !(tau > 0.0) {
                return Err(Error::param(format!("tau must be positive, got {tau}")));
            }
        }
        if self.class_count == 0 {
            return Err(Error::param("class_count must be at least 1"));
        }
        Ok(())
    }
}

/// Mean softmax cross-entropy over columns with all gradients.
#[derive(Debug, Clone)]
pub struct CrossEntropy {
    pub loss: f64,
    pub grad: ClassifierGrad,
    pub grad_features: DMatrix<f64>,
}

pub fn softmax_ce(classifier: &Classifier, features: &DMatrix<f64>, labels: &[usize]) -> Result<CrossEntropy> {
    let n = features.ncols();
    if n == 0 {
        return Err(Error::Empty("cross-entropy over zero columns".into()));
    }
    if labels.len() != n {
        return Err(Error::dim(format!("{} labels for {n} columns", labels.len())));
    }
    if features.nrows() != classifier.feature_dim() {
        return Err(Error::dim(format!(
            "classifier expects dimension {}, got {}",
            classifier.feature_dim(),
            features.nrows()
        )));
    }
    let classes = classifier.class_count();
    if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::Label { label, classes });
    }

    let mut probs = classifier.logits(features);
    let mut loss = 0.0;
    for (j, mut col) in probs.column_iter_mut().enumerate() {
        let max = col.max();
        let lse = max + col.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        loss += lse - col[labels[j]];
        col.apply(|z| *z = (*z - lse).exp());
    }
    // probs now holds softmax; subtract one-hot and average to get ∂ℓ/∂logits.
    for (j, &label) in labels.iter().enumerate() {
        probs[(label, j)] -= 1.0;
    }
    let inv_n = 1.0 / n as f64;
    probs *= inv_n;

    Ok(CrossEntropy {
        loss: loss * inv_n,
        grad: ClassifierGrad {
            weights: features * probs.transpose(),
            bias: probs.column_sum(),
        },
        grad_features: &classifier.weights * &probs,
    })
}

#[derive(Debug, Clone)]
pub struct Proximity {
    pub value: f64,
    pub grad_source: DMatrix<f64>,
    pub grad_target: DMatrix<f64>,
}

/// `η‖W − W*‖²_F` over the weight matrices; biases are not coupled.
pub fn proximity(w: &Classifier, w_star: &Classifier, eta: f64) -> Result<Proximity> {
    if w.weights.shape() != w_star.weights.shape() {
        return Err(Error::dim(format!(
            "classifier shapes differ: {:?} vs {:?}",
            w.weights.shape(),
            w_star.weights.shape()
        )));
    }
    let diff = &w.weights - &w_star.weights;
    Ok(Proximity {
        value: eta * diff.norm_squared(),
        grad_source: &diff * (2.0 * eta),
        grad_target: &diff * (-2.0 * eta),
    })
}

/// Rescales `column` onto the sphere `‖v‖² = tau` when it lies outside it.
pub fn clip_feature_norm(column: &DVector<f64>, tau: f64) -> DVector<f64> {
    let sq = column.norm_squared();
    if sq <= tau {
        column.clone()
    } else {
        column * (tau / sq).sqrt()
    }
}

/// Applies [`clip_feature_norm`] to every column.
pub fn clip_columns(columns: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    let mut out = columns.clone();
    for mut col in out.column_iter_mut() {
        let sq = col.norm_squared();
        if sq > tau {
            col *= (tau / sq).sqrt();
        }
    }
    out
}

/// Back-propagates through [`clip_columns`]; `columns` are the unclipped inputs.
pub fn clip_columns_backward(columns: &DMatrix<f64>, grad_out: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    let mut g = grad_out.clone();
    for (j, mut gcol) in g.column_iter_mut().enumerate() {
        let h = columns.column(j);
        let sq = h.norm_squared();
        if sq > tau {
            let s = (tau / sq).sqrt();
            let proj = h.dot(&gcol) / sq;
            gcol.axpy(-proj, &h, 1.0);
            gcol *= s;
        }
    }
    g
}

/// Source and target feature columns of one class.
pub type ClassPair = (DMatrix<f64>, DMatrix<f64>);

#[derive(Debug, Clone)]
pub struct AlignmentLoss {
    /// `scatter + mean`.
    pub loss: f64,
    /// `(σ1/C) Σ_c d²(Σ_c, Σ*_c)`.
    pub scatter: f64,
    /// `(σ2/C) Σ_c ‖μ_c − μ*_c‖²`.
    pub mean: f64,
    /// Per class gradients with respect to the source and target columns.
    pub grads: Vec<ClassPair>,
}

/// Alignment term over classes. A class missing from either stream is
/// skipped; the `1/C` normalizer always uses the configured class count.
pub fn alignment_loss(per_class: &[ClassPair], config: &AlignConfig) -> Result<AlignmentLoss> {
    config.validate()?;
    if per_class.len() != config.class_count {
        return Err(Error::dim(format!(
            "{} class pairs for {} classes",
            per_class.len(),
            config.class_count
        )));
    }
    let c = config.class_count as f64;
    let (w_scatter, w_mean) = (config.sigma1 / c, config.sigma2 / c);
    let mut scatter_total = 0.0;
    let mut mean_total = 0.0;
    let mut grads = Vec::with_capacity(per_class.len());

    for (src, tgt) in per_class {
        if src.nrows() != tgt.nrows() {
            return Err(Error::dim(format!(
                "source dimension {} differs from target dimension {}",
                src.nrows(),
                tgt.nrows()
            )));
        }
        let mut g_src = DMatrix::zeros(src.nrows(), src.ncols());
        let mut g_tgt = DMatrix::zeros(tgt.nrows(), tgt.ncols());
        if src.ncols() == 0 || tgt.ncols() == 0 || (w_scatter == 0.0 && w_mean == 0.0) {
            grads.push((g_src, g_tgt));
            continue;
        }

        if w_scatter > 0.0 {
            let reduced = isometric_project(src, tgt)?;
            let stats_s = mean_and_scatter(&reduced.source)?;
            let stats_t = mean_and_scatter(&reduced.target)?;
            let sigma_s = regularize(&stats_s.scatter, config.eps)?;
            let sigma_t = regularize(&stats_t.scatter, config.eps)?;
            scatter_total += w_scatter * dist_sq(config.kind, &sigma_s, &sigma_t)?;

            let (ga, gb) = grad_dist_sq(config.kind, &sigma_s, &sigma_t)?;
            let red_s = grad_wrt_features(&ga, &reduced.source, &stats_s)?;
            let red_t = grad_wrt_features(&gb, &reduced.target, &stats_t)?;
            g_src += backproject_grad(&reduced.projection, &red_s)? * w_scatter;
            g_tgt += backproject_grad(&reduced.projection, &red_t)? * w_scatter;
        }

        if w_mean > 0.0 {
            let m = mean_align(&mean_and_scatter(src)?, &mean_and_scatter(tgt)?)?;
            mean_total += w_mean * m.loss;
            g_src += broadcast_columns(&m.source_column_grad, src.ncols()) * w_mean;
            g_tgt += broadcast_columns(&m.target_column_grad, tgt.ncols()) * w_mean;
        }
        grads.push((g_src, g_tgt));
    }

    Ok(AlignmentLoss {
        loss: scatter_total + mean_total,
        scatter: scatter_total,
        mean: mean_total,
        grads,
    })
}

/// Splits two feature blocks into per-class column pairs.
pub fn class_pairs(source: &FeatureBlock, target: &FeatureBlock) -> Vec<ClassPair> {
    let (is, it) = (source.class_indices(), target.class_indices());
    is.iter()
        .zip(&it)
        .map(|(a, b)| (source.columns().select_columns(a), target.columns().select_columns(b)))
        .collect()
}

/// Individual terms of the objective, already weighted.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossParts {
    pub ce_source: f64,
    pub ce_target: f64,
    pub proximity: f64,
    pub scatter: f64,
    pub mean: f64,
}

impl LossParts {
    pub fn total(&self) -> f64 {
        self.ce_source + self.ce_target + self.proximity + self.scatter + self.mean
    }
}

#[derive(Debug, Clone)]
pub struct Objective {
    pub value: f64,
    pub parts: LossParts,
    pub grads: ModelGrads,
}

fn features(columns: &DMatrix<f64>, tau: Option<f64>) -> DMatrix<f64> {
    match tau {
        Some(t) => clip_columns(columns, t),
        None => columns.clone(),
    }
}

/// Full objective on one pair of raw-input batches, with gradients for every parameter.
pub fn total_objective(
    model: &TwoStreamModel,
    batch_source: &FeatureBlock,
    batch_target: &FeatureBlock,
    config: &AlignConfig,
) -> Result<Objective> {
    config.validate()?;
    model.validate()?;
    if batch_source.count() == 0 || batch_target.count() == 0 {
        return Err(Error::Empty("both batches must contain at least one sample".into()));
    }
    if model.class_count() != config.class_count {
        return Err(Error::dim(format!(
            "model has {} classes, config declares {}",
            model.class_count(),
            config.class_count
        )));
    }

    let trace_s = model.source_encoder.forward(batch_source.columns())?;
    let trace_t = model.target_encoder.forward(batch_target.columns())?;
    let phi_s = features(&trace_s.output, config.tau);
    let phi_t = features(&trace_t.output, config.tau);

    let ce_s = softmax_ce(&model.source_classifier, &phi_s, batch_source.labels())?;
    let ce_t = softmax_ce(&model.target_classifier, &phi_t, batch_target.labels())?;
    let prox = proximity(&model.source_classifier, &model.target_classifier, config.eta)?;

    let fs = FeatureBlock::new(phi_s, batch_source.labels().to_vec(), config.class_count)?;
    let ft = FeatureBlock::new(phi_t, batch_target.labels().to_vec(), config.class_count)?;
    let align = alignment_loss(&class_pairs(&fs, &ft), config)?;

    let mut g_phi_s = ce_s.grad_features;
    let mut g_phi_t = ce_t.grad_features;
    let (is, it) = (fs.class_indices(), ft.class_indices());
    for (c, (gs, gt)) in align.grads.iter().enumerate() {
        for (k, &col) in is[c].iter().enumerate() {
            let mut dst = g_phi_s.column_mut(col);
            dst += gs.column(k);
        }
        for (k, &col) in it[c].iter().enumerate() {
            let mut dst = g_phi_t.column_mut(col);
            dst += gt.column(k);
        }
    }

    if let Some(tau) = config.tau {
        g_phi_s = clip_columns_backward(&trace_s.output, &g_phi_s, tau);
        g_phi_t = clip_columns_backward(&trace_t.output, &g_phi_t, tau);
    }

    let enc_s = model.source_encoder.backward(batch_source.columns(), &trace_s, &g_phi_s);
    let enc_t = model.target_encoder.backward(batch_target.columns(), &trace_t, &g_phi_t);

    let parts = LossParts {
        ce_source: ce_s.loss,
        ce_target: ce_t.loss,
        proximity: prox.value,
        scatter: align.scatter,
        mean: align.mean,
    };
    let grads = ModelGrads {
        source_encoder: enc_s,
        target_encoder: enc_t,
        source_classifier: ClassifierGrad {
            weights: ce_s.grad.weights + prox.grad_source,
            bias: ce_s.grad.bias,
        },
        target_classifier: ClassifierGrad {
            weights: ce_t.grad.weights + prox.grad_target,
            bias: ce_t.grad.bias,
        },
    };
    Ok(Objective {
        value: parts.total(),
        parts,
        grads,
    })
}
