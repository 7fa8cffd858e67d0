//! Synthetic domain-shift data, SGD training of the two-stream model and the
//! single-stream baselines, and target-domain evaluation.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;

use crate::align::{clip_columns, clip_columns_backward, softmax_ce, total_objective, AlignConfig, LossParts};
use crate::error::{Error, Result};
use crate::model::{Activation, Classifier, Encoder, SingleStream, TwoStreamModel};
use crate::random::{self, SeededRng};
use crate::scatter::FeatureBlock;

/// Target = `scale · R x + translation · u + noise · z` for a source-distributed `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shift {
    /// Angle applied in every consecutive coordinate plane (0,1), (2,3), ...
    pub rotation_deg: f64,
    /// Length of the offset along a random unit direction.
    pub translation: f64,
    pub scale: f64,
    /// Std of isotropic Gaussian noise added after the transform.
    pub noise: f64,
}

impl Shift {
    pub const IDENTITY: Shift = Shift {
        rotation_deg: 0.0,
        translation: 0.0,
        scale: 1.0,
        noise: 0.0,
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub class_count: usize,
    pub input_dim: usize,
    pub source_per_class: usize,
    pub target_train_per_class: usize,
    pub target_test_per_class: usize,
    /// Std of the class means around the origin.
    pub separation: f64,
    /// Within-class std (geometric mean over axes).
    pub spread: f64,
    /// Ratio of the largest to the smallest within-class axis std; every
    /// class gets its own random orientation. 1 gives isotropic classes.
    pub anisotropy: f64,
    pub shift: Shift,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(class_count: usize, input_dim: usize, seed: u64) -> Self {
        SynthSpec {
            class_count,
            input_dim,
            source_per_class: 30,
            target_train_per_class: 3,
            target_test_per_class: 20,
            separation: 1.0,
            spread: 0.5,
            anisotropy: 1.0,
            shift: Shift::IDENTITY,
            seed,
        }
    }

    /// The fixed shift benchmark: 20 classes, 30° rotation, unit translation.
    pub fn shift_benchmark(seed: u64) -> Self {
        SynthSpec {
            input_dim: 8,
            spread: 0.6,
            anisotropy: 4.0,
            shift: Shift {
                rotation_deg: 30.0,
                translation: 1.0,
                scale: 1.0,
                noise: 0.0,
            },
            ..SynthSpec::new(20, 8, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("classes", self.class_count),
            ("input_dim", self.input_dim),
            ("source_per_class", self.source_per_class),
            ("target_train_per_class", self.target_train_per_class),
            ("target_test_per_class", self.target_test_per_class),
        ] {
            if v == 0 {
                return Err(Error::param(format!("{name} must be at least 1")));
            }
        }
        let s = &self.shift;
        for (name, v) in [
            ("separation", self.separation),
            ("spread", self.spread),
            ("noise", s.noise),
            ("translation", s.translation),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::param(format!("{name} must be a finite non-negative number, got {v}")));
            }
        }
        if !(self.anisotropy >= 1.0) || !self.anisotropy.is_finite() {
            return Err(Error::param(format!("anisotropy must be at least 1, got {}", self.anisotropy)));
        }
        if !s.rotation_deg.is_finite() || !s.scale.is_finite() {
            return Err(Error::param("rotation_deg and scale must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainData {
    pub source: FeatureBlock,
    pub target_train: FeatureBlock,
    pub target_test: FeatureBlock,
}

/// Rotates every coordinate pair `(2i, 2i+1)` by `angle` radians in place.
fn rotate_planes(x: &mut DVector<f64>, angle: f64) {
    let (s, c) = angle.sin_cos();
    let mut i = 0;
    while i + 1 < x.len() {
        let (a, b) = (x[i], x[i + 1]);
        x[i] = c * a - s * b;
        x[i + 1] = s * a + c * b;
        i += 2;
    }
}

/// Draws source, target-train and target-test blocks, class-major, in that order.
pub fn synth_domain_pair(spec: &SynthSpec) -> Result<DomainData> {
    spec.validate()?;
    let mut rng = random::rng(spec.seed);
    let dim = spec.input_dim;
    let means = random::gaussian(&mut rng, dim, spec.class_count) * spec.separation;
    let mut direction = random::gaussian(&mut rng, dim, 1).column(0).into_owned();
    let norm = direction.norm();
    if norm > 0.0 {
        direction /= norm;
    }
    let half_log = 0.5 * spec.anisotropy.ln();
    let factors: Vec<DMatrix<f64>> = (0..spec.class_count)
        .map(|_| {
            let q = random::rotation(&mut rng, dim);
            let axes: Vec<f64> = (0..dim).map(|_| (rng.random_range(-1.0..=1.0) * half_log).exp() * spec.spread).collect();
            q * DMatrix::from_diagonal(&DVector::from_vec(axes))
        })
        .collect();
    let angle = spec.shift.rotation_deg.to_radians();

    let draw = |rng: &mut SeededRng, per_class: usize, shifted: bool| -> Result<FeatureBlock> {
        let total = per_class * spec.class_count;
        let mut columns = DMatrix::zeros(dim, total);
        let mut labels = Vec::with_capacity(total);
        for c in 0..spec.class_count {
            for _ in 0..per_class {
                let z = random::gaussian(rng, dim, 1);
                let mut x = means.column(c) + &factors[c] * z.column(0);
                if shifted {
                    rotate_planes(&mut x, angle);
                    x *= spec.shift.scale;
                    x += &direction * spec.shift.translation;
                    if spec.shift.noise > 0.0 {
                        x += random::gaussian(rng, dim, 1).column(0) * spec.shift.noise;
                    }
                }
                columns.set_column(labels.len(), &x);
                labels.push(c);
            }
        }
        FeatureBlock::new(columns, labels, spec.class_count)
    };
    let source = draw(&mut rng, spec.source_per_class, false)?;
    let target_train = draw(&mut rng, spec.target_train_per_class, true)?;
    let target_test = draw(&mut rng, spec.target_test_per_class, true)?;
    Ok(DomainData {
        source,
        target_train,
        target_test,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainParams {
    pub steps: usize,
    pub lr: f64,
    pub seed: u64,
    /// Per-class cap on source items per step.
    pub source_batch: usize,
    /// Per-class cap on target items per step.
    pub target_batch: usize,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            steps: 2000,
            lr: 0.2,
            seed: 0,
            source_batch: 10,
            target_batch: 3,
        }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::param("steps must be at least 1"));
        }
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return Err(Error::param(format!("lr must be a finite non-negative number, got {}", self.lr)));
        }
        if self.source_batch == 0 || self.target_batch == 0 {
            return Err(Error::param("batch sizes must be at least 1"));
        }
        Ok(())
    }
}

/// Loss recorded before the update of a step (steps are 1-based).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow {
    pub step: usize,
    pub total: f64,
    pub parts: LossParts,
}

pub const HISTORY_HEADER: &str = "step,loss_total,loss_ce_s,loss_ce_t,loss_prox,loss_scatter,loss_mean";

pub fn history_csv(history: &[HistoryRow]) -> String {
    let mut out = String::from(HISTORY_HEADER);
    out.push('\n');
    for r in history {
        let p = &r.parts;
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            r.step, r.total, p.ce_source, p.ce_target, p.proximity, p.scatter, p.mean
        ));
    }
    out
}

/// Up to `per_class` items of every class, without replacement, in class order.
pub fn sample_batch(rng: &mut SeededRng, block: &FeatureBlock, per_class: usize) -> FeatureBlock {
    let mut picked = Vec::new();
    for members in block.class_indices() {
        let take = per_class.min(members.len());
        let mut idx: Vec<usize> = sample(rng, members.len(), take).into_iter().map(|i| members[i]).collect();
        idx.sort_unstable();
        picked.extend(idx);
    }
    block.select(&picked)
}

/// Mean of `‖φ‖²` over the source encoder outputs of `inputs`.
pub fn auto_norm_cap(encoder: &Encoder, inputs: &FeatureBlock) -> Result<f64> {
    if inputs.count() == 0 {
        return Err(Error::Empty("cannot derive a norm cap from zero samples".into()));
    }
    let out = encoder.forward(inputs.columns())?.output;
    let cap = out.column_iter().map(|c| c.norm_squared()).sum::<f64>() / out.ncols() as f64;
    if cap > 0.0 && cap.is_finite() {
        Ok(cap)
    } else {
        Err(Error::NonFinite(format!("norm cap {cap}")))
    }
}

fn diverged(step: usize, loss: f64) -> Error {
    Error::Divergence { step, loss }
}

/// Numerical failures inside a step count as divergence of that step.
fn at_step(step: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Singular { .. } | Error::NonFinite(_) | Error::NoConvergence { .. } => diverged(step, f64::NAN),
        other => other,
    }
}

/// SGD on the two-stream objective. The model's `norm_cap` is set to `config.tau`.
pub fn train(
    model: &mut TwoStreamModel,
    source: &FeatureBlock,
    target: &FeatureBlock,
    config: &AlignConfig,
    params: &TrainParams,
) -> Result<Vec<HistoryRow>> {
    params.validate()?;
    config.validate()?;
    if source.count() == 0 || target.count() == 0 {
        return Err(Error::Empty("training needs source and target samples".into()));
    }
    model.norm_cap = config.tau;
    let mut rng = random::rng(params.seed);
    let mut history = Vec::with_capacity(params.steps);
    for step in 1..=params.steps {
        let bs = sample_batch(&mut rng, source, params.source_batch);
        let bt = sample_batch(&mut rng, target, params.target_batch);
        let obj = total_objective(model, &bs, &bt, config).map_err(at_step(step))?;
        if !obj.value.is_finite() || !obj.grads.is_finite() {
            return Err(diverged(step, obj.value));
        }
        history.push(HistoryRow {
            step,
            total: obj.value,
            parts: obj.parts,
        });
        model.step(&obj.grads, params.lr);
    }
    Ok(history)
}

/// Which data a single-stream baseline is trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Baseline {
    SourceOnly,
    TargetOnly,
    Pooled,
}

impl Baseline {
    pub const ALL: [Baseline; 3] = [Baseline::SourceOnly, Baseline::TargetOnly, Baseline::Pooled];

    pub fn name(self) -> &'static str {
        match self {
            Baseline::SourceOnly => "S",
            Baseline::TargetOnly => "T",
            Baseline::Pooled => "S+T",
        }
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "S" => Ok(Baseline::SourceOnly),
            "T" => Ok(Baseline::TargetOnly),
            "S+T" | "ST" => Ok(Baseline::Pooled),
            other => Err(Error::param(format!("unknown baseline '{other}' (expected S, T or S+T)"))),
        }
    }
}

fn single_stream_step(model: &mut SingleStream, batch: &FeatureBlock, lr: f64, step: usize) -> Result<f64> {
    let trace = model.encoder.forward(batch.columns())?;
    let phi = match model.norm_cap {
        Some(t) => clip_columns(&trace.output, t),
        None => trace.output.clone(),
    };
    let ce = softmax_ce(&model.classifier, &phi, batch.labels())?;
    if !ce.loss.is_finite() {
        return Err(diverged(step, ce.loss));
    }
    let g_phi = match model.norm_cap {
        Some(t) => clip_columns_backward(&trace.output, &ce.grad_features, t),
        None => ce.grad_features,
    };
    let g_enc = model.encoder.backward(batch.columns(), &trace, &g_phi);
    model.encoder.weights -= g_enc.weights * lr;
    model.encoder.bias -= g_enc.bias * lr;
    model.classifier.weights -= &ce.grad.weights * lr;
    model.classifier.bias -= &ce.grad.bias * lr;
    Ok(ce.loss)
}

/// Cross-entropy-only SGD of one stream on the data selected by `baseline`.
/// Returns the per-step loss history.
pub fn train_baseline(
    model: &mut SingleStream,
    baseline: Baseline,
    source: &FeatureBlock,
    target: &FeatureBlock,
    tau: Option<f64>,
    params: &TrainParams,
) -> Result<Vec<f64>> {
    params.validate()?;
    model.norm_cap = tau;
    let mut rng = random::rng(params.seed);
    let mut history = Vec::with_capacity(params.steps);
    for step in 1..=params.steps {
        let batch = match baseline {
            Baseline::SourceOnly => sample_batch(&mut rng, source, params.source_batch),
            Baseline::TargetOnly => sample_batch(&mut rng, target, params.target_batch),
            Baseline::Pooled => {
                let bs = sample_batch(&mut rng, source, params.source_batch);
                let bt = sample_batch(&mut rng, target, params.target_batch);
                bs.concat(&bt)?
            }
        };
        if batch.count() == 0 {
            return Err(Error::Empty(format!("baseline {baseline} has no training samples")));
        }
        history.push(single_stream_step(model, &batch, params.lr, step).map_err(at_step(step))?);
    }
    Ok(history)
}

/// Encoder, optional norm cap and classifier used at test time.
pub trait Predictor {
    fn parts(&self) -> (&Encoder, Option<f64>, &Classifier);

    /// Class ids sorted by descending score, per column.
    fn rank(&self, inputs: &DMatrix<f64>) -> Result<Vec<Vec<usize>>> {
        let (encoder, cap, classifier) = self.parts();
        let out = encoder.forward(inputs)?.output;
        let phi = match cap {
            Some(t) => clip_columns(&out, t),
            None => out,
        };
        let logits = classifier.logits(&phi);
        Ok(logits
            .column_iter()
            .map(|col| {
                let mut order: Vec<usize> = (0..col.len()).collect();
                // Stable sort keeps lower ids first on ties.
                order.sort_by(|&a, &b| col[b].total_cmp(&col[a]));
                order
            })
            .collect())
    }

    fn predict(&self, inputs: &DMatrix<f64>) -> Result<Vec<usize>> {
        Ok(self.rank(inputs)?.into_iter().map(|r| r[0]).collect())
    }
}

impl Predictor for TwoStreamModel {
    fn parts(&self) -> (&Encoder, Option<f64>, &Classifier) {
        (&self.target_encoder, self.norm_cap, &self.target_classifier)
    }
}

impl Predictor for SingleStream {
    fn parts(&self) -> (&Encoder, Option<f64>, &Classifier) {
        (&self.encoder, self.norm_cap, &self.classifier)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassAccuracy {
    pub class: usize,
    pub correct: usize,
    pub total: usize,
}

impl ClassAccuracy {
    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.total as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Accuracy {
    pub correct: usize,
    pub total: usize,
    /// Classes with at least one test item, ascending.
    pub per_class: Vec<ClassAccuracy>,
}

impl Accuracy {
    pub fn top1(&self) -> f64 {
        self.correct as f64 / self.total as f64
    }
}

pub fn evaluate(model: &impl Predictor, test: &FeatureBlock) -> Result<Accuracy> {
    if test.count() == 0 {
        return Err(Error::Empty("test set is empty".into()));
    }
    let (_, _, classifier) = model.parts();
    if classifier.class_count() != test.class_count() {
        return Err(Error::dim(format!(
            "model has {} classes, test set declares {}",
            classifier.class_count(),
            test.class_count()
        )));
    }
    let predicted = model.predict(test.columns())?;
    let mut correct = vec![0usize; test.class_count()];
    let mut total = vec![0usize; test.class_count()];
    for (&p, &y) in predicted.iter().zip(test.labels()) {
        total[y] += 1;
        if p == y {
            correct[y] += 1;
        }
    }
    let per_class = (0..test.class_count())
        .filter(|&c| total[c] > 0)
        .map(|c| ClassAccuracy {
            class: c,
            correct: correct[c],
            total: total[c],
        })
        .collect();
    Ok(Accuracy {
        correct: correct.iter().sum(),
        total: test.count(),
        per_class,
    })
}

pub fn accuracy_csv(acc: &Accuracy) -> String {
    let mut out = format!("class,correct,total,accuracy\nall,{},{},{:.6}\n", acc.correct, acc.total, acc.top1());
    for c in &acc.per_class {
        out.push_str(&format!("{},{},{},{:.6}\n", c.class, c.correct, c.total, c.accuracy()));
    }
    out
}

/// Everything needed to run the aligned model and its baselines on one draw.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub synth: SynthSpec,
    pub align: AlignConfig,
    pub train: TrainParams,
    pub feature_dim: usize,
    pub activation: Activation,
    /// Derive `tau` from the initial source features when `align.tau` is unset.
    pub auto_tau: bool,
    pub baselines: Vec<Baseline>,
}

impl Experiment {
    pub const DEFAULT_FEATURE_DIM: usize = 32;

    /// Aligned JBLD plus all baselines on [`SynthSpec::shift_benchmark`].
    pub fn shift_benchmark(seed: u64) -> Self {
        Experiment {
            synth: SynthSpec::shift_benchmark(seed),
            align: AlignConfig::new(20),
            train: TrainParams {
                seed,
                ..TrainParams::default()
            },
            feature_dim: Self::DEFAULT_FEATURE_DIM,
            activation: Activation::Tanh,
            auto_tau: true,
            baselines: Baseline::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub model: TwoStreamModel,
    pub history: Vec<HistoryRow>,
    pub aligned: Accuracy,
    pub baselines: Vec<(Baseline, Accuracy)>,
    pub data: DomainData,
}

pub fn run_experiment(exp: &Experiment) -> Result<ExperimentResult> {
    let data = synth_domain_pair(&exp.synth)?;
    let mut align = exp.align.clone();
    align.class_count = exp.synth.class_count;
    let init_seed = exp.train.seed;
    let mut model = TwoStreamModel::init(
        init_seed,
        exp.synth.input_dim,
        exp.feature_dim,
        exp.synth.class_count,
        exp.activation,
    );
    if exp.auto_tau && align.tau.is_none() {
        align.tau = Some(auto_norm_cap(&model.source_encoder, &data.source)?);
    }
    let history = train(&mut model, &data.source, &data.target_train, &align, &exp.train)?;
    let aligned = evaluate(&model, &data.target_test)?;
    let mut baselines = Vec::new();
    for &b in &exp.baselines {
        let mut single = SingleStream::init(
            init_seed,
            exp.synth.input_dim,
            exp.feature_dim,
            exp.synth.class_count,
            exp.activation,
        );
        train_baseline(&mut single, b, &data.source, &data.target_train, align.tau, &exp.train)?;
        baselines.push((b, evaluate(&single, &data.target_test)?));
    }
    Ok(ExperimentResult {
        model,
        history,
        aligned,
        baselines,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec(seed: u64) -> SynthSpec {
        let mut s = SynthSpec::new(4, 6, seed);
        s.source_per_class = 8;
        s.target_test_per_class = 5;
        s
    }

    #[test]
    fn synth_is_deterministic_and_class_major() {
        let a = synth_domain_pair(&small_spec(9)).unwrap();
        let b = synth_domain_pair(&small_spec(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.source.count(), 32);
        assert_eq!(a.target_train.count(), 12);
        assert_eq!(&a.source.labels()[..9], &[0, 0, 0, 0, 0, 0, 0, 0, 1]);
        assert_ne!(synth_domain_pair(&small_spec(10)).unwrap(), a);
    }

    #[test]
    fn identity_shift_keeps_class_means() {
        let mut s = small_spec(2);
        s.source_per_class = 4000;
        s.target_train_per_class = 4000;
        s.class_count = 2;
        let d = synth_domain_pair(&s).unwrap();
        for c in 0..2 {
            let ms = d.source.select(&d.source.class_indices()[c]).columns().column_mean();
            let mt = d.target_train.select(&d.target_train.class_indices()[c]).columns().column_mean();
            assert!((ms - mt).amax() < 0.05);
        }
    }

    #[test]
    fn rotation_is_an_isometry() {
        let mut x = DVector::from_vec(vec![1.0, 2.0, -3.0, 0.5, 7.0]);
        let n = x.norm();
        rotate_planes(&mut x, 0.7);
        assert!((x.norm() - n).abs() < 1e-12);
        assert_eq!(x[4], 7.0);
    }

    #[test]
    fn batches_cover_every_class() {
        let d = synth_domain_pair(&small_spec(1)).unwrap();
        let mut rng = random::rng(0);
        let b = sample_batch(&mut rng, &d.source, 3);
        assert_eq!(b.count(), 12);
        assert!(b.class_indices().iter().all(|c| c.len() == 3));
        let t = sample_batch(&mut rng, &d.target_train, 10);
        assert_eq!(t.count(), 12);
    }

    #[test]
    fn zero_lr_leaves_model_unchanged() {
        let d = synth_domain_pair(&small_spec(3)).unwrap();
        let mut model = TwoStreamModel::init(0, 6, 5, 4, Activation::Tanh);
        let before = model.clone();
        let params = TrainParams {
            steps: 5,
            lr: 0.0,
            ..Default::default()
        };
        let cfg = AlignConfig::new(4);
        let h = train(&mut model, &d.source, &d.target_train, &cfg, &params).unwrap();
        assert_eq!(model, before);
        assert_eq!(h.len(), 5);
        assert_eq!(h[0].step, 1);
        assert!(h.iter().all(|r| r.total.is_finite()));
    }

    #[test]
    fn training_is_deterministic() {
        let d = synth_domain_pair(&small_spec(4)).unwrap();
        let cfg = AlignConfig::new(4);
        let params = TrainParams {
            steps: 20,
            ..Default::default()
        };
        let run = || {
            let mut m = TwoStreamModel::init(1, 6, 5, 4, Activation::Tanh);
            let h = train(&mut m, &d.source, &d.target_train, &cfg, &params).unwrap();
            (m, history_csv(&h))
        };
        let (a, ha) = run();
        let (b, hb) = run();
        assert_eq!(a, b);
        assert_eq!(ha, hb);
        assert!(ha.starts_with(HISTORY_HEADER));
    }

    #[test]
    fn divergence_reports_step() {
        let d = synth_domain_pair(&small_spec(5)).unwrap();
        let mut m = TwoStreamModel::init(1, 6, 5, 4, Activation::Linear);
        let params = TrainParams {
            steps: 200,
            lr: 1e6,
            ..Default::default()
        };
        let err = train(&mut m, &d.source, &d.target_train, &AlignConfig::new(4), &params).unwrap_err();
        assert!(matches!(err, Error::Divergence { step, .. } if step > 1), "{err}");
    }

    #[test]
    fn constant_classifier_scores_one_over_c() {
        let d = synth_domain_pair(&small_spec(6)).unwrap();
        let mut m = TwoStreamModel::init(0, 6, 5, 4, Activation::Tanh);
        m.target_classifier = Classifier::zeros(5, 4);
        m.target_classifier.bias[0] = 1.0;
        let acc = evaluate(&m, &d.target_test).unwrap();
        assert_eq!(acc.top1(), 0.25);
        assert_eq!(acc.per_class.len(), 4);
        assert_eq!(acc.per_class[0].accuracy(), 1.0);
    }

    #[test]
    fn empty_class_omitted() {
        let cols = DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let test = FeatureBlock::new(cols, vec![0, 2], 3).unwrap();
        let m = TwoStreamModel::init(0, 2, 3, 3, Activation::Linear);
        let acc = evaluate(&m, &test).unwrap();
        assert_eq!(acc.per_class.iter().map(|c| c.class).collect::<Vec<_>>(), vec![0, 2]);
    }

    #[test]
    fn separable_toy_reaches_full_accuracy() {
        let mut s = SynthSpec::new(3, 4, 11);
        s.separation = 3.0;
        s.spread = 0.05;
        let d = synth_domain_pair(&s).unwrap();
        let mut m = TwoStreamModel::init(0, 4, 8, 3, Activation::Tanh);
        let params = TrainParams {
            steps: 300,
            lr: 0.5,
            ..Default::default()
        };
        train(&mut m, &d.source, &d.target_train, &AlignConfig::new(3), &params).unwrap();
        assert_eq!(evaluate(&m, &d.target_test).unwrap().top1(), 1.0);
    }

    #[test]
    fn baseline_names_round_trip() {
        for b in Baseline::ALL {
            assert_eq!(b.name().parse::<Baseline>().unwrap(), b);
        }
    }
}
