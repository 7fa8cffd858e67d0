//! Small encoders and linear classifiers standing in for the two network streams.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::random;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Linear,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Linear => x,
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation output.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Tanh => 1.0 - y * y,
        }
    }

    pub fn code(self) -> u32 {
        match self {
            Activation::Linear => 0,
            Activation::Tanh => 1,
        }
    }

    pub fn from_code(code: u32) -> Result<Self> {
        match code {
            0 => Ok(Activation::Linear),
            1 => Ok(Activation::Tanh),
            other => Err(Error::Format(format!("unknown activation code {other}"))),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Linear => "linear",
            Activation::Tanh => "tanh",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "linear" => Ok(Activation::Linear),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::param(format!("unknown activation '{other}'"))),
        }
    }
}

/// `act(A x + b)`: maps `input_dim` inputs to `d` features.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub activation: Activation,
}

/// Values kept from the forward pass for back-propagation.
#[derive(Debug, Clone)]
pub struct EncoderTrace {
    pub output: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderGrad {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl Encoder {
    pub fn init(rng: &mut impl Rng, input_dim: usize, feature_dim: usize, activation: Activation) -> Self {
        let scale = 1.0 / (input_dim as f64).sqrt();
        Encoder {
            weights: random::gaussian(rng, feature_dim, input_dim) * scale,
            bias: DVector::zeros(feature_dim),
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn feature_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn forward(&self, inputs: &DMatrix<f64>) -> Result<EncoderTrace> {
        if inputs.nrows() != self.input_dim() {
            return Err(Error::dim(format!(
                "encoder expects {} inputs, got {}",
                self.input_dim(),
                inputs.nrows()
            )));
        }
        let mut out = &self.weights * inputs;
        for mut col in out.column_iter_mut() {
            col += &self.bias;
        }
        let act = self.activation;
        out.apply(|v| *v = act.apply(*v));
        Ok(EncoderTrace { output: out })
    }

    pub fn backward(&self, inputs: &DMatrix<f64>, trace: &EncoderTrace, grad_output: &DMatrix<f64>) -> EncoderGrad {
        let act = self.activation;
        let pre_grad = grad_output.zip_map(&trace.output, |g, y| g * act.derivative_from_output(y));
        EncoderGrad {
            weights: &pre_grad * inputs.transpose(),
            bias: pre_grad.column_sum(),
        }
    }
}

/// Linear classifier `W^T φ + b` with `W` of shape `d × C`.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierGrad {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl Classifier {
    pub fn zeros(feature_dim: usize, class_count: usize) -> Self {
        Classifier {
            weights: DMatrix::zeros(feature_dim, class_count),
            bias: DVector::zeros(class_count),
        }
    }

    pub fn init(rng: &mut impl Rng, feature_dim: usize, class_count: usize) -> Self {
        Classifier {
            weights: random::gaussian(rng, feature_dim, class_count) * 0.01,
            bias: DVector::zeros(class_count),
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn class_count(&self) -> usize {
        self.weights.ncols()
    }

    /// `C × N` class scores.
    pub fn logits(&self, features: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = self.weights.tr_mul(features);
        for mut col in z.column_iter_mut() {
            col += &self.bias;
        }
        z
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(self.bias.iter()).all(|v| v.is_finite())
    }
}

/// Source stream (Θ, W) and target stream (Θ*, W*).
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStreamModel {
    pub source_encoder: Encoder,
    pub target_encoder: Encoder,
    pub source_classifier: Classifier,
    pub target_classifier: Classifier,
    /// Squared-norm cap applied to encoder outputs; `None` leaves them unconstrained.
    pub norm_cap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub source_encoder: EncoderGrad,
    pub target_encoder: EncoderGrad,
    pub source_classifier: ClassifierGrad,
    pub target_classifier: ClassifierGrad,
}

impl TwoStreamModel {
    /// Both streams start from the same parameters.
    pub fn init(seed: u64, input_dim: usize, feature_dim: usize, class_count: usize, activation: Activation) -> Self {
        let mut rng = random::rng(seed);
        let encoder = Encoder::init(&mut rng, input_dim, feature_dim, activation);
        let classifier = Classifier::init(&mut rng, feature_dim, class_count);
        TwoStreamModel {
            source_encoder: encoder.clone(),
            target_encoder: encoder,
            source_classifier: classifier.clone(),
            target_classifier: classifier,
            norm_cap: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.source_encoder.feature_dim();
        let shapes_ok = self.target_encoder.feature_dim() == d
            && self.source_encoder.input_dim() == self.target_encoder.input_dim()
            && self.source_classifier.feature_dim() == d
            && self.target_classifier.feature_dim() == d
            && self.source_classifier.class_count() == self.target_classifier.class_count()
            && self.source_encoder.bias.len() == d
            && self.target_encoder.bias.len() == d
            && self.source_classifier.bias.len() == self.source_classifier.class_count()
            && self.target_classifier.bias.len() == self.target_classifier.class_count();
        if !shapes_ok {
            return Err(Error::dim("two-stream model has inconsistent parameter shapes"));
        }
        Ok(())
    }

    pub fn class_count(&self) -> usize {
        self.source_classifier.class_count()
    }

    /// Parameter slices in a fixed order shared with [`ModelGrads::slices`].
    pub fn slices_mut(&mut self) -> [&mut [f64]; 8] {
        [
            self.source_encoder.weights.as_mut_slice(),
            self.source_encoder.bias.as_mut_slice(),
            self.target_encoder.weights.as_mut_slice(),
            self.target_encoder.bias.as_mut_slice(),
            self.source_classifier.weights.as_mut_slice(),
            self.source_classifier.bias.as_mut_slice(),
            self.target_classifier.weights.as_mut_slice(),
            self.target_classifier.bias.as_mut_slice(),
        ]
    }

    pub fn slices(&self) -> [&[f64]; 8] {
        [
            self.source_encoder.weights.as_slice(),
            self.source_encoder.bias.as_slice(),
            self.target_encoder.weights.as_slice(),
            self.target_encoder.bias.as_slice(),
            self.source_classifier.weights.as_slice(),
            self.source_classifier.bias.as_slice(),
            self.target_classifier.weights.as_slice(),
            self.target_classifier.bias.as_slice(),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    /// Plain gradient-descent update.
    pub fn step(&mut self, grads: &ModelGrads, lr: f64) {
        for (p, g) in self.slices_mut().into_iter().zip(grads.slices()) {
            for (pv, gv) in p.iter_mut().zip(g) {
                *pv -= lr * gv;
            }
        }
    }
}

impl ModelGrads {
    pub fn slices(&self) -> [&[f64]; 8] {
        [
            self.source_encoder.weights.as_slice(),
            self.source_encoder.bias.as_slice(),
            self.target_encoder.weights.as_slice(),
            self.target_encoder.bias.as_slice(),
            self.source_classifier.weights.as_slice(),
            self.source_classifier.bias.as_slice(),
            self.target_classifier.weights.as_slice(),
            self.target_classifier.bias.as_slice(),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }
}

/// One encoder plus one classifier, used by the source-only, target-only
/// and pooled baselines.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleStream {
    pub encoder: Encoder,
    pub classifier: Classifier,
    pub norm_cap: Option<f64>,
}

impl SingleStream {
    pub fn init(seed: u64, input_dim: usize, feature_dim: usize, class_count: usize, activation: Activation) -> Self {
        let m = TwoStreamModel::init(seed, input_dim, feature_dim, class_count, activation);
        SingleStream {
            encoder: m.source_encoder,
            classifier: m.source_classifier,
            norm_cap: None,
        }
    }
}
