//! `key = value` run configuration.
//!
//! `#` starts a comment. Every key is optional and defaults to the shift
//! benchmark; unknown or repeated keys are errors.

use std::collections::BTreeSet;
use std::str::FromStr;

use crate::distance::DistanceKind;
use crate::error::{Error, Result};
use crate::model::Activation;
use crate::trainer::{Baseline, Experiment};

pub const CONFIG_KEYS: &[&str] = &[
    "seed",
    "steps",
    "lr",
    "source_batch",
    "target_batch",
    "kind",
    "sigma1",
    "sigma2",
    "eta",
    "tau",
    "eps",
    "classes",
    "input_dim",
    "feature_dim",
    "activation",
    "source_per_class",
    "target_train_per_class",
    "target_test_per_class",
    "separation",
    "spread",
    "anisotropy",
    "rotation_deg",
    "translation",
    "scale",
    "noise",
    "baselines",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauSetting {
    /// No norm constraint.
    Off,
    /// Mean `‖φ‖²` of the initial source features.
    Auto,
    Fixed(f64),
}

impl FromStr for TauSetting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(TauSetting::Auto),
            "none" => Ok(TauSetting::Off),
            v => {
                let t = finite(v)?;
                if t > 0.0 {
                    Ok(TauSetting::Fixed(t))
                } else {
                    Err(format!("must be positive, 'auto' or 'none', got {v}"))
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            experiment: Experiment::shift_benchmark(0),
        }
    }
}

fn finite(v: &str) -> Result<f64, String> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(format!("'{v}' is not a finite number")),
    }
}

fn nonneg(v: &str) -> Result<f64, String> {
    let x = finite(v)?;
    if x >= 0.0 {
        Ok(x)
    } else {
        Err(format!("must be non-negative, got {v}"))
    }
}

fn positive(v: &str) -> Result<f64, String> {
    let x = finite(v)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err(format!("must be positive, got {v}"))
    }
}

fn count(v: &str) -> Result<usize, String> {
    match v.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err(format!("must be an integer ≥ 1, got '{v}'")),
    }
}

fn baselines(v: &str) -> Result<Vec<Baseline>, String> {
    if v == "none" {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for tok in v.split(',') {
        let b = tok.parse::<Baseline>().map_err(|e| e.to_string())?;
        if out.contains(&b) {
            return Err(format!("baseline {b} listed twice"));
        }
        out.push(b);
    }
    Ok(out)
}

impl RunConfig {
    pub fn tau(&self) -> TauSetting {
        let e = &self.experiment;
        match (e.align.tau, e.auto_tau) {
            (Some(t), _) => TauSetting::Fixed(t),
            (None, true) => TauSetting::Auto,
            (None, false) => TauSetting::Off,
        }
    }

    fn apply(&mut self, key: &str, v: &str) -> Result<(), String> {
        let e = &mut self.experiment;
        match key {
            "seed" => {
                let s = v.parse::<u64>().map_err(|_| format!("'{v}' is not a 64-bit unsigned integer"))?;
                e.train.seed = s;
                e.synth.seed = s;
            }
            "steps" => e.train.steps = count(v)?,
            "lr" => e.train.lr = nonneg(v)?,
            "source_batch" => e.train.source_batch = count(v)?,
            "target_batch" => e.train.target_batch = count(v)?,
            "kind" => e.align.kind = v.parse::<DistanceKind>().map_err(|e| e.to_string())?,
            "sigma1" => e.align.sigma1 = nonneg(v)?,
            "sigma2" => e.align.sigma2 = nonneg(v)?,
            "eta" => e.align.eta = nonneg(v)?,
            "tau" => {
                let (tau, auto) = match v.parse::<TauSetting>()? {
                    TauSetting::Off => (None, false),
                    TauSetting::Auto => (None, true),
                    TauSetting::Fixed(t) => (Some(t), false),
                };
                e.align.tau = tau;
                e.auto_tau = auto;
            }
            "eps" => e.align.eps = positive(v)?,
            "classes" => {
                let c = count(v)?;
                e.synth.class_count = c;
                e.align.class_count = c;
            }
            "input_dim" => e.synth.input_dim = count(v)?,
            "feature_dim" => e.feature_dim = count(v)?,
            "activation" => e.activation = v.parse::<Activation>().map_err(|e| e.to_string())?,
            "source_per_class" => e.synth.source_per_class = count(v)?,
            "target_train_per_class" => e.synth.target_train_per_class = count(v)?,
            "target_test_per_class" => e.synth.target_test_per_class = count(v)?,
            "separation" => e.synth.separation = nonneg(v)?,
            "spread" => e.synth.spread = nonneg(v)?,
            "anisotropy" => {
                let a = finite(v)?;
                if a < 1.0 {
                    return Err(format!("must be at least 1, got {v}"));
                }
                e.synth.anisotropy = a;
            }
            "rotation_deg" => e.synth.shift.rotation_deg = finite(v)?,
            "translation" => e.synth.shift.translation = nonneg(v)?,
            "scale" => e.synth.shift.scale = finite(v)?,
            "noise" => e.synth.shift.noise = nonneg(v)?,
            "baselines" => e.baselines = baselines(v)?,
            _ => unreachable!("key list and handlers disagree on '{key}'"),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| Error::parse(line, format!("expected 'key = value', got '{content}'")))?;
            let (key, value) = (key.trim(), value.trim());
            if !CONFIG_KEYS.contains(&key) {
                return Err(Error::parse(line, format!("unknown key '{key}'")));
            }
            if !seen.insert(key.to_string()) {
                return Err(Error::parse(line, format!("key '{key}' given twice")));
            }
            cfg.apply(key, value).map_err(|msg| Error::parse(line, format!("{key}: {msg}")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        e.synth.validate()?;
        e.align.validate()?;
        e.train.validate()?;
        if e.align.class_count != e.synth.class_count {
            return Err(Error::param("classes differs between data and alignment settings"));
        }
        if e.feature_dim == 0 {
            return Err(Error::param("feature_dim must be at least 1"));
        }
        Ok(())
    }

    /// Every key with its current value, in [`CONFIG_KEYS`] order.
    pub fn to_text(&self) -> String {
        let e = &self.experiment;
        let tau = match self.tau() {
            TauSetting::Off => "none".to_string(),
            TauSetting::Auto => "auto".to_string(),
            TauSetting::Fixed(t) => t.to_string(),
        };
        let baselines = if e.baselines.is_empty() {
            "none".to_string()
        } else {
            e.baselines.iter().map(|b| b.name()).collect::<Vec<_>>().join(",")
        };
        let values = [
            e.train.seed.to_string(),
            e.train.steps.to_string(),
            e.train.lr.to_string(),
            e.train.source_batch.to_string(),
            e.train.target_batch.to_string(),
            e.align.kind.to_string(),
            e.align.sigma1.to_string(),
            e.align.sigma2.to_string(),
            e.align.eta.to_string(),
            tau,
            e.align.eps.to_string(),
            e.synth.class_count.to_string(),
            e.synth.input_dim.to_string(),
            e.feature_dim.to_string(),
            e.activation.to_string(),
            e.synth.source_per_class.to_string(),
            e.synth.target_train_per_class.to_string(),
            e.synth.target_test_per_class.to_string(),
            e.synth.separation.to_string(),
            e.synth.spread.to_string(),
            e.synth.anisotropy.to_string(),
            e.synth.shift.rotation_deg.to_string(),
            e.synth.shift.translation.to_string(),
            e.synth.shift.scale.to_string(),
            e.synth.shift.noise.to_string(),
            baselines,
        ];
        CONFIG_KEYS
            .iter()
            .zip(values)
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_err(text: &str) -> (usize, String) {
        match RunConfig::parse(text).unwrap_err() {
            Error::Parse { line, message } => (line, message),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn empty_text_is_the_benchmark() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
        assert_eq!(RunConfig::default().tau(), TauSetting::Auto);
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.experiment.align.kind = DistanceKind::Airm;
        cfg.experiment.align.tau = Some(2.5);
        cfg.experiment.auto_tau = false;
        cfg.experiment.baselines = vec![Baseline::Pooled];
        cfg.experiment.align.eps = 1e-6;
        assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
        assert_eq!(RunConfig::parse(&RunConfig::default().to_text()).unwrap(), RunConfig::default());
    }

    #[test]
    fn values_and_comments() {
        let cfg = RunConfig::parse("# run\nsigma1 = 0.5  # weight\nkind=airm\ntau = none\nclasses = 4\nbaselines = S,T\n").unwrap();
        let e = &cfg.experiment;
        assert_eq!(e.align.sigma1, 0.5);
        assert_eq!(e.align.kind, DistanceKind::Airm);
        assert_eq!(cfg.tau(), TauSetting::Off);
        assert_eq!((e.synth.class_count, e.align.class_count), (4, 4));
        assert_eq!(e.baselines, vec![Baseline::SourceOnly, Baseline::TargetOnly]);
    }

    #[test]
    fn rejections_name_line_and_key() {
        let (line, msg) = parse_err("steps = 10\nsigma1 = -1\n");
        assert_eq!(line, 2);
        assert!(msg.contains("sigma1"), "{msg}");
        let (line, msg) = parse_err("\n\nlearning_rate = 0.1");
        assert_eq!(line, 3);
        assert!(msg.contains("learning_rate"));
        assert_eq!(parse_err("lr = 0.1\nlr = 0.2").0, 2);
        assert_eq!(parse_err("steps 10").0, 1);
        assert_eq!(parse_err("steps = 0").0, 1);
        assert_eq!(parse_err("eps = 0").0, 1);
        assert_eq!(parse_err("tau = -3").0, 1);
        assert_eq!(parse_err("lr = nan").0, 1);
        assert_eq!(parse_err("kind = stein").0, 1);
        assert_eq!(parse_err("baselines = S,S").0, 1);
    }
}
