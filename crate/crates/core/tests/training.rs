use spdalign::align::AlignConfig;
use spdalign::trainer::{run_experiment, synth_domain_pair, train, Baseline, Experiment, SynthSpec, TrainParams};
use spdalign::{Activation, TwoStreamModel};

#[test]
fn loss_at_step_500_is_below_step_1_on_ten_seeds() {
    for seed in 0..10 {
        let mut exp = Experiment::shift_benchmark(seed);
        exp.train.steps = 500;
        exp.baselines.clear();
        let r = run_experiment(&exp).unwrap();
        assert_eq!(r.history.len(), 500);
        let (first, last) = (r.history[0].total, r.history[499].total);
        assert!(last.is_finite() && last < first, "seed {seed}: {first} -> {last}");
    }
}

#[test]
fn five_class_shift_aligned_beats_source_only() {
    let (mut aligned, mut source_only) = (0.0, 0.0);
    for seed in 0..5 {
        let mut exp = Experiment::shift_benchmark(seed);
        exp.synth.class_count = 5;
        exp.align.class_count = 5;
        exp.baselines = vec![Baseline::SourceOnly];
        let r = run_experiment(&exp).unwrap();
        aligned += r.aligned.top1();
        source_only += r.baselines[0].1.top1();
    }
    assert!(source_only < aligned, "mean S {} vs aligned {}", source_only / 5.0, aligned / 5.0);
}

#[test]
fn zero_alignment_weights_decouple_the_streams() {
    let spec = {
        let mut s = SynthSpec::new(3, 4, 2);
        s.source_per_class = 6;
        s
    };
    let data = synth_domain_pair(&spec).unwrap();
    let params = TrainParams {
        steps: 30,
        ..TrainParams::default()
    };
    let mut cfg = AlignConfig::new(3);
    cfg.sigma1 = 0.0;
    cfg.sigma2 = 0.0;
    cfg.eta = 0.0;
    let run = |target: &spdalign::FeatureBlock| {
        let mut m = TwoStreamModel::init(7, 4, 5, 3, Activation::Tanh);
        train(&mut m, &data.source, target, &cfg, &params).unwrap();
        m
    };
    // Changing only the target data must leave the source stream untouched.
    let a = run(&data.target_train);
    let b = run(&data.target_test);
    assert_eq!(a.source_encoder, b.source_encoder);
    assert_eq!(a.source_classifier, b.source_classifier);
    assert_ne!(a.target_encoder, b.target_encoder);
}
