use nalgebra::DMatrix;
use proptest::prelude::*;

use spdalign::io::{format_case, parse_cases, read_features, read_model, write_features, write_model, RunConfig, CONFIG_KEYS};
use spdalign::{Activation, FeatureBlock, TwoStreamModel};

fn block() -> impl Strategy<Value = FeatureBlock> {
    (1usize..6, 0usize..8, 1usize..5).prop_flat_map(|(d, n, c)| {
        (
            prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), d * n),
            prop::collection::vec(0..c, n),
        )
            .prop_map(move |(data, labels)| FeatureBlock::new(DMatrix::from_vec(d, n, data), labels, c).unwrap())
    })
}

proptest! {
    #[test]
    fn feature_container_round_trips_bit_exactly(b in block()) {
        let bytes = write_features(&b).unwrap();
        let back = read_features(&bytes).unwrap();
        prop_assert_eq!(back.labels(), b.labels());
        let bits = |m: &DMatrix<f64>| m.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(back.columns()), bits(b.columns()));
    }

    #[test]
    fn decoders_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..256)) {
        let _ = read_features(&bytes);
        let _ = read_model(&bytes);
    }

    #[test]
    fn truncated_or_extended_containers_are_rejected(b in block(), cut in 1usize..16, extra in 1usize..9) {
        let bytes = write_features(&b).unwrap();
        prop_assert!(read_features(&bytes[..bytes.len().saturating_sub(cut)]).is_err());
        let mut longer = bytes.clone();
        longer.extend(vec![0u8; extra]);
        prop_assert!(read_features(&longer).is_err());
    }

    #[test]
    fn text_parsers_never_panic(text in "\\PC{0,200}") {
        let _ = RunConfig::parse(&text);
        let _ = parse_cases(&text);
    }

    #[test]
    fn config_lines_never_panic(key in prop::sample::select(CONFIG_KEYS.to_vec()), value in "[-+0-9.eE a-zA-Z,]{0,12}") {
        let _ = RunConfig::parse(&format!("{key} = {value}\n"));
    }

    #[test]
    fn case_lines_round_trip(
        pred in prop::collection::btree_set(0usize..1000, 1..8),
        truth in prop::collection::btree_set(0usize..1000, 1..8),
        tags in prop::collection::btree_set("[a-z_-]{1,8}", 0..4),
    ) {
        let case = spdalign::metrics::RankedCase::new(pred.into_iter().collect(), truth.into_iter().collect(), tags).unwrap();
        let line = format_case(&case);
        prop_assert_eq!(parse_cases(&line).unwrap(), vec![case]);
    }
}

#[test]
fn model_dump_round_trips() {
    let mut m = TwoStreamModel::init(4, 5, 3, 2, Activation::Tanh);
    m.norm_cap = Some(2.5);
    let back = read_model(&write_model(&m).unwrap()).unwrap();
    assert_eq!(back.slices(), m.slices());
    assert_eq!(back.norm_cap, Some(2.5));
}

#[test]
fn config_text_round_trips() {
    let mut cfg = RunConfig::parse("kind = airm\ntau = 3.5\nbaselines = S\nseed = 9\n").unwrap();
    assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
    cfg.experiment.train.steps = 17;
    assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
}

#[test]
fn unknown_keys_are_rejected() {
    let err = RunConfig::parse("steps = 3\nlearning_rate = 0.1\n").unwrap_err();
    assert!(err.to_string().contains("line 2"), "{err}");
}
