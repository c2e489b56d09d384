mod common;

use common::*;
use proptest::prelude::*;
use tmatch_core::similarity::{best_offset, bundle_similarity, profile_of};
use tmatch_core::{BundleEdge, Channel, Direction, EdgeBundle, NodeId, SimilarityConfig};

const TOL: f64 = 1e-9;

fn bundle_strategy() -> impl Strategy<Value = EdgeBundle> {
    let edge = (0usize..4, any::<bool>(), 0u32..2000, 1u8..6);
    prop::collection::vec(edge, 0..8).prop_map(|edges| EdgeBundle {
        anchor: (NodeId(1), NodeId(2)),
        edges: edges
            .into_iter()
            .enumerate()
            .map(|(i, (c, fwd, t, w))| BundleEdge {
                edge: i,
                direction: if fwd {
                    Direction::Forward
                } else {
                    Direction::Backward
                },
                channel: Channel::new(CHANNELS[c]),
                time: t as f64,
                weight: w as f64,
            })
            .collect(),
    })
}

fn config_strategy() -> impl Strategy<Value = SimilarityConfig> {
    (
        0u32..=10,
        0u32..=10,
        1u32..400,
        0u32..4,
        any::<bool>(),
        any::<bool>(),
    )
        .prop_map(|(a, b, bin, steps, ignore_direction, use_weights)| {
            let b = b.min(10 - a);
            let bin = bin as f64;
            SimilarityConfig {
                w_presence: a as f64 / 10.0,
                w_count: b as f64 / 10.0,
                w_temporal: (10 - a - b) as f64 / 10.0,
                bin_width: bin,
                offset_range: steps as f64 * bin / 2.0,
                offset_step: Some(bin / 2.0),
                ignore_direction,
                use_weights,
                ..SimilarityConfig::default()
            }
        })
}

fn shifted(b: &EdgeBundle, by: f64) -> EdgeBundle {
    let mut out = b.clone();
    for e in &mut out.edges {
        e.time += by;
    }
    out
}

proptest! {
    #![proptest_config(cases())]

    #[test]
    fn components_stay_in_unit_range(b1 in bundle_strategy(), b2 in bundle_strategy(), cfg in config_strategy()) {
        prop_assert!(cfg.validate().is_ok());
        let s = bundle_similarity(&b1, &b2, &cfg);
        for v in [s.total, s.presence, s.count, s.temporal] {
            prop_assert!((-TOL..=1.0 + TOL).contains(&v), "{:?}", s);
        }
        let recomposed = cfg.w_presence * s.presence + cfg.w_count * s.count + cfg.w_temporal * s.temporal;
        prop_assert!((recomposed - s.total).abs() < TOL);
    }

    #[test]
    fn similarity_is_symmetric(b1 in bundle_strategy(), b2 in bundle_strategy(), cfg in config_strategy()) {
        let ab = bundle_similarity(&b1, &b2, &cfg);
        let ba = bundle_similarity(&b2, &b1, &cfg);
        prop_assert!((ab.total - ba.total).abs() < TOL, "{:?} vs {:?}", ab, ba);
        prop_assert!((ab.presence - ba.presence).abs() < TOL);
        prop_assert!((ab.count - ba.count).abs() < TOL);
        prop_assert!((ab.temporal - ba.temporal).abs() < TOL);
    }

    #[test]
    fn bundle_is_identical_to_itself(b in bundle_strategy(), cfg in config_strategy()) {
        let s = bundle_similarity(&b, &b, &cfg);
        prop_assert!((s.total - 1.0).abs() < TOL, "{:?}", s);
        prop_assert!((s.presence - 1.0).abs() < TOL);
        prop_assert!((s.count - 1.0).abs() < TOL);
        prop_assert!((s.temporal - 1.0).abs() < TOL);
    }

    #[test]
    fn count_is_one_exactly_for_equal_counts(b1 in bundle_strategy(), b2 in bundle_strategy()) {
        let cfg = SimilarityConfig::default();
        let s = bundle_similarity(&b1, &b2, &cfg);
        let counts = |b: &EdgeBundle| {
            profile_of(b).per_key.iter().map(|(k, v)| (k.clone(), v.count)).collect::<Vec<_>>()
        };
        prop_assert_eq!((s.count - 1.0).abs() < TOL, counts(&b1) == counts(&b2));
    }

    #[test]
    fn temporal_ignores_common_translation(
        b1 in bundle_strategy(),
        b2 in bundle_strategy(),
        cfg in config_strategy(),
        by in 0u32..5000,
    ) {
        let base = bundle_similarity(&b1, &b2, &cfg);
        let moved = bundle_similarity(&shifted(&b1, by as f64), &shifted(&b2, by as f64), &cfg);
        prop_assert!((base.temporal - moved.temporal).abs() < TOL);
        prop_assert!((base.total - moved.total).abs() < TOL);
    }

    #[test]
    fn zero_temporal_weight_ignores_times(
        b1 in bundle_strategy(),
        b2 in bundle_strategy(),
        by1 in 0u32..5000,
        by2 in 0u32..5000,
    ) {
        let cfg = SimilarityConfig {
            w_presence: 0.5,
            w_count: 0.5,
            w_temporal: 0.0,
            ..SimilarityConfig::default()
        };
        let base = bundle_similarity(&b1, &b2, &cfg);
        let moved = bundle_similarity(&shifted(&b1, by1 as f64), &shifted(&b2, by2 as f64), &cfg);
        prop_assert!((base.total - moved.total).abs() < TOL);
    }

    #[test]
    fn best_offset_stays_on_grid(b1 in bundle_strategy(), b2 in bundle_strategy(), cfg in config_strategy()) {
        let t1: Vec<f64> = profile_of(&b1).times;
        let t2: Vec<f64> = profile_of(&b2).times;
        let (delta, cosine) = best_offset(&t1, &t2, &cfg);
        prop_assert!(delta.abs() <= cfg.offset_range + TOL);
        let k = delta / cfg.offset_step();
        prop_assert!((k - k.round()).abs() < 1e-9);
        prop_assert!((-TOL..=1.0 + TOL).contains(&cosine));
        let (_, cosine_back) = best_offset(&t2, &t1, &cfg);
        prop_assert!((cosine - cosine_back).abs() < TOL);
    }
}
