mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;

use impact_core::detection::{DetectionConfig, DetectionMode};
use impact_core::dynamics::Affinity;
use impact_core::evaluation::{
    build_ground_truth, classification_metrics, mean_absolute_error, predict, ContextBins, Observation,
    ScenarioKey,
};
use impact_core::model::{EnvProperty, Timestamp};
use impact_core::synthetic::{generate, SyntheticSpec};

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn labels() -> impl Strategy<Value = (Vec<bool>, Vec<bool>)> {
    (1usize..200).prop_flat_map(|n| (prop::collection::vec(any::<bool>(), n), prop::collection::vec(any::<bool>(), n)))
}

proptest! {
    #![proptest_config(common::prop_config(51))]

    #[test]
    fn accuracy_and_f1_definitions((pred, truth) in labels()) {
        let m = classification_metrics(&pred, &truth).unwrap();
        let n = pred.len();
        let tp = pred.iter().zip(&truth).filter(|(p, t)| **p && **t).count();
        let tn = pred.iter().zip(&truth).filter(|(p, t)| !**p && !**t).count();
        prop_assert_eq!((m.tp, m.tn, m.n), (tp, tn, n));
        prop_assert_eq!(m.tp + m.fp + m.fn_ + m.tn, n);
        prop_assert_eq!(m.accuracy, (tp + tn) as f64 / n as f64);
        for c in [&m.conflict, &m.no_conflict] {
            prop_assert!((c.f1 - harmonic(c.precision, c.recall)).abs() < 1e-12);
        }
    }

    #[test]
    fn mae_of_likelihoods_is_a_probability(
        pairs in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..100),
    ) {
        let (el, ol): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let mae = mean_absolute_error(&el, &ol).unwrap();
        prop_assert!((0.0..=1.0).contains(&mae));
        prop_assert_eq!(mean_absolute_error(&ol, &ol).unwrap(), 0.0);
    }

    #[test]
    fn ground_truth_is_conflict_rate(obs in prop::collection::vec((0u32..4, any::<bool>()), 0..80)) {
        let bins = ContextBins::default();
        let key = |h: u32| {
            let start = Timestamp::from_secs(f64::from(h * bins.hours) * 3600.0);
            ScenarioKey::new("R1", "R2", EnvProperty::Temperature, "living", start, &BTreeMap::new(), &bins)
        };
        let observations: Vec<Observation> = obs.iter().map(|&(h, c)| Observation { key: key(h), conflict: c }).collect();
        let table = build_ground_truth(&observations);
        for h in 0..4 {
            let seen: Vec<bool> = obs.iter().filter(|o| o.0 == h).map(|o| o.1).collect();
            let want = if seen.is_empty() { 0.0 } else { seen.iter().filter(|c| **c).count() as f64 / seen.len() as f64 };
            prop_assert_eq!(table.likelihood(&key(h)), want);
        }
        for s in table.scenarios.values() {
            prop_assert!(s.conflicts <= s.occurrences);
        }
    }
}

proptest! {
    #![proptest_config(common::prop_config(52))]

    #[test]
    fn baseline_over_predicts(seed in any::<u64>()) {
        let aff = Affinity::default_profile();
        let corpus = generate(&SyntheticSpec::default(), &aff, seed).unwrap();
        let truth = corpus.truth();
        let cfg = DetectionConfig::default();
        let with = predict(&corpus, &aff, &cfg, 0.0).unwrap();
        let base_cfg = DetectionConfig { mode: DetectionMode::NoPreference, ..cfg };
        let base = predict(&corpus, &aff, &base_cfg, 0.0).unwrap();
        // every preference-aware positive is also a baseline positive
        prop_assert!(with.iter().zip(&base).all(|(w, b)| !*w || *b));
        let mw = classification_metrics(&with, &truth).unwrap();
        let mb = classification_metrics(&base, &truth).unwrap();
        prop_assert!(mb.conflict.recall >= mw.conflict.recall);
        prop_assert!(mb.conflict.precision <= mw.conflict.precision);
    }
}
