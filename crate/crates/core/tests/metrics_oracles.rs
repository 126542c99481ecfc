mod common;

use common::{f1_oracle, mcc_oracle, roc_oracle, tpr_oracle};
use fairevo::metrics::{self, performance_bundle};
use proptest::prelude::*;

/// AUC as the Mann-Whitney probability that a positive outscores a
/// negative, ties counting half.
fn mann_whitney(scores: &[f64], labels: &[u8]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] == 1 && labels[j] == 0 {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

fn labelled() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    prop::collection::vec((0u8..=20, any::<bool>()), 2..120).prop_map(|v| {
        let scores = v.iter().map(|p| f64::from(p.0) / 20.0).collect();
        let labels = v.iter().map(|p| u8::from(p.1)).collect();
        (scores, labels)
    })
}

proptest! {
    #[test]
    fn confusion_metrics_match_oracles((scores, labels) in labelled()) {
        let preds = metrics::hard_predictions(&scores);
        let c = metrics::confusion(&preds, &labels).unwrap();
        prop_assert_eq!(c.total() as usize, labels.len());
        prop_assert!((metrics::mcc(&c) - mcc_oracle(&preds, &labels)).abs() <= 1e-12);
        prop_assert!((metrics::tpr(&c) - tpr_oracle(&preds, &labels)).abs() <= 1e-12);
        prop_assert!((metrics::f1(&c) - f1_oracle(&preds, &labels)).abs() <= 1e-12);
    }

    #[test]
    fn auc_equals_mann_whitney((scores, labels) in labelled()) {
        prop_assume!(labels.contains(&0) && labels.contains(&1));
        let (_, auc) = metrics::roc_and_auc(&scores, &labels).unwrap();
        prop_assert!((auc - mann_whitney(&scores, &labels)).abs() <= 1e-12);
    }

    #[test]
    fn roc_points_match_threshold_enumeration((scores, labels) in labelled()) {
        prop_assume!(labels.contains(&0) && labels.contains(&1));
        let got: Vec<(f64, f64)> = metrics::roc_curve(&scores, &labels)
            .unwrap()
            .iter()
            .map(|p| (p.fpr, p.tpr))
            .collect();
        prop_assert_eq!(got, roc_oracle(&scores, &labels));
    }

    #[test]
    fn bundle_components_are_consistent((scores, labels) in labelled()) {
        let b = performance_bundle(&scores, &labels).unwrap();
        prop_assert!((0.0..=1.0).contains(&b.performance_component));
        prop_assert!((b.nmcc - (1.0 - b.mcc) / 2.0).abs() <= 1e-12);
        prop_assert!((b.performance_component - (b.nmcc + 1.0 - b.tpr) / 2.0).abs() <= 1e-12);
    }
}

#[test]
fn perfect_and_inverted_classifiers_are_extremes() {
    let labels = [1, 0, 1, 0, 1, 0];
    let perfect = performance_bundle(&[0.9, 0.1, 0.8, 0.2, 0.7, 0.3], &labels).unwrap();
    assert_eq!((perfect.mcc, perfect.performance_component, perfect.aucroc), (1.0, 0.0, 1.0));
    let inverted = performance_bundle(&[0.1, 0.9, 0.2, 0.8, 0.3, 0.7], &labels).unwrap();
    assert_eq!((inverted.mcc, inverted.performance_component, inverted.aucroc), (-1.0, 1.0, 0.0));
}

#[test]
fn single_class_labels_have_neutral_auc() {
    let b = performance_bundle(&[0.2, 0.7, 0.9], &[1, 1, 1]).unwrap();
    assert_eq!(b.aucroc, 0.5);
    assert_eq!(b.mcc, 0.0);
}

#[test]
fn length_mismatch_is_rejected() {
    assert!(performance_bundle(&[0.2, 0.7], &[1]).is_err());
}
