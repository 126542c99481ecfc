mod common;

use common::{t_statistic, wilcoxon_enumeration};
use fairevo::harness::stats::{
    bonferroni_threshold, paired_t, shapiro_wilk, significance, wilcoxon_signed_rank, TestKind,
};
use proptest::prelude::*;

// (sample, W, p) computed with scipy.stats.shapiro
const SHAPIRO_REFERENCE: [(&[f64], f64, f64); 7] = [
    (&[8.3229, -7.3235, 1.5121], 0.9944486766, 0.857569736),
    (&[-5.6087, 2.6518, -2.3291, 11.2543], 0.9538217302, 0.7400523802),
    (&[-2.9877, -1.1706, 2.6109, 0.1788, 4.0895], 0.9739465572, 0.8999259154),
    (&[0.8659, 1.6872, 7.2627, 2.2526, -0.525, 3.7816], 0.9368310247, 0.6337836365),
    (
        &[2.3991, -6.4444, 7.504, -2.6824, -2.6261, 1.5432, 2.6188, -1.1299],
        0.9705892538,
        0.9025917667,
    ),
    (
        &[-0.0375, 2.8645, 2.2965, 2.7375, -2.2667, 1.779, -6.6807, 2.1484, 1.6275, -4.7882, 0.5122],
        0.8240092516,
        0.01947396454,
    ),
    (
        &[0.2126, 4.3491, 0.8621, 1.9929, -4.7171, 5.5982, 3.8924, 2.434, 4.1685, 1.5748, -0.464, -1.2927],
        0.9588460565,
        0.7672373873,
    ),
];

#[test]
fn shapiro_wilk_matches_reference_values() {
    for (sample, w_ref, p_ref) in SHAPIRO_REFERENCE {
        let (w, p) = shapiro_wilk(sample).unwrap();
        assert!((w - w_ref).abs() < 1e-5, "n={} W {w} vs {w_ref}", sample.len());
        assert!((p - p_ref).abs() < 1e-4, "n={} p {p} vs {p_ref}", sample.len());
    }
}

#[test]
fn shapiro_wilk_rejects_short_samples() {
    assert!(shapiro_wilk(&[1.0, 2.0]).is_err());
}

#[test]
fn paired_t_p_value_matches_closed_forms() {
    // one degree of freedom: Cauchy tails
    let (t, p) = paired_t(&[3.0, 1.0], &[0.0, 0.5]).unwrap();
    let cauchy = 1.0 - 2.0 * t.abs().atan() / std::f64::consts::PI;
    assert!((p - cauchy).abs() < 1e-10, "{p} vs {cauchy}");
    // two degrees of freedom: p = 1 - |t| / sqrt(2 + t^2)
    let (t, p) = paired_t(&[3.0, 1.0, 2.5], &[0.0, 0.5, 0.2]).unwrap();
    let two_df = 1.0 - t.abs() / (2.0 + t * t).sqrt();
    assert!((p - two_df).abs() < 1e-10, "{p} vs {two_df}");
}

#[test]
fn centred_signed_rank_statistic_gives_p_one_in_normal_regime() {
    // 60 differences with alternating signs of ranks 1..=60 balance W+
    let a: Vec<f64> = (1..=60).map(|i| if i % 4 == 0 || i % 4 == 1 { i as f64 } else { -(i as f64) }).collect();
    let b = vec![0.0; 60];
    let (w, p) = wilcoxon_signed_rank(&a, &b).unwrap();
    assert_eq!(w, 60.0 * 61.0 / 4.0);
    assert!((p - 1.0).abs() < 1e-12);
}

#[test]
fn skewed_differences_use_signed_rank_test() {
    let fair = [0.0; 12];
    let base = [0.01, 0.02, 0.01, 0.03, 0.02, 0.01, 0.02, 0.01, 0.9, 0.95, 0.02, 0.01];
    let v = significance(&base, &fair, 11).unwrap();
    assert_eq!(v.test, TestKind::Wilcoxon);
    assert!(v.normality_p.unwrap() <= 0.05);
}

#[test]
fn gaussian_differences_use_t_test() {
    let fair = [0.0; 8];
    let base = [2.3991, -6.4444, 7.504, -2.6824, -2.6261, 1.5432, 2.6188, -1.1299];
    let v = significance(&base, &fair, 11).unwrap();
    assert_eq!(v.test, TestKind::PairedT);
    assert!(!v.significant);
}

proptest! {
    #[test]
    fn signed_rank_matches_enumeration(
        pairs in prop::collection::vec((0u8..6, 0u8..6), 1..=12)
    ) {
        let a: Vec<f64> = pairs.iter().map(|p| f64::from(p.0) / 2.0).collect();
        let b: Vec<f64> = pairs.iter().map(|p| f64::from(p.1) / 2.0).collect();
        let (w, p) = wilcoxon_signed_rank(&a, &b).unwrap();
        let (w_ref, p_ref) = wilcoxon_enumeration(&a, &b);
        prop_assert_eq!(w, w_ref);
        prop_assert!((p - p_ref).abs() < 1e-12, "{} vs {}", p, p_ref);
    }

    #[test]
    fn t_statistic_matches_closed_form(
        pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..40)
    ) {
        let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let (t, p) = paired_t(&a, &b).unwrap();
        prop_assert!((t - t_statistic(&a, &b)).abs() <= 1e-9 * t.abs().max(1.0));
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn bonferroni_is_monotone(m in 1usize..200) {
        prop_assert!(bonferroni_threshold(m + 1) < bonferroni_threshold(m));
        prop_assert!(bonferroni_threshold(m) <= 0.05);
    }

    #[test]
    fn corrected_significance_implies_uncorrected(
        pairs in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 5..30),
        m in 1usize..20,
    ) {
        let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let v = significance(&a, &b, m).unwrap();
        prop_assert!(!v.significant || v.significant_uncorrected);
        prop_assert_eq!(v.threshold, bonferroni_threshold(m));
    }
}
