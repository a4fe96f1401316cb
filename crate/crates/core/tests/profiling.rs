use bwpipe::profiling::{classify_normality, summarize, summarize_values, who_bw_class, Normality, WeightClass};
use proptest::prelude::*;

fn sample() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3f64..1e3, 4..80).prop_filter("needs spread", |xs| {
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        hi - lo > 1e-3
    })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn moments_follow_affine_maps(xs in sample(), c in prop_oneof![-20.0f64..-0.05, 0.05f64..20.0], b in -1e3f64..1e3) {
        let s = summarize_values(&xs).unwrap();
        let ys: Vec<f64> = xs.iter().map(|x| c * x + b).collect();
        let t = summarize_values(&ys).unwrap();
        prop_assert!(close(t.mean, c * s.mean + b, 1e-9), "{} vs {}", t.mean, c * s.mean + b);
        prop_assert!(close(t.sd, c.abs() * s.sd, 1e-9));
        let (sk, tk) = (s.skewness.unwrap(), t.skewness.unwrap());
        prop_assert!((tk - c.signum() * sk).abs() <= 1e-6, "{tk} vs {sk}");
        let (ku, tu) = (s.excess_kurtosis.unwrap(), t.excess_kurtosis.unwrap());
        prop_assert!((ku - tu).abs() <= 1e-6 * ku.abs().max(1.0));
    }

    #[test]
    fn missing_cells_are_ignored(xs in sample(), mask in prop::collection::vec(any::<bool>(), 80)) {
        let observed: Vec<bool> = mask[..xs.len()].to_vec();
        prop_assume!(observed.iter().any(|o| *o));
        let kept: Vec<f64> = xs.iter().zip(&observed).filter(|(_, o)| **o).map(|(v, _)| *v).collect();
        let mut poisoned = xs.clone();
        for (v, o) in poisoned.iter_mut().zip(&observed) {
            if !o {
                *v = f64::NAN;
            }
        }
        prop_assert_eq!(summarize(&poisoned, &observed).unwrap(), summarize_values(&kept).unwrap());
    }
}

#[test]
fn small_and_flat_samples() {
    let one = summarize_values(&[3.0]).unwrap();
    assert_eq!((one.sd, one.skewness, one.excess_kurtosis), (0.0, None, None));
    let flat = summarize_values(&[2.0; 10]).unwrap();
    assert!(flat.is_zero_variance() && flat.skewness.is_none());
    assert!(summarize_values(&[]).is_err());
    let s = summarize_values(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
    assert_eq!(s.mean, 3.0);
    assert!((s.sd - 2.5f64.sqrt()).abs() < 1e-12);
    assert_eq!(s.skewness, Some(0.0));
    assert!((s.excess_kurtosis.unwrap() + 1.2).abs() < 1e-12);
}

#[test]
fn normality_screen() {
    let sym = summarize_values(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
    assert_eq!(classify_normality(&sym, 1.0, 1.5), Normality::Normal);
    let skewed = summarize_values(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 10.0]).unwrap();
    assert_ne!(classify_normality(&skewed, 1.0, 1.5), Normality::Normal);
}

#[test]
fn weight_class_edges() {
    assert_eq!(who_bw_class(1499.9).unwrap(), WeightClass::VeryLow);
    assert_eq!(who_bw_class(1500.0).unwrap(), WeightClass::ModeratelyLow);
    assert_eq!(who_bw_class(2499.0).unwrap(), WeightClass::ModeratelyLow);
    assert_eq!(who_bw_class(2500.0).unwrap(), WeightClass::Normal);
    assert_eq!(who_bw_class(4000.0).unwrap(), WeightClass::Normal);
    assert_eq!(who_bw_class(4001.0).unwrap(), WeightClass::High);
    assert!(who_bw_class(-1.0).is_err());
}
