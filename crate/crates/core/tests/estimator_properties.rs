use approx::assert_relative_eq;
use proptest::prelude::*;

use hilltail::estimators::{functional_hill, kernel_hill, log_spacings, normalized_hill};
use hilltail::{KernelFunction, SampleData, WeightFunction};

fn positive_sample() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..100.0, 5..60)
}

proptest! {
    #[test]
    fn scale_invariance(xs in positive_sample(), c in 0.001f64..1000.0, tau in 0.05f64..1.5) {
        let k = xs.len() - 1;
        let f = WeightFunction::power(tau).unwrap();
        let a = functional_hill(&SampleData::from_values(xs.clone()).unwrap(), &f, k).unwrap();
        let scaled: Vec<f64> = xs.iter().map(|x| x * c).collect();
        let b = functional_hill(&SampleData::from_values(scaled).unwrap(), &f, k).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "{} vs {}", a, b);
    }

    #[test]
    fn hill_telescoping_identity(xs in positive_sample()) {
        let s = SampleData::from_values(xs).unwrap();
        let n = s.len();
        let k = n - 1;
        let t = functional_hill(&s, &WeightFunction::power(1.0).unwrap(), k).unwrap();
        // Σ_j j (ln X_{n-j+1} - ln X_{n-j}) = Σ_{i<=k} (ln X_{n-i+1} - ln X_{n-k})
        let base = s.order_stat(n - k).ln();
        let direct: f64 = (1..=k).map(|i| s.order_stat(n - i + 1).ln() - base).sum();
        prop_assert!((t - direct).abs() <= 1e-9 * (1.0 + direct.abs()));
        let hill = kernel_hill(&s, &KernelFunction::constant(1.0), k).unwrap();
        prop_assert!((hill - direct / k as f64).abs() <= 1e-9 * (1.0 + hill.abs()));
    }

    #[test]
    fn monotone_in_weights(xs in positive_sample(), lo in 0.05f64..1.0, extra in 0.0f64..1.0) {
        let s = SampleData::from_values(xs).unwrap();
        let k = s.len() - 1;
        let m = k;
        let f: Vec<f64> = (0..=m).map(|j| (j as f64).powf(lo)).collect();
        let g: Vec<f64> = f.iter().enumerate().map(|(j, v)| v + extra * j as f64).collect();
        let tf = functional_hill(&s, &WeightFunction::table(f).unwrap(), k).unwrap();
        let tg = functional_hill(&s, &WeightFunction::table(g).unwrap(), k).unwrap();
        prop_assert!(tf <= tg + 1e-12);
        prop_assert!(tf >= 0.0);
    }

    #[test]
    fn spacings_nonnegative(xs in positive_sample()) {
        let s = SampleData::from_values(xs).unwrap();
        let d = log_spacings(&s, s.len() - 1).unwrap();
        prop_assert!(d.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn normalised_statistic_is_scale_free(xs in positive_sample(), c in 0.01f64..100.0) {
        let s = SampleData::from_values(xs.clone()).unwrap();
        let k = s.len() - 2;
        let f = WeightFunction::power(0.25).unwrap();
        let a = normalized_hill(&s, &f, k, None);
        let scaled = SampleData::from_values(xs.iter().map(|x| x * c).collect()).unwrap();
        let b = normalized_hill(&scaled, &f, k, None);
        if let (Ok(a), Ok(b)) = (a, b) {
            prop_assert!((a - b).abs() <= 1e-8 * (1.0 + a.abs()));
        }
    }
}

#[test]
fn hand_computed_values() {
    // top four values e^3, e^2, e^1, e^0: unit spacings
    let s = SampleData::from_values(vec![1.0, 1f64.exp(), 2f64.exp(), 3f64.exp()]).unwrap();
    let f = WeightFunction::power(1.0).unwrap();
    assert_relative_eq!(
        functional_hill(&s, &f, 3).unwrap(),
        6.0,
        max_relative = 1e-12
    );
    let q = WeightFunction::power(0.5).unwrap();
    let expected = 1.0 + 2f64.sqrt() + 3f64.sqrt();
    assert_relative_eq!(
        functional_hill(&s, &q, 3).unwrap(),
        expected,
        max_relative = 1e-12
    );
}
