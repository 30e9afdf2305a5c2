use proptest::prelude::*;

use hilltail::ks::ks_one_sample;
use hilltail::sampling::{sample_model, QuantileModel};
use hilltail::tables::tabulate_null;
use hilltail::testing::{monte_carlo_p_value, weibull_domain_test};
use hilltail::{NullTable, RngStream, WeightFunction};

fn quarter() -> WeightFunction {
    WeightFunction::power(0.25).unwrap()
}

#[test]
fn p_values_are_nearly_uniform_under_the_null() {
    let table = tabulate_null(1.0, &quarter(), 200, 1000, 51).unwrap();
    let model = QuantileModel::lookup("weibull1", 1.0).unwrap();
    let mut ps: Vec<f64> = (0..500u64)
        .map(|r| {
            let s = sample_model(&model, 300, RngStream::new(52, r)).unwrap();
            weibull_domain_test(&s, 1.0, &quarter(), 200, &table, 0.05, None)
                .unwrap()
                .p_value
        })
        .collect();
    ps.sort_by(f64::total_cmp);
    let d = ks_one_sample(&ps, |x| x.clamp(0.0, 1.0));
    assert!(d <= 0.1, "KS of p-values {d}");
}

#[test]
fn known_endpoint_gives_exact_null() {
    let table = tabulate_null(1.0, &quarter(), 100, 1000, 53).unwrap();
    let model = QuantileModel::lookup("weibull1", 1.0).unwrap();
    let rejected = (0..400u64)
        .filter(|&r| {
            let s = sample_model(&model, 300, RngStream::new(54, r)).unwrap();
            weibull_domain_test(&s, 1.0, &quarter(), 100, &table, 0.05, Some(1.0))
                .unwrap()
                .reject
        })
        .count();
    // binomial(400, 0.05): mean 20, sd 4.4
    assert!(rejected <= 35, "rejected {rejected}/400");
}

proptest! {
    #[test]
    fn p_value_is_two_sided(values in prop::collection::vec(-1.0f64..1.0, 1..200), w in -1.5f64..1.5) {
        let t = NullTable::from_values(1.0, quarter(), 2000, None, values.clone()).unwrap();
        let neg = NullTable::from_values(1.0, quarter(), 2000, None, values.iter().map(|v| -v).collect()).unwrap();
        prop_assert_eq!(monte_carlo_p_value(&t, w), monte_carlo_p_value(&neg, -w));
        prop_assert_eq!(monte_carlo_p_value(&t, w), monte_carlo_p_value(&t, -w));
    }

    #[test]
    fn p_value_monotone_in_magnitude(values in prop::collection::vec(-1.0f64..1.0, 1..200), a in 0.0f64..1.5, b in 0.0f64..1.5) {
        let t = NullTable::from_values(1.0, quarter(), 2000, None, values).unwrap();
        let (small, large) = if a <= b { (a, b) } else { (b, a) };
        let p_small = monte_carlo_p_value(&t, small);
        let p_large = monte_carlo_p_value(&t, large);
        prop_assert!(p_large <= p_small);
        prop_assert!(p_large >= 1.0 / (t.reps + 1) as f64);
    }
}
