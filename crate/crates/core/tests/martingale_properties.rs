use approx::assert_relative_eq;

use hilltail::ks::{ks_two_sample, ks_two_sample_critical};
use hilltail::martingale::{
    centering_A, observed_W, simulate_W, trajectory, variance_W, MartingaleConfig,
};
use hilltail::sampling::{exp_stream, sample_model, QuantileModel};
use hilltail::{RngStream, WeightFunction};

#[test]
fn centering_matches_direct_products() {
    for gamma in [0.5, 1.0, 2.0] {
        for tau in [0.1, 0.25, 0.5] {
            for k in [2usize, 10, 500] {
                let f = WeightFunction::power(tau).unwrap();
                let cfg = MartingaleConfig::new(gamma, f.clone(), k).unwrap();
                let m = k - 1;
                let mut direct = f.eval(m);
                for j in 1..=m {
                    let s: f64 = (j..=m).map(|h| 1.0 / (1.0 + gamma / h as f64)).product();
                    direct -= (f.eval(j) - f.eval(j - 1)) * s;
                }
                assert_relative_eq!(centering_A(&cfg), direct, max_relative = 1e-12);
            }
        }
    }
}

#[test]
fn observed_statistic_follows_simulated_law() {
    // pure Weibull data with the true endpoint: W* has exactly the law of W
    for gamma in [0.5, 1.0] {
        let (n, k, reps) = (500usize, 100usize, 1000u64);
        let cfg = MartingaleConfig::new(gamma, WeightFunction::power(0.25).unwrap(), k).unwrap();
        let model = QuantileModel::lookup("weibull1", gamma).unwrap();
        let obs: Vec<f64> = (0..reps)
            .map(|b| {
                let s = sample_model(&model, n, RngStream::new(31, b)).unwrap();
                observed_W(&s, &cfg, Some(1.0)).unwrap()
            })
            .collect();
        let sim: Vec<f64> = (0..reps)
            .map(|b| simulate_W(&cfg, RngStream::new(32, b)))
            .collect();
        let d = ks_two_sample(&obs, &sim);
        assert!(
            d < ks_two_sample_critical(0.01, 1000, 1000),
            "gamma {gamma}: KS {d}"
        );
    }
}

#[test]
fn mean_absolute_value_stays_bounded() {
    let f = WeightFunction::power(0.25).unwrap();
    let checkpoints = [100usize, 500, 2000, 5000];
    let paths = 2000u64;
    let mut mean_abs = [0.0f64; 4];
    for b in 0..paths {
        let e = exp_stream(RngStream::new(33, b), 5000).unwrap();
        for (i, p) in trajectory(1.0, &f, &e, &checkpoints)
            .unwrap()
            .iter()
            .enumerate()
        {
            mean_abs[i] += p.w.abs() / paths as f64;
        }
    }
    for w in mean_abs.windows(2) {
        assert!(w[1] <= 1.1 * w[0], "{mean_abs:?}");
    }
}

#[test]
fn exact_variance_agrees_with_tabulated_spread() {
    let cfg = MartingaleConfig::new(1.0, WeightFunction::power(0.25).unwrap(), 2000).unwrap();
    let xs: Vec<f64> = (0..4000)
        .map(|b| simulate_W(&cfg, RngStream::new(34, b)))
        .collect();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let exact = variance_W(&cfg);
    assert!(
        (var / exact - 1.0).abs() < 5.0 * (2.0 / n).sqrt(),
        "{var} vs {exact}"
    );
}
