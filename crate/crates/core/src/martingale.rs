//! The centred exponential-functional process `W_k(f)` and its link to the
//! normalised Hill statistic on pure-Weibull data.
//!
//! For iid unit exponentials `E_1, E_2, ...` let
//! `S_{j,m} = exp(-γ Σ_{h=j}^{m} E_h / h)` and `s_{j,m} = E S_{j,m}`.
//! The process over `m` exponentials is
//!
//! ```text
//! W(m) = Σ_{j=1}^{m} Δf(j) (S_{j,m} - s_{j,m})
//! ```
//!
//! The public configuration is keyed by `k`, the number of top order
//! statistics of a sample; it uses `m = k - 1` exponentials, which is the
//! form equated with `A_{k,n}(f) - T_{k-1}(f) / (y0 - ln X_{n-k+1,n})`.

use rand::Rng;

use crate::error::{invalid, Result};
use crate::estimators::{normalized_hill, WeightFunction};
use crate::sampling::{fill_exponentials, unit_exponential, RngStream, SampleData};

#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleConfig {
    pub gamma: f64,
    pub weights: WeightFunction,
    pub k: usize,
}

impl MartingaleConfig {
    pub fn new(gamma: f64, weights: WeightFunction, k: usize) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(invalid(format!("gamma must be positive, got {gamma}")));
        }
        if k < 2 {
            return Err(invalid(format!("k must be >= 2, got {k}")));
        }
        Ok(Self { gamma, weights, k })
    }
}

/// `γ(m) = (1 + γ/m)^{-1}`, the mean of `exp(-γ E / m)`.
pub fn gamma_factor(gamma: f64, m: usize) -> f64 {
    1.0 / (1.0 + gamma / m as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub k: usize,
    pub w: f64,
    /// `w / γ(k)`
    pub scaled: f64,
}

/// `s_{j,k} = Π_{h=j}^{k-1} (1 + γ/h)^{-1}` for `1 <= j <= k-1`.
pub fn s_exact(j: usize, k: usize, gamma: f64) -> Result<f64> {
    if j < 1 || j + 1 > k {
        return Err(invalid(format!(
            "s_exact needs 1 <= j <= k-1, got j = {j}, k = {k}"
        )));
    }
    Ok(log_product(j, k, gamma).exp())
}

/// As [`s_exact`] but `j = k` gives the empty product 1.
pub fn s_exact_allow_empty(j: usize, k: usize, gamma: f64) -> Result<f64> {
    if j == k && j >= 1 {
        Ok(1.0)
    } else {
        s_exact(j, k, gamma)
    }
}

fn log_product(j: usize, k: usize, gamma: f64) -> f64 {
    -(j..k).map(|h| (gamma / h as f64).ln_1p()).sum::<f64>()
}

/// `[s_{1,m+1}, ..., s_{m,m+1}]`, i.e. `Π_{h=j}^{m} (1+γ/h)^{-1}` by one
/// backward log accumulation.
pub fn suffix_expectations(m: usize, gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; m];
    let mut acc = 0.0;
    for h in (1..=m).rev() {
        acc += (gamma / h as f64).ln_1p();
        out[h - 1] = (-acc).exp();
    }
    out
}

/// Precomputed increments and expectations for repeated draws of `W`
/// over a fixed number of exponentials.
#[derive(Debug, Clone)]
pub struct WSimulator {
    gamma: f64,
    increments: Vec<f64>,
    expectations: Vec<f64>,
}

impl WSimulator {
    /// Simulator over `m` exponentials.
    pub fn with_length(gamma: f64, weights: &WeightFunction, m: usize) -> Self {
        Self {
            gamma,
            increments: weights.increments(m),
            expectations: suffix_expectations(m, gamma),
        }
    }

    /// Simulator for the public convention, `m = k - 1`.
    pub fn new(config: &MartingaleConfig) -> Self {
        Self::with_length(config.gamma, &config.weights, config.k - 1)
    }

    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    /// `W` from given exponentials `E_1..E_m` (one backward pass).
    pub fn evaluate(&self, exps: &[f64]) -> f64 {
        assert_eq!(exps.len(), self.len(), "need exactly m exponentials");
        let mut r = 0.0;
        let mut w = 0.0;
        for h in (1..=exps.len()).rev() {
            r += exps[h - 1] / h as f64;
            let d = self.increments[h - 1];
            if d != 0.0 {
                w += d * ((-self.gamma * r).exp() - self.expectations[h - 1]);
            }
        }
        w
    }

    /// Draws `E_1..E_m` from `rng` into `buf` and evaluates `W`.
    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R, buf: &mut Vec<f64>) -> f64 {
        buf.resize(self.len(), 0.0);
        fill_exponentials(rng, buf);
        self.evaluate(buf)
    }

    pub fn sample(&self, stream: RngStream) -> f64 {
        let mut rng = stream.rng();
        let mut buf = Vec::with_capacity(self.len());
        self.sample_with(&mut rng, &mut buf)
    }
}

/// One draw of `W = Σ_{j=1}^{k-1} Δf(j) (S_{j,k} - s_{j,k})`, using the
/// first `k-1` variates of `stream`.
#[allow(non_snake_case)]
pub fn simulate_W(config: &MartingaleConfig, stream: RngStream) -> f64 {
    WSimulator::new(config).sample(stream)
}

/// `W(m)` at each checkpoint `m` along one path of exponentials.
pub fn trajectory(
    gamma: f64,
    weights: &WeightFunction,
    exps: &[f64],
    checkpoints: &[usize],
) -> Result<Vec<TrajectoryPoint>> {
    checkpoints
        .iter()
        .map(|&m| {
            if m < 1 || m > exps.len() {
                return Err(invalid(format!(
                    "checkpoint {m} outside 1..={}",
                    exps.len()
                )));
            }
            let w = WSimulator::with_length(gamma, weights, m).evaluate(&exps[..m]);
            Ok(TrajectoryPoint {
                k: m,
                w,
                scaled: w / gamma_factor(gamma, m),
            })
        })
        .collect()
}

/// `A_{k,n}(f) = f(k-1) - Σ_{j=1}^{k-1} Δf(j) s_{j,k}`.
#[allow(non_snake_case)]
pub fn centering_A(config: &MartingaleConfig) -> f64 {
    let m = config.k - 1;
    let inc = config.weights.increments(m);
    let s = suffix_expectations(m, config.gamma);
    config.weights.eval(m) - inc.iter().zip(&s).map(|(d, s)| d * s).sum::<f64>()
}

/// Exact `Var W` for the public convention (`m = k - 1` exponentials).
///
/// With `r_j = E S_j^2 = Π_{h=j}^{m} (1 + 2γ/h)^{-1}` and, for `j < l`,
/// `E S_j S_l = (s_j / s_l) r_l`, the double sum over `(j, l)` collapses
/// to one pass with a running prefix `Σ_{j<l} Δf(j) s_j`.
#[allow(non_snake_case)]
pub fn variance_W(config: &MartingaleConfig) -> f64 {
    let m = config.k - 1;
    let g = config.gamma;
    let inc = config.weights.increments(m);
    let mut log_s = vec![0.0; m];
    let mut log_r = vec![0.0; m];
    let (mut a, mut b) = (0.0, 0.0);
    for h in (1..=m).rev() {
        a -= (g / h as f64).ln_1p();
        b -= (2.0 * g / h as f64).ln_1p();
        log_s[h - 1] = a;
        log_r[h - 1] = b;
    }
    let mut prefix = 0.0;
    let mut var = 0.0;
    for l in 0..m {
        let s = log_s[l].exp();
        let r = log_r[l].exp();
        let d = inc[l];
        var += d * d * (r - s * s) + 2.0 * d * ((log_r[l] - log_s[l]).exp() - s) * prefix;
        prefix += d * s;
    }
    var
}

/// `W*_{k-1,n}(f) = A_{k,n}(f) - T_{k-1}(f) / (y0 - ln X_{n-k+1,n})`.
///
/// `T_{k-1}` runs over the `k-1` spacings among the top `k` order
/// statistics. Without `y0` the span is taken up to `ln X_{n,n}`.
#[allow(non_snake_case)]
pub fn observed_W(sample: &SampleData, config: &MartingaleConfig, y0: Option<f64>) -> Result<f64> {
    let n = sample.len();
    if config.k + 1 > n {
        return Err(invalid(format!(
            "need 2 <= k <= n-1, got k = {}, n = {n}",
            config.k
        )));
    }
    let t = normalized_hill(sample, &config.weights, config.k - 1, y0)?;
    Ok(centering_A(config) - t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalMean {
    /// Average of `W_{k+1}` over the extensions.
    pub empirical: f64,
    /// `γ(k+1) W_k`
    pub predicted: f64,
    /// Monte Carlo standard error of `empirical`.
    pub std_error: f64,
    /// `W_k` of the prefix itself.
    pub w_k: f64,
}

/// Holds `E_1..E_k` fixed and averages `W_{k+1}` over fresh `E_{k+1}`.
///
/// Here `W_k` is the process over exactly the `k` prefix exponentials.
pub fn conditional_mean_check(
    config: &MartingaleConfig,
    prefix: &[f64],
    extensions: usize,
    stream: RngStream,
) -> Result<ConditionalMean> {
    let k = config.k;
    if prefix.len() != k {
        return Err(invalid(format!(
            "prefix must hold k = {k} exponentials, got {}",
            prefix.len()
        )));
    }
    if extensions == 0 {
        return Err(invalid("need at least one extension"));
    }
    let gamma = config.gamma;
    let w_k = WSimulator::with_length(gamma, &config.weights, k).evaluate(prefix);

    // W_{k+1} = (P + Δf(k+1)) V - C with V = exp(-γ E_{k+1}/(k+1)).
    let inc = config.weights.increments(k + 1);
    let mut r = 0.0;
    let mut p = 0.0;
    for h in (1..=k).rev() {
        r += prefix[h - 1] / h as f64;
        p += inc[h - 1] * (-gamma * r).exp();
    }
    let c: f64 = inc
        .iter()
        .zip(suffix_expectations(k + 1, gamma))
        .map(|(d, s)| d * s)
        .sum();
    let lead = p + inc[k];

    let mut rng = stream.rng();
    let (mut mean, mut m2) = (0.0, 0.0);
    for i in 0..extensions {
        let v = (-gamma * unit_exponential(&mut rng) / (k + 1) as f64).exp();
        let w = lead * v - c;
        let delta = w - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (w - mean);
    }
    let var = if extensions > 1 {
        m2 / (extensions - 1) as f64
    } else {
        0.0
    };
    Ok(ConditionalMean {
        empirical: mean,
        predicted: gamma_factor(gamma, k + 1) * w_k,
        std_error: (var / extensions as f64).sqrt(),
        w_k,
    })
}
