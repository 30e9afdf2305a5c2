//! The functional Hill process and related tail statistics.
//!
//! All statistics are built from the log-spacings of the upper order
//! statistics, `ln X_{n-j+1,n} - ln X_{n-j,n}` for `j = 1..k`.

use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::sampling::SampleData;

/// An increasing weight `f` on the integers with `f(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightFunction {
    /// `f(j) = j^tau`
    Power { tau: f64 },
    /// Explicit values `f(0), f(1), ..., f(m)`; flat after `m`.
    Table(Vec<f64>),
}

impl WeightFunction {
    pub fn power(tau: f64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(invalid(format!("power weight needs tau > 0, got {tau}")));
        }
        Ok(WeightFunction::Power { tau })
    }

    pub fn table(values: Vec<f64>) -> Result<Self> {
        match values.first() {
            None => return Err(invalid("weight table is empty")),
            Some(&f0) if f0 != 0.0 => {
                return Err(invalid(format!(
                    "weight table must start at f(0) = 0, got {f0}"
                )))
            }
            _ => {}
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("weight table has non-finite entries"));
        }
        if let Some(j) = values.windows(2).position(|w| w[1] < w[0]) {
            return Err(invalid(format!("weight table decreases at j = {}", j + 1)));
        }
        Ok(WeightFunction::Table(values))
    }

    /// `f ≡ 0`.
    pub fn zero() -> Self {
        WeightFunction::Table(vec![0.0])
    }

    pub fn tau(&self) -> Option<f64> {
        match self {
            WeightFunction::Power { tau } => Some(*tau),
            WeightFunction::Table(_) => None,
        }
    }

    pub fn eval(&self, j: usize) -> f64 {
        match self {
            WeightFunction::Power { .. } if j == 0 => 0.0,
            WeightFunction::Power { tau } => (tau * (j as f64).ln()).exp(),
            WeightFunction::Table(v) => v[j.min(v.len() - 1)],
        }
    }

    /// `Δf(j) = f(j) - f(j-1)` for `j >= 1`.
    pub fn increment(&self, j: usize) -> f64 {
        debug_assert!(j >= 1);
        self.eval(j) - self.eval(j - 1)
    }

    /// `[Δf(1), ..., Δf(m)]`.
    pub fn increments(&self, m: usize) -> Vec<f64> {
        let mut prev = 0.0;
        (1..=m)
            .map(|j| {
                let cur = self.eval(j);
                let d = cur - prev;
                prev = cur;
                d
            })
            .collect()
    }

    /// Canonical text form, `power:<tau>` or `table:<f0>,<f1>,...`.
    pub fn descriptor(&self) -> String {
        self.to_string()
    }

    pub fn parse_descriptor(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("power:") {
            let tau = rest
                .parse()
                .map_err(|e| invalid(format!("bad tau `{rest}`: {e}")))?;
            Self::power(tau)
        } else if let Some(rest) = s.strip_prefix("table:") {
            let values = rest
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|e| invalid(format!("bad weight `{v}`: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            Self::table(values)
        } else {
            Err(invalid(format!("unrecognised weight descriptor `{s}`")))
        }
    }
}

impl fmt::Display for WeightFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightFunction::Power { tau } => write!(f, "power:{tau}"),
            WeightFunction::Table(v) => {
                f.write_str("table:")?;
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{x}")?;
                }
                Ok(())
            }
        }
    }
}

/// A nonnegative kernel `K` on (0, 1].
#[derive(Clone)]
pub struct KernelFunction(Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl KernelFunction {
    pub fn new<F>(k: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        KernelFunction(Arc::new(k))
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_| c)
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.0)(t)
    }
}

impl fmt::Debug for KernelFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("KernelFunction(..)")
    }
}

fn check_k(sample: &SampleData, k: usize) -> Result<()> {
    let n = sample.len();
    if k < 1 || k >= n {
        return Err(invalid(format!("need 1 <= k < n, got k = {k}, n = {n}")));
    }
    Ok(())
}

/// `ln X_{n-j+1,n} - ln X_{n-j,n}` for `j = 1..k`.
pub fn log_spacings(sample: &SampleData, k: usize) -> Result<Vec<f64>> {
    check_k(sample, k)?;
    let s = sample.sorted();
    let n = s.len();
    Ok((1..=k).map(|j| s[n - j].ln() - s[n - j - 1].ln()).collect())
}

/// `T_n(f) = Σ_{j=1}^{k} f(j) (ln X_{n-j+1,n} - ln X_{n-j,n})`.
pub fn functional_hill(sample: &SampleData, f: &WeightFunction, k: usize) -> Result<f64> {
    let sp = log_spacings(sample, k)?;
    Ok(sp.iter().enumerate().map(|(i, d)| f.eval(i + 1) * d).sum())
}

/// `T_n(f_tau) / k^tau`; the Hill estimator at `tau = 1`.
pub fn diop_lo(sample: &SampleData, tau: f64, k: usize) -> Result<f64> {
    let f = WeightFunction::power(tau)?;
    let t = functional_hill(sample, &f, k)?;
    Ok(t / f.eval(k))
}

/// Kernel-weighted Hill ratio `Σ j K(j/k) d_j / Σ K(j/k)` where `d_j` are
/// the log-spacings. `K ≡ 1` gives the Hill estimator.
pub fn kernel_hill(sample: &SampleData, kernel: &KernelFunction, k: usize) -> Result<f64> {
    let sp = log_spacings(sample, k)?;
    let kf = k as f64;
    let mut num = 0.0;
    let mut mass = 0.0;
    for (i, d) in sp.iter().enumerate() {
        let j = (i + 1) as f64;
        let w = kernel.eval(j / kf);
        if !(w >= 0.0) {
            return Err(Error::Domain(format!(
                "kernel is negative at t = {}",
                j / kf
            )));
        }
        num += j * w * d;
        mass += w;
    }
    if mass <= 0.0 {
        return Err(Error::DegenerateKernel);
    }
    Ok(num / mass)
}

/// `T_n(f)` normalised by the span of `ln X` above the lowest order
/// statistic it uses, `X_{n-k,n}`:
///
/// * with a known endpoint `y0`: `T_n(f) / (y0 - ln X_{n-k,n})`,
/// * otherwise: `T_n(f) / (ln X_{n,n} - ln X_{n-k,n})`.
pub fn normalized_hill(
    sample: &SampleData,
    f: &WeightFunction,
    k: usize,
    y0: Option<f64>,
) -> Result<f64> {
    let t = functional_hill(sample, f, k)?;
    let n = sample.len();
    let floor = sample.order_stat(n - k).ln();
    let top = sample.max().ln();
    let ceiling = match y0 {
        Some(y) => {
            if !y.is_finite() || y < top {
                return Err(invalid(format!(
                    "endpoint y0 = {y} is below ln X_(n,n) = {top}"
                )));
            }
            if sample.min() <= 1.0 {
                log::warn!(
                    "sample has values <= 1 (min {}); endpoint normalisation assumes X > 1",
                    sample.min()
                );
            }
            y
        }
        None => top,
    };
    let denom = ceiling - floor;
    if !(denom > 0.0) {
        return Err(Error::DegenerateSample(format!(
            "normalising span is zero (ln X_(n-k,n) = {floor}, upper = {ceiling})"
        )));
    }
    Ok(t / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{sample_model, QuantileModel, RngStream};

    fn e_sample() -> SampleData {
        let e = std::f64::consts::E;
        SampleData::from_values(vec![e.powi(4), e, e.powi(2)]).unwrap()
    }

    #[test]
    fn weight_function_basics() {
        let f = WeightFunction::power(0.25).unwrap();
        assert_eq!(f.eval(0), 0.0);
        assert!((f.eval(16) - 2.0).abs() < 1e-15);
        let inc = f.increments(5);
        assert_eq!(inc.len(), 5);
        assert!((inc[0] - 1.0).abs() < 1e-15);
        assert!(inc.iter().all(|d| *d >= 0.0));

        assert!(WeightFunction::power(0.0).is_err());
        assert!(WeightFunction::table(vec![1.0, 2.0]).is_err());
        assert!(WeightFunction::table(vec![0.0, 2.0, 1.0]).is_err());
        let t = WeightFunction::table(vec![0.0, 1.0, 3.0]).unwrap();
        assert_eq!(t.eval(10), 3.0);
        assert_eq!(t.increment(2), 2.0);
        assert_eq!(t.increment(7), 0.0);
    }

    #[test]
    fn descriptor_round_trip() {
        for f in [
            WeightFunction::power(0.25).unwrap(),
            WeightFunction::table(vec![0.0, 0.5, 2.0]).unwrap(),
            WeightFunction::zero(),
        ] {
            assert_eq!(
                WeightFunction::parse_descriptor(&f.descriptor()).unwrap(),
                f
            );
        }
        assert!(WeightFunction::parse_descriptor("cubic:2").is_err());
    }

    #[test]
    fn hand_computed_functional_hill() {
        let f = WeightFunction::power(1.0).unwrap();
        let t = functional_hill(&e_sample(), &f, 2).unwrap();
        assert!((t - 4.0).abs() < 1e-12, "{t}");
    }

    #[test]
    fn constant_samples_give_zero() {
        let s = SampleData::from_values(vec![2.5; 20]).unwrap();
        let f = WeightFunction::power(0.3).unwrap();
        assert_eq!(functional_hill(&s, &f, 10).unwrap(), 0.0);
        assert_eq!(diop_lo(&s, 0.7, 10).unwrap(), 0.0);
        assert_eq!(
            kernel_hill(&s, &KernelFunction::constant(1.0), 10).unwrap(),
            0.0
        );
    }

    #[test]
    fn zero_weight_gives_zero() {
        let m = QuantileModel::lookup("pareto", 1.0).unwrap();
        let s = sample_model(&m, 100, RngStream::new(1, 1)).unwrap();
        assert_eq!(
            functional_hill(&s, &WeightFunction::zero(), 50).unwrap(),
            0.0
        );
    }

    #[test]
    fn k_out_of_range() {
        let s = e_sample();
        let f = WeightFunction::power(1.0).unwrap();
        assert!(functional_hill(&s, &f, 0).is_err());
        assert!(functional_hill(&s, &f, 3).is_err());
        assert!(functional_hill(&s, &f, 2).is_ok());
    }

    #[test]
    fn hill_is_consistent_on_pareto() {
        let m = QuantileModel::lookup("pareto", 1.0).unwrap();
        let s = sample_model(&m, 10_000, RngStream::new(21, 0)).unwrap();
        let h = diop_lo(&s, 1.0, 500).unwrap();
        assert!((h - 1.0).abs() < 0.1, "hill = {h}");
    }

    #[test]
    fn diop_lo_matches_definition() {
        let m = QuantileModel::lookup("weibull1", 1.0).unwrap();
        let s = sample_model(&m, 400, RngStream::new(8, 0)).unwrap();
        for tau in [0.1, 0.25, 0.5, 1.0, 2.0] {
            let k = 123;
            let f = WeightFunction::power(tau).unwrap();
            let lhs = diop_lo(&s, tau, k).unwrap() * (k as f64).powf(tau);
            let rhs = functional_hill(&s, &f, k).unwrap();
            assert!((lhs - rhs).abs() <= 1e-13 * rhs.abs(), "{lhs} {rhs}");
        }
    }

    #[test]
    fn kernel_hill_reduces_to_hill() {
        let m = QuantileModel::lookup("pareto", 1.0).unwrap();
        let s = sample_model(&m, 1000, RngStream::new(2, 2)).unwrap();
        let hill = diop_lo(&s, 1.0, 100).unwrap();
        let k1 = kernel_hill(&s, &KernelFunction::constant(1.0), 100).unwrap();
        let k7 = kernel_hill(&s, &KernelFunction::constant(7.5), 100).unwrap();
        assert!((k1 - hill).abs() < 1e-12 * hill);
        assert!((k7 - k1).abs() < 1e-12 * k1);
    }

    #[test]
    fn kernel_errors() {
        let s = e_sample();
        assert!(matches!(
            kernel_hill(&s, &KernelFunction::constant(0.0), 2),
            Err(Error::DegenerateKernel)
        ));
        assert!(kernel_hill(&s, &KernelFunction::constant(-1.0), 2).is_err());
        // mass only at t = 1
        let step = KernelFunction::new(|t| if t >= 1.0 { 1.0 } else { 0.0 });
        assert!((kernel_hill(&s, &step, 2).unwrap() - 2.0 * 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalized_hand_value() {
        let f = WeightFunction::power(1.0).unwrap();
        let v = normalized_hill(&e_sample(), &f, 2, Some(4.0)).unwrap();
        assert!((v - 4.0 / 3.0).abs() < 1e-12, "{v}");
        // without y0 the top log value 4 is used, same answer here
        let v = normalized_hill(&e_sample(), &f, 2, None).unwrap();
        assert!((v - 4.0 / 3.0).abs() < 1e-12, "{v}");
        assert!(normalized_hill(&e_sample(), &f, 2, Some(3.0)).is_err());
    }

    #[test]
    fn tied_top_is_degenerate() {
        let s = SampleData::from_values(vec![1.0, 5.0, 5.0, 5.0]).unwrap();
        let f = WeightFunction::power(0.5).unwrap();
        assert!(matches!(
            normalized_hill(&s, &f, 2, None),
            Err(Error::DegenerateSample(_))
        ));
        assert!(normalized_hill(&s, &f, 3, None).is_ok());
    }

    #[test]
    fn normalized_statistic_on_weibull() {
        // T* with k spacings sits around f(k) - Σ Δf(j) E(S_{j,k+1}) ≈ 3.0
        // (one Monte Carlo realisation; the spread is about ±0.2).
        let m = QuantileModel::lookup("weibull1", 1.0).unwrap();
        let f = WeightFunction::power(0.25).unwrap();
        let mut acc = 0.0;
        for b in 0..200 {
            let s = sample_model(&m, 300, RngStream::new(31, b)).unwrap();
            acc += normalized_hill(&s, &f, 200, None).unwrap();
        }
        let mean = acc / 200.0;
        assert!((mean - 3.0).abs() < 0.2, "mean T* = {mean}");
    }
}
