//! Exact and approximate moments of `S_{j,k} = exp(-γ Σ_{h=j}^{k-1} E_h/h)`,
//! integral-comparison bounds for power sums, and regime diagnostics for a
//! weight function.
//!
//! The approximations expand `ln(1+u) = u + θ u²` with `θ` confined to
//! `[a1, a2] = [-ε - 1/2, ε - 1/2]` for `0 < u <= u0(ε)`, and replace the
//! harmonic sums by their integral bounds. Every bracket returned here is a
//! certified enclosure of the exact value on its validity region.

use std::sync::OnceLock;

use crate::error::{invalid, Error, Result};
use crate::estimators::WeightFunction;
use crate::martingale::s_exact;

pub const DEFAULT_EPSILON: f64 = 0.1;

/// Interval `[lo, hi]` around a leading-order `nominal` value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentBracket {
    pub lo: f64,
    pub hi: f64,
    pub nominal: f64,
}

impl MomentBracket {
    fn new(lo: f64, hi: f64, nominal: f64) -> Self {
        Self {
            lo: lo.min(nominal),
            hi: hi.max(nominal),
            nominal,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// `θ(u) = (ln(1+u) - u) / u²`, increasing from `-1/2` at `u = 0+`.
pub fn log_expansion_theta(u: f64) -> f64 {
    if u.abs() < 1e-4 {
        // series: -1/2 + u/3 - u²/4 + u³/5
        return -0.5 + u / 3.0 - u * u / 4.0 + u * u * u / 5.0;
    }
    (u.ln_1p() - u) / (u * u)
}

/// Constants of the second-order log expansion for a given `ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionConstants {
    pub eps: f64,
    pub a1: f64,
    pub a2: f64,
    /// Largest `u <= 1/2` with `θ(v) ∈ [a1, a2]` for all `0 < v <= u`.
    pub u0: f64,
}

impl ExpansionConstants {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(invalid(format!("epsilon must lie in (0, 1], got {eps}")));
        }
        let a1 = -eps - 0.5;
        let a2 = eps - 0.5;
        // θ < 0 on (0, ∞), so the bound a2 only binds while a2 < 0.
        let u0 = if log_expansion_theta(0.5) <= a2 {
            0.5
        } else {
            let (mut lo, mut hi) = (0.0f64, 0.5f64);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if log_expansion_theta(mid) <= a2 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        Ok(Self { eps, a1, a2, u0 })
    }

    pub fn default_eps() -> &'static Self {
        static CONSTS: OnceLock<ExpansionConstants> = OnceLock::new();
        CONSTS.get_or_init(|| ExpansionConstants::new(DEFAULT_EPSILON).expect("valid default"))
    }

    fn for_eps(eps: f64) -> Result<Self> {
        if eps == DEFAULT_EPSILON {
            Ok(*Self::default_eps())
        } else {
            Self::new(eps)
        }
    }

    /// `J_0(m) = ceil(mγ/u0)`: from here on `mγ/h <= u0`.
    pub fn j0(&self, m: u32, gamma: f64) -> usize {
        (m as f64 * gamma / self.u0).ceil().max(1.0) as usize
    }

    /// `J_1(ε, m) = ceil(|a1| m² γ / ε)`.
    pub fn j1(&self, m: u32, gamma: f64) -> usize {
        (self.a1.abs() * (m * m) as f64 * gamma / self.eps)
            .ceil()
            .max(1.0) as usize
    }

    pub fn validity_threshold(&self, m: u32, gamma: f64) -> usize {
        self.j0(m, gamma).max(self.j1(m, gamma))
    }
}

fn check_jk(j: usize, k: usize) -> Result<()> {
    if j < 1 || j + 1 > k {
        return Err(invalid(format!("need 1 <= j <= k-1, got j = {j}, k = {k}")));
    }
    Ok(())
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(invalid(format!("gamma must be positive, got {gamma}")));
    }
    Ok(())
}

/// `E(S_{j,k}^m) = Π_{h=j}^{k-1} (1 + mγ/h)^{-1}`.
pub fn moment_exact(j: usize, k: usize, m: u32, gamma: f64) -> Result<f64> {
    check_jk(j, k)?;
    check_gamma(gamma)?;
    if m == 0 {
        return Err(invalid("moment order must be >= 1"));
    }
    let mg = m as f64 * gamma;
    Ok((-(j..k).map(|h| (mg / h as f64).ln_1p()).sum::<f64>()).exp())
}

/// `Var(S_{j,k}) = E(S²) - (E S)²`, evaluated as `(E S)² expm1(D)` with
/// `D = Σ 2 ln(1+γ/h) - ln(1+2γ/h) >= 0` to avoid cancellation.
pub fn variance_exact(j: usize, k: usize, gamma: f64) -> Result<f64> {
    check_jk(j, k)?;
    check_gamma(gamma)?;
    let mut log_mean = 0.0;
    let mut d = 0.0;
    for h in j..k {
        let u = gamma / h as f64;
        let l1 = u.ln_1p();
        log_mean -= l1;
        d += 2.0 * l1 - (2.0 * u).ln_1p();
    }
    Ok(((2.0 * log_mean).exp() * d.max(0.0).exp_m1()).clamp(0.0, 1.0))
}

/// `cov(S_{j,k}, S_{j+ℓ,k}) = Var(S_{j+ℓ,k}) s_{j,j+ℓ}`.
pub fn covariance_exact(j: usize, ell: usize, k: usize, gamma: f64) -> Result<f64> {
    if ell < 1 || j < 1 || j + ell + 1 > k {
        return Err(invalid(format!(
            "need 1 <= j < j+ell <= k-1, got j = {j}, ell = {ell}, k = {k}"
        )));
    }
    Ok(variance_exact(j + ell, k, gamma)? * s_exact(j, j + ell, gamma)?)
}

/// `∫_a^c x^{-b} dx` for `0 < a <= c`.
fn power_integral(a: f64, c: f64, b: f64) -> f64 {
    let log_ratio = (c / a).ln();
    let e = 1.0 - b;
    if e == 0.0 {
        return log_ratio;
    }
    // a^{1-b} (exp((1-b) ln(c/a)) - 1) / (1-b), stable as b -> 1
    (e * a.ln()).exp() * (e * log_ratio).exp_m1() / e
}

/// Brackets `Σ_{h=j}^{k-1} h^{-b}` by comparison with `∫_j^{k-1} x^{-b} dx`.
///
/// For `b > 0` the summand decreases and the endpoint corrections are
/// `(k-1)^{-b}` below and `j^{-b}` above; for `b < 0` they swap.
pub fn harmonic_bounds(j: usize, k: usize, b: f64) -> Result<(f64, f64)> {
    check_jk(j, k)?;
    if !b.is_finite() {
        return Err(invalid("exponent must be finite"));
    }
    let (jf, kf) = (j as f64, (k - 1) as f64);
    if b == 0.0 {
        let c = (k - j) as f64;
        return Ok((c, c));
    }
    let integral = power_integral(jf, kf, b);
    let at_j = jf.powf(-b);
    let at_top = kf.powf(-b);
    let (lo, hi) = if b > 0.0 {
        (integral + at_top, integral + at_j)
    } else {
        (integral + at_j, integral + at_top)
    };
    // outward by a few ulps so rounding cannot exclude the exact sum
    let slack = 8.0 * f64::EPSILON;
    Ok((lo - slack * lo.abs(), hi + slack * hi.abs()))
}

/// `Σ_{h=j}^{k-1} 1/h ∈ [ln((k-1)/j) + 1/(k-1), ln((k-1)/j) + 1/j]`.
pub fn harmonic_bounds_b1(j: usize, k: usize) -> Result<(f64, f64)> {
    harmonic_bounds(j, k, 1.0)
}

/// `Σ_{h=j}^{k-1} 1/h² ∈ [1/j - 1/(k-1) + (k-1)^{-2}, 1/j - 1/(k-1) + j^{-2}]`.
pub fn harmonic_bounds_b2(j: usize, k: usize) -> Result<(f64, f64)> {
    harmonic_bounds(j, k, 2.0)
}

/// Bracket for `E(S_{j,k}^m)` around `(j/(k-1))^{mγ}`.
pub fn moment_approx(j: usize, k: usize, m: u32, gamma: f64, eps: f64) -> Result<MomentBracket> {
    check_jk(j, k)?;
    check_gamma(gamma)?;
    if m == 0 {
        return Err(invalid("moment order must be >= 1"));
    }
    let c = ExpansionConstants::for_eps(eps)?;
    let threshold = c.validity_threshold(m, gamma);
    if j < threshold {
        return Err(Error::Validity {
            index: j,
            threshold,
        });
    }
    let mg = m as f64 * gamma;
    let (lo, hi) = log_moment_bounds(&c, j, k, mg)?;
    let nominal = (mg * (j as f64 / (k - 1) as f64).ln()).exp();
    Ok(MomentBracket::new(lo.exp(), hi.exp(), nominal))
}

/// Bounds on `-Σ_{h=j}^{k-1} ln(1 + c/h)` for `c/j <= u0`.
fn log_moment_bounds(
    consts: &ExpansionConstants,
    j: usize,
    k: usize,
    c: f64,
) -> Result<(f64, f64)> {
    let (h1_lo, h1_hi) = harmonic_bounds_b1(j, k)?;
    let (h2_lo, h2_hi) = harmonic_bounds_b2(j, k)?;
    // -Σ ln(1+c/h) = -c H1 - c² Σ θ_h / h², θ_h ∈ [a1, a2]
    let c2 = c * c;
    let quad_lo = (-consts.a2 * c2 * h2_lo).min(-consts.a2 * c2 * h2_hi);
    let quad_hi = (-consts.a1 * c2 * h2_lo).max(-consts.a1 * c2 * h2_hi);
    Ok((-c * h1_hi + quad_lo, -c * h1_lo + quad_hi))
}

/// Bracket for `Var(S_{j,k})` with nominal `(j/(k-1))^{2γ} γ² (1/j - 1/(k-1))`.
pub fn variance_approx(j: usize, k: usize, gamma: f64, eps: f64) -> Result<MomentBracket> {
    check_jk(j, k)?;
    check_gamma(gamma)?;
    let consts = ExpansionConstants::for_eps(eps)?;
    let threshold = consts
        .validity_threshold(1, gamma)
        .max(consts.validity_threshold(2, gamma));
    if j < threshold {
        return Err(Error::Validity {
            index: j,
            threshold,
        });
    }
    // Var = e^{-2γH1} (e^{x} - e^{y}) with
    //   x = -4γ² Σ θ_h(2)/h²,  y = -2γ² Σ θ_h(1)/h².
    let (h1_lo, h1_hi) = harmonic_bounds_b1(j, k)?;
    let (h2_lo, h2_hi) = harmonic_bounds_b2(j, k)?;
    let g2 = gamma * gamma;
    let span = |coef: f64| {
        let v = [
            -consts.a1 * coef * h2_lo,
            -consts.a1 * coef * h2_hi,
            -consts.a2 * coef * h2_lo,
            -consts.a2 * coef * h2_hi,
        ];
        (
            v.iter().cloned().fold(f64::INFINITY, f64::min),
            v.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        )
    };
    let (x_lo, x_hi) = span(4.0 * g2);
    let (y_lo, y_hi) = span(2.0 * g2);
    let diff_lo = x_lo.exp() - y_hi.exp();
    let diff_hi = x_hi.exp() - y_lo.exp();
    let scale_small = (-2.0 * gamma * h1_hi).exp();
    let scale_large = (-2.0 * gamma * h1_lo).exp();
    let lo = if diff_lo >= 0.0 {
        diff_lo * scale_small
    } else {
        diff_lo * scale_large
    };
    let hi = diff_hi * scale_large;
    let ratio = j as f64 / (k - 1) as f64;
    let nominal = (2.0 * gamma * ratio.ln()).exp() * g2 * (1.0 / j as f64 - 1.0 / (k - 1) as f64);
    let lo = lo.max(0.0);
    let hi = hi.min(1.0);
    Ok(MomentBracket::new(lo, hi, nominal.clamp(lo, hi)))
}

/// Values of `a_k = k^{-γ} Σ_{j=L}^{k-1} Δf(j) j^{γ-1/2}` on a grid, with a
/// boundedness summary.
#[derive(Debug, Clone, PartialEq)]
pub struct K1Report {
    pub points: Vec<(usize, f64)>,
    pub max: f64,
    /// Log-log slope between the last two grid points with positive `a_k`.
    pub terminal_slope: f64,
}

impl K1Report {
    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }

    pub fn is_bounded(&self, slope_tolerance: f64) -> bool {
        self.max.is_finite() && self.terminal_slope <= slope_tolerance
    }
}

pub fn k1_diagnostic(
    f: &WeightFunction,
    gamma: f64,
    start: usize,
    k_grid: &[usize],
) -> Result<K1Report> {
    check_gamma(gamma)?;
    if start < 1 {
        return Err(invalid("L must be >= 1"));
    }
    if k_grid.is_empty() || k_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("k grid must be nonempty and strictly increasing"));
    }
    let mut points = Vec::with_capacity(k_grid.len());
    let mut sum = 0.0;
    let mut next_j = start;
    for &k in k_grid {
        while next_j < k {
            let j = next_j as f64;
            sum += f.increment(next_j) * ((gamma - 0.5) * j.ln()).exp();
            next_j += 1;
        }
        let a = (-gamma * (k as f64).ln()).exp() * sum;
        points.push((k, a));
    }
    let max = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let positive: Vec<&(usize, f64)> = points.iter().filter(|p| p.1 > 0.0).collect();
    let terminal_slope = match positive.as_slice() {
        [.., a, b] => (b.1 / a.1).ln() / (b.0 as f64 / a.0 as f64).ln(),
        _ => 0.0,
    };
    Ok(K1Report {
        points,
        max,
        terminal_slope,
    })
}

/// `(Σ_{j=1}^{k} f(j)²/j², max_{j<=k} f(j)/j / sqrt(Σ f(j)²/j²))`; the
/// ratio is 0 when the sum is.
pub fn regime_diagnostics(f: &WeightFunction, k: usize) -> Result<(f64, f64)> {
    if k < 1 {
        return Err(invalid("k must be >= 1"));
    }
    let mut a2 = 0.0;
    let mut max_ratio: f64 = 0.0;
    for j in 1..=k {
        let r = f.eval(j) / j as f64;
        a2 += r * r;
        max_ratio = max_ratio.max(r);
    }
    let bn = if a2 > 0.0 { max_ratio / a2.sqrt() } else { 0.0 };
    Ok((a2, bn))
}
