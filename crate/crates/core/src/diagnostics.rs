//! Verification harness: Monte Carlo versus closed-form oracles, bracket
//! containment sweeps, boundedness scans and distributional checks, each
//! reported as a [`CheckRecord`].

use std::fmt;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::estimators::WeightFunction;
use crate::ks::{ks_two_sample, ks_two_sample_critical};
use crate::martingale::{
    conditional_mean_check, observed_W, s_exact, MartingaleConfig, WSimulator,
};
use crate::moments::{
    harmonic_bounds, k1_diagnostic, moment_approx, moment_exact, variance_approx, variance_exact,
    ExpansionConstants, DEFAULT_EPSILON,
};
use crate::sampling::{
    derive_seed, exp_stream, fill_exponentials, sample_model, QuantileModel, RngStream,
};
use crate::tables::{stability_check, tabulate_null};
use crate::testing::{count_increases, reproduce_table1};

/// Suite names in execution and reporting order.
pub const SUITES: [&str; 11] = [
    "telescoping",
    "moments-mc",
    "moments-grid",
    "harmonic",
    "conditional-mean",
    "theorem2-distribution",
    "stability",
    "support",
    "table1",
    "k1",
    "determinism",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Depth {
    /// Reduced replication counts, suitable for routine runs.
    Fast,
    /// Full replication counts (up to 10^6 draws per oracle).
    Deep,
}

impl Depth {
    fn pick<T>(self, fast: T, deep: T) -> T {
        match self {
            Depth::Fast => fast,
            Depth::Deep => deep,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Expected {
    Value(f64),
    Interval(f64, f64),
}

impl fmt::Display for Expected {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expected::Value(v) => write!(f, "{v:.6e}"),
            Expected::Interval(lo, hi) => write!(f, "[{lo:.6e}, {hi:.6e}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRecord {
    pub suite: String,
    pub name: String,
    /// `key=value` pairs sufficient to rerun the check in isolation.
    pub parameters: String,
    pub observed: f64,
    pub expected: Expected,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckRecord {
    /// Builds a record; `passed` is derived from the observation.
    pub fn new(
        suite: &str,
        name: &str,
        parameters: String,
        observed: f64,
        expected: Expected,
        tolerance: f64,
    ) -> Self {
        let passed = observed.is_finite()
            && match expected {
                Expected::Value(v) => (observed - v).abs() <= tolerance,
                Expected::Interval(lo, hi) => {
                    observed >= lo - tolerance && observed <= hi + tolerance
                }
            };
        Self {
            suite: suite.to_string(),
            name: name.to_string(),
            parameters,
            observed,
            expected,
            tolerance,
            passed,
        }
    }
}

impl fmt::Display for CheckRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}/{} [{}] observed={:.6e} expected={} tol={:.3e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.suite,
            self.name,
            self.parameters,
            self.observed,
            self.expected,
            self.tolerance
        )
    }
}

/// Runs the selected suites (any order, duplicates ignored) and returns
/// their records in [`SUITES`] order. Each suite draws from streams
/// derived from `master_seed` and its own name only.
pub fn run_suite<S: AsRef<str>>(
    selection: &[S],
    master_seed: u64,
    depth: Depth,
) -> Result<Vec<CheckRecord>> {
    if selection.is_empty() {
        return Err(invalid("suite selection is empty"));
    }
    for s in selection {
        if !SUITES.contains(&s.as_ref()) {
            return Err(Error::UnknownSuite(s.as_ref().to_string()));
        }
    }
    let chosen: Vec<(usize, &str)> = SUITES
        .iter()
        .enumerate()
        .filter(|(_, name)| selection.iter().any(|s| s.as_ref() == **name))
        .map(|(i, name)| (i, *name))
        .collect();
    let per_suite = chosen
        .par_iter()
        .map(|&(i, name)| run_one(name, derive_seed(master_seed, i as u64), depth))
        .collect::<Result<Vec<_>>>()?;
    Ok(per_suite.into_iter().flatten().collect())
}

fn run_one(name: &str, seed: u64, depth: Depth) -> Result<Vec<CheckRecord>> {
    match name {
        "telescoping" => telescoping(seed),
        "moments-mc" => moments_mc(seed, depth),
        "moments-grid" => moments_grid(),
        "harmonic" => harmonic(seed),
        "conditional-mean" => conditional_mean(seed, depth),
        "theorem2-distribution" => theorem2(seed, depth),
        "stability" => stability(seed),
        "support" => support(seed),
        "table1" => table1(seed, depth),
        "k1" => k1(),
        "determinism" => determinism(seed, depth),
        other => Err(Error::UnknownSuite(other.to_string())),
    }
}

fn telescoping(seed: u64) -> Result<Vec<CheckRecord>> {
    let mut rng = RngStream::new(seed, 0).rng();
    let mut worst: f64 = 0.0;
    let mut worst_at = (0, 0);
    for _ in 0..1000 {
        let k = rng.random_range(2..=10_000usize);
        let j = rng.random_range(1..k);
        let rel = (s_exact(j, k, 1.0)? / (j as f64 / k as f64) - 1.0).abs();
        if rel > worst {
            worst = rel;
            worst_at = (j, k);
        }
    }
    Ok(vec![CheckRecord::new(
        "telescoping",
        "max_relative_error",
        format!(
            "pairs=1000 seed={seed} worst_j={} worst_k={}",
            worst_at.0, worst_at.1
        ),
        worst,
        Expected::Value(0.0),
        1e-12,
    )])
}

/// Monte Carlo `E(S_{j,k}^m)` against the exact product.
fn moments_mc(seed: u64, depth: Depth) -> Result<Vec<CheckRecord>> {
    let reps = depth.pick(20_000usize, 1_000_000);
    let js = [5usize, 10, 50, 100];
    let gammas = [0.25, 0.5, 1.0];
    let mut out = Vec::new();
    for (ki, &k) in [100usize, 1000].iter().enumerate() {
        let stats = mc_suffix_moments(k, &js, &gammas, reps, derive_seed(seed, ki as u64));
        // j >= k is an empty product (S = 1) and carries no information
        for (ji, &j) in js.iter().enumerate().filter(|(_, &j)| j < k) {
            for (gi, &g) in gammas.iter().enumerate() {
                for m in 1..=2u32 {
                    let (mean, se) = stats[ji][gi][m as usize - 1];
                    let exact = moment_exact(j, k, m, g)?;
                    out.push(CheckRecord::new(
                        "moments-mc",
                        "mc_vs_exact",
                        format!("j={j} k={k} m={m} gamma={g} reps={reps}"),
                        mean,
                        Expected::Value(exact),
                        4.0 * se,
                    ));
                }
            }
        }
    }
    Ok(out)
}

/// `[j][γ][m-1] -> (mean, standard error)` of `S_{j,k}^m` from `reps`
/// draws of `E_1..E_{k-1}`, shared across all `(j, γ, m)`.
pub fn mc_suffix_moments(
    k: usize,
    js: &[usize],
    gammas: &[f64],
    reps: usize,
    seed: u64,
) -> Vec<Vec<[(f64, f64); 2]>> {
    let chunk = 10_000usize;
    let chunks = reps.div_ceil(chunk);
    let lowest = js.iter().copied().min().unwrap_or(1).clamp(1, k - 1);
    let cells = js.len() * gammas.len() * 2;
    let sums = (0..chunks as u64)
        .into_par_iter()
        .map(|c| {
            let mut rng = RngStream::new(seed, c).rng();
            let start = c as usize * chunk;
            let n = chunk.min(reps - start);
            let mut acc = vec![(0.0f64, 0.0f64); cells];
            let mut buf = vec![0.0; k - lowest];
            for _ in 0..n {
                fill_exponentials(&mut rng, &mut buf);
                // R_j = Σ_{h=j}^{k-1} E_h / h over the needed indices
                let mut r = 0.0;
                let mut r_at = vec![0.0; js.len()];
                for h in (lowest..k).rev() {
                    r += buf[h - lowest] / h as f64;
                    for (ji, &j) in js.iter().enumerate() {
                        if j == h {
                            r_at[ji] = r;
                        }
                    }
                }
                for (ji, &rj) in r_at.iter().enumerate() {
                    for (gi, &g) in gammas.iter().enumerate() {
                        let s = (-g * rj).exp();
                        let base = (ji * gammas.len() + gi) * 2;
                        for (mi, v) in [s, s * s].into_iter().enumerate() {
                            acc[base + mi].0 += v;
                            acc[base + mi].1 += v * v;
                        }
                    }
                }
            }
            acc
        })
        .reduce(
            || vec![(0.0, 0.0); cells],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    x.0 += y.0;
                    x.1 += y.1;
                }
                a
            },
        );
    let n = reps as f64;
    js.iter()
        .enumerate()
        .map(|(ji, _)| {
            gammas
                .iter()
                .enumerate()
                .map(|(gi, _)| {
                    let base = (ji * gammas.len() + gi) * 2;
                    let cell = |i: usize| {
                        let (s, s2) = sums[base + i];
                        let mean = s / n;
                        let var = ((s2 - n * mean * mean) / (n - 1.0)).max(0.0);
                        (mean, (var / n).sqrt())
                    };
                    [cell(0), cell(1)]
                })
                .collect()
        })
        .collect()
}

/// Geometric grid of `j` from `lo` to `k - 1`, always including both ends.
fn j_grid(lo: usize, k: usize) -> Vec<usize> {
    let mut v = Vec::new();
    let mut j = lo as f64;
    while (j as usize) < k - 1 {
        let ji = j as usize;
        if v.last() != Some(&ji) {
            v.push(ji);
        }
        j *= 1.3;
    }
    if v.last() != Some(&(k - 1)) && lo < k {
        v.push(k - 1);
    }
    v
}

fn moments_grid() -> Result<Vec<CheckRecord>> {
    let consts = ExpansionConstants::default_eps();
    let mut out = Vec::new();
    for &k in &[100usize, 1000, 10_000, 100_000] {
        for &g in &[0.25, 0.5, 1.0, 2.0] {
            let mut total = 0usize;
            let mut contained = 0usize;
            for m in 1..=2u32 {
                let lo = consts.validity_threshold(m, g);
                if lo + 1 > k {
                    continue;
                }
                for j in j_grid(lo, k) {
                    let b = moment_approx(j, k, m, g, DEFAULT_EPSILON)?;
                    total += 1;
                    if b.contains(moment_exact(j, k, m, g)?) {
                        contained += 1;
                    }
                }
            }
            let lo = consts
                .validity_threshold(1, g)
                .max(consts.validity_threshold(2, g));
            if lo < k {
                for j in j_grid(lo, k) {
                    let b = variance_approx(j, k, g, DEFAULT_EPSILON)?;
                    total += 1;
                    if b.contains(variance_exact(j, k, g)?) {
                        contained += 1;
                    }
                }
            }
            if total > 0 {
                out.push(CheckRecord::new(
                    "moments-grid",
                    "bracket_containment",
                    format!("k={k} gamma={g} eps={DEFAULT_EPSILON} cells={total}"),
                    contained as f64 / total as f64,
                    Expected::Value(1.0),
                    0.0,
                ));
            }
        }
    }
    Ok(out)
}

fn harmonic(seed: u64) -> Result<Vec<CheckRecord>> {
    let mut rng = RngStream::new(seed, 0).rng();
    let mut contained = 0usize;
    let trials = 1000usize;
    for _ in 0..trials {
        let k = rng.random_range(2..=5000usize);
        let j = rng.random_range(1..k);
        let b: f64 = rng.random_range(-3.0..3.0);
        let (lo, hi) = harmonic_bounds(j, k, b)?;
        let direct: f64 = (j..k).map(|h| (-b * (h as f64).ln()).exp()).sum();
        if lo <= direct && direct <= hi {
            contained += 1;
        }
    }
    Ok(vec![CheckRecord::new(
        "harmonic",
        "containment",
        format!("triples={trials} seed={seed}"),
        contained as f64 / trials as f64,
        Expected::Value(1.0),
        0.0,
    )])
}

fn conditional_mean(seed: u64, depth: Depth) -> Result<Vec<CheckRecord>> {
    let prefixes = depth.pick(5u64, 20);
    let extensions = depth.pick(20_000usize, 1_000_000);
    let k = 100;
    let config = MartingaleConfig::new(1.0, WeightFunction::power(0.25)?, k)?;
    (0..prefixes)
        .map(|p| {
            let prefix = exp_stream(RngStream::new(seed, 2 * p), k)?;
            let c = conditional_mean_check(
                &config,
                &prefix,
                extensions,
                RngStream::new(seed, 2 * p + 1),
            )?;
            Ok(CheckRecord::new(
                "conditional-mean",
                "gamma_factor_times_w",
                format!("gamma=1 tau=0.25 k={k} prefix={p} extensions={extensions} seed={seed}"),
                c.empirical,
                Expected::Value(c.predicted),
                4.0 * c.std_error,
            ))
        })
        .collect()
}

fn theorem2(seed: u64, depth: Depth) -> Result<Vec<CheckRecord>> {
    let reps = depth.pick(300usize, 1000);
    let n = depth.pick(2000usize, 10_000);
    let k = depth.pick(400usize, 2000);
    let config = MartingaleConfig::new(1.0, WeightFunction::power(0.25)?, k)?;
    let model = QuantileModel::lookup("weibull1", 1.0)?;
    let observed = (0..reps as u64)
        .into_par_iter()
        .map(|b| {
            let s = sample_model(&model, n, RngStream::new(seed, b))?;
            observed_W(&s, &config, Some(1.0))
        })
        .collect::<Result<Vec<_>>>()?;
    let sim = WSimulator::new(&config);
    let simulated: Vec<f64> = (0..reps as u64)
        .into_par_iter()
        .map(|b| sim.sample(RngStream::new(derive_seed(seed, 1), b)))
        .collect();
    Ok(vec![CheckRecord::new(
        "theorem2-distribution",
        "ks_observed_vs_simulated",
        format!("gamma=1 tau=0.25 n={n} k={k} reps={reps} y0=1 level=0.01 seed={seed}"),
        ks_two_sample(&observed, &simulated),
        Expected::Interval(0.0, ks_two_sample_critical(0.01, reps, reps)),
        0.0,
    )])
}

fn stability(seed: u64) -> Result<Vec<CheckRecord>> {
    let ks = [2000usize, 3000, 5000];
    let d = stability_check(1.0, &WeightFunction::power(0.25)?, &ks, 1000, seed)?;
    Ok(d.iter()
        .zip(ks.windows(2))
        .map(|(&d, w)| {
            CheckRecord::new(
                "stability",
                "ks_consecutive_tables",
                format!(
                    "gamma=1 tau=0.25 k={} vs k={} reps=1000 seed={seed}",
                    w[0], w[1]
                ),
                d,
                Expected::Interval(0.0, 0.08),
                0.0,
            )
        })
        .collect())
}

fn support(seed: u64) -> Result<Vec<CheckRecord>> {
    let t = tabulate_null(1.0, &WeightFunction::power(0.25)?, 2000, 1000, seed)?;
    let inside = t.values().iter().filter(|v| v.abs() <= 0.55).count();
    Ok(vec![CheckRecord::new(
        "support",
        "fraction_in_support",
        format!("gamma=1 tau=0.25 k=2000 reps=1000 bound=0.55 seed={seed}"),
        inside as f64 / t.reps as f64,
        Expected::Interval(0.99, 1.0),
        0.0,
    )])
}

fn table1(seed: u64, depth: Depth) -> Result<Vec<CheckRecord>> {
    let runs = depth.pick(100usize, 200);
    let report = reproduce_table1(seed, runs, None)?;
    let params =
        |model: &str| format!("model={model} runs={runs} n=300 k=200 level=0.05 seed={seed}");
    let rate = |model: &str| {
        report
            .row(model)
            .map(|r| r.rejection_rate)
            .unwrap_or(f64::NAN)
    };
    let mut out = vec![CheckRecord::new(
        "table1",
        "rejection_rate",
        params("weibull1"),
        rate("weibull1"),
        Expected::Interval(0.0, 0.15),
        0.0,
    )];
    for model in ["pareto", "exponential"] {
        out.push(CheckRecord::new(
            "table1",
            "rejection_rate",
            params(model),
            rate(model),
            Expected::Interval(0.95, 1.0),
            0.0,
        ));
    }
    // rates listed by increasing q must not increase more than once
    let rates: Vec<f64> = report
        .perturbed_rates_by_q()
        .into_iter()
        .map(|p| p.1)
        .collect();
    out.push(CheckRecord::new(
        "table1",
        "q_monotonicity_inversions",
        format!("q=4..9 runs={runs} seed={seed}"),
        count_increases(&rates) as f64,
        Expected::Interval(0.0, 1.0),
        0.0,
    ));
    Ok(out)
}

fn k1() -> Result<Vec<CheckRecord>> {
    let grid: Vec<usize> = (1..=5)
        .flat_map(|e| [1usize, 2, 5].map(|m| m * 10usize.pow(e)))
        .filter(|&k| k > 10 && k <= 100_000)
        .collect();
    let mut out = Vec::new();
    for &g in &[0.5, 1.0] {
        for &tau in &[0.1, 0.25, 0.4, 0.5] {
            let r = k1_diagnostic(&WeightFunction::power(tau)?, g, 10, &grid)?;
            out.push(CheckRecord::new(
                "k1",
                "terminal_slope",
                format!("tau={tau} gamma={g} L=10 kmax=100000"),
                r.terminal_slope,
                Expected::Interval(f64::NEG_INFINITY, 0.02),
                0.0,
            ));
            out.push(CheckRecord::new(
                "k1",
                "max_finite",
                format!("tau={tau} gamma={g} L=10 kmax=100000"),
                r.max,
                Expected::Interval(f64::NEG_INFINITY, f64::MAX),
                0.0,
            ));
        }
        let r = k1_diagnostic(&WeightFunction::power(1.0)?, g, 10, &grid)?;
        out.push(CheckRecord::new(
            "k1",
            "terminal_slope",
            format!("tau=1 gamma={g} L=10 kmax=100000"),
            r.terminal_slope,
            Expected::Value(0.5),
            0.05,
        ));
    }
    Ok(out)
}

fn determinism(seed: u64, depth: Depth) -> Result<Vec<CheckRecord>> {
    let k = depth.pick(500usize, 2000);
    let reps = depth.pick(300usize, 1000);
    let f = WeightFunction::power(0.25)?;
    let build = |threads: usize| -> Result<String> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| invalid(format!("thread pool: {e}")))?;
        pool.install(|| tabulate_null(1.0, &f, k, reps, seed).map(|t| t.to_text()))
    };
    let one = build(1)?;
    let many = build(4)?;
    Ok(vec![CheckRecord::new(
        "determinism",
        "identical_table_bytes",
        format!("gamma=1 tau=0.25 k={k} reps={reps} threads=1,4 seed={seed}"),
        if one == many { 1.0 } else { 0.0 },
        Expected::Value(1.0),
        0.0,
    )])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selection_errors() {
        let empty: [&str; 0] = [];
        assert!(run_suite(&empty, 1, Depth::Fast).is_err());
        assert!(matches!(
            run_suite(&["nope"], 1, Depth::Fast),
            Err(Error::UnknownSuite(_))
        ));
    }

    #[test]
    fn record_pass_logic() {
        let r = CheckRecord::new("s", "n", String::new(), 1.05, Expected::Value(1.0), 0.1);
        assert!(r.passed);
        let r = CheckRecord::new(
            "s",
            "n",
            String::new(),
            0.2,
            Expected::Interval(0.0, 0.1),
            0.0,
        );
        assert!(!r.passed);
        let r = CheckRecord::new("s", "n", String::new(), f64::NAN, Expected::Value(0.0), 1.0);
        assert!(!r.passed);
    }

    #[test]
    fn quick_suites_pass_and_are_deterministic() {
        let sel = ["harmonic", "telescoping", "moments-grid", "k1"];
        let a = run_suite(&sel, 5, Depth::Fast).unwrap();
        let b = run_suite(
            &["k1", "moments-grid", "telescoping", "harmonic", "k1"],
            5,
            Depth::Fast,
        )
        .unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].suite, "telescoping");
        for r in &a {
            assert!(r.passed, "{r}");
        }
    }

    #[test]
    fn j_grid_covers_ends() {
        assert_eq!(j_grid(3, 5), vec![3, 4]);
        let g = j_grid(10, 1000);
        assert_eq!(g[0], 10);
        assert_eq!(*g.last().unwrap(), 999);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }
}
