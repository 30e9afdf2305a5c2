//! Monte Carlo null tables for the limit law of `W`.
//!
//! A table holds `reps` sorted draws of `W` for a given `(γ, f, k)`.
//! Replication `b` always uses stream `(seed, b)`, so a table is a pure
//! function of its metadata and does not depend on the worker count.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::estimators::WeightFunction;
use crate::ks::ks_two_sample;
use crate::martingale::{MartingaleConfig, WSimulator};
use crate::sampling::{derive_seed, RngStream};

pub const TABLE_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_TABLE_K: usize = 2000;
pub const DEFAULT_TABLE_REPS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct NullTable {
    pub gamma: f64,
    pub weights: WeightFunction,
    pub k: usize,
    pub reps: usize,
    /// `None` for tables not produced by [`tabulate_null`].
    pub master_seed: Option<u64>,
    values: Vec<f64>,
}

impl NullTable {
    /// Builds a table from arbitrary replicate values (sorted here).
    pub fn from_values(
        gamma: f64,
        weights: WeightFunction,
        k: usize,
        master_seed: Option<u64>,
        mut values: Vec<f64>,
    ) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("a table needs at least one value"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("table values must be finite"));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self {
            gamma,
            weights,
            k,
            reps: values.len(),
            master_seed,
            values,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tau(&self) -> Option<f64> {
        self.weights.tau()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.reps as f64
    }

    /// Sample standard deviation of the replicates.
    pub fn std_dev(&self) -> f64 {
        if self.reps < 2 {
            return 0.0;
        }
        let m = self.mean();
        let ss: f64 = self.values.iter().map(|v| (v - m) * (v - m)).sum();
        (ss / (self.reps - 1) as f64).sqrt()
    }

    /// Right-continuous empirical CDF, `#{v <= x} / reps`.
    pub fn ecdf(&self, x: f64) -> f64 {
        self.values.partition_point(|v| *v <= x) as f64 / self.reps as f64
    }

    /// `#{|v| <= |x|} / reps`.
    pub fn abs_cdf(&self, x: f64) -> f64 {
        let a = x.abs();
        self.values.iter().filter(|v| v.abs() <= a).count() as f64 / self.reps as f64
    }

    /// Order-statistic quantile: the value at 1-based index `ceil(p reps)`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(invalid(format!(
                "quantile level must lie in (0,1), got {p}"
            )));
        }
        let idx = (p * self.reps as f64).ceil() as usize;
        Ok(self.values[idx.clamp(1, self.reps) - 1])
    }

    fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for v in &self.values {
            h.update(v.to_bits().to_le_bytes());
        }
        h.finalize()
            .iter()
            .fold(String::with_capacity(64), |mut s, b| {
                let _ = write!(s, "{b:02x}");
                s
            })
    }

    /// Serialises in the table file format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# format_version={TABLE_FORMAT_VERSION}");
        let _ = writeln!(s, "# gamma={}", self.gamma);
        match self.weights.tau() {
            Some(tau) => {
                let _ = writeln!(s, "# tau={tau}");
            }
            None => {
                let _ = writeln!(s, "# weights={}", self.weights.descriptor());
            }
        }
        let _ = writeln!(s, "# k={}", self.k);
        let _ = writeln!(s, "# reps={}", self.reps);
        if let Some(seed) = self.master_seed {
            let _ = writeln!(s, "# seed={seed}");
        }
        let _ = writeln!(s, "# checksum={}", self.checksum());
        for v in &self.values {
            let _ = writeln!(s, "{v:.16e}");
        }
        s
    }

    /// Parses the table file format; `origin` names the source in errors.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let mut gamma = None;
        let mut weights = None;
        let mut k = None;
        let mut reps = None;
        let mut seed = None;
        let mut checksum = None;
        let mut values = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let Some((key, value)) = rest.trim().split_once('=') else {
                    continue;
                };
                let (key, value) = (key.trim(), value.trim());
                let num_err = |e: &dyn std::fmt::Display| parse_err(lineno, format!("{key}: {e}"));
                match key {
                    "format_version" => {
                        let v: u32 = value.parse().map_err(|e| num_err(&e))?;
                        if v != TABLE_FORMAT_VERSION {
                            return Err(parse_err(
                                lineno,
                                format!("unsupported format_version {v}"),
                            ));
                        }
                    }
                    "gamma" => gamma = Some(value.parse::<f64>().map_err(|e| num_err(&e))?),
                    "tau" => {
                        let tau: f64 = value.parse().map_err(|e| num_err(&e))?;
                        weights = Some(WeightFunction::power(tau).map_err(|e| num_err(&e))?);
                    }
                    "weights" => {
                        weights =
                            Some(WeightFunction::parse_descriptor(value).map_err(|e| num_err(&e))?)
                    }
                    "k" => k = Some(value.parse::<usize>().map_err(|e| num_err(&e))?),
                    "reps" => reps = Some(value.parse::<usize>().map_err(|e| num_err(&e))?),
                    "seed" => seed = Some(value.parse::<u64>().map_err(|e| num_err(&e))?),
                    "checksum" => checksum = Some(value.to_string()),
                    _ => {}
                }
                continue;
            }
            let v: f64 = line
                .parse()
                .map_err(|e| parse_err(lineno, format!("`{line}`: {e}")))?;
            if !v.is_finite() {
                return Err(parse_err(lineno, format!("non-finite value `{line}`")));
            }
            if let Some(prev) = values.last() {
                if v < *prev {
                    return Err(parse_err(lineno, "values are not sorted".into()));
                }
            }
            values.push(v);
        }
        let last = text.lines().count();
        let gamma = gamma.ok_or_else(|| parse_err(last, "missing `gamma` header".into()))?;
        let weights =
            weights.ok_or_else(|| parse_err(last, "missing `tau` or `weights` header".into()))?;
        let k = k.ok_or_else(|| parse_err(last, "missing `k` header".into()))?;
        if values.is_empty() {
            return Err(parse_err(last, "table has no values".into()));
        }
        if let Some(r) = reps {
            if r != values.len() {
                return Err(parse_err(
                    last,
                    format!(
                        "header says reps={r} but the file holds {} values",
                        values.len()
                    ),
                ));
            }
        }
        let table = NullTable::from_values(gamma, weights, k, seed, values)?;
        if let Some(expected) = checksum {
            let actual = table.checksum();
            if actual != expected {
                return Err(Error::Integrity(format!(
                    "{}: checksum {expected} does not match contents ({actual})",
                    origin.display()
                )));
            }
        }
        Ok(table)
    }
}

/// `reps` independent draws of `W` (with `k - 1` exponentials each) for
/// `(γ, f, k)`, sorted.
pub fn tabulate_null(
    gamma: f64,
    weights: &WeightFunction,
    k: usize,
    reps: usize,
    master_seed: u64,
) -> Result<NullTable> {
    if reps < 1 {
        return Err(invalid("reps must be >= 1"));
    }
    let config = MartingaleConfig::new(gamma, weights.clone(), k)?;
    let sim = WSimulator::new(&config);
    let values: Vec<f64> = (0..reps as u64)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(k),
            |buf, b| {
                let mut rng = RngStream::new(master_seed, b).rng();
                sim.sample_with(&mut rng, buf)
            },
        )
        .collect();
    NullTable::from_values(gamma, weights.clone(), k, Some(master_seed), values)
}

/// Seed of the table for truncation `k` in a multi-`k` study.
pub fn stability_seed(master_seed: u64, k: usize) -> u64 {
    derive_seed(master_seed, k as u64)
}

/// Two-sample KS distances between tables at consecutive entries of
/// `k_list`. Each table has its own seed derived from `(master_seed, k)`.
pub fn stability_check(
    gamma: f64,
    weights: &WeightFunction,
    k_list: &[usize],
    reps: usize,
    master_seed: u64,
) -> Result<Vec<f64>> {
    if k_list.len() < 2 {
        return Err(invalid("stability check needs at least two values of k"));
    }
    let tables = k_list
        .iter()
        .map(|&k| tabulate_null(gamma, weights, k, reps, stability_seed(master_seed, k)))
        .collect::<Result<Vec<_>>>()?;
    Ok(tables
        .windows(2)
        .map(|w| ks_two_sample(w[0].values(), w[1].values()))
        .collect())
}

pub fn save_table(table: &NullTable, path: impl AsRef<Path>) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(table.to_text().as_bytes())?;
    f.flush()?;
    Ok(())
}

pub fn load_table(path: impl AsRef<Path>) -> Result<NullTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    NullTable::parse(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quarter() -> WeightFunction {
        WeightFunction::power(0.25).unwrap()
    }

    fn small_table() -> NullTable {
        NullTable::from_values(1.0, quarter(), 10, None, vec![0.3, -0.1, 0.2, -0.4, 0.0]).unwrap()
    }

    #[test]
    fn single_rep_table() {
        let t = tabulate_null(1.0, &quarter(), 50, 1, 3).unwrap();
        assert_eq!(t.reps, 1);
        assert_eq!(t.values().len(), 1);
    }

    #[test]
    fn table_is_sorted_and_centred() {
        let t = tabulate_null(1.0, &quarter(), 500, 2000, 9).unwrap();
        assert!(t.values().windows(2).all(|w| w[0] <= w[1]));
        let se = t.std_dev() / (t.reps as f64).sqrt();
        assert!(t.mean().abs() < 4.0 * se, "{} vs {se}", t.mean());
    }

    #[test]
    fn ecdf_edges() {
        let t = small_table();
        assert_eq!(t.ecdf(-1.0), 0.0);
        assert_eq!(t.ecdf(0.3), 1.0);
        assert_eq!(t.ecdf(5.0), 1.0);
        // median of an odd table
        assert!((t.ecdf(0.0) - 3.0 / 5.0).abs() < 1e-15);
        let mut prev = 0.0;
        for i in -60..60 {
            let p = t.ecdf(i as f64 / 100.0);
            assert!(p >= prev);
            prev = p;
        }
    }

    #[test]
    fn quantile_definition() {
        let t = small_table();
        let sorted = t.values().to_vec();
        for i in 1..=5 {
            let p = (i - 1) as f64 / 5.0 + 1e-9;
            assert_eq!(t.quantile(p).unwrap(), sorted[i - 1]);
        }
        for &x in &sorted {
            let p = t.ecdf(x);
            if p < 1.0 {
                assert!(t.quantile(p).unwrap() <= x);
            }
        }
        assert!(t.quantile(0.0).is_err());
        assert!(t.quantile(1.0).is_err());
    }

    #[test]
    fn abs_cdf_counts_zeros() {
        let t = small_table();
        assert!((t.abs_cdf(0.0) - 0.2).abs() < 1e-15);
        assert!((t.abs_cdf(-0.2) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn text_round_trip_is_exact() {
        let t = tabulate_null(0.7, &quarter(), 100, 50, 1234).unwrap();
        let back = NullTable::parse(&t.to_text(), Path::new("mem")).unwrap();
        assert_eq!(back, t);
        let w = WeightFunction::table(vec![0.0, 1.0, 1.5, 1.75]).unwrap();
        let t = tabulate_null(1.0, &w, 20, 10, 5).unwrap();
        let back = NullTable::parse(&t.to_text(), Path::new("mem")).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn hand_written_table() {
        let text = "# gamma=1\n# tau=0.25\n# k=2000\n-0.2\n0.05\n0.31\n";
        let t = NullTable::parse(text, Path::new("hand.txt")).unwrap();
        assert_eq!(t.reps, 3);
        assert_eq!(t.master_seed, None);
        assert_eq!(t.tau(), Some(0.25));
    }

    #[test]
    fn malformed_tables() {
        let full = tabulate_null(1.0, &quarter(), 30, 20, 1).unwrap().to_text();
        // drop the last value: reps and checksum no longer match
        let truncated: String = full
            .lines()
            .take(full.lines().count() - 1)
            .collect::<Vec<_>>()
            .join("\n");
        assert!(matches!(
            NullTable::parse(&truncated, Path::new("t")),
            Err(Error::Parse { .. })
        ));
        // same count, one value altered
        let mut lines: Vec<String> = full.lines().map(String::from).collect();
        let last = lines.len() - 1;
        lines[last] = "9.0e0".into();
        assert!(matches!(
            NullTable::parse(&lines.join("\n"), Path::new("t")),
            Err(Error::Integrity(_))
        ));
        // garbage line reports its number
        let bad = "# gamma=1\n# tau=0.25\n# k=5\n0.1\nxyz\n";
        match NullTable::parse(bad, Path::new("t")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
        assert!(NullTable::parse("# gamma=1\n# k=5\n0.1\n", Path::new("t")).is_err());
    }

    #[test]
    fn stability_identical_k_gives_zero() {
        let d = stability_check(1.0, &quarter(), &[300, 300], 200, 4).unwrap();
        assert_eq!(d, vec![0.0]);
        assert!(stability_check(1.0, &quarter(), &[300], 200, 4).is_err());
    }

    #[test]
    fn save_and_load_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let t = tabulate_null(1.0, &quarter(), 60, 25, 77).unwrap();
        save_table(&t, &path).unwrap();
        assert_eq!(load_table(&path).unwrap(), t);
    }
}
