//! Random variates, order statistics and sample ingestion.
//!
//! Every draw goes through an [`RngStream`], a `(master_seed, stream_index)`
//! pair mapped onto a ChaCha8 keystream. The seed picks the key and the index
//! picks the 64-bit stream id, so replication `b` of a study always sees the
//! same variates no matter which worker runs it.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};

/// Identifies one independent, reproducible sequence of variates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

/// Mixes a label into a seed (SplitMix64 finalizer). Used to give each
/// table of a multi-table study its own key.
pub fn derive_seed(master_seed: u64, label: u64) -> u64 {
    let mut z = master_seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(label.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform variate strictly inside (0, 1).
#[inline]
pub fn open_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(Open01)
}

/// Unit exponential variate by inversion, `-ln U`.
#[inline]
pub fn unit_exponential<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    -open_uniform(rng).ln()
}

pub fn fill_exponentials<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for e in out.iter_mut() {
        *e = unit_exponential(rng);
    }
}

/// `count` iid Exp(1) variates from `stream`.
pub fn exp_stream(stream: RngStream, count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(invalid("exp_stream needs count >= 1"));
    }
    let mut rng = stream.rng();
    let mut out = vec![0.0; count];
    fill_exponentials(&mut rng, &mut out);
    Ok(out)
}

/// `n` iid Uniform(0,1) variates sorted ascending, `U_{1,n} <= ... <= U_{n,n}`.
pub fn uniform_order_stats(stream: RngStream, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(invalid("uniform_order_stats needs n >= 1"));
    }
    let mut rng = stream.rng();
    let mut u: Vec<f64> = (0..n).map(|_| open_uniform(&mut rng)).collect();
    u.sort_by(f64::total_cmp);
    Ok(u)
}

/// Malmquist transform of sorted uniforms: `E_h = h * ln(U_{h+1,n} / U_{h,n})`
/// for `h = 1..n-1`. Iid unit exponential when the input is a sorted uniform
/// sample.
pub fn malmquist_exponentials(sorted_uniforms: &[f64]) -> Result<Vec<f64>> {
    if sorted_uniforms.len() < 2 {
        return Err(invalid("malmquist transform needs at least two values"));
    }
    if let Some(bad) = sorted_uniforms
        .iter()
        .find(|u| !(**u > 0.0) || !u.is_finite())
    {
        return Err(Error::Domain(format!(
            "malmquist transform needs positive finite values, got {bad}"
        )));
    }
    sorted_uniforms
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            if w[1] < w[0] {
                return Err(invalid(format!(
                    "input not sorted at position {}: {} > {}",
                    i + 1,
                    w[0],
                    w[1]
                )));
            }
            let h = (i + 1) as f64;
            Ok(h * (w[1].ln() - w[0].ln()))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum SampleSource {
    Model(String),
    File(PathBuf),
    Inline,
}

impl fmt::Display for SampleSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SampleSource::Model(id) => write!(f, "model:{id}"),
            SampleSource::File(p) => write!(f, "file:{}", p.display()),
            SampleSource::Inline => f.write_str("inline"),
        }
    }
}

/// A strictly positive sample together with its order statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleData {
    values: Vec<f64>,
    sorted: Vec<f64>,
    source: SampleSource,
}

impl SampleData {
    pub fn new(values: Vec<f64>, source: SampleSource) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("sample is empty"));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v > 0.0) || !v.is_finite())
        {
            return Err(Error::Domain(format!(
                "sample value #{} = {v} is not a positive finite number",
                i + 1
            )));
        }
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        Ok(Self {
            values,
            sorted,
            source,
        })
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        Self::new(values, SampleSource::Inline)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn source(&self) -> &SampleSource {
        &self.source
    }

    /// `X_{i,n}`, 1-based.
    pub fn order_stat(&self, i: usize) -> f64 {
        self.sorted[i - 1]
    }

    pub fn min(&self) -> f64 {
        self.sorted[0]
    }

    pub fn max(&self) -> f64 {
        self.sorted[self.sorted.len() - 1]
    }
}

/// The quantile families used in the goodness-of-fit study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelKind {
    /// `F^{-1}(1-u) = exp(1 - u^γ)`
    WeibullPure,
    /// `F^{-1}(1-u) = exp(1 - u^γ (1 + u^q))`
    WeibullPerturbed { q: u32 },
    /// `F^{-1}(1-u) = -ln u`
    Exponential,
    /// `F^{-1}(1-u) = 1/u`
    Pareto,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileModel {
    pub kind: ModelKind,
    /// Tail parameter of the Weibull families; ignored by the others.
    pub gamma: f64,
}

pub const PERTURBATION_EXPONENTS: [u32; 6] = [9, 8, 7, 6, 5, 4];

impl QuantileModel {
    pub fn new(kind: ModelKind, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(invalid(format!(
                "model gamma must be positive, got {gamma}"
            )));
        }
        Ok(Self { kind, gamma })
    }

    /// All nine registered models, in reporting order.
    pub fn registry(gamma: f64) -> Result<Vec<Self>> {
        let mut kinds = vec![ModelKind::WeibullPure];
        kinds.extend(
            PERTURBATION_EXPONENTS
                .iter()
                .map(|&q| ModelKind::WeibullPerturbed { q }),
        );
        kinds.push(ModelKind::Exponential);
        kinds.push(ModelKind::Pareto);
        kinds.into_iter().map(|k| Self::new(k, gamma)).collect()
    }

    /// Looks up `weibull1`, `weibull2-q4` .. `weibull2-q9`, `exponential`
    /// or `pareto`.
    pub fn lookup(id: &str, gamma: f64) -> Result<Self> {
        Self::registry(gamma)?
            .into_iter()
            .find(|m| m.id() == id)
            .ok_or_else(|| Error::UnknownModel(id.to_string()))
    }

    pub fn id(&self) -> String {
        match self.kind {
            ModelKind::WeibullPure => "weibull1".into(),
            ModelKind::WeibullPerturbed { q } => format!("weibull2-q{q}"),
            ModelKind::Exponential => "exponential".into(),
            ModelKind::Pareto => "pareto".into(),
        }
    }

    pub fn q(&self) -> Option<u32> {
        match self.kind {
            ModelKind::WeibullPerturbed { q } => Some(q),
            _ => None,
        }
    }

    /// `F^{-1}(1-u)` for `u` in (0,1); nonincreasing in `u`.
    pub fn quantile(&self, u: f64) -> f64 {
        match self.kind {
            ModelKind::WeibullPure => (1.0 - u.powf(self.gamma)).exp(),
            ModelKind::WeibullPerturbed { q } => {
                (1.0 - u.powf(self.gamma) * (1.0 + u.powi(q as i32))).exp()
            }
            ModelKind::Exponential => -u.ln(),
            ModelKind::Pareto => 1.0 / u,
        }
    }

    /// Upper endpoint of `ln X` when finite.
    pub fn log_upper_endpoint(&self) -> Option<f64> {
        match self.kind {
            ModelKind::WeibullPure | ModelKind::WeibullPerturbed { .. } => Some(1.0),
            ModelKind::Exponential | ModelKind::Pareto => None,
        }
    }
}

/// `n` iid draws `X = F^{-1}(1 - U)` from `model`.
pub fn sample_model(model: &QuantileModel, n: usize, stream: RngStream) -> Result<SampleData> {
    if n == 0 {
        return Err(invalid("sample size must be >= 1"));
    }
    let mut rng = stream.rng();
    let values = (0..n)
        .map(|_| model.quantile(open_uniform(&mut rng)))
        .collect();
    SampleData::new(values, SampleSource::Model(model.id()))
}

/// Reads a sample file: one decimal value per line, `#` lines and blank
/// lines skipped.
pub fn load_sample(path: impl AsRef<Path>) -> Result<SampleData> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut values = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line.parse().map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message: format!("`{line}`: {e}"),
        })?;
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Validation {
                path: path.to_path_buf(),
                line: idx + 1,
                message: format!("value {line} is not a positive finite number"),
            });
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err(Error::Validation {
            path: path.to_path_buf(),
            line: 0,
            message: "file contains no values".into(),
        });
    }
    SampleData::new(values, SampleSource::File(path.to_path_buf()))
}

/// Writes `sample` in the sample-file format, preceded by `# key=value`
/// header lines.
pub fn write_sample<W: Write>(
    mut out: W,
    sample: &SampleData,
    header: &[(&str, String)],
) -> std::io::Result<()> {
    for (k, v) in header {
        writeln!(out, "# {k}={v}")?;
    }
    for v in sample.values() {
        writeln!(out, "{v}")?;
    }
    Ok(())
}
