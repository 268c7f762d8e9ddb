//! Vectorized architecture/accuracy datasets.
//!
//! A dataset file holds one architecture per line: the integer encoding
//! fields followed by the measured validation accuracy, comma separated,
//! no header. Architectures that failed to train (accuracy exactly zero)
//! are dropped on load.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::{Deref, Neg, Sub};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng;

/// Integer architecture encoding, or the signed difference of two encodings.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct FeatureVector(Vec<i32>);

impl FeatureVector {
    pub fn new(values: Vec<i32>) -> Self {
        FeatureVector(values)
    }

    pub fn zeros(len: usize) -> Self {
        FeatureVector(vec![0; len])
    }

    pub fn values(&self) -> &[i32] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<i32> {
        self.0
    }

    /// Elementwise difference `self - other`.
    pub fn diff(&self, other: &FeatureVector) -> Result<FeatureVector> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                actual: other.len(),
            });
        }
        Ok(FeatureVector(
            self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect(),
        ))
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&v| f64::from(v)).collect()
    }
}

impl Deref for FeatureVector {
    type Target = [i32];

    fn deref(&self) -> &[i32] {
        &self.0
    }
}

impl From<Vec<i32>> for FeatureVector {
    fn from(values: Vec<i32>) -> Self {
        FeatureVector(values)
    }
}

impl Sub for &FeatureVector {
    type Output = FeatureVector;

    /// Panics on length mismatch; use [`FeatureVector::diff`] for a checked version.
    fn sub(self, rhs: &FeatureVector) -> FeatureVector {
        self.diff(rhs).expect("feature vectors of equal length")
    }
}

impl Neg for &FeatureVector {
    type Output = FeatureVector;

    fn neg(self) -> FeatureVector {
        FeatureVector(self.0.iter().map(|v| -v).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchitectureRecord {
    pub features: FeatureVector,
    /// Validation accuracy in (0, 1].
    pub performance: f64,
}

impl ArchitectureRecord {
    pub fn new(features: impl Into<FeatureVector>, performance: f64) -> Self {
        ArchitectureRecord {
            features: features.into(),
            performance,
        }
    }
}

/// A non-empty set of records sharing one feature length.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchitectureDataset {
    records: Vec<ArchitectureRecord>,
    feature_len: usize,
}

impl ArchitectureDataset {
    pub fn new(records: Vec<ArchitectureRecord>) -> Result<Self> {
        let first = records.first().ok_or(Error::EmptyDataset)?;
        let feature_len = first.features.len();
        if feature_len == 0 {
            return Err(Error::InvalidArgument(
                "feature vectors must be non-empty".into(),
            ));
        }
        for r in &records {
            if r.features.len() != feature_len {
                return Err(Error::LengthMismatch {
                    expected: feature_len,
                    actual: r.features.len(),
                });
            }
            if !(r.performance > 0.0 && r.performance <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "performance {} outside (0, 1]",
                    r.performance
                )));
            }
        }
        Ok(ArchitectureDataset {
            records,
            feature_len,
        })
    }

    pub fn records(&self) -> &[ArchitectureRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn feature_len(&self) -> usize {
        self.feature_len
    }

    pub fn features(&self) -> Vec<FeatureVector> {
        self.records.iter().map(|r| r.features.clone()).collect()
    }

    pub fn performances(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.performance).collect()
    }

    /// Records at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let records = indices.iter().map(|&i| self.records[i].clone()).collect();
        ArchitectureDataset::new(records)
    }

    /// Parses the comma-separated text format.
    pub fn parse(text: &str) -> Result<Self> {
        let mut records = Vec::new();
        let mut feature_len: Option<usize> = None;
        for (idx, raw) in text.split('\n').enumerate() {
            let line_no = idx + 1;
            let line = raw.strip_suffix('\r').unwrap_or(raw);
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() < 2 {
                return Err(Error::Malformed {
                    line: line_no,
                    message: format!("expected at least 2 fields, found {}", fields.len()),
                });
            }
            let expected = *feature_len.get_or_insert(fields.len() - 1);
            if fields.len() != expected + 1 {
                return Err(Error::Malformed {
                    line: line_no,
                    message: format!("expected {} fields, found {}", expected + 1, fields.len()),
                });
            }
            let (feature_fields, perf_field) = fields.split_at(expected);
            let mut features = Vec::with_capacity(expected);
            for (col, f) in feature_fields.iter().enumerate() {
                let v = f.trim().parse::<i32>().map_err(|_| Error::Malformed {
                    line: line_no,
                    message: format!("field {} is not an integer: {:?}", col + 1, f),
                })?;
                features.push(v);
            }
            let perf_str = perf_field[0].trim();
            let performance = perf_str.parse::<f64>().map_err(|_| Error::Malformed {
                line: line_no,
                message: format!("performance is not a number: {perf_str:?}"),
            })?;
            if !(0.0..=1.0).contains(&performance) {
                return Err(Error::Malformed {
                    line: line_no,
                    message: format!("performance {performance} outside [0, 1]"),
                });
            }
            if performance == 0.0 {
                continue;
            }
            records.push(ArchitectureRecord::new(features, performance));
        }
        ArchitectureDataset::new(records)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            for v in r.features.iter() {
                let _ = write!(out, "{v},");
            }
            let _ = writeln!(out, "{}", r.performance);
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    /// Sorts by performance (stable) and takes the lowest
    /// `floor(train_fraction * n)` records for training.
    pub fn sorted_split(&self, train_fraction: f64) -> Result<(Self, Self)> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "train fraction {train_fraction} outside (0, 1)"
            )));
        }
        let n = self.len();
        let n_train = (train_fraction * n as f64).floor() as usize;
        if n_train == 0 || n_train == n {
            return Err(Error::TooFewRecords {
                required: (1.0 / train_fraction.min(1.0 - train_fraction)).ceil() as usize,
                actual: n,
            });
        }
        self.sorted_split_at(n_train)
    }

    /// Sorted split with exactly `n_train` training records.
    pub fn sorted_split_at(&self, n_train: usize) -> Result<(Self, Self)> {
        let n = self.len();
        if n_train == 0 || n_train >= n {
            return Err(Error::InvalidArgument(format!(
                "training size {n_train} leaves an empty side of {n} records"
            )));
        }
        let mut sorted = self.records.clone();
        sorted.sort_by(|a, b| a.performance.total_cmp(&b.performance));
        let test = sorted.split_off(n_train);
        Ok((
            ArchitectureDataset::new(sorted)?,
            ArchitectureDataset::new(test)?,
        ))
    }

    pub fn performance_histogram(&self, bin_width: f64) -> Result<Histogram> {
        Histogram::build(&self.performances(), bin_width, 0.0)
    }
}

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.7;
pub const DEFAULT_BIN_WIDTH: f64 = 0.001;

/// Fixed-width histogram keyed by bin index.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bin_width: f64,
    pub origin: f64,
    pub counts: BTreeMap<i64, usize>,
}

impl Histogram {
    pub fn build(values: &[f64], bin_width: f64, origin: f64) -> Result<Self> {
        if !(bin_width > 0.0 && bin_width.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "bin width must be positive, got {bin_width}"
            )));
        }
        let mut counts = BTreeMap::new();
        for &x in values {
            *counts.entry(bin_index(x, bin_width, origin)).or_insert(0) += 1;
        }
        Ok(Histogram {
            bin_width,
            origin,
            counts,
        })
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn lower_edge(&self, bin: i64) -> f64 {
        self.origin + bin as f64 * self.bin_width
    }

    /// Bin with the highest count (lowest index among ties).
    pub fn mode(&self) -> Option<i64> {
        let mut best: Option<(i64, usize)> = None;
        for (&bin, &count) in &self.counts {
            if best.is_none_or(|(_, c)| count > c) {
                best = Some((bin, count));
            }
        }
        best.map(|(bin, _)| bin)
    }

    /// `bin_lower_edge,count` lines, preceded by a header.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("bin_lower_edge,count\n");
        for (&bin, &count) in &self.counts {
            let _ = writeln!(out, "{},{}", self.lower_edge(bin), count);
        }
        out
    }
}

/// `floor((x - origin) / width)`, snapping quotients within rounding noise of
/// an integer onto that integer so that e.g. 0.951 lands in bin 951.
pub fn bin_index(x: f64, width: f64, origin: f64) -> i64 {
    let q = (x - origin) / width;
    let r = q.round();
    if (q - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r as i64
    } else {
        q.floor() as i64
    }
}

/// Ground truth behind [`generate_synthetic`]: per-position integer bounds
/// and a hidden monotone link `sigmoid(w . x + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpace {
    bounds: Vec<(i32, i32)>,
    weights: Vec<f64>,
    bias: f64,
}

impl SyntheticSpace {
    pub fn new(feature_len: usize, seed: u64) -> Result<Self> {
        if feature_len == 0 {
            return Err(Error::InvalidArgument(
                "feature_len must be positive".into(),
            ));
        }
        let mut rng = rng::stream(seed, 0x5EED_0001);
        let bounds: Vec<(i32, i32)> = (0..feature_len)
            .map(|_| (0, rng.random_range(1..=9)))
            .collect();
        let raw: Vec<f64> = (0..feature_len)
            .map(|_| rng.sample(StandardNormal))
            .collect();

        // Scale so the linear score has a standard deviation of 1.5 over the
        // uniform feature distribution, centred on a logit of 1.
        let variance: f64 = raw
            .iter()
            .zip(&bounds)
            .map(|(w, &(lo, hi))| {
                let width = f64::from(hi - lo + 1);
                w * w * (width * width - 1.0) / 12.0
            })
            .sum();
        let scale = if variance > 0.0 {
            1.5 / variance.sqrt()
        } else {
            1.0
        };
        let weights: Vec<f64> = raw.iter().map(|w| w * scale).collect();
        let centre: f64 = weights
            .iter()
            .zip(&bounds)
            .map(|(w, &(lo, hi))| w * f64::from(lo + hi) / 2.0)
            .sum();
        let bias = 1.0 - centre;
        Ok(SyntheticSpace {
            bounds,
            weights,
            bias,
        })
    }

    pub fn feature_len(&self) -> usize {
        self.bounds.len()
    }

    /// Inclusive per-position bounds.
    pub fn bounds(&self) -> &[(i32, i32)] {
        &self.bounds
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn score(&self, x: &[i32]) -> f64 {
        self.weights
            .iter()
            .zip(x)
            .map(|(w, &v)| w * f64::from(v))
            .sum::<f64>()
            + self.bias
    }

    /// Noise-free performance `sigmoid(w . x + b)`.
    pub fn performance(&self, x: &[i32]) -> f64 {
        sigmoid(self.score(x))
    }

    pub fn contains(&self, x: &[i32]) -> bool {
        x.len() == self.bounds.len()
            && x.iter()
                .zip(&self.bounds)
                .all(|(&v, &(lo, hi))| lo <= v && v <= hi)
    }

    /// The maximizer of the noise-free performance: every gene at the bound
    /// favoured by the sign of its weight (lower bound on zero weight).
    pub fn optimum(&self) -> FeatureVector {
        self.bounds
            .iter()
            .zip(&self.weights)
            .map(|(&(lo, hi), &w)| if w > 0.0 { hi } else { lo })
            .collect::<Vec<_>>()
            .into()
    }

    pub fn random_genotype<R: Rng + ?Sized>(&self, rng: &mut R) -> FeatureVector {
        self.bounds
            .iter()
            .map(|&(lo, hi)| rng.random_range(lo..=hi))
            .collect::<Vec<_>>()
            .into()
    }

    /// Draws `n` records with uniform features and noisy performances.
    pub fn sample_dataset(&self, n: usize, noise: f64, seed: u64) -> Result<ArchitectureDataset> {
        if n < 2 {
            return Err(Error::TooFewRecords {
                required: 2,
                actual: n,
            });
        }
        if !(noise >= 0.0 && noise.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise must be non-negative, got {noise}"
            )));
        }
        let mut feature_rng = rng::stream(seed, 0x5EED_0002);
        let mut noise_rng = rng::stream(seed, 0x5EED_0003);
        let records = (0..n)
            .map(|_| {
                let features = self.random_genotype(&mut feature_rng);
                let mut p = self.performance(&features);
                if noise > 0.0 {
                    p += noise_rng.random_range(-noise..=noise);
                }
                ArchitectureRecord::new(features, clamp_performance(p))
            })
            .collect();
        ArchitectureDataset::new(records)
    }
}

const MIN_PERFORMANCE: f64 = 1e-6;

fn clamp_performance(p: f64) -> f64 {
    p.clamp(MIN_PERFORMANCE, 1.0)
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// `n` records drawn from the [`SyntheticSpace`] seeded by `seed`.
pub fn generate_synthetic(
    n: usize,
    feature_len: usize,
    seed: u64,
    noise: f64,
) -> Result<ArchitectureDataset> {
    SyntheticSpace::new(feature_len, seed)?.sample_dataset(n, noise, seed)
}
