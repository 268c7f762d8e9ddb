//! Training-data construction for the pairwise protocol, the regression
//! baseline, and the two ablations.
//!
//! All pair builders share one traversal: for `i < j` (outer `i` ascending,
//! inner `j` ascending) they emit the `(i, j)` instance and then its mirror
//! `(j, i)`. Indices in [`PairSample::source`] are 0-based positions in the
//! input sequence.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::Rng;

use crate::dataset::{ArchitectureDataset, FeatureVector};
use crate::error::{Error, Result};
use crate::models::ModelMode;
use crate::rng;

/// How training data is built and how a predictor is asked to order two
/// architectures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Protocol {
    /// Difference instances with ranking labels, classifier mode.
    Proposed,
    /// Raw encodings regressed onto accuracy.
    Baseline,
    /// Difference instances regressed onto the signed accuracy difference.
    G1,
    /// One randomly kept sample from each mirrored pair.
    G2,
}

impl Protocol {
    pub const ALL: [Protocol; 4] = [
        Protocol::Proposed,
        Protocol::Baseline,
        Protocol::G1,
        Protocol::G2,
    ];

    pub fn mode(self) -> ModelMode {
        match self {
            Protocol::Proposed | Protocol::G2 => ModelMode::Classifier,
            Protocol::Baseline | Protocol::G1 => ModelMode::Regressor,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Proposed => "proposed",
            Protocol::Baseline => "baseline",
            Protocol::G1 => "g1",
            Protocol::G2 => "g2",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "proposed" => Ok(Protocol::Proposed),
            "baseline" => Ok(Protocol::Baseline),
            "g1" => Ok(Protocol::G1),
            "g2" => Ok(Protocol::G2),
            other => Err(Error::InvalidArgument(format!(
                "unknown protocol {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairSample {
    pub diff: FeatureVector,
    /// 1 when the first architecture of `source` performed at least as well.
    pub label: u8,
    pub source: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairDataset {
    pub samples: Vec<PairSample>,
}

impl PairDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn inputs(&self) -> Vec<FeatureVector> {
        self.samples.iter().map(|s| s.diff.clone()).collect()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.samples.iter().map(|s| f64::from(s.label)).collect()
    }

    pub fn positives(&self) -> usize {
        self.samples.iter().filter(|s| s.label == 1).count()
    }

    /// Diff fields followed by the label, one sample per line.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for s in &self.samples {
            write_row(&mut out, &s.diff, &s.label.to_string());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegressionDataset {
    pub inputs: Vec<FeatureVector>,
    pub targets: Vec<f64>,
}

impl RegressionDataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for (x, t) in self.inputs.iter().zip(&self.targets) {
            write_row(&mut out, x, &t.to_string());
        }
        out
    }
}

fn write_row(out: &mut String, x: &FeatureVector, last: &str) {
    for v in x.iter() {
        let _ = write!(out, "{v},");
    }
    out.push_str(last);
    out.push('\n');
}

fn check_pairable(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::TooFewRecords {
            required: 2,
            actual: n,
        });
    }
    Ok(())
}

/// Ordered index pairs in the shared traversal order.
pub fn pair_order(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| ((i + 1)..n).flat_map(move |j| [(i, j), (j, i)]))
}

/// Difference instances `v_i - v_j` and `v_j - v_i` for every `i < j`.
pub fn build_pair_instances(
    vectors: &[FeatureVector],
) -> Result<Vec<(FeatureVector, (usize, usize))>> {
    check_pairable(vectors.len())?;
    let len = vectors[0].len();
    if let Some(bad) = vectors.iter().find(|v| v.len() != len) {
        return Err(Error::LengthMismatch {
            expected: len,
            actual: bad.len(),
        });
    }
    Ok(pair_order(vectors.len())
        .map(|(a, b)| (&vectors[a] - &vectors[b], (a, b)))
        .collect())
}

/// Ranking labels: `(1, 0)` when `p_i >= p_j`, otherwise `(0, 1)`.
pub fn build_pair_labels(performances: &[f64]) -> Result<Vec<u8>> {
    check_pairable(performances.len())?;
    Ok(pair_order(performances.len())
        .map(|(a, b)| {
            let (i, j) = (a.min(b), a.max(b));
            let first = performances[i] - performances[j] >= 0.0;
            u8::from(first == (a == i))
        })
        .collect())
}

/// Training data for the pairwise protocol.
pub fn build_training_data(dataset: &ArchitectureDataset) -> Result<PairDataset> {
    let instances = build_pair_instances(&dataset.features())?;
    let labels = build_pair_labels(&dataset.performances())?;
    let samples = instances
        .into_iter()
        .zip(labels)
        .map(|((diff, source), label)| PairSample {
            diff,
            label,
            source,
        })
        .collect();
    Ok(PairDataset { samples })
}

/// Raw encodings against raw accuracies.
pub fn build_baseline_data(dataset: &ArchitectureDataset) -> RegressionDataset {
    RegressionDataset {
        inputs: dataset.features(),
        targets: dataset.performances(),
    }
}

/// Difference instances against the signed accuracy difference `p_i - p_j`.
pub fn build_ablation_g1(dataset: &ArchitectureDataset) -> Result<RegressionDataset> {
    let instances = build_pair_instances(&dataset.features())?;
    let p = dataset.performances();
    let (inputs, targets) = instances
        .into_iter()
        .map(|(diff, (a, b))| (diff, p[a] - p[b]))
        .unzip();
    Ok(RegressionDataset { inputs, targets })
}

/// Keeps one of each mirrored pair, chosen by a fair coin.
pub fn build_ablation_g2(dataset: &ArchitectureDataset, seed: u64) -> Result<PairDataset> {
    let full = build_training_data(dataset)?;
    let mut coin = rng::stream(seed, 0x6202);
    let samples = full
        .samples
        .chunks_exact(2)
        .map(|mirrored| {
            let keep = usize::from(coin.random_bool(0.5));
            mirrored[keep].clone()
        })
        .collect();
    Ok(PairDataset { samples })
}

/// Training inputs and targets for `protocol`, ready for `models::fit`.
pub fn build_for_protocol(
    protocol: Protocol,
    dataset: &ArchitectureDataset,
    seed: u64,
) -> Result<(Vec<FeatureVector>, Vec<f64>)> {
    match protocol {
        Protocol::Proposed => {
            let d = build_training_data(dataset)?;
            Ok((d.inputs(), d.targets()))
        }
        Protocol::G2 => {
            let d = build_ablation_g2(dataset, seed)?;
            Ok((d.inputs(), d.targets()))
        }
        Protocol::Baseline => {
            let d = build_baseline_data(dataset);
            Ok((d.inputs, d.targets))
        }
        Protocol::G1 => {
            let d = build_ablation_g1(dataset)?;
            Ok((d.inputs, d.targets))
        }
    }
}

/// Closed interval of reals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        values.into_iter().fold(None, |acc, v| match acc {
            None => Some(Interval { lo: v, hi: v }),
            Some(Interval { lo, hi }) => Some(Interval {
                lo: lo.min(v),
                hi: hi.max(v),
            }),
        })
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    /// No shared point, touching endpoints included.
    pub fn disjoint(&self, other: &Interval) -> bool {
        self.hi < other.lo || other.hi < self.lo
    }
}

/// Ranges of raw performances and of pairwise performance differences on
/// both sides of a split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftSummary {
    pub train_performance: Interval,
    pub test_performance: Interval,
    pub train_differences: Interval,
    pub test_differences: Interval,
}

impl ShiftSummary {
    pub fn new(train: &ArchitectureDataset, test: &ArchitectureDataset) -> Result<Self> {
        check_pairable(train.len())?;
        check_pairable(test.len())?;
        let diffs = |d: &ArchitectureDataset| {
            let p = d.performances();
            Interval::of(pair_order(p.len()).map(|(i, j)| p[i] - p[j])).expect("at least one pair")
        };
        Ok(ShiftSummary {
            train_performance: Interval::of(train.performances()).expect("non-empty"),
            test_performance: Interval::of(test.performances()).expect("non-empty"),
            train_differences: diffs(train),
            test_differences: diffs(test),
        })
    }

    /// Raw performances separate while differences share a range around 0.
    pub fn differences_bridge_shift(&self) -> bool {
        self.train_performance.disjoint(&self.test_performance)
            && self.train_differences.overlaps(&self.test_differences)
            && self.train_differences.contains(0.0)
            && self.test_differences.contains(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, ArchitectureRecord};

    fn fv(v: &[i32]) -> FeatureVector {
        FeatureVector::new(v.to_vec())
    }

    fn dataset(perfs: &[f64]) -> ArchitectureDataset {
        let records = perfs
            .iter()
            .enumerate()
            .map(|(i, &p)| ArchitectureRecord::new(vec![i as i32, 2 * i as i32], p))
            .collect();
        ArchitectureDataset::new(records).unwrap()
    }

    #[test]
    fn two_vector_trace() {
        let out = build_pair_instances(&[fv(&[3, 1]), fv(&[1, 4])]).unwrap();
        assert_eq!(out, vec![(fv(&[2, -3]), (0, 1)), (fv(&[-2, 3]), (1, 0))]);
    }

    #[test]
    fn identical_vectors_give_zero_diffs() {
        let out = build_pair_instances(&[fv(&[5, 5]), fv(&[5, 5])]).unwrap();
        assert!(out.iter().all(|(d, _)| d.iter().all(|&v| v == 0)));
    }

    #[test]
    fn instance_count_matches_enumeration() {
        let vectors: Vec<_> = (0..5).map(|i| fv(&[i])).collect();
        let mut count = 0;
        for i in 0..5 {
            for j in 0..5 {
                if i != j {
                    count += 1;
                }
            }
        }
        assert_eq!(build_pair_instances(&vectors).unwrap().len(), count);
        assert_eq!(count, 20);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(build_pair_instances(&[fv(&[1])]).is_err());
        assert!(matches!(
            build_pair_instances(&[fv(&[1]), fv(&[1, 2])]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(build_pair_labels(&[0.3]).is_err());
        assert!(build_ablation_g1(&dataset(&[0.5])).is_err());
        assert!(build_ablation_g2(&dataset(&[0.5]), 0).is_err());
        assert!(build_training_data(&dataset(&[0.5])).is_err());
    }

    #[test]
    fn labels_follow_ge_rule() {
        assert_eq!(build_pair_labels(&[0.5, 0.4]).unwrap(), vec![1, 0]);
        assert_eq!(build_pair_labels(&[0.4, 0.5]).unwrap(), vec![0, 1]);
        assert_eq!(build_pair_labels(&[0.4, 0.4]).unwrap(), vec![1, 0]);
    }

    #[test]
    fn training_data_for_five_records() {
        let d = build_training_data(&dataset(&[0.1, 0.5, 0.3, 0.9, 0.2])).unwrap();
        assert_eq!(d.len(), 20);
        let mut ones = 0;
        for s in &d.samples {
            ones += usize::from(s.label);
        }
        assert_eq!(ones, 10);
    }

    #[test]
    fn two_records_give_one_label_each() {
        let d = build_training_data(&dataset(&[0.2, 0.7])).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.positives(), 1);
    }

    #[test]
    fn equal_performances_favour_first_index() {
        let d = build_training_data(&dataset(&[0.5; 4])).unwrap();
        for s in &d.samples {
            assert_eq!(s.label, u8::from(s.source.0 < s.source.1));
        }
    }

    #[test]
    fn baseline_is_identity() {
        let ds = dataset(&[0.3, 0.1, 0.2]);
        let d = build_baseline_data(&ds);
        assert_eq!(d.len(), 3);
        let rebuilt: Vec<_> = d
            .inputs
            .iter()
            .zip(&d.targets)
            .map(|(x, &t)| ArchitectureRecord::new(x.clone(), t))
            .collect();
        assert_eq!(rebuilt, ds.records());
    }

    #[test]
    fn g1_targets_are_signed_differences() {
        let d = build_ablation_g1(&dataset(&[0.5, 0.4])).unwrap();
        assert!((d.targets[0] - 0.1).abs() < 1e-12);
        assert!((d.targets[1] + 0.1).abs() < 1e-12);

        let d = build_ablation_g1(&dataset(&[0.1, 0.5, 0.3, 0.9, 0.2])).unwrap();
        assert_eq!(d.len(), 20);
        for pair in d.targets.chunks(2) {
            assert_eq!(pair[0] + pair[1], 0.0);
        }
    }

    #[test]
    fn g2_keeps_one_per_pair() {
        let ds = dataset(&[0.1, 0.5, 0.3, 0.9, 0.2]);
        let a = build_ablation_g2(&ds, 3).unwrap();
        assert_eq!(a.len(), 10);
        assert_eq!(a, build_ablation_g2(&ds, 3).unwrap());
        let mut seen = std::collections::HashSet::new();
        for s in &a.samples {
            let key = (s.source.0.min(s.source.1), s.source.0.max(s.source.1));
            assert!(seen.insert(key));
        }
    }

    #[test]
    fn g2_label_balance_is_fair() {
        // 142 records give 10011 unordered pairs.
        let ds = generate_synthetic(142, 3, 5, 0.05).unwrap();
        let mut within = 0;
        for seed in 0..20 {
            let g2 = build_ablation_g2(&ds, seed).unwrap();
            let frac = g2.positives() as f64 / g2.len() as f64;
            if (frac - 0.5).abs() <= 0.02 {
                within += 1;
            }
        }
        assert_eq!(within, 20);
    }

    #[test]
    fn csv_export() {
        let d = build_training_data(&dataset(&[0.5, 0.4])).unwrap();
        assert_eq!(d.to_csv_string(), "-1,-2,1\n1,2,0\n");
        let r = build_ablation_g1(&dataset(&[0.5, 0.25])).unwrap();
        assert_eq!(r.to_csv_string(), "-1,-2,0.25\n1,2,-0.25\n");
    }

    #[test]
    fn protocol_names_round_trip() {
        for p in Protocol::ALL {
            assert_eq!(p.name().parse::<Protocol>().unwrap(), p);
        }
        assert!("nope".parse::<Protocol>().is_err());
    }

    #[test]
    fn sorted_split_shifts_raw_but_not_differences() {
        let ds = dataset(&[0.1, 0.5, 0.3, 0.9, 0.2, 0.7, 0.4]);
        let (train, test) = ds.sorted_split(0.7).unwrap();
        let s = ShiftSummary::new(&train, &test).unwrap();
        assert!(s.differences_bridge_shift());
        assert_eq!(s.train_performance, Interval { lo: 0.1, hi: 0.4 });
        assert_eq!(s.test_performance, Interval { lo: 0.5, hi: 0.9 });
        assert!((s.test_differences.hi - 0.4).abs() < 1e-12);
        assert!(!Interval { lo: 0.0, hi: 1.0 }.disjoint(&Interval { lo: 1.0, hi: 2.0 }));
    }
}
