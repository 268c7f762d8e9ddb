//! CART decision trees.
//!
//! Features are integer encodings, so each feature is binned once into its
//! sorted distinct values and split search runs over per-node histograms.
//! Thresholds sit halfway between the two neighbouring values present in the
//! node, which gives the same splits as a sort-based search.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tuning::{
    Criterion, MaxFeatures, ParamConfig, MAX_DEPTH, MIN_SAMPLES_LEAF, MIN_SAMPLES_SPLIT,
};

use super::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct TreeParams {
    pub criterion: Criterion,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
}

impl TreeParams {
    pub fn from_config(config: &ParamConfig) -> Result<Self> {
        Ok(TreeParams {
            criterion: config.criterion()?,
            max_depth: config.usize(MAX_DEPTH)?,
            min_samples_split: config.usize(MIN_SAMPLES_SPLIT)?,
            min_samples_leaf: config.usize(MIN_SAMPLES_LEAF)?,
            max_features: config.max_features()?,
        })
    }

    /// A tree limited only by purity.
    #[cfg(test)]
    pub fn unconstrained(criterion: Criterion) -> Self {
        TreeParams {
            criterion,
            max_depth: usize::MAX,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: MaxFeatures::All,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: f64,
        samples: usize,
        impurity: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        samples: usize,
        impurity: f64,
    },
}

impl Node {
    pub fn samples(&self) -> usize {
        match *self {
            Node::Leaf { samples, .. } | Node::Split { samples, .. } => samples,
        }
    }

    pub fn impurity(&self) -> f64 {
        match *self {
            Node::Leaf { impurity, .. } | Node::Split { impurity, .. } => impurity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value, .. } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    /// Depth of the deepest leaf (root at depth 0).
    pub fn depth(&self) -> usize {
        let mut max = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((i, d)) = stack.pop() {
            max = max.max(d);
            if let Node::Split { left, right, .. } = self.nodes[i] {
                stack.push((left, d + 1));
                stack.push((right, d + 1));
            }
        }
        max
    }

    pub(crate) fn set_leaf_value(&mut self, node: usize, v: f64) {
        if let Node::Leaf { value, .. } = &mut self.nodes[node] {
            *value = v;
        }
    }
}

/// Column-major bin indices plus the distinct values behind each bin.
#[derive(Debug, Clone)]
pub(crate) struct BinnedMatrix {
    n_rows: usize,
    n_cols: usize,
    bins: Vec<u32>,
    edges: Vec<Vec<f64>>,
}

impl BinnedMatrix {
    pub fn new(x: &Matrix) -> Self {
        let mut bins = vec![0u32; x.n_rows * x.n_cols];
        let mut edges = Vec::with_capacity(x.n_cols);
        for f in 0..x.n_cols {
            let mut values: Vec<f64> = (0..x.n_rows).map(|r| x.data[r * x.n_cols + f]).collect();
            values.sort_by(f64::total_cmp);
            values.dedup();
            let col = &mut bins[f * x.n_rows..(f + 1) * x.n_rows];
            for (r, slot) in col.iter_mut().enumerate() {
                let v = x.data[r * x.n_cols + f];
                *slot = values.partition_point(|&e| e < v) as u32;
            }
            edges.push(values);
        }
        BinnedMatrix {
            n_rows: x.n_rows,
            n_cols: x.n_cols,
            bins,
            edges,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    fn column(&self, f: usize) -> &[u32] {
        &self.bins[f * self.n_rows..(f + 1) * self.n_rows]
    }

    fn max_bins(&self) -> usize {
        self.edges.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// A fitted tree plus the training rows that ended in each leaf.
pub(crate) struct TreeFit {
    pub tree: Tree,
    /// Row indices permuted so that each leaf owns a contiguous range.
    pub order: Vec<u32>,
    /// (node id, start, end) into `order`.
    pub leaves: Vec<(usize, usize, usize)>,
}

/// Fits a tree on the rows listed in `sample` (repeats act as weights).
pub(crate) fn build_tree<R: Rng + ?Sized>(
    data: &BinnedMatrix,
    targets: &[f64],
    sample: Vec<u32>,
    params: &TreeParams,
    rng: &mut R,
) -> TreeFit {
    let mut builder = Builder {
        data,
        targets,
        params,
        nodes: Vec::new(),
        leaves: Vec::new(),
        counts: vec![0; data.max_bins()],
        sums: vec![0.0; data.max_bins()],
        features: (0..data.n_cols).collect(),
        mae: MaeScratch::default(),
    };
    let mut order = sample;
    builder.grow(&mut order, rng);
    TreeFit {
        tree: Tree {
            nodes: builder.nodes,
        },
        order,
        leaves: builder.leaves,
    }
}

struct Builder<'a> {
    data: &'a BinnedMatrix,
    targets: &'a [f64],
    params: &'a TreeParams,
    nodes: Vec<Node>,
    leaves: Vec<(usize, usize, usize)>,
    counts: Vec<u32>,
    sums: Vec<f64>,
    features: Vec<usize>,
    mae: MaeScratch,
}

struct SplitCandidate {
    feature: usize,
    bin: u32,
    threshold: f64,
    children_impurity: f64,
}

struct Pending {
    node: usize,
    start: usize,
    end: usize,
    depth: usize,
}

impl<'a> Builder<'a> {
    fn grow<R: Rng + ?Sized>(&mut self, order: &mut [u32], rng: &mut R) {
        self.nodes.push(placeholder());
        let mut stack = vec![Pending {
            node: 0,
            start: 0,
            end: order.len(),
            depth: 0,
        }];
        while let Some(p) = stack.pop() {
            let rows = &mut order[p.start..p.end];
            let n = rows.len();
            let stats = NodeStats::of(self.targets, rows, self.params.criterion);
            let can_split = p.depth < self.params.max_depth
                && n >= self.params.min_samples_split
                && n >= 2 * self.params.min_samples_leaf
                && !stats.pure;
            let split = if can_split {
                self.best_split(rows, &stats, rng)
            } else {
                None
            };
            match split {
                Some(s) => {
                    let col = self.data.column(s.feature);
                    let mid = partition(rows, |&r| col[r as usize] <= s.bin);
                    let left = self.nodes.len();
                    let right = left + 1;
                    self.nodes.push(placeholder());
                    self.nodes.push(placeholder());
                    self.nodes[p.node] = Node::Split {
                        feature: s.feature,
                        threshold: s.threshold,
                        left,
                        right,
                        samples: n,
                        impurity: stats.impurity,
                    };
                    stack.push(Pending {
                        node: right,
                        start: p.start + mid,
                        end: p.end,
                        depth: p.depth + 1,
                    });
                    stack.push(Pending {
                        node: left,
                        start: p.start,
                        end: p.start + mid,
                        depth: p.depth + 1,
                    });
                }
                None => {
                    self.nodes[p.node] = Node::Leaf {
                        value: stats.value,
                        samples: n,
                        impurity: stats.impurity,
                    };
                    self.leaves.push((p.node, p.start, p.end));
                }
            }
        }
    }

    /// Visits features in random order until `max_features` non-constant
    /// ones have been scored; returns the split with the lowest weighted
    /// child impurity (first found among ties).
    fn best_split<R: Rng + ?Sized>(
        &mut self,
        rows: &[u32],
        stats: &NodeStats,
        rng: &mut R,
    ) -> Option<SplitCandidate> {
        let n_features = self.data.n_cols;
        let budget = self.params.max_features.resolve(n_features);
        let mut visited = 0;
        let mut best: Option<SplitCandidate> = None;
        if self.params.criterion == Criterion::Mae {
            self.mae.prepare(self.targets, rows);
        }
        for k in 0..n_features {
            if visited >= budget {
                break;
            }
            let pick = rng.random_range(k..n_features);
            self.features.swap(k, pick);
            let f = self.features[k];
            let candidate = match self.params.criterion {
                Criterion::Mae => self.scan_mae(f, rows),
                _ => self.scan_histogram(f, rows, stats),
            };
            let Some(candidate) = candidate else { continue };
            visited += 1;
            if let Some(c) = candidate {
                if best
                    .as_ref()
                    .is_none_or(|b| c.children_impurity < b.children_impurity)
                {
                    best = Some(c);
                }
            }
        }
        // Draws must depend only on the rng, not on earlier nodes' shuffles.
        for (i, f) in self.features.iter_mut().enumerate() {
            *f = i;
        }
        let best = best?;
        // Impurity never increases for a concave criterion; guard against rounding.
        let parent = stats.impurity * rows.len() as f64;
        (best.children_impurity <= parent + 1e-9 * parent.abs().max(1.0)).then_some(best)
    }

    /// Histogram scan for Gini, entropy and squared error. Returns `None`
    /// for a constant feature, `Some(None)` when no split satisfies the
    /// leaf-size limit.
    fn scan_histogram(
        &mut self,
        f: usize,
        rows: &[u32],
        stats: &NodeStats,
    ) -> Option<Option<SplitCandidate>> {
        let col = self.data.column(f);
        let n_bins = self.data.edges[f].len();
        let counts = &mut self.counts[..n_bins];
        let sums = &mut self.sums[..n_bins];
        counts.fill(0);
        sums.fill(0.0);
        for &r in rows {
            let b = col[r as usize] as usize;
            counts[b] += 1;
            sums[b] += self.targets[r as usize];
        }
        let first = counts.iter().position(|&c| c > 0)?;
        let last = counts.iter().rposition(|&c| c > 0)?;
        if first == last {
            return None;
        }
        let n = rows.len() as f64;
        let min_leaf = self.params.min_samples_leaf as f64;
        let (mut n_left, mut s_left) = (0.0, 0.0);
        let mut best: Option<(f64, usize)> = None;
        for b in first..last {
            if counts[b] == 0 {
                continue;
            }
            n_left += f64::from(counts[b]);
            s_left += sums[b];
            let n_right = n - n_left;
            if n_left < min_leaf || n_right < min_leaf {
                continue;
            }
            let s_right = stats.sum - s_left;
            let score = match self.params.criterion {
                Criterion::Gini => {
                    n_left * gini(s_left / n_left) + n_right * gini(s_right / n_right)
                }
                Criterion::InfoGain => {
                    n_left * entropy(s_left / n_left) + n_right * entropy(s_right / n_right)
                }
                // Weighted variance up to the constant sum of squares.
                _ => stats.sum_sq - s_left * s_left / n_left - s_right * s_right / n_right,
            };
            if best.is_none_or(|(s, _)| score < s) {
                best = Some((score, b));
            }
        }
        Some(best.map(|(score, b)| {
            let next = (b + 1..n_bins)
                .find(|&j| counts[j] > 0)
                .expect("last bin is non-empty");
            let edges = &self.data.edges[f];
            SplitCandidate {
                feature: f,
                bin: b as u32,
                threshold: midpoint(edges[b], edges[next]),
                children_impurity: score,
            }
        }))
    }

    fn scan_mae(&mut self, f: usize, rows: &[u32]) -> Option<Option<SplitCandidate>> {
        let col = self.data.column(f);
        let n_bins = self.data.edges[f].len();
        let counts = &mut self.counts[..n_bins];
        counts.fill(0);
        for &r in rows {
            counts[col[r as usize] as usize] += 1;
        }
        let first = counts.iter().position(|&c| c > 0)?;
        let last = counts.iter().rposition(|&c| c > 0)?;
        if first == last {
            return None;
        }
        // Counting sort of node positions by bin.
        let mut offsets = vec![0usize; n_bins + 1];
        for b in 0..n_bins {
            offsets[b + 1] = offsets[b] + counts[b] as usize;
        }
        let mut by_bin = vec![0usize; rows.len()];
        let mut cursor = offsets.clone();
        for (pos, &r) in rows.iter().enumerate() {
            let b = col[r as usize] as usize;
            by_bin[cursor[b]] = pos;
            cursor[b] += 1;
        }
        let n = rows.len();
        let min_leaf = self.params.min_samples_leaf;
        self.mae.reset_left();
        let mut best: Option<(f64, usize)> = None;
        for b in first..last {
            if counts[b] == 0 {
                continue;
            }
            for &pos in &by_bin[offsets[b]..offsets[b + 1]] {
                self.mae.insert_left(pos);
            }
            let n_left = offsets[b + 1];
            if n_left < min_leaf || n - n_left < min_leaf {
                continue;
            }
            let score = self.mae.left_deviation() + self.mae.right_deviation();
            if best.is_none_or(|(s, _)| score < s) {
                best = Some((score, b));
            }
        }
        Some(best.map(|(score, b)| {
            let next = (b + 1..n_bins)
                .find(|&j| counts[j] > 0)
                .expect("last bin is non-empty");
            let edges = &self.data.edges[f];
            SplitCandidate {
                feature: f,
                bin: b as u32,
                threshold: midpoint(edges[b], edges[next]),
                children_impurity: score,
            }
        }))
    }
}

fn placeholder() -> Node {
    Node::Leaf {
        value: 0.0,
        samples: 0,
        impurity: 0.0,
    }
}

fn midpoint(a: f64, b: f64) -> f64 {
    a + (b - a) / 2.0
}

fn partition(rows: &mut [u32], mut goes_left: impl FnMut(&u32) -> bool) -> usize {
    let mut mid = 0;
    for i in 0..rows.len() {
        if goes_left(&rows[i]) {
            rows.swap(i, mid);
            mid += 1;
        }
    }
    mid
}

pub(crate) fn gini(p: f64) -> f64 {
    2.0 * p * (1.0 - p)
}

pub(crate) fn entropy(p: f64) -> f64 {
    let h = |q: f64| if q <= 0.0 { 0.0 } else { -q * q.log2() };
    h(p) + h(1.0 - p)
}

struct NodeStats {
    sum: f64,
    sum_sq: f64,
    impurity: f64,
    value: f64,
    pure: bool,
}

impl NodeStats {
    fn of(targets: &[f64], rows: &[u32], criterion: Criterion) -> Self {
        let n = rows.len() as f64;
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &r in rows {
            let y = targets[r as usize];
            sum += y;
            sum_sq += y * y;
            lo = lo.min(y);
            hi = hi.max(y);
        }
        let pure = lo == hi;
        let mean = sum / n;
        let (impurity, value) = match criterion {
            Criterion::Gini => (gini(mean), mean),
            Criterion::InfoGain => (entropy(mean), mean),
            Criterion::Mse => {
                let var = rows
                    .iter()
                    .map(|&r| (targets[r as usize] - mean).powi(2))
                    .sum::<f64>()
                    / n;
                (var, mean)
            }
            Criterion::Mae => {
                let mut ys: Vec<f64> = rows.iter().map(|&r| targets[r as usize]).collect();
                ys.sort_by(f64::total_cmp);
                let med = median_sorted(&ys);
                let dev = ys.iter().map(|y| (y - med).abs()).sum::<f64>() / n;
                (dev, med)
            }
        };
        NodeStats {
            sum,
            sum_sq,
            impurity: if pure { 0.0 } else { impurity },
            value,
            pure,
        }
    }
}

pub(crate) fn median_sorted(ys: &[f64]) -> f64 {
    let m = ys.len() / 2;
    if ys.len() % 2 == 1 {
        ys[m]
    } else {
        midpoint(ys[m - 1], ys[m])
    }
}

/// Running absolute-deviation sums for the left/right children of a node,
/// over targets ranked within the node. A Fenwick tree over ranks holds the
/// left child; the right child is the complement.
#[derive(Default)]
struct MaeScratch {
    /// Node targets in ascending order.
    sorted: Vec<f64>,
    /// prefix[r] = sum of sorted[..r].
    prefix: Vec<f64>,
    /// Rank of each node position.
    rank: Vec<usize>,
    fen_count: Vec<u32>,
    fen_sum: Vec<f64>,
    left_n: usize,
    left_sum: f64,
}

impl MaeScratch {
    fn prepare(&mut self, targets: &[f64], rows: &[u32]) {
        let n = rows.len();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| {
            targets[rows[a] as usize]
                .total_cmp(&targets[rows[b] as usize])
                .then(a.cmp(&b))
        });
        self.sorted.clear();
        self.rank.clear();
        self.rank.resize(n, 0);
        for (r, &pos) in idx.iter().enumerate() {
            self.sorted.push(targets[rows[pos] as usize]);
            self.rank[pos] = r;
        }
        self.prefix.clear();
        self.prefix.push(0.0);
        let mut acc = 0.0;
        for &y in &self.sorted {
            acc += y;
            self.prefix.push(acc);
        }
    }

    fn reset_left(&mut self) {
        let n = self.sorted.len();
        self.fen_count.clear();
        self.fen_count.resize(n + 1, 0);
        self.fen_sum.clear();
        self.fen_sum.resize(n + 1, 0.0);
        self.left_n = 0;
        self.left_sum = 0.0;
    }

    fn insert_left(&mut self, pos: usize) {
        let r = self.rank[pos];
        let y = self.sorted[r];
        let mut i = r + 1;
        while i < self.fen_count.len() {
            self.fen_count[i] += 1;
            self.fen_sum[i] += y;
            i += i & i.wrapping_neg();
        }
        self.left_n += 1;
        self.left_sum += y;
    }

    /// Count and sum of left elements with rank < r.
    fn left_prefix(&self, r: usize) -> (usize, f64) {
        let (mut c, mut s) = (0usize, 0.0);
        let mut i = r;
        while i > 0 {
            c += self.fen_count[i] as usize;
            s += self.fen_sum[i];
            i &= i - 1;
        }
        (c, s)
    }

    /// Smallest rank r such that the chosen side has more than `k` elements
    /// with rank <= r.
    fn select(&self, k: usize, right: bool) -> usize {
        let n = self.sorted.len();
        let mut pos = 0;
        let mut remaining = k;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n {
                let left_here = self.fen_count[next] as usize;
                // A Fenwick cell at `next` covers `next & -next` ranks.
                let here = if right {
                    (next & next.wrapping_neg()) - left_here
                } else {
                    left_here
                };
                if here <= remaining {
                    pos = next;
                    remaining -= here;
                }
            }
            step >>= 1;
        }
        pos
    }

    fn deviation(count: usize, sum: f64, med: f64, below_count: usize, below_sum: f64) -> f64 {
        // Elements with rank <= median rank contribute med - y, the rest y - med.
        med * below_count as f64 - below_sum + (sum - below_sum)
            - med * (count - below_count) as f64
    }

    fn left_deviation(&self) -> f64 {
        let k = self.left_n;
        if k == 0 {
            return 0.0;
        }
        let r = self.select((k - 1) / 2, false);
        let med = self.sorted[r];
        let (c, s) = self.left_prefix(r + 1);
        Self::deviation(k, self.left_sum, med, c, s)
    }

    fn right_deviation(&self) -> f64 {
        let n = self.sorted.len();
        let k = n - self.left_n;
        if k == 0 {
            return 0.0;
        }
        let total_sum = self.prefix[n] - self.left_sum;
        let r = self.select((k - 1) / 2, true);
        let med = self.sorted[r];
        let (lc, ls) = self.left_prefix(r + 1);
        let c = (r + 1) - lc;
        let s = self.prefix[r + 1] - ls;
        Self::deviation(k, total_sum, med, c, s)
    }
}

pub(crate) fn check_targets(targets: &[f64], classification: bool) -> Result<()> {
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(Error::DegenerateData("non-finite target".into()));
    }
    if classification {
        if targets.iter().any(|&t| t != 0.0 && t != 1.0) {
            return Err(Error::DegenerateData(
                "classifier targets must be 0 or 1".into(),
            ));
        }
        let ones = targets.iter().filter(|&&t| t == 1.0).count();
        if ones == 0 || ones == targets.len() {
            return Err(Error::DegenerateData(
                "classifier needs both classes".into(),
            ));
        }
    }
    Ok(())
}
