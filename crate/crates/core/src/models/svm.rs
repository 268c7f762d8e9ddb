//! RBF-kernel support vector machines trained by sequential minimal
//! optimization.
//!
//! Both C-SVC (hinge loss) and epsilon-SVR reduce to the dual problem
//!
//! ```text
//! min 1/2 a'Qa + p'a   s.t.  y'a = 0,  0 <= a <= C
//! ```
//!
//! which the solver attacks two variables at a time, always picking the
//! maximally KKT-violating pair. It stops when the violation gap falls to
//! the tolerance or the iteration cap is reached.

use std::collections::HashMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::tuning::{ParamConfig, C, GAMMA};

use super::matrix::Matrix;
use super::ModelMode;

pub const KKT_TOLERANCE: f64 = 1e-3;
pub const MAX_ITERATIONS: usize = 100_000;
/// Tube half-width for regression.
pub const EPSILON: f64 = 0.1;

const CACHE_BYTES: usize = 256 << 20;
const MAX_LOOKUP: usize = 1 << 22;
const TAU: f64 = 1e-12;

#[inline]
fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
fn squared_sum(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x + y) * (x + y)).sum()
}

/// `exp(-gamma * |a - b|^2)`.
#[inline]
pub fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    (-gamma * squared_distance(a, b)).exp()
}

/// Integer rows are zero-padded to a multiple of this many lanes.
const LANES: usize = 16;

#[inline]
fn dot_i16(a: &[i16], b: &[i16]) -> i32 {
    let mut acc = [0i32; LANES];
    for (x, y) in a.chunks_exact(LANES).zip(b.chunks_exact(LANES)) {
        for k in 0..LANES {
            acc[k] += i32::from(x[k]) * i32::from(y[k]);
        }
    }
    acc.iter().sum()
}

/// Kernel over a subset of training rows.
///
/// Small integral features are stored as `i16`, so squared distances come
/// exactly from `|a|^2 + |b|^2 - 2 a.b` with integer dot products, and `exp`
/// is read from a table holding the values [`rbf`] would compute. The odd
/// variant is `K(a, b) - K(a, -b)`, the kernel of antisymmetric functions.
struct Kernel {
    dim: usize,
    stride: usize,
    reals: Vec<f64>,
    ints: Option<Vec<i16>>,
    norms: Vec<i64>,
    gamma: f64,
    table: Option<Vec<f64>>,
    odd: bool,
}

impl Kernel {
    fn new(x: &Matrix, rows: &[usize], gamma: f64, odd: bool) -> Self {
        let dim = x.n_cols;
        let reals: Vec<f64> = rows
            .iter()
            .flat_map(|&r| x.row(r).iter().copied())
            .collect();
        let max_abs = reals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let small = max_abs <= f64::from(i16::MAX)
            && 4.0 * dim as f64 * max_abs * max_abs < f64::from(i32::MAX);
        let stride = dim.div_ceil(LANES).max(1) * LANES;
        let ints = small.then(|| {
            let mut ints = vec![0i16; rows.len() * stride];
            for (k, &r) in rows.iter().enumerate() {
                for (slot, &v) in ints[k * stride..].iter_mut().zip(x.row(r)) {
                    *slot = v as i16;
                }
            }
            ints
        });
        let norms: Vec<i64> = match &ints {
            Some(ints) => ints
                .chunks_exact(stride)
                .map(|r| i64::from(dot_i16(r, r)))
                .collect(),
            None => Vec::new(),
        };
        let table = ints.as_ref().and_then(|_| {
            let bound = 4 * norms.iter().copied().max().unwrap_or(0) as usize;
            (bound < MAX_LOOKUP).then(|| (0..=bound).map(|k| (-gamma * k as f64).exp()).collect())
        });
        Kernel {
            dim,
            stride,
            reals,
            ints: if table.is_some() { ints } else { None },
            norms,
            gamma,
            table,
            odd,
        }
    }

    fn len(&self) -> usize {
        self.reals.len().checked_div(self.dim).unwrap_or(0)
    }

    fn real_row(&self, i: usize) -> &[f64] {
        &self.reals[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    fn value(&self, i: usize, j: usize) -> f64 {
        match (&self.ints, &self.table) {
            (Some(ints), Some(table)) => {
                let (a, b) = (self.int_row(ints, i), self.int_row(ints, j));
                let dot = i64::from(dot_i16(a, b));
                let s = self.norms[i] + self.norms[j];
                let near = table[(s - 2 * dot) as usize];
                if self.odd {
                    near - table[(s + 2 * dot) as usize]
                } else {
                    near
                }
            }
            _ => {
                let (a, b) = (self.real_row(i), self.real_row(j));
                let near = (-self.gamma * squared_distance(a, b)).exp();
                if self.odd {
                    near - (-self.gamma * squared_sum(a, b)).exp()
                } else {
                    near
                }
            }
        }
    }

    #[inline]
    fn int_row<'b>(&self, ints: &'b [i16], i: usize) -> &'b [i16] {
        &ints[i * self.stride..(i + 1) * self.stride]
    }

    fn fill_row(&self, i: usize, out: &mut Vec<f64>) {
        out.clear();
        match (&self.ints, &self.table) {
            (Some(ints), Some(table)) => {
                let a = self.int_row(ints, i);
                let ni = self.norms[i];
                let odd = self.odd;
                out.extend(
                    ints.chunks_exact(self.stride)
                        .zip(&self.norms)
                        .map(|(b, &nj)| {
                            let dot = i64::from(dot_i16(a, b));
                            let near = table[(ni + nj - 2 * dot) as usize];
                            if odd {
                                near - table[(ni + nj + 2 * dot) as usize]
                            } else {
                                near
                            }
                        }),
                );
            }
            _ => out.extend((0..self.len()).map(|j| self.value(i, j))),
        }
    }
}

/// Kernel rows with a least-recently-used cache.
struct KernelRows {
    kernel: Kernel,
    slots: Vec<Vec<f64>>,
    owner: Vec<usize>,
    last_used: Vec<u64>,
    index: HashMap<usize, usize>,
    capacity: usize,
    clock: u64,
}

impl KernelRows {
    fn new(kernel: Kernel) -> Self {
        let n = kernel.len().max(1);
        let capacity = (CACHE_BYTES / (8 * n)).clamp(2, n.max(2));
        KernelRows {
            kernel,
            slots: Vec::new(),
            owner: Vec::new(),
            last_used: Vec::new(),
            index: HashMap::new(),
            capacity,
            clock: 0,
        }
    }

    fn row(&mut self, i: usize) -> &[f64] {
        self.clock += 1;
        if let Some(&slot) = self.index.get(&i) {
            self.last_used[slot] = self.clock;
            return &self.slots[slot];
        }
        let slot = if self.slots.len() < self.capacity {
            self.slots.push(Vec::with_capacity(self.kernel.len()));
            self.owner.push(i);
            self.last_used.push(0);
            self.slots.len() - 1
        } else {
            let (slot, _) = self
                .last_used
                .iter()
                .enumerate()
                .min_by_key(|&(_, &t)| t)
                .expect("non-empty cache");
            self.index.remove(&self.owner[slot]);
            slot
        };
        let mut buf = std::mem::take(&mut self.slots[slot]);
        self.kernel.fill_row(i, &mut buf);
        self.slots[slot] = buf;
        self.owner[slot] = i;
        self.last_used[slot] = self.clock;
        self.index.insert(i, slot);
        &self.slots[slot]
    }

    fn diagonal(&self, i: usize) -> f64 {
        self.kernel.value(i, i)
    }
}

/// Solution of the dual problem, indexed like the solver's variables.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    /// Offset: decision value is `sum(coef * K) - rho`.
    pub rho: f64,
    pub iterations: usize,
    /// Final maximal violation `m(a) - M(a)`.
    pub gap: f64,
    pub converged: bool,
}

/// `min 1/2 a'Qa + p'a` over `0 <= a <= C` with `Q_st = y_s y_t K(base_s, base_t)`.
struct DualProblem {
    kernel: KernelRows,
    /// Kernel point behind each variable.
    base: Vec<usize>,
    y: Vec<f64>,
    p: Vec<f64>,
    c: f64,
}

impl DualProblem {
    /// Two-variable updates under the constraint `y'a = 0`.
    fn solve(mut self, tol: f64, max_iter: usize) -> DualSolution {
        let l = self.y.len();
        let c = self.c;
        let mut alpha = vec![0.0; l];
        let mut grad = self.p.clone();
        let diag: Vec<f64> = self.base.iter().map(|&b| self.kernel.diagonal(b)).collect();
        let upper = |a: f64| a >= c;
        let lower = |a: f64| a <= 0.0;
        let mut iterations = 0;
        let mut gap;
        let mut row_i: Vec<f64> = Vec::new();
        loop {
            // Maximal violating pair.
            let (mut g_max, mut i) = (f64::NEG_INFINITY, usize::MAX);
            let (mut g_min, mut j) = (f64::INFINITY, usize::MAX);
            for t in 0..l {
                let v = -self.y[t] * grad[t];
                let in_up = if self.y[t] > 0.0 {
                    !upper(alpha[t])
                } else {
                    !lower(alpha[t])
                };
                let in_low = if self.y[t] > 0.0 {
                    !lower(alpha[t])
                } else {
                    !upper(alpha[t])
                };
                if in_up && v > g_max {
                    g_max = v;
                    i = t;
                }
                if in_low && v < g_min {
                    g_min = v;
                    j = t;
                }
            }
            gap = if i == usize::MAX || j == usize::MAX {
                0.0
            } else {
                g_max - g_min
            };
            if gap <= tol || iterations >= max_iter {
                break;
            }
            iterations += 1;

            let (yi, yj) = (self.y[i], self.y[j]);
            let (bi, bj) = (self.base[i], self.base[j]);
            row_i.clear();
            row_i.extend_from_slice(self.kernel.row(bi));
            let (old_i, old_j) = (alpha[i], alpha[j]);
            let q_ij = yi * yj * row_i[bj];
            if yi != yj {
                let quad = (diag[i] + diag[j] + 2.0 * q_ij).max(TAU);
                let delta = (-grad[i] - grad[j]) / quad;
                let diff = alpha[i] - alpha[j];
                alpha[i] += delta;
                alpha[j] += delta;
                if diff > 0.0 {
                    if alpha[j] < 0.0 {
                        alpha[j] = 0.0;
                        alpha[i] = diff;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = -diff;
                }
                if diff > 0.0 {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = c - diff;
                    }
                } else if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = c + diff;
                }
            } else {
                let quad = (diag[i] + diag[j] - 2.0 * q_ij).max(TAU);
                let delta = (grad[i] - grad[j]) / quad;
                let sum = alpha[i] + alpha[j];
                alpha[i] -= delta;
                alpha[j] += delta;
                if sum > c {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = sum - c;
                    }
                } else if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if sum > c {
                    if alpha[j] > c {
                        alpha[j] = c;
                        alpha[i] = sum - c;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
            let (si, sj) = (yi * (alpha[i] - old_i), yj * (alpha[j] - old_j));
            let row_j = self.kernel.row(bj);
            for ((g, &y), &b) in grad.iter_mut().zip(&self.y).zip(&self.base) {
                *g += y * (si * row_i[b] + sj * row_j[b]);
            }
        }
        let rho = self.rho(&alpha, &grad);
        DualSolution {
            alpha,
            rho,
            iterations,
            gap,
            converged: gap <= tol,
        }
    }

    /// Greedy coordinate descent without the equality constraint, for the
    /// bias-free problem of the odd kernel. The reported gap is that of the
    /// mirrored full problem, twice the largest projected-gradient violation.
    fn solve_unbiased(mut self, tol: f64, max_iter: usize) -> DualSolution {
        let l = self.y.len();
        let c = self.c;
        let mut alpha = vec![0.0; l];
        let mut grad = self.p.clone();
        let diag: Vec<f64> = self.base.iter().map(|&b| self.kernel.diagonal(b)).collect();
        let mut iterations = 0;
        let mut gap;
        loop {
            let (mut worst, mut k) = (f64::NEG_INFINITY, usize::MAX);
            for (t, (&a, &g)) in alpha.iter().zip(&grad).enumerate() {
                let up = if a < c { -g } else { f64::NEG_INFINITY };
                let down = if a > 0.0 { g } else { f64::NEG_INFINITY };
                let v = up.max(down);
                if v > worst {
                    worst = v;
                    k = t;
                }
            }
            gap = if k == usize::MAX { 0.0 } else { 2.0 * worst };
            if gap <= tol || iterations >= max_iter {
                break;
            }
            iterations += 1;
            let old = alpha[k];
            let new = if diag[k] > TAU {
                (old - grad[k] / diag[k]).clamp(0.0, c)
            } else if grad[k] < 0.0 {
                c
            } else {
                0.0
            };
            let delta = new - old;
            alpha[k] = new;
            if delta != 0.0 {
                let step = delta * self.y[k];
                let row = self.kernel.row(self.base[k]);
                for ((g, &y), &b) in grad.iter_mut().zip(&self.y).zip(&self.base) {
                    *g += step * y * row[b];
                }
            }
        }
        DualSolution {
            alpha,
            rho: 0.0,
            iterations,
            gap,
            converged: gap <= tol,
        }
    }

    fn rho(&self, alpha: &[f64], grad: &[f64]) -> f64 {
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut free, mut sum_free) = (0usize, 0.0);
        for t in 0..alpha.len() {
            let yg = self.y[t] * grad[t];
            if alpha[t] >= self.c {
                if self.y[t] < 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if alpha[t] <= 0.0 {
                if self.y[t] > 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                free += 1;
                sum_free += yg;
            }
        }
        if free > 0 {
            sum_free / free as f64
        } else {
            (ub + lb) / 2.0
        }
    }
}

fn classification_problem(kernel: Kernel, labels: &[f64], c: f64) -> DualProblem {
    let l = labels.len();
    DualProblem {
        kernel: KernelRows::new(kernel),
        base: (0..l).collect(),
        y: labels.to_vec(),
        p: vec![-1.0; l],
        c,
    }
}

/// Variables `0..n` carry the `+` multipliers, `n..2n` the `-` ones.
fn regression_problem(kernel: Kernel, targets: &[f64], c: f64, epsilon: f64) -> DualProblem {
    let n = targets.len();
    let mut y = vec![1.0; n];
    y.extend(std::iter::repeat_n(-1.0, n));
    let mut p: Vec<f64> = targets.iter().map(|t| epsilon - t).collect();
    p.extend(targets.iter().map(|t| epsilon + t));
    DualProblem {
        kernel: KernelRows::new(kernel),
        base: (0..2 * n).map(|t| t % n).collect(),
        y,
        p,
        c,
    }
}

/// C-SVC dual for labels in {-1, +1}.
#[cfg(test)]
pub(crate) fn solve_classification(
    x: &Matrix,
    labels: &[f64],
    c: f64,
    gamma: f64,
    tol: f64,
    max_iter: usize,
) -> DualSolution {
    let rows: Vec<usize> = (0..x.n_rows).collect();
    classification_problem(Kernel::new(x, &rows, gamma, false), labels, c).solve(tol, max_iter)
}

/// epsilon-SVR dual.
#[cfg(test)]
pub(crate) fn solve_regression(
    x: &Matrix,
    targets: &[f64],
    c: f64,
    gamma: f64,
    epsilon: f64,
    tol: f64,
    max_iter: usize,
) -> DualSolution {
    let rows: Vec<usize> = (0..x.n_rows).collect();
    regression_problem(Kernel::new(x, &rows, gamma, false), targets, c, epsilon)
        .solve(tol, max_iter)
}

/// True when rows come in mirrored pairs `(d, -d)` whose targets are
/// complementary labels (classifier) or negated values (regressor).
fn is_mirrored(x: &Matrix, y: &[f64], mode: ModelMode) -> bool {
    if x.n_rows < 2 || !x.n_rows.is_multiple_of(2) {
        return false;
    }
    (0..x.n_rows / 2).all(|k| {
        let (a, b) = (x.row(2 * k), x.row(2 * k + 1));
        let targets = match mode {
            ModelMode::Classifier => (y[2 * k] > 0.5) != (y[2 * k + 1] > 0.5),
            ModelMode::Regressor => y[2 * k + 1] == -y[2 * k],
        };
        targets && a.iter().zip(b).all(|(u, v)| *u == -*v)
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Svm {
    gamma: f64,
    rho: f64,
    support_vectors: Vec<Vec<f64>>,
    coef: Vec<f64>,
    iterations: usize,
    gap: f64,
    converged: bool,
    #[serde(skip)]
    prepared: OnceLock<Option<Prepared>>,
}

impl PartialEq for Svm {
    fn eq(&self, other: &Self) -> bool {
        self.gamma == other.gamma
            && self.rho == other.rho
            && self.support_vectors == other.support_vectors
            && self.coef == other.coef
            && self.iterations == other.iterations
            && self.gap == other.gap
            && self.converged == other.converged
    }
}

/// Support vectors as padded `i16` rows with an `exp` table, used when
/// both the support vectors and the query are small integers.
#[derive(Debug, Clone)]
struct Prepared {
    stride: usize,
    ints: Vec<i16>,
    norms: Vec<i64>,
    max_abs: f64,
    table: Vec<f64>,
}

impl Prepared {
    fn new(support_vectors: &[Vec<f64>], gamma: f64) -> Option<Self> {
        let dim = support_vectors.first()?.len();
        let max_abs = support_vectors
            .iter()
            .flatten()
            .try_fold(0.0f64, |m, &v| (v.fract() == 0.0).then(|| m.max(v.abs())))?;
        if max_abs > f64::from(i16::MAX) {
            return None;
        }
        let stride = dim.div_ceil(LANES).max(1) * LANES;
        let mut ints = vec![0i16; support_vectors.len() * stride];
        for (k, sv) in support_vectors.iter().enumerate() {
            for (slot, &v) in ints[k * stride..].iter_mut().zip(sv) {
                *slot = v as i16;
            }
        }
        let norms: Vec<i64> = ints
            .chunks_exact(stride)
            .map(|r| i64::from(dot_i16(r, r)))
            .collect();
        let bound = (4 * norms.iter().copied().max().unwrap_or(0) as usize).min(MAX_LOOKUP);
        let table = (0..=bound).map(|k| (-gamma * k as f64).exp()).collect();
        Some(Prepared {
            stride,
            ints,
            norms,
            max_abs,
            table,
        })
    }

    /// `None` when the query does not fit the integer path.
    fn kernel_sum(&self, coef: &[f64], gamma: f64, x: &[f64]) -> Option<f64> {
        let q_abs = x
            .iter()
            .try_fold(0.0f64, |m, &v| (v.fract() == 0.0).then(|| m.max(v.abs())))?;
        if q_abs > f64::from(i16::MAX)
            || self.stride as f64 * q_abs * self.max_abs >= f64::from(i32::MAX)
        {
            return None;
        }
        let mut q = vec![0i16; self.stride];
        for (slot, &v) in q.iter_mut().zip(x) {
            *slot = v as i16;
        }
        let nq: i64 = x.iter().map(|&v| (v * v) as i64).sum();
        let mut sum = 0.0;
        for ((sv, &ns), &c) in self
            .ints
            .chunks_exact(self.stride)
            .zip(&self.norms)
            .zip(coef)
        {
            let d2 = nq + ns - 2 * i64::from(dot_i16(&q, sv));
            let k = match self.table.get(d2 as usize) {
                Some(&v) => v,
                None => (-gamma * d2 as f64).exp(),
            };
            sum += c * k;
        }
        Some(sum)
    }
}

impl Svm {
    /// Mirrored training sets (see `is_mirrored`) have an antisymmetric
    /// optimum with zero offset, found on half the rows with the odd kernel.
    pub(crate) fn fit(
        x: &Matrix,
        y: &[f64],
        mode: ModelMode,
        config: &ParamConfig,
    ) -> Result<Self> {
        let c = config.real(C)?;
        let gamma = config.real(GAMMA)?;
        let mirrored = is_mirrored(x, y, mode);
        let rows: Vec<usize> = (0..x.n_rows)
            .step_by(if mirrored { 2 } else { 1 })
            .collect();
        let m = rows.len();
        let targets: Vec<f64> = rows.iter().map(|&r| y[r]).collect();
        let kernel = Kernel::new(x, &rows, gamma, mirrored);
        let run = |problem: DualProblem| {
            if mirrored {
                problem.solve_unbiased(KKT_TOLERANCE, MAX_ITERATIONS)
            } else {
                problem.solve(KKT_TOLERANCE, MAX_ITERATIONS)
            }
        };
        let (solution, point_coef): (DualSolution, Vec<f64>) = match mode {
            ModelMode::Classifier => {
                let labels: Vec<f64> = targets
                    .iter()
                    .map(|&t| if t > 0.5 { 1.0 } else { -1.0 })
                    .collect();
                let s = run(classification_problem(kernel, &labels, c));
                let coef = s.alpha.iter().zip(&labels).map(|(a, l)| a * l).collect();
                (s, coef)
            }
            ModelMode::Regressor => {
                let s = run(regression_problem(kernel, &targets, c, EPSILON));
                let coef = (0..m).map(|i| s.alpha[i] - s.alpha[i + m]).collect();
                (s, coef)
            }
        };
        let mut support_vectors = Vec::new();
        let mut coef = Vec::new();
        for (k, &a) in point_coef.iter().enumerate() {
            let row = x.row(rows[k]);
            if a == 0.0 || (mirrored && row.iter().all(|&v| v == 0.0)) {
                continue;
            }
            support_vectors.push(row.to_vec());
            coef.push(a);
            if mirrored {
                support_vectors.push(x.row(rows[k] + 1).to_vec());
                coef.push(-a);
            }
        }
        Ok(Svm {
            gamma,
            rho: solution.rho,
            support_vectors,
            coef,
            iterations: solution.iterations,
            gap: solution.gap,
            converged: solution.converged,
            prepared: OnceLock::new(),
        })
    }

    pub fn decision_value(&self, x: &[f64]) -> f64 {
        let prepared = self
            .prepared
            .get_or_init(|| Prepared::new(&self.support_vectors, self.gamma));
        if let Some(sum) = prepared
            .as_ref()
            .and_then(|p| p.kernel_sum(&self.coef, self.gamma, x))
        {
            return sum - self.rho;
        }
        self.support_vectors
            .iter()
            .zip(&self.coef)
            .map(|(sv, c)| c * rbf(self.gamma, sv, x))
            .sum::<f64>()
            - self.rho
    }

    pub fn support_vectors(&self) -> &[Vec<f64>] {
        &self.support_vectors
    }

    /// Signed dual coefficients of the support vectors.
    pub fn dual_coef(&self) -> &[f64] {
        &self.coef
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn n_support(&self) -> usize {
        self.coef.len()
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn kkt_gap(&self) -> f64 {
        self.gap
    }

    pub fn converged(&self) -> bool {
        self.converged
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FeatureVector;

    fn matrix(rows: &[&[i32]]) -> Matrix {
        let v: Vec<FeatureVector> = rows
            .iter()
            .map(|r| FeatureVector::new(r.to_vec()))
            .collect();
        Matrix::from_vectors(&v).unwrap()
    }

    fn all_rows(x: &Matrix) -> Vec<usize> {
        (0..x.n_rows).collect()
    }

    #[test]
    fn lookup_matches_direct_kernel() {
        let x = matrix(&[&[0, 3], &[2, -1], &[5, 5]]);
        let k = Kernel::new(&x, &all_rows(&x), 0.37, false);
        assert!(k.table.is_some());
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(k.value(i, j), rbf(0.37, x.row(i), x.row(j)));
            }
        }
    }

    #[test]
    fn odd_kernel_is_difference_of_rbfs() {
        let x = matrix(&[&[1, -3], &[2, 2], &[0, 0]]);
        let k = Kernel::new(&x, &all_rows(&x), 0.2, true);
        for i in 0..3 {
            for j in 0..3 {
                let neg: Vec<f64> = x.row(j).iter().map(|v| -v).collect();
                let want = rbf(0.2, x.row(i), x.row(j)) - rbf(0.2, x.row(i), &neg);
                assert_eq!(k.value(i, j), want);
            }
        }
        assert_eq!(k.value(2, 1), 0.0);
    }

    #[test]
    fn cache_evicts_least_recent() {
        let x = matrix(&[&[0], &[1], &[2], &[3]]);
        let mut k = KernelRows::new(Kernel::new(&x, &all_rows(&x), 1.0, false));
        k.capacity = 2;
        k.row(0);
        k.row(1);
        k.row(0);
        k.row(2);
        assert!(k.index.contains_key(&0));
        assert!(!k.index.contains_key(&1));
        assert_eq!(k.row(1)[3], rbf(1.0, x.row(1), x.row(3)));
    }

    fn kkt_gap(x: &Matrix, labels: &[f64], svm: &Svm, c: f64) -> f64 {
        // Recover each row's multiplier from the stored coefficients.
        let mut alpha = vec![0.0; labels.len()];
        for (sv, &a) in svm.support_vectors.iter().zip(&svm.coef) {
            let i = (0..x.n_rows).find(|&i| x.row(i) == sv.as_slice()).unwrap();
            alpha[i] = a * labels[i];
        }
        let (mut up, mut low) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..labels.len() {
            let f = svm.decision_value(x.row(i)) + svm.rho;
            let v = labels[i] - f;
            let (in_up, in_low) = if labels[i] > 0.0 {
                (alpha[i] < c, alpha[i] > 0.0)
            } else {
                (alpha[i] > 0.0, alpha[i] < c)
            };
            if in_up {
                up = up.max(v);
            }
            if in_low {
                low = low.min(v);
            }
        }
        up - low
    }

    #[test]
    fn mirrored_fit_solves_the_full_problem() {
        let base: [&[i32]; 6] = [
            &[1, 0, 2],
            &[-2, 1, 0],
            &[0, 3, -1],
            &[2, 2, 2],
            &[-1, -1, 1],
            &[3, 0, 0],
        ];
        let mut rows: Vec<Vec<i32>> = Vec::new();
        let mut y = Vec::new();
        for (k, r) in base.iter().enumerate() {
            rows.push(r.to_vec());
            rows.push(r.iter().map(|v| -v).collect());
            let first = if (r[0] + r[1] - r[2] + k as i32 % 2) > 0 {
                1.0
            } else {
                0.0
            };
            y.push(first);
            y.push(1.0 - first);
        }
        let refs: Vec<&[i32]> = rows.iter().map(|r| r.as_slice()).collect();
        let x = matrix(&refs);
        assert!(is_mirrored(&x, &y, ModelMode::Classifier));
        let config = ParamConfig::new()
            .with(C, crate::tuning::ParamValue::Real(2.0))
            .with(GAMMA, crate::tuning::ParamValue::Real(0.3));
        let svm = Svm::fit(&x, &y, ModelMode::Classifier, &config).unwrap();
        assert!(svm.converged);
        assert_eq!(svm.rho, 0.0);
        let labels: Vec<f64> = y
            .iter()
            .map(|&t| if t > 0.5 { 1.0 } else { -1.0 })
            .collect();
        assert!(kkt_gap(&x, &labels, &svm, 2.0) <= KKT_TOLERANCE + 1e-12);
        for k in 0..base.len() {
            let (a, b) = (
                svm.decision_value(x.row(2 * k)),
                svm.decision_value(x.row(2 * k + 1)),
            );
            assert!((a + b).abs() < 1e-12);
        }

        // The unreduced solver reaches the same objective.
        let full = solve_classification(&x, &labels, 2.0, 0.3, 1e-9, 100_000);
        let objective = |alpha: &[f64]| {
            let mut v = -alpha.iter().sum::<f64>();
            for i in 0..alpha.len() {
                for j in 0..alpha.len() {
                    v += 0.5
                        * alpha[i]
                        * alpha[j]
                        * labels[i]
                        * labels[j]
                        * rbf(0.3, x.row(i), x.row(j));
                }
            }
            v
        };
        let mut reduced = vec![0.0; labels.len()];
        for (sv, &a) in svm.support_vectors.iter().zip(&svm.coef) {
            let i = (0..x.n_rows).find(|&i| x.row(i) == sv.as_slice()).unwrap();
            reduced[i] = a * labels[i];
        }
        assert!((objective(&reduced) - objective(&full.alpha)).abs() < 1e-3);
    }

    #[test]
    fn separable_pair() {
        let x = matrix(&[&[0], &[4]]);
        let s = solve_classification(&x, &[-1.0, 1.0], 10.0, 0.5, 1e-3, 1000);
        assert!(s.converged);
        let f = |v: f64| {
            -s.alpha[0] * rbf(0.5, &[0.0], &[v]) + s.alpha[1] * rbf(0.5, &[4.0], &[v]) - s.rho
        };
        assert!(f(0.0) < 0.0 && f(4.0) > 0.0);
        assert!((s.alpha[0] - s.alpha[1]).abs() < 1e-12);
    }

    #[test]
    fn regression_tube_swallows_flat_targets() {
        let x = matrix(&[&[0], &[1], &[2]]);
        let s = solve_regression(&x, &[0.5, 0.52, 0.48], 1.0, 1.0, 0.1, 1e-3, 1000);
        assert!(s.alpha.iter().all(|&a| a == 0.0));
        assert!((-s.rho - 0.5).abs() <= 0.1);
    }
}
