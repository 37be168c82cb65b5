//! Datasets and their partition across devices.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Binomial, Distribution, Exp1};

use crate::error::{domain, Result};
use crate::rng;

/// Feature matrix `X` (M x N, one column per example) plus labels.
///
/// Columns are stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    m: usize,
    n: usize,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Dataset {
    /// `columns` holds `n` columns of length `m` back to back.
    pub fn new(m: usize, columns: Vec<f64>, labels: Vec<f64>) -> Result<Self> {
        let n = labels.len();
        if m == 0 || n == 0 {
            return Err(domain("dataset needs at least one feature and one example"));
        }
        if columns.len() != m * n {
            return Err(domain(format!(
                "expected {} feature values for {m} x {n}, got {}",
                m * n,
                columns.len()
            )));
        }
        if let Some(i) = columns.iter().position(|v| !v.is_finite()) {
            return Err(domain(format!("non-finite feature in example {}", i / m)));
        }
        if let Some(i) = labels.iter().position(|v| !v.is_finite()) {
            return Err(domain(format!("non-finite label in example {i}")));
        }
        Ok(Self {
            m,
            n,
            x: columns,
            y: labels,
        })
    }

    /// Builds a dataset from per-example feature rows.
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<f64>) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != m) {
            return Err(domain(format!(
                "example {i} has {} features, expected {m}",
                rows[i].len()
            )));
        }
        Self::new(m, rows.concat(), labels)
    }

    /// Number of features.
    pub fn features(&self) -> usize {
        self.m
    }

    /// Number of examples.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.x[i * self.m..(i + 1) * self.m]
    }

    pub fn label(&self, i: usize) -> f64 {
        self.y[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.y
    }

    /// Scales every nonzero column to unit Euclidean norm.
    pub fn normalize_columns(&mut self) {
        for col in self.x.chunks_mut(self.m) {
            let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                col.iter_mut().for_each(|v| *v /= norm);
            }
        }
    }

    /// Applies `ln(1 + v)` to every feature (features must be > -1).
    pub fn log1p_features(&mut self) -> Result<()> {
        if self.x.iter().any(|&v| v <= -1.0) {
            return Err(domain("log1p scaling needs every feature > -1"));
        }
        self.x.iter_mut().for_each(|v| *v = v.ln_1p());
        Ok(())
    }

    /// `X alpha`.
    pub fn times(&self, alpha: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for (i, &a) in alpha.iter().enumerate() {
            if a != 0.0 {
                axpy(a, self.column(i), &mut out);
            }
        }
        out
    }

    /// Training accuracy of the linear classifier `sign(x^T w)`. Ties count
    /// as errors.
    pub fn accuracy(&self, w: &[f64]) -> f64 {
        let hits = (0..self.n)
            .filter(|&i| dot(self.column(i), w) * self.y[i] > 0.0)
            .count();
        hits as f64 / self.n as f64
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

/// How examples are split across devices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PartitionMode {
    /// Sizes differ by at most one.
    #[default]
    Uniform,
    /// Sizes drawn from a multinomial with uniformly random proportions.
    Random,
}

/// Disjoint index blocks covering `0..N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    /// Checks that `blocks` is a partition of `0..n`.
    pub fn new(blocks: Vec<Vec<usize>>, n: usize) -> Result<Self> {
        if blocks.is_empty() {
            return Err(domain("partition needs at least one block"));
        }
        let mut seen = vec![false; n];
        for &i in blocks.iter().flatten() {
            if i >= n {
                return Err(domain(format!("index {i} out of range for {n} examples")));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(domain(format!("example {i} assigned twice")));
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(domain(format!("example {i} not assigned")));
        }
        Ok(Self { blocks })
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn k(&self) -> usize {
        self.blocks.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }
}

/// Block sizes for `n` examples over `k` devices.
pub fn partition_sizes(n: usize, k: usize, mode: PartitionMode, seed: u64) -> Result<Vec<usize>> {
    if k == 0 || n == 0 {
        return Err(domain("partition needs N >= 1 and K >= 1"));
    }
    Ok(match mode {
        PartitionMode::Uniform => (0..k).map(|i| n / k + usize::from(i < n % k)).collect(),
        PartitionMode::Random => {
            let mut rng = rng::stream(seed, rng::substream(k as u64, 1));
            let weights: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
            let mut mass: f64 = weights.iter().sum();
            let mut left = n as u64;
            let mut sizes = Vec::with_capacity(k);
            for (i, w) in weights.iter().enumerate() {
                let take = if i + 1 == k || mass <= 0.0 {
                    left
                } else {
                    let p = (w / mass).clamp(0.0, 1.0);
                    Binomial::new(left, p)
                        .map_err(|e| domain(e.to_string()))?
                        .sample(&mut rng)
                };
                sizes.push(take as usize);
                left -= take;
                mass -= w;
            }
            sizes
        }
    })
}

/// Splits `0..n` into `k` blocks after a seeded shuffle. Uniform mode with
/// `k > n` leaves some blocks empty.
pub fn partition_dataset(n: usize, k: usize, mode: PartitionMode, seed: u64) -> Result<Partition> {
    let sizes = partition_sizes(n, k, mode, seed)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, rng::substream(k as u64, 2)));
    let mut blocks = Vec::with_capacity(k);
    let mut start = 0;
    for s in sizes {
        let mut b = order[start..start + s].to_vec();
        b.sort_unstable();
        blocks.push(b);
        start += s;
    }
    Partition::new(blocks, n)
}
