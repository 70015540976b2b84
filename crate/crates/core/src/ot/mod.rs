//! Exact one-dimensional Wasserstein computations, empirical CDFs, and an
//! exact low-n multidimensional W2 solver used for evaluation and testing.

mod assignment;
mod io;

pub use assignment::{evaluate_w2, exact_w2, exact_w2_capped, solve_assignment, DEFAULT_W2_CAP};

use crate::error::{Error, Result};

/// A one-dimensional empirical sample. Values are validated finite at
/// construction; NaN never enters the toolkit.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples1D {
    values: Vec<f64>,
    sorted: Vec<f64>,
}

impl Samples1D {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Samples1D"));
        }
        let mut sorted = values.clone();
        // stable ordering keeps subgradients at ties deterministic
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(Self { values, sorted })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Non-decreasing view of the sample.
    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// Permutation such that `values[perm[i]]` is the i-th order statistic.
    /// Stable in the original index on ties.
    pub fn sort_permutation(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        idx.sort_by(|&i, &j| {
            self.values[i]
                .partial_cmp(&self.values[j])
                .unwrap()
                .then(i.cmp(&j))
        });
        idx
    }
}

/// Right-continuous empirical CDF: (count of values <= query) / n.
pub fn empirical_cdf(x: &Samples1D, query: f64) -> f64 {
    let s = x.sorted();
    // partition_point gives the count of values <= query
    let count = s.partition_point(|&v| v <= query);
    count as f64 / s.len() as f64
}

/// Exact 1-Wasserstein between equal-size empirical samples by sorted pairing.
pub fn w1_1d(x: &Samples1D, y: &Samples1D) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::UnequalSampleCounts(x.len(), y.len()));
    }
    let n = x.len() as f64;
    Ok(x.sorted()
        .iter()
        .zip(y.sorted())
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / n)
}

/// Exact p-Wasserstein between equal-size empirical samples by quantile pairing.
pub fn wp_1d(x: &Samples1D, y: &Samples1D, p: f64) -> Result<f64> {
    if p < 1.0 {
        return Err(Error::NotAMetricOrder(p));
    }
    if x.len() != y.len() {
        return Err(Error::UnequalSampleCounts(x.len(), y.len()));
    }
    let n = x.len() as f64;
    let sum: f64 = x
        .sorted()
        .iter()
        .zip(y.sorted())
        .map(|(a, b)| (a - b).abs().powf(p))
        .sum();
    Ok((sum / n).powf(1.0 / p))
}

/// An n x d point set, stored row-major. The empirical measures of the
/// toolkit are always equal-weight clouds of this form.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    data: Vec<f64>,
    n: usize,
    d: usize,
}

impl PointCloud {
    pub fn new(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::EmptyDistribution);
        }
        if data.len() != n * d {
            return Err(Error::DimensionMismatch(data.len(), n * d));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("PointCloud"));
        }
        Ok(Self { data, n, d })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        let d = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * d);
        for r in rows {
            if r.len() != d {
                return Err(Error::DimensionMismatch(r.len(), d));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), d, data)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn iter_points(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    /// True when every coordinate lies in the unit cube.
    pub fn in_unit_cube(&self) -> bool {
        self.data.iter().all(|&v| (0.0..=1.0).contains(&v))
    }

    /// Projection onto the direction `theta` (not required to be unit length).
    pub fn project(&self, theta: &[f64]) -> Result<Samples1D> {
        if theta.len() != self.d {
            return Err(Error::DimensionMismatch(theta.len(), self.d));
        }
        let values = self
            .iter_points()
            .map(|p| p.iter().zip(theta).map(|(a, b)| a * b).sum())
            .collect();
        Samples1D::new(values)
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.d];
        for p in self.iter_points() {
            for (mi, &v) in m.iter_mut().zip(p) {
                *mi += v;
            }
        }
        for mi in &mut m {
            *mi /= self.n as f64;
        }
        m
    }

    /// Population covariance (1/n normalization), row-major d x d.
    pub fn covariance(&self) -> Vec<f64> {
        let mu = self.mean();
        let d = self.d;
        let mut cov = vec![0.0; d * d];
        for p in self.iter_points() {
            for i in 0..d {
                let ci = p[i] - mu[i];
                for j in 0..d {
                    cov[i * d + j] += ci * (p[j] - mu[j]);
                }
            }
        }
        for c in &mut cov {
            *c /= self.n as f64;
        }
        cov
    }

    /// Subsample `m` points uniformly with replacement, deterministic per seed.
    pub fn subsample(&self, m: usize, seed: u64) -> Result<PointCloud> {
        use rand::Rng;
        if m == 0 {
            return Err(Error::EmptyDistribution);
        }
        let mut rng = crate::rng::stream_rng(seed, SUBSAMPLE_STREAM);
        let mut data = Vec::with_capacity(m * self.d);
        for _ in 0..m {
            let i = rng.gen_range(0..self.n);
            data.extend_from_slice(self.point(i));
        }
        PointCloud::new(m, self.d, data)
    }

    pub fn translate(&self, t: &[f64]) -> Result<PointCloud> {
        if t.len() != self.d {
            return Err(Error::DimensionMismatch(t.len(), self.d));
        }
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(k, &v)| v + t[k % self.d])
            .collect();
        PointCloud::new(self.n, self.d, data)
    }

    pub fn scale(&self, c: f64) -> Result<PointCloud> {
        PointCloud::new(self.n, self.d, self.data.iter().map(|&v| c * v).collect())
    }
}

// stream index tag for subsampling draws
const SUBSAMPLE_STREAM: u64 = 0x5354_4245;
