//! Exact equal-weight W2 via the shortest-augmenting-path assignment
//! algorithm with dual potentials, O(n^3) on a dense cost matrix.

use crate::error::{Error, Result};
use crate::ot::PointCloud;

/// Largest cloud size accepted by [`exact_w2`].
pub const DEFAULT_W2_CAP: usize = 4096;

/// Minimum-cost perfect matching on a dense n x n cost matrix (row-major).
/// Returns the column assigned to each row.
pub fn solve_assignment(cost: &[f64], n: usize) -> Vec<usize> {
    assert_eq!(cost.len(), n * n);
    let inf = f64::INFINITY;
    // 1-based with a virtual column 0
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1]; // column -> assigned row (0 = free)
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            let row = &cost[(i0 - 1) * n..i0 * n];
            for j in 1..=n {
                if !used[j] {
                    let cur = row[j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        // augment along the alternating path
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        assignment[row_of[j] - 1] = j - 1;
    }
    assignment
}

fn squared_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Exact 2-Wasserstein distance between equal-size clouds: the optimal
/// bijection minimizing mean squared cost, then the square root.
pub fn exact_w2(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    exact_w2_capped(a, b, DEFAULT_W2_CAP)
}

pub fn exact_w2_capped(a: &PointCloud, b: &PointCloud, cap: usize) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::UnequalSampleCounts(a.len(), b.len()));
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    let n = a.len();
    if n > cap {
        return Err(Error::SizeCapExceeded { n, cap });
    }
    let mut cost = vec![0.0; n * n];
    for i in 0..n {
        let pi = a.point(i);
        for j in 0..n {
            cost[i * n + j] = squared_dist(pi, b.point(j));
        }
    }
    let assignment = solve_assignment(&cost, n);
    let total: f64 = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i * n + j])
        .sum();
    Ok((total / n as f64).sqrt())
}

/// Evaluation-protocol W2: subsample both clouds to `n` points (with
/// replacement, seeded) and solve the assignment exactly. Both clouds use
/// the same index stream, so identical clouds evaluate to exactly zero.
pub fn evaluate_w2(a: &PointCloud, b: &PointCloud, n: usize, seed: u64) -> Result<f64> {
    if n > DEFAULT_W2_CAP {
        return Err(Error::SizeCapExceeded {
            n,
            cap: DEFAULT_W2_CAP,
        });
    }
    let sa = a.subsample(n, crate::rng::derive_seed(seed, 0xa))?;
    let sb = b.subsample(n, crate::rng::derive_seed(seed, 0xa))?;
    exact_w2(&sa, &sb)
}
