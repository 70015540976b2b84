//! Hand-written reverse-mode gradients for every differentiable map in the
//! guidance loss chain, plus a finite-difference verifier. There is no
//! autodiff tape: the pipeline is a short static composition of named maps.

mod finitediff;
mod maps;

pub use finitediff::{finite_diff_check, GradCheckReport};
pub use maps::{AffineMap, IdentityMap, LinearMap, ScaleMap, ShiftMap, TanhMap};

use crate::error::{Error, Result};
use crate::ot::PointCloud;
use crate::sliced::SliceSet;

/// A pure map with a vector-Jacobian product. `vjp` returns the input
/// cotangent for a given input point and upstream cotangent.
pub trait DifferentiableMap {
    fn name(&self) -> &str;
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;
    fn forward(&self, x: &[f64]) -> Vec<f64>;
    fn vjp(&self, x: &[f64], cotangent: &[f64]) -> Vec<f64>;
}

/// Loss value, gradient w.r.t. the variable cloud (flat n x d), and the
/// per-term breakdown.
#[derive(Debug, Clone)]
pub struct LossGradReport {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub sw_term: f64,
    pub mean_term: f64,
    pub cov_term: f64,
}

impl LossGradReport {
    fn zero(n: usize, d: usize) -> Self {
        Self {
            loss: 0.0,
            grad: vec![0.0; n * d],
            sw_term: 0.0,
            mean_term: 0.0,
            cov_term: 0.0,
        }
    }

    pub fn add(mut self, other: &LossGradReport) -> Self {
        self.loss += other.loss;
        self.sw_term += other.sw_term;
        self.mean_term += other.mean_term;
        self.cov_term += other.cov_term;
        for (g, o) in self.grad.iter_mut().zip(&other.grad) {
            *g += o;
        }
        self
    }
}

fn check_pair(a: &PointCloud, b: &PointCloud) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::UnequalSampleCounts(a.len(), b.len()));
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    Ok(())
}

fn sign(x: f64) -> f64 {
    // sign(0) = 0 keeps the subgradient deterministic at kinks
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Per-slice weighted SW1 subgradient w.r.t. the variable cloud `a`; the
/// reference `b` is constant. Weights must sum to 1 (uniform weights give the
/// plain Monte Carlo SW1 estimate).
pub fn grad_weighted_sw1(
    a: &PointCloud,
    b: &PointCloud,
    slices: &SliceSet,
    weights: &[f64],
) -> Result<LossGradReport> {
    check_pair(a, b)?;
    if slices.dim() != a.dim() {
        return Err(Error::DimensionMismatch(slices.dim(), a.dim()));
    }
    if weights.len() != slices.len() {
        return Err(Error::DimensionMismatch(weights.len(), slices.len()));
    }
    let n = a.len();
    let d = a.dim();
    let mut report = LossGradReport::zero(n, d);

    for (theta, &wk) in slices.iter().zip(weights) {
        let pa = a.project(theta)?;
        let pb = b.project(theta)?;
        let perm_a = pa.sort_permutation();
        let sb = pb.sorted();
        let sa = pa.sorted();
        let mut slice_loss = 0.0;
        for i in 0..n {
            let diff = sa[i] - sb[i];
            slice_loss += diff.abs();
            let s = sign(diff) * wk / n as f64;
            if s != 0.0 {
                let row = &mut report.grad[perm_a[i] * d..(perm_a[i] + 1) * d];
                for (g, t) in row.iter_mut().zip(theta) {
                    *g += s * t;
                }
            }
        }
        report.loss += wk * slice_loss / n as f64;
    }
    report.sw_term = report.loss;
    Ok(report)
}

/// Monte Carlo SW1 value and its subgradient w.r.t. `a` (uniform slice
/// weights): for each slice, pair projections by rank and scatter
/// sign/(n*K_eff) back through the sort permutation.
pub fn grad_sw1(a: &PointCloud, b: &PointCloud, slices: &SliceSet) -> Result<LossGradReport> {
    let k = slices.len();
    let weights = vec![1.0 / k as f64; k];
    grad_weighted_sw1(a, b, slices, &weights)
}

/// GSW1 gradient for a nonlinear defining function: the sorted-pairing
/// subgradient in feature space, pulled back through the feature Jacobian.
pub fn grad_gsw1_poly3(
    a: &PointCloud,
    b: &PointCloud,
    feature_slices: &SliceSet,
) -> Result<LossGradReport> {
    use crate::sliced::{poly3_feature_dim, poly3_features, poly3_features_jacobian};
    check_pair(a, b)?;
    let d = a.dim();
    let fdim = poly3_feature_dim(d);
    if feature_slices.dim() != fdim {
        return Err(Error::DimensionMismatch(feature_slices.dim(), fdim));
    }
    let n = a.len();
    let k = feature_slices.len();
    let fa: Vec<Vec<f64>> = a.iter_points().map(poly3_features).collect();
    let fb: Vec<Vec<f64>> = b.iter_points().map(poly3_features).collect();
    let jacs: Vec<Vec<f64>> = a.iter_points().map(poly3_features_jacobian).collect();

    let mut report = LossGradReport::zero(n, d);
    for theta in feature_slices.iter() {
        let proj = |f: &Vec<f64>| -> f64 { f.iter().zip(theta).map(|(x, t)| x * t).sum() };
        let pa: Vec<f64> = fa.iter().map(proj).collect();
        let pb: Vec<f64> = fb.iter().map(proj).collect();
        let mut ia: Vec<usize> = (0..n).collect();
        ia.sort_by(|&i, &j| pa[i].partial_cmp(&pa[j]).unwrap().then(i.cmp(&j)));
        let mut sb: Vec<f64> = pb.clone();
        sb.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (rank, &i) in ia.iter().enumerate() {
            let diff = pa[i] - sb[rank];
            report.loss += diff.abs() / (n * k) as f64;
            let s = sign(diff) / (n * k) as f64;
            if s != 0.0 {
                // d g(x_i, theta)/dx = J_phi(x_i)^T theta
                let jac = &jacs[i];
                let row = &mut report.grad[i * d..(i + 1) * d];
                for m in 0..d {
                    let mut acc = 0.0;
                    for (r, t) in theta.iter().enumerate() {
                        acc += jac[r * d + m] * t;
                    }
                    row[m] += s * acc;
                }
            }
        }
    }
    report.sw_term = report.loss;
    Ok(report)
}

/// Gradient of the first-two-moments loss
/// ||mu_a - mu_b||^2 + ||Sigma_a - Sigma_b||_F^2 w.r.t. the points of `a`.
/// Covariances use the population (1/n) convention.
pub fn grad_moments(a: &PointCloud, b: &PointCloud) -> Result<LossGradReport> {
    check_pair(a, b)?;
    let n = a.len();
    let d = a.dim();
    if n < 2 {
        return Err(Error::Config("moments need n >= 2".into()));
    }
    let mu_a = a.mean();
    let mu_b = b.mean();
    let cov_a = a.covariance();
    let cov_b = b.covariance();

    let mean_term: f64 = mu_a
        .iter()
        .zip(&mu_b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    let diff_cov: Vec<f64> = cov_a.iter().zip(&cov_b).map(|(x, y)| x - y).collect();
    let cov_term: f64 = diff_cov.iter().map(|x| x * x).sum();

    let mut report = LossGradReport::zero(n, d);
    report.mean_term = mean_term;
    report.cov_term = cov_term;
    report.loss = mean_term + cov_term;

    let nf = n as f64;
    for (i, p) in a.iter_points().enumerate() {
        let row = &mut report.grad[i * d..(i + 1) * d];
        for m in 0..d {
            // mean term: d/dx ||mu_a - mu_b||^2 = 2 (mu_a - mu_b) / n
            let mut g = 2.0 * (mu_a[m] - mu_b[m]) / nf;
            // covariance term: 4/n * (Sigma_a - Sigma_b)(x - mu_a)
            let mut acc = 0.0;
            for j in 0..d {
                acc += diff_cov[m * d + j] * (p[j] - mu_a[j]);
            }
            g += 4.0 / nf * acc;
            row[m] = g;
        }
    }
    Ok(report)
}

/// Fold vector-Jacobian products right to left through an ordered chain,
/// checking shape compatibility and naming the offending stage on mismatch.
pub fn chain_vjp(
    maps: &[&dyn DifferentiableMap],
    input: &[f64],
    loss_grad: &[f64],
) -> Result<Vec<f64>> {
    // forward pass, recording each stage input
    let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(maps.len());
    let mut x = input.to_vec();
    for m in maps {
        if x.len() != m.in_dim() {
            return Err(Error::ShapeMismatch {
                stage: m.name().to_string(),
                expected: m.in_dim(),
                got: x.len(),
            });
        }
        inputs.push(x.clone());
        x = m.forward(&x);
    }
    if x.len() != loss_grad.len() {
        return Err(Error::ShapeMismatch {
            stage: "loss".to_string(),
            expected: x.len(),
            got: loss_grad.len(),
        });
    }
    // backward pass
    let mut cot = loss_grad.to_vec();
    for (m, xin) in maps.iter().zip(&inputs).rev() {
        cot = m.vjp(xin, &cot);
    }
    Ok(cot)
}

/// Forward evaluation of a chain (used by finite-difference checks).
pub fn chain_forward(maps: &[&dyn DifferentiableMap], input: &[f64]) -> Result<Vec<f64>> {
    let mut x = input.to_vec();
    for m in maps {
        if x.len() != m.in_dim() {
            return Err(Error::ShapeMismatch {
                stage: m.name().to_string(),
                expected: m.in_dim(),
                got: x.len(),
            });
        }
        x = m.forward(&x);
    }
    Ok(x)
}

/// Coordinates of `a` whose SW1 subgradient sits within `10 * eps` of a
/// sorting kink for some slice; finite differences are unreliable there.
pub fn sw1_tie_mask(a: &PointCloud, b: &PointCloud, slices: &SliceSet, eps: f64) -> Vec<bool> {
    let n = a.len();
    let d = a.dim();
    let mut mask = vec![false; n * d];
    let gap = 10.0 * eps;
    for theta in slices.iter() {
        let pa = a.project(theta).expect("projection");
        let pb = b.project(theta).expect("projection");
        let perm = pa.sort_permutation();
        let sa = pa.sorted();
        let sb = pb.sorted();
        for i in 0..n {
            let mut near = (sa[i] - sb[i]).abs() < gap;
            if i > 0 && sa[i] - sa[i - 1] < gap {
                near = true;
            }
            if i + 1 < n && sa[i + 1] - sa[i] < gap {
                near = true;
            }
            if near {
                for m in 0..d {
                    mask[perm[i] * d + m] = true;
                }
            }
        }
    }
    mask
}
