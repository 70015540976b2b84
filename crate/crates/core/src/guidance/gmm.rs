//! Analytic Gaussian-mixture score model: a closed-form stand-in for a
//! denoising network. The score of the noised mixture is exact, so sampler
//! and guidance behavior can be tested against ground truth.

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ot::PointCloud;
use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Row-major d x d covariance.
    pub cov: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmScoreModel {
    pub dim: usize,
    pub components: Vec<GmmComponent>,
    /// Conditional mixtures keyed by label; stands in for text conditioning.
    #[serde(default)]
    pub conditional: BTreeMap<String, Vec<GmmComponent>>,
}

fn validate_components(d: usize, comps: &[GmmComponent]) -> Result<()> {
    if comps.is_empty() {
        return Err(Error::Config("mixture needs at least one component".into()));
    }
    let mut total = 0.0;
    for (k, c) in comps.iter().enumerate() {
        if c.weight <= 0.0 {
            return Err(Error::Config(format!("component {k}: weight must be positive")));
        }
        total += c.weight;
        if c.mean.len() != d || c.cov.len() != d * d {
            return Err(Error::DimensionMismatch(c.mean.len(), d));
        }
        for i in 0..d {
            for j in 0..d {
                if (c.cov[i * d + j] - c.cov[j * d + i]).abs() > 1e-9 {
                    return Err(Error::NotPositiveDefinite(k));
                }
            }
        }
        let m = DMatrix::from_row_slice(d, d, &c.cov);
        if Cholesky::new(m).is_none() {
            return Err(Error::NotPositiveDefinite(k));
        }
    }
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::Config(format!("weights sum to {total}, expected 1")));
    }
    Ok(())
}

impl GmmScoreModel {
    pub fn new(dim: usize, components: Vec<GmmComponent>) -> Result<Self> {
        validate_components(dim, &components)?;
        Ok(Self {
            dim,
            components,
            conditional: BTreeMap::new(),
        })
    }

    pub fn with_conditional(mut self, label: &str, components: Vec<GmmComponent>) -> Result<Self> {
        validate_components(self.dim, &components)?;
        self.conditional.insert(label.to_string(), components);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        validate_components(self.dim, &self.components)?;
        for comps in self.conditional.values() {
            validate_components(self.dim, comps)?;
        }
        Ok(())
    }

    /// Isotropic single Gaussian.
    pub fn isotropic(mean: Vec<f64>, var: f64) -> Result<Self> {
        let d = mean.len();
        let mut cov = vec![0.0; d * d];
        for i in 0..d {
            cov[i * d + i] = var;
        }
        Self::new(
            d,
            vec![GmmComponent {
                weight: 1.0,
                mean,
                cov,
            }],
        )
    }

    fn mixture(&self, label: Option<&str>) -> Result<&[GmmComponent]> {
        match label {
            None => Ok(&self.components),
            Some(l) => self
                .conditional
                .get(l)
                .map(|c| c.as_slice())
                .ok_or_else(|| Error::MissingConditional(l.to_string())),
        }
    }

    /// Score of the noised mixture at signal level alpha_bar: component k is
    /// noised to N(sqrt(ab) mu_k, ab * Sigma_k + (1 - ab) I).
    pub fn score(&self, x: &[f64], alpha_bar: f64, label: Option<&str>) -> Result<Vec<f64>> {
        Ok(self.score_and_hessian_impl(x, alpha_bar, label, false)?.0)
    }

    /// Score together with its Jacobian (the Hessian of log density),
    /// needed for vector-Jacobian products through the x0 prediction.
    pub fn score_and_hessian(
        &self,
        x: &[f64],
        alpha_bar: f64,
        label: Option<&str>,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let (s, h) = self.score_and_hessian_impl(x, alpha_bar, label, true)?;
        Ok((s, h.unwrap()))
    }

    #[allow(clippy::type_complexity)]
    fn score_and_hessian_impl(
        &self,
        x: &[f64],
        alpha_bar: f64,
        label: Option<&str>,
        want_hessian: bool,
    ) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
        let comps = self.mixture(label)?;
        let d = self.dim;
        if x.len() != d {
            return Err(Error::DimensionMismatch(x.len(), d));
        }
        let xv = DVector::from_row_slice(x);

        let mut log_terms = Vec::with_capacity(comps.len());
        let mut grads: Vec<DVector<f64>> = Vec::with_capacity(comps.len());
        let mut invs: Vec<DMatrix<f64>> = Vec::with_capacity(comps.len());
        for c in comps {
            let mut cov = DMatrix::from_row_slice(d, d, &c.cov) * alpha_bar;
            for i in 0..d {
                cov[(i, i)] += 1.0 - alpha_bar;
            }
            let chol = Cholesky::new(cov).ok_or(Error::NotPositiveDefinite(0))?;
            let mean = DVector::from_row_slice(&c.mean) * alpha_bar.sqrt();
            let diff = &xv - &mean;
            let solved = chol.solve(&diff);
            let qform = diff.dot(&solved);
            let logdet: f64 = chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
            log_terms.push(c.weight.ln() - 0.5 * (qform + logdet));
            grads.push(-solved);
            if want_hessian {
                invs.push(chol.inverse());
            }
        }

        // responsibilities via log-sum-exp
        let m = log_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = log_terms.iter().map(|l| (l - m).exp()).collect();
        let total: f64 = weights.iter().sum();
        let resp: Vec<f64> = weights.into_iter().map(|w| w / total).collect();

        let mut score = DVector::zeros(d);
        for (r, g) in resp.iter().zip(&grads) {
            score += g * *r;
        }

        let hessian = if want_hessian {
            // d score = sum_k r_k (g_k g_k^T - C_k^{-1}) - s s^T
            let mut h = DMatrix::zeros(d, d);
            for ((r, g), inv) in resp.iter().zip(&grads).zip(&invs) {
                h += (g * g.transpose() - inv) * *r;
            }
            h -= &score * score.transpose();
            Some(h.transpose().as_slice().to_vec()) // row-major
        } else {
            None
        };

        Ok((score.as_slice().to_vec(), hessian))
    }

    /// Direct ancestral sampling from the (clean) mixture.
    pub fn sample(&self, n: usize, seed: u64, label: Option<&str>) -> Result<PointCloud> {
        let comps = self.mixture(label)?;
        let d = self.dim;
        let mut rng = stream_rng(seed, 0x474d_4d53);
        let chols: Vec<Cholesky<f64, nalgebra::Dyn>> = comps
            .iter()
            .map(|c| Cholesky::new(DMatrix::from_row_slice(d, d, &c.cov)).unwrap())
            .collect();
        let mut data = Vec::with_capacity(n * d);
        for _ in 0..n {
            let mut u: f64 = rng.gen();
            let mut k = 0;
            for (i, c) in comps.iter().enumerate() {
                if u < c.weight {
                    k = i;
                    break;
                }
                u -= c.weight;
                k = i;
            }
            let z = DVector::from_iterator(d, (0..d).map(|_| rng.sample(StandardNormal)));
            let x = DVector::from_row_slice(&comps[k].mean) + chols[k].l() * z;
            data.extend(x.iter());
        }
        PointCloud::new(n, d, data)
    }
}
