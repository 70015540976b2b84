//! Monte Carlo estimators for the sliced-Wasserstein family: plain SW,
//! Generalized SW, Distributional SW, and Energy-Based SW, with the
//! rotation-triple slicing scheme as default.

mod rotation;

pub use rotation::{haar_rotation, Rotation};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ot::PointCloud;
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum SliceScheme {
    #[serde(rename = "iid-sphere")]
    IidSphere,
    #[serde(rename = "rotation-triples")]
    #[default]
    RotationTriples,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SlicedVariant {
    #[default]
    Sw,
    Gsw,
    Dsw,
    Ebsw,
}

/// Defining function of the generalized Radon transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DefiningFunction {
    #[default]
    Linear,
    /// Odd polynomial of degree 3: projections of the monomial feature map
    /// (degree-1 and degree-3 monomials) onto the feature-space sphere.
    Poly3,
}

/// Monotone energy for the EBSW slicing distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EnergyFunction {
    #[default]
    Exp,
    /// f(x) = x + 1 (identity plus constant; positive on nonnegative inputs)
    Shift,
    /// f(x) = 1; reduces EBSW to the plain pooled SW estimate
    Const,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GswParams {
    pub defining_function: DefiningFunction,
}

impl Default for GswParams {
    fn default() -> Self {
        Self {
            defining_function: DefiningFunction::Linear,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DswParams {
    /// Candidate pool size L.
    pub pool: usize,
    pub iterations: usize,
    pub step_size: f64,
    pub diversity_weight: f64,
}

impl Default for DswParams {
    fn default() -> Self {
        Self {
            pool: 64,
            iterations: 50,
            step_size: 0.5,
            diversity_weight: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct EbswParams {
    pub energy: EnergyFunction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct VariantParams {
    #[serde(default)]
    pub gsw: GswParams,
    #[serde(default)]
    pub dsw: DswParams,
    #[serde(default)]
    pub ebsw: EbswParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlicedConfig {
    pub variant: SlicedVariant,
    pub p: f64,
    /// Rotations for the rotation-triples scheme, directions for iid.
    pub slices: usize,
    pub scheme: SliceScheme,
    pub seed: u64,
    #[serde(default)]
    pub params: VariantParams,
}

impl SlicedConfig {
    /// Paper-default configuration: plain SW, p = 1, K = 10 rotation triples.
    pub fn sw(slices: usize, seed: u64) -> Self {
        Self {
            variant: SlicedVariant::Sw,
            p: 1.0,
            slices,
            scheme: SliceScheme::RotationTriples,
            seed,
            params: VariantParams::default(),
        }
    }

    pub fn with_variant(mut self, variant: SlicedVariant) -> Self {
        self.variant = variant;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.slices < 1 {
            return Err(Error::Config("slices must be >= 1".into()));
        }
        if self.p < 1.0 {
            return Err(Error::NotAMetricOrder(self.p));
        }
        if self.variant == SlicedVariant::Dsw {
            if self.params.dsw.pool < 1 {
                return Err(Error::Config("dsw pool must be >= 1".into()));
            }
            if self.params.dsw.pool < self.slices {
                return Err(Error::Config(format!(
                    "dsw pool {} must be >= slices {}",
                    self.params.dsw.pool, self.slices
                )));
            }
        }
        Ok(())
    }
}

/// A bank of unit projection directions, K_eff x d row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceSet {
    directions: Vec<f64>,
    d: usize,
    pub scheme: SliceScheme,
    pub seed: u64,
}

impl SliceSet {
    pub fn from_directions(
        directions: Vec<f64>,
        d: usize,
        scheme: SliceScheme,
        seed: u64,
    ) -> Result<Self> {
        if d == 0 || directions.is_empty() || directions.len() % d != 0 {
            return Err(Error::Config("direction matrix shape".into()));
        }
        Ok(Self {
            directions,
            d,
            scheme,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.directions.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn direction(&self, k: usize) -> &[f64] {
        &self.directions[k * self.d..(k + 1) * self.d]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.directions.chunks_exact(self.d)
    }
}

pub fn uniform_direction<R: Rng>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Draw the projection directions for `cfg` in ambient dimension `d`.
///
/// The iid scheme draws `slices` uniform directions on the sphere; the
/// rotation-triples scheme draws `slices` Haar rotations and emits the d
/// columns of each, so K_eff = slices * d.
pub fn sample_slices(cfg: &SlicedConfig, d: usize) -> Result<SliceSet> {
    cfg.validate()?;
    if d < 1 {
        return Err(Error::Config("dimension must be >= 1".into()));
    }
    sample_slice_bank(cfg.scheme, cfg.slices, d, cfg.seed)
}

fn sample_slice_bank(scheme: SliceScheme, k: usize, d: usize, seed: u64) -> Result<SliceSet> {
    let mut directions = Vec::new();
    match scheme {
        SliceScheme::IidSphere => {
            for i in 0..k {
                // each slice gets its own stream, independent of draw order
                let mut rng = stream_rng(seed, i as u64);
                directions.extend(uniform_direction(d, &mut rng));
            }
        }
        SliceScheme::RotationTriples => {
            for i in 0..k {
                let mut rng = stream_rng(seed, i as u64);
                let rot = haar_rotation(d, &mut rng);
                for col in rot.columns() {
                    directions.extend_from_slice(col);
                }
            }
        }
    }
    SliceSet::from_directions(directions, d, scheme, seed)
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

/// W_p^p between the projections of two clouds onto one direction.
fn projected_wp_pow(a: &PointCloud, b: &PointCloud, theta: &[f64], p: f64) -> f64 {
    let mut xa: Vec<f64> = a
        .iter_points()
        .map(|pt| pt.iter().zip(theta).map(|(x, t)| x * t).sum())
        .collect();
    let mut xb: Vec<f64> = b
        .iter_points()
        .map(|pt| pt.iter().zip(theta).map(|(x, t)| x * t).sum())
        .collect();
    xa.sort_by(|x, y| x.partial_cmp(y).unwrap());
    xb.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let n = xa.len() as f64;
    if p == 1.0 {
        xa.iter().zip(&xb).map(|(x, y)| (x - y).abs()).sum::<f64>() / n
    } else {
        xa.iter()
            .zip(&xb)
            .map(|(x, y)| (x - y).abs().powf(p))
            .sum::<f64>()
            / n
    }
}

/// Per-slice W_p^p values for a fixed slice bank.
pub fn slice_values(a: &PointCloud, b: &PointCloud, slices: &SliceSet, p: f64) -> Result<Vec<f64>> {
    check_pair(a, b)?;
    if slices.dim() != a.dim() {
        return Err(Error::DimensionMismatch(slices.dim(), a.dim()));
    }
    Ok(slices
        .iter()
        .map(|theta| projected_wp_pow(a, b, theta, p))
        .collect())
}

/// Monte Carlo SW_p estimate on a fixed slice bank.
pub fn sw_distance_with_slices(
    a: &PointCloud,
    b: &PointCloud,
    p: f64,
    slices: &SliceSet,
) -> Result<f64> {
    if p < 1.0 {
        return Err(Error::NotAMetricOrder(p));
    }
    let vals = slice_values(a, b, slices, p)?;
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    Ok(mean.powf(1.0 / p))
}

pub fn sw_distance(a: &PointCloud, b: &PointCloud, cfg: &SlicedConfig) -> Result<f64> {
    let slices = sample_slices(cfg, a.dim())?;
    sw_distance_with_slices(a, b, cfg.p, &slices)
}

// ---- Generalized SW ----

/// Number of odd monomials of degree 1 and 3 in `d` variables.
pub fn poly3_feature_dim(d: usize) -> usize {
    // degree-1: d; degree-3 multisets: C(d+2, 3)
    d + d * (d + 1) * (d + 2) / 6
}

/// Monomial feature map for the degree-3 odd polynomial defining function.
pub fn poly3_features(x: &[f64]) -> Vec<f64> {
    let d = x.len();
    let mut f = Vec::with_capacity(poly3_feature_dim(d));
    f.extend_from_slice(x);
    for i in 0..d {
        for j in i..d {
            for k in j..d {
                f.push(x[i] * x[j] * x[k]);
            }
        }
    }
    f
}

/// Jacobian of [`poly3_features`], row-major F x d.
pub fn poly3_features_jacobian(x: &[f64]) -> Vec<f64> {
    let d = x.len();
    let fdim = poly3_feature_dim(d);
    let mut jac = vec![0.0; fdim * d];
    for i in 0..d {
        jac[i * d + i] = 1.0;
    }
    let mut row = d;
    for i in 0..d {
        for j in i..d {
            for k in j..d {
                // d(x_i x_j x_k)/dx_m via product rule over repeated indices
                jac[row * d + i] += x[j] * x[k];
                jac[row * d + j] += x[i] * x[k];
                jac[row * d + k] += x[i] * x[j];
                row += 1;
            }
        }
    }
    jac
}

pub fn defining_feature_dim(f: DefiningFunction, d: usize) -> usize {
    match f {
        DefiningFunction::Linear => d,
        DefiningFunction::Poly3 => poly3_feature_dim(d),
    }
}

fn feature_cloud(cloud: &PointCloud, f: DefiningFunction) -> Result<PointCloud> {
    match f {
        DefiningFunction::Linear => Ok(cloud.clone()),
        DefiningFunction::Poly3 => {
            let rows: Vec<Vec<f64>> = cloud.iter_points().map(poly3_features).collect();
            PointCloud::from_rows(&rows)
        }
    }
}

pub fn gsw_distance(a: &PointCloud, b: &PointCloud, cfg: &SlicedConfig) -> Result<f64> {
    check_pair(a, b)?;
    cfg.validate()?;
    let f = cfg.params.gsw.defining_function;
    let fa = feature_cloud(a, f)?;
    let fb = feature_cloud(b, f)?;
    let slices = sample_slice_bank(cfg.scheme, cfg.slices, fa.dim(), cfg.seed)?;
    sw_distance_with_slices(&fa, &fb, cfg.p, &slices)
}

// ---- Distributional SW ----

#[derive(Debug, Clone)]
pub struct DswOutcome {
    pub value: f64,
    /// Aggregate at the uniform-logits initialization, i.e. the pooled SW estimate.
    pub initial_value: f64,
    pub weights: Vec<f64>,
    pub pool: SliceSet,
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ex: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = ex.iter().sum();
    ex.into_iter().map(|e| e / s).collect()
}

/// Finite-pool surrogate of the sup-over-slicing-distributions objective:
/// softmax weights over a candidate pool, ascended on the weighted W_p^p
/// aggregate minus a pairwise-coherence diversity penalty.
pub fn dsw_distance_detailed(
    a: &PointCloud,
    b: &PointCloud,
    cfg: &SlicedConfig,
) -> Result<DswOutcome> {
    check_pair(a, b)?;
    cfg.validate()?;
    let prm = cfg.params.dsw;
    let pool = sample_slice_bank(SliceScheme::IidSphere, prm.pool, a.dim(), cfg.seed)?;
    let vals = slice_values(a, b, &pool, cfg.p)?;
    let l = vals.len();

    // pairwise |<theta_l, theta_m>| coherence, diagonal excluded
    let mut coh = vec![0.0; l * l];
    for i in 0..l {
        for j in (i + 1)..l {
            let c: f64 = pool
                .direction(i)
                .iter()
                .zip(pool.direction(j))
                .map(|(x, y)| x * y)
                .sum::<f64>()
                .abs();
            coh[i * l + j] = c;
            coh[j * l + i] = c;
        }
    }

    let objective = |w: &[f64]| -> f64 {
        let agg: f64 = w.iter().zip(&vals).map(|(wi, vi)| wi * vi).sum();
        let mut pen = 0.0;
        for i in 0..l {
            for j in 0..l {
                pen += w[i] * w[j] * coh[i * l + j];
            }
        }
        agg - prm.diversity_weight * pen
    };

    let mut logits = vec![0.0; l];
    let mut w = softmax(&logits);
    let initial_value = w
        .iter()
        .zip(&vals)
        .map(|(wi, vi)| wi * vi)
        .sum::<f64>()
        .powf(1.0 / cfg.p);
    let mut best_obj = objective(&w);
    let mut best_w = w.clone();

    for _ in 0..prm.iterations {
        // gradient of the penalized objective through the softmax
        let mut gw = vec![0.0; l];
        for i in 0..l {
            let mut pen_i = 0.0;
            for j in 0..l {
                pen_i += w[j] * coh[i * l + j];
            }
            gw[i] = vals[i] - 2.0 * prm.diversity_weight * pen_i;
        }
        let inner: f64 = w.iter().zip(&gw).map(|(wi, gi)| wi * gi).sum();
        for i in 0..l {
            logits[i] += prm.step_size * w[i] * (gw[i] - inner);
        }
        w = softmax(&logits);
        let obj = objective(&w);
        if obj > best_obj {
            best_obj = obj;
            best_w = w.clone();
        }
    }

    let value = best_w
        .iter()
        .zip(&vals)
        .map(|(wi, vi)| wi * vi)
        .sum::<f64>()
        .powf(1.0 / cfg.p);
    Ok(DswOutcome {
        value,
        initial_value,
        weights: best_w,
        pool,
    })
}

pub fn dsw_distance(a: &PointCloud, b: &PointCloud, cfg: &SlicedConfig) -> Result<f64> {
    Ok(dsw_distance_detailed(a, b, cfg)?.value)
}

// ---- Energy-Based SW ----

/// Self-normalized importance-sampling EBSW estimate on a fixed slice bank
/// drawn from the uniform proposal.
pub fn ebsw_distance_with_slices(
    a: &PointCloud,
    b: &PointCloud,
    p: f64,
    energy: EnergyFunction,
    slices: &SliceSet,
) -> Result<f64> {
    if p < 1.0 {
        return Err(Error::NotAMetricOrder(p));
    }
    let vals = slice_values(a, b, slices, p)?;
    if energy == EnergyFunction::Const {
        // bit-identical to the plain pooled estimate
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        return Ok(mean.powf(1.0 / p));
    }
    let weights: Vec<f64> = match energy {
        EnergyFunction::Exp => {
            // subtract the max before exponentiation to avoid overflow
            let m = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            vals.iter().map(|v| (v - m).exp()).collect()
        }
        EnergyFunction::Shift => vals.iter().map(|v| v + 1.0).collect(),
        EnergyFunction::Const => vec![1.0; vals.len()],
    };
    let total: f64 = weights.iter().sum();
    let est: f64 = weights
        .iter()
        .zip(&vals)
        .map(|(w, v)| w / total * v)
        .sum();
    Ok(est.powf(1.0 / p))
}

pub fn ebsw_distance(a: &PointCloud, b: &PointCloud, cfg: &SlicedConfig) -> Result<f64> {
    let slices = sample_slices(cfg, a.dim())?;
    ebsw_distance_with_slices(a, b, cfg.p, cfg.params.ebsw.energy, &slices)
}

/// Normalized EBSW slice weights on a fixed bank; used when guidance needs
/// the (detached) importance weights.
pub fn ebsw_weights(vals: &[f64], energy: EnergyFunction) -> Vec<f64> {
    let raw: Vec<f64> = match energy {
        EnergyFunction::Exp => {
            let m = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            vals.iter().map(|v| (v - m).exp()).collect()
        }
        EnergyFunction::Shift => vals.iter().map(|v| v + 1.0).collect(),
        EnergyFunction::Const => vec![1.0; vals.len()],
    };
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Dispatch on the configured variant.
pub fn sliced_distance(a: &PointCloud, b: &PointCloud, cfg: &SlicedConfig) -> Result<f64> {
    match cfg.variant {
        SlicedVariant::Sw => sw_distance(a, b, cfg),
        SlicedVariant::Gsw => gsw_distance(a, b, cfg),
        SlicedVariant::Dsw => dsw_distance(a, b, cfg),
        SlicedVariant::Ebsw => ebsw_distance(a, b, cfg),
    }
}
