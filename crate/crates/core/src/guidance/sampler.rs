//! The guided sampling loop: per timestep, optimize an additive control
//! vector u over M inner steps against a sliced-Wasserstein loss between the
//! decoded x0 prediction and a reference cloud, then take the DDIM step.

use serde::{Deserialize, Serialize};

use super::{Decoder, DdimSchedule, GmmScoreModel};
use crate::diffgrad::{
    chain_vjp, grad_gsw1_poly3, grad_moments, grad_sw1, grad_weighted_sw1, DifferentiableMap,
    LossGradReport,
};
use crate::error::{Error, Result};
use crate::ot::PointCloud;
use crate::rng::{derive_seed, stream_rng};
use crate::sliced::{
    dsw_distance_detailed, ebsw_weights, poly3_feature_dim, sample_slices, slice_values,
    SliceScheme, SlicedConfig, SlicedVariant,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LossMode {
    #[default]
    SwOnly,
    MomentsOnly,
    SwPlusMoments,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidanceConfig {
    /// K slices (rotations under the rotation-triples scheme).
    pub slices: usize,
    /// M inner optimization steps per timestep.
    pub inner_steps: usize,
    /// Learning rate lambda_lr for the control-vector update.
    pub lr: f64,
    /// Divide the gradient by its standard deviation before the update.
    pub normalize_grad: bool,
    /// Classifier-free guidance scale gamma.
    pub cfg_scale: f64,
    pub loss_mode: LossMode,
    pub variant: SlicedVariant,
    pub seed: u64,
    #[serde(default)]
    pub label: Option<String>,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        Self {
            slices: 10,
            inner_steps: 10,
            lr: 0.04,
            normalize_grad: true,
            cfg_scale: 1.0,
            loss_mode: LossMode::SwOnly,
            variant: SlicedVariant::Sw,
            seed: 0,
            label: None,
        }
    }
}

impl GuidanceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.slices < 1 {
            return Err(Error::Config("slices must be >= 1".into()));
        }
        if self.lr < 0.0 {
            return Err(Error::Config("learning rate must be >= 0".into()));
        }
        if self.cfg_scale < 0.0 {
            return Err(Error::Config("cfg scale must be >= 0".into()));
        }
        Ok(())
    }
}

/// Per inner-iteration record; `loss_after` re-evaluates on the same slice
/// set after the update, so descent can be measured without resampling noise.
#[derive(Debug, Clone, Serialize)]
pub struct TraceRow {
    pub step: usize,
    pub inner_iter: usize,
    pub loss: f64,
    pub grad_norm: f64,
    pub u_norm: f64,
    pub loss_after: f64,
}

#[derive(Debug, Clone)]
pub struct GuidedRun {
    /// Decoded final batch, pooled into one cloud.
    pub generated: PointCloud,
    /// Final clean latents before decoding.
    pub latents: PointCloud,
    pub trace: Vec<TraceRow>,
}

pub fn trace_to_csv(trace: &[TraceRow], path: &std::path::Path) -> Result<()> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "step,inner_iter,loss,grad_norm,u_norm")?;
    for r in trace {
        writeln!(
            f,
            "{},{},{},{},{}",
            r.step, r.inner_iter, r.loss, r.grad_norm, r.u_norm
        )?;
    }
    Ok(())
}

fn effective_score(
    model: &GmmScoreModel,
    x: &[f64],
    alpha_bar: f64,
    gamma: f64,
    label: Option<&str>,
) -> Result<Vec<f64>> {
    match label {
        None => model.score(x, alpha_bar, None),
        Some(l) => {
            let su = model.score(x, alpha_bar, None)?;
            let sc = model.score(x, alpha_bar, Some(l))?;
            Ok(su
                .iter()
                .zip(&sc)
                .map(|(u, c)| u + gamma * (c - u))
                .collect())
        }
    }
}

fn effective_score_hessian(
    model: &GmmScoreModel,
    x: &[f64],
    alpha_bar: f64,
    gamma: f64,
    label: Option<&str>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    match label {
        None => model.score_and_hessian(x, alpha_bar, None),
        Some(l) => {
            let (su, hu) = model.score_and_hessian(x, alpha_bar, None)?;
            let (sc, hc) = model.score_and_hessian(x, alpha_bar, Some(l))?;
            let s = su
                .iter()
                .zip(&sc)
                .map(|(u, c)| u + gamma * (c - u))
                .collect();
            let h = hu
                .iter()
                .zip(&hc)
                .map(|(u, c)| u + gamma * (c - u))
                .collect();
            Ok((s, h))
        }
    }
}

/// Posterior-mean prediction of the clean sample from a noisy latent:
/// x0_hat = (x_t + (1 - ab) * score(x_t, t)) / sqrt(ab).
pub fn predict_x0(
    model: &GmmScoreModel,
    schedule: &DdimSchedule,
    x_t: &[f64],
    t: usize,
) -> Result<Vec<f64>> {
    let ab = schedule.alpha_bar(t)?;
    let s = model.score(x_t, ab, None)?;
    Ok(x_t
        .iter()
        .zip(&s)
        .map(|(x, si)| (x + (1.0 - ab) * si) / ab.sqrt())
        .collect())
}

fn predict_x0_effective(
    model: &GmmScoreModel,
    x_t: &[f64],
    ab: f64,
    gamma: f64,
    label: Option<&str>,
) -> Result<Vec<f64>> {
    let s = effective_score(model, x_t, ab, gamma, label)?;
    Ok(x_t
        .iter()
        .zip(&s)
        .map(|(x, si)| (x + (1.0 - ab) * si) / ab.sqrt())
        .collect())
}

/// One deterministic (eta = 0) DDIM denoising step with classifier-free
/// guidance: eps_hat = eps_uncond + gamma (eps_cond - eps_uncond), then
/// x_prev = sqrt(ab_prev) x0_hat + sqrt(1 - ab_prev) eps_hat.
pub fn ddim_step(
    model: &GmmScoreModel,
    schedule: &DdimSchedule,
    x_t: &[f64],
    t: usize,
    t_prev: usize,
    gamma: f64,
    label: Option<&str>,
) -> Result<Vec<f64>> {
    if t_prev >= t {
        return Err(Error::Config(format!("t_prev {t_prev} must be < t {t}")));
    }
    let ab = schedule.alpha_bar(t)?;
    let ab_prev = schedule.alpha_bar(t_prev)?;
    let s = effective_score(model, x_t, ab, gamma, label)?;
    let x0: Vec<f64> = x_t
        .iter()
        .zip(&s)
        .map(|(x, si)| (x + (1.0 - ab) * si) / ab.sqrt())
        .collect();
    // eps_hat = -sqrt(1 - ab) * score
    let eps: Vec<f64> = s.iter().map(|si| -(1.0 - ab).sqrt() * si).collect();
    Ok(x0
        .iter()
        .zip(&eps)
        .map(|(x0i, ei)| ab_prev.sqrt() * x0i + (1.0 - ab_prev).sqrt() * ei)
        .collect())
}

/// x0-prediction as a differentiable map; the vjp uses the analytic Hessian
/// of the noised log density.
pub struct PredictX0Map {
    pub model: GmmScoreModel,
    pub alpha_bar: f64,
    pub gamma: f64,
    pub label: Option<String>,
}

impl DifferentiableMap for PredictX0Map {
    fn name(&self) -> &str {
        "predict-x0"
    }
    fn in_dim(&self) -> usize {
        self.model.dim
    }
    fn out_dim(&self) -> usize {
        self.model.dim
    }
    fn forward(&self, x: &[f64]) -> Vec<f64> {
        predict_x0_effective(
            &self.model,
            x,
            self.alpha_bar,
            self.gamma,
            self.label.as_deref(),
        )
        .expect("forward on validated model")
    }
    fn vjp(&self, x: &[f64], cotangent: &[f64]) -> Vec<f64> {
        let d = self.model.dim;
        let (_, h) = effective_score_hessian(
            &self.model,
            x,
            self.alpha_bar,
            self.gamma,
            self.label.as_deref(),
        )
        .expect("hessian on validated model");
        // J = (I + (1 - ab) H) / sqrt(ab), symmetric
        let ab = self.alpha_bar;
        let mut out = vec![0.0; d];
        for i in 0..d {
            let mut acc = cotangent[i];
            for j in 0..d {
                acc += (1.0 - ab) * h[j * d + i] * cotangent[j];
            }
            out[i] = acc / ab.sqrt();
        }
        out
    }
}

/// Loss and gradient of the configured loss mode between the decoded batch
/// cloud and the reference, with the variant's slice weighting detached.
fn loss_and_grad(
    decoded: &PointCloud,
    reference: &PointCloud,
    cfg: &GuidanceConfig,
    slice_seed: u64,
) -> Result<LossGradReport> {
    // equal-size clouds are required by the pairing losses; resample the
    // reference down (or up) to the batch size, deterministically per step
    let resampled;
    let reference = if reference.len() == decoded.len() {
        reference
    } else {
        resampled = reference.subsample(decoded.len(), derive_seed(slice_seed, 0x5245_46))?;
        &resampled
    };
    let sw_part = |seed: u64| -> Result<LossGradReport> {
        let scfg = SlicedConfig {
            variant: cfg.variant,
            p: 1.0,
            slices: cfg.slices,
            scheme: SliceScheme::RotationTriples,
            seed,
            params: Default::default(),
        };
        match cfg.variant {
            SlicedVariant::Sw => {
                let slices = sample_slices(&scfg, decoded.dim())?;
                grad_sw1(decoded, reference, &slices)
            }
            SlicedVariant::Ebsw => {
                let slices = sample_slices(&scfg, decoded.dim())?;
                let vals = slice_values(decoded, reference, &slices, 1.0)?;
                let weights = ebsw_weights(&vals, Default::default());
                grad_weighted_sw1(decoded, reference, &slices, &weights)
            }
            SlicedVariant::Gsw => {
                let fcfg = SlicedConfig {
                    scheme: SliceScheme::IidSphere,
                    ..scfg
                };
                let slices = sample_slices(&fcfg, poly3_feature_dim(decoded.dim()))?;
                grad_gsw1_poly3(decoded, reference, &slices)
            }
            SlicedVariant::Dsw => {
                let out = dsw_distance_detailed(decoded, reference, &scfg)?;
                grad_weighted_sw1(decoded, reference, &out.pool, &out.weights)
            }
        }
    };
    match cfg.loss_mode {
        LossMode::SwOnly => sw_part(slice_seed),
        LossMode::MomentsOnly => grad_moments(decoded, reference),
        LossMode::SwPlusMoments => {
            let sw = sw_part(slice_seed)?;
            let mo = grad_moments(decoded, reference)?;
            Ok(sw.add(&mo))
        }
    }
}

const INIT_STREAM: u64 = 0x494e_4954;
const SLICE_STREAM_BASE: u64 = 0x534c_0000_0000;

fn std_all(g: &[f64]) -> f64 {
    let n = g.len() as f64;
    let mean = g.iter().sum::<f64>() / n;
    let var = g.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    var.sqrt()
}

/// Run the guided sampler: per inference step, optimize the control vector u
/// over `inner_steps` iterations of the configured loss, then denoise.
/// `reference` lives in decoder output space.
pub fn guided_sample(
    model: &GmmScoreModel,
    schedule: &DdimSchedule,
    decoder: &Decoder,
    reference: &PointCloud,
    cfg: &GuidanceConfig,
    batch: usize,
) -> Result<GuidedRun> {
    sample_impl(model, schedule, decoder, Some(reference), cfg, batch)
}

/// Plain DDIM rollout with the same seeding; bit-identical to
/// [`guided_sample`] with lr = 0 or inner_steps = 0.
pub fn unguided_sample(
    model: &GmmScoreModel,
    schedule: &DdimSchedule,
    decoder: &Decoder,
    cfg: &GuidanceConfig,
    batch: usize,
) -> Result<GuidedRun> {
    sample_impl(model, schedule, decoder, None, cfg, batch)
}

fn sample_impl(
    model: &GmmScoreModel,
    schedule: &DdimSchedule,
    decoder: &Decoder,
    reference: Option<&PointCloud>,
    cfg: &GuidanceConfig,
    batch: usize,
) -> Result<GuidedRun> {
    cfg.validate()?;
    model.validate()?;
    if batch < 1 {
        return Err(Error::Config("batch must be >= 1".into()));
    }
    let d = model.dim;
    if let Some(r) = reference {
        if r.dim() != d {
            return Err(Error::DimensionMismatch(r.dim(), d));
        }
    }
    let label = cfg.label.as_deref();
    if let Some(l) = label {
        if !model.conditional.contains_key(l) {
            return Err(Error::MissingConditional(l.to_string()));
        }
    }

    // initial latents x_T ~ N(0, I)
    let mut rng = stream_rng(cfg.seed, INIT_STREAM);
    let mut latents: Vec<Vec<f64>> = (0..batch)
        .map(|_| {
            (0..d)
                .map(|_| rand::Rng::sample::<f64, _>(&mut rng, rand_distr::StandardNormal))
                .collect()
        })
        .collect();

    let steps = schedule.inference_steps().to_vec();
    let mut trace = Vec::new();
    let decoder_maps = decoder.maps();

    for (k, &t) in steps.iter().enumerate() {
        let ab = schedule.alpha_bar(t)?;
        let mut u = vec![0.0; batch * d];

        if let Some(reference) = reference {
            let x0_map = PredictX0Map {
                model: model.clone(),
                alpha_bar: ab,
                gamma: cfg.cfg_scale,
                label: cfg.label.clone(),
            };
            let mut maps: Vec<&dyn DifferentiableMap> = vec![&x0_map];
            for m in &decoder_maps {
                maps.push(m.as_ref());
            }

            let decode_batch = |u: &[f64], latents: &[Vec<f64>]| -> Result<PointCloud> {
                let mut data = Vec::with_capacity(batch * d);
                for (i, x) in latents.iter().enumerate() {
                    let shifted: Vec<f64> =
                        x.iter().zip(&u[i * d..(i + 1) * d]).map(|(a, b)| a + b).collect();
                    let x0 = predict_x0_effective(model, &shifted, ab, cfg.cfg_scale, label)?;
                    data.extend(decoder.decode(&x0));
                }
                PointCloud::new(batch, d, data)
            };

            for j in 0..cfg.inner_steps {
                let slice_seed =
                    derive_seed(cfg.seed, SLICE_STREAM_BASE + (t as u64) * 1024 + j as u64);
                let decoded = decode_batch(&u, &latents)?;
                let report = loss_and_grad(&decoded, reference, cfg, slice_seed)?;
                if !report.loss.is_finite() {
                    return Err(Error::NonFiniteLoss { step: t, inner: j });
                }

                // pull the per-point loss gradient back to u, trajectory by trajectory
                let mut g = vec![0.0; batch * d];
                for i in 0..batch {
                    let shifted: Vec<f64> = latents[i]
                        .iter()
                        .zip(&u[i * d..(i + 1) * d])
                        .map(|(a, b)| a + b)
                        .collect();
                    let cot = &report.grad[i * d..(i + 1) * d];
                    let gu = chain_vjp(&maps, &shifted, cot)?;
                    g[i * d..(i + 1) * d].copy_from_slice(&gu);
                }
                if g.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteLoss { step: t, inner: j });
                }

                let grad_norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                if cfg.normalize_grad {
                    let s = std_all(&g);
                    if s > 0.0 {
                        for v in &mut g {
                            *v /= s;
                        }
                    } else {
                        // zero-spread gradient: skip the update
                        trace.push(TraceRow {
                            step: t,
                            inner_iter: j,
                            loss: report.loss,
                            grad_norm,
                            u_norm: u.iter().map(|v| v * v).sum::<f64>().sqrt(),
                            loss_after: report.loss,
                        });
                        continue;
                    }
                }
                for (ui, gi) in u.iter_mut().zip(&g) {
                    *ui -= cfg.lr * gi;
                }
                let u_norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
                let decoded_after = decode_batch(&u, &latents)?;
                let loss_after =
                    loss_and_grad(&decoded_after, reference, cfg, slice_seed)?.loss;
                trace.push(TraceRow {
                    step: t,
                    inner_iter: j,
                    loss: report.loss,
                    grad_norm,
                    u_norm,
                    loss_after,
                });
            }
        }

        // x* = x + u, then the DDIM transition
        for (i, x) in latents.iter_mut().enumerate() {
            for (m, xm) in x.iter_mut().enumerate() {
                *xm += u[i * d + m];
            }
        }
        if k + 1 < steps.len() {
            let t_prev = steps[k + 1];
            for x in latents.iter_mut() {
                *x = ddim_step(model, schedule, x, t, t_prev, cfg.cfg_scale, label)?;
            }
        } else {
            // final step: the clean prediction is the sample
            for x in latents.iter_mut() {
                *x = predict_x0_effective(model, x, ab, cfg.cfg_scale, label)?;
            }
        }
    }

    let mut latent_data = Vec::with_capacity(batch * d);
    let mut decoded_data = Vec::with_capacity(batch * d);
    for x in &latents {
        latent_data.extend_from_slice(x);
        decoded_data.extend(decoder.decode(x));
    }
    Ok(GuidedRun {
        generated: PointCloud::new(batch, d, decoded_data)?,
        latents: PointCloud::new(batch, d, latent_data)?,
        trace,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub lr: f64,
    pub w2: f64,
    pub mean_err: f64,
    pub cov_err: f64,
}

/// Run [`guided_sample`] for each learning rate with common seeds and report
/// the metric curve.
pub fn lr_sweep(
    model: &GmmScoreModel,
    schedule: &DdimSchedule,
    decoder: &Decoder,
    reference: &PointCloud,
    cfg: &GuidanceConfig,
    lr_grid: &[f64],
    batch: usize,
) -> Result<Vec<SweepRow>> {
    if lr_grid.is_empty() {
        return Err(Error::Config("empty learning-rate grid".into()));
    }
    for w in lr_grid.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Config("learning-rate grid must be ascending".into()));
        }
    }
    if lr_grid[0] < 0.0 {
        return Err(Error::Config("learning rates must be >= 0".into()));
    }
    let mut rows = Vec::with_capacity(lr_grid.len());
    for &lr in lr_grid {
        let run_cfg = GuidanceConfig {
            lr,
            ..cfg.clone()
        };
        let run = guided_sample(model, schedule, decoder, reference, &run_cfg, batch)?;
        rows.push(metric_row(lr, &run.generated, reference, cfg.seed)?);
    }
    Ok(rows)
}

fn metric_row(lr: f64, generated: &PointCloud, reference: &PointCloud, seed: u64) -> Result<SweepRow> {
    let n = generated.len().min(reference.len()).min(2048);
    let w2 = crate::ot::evaluate_w2(generated, reference, n, seed)?;
    let mg = generated.mean();
    let mr = reference.mean();
    let mean_err = mg
        .iter()
        .zip(&mr)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let cg = generated.covariance();
    let cr = reference.covariance();
    let cov_err = cg
        .iter()
        .zip(&cr)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(SweepRow {
        lr,
        w2,
        mean_err,
        cov_err,
    })
}
