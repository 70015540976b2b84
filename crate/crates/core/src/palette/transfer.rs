//! Direct pixel-space palette transfer: gradient descent on the sliced
//! loss over a full-resolution residual, with a fresh pixel subsample and
//! slice bank each iteration.

use rand::Rng;
use serde::Serialize;

use crate::diffgrad::{grad_moments, grad_sw1, LossGradReport};
use crate::error::{Error, Result};
use crate::guidance::LossMode;
use crate::ot::PointCloud;
use crate::palette::ImageBuffer;
use crate::rng::{derive_seed, stream_rng};
use crate::sliced::{sample_slices, SlicedConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PaletteTransferConfig {
    pub iterations: usize,
    /// Per-pixel step length; the subsampled-cloud gradient is rescaled by
    /// the sample size so this is resolution independent.
    pub step_size: f64,
    /// Pixels drawn (with replacement) from each image per iteration.
    pub sample_size: usize,
    /// Rotations per iteration under the rotation-triples scheme.
    pub slices: usize,
    pub loss_mode: LossMode,
    pub seed: u64,
}

impl Default for PaletteTransferConfig {
    fn default() -> Self {
        Self {
            iterations: 300,
            step_size: 0.02,
            sample_size: 4096,
            slices: 10,
            loss_mode: LossMode::SwOnly,
            seed: 0,
        }
    }
}

impl PaletteTransferConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sample_size < 2 {
            return Err(Error::Config("sample_size must be >= 2".into()));
        }
        if self.slices < 1 {
            return Err(Error::Config("slices must be >= 1".into()));
        }
        if !self.step_size.is_finite() || self.step_size < 0.0 {
            return Err(Error::Config("step_size must be finite and >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TransferTraceRow {
    pub iteration: usize,
    pub loss: f64,
    pub grad_norm: f64,
}

// stream tags for the per-iteration draws
const PIXEL_STREAM: u64 = 0x5049_0000_0000;
const SLICE_STREAM: u64 = 0x534c_0000_0000;

pub fn transfer_palette(
    content: &ImageBuffer,
    reference: &ImageBuffer,
    cfg: &PaletteTransferConfig,
) -> Result<ImageBuffer> {
    transfer_palette_traced(content, reference, cfg).map(|(img, _)| img)
}

/// Run the transfer and keep the per-iteration loss trace.
pub fn transfer_palette_traced(
    content: &ImageBuffer,
    reference: &ImageBuffer,
    cfg: &PaletteTransferConfig,
) -> Result<(ImageBuffer, Vec<TransferTraceRow>)> {
    cfg.validate()?;
    let total = content.pixel_count();
    let n = cfg.sample_size;
    let mut u = vec![0.0; total * 3];
    let mut trace = Vec::with_capacity(cfg.iterations);

    for it in 0..cfg.iterations {
        let mut pix_rng = stream_rng(cfg.seed, PIXEL_STREAM + it as u64);
        let idx: Vec<usize> = (0..n).map(|_| pix_rng.gen_range(0..total)).collect();
        let mut data = Vec::with_capacity(n * 3);
        for &i in &idx {
            let p = content.pixel(i);
            for c in 0..3 {
                data.push((p[c] + u[i * 3 + c]).clamp(0.0, 1.0));
            }
        }
        let current = PointCloud::new(n, 3, data)?;
        // the reference draws from the same stream; a self-transfer sees
        // identical index sequences, zero loss, and is an exact no-op
        let mut ref_rng = stream_rng(cfg.seed, PIXEL_STREAM + it as u64);
        let mut ref_data = Vec::with_capacity(n * 3);
        let ref_total = reference.pixel_count();
        for _ in 0..n {
            let i = ref_rng.gen_range(0..ref_total);
            ref_data.extend_from_slice(reference.pixel(i));
        }
        let target = PointCloud::new(n, 3, ref_data)?;

        let report = palette_loss(&current, &target, cfg, it)?;
        if !report.loss.is_finite() || report.grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteLoss { step: it, inner: 0 });
        }
        let grad_norm = report.grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        trace.push(TransferTraceRow {
            iteration: it,
            loss: report.loss,
            grad_norm,
        });

        // the cloud losses carry a 1/n factor; rescale by n so step_size is
        // a per-pixel displacement, then scatter back to the residual
        let step = cfg.step_size * n as f64;
        for (k, &i) in idx.iter().enumerate() {
            for c in 0..3 {
                let slot = &mut u[i * 3 + c];
                *slot -= step * report.grad[k * 3 + c];
                let base = content.pixel(i)[c];
                *slot = (base + *slot).clamp(0.0, 1.0) - base;
            }
        }
    }

    let out: Vec<f64> = content
        .data()
        .iter()
        .zip(&u)
        .map(|(b, r)| (b + r).clamp(0.0, 1.0))
        .collect();
    let img = ImageBuffer::new(content.width(), content.height(), out)?;
    Ok((img, trace))
}

fn palette_loss(
    current: &PointCloud,
    target: &PointCloud,
    cfg: &PaletteTransferConfig,
    it: usize,
) -> Result<LossGradReport> {
    let sw = || -> Result<LossGradReport> {
        let sc = SlicedConfig::sw(cfg.slices, derive_seed(cfg.seed, SLICE_STREAM + it as u64));
        let slices = sample_slices(&sc, 3)?;
        grad_sw1(current, target, &slices)
    };
    match cfg.loss_mode {
        LossMode::SwOnly => sw(),
        LossMode::MomentsOnly => grad_moments(current, target),
        LossMode::SwPlusMoments => {
            let m = grad_moments(current, target)?;
            Ok(sw()?.add(&m))
        }
    }
}
