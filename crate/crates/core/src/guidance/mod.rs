//! Desk-scale guided diffusion: a deterministic DDIM sampler over an
//! analytic Gaussian-mixture score, with the sliced-Wasserstein guidance
//! inner loop (control vector u, M steps, K slices, gradient normalization,
//! classifier-free guidance).

mod decoder;
mod gmm;
mod sampler;
mod schedule;

pub use decoder::{Decoder, DecoderKind};
pub use gmm::{GmmComponent, GmmScoreModel};
pub use sampler::{
    ddim_step, guided_sample, lr_sweep, predict_x0, trace_to_csv, unguided_sample,
    GuidanceConfig, GuidedRun, LossMode, PredictX0Map, SweepRow, TraceRow,
};
pub use schedule::DdimSchedule;
