use std::path::PathBuf;

use serde::Serialize;
use swot_core::guidance::LossMode;
use swot_core::ot::evaluate_w2;
use swot_core::palette::{
    load_image, save_image, transfer_palette_traced, ImageBuffer, PaletteTransferConfig,
};
use swot_core::{Error, PointCloud, Result};

use crate::manifest::{resolve_seed, ManifestBuilder};

#[derive(clap::Args)]
pub struct TransferArgs {
    /// Content image (.png, .ppm, or .swim)
    pub content: PathBuf,
    /// Reference image supplying the palette
    pub reference: PathBuf,
    /// Output image path
    #[arg(long)]
    pub out: PathBuf,
    /// sw, moments, or sw+moments
    #[arg(long, default_value = "sw")]
    pub mode: String,
    #[arg(long, default_value_t = 300)]
    pub iters: usize,
    /// Per-pixel step length
    #[arg(long, default_value_t = 0.02)]
    pub lr: f64,
    /// Pixels sampled per iteration
    #[arg(long, default_value_t = 4096)]
    pub samples: usize,
    #[arg(long, default_value_t = 10)]
    pub slices: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Per-iteration loss trace CSV
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// JSON report with before/after W2
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, default_value = "transfer-manifest.json")]
    pub manifest: PathBuf,
}

#[derive(Serialize)]
struct TransferReport {
    w2_before: f64,
    w2_after: f64,
    improved: bool,
    config: PaletteTransferConfig,
}

pub fn parse_mode(s: &str) -> Result<LossMode> {
    match s {
        "sw" => Ok(LossMode::SwOnly),
        "moments" => Ok(LossMode::MomentsOnly),
        "sw+moments" => Ok(LossMode::SwPlusMoments),
        other => Err(Error::Config(format!("unknown mode: {other}"))),
    }
}

fn image_w2(a: &ImageBuffer, b: &ImageBuffer, seed: u64) -> Result<f64> {
    let ca: PointCloud = a.all_pixels();
    let cb: PointCloud = b.all_pixels();
    let n = 3000.min(ca.len()).min(cb.len());
    evaluate_w2(&ca, &cb, n, seed)
}

pub fn run(args: &TransferArgs, argv: &[String]) -> Result<()> {
    let seed = resolve_seed(args.seed);
    let cfg = PaletteTransferConfig {
        iterations: args.iters,
        step_size: args.lr,
        sample_size: args.samples,
        slices: args.slices,
        loss_mode: parse_mode(&args.mode)?,
        seed,
    };
    let mut mf = ManifestBuilder::new("transfer", seed);
    mf.config(&cfg)?;
    mf.input(&args.content);
    mf.input(&args.reference);

    let content = load_image(&args.content)?;
    let reference = load_image(&args.reference)?;
    let w2_before = image_w2(&content, &reference, seed)?;
    let (out, trace) = transfer_palette_traced(&content, &reference, &cfg)?;
    let w2_after = image_w2(&out, &reference, seed)?;

    save_image(&out, &args.out)?;
    mf.output(&args.out);

    println!("w2_before {w2_before}");
    println!("w2_after {w2_after}");
    if w2_after <= w2_before {
        println!("w2_after <= w2_before");
    }

    if let Some(path) = &args.trace {
        use std::io::Write;
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "iteration,loss,grad_norm")?;
        for r in &trace {
            writeln!(f, "{},{},{}", r.iteration, r.loss, r.grad_norm)?;
        }
        drop(f);
        mf.output(path);
    }
    if let Some(path) = &args.report {
        let report = TransferReport {
            w2_before,
            w2_after,
            improved: w2_after <= w2_before,
            config: cfg,
        };
        std::fs::write(path, serde_json::to_string_pretty(&report)?)?;
        mf.output(path);
    }
    mf.write(&args.manifest, argv)
}
