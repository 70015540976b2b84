use std::path::PathBuf;

use swot_core::ot::evaluate_w2;
use swot_core::Result;

use crate::commands::load_cloud;
use crate::manifest::{resolve_seed, ManifestBuilder};

#[derive(clap::Args)]
pub struct EvalArgs {
    /// First point cloud (.swpc or .csv)
    pub cloud_a: PathBuf,
    /// Second point cloud
    pub cloud_b: PathBuf,
    /// Subsample size for the exact assignment
    #[arg(long, default_value_t = 3000)]
    pub n: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "eval-manifest.json")]
    pub manifest: PathBuf,
}

pub fn run(args: &EvalArgs, argv: &[String]) -> Result<()> {
    let seed = resolve_seed(args.seed);
    let mut mf = ManifestBuilder::new("eval", seed);
    mf.config(&serde_json::json!({ "n": args.n }))?;
    mf.input(&args.cloud_a);
    mf.input(&args.cloud_b);

    let a = load_cloud(&args.cloud_a)?;
    let b = load_cloud(&args.cloud_b)?;
    let w2 = evaluate_w2(&a, &b, args.n, seed)?;
    println!("w2 {w2}");
    mf.write(&args.manifest, argv)
}
