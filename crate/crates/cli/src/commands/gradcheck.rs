use std::path::PathBuf;

use rand::Rng;
use swot_core::diffgrad::{
    chain_vjp, finite_diff_check, grad_moments, grad_sw1, sw1_tie_mask, DifferentiableMap,
    GradCheckReport,
};
use swot_core::guidance::{Decoder, GmmScoreModel, PredictX0Map};
use swot_core::rng::{derive_seed, stream_rng};
use swot_core::sliced::sample_slices;
use swot_core::{Error, PointCloud, Result, SlicedConfig};

use crate::manifest::{resolve_seed, ManifestBuilder};

#[derive(clap::Args)]
pub struct GradcheckArgs {
    /// sw1, moments, or chain
    #[arg(long, default_value = "sw1")]
    pub target: String,
    #[arg(long, default_value_t = 50)]
    pub instances: usize,
    /// Maximum relative error; defaults to 1e-4, or 1e-3 for the
    /// affine-tanh chain
    #[arg(long)]
    pub tol: Option<f64>,
    /// Decoder for the chain target: identity or affine-tanh
    #[arg(long, default_value = "identity")]
    pub decoder: String,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Per-instance reports (JSON lines)
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, default_value = "gradcheck-manifest.json")]
    pub manifest: PathBuf,
}

fn random_cloud(n: usize, d: usize, seed: u64) -> PointCloud {
    let mut rng = stream_rng(seed, 0x4743);
    let data: Vec<f64> = (0..n * d).map(|_| rng.gen::<f64>()).collect();
    PointCloud::new(n, d, data).expect("finite data")
}

fn check_instance(args: &GradcheckArgs, seed: u64, tol: f64) -> Result<GradCheckReport> {
    const N: usize = 64;
    const D: usize = 3;
    let eps = 1e-5;
    match args.target.as_str() {
        "sw1" => {
            let a = random_cloud(N, D, derive_seed(seed, 1));
            let b = random_cloud(N, D, derive_seed(seed, 2));
            let slices = sample_slices(&SlicedConfig::sw(10, seed), D)?;
            let r = grad_sw1(&a, &b, &slices)?;
            let mask = sw1_tie_mask(&a, &b, &slices, eps);
            let f = |x: &[f64]| {
                let c = PointCloud::new(N, D, x.to_vec()).expect("finite");
                grad_sw1(&c, &b, &slices).expect("loss").loss
            };
            Ok(finite_diff_check("sw1", &f, &r.grad, a.data(), eps, tol, Some(&mask)))
        }
        "moments" => {
            let a = random_cloud(N, D, derive_seed(seed, 1));
            let b = random_cloud(N, D, derive_seed(seed, 2));
            let r = grad_moments(&a, &b)?;
            let f = |x: &[f64]| {
                let c = PointCloud::new(N, D, x.to_vec()).expect("finite");
                grad_moments(&c, &b).expect("loss").loss
            };
            Ok(finite_diff_check("moments", &f, &r.grad, a.data(), eps, tol, None))
        }
        "chain" => {
            // predict-x0 through the decoder, probed with a fixed cotangent
            let model = GmmScoreModel::isotropic(vec![0.3, -0.1, 0.2], 0.2)?;
            let decoder = match args.decoder.as_str() {
                "identity" => Decoder::identity(D),
                "affine-tanh" => Decoder::random_affine_tanh(D, derive_seed(seed, 3)),
                other => return Err(Error::Config(format!("unknown decoder: {other}"))),
            };
            let x0_map = PredictX0Map {
                model,
                alpha_bar: 0.5,
                gamma: 1.0,
                label: None,
            };
            let decoder_maps = decoder.maps();
            let mut maps: Vec<&dyn DifferentiableMap> = vec![&x0_map];
            for m in &decoder_maps {
                maps.push(m.as_ref());
            }
            let mut rng = stream_rng(seed, 0x4348);
            let x: Vec<f64> = (0..D).map(|_| rng.gen::<f64>() - 0.5).collect();
            let w: Vec<f64> = (0..D).map(|_| rng.gen::<f64>() - 0.5).collect();
            let analytic = chain_vjp(&maps, &x, &w)?;
            let f = |x: &[f64]| {
                let y = swot_core::diffgrad::chain_forward(&maps, x).expect("forward");
                y.iter().zip(&w).map(|(a, b)| a * b).sum()
            };
            Ok(finite_diff_check("chain", &f, &analytic, &x, eps, tol, None))
        }
        other => Err(Error::Config(format!("unknown gradcheck target: {other}"))),
    }
}

pub fn run(args: &GradcheckArgs, argv: &[String]) -> Result<()> {
    let seed = resolve_seed(args.seed);
    let tol = args.tol.unwrap_or(if args.target == "chain" && args.decoder == "affine-tanh" {
        1e-3
    } else {
        1e-4
    });
    let mut mf = ManifestBuilder::new("gradcheck", seed);
    mf.config(&serde_json::json!({
        "target": args.target,
        "instances": args.instances,
        "tol": tol,
        "decoder": args.decoder,
    }))?;

    let mut reports = Vec::with_capacity(args.instances);
    let mut failures = 0usize;
    let mut worst = 0.0_f64;
    for i in 0..args.instances {
        let rep = check_instance(args, derive_seed(seed, i as u64), tol)?;
        if !rep.pass {
            failures += 1;
        }
        worst = worst.max(rep.max_rel_err);
        reports.push(rep);
    }

    println!(
        "target {}: {}/{} pass (max_rel_err {worst:.3e}, tol {tol:.0e})",
        args.target,
        args.instances - failures,
        args.instances
    );
    if let Some(path) = &args.report {
        use std::io::Write;
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for rep in &reports {
            writeln!(f, "{}", serde_json::to_string(rep)?)?;
        }
        drop(f);
        mf.output(path);
    }
    mf.write(&args.manifest, argv)?;
    if failures > 0 {
        std::process::exit(4);
    }
    Ok(())
}
