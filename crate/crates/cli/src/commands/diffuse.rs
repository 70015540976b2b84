use std::path::PathBuf;

use serde::Serialize;
use swot_core::guidance::{
    guided_sample, lr_sweep, trace_to_csv, unguided_sample, DdimSchedule, Decoder,
    GmmScoreModel, GuidanceConfig,
};
use swot_core::ot::evaluate_w2;
use swot_core::{Error, Result};

use crate::commands::{load_cloud, merge_json};
use crate::commands::transfer::parse_mode;
use crate::manifest::{resolve_seed, sha256_file, ManifestBuilder};

#[derive(clap::Args)]
pub struct DiffuseArgs {
    /// GMM score-model spec (JSON)
    #[arg(long)]
    pub model: PathBuf,
    /// Reference cloud in decoder output space (.swpc or .csv)
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Guidance configuration JSON overlaying the defaults
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub slices: Option<usize>,
    #[arg(long)]
    pub inner_steps: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Disable gradient normalization by its standard deviation
    #[arg(long)]
    pub no_normalize: bool,
    #[arg(long)]
    pub cfg_scale: Option<f64>,
    /// sw, moments, or sw+moments
    #[arg(long)]
    pub mode: Option<String>,
    /// sw, gsw, dsw, or ebsw
    #[arg(long)]
    pub variant: Option<String>,
    /// Conditional label for classifier-free guidance
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long, default_value_t = 256)]
    pub batch: usize,
    /// identity or affine-tanh
    #[arg(long, default_value = "identity")]
    pub decoder: String,
    #[arg(long)]
    pub decoder_seed: Option<u64>,
    /// Learning-rate sweep, log-spaced: min:max:count
    #[arg(long)]
    pub sweep: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Serialize)]
struct DiffuseMetrics {
    w2_guided: f64,
    w2_unguided: f64,
    hash_guided: String,
    hash_unguided: String,
}

fn resolve_config(args: &DiffuseArgs) -> Result<GuidanceConfig> {
    let seed = resolve_seed(args.seed);
    let mut value = serde_json::to_value(GuidanceConfig {
        seed,
        ..GuidanceConfig::default()
    })?;
    if let Some(path) = &args.config {
        let file: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        merge_json(&mut value, file);
    }
    let mut cfg: GuidanceConfig = serde_json::from_value(value)?;
    if args.seed.is_some() {
        cfg.seed = seed;
    }
    if let Some(k) = args.slices {
        cfg.slices = k;
    }
    if let Some(m) = args.inner_steps {
        cfg.inner_steps = m;
    }
    if let Some(lr) = args.lr {
        cfg.lr = lr;
    }
    if args.no_normalize {
        cfg.normalize_grad = false;
    }
    if let Some(g) = args.cfg_scale {
        cfg.cfg_scale = g;
    }
    if let Some(m) = &args.mode {
        cfg.loss_mode = parse_mode(m)?;
    }
    if let Some(v) = &args.variant {
        cfg.variant = serde_json::from_value(serde_json::Value::String(v.clone()))
            .map_err(|_| Error::Config(format!("unknown variant: {v}")))?;
    }
    if args.label.is_some() {
        cfg.label = args.label.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_sweep(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!("sweep spec must be min:max:count, got {spec}")));
    }
    let lo: f64 = parts[0]
        .parse()
        .map_err(|_| Error::Config(format!("bad sweep min: {}", parts[0])))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|_| Error::Config(format!("bad sweep max: {}", parts[1])))?;
    let count: usize = parts[2]
        .parse()
        .map_err(|_| Error::Config(format!("bad sweep count: {}", parts[2])))?;
    if !(lo > 0.0 && hi > lo && count >= 2) {
        return Err(Error::Config("sweep needs 0 < min < max and count >= 2".into()));
    }
    let (llo, lhi) = (lo.ln(), hi.ln());
    Ok((0..count)
        .map(|i| (llo + (lhi - llo) * i as f64 / (count - 1) as f64).exp())
        .collect())
}

pub fn run(args: &DiffuseArgs, argv: &[String]) -> Result<()> {
    let cfg = resolve_config(args)?;
    let mut mf = ManifestBuilder::new("diffuse", cfg.seed);
    mf.config(&cfg)?;
    mf.input(&args.model);
    mf.input(&args.reference);

    let model: GmmScoreModel =
        serde_json::from_str(&std::fs::read_to_string(&args.model)?)?;
    model.validate()?;
    let reference = load_cloud(&args.reference)?;
    let schedule = DdimSchedule::default_30();
    let decoder = match args.decoder.as_str() {
        "identity" => Decoder::identity(model.dim),
        "affine-tanh" => {
            Decoder::random_affine_tanh(model.dim, args.decoder_seed.unwrap_or(cfg.seed))
        }
        other => return Err(Error::Config(format!("unknown decoder: {other}"))),
    };

    std::fs::create_dir_all(&args.out_dir)?;

    if let Some(spec) = &args.sweep {
        let grid = parse_sweep(spec)?;
        let rows = lr_sweep(&model, &schedule, &decoder, &reference, &cfg, &grid, args.batch)?;
        let path = args.out_dir.join("sweep.csv");
        use std::io::Write;
        let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
        writeln!(f, "lr,w2,mean_err,cov_err")?;
        for r in &rows {
            writeln!(f, "{},{},{},{}", r.lr, r.w2, r.mean_err, r.cov_err)?;
            println!("lr {} w2 {}", r.lr, r.w2);
        }
        drop(f);
        mf.output(&path);
        let manifest = args
            .manifest
            .clone()
            .unwrap_or_else(|| args.out_dir.join("diffuse-manifest.json"));
        return mf.write(&manifest, argv);
    }

    let guided = guided_sample(&model, &schedule, &decoder, &reference, &cfg, args.batch)?;
    let unguided = unguided_sample(&model, &schedule, &decoder, &cfg, args.batch)?;

    let gen_path = args.out_dir.join("generated.swpc");
    let ung_path = args.out_dir.join("unguided.swpc");
    let trace_path = args.out_dir.join("trace.csv");
    guided.generated.save_swpc(&gen_path)?;
    unguided.generated.save_swpc(&ung_path)?;
    trace_to_csv(&guided.trace, &trace_path)?;

    let n = guided.generated.len().min(reference.len()).min(2048);
    let metrics = DiffuseMetrics {
        w2_guided: evaluate_w2(&guided.generated, &reference, n, cfg.seed)?,
        w2_unguided: evaluate_w2(&unguided.generated, &reference, n, cfg.seed)?,
        hash_guided: sha256_file(&gen_path)?,
        hash_unguided: sha256_file(&ung_path)?,
    };
    let metrics_path = args.out_dir.join("metrics.json");
    std::fs::write(&metrics_path, serde_json::to_string_pretty(&metrics)?)?;

    println!("w2_guided {}", metrics.w2_guided);
    println!("w2_unguided {}", metrics.w2_unguided);

    mf.output(&gen_path);
    mf.output(&ung_path);
    mf.output(&trace_path);
    mf.output(&metrics_path);
    let manifest = args
        .manifest
        .clone()
        .unwrap_or_else(|| args.out_dir.join("diffuse-manifest.json"));
    mf.write(&manifest, argv)
}
