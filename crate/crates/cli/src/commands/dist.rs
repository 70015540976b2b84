use std::path::PathBuf;

use serde::Serialize;
use swot_core::ot::{exact_w2, DEFAULT_W2_CAP};
use swot_core::sliced::{sliced_distance, DefiningFunction, EnergyFunction};
use swot_core::{Error, Result, SlicedConfig, SlicedVariant};

use crate::commands::{load_cloud, merge_json};
use crate::manifest::{resolve_seed, ManifestBuilder};

#[derive(clap::Args)]
pub struct DistArgs {
    /// First point cloud (.swpc or .csv)
    pub cloud_a: PathBuf,
    /// Second point cloud
    pub cloud_b: PathBuf,
    /// Sliced configuration JSON overlaying the defaults
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// sw, gsw, dsw, or ebsw
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub p: Option<f64>,
    /// Rotations (rotation-triples) or directions (iid-sphere)
    #[arg(long)]
    pub slices: Option<usize>,
    /// iid-sphere or rotation-triples
    #[arg(long)]
    pub scheme: Option<String>,
    /// Variant function: defining function for gsw (linear, poly3),
    /// energy for ebsw (exp, shift, constant)
    #[arg(long)]
    pub f: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON record of the result
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "dist-manifest.json")]
    pub manifest: PathBuf,
}

#[derive(Serialize)]
struct DistRecord {
    variant: SlicedVariant,
    sliced: f64,
    exact_w2: Option<f64>,
    config: SlicedConfig,
}

pub fn resolve_config(args: &DistArgs) -> Result<SlicedConfig> {
    let seed = resolve_seed(args.seed);
    let mut value = serde_json::to_value(SlicedConfig::sw(10, seed))?;
    if let Some(path) = &args.config {
        let file: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        merge_json(&mut value, file);
    }
    let mut cfg: SlicedConfig = serde_json::from_value(value)?;
    if args.seed.is_some() {
        cfg.seed = seed;
    }
    if let Some(v) = &args.variant {
        cfg.variant = parse_enum(v, "variant")?;
    }
    if let Some(p) = args.p {
        cfg.p = p;
    }
    if let Some(k) = args.slices {
        cfg.slices = k;
    }
    if let Some(s) = &args.scheme {
        cfg.scheme = parse_enum(s, "scheme")?;
    }
    if let Some(f) = &args.f {
        apply_function(&mut cfg, f)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_enum<T: serde::de::DeserializeOwned>(s: &str, what: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| Error::Config(format!("unknown {what}: {s}")))
}

fn apply_function(cfg: &mut SlicedConfig, f: &str) -> Result<()> {
    match cfg.variant {
        SlicedVariant::Gsw => {
            cfg.params.gsw.defining_function = match f {
                "linear" => DefiningFunction::Linear,
                "poly3" => DefiningFunction::Poly3,
                other => return Err(Error::Config(format!("unknown gsw function: {other}"))),
            };
        }
        SlicedVariant::Ebsw => {
            cfg.params.ebsw.energy = match f {
                "exp" => EnergyFunction::Exp,
                "shift" => EnergyFunction::Shift,
                "constant" | "const" => EnergyFunction::Const,
                other => return Err(Error::Config(format!("unknown ebsw energy: {other}"))),
            };
        }
        _ => {
            return Err(Error::Config(format!(
                "--f does not apply to variant {:?}",
                cfg.variant
            )))
        }
    }
    Ok(())
}

pub fn run(args: &DistArgs, argv: &[String]) -> Result<()> {
    let cfg = resolve_config(args)?;
    let mut mf = ManifestBuilder::new("dist", cfg.seed);
    mf.config(&cfg)?;
    mf.input(&args.cloud_a);
    mf.input(&args.cloud_b);

    let a = load_cloud(&args.cloud_a)?;
    let b = load_cloud(&args.cloud_b)?;
    let value = sliced_distance(&a, &b, &cfg)?;
    println!("sliced {value}");

    let w2 = if a.len() == b.len() && a.dim() == b.dim() && a.len() <= DEFAULT_W2_CAP {
        let w = exact_w2(&a, &b)?;
        println!("exact_w2 {w}");
        Some(w)
    } else {
        None
    };

    if let Some(out) = &args.out {
        let record = DistRecord {
            variant: cfg.variant,
            sliced: value,
            exact_w2: w2,
            config: cfg,
        };
        std::fs::write(out, serde_json::to_string_pretty(&record)?)?;
        mf.output(out);
    }
    mf.write(&args.manifest, argv)
}
