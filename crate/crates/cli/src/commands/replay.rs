use std::path::PathBuf;

use clap::Parser;
use swot_core::{Error, Result};

use crate::manifest::{sha256_file, RunManifest};

#[derive(clap::Args)]
pub struct ReplayArgs {
    /// Manifest written by a previous run
    pub manifest: PathBuf,
}

pub fn run(args: &ReplayArgs) -> Result<()> {
    let manifest = RunManifest::load(&args.manifest)?;
    if manifest.subcommand == "replay" {
        return Err(Error::Config("cannot replay a replay".into()));
    }

    let mut argv = vec!["swot".to_string()];
    argv.extend(manifest.argv.iter().cloned());
    let cli = crate::Cli::try_parse_from(&argv)
        .map_err(|e| Error::Config(format!("stored argv does not parse: {e}")))?;
    crate::run(&cli, &manifest.argv)?;

    let mut mismatches = 0usize;
    for rec in &manifest.outputs {
        let fresh = sha256_file(std::path::Path::new(&rec.path))?;
        if fresh == rec.sha256 {
            println!("ok {}", rec.path);
        } else {
            println!("mismatch {} (recorded {}, got {fresh})", rec.path, rec.sha256);
            mismatches += 1;
        }
    }
    println!("replay {}", if mismatches == 0 { "ok" } else { "failed" });
    if mismatches > 0 {
        std::process::exit(4);
    }
    Ok(())
}
