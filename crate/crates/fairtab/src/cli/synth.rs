//! `fairtab synth`: generate a cohort CSV, its schema, and the ground-truth
//! bias manifest.

use crate::cli::manifest::Manifest;
use crate::dataio::{synth_generate, write_cohort_csv, SynthConfig};
use crate::error::{Error, Result};
use crate::persist;
use serde::Serialize;
use std::path::Path;

#[derive(Serialize)]
struct BiasManifest<'a> {
    seed: u64,
    group_spec: &'a [crate::dataio::GroupSpec],
    label_noise: f64,
    n_proxy: usize,
    proxy_strength: f64,
    sensitive_name: &'a str,
}

pub fn cmd_synth(config_path: &Path, seed: Option<u64>, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", config_path.display())))?;
    let mut config: SynthConfig = serde_json::from_str(&text)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    let cohort = synth_generate(&config)?;
    let schema = config.schema();

    std::fs::create_dir_all(out)?;
    let cohort_path = out.join("cohort.csv");
    let schema_path = out.join("schema.txt");
    let bias_path = out.join("bias_manifest.json");

    std::fs::write(&cohort_path, write_cohort_csv(&cohort, &schema)?)?;
    std::fs::write(&schema_path, schema.to_text())?;
    let bias = BiasManifest {
        seed: config.seed,
        group_spec: &config.group_spec,
        label_noise: config.label_noise,
        n_proxy: config.n_proxy,
        proxy_strength: config.proxy_strength,
        sensitive_name: &config.sensitive_name,
    };
    std::fs::write(&bias_path, serde_json::to_string_pretty(&bias)?)?;

    let mut manifest = Manifest::new("synth", config.seed, persist::hash_value(&config)?);
    manifest.record_input(config_path)?;
    manifest.record_output(&cohort_path)?;
    manifest.record_output(&schema_path)?;
    manifest.record_output(&bias_path)?;
    manifest.write(out)?;

    println!(
        "synth: wrote {} rows to {}",
        cohort.n_rows(),
        cohort_path.display()
    );
    Ok(())
}
