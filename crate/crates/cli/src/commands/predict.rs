use std::path::PathBuf;

use anyhow::Result;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use saldissect::data_io::{save_heatmap, save_map, DatasetManifest};
use saldissect::decoder::{forward, DecoderWeights};

use crate::output::{required, write_warnings};

#[derive(Debug, clap::Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Args {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub layer: Option<String>,
    /// Weights written by `train-decoder`.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Output directory; one `<image_id>.npy` per image.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write grayscale PNG heatmaps.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub png: Option<bool>,
}

pub fn run(args: Args) -> Result<()> {
    let manifest = DatasetManifest::load(required(args.manifest, "--manifest")?)?;
    let layer = required(args.layer, "--layer")?;
    let weights = DecoderWeights::load(required(args.weights, "--weights")?)?;
    let out = required(args.out, "--out")?;
    std::fs::create_dir_all(&out)?;
    let png = args.png.unwrap_or(false);
    manifest.sorted_entries().par_iter().try_for_each(|e| -> Result<()> {
        let stack = e.load_stack(&layer)?;
        let pred = forward(&stack, &weights, e.image_size()?)?;
        save_map(&pred, out.join(format!("{}.npy", e.image_id)))?;
        if png {
            save_heatmap(&pred, out.join(format!("{}.png", e.image_id)))?;
        }
        Ok(())
    })?;
    write_warnings(&out.join("warnings.jsonl"), &[])?;
    log::info!("wrote {} predictions to {}", manifest.len(), out.display());
    Ok(())
}
