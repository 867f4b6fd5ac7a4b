use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use saldissect::bms::{bms_saliency, BmsConfig, ColorSpace};
use saldissect::data_io::{load_rgb, save_heatmap, save_map, DatasetManifest};
use saldissect::Warning;

use crate::output::{required, warnings_path, write_warnings};

/// Boolean Map Saliency parameters shared by the commands that run it.
#[derive(Debug, Default, clap::Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BmsOptions {
    #[arg(long)]
    pub threshold_step: Option<u32>,
    #[arg(long)]
    pub opening_radius: Option<usize>,
    #[arg(long)]
    pub blur_sigma: Option<f64>,
    /// Only threshold in one direction (channel > t).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub single_polarity: Option<bool>,
    /// opponent-lab-like (default) or rgb.
    #[arg(long)]
    pub colorspace: Option<String>,
}

impl BmsOptions {
    pub fn config(&self) -> Result<BmsConfig> {
        let d = BmsConfig::default();
        let colorspace = match self.colorspace.as_deref() {
            None => d.colorspace,
            Some(s) => serde_json::from_value::<ColorSpace>(serde_json::Value::String(s.into()))
                .with_context(|| format!("unknown colorspace {s:?}; expected opponent-lab-like or rgb"))?,
        };
        let cfg = BmsConfig {
            threshold_step: self.threshold_step.unwrap_or(d.threshold_step),
            opening_radius: self.opening_radius.unwrap_or(d.opening_radius),
            blur_sigma: self.blur_sigma.unwrap_or(d.blur_sigma),
            use_both_polarities: !self.single_polarity.unwrap_or(false),
            colorspace,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, clap::Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Args {
    /// A single image; `--out` is then the output .npy file.
    #[arg(long)]
    pub image: Option<PathBuf>,
    /// All images of a dataset; `--out` is then a directory.
    #[arg(long, conflicts_with = "image")]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write PNG heatmaps.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub png: Option<bool>,
    #[command(flatten)]
    #[serde(default)]
    pub bms: BmsOptions,
}

fn process(image: &Path, npy: &Path, png: bool, cfg: &BmsConfig) -> Result<Option<Warning>> {
    let s = bms_saliency(&load_rgb(image)?, cfg)?;
    save_map(&s.map, npy)?;
    if png {
        save_heatmap(&s.map, npy.with_extension("png"))?;
    }
    Ok(s.degenerate.then(|| {
        Warning::new("degenerate_saliency", format!("{}: every attention map was empty", image.display()))
    }))
}

pub fn run(args: Args) -> Result<()> {
    let cfg = args.bms.config()?;
    let out = required(args.out, "--out")?;
    let png = args.png.unwrap_or(false);
    match (&args.image, &args.manifest) {
        (Some(image), None) => {
            let warning = process(image, &out, png, &cfg)?;
            write_warnings(&warnings_path(&out), warning.as_slice())
        }
        (None, Some(manifest)) => {
            let manifest = DatasetManifest::load(manifest)?;
            std::fs::create_dir_all(&out)?;
            let warnings: Vec<Option<Warning>> = manifest
                .sorted_entries()
                .par_iter()
                .map(|e| process(&e.image, &out.join(format!("{}.npy", e.image_id)), png, &cfg))
                .collect::<Result<_>>()?;
            let warnings: Vec<Warning> = warnings.into_iter().flatten().collect();
            write_warnings(&out.join("warnings.jsonl"), &warnings)
        }
        _ => bail!("give either --image or --manifest"),
    }
}
