use std::path::PathBuf;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use saldissect::data_io::{rasterize_fixations, DatasetManifest};
use saldissect::decoder::{mean_nss, train_from, init_weights, DecoderWeights, TrainConfig, TrainSample};

use crate::output::{csv_writer, fmt_f64, required, sibling, warnings_path, write_json, write_warnings};

#[derive(Debug, clap::Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Args {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub layer: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Start from these weights instead of a seeded initialization.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Weights file (.npy); metadata, loss curve and warnings go next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Metadata<'a> {
    layer: &'a str,
    channels: usize,
    config: &'a TrainConfig,
    resumed: bool,
    images: usize,
    final_loss: Option<f64>,
    train_mean_nss: f64,
    weights: &'a [f64],
    bias: f64,
    batches: usize,
    skipped_batches: usize,
    skipped_images: usize,
}

/// Loads the layer stacks and fixation grids (at image resolution) of every
/// entry, ordered by image id.
pub fn load_dataset(manifest: &DatasetManifest, layer: &str) -> Result<Vec<TrainSample>> {
    let entries = manifest.sorted_entries();
    for e in &entries {
        anyhow::ensure!(
            e.activations.contains_key(layer),
            "image {:?} has no activations for layer {layer:?}",
            e.image_id
        );
    }
    entries
        .par_iter()
        .map(|e| {
            let features = e.load_stack(layer)?;
            let size = e.image_size()?;
            let fixations = rasterize_fixations(&e.load_fixations()?, size)?;
            Ok(TrainSample { features, fixations })
        })
        .collect()
}

pub fn run(args: Args) -> Result<()> {
    let manifest = DatasetManifest::load(required(args.manifest, "--manifest")?)?;
    let layer = required(args.layer, "--layer")?;
    let out = required(args.out, "--out")?;
    anyhow::ensure!(!manifest.is_empty(), "the manifest lists no images");
    let defaults = TrainConfig::default();
    let cfg = TrainConfig {
        learning_rate: args.learning_rate.unwrap_or(defaults.learning_rate),
        momentum: args.momentum.unwrap_or(defaults.momentum),
        epochs: args.epochs.unwrap_or(defaults.epochs),
        seed: args.seed.unwrap_or(defaults.seed),
        batch_size: args.batch_size.unwrap_or(defaults.batch_size),
    };
    cfg.validate()?;
    let data = load_dataset(&manifest, &layer)?;
    let channels = data[0].features.num_channels();
    let initial = match &args.resume {
        Some(p) => DecoderWeights::load(p).with_context(|| format!("loading weights to resume from {}", p.display()))?,
        None => init_weights(channels, cfg.seed)?,
    };
    let report = train_from(initial, &data, &cfg)?;
    let train_nss = mean_nss(&data, &report.weights)?;

    report.weights.save(&out)?;
    let mut w = csv_writer(&sibling(&out, "loss", "csv"))?;
    w.write_record(["epoch", "loss"])?;
    for (i, l) in report.loss_curve.iter().enumerate() {
        w.write_record([(i + 1).to_string(), fmt_f64(Some(*l))])?;
    }
    w.flush()?;
    write_json(
        &out.with_extension("json"),
        &Metadata {
            layer: &layer,
            channels,
            config: &cfg,
            resumed: args.resume.is_some(),
            images: data.len(),
            final_loss: report.loss_curve.last().copied().filter(|v| v.is_finite()),
            train_mean_nss: train_nss,
            weights: report.weights.w(),
            bias: report.weights.b(),
            batches: report.batches,
            skipped_batches: report.skipped_batches,
            skipped_images: report.skipped_images,
        },
    )?;
    write_warnings(&warnings_path(&out), &report.warnings)?;
    log::info!("trained on {} images; training NSS {train_nss:.4}", data.len());
    Ok(())
}
