use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use saldissect::bms::{bms_saliency, center_prior, random_map};
use saldissect::data_io::DatasetManifest;
use saldissect::decoder::{forward, DecoderWeights};
use saldissect::dissection::synthetic_layer_stats;
use saldissect::metrics::nmm;
use saldissect::stimgen::PopOutKind;
use saldissect::{DenseMap, Error, Warning};

use crate::commands::bms::BmsOptions;
use crate::commands::gen_stim::SuiteManifest;
use crate::commands::report::{means_markdown, MeansRow};
use crate::output::{csv_writer, fmt_cell, fmt_f64, required, sibling, warnings_path, write_text, write_warnings};

#[derive(Debug, clap::Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Args {
    /// `suite.json` written by `gen-stim`.
    #[arg(long)]
    pub suite: Option<PathBuf>,
    /// Model to score: bms, center-prior, random or decoder; repeat for
    /// several. Defaults to bms, center-prior and random (plus decoder when
    /// weights are given).
    #[arg(long = "model")]
    #[serde(default)]
    pub models: Vec<String>,
    /// Seed of the random-map baseline.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of random maps averaged per image.
    #[arg(long)]
    pub random_maps: Option<usize>,
    /// Activations of the suite images (image ids = stimulus ids).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Layers for per-layer statistics; the decoder reads the first one.
    #[arg(long = "layer")]
    #[serde(default)]
    pub layers: Vec<String>,
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long)]
    pub top_k: Option<usize>,
    #[command(flatten)]
    #[serde(default)]
    pub bms: BmsOptions,
    /// Per-image CSV; means and layer statistics go next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub markdown: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Model {
    Bms,
    CenterPrior,
    Random,
    Decoder,
}

impl Model {
    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "bms" => Model::Bms,
            "center-prior" => Model::CenterPrior,
            "random" => Model::Random,
            "decoder" => Model::Decoder,
            other => bail!("unknown model {other:?}; expected bms, center-prior, random or decoder"),
        })
    }

    fn label(self) -> &'static str {
        match self {
            Model::Bms => "bms",
            Model::CenterPrior => "center-prior",
            Model::Random => "random",
            Model::Decoder => "decoder",
        }
    }
}

/// Deterministic per-(image, draw) seeds for the random baseline.
fn random_seed(base: u64, image: usize, draw: usize, draws: usize) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add((image * draws + draw) as u64)
}

pub fn run(args: Args) -> Result<()> {
    let suite_path = required(args.suite, "--suite")?;
    let suite = SuiteManifest::load(&suite_path)?;
    let out = required(args.out, "--out")?;
    let seed = args.seed.unwrap_or(0);
    let draws = args.random_maps.unwrap_or(10);
    anyhow::ensure!(draws > 0, "--random-maps must be at least 1");
    let bms_cfg = args.bms.config()?;

    let mut models: Vec<Model> = args.models.iter().map(|m| Model::parse(m)).collect::<Result<_>>()?;
    if models.is_empty() {
        models = vec![Model::Bms, Model::CenterPrior, Model::Random];
        if args.weights.is_some() {
            models.push(Model::Decoder);
        }
    }
    models.sort();
    models.dedup();

    let manifest = args.manifest.as_ref().map(DatasetManifest::load).transpose()?;
    let decoder = if models.contains(&Model::Decoder) {
        let weights = DecoderWeights::load(required(args.weights.clone(), "--weights")?)?;
        let layer = args.layers.first().cloned().context("the decoder model needs --layer")?;
        let manifest = manifest.as_ref().context("the decoder model needs --manifest with suite activations")?;
        Some((weights, layer, manifest))
    } else {
        None
    };

    let entry = |id: &str| -> Result<&saldissect::data_io::ManifestEntry> {
        manifest
            .as_ref()
            .and_then(|m| m.find(id))
            .with_context(|| format!("no activations listed for stimulus {id:?}"))
    };

    // per stimulus: (kind, mask, [(model, nmm or reason)])
    type Scores = Vec<(Model, Result<f64, String>)>;
    let rows: Vec<(String, PopOutKind, Scores)> = suite
        .stimuli
        .par_iter()
        .enumerate()
        .map(|(i, s)| -> Result<_> {
            let (image, mask) = s.load()?;
            let (h, w) = mask.dims();
            let mut scores = Vec::new();
            for &model in &models {
                let score = |pred: &DenseMap| match nmm(pred, &mask) {
                    Ok(v) => Ok(Ok(v)),
                    Err(e @ (Error::ConstantMap | Error::EmptyMask)) => Ok(Err(e.to_string())),
                    Err(e) => Err(e),
                };
                let value = match model {
                    Model::Bms => score(&bms_saliency(&image, &bms_cfg)?.map)?,
                    Model::CenterPrior => score(&center_prior(h, w)?)?,
                    Model::Random => {
                        let mut total = 0.0;
                        for d in 0..draws {
                            total += nmm(&random_map(h, w, random_seed(seed, i, d, draws))?, &mask)?;
                        }
                        Ok(total / draws as f64)
                    }
                    Model::Decoder => {
                        let (weights, layer, _) = decoder.as_ref().expect("decoder configured");
                        let stack = entry(&s.id)?.load_stack(layer)?;
                        score(&forward(&stack, weights, (h, w))?)?
                    }
                };
                scores.push((model, value));
            }
            Ok((s.id.clone(), s.kind, scores))
        })
        .collect::<Result<_>>()?;

    let mut warnings = Vec::new();
    let mut w = csv_writer(&out)?;
    w.write_record(["model", "image_id", "kind", "nmm"])?;
    for &model in &models {
        for (id, kind, scores) in &rows {
            let value = &scores.iter().find(|(m, _)| *m == model).expect("scored").1;
            if let Err(reason) = value {
                warnings.push(Warning::new("skipped_image", format!("{} on {id}: {reason}", model.label())));
            }
            w.write_record([model.label(), id, kind.label(), &fmt_f64(value.as_ref().ok().copied())])?;
        }
    }
    w.flush()?;

    // means per model, overall and per kind
    let mut means: Vec<(Model, String, Option<f64>, usize)> = Vec::new();
    for &model in &models {
        let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for (_, kind, scores) in &rows {
            if let Some(Ok(v)) = scores.iter().find(|(m, _)| *m == model).map(|x| &x.1) {
                groups.entry("all".into()).or_default().push(*v);
                groups.entry(kind.label().into()).or_default().push(*v);
            }
        }
        for group in std::iter::once("all").chain(PopOutKind::ALL.iter().map(|k| k.label())) {
            let v = groups.get(group).map(Vec::as_slice).unwrap_or(&[]);
            let mean = (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
            means.push((model, group.to_string(), mean, v.len()));
        }
    }
    let mut w = csv_writer(&sibling(&out, "means", "csv"))?;
    w.write_record(["model", "kind", "mean_nmm", "images"])?;
    for (model, kind, mean, n) in &means {
        w.write_record([model.label(), kind, &fmt_f64(*mean), &n.to_string()])?;
    }
    w.flush()?;

    if !args.layers.is_empty() && manifest.is_some() {
        write_layer_stats(&args.layers, args.top_k.unwrap_or(10), &suite, &sibling(&out, "layers", "csv"), &entry, &mut warnings)?;
    }

    if let Some(path) = &args.markdown {
        let rows: Vec<MeansRow> = means
            .iter()
            .map(|(m, kind, mean, n)| MeansRow {
                model: m.label().to_string(),
                kind: kind.clone(),
                mean_nmm: *mean,
                images: *n,
            })
            .collect();
        write_text(path, &means_markdown(&rows))?;
    }
    write_warnings(&warnings_path(&out), &warnings)?;
    for (model, kind, mean, _) in means.iter().filter(|m| m.1 == "all") {
        log::info!("{} mean NMM ({kind}): {}", model.label(), fmt_cell(*mean));
    }
    Ok(())
}

fn write_layer_stats<'a>(
    layer_names: &[String],
    top_k: usize,
    suite: &SuiteManifest,
    path: &std::path::Path,
    entry: &dyn Fn(&str) -> Result<&'a saldissect::data_io::ManifestEntry>,
    warnings: &mut Vec<Warning>,
) -> Result<()> {
    let masks: Vec<DenseMap> = suite.stimuli.iter().map(|s| Ok(s.load()?.1)).collect::<Result<_>>()?;
    let mut layers = Vec::new();
    for layer in layer_names {
        let stacks = suite
            .stimuli
            .iter()
            .map(|s| Ok(entry(&s.id)?.load_stack(layer)?))
            .collect::<Result<Vec<_>>>()?;
        layers.push((layer.clone(), stacks));
    }
    let stats = synthetic_layer_stats(&layers, &masks, top_k)?;
    let mut w = csv_writer(path)?;
    w.write_record(["layer", "top_k_mean", "top_k_channels", "skipped_pairs"])?;
    for s in &stats {
        if s.skipped_pairs > 0 {
            warnings.push(Warning::new(
                "skipped_pairs",
                format!("layer {}: {} (channel, image) pairs were constant", s.layer, s.skipped_pairs),
            ));
        }
        let channels: Vec<String> = s.top_k_channels.iter().map(|c| c.to_string()).collect();
        w.write_record([s.layer.clone(), fmt_f64(s.top_k_mean), channels.join(" "), s.skipped_pairs.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
