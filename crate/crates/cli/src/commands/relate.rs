use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use saldissect::data_io::{load_map, Category, DatasetManifest, ImageRecord};
use saldissect::metrics::resize_map;
use saldissect::relation::{relate, relation_correlation};
use saldissect::{DenseMap, Error, Warning};

use crate::commands::dissect::read_rows;
use crate::commands::report::relation_markdown;
use crate::output::{csv_writer, fmt_f64, required, warnings_path, write_json, write_text, write_warnings};

#[derive(Debug, clap::Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Args {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Directory of predicted maps, `<image_id>.npy`.
    #[arg(long)]
    pub preds: Option<PathBuf>,
    /// Directory of ground-truth maps, `<image_id>.npy`.
    #[arg(long)]
    pub gts: Option<PathBuf>,
    /// CSV written by `dissect`, supplying the inner saliency per category.
    #[arg(long)]
    pub dissect: Option<PathBuf>,
    /// Layer of the dissection CSV to use; needed when it holds several.
    #[arg(long)]
    pub layer: Option<String>,
    /// Output CSV; the Spearman summary goes to the same path with `.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub markdown: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Summary {
    layer: Option<String>,
    spearman: Option<f64>,
    shared_categories: usize,
}

fn load_maps(dir: &Path, what: &str, records: &[ImageRecord], warnings: &mut Vec<Warning>) -> Result<Vec<DenseMap>> {
    let loaded: Vec<(DenseMap, Option<Warning>)> = records
        .par_iter()
        .map(|r| {
            let path = dir.join(format!("{}.npy", r.image_id));
            if !path.exists() {
                bail!("missing {what} map for image {:?} (expected {})", r.image_id, path.display());
            }
            let m = load_map(&path)?;
            if m.dims() == r.size {
                return Ok((m, None));
            }
            let w = Warning::new(
                "resized_map",
                format!("{what} map of {:?} resized from {:?} to {:?}", r.image_id, m.dims(), r.size),
            );
            Ok((resize_map(&m, r.size), Some(w)))
        })
        .collect::<Result<_>>()?;
    let mut maps = Vec::with_capacity(loaded.len());
    for (m, w) in loaded {
        maps.push(m);
        warnings.extend(w);
    }
    Ok(maps)
}

fn inner_saliency(path: &Path, layer: Option<&str>) -> Result<(String, BTreeMap<Category, f64>)> {
    let rows = read_rows(path)?;
    let layers: BTreeSet<&str> = rows.iter().map(|r| r.layer.as_str()).collect();
    let layer = match layer {
        Some(l) if layers.contains(l) => l.to_string(),
        Some(l) => bail!("layer {l:?} does not appear in {}", path.display()),
        None if layers.len() == 1 => layers.first().expect("one layer").to_string(),
        None => bail!("{} holds several layers; choose one with --layer", path.display()),
    };
    let mut inner = BTreeMap::new();
    for r in rows.iter().filter(|r| r.layer == layer) {
        inner.insert(r.category.parse::<Category>()?, r.top_k_mean);
    }
    Ok((layer, inner))
}

pub fn run(args: Args) -> Result<()> {
    let manifest = DatasetManifest::load(required(args.manifest, "--manifest")?)?;
    let preds_dir = required(args.preds, "--preds")?;
    let gts_dir = required(args.gts, "--gts")?;
    let out = required(args.out, "--out")?;
    anyhow::ensure!(!manifest.is_empty(), "the manifest lists no images");

    let (layer, inner) = match &args.dissect {
        Some(p) => {
            let (l, i) = inner_saliency(p, args.layer.as_deref())?;
            (Some(l), i)
        }
        None => (None, BTreeMap::new()),
    };
    let records: Vec<ImageRecord> = manifest
        .sorted_entries()
        .par_iter()
        .map(|e| e.load_record().with_context(|| format!("loading image {:?}", e.image_id)))
        .collect::<Result<_>>()?;
    let mut warnings = Vec::new();
    let preds = load_maps(&preds_dir, "prediction", &records, &mut warnings)?;
    let gts = load_maps(&gts_dir, "ground-truth", &records, &mut warnings)?;
    let relations = relate(&preds, &gts, &records, &inner)?;

    let mut w = csv_writer(&out)?;
    w.write_record(["category", "inner_saliency", "OS_c", "OD_c", "regions"])?;
    for r in &relations {
        w.write_record([
            r.category.label().to_string(),
            fmt_f64(r.inner_saliency),
            fmt_f64(Some(r.output_saliency)),
            fmt_f64(Some(r.output_difference)),
            r.regions.to_string(),
        ])?;
    }
    w.flush()?;

    let shared = relations.iter().filter(|r| r.inner_saliency.is_some()).count();
    let spearman = match relation_correlation(&relations) {
        Ok(v) => Some(v),
        Err(e @ (Error::TooFewCategories(_) | Error::UndefinedRanks)) => {
            warnings.push(Warning::new("no_correlation", e.to_string()));
            None
        }
        Err(e) => return Err(e.into()),
    };
    write_json(
        &out.with_extension("json"),
        &Summary {
            layer,
            spearman,
            shared_categories: shared,
        },
    )?;
    if let Some(path) = &args.markdown {
        write_text(path, &relation_markdown(&relations, spearman))?;
    }
    write_warnings(&warnings_path(&out), &warnings)?;
    log::info!("{} categories related; spearman {}", relations.len(), fmt_f64(spearman));
    Ok(())
}
