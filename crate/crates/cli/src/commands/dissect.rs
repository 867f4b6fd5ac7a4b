use std::path::PathBuf;

use anyhow::Result;
use serde::{Deserialize, Serialize};

use saldissect::data_io::DatasetManifest;
use saldissect::dissection::{category_stats, CategoryStats, DissectionConfig};

use crate::commands::report::dissection_markdown;
use crate::output::{csv_writer, fmt_f64, required, warnings_path, write_text, write_warnings};

#[derive(Debug, clap::Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Args {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Layer to analyze; repeat for several.
    #[arg(long = "layer")]
    #[serde(default)]
    pub layers: Vec<String>,
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Categories with fewer usable regions are left out.
    #[arg(long)]
    pub min_regions: Option<usize>,
    /// Output CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write per-channel mean scores (layer, category, channel, mean_nss).
    #[arg(long)]
    pub per_map: Option<PathBuf>,
    /// Also render the tables as Markdown.
    #[arg(long)]
    pub markdown: Option<PathBuf>,
}

pub const HEADER: [&str; 6] = ["layer", "category", "top_k_mean", "count_above_threshold", "regions_used", "regions_skipped"];

pub fn run(args: Args) -> Result<()> {
    let manifest = DatasetManifest::load(required(args.manifest, "--manifest")?)?;
    let out = required(args.out, "--out")?;
    let defaults = DissectionConfig::default();
    let cfg = DissectionConfig {
        layers: args.layers,
        top_k: args.top_k.unwrap_or(defaults.top_k),
        threshold: args.threshold.unwrap_or(defaults.threshold),
        min_regions_per_category: args.min_regions.unwrap_or(defaults.min_regions_per_category),
    };
    let report = category_stats(&manifest, &cfg)?;

    let mut w = csv_writer(&out)?;
    w.write_record(HEADER)?;
    for s in &report.stats {
        w.write_record([
            s.layer.clone(),
            s.category.label().to_string(),
            fmt_f64(Some(s.top_k_mean)),
            s.count_above_threshold.to_string(),
            s.regions_used.to_string(),
            s.regions_skipped.to_string(),
        ])?;
    }
    w.flush()?;
    if let Some(path) = &args.per_map {
        write_per_map(path, &report.stats)?;
    }
    if let Some(path) = &args.markdown {
        write_text(path, &dissection_markdown(&rows_of(&report.stats), Some(cfg.top_k), Some(cfg.threshold)))?;
    }
    write_warnings(&warnings_path(&out), &report.warnings)?;
    log::info!("{} category rows written to {}", report.stats.len(), out.display());
    Ok(())
}

fn write_per_map(path: &std::path::Path, stats: &[CategoryStats]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["layer", "category", "channel", "mean_nss"])?;
    for s in stats {
        for (j, v) in s.per_map_mean_nss.iter().enumerate() {
            w.write_record([s.layer.clone(), s.category.label().to_string(), j.to_string(), fmt_f64(*v)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One parsed row of the dissection CSV.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct DissectRow {
    pub layer: String,
    pub category: String,
    pub top_k_mean: f64,
    pub count_above_threshold: usize,
    pub regions_used: usize,
    pub regions_skipped: usize,
}

fn rows_of(stats: &[CategoryStats]) -> Vec<DissectRow> {
    stats
        .iter()
        .map(|s| DissectRow {
            layer: s.layer.clone(),
            category: s.category.label().to_string(),
            top_k_mean: s.top_k_mean,
            count_above_threshold: s.count_above_threshold,
            regions_used: s.regions_used,
            regions_skipped: s.regions_skipped,
        })
        .collect()
}

pub fn read_rows(path: &std::path::Path) -> Result<Vec<DissectRow>> {
    use anyhow::Context;
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    r.deserialize()
        .map(|row| row.with_context(|| format!("parsing {}", path.display())))
        .collect()
}
