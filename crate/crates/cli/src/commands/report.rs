use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use saldissect::relation::CategoryRelation;
use saldissect::stimgen::PopOutKind;

use crate::commands::dissect::{read_rows, DissectRow};
use crate::output::{fmt_cell, markdown_table, required, write_text};

#[derive(Debug, clap::Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Args {
    /// CSV written by `dissect`.
    #[arg(long)]
    pub dissect: Option<PathBuf>,
    /// Means CSV written by `eval-synthetic` (`*.means.csv`).
    #[arg(long)]
    pub eval: Option<PathBuf>,
    /// CSV written by `relate`.
    #[arg(long)]
    pub relate: Option<PathBuf>,
    /// Markdown output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Two blocks with categories as rows and layers as columns: the top-k mean
/// score and the number of maps above the threshold.
pub fn dissection_markdown(rows: &[DissectRow], top_k: Option<usize>, threshold: Option<f64>) -> String {
    let mut layers: Vec<&str> = Vec::new();
    for r in rows {
        if !layers.contains(&r.layer.as_str()) {
            layers.push(&r.layer);
        }
    }
    let categories: Vec<&str> = {
        let mut seen = Vec::new();
        for r in rows {
            if !seen.contains(&r.category.as_str()) {
                seen.push(&r.category);
            }
        }
        seen
    };
    let mut headers = vec!["category".to_string()];
    headers.extend(layers.iter().map(|l| l.to_string()));
    let cell = |c: &str, l: &str| rows.iter().find(|r| r.category == c && r.layer == l);
    let block = |f: &dyn Fn(&DissectRow) -> String| -> String {
        let table: Vec<Vec<String>> = categories
            .iter()
            .map(|c| {
                let mut row = vec![c.to_string()];
                row.extend(layers.iter().map(|l| cell(c, l).map(f).unwrap_or_else(|| "–".into())));
                row
            })
            .collect();
        markdown_table(&headers, &table)
    };
    let k = top_k.map(|k| format!(" (k = {k})")).unwrap_or_default();
    let t = threshold.map(|t| format!(" (T = {t})")).unwrap_or_default();
    format!(
        "Mean NSS of the top activation maps per category{k}\n\n{}\n# activation maps above threshold{t}\n\n{}",
        block(&|r| fmt_cell(Some(r.top_k_mean))),
        block(&|r| r.count_above_threshold.to_string()),
    )
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct MeansRow {
    pub model: String,
    pub kind: String,
    pub mean_nmm: Option<f64>,
    pub images: usize,
}

/// Models as rows, stimulus kinds (and "all") as columns.
pub fn means_markdown(rows: &[MeansRow]) -> String {
    let kinds: Vec<String> = std::iter::once("all").chain(PopOutKind::ALL.iter().map(|k| k.label())).map(String::from).collect();
    let mut models: Vec<&str> = Vec::new();
    for r in rows {
        if !models.contains(&r.model.as_str()) {
            models.push(&r.model);
        }
    }
    let mut headers = vec!["model".to_string()];
    headers.extend(kinds.iter().cloned());
    let table: Vec<Vec<String>> = models
        .iter()
        .map(|m| {
            let mut row = vec![m.to_string()];
            row.extend(kinds.iter().map(|k| fmt_cell(rows.iter().find(|r| r.model == *m && &r.kind == k).and_then(|r| r.mean_nmm))));
            row
        })
        .collect();
    format!("Mean NMM on the synthetic suite\n\n{}", markdown_table(&headers, &table))
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct RelateRow {
    pub category: String,
    pub inner_saliency: Option<f64>,
    #[serde(rename = "OS_c")]
    pub output_saliency: f64,
    #[serde(rename = "OD_c")]
    pub output_difference: f64,
    pub regions: usize,
}

impl From<&CategoryRelation> for RelateRow {
    fn from(r: &CategoryRelation) -> Self {
        RelateRow {
            category: r.category.label().to_string(),
            inner_saliency: r.inner_saliency,
            output_saliency: r.output_saliency,
            output_difference: r.output_difference,
            regions: r.regions,
        }
    }
}

pub fn relation_rows_markdown(rows: &[RelateRow], spearman: Option<f64>) -> String {
    let headers: Vec<String> = ["category", "inner saliency", "output saliency", "output difference", "regions"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.category.clone(),
                fmt_cell(r.inner_saliency),
                fmt_cell(Some(r.output_saliency)),
                fmt_cell(Some(r.output_difference)),
                r.regions.to_string(),
            ]
        })
        .collect();
    let mut out = format!("Inner versus output saliency per category\n\n{}", markdown_table(&headers, &table));
    if let Some(s) = spearman {
        out.push_str(&format!("\nSpearman correlation: {s:.3}\n"));
    }
    out
}

pub fn relation_markdown(relations: &[CategoryRelation], spearman: Option<f64>) -> String {
    let rows: Vec<RelateRow> = relations.iter().map(RelateRow::from).collect();
    relation_rows_markdown(&rows, spearman)
}

fn read_csv<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    r.deserialize()
        .map(|row| row.with_context(|| format!("parsing {}", path.display())))
        .collect()
}

#[derive(Debug, Deserialize)]
struct Summary {
    spearman: Option<f64>,
}

pub fn run(args: Args) -> Result<()> {
    let out = required(args.out, "--out")?;
    let mut sections = Vec::new();
    if let Some(p) = &args.dissect {
        sections.push(dissection_markdown(&read_rows(p)?, None, None));
    }
    if let Some(p) = &args.eval {
        sections.push(means_markdown(&read_csv::<MeansRow>(p)?));
    }
    if let Some(p) = &args.relate {
        let rows: Vec<RelateRow> = read_csv(p)?;
        let summary = p.with_extension("json");
        let spearman = if summary.exists() {
            let text = std::fs::read_to_string(&summary)?;
            serde_json::from_str::<Summary>(&text)
                .with_context(|| format!("parsing {}", summary.display()))?
                .spearman
        } else {
            None
        };
        sections.push(relation_rows_markdown(&rows, spearman));
    }
    anyhow::ensure!(!sections.is_empty(), "nothing to report; give --dissect, --eval or --relate");
    write_text(&out, &sections.join("\n"))?;
    Ok(())
}
