use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use saldissect::data_io::{load_mask, load_rgb, save_mask, save_rgb};
use saldissect::stimgen::{standard_suite, PopOutKind, StimulusSpec};
use saldissect::DenseMap;

use crate::output::{required, write_json, write_warnings};

#[derive(Debug, clap::Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Args {
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub id: String,
    pub kind: PopOutKind,
    pub image: PathBuf,
    pub mask: PathBuf,
    pub spec: PathBuf,
}

/// The `suite.json` index written next to the stimuli.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteManifest {
    pub seed: u64,
    pub stimuli: Vec<SuiteEntry>,
}

impl SuiteManifest {
    /// Reads the index and resolves its paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading suite {}", path.display()))?;
        let mut suite: SuiteManifest = serde_json::from_str(&text).with_context(|| format!("parsing suite {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for s in &mut suite.stimuli {
            s.image = base.join(&s.image);
            s.mask = base.join(&s.mask);
            s.spec = base.join(&s.spec);
            for p in [&s.image, &s.mask] {
                anyhow::ensure!(p.exists(), "stimulus {:?}: missing file {}", s.id, p.display());
            }
        }
        Ok(suite)
    }
}

impl SuiteEntry {
    pub fn load(&self) -> Result<(image::RgbImage, DenseMap)> {
        Ok((load_rgb(&self.image)?, load_mask(&self.mask)?))
    }
}

pub fn run(args: Args) -> Result<()> {
    let out = required(args.out, "--out")?;
    let seed = args.seed.unwrap_or(0);
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let suite = standard_suite(seed)?;
    let mut stimuli = Vec::with_capacity(suite.len());
    for item in &suite {
        let entry = SuiteEntry {
            id: item.id.clone(),
            kind: item.kind,
            image: format!("{}.png", item.id).into(),
            mask: format!("{}.mask.png", item.id).into(),
            spec: format!("{}.json", item.id).into(),
        };
        save_rgb(&item.stimulus.image, out.join(&entry.image))?;
        save_mask(&item.stimulus.target_mask, out.join(&entry.mask))?;
        write_json::<StimulusSpec>(&out.join(&entry.spec), &item.spec)?;
        stimuli.push(entry);
    }
    write_json(&out.join("suite.json"), &SuiteManifest { seed, stimuli })?;
    write_warnings(&out.join("warnings.jsonl"), &[])?;
    log::info!("wrote {} stimuli to {}", suite.len(), out.display());
    Ok(())
}
