//! Per-category statistics of activation maps scored against annotated regions.
//!
//! Every channel of a layer is resized to image resolution, z-scored over the
//! whole map, and sampled at the fixations inside each region mask. A
//! channel's score for a category is the mean over all usable regions of
//! that category across the dataset; channels are then ranked by that score.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::data_io::{Category, DatasetManifest, ImageRecord, RegionAnnotation};
use crate::error::{Error, Result};
use crate::map::{ensure_same_dims, ActivationStack, DenseMap};
use crate::metrics::{nmm, nss, znorm};
use crate::resize::Resampler;
use crate::warning::Warning;

#[derive(Debug, Clone, PartialEq)]
pub struct DissectionConfig {
    pub layers: Vec<String>,
    pub top_k: usize,
    pub threshold: f64,
    pub min_regions_per_category: usize,
}

impl Default for DissectionConfig {
    fn default() -> Self {
        Self {
            layers: Vec::new(),
            top_k: 10,
            threshold: 1.5,
            min_regions_per_category: 1,
        }
    }
}

impl DissectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidConfig("no layers requested".into()));
        }
        if self.top_k == 0 {
            return Err(Error::InvalidConfig("top_k must be at least 1".into()));
        }
        if self.threshold.is_nan() {
            return Err(Error::InvalidConfig("threshold must not be NaN".into()));
        }
        Ok(())
    }
}

/// Score of one activation map on one region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegionScore {
    Value(f64),
    /// No fixation falls inside the region.
    NoFixationsInRegion,
    /// The resized channel is constant.
    ConstantMap,
}

impl RegionScore {
    pub fn value(self) -> Option<f64> {
        match self {
            RegionScore::Value(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryStats {
    pub layer: String,
    pub category: Category,
    /// Mean region score per channel; `None` when the channel had no usable score.
    pub per_map_mean_nss: Vec<Option<f64>>,
    /// Channels contributing to `top_k_mean`, best first.
    pub top_k_channels: Vec<usize>,
    pub top_k_mean: f64,
    pub count_above_threshold: usize,
    pub regions_used: usize,
    pub regions_skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DissectionReport {
    pub stats: Vec<CategoryStats>,
    pub warnings: Vec<Warning>,
}

/// Ranks scored channels by value (descending), ties to the lower index.
pub fn rank_channels(scores: &[Option<f64>]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).filter(|&j| scores[j].is_some()).collect();
    idx.sort_by(|&a, &b| {
        let (va, vb) = (scores[a].unwrap(), scores[b].unwrap());
        vb.total_cmp(&va).then(a.cmp(&b))
    });
    idx
}

/// Mean of the `k` best scored channels (all of them when fewer than `k`).
pub fn top_k_mean(scores: &[Option<f64>], k: usize) -> Option<(f64, Vec<usize>)> {
    let ranked = rank_channels(scores);
    if ranked.is_empty() {
        return None;
    }
    let chosen: Vec<usize> = ranked.into_iter().take(k).collect();
    let mean = chosen.iter().map(|&j| scores[j].unwrap()).sum::<f64>() / chosen.len() as f64;
    Some((mean, chosen))
}

fn region_cells(fixations: &DenseMap, regions: &[RegionAnnotation], image_size: (usize, usize)) -> Result<Vec<Vec<usize>>> {
    if fixations.dims() != image_size {
        return Err(Error::ShapeMismatch {
            expected: image_size,
            found: fixations.dims(),
        });
    }
    regions
        .iter()
        .map(|r| {
            ensure_same_dims(fixations, r.mask())?;
            Ok(fixations.and(r.mask())?.nonzero_indices())
        })
        .collect()
}

fn score_channels(stack: &ActivationStack, cells: &[Vec<usize>], image_size: (usize, usize)) -> Vec<Vec<RegionScore>> {
    let resampler = Resampler::new(stack.native_size(), image_size);
    stack
        .channels()
        .par_iter()
        .map(|channel| {
            let z = znorm(&resampler.apply_map(channel));
            cells
                .iter()
                .map(|c| match (&z, c.is_empty()) {
                    (_, true) => RegionScore::NoFixationsInRegion,
                    (Err(_), false) => RegionScore::ConstantMap,
                    (Ok(z), false) => RegionScore::Value(z.mean_at(c)),
                })
                .collect()
        })
        .collect()
}

/// Scores every channel of `stack` on every region: entry `[j][k]` is the
/// association of channel `j` with region `k`.
pub fn per_map_region_nss(
    stack: &ActivationStack,
    fixations: &DenseMap,
    regions: &[RegionAnnotation],
    image_size: (usize, usize),
) -> Result<Vec<Vec<RegionScore>>> {
    let cells = region_cells(fixations, regions, image_size)?;
    Ok(score_channels(stack, &cells, image_size))
}

#[derive(Debug, Clone, Default)]
struct CategoryAccumulator {
    sums: Vec<f64>,
    counts: Vec<usize>,
    regions_used: usize,
    regions_skipped: usize,
}

#[derive(Debug, Default)]
struct LayerAccumulator {
    channels: Option<usize>,
    categories: BTreeMap<Category, CategoryAccumulator>,
    constant_pairs: usize,
}

impl LayerAccumulator {
    fn add(&mut self, stack: &ActivationStack, record: &ImageRecord) -> Result<()> {
        let c = stack.num_channels();
        match self.channels {
            Some(expected) if expected != c => {
                return Err(Error::ChannelMismatch { expected, found: c });
            }
            _ => self.channels = Some(c),
        }
        let mut order: Vec<usize> = (0..record.regions.len()).collect();
        order.sort_by_key(|&k| (record.regions[k].region_id, record.regions[k].category));
        let regions: Vec<RegionAnnotation> = order.iter().map(|&k| record.regions[k].clone()).collect();
        let cells = region_cells(&record.fixations, &regions, record.size)?;
        let scores = score_channels(stack, &cells, record.size);

        for (k, region) in regions.iter().enumerate() {
            let acc = self.categories.entry(region.category).or_insert_with(|| CategoryAccumulator {
                sums: vec![0.0; c],
                counts: vec![0; c],
                ..Default::default()
            });
            if cells[k].is_empty() {
                acc.regions_skipped += 1;
                continue;
            }
            acc.regions_used += 1;
            for (j, row) in scores.iter().enumerate() {
                match row[k] {
                    RegionScore::Value(v) => {
                        acc.sums[j] += v;
                        acc.counts[j] += 1;
                    }
                    RegionScore::ConstantMap => self.constant_pairs += 1,
                    RegionScore::NoFixationsInRegion => unreachable!("empty regions are skipped above"),
                }
            }
        }
        Ok(())
    }

    fn finish(self, layer: &str, cfg: &DissectionConfig, report: &mut DissectionReport) {
        if self.constant_pairs > 0 {
            report.warnings.push(Warning::new(
                "constant_map",
                format!("layer {layer}: {} (channel, region) pairs skipped on constant channels", self.constant_pairs),
            ));
        }
        for (category, acc) in self.categories {
            if acc.regions_used < cfg.min_regions_per_category.max(1) {
                report.warnings.push(Warning::new(
                    "category_omitted",
                    format!(
                        "layer {layer}, category {category}: {} usable regions ({} skipped), need {}",
                        acc.regions_used,
                        acc.regions_skipped,
                        cfg.min_regions_per_category.max(1)
                    ),
                ));
                continue;
            }
            let per_map: Vec<Option<f64>> = acc
                .sums
                .iter()
                .zip(&acc.counts)
                .map(|(s, n)| (*n > 0).then(|| s / *n as f64))
                .collect();
            let Some((top_mean, top_channels)) = top_k_mean(&per_map, cfg.top_k) else {
                report.warnings.push(Warning::new(
                    "category_omitted",
                    format!("layer {layer}, category {category}: every channel is constant"),
                ));
                continue;
            };
            let count_above = per_map.iter().flatten().filter(|v| **v > cfg.threshold).count();
            report.stats.push(CategoryStats {
                layer: layer.to_string(),
                category,
                per_map_mean_nss: per_map,
                top_k_channels: top_channels,
                top_k_mean: top_mean,
                count_above_threshold: count_above,
                regions_used: acc.regions_used,
                regions_skipped: acc.regions_skipped,
            });
        }
    }
}

/// An image record together with its activation stacks, one per layer.
#[derive(Debug, Clone)]
pub struct DissectionSample {
    pub record: ImageRecord,
    pub stacks: Vec<ActivationStack>,
}

impl DissectionSample {
    fn stack(&self, layer: &str) -> Result<&ActivationStack> {
        self.stacks.iter().find(|s| s.layer == layer).ok_or_else(|| Error::MissingLayer {
            image_id: self.record.image_id.clone(),
            layer: layer.to_string(),
        })
    }
}

/// Category statistics over in-memory samples. The result does not depend
/// on sample order.
pub fn category_stats_for(samples: &[DissectionSample], cfg: &DissectionConfig) -> Result<DissectionReport> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::EmptyManifest);
    }
    let mut order: Vec<&DissectionSample> = samples.iter().collect();
    order.sort_by(|a, b| a.record.image_id.cmp(&b.record.image_id));
    let mut report = DissectionReport::default();
    for layer in &cfg.layers {
        let mut acc = LayerAccumulator::default();
        for s in &order {
            acc.add(s.stack(layer)?, &s.record)?;
        }
        acc.finish(layer, cfg, &mut report);
    }
    Ok(report)
}

/// Category statistics over a manifest, streaming one image at a time.
pub fn category_stats(manifest: &DatasetManifest, cfg: &DissectionConfig) -> Result<DissectionReport> {
    cfg.validate()?;
    if manifest.is_empty() {
        return Err(Error::EmptyManifest);
    }
    let entries = manifest.sorted_entries();
    // fail fast on missing layers before any heavy work
    for e in &entries {
        for layer in &cfg.layers {
            if !e.activations.contains_key(layer) {
                return Err(Error::MissingLayer {
                    image_id: e.image_id.clone(),
                    layer: layer.clone(),
                });
            }
        }
    }
    let mut accs: Vec<LayerAccumulator> = cfg.layers.iter().map(|_| LayerAccumulator::default()).collect();
    for e in entries {
        let record = e.load_record()?;
        for (layer, acc) in cfg.layers.iter().zip(accs.iter_mut()) {
            acc.add(&e.load_stack(layer)?, &record)?;
        }
    }
    let mut report = DissectionReport::default();
    for (layer, acc) in cfg.layers.iter().zip(accs) {
        acc.finish(layer, cfg, &mut report);
    }
    Ok(report)
}

/// NSS of the channel-mean activation map, resized to image resolution.
pub fn layer_mean_nss(stack: &ActivationStack, fixations: &DenseMap, image_size: (usize, usize)) -> Result<f64> {
    if fixations.dims() != image_size {
        return Err(Error::ShapeMismatch {
            expected: image_size,
            found: fixations.dims(),
        });
    }
    let resampler = Resampler::new(stack.native_size(), image_size);
    let mut acc = ndarray::Array2::<f64>::zeros(image_size);
    for c in stack.channels() {
        acc += &resampler.apply(c.values());
    }
    acc /= stack.num_channels() as f64;
    nss(&DenseMap::new(acc)?, fixations)
}

/// Per-layer NMM statistics on synthetic stimuli.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNmmStats {
    pub layer: String,
    /// Mean NMM per channel over images; `None` when every image was skipped.
    pub per_map_mean_nmm: Vec<Option<f64>>,
    pub top_k_channels: Vec<usize>,
    /// `None` reports "no usable maps".
    pub top_k_mean: Option<f64>,
    pub skipped_pairs: usize,
}

/// For each layer: mean NMM of every channel over the images, then the mean
/// of the `top_k` best channels. `stacks[i]` pairs with `masks[i]`.
pub fn synthetic_layer_stats(layers: &[(String, Vec<ActivationStack>)], masks: &[DenseMap], top_k: usize) -> Result<Vec<LayerNmmStats>> {
    if top_k == 0 {
        return Err(Error::InvalidConfig("top_k must be at least 1".into()));
    }
    layers
        .iter()
        .map(|(layer, stacks)| {
            if stacks.len() != masks.len() {
                return Err(Error::LengthMismatch {
                    left: stacks.len(),
                    right: masks.len(),
                });
            }
            let c = stacks.first().map(ActivationStack::num_channels).unwrap_or(0);
            let mut sums = vec![0.0; c];
            let mut counts = vec![0usize; c];
            let mut skipped = 0;
            for (stack, mask) in stacks.iter().zip(masks) {
                if stack.num_channels() != c {
                    return Err(Error::ChannelMismatch {
                        expected: c,
                        found: stack.num_channels(),
                    });
                }
                let resampler = Resampler::new(stack.native_size(), mask.dims());
                let values: Vec<Result<f64>> = stack
                    .channels()
                    .par_iter()
                    .map(|ch| nmm(&resampler.apply_map(ch), mask))
                    .collect();
                for (j, v) in values.into_iter().enumerate() {
                    match v {
                        Ok(v) => {
                            sums[j] += v;
                            counts[j] += 1;
                        }
                        Err(Error::ConstantMap | Error::EmptyMask) => skipped += 1,
                        Err(e) => return Err(e),
                    }
                }
            }
            let per_map: Vec<Option<f64>> = sums.iter().zip(&counts).map(|(s, n)| (*n > 0).then(|| s / *n as f64)).collect();
            let (top_mean, top_channels) = match top_k_mean(&per_map, top_k) {
                Some((m, ch)) => (Some(m), ch),
                None => (None, Vec::new()),
            };
            Ok(LayerNmmStats {
                layer: layer.clone(),
                per_map_mean_nmm: per_map,
                top_k_channels: top_channels,
                top_k_mean: top_mean,
                skipped_pairs: skipped,
            })
        })
        .collect()
}
