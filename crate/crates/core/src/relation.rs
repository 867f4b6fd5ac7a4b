//! Output saliency per category, its deviation from ground truth, and the
//! rank correlation between inner-representation and output saliency.
//!
//! Every quantity averages over (image, region) pairs of one category whose
//! fixations-inside-mask set is nonempty; other regions are excluded from
//! the count.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::data_io::{Category, ImageRecord};
use crate::dissection::CategoryStats;
use crate::error::{Error, Result};
use crate::map::{ensure_same_dims, DenseMap};
use crate::metrics::{spearman, znorm, NormalizedMap};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryRelation {
    pub category: Category,
    /// Top-k mean score of the category in the chosen layer, when available.
    pub inner_saliency: Option<f64>,
    pub output_saliency: f64,
    pub output_difference: f64,
    pub regions: usize,
}

/// A region average with its bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionAverage {
    pub value: f64,
    pub regions: usize,
    pub skipped: usize,
}

/// Fixated cells inside each region of `category`, in region-id order; `None`
/// when no fixation falls inside the region.
fn category_cells(record: &ImageRecord, category: Category) -> Result<Vec<Option<Vec<usize>>>> {
    let mut regions: Vec<_> = record.regions.iter().filter(|r| r.category == category).collect();
    regions.sort_by_key(|r| r.region_id);
    regions
        .into_iter()
        .map(|r| {
            let cells = record.fixations.and(r.mask())?.nonzero_indices();
            Ok((!cells.is_empty()).then_some(cells))
        })
        .collect()
}

fn sorted_indices(records: &[ImageRecord]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..records.len()).collect();
    idx.sort_by(|&a, &b| records[a].image_id.cmp(&records[b].image_id));
    idx
}

fn check_len(maps: &[DenseMap], records: &[ImageRecord]) -> Result<()> {
    if maps.len() != records.len() {
        return Err(Error::LengthMismatch {
            left: maps.len(),
            right: records.len(),
        });
    }
    Ok(())
}

/// Visits every usable region of `category`, passing the per-image maps
/// z-scored lazily (only images with a usable region are normalized).
fn for_each_region(
    maps: &[&[DenseMap]],
    records: &[ImageRecord],
    category: Category,
    mut visit: impl FnMut(&[NormalizedMap], &[usize]),
) -> Result<RegionAverage> {
    let mut used = 0;
    let mut skipped = 0;
    for i in sorted_indices(records) {
        let record = &records[i];
        let cells = category_cells(record, category)?;
        if cells.iter().all(Option::is_none) {
            skipped += cells.len();
            continue;
        }
        let normalized = maps
            .iter()
            .map(|m| {
                ensure_same_dims(&record.fixations, &m[i])?;
                znorm(&m[i])
            })
            .collect::<Result<Vec<_>>>()?;
        for c in cells {
            match c {
                Some(c) => {
                    visit(&normalized, &c);
                    used += 1;
                }
                None => skipped += 1,
            }
        }
    }
    if used == 0 {
        return Err(Error::NoUsableRegions(category.to_string()));
    }
    Ok(RegionAverage {
        value: f64::NAN,
        regions: used,
        skipped,
    })
}

/// Mean NSS of the predictions over all usable regions of `category`.
/// `preds[i]` belongs to `records[i]`.
pub fn output_saliency(preds: &[DenseMap], records: &[ImageRecord], category: Category) -> Result<RegionAverage> {
    check_len(preds, records)?;
    let mut sum = 0.0;
    let mut avg = for_each_region(&[preds], records, category, |z, cells| sum += z[0].mean_at(cells))?;
    avg.value = sum / avg.regions as f64;
    Ok(avg)
}

/// Mean absolute difference between the per-region NSS of predictions and of
/// ground-truth maps over all usable regions of `category`.
pub fn output_difference(preds: &[DenseMap], gts: &[DenseMap], records: &[ImageRecord], category: Category) -> Result<RegionAverage> {
    check_len(preds, records)?;
    check_len(gts, records)?;
    let mut sum = 0.0;
    let mut avg = for_each_region(&[preds, gts], records, category, |z, cells| {
        sum += (z[0].mean_at(cells) - z[1].mean_at(cells)).abs();
    })?;
    avg.value = sum / avg.regions as f64;
    Ok(avg)
}

/// Relations for every category that has at least one usable region.
/// `inner` supplies the inner saliency of each category where known.
pub fn relate(preds: &[DenseMap], gts: &[DenseMap], records: &[ImageRecord], inner: &BTreeMap<Category, f64>) -> Result<Vec<CategoryRelation>> {
    let present: BTreeSet<Category> = records.iter().flat_map(|r| r.regions.iter().map(|x| x.category)).collect();
    let mut out = Vec::new();
    for category in present {
        let os = match output_saliency(preds, records, category) {
            Ok(v) => v,
            Err(Error::NoUsableRegions(_)) => continue,
            Err(e) => return Err(e),
        };
        let od = output_difference(preds, gts, records, category)?;
        out.push(CategoryRelation {
            category,
            inner_saliency: inner.get(&category).copied(),
            output_saliency: os.value,
            output_difference: od.value,
            regions: os.regions,
        });
    }
    Ok(out)
}

/// Spearman correlation between inner top-k means and output saliency over
/// the categories present in both lists.
pub fn inner_output_correlation(stats: &[CategoryStats], relations: &[CategoryRelation]) -> Result<f64> {
    let mut inner = BTreeMap::new();
    for s in stats {
        if inner.insert(s.category, s.top_k_mean).is_some() {
            return Err(Error::InvalidConfig(format!(
                "category {} appears more than once; pass the statistics of a single layer",
                s.category
            )));
        }
    }
    correlate(&inner, relations)
}

/// Spearman correlation between the inner saliency stored on each relation
/// and its output saliency; relations without inner saliency are ignored.
pub fn relation_correlation(relations: &[CategoryRelation]) -> Result<f64> {
    let inner: BTreeMap<Category, f64> = relations.iter().filter_map(|r| Some((r.category, r.inner_saliency?))).collect();
    correlate(&inner, relations)
}

fn correlate(inner: &BTreeMap<Category, f64>, relations: &[CategoryRelation]) -> Result<f64> {
    let outer: BTreeMap<Category, f64> = relations.iter().map(|r| (r.category, r.output_saliency)).collect();
    let shared: Vec<Category> = inner.keys().filter(|c| outer.contains_key(c)).copied().collect();
    if shared.len() < 3 {
        return Err(Error::TooFewCategories(shared.len()));
    }
    let xs: Vec<f64> = shared.iter().map(|c| inner[c]).collect();
    let ys: Vec<f64> = shared.iter().map(|c| outer[c]).collect();
    spearman(&xs, &ys)
}
