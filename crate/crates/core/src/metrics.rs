//! Scalar saliency metrics.
//!
//! All metrics z-score the map over every pixel (population standard
//! deviation) before sampling it at fixated or masked cells.

use crate::error::{Error, Result};
use crate::map::{ensure_same_dims, DenseMap};
use crate::resize::Resampler;

/// Population std at or below this marks a map as constant.
pub const CONSTANT_EPSILON: f64 = 1e-12;

/// A map with zero mean and unit population standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedMap(DenseMap);

impl NormalizedMap {
    pub fn map(&self) -> &DenseMap {
        &self.0
    }

    pub fn into_map(self) -> DenseMap {
        self.0
    }

    /// Mean over the given row-major cell indices, summed in the order given.
    pub fn mean_at(&self, indices: &[usize]) -> f64 {
        let v = self.0.as_slice();
        indices.iter().map(|&i| v[i]).sum::<f64>() / indices.len() as f64
    }
}

/// Population mean and standard deviation, two-pass.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn znorm(m: &DenseMap) -> Result<NormalizedMap> {
    let (mean, std) = mean_std(m.as_slice());
    if m.len() < 2 || std <= CONSTANT_EPSILON {
        return Err(Error::ConstantMap);
    }
    let values = m.values().mapv(|v| (v - mean) / std);
    Ok(NormalizedMap(DenseMap::new(values)?))
}

/// Normalized scanpath saliency: mean of the z-scored map at fixated cells.
pub fn nss(saliency: &DenseMap, fixations: &DenseMap) -> Result<f64> {
    ensure_same_dims(saliency, fixations)?;
    let cells = fixations.nonzero_indices();
    if cells.is_empty() {
        return Err(Error::EmptyFixations);
    }
    Ok(znorm(saliency)?.mean_at(&cells))
}

/// NSS of an activation map restricted to the fixations inside one region mask.
pub fn assoc(actm: &DenseMap, fixations: &DenseMap, mask: &DenseMap) -> Result<f64> {
    ensure_same_dims(actm, fixations)?;
    ensure_same_dims(actm, mask)?;
    let restricted = fixations.and(mask)?;
    if restricted.count_nonzero() == 0 {
        return Err(Error::NoFixationsInRegion);
    }
    nss(actm, &restricted)
}

/// Normalized mean under mask: mean of the z-scored prediction over mask cells.
pub fn nmm(pred: &DenseMap, mask: &DenseMap) -> Result<f64> {
    ensure_same_dims(pred, mask)?;
    let cells = mask.nonzero_indices();
    if cells.is_empty() {
        return Err(Error::EmptyMask);
    }
    Ok(znorm(pred)?.mean_at(&cells))
}

/// Bilinear resize with corner-aligned sampling.
pub fn resize_map(m: &DenseMap, target: (usize, usize)) -> DenseMap {
    if m.dims() == target {
        return m.clone();
    }
    Resampler::new(m.dims(), target).apply_map(m)
}

/// Fractional ranks starting at 1; ties share the average of their positions.
pub fn fractional_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && xs[order[end]] == xs[order[start]] {
            end += 1;
        }
        // positions start..end are 0-based; ranks are 1-based
        let avg = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Spearman rank correlation (Pearson correlation of fractional ranks).
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.len() < 3 {
        return Err(Error::TooFewValues {
            required: 3,
            found: xs.len(),
        });
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("spearman input".into()));
    }
    let (rx, ry) = (fractional_ranks(xs), fractional_ranks(ys));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedRanks);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}
