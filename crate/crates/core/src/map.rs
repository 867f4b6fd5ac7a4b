//! Dense single-channel grids and per-layer activation stacks.

use ndarray::{Array2, Array3, ArrayView2, Axis};

use crate::error::{Error, Result};

/// A single-channel `height x width` grid of finite reals.
///
/// Used for activation maps, saliency predictions, ground-truth maps and
/// binary masks alike. Storage is always row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMap {
    values: Array2<f64>,
}

impl DenseMap {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (h, w) = values.dim();
        if h == 0 || w == 0 {
            return Err(Error::InvalidShape {
                shape: vec![h, w],
                reason: "maps need at least one row and one column".into(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dense map".into()));
        }
        let values = if values.is_standard_layout() {
            values
        } else {
            values.as_standard_layout().into_owned()
        };
        Ok(Self { values })
    }

    pub fn from_vec(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        let found = values.len();
        let arr = Array2::from_shape_vec((height, width), values).map_err(|_| Error::InvalidShape {
            shape: vec![height, width],
            reason: format!("{found} values do not fill the grid"),
        })?;
        Self::new(arr)
    }

    /// Builds a map from a closure over `(row, col)`.
    pub fn from_fn(height: usize, width: usize, f: impl FnMut((usize, usize)) -> f64) -> Result<Self> {
        Self::new(Array2::from_shape_fn((height, width), f))
    }

    /// All-zero map. Panics on a zero dimension.
    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    /// Constant map. Panics on a zero dimension or a non-finite value.
    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0, "map dimensions must be positive");
        assert!(value.is_finite(), "fill value must be finite");
        Self {
            values: Array2::from_elem((height, width), value),
        }
    }

    pub fn height(&self) -> usize {
        self.values.nrows()
    }

    pub fn width(&self) -> usize {
        self.values.ncols()
    }

    /// `(height, width)`.
    pub fn dims(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[[row, col]]
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_array(self) -> Array2<f64> {
        self.values
    }

    /// Row-major pixel slice.
    pub fn as_slice(&self) -> &[f64] {
        self.values
            .as_slice()
            .expect("dense maps are kept in standard layout")
    }

    /// Row-major indices of nonzero cells, ascending.
    pub fn nonzero_indices(&self) -> Vec<usize> {
        self.as_slice()
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn count_nonzero(&self) -> usize {
        self.as_slice().iter().filter(|v| **v != 0.0).count()
    }

    pub fn is_binary(&self) -> bool {
        self.as_slice().iter().all(|v| *v == 0.0 || *v == 1.0)
    }

    /// Elementwise AND of two binary grids (nonzero = set).
    pub fn and(&self, other: &DenseMap) -> Result<DenseMap> {
        ensure_same_dims(self, other)?;
        let values = ndarray::Zip::from(&self.values)
            .and(&other.values)
            .map_collect(|a, b| if *a != 0.0 && *b != 0.0 { 1.0 } else { 0.0 });
        Ok(Self { values })
    }

    /// Applies `a * x + b` to every value.
    pub fn affine(&self, a: f64, b: f64) -> Result<DenseMap> {
        Self::new(self.values.mapv(|v| a * v + b))
    }

    pub fn min(&self) -> f64 {
        self.as_slice().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.as_slice().iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.as_slice().iter().sum::<f64>() / self.len() as f64
    }
}

pub(crate) fn ensure_same_dims(a: &DenseMap, b: &DenseMap) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::ShapeMismatch {
            expected: a.dims(),
            found: b.dims(),
        });
    }
    Ok(())
}

/// The `C` activation maps of one layer for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationStack {
    pub image_id: String,
    pub layer: String,
    channels: Vec<DenseMap>,
}

impl ActivationStack {
    pub fn new(image_id: impl Into<String>, layer: impl Into<String>, channels: Vec<DenseMap>) -> Result<Self> {
        let Some(first) = channels.first() else {
            return Err(Error::InvalidShape {
                shape: vec![0],
                reason: "a stack needs at least one channel".into(),
            });
        };
        let dims = first.dims();
        if let Some(bad) = channels.iter().find(|c| c.dims() != dims) {
            return Err(Error::ShapeMismatch {
                expected: dims,
                found: bad.dims(),
            });
        }
        Ok(Self {
            image_id: image_id.into(),
            layer: layer.into(),
            channels,
        })
    }

    /// Splits a `(C, H, W)` array into channels.
    pub fn from_array(image_id: impl Into<String>, layer: impl Into<String>, data: Array3<f64>) -> Result<Self> {
        let channels = data
            .axis_iter(Axis(0))
            .map(|c| DenseMap::new(c.to_owned()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(image_id, layer, channels)
    }

    pub fn to_array(&self) -> Array3<f64> {
        let (h, w) = self.native_size();
        let mut out = Array3::zeros((self.channels.len(), h, w));
        for (mut dst, src) in out.axis_iter_mut(Axis(0)).zip(&self.channels) {
            dst.assign(src.values());
        }
        out
    }

    pub fn channels(&self) -> &[DenseMap] {
        &self.channels
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    /// `(h, w)` of every channel before any resizing.
    pub fn native_size(&self) -> (usize, usize) {
        self.channels[0].dims()
    }

    /// Pixelwise mean over channels.
    pub fn mean_map(&self) -> DenseMap {
        let mut acc = Array2::<f64>::zeros(self.native_size());
        for c in &self.channels {
            acc += c.values();
        }
        acc /= self.channels.len() as f64;
        DenseMap { values: acc }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_and_empty() {
        assert!(matches!(
            DenseMap::from_vec(1, 2, vec![1.0, f64::NAN]),
            Err(Error::NonFinite(_))
        ));
        assert!(DenseMap::from_vec(0, 2, vec![]).is_err());
        assert!(DenseMap::from_vec(2, 2, vec![1.0]).is_err());
    }

    #[test]
    fn stack_requires_uniform_channels() {
        let a = DenseMap::zeros(2, 2);
        let b = DenseMap::zeros(3, 2);
        assert!(matches!(
            ActivationStack::new("i", "l", vec![a.clone(), b]),
            Err(Error::ShapeMismatch { .. })
        ));
        assert!(ActivationStack::new("i", "l", vec![]).is_err());
        let s = ActivationStack::new("i", "l", vec![a.clone(), a]).unwrap();
        assert_eq!(s.to_array().dim(), (2, 2, 2));
    }

    #[test]
    fn and_is_intersection() {
        let a = DenseMap::from_vec(1, 4, vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        let b = DenseMap::from_vec(1, 4, vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(a.and(&b).unwrap().nonzero_indices(), vec![0]);
    }
}
