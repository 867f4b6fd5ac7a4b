use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::DenseMap;

/// Pooled fixation points on one image, in the coordinates of `frame`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixationSet {
    pub image_id: String,
    /// `[height, width]` the points refer to.
    pub frame: [usize; 2],
    /// `[row, col]` pairs.
    pub points: Vec<[f64; 2]>,
}

impl FixationSet {
    pub fn validate(&self) -> Result<()> {
        let [h, w] = self.frame;
        if h == 0 || w == 0 {
            return Err(Error::InvalidShape {
                shape: vec![h, w],
                reason: format!("fixation frame of {:?} must be positive", self.image_id),
            });
        }
        for &[row, col] in &self.points {
            let inside = row.is_finite()
                && col.is_finite()
                && (0.0..h as f64).contains(&row)
                && (0.0..w as f64).contains(&col);
            if !inside {
                return Err(Error::PointOutOfFrame {
                    row,
                    col,
                    height: h,
                    width: w,
                });
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let fs: FixationSet = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        fs.validate()?;
        Ok(fs)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Binary fixation grid of size `target`; each point lands on
/// `floor(p * target / frame)` per axis and collisions collapse.
pub fn rasterize_fixations(fs: &FixationSet, target: (usize, usize)) -> Result<DenseMap> {
    fs.validate()?;
    let (th, tw) = target;
    if th == 0 || tw == 0 {
        return Err(Error::InvalidShape {
            shape: vec![th, tw],
            reason: "raster target must be positive".into(),
        });
    }
    let [fh, fw] = fs.frame;
    let mut cells = vec![0.0; th * tw];
    for &[row, col] in &fs.points {
        let r = scale_coord(row, fh, th);
        let c = scale_coord(col, fw, tw);
        cells[r * tw + c] = 1.0;
    }
    DenseMap::from_vec(th, tw, cells)
}

fn scale_coord(p: f64, frame: usize, target: usize) -> usize {
    let scaled = (p * target as f64 / frame as f64).floor();
    // p < frame guarantees scaled < target up to rounding
    (scaled.max(0.0) as usize).min(target - 1)
}
