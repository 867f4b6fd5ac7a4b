use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::DenseMap;

use super::masks::load_mask;

/// The twelve salient-region categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    PersonHead,
    PersonPart,
    AnimalHead,
    AnimalPart,
    Object,
    Text,
    Symbol,
    Vehicle,
    Food,
    Drink,
    Plant,
    Other,
}

impl Category {
    pub const ALL: [Category; 12] = [
        Category::PersonHead,
        Category::PersonPart,
        Category::AnimalHead,
        Category::AnimalPart,
        Category::Object,
        Category::Text,
        Category::Symbol,
        Category::Vehicle,
        Category::Food,
        Category::Drink,
        Category::Plant,
        Category::Other,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Category::PersonHead => "person head",
            Category::PersonPart => "person part",
            Category::AnimalHead => "animal head",
            Category::AnimalPart => "animal part",
            Category::Object => "object",
            Category::Text => "text",
            Category::Symbol => "symbol",
            Category::Vehicle => "vehicle",
            Category::Food => "food",
            Category::Drink => "drink",
            Category::Plant => "plant",
            Category::Other => "other",
        }
    }

    fn legal_labels() -> String {
        Category::ALL.iter().map(|c| c.label()).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Category::ALL
            .into_iter()
            .find(|c| c.label() == s)
            .ok_or_else(|| Error::UnknownCategory {
                found: s.to_string(),
                expected: Category::legal_labels(),
            })
    }
}

impl Serialize for Category {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for Category {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A labelled salient region of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionAnnotation {
    pub image_id: String,
    pub region_id: i64,
    pub category: Category,
    mask: DenseMap,
}

impl RegionAnnotation {
    pub fn new(image_id: impl Into<String>, region_id: i64, category: Category, mask: DenseMap) -> Result<Self> {
        let image_id = image_id.into();
        if mask.count_nonzero() == 0 {
            return Err(Error::EmptyRegionMask { image_id, region_id });
        }
        let mask = if mask.is_binary() {
            mask
        } else {
            DenseMap::from_fn(mask.height(), mask.width(), |(r, c)| f64::from(mask.get(r, c) != 0.0))?
        };
        Ok(Self {
            image_id,
            region_id,
            category,
            mask,
        })
    }

    pub fn mask(&self) -> &DenseMap {
        &self.mask
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnotationFile {
    pub image_id: String,
    pub regions: Vec<RegionEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionEntry {
    pub region_id: i64,
    pub category: String,
    /// Relative paths resolve against the annotation file's directory.
    pub mask_png: PathBuf,
}

/// Reads an annotation document and its masks. When `image_size` is given,
/// every mask must match it.
pub fn load_annotations(path: impl AsRef<Path>, image_size: Option<(usize, usize)>) -> Result<Vec<RegionAnnotation>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: AnnotationFile = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    doc.regions
        .iter()
        .map(|r| {
            let category: Category = r.category.parse()?;
            let mask_path = base.join(&r.mask_png);
            if !mask_path.exists() {
                return Err(Error::MissingFile {
                    what: format!("mask of region {} in {:?}", r.region_id, doc.image_id),
                    path: mask_path,
                });
            }
            let mask = load_mask(&mask_path)?;
            if let Some(size) = image_size {
                if mask.dims() != size {
                    return Err(Error::ShapeMismatch {
                        expected: size,
                        found: mask.dims(),
                    });
                }
            }
            RegionAnnotation::new(doc.image_id.clone(), r.region_id, category, mask)
        })
        .collect()
}
