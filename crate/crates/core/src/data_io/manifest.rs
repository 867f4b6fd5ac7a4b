use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::{ActivationStack, DenseMap};

use super::annotations::{load_annotations, RegionAnnotation};
use super::fixations::{rasterize_fixations, FixationSet};
use super::masks::image_size;
use super::npy::load_stack;

/// One image of a dataset and everything recorded about it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image_id: String,
    pub image: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixations: Option<PathBuf>,
    #[serde(default)]
    pub annotations: Vec<PathBuf>,
    /// Activation dumps keyed by layer name.
    #[serde(default)]
    pub activations: BTreeMap<String, PathBuf>,
}

/// Per-image inputs resolved into grids at image resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub image_id: String,
    pub size: (usize, usize),
    /// Binary fixation grid of `size`.
    pub fixations: DenseMap,
    pub regions: Vec<RegionAnnotation>,
}

impl ManifestEntry {
    pub fn image_size(&self) -> Result<(usize, usize)> {
        image_size(&self.image)
    }

    pub fn load_stack(&self, layer: &str) -> Result<ActivationStack> {
        let path = self.activations.get(layer).ok_or_else(|| Error::MissingLayer {
            image_id: self.image_id.clone(),
            layer: layer.to_string(),
        })?;
        load_stack(path, &self.image_id, layer)
    }

    pub fn load_fixations(&self) -> Result<FixationSet> {
        let path = self.fixations.as_ref().ok_or_else(|| Error::MissingData {
            image_id: self.image_id.clone(),
            what: "fixation file".into(),
        })?;
        FixationSet::load(path)
    }

    /// Loads fixations (rasterized to the image size) and all region annotations.
    pub fn load_record(&self) -> Result<ImageRecord> {
        let size = self.image_size()?;
        let fixations = rasterize_fixations(&self.load_fixations()?, size)?;
        let mut regions = Vec::new();
        for path in &self.annotations {
            regions.extend(load_annotations(path, Some(size))?);
        }
        Ok(ImageRecord {
            image_id: self.image_id.clone(),
            size,
            fixations,
            regions,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    /// Parses a manifest, resolving relative paths against its directory and
    /// checking that every referenced file exists.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut entries: Vec<ManifestEntry> = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for e in &mut entries {
            e.image = base.join(&e.image);
            e.fixations = e.fixations.as_ref().map(|p| base.join(p));
            for a in &mut e.annotations {
                *a = base.join(&*a);
            }
            for p in e.activations.values_mut() {
                *p = base.join(&*p);
            }
        }
        let manifest = Self { entries };
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for e in &self.entries {
            if !seen.insert(e.image_id.as_str()) {
                return Err(Error::DuplicateImageId(e.image_id.clone()));
            }
            let check = |what: String, p: &Path| {
                if p.exists() {
                    Ok(())
                } else {
                    Err(Error::MissingFile {
                        what,
                        path: p.to_path_buf(),
                    })
                }
            };
            check(format!("image of {:?}", e.image_id), &e.image)?;
            if let Some(f) = &e.fixations {
                check(format!("fixations of {:?}", e.image_id), f)?;
            }
            for a in &e.annotations {
                check(format!("annotations of {:?}", e.image_id), a)?;
            }
            for (layer, p) in &e.activations {
                check(format!("layer {layer} of {:?}", e.image_id), p)?;
            }
        }
        Ok(())
    }

    /// Writes the manifest with paths made relative to its directory where possible.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new("."));
        let rel = |p: &Path| p.strip_prefix(base).map(Path::to_path_buf).unwrap_or_else(|_| p.to_path_buf());
        let entries: Vec<ManifestEntry> = self
            .entries
            .iter()
            .map(|e| ManifestEntry {
                image_id: e.image_id.clone(),
                image: rel(&e.image),
                fixations: e.fixations.as_deref().map(rel),
                annotations: e.annotations.iter().map(|a| rel(a)).collect(),
                activations: e.activations.iter().map(|(k, v)| (k.clone(), rel(v))).collect(),
            })
            .collect();
        let text = serde_json::to_string_pretty(&entries).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Entries sorted by image id.
    pub fn sorted_entries(&self) -> Vec<&ManifestEntry> {
        let mut v: Vec<&ManifestEntry> = self.entries.iter().collect();
        v.sort_by(|a, b| a.image_id.cmp(&b.image_id));
        v
    }

    pub fn find(&self, image_id: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.image_id == image_id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_paths_resolve_and_missing_files_fail() {
        let dir = tempfile::tempdir().unwrap();
        let img = image::GrayImage::new(4, 3);
        img.save(dir.path().join("a.png")).unwrap();
        let mpath = dir.path().join("manifest.json");
        std::fs::write(&mpath, r#"[{"image_id": "a", "image": "a.png"}]"#).unwrap();
        let m = DatasetManifest::load(&mpath).unwrap();
        assert_eq!(m.entries[0].image, dir.path().join("a.png"));
        assert_eq!(m.entries[0].image_size().unwrap(), (3, 4));

        std::fs::write(&mpath, r#"[{"image_id": "a", "image": "a.png", "activations": {"conv5-3": "nope.npy"}}]"#).unwrap();
        let err = DatasetManifest::load(&mpath).unwrap_err();
        assert!(err.to_string().contains("conv5-3"), "{err}");
    }

    #[test]
    fn duplicate_ids_fail() {
        let dir = tempfile::tempdir().unwrap();
        image::GrayImage::new(2, 2).save(dir.path().join("a.png")).unwrap();
        let mpath = dir.path().join("manifest.json");
        std::fs::write(
            &mpath,
            r#"[{"image_id": "a", "image": "a.png"}, {"image_id": "a", "image": "a.png"}]"#,
        )
        .unwrap();
        assert!(matches!(DatasetManifest::load(&mpath), Err(Error::DuplicateImageId(_))));
    }

    #[test]
    fn missing_layer_is_named() {
        let e = ManifestEntry {
            image_id: "x".into(),
            image: "x.png".into(),
            fixations: None,
            annotations: vec![],
            activations: BTreeMap::new(),
        };
        let err = e.load_stack("conv4-3").unwrap_err().to_string();
        assert!(err.contains("conv4-3") && err.contains("\"x\""), "{err}");
    }
}
