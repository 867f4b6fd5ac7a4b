//! On-disk artifacts: tensors, masks, fixations, annotations and manifests.

mod annotations;
mod fixations;
mod manifest;
mod masks;
mod npy;

pub use annotations::{load_annotations, AnnotationFile, Category, RegionAnnotation, RegionEntry};
pub use fixations::{rasterize_fixations, FixationSet};
pub use manifest::{DatasetManifest, ImageRecord, ManifestEntry};
pub use masks::{image_size, load_mask, load_rgb, save_heatmap, save_mask, save_rgb};
pub use npy::{load_map, load_stack, load_tensor, load_vector, save_map, save_stack, save_tensor, save_vector, Tensor};
