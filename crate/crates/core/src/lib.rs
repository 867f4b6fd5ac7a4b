//! Dissection toolkit for deep visual-saliency models.
//!
//! Scores individual CNN activation maps against annotated salient regions,
//! trains a linear 1x1 saliency readout on frozen features, generates
//! pop-out search arrays and evaluates models on them, and relates
//! inner-representation saliency to output saliency.

pub mod bms;
pub mod data_io;
pub mod decoder;
pub mod dissection;
pub mod error;
pub mod map;
pub mod metrics;
pub mod relation;
pub mod resize;
pub mod stimgen;
pub mod warning;

pub use data_io::Category;
pub use error::{Error, Result};
pub use map::{ActivationStack, DenseMap};
pub use warning::Warning;
