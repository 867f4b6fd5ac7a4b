//! `.npy` tensor interchange: rank-2 `(H, W)` maps and rank-3 `(C, H, W)`
//! stacks, written as version 1.0 little-endian float32 in C order.

use std::path::Path;

use ndarray::{Array1, Array2, Array3, ArrayD, Ix2, Ix3};
use ndarray_npy::{ReadNpyError, ReadNpyExt, WriteNpyExt};

use crate::error::{Error, Result};
use crate::map::{ActivationStack, DenseMap};

/// A decoded tensor file.
#[derive(Debug, Clone, PartialEq)]
pub enum Tensor {
    Map(DenseMap),
    Stack(Vec<DenseMap>),
}

impl Tensor {
    pub fn shape(&self) -> Vec<usize> {
        match self {
            Tensor::Map(m) => vec![m.height(), m.width()],
            Tensor::Stack(cs) => vec![cs.len(), cs[0].height(), cs[0].width()],
        }
    }
}

fn npy_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Npy {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Reads raw values as f64 regardless of whether the file holds `<f4` or `<f8`.
fn read_dyn(path: &Path) -> Result<ArrayD<f64>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    match ArrayD::<f32>::read_npy(bytes.as_slice()) {
        Ok(a) => return Ok(a.mapv(f64::from)),
        Err(ReadNpyError::WrongDescriptor(_)) => {}
        Err(e) => return Err(npy_err(path, e.to_string())),
    }
    match ArrayD::<f64>::read_npy(bytes.as_slice()) {
        Ok(a) => Ok(a),
        Err(ReadNpyError::WrongDescriptor(d)) => Err(npy_err(
            path,
            format!("unsupported dtype {d}; expected 32- or 64-bit float"),
        )),
        Err(e) => Err(npy_err(path, e.to_string())),
    }
}

/// Loads a rank-2 file as a map or a rank-3 file as a list of channels.
pub fn load_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let data = read_dyn(path)?;
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(path.display().to_string()));
    }
    let shape = data.shape().to_vec();
    if shape.iter().any(|&d| d == 0) {
        return Err(Error::InvalidShape {
            shape,
            reason: "zero-sized dimension".into(),
        });
    }
    match shape.len() {
        2 => {
            let a = data.into_dimensionality::<Ix2>().expect("rank checked");
            Ok(Tensor::Map(DenseMap::new(a)?))
        }
        3 => {
            let a = data.into_dimensionality::<Ix3>().expect("rank checked");
            let stack = ActivationStack::from_array("", "", a)?;
            Ok(Tensor::Stack(stack.channels().to_vec()))
        }
        _ => Err(Error::InvalidShape {
            shape,
            reason: "rank must be 2 (H, W) or 3 (C, H, W)".into(),
        }),
    }
}

pub fn load_map(path: impl AsRef<Path>) -> Result<DenseMap> {
    let path = path.as_ref();
    match load_tensor(path)? {
        Tensor::Map(m) => Ok(m),
        Tensor::Stack(cs) => Err(Error::InvalidShape {
            shape: vec![cs.len(), cs[0].height(), cs[0].width()],
            reason: format!("{} holds a stack; a single map was expected", path.display()),
        }),
    }
}

/// Loads a stack; a rank-2 file is accepted as a single-channel stack.
pub fn load_stack(path: impl AsRef<Path>, image_id: &str, layer: &str) -> Result<ActivationStack> {
    let channels = match load_tensor(path)? {
        Tensor::Map(m) => vec![m],
        Tensor::Stack(cs) => cs,
    };
    ActivationStack::new(image_id, layer, channels)
}

fn write_array<T: WriteNpyExt>(path: &Path, array: &T) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    array
        .write_npy(std::io::BufWriter::new(file))
        .map_err(|e| npy_err(path, e.to_string()))
}

pub fn save_map(map: &DenseMap, path: impl AsRef<Path>) -> Result<()> {
    let a: Array2<f32> = map.values().mapv(|v| v as f32);
    write_array(path.as_ref(), &a)
}

pub fn save_stack(stack: &ActivationStack, path: impl AsRef<Path>) -> Result<()> {
    let a: Array3<f32> = stack.to_array().mapv(|v| v as f32);
    write_array(path.as_ref(), &a)
}

pub fn save_tensor(tensor: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    match tensor {
        Tensor::Map(m) => save_map(m, path),
        Tensor::Stack(cs) => save_stack(&ActivationStack::new("", "", cs.clone())?, path),
    }
}

/// Rank-1 float32 vector, used for decoder weights.
pub fn save_vector(values: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let a: Array1<f32> = values.iter().map(|v| *v as f32).collect();
    write_array(path.as_ref(), &a)
}

pub fn load_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let data = read_dyn(path)?;
    if data.ndim() != 1 {
        return Err(Error::InvalidShape {
            shape: data.shape().to_vec(),
            reason: "expected a rank-1 vector".into(),
        });
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(path.display().to_string()));
    }
    Ok(data.iter().copied().collect())
}
