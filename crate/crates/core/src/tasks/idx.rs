//! IDX tensor files as distributed with MNIST.
//!
//! Header: two zero bytes, a type byte (only `0x08`, unsigned byte, is
//! supported), a dimension count, then one big-endian `u32` per dimension.
//! The payload is the raw bytes in row-major order.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;
const TYPE_U8: u8 = 0x08;

/// Raw unsigned-byte IDX tensor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxArray {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

pub fn parse_idx(bytes: &[u8]) -> Result<IdxArray> {
    if bytes.len() < 4 {
        return Err(Error::Format("IDX header truncated".into()));
    }
    if bytes[0] != 0 || bytes[1] != 0 {
        return Err(Error::Format(format!(
            "bad IDX magic {:#010x}",
            u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]])
        )));
    }
    if bytes[2] != TYPE_U8 {
        return Err(Error::Format(format!("unsupported IDX type byte {:#04x}", bytes[2])));
    }
    let ndim = bytes[3] as usize;
    if ndim == 0 {
        return Err(Error::Format("IDX file declares zero dimensions".into()));
    }
    let header = 4 + 4 * ndim;
    if bytes.len() < header {
        return Err(Error::Format("IDX dimension table truncated".into()));
    }
    let dims: Vec<usize> = bytes[4..header]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let len = dims
        .iter()
        .try_fold(1usize, |a, &d| a.checked_mul(d))
        .ok_or_else(|| Error::Format("IDX dimensions overflow".into()))?;
    let payload = &bytes[header..];
    if payload.len() < len {
        return Err(Error::Format(format!(
            "IDX payload truncated: {} of {len} bytes",
            payload.len()
        )));
    }
    if payload.len() > len {
        return Err(Error::Format(format!("{} trailing bytes after IDX payload", payload.len() - len)));
    }
    Ok(IdxArray {
        dims,
        data: payload.to_vec(),
    })
}

pub fn write_idx(array: &IdxArray) -> Vec<u8> {
    let mut out = vec![0, 0, TYPE_U8, array.dims.len() as u8];
    for &d in &array.dims {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend_from_slice(&array.data);
    out
}

/// Stack of equally sized grey-scale images with `f64` pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageStack {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<f64>,
}

/// Per-dataset affine normalisation `(p - mean) / std`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Normalisation {
    pub mean: f64,
    pub std: f64,
}

impl ImageStack {
    pub fn from_idx(array: &IdxArray) -> Result<Self> {
        match array.dims.as_slice() {
            &[count, rows, cols] => Ok(Self {
                count,
                rows,
                cols,
                pixels: array.data.iter().map(|&b| f64::from(b) / 255.0).collect(),
            }),
            other => Err(Error::Format(format!("expected 3 image dimensions, got {other:?}"))),
        }
    }

    pub fn image(&self, i: usize) -> &[f64] {
        let size = self.rows * self.cols;
        &self.pixels[i * size..(i + 1) * size]
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.count, self.rows, self.cols)
    }

    pub fn stats(&self) -> Normalisation {
        let n = self.pixels.len().max(1) as f64;
        let mean = self.pixels.iter().sum::<f64>() / n;
        let var = self.pixels.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / n;
        Normalisation {
            mean,
            std: var.sqrt(),
        }
    }

    pub fn normalise(&mut self, norm: Normalisation) {
        let std = if norm.std > 0.0 { norm.std } else { 1.0 };
        self.pixels.iter_mut().for_each(|p| *p = (*p - norm.mean) / std);
    }
}

/// Loads an image file, scales bytes to [0, 1] and normalises to zero mean
/// and unit standard deviation over the file.
pub fn load_idx(path: impl AsRef<Path>) -> Result<ImageStack> {
    let array = parse_idx(&fs::read(path)?)?;
    let mut stack = ImageStack::from_idx(&array)?;
    let stats = stack.stats();
    stack.normalise(stats);
    Ok(stack)
}

pub fn load_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let array = parse_idx(&fs::read(path)?)?;
    if array.dims.len() != 1 {
        return Err(Error::Format(format!("expected 1 label dimension, got {:?}", array.dims)));
    }
    Ok(array.data)
}

/// MNIST image files under `$POPERM_DATA_DIR`, as `(train, test)`, if both exist.
pub fn find_mnist() -> Option<(PathBuf, PathBuf)> {
    let dir = PathBuf::from(std::env::var_os("POPERM_DATA_DIR")?);
    let pick = |names: &[&str]| names.iter().map(|n| dir.join(n)).find(|p| p.is_file());
    let train = pick(&["train-images-idx3-ubyte", "train-images.idx3-ubyte"])?;
    let test = pick(&["t10k-images-idx3-ubyte", "t10k-images.idx3-ubyte"])?;
    Some((train, test))
}
