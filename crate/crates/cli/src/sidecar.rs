//! Raw real-valued image sidecar: a 16-byte header (`MGD0`, width, height,
//! reserved zero; all `u32` little-endian) followed by row-major `f64` LE.

use std::fs;
use std::path::{Path, PathBuf};

use mixgeo_core::{ImageGrid, Real};
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"MGD0";
pub const HEADER_LEN: usize = 16;
pub const EXTENSION: &str = "mgd";

#[derive(Debug, Error)]
pub enum SidecarError {
    #[error("not a sidecar: expected magic \"MGD0\"")]
    WrongMagic,
    #[error("sidecar header truncated ({0} bytes)")]
    TruncatedHeader(usize),
    #[error("sidecar reserved field is {0}, expected 0")]
    Reserved(u32),
    #[error("sidecar payload has {found} bytes, expected {expected}")]
    PayloadLength { expected: usize, found: usize },
    #[error("invalid sidecar image: {0}")]
    Image(#[from] mixgeo_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `img.pgm` -> `img.mgd`.
pub fn sidecar_path(image: &Path) -> PathBuf {
    image.with_extension(EXTENSION)
}

pub fn encode_sidecar<T: Real>(img: &ImageGrid<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * img.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(img.width() as u32).to_le_bytes());
    out.extend_from_slice(&(img.height() as u32).to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    for v in img.data() {
        out.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
    }
    out
}

pub fn decode_sidecar(bytes: &[u8]) -> Result<ImageGrid<f64>, SidecarError> {
    if bytes.len() < HEADER_LEN {
        return Err(if bytes.len() >= 4 && &bytes[..4] != MAGIC {
            SidecarError::WrongMagic
        } else {
            SidecarError::TruncatedHeader(bytes.len())
        });
    }
    if &bytes[..4] != MAGIC {
        return Err(SidecarError::WrongMagic);
    }
    let word = |k: usize| u32::from_le_bytes(bytes[4 * k..4 * k + 4].try_into().unwrap());
    let (width, height, reserved) = (word(1) as usize, word(2) as usize, word(3));
    if reserved != 0 {
        return Err(SidecarError::Reserved(reserved));
    }
    let payload = &bytes[HEADER_LEN..];
    let expected = width * height * 8;
    if payload.len() != expected {
        return Err(SidecarError::PayloadLength { expected, found: payload.len() });
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(ImageGrid::new(width, height, data)?)
}

pub fn read_sidecar(path: &Path) -> Result<ImageGrid<f64>, SidecarError> {
    decode_sidecar(&fs::read(path)?)
}

pub fn write_sidecar<T: Real>(img: &ImageGrid<T>, path: &Path) -> Result<(), SidecarError> {
    Ok(crate::io::write_atomic(path, &encode_sidecar(img))?)
}
