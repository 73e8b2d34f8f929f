//! Binary (`P5`) portable graymaps with maxval 255.

use std::fs;
use std::path::Path;

use mixgeo_core::{ImageGrid, Real};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PgmError {
    #[error("not a binary PGM: expected magic \"P5\", found {found:?}")]
    WrongMagic { found: String },
    #[error("malformed PGM header: {0}")]
    MalformedHeader(String),
    #[error("unsupported PGM maxval {0}; only 255 is supported")]
    UnsupportedMaxval(u64),
    #[error("truncated PGM payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&c) = self.bytes.get(self.pos) {
            if c == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u64, PgmError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(PgmError::MalformedHeader(format!("missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| PgmError::MalformedHeader(format!("{what} out of range")))
    }
}

pub fn decode_pgm(bytes: &[u8]) -> Result<ImageGrid<f64>, PgmError> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        let found = String::from_utf8_lossy(&bytes[..bytes.len().min(2)]).into_owned();
        return Err(PgmError::WrongMagic { found });
    }
    let mut cur = Cursor { bytes, pos: 2 };
    if !cur.bytes.get(2).is_some_and(|c| c.is_ascii_whitespace() || *c == b'#') {
        return Err(PgmError::MalformedHeader("no whitespace after magic".into()));
    }
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(PgmError::MalformedHeader(format!("empty image {width}x{height}")));
    }
    if maxval != 255 {
        return Err(PgmError::UnsupportedMaxval(maxval));
    }
    if !cur.bytes.get(cur.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(PgmError::MalformedHeader("no whitespace after maxval".into()));
    }
    let start = cur.pos + 1;
    let expected = usize::try_from(width * height)
        .map_err(|_| PgmError::MalformedHeader("image too large".into()))?;
    let payload = &bytes[start..];
    if payload.len() < expected {
        return Err(PgmError::Truncated { expected, found: payload.len() });
    }
    let data = payload[..expected].iter().map(|&b| f64::from(b)).collect();
    ImageGrid::new(width as usize, height as usize, data).map_err(|e| PgmError::MalformedHeader(e.to_string()))
}

/// Values are clamped to `[0, 255]` and rounded; NaN maps to 0.
pub fn encode_pgm<T: Real>(img: &ImageGrid<T>) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.data().iter().map(|v| {
        let v = v.to_f64_lossy();
        if v.is_nan() {
            0
        } else {
            v.clamp(0.0, 255.0).round() as u8
        }
    }));
    out
}

pub fn read_pgm(path: &Path) -> Result<ImageGrid<f64>, PgmError> {
    decode_pgm(&fs::read(path)?)
}

pub fn write_pgm<T: Real>(img: &ImageGrid<T>, path: &Path) -> Result<(), PgmError> {
    Ok(crate::io::write_atomic(path, &encode_pgm(img))?)
}
