//! Image loading/saving with sidecar preference, and atomic file writes.

use std::fs;
use std::io;
use std::path::Path;

use anyhow::{bail, Context};
use mixgeo_core::{ImageGrid, Real};

use crate::pgm::{read_pgm, write_pgm};
use crate::sidecar::{read_sidecar, sidecar_path, write_sidecar, EXTENSION};

/// Writes through a sibling temporary file so readers never see partial output.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".part");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

/// Reads an image. A `.mgd` path is read as a sidecar; for a PGM, a sibling
/// sidecar of the same size takes precedence over the quantized pixels.
pub fn load_image(path: &Path) -> anyhow::Result<ImageGrid<f64>> {
    if path.extension().is_some_and(|e| e == EXTENSION) {
        return read_sidecar(path).with_context(|| format!("reading {}", path.display()));
    }
    let pgm = read_pgm(path).with_context(|| format!("reading {}", path.display()))?;
    let side = sidecar_path(path);
    if !side.is_file() {
        return Ok(pgm);
    }
    let real = read_sidecar(&side).with_context(|| format!("reading {}", side.display()))?;
    if !real.same_shape(&pgm) {
        bail!(
            "sidecar {} is {}x{} but {} is {}x{}",
            side.display(),
            real.width(),
            real.height(),
            path.display(),
            pgm.width(),
            pgm.height()
        );
    }
    Ok(real)
}

/// Writes the PGM and its real-valued sidecar.
pub fn save_image<T: Real>(img: &ImageGrid<T>, path: &Path) -> anyhow::Result<()> {
    if path.extension().is_some_and(|e| e == EXTENSION) {
        bail!("output {} must be a PGM path; its sidecar is written alongside", path.display());
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    write_pgm(img, path).with_context(|| format!("writing {}", path.display()))?;
    let side = sidecar_path(path);
    write_sidecar(img, &side).with_context(|| format!("writing {}", side.display()))?;
    Ok(())
}
