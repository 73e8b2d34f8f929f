//! Synthetic clean test images. Intensities stay inside `[30, 220]` so that
//! noisy versions remain comfortably positive.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::grid::ImageGrid;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phantom {
    /// Smooth radial bump.
    Halo,
    /// Smooth concentric rings.
    Dartboard,
    /// Piecewise-constant rectangle, disk and triangle.
    Shapes,
}

impl Phantom {
    pub const ALL: [Phantom; 3] = [Phantom::Halo, Phantom::Dartboard, Phantom::Shapes];

    pub fn name(self) -> &'static str {
        match self {
            Phantom::Halo => "halo",
            Phantom::Dartboard => "dartboard",
            Phantom::Shapes => "shapes",
        }
    }
}

impl fmt::Display for Phantom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Phantom {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Phantom::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| invalid("phantom", "expected halo, dartboard or shapes"))
    }
}

pub fn phantom<T: Real>(kind: Phantom, width: usize, height: usize) -> Result<ImageGrid<T>> {
    if width == 0 || height == 0 {
        return Err(invalid("size", "width and height must be positive"));
    }
    let (w, h) = (width as f64, height as f64);
    let scale = w.min(h);
    let norm = |x: usize, y: usize| {
        let cx = (x as f64 + 0.5 - 0.5 * w) / scale;
        let cy = (y as f64 + 0.5 - 0.5 * h) / scale;
        (cx, cy)
    };
    let img = match kind {
        Phantom::Halo => ImageGrid::from_fn(width, height, |x, y| {
            let (cx, cy) = norm(x, y);
            let r2 = cx * cx + cy * cy;
            T::lit(40.0 + 170.0 * (-r2 / (2.0 * 0.2 * 0.2)).exp())
        }),
        Phantom::Dartboard => ImageGrid::from_fn(width, height, |x, y| {
            let (cx, cy) = norm(x, y);
            let r = (cx * cx + cy * cy).sqrt();
            T::lit(125.0 + 80.0 * (2.0 * std::f64::consts::PI * r / 0.25).cos())
        }),
        Phantom::Shapes => ImageGrid::from_fn(width, height, |x, y| {
            let (cx, cy) = norm(x, y);
            let v = if (cx + 0.15).powi(2) + (cy - 0.15).powi(2) < 0.2 * 0.2 {
                120.0
            } else if (-0.4..-0.05).contains(&cx) && (-0.4..-0.1).contains(&cy) {
                190.0
            } else if cy > 0.0 && cy < 0.4 && (cx - 0.25).abs() < 0.5 * (0.4 - cy) * 0.8 && cx > 0.05 {
                210.0
            } else {
                50.0
            };
            T::lit(v)
        }),
    };
    Ok(img)
}
