//! PSNR and SSIM on the `[0, 255]` intensity scale.
//!
//! Statistics are accumulated in `f64` regardless of the image scalar type.

use crate::error::Result;
use crate::grid::ImageGrid;
use crate::scalar::Real;

pub const PEAK: f64 = 255.0;
pub const SSIM_C1: f64 = (0.01 * PEAK) * (0.01 * PEAK);
pub const SSIM_C2: f64 = (0.03 * PEAK) * (0.03 * PEAK);
pub const SSIM_WINDOW: usize = 8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SsimMode {
    /// Mean over all `8x8` windows, stride 1, uniform weights.
    #[default]
    Windowed,
    /// One window covering the whole image.
    Global,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QualityReport {
    /// `+inf` when the images are identical.
    pub psnr_db: f64,
    pub ssim: f64,
}

pub fn mse<T: Real>(reference: &ImageGrid<T>, candidate: &ImageGrid<T>) -> Result<f64> {
    reference.check_same_shape(candidate)?;
    let sum: f64 = reference
        .data()
        .iter()
        .zip(candidate.data())
        .map(|(&a, &b)| {
            let d = a.to_f64_lossy() - b.to_f64_lossy();
            d * d
        })
        .sum();
    Ok(sum / reference.len() as f64)
}

/// `10 log10(255^2 / MSE)`.
pub fn psnr<T: Real>(reference: &ImageGrid<T>, candidate: &ImageGrid<T>) -> Result<f64> {
    let m = mse(reference, candidate)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (PEAK * PEAK / m).log10())
}

pub fn ssim<T: Real>(reference: &ImageGrid<T>, candidate: &ImageGrid<T>) -> Result<f64> {
    ssim_with_mode(reference, candidate, SsimMode::Windowed)
}

pub fn ssim_with_mode<T: Real>(reference: &ImageGrid<T>, candidate: &ImageGrid<T>, mode: SsimMode) -> Result<f64> {
    reference.check_same_shape(candidate)?;
    let (w, h) = (reference.width(), reference.height());
    let (win_w, win_h) = match mode {
        SsimMode::Windowed => (SSIM_WINDOW.min(w), SSIM_WINDOW.min(h)),
        SsimMode::Global => (w, h),
    };
    let a: Vec<f64> = reference.data().iter().map(|v| v.to_f64_lossy()).collect();
    let b: Vec<f64> = candidate.data().iter().map(|v| v.to_f64_lossy()).collect();
    let sat = |f: &dyn Fn(usize) -> f64| SummedArea::new(w, h, f);
    let sa = sat(&|k| a[k]);
    let sb = sat(&|k| b[k]);
    let saa = sat(&|k| a[k] * a[k]);
    let sbb = sat(&|k| b[k] * b[k]);
    let sab = sat(&|k| a[k] * b[k]);
    let n = (win_w * win_h) as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for y in 0..=h - win_h {
        for x in 0..=w - win_w {
            let mu_a = sa.window(x, y, win_w, win_h) / n;
            let mu_b = sb.window(x, y, win_w, win_h) / n;
            let var_a = saa.window(x, y, win_w, win_h) / n - mu_a * mu_a;
            let var_b = sbb.window(x, y, win_w, win_h) / n - mu_b * mu_b;
            let cov = sab.window(x, y, win_w, win_h) / n - mu_a * mu_b;
            total += ssim_from_stats(mu_a, mu_b, var_a, var_b, cov);
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// SSIM of one window from its first and second moments.
pub fn ssim_from_stats(mu_a: f64, mu_b: f64, var_a: f64, var_b: f64, cov: f64) -> f64 {
    ((2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2))
        / ((mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2))
}

pub fn quality<T: Real>(reference: &ImageGrid<T>, candidate: &ImageGrid<T>, mode: SsimMode) -> Result<QualityReport> {
    Ok(QualityReport {
        psnr_db: psnr(reference, candidate)?,
        ssim: ssim_with_mode(reference, candidate, mode)?,
    })
}

/// Inclusive-prefix summed-area table with a zero guard row and column.
struct SummedArea {
    stride: usize,
    table: Vec<f64>,
}

impl SummedArea {
    fn new(w: usize, h: usize, value: &dyn Fn(usize) -> f64) -> Self {
        let stride = w + 1;
        let mut table = vec![0.0; stride * (h + 1)];
        for y in 0..h {
            let mut row = 0.0;
            for x in 0..w {
                row += value(y * w + x);
                table[(y + 1) * stride + x + 1] = table[y * stride + x + 1] + row;
            }
        }
        Self { stride, table }
    }

    fn window(&self, x: usize, y: usize, ww: usize, wh: usize) -> f64 {
        let s = self.stride;
        self.table[(y + wh) * s + x + ww] - self.table[y * s + x + ww] - self.table[(y + wh) * s + x]
            + self.table[y * s + x]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn lcg(width: usize, height: usize, seed: u64) -> ImageGrid<f64> {
        let mut s = seed.wrapping_add(0x2545F4914F6CDD1D);
        ImageGrid::from_fn(width, height, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 255.0
        })
    }

    #[test]
    fn psnr_examples() {
        let a = lcg(16, 16, 1);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        let b = a.map(|v| v + 1.0);
        assert_abs_diff_eq!(psnr(&a, &b).unwrap(), 48.130803608679105, epsilon = 1e-9);
        let z = ImageGrid::filled(4, 4, 0.0f64);
        let full = ImageGrid::filled(4, 4, 255.0f64);
        assert_abs_diff_eq!(psnr(&z, &full).unwrap(), 0.0, epsilon = 1e-12);
        assert!(psnr(&a, &ImageGrid::filled(3, 3, 0.0)).is_err());
    }

    #[test]
    fn ssim_identity_is_exactly_one() {
        for seed in 0..5 {
            let a = lcg(20, 13, seed);
            assert_eq!(ssim(&a, &a).unwrap(), 1.0);
            assert_eq!(ssim_with_mode(&a, &a, SsimMode::Global).unwrap(), 1.0);
        }
    }

    #[test]
    fn ssim_of_constant_images_matches_closed_form() {
        let (c, d) = (100.0f64, 140.0f64);
        let a = ImageGrid::filled(12, 12, c);
        let b = ImageGrid::filled(12, 12, d);
        let expected = ((2.0 * c * d + SSIM_C1) * SSIM_C2) / ((c * c + d * d + SSIM_C1) * SSIM_C2);
        assert_abs_diff_eq!(ssim(&a, &b).unwrap(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(ssim_with_mode(&a, &b, SsimMode::Global).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn ssim_penalizes_inverted_contrast() {
        let a = ImageGrid::from_fn(32, 32, |x, y| 127.5 + 60.0 * ((x as f64) * 0.7).sin() * ((y as f64) * 0.4).cos());
        let b = a.map(|v| 255.0 - v);
        assert!(ssim(&a, &b).unwrap() < 0.5);
    }

    #[test]
    fn ssim_is_symmetric() {
        let a = lcg(17, 19, 3);
        let b = lcg(17, 19, 4);
        assert_eq!(ssim(&a, &b).unwrap(), ssim(&b, &a).unwrap());
    }

    #[test]
    fn windowed_equals_global_on_homogeneous_texture() {
        // every 8x8 window of a period-2 checkerboard has the same statistics
        let a = ImageGrid::from_fn(16, 16, |x, y| if (x + y) % 2 == 0 { 50.0f64 } else { 200.0 });
        let b = ImageGrid::from_fn(16, 16, |x, y| if (x + y) % 2 == 0 { 70.0f64 } else { 180.0 });
        let w = ssim(&a, &b).unwrap();
        let g = ssim_with_mode(&a, &b, SsimMode::Global).unwrap();
        assert_abs_diff_eq!(w, g, epsilon = 1e-10);
    }

    #[test]
    fn psnr_drops_with_larger_perturbations() {
        let a = lcg(32, 32, 9);
        let mut prev = f64::INFINITY;
        for amp in [1.0, 2.0, 4.0, 8.0] {
            let noise = lcg(32, 32, 77);
            let b = a.zip_map(&noise, |v, n| v + amp * (n / 255.0 - 0.5));
            let p = psnr(&a, &b).unwrap();
            assert!(p < prev);
            prev = p;
        }
    }
}
