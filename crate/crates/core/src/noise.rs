//! Multiplicative gamma noise: density and seeded synthesis.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Result};
use crate::grid::ImageGrid;
use crate::scalar::Real;

/// Number of looks `L` and the generator seed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaNoiseSpec {
    pub looks: f64,
    pub seed: u64,
}

impl GammaNoiseSpec {
    pub fn new(looks: f64, seed: u64) -> Result<Self> {
        if !(looks > 0.0) || !looks.is_finite() {
            return Err(invalid("looks", format!("must be positive and finite, got {looks}")));
        }
        Ok(Self { looks, seed })
    }
}

/// Gamma density with unit mean and variance `1/L`.
pub fn gamma_pdf<T: Real>(eta: T, looks: T) -> Result<T> {
    if !(looks > T::zero()) || !looks.is_finite() {
        return Err(invalid("looks", "must be positive and finite"));
    }
    if eta < T::zero() {
        return Ok(T::zero());
    }
    let l = looks.to_f64_lossy();
    let e = eta.to_f64_lossy();
    if e == 0.0 {
        return Ok(if l < 1.0 {
            T::infinity()
        } else if l == 1.0 {
            T::one()
        } else {
            T::zero()
        });
    }
    let log_density = l * l.ln() + (l - 1.0) * e.ln() - l * e - ln_gamma(l);
    Ok(T::lit(log_density.exp()))
}

/// Draws `width*height` i.i.d. Gamma(L, 1/L) samples in row-major order.
pub fn sample_gamma_field(width: usize, height: usize, spec: &GammaNoiseSpec) -> Result<Vec<f64>> {
    let dist = Gamma::new(spec.looks, 1.0 / spec.looks)
        .map_err(|e| invalid("looks", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok((0..width * height).map(|_| dist.sample(&mut rng)).collect())
}

/// Degrades `clean` as `f = u * eta` with one deterministic noise stream.
pub fn apply_multiplicative_noise<T: Real>(
    clean: &ImageGrid<T>,
    spec: &GammaNoiseSpec,
) -> Result<ImageGrid<T>> {
    clean.require_non_negative()?;
    let eta = sample_gamma_field(clean.width(), clean.height(), spec)?;
    let data = clean
        .data()
        .iter()
        .zip(eta)
        .map(|(&u, n)| (u * T::lit(n)).max(T::zero()))
        .collect();
    Ok(clean.with_data(data))
}
