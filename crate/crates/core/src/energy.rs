//! Gray-level indicator, level-set mean curvature, the mixed area/curvature
//! energy and its Euler–Lagrange operator.
//!
//! All stencils read `u` through the replicated ghost policy, so fluxes
//! through the outer faces vanish and constant images are exact fixed points.
//!
//! Face quantities are indexed by their left/lower pixel: the x-face value
//! stored at `(i, j)` lives at `(i + 1/2, j)`.

use std::borrow::Cow;

use crate::error::{invalid, Error, Result};
use crate::grid::{
    central_x, central_y, forward_x, forward_y, gaussian_convolve, minmod, pairwise_sum, ImageGrid,
};
use crate::scalar::Real;

/// Lower bound applied to iterates before the fidelity term needs `log u`
/// or `1/u` (intensity units on `[0, 255]`).
pub const POSITIVITY_FLOOR: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum IndicatorMode<T> {
    /// `((G_sigma * u) / max(G_sigma * u))^p`.
    Adaptive,
    /// Spatially constant weight in `(0, 1]`.
    Constant(T),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IndicatorSpec<T> {
    pub sigma: T,
    pub p: T,
    pub mode: IndicatorMode<T>,
}

impl<T: Real> Default for IndicatorSpec<T> {
    fn default() -> Self {
        Self {
            sigma: T::lit(2.0),
            p: T::one(),
            mode: IndicatorMode::Adaptive,
        }
    }
}

impl<T: Real> IndicatorSpec<T> {
    pub fn constant(value: T) -> Self {
        Self {
            mode: IndicatorMode::Constant(value),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            IndicatorMode::Adaptive => {
                if !(self.sigma > T::zero()) || !self.sigma.is_finite() {
                    return Err(invalid("sigma", "must be positive"));
                }
                if !(self.p > T::zero()) || !self.p.is_finite() {
                    return Err(invalid("p", "must be positive"));
                }
            }
            IndicatorMode::Constant(v) => {
                if !(v > T::zero() && v <= T::one()) {
                    return Err(invalid("alpha", "constant indicator must lie in (0, 1]"));
                }
            }
        }
        Ok(())
    }
}

/// When the indicator is (re)evaluated during a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AlphaPolicy {
    /// Computed once from the noisy input and held fixed.
    #[default]
    FrozenFromInput,
    /// Recomputed from the current iterate on every evaluation.
    Refresh,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelWeights<T> {
    /// Curvature weight.
    pub b: T,
    /// Fidelity weight.
    pub eta: T,
    pub indicator: IndicatorSpec<T>,
    pub alpha_policy: AlphaPolicy,
}

impl<T: Real> ModelWeights<T> {
    pub fn new(b: T, eta: T, indicator: IndicatorSpec<T>) -> Self {
        Self {
            b,
            eta,
            indicator,
            alpha_policy: AlphaPolicy::FrozenFromInput,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b >= T::zero()) || !self.b.is_finite() {
            return Err(invalid("b", "must be non-negative"));
        }
        if !(self.eta > T::zero()) || !self.eta.is_finite() {
            return Err(invalid("eta", "must be positive"));
        }
        self.indicator.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyBreakdown<T> {
    pub regularizer: T,
    pub fidelity: T,
    pub total: T,
}

/// `alpha = ((G_sigma * u) / M)^p`, or a constant field.
pub fn gray_level_indicator<T: Real>(noisy: &ImageGrid<T>, spec: &IndicatorSpec<T>) -> Result<ImageGrid<T>> {
    spec.validate()?;
    match spec.mode {
        IndicatorMode::Constant(v) => Ok(noisy.map(|_| v)),
        IndicatorMode::Adaptive => {
            noisy.require_non_negative()?;
            let smooth = gaussian_convolve(noisy, spec.sigma)?;
            let peak = smooth.max();
            if !(peak > T::zero()) {
                return Err(Error::ZeroIndicatorScale);
            }
            Ok(smooth.map(|v| (v.max(T::zero()) / peak).min(T::one()).powf(spec.p)))
        }
    }
}

/// Normalized x-flux of the curvature stencil at face `(i+1/2, j)`.
#[inline]
fn curvature_flux_x<T: Real>(u: &ImageGrid<T>, x: isize, y: isize) -> T {
    let ux = forward_x(u, x, y);
    let uy = minmod(central_y(u, x + 1, y), central_y(u, x, y));
    ux / (T::one() + ux * ux + uy * uy).sqrt()
}

#[inline]
fn curvature_flux_y<T: Real>(u: &ImageGrid<T>, x: isize, y: isize) -> T {
    let uy = forward_y(u, x, y);
    let ux = minmod(central_x(u, x, y + 1), central_x(u, x, y));
    uy / (T::one() + uy * uy + ux * ux).sqrt()
}

/// Mean curvature `div(grad u / sqrt(1 + |grad u|^2))` by the staggered
/// minmod scheme: forward-difference fluxes, backward divergence.
pub fn mean_curvature<T: Real>(u: &ImageGrid<T>) -> ImageGrid<T> {
    let h = u.spacing();
    let w = u.width() as isize;
    let mut out = u.zeros_like();
    for y in 0..u.height() as isize {
        let mut left = T::zero();
        for x in 0..w {
            let right = curvature_flux_x(u, x, y);
            let down = curvature_flux_y(u, x, y);
            let up = if y == 0 { T::zero() } else { curvature_flux_y(u, x, y - 1) };
            out.set(x as usize, y as usize, (right - left) / h + (down - up) / h);
            left = right;
        }
    }
    out
}

/// Surface-area element `sqrt(1 + |grad u|^2)` with central differences.
pub fn area_density<T: Real>(u: &ImageGrid<T>) -> ImageGrid<T> {
    let mut out = u.zeros_like();
    for y in 0..u.height() as isize {
        for x in 0..u.width() as isize {
            let gx = central_x(u, x, y);
            let gy = central_y(u, x, y);
            out.set(x as usize, y as usize, (T::one() + (gx * gx + gy * gy)).sqrt());
        }
    }
    out
}

/// Pixel diffusivity `g = (alpha + b kappa^2) / sqrt(1 + |grad u|^2)`.
pub fn pixel_diffusivity<T: Real>(u: &ImageGrid<T>, alpha: &ImageGrid<T>, b: T) -> ImageGrid<T> {
    let kappa = mean_curvature(u);
    let area = area_density(u);
    let mut out = u.zeros_like();
    for k in 0..u.len() {
        let kap = kappa.data()[k];
        out.data_mut()[k] = (alpha.data()[k] + b * kap * kap) / area.data()[k];
    }
    out
}

/// Arithmetic face average of a pixel coefficient: x-faces and y-faces.
///
/// The outermost faces (beyond the last column / row) are zero.
pub fn face_average<T: Real>(g: &ImageGrid<T>) -> (ImageGrid<T>, ImageGrid<T>) {
    let half = T::lit(0.5);
    let (w, hgt) = (g.width(), g.height());
    let mut gx = g.zeros_like();
    let mut gy = g.zeros_like();
    for y in 0..hgt {
        for x in 0..w {
            if x + 1 < w {
                gx.set(x, y, half * (g.get(x, y) + g.get(x + 1, y)));
            }
            if y + 1 < hgt {
                gy.set(x, y, half * (g.get(x, y) + g.get(x, y + 1)));
            }
        }
    }
    (gx, gy)
}

/// `div(g grad u)` with face coefficients from [`face_average`].
pub fn diffusion_divergence<T: Real>(u: &ImageGrid<T>, g: &ImageGrid<T>) -> ImageGrid<T> {
    let (gx, gy) = face_average(g);
    let h2 = u.spacing() * u.spacing();
    let (w, hgt) = (u.width(), u.height());
    let mut out = u.zeros_like();
    for y in 0..hgt {
        for x in 0..w {
            let c = u.get(x, y);
            let mut acc = T::zero();
            if x + 1 < w {
                acc = acc + gx.get(x, y) * (u.get(x + 1, y) - c);
            }
            if x > 0 {
                acc = acc - gx.get(x - 1, y) * (c - u.get(x - 1, y));
            }
            if y + 1 < hgt {
                acc = acc + gy.get(x, y) * (u.get(x, y + 1) - c);
            }
            if y > 0 {
                acc = acc - gy.get(x, y - 1) * (c - u.get(x, y - 1));
            }
            out.set(x, y, acc / h2);
        }
    }
    out
}

/// `div V` with `V = (I - P) grad(kappa * A) / A`, `A = sqrt(1 + |grad u|^2)`
/// and `P x = (x . grad u) grad u / A^2`.
///
/// `V` is sampled on faces with forward normal differences and
/// minmod-limited transverse central differences of both `u` and
/// `Psi = kappa * A`.
pub fn curvature_transport_divergence<T: Real>(u: &ImageGrid<T>) -> ImageGrid<T> {
    let kappa = mean_curvature(u);
    let area = area_density(u);
    let psi = kappa.zip_map(&area, |k, a| k * a);
    let h = u.spacing();
    let (w, hgt) = (u.width() as isize, u.height() as isize);

    let face = |normal_u: T, trans_u: T, normal_psi: T, trans_psi: T| {
        let s2 = T::one() + normal_u * normal_u + trans_u * trans_u;
        let s = s2.sqrt();
        normal_psi / s - (normal_psi * normal_u + trans_psi * trans_u) / (s2 * s) * normal_u
    };

    let mut vx = u.zeros_like();
    let mut vy = u.zeros_like();
    for y in 0..hgt {
        for x in 0..w {
            let v1 = face(
                forward_x(u, x, y),
                minmod(central_y(u, x, y), central_y(u, x + 1, y)),
                forward_x(&psi, x, y),
                minmod(central_y(&psi, x, y), central_y(&psi, x + 1, y)),
            );
            let v2 = face(
                forward_y(u, x, y),
                minmod(central_x(u, x, y), central_x(u, x, y + 1)),
                forward_y(&psi, x, y),
                minmod(central_x(&psi, x, y), central_x(&psi, x, y + 1)),
            );
            vx.set(x as usize, y as usize, v1);
            vy.set(x as usize, y as usize, v2);
        }
    }
    let mut out = u.zeros_like();
    for y in 0..hgt as usize {
        for x in 0..w as usize {
            let west = if x == 0 { T::zero() } else { vx.get(x - 1, y) };
            let north = if y == 0 { T::zero() } else { vy.get(x, y - 1) };
            out.set(x, y, (vx.get(x, y) - west) / h + (vy.get(x, y) - north) / h);
        }
    }
    out
}

/// Fidelity gradient `eta (1 - f/u)`.
pub fn fidelity_gradient<T: Real>(u: &ImageGrid<T>, f: &ImageGrid<T>, eta: T) -> ImageGrid<T> {
    u.zip_map(f, |uv, fv| eta * (T::one() - fv / uv))
}

fn check_inputs<T: Real>(u: &ImageGrid<T>, f: &ImageGrid<T>, w: &ModelWeights<T>) -> Result<()> {
    w.validate()?;
    u.check_same_shape(f)?;
    u.require_positive()
}

fn energy_with_alpha<T: Real>(
    u: &ImageGrid<T>,
    f: &ImageGrid<T>,
    alpha: &ImageGrid<T>,
    w: &ModelWeights<T>,
) -> EnergyBreakdown<T> {
    let kappa = mean_curvature(u);
    let area = area_density(u);
    let cell = u.spacing() * u.spacing();
    let reg: Vec<T> = (0..u.len())
        .map(|k| {
            let kap = kappa.data()[k];
            (alpha.data()[k] + w.b * kap * kap) * area.data()[k]
        })
        .collect();
    let fid: Vec<T> = u
        .data()
        .iter()
        .zip(f.data())
        .map(|(&uv, &fv)| if fv == T::zero() { uv } else { uv - fv * uv.ln() })
        .collect();
    let regularizer = pairwise_sum(&reg) * cell;
    let fidelity = w.eta * pairwise_sum(&fid) * cell;
    EnergyBreakdown {
        regularizer,
        fidelity,
        total: regularizer + fidelity,
    }
}

fn gradient_with_alpha<T: Real>(
    u: &ImageGrid<T>,
    f: &ImageGrid<T>,
    alpha: &ImageGrid<T>,
    w: &ModelWeights<T>,
) -> ImageGrid<T> {
    let g = pixel_diffusivity(u, alpha, w.b);
    let diffusion = diffusion_divergence(u, &g);
    let fidelity = fidelity_gradient(u, f, w.eta);
    let two_b = T::lit(2.0) * w.b;
    if w.b == T::zero() {
        return fidelity.zip_map(&diffusion, |fi, d| fi - d);
    }
    let transport = curvature_transport_divergence(u);
    let mut out = fidelity;
    for k in 0..out.len() {
        out.data_mut()[k] = out.data()[k] - diffusion.data()[k] + two_b * transport.data()[k];
    }
    out
}

/// The energy together with its (possibly frozen) indicator field.
///
/// Solvers build one of these per run so that the indicator is evaluated on
/// the noisy input exactly once under [`AlphaPolicy::FrozenFromInput`].
#[derive(Clone, Debug)]
pub struct EnergyModel<T> {
    f: ImageGrid<T>,
    weights: ModelWeights<T>,
    frozen_alpha: Option<ImageGrid<T>>,
}

impl<T: Real> EnergyModel<T> {
    pub fn new(f: &ImageGrid<T>, weights: ModelWeights<T>) -> Result<Self> {
        weights.validate()?;
        f.require_non_negative()?;
        let frozen_alpha = match weights.alpha_policy {
            AlphaPolicy::FrozenFromInput => Some(gray_level_indicator(f, &weights.indicator)?),
            AlphaPolicy::Refresh => None,
        };
        Ok(Self {
            f: f.clone(),
            weights,
            frozen_alpha,
        })
    }

    pub fn noisy(&self) -> &ImageGrid<T> {
        &self.f
    }

    pub fn weights(&self) -> &ModelWeights<T> {
        &self.weights
    }

    /// Indicator field used when evaluating at `u`.
    pub fn alpha(&self, u: &ImageGrid<T>) -> Result<Cow<'_, ImageGrid<T>>> {
        match &self.frozen_alpha {
            Some(a) => Ok(Cow::Borrowed(a)),
            None => Ok(Cow::Owned(gray_level_indicator(u, &self.weights.indicator)?)),
        }
    }

    pub fn energy(&self, u: &ImageGrid<T>) -> Result<EnergyBreakdown<T>> {
        u.check_same_shape(&self.f)?;
        u.require_positive()?;
        let alpha = self.alpha(u)?;
        Ok(energy_with_alpha(u, &self.f, &alpha, &self.weights))
    }

    /// `E'(u)`, the L2 gradient of the energy.
    pub fn gradient(&self, u: &ImageGrid<T>) -> Result<ImageGrid<T>> {
        u.check_same_shape(&self.f)?;
        u.require_positive()?;
        let alpha = self.alpha(u)?;
        Ok(gradient_with_alpha(u, &self.f, &alpha, &self.weights))
    }
}

/// Mixed-geometry energy: `sum (alpha + b kappa^2) A h^2 + eta sum (u - f log u) h^2`.
///
/// The indicator follows `w.alpha_policy`: frozen means it is taken from `f`.
pub fn total_energy<T: Real>(u: &ImageGrid<T>, f: &ImageGrid<T>, w: &ModelWeights<T>) -> Result<EnergyBreakdown<T>> {
    check_inputs(u, f, w)?;
    EnergyModel::new(f, *w)?.energy(u)
}

/// `E'(u) = -div(g grad u) + 2b div V + eta (1 - f/u)`.
pub fn euler_lagrange<T: Real>(u: &ImageGrid<T>, f: &ImageGrid<T>, w: &ModelWeights<T>) -> Result<ImageGrid<T>> {
    check_inputs(u, f, w)?;
    EnergyModel::new(f, *w)?.gradient(u)
}
