//! Image grid, replicated-border finite differences, the minmod limiter and
//! Gaussian smoothing.

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// How indices outside the image are resolved.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GhostPolicy {
    /// Clamp to the nearest in-range index (discrete homogeneous Neumann).
    #[default]
    NeumannReplicate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    /// Along a row (column index varies).
    X,
    /// Along a column (row index varies).
    Y,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiffScheme {
    Forward,
    Backward,
    Central,
}

/// Stencil used for `|grad u|^2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradientScheme {
    /// Central differences in both directions, evaluated at the pixel.
    Central,
    /// Face `(i+1/2, j)`: forward x difference, minmod-limited central y.
    StaggeredX,
    /// Face `(i, j+1/2)`: forward y difference, minmod-limited central x.
    StaggeredY,
}

/// A 2-D scalar field on a uniform grid, stored row-major.
///
/// `x` indexes columns (`0..width`) and `y` indexes rows (`0..height`).
/// Out-of-range reads go through [`GhostPolicy::NeumannReplicate`].
#[derive(Clone, Debug, PartialEq)]
pub struct ImageGrid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
    spacing: T,
}

impl<T: Real> ImageGrid<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(invalid("shape", "width and height must be positive"));
        }
        if data.len() != width * height {
            return Err(Error::DataLength {
                width,
                height,
                len: data.len(),
            });
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                x: k % width,
                y: k / width,
            });
        }
        Ok(Self {
            width,
            height,
            data,
            spacing: T::one(),
        })
    }

    pub fn filled(width: usize, height: usize, value: T) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Self {
            width,
            height,
            data: vec![value; width * height],
            spacing: T::one(),
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
            spacing: T::one(),
        }
    }

    /// Replaces the grid spacing (`dx = dy`).
    pub fn with_spacing(mut self, spacing: T) -> Result<Self> {
        if !(spacing > T::zero()) || !spacing.is_finite() {
            return Err(invalid("spacing", "must be positive and finite"));
        }
        self.spacing = spacing;
        Ok(self)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: vec![T::zero(); self.data.len()],
            spacing: self.spacing,
        }
    }

    /// Same shape and spacing, new contents.
    pub(crate) fn with_data(&self, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), self.data.len());
        Self {
            width: self.width,
            height: self.height,
            data,
            spacing: self.spacing,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn spacing(&self) -> T {
        self.spacing
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        self.data[y * self.width + x] = value;
    }

    /// Ghost-aware read: indices outside the grid are clamped.
    #[inline]
    pub fn at(&self, x: isize, y: isize) -> T {
        let cx = x.clamp(0, self.width as isize - 1) as usize;
        let cy = y.clamp(0, self.height as isize - 1) as usize;
        self.data[cy * self.width + cx]
    }

    pub fn row(&self, y: usize) -> &[T] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                left_width: self.width,
                left_height: self.height,
                right_width: other.width,
                right_height: other.height,
            })
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        self.with_data(self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert!(self.same_shape(other), "zip_map on mismatched shapes");
        self.with_data(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn sum(&self) -> T {
        pairwise_sum(&self.data)
    }

    pub fn mean(&self) -> T {
        self.sum() / T::from_count(self.len())
    }

    pub fn max(&self) -> T {
        self.data.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn min(&self) -> T {
        self.data.iter().copied().fold(T::infinity(), T::min)
    }

    /// Grid inner product `sum u*v * dx*dy`.
    pub fn dot(&self, other: &Self) -> T {
        assert!(self.same_shape(other), "dot on mismatched shapes");
        let prod: Vec<T> = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a * b)
            .collect();
        pairwise_sum(&prod) * self.spacing * self.spacing
    }

    /// Plain Euclidean norm of the pixel vector (no area weighting).
    pub fn norm_l2(&self) -> T {
        let sq: Vec<T> = self.data.iter().map(|&v| v * v).collect();
        pairwise_sum(&sq).sqrt()
    }

    /// Euclidean norm of `self - other`.
    pub fn distance_l2(&self, other: &Self) -> T {
        assert!(self.same_shape(other), "distance on mismatched shapes");
        let sq: Vec<T> = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b) * (a - b))
            .collect();
        pairwise_sum(&sq).sqrt()
    }

    /// Raises every value below `floor` to `floor`.
    pub fn clamp_min(&mut self, floor: T) {
        for v in &mut self.data {
            if *v < floor {
                *v = floor;
            }
        }
    }

    pub fn transpose(&self) -> Self {
        let mut out = Vec::with_capacity(self.len());
        for x in 0..self.width {
            for y in 0..self.height {
                out.push(self.get(x, y));
            }
        }
        Self {
            width: self.height,
            height: self.width,
            data: out,
            spacing: self.spacing,
        }
    }

    /// Location of the first non-finite pixel, if any.
    pub fn first_non_finite(&self) -> Option<(usize, usize)> {
        self.data
            .iter()
            .position(|v| !v.is_finite())
            .map(|k| (k % self.width, k / self.width))
    }

    /// Fails unless every pixel satisfies `v > 0`.
    pub fn require_positive(&self) -> Result<()> {
        match self.data.iter().position(|&v| !(v > T::zero())) {
            None => Ok(()),
            Some(k) => Err(Error::PixelOutOfDomain {
                x: k % self.width,
                y: k / self.width,
                value: self.data[k].to_f64_lossy(),
                expected: "> 0",
            }),
        }
    }

    /// Fails unless every pixel satisfies `v >= 0`.
    pub fn require_non_negative(&self) -> Result<()> {
        match self.data.iter().position(|&v| !(v >= T::zero())) {
            None => Ok(()),
            Some(k) => Err(Error::PixelOutOfDomain {
                x: k % self.width,
                y: k / self.width,
                value: self.data[k].to_f64_lossy(),
                expected: ">= 0",
            }),
        }
    }
}

/// Deterministic pairwise summation (fixed split points, independent of
/// thread count).
pub fn pairwise_sum<T: Real>(values: &[T]) -> T {
    const BLOCK: usize = 64;
    if values.len() <= BLOCK {
        values.iter().fold(T::zero(), |acc, &v| acc + v)
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

/// `((sgn a + sgn b) / 2) * min(|a|, |b|)`.
#[inline]
pub fn minmod<T: Real>(a: T, b: T) -> T {
    let sgn = |v: T| {
        if v > T::zero() {
            T::one()
        } else if v < T::zero() {
            -T::one()
        } else {
            T::zero()
        }
    };
    (sgn(a) + sgn(b)) * T::lit(0.5) * a.abs().min(b.abs())
}

#[inline]
pub(crate) fn forward_x<T: Real>(u: &ImageGrid<T>, x: isize, y: isize) -> T {
    (u.at(x + 1, y) - u.at(x, y)) / u.spacing
}

#[inline]
pub(crate) fn forward_y<T: Real>(u: &ImageGrid<T>, x: isize, y: isize) -> T {
    (u.at(x, y + 1) - u.at(x, y)) / u.spacing
}

#[inline]
pub(crate) fn central_x<T: Real>(u: &ImageGrid<T>, x: isize, y: isize) -> T {
    (u.at(x + 1, y) - u.at(x - 1, y)) / (T::lit(2.0) * u.spacing)
}

#[inline]
pub(crate) fn central_y<T: Real>(u: &ImageGrid<T>, x: isize, y: isize) -> T {
    (u.at(x, y + 1) - u.at(x, y - 1)) / (T::lit(2.0) * u.spacing)
}

/// Per-pixel one-sided or central difference along `axis`.
pub fn finite_difference<T: Real>(img: &ImageGrid<T>, axis: Axis, scheme: DiffScheme) -> ImageGrid<T> {
    let h = img.spacing;
    let two = T::lit(2.0);
    let (dx, dy) = match axis {
        Axis::X => (1isize, 0isize),
        Axis::Y => (0, 1),
    };
    let mut out = img.zeros_like();
    for y in 0..img.height as isize {
        for x in 0..img.width as isize {
            let c = img.at(x, y);
            let v = match scheme {
                DiffScheme::Forward => (img.at(x + dx, y + dy) - c) / h,
                DiffScheme::Backward => (c - img.at(x - dx, y - dy)) / h,
                DiffScheme::Central => (img.at(x + dx, y + dy) - img.at(x - dx, y - dy)) / (two * h),
            };
            out.set(x as usize, y as usize, v);
        }
    }
    out
}

/// Squared gradient magnitude under the requested stencil.
pub fn grad_magnitude_sq<T: Real>(img: &ImageGrid<T>, scheme: GradientScheme) -> ImageGrid<T> {
    let mut out = img.zeros_like();
    for y in 0..img.height as isize {
        for x in 0..img.width as isize {
            let v = match scheme {
                GradientScheme::Central => {
                    let gx = central_x(img, x, y);
                    let gy = central_y(img, x, y);
                    gx * gx + gy * gy
                }
                GradientScheme::StaggeredX => {
                    let gx = forward_x(img, x, y);
                    let gy = minmod(central_y(img, x, y), central_y(img, x + 1, y));
                    gx * gx + gy * gy
                }
                GradientScheme::StaggeredY => {
                    let gy = forward_y(img, x, y);
                    let gx = minmod(central_x(img, x, y), central_x(img, x, y + 1));
                    gx * gx + gy * gy
                }
            };
            out.set(x as usize, y as usize, v);
        }
    }
    out
}

/// Normalized sampled Gaussian of radius `ceil(3 sigma)`.
pub fn gaussian_kernel<T: Real>(sigma: T) -> Result<Vec<T>> {
    if !(sigma > T::zero()) || !sigma.is_finite() {
        return Err(invalid("sigma", "must be positive and finite"));
    }
    let radius = (T::lit(3.0) * sigma).ceil().to_usize().unwrap_or(0);
    let denom = T::lit(2.0) * sigma * sigma;
    let raw: Vec<T> = (0..=2 * radius)
        .map(|k| {
            let d = T::from_count(k) - T::from_count(radius);
            (-(d * d) / denom).exp()
        })
        .collect();
    let total = raw.iter().copied().fold(T::zero(), |a, b| a + b);
    Ok(raw.into_iter().map(|w| w / total).collect())
}

/// Separable Gaussian blur with replicated borders.
pub fn gaussian_convolve<T: Real>(img: &ImageGrid<T>, sigma: T) -> Result<ImageGrid<T>> {
    let kernel = gaussian_kernel(sigma)?;
    let radius = (kernel.len() / 2) as isize;
    let mut tmp = img.zeros_like();
    for y in 0..img.height as isize {
        for x in 0..img.width as isize {
            let mut acc = T::zero();
            for (k, &w) in kernel.iter().enumerate() {
                acc = acc + w * img.at(x + k as isize - radius, y);
            }
            tmp.set(x as usize, y as usize, acc);
        }
    }
    let mut out = img.zeros_like();
    for y in 0..img.height as isize {
        for x in 0..img.width as isize {
            let mut acc = T::zero();
            for (k, &w) in kernel.iter().enumerate() {
                acc = acc + w * tmp.at(x, y + k as isize - radius);
            }
            out.set(x as usize, y as usize, acc);
        }
    }
    Ok(out)
}
