//! Semi-implicit additive operator splitting.
//!
//! Each step freezes the diffusivity `g(u^n)` and the explicit source
//! `F(u^n)`, solves one tridiagonal system per row and per column, and
//! averages the two directional results:
//!
//! ```text
//! u^{n+1} = 1/2 * sum_l (I - 2 tau D_l)^{-1} (u^n + tau F^n)
//! ```

use rayon::prelude::*;

use crate::energy::{
    curvature_transport_divergence, fidelity_gradient, pixel_diffusivity, EnergyModel,
    ModelWeights, POSITIVITY_FLOOR,
};
use crate::error::{invalid, Error, Result};
use crate::grid::{Axis, ImageGrid};
use crate::runlog::{Monitor, RunOptions, RunOutcome, StoppingRule};
use crate::scalar::Real;

/// Pivots smaller than this in magnitude abort the Thomas sweep.
pub const PIVOT_THRESHOLD: f64 = 1e-14;

/// `sub`, `diag`, `sup` bands and right-hand side of one line system.
#[derive(Clone, Debug, PartialEq)]
pub struct TridiagonalSystem<T> {
    pub sub: Vec<T>,
    pub diag: Vec<T>,
    pub sup: Vec<T>,
    pub rhs: Vec<T>,
}

impl<T: Real> TridiagonalSystem<T> {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `A x` for the banded matrix.
    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let n = self.len();
        (0..n)
            .map(|k| {
                let mut acc = self.diag[k] * x[k];
                if k > 0 {
                    acc = acc + self.sub[k - 1] * x[k - 1];
                }
                if k + 1 < n {
                    acc = acc + self.sup[k] * x[k + 1];
                }
                acc
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AosConfig<T> {
    pub tau: T,
    pub max_iters: usize,
    pub stop: StoppingRule<T>,
}

impl<T: Real> Default for AosConfig<T> {
    fn default() -> Self {
        Self {
            tau: T::lit(2.0),
            max_iters: 100,
            stop: StoppingRule::MaxIters,
        }
    }
}

impl<T: Real> AosConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > T::zero()) || !self.tau.is_finite() {
            return Err(invalid("tau", "must be positive and finite"));
        }
        self.stop.validate()
    }
}

/// Pixel diffusivity `g = (alpha + b kappa^2) / sqrt(1 + |grad u|^2)`.
pub fn diffusivity<T: Real>(u: &ImageGrid<T>, alpha: &ImageGrid<T>, b: T) -> Result<ImageGrid<T>> {
    u.check_same_shape(alpha)?;
    if !(b >= T::zero()) {
        return Err(invalid("b", "must be non-negative"));
    }
    Ok(pixel_diffusivity(u, alpha, b))
}

/// Explicit part of the flow: `F(u) = -2b div V - eta (1 - f/u)`.
pub fn source_term<T: Real>(u: &ImageGrid<T>, f: &ImageGrid<T>, w: &ModelWeights<T>) -> Result<ImageGrid<T>> {
    w.validate()?;
    u.check_same_shape(f)?;
    u.require_positive()?;
    Ok(source_unchecked(u, f, w))
}

fn source_unchecked<T: Real>(u: &ImageGrid<T>, f: &ImageGrid<T>, w: &ModelWeights<T>) -> ImageGrid<T> {
    let fidelity = fidelity_gradient(u, f, w.eta);
    if w.b == T::zero() {
        return fidelity.map(|v| -v);
    }
    let two_b = T::lit(2.0) * w.b;
    let transport = curvature_transport_divergence(u);
    transport.zip_map(&fidelity, |t, fi| -two_b * t - fi)
}

/// Builds `(I - 2 tau D) x = u + tau F` for one row (`Axis::X`) or one
/// column (`Axis::Y`). `D` has zero row sums and face coefficients given by
/// the arithmetic mean of neighbouring pixel diffusivities.
pub fn assemble_direction<T: Real>(
    u: &ImageGrid<T>,
    g: &ImageGrid<T>,
    source: &ImageGrid<T>,
    axis: Axis,
    tau: T,
    line_index: usize,
) -> TridiagonalSystem<T> {
    let (n, at): (usize, Box<dyn Fn(&ImageGrid<T>, usize) -> T>) = match axis {
        Axis::X => (u.width(), Box::new(move |img: &ImageGrid<T>, k| img.get(k, line_index))),
        Axis::Y => (u.height(), Box::new(move |img: &ImageGrid<T>, k| img.get(line_index, k))),
    };
    let scale = T::lit(2.0) * tau / (u.spacing() * u.spacing());
    let half = T::lit(0.5);
    // face k sits between k and k+1
    let faces: Vec<T> = (0..n.saturating_sub(1))
        .map(|k| half * (at(g, k) + at(g, k + 1)))
        .collect();
    let mut diag = vec![T::one(); n];
    let mut sub = Vec::with_capacity(n.saturating_sub(1));
    let mut sup = Vec::with_capacity(n.saturating_sub(1));
    for (k, &gf) in faces.iter().enumerate() {
        let off = scale * gf;
        sup.push(-off);
        sub.push(-off);
        diag[k] = diag[k] + off;
        diag[k + 1] = diag[k + 1] + off;
    }
    let rhs = (0..n).map(|k| at(u, k) + tau * at(source, k)).collect();
    TridiagonalSystem { sub, diag, sup, rhs }
}

/// Thomas algorithm (forward elimination, back substitution).
pub fn thomas_solve<T: Real>(sys: &TridiagonalSystem<T>) -> Result<Vec<T>> {
    let n = sys.len();
    if sys.rhs.len() != n || sys.sub.len() + 1 != n.max(1) || sys.sup.len() + 1 != n.max(1) {
        return Err(invalid("system", "band lengths inconsistent with the diagonal"));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let threshold = T::lit(PIVOT_THRESHOLD);
    let mut c_star = vec![T::zero(); n];
    let mut d_star = vec![T::zero(); n];
    let mut pivot = sys.diag[0];
    if !(pivot.abs() >= threshold) {
        return Err(Error::SingularPivot { row: 0, pivot: pivot.to_f64_lossy() });
    }
    if n > 1 {
        c_star[0] = sys.sup[0] / pivot;
    }
    d_star[0] = sys.rhs[0] / pivot;
    for k in 1..n {
        pivot = sys.diag[k] - sys.sub[k - 1] * c_star[k - 1];
        if !(pivot.abs() >= threshold) {
            return Err(Error::SingularPivot { row: k, pivot: pivot.to_f64_lossy() });
        }
        if k + 1 < n {
            c_star[k] = sys.sup[k] / pivot;
        }
        d_star[k] = (sys.rhs[k] - sys.sub[k - 1] * d_star[k - 1]) / pivot;
    }
    let mut x = d_star;
    for k in (0..n - 1).rev() {
        x[k] = x[k] - c_star[k] * x[k + 1];
    }
    Ok(x)
}

/// Solves `A x = rhs` as `x = line + A^{-1}(rhs - A line)`, with the residual
/// in difference form so that a stationary line is reproduced exactly.
fn solve_line<T: Real>(mut sys: TridiagonalSystem<T>, line: &[T]) -> Result<Vec<T>> {
    let n = line.len();
    for k in 0..n {
        let mut r = sys.rhs[k] - line[k];
        if k > 0 {
            r = r + sys.sub[k - 1] * (line[k] - line[k - 1]);
        }
        if k + 1 < n {
            r = r + sys.sup[k] * (line[k] - line[k + 1]);
        }
        sys.rhs[k] = r;
    }
    let delta = thomas_solve(&sys)?;
    Ok(line.iter().zip(delta).map(|(&v, d)| v + d).collect())
}

/// One averaged AOS sweep with prescribed diffusivity and source.
///
/// Lines are solved in parallel; each writes a disjoint slice, so the
/// result does not depend on the thread count.
pub fn aos_diffusion_step<T: Real>(
    u: &ImageGrid<T>,
    g: &ImageGrid<T>,
    source: &ImageGrid<T>,
    tau: T,
) -> Result<ImageGrid<T>> {
    u.check_same_shape(g)?;
    u.check_same_shape(source)?;
    let (w, h) = (u.width(), u.height());
    let rows: Vec<Vec<T>> = (0..h)
        .into_par_iter()
        .map(|y| solve_line(assemble_direction(u, g, source, Axis::X, tau, y), u.row(y)))
        .collect::<Result<_>>()?;
    let column = |x: usize| (0..h).map(|y| u.get(x, y)).collect::<Vec<_>>();
    let cols: Vec<Vec<T>> = (0..w)
        .into_par_iter()
        .map(|x| solve_line(assemble_direction(u, g, source, Axis::Y, tau, x), &column(x)))
        .collect::<Result<_>>()?;
    let half = T::lit(0.5);
    let mut out = u.zeros_like();
    for y in 0..h {
        for x in 0..w {
            out.set(x, y, half * (rows[y][x] + cols[x][y]));
        }
    }
    Ok(out)
}

/// One AOS step of the mixed-geometry flow, clamped to the positivity floor.
pub fn aos_step<T: Real>(u: &ImageGrid<T>, model: &EnergyModel<T>, tau: T) -> Result<ImageGrid<T>> {
    u.check_same_shape(model.noisy())?;
    u.require_positive()?;
    let w = model.weights();
    let alpha = model.alpha(u)?;
    let g = pixel_diffusivity(u, &alpha, w.b);
    let source = source_unchecked(u, model.noisy(), w);
    let mut next = aos_diffusion_step(u, &g, &source, tau)?;
    next.clamp_min(T::lit(POSITIVITY_FLOOR));
    Ok(next)
}

/// Algorithm driver: `u^0 = max(f, floor)`, then `aos_step` until the
/// iteration budget or the stopping rule ends the run.
pub fn aos_run<T: Real>(
    f: &ImageGrid<T>,
    w: &ModelWeights<T>,
    cfg: &AosConfig<T>,
    options: RunOptions<'_, T>,
) -> Result<RunOutcome<T>> {
    cfg.validate()?;
    let model = EnergyModel::new(f, *w)?;
    let mut u = f.clone();
    u.clamp_min(T::lit(POSITIVITY_FLOOR));
    let mut monitor = Monitor::new(options, &u)?;
    monitor.observe(0, cfg.tau, &u, &model, None)?;
    let mut iterations = 0;
    for n in 0..cfg.max_iters {
        let next = aos_step(&u, &model, cfg.tau)?;
        iterations = n + 1;
        monitor.observe(iterations, cfg.tau, &next, &model, None)?;
        let stop = cfg.stop.is_met(&u, &next);
        u = next;
        if stop {
            break;
        }
    }
    Ok(monitor.finish(u, iterations))
}
