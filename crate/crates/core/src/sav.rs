//! Scalar auxiliary variable (SAV) schemes for the mixed-geometry flow.
//!
//! The energy is split as `E(u) = (gamma/2)(u, Lu) + eps1[u] - C` with `L`
//! the Neumann negative Laplacian, and `r = sqrt(eps1)` is evolved alongside
//! `u`. Every step costs two solves with the constant operator
//! `I + c gamma L`, diagonalized by the 2-D cosine transform, plus one
//! evaluation of `E'`.
//!
//! Both schemes dissipate the modified energy `(gamma/2)(u, Lu) + r^2`
//! for any step size.

use std::sync::Arc;

use rustdct::{DctPlanner, TransformType2And3};

use crate::energy::{EnergyModel, ModelWeights, POSITIVITY_FLOOR};
use crate::error::{invalid, Error, Result};
use crate::grid::ImageGrid;
use crate::runlog::{relative_change, Monitor, RunOptions, RunOutcome, StoppingRule};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SavOrder {
    First,
    Second,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SavConfig<T> {
    /// Weight of the linear part `(gamma/2)(u, Lu)`.
    pub gamma: T,
    /// Shift `C` keeping `eps1` positive.
    pub shift: T,
    pub order: SavOrder,
    pub tau0: T,
    pub tau_min: T,
    pub tau_max: T,
    /// Safety factor of the step controller.
    pub rho: T,
    /// Reference tolerance of the step controller.
    pub tol: T,
    pub max_iters: usize,
    pub stop: StoppingRule<T>,
}

impl<T: Real> Default for SavConfig<T> {
    fn default() -> Self {
        Self {
            gamma: T::one(),
            shift: T::lit(1e7),
            order: SavOrder::First,
            tau0: T::one(),
            tau_min: T::lit(0.8),
            tau_max: T::lit(1.2),
            rho: T::lit(0.9),
            tol: T::lit(1e-3),
            max_iters: 500,
            stop: StoppingRule::RelativeChange(T::lit(1e-4)),
        }
    }
}

impl<T: Real> SavConfig<T> {
    /// Configuration with a constant step `tau` (controller disabled).
    pub fn fixed_step(order: SavOrder, tau: T) -> Self {
        Self {
            order,
            tau0: tau,
            tau_min: tau,
            tau_max: tau,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: T| v > T::zero() && v.is_finite();
        if !(self.gamma >= T::zero()) || !self.gamma.is_finite() {
            return Err(invalid("gamma", "must be non-negative"));
        }
        if !pos(self.shift) {
            return Err(invalid("C", "must be positive"));
        }
        if !pos(self.tau_min) || !pos(self.tau_max) || self.tau_min > self.tau_max {
            return Err(invalid("tau_min/tau_max", "need 0 < tau_min <= tau_max"));
        }
        if !pos(self.tau0) {
            return Err(invalid("tau0", "must be positive"));
        }
        if !(self.rho > T::zero() && self.rho <= T::one()) {
            return Err(invalid("rho", "must lie in (0, 1]"));
        }
        if !pos(self.tol) {
            return Err(invalid("tol", "must be positive"));
        }
        self.stop.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SavState<T> {
    pub u: ImageGrid<T>,
    /// Previous iterate; equal to `u` before the first step.
    pub u_prev: ImageGrid<T>,
    pub r: T,
    pub tau: T,
    pub iter: usize,
}

/// Result of one step plus the scalar the reduction predicted for
/// `(b, u^{n+1})`.
#[derive(Clone, Debug)]
pub struct SavStep<T> {
    pub state: SavState<T>,
    pub predicted_b_dot_u: T,
    /// `(b, u^{n+1})` recomputed from the returned iterate (before clamping).
    pub actual_b_dot_u: T,
}

/// Five-point Neumann negative Laplacian `-Delta_h u`.
pub fn linear_operator_l<T: Real>(u: &ImageGrid<T>) -> ImageGrid<T> {
    let h2 = u.spacing() * u.spacing();
    let mut out = u.zeros_like();
    for y in 0..u.height() as isize {
        for x in 0..u.width() as isize {
            let c = u.at(x, y);
            let lap = (u.at(x + 1, y) - c) + (u.at(x - 1, y) - c) + ((u.at(x, y + 1) - c) + (u.at(x, y - 1) - c));
            out.set(x as usize, y as usize, -lap / h2);
        }
    }
    out
}

/// Solver for `(I + coef L) x = rhs` in the cosine basis.
pub struct NeumannSolver<T: Real> {
    width: usize,
    height: usize,
    spacing: T,
    eig_x: Vec<T>,
    eig_y: Vec<T>,
    dct_x: Arc<dyn TransformType2And3<T>>,
    dct_y: Arc<dyn TransformType2And3<T>>,
}

impl<T: Real> NeumannSolver<T> {
    pub fn new(width: usize, height: usize, spacing: T) -> Self {
        let mut planner = DctPlanner::new();
        let eig = |n: usize| -> Vec<T> {
            (0..n)
                .map(|k| {
                    let theta = T::PI() * T::from_count(k) / T::from_count(n);
                    (T::lit(2.0) - T::lit(2.0) * theta.cos()) / (spacing * spacing)
                })
                .collect()
        };
        Self {
            width,
            height,
            spacing,
            eig_x: eig(width),
            eig_y: eig(height),
            dct_x: planner.plan_dct2(width),
            dct_y: planner.plan_dct2(height),
        }
    }

    pub fn for_grid(u: &ImageGrid<T>) -> Self {
        Self::new(u.width(), u.height(), u.spacing())
    }

    /// Eigenvalues of `L` along x and y; the 2-D spectrum is their sum.
    pub fn eigenvalues(&self) -> (&[T], &[T]) {
        (&self.eig_x, &self.eig_y)
    }

    pub fn solve(&self, rhs: &ImageGrid<T>, coef: T) -> Result<ImageGrid<T>> {
        if rhs.width() != self.width || rhs.height() != self.height || rhs.spacing() != self.spacing {
            return Err(invalid("rhs", "grid does not match the solver"));
        }
        if !(coef >= T::zero()) || !coef.is_finite() {
            return Err(invalid("coef", "must be non-negative"));
        }
        if coef == T::zero() {
            return Ok(rhs.clone());
        }
        let (w, h) = (self.width, self.height);
        let mut rows = rhs.data().to_vec();
        self.forward_rows(&mut rows);
        let mut cols = transpose(&rows, w, h);
        self.apply_columns(&mut cols, true);
        // cols is column-major: index x*h + y
        for x in 0..w {
            for y in 0..h {
                let k = x * h + y;
                cols[k] = cols[k] / (T::one() + coef * (self.eig_x[x] + self.eig_y[y]));
            }
        }
        self.apply_columns(&mut cols, false);
        let mut rows = transpose(&cols, h, w);
        self.inverse_rows(&mut rows);
        Ok(rhs.with_data(rows))
    }

    /// Solves the same system for `x = base + y`, transforming only the
    /// residual `rhs - (I + coef L) base`; a stationary `base` is reproduced
    /// exactly.
    pub fn solve_about(&self, rhs: &ImageGrid<T>, base: &ImageGrid<T>, coef: T) -> Result<ImageGrid<T>> {
        rhs.check_same_shape(base)?;
        let lb = linear_operator_l(base);
        let mut resid = rhs.zip_map(base, |r, b| r - b);
        for (v, &l) in resid.data_mut().iter_mut().zip(lb.data()) {
            *v = *v - coef * l;
        }
        let y = self.solve(&resid, coef)?;
        Ok(base.zip_map(&y, |b, d| b + d))
    }

    fn forward_rows(&self, data: &mut [T]) {
        let mut scratch = vec![T::zero(); self.dct_x.get_scratch_len()];
        for row in data.chunks_exact_mut(self.width) {
            self.dct_x.process_dct2_with_scratch(row, &mut scratch);
        }
    }

    fn inverse_rows(&self, data: &mut [T]) {
        let mut scratch = vec![T::zero(); self.dct_x.get_scratch_len()];
        let scale = T::lit(2.0) / T::from_count(self.width);
        for row in data.chunks_exact_mut(self.width) {
            self.dct_x.process_dct3_with_scratch(row, &mut scratch);
            for v in row.iter_mut() {
                *v = *v * scale;
            }
        }
    }

    fn apply_columns(&self, data: &mut [T], forward: bool) {
        let mut scratch = vec![T::zero(); self.dct_y.get_scratch_len()];
        let scale = T::lit(2.0) / T::from_count(self.height);
        for col in data.chunks_exact_mut(self.height) {
            if forward {
                self.dct_y.process_dct2_with_scratch(col, &mut scratch);
            } else {
                self.dct_y.process_dct3_with_scratch(col, &mut scratch);
                for v in col.iter_mut() {
                    *v = *v * scale;
                }
            }
        }
    }
}

fn transpose<T: Copy>(data: &[T], width: usize, height: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(data.len());
    for x in 0..width {
        for y in 0..height {
            out.push(data[y * width + x]);
        }
    }
    out
}

/// Solves `(I + c gamma L) x = rhs` with `c = tau` or `tau / 2` (`half`).
pub fn implicit_solve<T: Real>(rhs: &ImageGrid<T>, tau: T, gamma: T, half: bool) -> Result<ImageGrid<T>> {
    if !(tau >= T::zero()) || !(gamma >= T::zero()) {
        return Err(invalid("tau/gamma", "must be non-negative"));
    }
    let c = if half { tau * T::lit(0.5) } else { tau };
    NeumannSolver::for_grid(rhs).solve(rhs, c * gamma)
}

/// `eps1[u] = E(u) - (gamma/2)(u, Lu) + C` and `eps1'(u) = E'(u) - gamma L u`.
pub fn eps1_and_derivative<T: Real>(
    u: &ImageGrid<T>,
    model: &EnergyModel<T>,
    gamma: T,
    shift: T,
) -> Result<(T, ImageGrid<T>)> {
    let energy = model.energy(u)?;
    let grad = model.gradient(u)?;
    if gamma == T::zero() {
        let eps1 = energy.total + shift;
        check_eps1(eps1, shift)?;
        return Ok((eps1, grad));
    }
    let lu = linear_operator_l(u);
    let eps1 = energy.total - T::lit(0.5) * gamma * u.dot(&lu) + shift;
    check_eps1(eps1, shift)?;
    Ok((eps1, grad.zip_map(&lu, |g, l| g - gamma * l)))
}

fn check_eps1<T: Real>(eps1: T, shift: T) -> Result<()> {
    if eps1 > T::zero() && eps1.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveShiftedEnergy {
            value: eps1.to_f64_lossy(),
            shift: shift.to_f64_lossy(),
        })
    }
}

/// `(gamma/2)(u, Lu) + r^2`.
pub fn modified_energy<T: Real>(u: &ImageGrid<T>, r: T, gamma: T) -> T {
    if gamma == T::zero() {
        return r * r;
    }
    T::lit(0.5) * gamma * u.dot(&linear_operator_l(u)) + r * r
}

/// `max(tau_min, min(rho sqrt(tol / e) tau, tau_max))`, `tau_max` when `e = 0`.
pub fn adapt_tau<T: Real>(tau: T, e: T, cfg: &SavConfig<T>) -> T {
    if e == T::zero() {
        return cfg.tau_max;
    }
    let proposal = cfg.rho * (cfg.tol / e).sqrt() * tau;
    cfg.tau_min.max(proposal.min(cfg.tau_max))
}

/// Stepper holding the model and the cached cosine-transform plans.
pub struct SavStepper<'m, T: Real> {
    model: &'m EnergyModel<T>,
    gamma: T,
    shift: T,
    solver: NeumannSolver<T>,
}

impl<'m, T: Real> SavStepper<'m, T> {
    pub fn new(model: &'m EnergyModel<T>, gamma: T, shift: T) -> Self {
        Self {
            model,
            gamma,
            shift,
            solver: NeumannSolver::for_grid(model.noisy()),
        }
    }

    pub fn initial_state(&self, u0: &ImageGrid<T>, tau: T) -> Result<SavState<T>> {
        let (eps1, _) = eps1_and_derivative(u0, self.model, self.gamma, self.shift)?;
        Ok(SavState {
            u: u0.clone(),
            u_prev: u0.clone(),
            r: eps1.sqrt(),
            tau,
            iter: 0,
        })
    }

    /// First-order step:
    /// `(I + tau gamma L) u^{n+1} + (tau/2) b (b, u^{n+1}) = c`
    /// with `b = eps1'(u^n)/sqrt(eps1[u^n])`,
    /// `c = u^n - tau r^n b + (tau/2) b (b, u^n)`.
    pub fn step_first(&self, state: &SavState<T>) -> Result<SavStep<T>> {
        let tau = state.tau;
        let half_tau = T::lit(0.5) * tau;
        let u = &state.u;
        let (eps1, d) = eps1_and_derivative(u, self.model, self.gamma, self.shift)?;
        let b = d.map(|v| v / eps1.sqrt());
        let b_dot_u = b.dot(u);
        let c = u.zip_map(&b, |uv, bv| uv - tau * state.r * bv + half_tau * bv * b_dot_u);
        let coef = tau * self.gamma;
        let inv_c = self.solver.solve_about(&c, u, coef)?;
        let inv_b = self.solver.solve(&b, coef)?;
        let predicted = b.dot(&inv_c) / (T::one() + half_tau * b.dot(&inv_b));
        let next = inv_c.zip_map(&inv_b, |ic, ib| ic - half_tau * predicted * ib);
        let actual = b.dot(&next);
        let r = state.r + T::lit(0.5) * (actual - b_dot_u);
        Ok(self.finish(state, next, r, predicted, actual))
    }

    /// Second-order (Crank–Nicolson) step with the extrapolated point
    /// `u~ = (3 u^n - u^{n-1}) / 2`:
    /// `(I + (tau/2) gamma L) u^{n+1} + (tau/4) b (b, u^{n+1}) = c`,
    /// `c = u^n - (tau/2) gamma L u^n - tau r^n b + (tau/4) b (b, u^n)`,
    /// `b = eps1'(u~)/sqrt(eps1[u~])`, `r^{n+1} = r^n + (b, u^{n+1} - u^n)/2`.
    pub fn step_second(&self, state: &SavState<T>) -> Result<SavStep<T>> {
        let tau = state.tau;
        let quarter_tau = T::lit(0.25) * tau;
        let u = &state.u;
        let mut extrap = u.zip_map(&state.u_prev, |a, p| T::lit(1.5) * a - T::lit(0.5) * p);
        extrap.clamp_min(T::lit(POSITIVITY_FLOOR));
        let (eps1, d) = eps1_and_derivative(&extrap, self.model, self.gamma, self.shift)?;
        let b = d.map(|v| v / eps1.sqrt());
        let b_dot_u = b.dot(u);
        let half_tau_gamma = T::lit(0.5) * tau * self.gamma;
        let lu = linear_operator_l(u);
        let mut c = u.zip_map(&lu, |uv, l| uv - half_tau_gamma * l);
        for (cv, &bv) in c.data_mut().iter_mut().zip(b.data()) {
            *cv = *cv - tau * state.r * bv + quarter_tau * bv * b_dot_u;
        }
        let inv_c = self.solver.solve_about(&c, u, half_tau_gamma)?;
        let inv_b = self.solver.solve(&b, half_tau_gamma)?;
        let predicted = b.dot(&inv_c) / (T::one() + quarter_tau * b.dot(&inv_b));
        let next = inv_c.zip_map(&inv_b, |ic, ib| ic - quarter_tau * predicted * ib);
        let actual = b.dot(&next);
        let r = state.r + T::lit(0.5) * (actual - b_dot_u);
        Ok(self.finish(state, next, r, predicted, actual))
    }

    fn finish(&self, state: &SavState<T>, mut next: ImageGrid<T>, r: T, predicted: T, actual: T) -> SavStep<T> {
        next.clamp_min(T::lit(POSITIVITY_FLOOR));
        SavStep {
            state: SavState {
                u: next,
                u_prev: state.u.clone(),
                r,
                tau: state.tau,
                iter: state.iter + 1,
            },
            predicted_b_dot_u: predicted,
            actual_b_dot_u: actual,
        }
    }

    pub fn step(&self, state: &SavState<T>, order: SavOrder) -> Result<SavStep<T>> {
        match order {
            SavOrder::First => self.step_first(state),
            SavOrder::Second => self.step_second(state),
        }
    }
}

pub fn sav_step_first<T: Real>(state: &SavState<T>, model: &EnergyModel<T>, cfg: &SavConfig<T>) -> Result<SavState<T>> {
    Ok(SavStepper::new(model, cfg.gamma, cfg.shift).step_first(state)?.state)
}

pub fn sav_step_second<T: Real>(state: &SavState<T>, model: &EnergyModel<T>, cfg: &SavConfig<T>) -> Result<SavState<T>> {
    Ok(SavStepper::new(model, cfg.gamma, cfg.shift).step_second(state)?.state)
}

/// SAV driver with the adaptive step controller.
///
/// Steps are always accepted; the controller only sets the next `tau`.
pub fn sav_run<T: Real>(
    f: &ImageGrid<T>,
    w: &ModelWeights<T>,
    cfg: &SavConfig<T>,
    options: RunOptions<'_, T>,
) -> Result<RunOutcome<T>> {
    cfg.validate()?;
    let model = EnergyModel::new(f, *w)?;
    let stepper = SavStepper::new(&model, cfg.gamma, cfg.shift);
    let mut u0 = f.clone();
    u0.clamp_min(T::lit(POSITIVITY_FLOOR));
    let tau0 = cfg.tau0.max(cfg.tau_min).min(cfg.tau_max);
    let mut state = stepper.initial_state(&u0, tau0)?;
    let mut monitor = Monitor::new(options, &u0)?;
    monitor.observe(
        0,
        tau0,
        &state.u,
        &model,
        Some((state.r, modified_energy(&state.u, state.r, cfg.gamma))),
    )?;
    for _ in 0..cfg.max_iters {
        let step = stepper.step(&state, cfg.order)?;
        let mut next = step.state;
        if !(next.r > T::zero()) {
            return Err(Error::AuxiliaryVariableNonPositive {
                iter: next.iter,
                r: next.r.to_f64_lossy(),
                shift: cfg.shift.to_f64_lossy(),
            });
        }
        let used_tau = state.tau;
        let e = relative_change(&state.u, &next.u);
        next.tau = adapt_tau(used_tau, e, cfg);
        monitor.observe(
            next.iter,
            used_tau,
            &next.u,
            &model,
            Some((next.r, modified_energy(&next.u, next.r, cfg.gamma))),
        )?;
        let stop = cfg.stop.is_met(&state.u, &next.u);
        state = next;
        if stop {
            break;
        }
    }
    let iterations = state.iter;
    Ok(monitor.finish(state.u, iterations))
}
