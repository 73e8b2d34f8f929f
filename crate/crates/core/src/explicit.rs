//! Forward-Euler gradient descent `u^{n+1} = u^n - tau E'(u^n)`.
//!
//! Only conditionally stable; kept as a reference solver for small `tau`.

use crate::energy::{EnergyModel, ModelWeights, POSITIVITY_FLOOR};
use crate::error::{invalid, Result};
use crate::grid::ImageGrid;
use crate::runlog::{Monitor, RunOptions, RunOutcome, StoppingRule};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExplicitConfig<T> {
    pub tau: T,
    pub max_iters: usize,
    pub stop: StoppingRule<T>,
}

impl<T: Real> Default for ExplicitConfig<T> {
    fn default() -> Self {
        Self {
            tau: T::lit(0.05),
            max_iters: 1000,
            stop: StoppingRule::MaxIters,
        }
    }
}

impl<T: Real> ExplicitConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > T::zero()) || !self.tau.is_finite() {
            return Err(invalid("tau", "must be positive and finite"));
        }
        self.stop.validate()
    }
}

pub fn explicit_step<T: Real>(u: &ImageGrid<T>, model: &EnergyModel<T>, tau: T) -> Result<ImageGrid<T>> {
    let grad = model.gradient(u)?;
    let mut next = u.zip_map(&grad, |v, g| v - tau * g);
    next.clamp_min(T::lit(POSITIVITY_FLOOR));
    Ok(next)
}

pub fn explicit_run<T: Real>(
    f: &ImageGrid<T>,
    w: &ModelWeights<T>,
    cfg: &ExplicitConfig<T>,
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
        let next = explicit_step(&u, &model, cfg.tau)?;
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
