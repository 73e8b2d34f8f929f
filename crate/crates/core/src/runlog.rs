//! Per-iteration run records, stopping rules and best-iterate tracking.

use std::time::Instant;

use crate::energy::{EnergyBreakdown, EnergyModel};
use crate::error::{invalid, Result};
use crate::grid::ImageGrid;
use crate::metrics::{psnr, ssim_with_mode, SsimMode};
use crate::scalar::Real;

/// One row of a run log. Oracle-dependent fields are `None` without ground
/// truth; `r` and `modified_energy` are only present for SAV runs.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord<T> {
    pub iter: usize,
    pub tau: T,
    pub energy: EnergyBreakdown<T>,
    pub r: Option<T>,
    pub modified_energy: Option<T>,
    pub psnr_db: Option<f64>,
    pub ssim: Option<f64>,
    pub wall_ms: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunLog<T> {
    pub records: Vec<RunRecord<T>>,
}

impl<T> RunLog<T> {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StoppingRule<T> {
    /// `||u^{n+1} - u^n||_2 / ||u^{n+1}||_2 < eps`.
    RelativeChange(T),
    /// Root-mean-square change per pixel below `eps`.
    AbsoluteChange(T),
    /// Run the full iteration budget.
    MaxIters,
}

impl<T: Real> StoppingRule<T> {
    pub fn validate(&self) -> Result<()> {
        match *self {
            StoppingRule::RelativeChange(e) | StoppingRule::AbsoluteChange(e) if !(e > T::zero()) => {
                Err(invalid("stop", "tolerance must be positive"))
            }
            _ => Ok(()),
        }
    }

    pub fn is_met(&self, previous: &ImageGrid<T>, next: &ImageGrid<T>) -> bool {
        match *self {
            StoppingRule::RelativeChange(eps) => relative_change(previous, next) < eps,
            StoppingRule::AbsoluteChange(eps) => {
                previous.distance_l2(next) / T::from_count(next.len()).sqrt() < eps
            }
            StoppingRule::MaxIters => false,
        }
    }
}

/// `||next - previous||_2 / ||next||_2` (zero when both vanish).
pub fn relative_change<T: Real>(previous: &ImageGrid<T>, next: &ImageGrid<T>) -> T {
    let num = previous.distance_l2(next);
    let den = next.norm_l2();
    if den == T::zero() {
        if num == T::zero() {
            T::zero()
        } else {
            T::infinity()
        }
    } else {
        num / den
    }
}

/// What a run reports besides its log.
#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions<'a, T> {
    /// Clean image; enables PSNR/SSIM columns and best-iterate selection.
    pub truth: Option<&'a ImageGrid<T>>,
    /// Fill `wall_ms`. Off keeps logs byte-reproducible.
    pub record_wall_time: bool,
    pub ssim_mode: SsimMode,
}

#[derive(Clone, Debug)]
pub struct RunOutcome<T> {
    /// Best-PSNR iterate when ground truth was supplied, else the last one.
    pub image: ImageGrid<T>,
    pub last: ImageGrid<T>,
    pub best_iter: Option<usize>,
    pub best_psnr: Option<f64>,
    /// Number of steps taken.
    pub iterations: usize,
    pub log: RunLog<T>,
}

pub(crate) struct Monitor<'a, T> {
    options: RunOptions<'a, T>,
    start: Instant,
    log: RunLog<T>,
    best: Option<(usize, f64, ImageGrid<T>)>,
}

impl<'a, T: Real> Monitor<'a, T> {
    pub(crate) fn new(options: RunOptions<'a, T>, shape_of: &ImageGrid<T>) -> Result<Self> {
        if let Some(t) = options.truth {
            t.check_same_shape(shape_of)?;
        }
        Ok(Self {
            options,
            start: Instant::now(),
            log: RunLog::default(),
            best: None,
        })
    }

    pub(crate) fn observe(
        &mut self,
        iter: usize,
        tau: T,
        u: &ImageGrid<T>,
        model: &EnergyModel<T>,
        sav: Option<(T, T)>,
    ) -> Result<()> {
        let energy = model.energy(u)?;
        let (psnr_db, ssim) = match self.options.truth {
            Some(truth) => {
                let p = psnr(truth, u)?;
                let s = ssim_with_mode(truth, u, self.options.ssim_mode)?;
                if self.best.as_ref().map_or(true, |(_, bp, _)| p > *bp) {
                    self.best = Some((iter, p, u.clone()));
                }
                (Some(p), Some(s))
            }
            None => (None, None),
        };
        let wall_ms = self
            .options
            .record_wall_time
            .then(|| self.start.elapsed().as_secs_f64() * 1e3);
        self.log.records.push(RunRecord {
            iter,
            tau,
            energy,
            r: sav.map(|(r, _)| r),
            modified_energy: sav.map(|(_, m)| m),
            psnr_db,
            ssim,
            wall_ms,
        });
        Ok(())
    }

    pub(crate) fn finish(self, last: ImageGrid<T>, iterations: usize) -> RunOutcome<T> {
        match self.best {
            Some((iter, p, img)) => RunOutcome {
                image: img,
                last,
                best_iter: Some(iter),
                best_psnr: Some(p),
                iterations,
                log: self.log,
            },
            None => RunOutcome {
                image: last.clone(),
                last,
                best_iter: None,
                best_psnr: None,
                iterations,
                log: self.log,
            },
        }
    }
}
