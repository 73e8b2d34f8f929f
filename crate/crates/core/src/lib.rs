//! Mixed-geometry (area + mean curvature) variational denoising of images
//! corrupted by multiplicative gamma noise.
//!
//! Everything is generic over the scalar type through [`Real`]; the
//! `*64`/`*32` aliases fix it to `f64`/`f32`.

pub mod aos;
pub mod energy;
pub mod error;
pub mod explicit;
pub mod grid;
pub mod metrics;
pub mod noise;
pub mod runlog;
pub mod sav;
pub mod scalar;
pub mod synth;

pub use aos::{aos_run, aos_step, thomas_solve, AosConfig, TridiagonalSystem};
pub use energy::{
    euler_lagrange, total_energy, AlphaPolicy, EnergyBreakdown, EnergyModel, IndicatorMode, IndicatorSpec,
    ModelWeights,
};
pub use error::{Error, Result};
pub use explicit::{explicit_run, ExplicitConfig};
pub use grid::{Axis, DiffScheme, GradientScheme, ImageGrid};
pub use metrics::{psnr, quality, ssim, ssim_with_mode, QualityReport, SsimMode};
pub use noise::{apply_multiplicative_noise, sample_gamma_field, GammaNoiseSpec};
pub use runlog::{RunLog, RunOptions, RunOutcome, RunRecord, StoppingRule};
pub use sav::{sav_run, SavConfig, SavOrder, SavState, SavStepper};
pub use scalar::Real;
pub use synth::{phantom, Phantom};

pub type ImageGrid64 = ImageGrid<f64>;
pub type ImageGrid32 = ImageGrid<f32>;
pub type ModelWeights64 = ModelWeights<f64>;
pub type ModelWeights32 = ModelWeights<f32>;
pub type EnergyModel64 = EnergyModel<f64>;
pub type EnergyModel32 = EnergyModel<f32>;
pub type SavConfig64 = SavConfig<f64>;
pub type AosConfig64 = AosConfig<f64>;
pub type RunOutcome64 = RunOutcome<f64>;
