//! Subcommand implementations, independent of argument parsing.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use anyhow::{bail, Context};
use mixgeo_core::{
    aos_run, apply_multiplicative_noise, explicit_run, phantom, quality, sav_run, GammaNoiseSpec, ImageGrid, Phantom,
    QualityReport, RunOptions, RunOutcome, SsimMode,
};
use rayon::prelude::*;

use crate::config::{ConfigErrors, ExperimentSpec, Settings, SolverConfig, SolverKind};
use crate::csvlog::{run_log_bytes, summary_bytes, write_file, SummaryRow};
use crate::io::{load_image, save_image};

/// `PSNR: 48.13, SSIM: 0.9876`.
pub fn format_quality(q: &QualityReport) -> String {
    format!("PSNR: {:.2}, SSIM: {:.4}", q.psnr_db, q.ssim)
}

pub fn add_noise(input: &Path, out: &Path, looks: f64, seed: u64) -> anyhow::Result<ImageGrid<f64>> {
    let spec = GammaNoiseSpec::new(looks, seed)?;
    let clean = load_image(input)?;
    let noisy = apply_multiplicative_noise(&clean, &spec)?;
    save_image(&noisy, out)?;
    Ok(noisy)
}

pub fn synth(kind: Phantom, width: usize, height: usize, out: &Path) -> anyhow::Result<ImageGrid<f64>> {
    let img = phantom(kind, width, height)?;
    save_image(&img, out)?;
    Ok(img)
}

pub fn evaluate(reference: &Path, candidate: &Path, mode: SsimMode) -> anyhow::Result<QualityReport> {
    let a = load_image(reference)?;
    let b = load_image(candidate)?;
    Ok(quality(&a, &b, mode)?)
}

#[derive(Debug)]
pub struct DenoiseReport {
    pub outcome: RunOutcome<f64>,
    /// Quality of the written image against ground truth.
    pub quality: Option<QualityReport>,
}

/// Runs the configured solver without touching the filesystem beyond reading
/// the inputs.
pub fn run_experiment(spec: &ExperimentSpec) -> anyhow::Result<DenoiseReport> {
    let f = load_image(&spec.input)?;
    let truth = spec.truth.as_deref().map(load_image).transpose()?;
    if let Some(t) = &truth {
        if !t.same_shape(&f) {
            bail!(
                "ground truth is {}x{} but the input is {}x{}",
                t.width(),
                t.height(),
                f.width(),
                f.height()
            );
        }
    }
    let options = RunOptions {
        truth: truth.as_ref(),
        record_wall_time: spec.timing,
        ssim_mode: spec.ssim_mode,
    };
    let outcome = match &spec.config {
        SolverConfig::Explicit(cfg) => explicit_run(&f, &spec.weights, cfg, options),
        SolverConfig::Aos(cfg) => aos_run(&f, &spec.weights, cfg, options),
        SolverConfig::Sav(cfg) => sav_run(&f, &spec.weights, cfg, options),
    }
    .with_context(|| format!("{} solver failed", spec.solver.name()))?;
    let quality = truth
        .as_ref()
        .map(|t| quality(t, &outcome.image, spec.ssim_mode))
        .transpose()?;
    Ok(DenoiseReport { outcome, quality })
}

/// Runs the experiment and writes the requested image and log.
pub fn denoise(spec: &ExperimentSpec) -> anyhow::Result<DenoiseReport> {
    let report = run_experiment(spec)?;
    let log = run_log_bytes(&report.outcome.log)?;
    if let Some(out) = &spec.out {
        save_image(&report.outcome.image, out)?;
    }
    if let Some(path) = &spec.log {
        write_file(path, &log)?;
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepAxis {
    Tau,
    B,
    Eta,
    #[value(name = "C")]
    C,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Tau => "tau",
            SweepAxis::B => "b",
            SweepAxis::Eta => "eta",
            SweepAxis::C => "C",
        }
    }

    /// Writes `value` into the settings. For the SAV solvers a `tau` value
    /// pins the step (controller bounds collapse onto it).
    fn apply(self, settings: &mut Settings, value: &str) {
        settings.set(self.name(), value);
        if self == SweepAxis::Tau {
            let sav = settings
                .get("solver")
                .and_then(|s| SolverKind::from_str(s).ok())
                .is_some_and(|k| matches!(k, SolverKind::Sav1 | SolverKind::Sav2));
            if sav {
                settings.set("tau-min", value);
                settings.set("tau-max", value);
            }
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug)]
pub struct SweepRequest {
    pub base: Settings,
    pub axis: SweepAxis,
    pub values: Vec<String>,
    pub out_dir: PathBuf,
}

fn run_dir_name(axis: SweepAxis, value: &str) -> String {
    let safe: String = value
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "+-.".contains(c) { c } else { '_' })
        .collect();
    format!("{axis}_{safe}")
}

/// Runs one denoise per value in parallel, each into its own directory, and
/// writes `summary.csv`. All specs are validated before any run starts.
pub fn sweep(req: &SweepRequest) -> anyhow::Result<Vec<SummaryRow>> {
    let mut specs = Vec::with_capacity(req.values.len());
    let mut errors = Vec::new();
    if req.values.is_empty() {
        if let Err(ConfigErrors(errs)) = ExperimentSpec::from_settings(&req.base) {
            errors.extend(errs);
        }
    }
    let mut dirs = std::collections::BTreeSet::new();
    for value in &req.values {
        let dir = req.out_dir.join(run_dir_name(req.axis, value));
        if !dirs.insert(dir.clone()) {
            errors.push(format!("{}: duplicate sweep value '{value}'", req.axis));
            continue;
        }
        let mut settings = req.base.clone();
        req.axis.apply(&mut settings, value);
        settings.set("out", dir.join("denoised.pgm").to_string_lossy());
        settings.set("log", dir.join("run.csv").to_string_lossy());
        match ExperimentSpec::from_settings(&settings) {
            Ok(spec) => specs.push((value.clone(), spec)),
            Err(ConfigErrors(errs)) => errors.extend(errs.into_iter().map(|e| format!("{}={value}: {e}", req.axis))),
        }
    }
    if !errors.is_empty() {
        return Err(ConfigErrors(errors).into());
    }
    let rows = specs
        .par_iter()
        .map(|(value, spec)| {
            let start = Instant::now();
            let report = denoise(spec)?;
            Ok(SummaryRow {
                value: value.clone(),
                best_psnr: report.outcome.best_psnr,
                best_iter: report.outcome.best_iter,
                wall_s: spec.timing.then(|| start.elapsed().as_secs_f64()),
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    write_file(&req.out_dir.join("summary.csv"), &summary_bytes(&rows)?)?;
    Ok(rows)
}
