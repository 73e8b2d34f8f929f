use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mixgeo::commands::{self, format_quality, SweepAxis, SweepRequest};
use mixgeo::config::{ConfigErrors, ExperimentSpec, Settings, SolverKind};
use mixgeo_core::{Phantom, SsimMode};

#[derive(Parser)]
#[command(name = "mixgeo", version, about = "Mixed-geometry denoising of multiplicative gamma noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Multiply a clean image by seeded gamma noise.
    AddNoise {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Number of looks (noise shape); smaller is noisier.
        #[arg(long = "L")]
        looks: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Denoise an image with one solver.
    #[command(allow_negative_numbers = true)]
    Denoise {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out: Option<String>,
        /// Per-iteration CSV log.
        #[arg(long)]
        log: Option<String>,
    },
    /// Print PSNR and SSIM of a candidate against a reference.
    Evaluate {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long = "cand")]
        candidate: PathBuf,
        #[arg(long, value_enum, default_value_t = SsimArg::Windowed)]
        ssim: SsimArg,
    },
    /// Repeat a denoise run over values of one parameter.
    #[command(allow_negative_numbers = true)]
    Sweep {
        #[arg(long, value_enum)]
        axis: SweepAxis,
        /// Comma-separated values; may be empty.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<String>,
        /// Receives one directory per value plus summary.csv.
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Write a synthetic test image (halo, dartboard, shapes).
    Synth {
        #[arg(long)]
        kind: Phantom,
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long, default_value_t = 64)]
        height: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum SsimArg {
    Windowed,
    Global,
}

impl From<SsimArg> for SsimMode {
    fn from(v: SsimArg) -> Self {
        match v {
            SsimArg::Windowed => SsimMode::Windowed,
            SsimArg::Global => SsimMode::Global,
        }
    }
}

/// Model and solver settings; each flag overrides the same key of `--config`.
#[derive(Args)]
struct ModelArgs {
    /// `key=value` file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "in")]
    input: Option<String>,
    #[arg(long)]
    truth: Option<String>,
    #[arg(long, value_enum)]
    solver: Option<SolverKind>,
    #[arg(long)]
    b: Option<String>,
    #[arg(long)]
    eta: Option<String>,
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long)]
    p: Option<String>,
    /// Constant indicator value in (0, 1]; adaptive when omitted.
    #[arg(long)]
    alpha: Option<String>,
    /// frozen | refresh
    #[arg(long)]
    alpha_policy: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long = "C")]
    c: Option<String>,
    #[arg(long)]
    tau: Option<String>,
    #[arg(long)]
    tau_min: Option<String>,
    #[arg(long)]
    tau_max: Option<String>,
    #[arg(long)]
    rho: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    #[arg(long)]
    max_iters: Option<String>,
    /// none | relative | absolute
    #[arg(long)]
    stop: Option<String>,
    #[arg(long)]
    stop_eps: Option<String>,
    /// windowed | global
    #[arg(long)]
    ssim: Option<String>,
    /// Record wall-clock times (outputs are then no longer reproducible).
    #[arg(long)]
    timing: bool,
}

impl ModelArgs {
    fn settings(&self) -> Result<Settings, ConfigErrors> {
        let mut s = match &self.config {
            Some(path) => Settings::read(path)?,
            None => Settings::default(),
        };
        let solver = self.solver.map(|k| k.name().to_string());
        let pairs = [
            ("in", &self.input),
            ("truth", &self.truth),
            ("solver", &solver),
            ("b", &self.b),
            ("eta", &self.eta),
            ("sigma", &self.sigma),
            ("p", &self.p),
            ("alpha", &self.alpha),
            ("alpha-policy", &self.alpha_policy),
            ("gamma", &self.gamma),
            ("C", &self.c),
            ("tau", &self.tau),
            ("tau-min", &self.tau_min),
            ("tau-max", &self.tau_max),
            ("rho", &self.rho),
            ("tol", &self.tol),
            ("max-iters", &self.max_iters),
            ("stop", &self.stop),
            ("stop-eps", &self.stop_eps),
            ("ssim", &self.ssim),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                s.set(key, v.clone());
            }
        }
        if self.timing {
            s.set("timing", "true");
        }
        Ok(s)
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::AddNoise { input, out, looks, seed } => {
            let noisy = commands::add_noise(&input, &out, looks, seed)?;
            println!("wrote {} ({}x{}, L={looks}, seed={seed})", out.display(), noisy.width(), noisy.height());
        }
        Command::Denoise { model, out, log } => {
            let mut settings = model.settings()?;
            if let Some(out) = out {
                settings.set("out", out);
            }
            if let Some(log) = log {
                settings.set("log", log);
            }
            let spec = ExperimentSpec::from_settings(&settings)?;
            let report = commands::denoise(&spec)?;
            let o = &report.outcome;
            println!("{}: {} iterations", spec.solver.name(), o.iterations);
            if let (Some(q), Some(best)) = (&report.quality, o.best_iter) {
                println!("best iteration {best}");
                println!("{}", format_quality(q));
            }
        }
        Command::Evaluate { reference, candidate, ssim } => {
            let q = commands::evaluate(&reference, &candidate, ssim.into())?;
            println!("{}", format_quality(&q));
        }
        Command::Sweep { axis, values, out_dir, model } => {
            let values = values.into_iter().map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
            let req = SweepRequest { base: model.settings()?, axis, values, out_dir };
            let rows = commands::sweep(&req)?;
            for row in &rows {
                let psnr = row.best_psnr.map_or("-".into(), |p| format!("{p:.2}"));
                let iter = row.best_iter.map_or("-".into(), |i| i.to_string());
                println!("{axis}={}: best PSNR {psnr} at iteration {iter}", row.value);
            }
            println!("wrote {}", req.out_dir.join("summary.csv").display());
        }
        Command::Synth { kind, width, height, out } => {
            commands::synth(kind, width, height, &out)?;
            println!("wrote {} ({kind}, {width}x{height})", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigErrors>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
