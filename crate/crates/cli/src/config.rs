//! Experiment configuration: `key=value` files, flag overrides, validation.
//!
//! Both sources feed one string map so that every bad field is reported in a
//! single pass, regardless of where it came from.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::ValueEnum;
use mixgeo_core::{
    AlphaPolicy, AosConfig, ExplicitConfig, IndicatorMode, IndicatorSpec, ModelWeights, SavConfig, SavOrder,
    SsimMode, StoppingRule,
};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SolverKind {
    Explicit,
    Aos,
    Sav1,
    Sav2,
}

impl SolverKind {
    pub const NAMES: &'static str = "explicit, aos, sav1, sav2";

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Explicit => "explicit",
            SolverKind::Aos => "aos",
            SolverKind::Sav1 => "sav1",
            SolverKind::Sav2 => "sav2",
        }
    }
}

impl FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <SolverKind as ValueEnum>::from_str(s, false)
            .map_err(|_| format!("unknown solver '{s}' (valid: {})", SolverKind::NAMES))
    }
}

/// Every problem found while building a spec, one per line.
#[derive(Debug, Error, PartialEq)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration:")?;
        for (k, e) in self.0.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "  - {e}")?;
        }
        Ok(())
    }
}

pub const KEYS: &[&str] = &[
    "in",
    "truth",
    "solver",
    "b",
    "eta",
    "sigma",
    "p",
    "alpha",
    "alpha-policy",
    "gamma",
    "C",
    "tau",
    "tau-min",
    "tau-max",
    "rho",
    "tol",
    "max-iters",
    "stop",
    "stop-eps",
    "out",
    "log",
    "timing",
    "ssim",
];

/// Ordered `key -> value` settings.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Settings(pub BTreeMap<String, String>);

impl Settings {
    /// Parses `key = value` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, ConfigErrors> {
        let mut map = BTreeMap::new();
        let mut errors = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line.split_once('=') {
                Some((k, v)) if !k.trim().is_empty() => {
                    if map.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                        errors.push(format!("line {}: duplicate key '{}'", n + 1, k.trim()));
                    }
                }
                _ => errors.push(format!("line {}: expected key=value, got '{line}'", n + 1)),
            }
        }
        if errors.is_empty() {
            Ok(Settings(map))
        } else {
            Err(ConfigErrors(errors))
        }
    }

    pub fn read(path: &Path) -> Result<Self, ConfigErrors> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigErrors(vec![format!("config {}: {e}", path.display())]))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.0.insert(key.to_string(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SolverConfig {
    Explicit(ExplicitConfig<f64>),
    Aos(AosConfig<f64>),
    Sav(SavConfig<f64>),
}

/// Everything needed to run one denoising experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub input: PathBuf,
    pub truth: Option<PathBuf>,
    pub solver: SolverKind,
    pub weights: ModelWeights<f64>,
    pub config: SolverConfig,
    pub out: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub timing: bool,
    pub ssim_mode: SsimMode,
}

struct Reader<'a> {
    settings: &'a Settings,
    errors: Vec<String>,
}

impl Reader<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        self.settings.get(key).filter(|v| !v.is_empty())
    }

    fn parse<V: FromStr>(&mut self, key: &str) -> Option<V>
    where
        V::Err: fmt::Display,
    {
        let raw = self.raw(key)?;
        match raw.parse() {
            Ok(v) => Some(v),
            Err(e) => {
                self.errors.push(format!("{key}: cannot parse '{raw}': {e}"));
                None
            }
        }
    }

    fn real(&mut self, key: &str, default: f64, ok: impl Fn(f64) -> bool, rule: &str) -> f64 {
        match self.parse::<f64>(key) {
            Some(v) if ok(v) && v.is_finite() => v,
            Some(v) => {
                self.errors.push(format!("{key}: {v} is invalid ({rule})"));
                default
            }
            None => default,
        }
    }

    fn existing_path(&mut self, key: &str) -> Option<PathBuf> {
        let p = PathBuf::from(self.raw(key)?);
        if !p.is_file() {
            self.errors.push(format!("{key}: file {} does not exist", p.display()));
        }
        Some(p)
    }
}

fn positive(v: f64) -> bool {
    v > 0.0
}

fn non_negative(v: f64) -> bool {
    v >= 0.0
}

impl ExperimentSpec {
    pub fn from_settings(settings: &Settings) -> Result<Self, ConfigErrors> {
        let mut r = Reader { settings, errors: Vec::new() };
        for key in settings.0.keys() {
            if !KEYS.contains(&key.as_str()) {
                r.errors.push(format!("unknown key '{key}'"));
            }
        }
        let input = r.existing_path("in");
        if input.is_none() {
            r.errors.push("in: an input image is required".into());
        }
        let truth = r.existing_path("truth");
        let solver = r.parse::<SolverKind>("solver").unwrap_or(SolverKind::Aos);

        let b = r.real("b", 0.01, non_negative, "must be >= 0");
        let eta = r.real("eta", 0.01, positive, "must be > 0");
        let sigma = r.real("sigma", 2.0, positive, "must be > 0");
        let p = r.real("p", 1.0, positive, "must be > 0");
        let mode = match r.raw("alpha") {
            Some(_) => IndicatorMode::Constant(r.real("alpha", 1.0, |v| v > 0.0 && v <= 1.0, "must lie in (0, 1]")),
            None => IndicatorMode::Adaptive,
        };
        let alpha_policy = match r.raw("alpha-policy") {
            None | Some("frozen") => AlphaPolicy::FrozenFromInput,
            Some("refresh") => AlphaPolicy::Refresh,
            Some(other) => {
                r.errors.push(format!("alpha-policy: unknown '{other}' (valid: frozen, refresh)"));
                AlphaPolicy::FrozenFromInput
            }
        };
        let mut weights = ModelWeights::new(b, eta, IndicatorSpec { sigma, p, mode });
        weights.alpha_policy = alpha_policy;

        let default_stop = match solver {
            SolverKind::Sav1 | SolverKind::Sav2 => "relative",
            _ => "none",
        };
        let stop_kind = r.raw("stop").unwrap_or(default_stop).to_string();
        let stop = match stop_kind.as_str() {
            "none" => StoppingRule::MaxIters,
            "relative" => StoppingRule::RelativeChange(r.real("stop-eps", 1e-4, positive, "must be > 0")),
            "absolute" => StoppingRule::AbsoluteChange(r.real("stop-eps", 1e-1, positive, "must be > 0")),
            other => {
                r.errors.push(format!("stop: unknown '{other}' (valid: none, relative, absolute)"));
                StoppingRule::MaxIters
            }
        };
        if stop_kind == "none" && r.raw("stop-eps").is_some() {
            r.errors.push("stop-eps: only meaningful with stop=relative or stop=absolute".into());
        }
        let max_iters = r.parse::<usize>("max-iters");

        let config = match solver {
            SolverKind::Explicit => {
                let d = ExplicitConfig::<f64>::default();
                SolverConfig::Explicit(ExplicitConfig {
                    tau: r.real("tau", d.tau, positive, "must be > 0"),
                    max_iters: max_iters.unwrap_or(d.max_iters),
                    stop,
                })
            }
            SolverKind::Aos => {
                let d = AosConfig::<f64>::default();
                SolverConfig::Aos(AosConfig {
                    tau: r.real("tau", d.tau, positive, "must be > 0"),
                    max_iters: max_iters.unwrap_or(d.max_iters),
                    stop,
                })
            }
            SolverKind::Sav1 | SolverKind::Sav2 => {
                let d = SavConfig::<f64>::default();
                let tau_min = r.real("tau-min", d.tau_min, positive, "must be > 0");
                let tau_max = r.real("tau-max", d.tau_max, positive, "must be > 0");
                if tau_min > tau_max {
                    r.errors.push(format!("tau-min: {tau_min} exceeds tau-max {tau_max}"));
                }
                let tau0 = r.real("tau", tau_max, positive, "must be > 0");
                SolverConfig::Sav(SavConfig {
                    gamma: r.real("gamma", d.gamma, non_negative, "must be >= 0"),
                    shift: r.real("C", d.shift, positive, "must be > 0"),
                    order: if solver == SolverKind::Sav1 { SavOrder::First } else { SavOrder::Second },
                    tau0,
                    tau_min,
                    tau_max,
                    rho: r.real("rho", d.rho, |v| v > 0.0 && v <= 1.0, "must lie in (0, 1]"),
                    tol: r.real("tol", d.tol, positive, "must be > 0"),
                    max_iters: max_iters.unwrap_or(d.max_iters),
                    stop,
                })
            }
        };
        if !matches!(solver, SolverKind::Sav1 | SolverKind::Sav2) {
            for key in ["gamma", "C", "tau-min", "tau-max", "rho", "tol"] {
                if r.raw(key).is_some() {
                    r.errors.push(format!("{key}: only used by the sav1/sav2 solvers"));
                }
            }
        }

        let timing = match r.raw("timing") {
            None | Some("false") => false,
            Some("true") => true,
            Some(other) => {
                r.errors.push(format!("timing: expected true or false, got '{other}'"));
                false
            }
        };
        let ssim_mode = match r.raw("ssim") {
            None | Some("windowed") => SsimMode::Windowed,
            Some("global") => SsimMode::Global,
            Some(other) => {
                r.errors.push(format!("ssim: unknown '{other}' (valid: windowed, global)"));
                SsimMode::Windowed
            }
        };
        let out = r.raw("out").map(PathBuf::from);
        let log = r.raw("log").map(PathBuf::from);

        if r.errors.is_empty() {
            Ok(ExperimentSpec {
                input: input.expect("checked above"),
                truth,
                solver,
                weights,
                config,
                out,
                log,
                timing,
                ssim_mode,
            })
        } else {
            Err(ConfigErrors(r.errors))
        }
    }
}
