//! Flat `key = value` experiment configuration.

use std::path::{Path, PathBuf};

use crate::channel_model::RadioConfig;
use crate::cocoa::{LossKit, PartitionMode, SigmaPrimeMode};
use crate::completion_time::{Access, DistModel, Scenario, SigmaProduct, Spacing};
use crate::device_planner::{HighAccuracyForm, StationarityForm};
use crate::error::{Error, Result};

use super::dataset::Scaling;

/// Every experiment knob. [`Default`] gives the reference environment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n_total: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub bandwidth_hz: f64,
    pub rate_dist: f64,
    pub rate_up: f64,
    pub rate_mul: f64,
    pub slot_seconds: f64,
    pub eps_local: f64,
    pub eps_gap: f64,
    pub lambda_reg: f64,
    pub mu_smooth: f64,
    pub zeta_convex: f64,
    pub rho_min_db: f64,
    pub rho_max_db: f64,
    pub eta_min_db: f64,
    pub eta_max_db: f64,
    pub c_min: f64,
    pub c_max: f64,
    pub c_spacing: Spacing,
    pub trials: usize,
    pub seed: u64,
    pub access: Access,
    pub noma_trials: usize,
    pub partition: PartitionMode,
    pub dist_model: DistModel,
    pub sigma_product: SigmaProduct,
    pub ideal_channel: bool,
    pub dataset: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub snr_grid_db: Vec<f64>,
    pub bandwidth_grid_hz: Vec<f64>,
    pub oma_noma_rho_min_db: Vec<f64>,
    pub centralized_n: Vec<usize>,
    pub train_k: Vec<usize>,
    pub train_loss: LossKit,
    pub train_max_iters: usize,
    pub central_gap: f64,
    pub gamma: f64,
    pub sigma_prime_mode: SigmaPrimeMode,
    pub scaling: Scaling,
    pub high_accuracy_form: HighAccuracyForm,
    pub stationarity_form: StationarityForm,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_total: 4600,
            k_min: 1,
            k_max: 30,
            bandwidth_hz: 20e6,
            rate_dist: 5e6,
            rate_up: 5e6,
            rate_mul: 5e6,
            slot_seconds: 1e-3,
            eps_local: 1e-3,
            eps_gap: 1e-3,
            lambda_reg: 0.01,
            mu_smooth: 1.0,
            zeta_convex: 1.0,
            rho_min_db: 10.0,
            rho_max_db: 20.0,
            eta_min_db: 10.0,
            eta_max_db: 20.0,
            c_min: 1e-10,
            c_max: 1e-9,
            c_spacing: Spacing::Log,
            trials: 10_000,
            seed: 0,
            access: Access::Oma,
            noma_trials: 100_000,
            partition: PartitionMode::Uniform,
            dist_model: DistModel::Scaled,
            sigma_product: SigmaProduct::PerDevice,
            ideal_channel: false,
            dataset: None,
            output: None,
            snr_grid_db: vec![5.0, 15.0, 25.0],
            bandwidth_grid_hz: vec![20e6, 40e6],
            oma_noma_rho_min_db: vec![10.0, 30.0],
            centralized_n: vec![1_000, 10_000, 100_000],
            train_k: vec![5, 10],
            train_loss: LossKit::Logistic,
            train_max_iters: 200,
            central_gap: 1e-6,
            gamma: 1.0,
            sigma_prime_mode: SigmaPrimeMode::SafeBound,
            scaling: Scaling::Unit,
            high_accuracy_form: HighAccuracyForm::Scaled,
            stationarity_form: StationarityForm::Derivative,
        }
    }
}

impl ExperimentConfig {
    /// The completion-time scenario described by this config.
    pub fn scenario(&self) -> Result<Scenario> {
        Ok(Scenario {
            n_total: self.n_total,
            radio: RadioConfig::new(self.bandwidth_hz, self.rate_dist, self.rate_up, self.rate_mul)?,
            rho_db: (self.rho_min_db, self.rho_max_db),
            eta_db: (self.eta_min_db, self.eta_max_db),
            compute: (self.c_min, self.c_max),
            compute_spacing: self.c_spacing,
            slot_seconds: self.slot_seconds,
            eps_local: self.eps_local,
            eps_gap: self.eps_gap,
            lambda_reg: self.lambda_reg,
            mu_smooth: self.mu_smooth,
            zeta_convex: self.zeta_convex,
            partition: self.partition,
            partition_seed: self.seed,
            sigma_product: self.sigma_product,
            dist_model: self.dist_model,
            access: self.access,
            ideal_channel: self.ideal_channel,
        })
    }

    pub fn k_range(&self) -> std::ops::RangeInclusive<usize> {
        self.k_min..=self.k_max
    }
}

fn bad(path: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.to_string(),
        line,
        message: message.into(),
    }
}

fn num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse::<T>().map_err(|_| format!("cannot parse {v:?} as a number"))
}

/// Accepts plain integers as well as forms like `1e5`.
fn count(v: &str) -> std::result::Result<usize, String> {
    if let Ok(n) = v.parse::<usize>() {
        return Ok(n);
    }
    let x: f64 = num(v)?;
    if x >= 0.0 && x.fract() == 0.0 && x <= usize::MAX as f64 {
        Ok(x as usize)
    } else {
        Err(format!("{v:?} is not a non-negative integer"))
    }
}

fn list<T>(v: &str, item: impl Fn(&str) -> std::result::Result<T, String>) -> std::result::Result<Vec<T>, String> {
    let out = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(item)
        .collect::<std::result::Result<Vec<T>, String>>()?;
    if out.is_empty() {
        Err("list must not be empty".into())
    } else {
        Ok(out)
    }
}

fn choice<T: Copy>(v: &str, options: &[(&str, T)]) -> std::result::Result<T, String> {
    options
        .iter()
        .find(|(name, _)| name.eq_ignore_ascii_case(v))
        .map(|&(_, t)| t)
        .ok_or_else(|| {
            let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
            format!("{v:?} is not one of {}", names.join(", "))
        })
}

fn flag(v: &str) -> std::result::Result<bool, String> {
    choice(
        v,
        &[
            ("true", true),
            ("false", false),
            ("yes", true),
            ("no", false),
            ("1", true),
            ("0", false),
        ],
    )
}

fn set(cfg: &mut ExperimentConfig, key: &str, v: &str) -> std::result::Result<(), String> {
    match key {
        "n_total" => cfg.n_total = count(v)?,
        "k_min" => cfg.k_min = count(v)?,
        "k_max" => cfg.k_max = count(v)?,
        "bandwidth_hz" => cfg.bandwidth_hz = num(v)?,
        "rate_dist" => cfg.rate_dist = num(v)?,
        "rate_up" => cfg.rate_up = num(v)?,
        "rate_mul" => cfg.rate_mul = num(v)?,
        "rate" => {
            let r = num(v)?;
            cfg.rate_dist = r;
            cfg.rate_up = r;
            cfg.rate_mul = r;
        }
        "slot_seconds" => cfg.slot_seconds = num(v)?,
        "eps_local" => cfg.eps_local = num(v)?,
        "eps_gap" => cfg.eps_gap = num(v)?,
        "lambda" => cfg.lambda_reg = num(v)?,
        "mu" => cfg.mu_smooth = num(v)?,
        "zeta" => cfg.zeta_convex = num(v)?,
        "rho_min_db" => cfg.rho_min_db = num(v)?,
        "rho_max_db" => cfg.rho_max_db = num(v)?,
        "eta_min_db" => cfg.eta_min_db = num(v)?,
        "eta_max_db" => cfg.eta_max_db = num(v)?,
        "c_min" => cfg.c_min = num(v)?,
        "c_max" => cfg.c_max = num(v)?,
        "c_spacing" => cfg.c_spacing = choice(v, &[("log", Spacing::Log), ("linear", Spacing::Linear)])?,
        "trials" => cfg.trials = count(v)?,
        "seed" => cfg.seed = num(v)?,
        "access" => {
            cfg.access = choice(v, &[("oma", Access::Oma), ("noma", Access::Noma { trials: 0 })])?;
        }
        "noma_trials" => cfg.noma_trials = count(v)?,
        "partition" => {
            cfg.partition = choice(
                v,
                &[("uniform", PartitionMode::Uniform), ("random", PartitionMode::Random)],
            )?;
        }
        "dist_model" => {
            cfg.dist_model = choice(
                v,
                &[("scaled", DistModel::Scaled), ("per_example", DistModel::PerExample)],
            )?;
        }
        "sigma_product" => {
            cfg.sigma_product = if v.eq_ignore_ascii_case("per_device") {
                SigmaProduct::PerDevice
            } else {
                SigmaProduct::Fixed(num(v)?)
            };
        }
        "ideal_channel" => cfg.ideal_channel = flag(v)?,
        "dataset" => cfg.dataset = Some(PathBuf::from(v)),
        "output" => cfg.output = Some(PathBuf::from(v)),
        "snr_grid_db" => cfg.snr_grid_db = list(v, num)?,
        "bandwidth_grid_hz" => cfg.bandwidth_grid_hz = list(v, num)?,
        "oma_noma_rho_min_db" => cfg.oma_noma_rho_min_db = list(v, num)?,
        "centralized_n" => cfg.centralized_n = list(v, count)?,
        "train_k" => cfg.train_k = list(v, count)?,
        "train_loss" => {
            cfg.train_loss = choice(v, &[("logistic", LossKit::Logistic), ("squared", LossKit::Squared)])?;
        }
        "train_max_iters" => cfg.train_max_iters = count(v)?,
        "central_gap" => cfg.central_gap = num(v)?,
        "gamma" => cfg.gamma = num(v)?,
        "sigma_prime" => {
            cfg.sigma_prime_mode = choice(
                v,
                &[
                    ("safe", SigmaPrimeMode::SafeBound),
                    ("estimate", SigmaPrimeMode::Estimate),
                ],
            )?;
        }
        "scaling" => {
            cfg.scaling = choice(
                v,
                &[
                    ("unit", Scaling::Unit),
                    ("log1p_unit", Scaling::Log1pUnit),
                    ("none", Scaling::None),
                ],
            )?;
        }
        "high_accuracy_form" => {
            cfg.high_accuracy_form = choice(
                v,
                &[
                    ("scaled", HighAccuracyForm::Scaled),
                    ("unscaled", HighAccuracyForm::Unscaled),
                ],
            )?;
        }
        "stationarity_form" => {
            cfg.stationarity_form = choice(
                v,
                &[
                    ("derivative", StationarityForm::Derivative),
                    ("slot_scaled", StationarityForm::SlotScaled),
                ],
            )?;
        }
        _ => return Err(format!("unknown key {key:?}")),
    }
    Ok(())
}

/// Checks one invariant; returns the message on failure.
fn check(cfg: &ExperimentConfig, key: &str) -> std::result::Result<(), String> {
    let pos = |x: f64| {
        if x.is_finite() && x > 0.0 {
            Ok(())
        } else {
            Err(format!("{key} must be finite and > 0"))
        }
    };
    let unit = |x: f64| {
        if x > 0.0 && x < 1.0 {
            Ok(())
        } else {
            Err(format!("{key} must lie in (0, 1)"))
        }
    };
    let at_least_one = |n: usize| {
        if n >= 1 {
            Ok(())
        } else {
            Err(format!("{key} must be at least 1"))
        }
    };
    let finite = |x: f64| {
        if x.is_finite() {
            Ok(())
        } else {
            Err(format!("{key} must be finite"))
        }
    };
    match key {
        "n_total" => at_least_one(cfg.n_total),
        "k_min" => at_least_one(cfg.k_min),
        "k_max" if cfg.k_max < cfg.k_min => Err("k_max must be >= k_min".into()),
        "bandwidth_hz" => pos(cfg.bandwidth_hz),
        "rate_dist" => pos(cfg.rate_dist),
        "rate_up" => pos(cfg.rate_up),
        "rate_mul" => pos(cfg.rate_mul),
        "slot_seconds" => pos(cfg.slot_seconds),
        "eps_local" => unit(cfg.eps_local),
        "eps_gap" => unit(cfg.eps_gap),
        "central_gap" => unit(cfg.central_gap),
        "lambda" => pos(cfg.lambda_reg),
        "mu" => pos(cfg.mu_smooth),
        "zeta" => pos(cfg.zeta_convex),
        "rho_min_db" | "eta_min_db" => finite(if key == "rho_min_db" {
            cfg.rho_min_db
        } else {
            cfg.eta_min_db
        }),
        "rho_max_db" if !(cfg.rho_max_db >= cfg.rho_min_db && cfg.rho_max_db.is_finite()) => {
            Err("rho_max_db must be finite and >= rho_min_db".into())
        }
        "eta_max_db" if !(cfg.eta_max_db >= cfg.eta_min_db && cfg.eta_max_db.is_finite()) => {
            Err("eta_max_db must be finite and >= eta_min_db".into())
        }
        "c_min" if !(cfg.c_min >= 0.0 && cfg.c_min.is_finite()) => Err("c_min must be finite and >= 0".into()),
        "c_min" if cfg.c_spacing == Spacing::Log && cfg.c_min <= 0.0 => Err("log spacing needs c_min > 0".into()),
        "c_max" if !(cfg.c_max >= cfg.c_min && cfg.c_max.is_finite()) => {
            Err("c_max must be finite and >= c_min".into())
        }
        "trials" => at_least_one(cfg.trials),
        "noma_trials" => at_least_one(cfg.noma_trials),
        "train_max_iters" => at_least_one(cfg.train_max_iters),
        "gamma" if !(cfg.gamma > 0.0 && cfg.gamma <= 1.0) => Err("gamma must lie in (0, 1]".into()),
        "sigma_product" => match cfg.sigma_product {
            SigmaProduct::Fixed(s) if !(s >= 0.0 && s.is_finite()) => {
                Err("sigma_product must be finite and >= 0".into())
            }
            _ => Ok(()),
        },
        "bandwidth_grid_hz" => cfg.bandwidth_grid_hz.iter().try_for_each(|&b| pos(b)),
        "snr_grid_db" => cfg.snr_grid_db.iter().try_for_each(|&x| finite(x)),
        "oma_noma_rho_min_db" => cfg.oma_noma_rho_min_db.iter().try_for_each(|&x| finite(x)),
        "centralized_n" => cfg.centralized_n.iter().try_for_each(|&n| at_least_one(n)),
        "train_k" => cfg.train_k.iter().try_for_each(|&n| at_least_one(n)),
        _ => Ok(()),
    }
}

const CHECKED: &[&str] = &[
    "n_total",
    "k_min",
    "k_max",
    "bandwidth_hz",
    "rate_dist",
    "rate_up",
    "rate_mul",
    "slot_seconds",
    "eps_local",
    "eps_gap",
    "central_gap",
    "lambda",
    "mu",
    "zeta",
    "rho_min_db",
    "rho_max_db",
    "eta_min_db",
    "eta_max_db",
    "c_min",
    "c_max",
    "trials",
    "noma_trials",
    "train_max_iters",
    "gamma",
    "sigma_product",
    "bandwidth_grid_hz",
    "snr_grid_db",
    "oma_noma_rho_min_db",
    "centralized_n",
    "train_k",
];

/// Parses config text. `origin` names the source in error messages.
pub fn parse_config_str(text: &str, origin: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    let mut lines: Vec<(&str, usize)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad(origin, line_no, format!("expected `key = value`, got {line:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(bad(origin, line_no, "missing key"));
        }
        set(&mut cfg, key, value).map_err(|m| bad(origin, line_no, format!("{key}: {m}")))?;
        lines.retain(|(k, _)| *k != key);
        lines.push((key, line_no));
    }
    for key in CHECKED {
        check(&cfg, key).map_err(|m| {
            let line = lines
                .iter()
                .filter(|(k, _)| related(k, key))
                .map(|&(_, l)| l)
                .max()
                .unwrap_or(0);
            bad(origin, line, m)
        })?;
    }
    if let Access::Noma { .. } = cfg.access {
        cfg.access = Access::Noma {
            trials: cfg.noma_trials,
        };
    }
    Ok(cfg)
}

/// Keys whose values an invariant on `checked` depends on.
fn related(key: &str, checked: &str) -> bool {
    let rate = |k: &str| k == "rate" && checked.starts_with("rate_");
    key == checked
        || rate(key)
        || match checked {
            "k_max" => key == "k_min",
            "rho_max_db" => key == "rho_min_db",
            "eta_max_db" => key == "eta_min_db",
            "c_min" => key == "c_spacing",
            "c_max" => key == "c_min",
            _ => false,
        }
}

/// Reads and parses a config file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text, &path.display().to_string())
}
