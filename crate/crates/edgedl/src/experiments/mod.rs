//! Experiment configs, dataset loading and the CSV-producing sweeps behind
//! the command-line tool.

mod config;
mod dataset;

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

pub use config::{parse_config, parse_config_str, ExperimentConfig};
pub use dataset::{load_dataset, parse_dataset, Scaling};

use crate::channel_model::{db_to_linear, RadioConfig};
use crate::cocoa::{train, Dataset, TrainOptions, TrainTrace};
use crate::completion_time::{
    avg_completion_mc, centralized_time, completion_bounds, large_data_upper, Access, Scenario,
};
use crate::device_planner::{
    addition_verdict_in, high_accuracy_condition, necessary_condition_holds, optimal_k_search, q_of_k,
    stationarity_residual, HighAccuracyInput, LargeDataParams,
};
use crate::error::{domain, Result};

/// Subcommands of the tool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    SweepK,
    Bounds,
    OptimalK,
    OmaNoma,
    Train,
    Planner,
    Centralized,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::SweepK,
        Command::Bounds,
        Command::OptimalK,
        Command::OmaNoma,
        Command::Train,
        Command::Planner,
        Command::Centralized,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::SweepK => "sweep-k",
            Command::Bounds => "bounds",
            Command::OptimalK => "optimal-k",
            Command::OmaNoma => "oma-noma",
            Command::Train => "train",
            Command::Planner => "planner",
            Command::Centralized => "centralized",
        }
    }
}

/// Formats a float with 9 significant digits, `%g` style.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim(&format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim(mantissa))
    }
}

/// Accumulates CSV text.
struct Csv(String);

impl Csv {
    fn new(header: &[&str]) -> Self {
        Csv(header.join(",") + "\n")
    }

    fn row(&mut self, cells: &[String]) {
        let _ = writeln!(self.0, "{}", cells.join(","));
    }
}

fn n(x: f64) -> String {
    fmt_num(x)
}

fn i<T: ToString>(x: T) -> String {
    x.to_string()
}

/// Runs one subcommand and returns its CSV output.
pub fn run(cmd: Command, cfg: &ExperimentConfig) -> Result<String> {
    match cmd {
        Command::SweepK => run_sweep_k(cfg),
        Command::Bounds => run_bounds(cfg),
        Command::OptimalK => run_optimal_k_vs_snr(cfg),
        Command::OmaNoma => run_oma_vs_noma(cfg),
        Command::Train => {
            let path = cfg
                .dataset
                .as_deref()
                .ok_or_else(|| domain("train needs a dataset path"))?;
            run_train(cfg, path)
        }
        Command::Planner => run_planner_report(cfg),
        Command::Centralized => run_centralized(cfg),
    }
}

/// `K, mc_mean_s, mc_stderr_s, lower_s, upper_s, m_k`.
pub fn run_sweep_k(cfg: &ExperimentConfig) -> Result<String> {
    let sc = cfg.scenario()?;
    let ks: Vec<usize> = cfg.k_range().collect();
    let rows = ks
        .par_iter()
        .map(|&k| avg_completion_mc(&sc.system_at(k)?, cfg.trials, cfg.seed))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Csv::new(&["K", "mc_mean_s", "mc_stderr_s", "lower_s", "upper_s", "m_k"]);
    for (k, e) in ks.iter().zip(rows) {
        out.row(&[
            i(k),
            n(e.mean_s),
            n(e.stderr_s),
            n(e.lower_bound_s),
            n(e.upper_bound_s),
            i(e.iterations_m_k),
        ]);
    }
    Ok(out.0)
}

/// `K, lower_s, upper_s, large_data_upper_s, m_k` (OMA bounds).
pub fn run_bounds(cfg: &ExperimentConfig) -> Result<String> {
    let sc = Scenario {
        access: Access::Oma,
        ..cfg.scenario()?
    };
    let mut out = Csv::new(&["K", "lower_s", "upper_s", "large_data_upper_s", "m_k"]);
    for k in cfg.k_range() {
        let sys = sc.system_at(k)?;
        let b = completion_bounds(&sys)?;
        let m_k = crate::completion_time::global_iterations(&sys)?.count;
        out.row(&[i(k), n(b.lower_s), n(b.upper_s), n(large_data_upper(&sys)?), i(m_k)]);
    }
    Ok(out.0)
}

/// The scenario with its SNR intervals moved to start at `rho_min_db` and
/// the given bandwidth.
fn shifted(sc: &Scenario, rho_min_db: f64, bandwidth_hz: f64) -> Result<Scenario> {
    let r = sc.radio;
    Ok(Scenario {
        radio: RadioConfig::new(bandwidth_hz, r.rate_dist, r.rate_up, r.rate_mul)?,
        ..sc.with_rho_min_db(rho_min_db)
    })
}

/// `rho_min_db, bandwidth_hz, k_star`, bandwidth-major.
pub fn run_optimal_k_vs_snr(cfg: &ExperimentConfig) -> Result<String> {
    let sc = cfg.scenario()?;
    let grid: Vec<(f64, f64)> = cfg
        .bandwidth_grid_hz
        .iter()
        .flat_map(|&b| cfg.snr_grid_db.iter().map(move |&r| (b, r)))
        .collect();
    let stars = grid
        .par_iter()
        .map(|&(b, r)| Ok(optimal_k_search(&shifted(&sc, r, b)?, cfg.k_max, cfg.trials, cfg.seed)?.k_star))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Csv::new(&["rho_min_db", "bandwidth_hz", "k_star"]);
    for (&(b, r), k) in grid.iter().zip(stars) {
        out.row(&[n(r), n(b), i(k)]);
    }
    Ok(out.0)
}

/// `rho_min_db, K, mean_oma_s, stderr_oma_s, mean_noma_s, stderr_noma_s`.
pub fn run_oma_vs_noma(cfg: &ExperimentConfig) -> Result<String> {
    let base = cfg.scenario()?;
    let grid: Vec<(f64, usize)> = cfg
        .oma_noma_rho_min_db
        .iter()
        .flat_map(|&r| cfg.k_range().map(move |k| (r, k)))
        .collect();
    let rows = grid
        .par_iter()
        .map(|&(r, k)| {
            let sc = base.with_rho_min_db(r);
            let oma = Scenario {
                access: Access::Oma,
                ..sc.clone()
            }
            .system_at(k)?;
            let noma = Scenario {
                access: Access::Noma {
                    trials: cfg.noma_trials,
                },
                ..sc
            }
            .system_at(k)?;
            Ok((
                avg_completion_mc(&oma, cfg.trials, cfg.seed)?,
                avg_completion_mc(&noma, cfg.trials, cfg.seed)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Csv::new(&[
        "rho_min_db",
        "K",
        "mean_oma_s",
        "stderr_oma_s",
        "mean_noma_s",
        "stderr_noma_s",
    ]);
    for (&(r, k), (o, m)) in grid.iter().zip(rows) {
        out.row(&[n(r), i(k), n(o.mean_s), n(o.stderr_s), n(m.mean_s), n(m.stderr_s)]);
    }
    Ok(out.0)
}

/// Training options for `k` devices from the config.
pub fn train_options(cfg: &ExperimentConfig, k: usize) -> TrainOptions {
    TrainOptions {
        k_devices: k,
        kit: cfg.train_loss,
        lambda_reg: cfg.lambda_reg,
        eps_local: cfg.eps_local,
        eps_gap: cfg.eps_gap,
        gamma: cfg.gamma,
        sigma_prime_mode: cfg.sigma_prime_mode,
        partition: cfg.partition,
        seed: cfg.seed,
        max_iters: cfg.train_max_iters,
        ..TrainOptions::default()
    }
}

/// Single-device dual ascent run to `central_gap`.
pub fn centralized_baseline(cfg: &ExperimentConfig, data: &Dataset) -> Result<TrainTrace> {
    let opts = TrainOptions {
        eps_gap: cfg.central_gap,
        ..train_options(cfg, 1)
    };
    train(data, &opts)
}

/// `devices, t, duality_gap, accuracy` for every configured `K`, then the
/// centralized baseline under `devices = central`.
pub fn run_train(cfg: &ExperimentConfig, dataset: &Path) -> Result<String> {
    let data = load_dataset(dataset, cfg.scaling)?;
    run_train_on(cfg, &data)
}

pub fn run_train_on(cfg: &ExperimentConfig, data: &Dataset) -> Result<String> {
    let mut out = Csv::new(&["devices", "t", "duality_gap", "accuracy"]);
    let mut emit = |label: String, tr: &TrainTrace| {
        for r in &tr.records {
            out.row(&[label.clone(), i(r.t), n(r.duality_gap), n(r.accuracy)]);
        }
    };
    for &k in &cfg.train_k {
        emit(i(k), &train(data, &train_options(cfg, k))?);
    }
    emit("central".into(), &centralized_baseline(cfg, data)?);
    Ok(out.0)
}

/// `K, verdict, prop3_holds, prop3_lhs, prop3_rhs, q_of_k, necessary_holds,
/// stationarity_residual`.
pub fn run_planner_report(cfg: &ExperimentConfig) -> Result<String> {
    let sc = Scenario {
        access: Access::Oma,
        ..cfg.scenario()?
    };
    let large = LargeDataParams::from_system(&sc.system_at(1)?)?;
    let rho_min = db_to_linear(cfg.rho_min_db);
    let mut out = Csv::new(&[
        "K",
        "verdict",
        "prop3_holds",
        "prop3_lhs",
        "prop3_rhs",
        "q_of_k",
        "necessary_holds",
        "stationarity_residual",
    ]);
    for k in cfg.k_range() {
        let v = addition_verdict_in(&sc, k)?;
        let p3 = high_accuracy_condition(
            &HighAccuracyInput {
                k,
                eta_max: db_to_linear(cfg.eta_max_db),
                eta_min: db_to_linear(cfg.eta_min_db),
                rho_max: db_to_linear(cfg.rho_max_db),
                rho_min,
                radio: sc.radio,
                c: cfg.c_min,
                n_total: cfg.n_total,
                eps_local: cfg.eps_local,
            },
            cfg.high_accuracy_form,
        )?;
        out.row(&[
            i(k),
            v.verdict.as_str().into(),
            i(p3.holds),
            n(p3.lhs),
            n(p3.rhs),
            n(q_of_k(k, &large)),
            i(necessary_condition_holds(k, rho_min, &large)?),
            n(stationarity_residual(k as f64, &large, cfg.stationarity_form)),
        ]);
    }
    Ok(out.0)
}

/// `n_total, centralized_s, distributed_min_s, k_star, ratio` with
/// `ratio = distributed_min_s / centralized_s`. Centralized learning runs on
/// the fastest compute constant.
pub fn run_centralized(cfg: &ExperimentConfig) -> Result<String> {
    let base = cfg.scenario()?;
    let rows = cfg
        .centralized_n
        .par_iter()
        .map(|&n_total| {
            let sc = Scenario {
                n_total,
                ..base.clone()
            };
            let best = optimal_k_search(&sc, cfg.k_max, cfg.trials, cfg.seed)?;
            let min = best.table[best.k_star - 1].mean_s;
            Ok((
                n_total,
                centralized_time(cfg.c_min, n_total, cfg.eps_gap)?,
                min,
                best.k_star,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Csv::new(&["n_total", "centralized_s", "distributed_min_s", "k_star", "ratio"]);
    for (nt, c, d, k) in rows {
        out.row(&[i(nt), n(c), n(d), i(k), n(d / c)]);
    }
    Ok(out.0)
}

#[cfg(test)]
mod test {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(2.0 / 3.0), "0.666666667");
        assert_eq!(fmt_num(123456789.0), "123456789");
        assert_eq!(fmt_num(1234567890.0), "1.23456789e9");
        assert_eq!(fmt_num(4.6e-4), "0.00046");
        assert_eq!(fmt_num(1e-10), "1e-10");
        assert_eq!(fmt_num(-2.5e-7), "-2.5e-7");
        assert_eq!(fmt_num(f64::INFINITY), "inf");
    }

    #[test]
    fn sweep_with_ideal_channel_has_zero_stderr() {
        let cfg = ExperimentConfig {
            ideal_channel: true,
            k_max: 4,
            trials: 5,
            ..ExperimentConfig::default()
        };
        let csv = run_sweep_k(&cfg).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "K,mc_mean_s,mc_stderr_s,lower_s,upper_s,m_k");
        assert_eq!(lines.len(), 5);
        assert!(lines[1..].iter().all(|l| l.split(',').nth(2) == Some("0")));
    }

    #[test]
    fn planner_k4_row() {
        let cfg = ExperimentConfig {
            k_max: 5,
            ..ExperimentConfig::default()
        };
        let csv = run_planner_report(&cfg).unwrap();
        let row: Vec<&str> = csv.lines().nth(4).unwrap().split(',').collect();
        assert_eq!(row[0], "4");
        assert_eq!(row[2], "false");
        assert_eq!(row[6], "true");
        let q: f64 = row[5].parse().unwrap();
        assert!((q + 5.3907).abs() < 1e-3);
    }
}
