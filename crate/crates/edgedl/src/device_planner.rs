//! How many devices to use.
//!
//! * [`addition_verdict`] compares completion-time bounds at `K` and
//!   `K + 1`.
//! * [`high_accuracy_condition`] is the small-`eps_G` test for "one more
//!   device makes things slower".
//! * [`stationarity_residual`], [`q_of_k`] and
//!   [`necessary_condition_holds`] work on the large-dataset upper bound
//!   with `n_k = N/K` and a common compute constant `c`.
//! * [`optimal_k_search`] just tries every `K`.

use std::f64::consts::LN_2;

use crate::channel_model::RadioConfig;
use crate::completion_time::{avg_completion_mc, completion_bounds, Bounds, Scenario, SystemConfig};
use crate::error::{domain, positive, Error, Result};

/// Effect of adding one device.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Decreases,
    Increases,
    Indeterminate,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Decreases => "decreases",
            Verdict::Increases => "increases",
            Verdict::Indeterminate => "indeterminate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdditionVerdict {
    pub verdict: Verdict,
    /// `upper(K+1) - lower(K)` for a decrease, `lower(K+1) - upper(K)` for
    /// an increase; when indeterminate, the smaller of the two violations
    /// (positive).
    pub margin_s: f64,
    /// Some bound was infinite.
    pub divergent: bool,
}

/// Applies the two bound tests to bounds at `K` and `K + 1`.
pub fn verdict_from_bounds(at_k: &Bounds, at_next: &Bounds) -> AdditionVerdict {
    if at_k.divergent || at_next.divergent {
        return AdditionVerdict {
            verdict: Verdict::Indeterminate,
            margin_s: f64::NAN,
            divergent: true,
        };
    }
    let down = at_next.upper_s - at_k.lower_s;
    let up = at_next.lower_s - at_k.upper_s;
    let (verdict, margin_s) = if down <= 0.0 {
        (Verdict::Decreases, down)
    } else if up >= 0.0 {
        (Verdict::Increases, up)
    } else {
        (Verdict::Indeterminate, down.min(-up))
    };
    AdditionVerdict {
        verdict,
        margin_s,
        divergent: false,
    }
}

/// Verdict for `cfg` against the same system with one more device
/// (see [`SystemConfig::grown_by_one`]).
pub fn addition_verdict(cfg: &SystemConfig) -> Result<AdditionVerdict> {
    let next = cfg.grown_by_one()?;
    Ok(verdict_from_bounds(
        &completion_bounds(cfg)?,
        &completion_bounds(&next)?,
    ))
}

/// Verdict at `K` for a scenario, with both systems built from it.
pub fn addition_verdict_in(scenario: &Scenario, k: usize) -> Result<AdditionVerdict> {
    Ok(verdict_from_bounds(
        &completion_bounds(&scenario.system_at(k)?)?,
        &completion_bounds(&scenario.system_at(k + 1)?)?,
    ))
}

/// Which variant of the high-accuracy condition to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HighAccuracyForm {
    /// Upload exponents scaled by `1/(K eta)`.
    #[default]
    Scaled,
    /// Upload exponents scaled by `1/eta`.
    Unscaled,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HighAccuracyInput {
    pub k: usize,
    pub eta_max: f64,
    pub eta_min: f64,
    pub rho_max: f64,
    pub rho_min: f64,
    pub radio: RadioConfig,
    pub c: f64,
    pub n_total: usize,
    pub eps_local: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HighAccuracyResult {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
}

/// Per-iteration communication increase from `K` to `K + 1` devices
/// (`lhs`) against the compute saving (`rhs`); `holds` means adding a
/// device slows training down when `eps_G` is small.
pub fn high_accuracy_condition(input: &HighAccuracyInput, form: HighAccuracyForm) -> Result<HighAccuracyResult> {
    if input.k == 0 {
        return Err(domain("K must be at least 1"));
    }
    for (name, v) in [
        ("eta_max", input.eta_max),
        ("eta_min", input.eta_min),
        ("rho_max", input.rho_max),
        ("rho_min", input.rho_min),
    ] {
        positive(name, v)?;
    }
    if !(input.c >= 0.0 && input.c.is_finite()) {
        return Err(domain("c must be finite and >= 0"));
    }
    positive("eps_local", input.eps_local)?;
    input.radio.validate()?;
    let k = input.k as f64;
    let b = input.radio.bandwidth_hz;
    let up_next = (2f64.powf((k + 1.0) * input.radio.rate_up / b) - 1.0).max(0.0);
    let up_now = (2f64.powf(k * input.radio.rate_up / b) - 1.0).max(0.0);
    let mul = (2f64.powf(input.radio.rate_mul / b) - 1.0).max(0.0);
    let scale = match form {
        HighAccuracyForm::Scaled => 1.0 / k,
        HighAccuracyForm::Unscaled => 1.0,
    };
    let lhs = (scale * up_next / input.eta_max).exp() + ((k + 1.0) * mul / input.rho_max).exp()
        - k * (scale * up_now / input.eta_min).exp()
        - (k * mul / input.rho_min).exp();
    let rhs = input.c * input.n_total as f64 / (input.eps_local * k * (k + 1.0));
    Ok(HighAccuracyResult {
        holds: lhs >= rhs,
        lhs,
        rhs,
    })
}

/// Parameters of the large-dataset upper bound, with `n_k = N/K`,
/// `c_k = c` and `sigma' sigma_max = N/K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LargeDataParams {
    pub n_total: f64,
    pub slot_seconds: f64,
    pub c: f64,
    pub bandwidth_hz: f64,
    pub rate_dist: f64,
    pub eps_local: f64,
    pub eps_gap: f64,
    pub lambda_reg: f64,
    pub rho_min: f64,
}

impl LargeDataParams {
    /// Takes `c` as the smallest compute constant and `rho_min` from the
    /// SNR profile.
    pub fn from_system(cfg: &SystemConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            n_total: cfg.n_total as f64,
            slot_seconds: cfg.slot_seconds,
            c: cfg.compute_consts.iter().copied().fold(f64::INFINITY, f64::min),
            bandwidth_hz: cfg.radio.bandwidth_hz,
            rate_dist: cfg.radio.rate_dist,
            eps_local: cfg.eps_local,
            eps_gap: cfg.eps_gap,
            lambda_reg: cfg.lambda_reg,
            rho_min: cfg.snr.rho_min(),
        })
    }

    fn spectral(&self, k: f64) -> f64 {
        k * self.rate_dist / self.bandwidth_hz
    }

    /// `ln((lambda K + 1) / (lambda (1 - eps_l) eps_G))`.
    fn budget_log(&self, k: f64) -> f64 {
        let l = self.lambda_reg;
        ((l * k + 1.0) / (l * (1.0 - self.eps_local) * self.eps_gap)).ln()
    }

    /// The upper bound with `K` relaxed to a positive real and `M_K`
    /// left unrounded.
    pub fn relaxed_upper(&self, k: f64) -> f64 {
        let x = self.spectral(k);
        let dist = self.slot_seconds * self.n_total * ((x * LN_2).exp_m1() / self.rho_min).exp();
        let l = self.lambda_reg;
        let a = self.c * self.n_total / (self.eps_local * (1.0 - self.eps_local) * l);
        dist + a * (l + 1.0 / k) * self.budget_log(k)
    }
}

/// Which expression [`stationarity_residual`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StationarityForm {
    /// The derivative of [`LargeDataParams::relaxed_upper`]: the slot length
    /// multiplies the distribution term only.
    #[default]
    Derivative,
    /// The slot length multiplies every term, so it drops out.
    SlotScaled,
}

/// Stationarity residual of the relaxed large-dataset bound at real `k`.
pub fn stationarity_residual(k: f64, p: &LargeDataParams, form: StationarityForm) -> f64 {
    let w = p.slot_seconds;
    let n = p.n_total;
    let x = p.spectral(k);
    let two_x = (x * LN_2).exp();
    let dist = w * n * (p.rate_dist * LN_2 / (p.bandwidth_hz * p.rho_min)) * two_x * ((two_x - 1.0) / p.rho_min).exp();
    let cw = match form {
        StationarityForm::Derivative => p.c,
        StationarityForm::SlotScaled => w * p.c,
    };
    let e = p.eps_local;
    let base = cw * n / ((1.0 - e) * e);
    dist - base / p.lambda_reg / (k * k) * p.budget_log(k) + base / k
}

/// Points where the residual changes sign on `[lo, hi]`, located on a
/// log-spaced grid of `grid` points and refined by bisection to `1e-6`.
pub fn stationarity_roots(
    p: &LargeDataParams,
    form: StationarityForm,
    lo: f64,
    hi: f64,
    grid: usize,
) -> Result<Vec<f64>> {
    positive("lo", lo)?;
    if !(hi > lo) || grid < 2 {
        return Err(domain("need lo < hi and at least two grid points"));
    }
    let f = |k: f64| stationarity_residual(k, p, form);
    let pts: Vec<f64> = (0..grid)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (grid - 1) as f64).exp())
        .collect();
    let mut roots = Vec::new();
    for pair in pts.windows(2) {
        let (mut a, mut b) = (pair[0], pair[1]);
        let (fa, fb) = (f(a), f(b));
        if fa == 0.0 {
            roots.push(a);
            continue;
        }
        if fa.signum() == fb.signum() || fb == 0.0 {
            continue;
        }
        let sa = fa.signum();
        while b - a > 1e-6 {
            let m = 0.5 * (a + b);
            if f(m).signum() == sa {
                a = m;
            } else {
                b = m;
            }
        }
        roots.push(0.5 * (a + b));
    }
    if f(hi) == 0.0 {
        roots.push(hi);
    }
    Ok(roots)
}

/// Threshold `Q(K)`; `-inf` when its logarithm's argument is not positive.
pub fn q_of_k(k: usize, p: &LargeDataParams) -> f64 {
    let kf = k as f64;
    let x = p.spectral(kf);
    let inv = (-x * LN_2).exp();
    let bracket = p.budget_log(kf) / (p.lambda_reg * kf) - 1.0;
    let e = p.eps_local;
    let arg = p.c * p.bandwidth_hz / (e * (1.0 - e) * p.rate_dist * LN_2) * inv / kf * bracket;
    if arg > 0.0 {
        inv * arg.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// `1/rho_min >= Q(K)`.
pub fn necessary_condition_holds(k: usize, rho_min: f64, p: &LargeDataParams) -> Result<bool> {
    if k == 0 {
        return Err(domain("K must be at least 1"));
    }
    positive("rho_min", rho_min)?;
    Ok(1.0 / rho_min >= q_of_k(k, p))
}

/// One row of an optimal-K search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KRow {
    pub k: usize,
    pub mean_s: f64,
    pub stderr_s: f64,
    pub lower_s: f64,
    pub upper_s: f64,
    pub m_k: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalK {
    pub k_star: usize,
    pub table: Vec<KRow>,
}

/// Monte-Carlo completion time for `K = 1..=k_max`; `k_star` is the
/// smallest `K` with the lowest mean.
pub fn optimal_k_search(scenario: &Scenario, k_max: usize, trials: usize, seed: u64) -> Result<OptimalK> {
    if k_max == 0 {
        return Err(domain("k_max must be at least 1"));
    }
    let table = (1..=k_max)
        .map(|k| -> Result<KRow> {
            let cfg = scenario.system_at(k)?;
            let est = avg_completion_mc(&cfg, trials, seed)?;
            Ok(KRow {
                k,
                mean_s: est.mean_s,
                stderr_s: est.stderr_s,
                lower_s: est.lower_bound_s,
                upper_s: est.upper_bound_s,
                m_k: est.iterations_m_k,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = table
        .iter()
        .filter(|r| r.mean_s.is_finite())
        .fold(None::<&KRow>, |b, r| match b {
            Some(b) if b.mean_s <= r.mean_s => Some(b),
            _ => Some(r),
        })
        .ok_or_else(|| Error::Divergent("every K has an infinite mean".into()))?;
    Ok(OptimalK { k_star: best.k, table })
}

#[cfg(test)]
mod test {
    use super::*;
    use crate::cocoa::PartitionMode;
    use crate::completion_time::{Access, DistModel, SigmaProduct, Spacing};

    fn radio() -> RadioConfig {
        RadioConfig::new(20e6, 5e6, 5e6, 5e6).unwrap()
    }

    fn defaults() -> LargeDataParams {
        LargeDataParams {
            n_total: 4600.0,
            slot_seconds: 1e-3,
            c: 1e-10,
            bandwidth_hz: 20e6,
            rate_dist: 5e6,
            eps_local: 1e-3,
            eps_gap: 1e-3,
            lambda_reg: 0.01,
            rho_min: 10.0,
        }
    }

    fn fixture_input(k: usize) -> HighAccuracyInput {
        HighAccuracyInput {
            k,
            eta_max: 100.0,
            eta_min: 10.0,
            rho_max: 100.0,
            rho_min: 10.0,
            radio: radio(),
            c: 1e-10,
            n_total: 4600,
            eps_local: 1e-3,
        }
    }

    #[test]
    fn high_accuracy_fixture() {
        let s = high_accuracy_condition(&fixture_input(4), HighAccuracyForm::Unscaled).unwrap();
        assert!((s.lhs + 3.475919275457714).abs() < 1e-12, "{}", s.lhs);
        assert!((s.rhs - 2.3e-5).abs() < 1e-18);
        assert!(!s.holds);
        let a = high_accuracy_condition(&fixture_input(4), HighAccuracyForm::Scaled).unwrap();
        assert!((a.lhs + 3.166923686872638).abs() < 1e-12, "{}", a.lhs);
    }

    #[test]
    fn high_accuracy_homogeneous_zero_compute() {
        let mut i = fixture_input(3);
        i.c = 0.0;
        i.eta_max = 10.0;
        i.rho_max = 10.0;
        let r = high_accuracy_condition(&i, HighAccuracyForm::Scaled).unwrap();
        assert_eq!(r.rhs, 0.0);
        assert_eq!(r.holds, r.lhs >= 0.0);
    }

    #[test]
    fn q_fixture_and_sentinel() {
        let p = defaults();
        assert!((q_of_k(4, &p) + 5.3907).abs() < 1e-3, "{}", q_of_k(4, &p));
        assert!((q_of_k(1, &p) + 6.2973).abs() < 1e-3);
        assert!(necessary_condition_holds(4, 10.0, &p).unwrap());
        let huge = LargeDataParams { lambda_reg: 1e6, ..p };
        assert_eq!(q_of_k(3, &huge), f64::NEG_INFINITY);
        assert!(necessary_condition_holds(3, 10.0, &huge).unwrap());
    }

    #[test]
    fn q_can_exclude_a_candidate() {
        // large compute constant and tiny rate push Q above 1/rho_min
        let p = LargeDataParams {
            c: 1e-3,
            rate_dist: 1e3,
            ..defaults()
        };
        assert!(q_of_k(1, &p) > 0.1);
        assert!(!necessary_condition_holds(1, 10.0, &p).unwrap());
    }

    #[test]
    fn derivative_form_matches_finite_difference() {
        let p = defaults();
        for &k in &[0.5, 1.0, 2.5, 7.0, 20.0] {
            let h = 1e-5 * k;
            let fd = (p.relaxed_upper(k + h) - p.relaxed_upper(k - h)) / (2.0 * h);
            let r = stationarity_residual(k, &p, StationarityForm::Derivative);
            assert!((fd - r).abs() <= 1e-5 * r.abs().max(1e-3), "K={k}: {fd} vs {r}");
        }
    }

    #[test]
    fn derivative_form_has_one_root_on_defaults() {
        let p = defaults();
        assert!(stationarity_residual(0.5, &p, StationarityForm::Derivative) < 0.0);
        assert!(stationarity_residual(64.0, &p, StationarityForm::Derivative) > 0.0);
        let roots = stationarity_roots(&p, StationarityForm::Derivative, 0.5, 64.0, 2000).unwrap();
        assert_eq!(roots.len(), 1);
        assert!(roots[0] > 2.0 && roots[0] < 3.0, "{roots:?}");
        let scaled = stationarity_roots(&p, StationarityForm::SlotScaled, 0.5, 64.0, 2000).unwrap();
        assert!(scaled.is_empty());
    }

    fn scenario() -> Scenario {
        Scenario {
            n_total: 4600,
            radio: radio(),
            rho_db: (10.0, 20.0),
            eta_db: (10.0, 20.0),
            compute: (1e-10, 1e-9),
            compute_spacing: Spacing::Log,
            slot_seconds: 1e-3,
            eps_local: 1e-3,
            eps_gap: 1e-3,
            lambda_reg: 0.01,
            mu_smooth: 1.0,
            zeta_convex: 1.0,
            partition: PartitionMode::Uniform,
            partition_seed: 0,
            sigma_product: SigmaProduct::PerDevice,
            dist_model: DistModel::Scaled,
            access: Access::Oma,
            ideal_channel: false,
        }
    }

    #[test]
    fn verdicts_in_constructed_regimes() {
        let compute = Scenario {
            compute: (1e-3, 1e-3),
            rho_db: (60.0, 60.0),
            eta_db: (60.0, 60.0),
            radio: RadioConfig::new(20e6, 1e3, 1e3, 1e3).unwrap(),
            ..scenario()
        };
        assert_eq!(addition_verdict_in(&compute, 2).unwrap().verdict, Verdict::Decreases);
        let comm = Scenario {
            n_total: 100,
            compute: (1e-15, 1e-15),
            rho_db: (10.0, 10.0),
            eta_db: (10.0, 10.0),
            radio: RadioConfig::new(20e6, 20e6, 20e6, 20e6).unwrap(),
            ..scenario()
        };
        assert_eq!(addition_verdict_in(&comm, 2).unwrap().verdict, Verdict::Increases);
        let cfg = comm.system_at(2).unwrap();
        assert_eq!(addition_verdict(&cfg).unwrap().verdict, Verdict::Increases);
    }

    #[test]
    fn ideal_channel_prefers_many_devices() {
        let s = Scenario {
            ideal_channel: true,
            compute: (1e-9, 1e-9),
            ..scenario()
        };
        let r = optimal_k_search(&s, 6, 3, 1).unwrap();
        assert_eq!(r.k_star, 6);
        assert!(r.table.iter().all(|row| row.stderr_s == 0.0));
    }
}
