//! Total completion time of distributed training.
//!
//! One run costs the data distribution, then `M_K` global iterations of
//! local compute, update upload and model multicast:
//!
//! ```text
//! T = w max_k(n_k L^dist_k) + sum_{t=1}^{M_K} ( max_k c_k n_k / eps_l
//!                                             + w max_k L^up_k + w L^mul )
//! ```
//!
//! with `w` the slot length of one packet and every `L` a geometric
//! transmission count.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};

use crate::channel_model::{
    linear_to_db, outage_data_dist, outage_local_update_noma, outage_local_update_oma, outage_worstbest_multicast,
    Outage, PhaseOutages, RadioConfig, SnrProfile,
};
use crate::cocoa::{partition_sizes, PartitionMode};
use crate::error::{domain, positive, unit_open, Error, Result};
use crate::retransmission::{expected_max_tx_iid, sample_tx_count, MaxTxSampler, TxCountModel};
use crate::rng::{self, SimRng};
use crate::stats::Running;

/// Value of `sigma' * sigma_max` in the iteration budget.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum SigmaProduct {
    /// `N / K`.
    #[default]
    PerDevice,
    Fixed(f64),
}

/// How the data-distribution phase is priced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistModel {
    /// One transmission count per device, scaled by its block size.
    #[default]
    Scaled,
    /// Independent counts for every example, summed per device.
    PerExample,
}

/// Multiple access scheme of the upload phase.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Access {
    #[default]
    Oma,
    /// NOMA with SIC; outages estimated from `trials` Monte-Carlo draws.
    Noma { trials: usize },
}

/// Everything needed to price one run with `K` devices.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub n_total: usize,
    pub radio: RadioConfig,
    pub snr: SnrProfile,
    pub slot_seconds: f64,
    pub eps_local: f64,
    pub eps_gap: f64,
    pub lambda_reg: f64,
    pub mu_smooth: f64,
    pub zeta_convex: f64,
    pub compute_consts: Vec<f64>,
    pub partition_sizes: Vec<usize>,
    pub sigma_product: SigmaProduct,
    pub dist_model: DistModel,
    pub access: Access,
    /// Forces every outage to zero.
    pub ideal_channel: bool,
}

impl SystemConfig {
    pub fn k(&self) -> usize {
        self.snr.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if self.compute_consts.len() != k || self.partition_sizes.len() != k {
            return Err(domain(format!(
                "{k} SNR entries but {} compute constants and {} block sizes",
                self.compute_consts.len(),
                self.partition_sizes.len()
            )));
        }
        if self.partition_sizes.iter().sum::<usize>() != self.n_total {
            return Err(domain("block sizes must sum to n_total"));
        }
        self.radio.validate()?;
        positive("slot_seconds", self.slot_seconds)?;
        unit_open("eps_local", self.eps_local)?;
        unit_open("eps_gap", self.eps_gap)?;
        positive("lambda", self.lambda_reg)?;
        positive("mu", self.mu_smooth)?;
        positive("zeta", self.zeta_convex)?;
        if self.compute_consts.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(domain("compute constants must be finite and >= 0"));
        }
        if let SigmaProduct::Fixed(s) = self.sigma_product {
            if !s.is_finite() || s < 0.0 {
                return Err(domain("sigma product must be finite and >= 0"));
            }
        }
        if let Access::Noma { trials: 0 } = self.access {
            return Err(domain("NOMA needs at least one trial"));
        }
        Ok(())
    }

    /// `sigma' * sigma_max` as used in the budget.
    pub fn sigma_product_value(&self) -> f64 {
        match self.sigma_product {
            SigmaProduct::PerDevice => self.n_total as f64 / self.k() as f64,
            SigmaProduct::Fixed(s) => s,
        }
    }

    pub fn max_block(&self) -> usize {
        self.partition_sizes.iter().copied().max().unwrap_or(0)
    }

    /// `max_k c_k n_k`.
    pub fn max_compute_load(&self) -> f64 {
        self.compute_consts
            .iter()
            .zip(&self.partition_sizes)
            .map(|(c, &n)| c * n as f64)
            .fold(0.0, f64::max)
    }

    /// Phase outages; NOMA upload outages are estimated with `seed`.
    pub fn phase_outages(&self, seed: u64) -> Result<PhaseOutages> {
        if self.ideal_channel {
            return Ok(PhaseOutages::ideal(self.k()));
        }
        let mut o = PhaseOutages::oma(&self.snr, &self.radio)?;
        if let Access::Noma { trials } = self.access {
            o.up = outage_local_update_noma(&self.snr, &self.radio, trials, seed)?;
        }
        Ok(o)
    }

    /// The same system with one more device: blocks re-split uniformly and
    /// SNR / compute profiles re-spaced over the same extremes (SNRs
    /// linearly in dB, compute constants geometrically).
    pub fn grown_by_one(&self) -> Result<SystemConfig> {
        let k = self.k() + 1;
        let rho = spaced(
            linear_to_db(self.snr.rho_min()),
            linear_to_db(self.snr.rho_max()),
            k,
            Spacing::Linear,
        );
        let eta = spaced(
            linear_to_db(self.snr.eta_min()),
            linear_to_db(self.snr.eta_max()),
            k,
            Spacing::Linear,
        );
        let c_lo = self.compute_consts.iter().copied().fold(f64::INFINITY, f64::min);
        let c_hi = self.compute_consts.iter().copied().fold(0.0, f64::max);
        let spacing = if c_lo > 0.0 { Spacing::Log } else { Spacing::Linear };
        Ok(SystemConfig {
            snr: SnrProfile::from_db(&rho, &eta)?,
            compute_consts: spaced(c_lo, c_hi, k, spacing),
            partition_sizes: partition_sizes(self.n_total, k, PartitionMode::Uniform, 0)?,
            ..self.clone()
        })
    }
}

/// Point spacing inside an interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

/// `k` points from `lo` to `hi`; a single point sits at `lo`.
pub fn spaced(lo: f64, hi: f64, k: usize, spacing: Spacing) -> Vec<f64> {
    if k == 1 {
        return vec![lo];
    }
    (0..k)
        .map(|i| {
            let t = i as f64 / (k - 1) as f64;
            match spacing {
                Spacing::Linear => lo + t * (hi - lo),
                Spacing::Log => (lo.ln() + t * (hi.ln() - lo.ln())).exp(),
            }
        })
        .collect()
}

/// Recipe for a [`SystemConfig`] at any device count: SNRs and compute
/// constants spaced over fixed intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub n_total: usize,
    pub radio: RadioConfig,
    pub rho_db: (f64, f64),
    pub eta_db: (f64, f64),
    pub compute: (f64, f64),
    pub compute_spacing: Spacing,
    pub slot_seconds: f64,
    pub eps_local: f64,
    pub eps_gap: f64,
    pub lambda_reg: f64,
    pub mu_smooth: f64,
    pub zeta_convex: f64,
    pub partition: PartitionMode,
    pub partition_seed: u64,
    pub sigma_product: SigmaProduct,
    pub dist_model: DistModel,
    pub access: Access,
    pub ideal_channel: bool,
}

impl Scenario {
    pub fn system_at(&self, k: usize) -> Result<SystemConfig> {
        if k == 0 {
            return Err(domain("number of devices must be at least 1"));
        }
        let rho = spaced(self.rho_db.0, self.rho_db.1, k, Spacing::Linear);
        let eta = spaced(self.eta_db.0, self.eta_db.1, k, Spacing::Linear);
        let cfg = SystemConfig {
            n_total: self.n_total,
            radio: self.radio,
            snr: SnrProfile::from_db(&rho, &eta)?,
            slot_seconds: self.slot_seconds,
            eps_local: self.eps_local,
            eps_gap: self.eps_gap,
            lambda_reg: self.lambda_reg,
            mu_smooth: self.mu_smooth,
            zeta_convex: self.zeta_convex,
            compute_consts: spaced(self.compute.0, self.compute.1, k, self.compute_spacing),
            partition_sizes: partition_sizes(self.n_total, k, self.partition, self.partition_seed)?,
            sigma_product: self.sigma_product,
            dist_model: self.dist_model,
            access: self.access,
            ideal_channel: self.ideal_channel,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Moves the SNR intervals so that they start at `rho_min_db`, keeping
    /// their widths.
    pub fn with_rho_min_db(&self, rho_min_db: f64) -> Scenario {
        let shift = rho_min_db - self.rho_db.0;
        Scenario {
            rho_db: (self.rho_db.0 + shift, self.rho_db.1 + shift),
            eta_db: (self.eta_db.0 + shift, self.eta_db.1 + shift),
            ..self.clone()
        }
    }
}

/// Inputs of the iteration budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetParams {
    pub k: usize,
    pub eps_local: f64,
    pub eps_gap: f64,
    pub lambda_reg: f64,
    pub mu_smooth: f64,
    pub zeta_convex: f64,
    pub n_total: f64,
    pub sigma_product: f64,
}

/// Number of global iterations, with a flag for a degenerate model whose
/// formula came out below one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IterationBudget {
    pub count: u64,
    pub degenerate: bool,
}

/// Ceiling that ignores floating-point fuzz around integers.
fn snapped_ceil(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-12 * x.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

/// `M_K = ceil( K/(1-eps_l) * (a + s)/a * ln((a + s)/((1-eps_l) a) * K/eps_G) )`
/// with `a = mu zeta lambda N` and `s = sigma' sigma_max`.
pub fn iteration_budget(p: &BudgetParams) -> Result<IterationBudget> {
    if p.k == 0 {
        return Err(domain("number of devices must be at least 1"));
    }
    if !(0.0..1.0).contains(&p.eps_local) {
        return Err(domain(format!("eps_local must lie in [0, 1), got {}", p.eps_local)));
    }
    unit_open("eps_gap", p.eps_gap)?;
    let a = positive("mu", p.mu_smooth)?
        * positive("zeta", p.zeta_convex)?
        * positive("lambda", p.lambda_reg)?
        * positive("n_total", p.n_total)?;
    if !p.sigma_product.is_finite() || p.sigma_product < 0.0 {
        return Err(domain("sigma product must be finite and >= 0"));
    }
    let k = p.k as f64;
    let keep = 1.0 - p.eps_local;
    let ratio = (a + p.sigma_product) / a;
    let x = k / keep * ratio * (ratio / keep * k / p.eps_gap).ln();
    if x <= 0.0 || x.is_nan() {
        return Ok(IterationBudget {
            count: 1,
            degenerate: true,
        });
    }
    let c = snapped_ceil(x);
    Ok(IterationBudget {
        count: if c >= u64::MAX as f64 { u64::MAX } else { c as u64 },
        degenerate: false,
    })
}

/// [`iteration_budget`] for a system configuration.
pub fn global_iterations(cfg: &SystemConfig) -> Result<IterationBudget> {
    iteration_budget(&BudgetParams {
        k: cfg.k(),
        eps_local: cfg.eps_local,
        eps_gap: cfg.eps_gap,
        lambda_reg: cfg.lambda_reg,
        mu_smooth: cfg.mu_smooth,
        zeta_convex: cfg.zeta_convex,
        n_total: cfg.n_total as f64,
        sigma_product: cfg.sigma_product_value(),
    })
}

/// Local compute time `c n / eps_l`.
pub fn local_compute_time(c: f64, n: usize, eps_local: f64) -> Result<f64> {
    if eps_local == 0.0 {
        return Err(Error::Divergent(
            "eps_local = 0 needs infinitely many local steps".into(),
        ));
    }
    if !(c.is_finite() && c >= 0.0) || !(eps_local > 0.0 && eps_local < 1.0) {
        return Err(domain("need c >= 0 and eps_local in (0, 1)"));
    }
    Ok(c * n as f64 / eps_local)
}

/// Centralized training time `c N / eps_G`.
pub fn centralized_time(c: f64, n_total: usize, eps_gap: f64) -> Result<f64> {
    if eps_gap == 0.0 {
        return Err(Error::Divergent("eps_gap = 0 needs infinitely many iterations".into()));
    }
    if !(c.is_finite() && c >= 0.0) || !(eps_gap > 0.0 && eps_gap < 1.0) {
        return Err(domain("need c >= 0 and eps_gap in (0, 1)"));
    }
    Ok(c * n_total as f64 / eps_gap)
}

/// Lower and upper completion-time bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lower_s: f64,
    pub upper_s: f64,
    /// Some outage in the bounds rounds to one.
    pub divergent: bool,
}

/// Monte-Carlo completion time with its bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompletionEstimate {
    pub mean_s: f64,
    pub stderr_s: f64,
    pub trials: usize,
    pub lower_bound_s: f64,
    pub upper_bound_s: f64,
    pub iterations_m_k: u64,
    /// Some phase is in certain outage; the mean is infinite.
    pub certain_outage: bool,
}

fn expected_tx(p: Outage, k: usize) -> f64 {
    expected_max_tx_iid(p, k).unwrap_or(f64::INFINITY)
}

/// Closed-form bound on the average completion time, evaluated with every
/// device at the given outages.
fn bound_at(cfg: &SystemConfig, m_k: f64, dist: Outage, up: Outage, mul: Outage) -> f64 {
    let k = cfg.k();
    let w = cfg.slot_seconds;
    let t_dist = w * cfg.max_block() as f64 * expected_tx(dist, k);
    let t_iter = cfg.max_compute_load() / cfg.eps_local + w * expected_tx(up, k) + w * mul.expected_tx();
    t_dist + m_k * t_iter
}

/// Outages of the worst and best device: `(dist, up, mul)` at the minimum
/// and at the maximum mean SNRs.
fn extreme_outages(cfg: &SystemConfig) -> Result<[(Outage, Outage, Outage); 2]> {
    if cfg.ideal_channel {
        let never = (Outage::NEVER, Outage::NEVER, Outage::NEVER);
        return Ok([never, never]);
    }
    let k = cfg.k();
    let r = &cfg.radio;
    let at = |rho: f64, eta: f64| -> Result<(Outage, Outage, Outage)> {
        Ok((
            outage_data_dist(rho, k, r)?,
            outage_local_update_oma(eta, k, r)?,
            outage_worstbest_multicast(rho, k, r)?,
        ))
    };
    Ok([
        at(cfg.snr.rho_min(), cfg.snr.eta_min())?,
        at(cfg.snr.rho_max(), cfg.snr.eta_max())?,
    ])
}

/// Lower and upper bounds on the average completion time. The upper bound
/// puts every device at the minimum mean SNRs, the lower at the maximum;
/// both use the largest block and the largest compute load.
///
/// Only defined for OMA.
pub fn completion_bounds(cfg: &SystemConfig) -> Result<Bounds> {
    cfg.validate()?;
    if let Access::Noma { .. } = cfg.access {
        return Err(domain("closed-form bounds exist for OMA only"));
    }
    let m_k = global_iterations(cfg)?.count as f64;
    let [(d_hi, u_hi, m_hi), (d_lo, u_lo, m_lo)] = extreme_outages(cfg)?;
    let upper_s = bound_at(cfg, m_k, d_hi, u_hi, m_hi);
    let lower_s = bound_at(cfg, m_k, d_lo, u_lo, m_lo);
    Ok(Bounds {
        lower_s,
        upper_s,
        divergent: !upper_s.is_finite() || !lower_s.is_finite(),
    })
}

/// Large-dataset upper bound `w N / (1 - p^dist_max) + M_K max_k c_k n_k / eps_l`.
pub fn large_data_upper(cfg: &SystemConfig) -> Result<f64> {
    cfg.validate()?;
    let m_k = global_iterations(cfg)?.count as f64;
    let p = if cfg.ideal_channel {
        Outage::NEVER
    } else {
        outage_data_dist(cfg.snr.rho_min(), cfg.k(), &cfg.radio)?
    };
    Ok(cfg.slot_seconds * cfg.n_total as f64 * p.expected_tx() + m_k * cfg.max_compute_load() / cfg.eps_local)
}

/// Draws `max_k` of the data-distribution time in slots.
fn sample_dist_slots(rng: &mut SimRng, models: &[TxCountModel], sizes: &[usize], mode: DistModel) -> f64 {
    let mut worst = 0.0f64;
    for (&m, &n) in models.iter().zip(sizes) {
        if n == 0 {
            continue;
        }
        let slots = match mode {
            DistModel::Scaled => n as f64 * sample_tx_count(m, rng.random()) as f64,
            DistModel::PerExample => n as f64 + sample_failures(rng, m.outage(), n),
        };
        worst = worst.max(slots);
    }
    worst
}

/// Failures before `n` successes (negative binomial), via its
/// gamma-Poisson mixture.
fn sample_failures(rng: &mut SimRng, o: Outage, n: usize) -> f64 {
    if o.prob() == 0.0 {
        return 0.0;
    }
    let scale = o.prob() / o.success();
    let rate = Gamma::new(n as f64, scale).map_or(f64::INFINITY, |g| g.sample(rng));
    if rate <= 0.0 {
        0.0
    } else {
        Poisson::new(rate).map_or(f64::INFINITY, |p| p.sample(rng))
    }
}

/// Monte-Carlo average completion time.
///
/// Each trial draws the distribution phase once and then every one of the
/// `M_K` iterations afresh. The upload maximum is drawn directly from its
/// CDF. The random stream is selected by `(seed, K)`.
pub fn avg_completion_mc(cfg: &SystemConfig, trials: usize, seed: u64) -> Result<CompletionEstimate> {
    cfg.validate()?;
    if trials == 0 {
        return Err(domain("trials must be at least 1"));
    }
    let k = cfg.k();
    let m_k = global_iterations(cfg)?.count;
    let (lower_bound_s, upper_bound_s) = match cfg.access {
        Access::Oma => {
            let b = completion_bounds(cfg)?;
            (b.lower_s, b.upper_s)
        }
        Access::Noma { .. } => (0.0, f64::INFINITY),
    };
    let outages = cfg.phase_outages(rng::substream(seed, k as u64))?;
    let mut est = CompletionEstimate {
        mean_s: f64::INFINITY,
        stderr_s: f64::INFINITY,
        trials,
        lower_bound_s,
        upper_bound_s,
        iterations_m_k: m_k,
        certain_outage: true,
    };
    if outages.any_certain() {
        return Ok(est);
    }
    let dist: Vec<TxCountModel> = outages
        .dist
        .iter()
        .map(|&o| TxCountModel::from_outage(o))
        .collect::<Result<_>>()?;
    let up = MaxTxSampler::new(&outages.up)?;
    let mul = MaxTxSampler::new(&[outages.mul])?;
    let w = cfg.slot_seconds;
    let t_local = cfg.max_compute_load() / cfg.eps_local;

    let mut rng = rng::stream(seed, k as u64);
    let mut acc = Running::default();
    for _ in 0..trials {
        let mut slots = sample_dist_slots(&mut rng, &dist, &cfg.partition_sizes, cfg.dist_model);
        let mut comm = 0u64;
        for _ in 0..m_k {
            comm = comm
                .saturating_add(up.draw(&mut rng))
                .saturating_add(mul.draw(&mut rng));
        }
        slots += comm as f64;
        acc.push(w * slots + m_k as f64 * t_local);
    }
    est.mean_s = acc.mean();
    est.stderr_s = acc.stderr();
    est.certain_outage = false;
    Ok(est)
}
