//! Outage probabilities of the three communication phases under Rayleigh
//! fading.
//!
//! With Rayleigh fading the instantaneous SNR of a link is exponential with
//! the link's mean SNR, so a link whose capacity must exceed a fixed rate
//! fails with probability `1 - exp(-threshold / mean)`. OMA splits the band
//! and the device power evenly over `K` devices; NOMA uses the full band
//! with successive interference cancellation and has no closed form, so it
//! is estimated by Monte Carlo.

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{domain, positive, Result};
use crate::rng;

/// Converts decibels to a linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Converts a linear power ratio to decibels.
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Per-device mean SNRs, linear scale.
///
/// `rho_bar` is the mean SNR of the server-to-device link and `eta_bar`
/// that of the device-to-server link.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrProfile {
    rho_bar: Vec<f64>,
    eta_bar: Vec<f64>,
}

impl SnrProfile {
    pub fn new(rho_bar: Vec<f64>, eta_bar: Vec<f64>) -> Result<Self> {
        if rho_bar.is_empty() || rho_bar.len() != eta_bar.len() {
            return Err(domain(format!(
                "SNR lists must be non-empty and of equal length (got {} and {})",
                rho_bar.len(),
                eta_bar.len()
            )));
        }
        for &x in rho_bar.iter().chain(&eta_bar) {
            positive("mean SNR", x)?;
        }
        Ok(Self { rho_bar, eta_bar })
    }

    /// Builds a profile from values in dB.
    pub fn from_db(rho_db: &[f64], eta_db: &[f64]) -> Result<Self> {
        Self::new(
            rho_db.iter().map(|&d| db_to_linear(d)).collect(),
            eta_db.iter().map(|&d| db_to_linear(d)).collect(),
        )
    }

    /// Every device gets the same pair of mean SNRs.
    pub fn homogeneous(k: usize, rho_bar: f64, eta_bar: f64) -> Result<Self> {
        Self::new(vec![rho_bar; k], vec![eta_bar; k])
    }

    pub fn len(&self) -> usize {
        self.rho_bar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho_bar.is_empty()
    }

    pub fn rho_bar(&self) -> &[f64] {
        &self.rho_bar
    }

    pub fn eta_bar(&self) -> &[f64] {
        &self.eta_bar
    }

    pub fn rho_min(&self) -> f64 {
        self.rho_bar.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn rho_max(&self) -> f64 {
        self.rho_bar.iter().copied().fold(0.0, f64::max)
    }

    pub fn eta_min(&self) -> f64 {
        self.eta_bar.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn eta_max(&self) -> f64 {
        self.eta_bar.iter().copied().fold(0.0, f64::max)
    }
}

/// Bandwidth and the fixed rates of the three phases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioConfig {
    pub bandwidth_hz: f64,
    pub rate_dist: f64,
    pub rate_up: f64,
    pub rate_mul: f64,
}

impl RadioConfig {
    pub fn new(bandwidth_hz: f64, rate_dist: f64, rate_up: f64, rate_mul: f64) -> Result<Self> {
        let radio = Self {
            bandwidth_hz,
            rate_dist,
            rate_up,
            rate_mul,
        };
        radio.validate()?;
        Ok(radio)
    }

    pub fn validate(&self) -> Result<()> {
        positive("bandwidth_hz", self.bandwidth_hz)?;
        positive("rate_dist", self.rate_dist)?;
        positive("rate_up", self.rate_up)?;
        positive("rate_mul", self.rate_mul)?;
        Ok(())
    }
}

/// SNR a link needs to carry `spectral_eff` bit/s/Hz: `2^r - 1`.
pub fn snr_threshold(spectral_eff: f64) -> f64 {
    (spectral_eff * std::f64::consts::LN_2).exp_m1()
}

/// Outage probability of one link, stored with its complement so that
/// probabilities close to one keep their precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outage {
    p: f64,
    q: f64,
}

impl Outage {
    /// A link that never fails.
    pub const NEVER: Outage = Outage { p: 0.0, q: 1.0 };

    /// Sentinel for an outage that rounds to one; expected counts are
    /// infinite.
    pub const CERTAIN: Outage = Outage { p: 1.0, q: 0.0 };

    /// Rayleigh outage `1 - exp(-x)` with `x = threshold / mean SNR`.
    pub fn rayleigh(x: f64) -> Outage {
        if x.is_nan() {
            return Outage::CERTAIN;
        }
        let p = -(-x).exp_m1();
        if p >= 1.0 {
            Outage::CERTAIN
        } else {
            Outage { p, q: (-x).exp() }
        }
    }

    /// Wraps a plain probability in `[0, 1]`.
    pub fn from_prob(p: f64) -> Result<Outage> {
        if !(0.0..=1.0).contains(&p) {
            return Err(domain(format!("outage probability must lie in [0, 1], got {p}")));
        }
        if p >= 1.0 {
            Ok(Outage::CERTAIN)
        } else {
            Ok(Outage { p, q: 1.0 - p })
        }
    }

    pub fn prob(self) -> f64 {
        self.p
    }

    /// Success probability `1 - p`.
    pub fn success(self) -> f64 {
        self.q
    }

    pub fn is_certain(self) -> bool {
        self.p >= 1.0
    }

    /// `ln p`, accurate for `p` near one.
    pub fn ln_prob(self) -> f64 {
        if self.q < 0.5 {
            (-self.q).ln_1p()
        } else {
            self.p.ln()
        }
    }

    /// Mean number of transmissions, `1 / (1 - p)`.
    pub fn expected_tx(self) -> f64 {
        if self.is_certain() {
            f64::INFINITY
        } else {
            1.0 / self.q
        }
    }
}

fn devices(k: usize) -> Result<f64> {
    if k == 0 {
        return Err(domain("number of devices must be at least 1"));
    }
    Ok(k as f64)
}

/// Data-distribution outage of one device when `k` devices share the band:
/// `1 - exp(-(2^{K R/B} - 1) / rho)`.
pub fn outage_data_dist(rho_bar_k: f64, k: usize, radio: &RadioConfig) -> Result<Outage> {
    outage_data_dist_scaled(rho_bar_k, k, radio, 1.0)
}

/// [`outage_data_dist`] with the device's SNR threshold multiplied by
/// `theta_scale` (hook for non-uniform allocation).
pub fn outage_data_dist_scaled(rho_bar_k: f64, k: usize, radio: &RadioConfig, theta_scale: f64) -> Result<Outage> {
    positive("rho_bar", rho_bar_k)?;
    positive("theta_scale", theta_scale)?;
    let kf = devices(k)?;
    let thr = snr_threshold(kf * radio.rate_dist / radio.bandwidth_hz) * theta_scale;
    Ok(Outage::rayleigh(thr / rho_bar_k))
}

/// Upload outage under OMA: `1 - exp(-(2^{K R/B} - 1) / (K eta))`.
pub fn outage_local_update_oma(eta_bar_k: f64, k: usize, radio: &RadioConfig) -> Result<Outage> {
    outage_local_update_oma_scaled(eta_bar_k, k, radio, 1.0)
}

/// [`outage_local_update_oma`] with a threshold multiplier.
pub fn outage_local_update_oma_scaled(
    eta_bar_k: f64,
    k: usize,
    radio: &RadioConfig,
    theta_scale: f64,
) -> Result<Outage> {
    positive("eta_bar", eta_bar_k)?;
    positive("theta_scale", theta_scale)?;
    let kf = devices(k)?;
    let thr = snr_threshold(kf * radio.rate_up / radio.bandwidth_hz) * theta_scale;
    Ok(Outage::rayleigh(thr / (kf * eta_bar_k)))
}

/// Multicast outage, governed by the worst receiver. The minimum of
/// independent exponentials is exponential with the summed rates.
pub fn outage_multicast(snr: &SnrProfile, radio: &RadioConfig) -> Result<Outage> {
    if snr.is_empty() {
        return Err(domain("multicast needs at least one receiver"));
    }
    let rate_sum: f64 = snr.rho_bar().iter().map(|r| 1.0 / r).sum();
    Ok(Outage::rayleigh(
        snr_threshold(radio.rate_mul / radio.bandwidth_hz) * rate_sum,
    ))
}

/// Multicast outage when all `k` receivers sit at the same extreme SNR:
/// `1 - exp(-(K / rho)(2^{R/B} - 1))`. Pass the minimum SNR for the worst
/// case and the maximum for the best case.
pub fn outage_worstbest_multicast(extreme_snr: f64, k: usize, radio: &RadioConfig) -> Result<Outage> {
    positive("extreme SNR", extreme_snr)?;
    let kf = devices(k)?;
    Ok(Outage::rayleigh(
        kf / extreme_snr * snr_threshold(radio.rate_mul / radio.bandwidth_hz),
    ))
}

/// Monte-Carlo upload outage under NOMA with SIC.
///
/// Every trial draws the instantaneous SNRs, decodes in descending order
/// and treats the not-yet-decoded (weaker) devices as interference. Outages
/// are tallied against the device index, not against its rank.
pub fn outage_local_update_noma(
    snr: &SnrProfile,
    radio: &RadioConfig,
    trials: usize,
    seed: u64,
) -> Result<Vec<Outage>> {
    if trials == 0 {
        return Err(domain("NOMA estimate needs at least one trial"));
    }
    let k = snr.len();
    let thr = snr_threshold(radio.rate_up / radio.bandwidth_hz);
    let mut rng = rng::stream(seed, k as u64);
    let mut eta = vec![0.0; k];
    let mut order: Vec<usize> = (0..k).collect();
    let mut fails = vec![0u64; k];
    for _ in 0..trials {
        for (e, &mean) in eta.iter_mut().zip(snr.eta_bar()) {
            let x: f64 = rng.sample(Exp1);
            *e = mean * x;
        }
        order.sort_unstable_by(|&a, &b| eta[b].total_cmp(&eta[a]));
        let mut interference = 0.0;
        for &dev in order.iter().rev() {
            if eta[dev] < thr * (interference + 1.0) {
                fails[dev] += 1;
            }
            interference += eta[dev];
        }
    }
    fails
        .into_iter()
        .map(|f| Outage::from_prob(f as f64 / trials as f64))
        .collect()
}

/// Outages of all three phases for one system.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseOutages {
    pub dist: Vec<Outage>,
    pub up: Vec<Outage>,
    pub mul: Outage,
}

impl PhaseOutages {
    /// OMA outages with uniform allocation.
    pub fn oma(snr: &SnrProfile, radio: &RadioConfig) -> Result<Self> {
        Self::oma_scaled(snr, radio, &vec![1.0; snr.len()])
    }

    /// OMA outages with per-device threshold multipliers.
    pub fn oma_scaled(snr: &SnrProfile, radio: &RadioConfig, theta_scale: &[f64]) -> Result<Self> {
        let k = snr.len();
        if theta_scale.len() != k {
            return Err(domain("one threshold multiplier per device is required"));
        }
        let dist = snr
            .rho_bar()
            .iter()
            .zip(theta_scale)
            .map(|(&r, &s)| outage_data_dist_scaled(r, k, radio, s))
            .collect::<Result<_>>()?;
        let up = snr
            .eta_bar()
            .iter()
            .zip(theta_scale)
            .map(|(&e, &s)| outage_local_update_oma_scaled(e, k, radio, s))
            .collect::<Result<_>>()?;
        Ok(Self {
            dist,
            up,
            mul: outage_multicast(snr, radio)?,
        })
    }

    /// Every phase error-free.
    pub fn ideal(k: usize) -> Self {
        Self {
            dist: vec![Outage::NEVER; k],
            up: vec![Outage::NEVER; k],
            mul: Outage::NEVER,
        }
    }

    pub fn any_certain(&self) -> bool {
        self.mul.is_certain() || self.dist.iter().chain(&self.up).any(|o| o.is_certain())
    }
}
