//! Transmission counts under retransmit-until-success.
//!
//! A link with outage probability `p` needs a geometric number of attempts
//! `L` with `P[L = l] = p^{l-1}(1 - p)`. The completion time depends on the
//! maximum of such counts across devices.

use rand::Rng;

use crate::channel_model::Outage;
use crate::error::{domain, Error, Result};
use crate::rng;
use crate::stats::Running;

/// Tail terms below this are dropped from the complementary-CDF sums.
const TAIL_CUTOFF: f64 = 1e-12;

/// Below this value of `-ln p` the expected maximum is evaluated by
/// Euler-Maclaurin instead of term-by-term summation.
const SLOW_DECAY: f64 = 1e-3;

/// Geometric distribution of the number of transmissions on one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxCountModel {
    outage: Outage,
}

impl TxCountModel {
    pub fn new(p: f64) -> Result<Self> {
        Self::from_outage(Outage::from_prob(p)?)
    }

    pub fn from_outage(outage: Outage) -> Result<Self> {
        if outage.is_certain() {
            return Err(Error::Divergent("outage probability 1 gives an infinite count".into()));
        }
        Ok(Self { outage })
    }

    pub fn p(&self) -> f64 {
        self.outage.prob()
    }

    pub fn outage(&self) -> Outage {
        self.outage
    }
}

/// `P[L = l] = p^{l-1}(1 - p)`.
pub fn geometric_pmf(model: TxCountModel, l: u64) -> Result<f64> {
    if l == 0 {
        return Err(domain("transmission count starts at 1"));
    }
    let o = model.outage;
    if o.prob() == 0.0 {
        return Ok(if l == 1 { 1.0 } else { 0.0 });
    }
    Ok(((l - 1) as f64 * o.ln_prob()).exp() * o.success())
}

/// Inverse-CDF sample: the smallest `L` with `1 - p^L > u`.
pub fn sample_tx_count(model: TxCountModel, u: f64) -> u64 {
    let ln_p = model.outage.ln_prob();
    if model.outage.prob() == 0.0 || u <= 0.0 {
        return 1;
    }
    let l = ((-u).ln_1p() / ln_p).floor() + 1.0;
    if l >= u64::MAX as f64 {
        u64::MAX
    } else {
        (l as u64).max(1)
    }
}

/// Expected maximum of `k` iid geometric counts with outage `p`.
///
/// Evaluated as `sum_{L>=0} 1 - (1 - p^L)^K`, stopping once a term drops
/// below 1e-12 and closing the remaining geometric tail. When `p` is so
/// close to one that the sum would need millions of terms, the integral
/// `H_K / (-ln p)` plus its Euler-Maclaurin corrections is used instead.
pub fn expected_max_tx_iid(p: Outage, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(domain("number of devices must be at least 1"));
    }
    if p.is_certain() {
        return Err(Error::Divergent("expected count with outage 1".into()));
    }
    if p.prob() == 0.0 {
        return Ok(1.0);
    }
    if k == 1 {
        return Ok(1.0 / p.success());
    }
    let a = -p.ln_prob();
    let kf = k as f64;
    if a < SLOW_DECAY {
        let harmonic: f64 = (1..=k).map(|j| 1.0 / j as f64).sum();
        let correction = match k {
            2 => a.powi(3) / 120.0,
            3 => -a.powi(3) / 120.0,
            _ => 0.0,
        };
        return Ok(harmonic / a + 0.5 + correction);
    }
    let mut sum = 1.0;
    let mut l = 1.0;
    loop {
        let pl = (-a * l).exp();
        let term = -(kf * (-pl).ln_1p()).exp_m1();
        sum += term;
        if term < TAIL_CUTOFF {
            // remaining terms are K p^L p^j to first order
            sum += term * p.prob() / p.success();
            return Ok(sum);
        }
        l += 1.0;
    }
}

/// Bounds `(1/(1-p), K/(1-p))` on [`expected_max_tx_iid`].
pub fn expected_max_tx_bounds(p: Outage, k: usize) -> Result<(f64, f64)> {
    if k == 0 {
        return Err(domain("number of devices must be at least 1"));
    }
    if p.is_certain() {
        return Err(Error::Divergent("expected count with outage 1".into()));
    }
    let one = 1.0 / p.success();
    Ok((one, k as f64 * one))
}

/// Monte-Carlo estimate of `E[max_k w_k L_k]` with independent counts.
/// Returns `(mean, stderr)`.
pub fn expected_max_weighted_tx_mc(
    outages: &[Outage],
    weights: &[f64],
    trials: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if outages.is_empty() || outages.len() != weights.len() {
        return Err(domain("need one weight per outage and at least one link"));
    }
    if trials == 0 {
        return Err(domain("trials must be at least 1"));
    }
    let models = outages
        .iter()
        .map(|&o| TxCountModel::from_outage(o))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = rng::stream(seed, outages.len() as u64);
    let mut acc = Running::default();
    for _ in 0..trials {
        let mut worst = 0.0f64;
        for (&m, &w) in models.iter().zip(weights) {
            let l = sample_tx_count(m, rng.random());
            worst = worst.max(w * l as f64);
        }
        acc.push(worst);
    }
    Ok((acc.mean(), acc.stderr()))
}

/// Samples `max_k L_k` for a fixed set of links in one draw, by inverting
/// the CDF `prod_k (1 - p_k^L)`.
#[derive(Debug, Clone)]
pub struct MaxTxSampler {
    ln_p: Vec<f64>,
    cdf: Vec<f64>,
}

impl MaxTxSampler {
    const TABLE_LEN: usize = 4096;

    pub fn new(outages: &[Outage]) -> Result<Self> {
        if outages.is_empty() {
            return Err(domain("sampler needs at least one link"));
        }
        if outages.iter().any(|o| o.is_certain()) {
            return Err(Error::Divergent("outage probability 1 gives an infinite count".into()));
        }
        let ln_p: Vec<f64> = outages.iter().filter(|o| o.prob() > 0.0).map(|o| o.ln_prob()).collect();
        let mut s = Self { ln_p, cdf: Vec::new() };
        for l in 1..=Self::TABLE_LEN {
            let f = s.cdf_at(l as u64);
            s.cdf.push(f);
            if f >= 1.0 {
                break;
            }
        }
        Ok(s)
    }

    /// `P[max L <= l]`.
    pub fn cdf_at(&self, l: u64) -> f64 {
        let lf = l as f64;
        let log_f: f64 = self.ln_p.iter().map(|&lp| (-(lp * lf).exp()).ln_1p()).sum();
        log_f.exp()
    }

    /// Maps a uniform draw in `[0, 1)` to a sample of the maximum.
    pub fn sample(&self, u: f64) -> u64 {
        let i = self.cdf.partition_point(|&f| f <= u);
        if i < self.cdf.len() {
            return i as u64 + 1;
        }
        // beyond the table: bracket by doubling, then bisect
        let mut lo = self.cdf.len() as u64;
        let mut hi = lo.saturating_mul(2);
        while self.cdf_at(hi) <= u {
            lo = hi;
            if hi == u64::MAX {
                return hi;
            }
            hi = hi.saturating_mul(2);
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.cdf_at(mid) <= u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> u64 {
        self.sample(rng.random())
    }
}
