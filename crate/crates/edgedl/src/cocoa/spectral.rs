//! Data-dependent constants of the convergence analysis.
//!
//! * `sigma_max`: the largest squared singular value over all blocks `X_[k]`.
//! * `sigma'`: `(1/K) max_alpha ||X alpha||^2 / sum_k ||X_[k] alpha_[k]||^2`.
//!
//! For the second, write `X_[k] alpha_[k] = U_k z_k` with `U_k` an
//! orthonormal basis of the block's column space. The ratio becomes the
//! Rayleigh quotient of `sum_k U_k U_k^T`, which power iteration climbs.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::data::{axpy, dot, Dataset, Partition};
use crate::rng;

const MAX_POWER_STEPS: usize = 100_000;

/// How `sigma'` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SigmaPrimeMode {
    /// The bound `sigma' <= 1`, valid for any partition.
    #[default]
    SafeBound,
    /// Best ratio found by power iteration.
    Estimate,
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Largest eigenvalue of `X_[k]^T X_[k]` over all blocks, by power
/// iteration to relative tolerance `tol`.
pub fn sigma_max(data: &Dataset, part: &Partition, tol: f64) -> f64 {
    let m = data.features();
    let mut best = 0.0f64;
    for (b, block) in part.blocks().iter().enumerate() {
        if block.is_empty() {
            continue;
        }
        let mut r = rng::stream(0x5157_4d41, b as u64);
        let mut u: Vec<f64> = block.iter().map(|_| r.sample(StandardNormal)).collect();
        normalize(&mut u);
        let mut xu = vec![0.0; m];
        let mut last = f64::NAN;
        for _ in 0..MAX_POWER_STEPS {
            xu.iter_mut().for_each(|v| *v = 0.0);
            for (&i, &ui) in block.iter().zip(&u) {
                axpy(ui, data.column(i), &mut xu);
            }
            let rayleigh = dot(&xu, &xu);
            for (&i, ui) in block.iter().zip(u.iter_mut()) {
                *ui = dot(data.column(i), &xu);
            }
            if normalize(&mut u) == 0.0 {
                break;
            }
            if (rayleigh - last).abs() <= tol * rayleigh {
                last = rayleigh;
                break;
            }
            last = rayleigh;
        }
        if last.is_finite() {
            best = best.max(last);
        }
    }
    best
}

/// Orthonormal basis of the column space of a block, as columns of length
/// `M` stored back to back.
fn column_space(data: &Dataset, block: &[usize]) -> Vec<f64> {
    let m = data.features();
    let cols: Vec<f64> = block.iter().flat_map(|&i| data.column(i).iter().copied()).collect();
    let x = DMatrix::from_column_slice(m, block.len(), &cols);
    let svd = x.svd(true, false);
    let top = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let u = svd.u.expect("left singular vectors requested");
    let mut basis = Vec::new();
    for (j, &s) in svd.singular_values.iter().enumerate() {
        if top > 0.0 && s > 1e-10 * top {
            basis.extend(u.column(j).iter());
        }
    }
    basis
}

/// `sigma'` for the given partition. `trials` random starts are used in
/// estimate mode; the result never exceeds the safe bound 1.
pub fn sigma_prime(data: &Dataset, part: &Partition, mode: SigmaPrimeMode, trials: usize, seed: u64) -> f64 {
    let k = part.k();
    if mode == SigmaPrimeMode::SafeBound || k == 1 {
        return 1.0;
    }
    let m = data.features();
    let bases: Vec<f64> = part
        .blocks()
        .iter()
        .filter(|b| !b.is_empty())
        .flat_map(|b| column_space(data, b))
        .collect();
    if bases.is_empty() {
        return 1.0 / k as f64;
    }
    // y -> sum_k U_k U_k^T y
    let apply = |y: &[f64], out: &mut [f64]| {
        out.iter_mut().for_each(|v| *v = 0.0);
        for col in bases.chunks(m) {
            axpy(dot(col, y), col, out);
        }
    };
    let mut best = 1.0f64;
    let mut r = rng::stream(seed, k as u64);
    let mut next = vec![0.0; m];
    for _ in 0..trials.max(1) {
        let mut y: Vec<f64> = (0..m).map(|_| r.sample(StandardNormal)).collect();
        normalize(&mut y);
        let mut last = 0.0;
        for _ in 0..MAX_POWER_STEPS {
            apply(&y, &mut next);
            let rayleigh = dot(&y, &next);
            std::mem::swap(&mut y, &mut next);
            if normalize(&mut y) == 0.0 {
                break;
            }
            if (rayleigh - last).abs() <= 1e-13 * rayleigh {
                last = rayleigh;
                break;
            }
            last = rayleigh;
        }
        best = best.max(last);
    }
    (best / k as f64).min(1.0)
}
