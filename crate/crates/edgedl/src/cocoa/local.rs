//! The local subproblem of one device and its gradient-descent solver.
//!
//! For block `P_k`, with `u = X_[k] d` and `w = v / (lambda N)`:
//!
//! ```text
//! dD_k(d) = (lambda/K) |w|^2 / 2 + (1/N) w^T u + (s / (2 lambda N^2)) |u|^2
//!         + (1/N) sum_{n in P_k} l_n^*(-alpha_n - d_n)
//! ```
//!
//! `s = gamma K sigma'` is the coupling weight. Minimising `dD_k` is
//! maximising the device's share of the dual improvement.

use super::data::{axpy, dot, Dataset};
use super::loss::LossKit;
use super::DualState;
use crate::error::{domain, Error, Result};

/// One device's subproblem at the current iterate.
#[derive(Debug, Clone, Copy)]
pub struct Subproblem<'a> {
    pub data: &'a Dataset,
    pub state: &'a DualState,
    pub block: &'a [usize],
    pub kit: LossKit,
    pub lambda_reg: f64,
    pub k_devices: usize,
    pub gamma: f64,
    pub sigma_prime: f64,
}

/// Gradient-descent settings for [`local_solve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalSolveOptions {
    /// Initial step; halved within an iteration until the objective does
    /// not increase.
    pub step: f64,
    pub iters: usize,
    /// Stop once every gradient entry is at most this in magnitude.
    pub grad_tol: f64,
    /// Keep the objective value after every step.
    pub record: bool,
}

/// Result of a local solve.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockUpdate {
    /// `Delta alpha` on the block, in block order.
    pub delta: Vec<f64>,
    /// `X_[k] Delta alpha`.
    pub xdelta: Vec<f64>,
    pub iters_run: usize,
    /// Objective before the first step and after each step, if recorded.
    pub objective: Vec<f64>,
}

impl Subproblem<'_> {
    fn n(&self) -> f64 {
        self.data.len() as f64
    }

    /// Weight of `|u|^2 / 2`: `gamma K sigma' / (lambda N^2)`.
    pub fn coupling(&self) -> f64 {
        self.gamma * self.k_devices as f64 * self.sigma_prime / (self.lambda_reg * self.n() * self.n())
    }

    /// Lipschitz constant of the gradient, using the block's largest
    /// squared singular value and the conjugate's smallest curvature.
    pub fn lipschitz(&self, block_sigma_max: f64) -> f64 {
        self.coupling() * block_sigma_max + self.kit.conj_curvature() / self.n()
    }

    /// `dD_k` at `delta` with `u = X_[k] delta` supplied.
    pub fn objective_with(&self, delta: &[f64], u: &[f64]) -> f64 {
        let n = self.n();
        let w = &self.state.model_w;
        let mut f = self.lambda_reg / self.k_devices as f64 * 0.5 * dot(w, w)
            + dot(w, u) / n
            + 0.5 * self.coupling() * dot(u, u);
        for (&i, &d) in self.block.iter().zip(delta) {
            f += self.kit.conj_neg(self.state.alpha[i] + d, self.data.label(i)) / n;
        }
        f
    }

    pub fn objective(&self, delta: &[f64]) -> f64 {
        self.objective_with(delta, &self.xdelta(delta))
    }

    /// `X_[k] delta`.
    pub fn xdelta(&self, delta: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.data.features()];
        for (&i, &d) in self.block.iter().zip(delta) {
            axpy(d, self.data.column(i), &mut u);
        }
        u
    }

    /// Gradient in `delta`, given `u = X_[k] delta`.
    pub fn gradient_with(&self, delta: &[f64], u: &[f64], out: &mut [f64]) {
        let n = self.n();
        let c = self.coupling();
        let z: Vec<f64> = self.state.model_w.iter().zip(u).map(|(w, u)| w / n + c * u).collect();
        for ((g, &i), &d) in out.iter_mut().zip(self.block).zip(delta) {
            let y = self.data.label(i);
            *g = dot(self.data.column(i), &z) + self.kit.conj_neg_grad(self.state.alpha[i] + d, y) / n;
        }
    }

    pub fn gradient(&self, delta: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; delta.len()];
        self.gradient_with(delta, &self.xdelta(delta), &mut g);
        g
    }
}

/// Runs gradient descent on `dD_k` from `Delta alpha = 0`.
///
/// Each step starts at `opts.step` and halves it until the objective does
/// not increase, so the sequence of objective values never rises. For
/// steps at most `1/L` no halving happens.
pub fn local_solve(sub: &Subproblem<'_>, opts: &LocalSolveOptions) -> Result<BlockUpdate> {
    if !(opts.step > 0.0 && opts.step.is_finite()) {
        return Err(domain("step must be finite and > 0"));
    }
    if opts.iters == 0 {
        return Err(domain("at least one inner iteration is required"));
    }
    let nb = sub.block.len();
    let m = sub.data.features();
    let mut delta = vec![0.0; nb];
    // a feasible start for kits with a bounded conjugate domain
    for (d, &i) in delta.iter_mut().zip(sub.block) {
        let a = sub.state.alpha[i];
        *d = sub.kit.project(a, sub.data.label(i)) - a;
    }
    let mut u = sub.xdelta(&delta);
    let mut f = sub.objective_with(&delta, &u);
    let mut grad = vec![0.0; nb];
    let mut trial = vec![0.0; nb];
    let mut trial_u = vec![0.0; m];
    let mut objective = Vec::new();
    if opts.record {
        objective.push(f);
    }
    let mut iters_run = 0;
    for it in 0..opts.iters {
        sub.gradient_with(&delta, &u, &mut grad);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { iteration: it });
        }
        if grad.iter().all(|g| g.abs() <= opts.grad_tol) {
            break;
        }
        let mut step = opts.step;
        let mut accepted = false;
        for _ in 0..60 {
            trial_u.copy_from_slice(&u);
            for (j, &i) in sub.block.iter().enumerate() {
                let a = sub.state.alpha[i];
                let y = sub.data.label(i);
                trial[j] = sub.kit.project(a + delta[j] - step * grad[j], y) - a;
                let moved = trial[j] - delta[j];
                if moved != 0.0 {
                    axpy(moved, sub.data.column(i), &mut trial_u);
                }
            }
            let ft = sub.objective_with(&trial, &trial_u);
            if ft <= f + 1e-15 * f.abs().max(1e-300) {
                accepted = true;
                f = ft.min(f);
                std::mem::swap(&mut delta, &mut trial);
                std::mem::swap(&mut u, &mut trial_u);
                break;
            }
            step *= 0.5;
        }
        iters_run = it + 1;
        if opts.record {
            objective.push(f);
        }
        if !accepted {
            break;
        }
    }
    Ok(BlockUpdate {
        delta,
        xdelta: u,
        iters_run,
        objective,
    })
}
