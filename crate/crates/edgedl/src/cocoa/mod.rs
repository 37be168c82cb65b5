//! CoCoA: distributed dual coordinate ascent with a quadratic regularizer.
//!
//! The primal problem is
//! `F(w) = (1/N) sum_n l_n(x_n^T w) + (lambda/2) |w|^2` and its dual
//! `D(alpha) = -(1/N) sum_n l_n^*(-alpha_n) - (lambda/2) |w(alpha)|^2`
//! with `w(alpha) = X alpha / (lambda N)`.
//!
//! Every global iteration each device improves its own block of `alpha`
//! by gradient descent on a local subproblem ([`local`]); the server adds
//! the scaled updates together.

mod data;
pub mod local;
mod loss;
mod spectral;

use rayon::prelude::*;

pub use data::{partition_dataset, partition_sizes, Dataset, Partition, PartitionMode};
pub use local::{local_solve, BlockUpdate, LocalSolveOptions, Subproblem};
pub use loss::LossKit;
pub use spectral::{sigma_max, sigma_prime, SigmaPrimeMode};

use crate::completion_time::{iteration_budget, BudgetParams};
use crate::error::{domain, positive, unit_open, Error, Result};

pub(crate) use data::{axpy, dot};

/// Steps between full recomputations of `v = X alpha`.
const REFRESH_EVERY: usize = 50;

/// Dual iterate with its shared vector and primal model.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    pub alpha: Vec<f64>,
    /// `X alpha`.
    pub shared_v: Vec<f64>,
    /// `v / (lambda N)`.
    pub model_w: Vec<f64>,
    lambda_reg: f64,
    steps: usize,
}

impl DualState {
    pub fn new(data: &Dataset, alpha: Vec<f64>, lambda_reg: f64) -> Result<Self> {
        positive("lambda", lambda_reg)?;
        if alpha.len() != data.len() {
            return Err(domain(format!(
                "alpha has {} entries for {} examples",
                alpha.len(),
                data.len()
            )));
        }
        let mut s = Self {
            alpha,
            shared_v: Vec::new(),
            model_w: Vec::new(),
            lambda_reg,
            steps: 0,
        };
        s.refresh(data);
        Ok(s)
    }

    /// The feasible starting point of `kit`.
    pub fn initial(data: &Dataset, kit: LossKit, lambda_reg: f64) -> Result<Self> {
        let alpha = data.labels().iter().map(|&y| kit.initial_dual(y)).collect();
        Self::new(data, alpha, lambda_reg)
    }

    pub fn lambda_reg(&self) -> f64 {
        self.lambda_reg
    }

    /// Recomputes `v` and `w` from `alpha`.
    pub fn refresh(&mut self, data: &Dataset) {
        self.shared_v = data.times(&self.alpha);
        self.sync_model(data.len());
    }

    fn sync_model(&mut self, n: usize) {
        let scale = 1.0 / (self.lambda_reg * n as f64);
        self.model_w = self.shared_v.iter().map(|v| v * scale).collect();
    }
}

/// Applies `alpha += gamma sum_k Delta alpha_[k]`. Updates are added in the
/// order given; their blocks must be disjoint.
pub fn global_step(
    state: &mut DualState,
    data: &Dataset,
    updates: &[(&[usize], &BlockUpdate)],
    gamma: f64,
) -> Result<()> {
    let mut touched = vec![false; data.len()];
    for (block, up) in updates {
        if block.len() != up.delta.len() {
            return Err(domain("block and update lengths differ"));
        }
        for &i in *block {
            if i >= data.len() || std::mem::replace(&mut touched[i], true) {
                return Err(domain(format!("example {i} updated twice or out of range")));
            }
        }
    }
    if gamma == 0.0 {
        return Ok(());
    }
    for (block, up) in updates {
        for (&i, &d) in block.iter().zip(&up.delta) {
            state.alpha[i] += gamma * d;
        }
        axpy(gamma, &up.xdelta, &mut state.shared_v);
    }
    state.steps += 1;
    if state.steps.is_multiple_of(REFRESH_EVERY) {
        state.refresh(data);
    } else {
        state.sync_model(data.len());
    }
    Ok(())
}

/// Primal objective `F(w)`.
pub fn primal(w: &[f64], data: &Dataset, kit: LossKit, lambda_reg: f64) -> f64 {
    let n = data.len();
    let risk: f64 = (0..n).map(|i| kit.loss(dot(data.column(i), w), data.label(i))).sum();
    risk / n as f64 + 0.5 * lambda_reg * dot(w, w)
}

/// Dual objective `D(alpha)`.
pub fn dual(state: &DualState, data: &Dataset, kit: LossKit) -> f64 {
    let n = data.len();
    let conj: f64 = (0..n).map(|i| kit.conj_neg(state.alpha[i], data.label(i))).sum();
    -conj / n as f64 - 0.5 * state.lambda_reg * dot(&state.model_w, &state.model_w)
}

/// Duality gap `F(w(alpha)) - D(alpha)`.
pub fn duality_gap(state: &DualState, data: &Dataset, kit: LossKit) -> Result<f64> {
    let n = data.len();
    let w = &state.model_w;
    let mut sum = 0.0;
    for i in 0..n {
        let y = data.label(i);
        sum += kit.loss(dot(data.column(i), w), y) + kit.conj_neg(state.alpha[i], y);
    }
    let gap = sum / n as f64 + state.lambda_reg * dot(w, w);
    if !gap.is_finite() {
        return Err(Error::Divergent(format!("duality gap is {gap}")));
    }
    Ok(gap)
}

/// One row of a training trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    /// Global iteration; 0 is the starting point.
    pub t: usize,
    pub duality_gap: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrace {
    pub records: Vec<TraceRecord>,
    /// Estimated `sigma'` of the partition.
    pub sigma_prime: f64,
    pub sigma_max: f64,
    /// `sigma'` used in the local subproblems.
    pub sigma_prime_used: f64,
    /// Global iterations run.
    pub iterations_used: usize,
    /// Iteration budget from the measured constants.
    pub m_k_budget: u64,
    pub converged: bool,
    pub final_w: Vec<f64>,
}

impl TrainTrace {
    pub fn final_gap(&self) -> f64 {
        self.records.last().map_or(f64::INFINITY, |r| r.duality_gap)
    }

    pub fn final_accuracy(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.accuracy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub k_devices: usize,
    pub kit: LossKit,
    pub lambda_reg: f64,
    pub eps_local: f64,
    pub eps_gap: f64,
    pub gamma: f64,
    pub sigma_prime_mode: SigmaPrimeMode,
    pub partition: PartitionMode,
    pub seed: u64,
    pub max_iters: usize,
    /// Inner loops stop once every gradient entry is at most this.
    pub grad_tol: f64,
    /// Local iterations; `None` means `ceil(1 / eps_local)`.
    pub inner_iters: Option<usize>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            k_devices: 1,
            kit: LossKit::Logistic,
            lambda_reg: 0.01,
            eps_local: 1e-3,
            eps_gap: 1e-3,
            gamma: 1.0,
            sigma_prime_mode: SigmaPrimeMode::SafeBound,
            partition: PartitionMode::Uniform,
            seed: 0,
            max_iters: 1000,
            grad_tol: 1e-10,
            inner_iters: None,
        }
    }
}

impl TrainOptions {
    fn validate(&self) -> Result<()> {
        if self.k_devices == 0 {
            return Err(domain("k_devices must be at least 1"));
        }
        positive("lambda", self.lambda_reg)?;
        unit_open("eps_local", self.eps_local)?;
        unit_open("eps_gap", self.eps_gap)?;
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(domain(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        if self.max_iters == 0 {
            return Err(domain("max_iters must be at least 1"));
        }
        Ok(())
    }

    fn inner(&self) -> usize {
        self.inner_iters
            .unwrap_or_else(|| (1.0 / self.eps_local).ceil() as usize)
            .max(1)
    }
}

/// Runs CoCoA until the duality gap reaches `eps_gap` or `max_iters`
/// global iterations have passed.
///
/// A gap more than ten times the one 20 iterations earlier aborts with
/// [`Error::TrainingDiverged`].
pub fn train(data: &Dataset, opts: &TrainOptions) -> Result<TrainTrace> {
    opts.validate()?;
    let n = data.len();
    let k = opts.k_devices;
    let part = partition_dataset(n, k, opts.partition, opts.seed)?;
    let s_max = sigma_max(data, &part, 1e-10);
    let s_prime = sigma_prime(data, &part, SigmaPrimeMode::Estimate, 4, opts.seed);
    let s_used = match opts.sigma_prime_mode {
        SigmaPrimeMode::SafeBound => 1.0,
        SigmaPrimeMode::Estimate => s_prime,
    };
    let budget = iteration_budget(&BudgetParams {
        k,
        eps_local: opts.eps_local,
        eps_gap: opts.eps_gap,
        lambda_reg: opts.lambda_reg,
        mu_smooth: opts.kit.mu(),
        zeta_convex: 1.0,
        n_total: n as f64,
        sigma_product: s_prime * s_max,
    })?;

    let mut state = DualState::initial(data, opts.kit, opts.lambda_reg)?;
    let mut trace = TrainTrace {
        records: Vec::new(),
        sigma_prime: s_prime,
        sigma_max: s_max,
        sigma_prime_used: s_used,
        iterations_used: 0,
        m_k_budget: budget.count,
        converged: false,
        final_w: Vec::new(),
    };
    let record = |t: usize, state: &DualState| -> Result<TraceRecord> {
        Ok(TraceRecord {
            t,
            duality_gap: duality_gap(state, data, opts.kit)?,
            accuracy: data.accuracy(&state.model_w),
        })
    };
    trace.records.push(record(0, &state)?);

    let inner = opts.inner();
    for t in 1..=opts.max_iters {
        if trace.final_gap() <= opts.eps_gap {
            trace.converged = true;
            break;
        }
        let updates: Vec<BlockUpdate> = part
            .blocks()
            .par_iter()
            .map(|block| {
                let sub = Subproblem {
                    data,
                    state: &state,
                    block,
                    kit: opts.kit,
                    lambda_reg: opts.lambda_reg,
                    k_devices: k,
                    gamma: opts.gamma,
                    sigma_prime: s_used,
                };
                let step = 1.0 / sub.lipschitz(s_max);
                local_solve(
                    &sub,
                    &LocalSolveOptions {
                        step,
                        iters: inner,
                        grad_tol: opts.grad_tol,
                        record: false,
                    },
                )
            })
            .collect::<Result<_>>()?;
        let pairs: Vec<(&[usize], &BlockUpdate)> =
            part.blocks().iter().map(Vec::as_slice).zip(updates.iter()).collect();
        global_step(&mut state, data, &pairs, opts.gamma)?;
        let rec = record(t, &state)?;
        trace.records.push(rec);
        trace.iterations_used = t;
        if t >= 20 {
            let earlier = trace.records[t - 20].duality_gap;
            if rec.duality_gap > 10.0 * earlier.max(f64::MIN_POSITIVE) {
                trace.final_w = state.model_w.clone();
                return Err(Error::TrainingDiverged {
                    iteration: t,
                    gap: rec.duality_gap,
                    trace: Box::new(trace),
                });
            }
        }
    }
    trace.converged = trace.final_gap() <= opts.eps_gap;
    trace.final_w = state.model_w;
    Ok(trace)
}
