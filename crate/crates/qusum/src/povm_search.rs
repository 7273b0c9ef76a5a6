//! Numerical maximization of the measured relative entropy over POVMs for a
//! fixed state pair, including joint block measurements on tensor powers.
//!
//! POVMs are parametrized by unconstrained complex factor matrices A_i via
//! M_i = S^{-1/2} A_i^dagger A_i S^{-1/2},  S = sum_j A_j^dagger A_j,
//! which is complete by construction and surjective onto POVMs with a
//! full-rank normalizer. The objective is ascended with a central-difference
//! gradient and backtracking line search, from multiple starts: the
//! eigenbases of rho, sigma and log(sigma) - log(rho), any caller-provided
//! warm starts, and random draws.

use rand::Rng;
use rayon::prelude::*;

use crate::entropy::{kl_divergence_raw, measured_relative_entropy, quantum_relative_entropy};
use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix};
use crate::measurement::Povm;
use crate::rng::{RngHandle, StreamKind};
use crate::states::{tensor_power, DensityMatrix};
use num_complex::Complex64;

/// Search configuration. Defaults follow the artifact-wide conventions:
/// d^2 outcomes, eight restarts, relative gradient step 1e-6.
#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub restarts: usize,
    pub max_iters: usize,
    /// Stop once the relative objective gain over this many iterations
    /// drops below `rel_gain_tol`.
    pub stall_iters: usize,
    pub rel_gain_tol: f64,
    /// Central-difference step, relative to each parameter's magnitude.
    pub grad_step_rel: f64,
    /// Number of POVM outcomes; defaults to dim^2 when `None`.
    pub n_outcomes: Option<usize>,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            restarts: 8,
            max_iters: 5000,
            stall_iters: 20,
            rel_gain_tol: 1e-8,
            grad_step_rel: 1e-6,
            n_outcomes: None,
            seed: 0,
        }
    }
}

/// Unconstrained POVM parametrization: one complex factor matrix per outcome.
#[derive(Debug, Clone)]
pub struct PovmParam {
    dim: usize,
    factors: Vec<ComplexMatrix>,
}

impl PovmParam {
    pub fn new(dim: usize, factors: Vec<ComplexMatrix>) -> Result<Self> {
        if factors.len() < 2 {
            return Err(Error::Precondition("PovmParam needs at least 2 outcomes".into()));
        }
        for f in &factors {
            if f.rows() != dim || f.cols() != dim {
                return Err(Error::DimMismatch { left: f.rows(), right: dim });
            }
        }
        Ok(Self { dim, factors })
    }

    /// Factors recovering an existing POVM: A_i = M_i^{1/2}.
    pub fn from_povm(povm: &Povm) -> Result<Self> {
        let factors: Result<Vec<_>> = povm.elements().iter().map(linalg::sqrt_psd).collect();
        Self::new(povm.dim(), factors?)
    }

    pub fn n_outcomes(&self) -> usize {
        self.factors.len()
    }

    /// Realize the POVM M_i = S^{-1/2} A_i^dagger A_i S^{-1/2}.
    pub fn realize(&self) -> Result<Povm> {
        let inv_sqrt = self.normalizer_inv_sqrt()?;
        let elements: Vec<ComplexMatrix> = self
            .factors
            .iter()
            .map(|a| {
                let asa = a.adjoint().mul(a);
                inv_sqrt.mul(&asa).mul(&inv_sqrt).hermitize()
            })
            .collect();
        Povm::new(elements)
    }

    fn normalizer_inv_sqrt(&self) -> Result<ComplexMatrix> {
        let mut s = ComplexMatrix::zeros(self.dim, self.dim);
        for a in &self.factors {
            s = s.add(&a.adjoint().mul(a));
        }
        let eig = linalg::eig_hermitian(&s.hermitize())?;
        let max = eig.eigenvalues[0];
        let min = *eig.eigenvalues.last().expect("non-empty");
        if !(min > 1e-12 * max) {
            return Err(Error::SingularNormalizer { ratio: min / max.max(f64::MIN_POSITIVE) });
        }
        Ok(eig.apply_fn(|l| 1.0 / l.sqrt()))
    }

    fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.dim * self.dim * self.factors.len());
        for f in &self.factors {
            for z in f.entries() {
                out.push(z.re);
                out.push(z.im);
            }
        }
        out
    }

    fn from_flat(dim: usize, n_outcomes: usize, flat: &[f64]) -> Self {
        let per = dim * dim;
        let factors = (0..n_outcomes)
            .map(|i| {
                let base = i * per * 2;
                let entries = (0..per)
                    .map(|k| Complex64::new(flat[base + 2 * k], flat[base + 2 * k + 1]))
                    .collect();
                ComplexMatrix::from_rows(dim, dim, entries).expect("finite params")
            })
            .collect();
        Self { dim, factors }
    }
}

/// Outcome of a measurement optimization.
#[derive(Debug, Clone)]
pub struct SearchResult {
    pub best_povm: Povm,
    /// Measured relative entropy of `best_povm`, in nats.
    pub best_value: f64,
    pub per_restart_values: Vec<f64>,
    pub iterations: Vec<usize>,
    /// False when any restart exhausted its iteration budget.
    pub converged: bool,
}

/// Maximize the measured relative entropy over POVMs for (sigma, rho).
///
/// Requires D(sigma||rho) finite. Returns the best POVM found over all
/// restarts; `converged = false` flags a budget exhaustion (the result is
/// still the best so far).
pub fn optimize_measurement(
    sigma: &DensityMatrix,
    rho: &DensityMatrix,
    cfg: &SearchConfig,
) -> Result<SearchResult> {
    optimize_measurement_warm(sigma, rho, &[], cfg)
}

/// As [`optimize_measurement`], with extra caller-provided warm starts that
/// are always included among the seeds (used by the block sweep).
pub fn optimize_measurement_warm(
    sigma: &DensityMatrix,
    rho: &DensityMatrix,
    warm_starts: &[Povm],
    cfg: &SearchConfig,
) -> Result<SearchResult> {
    if sigma.dim() != rho.dim() {
        return Err(Error::DimMismatch { left: sigma.dim(), right: rho.dim() });
    }
    let quantum = quantum_relative_entropy(sigma, rho)?;
    if !quantum.is_finite() {
        return Err(Error::InfiniteRelativeEntropy);
    }
    let dim = sigma.dim();
    let m = cfg.n_outcomes.unwrap_or(dim * dim).max(2);

    let mut starts: Vec<PovmParam> = Vec::new();
    for povm in warm_starts {
        starts.push(pad_outcomes(PovmParam::from_povm(povm)?, m));
    }
    starts.push(pad_outcomes(eigenbasis_param(rho.matrix())?, m));
    starts.push(pad_outcomes(eigenbasis_param(sigma.matrix())?, m));
    starts.push(pad_outcomes(llr_operator_param(sigma, rho)?, m));
    let handle = RngHandle::new(cfg.seed);
    let mut idx = 0u64;
    while starts.len() < cfg.restarts.max(starts.len()) {
        let mut rng = handle.sequence(StreamKind::OptimizerRestart, idx);
        starts.push(random_param(dim, m, &mut rng));
        idx += 1;
    }

    let objective = ObjectiveContext::new(sigma, rho);

    let runs: Vec<(f64, usize, Vec<f64>)> = starts
        .par_iter()
        .map(|start| ascend(&objective, start, cfg))
        .collect();

    let mut best: Option<(usize, f64)> = None;
    let mut per_restart_values = Vec::with_capacity(runs.len());
    let mut iterations = Vec::with_capacity(runs.len());
    let mut converged = true;
    for (i, (value, iters, _)) in runs.iter().enumerate() {
        per_restart_values.push(*value);
        iterations.push(*iters);
        if *iters >= cfg.max_iters {
            converged = false;
        }
        let better = match best {
            None => true,
            Some((_, bv)) => *value > bv,
        };
        if better {
            best = Some((i, *value));
        }
    }
    let (best_idx, _) = best.expect("at least one restart");
    let best_param = PovmParam::from_flat(dim, m, &runs[best_idx].2);
    let best_povm = best_param.realize()?;
    let best_value = measured_relative_entropy(sigma, rho, &best_povm)?;

    Ok(SearchResult { best_povm, best_value, per_restart_values, iterations, converged })
}

/// One row of a block-measurement sweep.
#[derive(Debug, Clone)]
pub struct BlockSweepRow {
    pub l: usize,
    /// Optimized D^M(sigma^l || rho^l) in nats.
    pub value: f64,
    /// `value / l`: the per-copy rate.
    pub per_copy: f64,
    pub povm: Povm,
    pub per_restart_values: Vec<f64>,
    pub converged: bool,
}

/// Optimize block measurements on tensor powers for l = 1..=l_max. Each
/// level is warm-started from the previous optimum tensored with the
/// single-copy optimum, so the per-copy value cannot regress at l=2.
pub fn block_measurement_sweep(
    sigma: &DensityMatrix,
    rho: &DensityMatrix,
    l_max: usize,
    cfg: &SearchConfig,
) -> Result<Vec<BlockSweepRow>> {
    if l_max == 0 {
        return Err(Error::Precondition("l_max must be at least 1".into()));
    }
    let mut rows: Vec<BlockSweepRow> = Vec::with_capacity(l_max);
    let mut base: Option<Povm> = None;
    for l in 1..=l_max {
        let sl = tensor_power(sigma, l)?;
        let rl = tensor_power(rho, l)?;
        let warm: Vec<Povm> = match (&base, rows.last()) {
            (Some(b), Some(prev)) => vec![prev.povm.tensor(b)?],
            _ => vec![],
        };
        let result = optimize_measurement_warm(&sl, &rl, &warm, cfg)?;
        if l == 1 {
            base = Some(result.best_povm.clone());
        }
        rows.push(BlockSweepRow {
            l,
            value: result.best_value,
            per_copy: result.best_value / l as f64,
            povm: result.best_povm,
            per_restart_values: result.per_restart_values,
            converged: result.converged,
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Objective and ascent internals
// ---------------------------------------------------------------------------

struct ObjectiveContext {
    sigma: ComplexMatrix,
    rho: ComplexMatrix,
    dim: usize,
}

impl ObjectiveContext {
    fn new(sigma: &DensityMatrix, rho: &DensityMatrix) -> Self {
        Self { sigma: sigma.matrix().clone(), rho: rho.matrix().clone(), dim: sigma.dim() }
    }

    /// Measured relative entropy of the realized parameters, or `None` for
    /// rejected iterates (singular normalizer, support-breaking POVM).
    ///
    /// Probabilities are computed as q_i = Tr(A_i X A_i^dagger) with
    /// X = S^{-1/2} sigma S^{-1/2}, which is nonnegative by construction.
    fn eval_flat(&self, m: usize, flat: &[f64]) -> Option<f64> {
        let param = PovmParam::from_flat(self.dim, m, flat);
        let inv_sqrt = param.normalizer_inv_sqrt().ok()?;
        let sigma_t = inv_sqrt.mul(&self.sigma).mul(&inv_sqrt);
        let rho_t = inv_sqrt.mul(&self.rho).mul(&inv_sqrt);
        let mut q = Vec::with_capacity(m);
        let mut p = Vec::with_capacity(m);
        for a in &param.factors {
            q.push(congruence_trace(a, &sigma_t).max(0.0));
            p.push(congruence_trace(a, &rho_t).max(0.0));
        }
        normalize(&mut q)?;
        normalize(&mut p)?;
        let value = kl_divergence_raw(&q, &p);
        // a support-breaking POVM cannot certify a finite supremum
        value.is_finite().then_some(value)
    }
}

/// Re Tr(A X A^dagger).
fn congruence_trace(a: &ComplexMatrix, x: &ComplexMatrix) -> f64 {
    let ax = a.mul(x);
    let mut acc = 0.0;
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            let u = ax.get(i, j);
            let v = a.get(i, j).conj();
            acc += u.re * v.re - u.im * v.im;
        }
    }
    acc
}

fn normalize(probs: &mut [f64]) -> Option<()> {
    let sum: f64 = probs.iter().sum();
    if !(sum.is_finite() && sum > 0.0) {
        return None;
    }
    for p in probs.iter_mut() {
        *p /= sum;
    }
    Some(())
}

/// Gradient ascent with backtracking line search from one start.
/// Returns (final value, iterations used, final flat parameters).
fn ascend(ctx: &ObjectiveContext, start: &PovmParam, cfg: &SearchConfig) -> (f64, usize, Vec<f64>) {
    let m = start.n_outcomes();
    let mut theta = start.to_flat();
    let mut value = ctx.eval_flat(m, &theta).unwrap_or(f64::NEG_INFINITY);
    let mut history: Vec<f64> = vec![value];
    let mut step = 1.0f64;
    let mut iters = 0usize;

    while iters < cfg.max_iters {
        iters += 1;
        // central differences, step relative to parameter magnitude
        let mut grad = vec![0.0f64; theta.len()];
        let mut grad_norm_sq = 0.0;
        for k in 0..theta.len() {
            let h = cfg.grad_step_rel * theta[k].abs().max(1.0);
            let saved = theta[k];
            theta[k] = saved + h;
            let fp = ctx.eval_flat(m, &theta);
            theta[k] = saved - h;
            let fm = ctx.eval_flat(m, &theta);
            theta[k] = saved;
            let g = match (fp, fm) {
                (Some(fp), Some(fm)) => (fp - fm) / (2.0 * h),
                _ => 0.0,
            };
            grad[k] = g;
            grad_norm_sq += g * g;
        }
        if grad_norm_sq == 0.0 {
            break;
        }

        // backtracking line search along the gradient
        let mut t = (step * 2.0).min(1.0);
        let mut accepted = false;
        for _ in 0..40 {
            let candidate: Vec<f64> = theta.iter().zip(&grad).map(|(x, g)| x + t * g).collect();
            if let Some(f_new) = ctx.eval_flat(m, &candidate) {
                if f_new > value {
                    theta = candidate;
                    value = f_new;
                    step = t;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        history.push(value);
        if history.len() > cfg.stall_iters {
            let past = history[history.len() - 1 - cfg.stall_iters];
            let gain = value - past;
            if gain < cfg.rel_gain_tol * value.abs().max(1e-12) {
                break;
            }
        }
    }
    (value, iters, theta)
}

fn pad_outcomes(param: PovmParam, m: usize) -> PovmParam {
    let dim = param.dim;
    let mut factors = param.factors;
    while factors.len() < m {
        factors.push(ComplexMatrix::zeros(dim, dim));
    }
    PovmParam { dim, factors }
}

fn eigenbasis_param(a: &ComplexMatrix) -> Result<PovmParam> {
    let eig = linalg::eig_hermitian(a)?;
    let dim = a.dim();
    let factors = (0..dim)
        .map(|k| ComplexMatrix::projector(&eig.eigenvector(k)))
        .collect();
    PovmParam::new(dim, factors)
}

/// Eigenbasis of log(sigma) - log(rho) restricted to the support of rho.
fn llr_operator_param(sigma: &DensityMatrix, rho: &DensityMatrix) -> Result<PovmParam> {
    let cutoff_sigma = {
        let eig = linalg::eig_hermitian(sigma.matrix())?;
        linalg::default_support_cutoff(eig.eigenvalues[0])
    };
    let cutoff_rho = {
        let eig = linalg::eig_hermitian(rho.matrix())?;
        linalg::default_support_cutoff(eig.eigenvalues[0])
    };
    let (log_sigma, _) = linalg::log_on_support(sigma.matrix(), cutoff_sigma)?;
    let (log_rho, _) = linalg::log_on_support(rho.matrix(), cutoff_rho)?;
    let p = linalg::support_projector(rho.matrix(), cutoff_rho)?;
    let llr = p.mul(&log_sigma.sub(&log_rho)).mul(&p).hermitize();
    eigenbasis_param(&llr)
}

fn random_param<R: Rng + ?Sized>(dim: usize, m: usize, rng: &mut R) -> PovmParam {
    let factors = (0..m)
        .map(|_| {
            let entries = (0..dim * dim)
                .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect();
            ComplexMatrix::from_rows(dim, dim, entries).expect("finite")
        })
        .collect();
    PovmParam { dim, factors }
}
