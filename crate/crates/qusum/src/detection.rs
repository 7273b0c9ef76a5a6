//! The CUSUM engine and the QUSUM strategy: measure a state sequence with a
//! POVM (stepwise or on blocks of l states), accumulate log-likelihood
//! ratios, stop when the statistic crosses the threshold.
//!
//! The recursion is S <- max(0, S + llr) with natural-log LLRs. Infinite
//! LLRs are handled symbolically: +inf stops immediately (an outcome
//! impossible pre-change), -inf hard-resets to 0 (an outcome impossible
//! post-change); nothing is epsilon-clamped.

use crate::entropy::{kl_divergence_raw, OutcomeDistribution, PROB_FLOOR};
use crate::error::{Error, Result};
use crate::measurement::{induced_distribution, Povm};
use crate::rng::TrialRng;
use crate::states::{tensor_power, DensityMatrix};

/// Step index of the last pre-change state; `Never` means no change occurs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChangePoint {
    At(u64),
    Never,
}

impl ChangePoint {
    fn contains_block(&self, block_end: u64) -> bool {
        match self {
            ChangePoint::At(nu) => block_end <= *nu,
            ChangePoint::Never => true,
        }
    }
}

/// Pre-change state, post-change state, and the change point.
#[derive(Debug, Clone)]
pub struct ChangePointModel {
    pub rho: DensityMatrix,
    pub sigma: DensityMatrix,
    pub nu: ChangePoint,
}

/// Per-outcome log-likelihood ratios ln(q_i/p_i) together with the induced
/// distributions and their divergences.
#[derive(Debug, Clone)]
pub struct LlrTable {
    llr: Vec<f64>,
    p: OutcomeDistribution,
    q: OutcomeDistribution,
    /// D(q||p): expected post-change drift per block.
    pub divergence_qp: f64,
    /// D(p||q): magnitude of the pre-change drift per block.
    pub divergence_pq: f64,
}

impl LlrTable {
    pub fn llr(&self) -> &[f64] {
        &self.llr
    }

    pub fn pre_change(&self) -> &OutcomeDistribution {
        &self.p
    }

    pub fn post_change(&self) -> &OutcomeDistribution {
        &self.q
    }
}

/// Build the LLR table for a POVM on the block states sigma^l, rho^l.
///
/// Outcomes with q_i = p_i = 0 can never be drawn; their table entry is 0.
pub fn build_llr_table(
    sigma: &DensityMatrix,
    rho: &DensityMatrix,
    povm: &Povm,
    block_l: usize,
) -> Result<LlrTable> {
    if block_l == 0 {
        return Err(Error::Precondition("block length must be at least 1".into()));
    }
    let sl = tensor_power(sigma, block_l)?;
    let rl = tensor_power(rho, block_l)?;
    if povm.dim() != rl.dim() {
        return Err(Error::DimMismatch { left: povm.dim(), right: rl.dim() });
    }
    let q = induced_distribution(povm, &sl)?;
    let p = induced_distribution(povm, &rl)?;
    let llr = q
        .probs()
        .iter()
        .zip(p.probs())
        .map(|(&qi, &pi)| match (qi > PROB_FLOOR, pi > PROB_FLOOR) {
            (true, true) => (qi / pi).ln(),
            (true, false) => f64::INFINITY,
            (false, true) => f64::NEG_INFINITY,
            (false, false) => 0.0,
        })
        .collect();
    let divergence_qp = kl_divergence_raw(q.probs(), p.probs());
    let divergence_pq = kl_divergence_raw(p.probs(), q.probs());
    Ok(LlrTable { llr, p, q, divergence_qp, divergence_pq })
}

/// CUSUM statistic with threshold.
#[derive(Debug, Clone, Copy)]
pub struct CusumDetector {
    statistic: f64,
    threshold: f64,
    step: u64,
    stopped: bool,
}

impl CusumDetector {
    pub fn new(threshold: f64) -> Result<Self> {
        if !(threshold > 0.0) {
            return Err(Error::Precondition(format!("threshold must be positive, got {threshold}")));
        }
        Ok(Self { statistic: 0.0, threshold, step: 0, stopped: false })
    }

    pub fn statistic(&self) -> f64 {
        self.statistic
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn stopped(&self) -> bool {
        self.stopped
    }

    /// Advance by one LLR observation; returns whether the detector stopped.
    pub fn step(&mut self, llr: f64) -> Result<bool> {
        if self.stopped {
            return Err(Error::AlreadyStopped { step: self.step });
        }
        self.step += 1;
        self.statistic = if llr == f64::INFINITY {
            f64::INFINITY
        } else if llr == f64::NEG_INFINITY {
            0.0
        } else {
            (self.statistic + llr).max(0.0)
        };
        self.stopped = self.statistic >= self.threshold;
        Ok(self.stopped)
    }
}

/// How a trial ended relative to the change point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlarmKind {
    /// Stopped at or before the change point (T <= nu).
    FalseAlarm,
    /// Stopped after the change point (T > nu).
    Detection,
    /// Horizon reached without stopping.
    Censored,
}

/// Stopping time of one trial, in single-state steps.
#[derive(Debug, Clone, Copy)]
pub struct TrialResult {
    pub stop_time: u64,
    pub alarm_kind: AlarmKind,
}

impl TrialResult {
    pub fn censored(&self) -> bool {
        self.alarm_kind == AlarmKind::Censored
    }
}

/// One step of a verbose trial trace.
#[derive(Debug, Clone, Copy)]
pub struct TraceStep {
    pub block: u64,
    pub outcome: usize,
    pub llr: f64,
    pub statistic: f64,
    pub stopped: bool,
}

/// Sampling-ready trial state: cumulative distributions and LLR table for
/// one (model, POVM, block length) combination. Building this once and
/// running many trials against it is the Monte Carlo fast path.
pub struct PreparedTrial {
    cum_p: Vec<f64>,
    cum_q: Vec<f64>,
    table: LlrTable,
    block_l: usize,
    nu: ChangePoint,
}

impl PreparedTrial {
    pub fn new(model: &ChangePointModel, povm: &Povm, block_l: usize) -> Result<Self> {
        if block_l == 0 {
            return Err(Error::Precondition("block length must be at least 1".into()));
        }
        if let ChangePoint::At(nu) = model.nu {
            if nu % block_l as u64 != 0 {
                return Err(Error::MisalignedChangePoint { nu, block_l });
            }
        }
        let table = build_llr_table(&model.sigma, &model.rho, povm, block_l)?;
        let cum = |probs: &[f64]| {
            let mut acc = 0.0;
            probs
                .iter()
                .map(|&p| {
                    acc += p;
                    acc
                })
                .collect::<Vec<f64>>()
        };
        Ok(Self {
            cum_p: cum(table.pre_change().probs()),
            cum_q: cum(table.post_change().probs()),
            table,
            block_l,
            nu: model.nu,
        })
    }

    pub fn table(&self) -> &LlrTable {
        &self.table
    }

    /// Run one trial to the horizon (in single-state steps).
    pub fn run(&self, threshold: f64, horizon: u64, rng: &mut TrialRng) -> Result<TrialResult> {
        self.run_impl(threshold, horizon, rng, None)
    }

    /// Run one trial recording the per-block trace.
    pub fn run_traced(
        &self,
        threshold: f64,
        horizon: u64,
        rng: &mut TrialRng,
    ) -> Result<(TrialResult, Vec<TraceStep>)> {
        let mut trace = Vec::new();
        let result = self.run_impl(threshold, horizon, rng, Some(&mut trace))?;
        Ok((result, trace))
    }

    fn run_impl(
        &self,
        threshold: f64,
        horizon: u64,
        rng: &mut TrialRng,
        mut trace: Option<&mut Vec<TraceStep>>,
    ) -> Result<TrialResult> {
        if horizon == 0 {
            return Err(Error::HorizonNonpositive);
        }
        let l = self.block_l as u64;
        let max_blocks = horizon / l;
        let mut detector = CusumDetector::new(threshold)?;
        for block in 1..=max_blocks {
            let pre_change = self.nu.contains_block(block * l);
            let cum = if pre_change { &self.cum_p } else { &self.cum_q };
            let u = rng.uniform_at(block - 1);
            let outcome = sample_from_cum(cum, u);
            let llr = self.table.llr[outcome];
            let stopped = detector.step(llr)?;
            if let Some(t) = trace.as_deref_mut() {
                t.push(TraceStep {
                    block,
                    outcome,
                    llr,
                    statistic: detector.statistic(),
                    stopped,
                });
            }
            if stopped {
                let stop_time = block * l;
                let alarm_kind = match self.nu {
                    ChangePoint::Never => AlarmKind::FalseAlarm,
                    ChangePoint::At(nu) if stop_time <= nu => AlarmKind::FalseAlarm,
                    ChangePoint::At(_) => AlarmKind::Detection,
                };
                return Ok(TrialResult { stop_time, alarm_kind });
            }
        }
        Ok(TrialResult { stop_time: max_blocks * l, alarm_kind: AlarmKind::Censored })
    }
}

/// One self-contained trial (builds the table internally; Monte Carlo
/// callers should prepare once and reuse).
pub fn run_trial(
    model: &ChangePointModel,
    povm: &Povm,
    block_l: usize,
    threshold: f64,
    horizon: u64,
    rng: &mut TrialRng,
) -> Result<TrialResult> {
    PreparedTrial::new(model, povm, block_l)?.run(threshold, horizon, rng)
}

fn sample_from_cum(cum: &[f64], u: f64) -> usize {
    let idx = cum.partition_point(|&c| c <= u);
    if idx >= cum.len() {
        // roundoff gap below 1; return the last outcome with positive mass
        let total = *cum.last().expect("non-empty");
        return cum
            .iter()
            .rposition(|&c| c < total)
            .map(|i| i + 1)
            .unwrap_or(0);
    }
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::basis_povm;
    use crate::rng::{RngHandle, StreamKind};

    fn commuting_model(nu: ChangePoint) -> ChangePointModel {
        ChangePointModel {
            rho: DensityMatrix::from_probs(&[0.5, 0.5]).unwrap(),
            sigma: DensityMatrix::from_probs(&[0.9, 0.1]).unwrap(),
            nu,
        }
    }

    #[test]
    fn cusum_recursion_direct() {
        // S path (1, 0, 3) for llr sequence (1, -2, 3) at h=3
        let mut det = CusumDetector::new(3.0).unwrap();
        assert!(!det.step(1.0).unwrap());
        assert!((det.statistic() - 1.0).abs() < 1e-15);
        assert!(!det.step(-2.0).unwrap());
        assert!(det.statistic() == 0.0);
        assert!(det.step(3.0).unwrap());
        assert_eq!(det.step_count(), 3);
    }

    #[test]
    fn cusum_zero_llr_never_stops() {
        let mut det = CusumDetector::new(0.5).unwrap();
        for _ in 0..10_000 {
            assert!(!det.step(0.0).unwrap());
        }
    }

    #[test]
    fn cusum_infinite_evidence_stops_immediately() {
        let mut det = CusumDetector::new(100.0).unwrap();
        assert!(det.step(f64::INFINITY).unwrap());
        assert_eq!(det.step_count(), 1);
        assert!(matches!(det.step(0.0), Err(Error::AlreadyStopped { .. })));
    }

    #[test]
    fn cusum_negative_infinity_resets() {
        let mut det = CusumDetector::new(5.0).unwrap();
        det.step(3.0).unwrap();
        det.step(f64::NEG_INFINITY).unwrap();
        assert_eq!(det.statistic(), 0.0);
    }

    #[test]
    fn llr_table_commuting_case() {
        let model = commuting_model(ChangePoint::Never);
        let table = build_llr_table(&model.sigma, &model.rho, &basis_povm(2), 1).unwrap();
        assert!((table.llr()[0] - (0.9f64 / 0.5).ln()).abs() < 1e-12);
        assert!((table.llr()[1] - (0.1f64 / 0.5).ln()).abs() < 1e-12);
        let oracle = 0.9 * (0.9f64 / 0.5).ln() + 0.1 * (0.1f64 / 0.5).ln();
        assert!((table.divergence_qp - oracle).abs() < 1e-12);
    }

    #[test]
    fn llr_table_identical_states_is_zero() {
        let rho = DensityMatrix::from_probs(&[0.5, 0.5]).unwrap();
        let table = build_llr_table(&rho, &rho, &basis_povm(2), 1).unwrap();
        assert!(table.llr().iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn llr_table_product_additivity() {
        let model = commuting_model(ChangePoint::Never);
        let single = build_llr_table(&model.sigma, &model.rho, &basis_povm(2), 1).unwrap();
        let product_povm = basis_povm(2).tensor(&basis_povm(2)).unwrap();
        let block = build_llr_table(&model.sigma, &model.rho, &product_povm, 2).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let expect = single.llr()[i] + single.llr()[j];
                assert!((block.llr()[2 * i + j] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn trial_no_change_identical_states_censors() {
        let rho = DensityMatrix::from_probs(&[0.5, 0.5]).unwrap();
        let model = ChangePointModel { rho: rho.clone(), sigma: rho, nu: ChangePoint::Never };
        let mut rng = RngHandle::new(1).trial(StreamKind::Simulation, 0);
        let result = run_trial(&model, &basis_povm(2), 1, 1.0, 1000, &mut rng).unwrap();
        assert!(result.censored());
        assert_eq!(result.stop_time, 1000);
    }

    #[test]
    fn trial_support_violation_detects_at_first_occurrence() {
        // post-change outcome 1 is impossible pre-change: llr = +inf there
        let rho = DensityMatrix::from_probs(&[1.0, 0.0]).unwrap();
        let sigma = DensityMatrix::from_probs(&[0.5, 0.5]).unwrap();
        let model = ChangePointModel { rho, sigma, nu: ChangePoint::At(0) };
        let mut rng = RngHandle::new(3).trial(StreamKind::Simulation, 5);
        let result = run_trial(&model, &basis_povm(2), 1, 50.0, 100_000, &mut rng).unwrap();
        assert_eq!(result.alarm_kind, AlarmKind::Detection);
        // geometric with success probability 1/2 stops fast
        assert!(result.stop_time < 100);
    }

    #[test]
    fn trial_reproducible_given_stream() {
        let model = commuting_model(ChangePoint::Never);
        let handle = RngHandle::new(42);
        let run = || {
            let mut rng = handle.trial(StreamKind::FalseAlarmTrial, 17);
            run_trial(&model, &basis_povm(2), 1, 5.0, 1_000_000, &mut rng).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.stop_time, b.stop_time);
    }

    #[test]
    fn stopping_monotone_in_threshold() {
        let model = commuting_model(ChangePoint::Never);
        let prepared = PreparedTrial::new(&model, &basis_povm(2), 1).unwrap();
        let handle = RngHandle::new(9);
        for trial in 0..200 {
            let mut rng1 = handle.trial(StreamKind::FalseAlarmTrial, trial);
            let mut rng2 = handle.trial(StreamKind::FalseAlarmTrial, trial);
            let t1 = prepared.run(2.0, 200_000, &mut rng1).unwrap();
            let t2 = prepared.run(4.0, 200_000, &mut rng2).unwrap();
            assert!(t1.stop_time <= t2.stop_time, "trial {trial}");
        }
    }

    #[test]
    fn misaligned_change_point_rejected() {
        let model = commuting_model(ChangePoint::At(3));
        let povm = basis_povm(2).tensor(&basis_povm(2)).unwrap();
        assert!(matches!(
            PreparedTrial::new(&model, &povm, 2),
            Err(Error::MisalignedChangePoint { .. })
        ));
    }

    #[test]
    fn zero_horizon_rejected() {
        let model = commuting_model(ChangePoint::Never);
        let prepared = PreparedTrial::new(&model, &basis_povm(2), 1).unwrap();
        let mut rng = RngHandle::new(0).trial(StreamKind::Simulation, 0);
        assert!(matches!(prepared.run(1.0, 0, &mut rng), Err(Error::HorizonNonpositive)));
    }

    #[test]
    fn llr_drift_signs_match_divergences() {
        // sample-mean check: E_q[llr] = D(q||p), E_p[llr] = -D(p||q)
        let model = commuting_model(ChangePoint::Never);
        let table = build_llr_table(&model.sigma, &model.rho, &basis_povm(2), 1).unwrap();
        let n = 200_000u64;
        let handle = RngHandle::new(77);
        let mut rng = handle.trial(StreamKind::Verification, 0);
        let mut sum_q = 0.0;
        let mut sum_sq_q = 0.0;
        let mut sum_p = 0.0;
        let mut sum_sq_p = 0.0;
        for step in 0..n {
            let u = rng.uniform_at(2 * step);
            let i = sample_from_cum(
                &[table.post_change().probs()[0], 1.0],
                u,
            );
            sum_q += table.llr()[i];
            sum_sq_q += table.llr()[i] * table.llr()[i];
            let u = rng.uniform_at(2 * step + 1);
            let i = sample_from_cum(&[table.pre_change().probs()[0], 1.0], u);
            sum_p += table.llr()[i];
            sum_sq_p += table.llr()[i] * table.llr()[i];
        }
        let nf = n as f64;
        let mean_q = sum_q / nf;
        let sd_q = ((sum_sq_q / nf - mean_q * mean_q) / nf).sqrt();
        assert!((mean_q - table.divergence_qp).abs() < 3.0 * sd_q);
        let mean_p = sum_p / nf;
        let sd_p = ((sum_sq_p / nf - mean_p * mean_p) / nf).sqrt();
        assert!((mean_p + table.divergence_pq).abs() < 3.0 * sd_p);
        assert!(table.divergence_qp > 0.0 && table.divergence_pq > 0.0);
    }

    #[test]
    fn block_trial_consistent_with_pairwise_classical_simulation() {
        // A block run with the product POVM M x M samples pairs jointly; a
        // classical simulation drawing two outcomes per block and applying
        // one CUSUM update per pair is the same process in law. Compare the
        // stopping-time distributions with a two-sample KS statistic.
        let model = commuting_model(ChangePoint::Never);
        let povm2 = basis_povm(2).tensor(&basis_povm(2)).unwrap();
        let prepared = PreparedTrial::new(&model, &povm2, 2).unwrap();
        let h = 4.0;
        let horizon = 400_000;
        let n_trials = 10_000u64;
        let handle = RngHandle::new(2024);

        let mut block_ts = Vec::with_capacity(n_trials as usize);
        for t in 0..n_trials {
            let mut rng = handle.trial(StreamKind::FalseAlarmTrial, t);
            block_ts.push(prepared.run(h, horizon, &mut rng).unwrap().stop_time);
        }

        // independent two-draw pair simulation
        let single = build_llr_table(&model.sigma, &model.rho, &basis_povm(2), 1).unwrap();
        let p0 = single.pre_change().probs()[0];
        let mut pair_ts = Vec::with_capacity(n_trials as usize);
        for t in 0..n_trials {
            let mut rng = handle.trial(StreamKind::DelayTrial, t);
            let mut s = 0.0f64;
            let mut stop = horizon;
            let mut step_idx = 0u64;
            for block in 1..=(horizon / 2) {
                let i = usize::from(rng.uniform_at(step_idx) >= p0);
                let j = usize::from(rng.uniform_at(step_idx + 1) >= p0);
                step_idx += 2;
                s = (s + single.llr()[i] + single.llr()[j]).max(0.0);
                if s >= h {
                    stop = block * 2;
                    break;
                }
            }
            pair_ts.push(stop);
        }

        let ks = two_sample_ks(&mut block_ts, &mut pair_ts);
        assert!(ks < 0.02, "KS statistic {ks}");
    }

    fn two_sample_ks(a: &mut [u64], b: &mut [u64]) -> f64 {
        a.sort_unstable();
        b.sort_unstable();
        let na = a.len() as f64;
        let nb = b.len() as f64;
        let mut i = 0usize;
        let mut j = 0usize;
        let mut d: f64 = 0.0;
        while i < a.len() && j < b.len() {
            let x = a[i].min(b[j]);
            while i < a.len() && a[i] <= x {
                i += 1;
            }
            while j < b.len() && b[j] <= x {
                j += 1;
            }
            d = d.max((i as f64 / na - j as f64 / nb).abs());
        }
        d
    }

    #[test]
    fn conditioned_post_change_delay_matches_nu_zero() {
        // with the statistic at its reset value when the change hits, the
        // post-change evolution is the nu=0 process in law
        let h = 3.0;
        let horizon = 100_000;
        let n_trials = 4000u64;
        let handle = RngHandle::new(555);

        let model0 = commuting_model(ChangePoint::At(0));
        let prepared0 = PreparedTrial::new(&model0, &basis_povm(2), 1).unwrap();
        let mut delays0 = Vec::new();
        for t in 0..n_trials {
            let mut rng = handle.trial(StreamKind::DelayTrial, t);
            delays0.push(prepared0.run(h, horizon, &mut rng).unwrap().stop_time as f64);
        }

        let nu = 8u64;
        let model8 = commuting_model(ChangePoint::At(nu));
        let prepared8 = PreparedTrial::new(&model8, &basis_povm(2), 1).unwrap();
        let mut delays8 = Vec::new();
        for t in 0..(4 * n_trials) {
            let mut rng = handle.trial(StreamKind::FalseAlarmTrial, t);
            let (result, trace) = prepared8.run_traced(h, horizon, &mut rng).unwrap();
            if result.alarm_kind != AlarmKind::Detection {
                continue;
            }
            // condition on S exactly at its reset value at the change point
            if trace[(nu - 1) as usize].statistic == 0.0 {
                delays8.push((result.stop_time - nu) as f64);
            }
        }
        assert!(delays8.len() > 500, "conditioning kept too few trials");

        let stats = |v: &[f64]| {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            (mean, (var / n).sqrt())
        };
        let (m0, se0) = stats(&delays0);
        let (m8, se8) = stats(&delays8);
        let combined = (se0 * se0 + se8 * se8).sqrt();
        assert!(
            (m0 - m8).abs() < 3.0 * combined,
            "nu=0 delay {m0} vs conditioned delay {m8} (se {combined})"
        );
    }
}
