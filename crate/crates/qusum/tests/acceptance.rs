//! Acceptance suite: every release-gating property runs here, one test per
//! criterion, each printing a PASS/FAIL line (visible with
//! `cargo test --test acceptance -- --nocapture`).
//!
//! Expensive Monte Carlo artifacts are computed once and shared across
//! criteria through `OnceLock`.

use std::sync::OnceLock;
use std::time::Instant;

use num_complex::Complex64;
use qusum::entropy::{quantum_relative_entropy, thermal_relative_entropy_closed_form};
use qusum::experiments::{
    delay_at_tfa, render_csv, tradeoff_experiment, verify_compression_convergence, verify_dpi,
    verify_dual_identity, SlopeFit, TradeoffConfig, TradeoffCurve,
};
use qusum::linalg::ComplexMatrix;
use qusum::measurement::{basis_povm, compression_channel, random_diagonal_state, Povm};
use qusum::povm_search::{block_measurement_sweep, SearchConfig};
use qusum::rng::{RngHandle, StreamKind};
use qusum::states::{build_pair, DensityMatrix, StateSpec};

fn in_pool<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
        .install(f)
}

fn commuting_pair() -> (DensityMatrix, DensityMatrix) {
    (
        DensityMatrix::from_probs(&[0.9, 0.1]).unwrap(),
        DensityMatrix::from_probs(&[0.5, 0.5]).unwrap(),
    )
}

/// Two-term classical KL for the commuting qubit pair: the slope oracle.
fn commuting_divergence() -> f64 {
    0.9 * (0.9f64 / 0.5).ln() + 0.1 * (0.1f64 / 0.5).ln()
}

fn noncommuting_pair() -> (DensityMatrix, DensityMatrix) {
    let sigma = DensityMatrix::new(
        ComplexMatrix::from_rows(
            2,
            2,
            vec![
                Complex64::new(0.5, 0.0),
                Complex64::new(0.3, 0.0),
                Complex64::new(0.3, 0.0),
                Complex64::new(0.5, 0.0),
            ],
        )
        .unwrap(),
    )
    .unwrap();
    let rho = DensityMatrix::from_probs(&[0.75, 0.25]).unwrap();
    (sigma, rho)
}

// ---------------------------------------------------------------------------
// Shared expensive artifacts
// ---------------------------------------------------------------------------

struct MainCurve {
    curve: TradeoffCurve,
    fit: SlopeFit,
    csv: String,
}

fn main_curve_config() -> TradeoffConfig {
    // thresholds spanning false-alarm times from ~1e2 to ~1e5 steps
    let points = 8;
    let (lo, hi) = (3.3f64, 9.9f64);
    let thresholds = (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect();
    TradeoffConfig {
        thresholds,
        n_trials_delay: 10_000,
        n_trials_tfa: 2_000,
        horizon: 10_000_000,
        seed: 20_250_809,
        block_l: 1,
    }
}

fn run_main_curve(threads: usize) -> MainCurve {
    let (sigma, rho) = commuting_pair();
    let (curve, fit) = in_pool(threads, || {
        tradeoff_experiment(&sigma, &rho, &basis_povm(2), &main_curve_config())
    })
    .expect("trade-off experiment");
    let csv = render_csv(&curve, &fit);
    MainCurve { curve, fit, csv }
}

fn main_curve() -> &'static MainCurve {
    static CELL: OnceLock<MainCurve> = OnceLock::new();
    CELL.get_or_init(|| run_main_curve(2))
}

struct BlockComparison {
    per_copy_l1: f64,
    per_copy_l2: f64,
    fit_l1: SlopeFit,
    fit_l2: SlopeFit,
    curve_l1: TradeoffCurve,
    curve_l2: TradeoffCurve,
}

fn block_comparison() -> &'static BlockComparison {
    static CELL: OnceLock<BlockComparison> = OnceLock::new();
    CELL.get_or_init(|| {
        let (sigma, rho) = noncommuting_pair();
        let search = SearchConfig { restarts: 6, max_iters: 300, seed: 13, ..SearchConfig::default() };
        let rows = block_measurement_sweep(&sigma, &rho, 2, &search).expect("block sweep");
        let cfg = |block_l: usize| TradeoffConfig {
            thresholds: vec![3.5, 5.0, 6.5, 8.0, 9.5],
            n_trials_delay: 4_000,
            n_trials_tfa: 800,
            horizon: 2_000_000,
            seed: 99,
            block_l,
        };
        let (curve_l1, fit_l1) =
            tradeoff_experiment(&sigma, &rho, &rows[0].povm, &cfg(1)).expect("l=1 curve");
        let (curve_l2, fit_l2) =
            tradeoff_experiment(&sigma, &rho, &rows[1].povm, &cfg(2)).expect("l=2 curve");
        BlockComparison {
            per_copy_l1: rows[0].per_copy,
            per_copy_l2: rows[1].per_copy,
            fit_l1,
            fit_l2,
            curve_l1,
            curve_l2,
        }
    })
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

#[test]
fn acceptance_1_entropy_oracle() {
    let start = Instant::now();
    let (sigma, rho) =
        build_pair(&StateSpec::thermal(1.0), &StateSpec::thermal(0.5)).expect("state pair");
    let computed = quantum_relative_entropy(&sigma, &rho).expect("divergence");
    let oracle = thermal_relative_entropy_closed_form(1.0, 0.5);
    let elapsed = start.elapsed();

    let err = (computed.value - oracle).abs();
    let pass = computed.support_ok && err < 1e-6 && elapsed.as_secs_f64() < 1.0;
    println!(
        "acceptance 1 (entropy oracle): {} — D={:.9} nats, closed form {:.9}, |err|={:.2e}, {:?}",
        if pass { "PASS" } else { "FAIL" },
        computed.value,
        oracle,
        err,
        elapsed
    );
    assert!(computed.support_ok, "support misclassified as violated");
    assert!(err < 1e-6, "divergence off oracle by {err}");
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
}

#[test]
fn acceptance_2_channel_dual_identity() {
    let start = Instant::now();
    let report = verify_dual_identity(100, 424_242).expect("suite");
    let elapsed = start.elapsed();
    let pass = report.pass && elapsed.as_secs() < 30;
    println!(
        "acceptance 2 (channel-dual identity): {} — 100 instances, max discrepancy {:.3e}, {:?}",
        if pass { "PASS" } else { "FAIL" },
        report.max_discrepancy,
        elapsed
    );
    assert!(report.pass, "max discrepancy {}", report.max_discrepancy);
    assert!(elapsed.as_secs() < 30, "took {elapsed:?}");
}

#[test]
fn acceptance_3_data_processing() {
    let start = Instant::now();
    let report = verify_dpi(200, 434_343).expect("suite");
    let elapsed = start.elapsed();
    let pass = report.pass && elapsed.as_secs() < 60;
    println!(
        "acceptance 3 (data processing): {} — 200 instances, channel excess {:.3e}, measured excess {:.3e}, {:?}",
        if pass { "PASS" } else { "FAIL" },
        report.max_channel_excess,
        report.max_measured_excess,
        elapsed
    );
    assert!(report.pass, "{report:?}");
    assert!(elapsed.as_secs() < 60, "took {elapsed:?}");
}

#[test]
fn acceptance_4_compression_convergence() {
    let handle = RngHandle::new(444_444);
    let mut worst_gap = 0.0f64;
    let mut all_pass = true;
    for i in 0..20u64 {
        let mut rng = handle.sequence(StreamKind::Verification, i);
        let sigma = random_diagonal_state(5, &mut rng);
        let rho = random_diagonal_state(5, &mut rng);
        let report = verify_compression_convergence(&sigma, &rho).expect("report");
        all_pass &= report.monotone && report.terminal_matches;
        worst_gap = worst_gap.max((report.values.last().unwrap() - report.full_value).abs());
        assert!(report.monotone, "pair {i} not monotone: {report:?}");
        assert!(
            report.terminal_matches,
            "pair {i} terminal gap {:.3e}",
            (report.values.last().unwrap() - report.full_value).abs()
        );
    }
    println!(
        "acceptance 4 (compression convergence): {} — 20 pairs d=5, worst terminal gap {:.3e}",
        if all_pass { "PASS" } else { "FAIL" },
        worst_gap
    );
}

#[test]
fn acceptance_5_tradeoff_slope() {
    let start = Instant::now();
    let result = main_curve();
    let elapsed = start.elapsed();

    for row in &result.curve.rows {
        assert!(
            row.tfa.mean >= 1e2 && row.tfa.mean <= 1e5,
            "false-alarm mean {} outside [1e2, 1e5] at h={}",
            row.tfa.mean,
            row.h
        );
        assert_eq!(row.tfa.censored, 0, "censoring at h={}", row.h);
    }
    let theory = 1.0 / commuting_divergence();
    let ratio = result.fit.slope / theory;
    let pass = (0.9..=1.1).contains(&ratio) && elapsed.as_secs() < 600;
    println!(
        "acceptance 5 (trade-off slope): {} — slope={:.4}, 1/D(q||p)={:.4}, ratio={:.4}, r2={:.5}, {:?}",
        if pass { "PASS" } else { "FAIL" },
        result.fit.slope,
        theory,
        ratio,
        result.fit.r_squared,
        elapsed
    );
    assert!((0.9..=1.1).contains(&ratio), "slope ratio {ratio}");
    assert!(elapsed.as_secs() < 600, "took {elapsed:?}");
}

#[test]
fn acceptance_6_optimality_direction() {
    // every trade-off experiment in the suite: fitted slope never beats the
    // quantum bound (slope >= 0.9 / D(sigma||rho))
    let mut checked = Vec::new();

    let main = main_curve();
    checked.push(("commuting basis POVM", main.fit));

    // deliberately suboptimal POVM: noisy basis readout
    let (sigma, rho) = commuting_pair();
    let noisy = Povm::new(vec![
        ComplexMatrix::from_diag(&[0.85, 0.15]),
        ComplexMatrix::from_diag(&[0.15, 0.85]),
    ])
    .unwrap();
    let cfg = TradeoffConfig {
        thresholds: vec![3.0, 4.5, 6.0, 7.5, 9.0],
        n_trials_delay: 4_000,
        n_trials_tfa: 800,
        horizon: 2_000_000,
        seed: 66,
        block_l: 1,
    };
    let (_, fit_noisy) = tradeoff_experiment(&sigma, &rho, &noisy, &cfg).expect("noisy curve");
    checked.push(("suboptimal noisy POVM", fit_noisy));

    // suboptimal slope tracks 1/D(q||p) for its own induced distributions
    let q = [0.9f64 * 0.85 + 0.1 * 0.15, 0.9 * 0.15 + 0.1 * 0.85];
    let p = [0.5f64, 0.5];
    let d_noisy: f64 = q
        .iter()
        .zip(&p)
        .map(|(&qi, &pi)| qi * (qi / pi).ln())
        .sum();
    let noisy_ratio = fit_noisy.slope * d_noisy;
    assert!(
        (noisy_ratio - 1.0).abs() < 0.2,
        "suboptimal slope {} vs 1/D(q||p) {}",
        fit_noisy.slope,
        1.0 / d_noisy
    );

    // channel-reduced measurement on a qutrit pair compressed to a qubit
    let sigma3 = DensityMatrix::from_probs(&[0.7, 0.2, 0.1]).unwrap();
    let rho3 = DensityMatrix::from_probs(&[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]).unwrap();
    let channel = compression_channel(1, 3).unwrap();
    let search = SearchConfig { restarts: 4, max_iters: 200, seed: 5, ..SearchConfig::default() };
    let chain_cfg = TradeoffConfig {
        thresholds: vec![3.0, 4.75, 6.5, 8.25],
        n_trials_delay: 4_000,
        n_trials_tfa: 800,
        horizon: 2_000_000,
        seed: 77,
        block_l: 1,
    };
    let chain = qusum::experiments::verify_optimality_chain(
        &sigma3, &rho3, &channel, &search, &chain_cfg,
    )
    .expect("optimality chain");
    assert!(chain.restriction_respected, "{chain:?}");
    checked.push(("qutrit direct POVM", chain.fit_direct));
    checked.push(("qutrit channel-reduced POVM", chain.fit_reduced));

    // block curves from criterion 7
    let blocks = block_comparison();
    checked.push(("non-commuting l=1 optimum", blocks.fit_l1));
    checked.push(("non-commuting l=2 block optimum", blocks.fit_l2));

    let mut all_pass = true;
    for (name, fit) in &checked {
        let floor = 0.9 * fit.quantum_slope;
        let ok = fit.slope >= floor;
        all_pass &= ok;
        assert!(
            ok,
            "{name}: slope {} beats the quantum bound floor {} (quantum slope {})",
            fit.slope, floor, fit.quantum_slope
        );
    }
    println!(
        "acceptance 6 (optimality direction): {} — {} experiments, min slope/quantum ratio {:.3}",
        if all_pass { "PASS" } else { "FAIL" },
        checked.len(),
        checked
            .iter()
            .map(|(_, f)| f.slope / f.quantum_slope)
            .fold(f64::INFINITY, f64::min)
    );
}

#[test]
fn acceptance_7_block_improvement() {
    let blocks = block_comparison();

    // per-copy measured relative entropy must not regress at l=2
    let improvement_ok = blocks.per_copy_l2 >= blocks.per_copy_l1 - 1e-6;

    // delay at matched false-alarm time: geometric mean of the overlapping
    // false-alarm ranges of the two curves
    let overlap_lo = blocks.curve_l1.rows[0]
        .tfa
        .mean
        .max(blocks.curve_l2.rows[0].tfa.mean);
    let overlap_hi = blocks
        .curve_l1
        .rows
        .last()
        .unwrap()
        .tfa
        .mean
        .min(blocks.curve_l2.rows.last().unwrap().tfa.mean);
    let target = (overlap_lo * overlap_hi).sqrt();
    let (d1, se1) = delay_at_tfa(&blocks.curve_l1, target).expect("l=1 interpolation");
    let (d2, se2) = delay_at_tfa(&blocks.curve_l2, target).expect("l=2 interpolation");
    let delay_ok = d2 <= d1 + 2.0 * se1.max(se2);

    let pass = improvement_ok && delay_ok;
    println!(
        "acceptance 7 (block improvement): {} — per-copy l1={:.6} l2={:.6}; delay@T_FA~{:.0}: l1={:.2}±{:.2} l2={:.2}±{:.2}",
        if pass { "PASS" } else { "FAIL" },
        blocks.per_copy_l1,
        blocks.per_copy_l2,
        target,
        d1,
        se1,
        d2,
        se2
    );
    assert!(
        improvement_ok,
        "per-copy regressed: l1 {} l2 {}",
        blocks.per_copy_l1, blocks.per_copy_l2
    );
    assert!(delay_ok, "l=2 delay {d2} exceeds l=1 delay {d1} + 2 stderr");
}

#[test]
fn acceptance_8_determinism_across_jobs() {
    let first = main_curve(); // computed with 2 worker threads
    let second = run_main_curve(1); // same config, single worker
    let pass = first.csv == second.csv;
    println!(
        "acceptance 8 (determinism across jobs): {} — {} bytes of CSV",
        if pass { "PASS" } else { "FAIL" },
        first.csv.len()
    );
    assert_eq!(first.csv, second.csv, "CSV must be byte-identical across --jobs");
}
