//! A single quickest-detection trial, traced step by step.
//!
//! The state sequence emits rho up to the change point and sigma afterwards;
//! each state is measured, the outcome's log-likelihood ratio feeds the
//! CUSUM recursion S <- max(0, S + llr), and the alarm fires when S crosses
//! the threshold.
//!
//! Run with: cargo run --release --example cusum_trial

use qusum::detection::{ChangePoint, ChangePointModel, PreparedTrial};
use qusum::measurement::basis_povm;
use qusum::rng::{RngHandle, StreamKind};
use qusum::states::DensityMatrix;

fn main() -> qusum::Result<()> {
    let model = ChangePointModel {
        rho: DensityMatrix::from_probs(&[0.5, 0.5])?,
        sigma: DensityMatrix::from_probs(&[0.9, 0.1])?,
        nu: ChangePoint::At(20),
    };
    let povm = basis_povm(2);
    let prepared = PreparedTrial::new(&model, &povm, 1)?;
    println!(
        "post-change drift D(q||p) = {:.6} nats/step, pre-change drift -D(p||q) = -{:.6}",
        prepared.table().divergence_qp,
        prepared.table().divergence_pq
    );

    let threshold = 4.0;
    let mut rng = RngHandle::new(41).trial(StreamKind::Simulation, 0);
    let (result, trace) = prepared.run_traced(threshold, 100_000, &mut rng)?;

    println!("\nchange point nu = 20, threshold h = {threshold}");
    println!(" step outcome     llr        S");
    for step in &trace {
        println!(
            "{:>5} {:>7} {:>9.4} {:>8.4}{}{}",
            step.block,
            step.outcome,
            step.llr,
            step.statistic,
            if step.block == 20 { "   <- change point" } else { "" },
            if step.stopped { "   <- alarm" } else { "" },
        );
    }
    println!(
        "\nstopped at step {} ({:?}), detection delay {} steps",
        result.stop_time,
        result.alarm_kind,
        result.stop_time.saturating_sub(20)
    );
    Ok(())
}
