//! The delay / false-alarm trade-off: sweeping the CUSUM threshold maps out
//! mean detection delay against the log mean time to false alarm, whose
//! asymptotic slope is 1/D(q||p) for the measurement in use - at best
//! 1/D(sigma||rho).
//!
//! Run with: cargo run --release --example tradeoff_curve

use qusum::experiments::{render_csv, tradeoff_experiment, TradeoffConfig};
use qusum::measurement::basis_povm;
use qusum::states::DensityMatrix;

fn main() -> qusum::Result<()> {
    let sigma = DensityMatrix::from_probs(&[0.9, 0.1])?;
    let rho = DensityMatrix::from_probs(&[0.5, 0.5])?;
    let povm = basis_povm(2);

    let cfg = TradeoffConfig {
        thresholds: vec![3.5, 4.5, 5.5, 6.5, 7.5, 8.5, 9.5],
        n_trials_delay: 4_000,
        n_trials_tfa: 1_000,
        horizon: 5_000_000,
        seed: 7,
        block_l: 1,
    };
    let (curve, fit) = tradeoff_experiment(&sigma, &rho, &povm, &cfg)?;

    print!("{}", render_csv(&curve, &fit));
    println!();
    println!("fitted slope       : {:.4} steps per nat of ln T_FA", fit.slope);
    println!("measurement theory : {:.4} (= 1/D(q||p))", fit.theory_slope);
    println!("quantum floor      : {:.4} (= 1/D(sigma||rho))", fit.quantum_slope);
    println!("fit r^2            : {:.6}", fit.r_squared);
    Ok(())
}
