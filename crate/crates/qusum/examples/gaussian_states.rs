//! Gaussian states in a truncated Fock basis: automatic cutoff selection,
//! tail bookkeeping, and the state descriptor grammar.
//!
//! Run with: cargo run --release --example gaussian_states

use num_complex::Complex64;
use qusum::states::{build_state, parse_state_spec, StateSpec};

fn main() -> qusum::Result<()> {
    // Thermal state: diagonal, geometric photon-number distribution. The
    // automatic cutoff is the smallest dimension with tail mass below the
    // tolerance (analytic geometric tail).
    let thermal = build_state(&StateSpec::thermal(1.0))?;
    println!("thermal nbar=1.0:");
    println!("  cutoff {} levels, trace deficit {:.3e}", thermal.dim(), thermal.trace_deficit());
    println!("  mean photons {:.9}, purity {:.6}", thermal.mean_photon_number(), thermal.purity());

    // Coherent state: rank 1, Poisson photon statistics.
    let coherent = build_state(&StateSpec::coherent(Complex64::new(1.5, -0.5)))?;
    println!("\ncoherent alpha=1.5-0.5i:");
    println!("  cutoff {} levels, trace deficit {:.3e}", coherent.dim(), coherent.trace_deficit());
    println!(
        "  mean photons {:.9} (|alpha|^2 = {}), purity {:.9}",
        coherent.mean_photon_number(),
        1.5f64 * 1.5 + 0.5 * 0.5,
        coherent.purity()
    );

    // Squeezed vacuum: rank 1 on even Fock levels.
    let squeezed = build_state(&StateSpec::squeezed(0.8))?;
    println!("\nsqueezed vacuum r=0.8:");
    println!("  cutoff {} levels, trace deficit {:.3e}", squeezed.dim(), squeezed.trace_deficit());
    println!(
        "  mean photons {:.9} (sinh^2 r = {:.9})",
        squeezed.mean_photon_number(),
        0.8f64.sinh().powi(2)
    );

    // The CLI grammar builds the same states from strings.
    let spec = parse_state_spec("mix:0.7*thermal:nbar=0.5|0.3*coherent:re=1,im=0@cutoff=auto,tail=1e-8")?;
    let mixed = build_state(&spec)?;
    println!("\nmixture from descriptor string:");
    println!("  cutoff {} levels, purity {:.6}", mixed.dim(), mixed.purity());
    let report = mixed.validate();
    println!(
        "  validation: passes={} (hermiticity {:.2e}, min eig {:.2e}, trace err {:.2e})",
        report.passes, report.hermiticity_error, report.min_eigenvalue, report.trace_error
    );
    Ok(())
}
