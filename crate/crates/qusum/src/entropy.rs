//! Relative entropies: the quantum relative entropy
//! D(sigma||rho) = Tr sigma (log sigma - log rho) evaluated on supports,
//! the classical Kullback-Leibler divergence, and the measured relative
//! entropy a POVM induces. All values are in nats.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix};
use crate::measurement::Povm;
use crate::states::DensityMatrix;

/// Trace mass of sigma allowed outside the support of rho before the
/// divergence is declared infinite. Discriminates genuine support violations
/// from truncation roundoff.
pub const SUPPORT_LEAK_TOL: f64 = 1e-9;

/// Probabilities below this are treated as exact zeros in KL ratios.
/// Infinities here are semantic (support violations), not numeric underflow.
pub const PROB_FLOOR: f64 = 1e-300;

/// Outcome of a relative entropy computation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RelEntResult {
    /// Value in nats; `f64::INFINITY` on support violation.
    pub value: f64,
    /// True iff supp(sigma) fits inside supp(rho) up to the leak tolerance.
    pub support_ok: bool,
    /// Truncation error budget propagated from the states' trace deficits
    /// plus the measured support leak.
    pub truncation_budget: f64,
}

impl RelEntResult {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

/// Classical probability distribution over measurement outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    probs: Vec<f64>,
}

impl OutcomeDistribution {
    /// Clamps tiny negatives to zero; rejects sums off by more than 1e-6,
    /// renormalizes smaller deviations.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let mut probs = probs;
        for p in probs.iter_mut() {
            if *p < 0.0 {
                if *p < -1e-9 {
                    return Err(Error::Precondition(format!(
                        "probability {p:.3e} too negative to be roundoff"
                    )));
                }
                *p = 0.0;
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::NormalizationBroken { sum });
        }
        for p in probs.iter_mut() {
            *p /= sum;
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Classical KL divergence sum q_i ln(q_i/p_i), with 0 ln(0/.) = 0 and
/// +inf as soon as q puts mass where p has none.
pub fn kl_divergence(q: &OutcomeDistribution, p: &OutcomeDistribution) -> Result<f64> {
    if q.len() != p.len() {
        return Err(Error::LengthMismatch { left: q.len(), right: p.len() });
    }
    Ok(kl_divergence_raw(q.probs(), p.probs()))
}

/// KL on raw slices (assumed clamped and normalized).
pub(crate) fn kl_divergence_raw(q: &[f64], p: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&qi, &pi) in q.iter().zip(p) {
        if qi <= PROB_FLOOR {
            continue;
        }
        if pi <= PROB_FLOOR {
            return f64::INFINITY;
        }
        acc += qi * (qi / pi).ln();
    }
    // KL is nonnegative; tiny negatives are roundoff
    acc.max(0.0)
}

/// Quantum relative entropy D(sigma||rho) in nats.
///
/// Returns +inf when sigma carries more than [`SUPPORT_LEAK_TOL`] trace mass
/// outside the support of rho; otherwise evaluates
/// Tr sigma (log sigma - log rho) with both logarithms restricted to the
/// respective supports, clamped below at 0.
pub fn quantum_relative_entropy(sigma: &DensityMatrix, rho: &DensityMatrix) -> Result<RelEntResult> {
    if sigma.dim() != rho.dim() {
        return Err(Error::DimMismatch { left: sigma.dim(), right: rho.dim() });
    }
    let budget = sigma.trace_deficit() + rho.trace_deficit();

    let rho_eig = linalg::eig_hermitian(rho.matrix())?;
    let rho_cut = spectral_noise_cutoff(rho.matrix(), &rho_eig.eigenvalues);

    // leak = Tr (I - P) sigma (I - P) = Tr sigma - sum over supp(rho) of
    // <v|sigma|v>; both computed from the same eigenbasis.
    let mut on_support = 0.0;
    let mut log_rho_term = 0.0; // Tr(sigma log rho) over supp(rho)
    let dim = rho.dim();
    for (k, &lambda) in rho_eig.eigenvalues.iter().enumerate() {
        if lambda <= rho_cut {
            continue;
        }
        // <v_k| sigma |v_k>
        let mut sv = 0.0;
        for i in 0..dim {
            let vi = rho_eig.eigenvectors.get(i, k);
            for j in 0..dim {
                let vj = rho_eig.eigenvectors.get(j, k);
                let s = sigma.matrix().get(i, j);
                // Re( conj(v_i) * sigma_ij * v_j )
                let prod = vi.conj() * s * vj;
                sv += prod.re;
            }
        }
        let sv = sv.max(0.0);
        on_support += sv;
        log_rho_term += sv * lambda.ln();
    }
    let leak = (1.0 - on_support).max(0.0);
    if leak > SUPPORT_LEAK_TOL {
        return Ok(RelEntResult {
            value: f64::INFINITY,
            support_ok: false,
            truncation_budget: budget + leak,
        });
    }

    // Tr(sigma log sigma) = sum lambda ln lambda over supp(sigma)
    let sigma_eig = linalg::eig_hermitian(sigma.matrix())?;
    let sigma_cut = spectral_noise_cutoff(sigma.matrix(), &sigma_eig.eigenvalues);
    let neg_entropy: f64 = sigma_eig
        .eigenvalues
        .iter()
        .filter(|&&l| l > sigma_cut)
        .map(|&l| l * l.ln())
        .sum();

    let value = (neg_entropy - log_rho_term).max(0.0);
    Ok(RelEntResult { value, support_ok: true, truncation_budget: budget + leak })
}

/// Threshold separating a state's genuine spectrum from eigensolver noise.
///
/// Exactly diagonal matrices have exact eigenvalues, so every strictly
/// positive entry is genuine support no matter how small; truncated Gaussian
/// states fall in this class and their geometric tails must stay in support.
/// Dense matrices get a noise floor scaling with dimension and machine
/// epsilon, below which eigenvalues of a rank-deficient matrix are
/// indistinguishable from zero.
fn spectral_noise_cutoff(m: &ComplexMatrix, eigenvalues: &[f64]) -> f64 {
    let lmax = eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    let dim = m.dim();
    let mut offdiag: f64 = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            if i != j {
                offdiag = offdiag.max(m.get(i, j).norm());
            }
        }
    }
    if offdiag <= f64::EPSILON * lmax {
        0.0
    } else {
        4.0 * dim as f64 * f64::EPSILON * lmax
    }
}

/// Measured relative entropy D^M(sigma||rho): the classical KL divergence
/// between the outcome distributions M induces on sigma and rho.
pub fn measured_relative_entropy(
    sigma: &DensityMatrix,
    rho: &DensityMatrix,
    m: &Povm,
) -> Result<f64> {
    if sigma.dim() != rho.dim() {
        return Err(Error::DimMismatch { left: sigma.dim(), right: rho.dim() });
    }
    let q = crate::measurement::induced_distribution(m, sigma)?;
    let p = crate::measurement::induced_distribution(m, rho)?;
    kl_divergence(&q, &p)
}

/// Trace distance (1/2)||a - b||_1 between two density matrices.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch { left: a.dim(), right: b.dim() });
    }
    let diff = a.matrix().sub(b.matrix());
    let eig = linalg::eig_hermitian(&diff)?;
    Ok(0.5 * eig.eigenvalues.iter().map(|l| l.abs()).sum::<f64>())
}

/// Closed-form D between two thermal states (geometric distributions):
/// nbar1 ln(nbar1/nbar2) + (1+nbar1) ln((1+nbar2)/(1+nbar1)).
///
/// Independent oracle for the Fock-basis computation; both states are
/// diagonal so the quantum divergence reduces to a classical geometric KL.
pub fn thermal_relative_entropy_closed_form(nbar_sigma: f64, nbar_rho: f64) -> f64 {
    if nbar_sigma == nbar_rho {
        return 0.0;
    }
    let term1 = if nbar_sigma == 0.0 {
        0.0
    } else {
        nbar_sigma * (nbar_sigma / nbar_rho).ln()
    };
    term1 + (1.0 + nbar_sigma) * ((1.0 + nbar_rho) / (1.0 + nbar_sigma)).ln()
}

/// Divide by ln 2 to display nats as bits.
pub fn nats_to_bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}

/// Matrix-level divergence evaluated on raw Hermitian PSD matrices. Used by
/// channel-output comparisons where full state validation already happened.
pub fn quantum_relative_entropy_matrices(sigma: &ComplexMatrix, rho: &ComplexMatrix) -> Result<f64> {
    let s = DensityMatrix::trusted(sigma.clone(), 0.0);
    let r = DensityMatrix::trusted(rho.clone(), 0.0);
    Ok(quantum_relative_entropy(&s, &r)?.value)
}
