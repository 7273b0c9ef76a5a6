//! POVMs, outcome sampling, quantum channels in Kraus form, POVM pushforward
//! through channel duals, and finite-dimensional compression channels.
//!
//! The pushforward alpha(M)_i = sum_k K_k^dagger M_i K_k is the channel dual
//! (unital CP) acting on measurement elements; measuring alpha(M) on a state
//! is the same experiment as measuring M on the channel output.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::entropy::OutcomeDistribution;
use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix};
use crate::states::DensityMatrix;

/// Completeness defects up to this size are silently repaired by the
/// symmetric correction; anything larger is an upstream bug and errors out.
pub const COMPLETENESS_REPAIR_TOL: f64 = 1e-9;

/// Positive operator-valued measure: PSD elements summing to the identity.
#[derive(Debug, Clone)]
pub struct Povm {
    dim: usize,
    elements: Vec<ComplexMatrix>,
}

impl Povm {
    /// Validates PSD-ness and completeness. Deviations from completeness up
    /// to [`COMPLETENESS_REPAIR_TOL`] in max-norm are repaired via
    /// M_i -> S^{-1/2} M_i S^{-1/2} with S the element sum; silently fixing
    /// worse POVMs would mask optimizer bugs, so those error out.
    pub fn new(elements: Vec<ComplexMatrix>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::Precondition("POVM needs at least one element".into()));
        }
        let dim = elements[0].rows();
        for el in &elements {
            if el.rows() != dim || el.cols() != dim {
                return Err(Error::DimMismatch { left: el.rows(), right: dim });
            }
            if !el.is_hermitian(1e-10) {
                return Err(Error::NotHermitian { asymmetry: el.asymmetry(), tol: 1e-10 });
            }
            let eig = linalg::eig_hermitian(&el.hermitize())?;
            if let Some(&min) = eig.eigenvalues.last() {
                if min < -1e-10 {
                    return Err(Error::Precondition(format!(
                        "POVM element has negative eigenvalue {min:.3e}"
                    )));
                }
            }
        }
        let mut sum = ComplexMatrix::zeros(dim, dim);
        for el in &elements {
            sum = sum.add(el);
        }
        let defect = sum.sub(&ComplexMatrix::identity(dim)).max_norm();
        let elements = if defect <= 1e-12 {
            elements
        } else if defect <= COMPLETENESS_REPAIR_TOL {
            let inv_sqrt = inv_sqrt_psd(&sum)?;
            elements
                .into_iter()
                .map(|el| inv_sqrt.mul(&el).mul(&inv_sqrt).hermitize())
                .collect()
        } else {
            return Err(Error::NormalizationBroken { sum: sum.trace().re / dim as f64 });
        };
        Ok(Self { dim, elements })
    }

    /// Trusted constructor for elements complete by construction.
    pub(crate) fn trusted(dim: usize, elements: Vec<ComplexMatrix>) -> Self {
        Self { dim, elements }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[ComplexMatrix] {
        &self.elements
    }

    /// Max-norm distance of the element sum from the identity.
    pub fn completeness_defect(&self) -> f64 {
        let mut sum = ComplexMatrix::zeros(self.dim, self.dim);
        for el in &self.elements {
            sum = sum.add(el);
        }
        sum.sub(&ComplexMatrix::identity(self.dim)).max_norm()
    }

    /// Tensor product of two POVMs (all element pairs).
    pub fn tensor(&self, other: &Povm) -> Result<Povm> {
        let mut elements = Vec::with_capacity(self.len() * other.len());
        for a in &self.elements {
            for b in &other.elements {
                elements.push(linalg::kron(a, b)?);
            }
        }
        Ok(Povm::trusted(self.dim * other.dim, elements))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = PovmFile::from_povm(self);
        std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Povm> {
        let text = std::fs::read_to_string(path)?;
        let file: PovmFile = serde_json::from_str(&text)?;
        file.to_povm()
    }
}

/// Projective measurement onto the computational basis.
pub fn basis_povm(dim: usize) -> Povm {
    let elements = (0..dim)
        .map(|i| {
            let mut v = vec![Complex64::new(0.0, 0.0); dim];
            v[i] = Complex64::new(1.0, 0.0);
            ComplexMatrix::projector(&v)
        })
        .collect();
    Povm::trusted(dim, elements)
}

/// Projective measurement onto the eigenbasis of a Hermitian matrix.
pub fn eigenbasis_povm(a: &ComplexMatrix) -> Result<Povm> {
    let eig = linalg::eig_hermitian(a)?;
    let dim = a.dim();
    let elements = (0..dim)
        .map(|k| ComplexMatrix::projector(&eig.eigenvector(k)))
        .collect();
    Ok(Povm::trusted(dim, elements))
}

/// On-disk POVM format.
#[derive(Debug, Serialize, Deserialize)]
pub struct PovmFile {
    pub dim: usize,
    pub elements: Vec<MatrixEntries>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MatrixEntries {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl MatrixEntries {
    pub fn from_matrix(m: &ComplexMatrix) -> Self {
        Self {
            re: (0..m.rows()).map(|i| (0..m.cols()).map(|j| m.get(i, j).re).collect()).collect(),
            im: (0..m.rows()).map(|i| (0..m.cols()).map(|j| m.get(i, j).im).collect()).collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<ComplexMatrix> {
        let rows = self.re.len();
        if rows == 0 || self.im.len() != rows {
            return Err(Error::BadSpec("matrix entries must be non-empty and matched".into()));
        }
        let cols = self.re[0].len();
        let mut entries = Vec::with_capacity(rows * cols);
        for (re_row, im_row) in self.re.iter().zip(&self.im) {
            if re_row.len() != cols || im_row.len() != cols {
                return Err(Error::BadSpec("ragged matrix entries".into()));
            }
            for (&re, &im) in re_row.iter().zip(im_row) {
                entries.push(Complex64::new(re, im));
            }
        }
        ComplexMatrix::from_rows(rows, cols, entries)
    }
}

impl PovmFile {
    pub fn from_povm(p: &Povm) -> Self {
        Self {
            dim: p.dim(),
            elements: p.elements().iter().map(MatrixEntries::from_matrix).collect(),
        }
    }

    pub fn to_povm(&self) -> Result<Povm> {
        let elements: Result<Vec<_>> = self.elements.iter().map(|e| e.to_matrix()).collect();
        Povm::new(elements?)
    }
}

/// Completely positive trace-preserving map as a list of Kraus operators
/// (each `out_dim x in_dim`).
#[derive(Debug, Clone)]
pub struct KrausChannel {
    in_dim: usize,
    out_dim: usize,
    kraus_ops: Vec<ComplexMatrix>,
}

impl KrausChannel {
    /// Validates trace preservation sum K^dagger K = I to 1e-9.
    pub fn new(kraus_ops: Vec<ComplexMatrix>) -> Result<Self> {
        if kraus_ops.is_empty() {
            return Err(Error::Precondition("channel needs at least one Kraus operator".into()));
        }
        let out_dim = kraus_ops[0].rows();
        let in_dim = kraus_ops[0].cols();
        for k in &kraus_ops {
            if k.rows() != out_dim || k.cols() != in_dim {
                return Err(Error::DimMismatch { left: k.rows(), right: out_dim });
            }
        }
        let mut sum = ComplexMatrix::zeros(in_dim, in_dim);
        for k in &kraus_ops {
            sum = sum.add(&k.adjoint().mul(k));
        }
        let defect = sum.sub(&ComplexMatrix::identity(in_dim)).max_norm();
        if defect > 1e-9 {
            return Err(Error::Precondition(format!(
                "Kraus operators are not trace-preserving: defect {defect:.3e}"
            )));
        }
        Ok(Self { in_dim, out_dim, kraus_ops })
    }

    pub fn identity(dim: usize) -> Self {
        Self { in_dim: dim, out_dim: dim, kraus_ops: vec![ComplexMatrix::identity(dim)] }
    }

    /// Conjugation by a unitary.
    pub fn unitary(u: ComplexMatrix) -> Result<Self> {
        Self::new(vec![u])
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn kraus_ops(&self) -> &[ComplexMatrix] {
        &self.kraus_ops
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = ChannelFile::from_channel(self);
        std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: ChannelFile = serde_json::from_str(&text)?;
        file.to_channel()
    }
}

/// On-disk channel format.
#[derive(Debug, Serialize, Deserialize)]
pub struct ChannelFile {
    pub in_dim: usize,
    pub out_dim: usize,
    pub kraus: Vec<MatrixEntries>,
}

impl ChannelFile {
    pub fn from_channel(ch: &KrausChannel) -> Self {
        Self {
            in_dim: ch.in_dim(),
            out_dim: ch.out_dim(),
            kraus: ch.kraus_ops().iter().map(MatrixEntries::from_matrix).collect(),
        }
    }

    pub fn to_channel(&self) -> Result<KrausChannel> {
        let ops: Result<Vec<_>> = self.kraus.iter().map(|e| e.to_matrix()).collect();
        KrausChannel::new(ops?)
    }
}

/// Outcome probabilities p_i = Re Tr(M_i rho).
pub fn induced_distribution(m: &Povm, rho: &DensityMatrix) -> Result<OutcomeDistribution> {
    if m.dim() != rho.dim() {
        return Err(Error::DimMismatch { left: m.dim(), right: rho.dim() });
    }
    let probs: Vec<f64> = m
        .elements()
        .iter()
        .map(|el| el.trace_product_re(rho.matrix()))
        .collect();
    OutcomeDistribution::new(probs)
}

/// Draw one outcome index by inverse CDF over cumulative sums, consuming a
/// single uniform.
pub fn sample_outcome<R: Rng + ?Sized>(dist: &OutcomeDistribution, rng: &mut R) -> usize {
    sample_outcome_from_uniform(dist.probs(), rng.gen::<f64>())
}

/// Inverse-CDF sampling from a raw probability slice and a uniform in [0,1).
#[inline]
pub fn sample_outcome_from_uniform(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last_nonzero = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last_nonzero = i;
        if u < acc {
            return i;
        }
    }
    // u fell into the roundoff gap below 1.0
    last_nonzero
}

/// Apply the channel: rho -> sum K rho K^dagger.
pub fn apply_channel(ch: &KrausChannel, rho: &DensityMatrix) -> Result<DensityMatrix> {
    if ch.in_dim() != rho.dim() {
        return Err(Error::DimMismatch { left: ch.in_dim(), right: rho.dim() });
    }
    let mut out = ComplexMatrix::zeros(ch.out_dim(), ch.out_dim());
    for k in ch.kraus_ops() {
        out = out.add(&k.mul(rho.matrix()).mul(&k.adjoint()));
    }
    Ok(DensityMatrix::trusted(out, rho.trace_deficit()))
}

/// Pull a POVM on the channel output back to the input:
/// alpha(M)_i = sum_k K_k^dagger M_i K_k. The result is again a POVM, and
/// measuring it on any state reproduces the statistics of measuring M on the
/// channel output.
pub fn pushforward_povm(ch: &KrausChannel, m: &Povm) -> Result<Povm> {
    if m.dim() != ch.out_dim() {
        return Err(Error::DimMismatch { left: m.dim(), right: ch.out_dim() });
    }
    let elements: Vec<ComplexMatrix> = m
        .elements()
        .iter()
        .map(|el| {
            let mut acc = ComplexMatrix::zeros(ch.in_dim(), ch.in_dim());
            for k in ch.kraus_ops() {
                acc = acc.add(&k.adjoint().mul(el).mul(k));
            }
            acc.hermitize()
        })
        .collect();
    Ok(Povm::trusted(ch.in_dim(), elements))
}

/// Trace-preserving compression from dimension `d` to `n+1`: the first `n`
/// basis states pass through an isometry, everything else lands in a sink
/// state. The sink keeps the map trace-preserving rather than just a
/// subspace restriction.
pub fn compression_channel(n: usize, d: usize) -> Result<KrausChannel> {
    if n == 0 || n >= d {
        return Err(Error::BadDims { sub: n, full: d });
    }
    let out_dim = n + 1;
    let mut ops = Vec::with_capacity(1 + d - n);
    // isometry on the kept subspace
    let mut p = ComplexMatrix::zeros(out_dim, d);
    for j in 0..n {
        p.set(j, j, Complex64::new(1.0, 0.0));
    }
    ops.push(p);
    // |sink><e_j| for each discarded basis state
    for j in n..d {
        let mut k = ComplexMatrix::zeros(out_dim, d);
        k.set(n, j, Complex64::new(1.0, 0.0));
        ops.push(k);
    }
    KrausChannel::new(ops)
}

fn inv_sqrt_psd(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = linalg::eig_hermitian(a)?;
    let max = eig.eigenvalues[0];
    let min = *eig.eigenvalues.last().expect("non-empty");
    if min <= 1e-12 * max {
        return Err(Error::SingularNormalizer { ratio: min / max });
    }
    Ok(eig.apply_fn(|l| 1.0 / l.sqrt()))
}

// ---------------------------------------------------------------------------
// Random instances for property checks and verification suites
// ---------------------------------------------------------------------------

/// Random full-rank diagonal (classical) state.
pub fn random_diagonal_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityMatrix {
    let probs: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() + 0.05).collect();
    DensityMatrix::from_probs(&probs).expect("positive probabilities")
}

/// Random full-rank density matrix (Ginibre construction G G^dagger / tr).
pub fn random_density<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityMatrix {
    let g = random_ginibre(dim, dim, rng);
    let m = g.mul(&g.adjoint());
    // regularize so random states stay comfortably full-rank
    let m = m.add(&ComplexMatrix::identity(dim).scale_re(1e-6 * m.trace().re));
    DensityMatrix::trusted(m, 0.0)
}

/// Random POVM with `outcomes` elements via the normalizer construction.
pub fn random_povm<R: Rng + ?Sized>(dim: usize, outcomes: usize, rng: &mut R) -> Result<Povm> {
    let factors: Vec<ComplexMatrix> = (0..outcomes).map(|_| random_ginibre(dim, dim, rng)).collect();
    let mut s = ComplexMatrix::zeros(dim, dim);
    for a in &factors {
        s = s.add(&a.adjoint().mul(a));
    }
    let inv_sqrt = inv_sqrt_psd(&s)?;
    let elements = factors
        .iter()
        .map(|a| inv_sqrt.mul(&a.adjoint().mul(a)).mul(&inv_sqrt).hermitize())
        .collect();
    Ok(Povm::trusted(dim, elements))
}

/// Random channel from `in_dim` to `out_dim` with `kraus_count` operators,
/// built from a Haar-ish random isometry.
pub fn random_channel<R: Rng + ?Sized>(
    in_dim: usize,
    out_dim: usize,
    kraus_count: usize,
    rng: &mut R,
) -> Result<KrausChannel> {
    if kraus_count * out_dim < in_dim {
        return Err(Error::BadDims { sub: kraus_count * out_dim, full: in_dim });
    }
    let g = random_ginibre(kraus_count * out_dim, in_dim, rng);
    let iso = linalg::orthonormalize_columns(&g);
    let ops = (0..kraus_count)
        .map(|b| {
            let mut k = ComplexMatrix::zeros(out_dim, in_dim);
            for i in 0..out_dim {
                for j in 0..in_dim {
                    k.set(i, j, iso.get(b * out_dim + i, j));
                }
            }
            k
        })
        .collect();
    KrausChannel::new(ops)
}

/// Random unitary matrix.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    linalg::orthonormalize_columns(&random_ginibre(dim, dim, rng))
}

fn random_ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    // Box-Muller standard normals
    let mut normal = || {
        let u1: f64 = rng.gen::<f64>().max(1e-300);
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };
    let entries = (0..rows * cols)
        .map(|_| Complex64::new(normal(), normal()))
        .collect();
    ComplexMatrix::from_rows(rows, cols, entries).expect("finite normals")
}
