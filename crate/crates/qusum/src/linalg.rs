//! Dense complex-matrix kernel: Hermitian spectral decomposition, matrix
//! functions on the support, Kronecker products, norms.
//!
//! Everything downstream (states, entropies, channels, measurements) reduces
//! to operations on small dense Hermitian matrices, so this module keeps the
//! representation deliberately simple: row-major `Vec<Complex64>` with
//! explicit dimensions. The eigensolver is a cyclic complex Jacobi
//! iteration: slower than tridiagonalization at large dimensions, but its
//! reconstruction error stays at machine-epsilon scale, which downstream
//! entropy differences rely on.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative asymmetry allowed before a matrix is rejected as non-Hermitian.
pub const HERMITICITY_TOL: f64 = 1e-12;

/// Eigenvalues in `[-NEG_EIG_TOL, 0)` are treated as roundoff and clamped to 0.
pub const NEG_EIG_TOL: f64 = 1e-10;

/// Support cutoff as a fraction of the largest eigenvalue. Truncated Gaussian
/// states carry geometrically decaying spectra that must not be mistaken for
/// kernel directions, so the cutoff is relative, not absolute.
pub const SUPPORT_CUTOFF_REL: f64 = 1e-12;

/// Largest matrix dimension the kernel will produce (tensor powers included).
pub const MAX_DIM: usize = 4096;

/// Dense complex matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Complex64>,
}

impl ComplexMatrix {
    /// Build from row-major entries. All entries must be finite.
    pub fn from_rows(rows: usize, cols: usize, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::Precondition(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                entries.len()
            )));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Precondition("matrix entries must be finite".into()));
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, entries: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    /// Diagonal matrix from real entries.
    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, Complex64::new(d, 0.0));
        }
        m
    }

    /// Rank-1 projector |v><v| / <v|v>.
    pub fn projector(v: &[Complex64]) -> Self {
        let norm_sq: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        let dim = v.len();
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                m.set(i, j, v[i] * v[j].conj() / norm_sq);
            }
        }
        m
    }

    /// Outer product |a><b| without normalization.
    pub fn outer(a: &[Complex64], b: &[Complex64]) -> Self {
        let mut m = Self::zeros(a.len(), b.len());
        for i in 0..a.len() {
            for j in 0..b.len() {
                m.set(i, j, a[i] * b[j].conj());
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Square dimension; panics on non-square matrices.
    pub fn dim(&self) -> usize {
        assert!(self.is_square(), "dim() on a non-square matrix");
        self.rows
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.entries[i * self.cols + j] = v;
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j).conj());
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a + b)
            .collect();
        Self { rows: self.rows, cols: self.cols, entries }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a - b)
            .collect();
        Self { rows: self.rows, cols: self.cols, entries }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let entries = self.entries.iter().map(|a| a * s).collect();
        Self { rows: self.rows, cols: self.cols, entries }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    /// Matrix product.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    let cur = out.get(i, j);
                    out.set(i, j, cur + a * other.get(k, j));
                }
            }
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    /// Re Tr(self * other) without forming the product.
    pub fn trace_product_re(&self, other: &Self) -> f64 {
        assert_eq!(self.cols, other.rows);
        assert_eq!(self.rows, other.cols);
        let mut acc = 0.0;
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                let b = other.get(k, i);
                acc += a.re * b.re - a.im * b.im;
            }
        }
        acc
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entry modulus.
    pub fn max_norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Hermiticity defect ||A - A^dagger||_F.
    pub fn asymmetry(&self) -> f64 {
        assert!(self.is_square());
        let mut acc = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let d = self.get(i, j) - self.get(j, i).conj();
                acc += d.norm_sqr();
            }
        }
        acc.sqrt()
    }

    /// Checks ||A - A^dagger||_F <= tol * max(||A||_F, 1).
    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square() && self.asymmetry() <= tol * self.frobenius_norm().max(1.0)
    }

    /// Replace A by (A + A^dagger)/2. Removes roundoff-level asymmetry.
    pub fn hermitize(&self) -> Self {
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in 0..self.cols {
                let v = (self.get(i, j) + self.get(j, i).conj()) * 0.5;
                out.set(i, j, v);
            }
        }
        out
    }
}

/// Spectral decomposition of a Hermitian matrix: A = U diag(eigenvalues) U^dagger
/// with eigenvalues sorted descending and U unitary (columns are eigenvectors).
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl SpectralDecomposition {
    /// Rebuild U f(diag) U^dagger for a scalar function of the eigenvalues.
    pub fn apply_fn(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let dim = self.eigenvectors.rows();
        let u = &self.eigenvectors;
        let mut out = ComplexMatrix::zeros(dim, dim);
        for (k, &lambda) in self.eigenvalues.iter().enumerate() {
            let flambda = f(lambda);
            if flambda == 0.0 {
                continue;
            }
            for i in 0..dim {
                let ui = u.get(i, k) * flambda;
                for j in 0..dim {
                    let cur = out.get(i, j);
                    out.set(i, j, cur + ui * u.get(j, k).conj());
                }
            }
        }
        out
    }

    /// Column k of U as a vector.
    pub fn eigenvector(&self, k: usize) -> Vec<Complex64> {
        (0..self.eigenvectors.rows()).map(|i| self.eigenvectors.get(i, k)).collect()
    }
}

/// Hermitian eigendecomposition with eigenvalues sorted descending.
///
/// Rejects matrices whose asymmetry exceeds [`HERMITICITY_TOL`] relative to
/// their Frobenius norm; the input is symmetrized before the solve so the
/// decomposition is exactly Hermitian-consistent.
pub fn eig_hermitian(a: &ComplexMatrix) -> Result<SpectralDecomposition> {
    if !a.is_square() {
        return Err(Error::Precondition("eig_hermitian requires a square matrix".into()));
    }
    let asym = a.asymmetry();
    let tol = HERMITICITY_TOL * a.frobenius_norm().max(1.0);
    if asym > tol {
        return Err(Error::NotHermitian { asymmetry: asym, tol });
    }
    let dim = a.dim();
    let (raw_values, raw_vectors) = jacobi_hermitian(&a.hermitize())?;

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| raw_values[j].partial_cmp(&raw_values[i]).expect("finite eigenvalues"));

    let eigenvalues: Vec<f64> = order.iter().map(|&k| raw_values[k]).collect();
    let mut vecs = ComplexMatrix::zeros(dim, dim);
    for (col, &k) in order.iter().enumerate() {
        for row in 0..dim {
            vecs.set(row, col, raw_vectors.get(row, k));
        }
    }
    Ok(SpectralDecomposition { eigenvalues, eigenvectors: vecs })
}

/// Cyclic complex Jacobi iteration. Each rotation exactly annihilates one
/// off-diagonal pair; off-diagonal mass decays quadratically once sweeps
/// settle. Returns unsorted eigenvalues and the accumulated unitary.
fn jacobi_hermitian(a: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    const MAX_SWEEPS: usize = 64;
    let dim = a.dim();
    let mut work = a.clone();
    let mut vectors = ComplexMatrix::identity(dim);
    if dim <= 1 {
        return Ok((vec![work.get(0, 0).re], vectors));
    }
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);
    let stop = (f64::EPSILON * scale).powi(2);

    for _sweep in 0..MAX_SWEEPS {
        let mut off_sq = 0.0;
        for p in 0..dim {
            for q in (p + 1)..dim {
                off_sq += work.get(p, q).norm_sqr();
            }
        }
        if off_sq <= stop {
            let eigenvalues = (0..dim).map(|i| work.get(i, i).re).collect();
            return Ok((eigenvalues, vectors));
        }
        for p in 0..dim {
            for q in (p + 1)..dim {
                let gamma = work.get(p, q);
                let g = gamma.norm();
                if g <= f64::EPSILON * scale * 1e-3 {
                    continue;
                }
                let alpha = work.get(p, p).re;
                let beta = work.get(q, q).re;
                // phase e^{-i arg(gamma)} reduces the pivot to a real
                // 2x2 rotation with off-diagonal |gamma|
                let phase = gamma / g;
                let tau = (alpha - beta) / (2.0 * g);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = phase.conj() * (t * c);

                // columns: (AJ)[i,p] = c A[i,p] + s A[i,q];
                //          (AJ)[i,q] = -conj(s) A[i,p] + c A[i,q]
                // rows follow by conjugation; diagonal by the real formula
                for i in 0..dim {
                    if i == p || i == q {
                        continue;
                    }
                    let aip = work.get(i, p);
                    let aiq = work.get(i, q);
                    let new_ip = aip * c + aiq * s;
                    let new_iq = aip * (-s.conj()) + aiq * c;
                    work.set(i, p, new_ip);
                    work.set(p, i, new_ip.conj());
                    work.set(i, q, new_iq);
                    work.set(q, i, new_iq.conj());
                }
                work.set(p, p, Complex64::new(alpha + t * g, 0.0));
                work.set(q, q, Complex64::new(beta - t * g, 0.0));
                work.set(p, q, Complex64::new(0.0, 0.0));
                work.set(q, p, Complex64::new(0.0, 0.0));

                for i in 0..dim {
                    let vip = vectors.get(i, p);
                    let viq = vectors.get(i, q);
                    vectors.set(i, p, vip * c + viq * s);
                    vectors.set(i, q, vip * (-s.conj()) + viq * c);
                }
            }
        }
    }
    Err(Error::ConvergenceFailure { dim })
}

/// Matrix logarithm restricted to the support: eigenvalues above the cutoff
/// map through ln, the rest map to 0.
///
/// Returns the log matrix together with the indices of support eigenvalues.
pub fn log_on_support(
    a: &ComplexMatrix,
    support_cutoff: f64,
) -> Result<(ComplexMatrix, Vec<usize>)> {
    let eig = eig_hermitian(a)?;
    clamp_check(&eig.eigenvalues)?;
    let support: Vec<usize> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > support_cutoff)
        .map(|(i, _)| i)
        .collect();
    let log = eig.apply_fn(|l| if l > support_cutoff { l.ln() } else { 0.0 });
    Ok((log, support))
}

/// Orthogonal projector onto the span of eigenvectors with eigenvalue above
/// the cutoff.
pub fn support_projector(a: &ComplexMatrix, support_cutoff: f64) -> Result<ComplexMatrix> {
    let eig = eig_hermitian(a)?;
    clamp_check(&eig.eigenvalues)?;
    Ok(eig.apply_fn(|l| if l > support_cutoff { 1.0 } else { 0.0 }))
}

/// Default support cutoff for a PSD matrix: relative to its largest eigenvalue.
pub fn default_support_cutoff(max_eigenvalue: f64) -> f64 {
    SUPPORT_CUTOFF_REL * max_eigenvalue.max(0.0)
}

/// Rejects eigenvalues more negative than the clamp tolerance. Mild negatives
/// are roundoff from tensor products and are treated as zero by callers.
fn clamp_check(eigenvalues: &[f64]) -> Result<()> {
    if let Some(&worst) = eigenvalues
        .iter()
        .filter(|&&l| l < -NEG_EIG_TOL)
        .min_by(|a, b| a.partial_cmp(b).expect("finite"))
    {
        return Err(Error::Precondition(format!(
            "matrix is not PSD: eigenvalue {worst:.3e} below -{NEG_EIG_TOL:.0e}"
        )));
    }
    Ok(())
}

/// Kronecker product with the row-major index convention
/// `(a kron b)[(i1*rb + i2), (j1*cb + j2)] = a[i1,j1] * b[i2,j2]`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    kron_with_cap(a, b, MAX_DIM)
}

/// Kronecker product with an explicit dimension cap.
pub fn kron_with_cap(a: &ComplexMatrix, b: &ComplexMatrix, max_dim: usize) -> Result<ComplexMatrix> {
    let rows = a.rows() * b.rows();
    let cols = a.cols() * b.cols();
    if rows > max_dim || cols > max_dim {
        return Err(Error::DimensionOverflow { dim: rows.max(cols), max_dim });
    }
    let mut out = ComplexMatrix::zeros(rows, cols);
    for i1 in 0..a.rows() {
        for j1 in 0..a.cols() {
            let av = a.get(i1, j1);
            if av.re == 0.0 && av.im == 0.0 {
                continue;
            }
            for i2 in 0..b.rows() {
                for j2 in 0..b.cols() {
                    out.set(i1 * b.rows() + i2, j1 * b.cols() + j2, av * b.get(i2, j2));
                }
            }
        }
    }
    Ok(out)
}

/// PSD square root via the spectral decomposition (negative roundoff clamped).
pub fn sqrt_psd(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = eig_hermitian(a)?;
    clamp_check(&eig.eigenvalues)?;
    Ok(eig.apply_fn(|l| l.max(0.0).sqrt()))
}

/// Orthonormalize the columns of a matrix (modified Gram-Schmidt). Used to
/// draw Haar-ish random unitaries and isometries for tests and verify suites.
pub fn orthonormalize_columns(a: &ComplexMatrix) -> ComplexMatrix {
    let rows = a.rows();
    let cols = a.cols();
    let mut q = a.clone();
    for j in 0..cols {
        for k in 0..j {
            // proj = <q_k, q_j>
            let mut proj = Complex64::new(0.0, 0.0);
            for i in 0..rows {
                proj += q.get(i, k).conj() * q.get(i, j);
            }
            for i in 0..rows {
                let v = q.get(i, j) - proj * q.get(i, k);
                q.set(i, j, v);
            }
        }
        let norm: f64 = (0..rows).map(|i| q.get(i, j).norm_sqr()).sum::<f64>().sqrt();
        for i in 0..rows {
            let v = q.get(i, j) / norm;
            q.set(i, j, v);
        }
    }
    q
}
