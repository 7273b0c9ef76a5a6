//! Density-matrix construction: direct matrices, finite-dimensional test
//! states, and single-mode Gaussian states (thermal, coherent, squeezed
//! vacuum) in a truncated Fock basis with controlled tail error.
//!
//! Truncation policy is truncate-then-renormalize: the matrix is cut to
//! `N x N`, the lost tail mass is recorded as `trace_deficit`, and the result
//! is rescaled to unit trace so downstream entropies stay well-defined.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, MAX_DIM, NEG_EIG_TOL};

/// Default tail mass tolerance for automatic Fock cutoffs.
pub const DEFAULT_TAIL_TOL: f64 = 1e-10;

/// Hermitian positive semidefinite unit-trace matrix.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
    trace_deficit: f64,
}

impl DensityMatrix {
    /// Validate and normalize a raw matrix into a density matrix.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        Self::with_deficit(matrix, 0.0)
    }

    /// As [`DensityMatrix::new`], recording truncation mass lost upstream.
    pub fn with_deficit(matrix: ComplexMatrix, trace_deficit: f64) -> Result<Self> {
        let report = ValidationReport::for_matrix(&matrix);
        if !report.hermitian_ok() {
            return Err(Error::NotHermitian {
                asymmetry: report.hermiticity_error,
                tol: linalg::HERMITICITY_TOL,
            });
        }
        if report.min_eigenvalue < -NEG_EIG_TOL {
            return Err(Error::Precondition(format!(
                "matrix has negative eigenvalue {:.3e}",
                report.min_eigenvalue
            )));
        }
        let trace = matrix.trace().re;
        if trace <= 0.0 {
            return Err(Error::Precondition("matrix trace must be positive".into()));
        }
        let normalized = matrix.hermitize().scale_re(1.0 / trace);
        Ok(Self { matrix: normalized, trace_deficit: trace_deficit.max(0.0) })
    }

    /// Internal fast path: `matrix` is trusted Hermitian PSD up to roundoff.
    pub(crate) fn trusted(matrix: ComplexMatrix, trace_deficit: f64) -> Self {
        let trace = matrix.trace().re;
        let normalized = matrix.hermitize().scale_re(1.0 / trace);
        Self { matrix: normalized, trace_deficit: trace_deficit.max(0.0) }
    }

    /// Pure state |v><v| (v need not be normalized).
    pub fn pure(v: &[Complex64]) -> Self {
        Self { matrix: ComplexMatrix::projector(v), trace_deficit: 0.0 }
    }

    /// Diagonal (classical) state from probabilities, renormalized.
    pub fn from_probs(probs: &[f64]) -> Result<Self> {
        if probs.iter().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err(Error::Precondition("probabilities must be nonnegative".into()));
        }
        Self::new(ComplexMatrix::from_diag(probs))
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn trace_deficit(&self) -> f64 {
        self.trace_deficit
    }

    /// Tr(rho^2); 1 for pure states.
    pub fn purity(&self) -> f64 {
        let f = self.matrix.frobenius_norm();
        f * f
    }

    /// Mean photon number when interpreted in the Fock basis.
    pub fn mean_photon_number(&self) -> f64 {
        (0..self.dim()).map(|n| n as f64 * self.matrix.get(n, n).re).sum()
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::for_matrix(&self.matrix);
        report.trace_deficit = self.trace_deficit;
        report
    }
}

/// Diagnostics for a candidate density matrix.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub hermiticity_error: f64,
    pub min_eigenvalue: f64,
    pub trace_error: f64,
    pub trace_deficit: f64,
    pub passes: bool,
}

impl ValidationReport {
    pub fn for_matrix(m: &ComplexMatrix) -> Self {
        let hermiticity_error = if m.is_square() { m.asymmetry() } else { f64::INFINITY };
        let min_eigenvalue = if m.is_square() && hermiticity_error.is_finite() {
            match linalg::eig_hermitian(&m.hermitize()) {
                Ok(eig) => eig.eigenvalues.last().copied().unwrap_or(0.0),
                Err(_) => f64::NEG_INFINITY,
            }
        } else {
            f64::NEG_INFINITY
        };
        let trace_error = (m.trace().re - 1.0).abs();
        let herm_tol = linalg::HERMITICITY_TOL * m.frobenius_norm().max(1.0);
        let passes = hermiticity_error <= herm_tol
            && min_eigenvalue >= -NEG_EIG_TOL
            && trace_error <= 1e-10;
        Self {
            hermiticity_error,
            min_eigenvalue,
            trace_error,
            trace_deficit: 0.0,
            passes,
        }
    }

    fn hermitian_ok(&self) -> bool {
        self.hermiticity_error.is_finite()
    }
}

/// Fock cutoff selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cutoff {
    /// Smallest cutoff whose tail mass is within the tolerance.
    Auto,
    /// Fixed number of Fock levels.
    Fixed(usize),
}

/// What state to build. Matrix elements follow the standard constructions:
/// thermal states are geometric-diagonal, coherent states rank-1 Poissonian,
/// squeezed vacuum rank-1 on even Fock levels (squeezing along the position
/// quadrature, real r).
#[derive(Debug, Clone, PartialEq)]
pub enum StateKind {
    Thermal { nbar: f64 },
    Coherent { alpha: Complex64 },
    SqueezedVacuum { r: f64 },
    Fock { n: usize },
    MatrixFile { path: PathBuf },
    Mixture { components: Vec<(f64, StateKind)> },
}

/// Full state specification: kind plus truncation policy.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpec {
    pub kind: StateKind,
    pub cutoff: Cutoff,
    pub tail_tol: f64,
}

impl StateSpec {
    pub fn new(kind: StateKind) -> Self {
        Self { kind, cutoff: Cutoff::Auto, tail_tol: DEFAULT_TAIL_TOL }
    }

    pub fn thermal(nbar: f64) -> Self {
        Self::new(StateKind::Thermal { nbar })
    }

    pub fn coherent(alpha: Complex64) -> Self {
        Self::new(StateKind::Coherent { alpha })
    }

    pub fn squeezed(r: f64) -> Self {
        Self::new(StateKind::SqueezedVacuum { r })
    }

    pub fn fock(n: usize) -> Self {
        Self::new(StateKind::Fock { n })
    }
}

/// On-disk matrix format: real and imaginary parts as row-major grids.
#[derive(Debug, Serialize, Deserialize)]
pub struct MatrixFile {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl MatrixFile {
    pub fn load(path: &Path) -> Result<ComplexMatrix> {
        let text = std::fs::read_to_string(path)?;
        let file: MatrixFile = serde_json::from_str(&text)?;
        file.to_matrix()
    }

    pub fn to_matrix(&self) -> Result<ComplexMatrix> {
        if self.re.len() != self.dim || self.im.len() != self.dim {
            return Err(Error::BadSpec("matrix file row count does not match dim".into()));
        }
        let mut entries = Vec::with_capacity(self.dim * self.dim);
        for (re_row, im_row) in self.re.iter().zip(&self.im) {
            if re_row.len() != self.dim || im_row.len() != self.dim {
                return Err(Error::BadSpec("matrix file column count does not match dim".into()));
            }
            for (&re, &im) in re_row.iter().zip(im_row) {
                entries.push(Complex64::new(re, im));
            }
        }
        ComplexMatrix::from_rows(self.dim, self.dim, entries)
    }

    pub fn from_matrix(m: &ComplexMatrix) -> Self {
        let dim = m.dim();
        let re = (0..dim)
            .map(|i| (0..dim).map(|j| m.get(i, j).re).collect())
            .collect();
        let im = (0..dim)
            .map(|i| (0..dim).map(|j| m.get(i, j).im).collect())
            .collect();
        Self { dim, re, im }
    }
}

/// Build the density matrix described by `spec`.
pub fn build_state(spec: &StateSpec) -> Result<DensityMatrix> {
    let n = resolve_cutoff(spec)?;
    build_state_at(spec, n)
}

/// Build at an explicit cutoff (used to put state pairs on a common space).
pub fn build_state_at(spec: &StateSpec, cutoff: usize) -> Result<DensityMatrix> {
    check_kind(&spec.kind)?;
    if cutoff == 0 {
        return Err(Error::BadSpec("cutoff must be at least 1".into()));
    }
    if cutoff > MAX_DIM {
        return Err(Error::DimensionOverflow { dim: cutoff, max_dim: MAX_DIM });
    }
    let raw = raw_truncation(&spec.kind, cutoff)?;
    let trace = raw.trace().re;
    if trace <= 0.0 {
        return Err(Error::CutoffTooSmall { tail: 1.0, tol: spec.tail_tol, max_dim: cutoff });
    }
    let deficit = (1.0 - trace).max(0.0);
    Ok(DensityMatrix::trusted(raw, deficit))
}

/// Resolve the spec's cutoff to a concrete Fock dimension.
pub fn resolve_cutoff(spec: &StateSpec) -> Result<usize> {
    check_kind(&spec.kind)?;
    match spec.cutoff {
        Cutoff::Fixed(n) => {
            let min = min_dim(&spec.kind)?;
            if n < min {
                return Err(Error::BadSpec(format!(
                    "cutoff {n} smaller than the state's minimal dimension {min}"
                )));
            }
            Ok(n)
        }
        Cutoff::Auto => auto_cutoff(&spec.kind, spec.tail_tol),
    }
}

/// Build sigma and rho on a common Fock space: the larger of the two resolved
/// cutoffs. Fixed-dimension states (matrix files) pin the common dimension.
pub fn build_pair(sigma: &StateSpec, rho: &StateSpec) -> Result<(DensityMatrix, DensityMatrix)> {
    let n_sigma = resolve_cutoff(sigma)?;
    let n_rho = resolve_cutoff(rho)?;
    let common = n_sigma.max(n_rho);
    let s = build_state_at(sigma, common)?;
    let r = build_state_at(rho, common)?;
    Ok((s, r))
}

/// l-fold Kronecker power.
pub fn tensor_power(rho: &DensityMatrix, l: usize) -> Result<DensityMatrix> {
    if l == 0 {
        return Err(Error::Precondition("tensor power requires l >= 1".into()));
    }
    let mut out = rho.matrix().clone();
    for _ in 1..l {
        out = linalg::kron(&out, rho.matrix())?;
    }
    let single = 1.0 - rho.trace_deficit();
    let deficit = 1.0 - single.powi(l as i32);
    Ok(DensityMatrix::trusted(out, deficit))
}

fn check_kind(kind: &StateKind) -> Result<()> {
    match kind {
        StateKind::Thermal { nbar } => {
            if !nbar.is_finite() || *nbar < 0.0 {
                return Err(Error::BadSpec(format!("thermal nbar must be >= 0, got {nbar}")));
            }
        }
        StateKind::Coherent { alpha } => {
            if !alpha.re.is_finite() || !alpha.im.is_finite() {
                return Err(Error::BadSpec("coherent alpha must be finite".into()));
            }
        }
        StateKind::SqueezedVacuum { r } => {
            if !r.is_finite() {
                return Err(Error::BadSpec("squeezing parameter must be finite".into()));
            }
        }
        StateKind::Fock { .. } | StateKind::MatrixFile { .. } => {}
        StateKind::Mixture { components } => {
            if components.is_empty() {
                return Err(Error::BadSpec("mixture needs at least one component".into()));
            }
            let total: f64 = components.iter().map(|(w, _)| w).sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::BadSpec(format!("mixture weights sum to {total}, expected 1")));
            }
            for (w, k) in components {
                if *w < 0.0 {
                    return Err(Error::BadSpec("mixture weights must be nonnegative".into()));
                }
                if matches!(k, StateKind::Mixture { .. }) {
                    return Err(Error::BadSpec("nested mixtures are not supported".into()));
                }
                check_kind(k)?;
            }
        }
    }
    Ok(())
}

/// Minimal dimension a kind can be represented in.
fn min_dim(kind: &StateKind) -> Result<usize> {
    Ok(match kind {
        StateKind::Fock { n } => n + 1,
        StateKind::MatrixFile { path } => MatrixFile::load(path)?.dim(),
        StateKind::Mixture { components } => {
            let mut m = 1;
            for (_, k) in components {
                m = m.max(min_dim(k)?);
            }
            m
        }
        _ => 1,
    })
}

/// Smallest cutoff with analytic tail mass within `tol`.
fn auto_cutoff(kind: &StateKind, tol: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&tol) || tol <= 0.0 {
        return Err(Error::BadSpec(format!("tail tolerance must be in (0,1), got {tol}")));
    }
    let n = match kind {
        StateKind::Thermal { nbar } => {
            // tail(N) = (nbar/(1+nbar))^N exactly
            if *nbar == 0.0 {
                1
            } else {
                let q = nbar / (1.0 + nbar);
                let mut n = (tol.ln() / q.ln()).ceil().max(1.0) as usize;
                while q.powi(n as i32) > tol && n <= MAX_DIM {
                    n += 1;
                }
                n
            }
        }
        StateKind::Coherent { alpha } => {
            // Poisson(|alpha|^2) tail via the Chernoff bound e^-l (e l / N)^N
            let lambda = alpha.norm_sqr();
            if lambda == 0.0 {
                1
            } else {
                let mut n = lambda.ceil() as usize + 1;
                while poisson_tail_bound(lambda, n) > tol && n <= MAX_DIM {
                    n += 1;
                }
                n
            }
        }
        StateKind::SqueezedVacuum { r } => {
            if *r == 0.0 {
                1
            } else {
                // kept even terms 2k <= N-1; tail <= cosh(r) tanh(r)^(2 k*)
                let mut n = 1;
                while squeezed_tail_bound(*r, n) > tol && n <= MAX_DIM {
                    n += 1;
                }
                n
            }
        }
        StateKind::Fock { n } => n + 1,
        StateKind::MatrixFile { path } => MatrixFile::load(path)?.dim(),
        StateKind::Mixture { components } => {
            let mut n = 1;
            for (_, k) in components {
                n = n.max(auto_cutoff(k, tol)?);
            }
            n
        }
    };
    if n > MAX_DIM {
        let tail = numeric_tail(kind, MAX_DIM)?;
        return Err(Error::CutoffTooSmall { tail, tol, max_dim: MAX_DIM });
    }
    Ok(n)
}

fn poisson_tail_bound(lambda: f64, n: usize) -> f64 {
    let nf = n as f64;
    if nf <= lambda {
        return 1.0;
    }
    ((-lambda) + nf * (1.0 + (lambda / nf).ln())).exp()
}

fn squeezed_tail_bound(r: f64, n: usize) -> f64 {
    let t = r.abs().tanh();
    let first_omitted_k = (n - 1) / 2 + 1;
    r.abs().cosh() * t.powi(2 * first_omitted_k as i32)
}

fn numeric_tail(kind: &StateKind, cutoff: usize) -> Result<f64> {
    let raw = raw_truncation(kind, cutoff)?;
    Ok((1.0 - raw.trace().re).max(0.0))
}

/// The exact state's matrix restricted to the first `cutoff` Fock levels,
/// without renormalization.
fn raw_truncation(kind: &StateKind, cutoff: usize) -> Result<ComplexMatrix> {
    let n = cutoff;
    Ok(match kind {
        StateKind::Thermal { nbar } => {
            let mut diag = vec![0.0; n];
            if *nbar == 0.0 {
                diag[0] = 1.0;
            } else {
                let q = nbar / (1.0 + nbar);
                let mut p = 1.0 / (1.0 + nbar);
                for d in diag.iter_mut() {
                    *d = p;
                    p *= q;
                }
            }
            ComplexMatrix::from_diag(&diag)
        }
        StateKind::Coherent { alpha } => {
            let mut amps = vec![Complex64::new(0.0, 0.0); n];
            amps[0] = Complex64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
            for k in 1..n {
                amps[k] = amps[k - 1] * alpha / (k as f64).sqrt();
            }
            ComplexMatrix::outer(&amps, &amps)
        }
        StateKind::SqueezedVacuum { r } => {
            let mut amps = vec![Complex64::new(0.0, 0.0); n];
            let t = r.tanh();
            amps[0] = Complex64::new(1.0 / r.cosh().sqrt(), 0.0);
            let mut k = 1;
            while 2 * k < n {
                let twok = (2 * k) as f64;
                let ratio = -t * ((twok - 1.0) / twok).sqrt();
                amps[2 * k] = amps[2 * (k - 1)] * ratio;
                k += 1;
            }
            ComplexMatrix::outer(&amps, &amps)
        }
        StateKind::Fock { n: level } => {
            if *level >= n {
                return Err(Error::BadSpec(format!(
                    "fock level {level} does not fit in cutoff {n}"
                )));
            }
            let mut diag = vec![0.0; n];
            diag[*level] = 1.0;
            ComplexMatrix::from_diag(&diag)
        }
        StateKind::MatrixFile { path } => {
            let m = MatrixFile::load(path)?;
            if m.dim() != n {
                return Err(Error::DimMismatch { left: m.dim(), right: n });
            }
            m
        }
        StateKind::Mixture { components } => {
            let mut acc = ComplexMatrix::zeros(n, n);
            for (w, k) in components {
                acc = acc.add(&raw_truncation(k, n)?.scale_re(*w));
            }
            acc
        }
    })
}

// ---------------------------------------------------------------------------
// State descriptor grammar
// ---------------------------------------------------------------------------

/// Parse the CLI state grammar:
/// `thermal:nbar=<f>`, `coherent:re=<f>,im=<f>`, `squeezed:r=<f>`,
/// `fock:n=<int>`, `matrix:<path>`, `mix:w1*<spec>|w2*<spec>`,
/// with optional suffix `@cutoff=<N|auto>,tail=<f>`.
pub fn parse_state_spec(text: &str) -> Result<StateSpec> {
    let (body, suffix) = split_suffix(text);
    let kind = parse_kind(body)?;
    let mut spec = StateSpec::new(kind);
    if let Some(opts) = suffix {
        for part in opts.split(',') {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::BadSpec(format!("bad option `{part}` in `{text}`")))?;
            match key {
                "cutoff" => {
                    spec.cutoff = if value == "auto" {
                        Cutoff::Auto
                    } else {
                        Cutoff::Fixed(value.parse().map_err(|_| {
                            Error::BadSpec(format!("bad cutoff `{value}` in `{text}`"))
                        })?)
                    };
                }
                "tail" => {
                    spec.tail_tol = value
                        .parse()
                        .map_err(|_| Error::BadSpec(format!("bad tail `{value}` in `{text}`")))?;
                }
                _ => return Err(Error::BadSpec(format!("unknown option `{key}` in `{text}`"))),
            }
        }
    }
    Ok(spec)
}

fn split_suffix(text: &str) -> (&str, Option<&str>) {
    match text.rfind('@') {
        Some(pos) if text[pos + 1..].contains('=') => (&text[..pos], Some(&text[pos + 1..])),
        _ => (text, None),
    }
}

fn parse_kind(body: &str) -> Result<StateKind> {
    let (kind, rest) = body
        .split_once(':')
        .ok_or_else(|| Error::BadSpec(format!("missing `:` in state spec `{body}`")))?;
    match kind {
        "thermal" => Ok(StateKind::Thermal { nbar: parse_field(rest, "nbar", body)? }),
        "coherent" => {
            let re = parse_field(rest, "re", body)?;
            let im = parse_field(rest, "im", body)?;
            Ok(StateKind::Coherent { alpha: Complex64::new(re, im) })
        }
        "squeezed" => Ok(StateKind::SqueezedVacuum { r: parse_field(rest, "r", body)? }),
        "fock" => {
            let n = parse_field(rest, "n", body)?;
            if n < 0.0 || n.fract() != 0.0 {
                return Err(Error::BadSpec(format!("fock level must be a nonnegative integer in `{body}`")));
            }
            Ok(StateKind::Fock { n: n as usize })
        }
        "matrix" => Ok(StateKind::MatrixFile { path: PathBuf::from(rest) }),
        "mix" => {
            let mut components = Vec::new();
            for part in rest.split('|') {
                let (w, inner) = part
                    .split_once('*')
                    .ok_or_else(|| Error::BadSpec(format!("mixture component `{part}` needs `w*spec`")))?;
                let weight: f64 = w
                    .parse()
                    .map_err(|_| Error::BadSpec(format!("bad mixture weight `{w}`")))?;
                components.push((weight, parse_kind(inner)?));
            }
            Ok(StateKind::Mixture { components })
        }
        other => Err(Error::BadSpec(format!("unknown state kind `{other}`"))),
    }
}

fn parse_field(params: &str, name: &str, context: &str) -> Result<f64> {
    for part in params.split(',') {
        if let Some((key, value)) = part.split_once('=') {
            if key == name {
                return value
                    .parse()
                    .map_err(|_| Error::BadSpec(format!("bad value `{value}` for `{name}` in `{context}`")));
            }
        }
    }
    Err(Error::BadSpec(format!("missing field `{name}` in `{context}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thermal_zero_temperature_is_vacuum() {
        let rho = build_state(&StateSpec::thermal(0.0)).unwrap();
        assert_eq!(rho.dim(), 1);
        assert!((rho.matrix().get(0, 0).re - 1.0).abs() < 1e-15);
        let rho5 = build_state_at(&StateSpec::thermal(0.0), 5).unwrap();
        assert!((rho5.matrix().get(0, 0).re - 1.0).abs() < 1e-15);
        assert!(rho5.matrix().get(1, 1).norm() < 1e-15);
    }

    #[test]
    fn coherent_vacuum() {
        let rho = build_state(&StateSpec::coherent(Complex64::new(0.0, 0.0))).unwrap();
        assert_eq!(rho.dim(), 1);
        assert!((rho.matrix().get(0, 0).re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn thermal_auto_cutoff_matches_geometric_tail() {
        // tail(N) = (nbar/(1+nbar))^N = 2^-N for nbar=1; smallest N with
        // 2^-N <= 1e-10 is 34.
        let spec = StateSpec::thermal(1.0);
        assert_eq!(resolve_cutoff(&spec).unwrap(), 34);
        let rho = build_state(&spec).unwrap();
        assert_eq!(rho.dim(), 34);
        // diagonal entries before renormalization are (1/2)(1/2)^n
        let deficit = rho.trace_deficit();
        assert!((deficit - 0.5f64.powi(34)).abs() < 1e-15);
        for n in 0..5 {
            let expect = 0.5 * 0.5f64.powi(n as i32) / (1.0 - deficit);
            assert!((rho.matrix().get(n, n).re - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn thermal_diagonal_sum_closed_form() {
        // sum of p(n) below cutoff equals 1 - (nbar/(1+nbar))^N analytically
        for &(nbar, n) in &[(0.7, 12usize), (1.0, 34), (2.5, 20)] {
            let spec = StateSpec { kind: StateKind::Thermal { nbar }, cutoff: Cutoff::Fixed(n), tail_tol: DEFAULT_TAIL_TOL };
            let rho = build_state(&spec).unwrap();
            let q: f64 = nbar / (1.0 + nbar);
            let expect_sum = 1.0 - q.powi(n as i32);
            let raw_sum = 1.0 - rho.trace_deficit();
            assert!((raw_sum - expect_sum).abs() < 1e-12, "nbar={nbar} N={n}");
        }
    }

    #[test]
    fn thermal_mean_photon_number() {
        // tail of sum n p(n) beyond cutoff N is q^N (N + nbar), so the
        // truncation error in the mean is about N * tail mass
        let nbar = 1.3;
        let rho = build_state(&StateSpec::thermal(nbar)).unwrap();
        let n = rho.dim() as f64;
        let budget = 2.0 * DEFAULT_TAIL_TOL * (n + nbar);
        assert!((rho.mean_photon_number() - nbar).abs() < budget);
    }

    #[test]
    fn coherent_purity_near_one() {
        let rho = build_state(&StateSpec::coherent(Complex64::new(1.0, 0.5))).unwrap();
        assert!(rho.purity() >= 1.0 - 2.0 * DEFAULT_TAIL_TOL);
        assert!((rho.mean_photon_number() - 1.25).abs() < 1e-6);
    }

    #[test]
    fn squeezed_vacuum_even_support_and_purity() {
        let rho = build_state(&StateSpec::squeezed(0.8)).unwrap();
        assert!(rho.purity() >= 1.0 - 2.0 * DEFAULT_TAIL_TOL);
        // odd Fock levels carry no weight
        for n in (1..rho.dim()).step_by(2) {
            assert!(rho.matrix().get(n, n).norm() < 1e-15);
        }
        // mean photon number of squeezed vacuum is sinh^2(r)
        let expect = 0.8f64.sinh().powi(2);
        assert!((rho.mean_photon_number() - expect).abs() < 1e-6);
    }

    #[test]
    fn tensor_power_identity_and_oracle() {
        let rho = DensityMatrix::from_probs(&[0.9, 0.1]).unwrap();
        let one = tensor_power(&rho, 1).unwrap();
        assert!(one.matrix().sub(rho.matrix()).frobenius_norm() < 1e-15);
        let two = tensor_power(&rho, 2).unwrap();
        let expect = ComplexMatrix::from_diag(&[0.81, 0.09, 0.09, 0.01]);
        assert!(two.matrix().sub(&expect).frobenius_norm() < 1e-14);
        assert!((two.matrix().trace().re - 1.0).abs() < 1e-9);
    }

    #[test]
    fn tensor_power_pure_state() {
        let v = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let rho = DensityMatrix::pure(&v);
        let three = tensor_power(&rho, 3).unwrap();
        assert_eq!(three.dim(), 8);
        assert!((three.matrix().get(0, 0).re - 1.0).abs() < 1e-12);
        assert!((three.purity() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn tensor_power_purity_multiplicative() {
        let rho = build_state_at(&StateSpec::thermal(0.6), 12).unwrap();
        let p1 = rho.purity();
        let p3 = tensor_power(&rho, 3).unwrap().purity();
        assert!((p3 - p1.powi(3)).abs() < 1e-9 * p3.max(1e-30));
    }

    #[test]
    fn validate_flags_bad_trace_and_negativity() {
        let half = ComplexMatrix::from_diag(&[0.25, 0.25]);
        let report = ValidationReport::for_matrix(&half);
        assert!(!report.passes);
        assert!((report.trace_error - 0.5).abs() < 1e-12);

        let neg = ComplexMatrix::from_diag(&[1.001, -1e-3]);
        let report = ValidationReport::for_matrix(&neg);
        assert!(!report.passes);
        assert!(report.min_eigenvalue < -1e-4);

        let good = build_state(&StateSpec::thermal(0.5)).unwrap();
        assert!(good.validate().passes);
    }

    #[test]
    fn parse_grammar_round_trips() {
        let spec = parse_state_spec("thermal:nbar=1.0").unwrap();
        assert_eq!(spec.kind, StateKind::Thermal { nbar: 1.0 });
        assert_eq!(spec.cutoff, Cutoff::Auto);

        let spec = parse_state_spec("coherent:re=1.5,im=-0.5@cutoff=40,tail=1e-9").unwrap();
        assert_eq!(spec.kind, StateKind::Coherent { alpha: Complex64::new(1.5, -0.5) });
        assert_eq!(spec.cutoff, Cutoff::Fixed(40));
        assert!((spec.tail_tol - 1e-9).abs() < 1e-24);

        let spec = parse_state_spec("mix:0.5*thermal:nbar=1|0.5*fock:n=2").unwrap();
        match &spec.kind {
            StateKind::Mixture { components } => {
                assert_eq!(components.len(), 2);
                assert_eq!(components[1].1, StateKind::Fock { n: 2 });
            }
            other => panic!("unexpected kind {other:?}"),
        }

        let spec = parse_state_spec("squeezed:r=0.3@cutoff=auto").unwrap();
        assert_eq!(spec.cutoff, Cutoff::Auto);

        assert!(parse_state_spec("thermal:nbar=-1").is_err() || build_state(&parse_state_spec("thermal:nbar=-1").unwrap()).is_err());
        assert!(parse_state_spec("unknown:x=1").is_err());
        assert!(parse_state_spec("mix:0.9*thermal:nbar=1|0.2*fock:n=0").map(|s| build_state(&s)).map(|r| r.is_err()).unwrap_or(true));
    }

    #[test]
    fn build_pair_uses_common_cutoff() {
        let (sigma, rho) = build_pair(&StateSpec::thermal(1.0), &StateSpec::thermal(0.5)).unwrap();
        assert_eq!(sigma.dim(), rho.dim());
        assert_eq!(sigma.dim(), 34);
    }

    #[test]
    fn fock_state_padding() {
        let (sigma, rho) = build_pair(
            &StateSpec::coherent(Complex64::new(1.0, 0.0)),
            &StateSpec::fock(0),
        )
        .unwrap();
        assert_eq!(sigma.dim(), rho.dim());
        assert!((rho.matrix().get(0, 0).re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mixture_weights_must_sum_to_one() {
        let bad = StateSpec::new(StateKind::Mixture {
            components: vec![
                (0.6, StateKind::Thermal { nbar: 1.0 }),
                (0.6, StateKind::Fock { n: 0 }),
            ],
        });
        assert!(matches!(build_state(&bad), Err(Error::BadSpec(_))));
    }
}
