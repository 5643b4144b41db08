//! Dense complex linear algebra on small Hilbert spaces.
//!
//! Amplitudes are stored in a fixed orthonormal basis. Operators are dense
//! row-major matrices; every model in this crate lives in at most a few dozen
//! dimensions, so there is no sparse path.

use std::cmp::Ordering;
use std::fmt;

use num_complex::Complex64;

use crate::error::{ensure_dim, Error, Result};

/// Tolerance on `sum |a_n|^2 - 1` for a constructed state.
pub const NORM_TOLERANCE: f64 = 1e-12;
/// Tolerance on `|H_ij - conj(H_ji)|`, scaled by `max(1, max |H_ij|)`.
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;
/// Largest operator the dense eigensolver accepts by default.
pub const DEFAULT_EIGEN_CAP: usize = 4096;

/// A normalized complex amplitude vector `psi = sum_n a_n |n>`.
#[derive(Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
}

impl fmt::Debug for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.amplitudes.iter()).finish()
    }
}

impl StateVector {
    /// Normalizes `amplitudes` into a state. Fails on fewer than two
    /// components or a zero / non-finite norm.
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(Error::InvalidState(format!(
                "dimension must be at least 2, got {}",
                amplitudes.len()
            )));
        }
        let norm = norm_sqr(&amplitudes).sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::InvalidState(format!("cannot normalize vector of norm {norm}")));
        }
        let mut amplitudes = amplitudes;
        let inv = 1.0 / norm;
        for a in &mut amplitudes {
            *a *= inv;
        }
        Ok(Self { amplitudes })
    }

    /// Wraps amplitudes the caller has already normalized.
    pub(crate) fn from_normalized_unchecked(amplitudes: Vec<Complex64>) -> Self {
        debug_assert!((norm_sqr(&amplitudes) - 1.0).abs() < 1e-10);
        Self { amplitudes }
    }

    /// State from real amplitudes (normalized on construction).
    pub fn from_real(amplitudes: &[f64]) -> Result<Self> {
        Self::new(amplitudes.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    /// State from interleaved real coordinates `(x_0, y_0, x_1, y_1, ...)`.
    pub fn from_real_coords(coords: &[f64]) -> Result<Self> {
        if coords.len() % 2 != 0 {
            return Err(Error::InvalidState("odd number of real coordinates".into()));
        }
        Self::new(coords.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect())
    }

    /// Basis vector `|k>` in `dim` dimensions.
    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::InvalidState(format!("basis index {k} out of range for dim {dim}")));
        }
        let mut v = vec![Complex64::new(0.0, 0.0); dim];
        v[k] = Complex64::new(1.0, 0.0);
        Self::new(v)
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    /// Interleaved real coordinates `(x_0, y_0, x_1, y_1, ...)`.
    pub fn real_coords(&self) -> Vec<f64> {
        self.amplitudes.iter().flat_map(|a| [a.re, a.im]).collect()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        ensure_dim(self.dim(), other.dim())?;
        Ok(inner(&self.amplitudes, &other.amplitudes))
    }

    /// `|<self|other>|^2`.
    pub fn overlap(&self, other: &StateVector) -> Result<f64> {
        self.inner(other).map(|z| z.norm_sqr())
    }

    /// `|a_k|^2`.
    pub fn probability(&self, k: usize) -> f64 {
        self.amplitudes[k].norm_sqr()
    }

    /// `e^{i theta} psi`.
    pub fn with_global_phase(&self, theta: f64) -> Self {
        let phase = Complex64::from_polar(1.0, theta);
        Self {
            amplitudes: self.amplitudes.iter().map(|a| a * phase).collect(),
        }
    }
}

/// A dense self-adjoint matrix.
#[derive(Clone, PartialEq)]
pub struct HermitianOperator {
    dim: usize,
    entries: Vec<Complex64>,
}

impl fmt::Debug for HermitianOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[Complex64]> = self.entries.chunks(self.dim).collect();
        f.debug_struct("HermitianOperator").field("dim", &self.dim).field("rows", &rows).finish()
    }
}

impl HermitianOperator {
    /// Builds an operator from row-major entries.
    ///
    /// The input is checked for Hermiticity and then symmetrized exactly,
    /// so round-off in the caller's construction never leaks downstream.
    pub fn new(dim: usize, entries: Vec<Complex64>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidParameter(format!("operator dimension must be at least 2, got {dim}")));
        }
        ensure_dim(dim * dim, entries.len())?;
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidParameter("operator has non-finite entries".into()));
        }
        let scale = entries.iter().map(|z| z.norm()).fold(1.0_f64, f64::max);
        let mut sym = entries.clone();
        for i in 0..dim {
            for j in i..dim {
                let a = entries[i * dim + j];
                let b = entries[j * dim + i].conj();
                let deviation = (a - b).norm();
                if deviation > HERMITIAN_TOLERANCE * scale {
                    return Err(Error::NotHermitian { row: i, col: j, deviation });
                }
                let avg = (a + b) * 0.5;
                sym[i * dim + j] = avg;
                sym[j * dim + i] = avg.conj();
            }
        }
        Ok(Self { dim, entries: sym })
    }

    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidParameter("operator rows must form a square matrix".into()));
        }
        Self::new(dim, rows.into_iter().flatten().collect())
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect())
                .collect(),
        )
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        let dim = diag.len();
        let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
        for (i, &d) in diag.iter().enumerate() {
            entries[i * dim + i] = Complex64::new(d, 0.0);
        }
        Self::new(dim, entries)
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::diagonal(&vec![1.0; dim])
    }

    /// Projector `|phi><phi|`.
    pub fn projector(phi: &StateVector) -> Self {
        let dim = phi.dim();
        let a = phi.amplitudes();
        let mut entries = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                entries.push(a[i] * a[j].conj());
            }
        }
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// Whether every off-diagonal entry is exactly zero.
    pub fn is_diagonal(&self) -> bool {
        (0..self.dim).all(|i| (0..self.dim).all(|j| i == j || self.entry(i, j) == Complex64::new(0.0, 0.0)))
    }

    /// Real diagonal entries.
    pub fn diagonal_entries(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.entry(i, i).re).collect()
    }

    /// Matrix-vector product on raw amplitudes.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(v.len(), self.dim);
        self.entries
            .chunks_exact(self.dim)
            .map(|row| row.iter().zip(v).map(|(h, x)| h * x).sum())
            .collect()
    }

    /// `<v|A|v>` for an arbitrary (not necessarily normalized) vector.
    pub fn quadratic_form(&self, v: &[Complex64]) -> Complex64 {
        let av = self.apply(v);
        inner(v, &av)
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.entry(i, i).re).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `A^2`, which is again Hermitian.
    pub fn square(&self) -> Self {
        let n = self.dim;
        let mut entries = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.entry(i, k);
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    entries[i * n + j] += a * self.entry(k, j);
                }
            }
        }
        // Re-symmetrize to wash out round-off.
        Self::new(n, entries).expect("square of a Hermitian operator is Hermitian")
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|z| z * factor).collect(),
        }
    }

    pub fn add(&self, other: &HermitianOperator) -> Result<Self> {
        ensure_dim(self.dim, other.dim)?;
        Ok(Self {
            dim: self.dim,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect(),
        })
    }
}

/// Eigenvalues in ascending order with matching orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<StateVector>,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn ground_energy(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn ground_state(&self) -> &StateVector {
        &self.eigenvectors[0]
    }

    pub fn gap(&self) -> f64 {
        self.eigenvalues[1] - self.eigenvalues[0]
    }

    /// Largest overlap `max_n |<v_n|psi>|^2` of `psi` with any eigenvector.
    pub fn max_overlap(&self, psi: &StateVector) -> Result<f64> {
        let mut best = 0.0_f64;
        for v in &self.eigenvectors {
            best = best.max(v.overlap(psi)?);
        }
        Ok(best)
    }
}

/// `<psi|O|psi>` for a normalized state.
pub fn expectation(op: &HermitianOperator, psi: &StateVector) -> Result<f64> {
    ensure_dim(op.dim(), psi.dim())?;
    let q = op.quadratic_form(psi.amplitudes());
    debug_assert!(
        q.im.abs() <= 1e-10 * op.frobenius_norm().max(1.0),
        "imaginary residue {} in Hermitian quadratic form",
        q.im
    );
    Ok(q.re)
}

/// Full eigendecomposition with the default dimension cap.
pub fn eigendecompose(h: &HermitianOperator) -> Result<EigenSystem> {
    eigendecompose_with_cap(h, DEFAULT_EIGEN_CAP)
}

/// Full eigendecomposition of a Hermitian operator.
///
/// Eigenvalues come back ascending. Each eigenvector has its first
/// largest-magnitude component made real and positive. Within a degenerate
/// cluster vectors are ordered lexicographically by their components.
pub fn eigendecompose_with_cap(h: &HermitianOperator, cap: usize) -> Result<EigenSystem> {
    let n = h.dim();
    if n > cap {
        return Err(Error::Capacity { dim: n, cap });
    }
    let matrix = nalgebra::DMatrix::<Complex64>::from_row_slice(n, n, h.entries());
    let eig = matrix.symmetric_eigen();

    let mut pairs: Vec<(f64, Vec<Complex64>)> = (0..n)
        .map(|k| {
            let mut v: Vec<Complex64> = eig.eigenvectors.column(k).iter().copied().collect();
            fix_phase(&mut v);
            (eig.eigenvalues[k], v)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let scale = pairs.iter().map(|p| p.0.abs()).fold(1.0_f64, f64::max);
    let tie = 1e-10 * scale;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && pairs[end].0 - pairs[end - 1].0 <= tie {
            end += 1;
        }
        pairs[start..end].sort_by(|a, b| lexicographic(&a.1, &b.1));
        start = end;
    }

    let mut eigenvalues = Vec::with_capacity(n);
    let mut eigenvectors = Vec::with_capacity(n);
    for (lambda, v) in pairs {
        eigenvalues.push(lambda);
        eigenvectors.push(StateVector::new(v)?);
    }
    Ok(EigenSystem { eigenvalues, eigenvectors })
}

fn fix_phase(v: &mut [Complex64]) {
    let max = v.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
    if max == 0.0 {
        return;
    }
    let pivot = v
        .iter()
        .position(|z| z.norm() >= max - 1e-12)
        .expect("a component attains the maximum");
    let phase = v[pivot].conj() / v[pivot].norm();
    for z in v.iter_mut() {
        *z *= phase;
    }
    v[pivot] = Complex64::new(v[pivot].re, 0.0);
}

fn lexicographic(a: &[Complex64], b: &[Complex64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        let ord = x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im));
        if ord != Ordering::Equal {
            return ord;
        }
    }
    Ordering::Equal
}

pub(crate) fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}
