//! Concrete systems and the wavefunction-energy (WFE) term.
//!
//! `WFE(psi) = w * N^2 * Var_psi(X)` where `X` is a collective
//! centre-of-mass coordinate and `N` a degrees-of-freedom count that only
//! enters through the product `w * N^2`. The variance vanishes exactly on
//! eigenvectors of `X`, so the term penalizes states spread over distinct
//! positions and leaves localized ones alone.

use num_complex::Complex64;

use crate::error::{ensure_dim, Error, Result};
use crate::hilbert::{eigendecompose, expectation, HermitianOperator, StateVector};
use crate::ste::EnergyFunctional;

/// Parameters of the wavefunction-energy term.
#[derive(Debug, Clone, PartialEq)]
pub struct WfeSpec {
    w: f64,
    n_dof: u64,
    com: HermitianOperator,
    com_sq: HermitianOperator,
}

impl WfeSpec {
    pub fn new(w: f64, n_dof: u64, com: HermitianOperator) -> Result<Self> {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::InvalidParameter(format!("w must be finite and nonnegative, got {w}")));
        }
        if n_dof == 0 {
            return Err(Error::InvalidParameter("N (degrees of freedom) must be at least 1".into()));
        }
        let com_sq = com.square();
        Ok(Self { w, n_dof, com, com_sq })
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn n_dof(&self) -> u64 {
        self.n_dof
    }

    pub fn com(&self) -> &HermitianOperator {
        &self.com
    }

    pub fn dim(&self) -> usize {
        self.com.dim()
    }

    /// `w * N^2`, the only combination the energy depends on.
    pub fn prefactor(&self) -> f64 {
        let n = self.n_dof as f64;
        self.w * n * n
    }

    pub fn with_w(&self, w: f64) -> Result<Self> {
        Self::new(w, self.n_dof, self.com.clone())
    }

    /// `<X^2> - <X>^2`, clamped at zero against round-off.
    pub fn dispersion(&self, psi: &StateVector) -> Result<f64> {
        ensure_dim(self.dim(), psi.dim())?;
        Ok(self.dispersion_raw(psi.amplitudes()))
    }

    pub(crate) fn dispersion_raw(&self, z: &[Complex64]) -> f64 {
        let mean = self.com.quadratic_form(z).re;
        let sq = self.com_sq.quadratic_form(z).re;
        (sq - mean * mean).max(0.0)
    }

    /// Gradient of `w N^2 (<z|X^2|z> - <z|X|z>^2)` in the real coordinates of
    /// `z`, packed as complex numbers (`d/dx_k` in `re`, `d/dy_k` in `im`).
    pub(crate) fn gradient_raw(&self, z: &[Complex64]) -> Vec<Complex64> {
        let xz = self.com.apply(z);
        let mean = crate::hilbert::inner(z, &xz).re;
        let x2z = self.com_sq.apply(z);
        let c = 2.0 * self.prefactor();
        x2z.iter().zip(&xz).map(|(a, b)| (a - b * (2.0 * mean)) * c).collect()
    }
}

/// `w * N^2 * D(psi)`.
pub fn wfe_energy(spec: &WfeSpec, psi: &StateVector) -> Result<f64> {
    Ok(spec.prefactor() * spec.dispersion(psi)?)
}

/// Anything with a Hamiltonian and a WFE term.
pub trait PhysicalModel {
    fn hamiltonian(&self) -> &HermitianOperator;
    fn wfe(&self) -> &WfeSpec;

    fn dim(&self) -> usize {
        self.hamiltonian().dim()
    }

    /// `<psi|H|psi> + WFE(psi)` as a functional the samplers understand.
    fn energy_functional(&self) -> EnergyFunctional {
        EnergyFunctional::augmented(self.hamiltonian().clone(), self.wfe().clone())
            .expect("model operators share one dimension")
    }
}

/// `<psi|H|psi> + WFE(psi)`.
pub fn total_energy<M: PhysicalModel + ?Sized>(model: &M, psi: &StateVector) -> Result<f64> {
    Ok(expectation(model.hamiltonian(), psi)? + wfe_energy(model.wfe(), psi)?)
}

/// Two localized forms A and B coupled by tunneling.
///
/// Basis `(|A>, |B>)`; `H = [[E, -delta], [-delta, E]]` and the
/// centre-of-mass operator is `diag(+d/2, -d/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnantiomerModel {
    e: f64,
    delta: f64,
    d: f64,
    hamiltonian: HermitianOperator,
    wfe: WfeSpec,
}

pub fn build_enantiomer(e: f64, delta: f64, d: f64, w: f64, n_dof: u64) -> Result<EnantiomerModel> {
    if !e.is_finite() {
        return Err(Error::InvalidParameter(format!("E must be finite, got {e}")));
    }
    if !delta.is_finite() || delta <= 0.0 {
        return Err(Error::InvalidParameter(format!("tunneling amplitude must be positive, got {delta}")));
    }
    if !d.is_finite() || d <= 0.0 {
        return Err(Error::InvalidParameter(format!("COM separation must be positive, got {d}")));
    }
    let hamiltonian = HermitianOperator::from_real_rows(&[vec![e, -delta], vec![-delta, e]])?;
    let com = HermitianOperator::diagonal(&[0.5 * d, -0.5 * d])?;
    let wfe = WfeSpec::new(w, n_dof, com)?;
    let model = EnantiomerModel { e, delta, d, hamiltonian, wfe };
    model.check_structure()?;
    Ok(model)
}

impl EnantiomerModel {
    pub fn e(&self) -> f64 {
        self.e
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn w(&self) -> f64 {
        self.wfe.w()
    }

    pub fn n_dof(&self) -> u64 {
        self.wfe.n_dof()
    }

    pub fn with_w(&self, w: f64) -> Result<Self> {
        build_enantiomer(self.e, self.delta, self.d, w, self.wfe.n_dof())
    }

    pub fn psi_a(&self) -> StateVector {
        StateVector::basis(2, 0).expect("dim 2")
    }

    pub fn psi_b(&self) -> StateVector {
        StateVector::basis(2, 1).expect("dim 2")
    }

    /// `(psi_A + psi_B)/sqrt 2`, the tunneling ground state.
    pub fn psi_0(&self) -> StateVector {
        StateVector::from_real(&[1.0, 1.0]).expect("nonzero")
    }

    /// `(psi_A - psi_B)/sqrt 2`.
    pub fn psi_1(&self) -> StateVector {
        StateVector::from_real(&[1.0, -1.0]).expect("nonzero")
    }

    /// Signed handedness `diag(+1, -1)`: +1 on pure A, -1 on pure B.
    pub fn handedness(&self) -> HermitianOperator {
        HermitianOperator::diagonal(&[1.0, -1.0]).expect("dim 2")
    }

    fn check_structure(&self) -> Result<()> {
        let es = eigendecompose(&self.hamiltonian)?;
        let scale = self.e.abs().max(self.delta);
        let tol = 1e-12 * scale.max(1.0);
        let expected = [self.e - self.delta, self.e + self.delta];
        let states = [self.psi_0(), self.psi_1()];
        for ((lambda, v), (want, state)) in es.eigenvalues.iter().zip(&es.eigenvectors).zip(expected.iter().zip(&states)) {
            if (lambda - want).abs() > tol || (v.overlap(state)? - 1.0).abs() > 1e-12 {
                return Err(Error::Contract(format!(
                    "enantiomer spectrum {lambda} does not match symmetric/antisymmetric pair at {want}"
                )));
            }
        }
        let gap = expectation(&self.hamiltonian, &self.psi_a())? - expectation(&self.hamiltonian, &self.psi_0())?;
        if (gap - self.delta).abs() > tol {
            return Err(Error::Contract(format!("localized-form energy excess {gap} differs from delta {}", self.delta)));
        }
        Ok(())
    }
}

impl PhysicalModel for EnantiomerModel {
    fn hamiltonian(&self) -> &HermitianOperator {
        &self.hamiltonian
    }

    fn wfe(&self) -> &WfeSpec {
        &self.wfe
    }
}

/// Mean-field ferromagnet restricted to the permutation-symmetric sector.
///
/// Basis states are labelled by total magnetization `M = N, N-2, ..., -N`;
/// `H = -(J / 2N) M^2` and the WFE coordinate is `m = M/N`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurieWeissModel {
    n_spins: usize,
    j: f64,
    hamiltonian: HermitianOperator,
    magnetization: HermitianOperator,
    m_sq: HermitianOperator,
    wfe: WfeSpec,
}

pub fn build_curie_weiss(n_spins: usize, j: f64, w: f64) -> Result<CurieWeissModel> {
    if n_spins < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 spins, got {n_spins}")));
    }
    if !j.is_finite() || j <= 0.0 {
        return Err(Error::InvalidParameter(format!("coupling J must be positive, got {j}")));
    }
    let n = n_spins as f64;
    let m_values: Vec<f64> = (0..=n_spins).map(|k| n - 2.0 * k as f64).collect();
    let magnetization = HermitianOperator::diagonal(&m_values)?;
    let h_diag: Vec<f64> = m_values.iter().map(|m| -(j / (2.0 * n)) * m * m).collect();
    let hamiltonian = HermitianOperator::diagonal(&h_diag)?;
    let m_norm: Vec<f64> = m_values.iter().map(|m| m / n).collect();
    let com = HermitianOperator::diagonal(&m_norm)?;
    let m_sq = com.square();
    let wfe = WfeSpec::new(w, n_spins as u64, com)?;
    Ok(CurieWeissModel { n_spins, j, hamiltonian, magnetization, m_sq, wfe })
}

impl CurieWeissModel {
    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn j(&self) -> f64 {
        self.j
    }

    pub fn w(&self) -> f64 {
        self.wfe.w()
    }

    pub fn with_w(&self, w: f64) -> Result<Self> {
        build_curie_weiss(self.n_spins, self.j, w)
    }

    /// Total magnetization `M`.
    pub fn magnetization(&self) -> &HermitianOperator {
        &self.magnetization
    }

    /// `(M/N)^2`, the order parameter.
    pub fn order_parameter(&self) -> &HermitianOperator {
        &self.m_sq
    }
}

impl PhysicalModel for CurieWeissModel {
    fn hamiltonian(&self) -> &HermitianOperator {
        &self.hamiltonian
    }

    fn wfe(&self) -> &WfeSpec {
        &self.wfe
    }
}
