//! Energy and observable functionals of a wavefunction.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{ensure_dim, Error, Result};
use crate::hilbert::{eigendecompose, inner, HermitianOperator, StateVector};
use crate::models::WfeSpec;

/// The energy `H_S(psi)` that sets the Gibbs weight of a state.
#[derive(Debug, Clone, PartialEq)]
pub enum EnergyFunctional {
    /// `<psi|H|psi>`.
    Linear(HermitianOperator),
    /// `<psi|H|psi> + w N^2 Var_psi(X)`.
    Augmented { hamiltonian: HermitianOperator, wfe: WfeSpec },
}

impl EnergyFunctional {
    pub fn linear(hamiltonian: HermitianOperator) -> Self {
        Self::Linear(hamiltonian)
    }

    pub fn augmented(hamiltonian: HermitianOperator, wfe: WfeSpec) -> Result<Self> {
        ensure_dim(hamiltonian.dim(), wfe.dim())?;
        Ok(Self::Augmented { hamiltonian, wfe })
    }

    pub fn hamiltonian(&self) -> &HermitianOperator {
        match self {
            Self::Linear(h) | Self::Augmented { hamiltonian: h, .. } => h,
        }
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian().dim()
    }

    pub fn evaluate(&self, psi: &StateVector) -> f64 {
        debug_assert_eq!(psi.dim(), self.dim());
        self.evaluate_raw(psi.amplitudes())
    }

    pub(crate) fn evaluate_raw(&self, z: &[Complex64]) -> f64 {
        match self {
            Self::Linear(h) => h.quadratic_form(z).re,
            Self::Augmented { hamiltonian, wfe } => {
                hamiltonian.quadratic_form(z).re + wfe.prefactor() * wfe.dispersion_raw(z)
            }
        }
    }

    /// Gradient with respect to the ambient real coordinates
    /// `(x_k, y_k)` of `psi`, packed as `d/dx_k + i d/dy_k`.
    pub fn ambient_gradient(&self, psi: &StateVector) -> Vec<Complex64> {
        let z = psi.amplitudes();
        match self {
            Self::Linear(h) => h.apply(z).into_iter().map(|v| v * 2.0).collect(),
            Self::Augmented { hamiltonian, wfe } => {
                let mut g: Vec<Complex64> = hamiltonian.apply(z).into_iter().map(|v| v * 2.0).collect();
                if wfe.prefactor() != 0.0 {
                    for (gi, wi) in g.iter_mut().zip(wfe.gradient_raw(z)) {
                        *gi += wi;
                    }
                }
                g
            }
        }
    }

    /// Gradient of `psi -> E(psi)` restricted to the unit sphere:
    /// the ambient gradient with its radial component removed.
    pub fn tangential_gradient(&self, psi: &StateVector) -> Vec<Complex64> {
        let g = self.ambient_gradient(psi);
        let radial = inner(psi.amplitudes(), &g).re;
        g.iter().zip(psi.amplitudes()).map(|(gi, zi)| gi - zi * radial).collect()
    }
}

/// A user-supplied observable.
#[derive(Clone)]
pub struct CustomFunctional {
    pub dim: usize,
    pub label: String,
    pub func: Arc<dyn Fn(&StateVector) -> f64 + Send + Sync>,
}

impl fmt::Debug for CustomFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomFunctional").field("dim", &self.dim).field("label", &self.label).finish()
    }
}

/// A real-valued functional `O_S(psi)` averaged over the ensemble.
#[derive(Debug, Clone)]
pub enum ObservableFunctional {
    /// `<psi|O|psi>`.
    HermitianExpectation(HermitianOperator),
    /// `|<phi|psi>|^2`.
    ProjectionWeight(StateVector),
    /// `<X^2> - <X>^2`.
    ComDispersion { com: HermitianOperator, com_sq: HermitianOperator },
    Custom(CustomFunctional),
}

impl ObservableFunctional {
    pub fn expectation(op: HermitianOperator) -> Self {
        Self::HermitianExpectation(op)
    }

    pub fn projection(phi: StateVector) -> Self {
        Self::ProjectionWeight(phi)
    }

    pub fn com_dispersion(com: HermitianOperator) -> Self {
        let com_sq = com.square();
        Self::ComDispersion { com, com_sq }
    }

    pub fn custom<F>(dim: usize, label: impl Into<String>, func: F) -> Self
    where
        F: Fn(&StateVector) -> f64 + Send + Sync + 'static,
    {
        Self::Custom(CustomFunctional { dim, label: label.into(), func: Arc::new(func) })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::HermitianExpectation(o) => o.dim(),
            Self::ProjectionWeight(phi) => phi.dim(),
            Self::ComDispersion { com, .. } => com.dim(),
            Self::Custom(c) => c.dim,
        }
    }

    pub fn evaluate(&self, psi: &StateVector) -> f64 {
        debug_assert_eq!(psi.dim(), self.dim());
        let z = psi.amplitudes();
        match self {
            Self::HermitianExpectation(o) => o.quadratic_form(z).re,
            Self::ProjectionWeight(phi) => inner(phi.amplitudes(), z).norm_sqr(),
            Self::ComDispersion { com, com_sq } => {
                let m = com.quadratic_form(z).re;
                (com_sq.quadratic_form(z).re - m * m).max(0.0)
            }
            Self::Custom(c) => (c.func)(psi),
        }
    }

    /// Interval guaranteed to contain every value, when one is known.
    pub fn natural_range(&self) -> Result<Option<(f64, f64)>> {
        Ok(match self {
            Self::HermitianExpectation(o) => {
                let es = eigendecompose(o)?;
                Some((es.eigenvalues[0], es.eigenvalues[es.dim() - 1]))
            }
            Self::ProjectionWeight(_) => Some((0.0, 1.0)),
            Self::ComDispersion { com, .. } => {
                let es = eigendecompose(com)?;
                let spread = es.eigenvalues[es.dim() - 1] - es.eigenvalues[0];
                Some((0.0, 0.25 * spread * spread))
            }
            Self::Custom(_) => None,
        })
    }
}

/// Checks `f(e^{i theta} psi) == f(psi)` on a fixed set of probe states.
pub(crate) fn check_phase_invariance<F>(dim: usize, f: F) -> Result<()>
where
    F: Fn(&StateVector) -> f64,
{
    let mut rng = crate::rng::substream(0x5EED_F4A5E, 0);
    for _ in 0..8 {
        let psi = super::sample_sphere_uniform(dim, &mut rng)?;
        let base = f(&psi);
        for theta in [0.7, 2.1, -2.9] {
            let rotated = f(&psi.with_global_phase(theta));
            let deviation = (rotated - base).abs();
            if !(deviation <= 1e-10 * base.abs().max(1.0)) {
                return Err(Error::PhaseDependent { deviation });
            }
        }
    }
    Ok(())
}
