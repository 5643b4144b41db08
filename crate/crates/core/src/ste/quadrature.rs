//! Deterministic two-level ensemble averages on the Bloch sphere.
//!
//! For `dim == 2` every state is `(cos(theta/2), e^{i phi} sin(theta/2))` up
//! to a global phase, and the uniform sphere measure becomes
//! `sin(theta) dtheta dphi = du dphi` with `u = cos(theta)`. The ratio of
//! integrals is evaluated with the midpoint rule in `u` and the (periodic,
//! spectrally accurate) trapezoid rule in `phi`, then Richardson-extrapolated
//! over successive grid doublings.

use num_complex::Complex64;
use rayon::prelude::*;

use super::functional::{check_phase_invariance, EnergyFunctional, ObservableFunctional};
use crate::error::{ensure_dim, Error, Result};
use crate::hilbert::StateVector;
use crate::vnte::ThermalParams;

const TOLERANCE: f64 = 1e-9;
const MAX_GRID: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    /// Number of `u` nodes on the finest grid used (`phi` gets twice as many).
    pub n_grid: usize,
    /// Difference between the last two extrapolated values.
    pub change: f64,
    pub converged: bool,
}

/// Bloch-sphere quadrature of the ensemble ratio; fails if the grid cap is
/// reached before the extrapolated value settles.
pub fn ste_quadrature_2d(
    energy: &EnergyFunctional,
    obs: &ObservableFunctional,
    params: ThermalParams,
    n_grid: usize,
) -> Result<f64> {
    let r = ste_quadrature_2d_detailed(energy, obs, params, n_grid)?;
    if r.converged {
        Ok(r.value)
    } else {
        Err(Error::Contract(format!(
            "Bloch quadrature did not settle by n_grid = {} (last change {:e})",
            r.n_grid, r.change
        )))
    }
}

pub fn ste_quadrature_2d_detailed(
    energy: &EnergyFunctional,
    obs: &ObservableFunctional,
    params: ThermalParams,
    n_grid: usize,
) -> Result<QuadratureResult> {
    ensure_dim(2, energy.dim())?;
    ensure_dim(2, obs.dim())?;
    check_phase_invariance(2, |psi| energy.evaluate(psi))?;
    check_phase_invariance(2, |psi| obs.evaluate(psi))?;

    let mut n = n_grid.max(8);
    let mut prev_raw = grid_ratio(energy, obs, params.beta(), n);
    let mut prev_extrapolated: Option<f64> = None;
    loop {
        let next = 2 * n;
        let raw = grid_ratio(energy, obs, params.beta(), next);
        let extrapolated = (4.0 * raw - prev_raw) / 3.0;
        if let Some(prev) = prev_extrapolated {
            let change = (extrapolated - prev).abs();
            let converged = change <= TOLERANCE * extrapolated.abs().max(1.0);
            if converged || next >= MAX_GRID {
                return Ok(QuadratureResult { value: extrapolated, n_grid: next, change, converged });
            }
        }
        prev_extrapolated = Some(extrapolated);
        prev_raw = raw;
        n = next;
    }
}

/// Plain tensor-product ratio on an `n x 2n` grid.
fn grid_ratio(energy: &EnergyFunctional, obs: &ObservableFunctional, beta: f64, n: usize) -> f64 {
    let n_phi = 2 * n;
    let phases: Vec<Complex64> = (0..n_phi)
        .map(|j| Complex64::from_polar(1.0, std::f64::consts::TAU * j as f64 / n_phi as f64))
        .collect();

    // Each row reports (min energy, sum of shifted weights, sum of weighted observable).
    let rows: Vec<(f64, f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let u = -1.0 + (i as f64 + 0.5) * 2.0 / n as f64;
            let a = ((1.0 + u) / 2.0).sqrt();
            let b = ((1.0 - u) / 2.0).sqrt();
            let mut energies = Vec::with_capacity(n_phi);
            let mut values = Vec::with_capacity(n_phi);
            for ph in &phases {
                let psi = StateVector::from_normalized_unchecked(vec![Complex64::new(a, 0.0), ph * b]);
                energies.push(energy.evaluate(&psi));
                values.push(obs.evaluate(&psi));
            }
            let e_min = energies.iter().copied().fold(f64::INFINITY, f64::min);
            let mut sw = 0.0;
            let mut swo = 0.0;
            for (e, o) in energies.iter().zip(&values) {
                let w = if beta == 0.0 { 1.0 } else { (-beta * (e - e_min)).exp() };
                sw += w;
                swo += w * o;
            }
            (e_min, sw, swo)
        })
        .collect();

    let global_min = rows.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let mut sw = 0.0;
    let mut swo = 0.0;
    for (e_min, rw, rwo) in rows {
        let scale = if beta == 0.0 { 1.0 } else { (-beta * (e_min - global_min)).exp() };
        sw += rw * scale;
        swo += rwo * scale;
    }
    swo / sw
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{eigendecompose, HermitianOperator};
    use crate::testutil::random_hermitian;

    fn two_level() -> HermitianOperator {
        HermitianOperator::from_real_rows(&[vec![0.0, -1.0], vec![-1.0, 0.0]]).unwrap()
    }

    #[test]
    fn infinite_temperature_examples() {
        let energy = EnergyFunctional::linear(two_level());
        let p = ThermalParams::infinite_temperature();
        let o = ObservableFunctional::expectation(HermitianOperator::diagonal(&[1.0, 0.0]).unwrap());
        assert!((ste_quadrature_2d(&energy, &o, p, 16).unwrap() - 0.5).abs() < 1e-8);
        let pa = ObservableFunctional::projection(StateVector::basis(2, 0).unwrap());
        assert!((ste_quadrature_2d(&energy, &pa, p, 16).unwrap() - 0.5).abs() < 1e-8);
    }

    #[test]
    fn infinite_temperature_second_moment() {
        // E|a_0|^4 = 1/3 on the 3-sphere.
        let energy = EnergyFunctional::linear(two_level());
        let sq = ObservableFunctional::custom(2, "p0^2", |psi| psi.probability(0).powi(2));
        let v = ste_quadrature_2d(&energy, &sq, ThermalParams::infinite_temperature(), 16).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn linear_two_level_has_closed_form() {
        // With E = -delta * n.r on the Bloch sphere, <sigma_x> = coth(b) - 1/b, b = delta/T.
        let energy = EnergyFunctional::linear(two_level());
        let sx = ObservableFunctional::expectation(HermitianOperator::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap());
        for t in [0.3, 1.0, 4.0] {
            let b: f64 = 1.0 / t;
            let want = 1.0 / b.tanh() - 1.0 / b;
            let got = ste_quadrature_2d(&energy, &sx, ThermalParams::from_temperature(t).unwrap(), 16).unwrap();
            assert!((got - want).abs() < 1e-8, "T={t}: {got} vs {want}");
        }
    }

    #[test]
    fn low_temperature_concentrates_on_ground_energy() {
        let mut rng = crate::rng::substream(41, 0);
        for h in [two_level(), random_hermitian(2, &mut rng)] {
            let es = eigendecompose(&h).unwrap();
            let t = 1e-3 * es.gap();
            let energy = EnergyFunctional::linear(h.clone());
            let obs = ObservableFunctional::expectation(h);
            let v = ste_quadrature_2d(&energy, &obs, ThermalParams::from_temperature(t).unwrap(), 64).unwrap();
            assert!((v - es.ground_energy()).abs() < 2e-2 * es.gap());
        }
    }

    #[test]
    fn phase_dependent_observable_is_rejected() {
        let energy = EnergyFunctional::linear(two_level());
        let bad = ObservableFunctional::custom(2, "re a0", |psi| psi.amplitudes()[0].re);
        let err = ste_quadrature_2d(&energy, &bad, ThermalParams::infinite_temperature(), 16).unwrap_err();
        assert!(matches!(err, Error::PhaseDependent { .. }));
    }

    #[test]
    fn wrong_dimension_is_rejected() {
        let energy = EnergyFunctional::linear(HermitianOperator::identity(3).unwrap());
        let obs = ObservableFunctional::expectation(HermitianOperator::identity(3).unwrap());
        assert!(matches!(
            ste_quadrature_2d(&energy, &obs, ThermalParams::infinite_temperature(), 16),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
