//! Constrained minimization of an energy functional over normalized states.
//!
//! Plain projected gradient descent: step against the tangential gradient,
//! renormalize, and backtrack until the step is accepted. Many random starts
//! run in parallel and the lowest local minimum wins.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hilbert::StateVector;
use crate::rng::substream;
use crate::ste::{check_phase_invariance, sample_sphere_uniform, EnergyFunctional};

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizerConfig {
    pub n_starts: usize,
    pub max_iter: usize,
    /// Converged once the tangential gradient norm drops below this.
    pub grad_tol: f64,
    pub seed: u64,
}

impl Default for MinimizerConfig {
    fn default() -> Self {
        Self { n_starts: 32, max_iter: 100_000, grad_tol: 1e-9, seed: 0 }
    }
}

impl MinimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_starts == 0 {
            return Err(Error::InvalidParameter("n_starts must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be positive".into()));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::InvalidParameter(format!("grad_tol must be positive, got {}", self.grad_tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundStateResult {
    pub minimizer: StateVector,
    pub energy: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Which multi-start produced this result.
    pub start: usize,
}

/// Lowest local minimum over `cfg.n_starts` random starts. Ties go to the
/// earliest start.
pub fn ground_state_search(energy: &EnergyFunctional, dim: usize, cfg: &MinimizerConfig) -> Result<GroundStateResult> {
    let runs = multi_start_search(energy, dim, cfg)?;
    let mut best = &runs[0];
    for r in &runs[1..] {
        if r.energy < best.energy {
            best = r;
        }
    }
    Ok(best.clone())
}

/// Every local minimum reached, ordered by start index.
pub fn multi_start_search(energy: &EnergyFunctional, dim: usize, cfg: &MinimizerConfig) -> Result<Vec<GroundStateResult>> {
    cfg.validate()?;
    crate::error::ensure_dim(energy.dim(), dim)?;
    check_phase_invariance(dim, |psi| energy.evaluate(psi))?;
    (0..cfg.n_starts)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(cfg.seed, k as u64);
            let start = sample_sphere_uniform(dim, &mut rng)?;
            Ok(descend(energy, start, k, cfg))
        })
        .collect()
}

/// Projected gradient descent from one start.
///
/// The trial step is the Barzilai-Borwein estimate from the previous move,
/// then halved until the Armijo condition holds.
pub fn descend(energy: &EnergyFunctional, start: StateVector, index: usize, cfg: &MinimizerConfig) -> GroundStateResult {
    const ARMIJO: f64 = 1e-4;
    let mut psi = start;
    let mut f = energy.evaluate(&psi);
    let mut g = energy.tangential_gradient(&psi);
    let mut gn = norm(&g);
    let mut trial: f64 = 0.1;
    let mut iterations = 0;

    let done = |psi: StateVector, f: f64, gn: f64, iterations: usize, converged: bool| GroundStateResult {
        minimizer: psi,
        energy: f,
        converged,
        iterations,
        gradient_norm: gn,
        start: index,
    };

    while iterations < cfg.max_iter {
        if gn < cfg.grad_tol {
            return done(psi, f, gn, iterations, true);
        }
        iterations += 1;
        // Below this energy differences are round-off and only the gradient
        // norm can certify progress.
        let noise = 8.0 * f64::EPSILON * f.abs().max(1.0);
        let mut alpha = trial;
        loop {
            let candidate = retract(&psi, &g, alpha);
            let fc = energy.evaluate(&candidate);
            let sufficient = fc <= f - ARMIJO * alpha * gn * gn;
            let (accept, gc) = if sufficient {
                (true, None)
            } else if (fc - f).abs() <= noise {
                let gc = energy.tangential_gradient(&candidate);
                (norm(&gc) < gn, Some(gc))
            } else {
                (false, None)
            };
            if accept {
                let gc = gc.unwrap_or_else(|| energy.tangential_gradient(&candidate));
                let (mut ss, mut sy) = (0.0, 0.0);
                for ((a, b), (ga, gb)) in candidate.amplitudes().iter().zip(psi.amplitudes()).zip(gc.iter().zip(&g)) {
                    let ds = a - b;
                    let dy = ga - gb;
                    ss += ds.norm_sqr();
                    sy += (ds.conj() * dy).re;
                }
                trial = if sy > 0.0 { (ss / sy).clamp(1e-10, 1e10) } else { (2.0 * alpha).min(1e10) };
                g = gc;
                gn = norm(&g);
                psi = candidate;
                f = fc;
                break;
            }
            alpha *= 0.5;
            if alpha < 1e-30 {
                return done(psi, f, gn, iterations, false);
            }
        }
    }
    let converged = gn < cfg.grad_tol;
    done(psi, f, gn, iterations, converged)
}

fn retract(psi: &StateVector, g: &[Complex64], alpha: f64) -> StateVector {
    let z: Vec<Complex64> = psi.amplitudes().iter().zip(g).map(|(a, b)| a - b * alpha).collect();
    StateVector::new(z).unwrap_or_else(|_| psi.clone())
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
