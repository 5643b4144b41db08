//! Thermal averages over the sphere of normalized wavefunctions.
//!
//! Members of this ensemble are arbitrary normalized amplitude vectors
//! `psi`, drawn from the uniform (rotation-invariant) measure on the real
//! `(2 dim - 1)`-sphere and weighted by `exp(-beta E(psi))`. Only ratios of
//! integrals are ever needed, so the partition function is never formed.
//!
//! Two estimators are provided: self-normalized importance sampling with
//! uniform proposals, and random-walk Metropolis with several independent
//! chains. For `dim == 2` [`ste_quadrature_2d`] evaluates the same ratio
//! deterministically on the Bloch sphere.

mod diagnostics;
mod functional;
mod quadrature;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use num_complex::Complex64;

use crate::error::{ensure_dim, Error, Result};
use crate::hilbert::StateVector;
use crate::rng::substream;
use crate::vnte::ThermalParams;

pub use diagnostics::{autocovariance, effective_sample_size, split_rhat};
pub use functional::{CustomFunctional, EnergyFunctional, ObservableFunctional};
pub(crate) use functional::check_phase_invariance;
pub use quadrature::{ste_quadrature_2d, ste_quadrature_2d_detailed, QuadratureResult};

pub const MIN_RETAINED_PER_CHAIN: usize = 100;
pub const DEFAULT_RHAT_THRESHOLD: f64 = 1.05;

const TUNE_WINDOW: usize = 50;
const TUNE_LOW: f64 = 0.30;
const TUNE_HIGH: f64 = 0.50;
const STEP_MIN: f64 = 1e-8;
const STEP_MAX: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMethod {
    /// Uniform proposals on the sphere, reweighted by the Gibbs factor.
    UniformImportance,
    /// Random walk `psi' = normalize(psi + step * g)` with Metropolis acceptance.
    Metropolis,
}

impl SamplingMethod {
    pub fn name(&self) -> &'static str {
        match self {
            Self::UniformImportance => "importance",
            Self::Metropolis => "metropolis",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub method: SamplingMethod,
    /// Retained draws per chain (after burn-in).
    pub n_samples: usize,
    /// Independent chains (independent proposal streams for importance sampling).
    pub n_chains: usize,
    /// Metropolis steps discarded per chain; the step size is tuned during them.
    pub burn_in: usize,
    pub step_size: f64,
    pub seed: u64,
    pub rhat_threshold: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            method: SamplingMethod::Metropolis,
            n_samples: 20_000,
            n_chains: 4,
            burn_in: 2_000,
            step_size: 0.3,
            seed: 0,
            rhat_threshold: DEFAULT_RHAT_THRESHOLD,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples < MIN_RETAINED_PER_CHAIN {
            return Err(Error::InvalidParameter(format!(
                "n_samples must be at least {MIN_RETAINED_PER_CHAIN} per chain, got {}",
                self.n_samples
            )));
        }
        if self.n_chains == 0 {
            return Err(Error::InvalidParameter("n_chains must be positive".into()));
        }
        if !self.step_size.is_finite() || self.step_size <= 0.0 {
            return Err(Error::InvalidParameter(format!("step_size must be positive, got {}", self.step_size)));
        }
        if !(self.rhat_threshold > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "rhat_threshold must exceed 1, got {}",
                self.rhat_threshold
            )));
        }
        Ok(())
    }
}

/// Monte Carlo mean of one functional.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_effective: f64,
    /// Split R-hat across chains; `None` for importance sampling, whose
    /// draws are independent by construction.
    pub r_hat: Option<f64>,
    /// Post-burn-in Metropolis acceptance; `None` for importance sampling.
    pub acceptance_rate: Option<f64>,
    pub n_samples: usize,
    /// Set when `r_hat` exceeds the configured threshold (or is undefined).
    pub flagged: bool,
}

/// Normalized histogram of a functional over the weighted ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `bins + 1` ascending edges.
    pub edges: Vec<f64>,
    pub masses: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub flagged: bool,
}

impl Histogram {
    pub fn bins(&self) -> usize {
        self.masses.len()
    }

    pub fn bin_of(&self, x: f64) -> usize {
        bin_index(x, self.edges[0], self.edges[self.edges.len() - 1], self.bins())
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &m) in self.masses.iter().enumerate() {
            if m > self.masses[best] {
                best = i;
            }
        }
        best
    }

    /// Total mass of bins lying entirely inside `[lo, hi]`.
    pub fn mass_within(&self, lo: f64, hi: f64) -> f64 {
        (0..self.bins())
            .filter(|&i| self.edges[i] >= lo - 1e-12 && self.edges[i + 1] <= hi + 1e-12)
            .map(|i| self.masses[i])
            .sum()
    }
}

fn bin_index(x: f64, lo: f64, hi: f64, bins: usize) -> usize {
    let t = ((x - lo) / (hi - lo) * bins as f64).floor();
    if t.is_nan() || t < 0.0 {
        0
    } else {
        (t as usize).min(bins - 1)
    }
}

/// Uniform draw from the unit sphere of `C^dim`: normalized vector of
/// `2 dim` independent standard Gaussians.
pub fn sample_sphere_uniform<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<StateVector> {
    loop {
        let z: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        match StateVector::new(z) {
            Ok(psi) => return Ok(psi),
            Err(Error::InvalidState(msg)) if dim < 2 => return Err(Error::InvalidState(msg)),
            // All-zero Gaussian draw: probability zero, redraw.
            Err(_) => continue,
        }
    }
}

/// Per-chain record of observable values.
#[derive(Debug, Clone)]
struct ChainTrace {
    /// `values[k][i]`: observable `k` at draw `i`.
    values: Vec<Vec<f64>>,
    /// Importance sampling only: `-beta E(psi_i)`.
    log_weights: Option<Vec<f64>>,
    accepted: u64,
    proposed: u64,
    step_size: f64,
}

/// Raw draws of one sampler run, reducible into estimates and histograms.
#[derive(Debug, Clone)]
pub struct SampleSet {
    method: SamplingMethod,
    chains: Vec<ChainTrace>,
    rhat_threshold: f64,
}

/// Runs the configured sampler once and records every observable at every
/// retained draw. Chains execute in parallel; results are ordered by chain
/// index so the outcome does not depend on scheduling.
pub fn sample_ensemble(
    energy: &EnergyFunctional,
    observables: &[ObservableFunctional],
    params: ThermalParams,
    cfg: &SamplerConfig,
) -> Result<SampleSet> {
    cfg.validate()?;
    let dim = energy.dim();
    for obs in observables {
        ensure_dim(dim, obs.dim())?;
    }
    let chains = (0..cfg.n_chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(cfg.seed, c as u64);
            match cfg.method {
                SamplingMethod::UniformImportance => run_importance(energy, observables, params, cfg, &mut rng),
                SamplingMethod::Metropolis => run_metropolis(energy, observables, params, cfg, &mut rng),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SampleSet { method: cfg.method, chains, rhat_threshold: cfg.rhat_threshold })
}

fn run_importance<R: Rng>(
    energy: &EnergyFunctional,
    observables: &[ObservableFunctional],
    params: ThermalParams,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<ChainTrace> {
    let dim = energy.dim();
    let beta = params.beta();
    let mut values = vec![Vec::with_capacity(cfg.n_samples); observables.len()];
    let mut log_weights = Vec::with_capacity(cfg.n_samples);
    for _ in 0..cfg.n_samples {
        let psi = sample_sphere_uniform(dim, rng)?;
        log_weights.push(if beta == 0.0 { 0.0 } else { -beta * energy.evaluate(&psi) });
        for (trace, obs) in values.iter_mut().zip(observables) {
            trace.push(obs.evaluate(&psi));
        }
    }
    Ok(ChainTrace {
        values,
        log_weights: Some(log_weights),
        accepted: 0,
        proposed: 0,
        step_size: 0.0,
    })
}

fn propose<R: Rng>(psi: &StateVector, step: f64, rng: &mut R) -> StateVector {
    loop {
        let z: Vec<Complex64> = psi
            .amplitudes()
            .iter()
            .map(|a| a + Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)) * step)
            .collect();
        if let Ok(next) = StateVector::new(z) {
            return next;
        }
    }
}

fn run_metropolis<R: Rng>(
    energy: &EnergyFunctional,
    observables: &[ObservableFunctional],
    params: ThermalParams,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<ChainTrace> {
    let dim = energy.dim();
    let beta = params.beta();
    let mut psi = sample_sphere_uniform(dim, rng)?;
    let mut e = energy.evaluate(&psi);
    let mut step = cfg.step_size;

    let step_once = |psi: &mut StateVector, e: &mut f64, step: f64, rng: &mut R| -> bool {
        let candidate = propose(psi, step, rng);
        let e_new = energy.evaluate(&candidate);
        let delta = beta * (e_new - *e);
        let u: f64 = rng.random();
        if delta <= 0.0 || u < (-delta).exp() {
            *psi = candidate;
            *e = e_new;
            true
        } else {
            false
        }
    };

    let mut window_accepts = 0usize;
    for i in 0..cfg.burn_in {
        if step_once(&mut psi, &mut e, step, rng) {
            window_accepts += 1;
        }
        if (i + 1) % TUNE_WINDOW == 0 {
            let rate = window_accepts as f64 / TUNE_WINDOW as f64;
            if rate < TUNE_LOW {
                step = (step * 0.7).max(STEP_MIN);
            } else if rate > TUNE_HIGH {
                step = (step * 1.3).min(STEP_MAX);
            }
            window_accepts = 0;
        }
    }

    let mut values = vec![Vec::with_capacity(cfg.n_samples); observables.len()];
    let mut accepted = 0u64;
    for _ in 0..cfg.n_samples {
        if step_once(&mut psi, &mut e, step, rng) {
            accepted += 1;
        }
        for (trace, obs) in values.iter_mut().zip(observables) {
            trace.push(obs.evaluate(&psi));
        }
    }
    Ok(ChainTrace {
        values,
        log_weights: None,
        accepted,
        proposed: cfg.n_samples as u64,
        step_size: step,
    })
}

impl SampleSet {
    pub fn method(&self) -> SamplingMethod {
        self.method
    }

    pub fn n_chains(&self) -> usize {
        self.chains.len()
    }

    pub fn n_samples(&self) -> usize {
        self.chains.iter().map(|c| c.log_weights.as_ref().map_or(c.values.first().map_or(0, Vec::len), Vec::len)).sum()
    }

    /// Step sizes reached by burn-in tuning, one per chain.
    pub fn tuned_step_sizes(&self) -> Vec<f64> {
        self.chains.iter().map(|c| c.step_size).collect()
    }

    pub fn acceptance_rate(&self) -> Option<f64> {
        match self.method {
            SamplingMethod::UniformImportance => None,
            SamplingMethod::Metropolis => {
                let acc: u64 = self.chains.iter().map(|c| c.accepted).sum();
                let tot: u64 = self.chains.iter().map(|c| c.proposed).sum();
                Some(acc as f64 / tot as f64)
            }
        }
    }

    /// Normalized weight of every pooled draw, in chain order.
    pub fn weights(&self) -> Vec<f64> {
        match self.method {
            SamplingMethod::Metropolis => {
                let n = self.n_samples();
                vec![1.0 / n as f64; n]
            }
            SamplingMethod::UniformImportance => {
                let max = self
                    .chains
                    .iter()
                    .flat_map(|c| c.log_weights.as_deref().unwrap_or(&[]).iter().copied())
                    .fold(f64::NEG_INFINITY, f64::max);
                let raw: Vec<f64> = self
                    .chains
                    .iter()
                    .flat_map(|c| c.log_weights.as_deref().unwrap_or(&[]).iter().map(move |lw| (lw - max).exp()))
                    .collect();
                let total: f64 = raw.iter().sum();
                raw.into_iter().map(|w| w / total).collect()
            }
        }
    }

    /// Pooled values of observable `k`, in chain order.
    pub fn values(&self, k: usize) -> Vec<f64> {
        self.chains.iter().flat_map(|c| c.values[k].iter().copied()).collect()
    }

    /// Largest value of observable `k` over every draw.
    pub fn max_value(&self, k: usize) -> f64 {
        self.chains.iter().flat_map(|c| c.values[k].iter().copied()).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Ensemble mean of observable `k`.
    pub fn estimate(&self, k: usize) -> EnsembleEstimate {
        let traces: Vec<&[f64]> = self.chains.iter().map(|c| c.values[k].as_slice()).collect();
        self.estimate_traces(&traces)
    }

    /// Ensemble probability that observable `k` satisfies `pred`.
    pub fn fraction<P: Fn(f64) -> bool>(&self, k: usize, pred: P) -> EnsembleEstimate {
        let indicators: Vec<Vec<f64>> = self
            .chains
            .iter()
            .map(|c| c.values[k].iter().map(|&v| if pred(v) { 1.0 } else { 0.0 }).collect())
            .collect();
        let traces: Vec<&[f64]> = indicators.iter().map(|c| c.as_slice()).collect();
        self.estimate_traces(&traces)
    }

    fn estimate_traces(&self, traces: &[&[f64]]) -> EnsembleEstimate {
        match self.method {
            SamplingMethod::UniformImportance => {
                let weights = self.weights();
                let mut mean = 0.0;
                for (w, v) in weights.iter().zip(traces.iter().flat_map(|t| t.iter())) {
                    mean += w * v;
                }
                let mut var = 0.0;
                let mut w2 = 0.0;
                for (w, v) in weights.iter().zip(traces.iter().flat_map(|t| t.iter())) {
                    var += w * w * (v - mean) * (v - mean);
                    w2 += w * w;
                }
                EnsembleEstimate {
                    mean,
                    std_error: var.sqrt(),
                    n_effective: 1.0 / w2,
                    r_hat: None,
                    acceptance_rate: None,
                    n_samples: weights.len(),
                    flagged: false,
                }
            }
            SamplingMethod::Metropolis => {
                let n: usize = traces.iter().map(|t| t.len()).sum();
                let mean = traces.iter().map(|t| t.iter().sum::<f64>()).sum::<f64>() / n as f64;
                let var = traces
                    .iter()
                    .map(|t| t.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>())
                    .sum::<f64>()
                    / (n as f64 - 1.0);
                let ess = effective_sample_size(traces);
                let r_hat = split_rhat(traces);
                let std_error = if var <= 0.0 { 0.0 } else { (var / ess).sqrt() };
                EnsembleEstimate {
                    mean,
                    std_error,
                    n_effective: ess,
                    r_hat: Some(r_hat),
                    acceptance_rate: self.acceptance_rate(),
                    n_samples: n,
                    flagged: !(r_hat <= self.rhat_threshold),
                }
            }
        }
    }

    /// Histogram of observable `k` on `[lo, hi]`; values outside are
    /// clamped into the end bins.
    pub fn histogram(&self, k: usize, bins: usize, range: (f64, f64)) -> Result<Histogram> {
        if bins < 2 {
            return Err(Error::InvalidParameter(format!("need at least 2 bins, got {bins}")));
        }
        let (lo, hi) = range;
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::InvalidParameter(format!("invalid histogram range [{lo}, {hi}]")));
        }
        let edges: Vec<f64> = (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect();
        let mut estimates = Vec::with_capacity(bins);
        for b in 0..bins {
            estimates.push(self.fraction(k, |v| bin_index(v, lo, hi, bins) == b));
        }
        let total: f64 = estimates.iter().map(|e| e.mean).sum();
        let masses = estimates.iter().map(|e| e.mean / total).collect();
        let std_errors = estimates.iter().map(|e| e.std_error).collect();
        let flagged = self.estimate(k).flagged;
        Ok(Histogram { edges, masses, std_errors, flagged })
    }

    /// Range of observable `k`: its natural range when known, else the
    /// sample extremes. Degenerate ranges are widened by 1/2 on each side.
    pub fn histogram_range(&self, k: usize, natural: Option<(f64, f64)>) -> (f64, f64) {
        let (lo, hi) = natural.unwrap_or_else(|| {
            let vals = self.values(k);
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        });
        if hi - lo <= 1e-12 * lo.abs().max(hi.abs()).max(1.0) {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo, hi)
        }
    }
}

/// Ensemble mean of `obs` under weight `exp(-E(psi)/T)` on the sphere.
pub fn ste_expectation(
    energy: &EnergyFunctional,
    obs: &ObservableFunctional,
    params: ThermalParams,
    cfg: &SamplerConfig,
) -> Result<EnsembleEstimate> {
    let samples = sample_ensemble(energy, std::slice::from_ref(obs), params, cfg)?;
    Ok(samples.estimate(0))
}

/// Distribution of `obs` over ensemble members.
pub fn ensemble_histogram(
    energy: &EnergyFunctional,
    obs: &ObservableFunctional,
    params: ThermalParams,
    cfg: &SamplerConfig,
    bins: usize,
) -> Result<Histogram> {
    if bins < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 bins, got {bins}")));
    }
    let samples = sample_ensemble(energy, std::slice::from_ref(obs), params, cfg)?;
    let range = samples.histogram_range(0, obs.natural_range()?);
    samples.histogram(0, bins, range)
}
