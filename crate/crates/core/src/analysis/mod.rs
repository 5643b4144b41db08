//! Which state wins at low temperature, where the crossover sits, and what
//! an ensemble looks like to a detector.

mod minimize;

use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hilbert::eigendecompose;
use crate::models::{total_energy, CurieWeissModel, EnantiomerModel, PhysicalModel};
use crate::rng::derive_seed;
use crate::ste::{sample_ensemble, EnsembleEstimate, Histogram, ObservableFunctional, SampleSet, SamplerConfig};
use crate::vnte::{vnte_expectation_in, ThermalParams};

pub use minimize::{descend, ground_state_search, multi_start_search, GroundStateResult, MinimizerConfig};

/// Relative tolerance inside which the two candidate energies count as tied.
pub const CLASSIFY_REL_TOL: f64 = 1e-12;

/// A member counts as localized when `P_A` is this close to 0 or 1.
pub const LOCALIZED_WINDOW: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// Localized forms are lower in energy.
    CaseI,
    /// The symmetric superposition is lower in energy.
    CaseII,
    Critical,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::CaseI => "CaseI",
            Self::CaseII => "CaseII",
            Self::Critical => "Critical",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseClassification {
    pub verdict: Verdict,
    /// Total energy at `psi_A`.
    pub energy_localized: f64,
    /// Total energy at `psi_0`.
    pub energy_superposed: f64,
    /// `energy_superposed - energy_localized`.
    pub margin: f64,
}

/// Compares the total energy of `psi_A` against that of `psi_0`.
pub fn classify_case(model: &EnantiomerModel) -> CaseClassification {
    let energy_localized = total_energy(model, &model.psi_a()).expect("dim 2");
    let energy_superposed = total_energy(model, &model.psi_0()).expect("dim 2");
    let margin = energy_superposed - energy_localized;
    let wfe_term = model.w() * (model.n_dof() as f64).powi(2) * model.d() * model.d() / 4.0;
    let scale = energy_localized.abs().max(energy_superposed.abs()).max(model.delta()).max(wfe_term);
    let tol = CLASSIFY_REL_TOL * scale;
    let verdict = if margin > tol {
        Verdict::CaseI
    } else if margin < -tol {
        Verdict::CaseII
    } else {
        Verdict::Critical
    };
    CaseClassification { verdict, energy_localized, energy_superposed, margin }
}

/// `w* = 4 delta / (N^2 d^2)`, where the two candidate energies cross.
///
/// The offset `e` shifts both energies equally and drops out.
pub fn critical_w(e: f64, delta: f64, d: f64, n_dof: u64) -> Result<f64> {
    if !e.is_finite() {
        return Err(Error::InvalidParameter(format!("E must be finite, got {e}")));
    }
    if !(delta > 0.0 && delta.is_finite()) || !(d > 0.0 && d.is_finite()) || n_dof == 0 {
        return Err(Error::InvalidParameter(format!(
            "need delta > 0, d > 0, N >= 1; got delta={delta}, d={d}, N={n_dof}"
        )));
    }
    let n = n_dof as f64;
    Ok(4.0 * delta / (n * n * d * d))
}

/// Smallest bracket `[lo, hi]` with `classify_case(lo) = CaseII` and
/// `classify_case(hi) = CaseI`, found by bisection in `w` until
/// `hi - lo <= rel_tol * hi`.
pub fn bracket_boundary(model: &EnantiomerModel, lo: f64, hi: f64, rel_tol: f64) -> Result<(f64, f64)> {
    let verdict = |w: f64| -> Result<Verdict> { Ok(classify_case(&model.with_w(w)?).verdict) };
    if verdict(lo)? != Verdict::CaseII || verdict(hi)? != Verdict::CaseI {
        return Err(Error::InvalidParameter(format!("[{lo}, {hi}] does not straddle the boundary")));
    }
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match verdict(mid)? {
            Verdict::CaseII => lo = mid,
            Verdict::CaseI => hi = mid,
            Verdict::Critical => return Ok((mid, mid)),
        }
    }
    Ok((lo, hi))
}

/// Ensemble view of a detector statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionStats {
    pub mean: EnsembleEstimate,
    pub histogram: Histogram,
    /// Probability that a member is within [`LOCALIZED_WINDOW`] of a pure form.
    pub localized: EnsembleEstimate,
}

fn detection_samples(model: &EnantiomerModel, params: ThermalParams, cfg: &SamplerConfig) -> Result<SampleSet> {
    let observables = [
        ObservableFunctional::projection(model.psi_a()),
        ObservableFunctional::projection(model.psi_b()),
        ObservableFunctional::expectation(model.handedness()),
    ];
    sample_ensemble(&model.energy_functional(), &observables, params, cfg)
}

fn detection_stats(samples: &SampleSet, k: usize, range: (f64, f64), bins: usize) -> Result<DetectionStats> {
    let histogram = samples.histogram(k, bins, range)?;
    // P_A itself is observable 0 regardless of which statistic is reported.
    let localized = samples.fraction(0, |p| p <= LOCALIZED_WINDOW || p >= 1.0 - LOCALIZED_WINDOW);
    Ok(DetectionStats { mean: samples.estimate(k), histogram, localized })
}

/// Distribution of the conversion statistic `P_A = |<psi_A|psi>|^2`.
pub fn conversion_fraction_stats(
    model: &EnantiomerModel,
    params: ThermalParams,
    cfg: &SamplerConfig,
    bins: usize,
) -> Result<DetectionStats> {
    let samples = detection_samples(model, params, cfg)?;
    detection_stats(&samples, 0, (0.0, 1.0), bins)
}

/// Same as [`conversion_fraction_stats`] with the forms relabeled, i.e. the
/// statistic `P_B`.
pub fn mirrored_conversion_fraction_stats(
    model: &EnantiomerModel,
    params: ThermalParams,
    cfg: &SamplerConfig,
    bins: usize,
) -> Result<DetectionStats> {
    let samples = detection_samples(model, params, cfg)?;
    detection_stats(&samples, 1, (0.0, 1.0), bins)
}

/// Distribution of the signed rotation `R = <psi|diag(1,-1)|psi>`.
pub fn optical_rotation_stats(
    model: &EnantiomerModel,
    params: ThermalParams,
    cfg: &SamplerConfig,
    bins: usize,
) -> Result<DetectionStats> {
    let samples = detection_samples(model, params, cfg)?;
    detection_stats(&samples, 2, (-1.0, 1.0), bins)
}

/// Both detector statistics from a single sampler run.
pub fn detection_pair(
    model: &EnantiomerModel,
    params: ThermalParams,
    cfg: &SamplerConfig,
    bins: usize,
) -> Result<(DetectionStats, DetectionStats)> {
    let samples = detection_samples(model, params, cfg)?;
    Ok((detection_stats(&samples, 0, (0.0, 1.0), bins)?, detection_stats(&samples, 2, (-1.0, 1.0), bins)?))
}

/// One `(w, T)` cell of a boundary scan.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCell {
    pub w: f64,
    pub temperature: f64,
    pub classification: CaseClassification,
    pub p_a: EnsembleEstimate,
    pub localized: EnsembleEstimate,
}

/// Classification and low-temperature `P_A` statistics over `w_grid x t_grid`,
/// `w` outermost. Cell `i` samples with seed `derive_seed(cfg.seed, i)`.
pub fn boundary_scan(
    model: &EnantiomerModel,
    w_grid: &[f64],
    t_grid: &[f64],
    cfg: &SamplerConfig,
) -> Result<Vec<BoundaryCell>> {
    if w_grid.is_empty() || t_grid.is_empty() {
        return Err(Error::InvalidParameter("scan grids must be nonempty".into()));
    }
    cfg.validate()?;
    let mut cells = Vec::with_capacity(w_grid.len() * t_grid.len());
    for &w in w_grid {
        let m = model.with_w(w)?;
        for &t in t_grid {
            cells.push((m.clone(), ThermalParams::from_temperature(t)?, t));
        }
    }
    cells
        .into_par_iter()
        .enumerate()
        .map(|(i, (m, params, t))| {
            let cell_cfg = SamplerConfig { seed: derive_seed(cfg.seed, i as u64), ..cfg.clone() };
            let samples = sample_ensemble(
                &m.energy_functional(),
                &[ObservableFunctional::projection(m.psi_a())],
                params,
                &cell_cfg,
            )?;
            Ok(BoundaryCell {
                w: m.w(),
                temperature: t,
                classification: classify_case(&m),
                p_a: samples.estimate(0),
                localized: samples.fraction(0, |p| p <= LOCALIZED_WINDOW || p >= 1.0 - LOCALIZED_WINDOW),
            })
        })
        .collect()
}

/// One `(T, w)` cell of a magnetization scan.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnetCell {
    pub temperature: f64,
    pub w: f64,
    /// Exact trace average of `(M/N)^2`; independent of `w`.
    pub vnte_m2: f64,
    pub ste_m2: EnsembleEstimate,
}

/// `<(M/N)^2>` over `t_grid x w_grid`, `T` outermost. Cell `i` samples with
/// seed `derive_seed(cfg.seed, i)`.
pub fn magnetization_scan(
    model: &CurieWeissModel,
    t_grid: &[f64],
    w_grid: &[f64],
    cfg: &SamplerConfig,
) -> Result<Vec<MagnetCell>> {
    if w_grid.is_empty() || t_grid.is_empty() {
        return Err(Error::InvalidParameter("scan grids must be nonempty".into()));
    }
    cfg.validate()?;
    let es = eigendecompose(model.hamiltonian())?;
    let mut cells = Vec::with_capacity(w_grid.len() * t_grid.len());
    for &t in t_grid {
        let params = ThermalParams::from_temperature(t)?;
        let vnte_m2 = vnte_expectation_in(&es, model.order_parameter(), params)?;
        for &w in w_grid {
            cells.push((model.with_w(w)?, params, t, vnte_m2));
        }
    }
    cells
        .into_par_iter()
        .enumerate()
        .map(|(i, (m, params, t, vnte_m2))| {
            let cell_cfg = SamplerConfig { seed: derive_seed(cfg.seed, i as u64), ..cfg.clone() };
            let samples = sample_ensemble(
                &m.energy_functional(),
                &[ObservableFunctional::expectation(m.order_parameter().clone())],
                params,
                &cell_cfg,
            )?;
            Ok(MagnetCell { temperature: t, w: m.w(), vnte_m2, ste_m2: samples.estimate(0) })
        })
        .collect()
}
