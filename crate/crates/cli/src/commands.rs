//! Per-command key tables, validation and execution.
//!
//! Every command is split into a plan (all parsing and model construction)
//! and a run, so bad input is rejected before any compute starts.

use std::collections::BTreeMap;

use ibound_core::analysis::{
    boundary_scan, classify_case, critical_w, detection_pair, ground_state_search, magnetization_scan, DetectionStats,
    MinimizerConfig,
};
use ibound_core::models::{build_curie_weiss, build_enantiomer, CurieWeissModel, EnantiomerModel, PhysicalModel, WfeSpec};
use ibound_core::rng::derive_seed;
use ibound_core::ste::{
    sample_ensemble, EnergyFunctional, EnsembleEstimate, ObservableFunctional, SamplerConfig, SamplingMethod,
};
use ibound_core::vnte::{gibbs_weights, vnte_expectation_in};
use ibound_core::{eigendecompose, HermitianOperator, StateVector, ThermalParams};

use crate::config::Entry;
use crate::output::Table;
use crate::parse::{self, fmt_real};
use crate::{CliError, Command};

#[derive(Debug, Clone, Copy)]
enum Need {
    Required,
    Default(&'static str),
    Optional,
}

use Need::{Default, Optional, Required};

const SAMPLER_KEYS: &[(&str, Need)] = &[
    ("method", Default("metropolis")),
    ("samples", Default("20000")),
    ("chains", Default("4")),
    ("burn_in", Default("2000")),
    ("step_size", Default("0.3")),
    ("rhat_threshold", Default("1.05")),
];

const ENANTIOMER_KEYS: &[(&str, Need)] = &[("e", Default("0")), ("delta", Required), ("d", Required), ("n_dof", Required)];

fn command_keys(cmd: Command) -> Vec<(&'static str, Need)> {
    let mut keys: Vec<(&'static str, Need)> = match cmd {
        Command::Vnte => vec![("h", Required), ("o", Required), ("t", Required)],
        Command::Ste => vec![
            ("h", Required),
            ("o", Required),
            ("t", Required),
            ("w", Default("0")),
            ("n_dof", Default("1")),
            ("com", Optional),
        ],
        Command::Classify => [ENANTIOMER_KEYS, &[("w", Required)]].concat(),
        Command::Ground => vec![
            ("model", Default("enantiomer")),
            ("e", Optional),
            ("delta", Optional),
            ("d", Optional),
            ("n_dof", Optional),
            ("n_spins", Optional),
            ("j", Optional),
            ("w", Required),
            ("starts", Default("32")),
            ("max_iter", Default("100000")),
            ("grad_tol", Default("1e-9")),
        ],
        Command::ScanBoundary => [ENANTIOMER_KEYS, &[("w", Required), ("t", Required)]].concat(),
        Command::Detect => [ENANTIOMER_KEYS, &[("w", Required), ("t", Required), ("bins", Default("20"))]].concat(),
        Command::Magnet => vec![("n_spins", Required), ("j", Default("1")), ("t", Required), ("w", Required)],
    };
    if matches!(cmd, Command::Ste | Command::ScanBoundary | Command::Detect | Command::Magnet) {
        keys.extend_from_slice(SAMPLER_KEYS);
    }
    keys
}

/// Validated key/value view for one command, defaults filled in.
#[derive(Debug, Clone)]
pub struct Params {
    values: BTreeMap<String, String>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Keys no command reads from the table (handled by the driver).
const DRIVER_KEYS: [&str; 2] = ["seed", "out"];

fn known_to_any(key: &str) -> bool {
    DRIVER_KEYS.contains(&key) || Command::ALL.iter().any(|&c| command_keys(c).iter().any(|(name, _)| *name == key))
}

impl Params {
    /// Unknown scoped keys and overrides are errors; unknown global keys
    /// are dropped if some other command uses them.
    pub fn new(cmd: Command, resolved: BTreeMap<String, Entry>) -> Result<Self, CliError> {
        let keys = command_keys(cmd);
        let mut values = BTreeMap::new();
        for (k, entry) in resolved {
            let used = keys.iter().any(|(name, _)| *name == k) || DRIVER_KEYS.contains(&k.as_str());
            if used {
                values.insert(k, entry.value);
            } else if entry.strict || !known_to_any(&k) {
                return Err(config_err(format!("unknown key {k:?} for command {}", cmd.name())));
            }
        }
        for (name, need) in keys {
            match need {
                Required if !values.contains_key(name) => {
                    return Err(config_err(format!("missing required key {name:?} for command {}", cmd.name())));
                }
                Default(v) => {
                    values.entry(name.to_string()).or_insert_with(|| v.to_string());
                }
                _ => {}
            }
        }
        Ok(Self { values })
    }

    pub fn resolved(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    fn raw(&self, key: &str) -> Result<&str, CliError> {
        self.values.get(key).map(String::as_str).ok_or_else(|| config_err(format!("missing key {key:?}")))
    }

    fn wrap<T>(key: &str, r: Result<T, String>) -> Result<T, CliError> {
        r.map_err(|e| config_err(format!("{key}: {e}")))
    }

    fn real(&self, key: &str) -> Result<f64, CliError> {
        let v = Self::wrap(key, parse::real(self.raw(key)?))?;
        if v.is_nan() {
            return Err(config_err(format!("{key}: NaN is not allowed")));
        }
        Ok(v)
    }

    fn grid(&self, key: &str) -> Result<Vec<f64>, CliError> {
        let g = Self::wrap(key, parse::grid(self.raw(key)?))?;
        if g.iter().any(|x| x.is_nan()) {
            return Err(config_err(format!("{key}: NaN is not allowed")));
        }
        Ok(g)
    }

    fn count<T: std::str::FromStr>(&self, key: &str) -> Result<T, CliError> {
        let s = self.raw(key)?.trim();
        s.parse().map_err(|_| config_err(format!("{key}: expected a nonnegative integer, got {s:?}")))
    }

    fn matrix(&self, key: &str) -> Result<HermitianOperator, CliError> {
        Self::wrap(key, parse::matrix(self.raw(key)?))
    }

    fn temperatures(&self) -> Result<Vec<(f64, ThermalParams)>, CliError> {
        self.grid("t")?
            .into_iter()
            .map(|t| Ok((t, ThermalParams::from_temperature(t).map_err(|e| config_err(format!("t: {e}")))?)))
            .collect()
    }

    fn sampler(&self, seed: u64) -> Result<SamplerConfig, CliError> {
        let method = match self.raw("method")?.trim() {
            "metropolis" => SamplingMethod::Metropolis,
            "importance" => SamplingMethod::UniformImportance,
            other => return Err(config_err(format!("method: expected metropolis or importance, got {other:?}"))),
        };
        let cfg = SamplerConfig {
            method,
            n_samples: self.count("samples")?,
            n_chains: self.count("chains")?,
            burn_in: self.count("burn_in")?,
            step_size: self.real("step_size")?,
            seed,
            rhat_threshold: self.real("rhat_threshold")?,
        };
        cfg.validate().map_err(|e| config_err(e.to_string()))?;
        Ok(cfg)
    }

    fn enantiomer(&self, w: f64) -> Result<EnantiomerModel, CliError> {
        build_enantiomer(self.real("e")?, self.real("delta")?, self.real("d")?, w, self.count("n_dof")?)
            .map_err(|e| config_err(e.to_string()))
    }

    fn enantiomers(&self) -> Result<Vec<EnantiomerModel>, CliError> {
        self.grid("w")?.into_iter().map(|w| self.enantiomer(w)).collect()
    }
}

fn core_err(e: ibound_core::Error) -> CliError {
    CliError::Contract(e.to_string())
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_real).unwrap_or_default()
}

fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

/// A fully validated command, ready to run.
pub enum Job {
    Vnte { h: HermitianOperator, o: HermitianOperator, temps: Vec<(f64, ThermalParams)> },
    Ste { energy: EnergyFunctional, obs: ObservableFunctional, temps: Vec<(f64, ThermalParams)>, sampler: SamplerConfig },
    Classify { models: Vec<EnantiomerModel> },
    Ground { ws: Vec<f64>, energies: Vec<EnergyFunctional>, minimizer: MinimizerConfig },
    ScanBoundary { model: EnantiomerModel, ws: Vec<f64>, ts: Vec<f64>, sampler: SamplerConfig },
    Detect { model: EnantiomerModel, temps: Vec<(f64, ThermalParams)>, bins: usize, sampler: SamplerConfig },
    Magnet { model: CurieWeissModel, ts: Vec<f64>, ws: Vec<f64>, sampler: SamplerConfig },
}

pub fn plan(cmd: Command, p: &Params, seed: u64) -> Result<Job, CliError> {
    match cmd {
        Command::Vnte => {
            let h = p.matrix("h")?;
            let o = p.matrix("o")?;
            if h.dim() != o.dim() {
                return Err(config_err(format!("h is {0}x{0} but o is {1}x{1}", h.dim(), o.dim())));
            }
            Ok(Job::Vnte { h, o, temps: p.temperatures()? })
        }
        Command::Ste => {
            let h = p.matrix("h")?;
            let o = p.matrix("o")?;
            if h.dim() != o.dim() {
                return Err(config_err(format!("h is {0}x{0} but o is {1}x{1}", h.dim(), o.dim())));
            }
            let w = p.real("w")?;
            let energy = if p.has("com") {
                let com = p.matrix("com")?;
                let wfe = WfeSpec::new(w, p.count("n_dof")?, com).map_err(|e| config_err(e.to_string()))?;
                EnergyFunctional::augmented(h, wfe).map_err(|e| config_err(e.to_string()))?
            } else if w != 0.0 {
                return Err(config_err("w > 0 needs a centre-of-mass operator in key \"com\""));
            } else {
                EnergyFunctional::linear(h)
            };
            Ok(Job::Ste { energy, obs: ObservableFunctional::expectation(o), temps: p.temperatures()?, sampler: p.sampler(seed)? })
        }
        Command::Classify => Ok(Job::Classify { models: p.enantiomers()? }),
        Command::Ground => {
            let ws = p.grid("w")?;
            let model = p.raw("model")?.trim().to_string();
            let (required, forbidden): (&[&str], &[&str]) = match model.as_str() {
                "enantiomer" => (&["delta", "d", "n_dof"], &["n_spins", "j"]),
                "curie-weiss" => (&["n_spins"], &["e", "delta", "d", "n_dof"]),
                other => return Err(config_err(format!("model: expected enantiomer or curie-weiss, got {other:?}"))),
            };
            for k in required {
                if !p.has(k) {
                    return Err(config_err(format!("model {model} needs key {k:?}")));
                }
            }
            for k in forbidden {
                if p.has(k) {
                    return Err(config_err(format!("key {k:?} does not apply to model {model}")));
                }
            }
            let mut energies = Vec::with_capacity(ws.len());
            for &w in &ws {
                let energy = if model == "enantiomer" {
                    let e = if p.has("e") { p.real("e")? } else { 0.0 };
                    build_enantiomer(e, p.real("delta")?, p.real("d")?, w, p.count("n_dof")?)
                        .map_err(|e| config_err(e.to_string()))?
                        .energy_functional()
                } else {
                    let j = if p.has("j") { p.real("j")? } else { 1.0 };
                    build_curie_weiss(p.count("n_spins")?, j, w).map_err(|e| config_err(e.to_string()))?.energy_functional()
                };
                energies.push(energy);
            }
            let minimizer = MinimizerConfig {
                n_starts: p.count("starts")?,
                max_iter: p.count("max_iter")?,
                grad_tol: p.real("grad_tol")?,
                seed,
            };
            minimizer.validate().map_err(|e| config_err(e.to_string()))?;
            Ok(Job::Ground { ws, energies, minimizer })
        }
        Command::ScanBoundary => {
            let models = p.enantiomers()?;
            let temps = p.temperatures()?;
            Ok(Job::ScanBoundary {
                model: models[0].clone(),
                ws: models.iter().map(|m| m.w()).collect(),
                ts: temps.iter().map(|(t, _)| *t).collect(),
                sampler: p.sampler(seed)?,
            })
        }
        Command::Detect => {
            let model = p.enantiomer(p.real("w")?)?;
            let bins: usize = p.count("bins")?;
            if bins < 2 {
                return Err(config_err("bins: need at least 2"));
            }
            Ok(Job::Detect { model, temps: p.temperatures()?, bins, sampler: p.sampler(seed)? })
        }
        Command::Magnet => {
            let ws = p.grid("w")?;
            let model = build_curie_weiss(p.count("n_spins")?, p.real("j")?, 0.0).map_err(|e| config_err(e.to_string()))?;
            for &w in &ws {
                model.with_w(w).map_err(|e| config_err(e.to_string()))?;
            }
            let temps = p.temperatures()?;
            Ok(Job::Magnet { model, ts: temps.iter().map(|(t, _)| *t).collect(), ws, sampler: p.sampler(seed)? })
        }
    }
}

fn estimate_cells(e: &EnsembleEstimate) -> [String; 2] {
    [opt(e.r_hat), flag(e.flagged)]
}

/// Largest-magnitude amplitude made real and positive, so the printed
/// vector does not depend on the arbitrary global phase.
fn canonical_amplitudes(psi: &StateVector) -> String {
    let amps = psi.amplitudes();
    let max = amps.iter().map(|a| a.norm()).fold(0.0, f64::max);
    let pivot = amps.iter().position(|a| a.norm() >= max * (1.0 - 1e-12)).unwrap_or(0);
    let phase = amps[pivot].conj() / amps[pivot].norm();
    amps.iter()
        .enumerate()
        .map(|(k, a)| {
            let z = if k == pivot { ibound_core::Complex64::new(a.norm(), 0.0) } else { a * phase };
            let sign = if z.im.is_sign_negative() { "-" } else { "+" };
            format!("{}{}{}i", fmt_real(z.re), sign, fmt_real(z.im.abs()))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

impl Job {
    pub fn run(&self) -> Result<Table, CliError> {
        match self {
            Job::Vnte { h, o, temps } => {
                let es = eigendecompose(h).map_err(core_err)?;
                let mut table = Table::new(&["t", "beta", "value", "ln_z"]);
                for &(t, params) in temps {
                    let value = vnte_expectation_in(&es, o, params).map_err(core_err)?;
                    let (_, z) = gibbs_weights(&es.eigenvalues, params);
                    table.push(vec![fmt_real(t), fmt_real(params.beta()), fmt_real(value), fmt_real(z.ln())]);
                }
                Ok(table)
            }
            Job::Ste { energy, obs, temps, sampler } => {
                let mut table = Table::new(&[
                    "t",
                    "method",
                    "mean",
                    "std_error",
                    "n_effective",
                    "r_hat",
                    "acceptance_rate",
                    "flagged",
                ]);
                for (i, &(t, params)) in temps.iter().enumerate() {
                    let cfg = SamplerConfig { seed: derive_seed(sampler.seed, i as u64), ..sampler.clone() };
                    let est = sample_ensemble(energy, std::slice::from_ref(obs), params, &cfg).map_err(core_err)?.estimate(0);
                    table.flagged |= est.flagged;
                    table.push(vec![
                        fmt_real(t),
                        sampler.method.name().to_string(),
                        fmt_real(est.mean),
                        fmt_real(est.std_error),
                        fmt_real(est.n_effective),
                        opt(est.r_hat),
                        opt(est.acceptance_rate),
                        flag(est.flagged),
                    ]);
                }
                Ok(table)
            }
            Job::Classify { models } => {
                let mut table = Table::new(&[
                    "w",
                    "critical_w",
                    "energy_localized",
                    "energy_superposed",
                    "margin",
                    "verdict",
                ]);
                for m in models {
                    let c = classify_case(m);
                    let ws = critical_w(m.e(), m.delta(), m.d(), m.n_dof()).map_err(core_err)?;
                    table.push(vec![
                        fmt_real(m.w()),
                        fmt_real(ws),
                        fmt_real(c.energy_localized),
                        fmt_real(c.energy_superposed),
                        fmt_real(c.margin),
                        c.verdict.to_string(),
                    ]);
                }
                Ok(table)
            }
            Job::Ground { ws, energies, minimizer } => {
                let mut table = Table::new(&["w", "energy", "converged", "iterations", "gradient_norm", "amplitudes"]);
                for (i, (w, energy)) in ws.iter().zip(energies).enumerate() {
                    let cfg = MinimizerConfig { seed: derive_seed(minimizer.seed, i as u64), ..minimizer.clone() };
                    let r = ground_state_search(energy, energy.dim(), &cfg).map_err(core_err)?;
                    table.flagged |= !r.converged;
                    table.push(vec![
                        fmt_real(*w),
                        fmt_real(r.energy),
                        flag(r.converged),
                        r.iterations.to_string(),
                        fmt_real(r.gradient_norm),
                        canonical_amplitudes(&r.minimizer),
                    ]);
                }
                Ok(table)
            }
            Job::ScanBoundary { model, ws, ts, sampler } => {
                let cells = boundary_scan(model, ws, ts, sampler).map_err(core_err)?;
                let mut table = Table::new(&[
                    "w",
                    "t",
                    "verdict",
                    "margin",
                    "p_a_mean",
                    "p_a_std_error",
                    "bimodality",
                    "bimodality_std_error",
                    "r_hat",
                    "flagged",
                ]);
                for c in cells {
                    let flagged = c.p_a.flagged || c.localized.flagged;
                    table.flagged |= flagged;
                    table.push(vec![
                        fmt_real(c.w),
                        fmt_real(c.temperature),
                        c.classification.verdict.to_string(),
                        fmt_real(c.classification.margin),
                        fmt_real(c.p_a.mean),
                        fmt_real(c.p_a.std_error),
                        fmt_real(c.localized.mean),
                        fmt_real(c.localized.std_error),
                        opt(c.p_a.r_hat),
                        flag(flagged),
                    ]);
                }
                Ok(table)
            }
            Job::Detect { model, temps, bins, sampler } => {
                let mut table = Table::new(&[
                    "t",
                    "statistic",
                    "bin",
                    "bin_lo",
                    "bin_hi",
                    "mass",
                    "mass_std_error",
                    "mean",
                    "mean_std_error",
                    "localized",
                    "r_hat",
                    "flagged",
                ]);
                for (i, &(t, params)) in temps.iter().enumerate() {
                    let cfg = SamplerConfig { seed: derive_seed(sampler.seed, i as u64), ..sampler.clone() };
                    let (conversion, rotation) = detection_pair(model, params, &cfg, *bins).map_err(core_err)?;
                    for (name, stats) in [("conversion", &conversion), ("rotation", &rotation)] {
                        push_detection(&mut table, t, name, stats);
                    }
                }
                Ok(table)
            }
            Job::Magnet { model, ts, ws, sampler } => {
                let cells = magnetization_scan(model, ts, ws, sampler).map_err(core_err)?;
                let mut table = Table::new(&[
                    "t",
                    "w",
                    "vnte_m2",
                    "ste_m2",
                    "ste_std_error",
                    "n_effective",
                    "r_hat",
                    "acceptance_rate",
                    "flagged",
                ]);
                for c in cells {
                    table.flagged |= c.ste_m2.flagged;
                    table.push(vec![
                        fmt_real(c.temperature),
                        fmt_real(c.w),
                        fmt_real(c.vnte_m2),
                        fmt_real(c.ste_m2.mean),
                        fmt_real(c.ste_m2.std_error),
                        fmt_real(c.ste_m2.n_effective),
                        opt(c.ste_m2.r_hat),
                        opt(c.ste_m2.acceptance_rate),
                        flag(c.ste_m2.flagged),
                    ]);
                }
                Ok(table)
            }
        }
    }
}

fn push_detection(table: &mut Table, t: f64, name: &str, stats: &DetectionStats) {
    let [r_hat, flagged] = estimate_cells(&stats.mean);
    table.flagged |= stats.mean.flagged;
    let h = &stats.histogram;
    for b in 0..h.bins() {
        table.push(vec![
            fmt_real(t),
            name.to_string(),
            b.to_string(),
            fmt_real(h.edges[b]),
            fmt_real(h.edges[b + 1]),
            fmt_real(h.masses[b]),
            fmt_real(h.std_errors[b]),
            fmt_real(stats.mean.mean),
            fmt_real(stats.mean.std_error),
            fmt_real(stats.localized.mean),
            r_hat.clone(),
            flagged.clone(),
        ]);
    }
}
