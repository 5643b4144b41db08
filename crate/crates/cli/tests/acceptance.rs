//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Every seed below is fixed.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use ibound_core::analysis::{
    bracket_boundary, classify_case, conversion_fraction_stats, critical_w, ground_state_search, magnetization_scan,
    MinimizerConfig, Verdict,
};
use ibound_core::models::{build_curie_weiss, build_enantiomer, total_energy, PhysicalModel, WfeSpec};
use ibound_core::rng::{derive_seed, substream};
use ibound_core::ste::{
    sample_ensemble, ste_expectation, ste_quadrature_2d, EnergyFunctional, ObservableFunctional, SamplerConfig,
    SamplingMethod,
};
use ibound_core::{eigendecompose, vnte_expectation, Complex64, HermitianOperator, StateVector, ThermalParams};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_hermitian<R: Rng>(dim: usize, rng: &mut R) -> HermitianOperator {
    let mut e = vec![Complex64::new(0.0, 0.0); dim * dim];
    for i in 0..dim {
        e[i * dim + i] = Complex64::new(rng.sample(StandardNormal), 0.0);
        for j in i + 1..dim {
            let z = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
            e[i * dim + j] = z;
            e[j * dim + i] = z.conj();
        }
    }
    HermitianOperator::new(dim, e).unwrap()
}

fn random_state<R: Rng>(dim: usize, rng: &mut R) -> StateVector {
    StateVector::new((0..dim).map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect())
        .unwrap()
}

fn sampler(method: SamplingMethod, seed: u64) -> SamplerConfig {
    SamplerConfig { method, seed, ..SamplerConfig::default() }
}

fn two_level(delta: f64) -> HermitianOperator {
    HermitianOperator::from_real_rows(&[vec![0.0, -delta], vec![-delta, 0.0]]).unwrap()
}

fn c1_vnte_exactness() -> Outcome {
    let sx = HermitianOperator::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
    let mut worst: f64 = 0.0;
    for delta in [0.5, 1.0, 2.0] {
        for t in [0.1, 1.0, 10.0] {
            let v = vnte_expectation(&two_level(delta), &sx, ThermalParams::from_temperature(t).unwrap()).unwrap();
            worst = worst.max((v - (delta / t).tanh()).abs());
        }
    }
    check(worst <= 1e-12, format!("max |<sx> - tanh(delta/T)| = {worst:e} (tol 1e-12)"))
}

fn c2_infinite_temperature() -> Outcome {
    let mut rng = substream(2002, 0);
    let mut worst_z: f64 = 0.0;
    let mut worst_pair: f64 = 0.0;
    let mut misses = Vec::new();
    for dim in [2, 4, 8] {
        let h = random_hermitian(dim, &mut rng);
        let ops: Vec<HermitianOperator> = (0..20).map(|_| random_hermitian(dim, &mut rng)).collect();
        let obs: Vec<ObservableFunctional> = ops.iter().cloned().map(ObservableFunctional::expectation).collect();
        let energy = EnergyFunctional::linear(h);
        let runs: Vec<_> = [SamplingMethod::UniformImportance, SamplingMethod::Metropolis]
            .iter()
            .map(|&m| {
                sample_ensemble(&energy, &obs, ThermalParams::infinite_temperature(), &sampler(m, derive_seed(2002, dim as u64)))
                    .unwrap()
            })
            .collect();
        for (k, op) in ops.iter().enumerate() {
            let exact = op.trace() / dim as f64;
            let a = runs[0].estimate(k);
            let b = runs[1].estimate(k);
            for (name, e) in [("importance", &a), ("metropolis", &b)] {
                let z = (e.mean - exact).abs() / e.std_error;
                worst_z = worst_z.max(z);
                if z > 3.0 {
                    misses.push(format!("dim {dim} O#{k} {name} z={z:.2}"));
                }
            }
            let z = (a.mean - b.mean).abs() / (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
            worst_pair = worst_pair.max(z);
            if z > 3.0 {
                misses.push(format!("dim {dim} O#{k} methods z={z:.2}"));
            }
        }
    }
    check(
        misses.is_empty(),
        format!("120 estimates vs tr(O)/dim, max z = {worst_z:.2}; 60 method pairs, max z = {worst_pair:.2} (tol 3); {misses:?}"),
    )
}

fn c3_quadrature_oracle() -> Outcome {
    let mut rng = substream(3003, 0);
    let mut worst: f64 = 0.0;
    let mut misses = Vec::new();
    for i in 0..10 {
        let h = random_hermitian(2, &mut rng);
        let o = random_hermitian(2, &mut rng);
        let t = 10f64.powf(rng.random_range(-0.7..0.7));
        let params = ThermalParams::from_temperature(t).unwrap();
        let energy = EnergyFunctional::linear(h);
        let obs = ObservableFunctional::expectation(o);
        let exact = ste_quadrature_2d(&energy, &obs, params, 32).unwrap();
        let est = ste_expectation(&energy, &obs, params, &sampler(SamplingMethod::Metropolis, derive_seed(3003, i))).unwrap();
        let z = (est.mean - exact).abs() / est.std_error;
        worst = worst.max(z);
        if z > 3.0 {
            misses.push(format!("case {i} T={t:.3} z={z:.2}"));
        }
    }
    check(misses.is_empty(), format!("10 cases, max |MC - quadrature|/SE = {worst:.2} (tol 3) {misses:?}"))
}

fn c4_eigenstate_dichotomy() -> Outcome {
    let model = build_enantiomer(0.0, 1.0, 1.0, 0.0, 10).unwrap();
    let p_a = HermitianOperator::projector(&model.psi_a());
    let mut worst: f64 = 0.0;
    for k in -3..=3 {
        let t = 10f64.powi(k);
        let v = vnte_expectation(model.hamiltonian(), &p_a, ThermalParams::from_temperature(t).unwrap()).unwrap();
        worst = worst.max((v - 0.5).abs());
    }
    let es = eigendecompose(model.hamiltonian()).unwrap();
    let probe = ObservableFunctional::custom(2, "max-eigen-overlap", move |psi| es.max_overlap(psi).unwrap());
    let mut max_overlap: f64 = 0.0;
    let mut draws = 0;
    for (i, t) in [0.01, 1.0, 100.0].into_iter().enumerate() {
        for m in [SamplingMethod::UniformImportance, SamplingMethod::Metropolis] {
            let s = sample_ensemble(
                &model.energy_functional(),
                std::slice::from_ref(&probe),
                ThermalParams::from_temperature(t).unwrap(),
                &sampler(m, derive_seed(4004, i as u64)),
            )
            .unwrap();
            max_overlap = max_overlap.max(s.max_value(0));
            draws += s.n_samples();
        }
    }
    check(
        worst <= 1e-12 && max_overlap < 1.0 - 1e-9,
        format!(
            "vNTE |P_A - 1/2| max {worst:e} over T in 1e-3..1e3 (tol 1e-12); max eigen-overlap over {draws} STE draws = {max_overlap:.12} (must be < 1 - 1e-9)"
        ),
    )
}

fn c5_boundary() -> Outcome {
    let model = build_enantiomer(0.0, 1.0, 1.0, 0.0, 10).unwrap();
    let verdict = |w: f64| classify_case(&model.with_w(w).unwrap()).verdict;
    let ws = critical_w(0.0, 1.0, 1.0, 10).unwrap();
    let mut ok = verdict(0.039) == Verdict::CaseII && verdict(0.041) == Verdict::CaseI && verdict(ws) == Verdict::Critical;
    ok &= verdict(ws * (1.0 - 1e-6)) == Verdict::CaseII && verdict(ws * (1.0 + 1e-6)) == Verdict::CaseI;
    let (lo, hi) = bracket_boundary(&model, 0.039, 0.041, 1e-12).unwrap();
    ok &= (lo - 0.04).abs() <= 4e-8 && (hi - 0.04).abs() <= 4e-8;
    // Dense scan through the crossover: II ... Critical ... I, in that order.
    let scan: Vec<(f64, Verdict)> = (0..=4000).map(|i| 0.04 - 2e-7 + 1e-10 * i as f64).map(|w| (w, verdict(w))).collect();
    let critical: Vec<f64> = scan.iter().filter(|(_, v)| *v == Verdict::Critical).map(|(w, _)| *w).collect();
    let rank = |v: Verdict| match v {
        Verdict::CaseII => 0,
        Verdict::Critical => 1,
        Verdict::CaseI => 2,
    };
    ok &= scan.windows(2).all(|p| rank(p[0].1) <= rank(p[1].1));
    ok &= critical.iter().all(|w| (w - 0.04).abs() <= 4e-8);
    let spread = critical.iter().map(|w| (w - 0.04).abs()).fold(0.0, f64::max);
    check(
        ok,
        format!(
            "w*={ws}; 0.039 -> {}, 0.041 -> {}; bisection bracket [{lo}, {hi}]; {} Critical scan points, max |w - 0.04| = {spread:e} (tol 4e-8)",
            verdict(0.039),
            verdict(0.041),
            critical.len()
        ),
    )
}

fn c6_cooling() -> Outcome {
    let ws = critical_w(0.0, 1.0, 1.0, 10).unwrap();
    let params = ThermalParams::from_temperature(0.01).unwrap();
    let case_i = build_enantiomer(0.0, 1.0, 1.0, 2.0 * ws, 10).unwrap();
    let case_ii = build_enantiomer(0.0, 1.0, 1.0, 0.5 * ws, 10).unwrap();
    let a = conversion_fraction_stats(&case_i, params, &sampler(SamplingMethod::Metropolis, 6006), 20).unwrap();
    let b = conversion_fraction_stats(&case_ii, params, &sampler(SamplingMethod::Metropolis, 6007), 20).unwrap();
    check(
        a.localized.mean >= 0.95 && (0.45..=0.55).contains(&b.mean.mean),
        format!(
            "case I localized fraction {:.4} (>= 0.95, r_hat {:?}); case II mean P_A {:.4} +- {:.4} (in [0.45, 0.55])",
            a.localized.mean, a.localized.r_hat, b.mean.mean, b.mean.std_error
        ),
    )
}

fn bloch(theta: f64, phi: f64) -> StateVector {
    StateVector::new(vec![
        Complex64::new((0.5 * theta).cos(), 0.0),
        Complex64::from_polar((0.5 * theta).sin(), phi),
    ])
    .unwrap()
}

/// Exhaustive minimum on a 1000 x 1000 (theta, phi) grid, then on a second
/// 1000 x 1000 grid spanning two coarse cells around the best point.
fn grid_minimum<F: Fn(&StateVector) -> f64 + Sync>(f: F) -> f64 {
    const N: usize = 1000;
    let scan = |t0: f64, t1: f64, p0: f64, p1: f64, closed_phi: bool| -> (f64, f64, f64) {
        (0..N)
            .into_par_iter()
            .map(|i| {
                let theta = t0 + (t1 - t0) * i as f64 / (N - 1) as f64;
                let mut best = (f64::INFINITY, theta, 0.0);
                for j in 0..N {
                    let denom = if closed_phi { (N - 1) as f64 } else { N as f64 };
                    let phi = p0 + (p1 - p0) * j as f64 / denom;
                    let e = f(&bloch(theta, phi));
                    if e < best.0 {
                        best = (e, theta, phi);
                    }
                }
                best
            })
            .reduce(|| (f64::INFINITY, 0.0, 0.0), |a, b| if b.0 < a.0 { b } else { a })
    };
    let pi = std::f64::consts::PI;
    let (e0, t, p) = scan(0.0, pi, 0.0, 2.0 * pi, false);
    let ht = pi / (N - 1) as f64;
    let hp = 2.0 * pi / N as f64;
    let (e1, _, _) = scan((t - 2.0 * ht).max(0.0), (t + 2.0 * ht).min(pi), p - 2.0 * hp, p + 2.0 * hp, true);
    e0.min(e1)
}

fn c7_minimizer_vs_grid() -> Outcome {
    // (w / w*, delta, d); N = 10 throughout.
    let combos = [
        (0.0, 1.0, 1.0),
        (0.25, 0.5, 1.0),
        (0.4, 2.0, 0.5),
        (0.5, 1.0, 2.0),
        (0.6, 1.0, 1.0),
        (0.8, 0.5, 2.0),
        (1.2, 2.0, 1.0),
        (1.5, 1.0, 0.5),
        (2.0, 1.0, 1.0),
        (4.0, 0.5, 0.5),
    ];
    let mut worst: f64 = 0.0;
    let mut details = Vec::new();
    for (i, &(c, delta, d)) in combos.iter().enumerate() {
        let w = c * critical_w(0.0, delta, d, 10).unwrap();
        let model = build_enantiomer(0.0, delta, d, w, 10).unwrap();
        let cfg = MinimizerConfig { seed: derive_seed(7007, i as u64), ..MinimizerConfig::default() };
        let r = ground_state_search(&model.energy_functional(), 2, &cfg).unwrap();
        let oracle = grid_minimum(|psi| total_energy(&model, psi).unwrap());
        let gap = (r.energy - oracle).abs();
        worst = worst.max(gap);
        details.push(format!("{}{gap:.1e}", if classify_case(&model).verdict == Verdict::CaseI { "I:" } else { "II:" }));
    }
    check(worst <= 1e-6, format!("max |minimizer - grid oracle| = {worst:e} (tol 1e-6); per combo {details:?}"))
}

fn fd_gradient(f: &EnergyFunctional, psi: &StateVector, h: f64) -> Vec<f64> {
    let base = psi.real_coords();
    (0..base.len())
        .map(|k| {
            let mut plus = base.clone();
            let mut minus = base.clone();
            plus[k] += h;
            minus[k] -= h;
            let fp = f.evaluate(&StateVector::from_real_coords(&plus).unwrap());
            let fm = f.evaluate(&StateVector::from_real_coords(&minus).unwrap());
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

fn c8_gradient() -> Outcome {
    let mut rng = substream(8008, 0);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for dim in [2, 5, 13] {
        let h = random_hermitian(dim, &mut rng);
        let x = random_hermitian(dim, &mut rng);
        let w = rng.random_range(0.1..2.0);
        let f = EnergyFunctional::augmented(h, WfeSpec::new(w, 4, x).unwrap()).unwrap();
        for _ in 0..50 {
            let psi = random_state(dim, &mut rng);
            let analytic: Vec<f64> = f.tangential_gradient(&psi).iter().flat_map(|g| [g.re, g.im]).collect();
            let fd = fd_gradient(&f, &psi, 1e-5);
            let err = analytic.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let norm = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
            worst = worst.max(err / norm);
            count += 1;
        }
    }
    check(worst < 1e-6, format!("{count} states, max relative error {worst:e} (tol 1e-6)"))
}

fn c9_magnet() -> Outcome {
    let n = 12;
    let model = build_curie_weiss(n, 1.0, 0.0).unwrap();
    let w_tilde = 1.0 / (n * n) as f64;
    let w_grid = [0.0, 0.5 * w_tilde, w_tilde, 2.0 * w_tilde];
    let cells = magnetization_scan(&model, &[0.1], &w_grid, &sampler(SamplingMethod::Metropolis, 9009)).unwrap();
    let base = &cells[0];
    let deficit = base.vnte_m2 - base.ste_m2.mean;
    let mut ok = deficit > 3.0 * base.ste_m2.std_error;
    let mut steps = Vec::new();
    for p in cells.windows(2) {
        let se = (p[0].ste_m2.std_error.powi(2) + p[1].ste_m2.std_error.powi(2)).sqrt();
        let diff = p[1].ste_m2.mean - p[0].ste_m2.mean;
        ok &= diff >= -2.0 * se;
        steps.push(format!("{:+.4}", diff / se));
    }
    let flagged: Vec<bool> = cells.iter().map(|c| c.ste_m2.flagged).collect();
    let means: Vec<String> = cells.iter().map(|c| format!("{:.4}", c.ste_m2.mean)).collect();
    check(
        ok,
        format!(
            "vNTE {:.6}, STE(w=0) {:.4} +- {:.4} (deficit {:.1} SE, need > 3); STE over w grid {means:?}; step/SE {steps:?} (need >= -2); flagged {flagged:?}",
            base.vnte_m2,
            base.ste_m2.mean,
            base.ste_m2.std_error,
            deficit / base.ste_m2.std_error
        ),
    )
}

const CLI_CONFIG: &str = "\
seed = 42
delta = 1
d = 1
n_dof = 10
samples = 2000
burn_in = 500

[vnte]
h = 0,-1;-1,0
o = 0,1;1,0
t = 0.1, 1, 10

[ste]
h = 0,-1-0.5i;-1+0.5i,0.3
o = 1,0;0,-1
t = 0.2, 1, inf

[classify]
w = linspace(0, 0.08, 9)

[ground]
w = 0, 0.02, 0.08
starts = 8

[scan-boundary]
w = 0, 0.02, 0.08
t = 0.01, 1

[detect]
w = 0.08
t = 0.01, 1
bins = 10

[magnet]
n_spins = 8
t = 0.1, 1
w = 0, 0.01
";

fn run_cli(dir: &Path, cmd: &str, out: &str, workers: Option<&str>) -> (i32, Vec<u8>) {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ibound"));
    c.current_dir(dir).env_remove("IBOUND_WORKERS").args([cmd, "--config", "run.cfg", "--out", out]);
    if let Some(k) = workers {
        c.args(["--workers", k]);
    }
    let status = c.output().unwrap().status.code().unwrap_or(-1);
    (status, std::fs::read(dir.join(out)).unwrap_or_default())
}

fn c10_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.cfg"), CLI_CONFIG).unwrap();
    let mut problems = Vec::new();
    let commands = ["vnte", "ste", "classify", "ground", "scan-boundary", "detect", "magnet"];
    for cmd in commands {
        let (c1, a) = run_cli(dir.path(), cmd, "a.csv", Some("1"));
        let (c2, b) = run_cli(dir.path(), cmd, "b.csv", Some("1"));
        let (c3, c) = run_cli(dir.path(), cmd, "c.csv", Some("4"));
        let (c4, d) = run_cli(dir.path(), cmd, "d.csv", None);
        if ![c1, c2, c3, c4].iter().all(|&c| c == 0 || c == 3) || a.is_empty() {
            problems.push(format!("{cmd}: exit codes {c1},{c2},{c3},{c4}"));
        }
        if a != b {
            problems.push(format!("{cmd}: repeat differs"));
        }
        if a != c || a != d {
            problems.push(format!("{cmd}: worker count changes output"));
        }
    }
    check(
        problems.is_empty(),
        format!("{} commands x (2 repeats, 1/4/default workers) byte-identical {problems:?}", commands.len()),
    )
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 10] = [
        (1, "vNTE exactness", c1_vnte_exactness),
        (2, "ensemble agreement at beta = 0", c2_infinite_temperature),
        (3, "quadrature oracle", c3_quadrature_oracle),
        (4, "eigenstate dichotomy", c4_eigenstate_dichotomy),
        (5, "boundary location", c5_boundary),
        (6, "cooling behaviour", c6_cooling),
        (7, "minimizer vs grid oracle", c7_minimizer_vs_grid),
        (8, "gradient correctness", c8_gradient),
        (9, "magnet deficit", c9_magnet),
        (10, "CLI determinism", c10_determinism),
    ];
    let mut failed = 0;
    for (n, name, f) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {n} ({name}) [{secs:.1}s]: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {n} ({name}) [{secs:.1}s]: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
