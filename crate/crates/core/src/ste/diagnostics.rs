//! Convergence diagnostics for pooled Markov chains.
//!
//! Split potential scale reduction and the multi-chain effective sample size
//! (Geyer initial monotone sequence), following the usual Gelman/Stan
//! definitions. Chains are split in halves before either statistic is
//! computed, so a single chain still gets a drift check.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

fn split_chains<'a>(chains: &[&'a [f64]]) -> Vec<&'a [f64]> {
    let mut out = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let half = c.len() / 2;
        out.push(&c[..half]);
        // Odd lengths drop the middle draw.
        out.push(&c[c.len() - half..]);
    }
    out
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_variance(x: &[f64], m: f64) -> f64 {
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Split-chain R-hat. A constant trace is perfectly converged (1.0).
pub fn split_rhat(chains: &[&[f64]]) -> f64 {
    let split = split_chains(chains);
    let n = split[0].len() as f64;
    let m = split.len() as f64;
    if n < 2.0 {
        return f64::NAN;
    }
    let means: Vec<f64> = split.iter().map(|c| mean(c)).collect();
    let grand = means.iter().sum::<f64>() / m;
    let b = n / (m - 1.0) * means.iter().map(|cm| (cm - grand).powi(2)).sum::<f64>();
    let w = split.iter().zip(&means).map(|(c, &cm)| sample_variance(c, cm)).sum::<f64>() / m;
    if w <= 0.0 {
        return if b <= 0.0 { 1.0 } else { f64::INFINITY };
    }
    let var_plus = (n - 1.0) / n * w + b / n;
    (var_plus / w).sqrt()
}

/// Biased autocovariance (divided by `n`) at every lag, via zero-padded FFT.
pub fn autocovariance(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let m = mean(x);
    let size = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(size);
    let inverse = planner.plan_fft_inverse(size);
    let mut buf: Vec<Complex<f64>> = x
        .iter()
        .map(|&v| Complex::new(v - m, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)).take(size - n))
        .collect();
    forward.process(&mut buf);
    for z in buf.iter_mut() {
        *z = Complex::new(z.norm_sqr(), 0.0);
    }
    inverse.process(&mut buf);
    let scale = 1.0 / (size as f64 * n as f64);
    buf[..n].iter().map(|z| z.re * scale).collect()
}

/// Multi-chain effective sample size of the pooled draws (split chains).
///
/// Returns the total draw count for a constant trace. Capped at
/// `N log10 N` as in the reference implementation.
pub fn effective_sample_size(chains: &[&[f64]]) -> f64 {
    let split = split_chains(chains);
    let m = split.len();
    let n = split[0].len();
    let total = (m * n) as f64;
    if n < 4 {
        return f64::NAN;
    }

    let acov: Vec<Vec<f64>> = split.iter().map(|c| autocovariance(c)).collect();
    let means: Vec<f64> = split.iter().map(|c| mean(c)).collect();
    let nf = n as f64;
    let mean_var = acov.iter().map(|a| a[0] * nf / (nf - 1.0)).sum::<f64>() / m as f64;
    let mut var_plus = mean_var * (nf - 1.0) / nf;
    if m > 1 {
        let grand = means.iter().sum::<f64>() / m as f64;
        var_plus += means.iter().map(|x| (x - grand).powi(2)).sum::<f64>() / (m as f64 - 1.0);
    }
    if var_plus <= 0.0 {
        return total;
    }

    let acov_mean = |t: usize| acov.iter().map(|a| a[t]).sum::<f64>() / m as f64;
    let mut rho = vec![0.0; n];
    rho[0] = 1.0;
    let mut rho_even = 1.0;
    let mut rho_odd = 1.0 - (mean_var - acov_mean(1)) / var_plus;
    rho[1] = rho_odd;

    let mut t = 1;
    while t + 4 < n && rho_even + rho_odd > 0.0 {
        rho_even = 1.0 - (mean_var - acov_mean(t + 1)) / var_plus;
        rho_odd = 1.0 - (mean_var - acov_mean(t + 2)) / var_plus;
        if rho_even + rho_odd >= 0.0 {
            rho[t + 1] = rho_even;
            rho[t + 2] = rho_odd;
        }
        t += 2;
    }
    let max_t = t;
    if rho_even > 0.0 && max_t + 1 < n {
        rho[max_t + 1] = rho_even;
    }

    // Initial monotone sequence.
    let mut s = 1;
    while s + 3 <= max_t {
        if rho[s + 1] + rho[s + 2] > rho[s - 1] + rho[s] {
            rho[s + 1] = (rho[s - 1] + rho[s]) / 2.0;
            rho[s + 2] = rho[s + 1];
        }
        s += 2;
    }

    let tail = if max_t + 1 < n { rho[max_t + 1] } else { 0.0 };
    let tau = -1.0 + 2.0 * rho[..max_t].iter().sum::<f64>() + tail;
    (total / tau).min(total * total.log10())
}
