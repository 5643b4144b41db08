//! Gibbs averages over energy eigenstates.
//!
//! Every ensemble member is an eigenvector `v_n` of `H` carrying weight
//! `exp(-lambda_n / T) / Z`, so the average of `O` is the weighted sum of the
//! diagonal matrix elements `<v_n|O|v_n>`. Boltzmann's constant is 1 and
//! temperatures are quoted in energy units.

use crate::error::{ensure_dim, Error, Result};
use crate::hilbert::{eigendecompose, expectation, EigenSystem, HermitianOperator};

/// Inverse temperature. `beta == 0` stands for infinite temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalParams {
    beta: f64,
}

impl ThermalParams {
    /// `T > 0`; `T = +inf` maps to `beta = 0`.
    pub fn from_temperature(temperature: f64) -> Result<Self> {
        if temperature.is_nan() || temperature <= 0.0 {
            return Err(Error::InvalidParameter(format!("temperature must be positive, got {temperature}")));
        }
        Ok(Self { beta: 1.0 / temperature })
    }

    pub fn from_beta(beta: f64) -> Result<Self> {
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::InvalidParameter(format!("beta must be finite and nonnegative, got {beta}")));
        }
        Ok(Self { beta })
    }

    pub fn infinite_temperature() -> Self {
        Self { beta: 0.0 }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn temperature(&self) -> f64 {
        if self.beta == 0.0 {
            f64::INFINITY
        } else {
            1.0 / self.beta
        }
    }
}

/// `Z = shifted * exp(-beta * shift)`, stored split so it never overflows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionFunction {
    /// `sum_n exp(-beta (lambda_n - shift))`, always in `[1, dim]`.
    pub shifted: f64,
    /// The ground energy `lambda_0`.
    pub shift: f64,
    pub beta: f64,
}

impl PartitionFunction {
    pub fn ln(&self) -> f64 {
        self.shifted.ln() - self.beta * self.shift
    }

    /// `Z` itself; may overflow or underflow for extreme `beta * shift`.
    pub fn value(&self) -> f64 {
        self.shifted * (-self.beta * self.shift).exp()
    }
}

/// Normalized Gibbs weights of an eigen spectrum, shifted by the ground energy.
pub fn gibbs_weights(eigenvalues: &[f64], params: ThermalParams) -> (Vec<f64>, PartitionFunction) {
    let shift = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let beta = params.beta();
    let raw: Vec<f64> = eigenvalues.iter().map(|&l| (-beta * (l - shift)).exp()).collect();
    let shifted: f64 = raw.iter().sum();
    let weights = raw.into_iter().map(|w| w / shifted).collect();
    (weights, PartitionFunction { shifted, shift, beta })
}

pub fn vnte_partition(h: &HermitianOperator, params: ThermalParams) -> Result<PartitionFunction> {
    let es = eigendecompose(h)?;
    Ok(gibbs_weights(&es.eigenvalues, params).1)
}

pub fn vnte_expectation(h: &HermitianOperator, o: &HermitianOperator, params: ThermalParams) -> Result<f64> {
    ensure_dim(h.dim(), o.dim())?;
    let es = eigendecompose(h)?;
    vnte_expectation_in(&es, o, params)
}

/// Same as [`vnte_expectation`] but reuses a precomputed spectrum, which is
/// what temperature scans want.
pub fn vnte_expectation_in(es: &EigenSystem, o: &HermitianOperator, params: ThermalParams) -> Result<f64> {
    ensure_dim(es.dim(), o.dim())?;
    let (weights, _) = gibbs_weights(&es.eigenvalues, params);
    let mut acc = 0.0;
    for (w, v) in weights.iter().zip(&es.eigenvectors) {
        acc += w * expectation(o, v)?;
    }
    Ok(acc)
}
