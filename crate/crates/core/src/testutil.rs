use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::hilbert::{HermitianOperator, StateVector};

/// GUE-style random Hermitian matrix.
pub fn random_hermitian<R: Rng>(dim: usize, rng: &mut R) -> HermitianOperator {
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

pub fn random_state<R: Rng>(dim: usize, rng: &mut R) -> StateVector {
    StateVector::new(
        (0..dim)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect(),
    )
    .unwrap()
}
