//! Random operators for tests and validation suites.

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;

use crate::pauli::DenseOperator;

/// Random dense complex matrix with i.i.d. standard-normal-ish entries.
pub fn random_dense<R: Rng>(n: usize, rng: &mut R) -> DenseOperator {
    let d = 1usize << n;
    let entries = Array2::from_shape_fn((d, d), |_| {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * 2.0
    });
    DenseOperator::new(entries).expect("power-of-two dimension")
}

/// Random Hermitian matrix.
pub fn random_hermitian<R: Rng>(n: usize, rng: &mut R) -> DenseOperator {
    let a = random_dense(n, rng);
    let half = a.add(&a.dagger()).unwrap().scale(Complex64::new(0.5, 0.0));
    half
}
