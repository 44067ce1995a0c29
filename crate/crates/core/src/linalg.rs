//! Small dense linear algebra for `d <= 32`: Hermitian eigendecomposition
//! via cyclic Jacobi rotations, and a scaling-and-squaring matrix
//! exponential used as an independent cross-check.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::pauli::DenseOperator;

/// Eigendecomposition `H = V diag(w) V^dag` of a Hermitian matrix.
///
/// Cyclic complex Jacobi; converges quadratically and is exact enough for
/// the crate's 1e-12 tolerances at these sizes.
pub fn eigh(h: &DenseOperator) -> Result<(Array1<f64>, Array2<Complex64>)> {
    if !h.is_hermitian(1e-10) {
        return Err(Error::NotHermitian("eigh input".into()));
    }
    let d = h.dim();
    let mut a = h.entries().clone();
    // symmetrize exactly to suppress tiny input asymmetries
    for i in 0..d {
        for j in (i + 1)..d {
            let avg = 0.5 * (a[(i, j)] + a[(j, i)].conj());
            a[(i, j)] = avg;
            a[(j, i)] = avg.conj();
        }
        a[(i, i)] = Complex64::new(a[(i, i)].re, 0.0);
    }
    let mut v: Array2<Complex64> = Array2::eye(d);
    let off_norm = |a: &Array2<Complex64>| -> f64 {
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    s += a[(i, j)].norm_sqr();
                }
            }
        }
        s.sqrt()
    };
    let scale: f64 = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1.0);
    for _sweep in 0..100 {
        if off_norm(&a) <= 1e-14 * scale {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[(p, q)];
                if apq.norm() <= 1e-300 {
                    continue;
                }
                // unitary 2x2 rotation annihilating a[(p,q)]: strip the
                // phase of a_pq with D = diag(1, e^{-i phi}), then a real
                // Jacobi rotation R with tan(2 theta) = 2|a_pq| / (a_pp - a_qq);
                // G = D R applied as A <- G^dag A G
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let phase = apq / apq.norm();
                let abs = apq.norm();
                let theta = 0.5 * (2.0 * abs).atan2(app - aqq);
                let (c, s) = (theta.cos(), theta.sin());
                let gpp = Complex64::new(c, 0.0);
                let gpq = Complex64::new(-s, 0.0);
                let gqp = phase.conj() * s;
                let gqq = phase.conj() * c;
                // A <- G^dag A G with G acting on the (p,q) plane
                for k in 0..d {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * gpp + akq * gqp;
                    a[(k, q)] = akp * gpq + akq * gqq;
                }
                for k in 0..d {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = gpp.conj() * apk + gqp.conj() * aqk;
                    a[(q, k)] = gpq.conj() * apk + gqq.conj() * aqk;
                }
                for k in 0..d {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * gpp + vkq * gqp;
                    v[(k, q)] = vkp * gpq + vkq * gqq;
                }
            }
        }
    }
    let w = Array1::from_iter((0..d).map(|i| a[(i, i)].re));
    Ok((w, v))
}

/// `exp(c * H)` for Hermitian `H` via eigendecomposition.
pub fn exp_hermitian(h: &DenseOperator, c: Complex64) -> Result<DenseOperator> {
    let (w, v) = eigh(h)?;
    let d = h.dim();
    let mut out = Array2::zeros((d, d));
    for k in 0..d {
        let ek = (c * w[k]).exp();
        for i in 0..d {
            for j in 0..d {
                out[(i, j)] += ek * v[(i, k)] * v[(j, k)].conj();
            }
        }
    }
    DenseOperator::new(out)
}

/// Matrix exponential by scaling and squaring with a Taylor core.
/// Independent of [`eigh`]; used to cross-check [`exp_hermitian`].
pub fn exp_taylor(m: &DenseOperator) -> DenseOperator {
    let d = m.dim();
    let norm: f64 = m.entries().iter().map(|z| z.norm()).fold(0.0, f64::max) * d as f64;
    let squarings = norm.log2().ceil().max(0.0) as u32 + 4;
    let scale = 2f64.powi(-(squarings as i32));
    let scaled = m.scale(Complex64::new(scale, 0.0));
    let mut term: Array2<Complex64> = Array2::eye(d);
    let mut sum = term.clone();
    for k in 1..=24 {
        term = term.dot(scaled.entries()).mapv(|z| z / k as f64);
        sum = &sum + &term;
    }
    for _ in 0..squarings {
        sum = sum.dot(&sum);
    }
    DenseOperator::new(sum).expect("square input")
}

/// Real matrix power by repeated multiplication (small exponents).
pub fn matrix_power(m: &Array2<f64>, k: usize) -> Array2<f64> {
    let d = m.nrows();
    let mut acc = Array2::eye(d);
    for _ in 0..k {
        acc = acc.dot(m);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{purpose_stream, Purpose};

    #[test]
    fn eigh_reconstructs_input() {
        let mut rng = purpose_stream(30, Purpose::Test, 0);
        for n in 1..=3 {
            let h = crate::testutil::random_hermitian(n, &mut rng);
            let (w, v) = eigh(&h).unwrap();
            let d = h.dim();
            let mut recon = Array2::zeros((d, d));
            for k in 0..d {
                for i in 0..d {
                    for j in 0..d {
                        recon[(i, j)] += Complex64::new(w[k], 0.0) * v[(i, k)] * v[(j, k)].conj();
                    }
                }
            }
            let recon = DenseOperator::new(recon).unwrap();
            assert!(h.max_abs_diff(&recon) < 1e-11);
            // eigenvectors orthonormal
            let vt = DenseOperator::new(v.clone()).unwrap();
            assert!(vt.is_unitary(1e-11));
        }
    }

    #[test]
    fn exp_hermitian_matches_taylor() {
        let mut rng = purpose_stream(31, Purpose::Test, 0);
        for n in 1..=2 {
            let h = crate::testutil::random_hermitian(n, &mut rng);
            let c = Complex64::new(0.0, -0.7);
            let a = exp_hermitian(&h, c).unwrap();
            let b = exp_taylor(&h.scale(c));
            assert!(a.max_abs_diff(&b) < 1e-10);
        }
    }

    #[test]
    fn exp_of_diagonal() {
        let z = crate::pauli::PauliString::parse("Z").unwrap().dense();
        let t = 0.9;
        let u = exp_hermitian(&z, Complex64::new(0.0, -t)).unwrap();
        assert!((u.entries()[(0, 0)] - Complex64::new(0.0, -t).exp()).norm() < 1e-12);
        assert!((u.entries()[(1, 1)] - Complex64::new(0.0, t).exp()).norm() < 1e-12);
        assert!(u.entries()[(0, 1)].norm() < 1e-12);
    }
}
