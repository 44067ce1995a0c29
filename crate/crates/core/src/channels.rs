//! Quantum channels in the Pauli-Liouville representation, the disordered
//! Ising Hamiltonian with its time evolution, and the exact values
//! (unitarity, OTOC) that the estimation pipelines are benchmarked against.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::pauli::{
    channel_to_liouville, DenseOperator, LiouvilleMatrix, Pauli, PauliString,
};
use crate::rng::{purpose_stream, Purpose};

/// Quantum channel as a real transfer matrix in the normalized Pauli basis.
///
/// Hermiticity-preserving maps have real entries in this basis, which is
/// what the simulator exploits to propagate states as real coefficient
/// vectors.
#[derive(Clone, Debug)]
pub struct Channel {
    n: usize,
    matrix: Array2<f64>,
    trace_preserving: bool,
}

impl Channel {
    /// Wrap a transfer matrix; detects trace preservation from the first row.
    pub fn from_matrix(n: usize, matrix: Array2<f64>) -> Result<Self> {
        let d2 = 1usize << (2 * n);
        if matrix.dim() != (d2, d2) {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} transfer matrix for n = {n}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let tp = (0..d2).all(|j| {
            let expect = if j == 0 { 1.0 } else { 0.0 };
            (matrix[(0, j)] - expect).abs() <= 1e-12
        });
        Ok(Self {
            n,
            matrix,
            trace_preserving: tp,
        })
    }

    /// Convert from a complex Liouville matrix; entries must be real to `tol`.
    pub fn from_liouville(n: usize, m: &LiouvilleMatrix, tol: f64) -> Result<Self> {
        Self::from_matrix(n, m.to_real(tol)?)
    }

    pub fn identity(n: usize) -> Self {
        let d2 = 1usize << (2 * n);
        Self {
            n,
            matrix: Array2::eye(d2),
            trace_preserving: true,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn is_trace_preserving(&self) -> bool {
        self.trace_preserving
    }

    /// Unital means the identity is a fixed point: first column is `e_0`.
    pub fn is_unital(&self, tol: f64) -> bool {
        let d2 = self.matrix.nrows();
        (0..d2).all(|i| {
            let expect = if i == 0 { 1.0 } else { 0.0 };
            (self.matrix[(i, 0)] - expect).abs() <= tol
        })
    }

    pub fn liouville(&self) -> LiouvilleMatrix {
        LiouvilleMatrix::new(self.matrix.mapv(|v| Complex64::new(v, 0.0))).unwrap()
    }

    /// `outer(inner(rho))`: matrix product `outer * inner`.
    pub fn compose(outer: &Channel, inner: &Channel) -> Result<Channel> {
        if outer.n != inner.n {
            return Err(Error::DimensionMismatch(format!(
                "{} vs {} qubits",
                outer.n, inner.n
            )));
        }
        Ok(Channel {
            n: outer.n,
            matrix: outer.matrix.dot(&inner.matrix),
            trace_preserving: outer.trace_preserving && inner.trace_preserving,
        })
    }

    /// Apply to a real Pauli-coefficient vector.
    pub fn apply_vec(&self, v: &Array1<f64>) -> Array1<f64> {
        self.matrix.dot(v)
    }

    /// Apply to a dense operator (test convenience; the simulator works on
    /// coefficient vectors).
    pub fn apply_dense(&self, op: &DenseOperator) -> Result<DenseOperator> {
        let v = crate::pauli::vectorize(op);
        let coeffs = v.coeffs();
        let mut out = Array1::zeros(coeffs.len());
        for i in 0..coeffs.len() {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..coeffs.len() {
                acc += Complex64::new(self.matrix[(i, j)], 0.0) * coeffs[j];
            }
            out[i] = acc;
        }
        crate::pauli::devectorize(&crate::pauli::LiouvilleVector::new(out)?)
    }

    /// Kronecker square `Lambda x Lambda` on the doubled Liouville space.
    pub fn kron_square(&self) -> Array2<f64> {
        kron_real(&self.matrix, &self.matrix)
    }
}

pub(crate) fn kron_real(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let (ra, ca) = a.dim();
    let (rb, cb) = b.dim();
    let mut out = Array2::zeros((ra * rb, ca * cb));
    for ia in 0..ra {
        for ja in 0..ca {
            let v = a[(ia, ja)];
            if v == 0.0 {
                continue;
            }
            for ib in 0..rb {
                for jb in 0..cb {
                    out[(ia * rb + ib, ja * cb + jb)] = v * b[(ib, jb)];
                }
            }
        }
    }
    out
}

/// Depolarizing channel `rho -> (1-p) rho + (p/d) Tr(rho) 1`.
pub fn depolarizing(p: f64, n: usize) -> Result<Channel> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "depolarizing probability {p} outside [0, 1]"
        )));
    }
    let d2 = 1usize << (2 * n);
    let mut matrix = Array2::zeros((d2, d2));
    matrix[(0, 0)] = 1.0;
    for i in 1..d2 {
        matrix[(i, i)] = 1.0 - p;
    }
    Ok(Channel {
        n,
        matrix,
        trace_preserving: true,
    })
}

/// Conjugation channel `rho -> U rho U^dag`.
pub fn unitary_channel(u: &DenseOperator) -> Result<Channel> {
    if !u.is_unitary(1e-10) {
        return Err(Error::NotUnitary("unitary_channel input".into()));
    }
    let n = u.qubits();
    let udag = u.dagger();
    let liou = channel_to_liouville(
        |op| u.matmul(op).unwrap().matmul(&udag).unwrap(),
        n,
    );
    Channel::from_liouville(n, &liou, 1e-10)
}

/// Unitarity: average output purity of the identity-subtracted channel,
/// `u(L) = d/(d-1) * E_psi Tr[L'(psi)^dag L'(psi)]` with
/// `L'(A) = L(A) - Tr(L(A)) 1/d`.
///
/// The Haar average of `psi x psi` is replaced by the exact symmetric
/// subspace formula `(1 + F) / (d (d+1))`; in the Pauli basis the average of
/// `|psi><psi|` outer products becomes `(1 + d e0 e0^T) / (d (d+1))`, giving
/// a closed-form contraction with no sampling.
pub fn unitarity_exact(c: &Channel) -> Result<f64> {
    if !c.is_trace_preserving() {
        return Err(Error::NotTracePreserving("unitarity_exact input".into()));
    }
    let d = c.dim() as f64;
    let d2 = c.matrix.nrows();
    // L' = L with the trace row removed
    let mut frob = 0.0;
    let mut col0 = 0.0;
    for i in 1..d2 {
        for j in 0..d2 {
            frob += c.matrix[(i, j)] * c.matrix[(i, j)];
        }
        col0 += c.matrix[(i, 0)] * c.matrix[(i, 0)];
    }
    // u = (d/(d-1)) * [ ||L'||_F^2 + d ||L' e0||^2 ] / (d (d+1))
    Ok((frob + d * col0) / ((d - 1.0) * (d + 1.0)))
}

/// Exact OTOC of a unitary: `O(t) = Re Tr(W V_t W V_t) / d` with
/// `V_t = U_t V U_t^dag` (the conjugation the interleaved channel applies).
pub fn otoc_exact(u_t: &DenseOperator, v: &PauliString, w: &PauliString) -> Result<f64> {
    if v.is_identity_word() || w.is_identity_word() {
        return Err(Error::InvalidArgument(
            "OTOC requires nontrivial Pauli words V and W".into(),
        ));
    }
    if v.n() != u_t.qubits() || w.n() != u_t.qubits() {
        return Err(Error::DimensionMismatch(format!(
            "V on {}, W on {}, U_t on {} qubits",
            v.n(),
            w.n(),
            u_t.qubits()
        )));
    }
    if !u_t.is_unitary(1e-10) {
        return Err(Error::NotUnitary("otoc_exact U_t".into()));
    }
    let d = u_t.dim();
    let vt = u_t
        .matmul(&v.dense())
        .unwrap()
        .matmul(&u_t.dagger())
        .unwrap();
    let m = w.dense().matmul(&vt).unwrap();
    let tr = m.matmul(&m).unwrap().trace();
    Ok(tr.re / d as f64)
}

/// Squared-commutator strength `C(t) = 2 (1 - Re O(t))`.
pub fn otoc_commutator(u_t: &DenseOperator, v: &PauliString, w: &PauliString) -> Result<f64> {
    Ok(2.0 * (1.0 - otoc_exact(u_t, v, w)?))
}

/// Gate-independent noise around each gate plus SPAM channels.
#[derive(Clone, Debug)]
pub struct NoiseModel {
    /// Applied after each gate (`Lambda_L`).
    pub left: Channel,
    /// Applied before each gate (`Lambda_R`).
    pub right: Channel,
    /// Applied once after state preparation.
    pub spam_prep: Channel,
    /// Applied once before measurement.
    pub spam_meas: Channel,
}

impl NoiseModel {
    pub fn noiseless(n: usize) -> Self {
        Self {
            left: Channel::identity(n),
            right: Channel::identity(n),
            spam_prep: Channel::identity(n),
            spam_meas: Channel::identity(n),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, ch) in [
            ("left", &self.left),
            ("right", &self.right),
            ("spam_prep", &self.spam_prep),
            ("spam_meas", &self.spam_meas),
        ] {
            if !ch.is_trace_preserving() {
                return Err(Error::NotTracePreserving(format!("noise component {name}")));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.left.n()
    }
}

/// Parameters of the disordered Ising Hamiltonian
/// `H = sum_{i<j} J0/|i-j|^alpha X_i X_j + (B/2) sum_i Z_i + sum_i (D_i/2) Z_i`
/// with `D_i` uniform on `[-Dmax, Dmax]`, frozen by `disorder_seed`.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IsingParams {
    pub n: usize,
    pub j0: f64,
    pub alpha: f64,
    pub b: f64,
    pub dmax: f64,
    pub disorder_seed: u64,
}

impl IsingParams {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::InvalidArgument("Ising chain needs n >= 1".into()));
        }
        if self.dmax < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "disorder half-width {} must be nonnegative",
                self.dmax
            )));
        }
        Ok(())
    }

    /// The frozen disorder realization.
    pub fn disorder(&self) -> Vec<f64> {
        let mut rng = purpose_stream(self.disorder_seed, Purpose::Disorder, 0);
        (0..self.n)
            .map(|_| (2.0 * rng.random::<f64>() - 1.0) * self.dmax)
            .collect()
    }
}

/// Dense Hamiltonian of [`IsingParams`].
pub fn build_ising(params: &IsingParams) -> Result<DenseOperator> {
    params.validate()?;
    let n = params.n;
    let d = 1usize << n;
    let mut h = DenseOperator::zeros(d)?;
    for i in 0..n {
        for j in (i + 1)..n {
            let coupling = params.j0 / ((j - i) as f64).powf(params.alpha);
            if coupling == 0.0 {
                continue;
            }
            let mut word = vec![Pauli::I; n];
            word[i] = Pauli::X;
            word[j] = Pauli::X;
            let term = PauliString::new(word, 1)?.dense();
            h = h.add(&term.scale(Complex64::new(coupling, 0.0)))?;
        }
    }
    let disorder = params.disorder();
    for i in 0..n {
        let coeff = params.b / 2.0 + disorder[i] / 2.0;
        if coeff == 0.0 {
            continue;
        }
        let term = PauliString::single(n, i, Pauli::Z)?.dense();
        h = h.add(&term.scale(Complex64::new(coeff, 0.0)))?;
    }
    Ok(h)
}

/// `U_t = exp(-i H t)` via Hermitian eigendecomposition.
pub fn evolve(h: &DenseOperator, t: f64) -> Result<DenseOperator> {
    let u = linalg::exp_hermitian(h, Complex64::new(0.0, -t))?;
    if !u.is_unitary(1e-10) {
        return Err(Error::NotUnitary("evolve output drifted".into()));
    }
    Ok(u)
}

/// Random and structured channels for validation suites.
pub mod random {
    use super::*;

    /// Haar-ish random unitary: `exp(-i H)` of a random Hermitian, built with
    /// the Taylor exponential so it stays independent of the Jacobi solver.
    pub fn random_unitary<R: Rng>(n: usize, rng: &mut R) -> DenseOperator {
        let h = crate::testutil::random_hermitian(n, rng);
        linalg::exp_taylor(&h.scale(Complex64::new(0.0, -1.0)))
    }

    /// Single-site amplitude damping embedded in an n-qubit register.
    pub fn amplitude_damping(n: usize, site: usize, gamma: f64) -> Result<Channel> {
        if site >= n {
            return Err(Error::InvalidArgument(format!(
                "site {site} out of range for n = {n}"
            )));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidArgument(format!(
                "damping strength {gamma} outside [0, 1]"
            )));
        }
        let k0 = DenseOperator::new(ndarray::array![
            [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            [
                Complex64::new(0.0, 0.0),
                Complex64::new((1.0 - gamma).sqrt(), 0.0)
            ]
        ])?;
        let k1 = DenseOperator::new(ndarray::array![
            [Complex64::new(0.0, 0.0), Complex64::new(gamma.sqrt(), 0.0)],
            [Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)]
        ])?;
        let embed = |k: &DenseOperator| {
            let mut acc: Option<DenseOperator> = None;
            for q in 0..n {
                let factor = if q == site {
                    k.clone()
                } else {
                    DenseOperator::identity(2).unwrap()
                };
                acc = Some(match acc {
                    None => factor,
                    Some(a) => a.kron(&factor),
                });
            }
            acc.unwrap()
        };
        let kraus = [embed(&k0), embed(&k1)];
        let liou = channel_to_liouville(
            |op| {
                let mut out = DenseOperator::zeros(op.dim()).unwrap();
                for k in &kraus {
                    out = out
                        .add(&k.matmul(op).unwrap().matmul(&k.dagger()).unwrap())
                        .unwrap();
                }
                out
            },
            n,
        );
        Channel::from_liouville(n, &liou, 1e-10)
    }

    /// Random trace-preserving channel: unitary conjugation composed with
    /// depolarizing and single-site amplitude damping (generically
    /// non-unital).
    pub fn random_channel<R: Rng>(n: usize, rng: &mut R) -> Channel {
        let u = unitary_channel(&random_unitary(n, rng)).unwrap();
        let dep = depolarizing(rng.random::<f64>() * 0.3, n).unwrap();
        let site = rng.random_range(0..n);
        let damp = amplitude_damping(n, site, rng.random::<f64>() * 0.3).unwrap();
        Channel::compose(&damp, &Channel::compose(&dep, &u).unwrap()).unwrap()
    }

    /// Random unital trace-preserving channel: a mixture of unitaries.
    pub fn random_unital_channel<R: Rng>(n: usize, rng: &mut R) -> Channel {
        let d2 = 1usize << (2 * n);
        let mut acc = Array2::zeros((d2, d2));
        let mut weights = [0.0; 3];
        let mut total = 0.0;
        for w in weights.iter_mut() {
            *w = rng.random::<f64>() + 0.1;
            total += *w;
        }
        for w in weights {
            let u = unitary_channel(&random_unitary(n, rng)).unwrap();
            acc = acc + u.matrix().mapv(|v| v * w / total);
        }
        Channel::from_matrix(n, acc).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{purpose_stream, Purpose};

    #[test]
    fn depolarizing_matrix_and_bounds() {
        let c = depolarizing(0.3, 1).unwrap();
        assert!(c.is_trace_preserving());
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i != j {
                    0.0
                } else if i == 0 {
                    1.0
                } else {
                    0.7
                };
                assert!((c.matrix()[(i, j)] - expect).abs() < 1e-15);
            }
        }
        assert!(depolarizing(0.0, 1).unwrap().is_unital(0.0));
        assert_eq!(depolarizing(1.0, 2).unwrap().matrix()[(5, 5)], 0.0);
        assert!(depolarizing(-0.1, 1).is_err());
        assert!(depolarizing(1.1, 1).is_err());
    }

    #[test]
    fn unitary_channel_examples() {
        let id = unitary_channel(&DenseOperator::identity(2).unwrap()).unwrap();
        assert!(id
            .matrix()
            .iter()
            .zip(Array2::<f64>::eye(4).iter())
            .all(|(a, b)| (a - b).abs() < 1e-12));

        let x = PauliString::parse("X").unwrap().dense();
        let cx = unitary_channel(&x).unwrap();
        let diag = [1.0, 1.0, -1.0, -1.0];
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { diag[i] } else { 0.0 };
                assert!((cx.matrix()[(i, j)] - expect).abs() < 1e-12);
            }
        }

        // non-unitary input rejected
        let bad = x.scale(Complex64::new(0.5, 0.0));
        assert!(unitary_channel(&bad).is_err());
    }

    #[test]
    fn unitary_channel_traceless_block_is_orthogonal() {
        let mut rng = purpose_stream(40, Purpose::Test, 0);
        for n in 1..=2 {
            let u = random::random_unitary(n, &mut rng);
            let c = unitary_channel(&u).unwrap();
            let d2 = 1usize << (2 * n);
            let block = c.matrix().slice(ndarray::s![1.., 1..]).to_owned();
            let prod = block.t().dot(&block);
            let eye: Array2<f64> = Array2::eye(d2 - 1);
            assert!(prod
                .iter()
                .zip(eye.iter())
                .all(|(a, b)| (a - b).abs() < 1e-10));
        }
    }

    #[test]
    fn unitarity_closed_forms() {
        let id = Channel::identity(2);
        assert!((unitarity_exact(&id).unwrap() - 1.0).abs() < 1e-14);

        for p in [0.0, 0.1, 0.35, 1.0] {
            let dep = depolarizing(p, 2).unwrap();
            assert!((unitarity_exact(&dep).unwrap() - (1.0 - p) * (1.0 - p)).abs() < 1e-13);
        }

        let mut rng = purpose_stream(41, Purpose::Test, 0);
        for n in 1..=2 {
            let u = unitary_channel(&random::random_unitary(n, &mut rng)).unwrap();
            assert!((unitarity_exact(&u).unwrap() - 1.0).abs() < 1e-10);
            // depolarizing after a unitary: (1-p)^2
            let p = 0.2;
            let c = Channel::compose(&depolarizing(p, n).unwrap(), &u).unwrap();
            assert!((unitarity_exact(&c).unwrap() - (1.0 - p) * (1.0 - p)).abs() < 1e-10);
        }
    }

    #[test]
    fn unitarity_in_unit_interval_and_tp_required() {
        let mut rng = purpose_stream(42, Purpose::Test, 0);
        for _ in 0..20 {
            let c = random::random_channel(2, &mut rng);
            let u = unitarity_exact(&c).unwrap();
            assert!((0.0..=1.0 + 1e-12).contains(&u), "u = {u}");
        }
        let mut bad = depolarizing(0.1, 1).unwrap();
        bad.matrix[(0, 2)] = 0.3;
        bad.trace_preserving = false;
        assert!(unitarity_exact(&bad).is_err());
    }

    #[test]
    fn unitarity_matches_haar_monte_carlo() {
        // independent oracle: average output purity over random pure states
        let mut rng = purpose_stream(43, Purpose::Test, 0);
        let c = random::random_channel(1, &mut rng);
        let d = 2usize;
        let samples = 200_000;
        let mut acc = 0.0;
        for _ in 0..samples {
            // Haar state from a normalized complex Gaussian vector
            let mut psi: Vec<Complex64> = (0..d)
                .map(|_| {
                    let u1: f64 = rng.random::<f64>().max(1e-12);
                    let u2: f64 = rng.random();
                    let r = (-2.0 * u1.ln()).sqrt();
                    Complex64::new(
                        r * (2.0 * std::f64::consts::PI * u2).cos(),
                        r * (2.0 * std::f64::consts::PI * u2).sin(),
                    )
                })
                .collect();
            let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            psi.iter_mut().for_each(|z| *z /= norm);
            let mut proj = Array2::zeros((d, d));
            for i in 0..d {
                for j in 0..d {
                    proj[(i, j)] = psi[i] * psi[j].conj();
                }
            }
            let rho = DenseOperator::new(proj).unwrap();
            let out = c.apply_dense(&rho).unwrap();
            let idp = DenseOperator::identity(d)
                .unwrap()
                .scale(Complex64::new(out.trace().re / d as f64, 0.0));
            let diff = out.sub(&idp).unwrap();
            acc += diff.matmul(&diff.dagger()).unwrap().trace().re;
        }
        let mc = (d as f64 / (d as f64 - 1.0)) * acc / samples as f64;
        let exact = unitarity_exact(&c).unwrap();
        assert!(
            (mc - exact).abs() < 5e-3,
            "Monte Carlo {mc} vs exact {exact}"
        );
    }

    #[test]
    fn otoc_trivial_cases() {
        // disjoint commuting V, W at t = 0
        let id = DenseOperator::identity(4).unwrap();
        let v = PauliString::parse("IY").unwrap();
        let w = PauliString::parse("XI").unwrap();
        assert!((otoc_exact(&id, &v, &w).unwrap() - 1.0).abs() < 1e-14);

        // anticommuting single-qubit pair
        let id1 = DenseOperator::identity(2).unwrap();
        let v = PauliString::parse("Y").unwrap();
        let w = PauliString::parse("X").unwrap();
        assert!((otoc_exact(&id1, &v, &w).unwrap() + 1.0).abs() < 1e-14);
        assert!((otoc_commutator(&id1, &v, &w).unwrap() - 4.0).abs() < 1e-14);

        // identity words rejected
        let idw = PauliString::identity(1);
        assert!(otoc_exact(&id1, &idw, &w).is_err());
        assert!(otoc_exact(&id1, &v, &idw).is_err());
    }

    #[test]
    fn otoc_bounded_and_matches_doubled_space_contraction() {
        // cross-check against <<F(WxW)| Lambda^{x2} |VxV>> / d on the doubled
        // Liouville space
        let mut rng = purpose_stream(44, Purpose::Test, 0);
        for n in 1..=2 {
            let d = 1usize << n;
            for _ in 0..10 {
                let u = random::random_unitary(n, &mut rng);
                let vi = rng.random_range(1..(1usize << (2 * n)));
                let wi = rng.random_range(1..(1usize << (2 * n)));
                let v = PauliString::new(crate::pauli::index_word(vi, n), 1).unwrap();
                let w = PauliString::new(crate::pauli::index_word(wi, n), 1).unwrap();
                let o = otoc_exact(&u, &v, &w).unwrap();
                assert!(o.abs() <= 1.0 + 1e-12);

                let lam = unitary_channel(&u).unwrap();
                let lam2 = lam.kron_square();
                let d2 = d * d;
                // |V x V>> as Kronecker of single-copy coefficient vectors
                let mut vv1 = Array1::<f64>::zeros(d2);
                vv1[v.basis_index()] = v.sign() as f64 * (d as f64).sqrt();
                let mut vv = Array1::<f64>::zeros(d2 * d2);
                for i in 0..d2 {
                    for j in 0..d2 {
                        vv[i * d2 + j] = vv1[i] * vv1[j];
                    }
                }
                // <<F(W x W)| has coefficients Tr(W sigma W sigma) on the
                // diagonal pairs (normalized Paulis)
                let mut fw = Array1::<f64>::zeros(d2 * d2);
                for s in 0..d2 {
                    let sigma = PauliString::new(crate::pauli::index_word(s, n), 1).unwrap();
                    let c = if sigma.commutes_with(&w).unwrap() {
                        1.0
                    } else {
                        -1.0
                    };
                    fw[s * d2 + s] = c;
                }
                let contraction = fw.dot(&lam2.dot(&vv)) / d as f64;
                assert!(
                    (contraction - o).abs() < 1e-10,
                    "contraction {contraction} vs otoc {o}"
                );
            }
        }
    }

    #[test]
    fn ising_construction() {
        let zero = build_ising(&IsingParams {
            n: 2,
            j0: 0.0,
            alpha: 1.5,
            b: 0.0,
            dmax: 0.0,
            disorder_seed: 1,
        })
        .unwrap();
        assert!(zero.entries().iter().all(|z| z.norm() < 1e-15));

        let xx = build_ising(&IsingParams {
            n: 2,
            j0: 1.0,
            alpha: 2.0,
            b: 0.0,
            dmax: 0.0,
            disorder_seed: 1,
        })
        .unwrap();
        let expect = PauliString::parse("XX").unwrap().dense();
        assert!(xx.max_abs_diff(&expect) < 1e-15);

        let params = IsingParams {
            n: 3,
            j0: 1.0,
            alpha: 1.5,
            b: 1.0,
            dmax: 1.0,
            disorder_seed: 7,
        };
        let h = build_ising(&params).unwrap();
        assert!(h.is_hermitian(1e-12));
        // frozen disorder: same seed, same matrix
        let h2 = build_ising(&params).unwrap();
        assert!(h.max_abs_diff(&h2) < 1e-15);
        let other = build_ising(&IsingParams {
            disorder_seed: 8,
            ..params
        })
        .unwrap();
        assert!(h.max_abs_diff(&other) > 1e-6);
    }

    #[test]
    fn evolve_properties() {
        let params = IsingParams {
            n: 2,
            j0: 1.0,
            alpha: 1.5,
            b: 1.0,
            dmax: 0.5,
            disorder_seed: 3,
        };
        let h = build_ising(&params).unwrap();
        let id = evolve(&h, 0.0).unwrap();
        assert!(id.max_abs_diff(&DenseOperator::identity(4).unwrap()) < 1e-12);

        let z = PauliString::parse("Z").unwrap().dense();
        let t = 1.3;
        let u = evolve(&z, t).unwrap();
        assert!((u.entries()[(0, 0)] - Complex64::new(0.0, -t).exp()).norm() < 1e-12);
        assert!((u.entries()[(1, 1)] - Complex64::new(0.0, t).exp()).norm() < 1e-12);

        let u1 = evolve(&h, 0.8).unwrap();
        let u2 = evolve(&h, -0.8).unwrap();
        let prod = u1.matmul(&u2).unwrap();
        assert!(prod.max_abs_diff(&DenseOperator::identity(4).unwrap()) < 1e-11);

        // agreement with the independent Taylor route
        let direct = linalg::exp_taylor(&h.scale(Complex64::new(0.0, -0.8)));
        assert!(u1.max_abs_diff(&direct) < 1e-10);

        // non-Hermitian input rejected
        let mut bad = h.clone();
        bad.entries_mut()[(0, 1)] += Complex64::new(0.5, 0.0);
        assert!(evolve(&bad, 1.0).is_err());
    }

    #[test]
    fn composition_matches_liouville_product() {
        let mut rng = purpose_stream(45, Purpose::Test, 0);
        for _ in 0..5 {
            let a = random::random_channel(1, &mut rng);
            let b = random::random_channel(1, &mut rng);
            let comp = Channel::compose(&a, &b).unwrap();
            let op = crate::testutil::random_hermitian(1, &mut rng);
            let via_comp = comp.apply_dense(&op).unwrap();
            let via_seq = a.apply_dense(&b.apply_dense(&op).unwrap()).unwrap();
            assert!(via_comp.max_abs_diff(&via_seq) < 1e-10);
        }
    }

    #[test]
    fn amplitude_damping_is_tp_and_nonunital() {
        let c = random::amplitude_damping(2, 1, 0.4).unwrap();
        assert!(c.is_trace_preserving());
        assert!(!c.is_unital(1e-9));
    }
}
