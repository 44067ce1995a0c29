//! Closed-form decay predictions and brute-force exhaustive group averages
//! for a single qubit: the ground truth every estimator is tested against.
//!
//! Two layers of theory live here:
//!
//! - scalar / small-matrix decay models (`k(m) = Tr(Theta Phi^{m-1})`) with
//!   `Phi` computed from projector contractions of `A` and `Lambda x Lambda`;
//! - literal 24-element (576 pairs in independent mode) group sums building
//!   the exact single-layer transfer operator on the quadrupled space, with
//!   no projector shortcut, which the scalar forms must reproduce.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::channels::{kron_real, Channel, NoiseModel};
use crate::circuit::SequenceSpec;
use crate::clifford::enumerate_single_qubit_clifford;
use crate::error::{Error, Result};
use crate::linalg::matrix_power;
use crate::pauli::{index_word, DenseOperator, LiouvilleMatrix, PauliString};

/// Decay model `k(m) = Tr(Theta * Phi^{m-1})`.
#[derive(Clone, Debug)]
pub struct DecayModel {
    pub theta: Array2<f64>,
    pub phi: Array2<f64>,
}

impl DecayModel {
    pub fn scalar(theta: f64, phi: f64) -> Self {
        Self {
            theta: Array2::from_elem((1, 1), theta),
            phi: Array2::from_elem((1, 1), phi),
        }
    }

    pub fn is_scalar(&self) -> bool {
        self.phi.dim() == (1, 1)
    }

    pub fn predict(&self, m: usize) -> f64 {
        assert!(m >= 1);
        let chain = self.theta.dot(&matrix_power(&self.phi, m - 1));
        (0..chain.nrows()).map(|i| chain[(i, i)]).sum()
    }
}

/// Observable pair for the OTOC correlator; both words nontrivial and
/// unnormalized.
#[derive(Clone, Debug, PartialEq)]
pub struct OtocObservables {
    v: PauliString,
    w: PauliString,
}

impl OtocObservables {
    pub fn new(v: PauliString, w: PauliString) -> Result<Self> {
        if v.is_identity_word() || w.is_identity_word() {
            return Err(Error::InvalidArgument(
                "OTOC observables must be nontrivial Pauli words".into(),
            ));
        }
        if v.n() != w.n() {
            return Err(Error::DimensionMismatch(format!(
                "V on {} qubits, W on {}",
                v.n(),
                w.n()
            )));
        }
        Ok(Self { v, w })
    }

    pub fn n(&self) -> usize {
        self.v.n()
    }

    pub fn v(&self) -> &PauliString {
        &self.v
    }

    pub fn w(&self) -> &PauliString {
        &self.w
    }
}

/// Dense correlator operator `A` on the doubled Liouville space:
/// `A = (d^2-1)^2 sum_{sigma nontrivial} Tr(W sigma W sigma)
///      |sigma sigma>><<V V|` (real, rank one).
pub fn otoc_a_matrix(obs: &OtocObservables) -> Array2<f64> {
    let n = obs.n();
    let d = 1usize << n;
    let d2 = d * d;
    let scale = ((d2 - 1) * (d2 - 1)) as f64;
    let s = swap_w_vector(obs.w(), true);
    let vv = doubled_pauli_vector(obs.v());
    let mut a = Array2::zeros((d2 * d2, d2 * d2));
    for i in 0..d2 * d2 {
        if s[i] == 0.0 {
            continue;
        }
        for j in 0..d2 * d2 {
            a[(i, j)] = scale * s[i] * vv[j];
        }
    }
    a
}

/// `|V x V>>` as a real coefficient vector on the doubled space.
fn doubled_pauli_vector(v: &PauliString) -> Array1<f64> {
    let n = v.n();
    let d = 1usize << n;
    let d2 = d * d;
    let mut single = Array1::zeros(d2);
    single[v.basis_index()] = v.sign() as f64 * (d as f64).sqrt();
    let mut out = Array1::zeros(d2 * d2);
    for i in 0..d2 {
        if single[i] == 0.0 {
            continue;
        }
        for j in 0..d2 {
            out[i * d2 + j] = single[i] * single[j];
        }
    }
    out
}

/// Coefficients of `|F (W x W)>>`: `Tr(W sigma W sigma)` on diagonal pairs
/// of normalized Paulis; `traceless` drops the identity pair.
fn swap_w_vector(w: &PauliString, traceless: bool) -> Array1<f64> {
    let n = w.n();
    let d2 = 1usize << (2 * n);
    let mut out = Array1::zeros(d2 * d2);
    let start = if traceless { 1 } else { 0 };
    for s in start..d2 {
        let sigma = PauliString::new(index_word(s, n), 1).unwrap();
        let c = if sigma.commutes_with(w).unwrap() {
            1.0
        } else {
            -1.0
        };
        out[s * d2 + s] = c;
    }
    out
}

/// Which irrep block an index of the doubled space belongs to.
fn block_of(idx: usize, d2: usize) -> (bool, bool) {
    // (first factor trivial?, second factor trivial?)
    (idx / d2 == 0, idx % d2 == 0)
}

/// Theorem-1 scalar for the Clifford group: `A` must be supported on a
/// single irrep-product block `P_{t1} x P_{t2}`; returns
/// `Tr(P A^T P Lambda^{x2}) / (|P_{t1}| |P_{t2}|)`.
pub fn phi_independent_clifford(a: &Array2<f64>, lambda: &Channel) -> Result<f64> {
    let d2 = lambda.matrix().nrows();
    let dim = d2 * d2;
    if a.dim() != (dim, dim) {
        return Err(Error::DimensionMismatch(format!(
            "A is {}x{}, expected {dim}x{dim}",
            a.nrows(),
            a.ncols()
        )));
    }
    // find the unique block carrying A
    let mut support = [[false; 2]; 2];
    let mut max_abs = 0.0f64;
    for i in 0..dim {
        for j in 0..dim {
            let v = a[(i, j)].abs();
            if v > 1e-12 {
                let (r1, r2) = block_of(i, d2);
                let (c1, c2) = block_of(j, d2);
                if (r1, r2) != (c1, c2) {
                    return Err(Error::UnsupportedBlock(
                        "A mixes different irrep-product blocks".into(),
                    ));
                }
                support[r1 as usize][r2 as usize] = true;
            }
            max_abs = max_abs.max(v);
        }
    }
    if max_abs <= 1e-12 {
        return Ok(0.0);
    }
    let blocks: Vec<(bool, bool)> = (0..2)
        .flat_map(|x| (0..2).map(move |y| (x == 1, y == 1)))
        .filter(|&(x, y)| support[x as usize][y as usize])
        .collect();
    if blocks.len() != 1 {
        return Err(Error::UnsupportedBlock(format!(
            "A touches {} irrep-product blocks",
            blocks.len()
        )));
    }
    let (t1, t2) = blocks[0];
    let rank = |trivial: bool| if trivial { 1.0 } else { (d2 - 1) as f64 };
    let norm = rank(t1) * rank(t2);
    // Tr(P A^T P K) with A block-supported reduces to sum_{i,j} A_ij K_ij
    let lam = lambda.matrix();
    let mut tr = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            let av = a[(i, j)];
            if av == 0.0 {
                continue;
            }
            let k = lam[(i / d2, j / d2)] * lam[(i % d2, j % d2)];
            tr += av * k;
        }
    }
    Ok(tr / norm)
}

/// Fast rank-one evaluation of the OTOC decay rate:
/// `phi = sum_{sigma nontrivial} Tr(W sigma W sigma) [Lambda |V>>]_sigma^2`,
/// equal to `phi_independent_clifford(otoc_a_matrix(obs), lambda)`.
pub fn phi_otoc(obs: &OtocObservables, lambda: &Channel) -> Result<f64> {
    let n = obs.n();
    if lambda.n() != n {
        return Err(Error::DimensionMismatch("lambda qubit count".into()));
    }
    let d = 1usize << n;
    let d2 = d * d;
    let mut v_vec = Array1::zeros(d2);
    v_vec[obs.v().basis_index()] = obs.v().sign() as f64 * (d as f64).sqrt();
    let lv = lambda.apply_vec(&v_vec);
    let mut phi = 0.0;
    for s in 1..d2 {
        let sigma = PauliString::new(index_word(s, n), 1).unwrap();
        let c = if sigma.commutes_with(obs.w()).unwrap() {
            1.0
        } else {
            -1.0
        };
        phi += c * lv[s] * lv[s];
    }
    Ok(phi)
}

/// SPAM boundary scalar of the independent-sequence OTOC correlator:
/// one factor is `(1/(d^2-1)) <<rho| P_ad |Lambda_R spam_prep rho>> *
/// sum_x <<E_x| P_ad |Lambda_L^T spam_meas^T E_x>>`; Theta is its square.
pub fn theta_otoc(spec: &SequenceSpec) -> f64 {
    let d2 = 1usize << (2 * spec.n());
    let noise = spec.noise();
    let noisy_rho = noise
        .right
        .apply_vec(&noise.spam_prep.apply_vec(spec.rho_vec()));
    let rho_part: f64 = (1..d2).map(|i| spec.rho_vec()[i] * noisy_rho[i]).sum();
    let mut meas_part = 0.0;
    for e in spec.povm_vecs() {
        let noisy_e = noise.spam_meas.matrix().t().dot(e);
        let noisy_e = noise.left.matrix().t().dot(&noisy_e);
        meas_part += (1..d2).map(|i| e[i] * noisy_e[i]).sum::<f64>();
    }
    let factor = rho_part * meas_part / (d2 - 1) as f64;
    factor * factor
}

/// Scalar decay model for the OTOC protocol under a given spec: `Theta` from
/// the SPAM boundary contraction, `Phi` from the effective between-gate
/// channel.
pub fn decay_model_otoc(spec: &SequenceSpec, obs: &OtocObservables) -> Result<DecayModel> {
    let phi = phi_otoc(obs, &spec.effective_lambda())?;
    Ok(DecayModel::scalar(theta_otoc(spec), phi))
}

/// Decay rate claimed for the OTOC construction: `d * O(t)`; equal to
/// [`phi_otoc`] with the conjugation channel of `u_t`.
pub fn decay_otoc(u_t: &DenseOperator, v: &PauliString, w: &PauliString) -> Result<f64> {
    let d = u_t.dim();
    Ok(d as f64 * crate::channels::otoc_exact(u_t, v, w)?)
}

// ---------------------------------------------------------------------------
// Trivial-irrep pair in the doubled representation
// ---------------------------------------------------------------------------

/// Orthonormal basis `(B1, B2)` of the commutant of `U x U` together with
/// the rank-2 projector onto the trivial-irrep subspace of the doubled
/// Liouville representation.
#[derive(Clone, Debug)]
pub struct TrivialPair {
    pub b1: DenseOperator,
    pub b2: DenseOperator,
    pub p_tau: LiouvilleMatrix,
}

/// `B1 = 1/d`, `B2 = (F - B1)/sqrt(d^2-1)` on the doubled Hilbert space,
/// and `P_tau = |B1>><<B1| + |B2>><<B2|` on the doubled Liouville space.
pub fn trivial_pair(n: usize) -> TrivialPair {
    let d = 1usize << n;
    let d2 = d * d;
    let b1 = DenseOperator::identity(d2)
        .unwrap()
        .scale(Complex64::new(1.0 / d as f64, 0.0));
    let mut f = DenseOperator::zeros(d2).unwrap();
    for i in 0..d {
        for j in 0..d {
            f.entries_mut()[(i * d + j, j * d + i)] = Complex64::new(1.0, 0.0);
        }
    }
    let b2 = f
        .sub(&b1)
        .unwrap()
        .scale(Complex64::new(1.0 / ((d2 - 1) as f64).sqrt(), 0.0));
    // coefficient vectors: |B1>> = e0 x e0, |B2>> = sum_{i>=1} e_i x e_i / sqrt(d^2-1)
    let mut p = Array2::zeros((d2 * d2, d2 * d2));
    let b1v = trivial_vector(d2, 0);
    let b2v = trivial_vector(d2, 1);
    for i in 0..d2 * d2 {
        for j in 0..d2 * d2 {
            let v = b1v[i] * b1v[j] + b2v[i] * b2v[j];
            if v != 0.0 {
                p[(i, j)] = Complex64::new(v, 0.0);
            }
        }
    }
    TrivialPair {
        b1,
        b2,
        p_tau: LiouvilleMatrix::new(p).unwrap(),
    }
}

/// `which = 0` gives `|B1>>`, `which = 1` gives `|B2>>`.
fn trivial_vector(d2: usize, which: usize) -> Array1<f64> {
    let mut v = Array1::zeros(d2 * d2);
    if which == 0 {
        v[0] = 1.0;
    } else {
        let norm = 1.0 / ((d2 - 1) as f64).sqrt();
        for i in 1..d2 {
            v[i * d2 + i] = norm;
        }
    }
    v
}

/// 2x2 decay matrix of the identical-sequence protocol for the trivial
/// irrep: entries `<<B_i| Lambda^{x2} |B_j>>`. For trace-preserving input
/// this is `[[1, 0], [c, u]]` with eigenvalues `{1, u}`; the `(2,2)` entry
/// equals the unitarity for unital channels.
pub fn unitarity_phi(lambda: &Channel) -> Result<Array2<f64>> {
    if !lambda.is_trace_preserving() {
        return Err(Error::NotTracePreserving("unitarity_phi input".into()));
    }
    let d2 = lambda.matrix().nrows();
    let lam = lambda.matrix();
    let norm = (d2 - 1) as f64;
    let mut phi = Array2::zeros((2, 2));
    phi[(0, 0)] = lam[(0, 0)] * lam[(0, 0)];
    phi[(0, 1)] = (1..d2).map(|j| lam[(0, j)] * lam[(0, j)]).sum::<f64>() / norm.sqrt();
    phi[(1, 0)] = (1..d2).map(|i| lam[(i, 0)] * lam[(i, 0)]).sum::<f64>() / norm.sqrt();
    phi[(1, 1)] = {
        let mut s = 0.0;
        for i in 1..d2 {
            for j in 1..d2 {
                s += lam[(i, j)] * lam[(i, j)];
            }
        }
        s / norm
    };
    // for unital channels the lower-right entry is the unitarity
    if lambda.is_unital(1e-12) {
        let u = crate::channels::unitarity_exact(lambda)?;
        if (phi[(1, 1)] - u).abs() > 1e-10 {
            return Err(Error::SimulationIntegrity(format!(
                "trivial-block decay {} disagrees with unitarity {u}",
                phi[(1, 1)]
            )));
        }
    }
    Ok(phi)
}

/// Theorem-2 decay matrix for one-dimensional copies of an irrep inside the
/// doubled representation: `Phi_ij = <<B_i| A^T Lambda^{x2} |B_j>> / |P_j|`
/// where `P_i = |B_i>><<B_i|` are the supplied rank-one copy projectors.
///
/// With the [`trivial_pair`] projectors and `A` the identity this
/// reproduces [`unitarity_phi`].
pub fn phi_identical(
    a: &Array2<f64>,
    lambda: &Channel,
    p_list: &[Array2<f64>],
) -> Result<Array2<f64>> {
    let d2 = lambda.matrix().nrows();
    let dim = d2 * d2;
    if a.dim() != (dim, dim) {
        return Err(Error::DimensionMismatch(format!(
            "A is {}x{}, expected {dim}x{dim}",
            a.nrows(),
            a.ncols()
        )));
    }
    let mut vectors = Vec::with_capacity(p_list.len());
    for (idx, p) in p_list.iter().enumerate() {
        if p.dim() != (dim, dim) {
            return Err(Error::DimensionMismatch(format!("projector {idx} size")));
        }
        let trace: f64 = (0..dim).map(|i| p[(i, i)]).sum();
        if (trace - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "projector {idx} has rank {trace}, expected rank one"
            )));
        }
        let sq = p.dot(p);
        let dev = sq
            .iter()
            .zip(p.iter())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        if dev > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "projector {idx} is not idempotent (deviation {dev:e})"
            )));
        }
        // extract the unit vector: column of largest norm
        let mut best = 0;
        let mut best_norm = -1.0;
        for j in 0..dim {
            let nrm: f64 = (0..dim).map(|i| p[(i, j)] * p[(i, j)]).sum();
            if nrm > best_norm {
                best_norm = nrm;
                best = j;
            }
        }
        let col = p.column(best).to_owned();
        let nrm = col.dot(&col).sqrt();
        vectors.push(col.mapv(|v| v / nrm));
    }
    for i in 0..vectors.len() {
        for j in 0..i {
            if vectors[i].dot(&vectors[j]).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "projectors {j} and {i} are not orthogonal"
                )));
            }
        }
    }
    let k = vectors.len();
    let mut phi = Array2::zeros((k, k));
    for i in 0..k {
        for j in 0..k {
            // <<B_i| A^T Lambda^{x2} |B_j>> without materializing the Kronecker
            let lv = apply_kron_square(lambda.matrix(), &vectors[j]);
            let av = a.t().dot(&lv);
            phi[(i, j)] = vectors[i].dot(&av);
        }
    }
    Ok(phi)
}

/// Apply `M x M` to a vector on the doubled space without forming the
/// Kronecker product.
fn apply_kron_square(m: &Array2<f64>, v: &Array1<f64>) -> Array1<f64> {
    let d2 = m.nrows();
    // view v as a d2 x d2 matrix V; (M x M) v = vec(M V M^T)
    let mut vm = Array2::zeros((d2, d2));
    for i in 0..d2 {
        for j in 0..d2 {
            vm[(i, j)] = v[i * d2 + j];
        }
    }
    let out = m.dot(&vm).dot(&m.t());
    let mut res = Array1::zeros(d2 * d2);
    for i in 0..d2 {
        for j in 0..d2 {
            res[i * d2 + j] = out[(i, j)];
        }
    }
    res
}

/// 2x2 SPAM boundary for the identical-sequence protocol with outcome
/// weights: `Theta = theta_rho theta_E^T` so that
/// `k(m) = Tr(Theta Phi^{m-1})`.
pub fn theta_identical_weighted(spec: &SequenceSpec, weights: &[f64]) -> Result<Array2<f64>> {
    let d2 = 1usize << (2 * spec.n());
    if weights.len() != spec.povm_vecs().len() {
        return Err(Error::DimensionMismatch("weights vs POVM size".into()));
    }
    let noise = spec.noise();
    let norm = ((d2 - 1) as f64).sqrt();
    // |Lambda_R spam_prep rho>>
    let r = noise
        .right
        .apply_vec(&noise.spam_prep.apply_vec(spec.rho_vec()));
    let theta_rho = [r[0] * r[0], (1..d2).map(|i| r[i] * r[i]).sum::<f64>() / norm];
    // <<E_w spam_meas Lambda_L|
    let mut e_w = Array1::zeros(d2);
    for (x, e) in spec.povm_vecs().iter().enumerate() {
        e_w = e_w + e.mapv(|v| v * weights[x]);
    }
    let u = noise.left.matrix().t().dot(&noise.spam_meas.matrix().t().dot(&e_w));
    let theta_e = [u[0] * u[0], (1..d2).map(|i| u[i] * u[i]).sum::<f64>() / norm];
    let mut theta = Array2::zeros((2, 2));
    for l in 0..2 {
        for k in 0..2 {
            theta[(l, k)] = theta_rho[l] * theta_e[k];
        }
    }
    Ok(theta)
}

/// Full decay model of the identical-sequence (unitarity) protocol.
pub fn decay_model_unitarity(spec: &SequenceSpec, weights: &[f64]) -> Result<DecayModel> {
    let phi = unitarity_phi(&spec.effective_lambda())?;
    let theta = theta_identical_weighted(spec, weights)?;
    Ok(DecayModel { theta, phi })
}

// ---------------------------------------------------------------------------
// Exhaustive single-qubit layer twirls
// ---------------------------------------------------------------------------

/// Sequence-pairing mode of the exhaustive layer average.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum TwirlMode {
    /// Two independently drawn gates per layer (576 pairs).
    Independent,
    /// The same gate on both copies (24 terms).
    Identical,
}

/// Exact single-layer transfer operators on the quadrupled space
/// `(tau_1 x tau_2 x omega_1 x omega_2)`, built by literal group summation.
#[derive(Clone, Debug)]
pub struct ExhaustiveTwirl {
    /// Bare gate average `T = E[tau x tau x omega x omega]`.
    pub t: Array2<f64>,
    /// One full layer `(A x Lambda x Lambda) T`.
    pub layer: Array2<f64>,
}

impl ExhaustiveTwirl {
    /// `k(m) = Tr(M T [(A x L x L) T]^{m-1})` for a boundary term `M`.
    pub fn k_of_m(&self, boundary: &Array2<f64>, m: usize) -> f64 {
        assert!(m >= 1);
        let chain = self.t.dot(&matrix_power(&self.layer, m - 1));
        let mut tr = 0.0;
        for i in 0..chain.nrows() {
            for j in 0..chain.ncols() {
                tr += boundary[(i, j)] * chain[(j, i)];
            }
        }
        tr
    }
}

/// Build the exhaustive layer average for `n = 1`.
///
/// `tau_proj` (4x4) defines the representation carried by the first two
/// factors via `tau(g) = P omega(g) P`; `a` (16x16) acts on that pair;
/// `lambda` is the effective between-gate channel on each `omega` factor.
pub fn exhaustive_layer_twirl(
    n: usize,
    tau_proj: &Array2<f64>,
    a: &Array2<f64>,
    lambda: &Channel,
    mode: TwirlMode,
) -> Result<ExhaustiveTwirl> {
    if n != 1 {
        return Err(Error::InvalidArgument(
            "exhaustive twirl is enumerable only for n = 1".into(),
        ));
    }
    if lambda.n() != 1 {
        return Err(Error::DimensionMismatch("lambda qubit count".into()));
    }
    let group = enumerate_single_qubit_clifford();
    let count = group.len() as f64;
    let reps: Vec<(Array2<f64>, Array2<f64>)> = group
        .iter()
        .map(|g| {
            let omega = g.omega_matrix();
            let tau = tau_proj.dot(&omega).dot(tau_proj);
            (tau, omega)
        })
        .collect();
    let mut t = Array2::zeros((256, 256));
    match mode {
        TwirlMode::Independent => {
            for (tau1, om1) in &reps {
                for (tau2, om2) in &reps {
                    let tt = kron_real(tau1, tau2);
                    let oo = kron_real(om1, om2);
                    t = t + kron_real(&tt, &oo);
                }
            }
            t.mapv_inplace(|v| v / (count * count));
        }
        TwirlMode::Identical => {
            for (tau, om) in &reps {
                let tt = kron_real(tau, tau);
                let oo = kron_real(om, om);
                t = t + kron_real(&tt, &oo);
            }
            t.mapv_inplace(|v| v / count);
        }
    }
    let a_ll = kron_real(a, &lambda.kron_square());
    let layer = a_ll.dot(&t);
    Ok(ExhaustiveTwirl { t, layer })
}

/// SPAM boundary term of the second-order correlator on the quadrupled
/// space: `sum_{x,y} B_xy x |L_R rho~>><<L_L* E_x~| x |L_R rho~>><<L_L* E_y~|`
/// with nominal `rho`, `E_x` in `B_xy` and noisy ones in the omega factors.
pub fn correlator_boundary(spec: &SequenceSpec) -> Array2<f64> {
    let noise = spec.noise();
    let rho_nom = spec.rho_vec();
    let rho_noisy = noise
        .right
        .apply_vec(&noise.spam_prep.apply_vec(rho_nom));
    let outer = |u: &Array1<f64>, v: &Array1<f64>| -> Array2<f64> {
        let mut m = Array2::zeros((u.len(), v.len()));
        for i in 0..u.len() {
            for j in 0..v.len() {
                m[(i, j)] = u[i] * v[j];
            }
        }
        m
    };
    let dim = rho_nom.len();
    let mut boundary = Array2::zeros((dim * dim * dim * dim, dim * dim * dim * dim));
    for ex in spec.povm_vecs() {
        let ex_noisy = noise
            .left
            .matrix()
            .t()
            .dot(&noise.spam_meas.matrix().t().dot(ex));
        for ey in spec.povm_vecs() {
            let ey_noisy = noise
                .left
                .matrix()
                .t()
                .dot(&noise.spam_meas.matrix().t().dot(ey));
            let b1 = outer(rho_nom, ex);
            let b2 = outer(rho_nom, ey);
            let n1 = outer(&rho_noisy, &ex_noisy);
            let n2 = outer(&rho_noisy, &ey_noisy);
            let term = kron_real(&kron_real(&b1, &b2), &kron_real(&n1, &n2));
            boundary = boundary + term;
        }
    }
    boundary
}

/// Exhaustive population value of the identical-sequence weighted
/// correlator for `n = 1`: the doubled twirl chained between the boundary
/// vectors, with no irrep shortcut.
pub fn exhaustive_k_identical_weighted(
    spec: &SequenceSpec,
    weights: &[f64],
    m: usize,
) -> Result<f64> {
    if spec.n() != 1 {
        return Err(Error::InvalidArgument("exhaustive check needs n = 1".into()));
    }
    let group = enumerate_single_qubit_clifford();
    let mut t2 = Array2::zeros((16, 16));
    for g in &group {
        let om = g.omega_matrix();
        t2 = t2 + kron_real(&om, &om);
    }
    t2.mapv_inplace(|v| v / group.len() as f64);
    let noise = spec.noise();
    let lambda2 = spec.effective_lambda().kron_square();
    let r = noise
        .right
        .apply_vec(&noise.spam_prep.apply_vec(spec.rho_vec()));
    let mut rr = Array1::zeros(16);
    for i in 0..4 {
        for j in 0..4 {
            rr[i * 4 + j] = r[i] * r[j];
        }
    }
    let mut e_w = Array1::zeros(4);
    for (x, e) in spec.povm_vecs().iter().enumerate() {
        e_w = e_w + e.mapv(|v| v * weights[x]);
    }
    let u = noise
        .left
        .matrix()
        .t()
        .dot(&noise.spam_meas.matrix().t().dot(&e_w));
    let mut uu = Array1::zeros(16);
    for i in 0..4 {
        for j in 0..4 {
            uu[i * 4 + j] = u[i] * u[j];
        }
    }
    let mut chain = t2.clone();
    for _ in 0..m - 1 {
        chain = t2.dot(&lambda2.dot(&chain));
    }
    Ok(uu.dot(&chain.dot(&rr)))
}

// ---------------------------------------------------------------------------
// Representation-theory identities (validation suite entries)
// ---------------------------------------------------------------------------

/// `<<sigma_1 x sigma_2 | F (W x W)>> = Tr(W sigma_1 W sigma_1) delta_{1,2}`
/// over all normalized Pauli pairs; exact up to float rounding.
pub fn check_swap_expansion_identity(n: usize, w: &PauliString) -> Result<()> {
    let d = 1usize << n;
    let d2 = d * d;
    let norm = 1.0 / d as f64; // normalization of sigma_1 x sigma_2 on C^{d^2}
    let mut f = DenseOperator::zeros(d2)?;
    for i in 0..d {
        for j in 0..d {
            f.entries_mut()[(i * d + j, j * d + i)] = Complex64::new(1.0, 0.0);
        }
    }
    let wd = w.dense();
    let fww = f.matmul(&wd.kron(&wd))?;
    for s1 in 0..d2 {
        let p1 = PauliString::new(index_word(s1, n), 1).unwrap();
        for s2 in 0..d2 {
            let p2 = PauliString::new(index_word(s2, n), 1).unwrap();
            let pair = p1.dense().kron(&p2.dense()).scale(Complex64::new(norm, 0.0));
            let lhs = crate::pauli::hs_inner(&pair, &fww)?;
            let expect = if s1 == s2 {
                let c = if p1.commutes_with(w)? { 1.0 } else { -1.0 };
                c
            } else {
                0.0
            };
            if (lhs - Complex64::new(expect, 0.0)).norm() > 1e-10 {
                return Err(Error::SimulationIntegrity(format!(
                    "swap expansion mismatch at ({s1}, {s2}): {lhs} vs {expect}"
                )));
            }
        }
    }
    Ok(())
}

/// The three product projectors `P_tr x P_tr`, `P_ad x P_tr`, `P_tr x P_ad`
/// are invariant under the doubled twirl `E_g omega^{x2} X (omega^{x2})^T`
/// over the single-qubit group.
pub fn check_projector_product_invariance() -> Result<()> {
    let group = enumerate_single_qubit_clifford();
    let (ptr, pad) = crate::clifford::irrep_projectors(1);
    let ptr = ptr.matrix.to_real(0.0).unwrap();
    let pad = pad.matrix.to_real(0.0).unwrap();
    let cases = [
        ("tr x tr", kron_real(&ptr, &ptr)),
        ("ad x tr", kron_real(&pad, &ptr)),
        ("tr x ad", kron_real(&ptr, &pad)),
    ];
    for (name, x) in &cases {
        let mut twirl = Array2::zeros((16, 16));
        for g in &group {
            let om2 = kron_real(&g.omega_matrix(), &g.omega_matrix());
            twirl = twirl + om2.dot(x).dot(&om2.t());
        }
        twirl.mapv_inplace(|v| v / group.len() as f64);
        let dev = twirl
            .iter()
            .zip(x.iter())
            .map(|(a, b): (&f64, &f64)| (a - b).abs())
            .fold(0.0, f64::max);
        if dev > 1e-12 {
            return Err(Error::SimulationIntegrity(format!(
                "doubled twirl moves {name} by {dev:e}"
            )));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Named validation suite (used by the CLI oracle-check subcommand)
// ---------------------------------------------------------------------------

/// One named assertion of the theory suite.
pub struct OracleCheck {
    pub name: &'static str,
    pub run: fn() -> std::result::Result<(), String>,
}

fn fail(msg: String) -> std::result::Result<(), String> {
    Err(msg)
}

fn suite_projector_completeness() -> std::result::Result<(), String> {
    for n in 1..=3 {
        let (ptr, pad) = crate::clifford::irrep_projectors(n);
        let d2 = 1usize << (2 * n);
        if ptr.rank() != 1 || pad.rank() != d2 - 1 {
            return fail(format!("projector ranks wrong at n = {n}"));
        }
        let sum = ptr.matrix.entries() + pad.matrix.entries();
        for i in 0..d2 {
            for j in 0..d2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                if (sum[(i, j)] - Complex64::new(expect, 0.0)).norm() > 1e-12 {
                    return fail(format!("P_tr + P_ad != 1 at n = {n}"));
                }
            }
        }
    }
    Ok(())
}

fn suite_schur_twirl() -> std::result::Result<(), String> {
    let group = enumerate_single_qubit_clifford();
    let mut rng = crate::rng::purpose_stream(90, crate::rng::Purpose::Test, 0);
    use rand::Rng;
    let m = Array2::from_shape_fn((4, 4), |_| rng.random::<f64>() - 0.5);
    let mut twirl: Array2<f64> = Array2::zeros((4, 4));
    for g in &group {
        let omega = g.omega_matrix();
        twirl = twirl + omega.dot(&m).dot(&omega.t());
    }
    twirl.mapv_inplace(|v| v / group.len() as f64);
    let mut expect: Array2<f64> = Array2::zeros((4, 4));
    expect[(0, 0)] = m[(0, 0)];
    let tr_ad: f64 = (1..4).map(|i| m[(i, i)]).sum();
    for i in 1..4 {
        expect[(i, i)] = tr_ad / 3.0;
    }
    let dev = twirl
        .iter()
        .zip(expect.iter())
        .map(|(a, b): (&f64, &f64)| (a - b).abs())
        .fold(0.0, f64::max);
    if dev > 1e-12 {
        return fail(format!("exhaustive twirl deviates from Schur form by {dev:e}"));
    }
    Ok(())
}

fn suite_swap_expansion() -> std::result::Result<(), String> {
    for (n, w) in [(1, "X"), (1, "Z"), (2, "XI"), (2, "YZ")] {
        check_swap_expansion_identity(n, &PauliString::parse(w).unwrap())
            .map_err(|e| format!("swap expansion failed for W = {w}: {e}"))?;
    }
    Ok(())
}

fn suite_projector_products() -> std::result::Result<(), String> {
    check_projector_product_invariance().map_err(|e| e.to_string())
}

fn suite_corollary_decay() -> std::result::Result<(), String> {
    let z = PauliString::parse("Z").unwrap().dense();
    let x = PauliString::parse("X").unwrap().dense();
    let h = z.add(&x.scale(Complex64::new(0.3, 0.0))).unwrap();
    let u_t = crate::channels::evolve(&h, 0.7).map_err(|e| e.to_string())?;
    let obs = OtocObservables::new(
        PauliString::parse("Y").unwrap(),
        PauliString::parse("X").unwrap(),
    )
    .unwrap();
    let lambda = crate::channels::unitary_channel(&u_t).map_err(|e| e.to_string())?;
    let spec = SequenceSpec::computational(1, 1, Some(lambda.clone()), NoiseModel::noiseless(1))
        .map_err(|e| e.to_string())?;
    let (_, pad) = crate::clifford::irrep_projectors(1);
    let pad = pad.matrix.to_real(0.0).unwrap();
    let twirl = exhaustive_layer_twirl(1, &pad, &otoc_a_matrix(&obs), &lambda, TwirlMode::Independent)
        .map_err(|e| e.to_string())?;
    let boundary = correlator_boundary(&spec);
    let expect = decay_otoc(&u_t, obs.v(), obs.w()).map_err(|e| e.to_string())?;
    let k: Vec<f64> = (1..=4).map(|m| twirl.k_of_m(&boundary, m)).collect();
    for m in 1..4 {
        let ratio = k[m] / k[m - 1];
        if (ratio - expect).abs() > 1e-10 {
            return fail(format!(
                "k({})/k({}) = {ratio} but d O(t) = {expect}",
                m + 1,
                m
            ));
        }
    }
    Ok(())
}

fn suite_theorem1_random_channels() -> std::result::Result<(), String> {
    let mut rng = crate::rng::purpose_stream(91, crate::rng::Purpose::Test, 0);
    let obs = OtocObservables::new(
        PauliString::parse("Y").unwrap(),
        PauliString::parse("X").unwrap(),
    )
    .unwrap();
    let a = otoc_a_matrix(&obs);
    let (_, pad) = crate::clifford::irrep_projectors(1);
    let pad = pad.matrix.to_real(0.0).unwrap();
    for trial in 0..20 {
        let lambda = crate::channels::random::random_channel(1, &mut rng);
        let spec =
            SequenceSpec::computational(1, 1, Some(lambda.clone()), NoiseModel::noiseless(1))
                .map_err(|e| e.to_string())?;
        let twirl = exhaustive_layer_twirl(1, &pad, &a, &lambda, TwirlMode::Independent)
            .map_err(|e| e.to_string())?;
        let boundary = correlator_boundary(&spec);
        let ratio = twirl.k_of_m(&boundary, 2) / twirl.k_of_m(&boundary, 1);
        let scalar = phi_independent_clifford(&a, &lambda).map_err(|e| e.to_string())?;
        if (ratio - scalar).abs() > 1e-10 {
            return fail(format!(
                "trial {trial}: exhaustive ratio {ratio} vs scalar {scalar}"
            ));
        }
    }
    Ok(())
}

fn suite_theorem2_identical() -> std::result::Result<(), String> {
    let mut rng = crate::rng::purpose_stream(92, crate::rng::Purpose::Test, 0);
    for trial in 0..5 {
        let noise = NoiseModel {
            left: crate::channels::depolarizing(0.1, 1).unwrap(),
            right: crate::channels::random::random_channel(1, &mut rng),
            spam_prep: crate::channels::depolarizing(0.2, 1).unwrap(),
            spam_meas: crate::channels::random::random_channel(1, &mut rng),
        };
        let interleave = crate::channels::random::random_channel(1, &mut rng);
        let weights = [1.0, -1.0];
        let spec = SequenceSpec::computational(1, 2, Some(interleave), noise)
            .map_err(|e| e.to_string())?;
        let model = decay_model_unitarity(&spec, &weights).map_err(|e| e.to_string())?;
        for m in 1..=4 {
            let exact = exhaustive_k_identical_weighted(&spec, &weights, m)
                .map_err(|e| e.to_string())?;
            let predicted = model.predict(m);
            if (exact - predicted).abs() > 1e-10 {
                return fail(format!(
                    "trial {trial}, m = {m}: exhaustive {exact} vs model {predicted}"
                ));
            }
        }
    }
    Ok(())
}

fn suite_trivial_pair() -> std::result::Result<(), String> {
    for n in 1..=2 {
        let pair = trivial_pair(n);
        let checks = [
            (crate::pauli::hs_inner(&pair.b1, &pair.b1).unwrap(), 1.0),
            (crate::pauli::hs_inner(&pair.b2, &pair.b2).unwrap(), 1.0),
            (crate::pauli::hs_inner(&pair.b1, &pair.b2).unwrap(), 0.0),
        ];
        for (got, expect) in checks {
            if (got - Complex64::new(expect, 0.0)).norm() > 1e-10 {
                return fail(format!("trivial pair inner product {got} != {expect}"));
            }
        }
        let p = pair.p_tau.to_real(0.0).unwrap();
        let rank: f64 = (0..p.nrows()).map(|i| p[(i, i)]).sum();
        if (rank - 2.0).abs() > 1e-10 {
            return fail(format!("P_tau rank {rank} at n = {n}"));
        }
    }
    Ok(())
}

fn suite_theta_cancellation() -> std::result::Result<(), String> {
    let obs = OtocObservables::new(
        PauliString::parse("Y").unwrap(),
        PauliString::parse("X").unwrap(),
    )
    .unwrap();
    let u_t = crate::channels::evolve(&PauliString::parse("Z").unwrap().dense(), 0.8)
        .map_err(|e| e.to_string())?;
    let lambda = crate::channels::unitary_channel(&u_t).map_err(|e| e.to_string())?;
    let (_, pad) = crate::clifford::irrep_projectors(1);
    let pad = pad.matrix.to_real(0.0).unwrap();
    let a = otoc_a_matrix(&obs);
    let mut ratios = Vec::new();
    for p in [0.0, 0.2, 0.4] {
        let noise = NoiseModel {
            left: Channel::identity(1),
            right: Channel::identity(1),
            spam_prep: crate::channels::depolarizing(p, 1).unwrap(),
            spam_meas: crate::channels::depolarizing(p, 1).unwrap(),
        };
        let spec = SequenceSpec::computational(1, 1, Some(lambda.clone()), noise)
            .map_err(|e| e.to_string())?;
        let twirl = exhaustive_layer_twirl(1, &pad, &a, &lambda, TwirlMode::Independent)
            .map_err(|e| e.to_string())?;
        let boundary = correlator_boundary(&spec);
        ratios.push(twirl.k_of_m(&boundary, 2) / twirl.k_of_m(&boundary, 1));
    }
    for r in &ratios[1..] {
        if (r - ratios[0]).abs() > 1e-10 {
            return fail(format!("SPAM leaked into the ratio: {ratios:?}"));
        }
    }
    Ok(())
}

/// The named theory assertions behind `uirs oracle-check`.
pub fn oracle_suite() -> Vec<OracleCheck> {
    vec![
        OracleCheck {
            name: "projector-completeness",
            run: suite_projector_completeness,
        },
        OracleCheck {
            name: "schur-twirl-exhaustive",
            run: suite_schur_twirl,
        },
        OracleCheck {
            name: "swap-expansion-identity",
            run: suite_swap_expansion,
        },
        OracleCheck {
            name: "projector-product-invariance",
            run: suite_projector_products,
        },
        OracleCheck {
            name: "corollary-decay-ratio",
            run: suite_corollary_decay,
        },
        OracleCheck {
            name: "theorem1-scalar-random-channels",
            run: suite_theorem1_random_channels,
        },
        OracleCheck {
            name: "theorem2-identical-weighted",
            run: suite_theorem2_identical,
        },
        OracleCheck {
            name: "trivial-pair-orthonormality",
            run: suite_trivial_pair,
        },
        OracleCheck {
            name: "theta-cancellation",
            run: suite_theta_cancellation,
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{depolarizing, evolve, random as chrandom, unitary_channel};
    use crate::circuit::SequenceSpec;
    use rand::Rng;
    use crate::rng::{purpose_stream, Purpose};

    fn single_qubit_obs() -> OtocObservables {
        OtocObservables::new(
            PauliString::parse("Y").unwrap(),
            PauliString::parse("X").unwrap(),
        )
        .unwrap()
    }

    fn noiseless_spec_with(interleave: Option<Channel>, m: usize) -> SequenceSpec {
        SequenceSpec::computational(1, m, interleave, NoiseModel::noiseless(1)).unwrap()
    }

    fn adjoint_proj() -> Array2<f64> {
        let (_, pad) = crate::clifford::irrep_projectors(1);
        pad.matrix.to_real(0.0).unwrap()
    }

    #[test]
    fn corollary_decay_ratios_exhaustively() {
        // sigma_z-dominant single-qubit Hamiltonian at t = 0.7
        let z = PauliString::parse("Z").unwrap().dense();
        let x = PauliString::parse("X").unwrap().dense();
        let h = z.add(&x.scale(Complex64::new(0.3, 0.0))).unwrap();
        let u_t = evolve(&h, 0.7).unwrap();
        let obs = single_qubit_obs();
        let lambda = unitary_channel(&u_t).unwrap();
        let spec = noiseless_spec_with(Some(lambda.clone()), 1);

        let twirl = exhaustive_layer_twirl(
            1,
            &adjoint_proj(),
            &otoc_a_matrix(&obs),
            &lambda,
            TwirlMode::Independent,
        )
        .unwrap();
        let boundary = correlator_boundary(&spec);
        let expect = decay_otoc(&u_t, obs.v(), obs.w()).unwrap();
        let k: Vec<f64> = (1..=4).map(|m| twirl.k_of_m(&boundary, m)).collect();
        for m in 1..4 {
            let ratio = k[m] / k[m - 1];
            assert!(
                (ratio - expect).abs() < 1e-10,
                "m = {}: ratio {ratio} vs dO(t) {expect}",
                m + 1
            );
        }
    }

    #[test]
    fn theorem1_scalar_matches_exhaustive_for_random_channels() {
        let mut rng = purpose_stream(60, Purpose::Test, 0);
        let obs = single_qubit_obs();
        let a = otoc_a_matrix(&obs);
        for trial in 0..20 {
            let lambda = chrandom::random_channel(1, &mut rng);
            let spec = noiseless_spec_with(Some(lambda.clone()), 1);
            let twirl =
                exhaustive_layer_twirl(1, &adjoint_proj(), &a, &lambda, TwirlMode::Independent)
                    .unwrap();
            let boundary = correlator_boundary(&spec);
            let k1 = twirl.k_of_m(&boundary, 1);
            let k2 = twirl.k_of_m(&boundary, 2);
            let scalar = phi_independent_clifford(&a, &lambda).unwrap();
            assert!(
                (k2 / k1 - scalar).abs() < 1e-10,
                "trial {trial}: {} vs {scalar}",
                k2 / k1
            );
            // fast rank-one path agrees with the dense contraction
            let fast = phi_otoc(&obs, &lambda).unwrap();
            assert!((fast - scalar).abs() < 1e-10);
        }
    }

    #[test]
    fn theorem1_full_prediction_with_spam_and_gate_noise() {
        let mut rng = purpose_stream(61, Purpose::Test, 0);
        let obs = single_qubit_obs();
        let a = otoc_a_matrix(&obs);
        for _ in 0..5 {
            let noise = NoiseModel {
                left: chrandom::random_channel(1, &mut rng),
                right: depolarizing(0.07, 1).unwrap(),
                spam_prep: chrandom::random_channel(1, &mut rng),
                spam_meas: depolarizing(0.15, 1).unwrap(),
            };
            let interleave = chrandom::random_channel(1, &mut rng);
            let spec =
                SequenceSpec::computational(1, 1, Some(interleave), noise).unwrap();
            let lambda_eff = spec.effective_lambda();
            let twirl = exhaustive_layer_twirl(
                1,
                &adjoint_proj(),
                &a,
                &lambda_eff,
                TwirlMode::Independent,
            )
            .unwrap();
            let boundary = correlator_boundary(&spec);
            let model = decay_model_otoc(&spec, &obs).unwrap();
            assert!(model.is_scalar());
            for m in 1..=4 {
                let exact = twirl.k_of_m(&boundary, m);
                let predicted = model.predict(m);
                assert!(
                    (exact - predicted).abs() < 1e-10,
                    "m = {m}: exhaustive {exact} vs model {predicted}"
                );
            }
        }
    }

    #[test]
    fn theorem2_identical_weighted_matches_exhaustive_and_literal() {
        let mut rng = purpose_stream(62, Purpose::Test, 0);
        for trial in 0..5 {
            let noise = NoiseModel {
                left: depolarizing(0.1, 1).unwrap(),
                right: chrandom::random_channel(1, &mut rng),
                spam_prep: depolarizing(0.2, 1).unwrap(),
                spam_meas: chrandom::random_channel(1, &mut rng),
            };
            let interleave = chrandom::random_channel(1, &mut rng);
            let weights = [1.0, -1.0];
            let spec =
                SequenceSpec::computational(1, 2, Some(interleave), noise).unwrap();
            let model = decay_model_unitarity(&spec, &weights).unwrap();
            for m in 1..=4 {
                let exact = exhaustive_k_identical_weighted(&spec, &weights, m).unwrap();
                let predicted = model.predict(m);
                assert!(
                    (exact - predicted).abs() < 1e-10,
                    "trial {trial} m {m}: exhaustive {exact} vs model {predicted}"
                );
            }
            // literal enumeration over all 576 two-gate sequences at m = 2
            let group = enumerate_single_qubit_clifford();
            let mut acc = 0.0;
            for g1 in &group {
                for g2 in &group {
                    let probs = crate::circuit::outcome_distribution(
                        &spec,
                        &[g1.clone(), g2.clone()],
                    )
                    .unwrap();
                    let e: f64 = probs
                        .iter()
                        .zip(weights.iter())
                        .map(|(p, w)| p * w)
                        .sum();
                    acc += e * e;
                }
            }
            acc /= (group.len() * group.len()) as f64;
            let exact2 = exhaustive_k_identical_weighted(&spec, &weights, 2).unwrap();
            assert!(
                (acc - exact2).abs() < 1e-10,
                "literal {acc} vs twirl {exact2}"
            );
        }
    }

    #[test]
    fn theorem2_eigenvalues_are_one_and_unitarity() {
        let mut rng = purpose_stream(63, Purpose::Test, 0);
        // unital channels: eigenvalues of the 2x2 block are exactly {1, u}
        for _ in 0..5 {
            let lambda = chrandom::random_unital_channel(1, &mut rng);
            let phi = unitarity_phi(&lambda).unwrap();
            let u = crate::channels::unitarity_exact(&lambda).unwrap();
            // phi is triangular for TP input
            assert!(phi[(0, 1)].abs() < 1e-12);
            assert!((phi[(0, 0)] - 1.0).abs() < 1e-12);
            assert!((phi[(1, 1)] - u).abs() < 1e-10);
        }
        // identity and unitary channels
        let id = Channel::identity(1);
        let phi = unitarity_phi(&id).unwrap();
        assert!((phi[(0, 0)] - 1.0).abs() < 1e-14 && (phi[(1, 1)] - 1.0).abs() < 1e-14);
        assert!(phi[(0, 1)].abs() < 1e-14 && phi[(1, 0)].abs() < 1e-14);
        let u = unitary_channel(&chrandom::random_unitary(1, &mut rng)).unwrap();
        let phi = unitarity_phi(&u).unwrap();
        assert!((phi[(1, 1)] - 1.0).abs() < 1e-10);

        for p in [0.1, 0.3] {
            let dep = depolarizing(p, 2).unwrap();
            let phi = unitarity_phi(&dep).unwrap();
            assert!((phi[(1, 1)] - (1.0 - p) * (1.0 - p)).abs() < 1e-12);
        }
    }

    #[test]
    fn nonunital_decay_sits_below_definition_unitarity() {
        // the protocol-visible decay <<B2|L^{x2}|B2>> excludes the non-unital
        // column, so it lower-bounds the definition for non-unital input
        let mut rng = purpose_stream(64, Purpose::Test, 0);
        let mut seen_gap = false;
        for _ in 0..10 {
            let lambda = chrandom::random_channel(1, &mut rng);
            let phi = unitarity_phi(&lambda).unwrap();
            let u = crate::channels::unitarity_exact(&lambda).unwrap();
            assert!(phi[(1, 1)] <= u + 1e-12);
            if u - phi[(1, 1)] > 1e-6 {
                seen_gap = true;
            }
        }
        assert!(seen_gap, "expected at least one strictly non-unital draw");
    }

    #[test]
    fn trivial_pair_orthonormal_rank_two() {
        for n in 1..=2 {
            let pair = trivial_pair(n);
            let b1b1 = crate::pauli::hs_inner(&pair.b1, &pair.b1).unwrap();
            let b2b2 = crate::pauli::hs_inner(&pair.b2, &pair.b2).unwrap();
            let b1b2 = crate::pauli::hs_inner(&pair.b1, &pair.b2).unwrap();
            assert!((b1b1 - Complex64::new(1.0, 0.0)).norm() < 1e-10);
            assert!((b2b2 - Complex64::new(1.0, 0.0)).norm() < 1e-10);
            assert!(b1b2.norm() < 1e-10);
            let p = pair.p_tau.to_real(0.0).unwrap();
            let sq = p.dot(&p);
            let dev = sq
                .iter()
                .zip(p.iter())
                .map(|(a, b): (&f64, &f64)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(dev < 1e-12);
            let rank: f64 = (0..p.nrows()).map(|i| p[(i, i)]).sum();
            assert!((rank - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn trivial_pair_spans_doubled_twirl_fixed_space() {
        // P_tau equals the exhaustive doubled twirl projector E_g omega^{x2}
        let group = enumerate_single_qubit_clifford();
        let mut t2 = Array2::zeros((16, 16));
        for g in &group {
            t2 = t2 + kron_real(&g.omega_matrix(), &g.omega_matrix());
        }
        t2.mapv_inplace(|v| v / group.len() as f64);
        let p = trivial_pair(1).p_tau.to_real(0.0).unwrap();
        let dev = t2
            .iter()
            .zip(p.iter())
            .map(|(a, b): (&f64, &f64)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(dev < 1e-12, "deviation {dev}");
    }

    #[test]
    fn phi_identical_reproduces_unitarity_phi() {
        let mut rng = purpose_stream(65, Purpose::Test, 0);
        let lambda = chrandom::random_channel(1, &mut rng);
        let pair = trivial_pair(1);
        let p = pair.p_tau.to_real(0.0).unwrap();
        // split the rank-2 projector into its two rank-one copies
        let b1 = trivial_vector(4, 0);
        let b2 = trivial_vector(4, 1);
        let rank_one = |v: &Array1<f64>| {
            let mut m = Array2::zeros((16, 16));
            for i in 0..16 {
                for j in 0..16 {
                    m[(i, j)] = v[i] * v[j];
                }
            }
            m
        };
        let p1 = rank_one(&b1);
        let p2 = rank_one(&b2);
        // sanity: they sum to P_tau
        let sum = &p1 + &p2;
        assert!(sum
            .iter()
            .zip(p.iter())
            .all(|(a, b)| (a - b).abs() < 1e-12));

        let a: Array2<f64> = Array2::eye(16);
        let phi = phi_identical(&a, &lambda, &[p1.clone(), p2.clone()]).unwrap();
        let direct = unitarity_phi(&lambda).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!(
                    (phi[(i, j)] - direct[(i, j)]).abs() < 1e-10,
                    "entry ({i},{j}): {} vs {}",
                    phi[(i, j)],
                    direct[(i, j)]
                );
            }
        }
        // identity channel, identity A: identity matrix
        let phi_id = phi_identical(&a, &Channel::identity(1), &[p1.clone(), p2.clone()]).unwrap();
        assert!((phi_id[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((phi_id[(1, 1)] - 1.0).abs() < 1e-12);
        assert!(phi_id[(0, 1)].abs() < 1e-12 && phi_id[(1, 0)].abs() < 1e-12);
        // single projector: 1x1
        let phi_single = phi_identical(&a, &lambda, &[p2]).unwrap();
        assert_eq!(phi_single.dim(), (1, 1));
        assert!((phi_single[(0, 0)] - direct[(1, 1)]).abs() < 1e-12);
        // non-projector input rejected
        let mut bad = p1;
        bad[(3, 3)] = 0.7;
        assert!(phi_identical(&a, &lambda, &[bad]).is_err());
    }

    #[test]
    fn phi_independent_examples_and_support_errors() {
        let (ptr, pad) = crate::clifford::irrep_projectors(1);
        let ptr = ptr.matrix.to_real(0.0).unwrap();
        let pad = pad.matrix.to_real(0.0).unwrap();
        let id = Channel::identity(1);
        // A = P_ad x P_ad with identity channel: trace / (d^2-1)^2 = 1
        let a = kron_real(&pad, &pad);
        assert!((phi_independent_clifford(&a, &id).unwrap() - 1.0).abs() < 1e-12);
        // zero A
        let zero = Array2::zeros((16, 16));
        assert_eq!(phi_independent_clifford(&zero, &id).unwrap(), 0.0);
        // mixed-block A rejected
        let mixed = &kron_real(&pad, &pad) + &kron_real(&ptr, &ptr);
        assert!(phi_independent_clifford(&mixed, &id).is_err());
        // off-diagonal between blocks rejected
        let mut off = Array2::zeros((16, 16));
        off[(0, 5)] = 1.0;
        assert!(phi_independent_clifford(&off, &id).is_err());
    }

    #[test]
    fn decay_otoc_values() {
        // commuting disjoint words at identity: d * 1
        let id = DenseOperator::identity(4).unwrap();
        let v = PauliString::parse("IY").unwrap();
        let w = PauliString::parse("XI").unwrap();
        assert!((decay_otoc(&id, &v, &w).unwrap() - 4.0).abs() < 1e-12);
        // n = 1 anticommuting pair: -2
        let id1 = DenseOperator::identity(2).unwrap();
        assert!(
            (decay_otoc(
                &id1,
                &PauliString::parse("Y").unwrap(),
                &PauliString::parse("X").unwrap()
            )
            .unwrap()
                + 2.0)
                .abs()
                < 1e-12
        );
    }

    #[test]
    fn decay_otoc_matches_block_contraction_for_random_cliffords() {
        let mut rng = purpose_stream(66, Purpose::Test, 0);
        for n in 1..=2 {
            for _ in 0..10 {
                let g = crate::clifford::random_clifford(n, &mut rng).unwrap();
                let u = g.dense_unitary();
                let vi = rng.random_range(1..(1usize << (2 * n)));
                let wi = rng.random_range(1..(1usize << (2 * n)));
                let v = PauliString::new(index_word(vi, n), 1).unwrap();
                let w = PauliString::new(index_word(wi, n), 1).unwrap();
                let obs = OtocObservables::new(v.clone(), w.clone()).unwrap();
                let lambda = unitary_channel(u).unwrap();
                let via_contraction =
                    phi_independent_clifford(&otoc_a_matrix(&obs), &lambda).unwrap();
                let via_otoc = decay_otoc(u, &v, &w).unwrap();
                assert!(
                    (via_contraction - via_otoc).abs() < 1e-10,
                    "n={n}: {via_contraction} vs {via_otoc}"
                );
            }
        }
    }

    #[test]
    fn swap_expansion_identity_small_systems() {
        for n in 1..=2 {
            // a couple of W choices per size
            let picks: Vec<PauliString> = if n == 1 {
                vec![
                    PauliString::parse("X").unwrap(),
                    PauliString::parse("Z").unwrap(),
                ]
            } else {
                vec![
                    PauliString::parse("XI").unwrap(),
                    PauliString::parse("YZ").unwrap(),
                ]
            };
            for w in picks {
                check_swap_expansion_identity(n, &w).unwrap();
            }
        }
    }

    #[test]
    fn projector_products_invariant_under_doubled_twirl() {
        check_projector_product_invariance().unwrap();
    }

    #[test]
    fn identity_layer_is_idempotent_for_trivial_a() {
        // Lambda = identity and A = identity on the tau pair: the layer is
        // the bare projector T, which is idempotent
        let a: Array2<f64> = Array2::eye(16);
        let full: Array2<f64> = Array2::eye(4);
        let twirl = exhaustive_layer_twirl(
            1,
            &full,
            &a,
            &Channel::identity(1),
            TwirlMode::Independent,
        )
        .unwrap();
        let sq = twirl.layer.dot(&twirl.layer);
        let dev = sq
            .iter()
            .zip(twirl.layer.iter())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(dev < 1e-12);
    }

    #[test]
    fn theta_model_matches_exhaustive_k1() {
        // noiseless single-qubit spec: Theta = (1/36) exactly
        let spec = noiseless_spec_with(None, 1);
        let theta = theta_otoc(&spec);
        assert!((theta - 1.0 / 36.0).abs() < 1e-12);
    }

    #[test]
    fn oracle_suite_all_green() {
        for check in oracle_suite() {
            (check.run)().unwrap_or_else(|e| panic!("{} failed: {e}", check.name));
        }
    }
}
