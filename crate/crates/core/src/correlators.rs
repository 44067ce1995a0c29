//! Sequence correlation functions and their estimators: the two-sample
//! U-statistic over independent sequences (OTOC pipeline), the
//! squared-expectation correlator over identical sequences (unitarity
//! pipeline), the first-order correlator used for cross-checks, and the
//! statistical-correlation baseline.
//!
//! Post-processing always uses the nominal `rho` and `E_x`; noise enters
//! only through the stored outcome data. That asymmetry is the point: the
//! decay-rate estimates must not move when SPAM noise is turned on.

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use crate::channels::NoiseModel;
use crate::circuit::{DataMode, SequenceSpec, ShadowRecord};
use crate::clifford::CliffordElement;
use crate::error::{Error, Result};
use crate::oracles::OtocObservables;
use crate::pauli::{index_word, DenseOperator, PauliString};
use crate::rng::{purpose_stream, Purpose};

/// Complete-pair evaluation is abandoned above this many ordered pairs and
/// replaced by deterministic incomplete-U sampling (m >= 3 only; the m <= 2
/// paths are algebraically linear in the record count).
const PAIR_CAP: usize = 40_000_000;

/// Outcome weights defining the measured observable `E_w = sum_x w_x E_x`
/// of the identical-sequence protocol.
#[derive(Clone, Debug)]
pub struct OutcomeWeights {
    values: Vec<f64>,
    degenerate: bool,
}

impl OutcomeWeights {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument(
                "outcome weights must be finite and nonempty".into(),
            ));
        }
        let degenerate = values.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-12);
        Ok(Self { values, degenerate })
    }

    /// Default observable: `+-1` by the first outcome bit, i.e. `Z` on
    /// qubit 1.
    pub fn z_first_qubit(n: usize) -> Self {
        let d = 1usize << n;
        let values = (0..d)
            .map(|x| if (x >> (n - 1)) & 1 == 0 { 1.0 } else { -1.0 })
            .collect();
        Self {
            values,
            degenerate: false,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// All weights equal: the correlator is a constant and carries no
    /// decay signal.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }
}

/// `(m, k_hat(m), stderr)` triples with run metadata.
#[derive(Clone, Debug)]
pub struct EstimateSeries {
    points: Vec<(usize, f64, f64)>,
    pub meta: SeriesMeta,
}

#[derive(Clone, Debug)]
pub struct SeriesMeta {
    pub s: usize,
    pub n_batches: usize,
    pub r: usize,
    pub mode: DataMode,
}

impl EstimateSeries {
    pub fn new(points: Vec<(usize, f64, f64)>, meta: SeriesMeta) -> Result<Self> {
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidArgument(
                "sequence lengths must be strictly increasing".into(),
            ));
        }
        if points.iter().any(|&(_, _, s)| s < 0.0) {
            return Err(Error::InvalidArgument("negative stderr".into()));
        }
        Ok(Self { points, meta })
    }

    pub fn points(&self) -> &[(usize, f64, f64)] {
        &self.points
    }
}

/// U-statistic estimate with its jackknife standard error.
#[derive(Clone, Debug)]
pub struct KhatEstimate {
    pub value: f64,
    pub stderr: f64,
    /// False when the pair sum was subsampled (incomplete U-statistic).
    pub complete: bool,
}

// ---------------------------------------------------------------------------
// Correlation functions
// ---------------------------------------------------------------------------

/// Commutation signs of `W` against every basis word (`+1` on the identity).
fn commute_signs(w: &PauliString) -> Vec<f64> {
    let n = w.n();
    (0..1usize << (2 * n))
        .map(|s| {
            let sigma = PauliString::new(index_word(s, n), 1).unwrap();
            if sigma.commutes_with(w).unwrap() {
                1.0
            } else {
                -1.0
            }
        })
        .collect()
}

/// Scatter a coefficient vector through the forward conjugation of `g`:
/// `out = vec(g(Op))` given `v = vec(Op)`.
fn conjugate_scatter(g: &CliffordElement, v: &Array1<f64>) -> Array1<f64> {
    let perm = g.conj_perm();
    let mut out = Array1::zeros(v.len());
    for (j, &(k, s)) in perm.iter().enumerate() {
        if v[j] != 0.0 {
            out[k] += s as f64 * v[j];
        }
    }
    out
}

/// `Tr(P rho)` for a signed unnormalized Pauli via the state's coefficient
/// vector.
fn trace_with_state(p: &PauliString, state: &Array1<f64>) -> f64 {
    let d = 1usize << p.n();
    p.sign() as f64 * (d as f64).sqrt() * state[p.basis_index()]
}

/// Middle-layer factor `Tr(W a W b)` for signed unnormalized Paulis `a`,
/// `b`: zero unless the words agree, else `+- d`. The signed form (not a
/// bare Kronecker delta) is what the dense-trace oracle confirms.
fn middle_factor(w_signs: &[f64], d: usize, a: &PauliString, b: &PauliString) -> f64 {
    if a.word() != b.word() {
        return 0.0;
    }
    let idx = a.basis_index();
    (a.sign() * b.sign()) as f64 * w_signs[idx] * d as f64
}

/// Fast evaluation of the second-order OTOC correlation function for one
/// ordered pair of sequences and one outcome pair `(x, y)`.
///
/// `m = 1`: `(Tr(E_x g1(rho)) - Tr E_x / d)(Tr(E_y g2(rho)) - Tr E_y / d)`.
/// `m >= 2`: `(d^2-1)^{2(m-1)} prod_{i=2}^{m-1} Tr(W g1_i(V) W g2_i(V))
///   * (Tr(W g1_m(E_x) W g2_m(E_y)) - Tr E_x Tr E_y / d)
///   * Tr(g1_1(V) rho) Tr(g2_1(V) rho)`,
/// all conjugations symbolic.
pub fn f_otoc_fast(
    x: usize,
    y: usize,
    g1: &[CliffordElement],
    g2: &[CliffordElement],
    obs: &OtocObservables,
    spec: &SequenceSpec,
) -> Result<f64> {
    let m = g1.len();
    if m == 0 || g2.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "sequence lengths {} vs {}",
            m,
            g2.len()
        )));
    }
    if obs.n() != spec.n() {
        return Err(Error::DimensionMismatch("observable qubit count".into()));
    }
    let d = spec.d();
    let rho = spec.rho_vec();
    let ex = &spec.povm_vecs()[x];
    let ey = &spec.povm_vecs()[y];
    let tr_ex = (d as f64).sqrt() * ex[0];
    let tr_ey = (d as f64).sqrt() * ey[0];

    if m == 1 {
        let p1 = ex.dot(&g1[0].apply_omega(rho));
        let p2 = ey.dot(&g2[0].apply_omega(rho));
        return Ok((p1 - tr_ex / d as f64) * (p2 - tr_ey / d as f64));
    }

    let w_signs = commute_signs(obs.w());
    let mut t_product = 1.0;
    for i in 1..m - 1 {
        let a = g1[i].conjugate(obs.v())?;
        let b = g2[i].conjugate(obs.v())?;
        t_product *= middle_factor(&w_signs, d, &a, &b);
        if t_product == 0.0 {
            return Ok(0.0);
        }
    }
    let fx = conjugate_scatter(&g1[m - 1], ex);
    let fy = conjugate_scatter(&g2[m - 1], ey);
    let edge: f64 = (0..fx.len()).map(|s| w_signs[s] * fx[s] * fy[s]).sum();
    let w1a = trace_with_state(&g1[0].conjugate(obs.v())?, rho);
    let w1b = trace_with_state(&g2[0].conjugate(obs.v())?, rho);
    let d2m1 = ((d * d - 1) as f64).powi(2 * (m as i32 - 1));
    Ok(d2m1 * t_product * (edge - tr_ex * tr_ey / d as f64) * w1a * w1b)
}

/// Rank-one boundary operator `B_xy = |rho>><<E_x| x |rho>><<E_y|` on the
/// doubled Liouville space.
pub fn otoc_bxy(spec: &SequenceSpec, x: usize, y: usize) -> Array2<f64> {
    let rho = spec.rho_vec();
    let ex = &spec.povm_vecs()[x];
    let ey = &spec.povm_vecs()[y];
    let d2 = rho.len();
    let mut b = Array2::zeros((d2 * d2, d2 * d2));
    for i1 in 0..d2 {
        for i2 in 0..d2 {
            let r = rho[i1] * rho[i2];
            if r == 0.0 {
                continue;
            }
            for j1 in 0..d2 {
                for j2 in 0..d2 {
                    b[(i1 * d2 + i2, j1 * d2 + j2)] = r * ex[j1] * ey[j2];
                }
            }
        }
    }
    b
}

/// Literal matrix-product form of the second-order correlation function:
/// `Tr(B_xy [tau(g1_m) x tau(g2_m)] prod_{i=m-1}^{1} A [tau(g1_i) x tau(g2_i)])`
/// with `tau` the adjoint representation. Reference implementation; `A`
/// must be supported on the adjoint-product block.
pub fn f_general_trace(
    g1: &[CliffordElement],
    g2: &[CliffordElement],
    a: &Array2<f64>,
    b_xy: &Array2<f64>,
) -> Result<f64> {
    let m = g1.len();
    if m == 0 || g2.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "sequence lengths {} vs {}",
            m,
            g2.len()
        )));
    }
    let n = g1[0].n();
    let d2 = 1usize << (2 * n);
    let dim = d2 * d2;
    if a.dim() != (dim, dim) || b_xy.dim() != (dim, dim) {
        return Err(Error::DimensionMismatch("A or B_xy size".into()));
    }
    // support precondition: A = (P_ad x P_ad) A (P_ad x P_ad)
    let mut max_violation = 0.0f64;
    for i in 0..dim {
        for j in 0..dim {
            let v = a[(i, j)].abs();
            if v > max_violation
                && (i / d2 == 0 || i % d2 == 0 || j / d2 == 0 || j % d2 == 0)
            {
                max_violation = v;
            }
        }
    }
    if max_violation > 1e-9 {
        return Err(Error::UnsupportedBlock(format!(
            "A has weight {max_violation:e} outside the adjoint-product block"
        )));
    }
    let tau2 = |g_a: &CliffordElement, g_b: &CliffordElement| -> Array2<f64> {
        let mut oa = g_a.omega_matrix();
        let mut ob = g_b.omega_matrix();
        for k in 0..d2 {
            oa[(0, k)] = 0.0;
            oa[(k, 0)] = 0.0;
            ob[(0, k)] = 0.0;
            ob[(k, 0)] = 0.0;
        }
        crate::channels::kron_real(&oa, &ob)
    };
    let mut chain = tau2(&g1[m - 1], &g2[m - 1]);
    for i in (0..m - 1).rev() {
        chain = chain.dot(a).dot(&tau2(&g1[i], &g2[i]));
    }
    let prod = b_xy.dot(&chain);
    Ok((0..dim).map(|i| prod[(i, i)]).sum())
}

// ---------------------------------------------------------------------------
// Independent-sequence U-statistic
// ---------------------------------------------------------------------------

/// Per-record summaries from which every pair value is assembled.
struct RecordSummary {
    /// m = 1 factor `sum_x q(x) (p_nom(x) - Tr E_x / d)`.
    alpha: f64,
    /// `Tr(g_1(V) rho)` (m >= 2).
    w1: f64,
    /// `vec(g_m(E_bar))` with `E_bar` the outcome-weighted nominal POVM
    /// element (m >= 2).
    f_vec: Array1<f64>,
    /// Trace of the weighted POVM element (m >= 2).
    tr_e: f64,
    /// `g_i(V)` for the middle layers `i = 2..=m-1`.
    chain: Vec<PauliString>,
}

fn summarize_record(
    record: &ShadowRecord,
    obs: &OtocObservables,
    spec: &SequenceSpec,
    mode: DataMode,
) -> Result<RecordSummary> {
    let m = record.gates.len();
    let d = spec.d();
    let d2 = d * d;
    let rho = spec.rho_vec();
    // outcome weighting: exact distribution or the single counted shot
    let outcome_weight: Vec<(usize, f64)> = match mode {
        DataMode::Exact => {
            let probs = record.exact_probs.as_ref().ok_or_else(|| {
                Error::NotEnoughData("EXACT mode requires stored distributions".into())
            })?;
            probs.iter().cloned().enumerate().collect()
        }
        DataMode::Shots => {
            let x = *record.outcomes.first().ok_or_else(|| {
                Error::NotEnoughData("SHOTS mode requires at least one outcome".into())
            })?;
            vec![(x, 1.0)]
        }
    };

    if m == 1 {
        let propagated = record.gates[0].apply_omega(rho);
        let mut alpha = 0.0;
        for &(x, q) in &outcome_weight {
            let ex = &spec.povm_vecs()[x];
            let tr_ex = (d as f64).sqrt() * ex[0];
            alpha += q * (ex.dot(&propagated) - tr_ex / d as f64);
        }
        return Ok(RecordSummary {
            alpha,
            w1: 0.0,
            f_vec: Array1::zeros(0),
            tr_e: 0.0,
            chain: Vec::new(),
        });
    }

    let w1 = trace_with_state(&record.gates[0].conjugate(obs.v())?, rho);
    let mut e_bar = Array1::zeros(d2);
    let mut tr_e = 0.0;
    for &(x, q) in &outcome_weight {
        let ex = &spec.povm_vecs()[x];
        if q == 0.0 {
            continue;
        }
        e_bar = e_bar + ex.mapv(|v| v * q);
        tr_e += q * (d as f64).sqrt() * ex[0];
    }
    let f_vec = conjugate_scatter(&record.gates[m - 1], &e_bar);
    let chain = record.gates[1..m - 1]
        .iter()
        .map(|g| g.conjugate(obs.v()))
        .collect::<Result<Vec<_>>>()?;
    Ok(RecordSummary {
        alpha: 0.0,
        w1,
        f_vec,
        tr_e,
        chain,
    })
}

fn jackknife_stderr(full_sum: f64, row_sums: &[f64], s: usize) -> f64 {
    // delete-one U-statistic values from the total and per-record row sums
    let denom = ((s - 1) * (s - 2)) as f64;
    let leave_outs: Vec<f64> = row_sums
        .iter()
        .map(|r| (full_sum - r) / denom)
        .collect();
    let mean = leave_outs.iter().sum::<f64>() / s as f64;
    let var: f64 = leave_outs.iter().map(|v| (v - mean) * (v - mean)).sum();
    ((s - 1) as f64 / s as f64 * var).sqrt()
}

/// Two-sample U-statistic `1/(S(S-1)) sum_{i != j} f(x_i, x_j, g^i, g^j)`
/// of the OTOC correlation function, with jackknife standard error.
///
/// `m <= 2` runs in O(S d^2) via bilinear factorization of the pair sum;
/// `m >= 3` enumerates pairs, falling back to deterministic incomplete-U
/// subsampling above [`PAIR_CAP`].
pub fn khat_independent(
    records: &[ShadowRecord],
    m: usize,
    obs: &OtocObservables,
    spec: &SequenceSpec,
    mode: DataMode,
) -> Result<KhatEstimate> {
    let s = records.len();
    if s < 2 {
        return Err(Error::NotEnoughData(
            "U-statistic needs at least two records".into(),
        ));
    }
    if records.iter().any(|r| r.gates.len() != m) {
        return Err(Error::DimensionMismatch(
            "record sequence length differs from m".into(),
        ));
    }
    let summaries: Vec<RecordSummary> = records
        .par_iter()
        .map(|r| summarize_record(r, obs, spec, mode))
        .collect::<Result<Vec<_>>>()?;
    let d = spec.d();
    let sf = s as f64;

    if m == 1 {
        let t1: f64 = summaries.iter().map(|r| r.alpha).sum();
        let t2: f64 = summaries.iter().map(|r| r.alpha * r.alpha).sum();
        let full = t1 * t1 - t2;
        let rows: Vec<f64> = summaries
            .iter()
            .map(|r| 2.0 * r.alpha * (t1 - r.alpha))
            .collect();
        return Ok(KhatEstimate {
            value: full / (sf * (sf - 1.0)),
            stderr: jackknife_stderr(full, &rows, s),
            complete: true,
        });
    }

    if m == 2 {
        let w_signs = commute_signs(obs.w());
        let scale = ((d * d - 1) as f64).powi(2);
        let d2 = d * d;
        let mut g_acc = Array1::<f64>::zeros(d2);
        let mut sq_acc = Array1::<f64>::zeros(d2);
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for r in &summaries {
            let u = r.f_vec.mapv(|v| v * r.w1);
            sq_acc = sq_acc + u.mapv(|v| v * v);
            g_acc = g_acc + u;
            let t = r.w1 * r.tr_e;
            s1 += t;
            s2 += t * t;
        }
        let edge_sum: f64 = (0..d2)
            .map(|sig| w_signs[sig] * (g_acc[sig] * g_acc[sig] - sq_acc[sig]))
            .sum();
        let full = scale * (edge_sum - (s1 * s1 - s2) / d as f64);
        let rows: Vec<f64> = summaries
            .iter()
            .map(|r| {
                let t = r.w1 * r.tr_e;
                let cross: f64 = (0..d2)
                    .map(|sig| {
                        let u = r.w1 * r.f_vec[sig];
                        w_signs[sig] * u * (g_acc[sig] - u)
                    })
                    .sum();
                2.0 * scale * (cross - t * (s1 - t) / d as f64)
            })
            .collect();
        return Ok(KhatEstimate {
            value: full / (sf * (sf - 1.0)),
            stderr: jackknife_stderr(full, &rows, s),
            complete: true,
        });
    }

    // m >= 3: explicit pair evaluation
    let w_signs = commute_signs(obs.w());
    let scale = ((d * d - 1) as f64).powi(2 * (m as i32 - 1));
    let pair_value = |a: &RecordSummary, b: &RecordSummary| -> f64 {
        let mut t_product = 1.0;
        for (pa, pb) in a.chain.iter().zip(b.chain.iter()) {
            t_product *= middle_factor(&w_signs, d, pa, pb);
            if t_product == 0.0 {
                return 0.0;
            }
        }
        let edge: f64 = (0..a.f_vec.len())
            .map(|sig| w_signs[sig] * a.f_vec[sig] * b.f_vec[sig])
            .sum();
        scale * t_product * (edge - a.tr_e * b.tr_e / d as f64) * a.w1 * b.w1
    };

    let total_pairs = s * (s - 1);
    if total_pairs <= PAIR_CAP {
        let rows: Vec<f64> = (0..s)
            .into_par_iter()
            .map(|i| {
                let mut acc = 0.0;
                for j in 0..s {
                    if j != i {
                        // f is symmetric under record exchange
                        acc += 2.0 * pair_value(&summaries[i], &summaries[j]);
                    }
                }
                acc
            })
            .collect();
        let full: f64 = rows.iter().sum::<f64>() / 2.0;
        Ok(KhatEstimate {
            value: full / (sf * (sf - 1.0)),
            stderr: jackknife_stderr(full, &rows, s),
            complete: true,
        })
    } else {
        // deterministic incomplete U-statistic: sample ~ 4 S ln S unordered
        // pairs from a fixed substream
        let target = (4.0 * sf * sf.ln()).ceil() as usize;
        let mut rng = purpose_stream(0xC0FFEE ^ s as u64, Purpose::Test, m as u64);
        use rand::Rng;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut count = 0usize;
        for _ in 0..target {
            let i = rng.random_range(0..s);
            let mut j = rng.random_range(0..s - 1);
            if j >= i {
                j += 1;
            }
            let v = pair_value(&summaries[i], &summaries[j]);
            sum += v;
            sum_sq += v * v;
            count += 1;
        }
        let mean = sum / count as f64;
        let var = (sum_sq / count as f64 - mean * mean).max(0.0);
        Ok(KhatEstimate {
            value: mean,
            stderr: (var / count as f64).sqrt(),
            complete: false,
        })
    }
}

/// Complete U-statistic of an arbitrary symmetric pair function, with
/// jackknife standard error. Reference path for tests and custom kernels.
pub fn khat_independent_generic<F>(records: &[ShadowRecord], f: F) -> Result<KhatEstimate>
where
    F: Fn(&ShadowRecord, &ShadowRecord) -> Result<f64> + Sync,
{
    let s = records.len();
    if s < 2 {
        return Err(Error::NotEnoughData(
            "U-statistic needs at least two records".into(),
        ));
    }
    let rows: Vec<f64> = (0..s)
        .map(|i| -> Result<f64> {
            let mut acc = 0.0;
            for j in 0..s {
                if j != i {
                    acc += f(&records[i], &records[j])? + f(&records[j], &records[i])?;
                }
            }
            Ok(acc / 2.0)
        })
        .collect::<Result<Vec<_>>>()?;
    // every ordered pair counted once across rows after halving
    let full: f64 = rows.iter().sum();
    let sf = s as f64;
    Ok(KhatEstimate {
        value: full / (sf * (sf - 1.0)),
        stderr: jackknife_stderr(full, &rows.iter().map(|r| 2.0 * r).collect::<Vec<_>>(), s),
        complete: true,
    })
}

/// Ratio estimator for the OTOC: batch `i` contributes
/// `x_i = k_hat(2) / (d k_hat(1))`; returns the batch mean, its standard
/// error, and the batch values.
#[derive(Clone, Debug)]
pub struct RatioEstimate {
    pub xbar: f64,
    pub stderr: f64,
    pub batch_values: Vec<f64>,
}

pub fn otoc_ratio_estimate(
    records_m1: &[ShadowRecord],
    records_m2: &[ShadowRecord],
    n_batches: usize,
    obs: &OtocObservables,
    spec: &SequenceSpec,
    mode: DataMode,
) -> Result<RatioEstimate> {
    if n_batches == 0 {
        return Err(Error::InvalidArgument("need at least one batch".into()));
    }
    if records_m1.is_empty() || records_m2.is_empty() {
        return Err(Error::NotEnoughData("empty record set".into()));
    }
    if records_m1.len() % n_batches != 0 || records_m2.len() % n_batches != 0 {
        return Err(Error::InvalidArgument(format!(
            "record counts {} and {} are not divisible into {n_batches} batches",
            records_m1.len(),
            records_m2.len()
        )));
    }
    let b1 = records_m1.len() / n_batches;
    let b2 = records_m2.len() / n_batches;
    let d = spec.d() as f64;
    let batch_values: Vec<f64> = (0..n_batches)
        .map(|i| -> Result<f64> {
            let k1 = khat_independent(&records_m1[i * b1..(i + 1) * b1], 1, obs, spec, mode)?;
            let k2 = khat_independent(&records_m2[i * b2..(i + 1) * b2], 2, obs, spec, mode)?;
            if k1.value.abs() < 1e-14 {
                return Err(Error::DegenerateDenominator {
                    batch: i,
                    magnitude: k1.value.abs(),
                });
            }
            Ok(k2.value / (d * k1.value))
        })
        .collect::<Result<Vec<_>>>()?;
    let nf = n_batches as f64;
    let xbar = batch_values.iter().sum::<f64>() / nf;
    let stderr = if n_batches > 1 {
        let var: f64 = batch_values
            .iter()
            .map(|x| (x - xbar) * (x - xbar))
            .sum::<f64>()
            / (nf - 1.0);
        (var / nf).sqrt()
    } else {
        0.0
    };
    Ok(RatioEstimate {
        xbar,
        stderr,
        batch_values,
    })
}

/// Streaming form of [`otoc_ratio_estimate`]: batches of `s` fresh records
/// per sequence length are sampled, reduced to `k_hat` values, and dropped,
/// so arbitrarily large `s * n_batches` runs stay in bounded memory.
///
/// Record substreams advance from `index_offset`; the next free offset is
/// returned so successive sweep points stay disjoint. An optional sink
/// receives every record for file export.
#[allow(clippy::too_many_arguments)]
pub fn otoc_ratio_streaming(
    spec_m1: &SequenceSpec,
    spec_m2: &SequenceSpec,
    obs: &OtocObservables,
    s: usize,
    n_batches: usize,
    r: usize,
    mode: DataMode,
    master_seed: u64,
    index_offset: u64,
    mut sink: Option<&mut dyn FnMut(&[ShadowRecord]) -> Result<()>>,
) -> Result<(RatioEstimate, u64)> {
    if n_batches == 0 || s < 2 {
        return Err(Error::InvalidArgument(
            "need at least one batch of two records".into(),
        ));
    }
    let d = spec_m1.d() as f64;
    let mut offset = index_offset;
    let mut batch_values = Vec::with_capacity(n_batches);
    for batch in 0..n_batches {
        let recs1 = crate::circuit::sample_shadows(spec_m1, s, r, mode, master_seed, offset)?;
        offset += s as u64;
        let recs2 = crate::circuit::sample_shadows(spec_m2, s, r, mode, master_seed, offset)?;
        offset += s as u64;
        if let Some(f) = sink.as_deref_mut() {
            f(&recs1)?;
            f(&recs2)?;
        }
        let k1 = khat_independent(&recs1, 1, obs, spec_m1, mode)?;
        let k2 = khat_independent(&recs2, 2, obs, spec_m2, mode)?;
        if k1.value.abs() < 1e-14 {
            return Err(Error::DegenerateDenominator {
                batch,
                magnitude: k1.value.abs(),
            });
        }
        batch_values.push(k2.value / (d * k1.value));
    }
    let nf = n_batches as f64;
    let xbar = batch_values.iter().sum::<f64>() / nf;
    let stderr = if n_batches > 1 {
        let var: f64 = batch_values
            .iter()
            .map(|x| (x - xbar) * (x - xbar))
            .sum::<f64>()
            / (nf - 1.0);
        (var / nf).sqrt()
    } else {
        0.0
    };
    Ok((
        RatioEstimate {
            xbar,
            stderr,
            batch_values,
        },
        offset,
    ))
}

// ---------------------------------------------------------------------------
// Identical-sequence correlator (unitarity)
// ---------------------------------------------------------------------------

/// Per-sequence unbiased square of the weighted expectation, averaged over
/// records: EXACT uses `(sum_x w_x p(x|g))^2`, SHOTS the two-shot
/// U-statistic `1/(r(r-1)) sum_{a != b} w_{x_a} w_{x_b}`.
pub fn khat_identical_unitarity(
    records: &[ShadowRecord],
    weights: &OutcomeWeights,
    mode: DataMode,
) -> Result<(f64, f64)> {
    if records.is_empty() {
        return Err(Error::NotEnoughData("no records".into()));
    }
    let values: Vec<f64> = records
        .iter()
        .map(|r| -> Result<f64> {
            match mode {
                DataMode::Exact => {
                    let probs = r.exact_probs.as_ref().ok_or_else(|| {
                        Error::NotEnoughData("EXACT mode requires stored distributions".into())
                    })?;
                    if probs.len() != weights.values().len() {
                        return Err(Error::DimensionMismatch("weights vs outcomes".into()));
                    }
                    let e: f64 = probs
                        .iter()
                        .zip(weights.values())
                        .map(|(p, w)| p * w)
                        .sum();
                    Ok(e * e)
                }
                DataMode::Shots => {
                    let r_shots = r.outcomes.len();
                    if r_shots < 2 {
                        return Err(Error::NotEnoughData(
                            "SHOTS mode needs r >= 2 shots per sequence".into(),
                        ));
                    }
                    let t1: f64 = r.outcomes.iter().map(|&x| weights.values()[x]).sum();
                    let t2: f64 = r
                        .outcomes
                        .iter()
                        .map(|&x| weights.values()[x] * weights.values()[x])
                        .sum();
                    Ok((t1 * t1 - t2) / (r_shots * (r_shots - 1)) as f64)
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let s = values.len() as f64;
    let mean = values.iter().sum::<f64>() / s;
    let stderr = if values.len() > 1 {
        let var: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (s - 1.0);
        (var / s).sqrt()
    } else {
        0.0
    };
    Ok((mean, stderr))
}

// ---------------------------------------------------------------------------
// First-order correlator (cross-check path)
// ---------------------------------------------------------------------------

/// First-order sample mean
/// `k_hat(m) = 1/S sum_i f_A(x_i, g^i, m)` with
/// `f_A(x, g, m) = <<E_x| tau(g_m) prod_{i<m} [A tau(g_i)] |rho>>`,
/// `tau` the adjoint representation and `A` a fixed matrix on it.
pub fn khat_linear(
    records: &[ShadowRecord],
    a: &Array2<f64>,
    spec: &SequenceSpec,
    mode: DataMode,
) -> Result<(f64, f64)> {
    if records.is_empty() {
        return Err(Error::NotEnoughData("no records".into()));
    }
    let d2 = 1usize << (2 * spec.n());
    if a.dim() != (d2, d2) {
        return Err(Error::DimensionMismatch("A size".into()));
    }
    let values: Vec<f64> = records
        .iter()
        .map(|r| -> Result<f64> {
            let m = r.gates.len();
            let mut v = spec.rho_vec().clone();
            for (i, g) in r.gates.iter().enumerate() {
                v[0] = 0.0;
                v = g.apply_omega(&v);
                v[0] = 0.0;
                if i + 1 < m {
                    v = a.dot(&v);
                }
            }
            match mode {
                DataMode::Exact => {
                    let probs = r.exact_probs.as_ref().ok_or_else(|| {
                        Error::NotEnoughData("EXACT mode requires stored distributions".into())
                    })?;
                    Ok(probs
                        .iter()
                        .enumerate()
                        .map(|(x, p)| p * spec.povm_vecs()[x].dot(&v))
                        .sum())
                }
                DataMode::Shots => {
                    let x = *r.outcomes.first().ok_or_else(|| {
                        Error::NotEnoughData("SHOTS mode requires an outcome".into())
                    })?;
                    Ok(spec.povm_vecs()[x].dot(&v))
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let s = values.len() as f64;
    let mean = values.iter().sum::<f64>() / s;
    let stderr = if values.len() > 1 {
        let var: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (s - 1.0);
        (var / s).sqrt()
    } else {
        0.0
    };
    Ok((mean, stderr))
}

/// First-order decay rate `Tr_ad(A^T Lambda) / (d^2 - 1)` (scalar form).
pub fn phi_linear(a: &Array2<f64>, lambda: &crate::channels::Channel) -> f64 {
    let d2 = lambda.matrix().nrows();
    let mut tr = 0.0;
    for i in 1..d2 {
        for j in 1..d2 {
            tr += a[(i, j)] * lambda.matrix()[(i, j)];
        }
    }
    tr / (d2 - 1) as f64
}

/// First-order SPAM boundary scalar (single factor of [`crate::oracles::theta_otoc`]).
pub fn theta_linear(spec: &SequenceSpec) -> f64 {
    crate::oracles::theta_otoc(spec).sqrt()
}

// ---------------------------------------------------------------------------
// Statistical-correlation baseline
// ---------------------------------------------------------------------------

/// OTOC estimate by statistical correlations of expectation values over
/// random global Clifford states: draws `g`, prepares the noisy state
/// `g(spam_prep(rho))`, and correlates `<W>` after `U_t` with `<W>` after
/// `V` then `U_t`, normalized by the ideal second moment `1/(d+1)`.
///
/// The fixed normalization is what makes this baseline SPAM-sensitive.
pub fn baseline_statistical_otoc(
    u_t: &DenseOperator,
    obs: &OtocObservables,
    noise: &NoiseModel,
    s: usize,
    master_seed: u64,
) -> Result<f64> {
    if s < 2 {
        return Err(Error::NotEnoughData("need at least two samples".into()));
    }
    let n = u_t.qubits();
    if obs.n() != n || noise.n() != n {
        return Err(Error::DimensionMismatch("baseline qubit counts".into()));
    }
    let d = 1usize << n;
    let ut_channel = crate::channels::unitary_channel(u_t)?;
    // nominal rho = |0..0><0..0|
    let mut rho = DenseOperator::zeros(d)?;
    rho.entries_mut()[(0, 0)] = num_complex::Complex64::new(1.0, 0.0);
    let rho_vec = crate::pauli::vectorize(&rho).to_real(1e-12)?;
    let v_signs = commute_signs(obs.v());
    let w_idx = obs.w().basis_index();
    let w_sign = obs.w().sign() as f64;
    let sqrt_d = (d as f64).sqrt();

    let products: Vec<f64> = (0..s)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let mut rng = purpose_stream(master_seed, Purpose::Baseline, i as u64);
            let g = crate::clifford::random_clifford(n, &mut rng)?;
            let state = g.apply_omega(&noise.spam_prep.apply_vec(&rho_vec));
            // branch 1: evolve, noisy measurement of W
            let out1 = noise.spam_meas.apply_vec(&ut_channel.apply_vec(&state));
            let m1 = sqrt_d * w_sign * out1[w_idx];
            // branch 2: apply V as a gate, then the same pipeline
            let mut state2 = state.clone();
            for (sig, c) in v_signs.iter().enumerate() {
                state2[sig] *= c;
            }
            let out2 = noise.spam_meas.apply_vec(&ut_channel.apply_vec(&state2));
            let m2 = sqrt_d * w_sign * out2[w_idx];
            Ok(m1 * m2)
        })
        .collect::<Result<Vec<_>>>()?;
    let mean = products.iter().sum::<f64>() / s as f64;
    Ok((d as f64 + 1.0) * mean)
}
