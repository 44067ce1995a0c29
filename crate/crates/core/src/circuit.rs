//! Density-matrix simulation of random gate sequences intertwined with a
//! fixed channel, outcome distributions, and shadow-record sampling.
//!
//! States are propagated as real coefficient vectors in the normalized
//! Pauli basis (the `d^2 x d^2` sequence product is never materialized).
//! Probabilities always use the noisy state, gates, and measurement; the
//! nominal `rho` and `E_x` are reserved for correlator post-processing.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{Channel, NoiseModel};
use crate::clifford::{random_clifford, CliffordElement};
use crate::error::{Error, Result};
use crate::pauli::{vectorize, DenseOperator, PauliString};
use crate::rng::{purpose_stream, Purpose};

/// Tolerance below which negative probabilities are clamped to zero;
/// anything more negative is a simulation-integrity error.
const PROB_CLAMP: f64 = 1e-12;

/// Whether estimators consume exact outcome distributions or sampled shots.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DataMode {
    Exact,
    Shots,
}

/// Fixed experimental arrangement: sequence length, interleaved channel,
/// noise model, input state, and POVM.
#[derive(Clone, Debug)]
pub struct SequenceSpec {
    n: usize,
    m: usize,
    interleave: Option<Channel>,
    noise: NoiseModel,
    rho: DenseOperator,
    povm: Vec<DenseOperator>,
    computational_povm: bool,
    // precomputed vectors
    rho_vec: Array1<f64>,
    noisy_rho_vec: Array1<f64>,
    povm_vecs: Vec<Array1<f64>>,
}

impl SequenceSpec {
    /// Nominal arrangement: `rho = |0...0><0...0|`, computational-basis POVM.
    pub fn computational(
        n: usize,
        m: usize,
        interleave: Option<Channel>,
        noise: NoiseModel,
    ) -> Result<Self> {
        let d = 1usize << n;
        let mut rho = DenseOperator::zeros(d)?;
        rho.entries_mut()[(0, 0)] = Complex64::new(1.0, 0.0);
        let povm = (0..d)
            .map(|x| {
                let mut e = DenseOperator::zeros(d).unwrap();
                e.entries_mut()[(x, x)] = Complex64::new(1.0, 0.0);
                e
            })
            .collect();
        Self::new(n, m, interleave, noise, rho, povm, true)
    }

    /// Fully custom arrangement.
    pub fn custom(
        n: usize,
        m: usize,
        interleave: Option<Channel>,
        noise: NoiseModel,
        rho: DenseOperator,
        povm: Vec<DenseOperator>,
    ) -> Result<Self> {
        Self::new(n, m, interleave, noise, rho, povm, false)
    }

    #[allow(clippy::too_many_arguments)]
    fn new(
        n: usize,
        m: usize,
        interleave: Option<Channel>,
        noise: NoiseModel,
        rho: DenseOperator,
        povm: Vec<DenseOperator>,
        computational_povm: bool,
    ) -> Result<Self> {
        let d = 1usize << n;
        if m == 0 {
            return Err(Error::InvalidArgument("sequence length m must be >= 1".into()));
        }
        if rho.dim() != d {
            return Err(Error::DimensionMismatch(format!(
                "rho dimension {} for n = {n}",
                rho.dim()
            )));
        }
        if let Some(ch) = &interleave {
            if ch.n() != n {
                return Err(Error::DimensionMismatch(
                    "interleave channel qubit count".into(),
                ));
            }
        }
        if noise.n() != n {
            return Err(Error::DimensionMismatch("noise model qubit count".into()));
        }
        noise.validate()?;
        // rho positive with unit trace
        if (rho.trace().re - 1.0).abs() > 1e-10 || rho.trace().im.abs() > 1e-10 {
            return Err(Error::InvalidArgument("rho must have unit trace".into()));
        }
        if !rho.is_hermitian(1e-10) {
            return Err(Error::NotHermitian("rho".into()));
        }
        let (evals, _) = crate::linalg::eigh(&rho)?;
        if evals.iter().any(|&w| w < -1e-10) {
            return Err(Error::InvalidArgument("rho is not positive".into()));
        }
        // POVM elements positive, summing to the identity
        let mut sum = DenseOperator::zeros(d)?;
        for e in &povm {
            if e.dim() != d {
                return Err(Error::DimensionMismatch("POVM element dimension".into()));
            }
            if !e.is_hermitian(1e-10) {
                return Err(Error::NotHermitian("POVM element".into()));
            }
            let (evals, _) = crate::linalg::eigh(e)?;
            if evals.iter().any(|&w| w < -1e-10) {
                return Err(Error::InvalidArgument("POVM element is not positive".into()));
            }
            sum = sum.add(e)?;
        }
        if sum.max_abs_diff(&DenseOperator::identity(d)?) > 1e-10 {
            return Err(Error::InvalidArgument(
                "POVM elements do not sum to the identity".into(),
            ));
        }

        let rho_vec = vectorize(&rho).to_real(1e-10)?;
        let noisy_rho_vec = noise.spam_prep.apply_vec(&rho_vec);
        let povm_vecs = povm
            .iter()
            .map(|e| vectorize(e).to_real(1e-10))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n,
            m,
            interleave,
            noise,
            rho,
            povm,
            computational_povm,
            rho_vec,
            noisy_rho_vec,
            povm_vecs,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        1 << self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn with_m(&self, m: usize) -> Result<Self> {
        let mut out = self.clone();
        if m == 0 {
            return Err(Error::InvalidArgument("sequence length m must be >= 1".into()));
        }
        out.m = m;
        Ok(out)
    }

    pub fn interleave(&self) -> Option<&Channel> {
        self.interleave.as_ref()
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn rho(&self) -> &DenseOperator {
        &self.rho
    }

    pub fn povm(&self) -> &[DenseOperator] {
        &self.povm
    }

    pub fn has_computational_povm(&self) -> bool {
        self.computational_povm
    }

    /// Nominal input state as a real Pauli-coefficient vector.
    pub fn rho_vec(&self) -> &Array1<f64> {
        &self.rho_vec
    }

    pub fn povm_vecs(&self) -> &[Array1<f64>] {
        &self.povm_vecs
    }

    /// Effective channel between consecutive ideal gates:
    /// `Lambda_R * interleave * Lambda_L` (matrix order).
    pub fn effective_lambda(&self) -> Channel {
        let rl = Channel::compose(&self.noise.right, &self.noise.left).unwrap();
        match &self.interleave {
            None => rl,
            Some(ch) => Channel::compose(
                &self.noise.right,
                &Channel::compose(ch, &self.noise.left).unwrap(),
            )
            .unwrap(),
        }
    }
}

/// One experiment round: a gate sequence with its measurement data.
#[derive(Clone, Debug, PartialEq)]
pub struct ShadowRecord {
    pub gates: Vec<CliffordElement>,
    pub outcomes: Vec<usize>,
    pub exact_probs: Option<Vec<f64>>,
}

impl ShadowRecord {
    pub fn m(&self) -> usize {
        self.gates.len()
    }
}

/// Exact outcome distribution of one gate sequence under the spec's noise:
/// `p(x) = <<E_x spam_meas| prod_i [L_L omega(g_i) L_R] (interleaved) |spam_prep rho>>`.
pub fn outcome_distribution(spec: &SequenceSpec, gates: &[CliffordElement]) -> Result<Vec<f64>> {
    if gates.len() != spec.m {
        return Err(Error::DimensionMismatch(format!(
            "{} gates for sequence length {}",
            gates.len(),
            spec.m
        )));
    }
    let mut state = spec.noisy_rho_vec.clone();
    for (i, g) in gates.iter().enumerate() {
        if g.n() != spec.n {
            return Err(Error::DimensionMismatch("gate qubit count".into()));
        }
        if i > 0 {
            if let Some(ch) = &spec.interleave {
                state = ch.apply_vec(&state);
            }
        }
        state = spec.noise.right.apply_vec(&state);
        state = g.apply_omega(&state);
        state = spec.noise.left.apply_vec(&state);
    }
    state = spec.noise.spam_meas.apply_vec(&state);

    let mut probs = Vec::with_capacity(spec.povm_vecs.len());
    for e in &spec.povm_vecs {
        let p = e.dot(&state);
        if p < -PROB_CLAMP {
            return Err(Error::SimulationIntegrity(format!(
                "outcome probability {p:e} below clamp threshold"
            )));
        }
        probs.push(p.max(0.0));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-8 {
        return Err(Error::SimulationIntegrity(format!(
            "outcome distribution sums to {total}"
        )));
    }
    for p in probs.iter_mut() {
        *p /= total;
    }
    Ok(probs)
}

/// Draw `s` records with independently sampled gate sequences and `r` shots
/// each; in EXACT mode the full noisy distribution is stored as well.
///
/// Record `i` draws from substreams `(master_seed, Gates/Outcomes,
/// index_offset + i)`, so output is independent of worker count and
/// scheduling; `index_offset` keeps batches disjoint.
pub fn sample_shadows(
    spec: &SequenceSpec,
    s: usize,
    r: usize,
    mode: DataMode,
    master_seed: u64,
    index_offset: u64,
) -> Result<Vec<ShadowRecord>> {
    if s < 1 {
        return Err(Error::NotEnoughData("need at least one sequence".into()));
    }
    if r < 1 {
        return Err(Error::NotEnoughData("need at least one shot".into()));
    }
    (0..s)
        .into_par_iter()
        .map(|i| {
            let idx = index_offset + i as u64;
            let mut gate_rng = purpose_stream(master_seed, Purpose::Gates, idx);
            let gates = (0..spec.m)
                .map(|_| random_clifford(spec.n, &mut gate_rng))
                .collect::<Result<Vec<_>>>()?;
            let probs = outcome_distribution(spec, &gates)?;
            let mut outcome_rng = purpose_stream(master_seed, Purpose::Outcomes, idx);
            let outcomes = (0..r)
                .map(|_| sample_outcome(&probs, &mut outcome_rng))
                .collect();
            Ok(ShadowRecord {
                gates,
                outcomes,
                exact_probs: match mode {
                    DataMode::Exact => Some(probs),
                    DataMode::Shots => None,
                },
            })
        })
        .collect()
}

fn sample_outcome<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (x, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return x;
        }
    }
    probs.len() - 1
}

// ---------------------------------------------------------------------------
// Record file format: line-delimited JSON
// ---------------------------------------------------------------------------

/// Wire form of a record: `gates` is one entry per gate, each a list of
/// `2n` signed Pauli rows (X images then Z images), e.g. `"-XZI"`.
#[derive(Serialize, Deserialize)]
struct RecordWire {
    gates: Vec<Vec<String>>,
    outcomes: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    probs: Option<Vec<f64>>,
}

/// Serialize one record to its JSON line.
pub fn record_to_json(record: &ShadowRecord) -> Result<String> {
    let gates = record
        .gates
        .iter()
        .map(|g| g.tableau_rows().map(|p| p.to_string()).collect())
        .collect();
    let wire = RecordWire {
        gates,
        outcomes: record.outcomes.clone(),
        probs: record.exact_probs.clone(),
    };
    Ok(serde_json::to_string(&wire)?)
}

/// Parse one JSON line into a record.
pub fn record_from_json(line: &str) -> Result<ShadowRecord> {
    let wire: RecordWire = serde_json::from_str(line)?;
    let gates = wire
        .gates
        .iter()
        .map(|rows| {
            if rows.len() % 2 != 0 || rows.is_empty() {
                return Err(Error::MalformedRecord(format!(
                    "tableau needs 2n rows, got {}",
                    rows.len()
                )));
            }
            let n = rows.len() / 2;
            let parsed = rows
                .iter()
                .map(|s| PauliString::parse(s))
                .collect::<Result<Vec<_>>>()?;
            let (x_rows, z_rows) = parsed.split_at(n);
            CliffordElement::from_tableau(x_rows.to_vec(), z_rows.to_vec())
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(probs) = &wire.probs {
        if probs.iter().any(|&p| p < 0.0) {
            return Err(Error::MalformedRecord("negative probability".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-8 {
            return Err(Error::MalformedRecord(format!(
                "probabilities sum to {total}"
            )));
        }
    }
    Ok(ShadowRecord {
        gates,
        outcomes: wire.outcomes,
        exact_probs: wire.probs,
    })
}

/// Write records as line-delimited JSON.
pub fn write_records<W: std::io::Write>(out: &mut W, records: &[ShadowRecord]) -> Result<()> {
    for r in records {
        writeln!(out, "{}", record_to_json(r)?)?;
    }
    Ok(())
}

/// Read records from line-delimited JSON.
pub fn read_records<Rd: std::io::BufRead>(input: Rd) -> Result<Vec<ShadowRecord>> {
    let mut records = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(record_from_json(&line)?);
    }
    Ok(records)
}

/// Full Liouville product of the interleaved sequence (reference path for
/// the interleave-equivalence check; O(d^6), tests only).
pub fn sequence_liouville(spec: &SequenceSpec, gates: &[CliffordElement]) -> Array2<f64> {
    let d2 = 1usize << (2 * spec.n);
    let mut acc: Array2<f64> = Array2::eye(d2);
    for (i, g) in gates.iter().enumerate() {
        if i > 0 {
            if let Some(ch) = &spec.interleave {
                acc = ch.matrix().dot(&acc);
            }
        }
        acc = spec.noise.right.matrix().dot(&acc);
        acc = g.omega_matrix().dot(&acc);
        acc = spec.noise.left.matrix().dot(&acc);
    }
    acc
}
