//! Dense operators, the normalized Pauli basis, vectorization, and the
//! Pauli-Liouville (transfer-matrix) representation of channels.
//!
//! Basis convention used throughout the crate: the `4^n` Pauli words are
//! indexed in base 4 with digit order `(I, X, Y, Z) = (0, 1, 2, 3)` and
//! qubit 0 as the most significant digit, so index 0 is the identity word.
//! Vectorization coefficients are taken against the *normalized* Paulis
//! `sigma_i / sqrt(d)`, which form an orthonormal basis of the operator
//! space under `<A, B> = Tr(A^dag B)`.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Single-qubit Pauli symbol.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    /// Base-4 digit of the symbol.
    pub fn digit(self) -> usize {
        match self {
            Pauli::I => 0,
            Pauli::X => 1,
            Pauli::Y => 2,
            Pauli::Z => 3,
        }
    }

    /// Inverse of [`Pauli::digit`].
    pub fn from_digit(d: usize) -> Self {
        match d & 3 {
            0 => Pauli::I,
            1 => Pauli::X,
            2 => Pauli::Y,
            _ => Pauli::Z,
        }
    }

    pub fn from_char(c: char) -> Result<Self> {
        match c {
            'I' => Ok(Pauli::I),
            'X' => Ok(Pauli::X),
            'Y' => Ok(Pauli::Y),
            'Z' => Ok(Pauli::Z),
            other => Err(Error::InvalidArgument(format!(
                "unknown Pauli symbol '{other}'"
            ))),
        }
    }

    pub fn to_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn commutes_with(self, other: Pauli) -> bool {
        self == Pauli::I || other == Pauli::I || self == other
    }

    /// Product `self * other = i^k * symbol`; returns `(k mod 4, symbol)`.
    pub fn mul(self, other: Pauli) -> (u8, Pauli) {
        use Pauli::*;
        match (self, other) {
            (I, p) | (p, I) => (0, p),
            (X, X) | (Y, Y) | (Z, Z) => (0, I),
            (X, Y) => (1, Z),
            (Y, X) => (3, Z),
            (Y, Z) => (1, X),
            (Z, Y) => (3, X),
            (Z, X) => (1, Y),
            (X, Z) => (3, Y),
        }
    }
}

/// Signed (unnormalized) n-qubit Pauli word.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    word: Vec<Pauli>,
    sign: i8,
}

impl PauliString {
    /// Build from a word and a sign in `{+1, -1}`.
    pub fn new(word: Vec<Pauli>, sign: i8) -> Result<Self> {
        if sign != 1 && sign != -1 {
            return Err(Error::InvalidArgument(format!(
                "Pauli sign must be +1 or -1, got {sign}"
            )));
        }
        if word.is_empty() {
            return Err(Error::InvalidArgument("empty Pauli word".into()));
        }
        Ok(Self { word, sign })
    }

    /// Identity word on `n` qubits.
    pub fn identity(n: usize) -> Self {
        Self {
            word: vec![Pauli::I; n],
            sign: 1,
        }
    }

    /// Single nontrivial symbol at `site` (0-based), identity elsewhere.
    pub fn single(n: usize, site: usize, p: Pauli) -> Result<Self> {
        if site >= n {
            return Err(Error::InvalidArgument(format!(
                "site {site} out of range for {n} qubits"
            )));
        }
        let mut word = vec![Pauli::I; n];
        word[site] = p;
        Ok(Self { word, sign: 1 })
    }

    /// Parse `"XZI"`, `"+XZI"` or `"-XZI"`.
    pub fn parse(s: &str) -> Result<Self> {
        let (sign, rest) = match s.strip_prefix('-') {
            Some(rest) => (-1, rest),
            None => (1, s.strip_prefix('+').unwrap_or(s)),
        };
        let word = rest.chars().map(Pauli::from_char).collect::<Result<_>>()?;
        Self::new(word, sign)
    }

    pub fn n(&self) -> usize {
        self.word.len()
    }

    pub fn word(&self) -> &[Pauli] {
        &self.word
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    pub fn negated(&self) -> Self {
        Self {
            word: self.word.clone(),
            sign: -self.sign,
        }
    }

    pub fn with_sign(&self, sign: i8) -> Self {
        Self {
            word: self.word.clone(),
            sign,
        }
    }

    pub fn is_identity_word(&self) -> bool {
        self.word.iter().all(|&p| p == Pauli::I)
    }

    /// Number of non-identity sites.
    pub fn weight(&self) -> usize {
        self.word.iter().filter(|&&p| p != Pauli::I).count()
    }

    /// Base-4 index of the (unsigned) word.
    pub fn basis_index(&self) -> usize {
        word_index(&self.word)
    }

    pub fn commutes_with(&self, other: &PauliString) -> Result<bool> {
        if self.n() != other.n() {
            return Err(Error::DimensionMismatch(format!(
                "Pauli words on {} vs {} qubits",
                self.n(),
                other.n()
            )));
        }
        let anti = self
            .word
            .iter()
            .zip(&other.word)
            .filter(|(a, b)| !a.commutes_with(**b))
            .count();
        Ok(anti % 2 == 0)
    }

    /// Product `self * other` with full phase tracking.
    pub fn mul(&self, other: &PauliString) -> Result<PhasedPauli> {
        if self.n() != other.n() {
            return Err(Error::DimensionMismatch(format!(
                "Pauli words on {} vs {} qubits",
                self.n(),
                other.n()
            )));
        }
        let mut phase: u8 = 0;
        let word = self
            .word
            .iter()
            .zip(&other.word)
            .map(|(&a, &b)| {
                let (k, c) = a.mul(b);
                phase = (phase + k) & 3;
                c
            })
            .collect();
        if self.sign * other.sign == -1 {
            phase = (phase + 2) & 3;
        }
        Ok(PhasedPauli { phase, word })
    }

    /// Dense matrix of the signed word.
    pub fn dense(&self) -> DenseOperator {
        let n = self.n();
        let d = 1usize << n;
        let mut entries = Array2::zeros((d, d));
        let sign = Complex64::new(self.sign as f64, 0.0);
        for col in 0..d {
            let (row, val) = pauli_column_action(&self.word, col);
            entries[(row, col)] = sign * val;
        }
        DenseOperator { dim: d, entries }
    }
}

impl std::fmt::Display for PauliString {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", if self.sign >= 0 { '+' } else { '-' })?;
        for p in &self.word {
            write!(f, "{}", p.to_char())?;
        }
        Ok(())
    }
}

/// Pauli word with phase `i^k`; intermediate result of products.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhasedPauli {
    /// Exponent of `i`, mod 4.
    pub phase: u8,
    pub word: Vec<Pauli>,
}

impl PhasedPauli {
    /// Collapse to a signed word; errors if the phase is imaginary.
    pub fn into_signed(self) -> Result<PauliString> {
        let sign = match self.phase {
            0 => 1,
            2 => -1,
            _ => {
                return Err(Error::InvalidArgument(
                    "Pauli product has imaginary phase; not a signed Hermitian word".into(),
                ))
            }
        };
        Ok(PauliString {
            word: self.word,
            sign,
        })
    }

    pub fn mul_string(&self, other: &PauliString) -> Result<PhasedPauli> {
        let lhs = PauliString {
            word: self.word.clone(),
            sign: 1,
        };
        let mut out = lhs.mul(other)?;
        out.phase = (out.phase + self.phase) & 3;
        Ok(out)
    }
}

/// Action of an (unsigned) Pauli word on computational basis state `col`:
/// returns the target row and the amplitude.
pub(crate) fn pauli_column_action(word: &[Pauli], col: usize) -> (usize, Complex64) {
    let n = word.len();
    let mut row = col;
    let mut val = Complex64::new(1.0, 0.0);
    for (k, &p) in word.iter().enumerate() {
        // qubit 0 is the most significant bit
        let bit = (col >> (n - 1 - k)) & 1;
        match p {
            Pauli::I => {}
            Pauli::X => row ^= 1 << (n - 1 - k),
            Pauli::Y => {
                row ^= 1 << (n - 1 - k);
                val *= if bit == 0 {
                    Complex64::new(0.0, 1.0)
                } else {
                    Complex64::new(0.0, -1.0)
                };
            }
            Pauli::Z => {
                if bit == 1 {
                    val = -val;
                }
            }
        }
    }
    (row, val)
}

/// Base-4 index of a word (qubit 0 most significant).
pub fn word_index(word: &[Pauli]) -> usize {
    word.iter().fold(0, |acc, p| (acc << 2) | p.digit())
}

/// Inverse of [`word_index`].
pub fn index_word(index: usize, n: usize) -> Vec<Pauli> {
    (0..n)
        .map(|k| Pauli::from_digit((index >> (2 * (n - 1 - k))) & 3))
        .collect()
}

/// Dense complex matrix on `d = 2^n` dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator {
    dim: usize,
    entries: Array2<Complex64>,
}

impl DenseOperator {
    pub fn new(entries: Array2<Complex64>) -> Result<Self> {
        let (r, c) = entries.dim();
        if r != c {
            return Err(Error::DimensionMismatch(format!("{r}x{c} matrix")));
        }
        if !r.is_power_of_two() {
            return Err(Error::InvalidDimension(r));
        }
        Ok(Self { dim: r, entries })
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        if !dim.is_power_of_two() {
            return Err(Error::InvalidDimension(dim));
        }
        Ok(Self {
            dim,
            entries: Array2::zeros((dim, dim)),
        })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        if !dim.is_power_of_two() {
            return Err(Error::InvalidDimension(dim));
        }
        Ok(Self {
            dim,
            entries: Array2::eye(dim),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn qubits(&self) -> usize {
        self.dim.trailing_zeros() as usize
    }

    pub fn entries(&self) -> &Array2<Complex64> {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.entries
    }

    pub fn into_entries(self) -> Array2<Complex64> {
        self.entries
    }

    pub fn dagger(&self) -> DenseOperator {
        DenseOperator {
            dim: self.dim,
            entries: self.entries.t().mapv(|z| z.conj()),
        }
    }

    pub fn matmul(&self, other: &DenseOperator) -> Result<DenseOperator> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(format!(
                "{} vs {}",
                self.dim, other.dim
            )));
        }
        Ok(DenseOperator {
            dim: self.dim,
            entries: self.entries.dot(&other.entries),
        })
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.diag().sum()
    }

    pub fn scale(&self, c: Complex64) -> DenseOperator {
        DenseOperator {
            dim: self.dim,
            entries: self.entries.mapv(|z| z * c),
        }
    }

    pub fn add(&self, other: &DenseOperator) -> Result<DenseOperator> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(format!(
                "{} vs {}",
                self.dim, other.dim
            )));
        }
        Ok(DenseOperator {
            dim: self.dim,
            entries: &self.entries + &other.entries,
        })
    }

    pub fn sub(&self, other: &DenseOperator) -> Result<DenseOperator> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(format!(
                "{} vs {}",
                self.dim, other.dim
            )));
        }
        Ok(DenseOperator {
            dim: self.dim,
            entries: &self.entries - &other.entries,
        })
    }

    pub fn max_abs_diff(&self, other: &DenseOperator) -> f64 {
        self.entries
            .iter()
            .zip(other.entries.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        for i in 0..self.dim {
            for j in i..self.dim {
                if (self.entries[(i, j)] - self.entries[(j, i)].conj()).norm() > tol {
                    return false;
                }
            }
        }
        true
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        let prod = self.dagger().entries.dot(&self.entries);
        let eye: Array2<Complex64> = Array2::eye(self.dim);
        prod.iter()
            .zip(eye.iter())
            .all(|(a, b)| (a - b).norm() <= tol)
    }

    /// Kronecker product.
    pub fn kron(&self, other: &DenseOperator) -> DenseOperator {
        let da = self.dim;
        let db = other.dim;
        let mut entries = Array2::zeros((da * db, da * db));
        for ia in 0..da {
            for ja in 0..da {
                let a = self.entries[(ia, ja)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for ib in 0..db {
                    for jb in 0..db {
                        entries[(ia * db + ib, ja * db + jb)] = a * other.entries[(ib, jb)];
                    }
                }
            }
        }
        DenseOperator {
            dim: da * db,
            entries,
        }
    }
}

/// Vector of coefficients in the normalized Pauli basis.
#[derive(Clone, Debug, PartialEq)]
pub struct LiouvilleVector {
    dim: usize,
    coeffs: Array1<Complex64>,
}

impl LiouvilleVector {
    pub fn new(coeffs: Array1<Complex64>) -> Result<Self> {
        let dim = coeffs.len();
        if !dim.is_power_of_two() {
            return Err(Error::InvalidDimension(dim));
        }
        Ok(Self { dim, coeffs })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coeffs(&self) -> &Array1<Complex64> {
        &self.coeffs
    }

    /// Real part of the coefficients; errors if any imaginary part exceeds `tol`.
    /// Hermitian operators always pass: their Pauli coefficients are real.
    pub fn to_real(&self, tol: f64) -> Result<Array1<f64>> {
        let max_im = self.coeffs.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        if max_im > tol {
            return Err(Error::InvalidArgument(format!(
                "Liouville vector has imaginary parts up to {max_im:e}"
            )));
        }
        Ok(self.coeffs.mapv(|z| z.re))
    }
}

/// Matrix in the normalized Pauli basis (`d^2 x d^2`).
#[derive(Clone, Debug, PartialEq)]
pub struct LiouvilleMatrix {
    dim: usize,
    entries: Array2<Complex64>,
}

impl LiouvilleMatrix {
    pub fn new(entries: Array2<Complex64>) -> Result<Self> {
        let (r, c) = entries.dim();
        if r != c {
            return Err(Error::DimensionMismatch(format!("{r}x{c} matrix")));
        }
        if !r.is_power_of_two() {
            return Err(Error::InvalidDimension(r));
        }
        Ok(Self { dim: r, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &Array2<Complex64> {
        &self.entries
    }

    pub fn to_real(&self, tol: f64) -> Result<Array2<f64>> {
        let max_im = self.entries.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        if max_im > tol {
            return Err(Error::InvalidArgument(format!(
                "Liouville matrix has imaginary parts up to {max_im:e}"
            )));
        }
        Ok(self.entries.mapv(|z| z.re))
    }
}

/// Dense matrix of a signed Pauli word.
pub fn pauli_dense(p: &PauliString) -> DenseOperator {
    p.dense()
}

/// Coefficients `Tr(sigma_i^dag O)` of `O` against the normalized Pauli basis.
pub fn vectorize(op: &DenseOperator) -> LiouvilleVector {
    let d = op.dim();
    let n = op.qubits();
    let norm = 1.0 / (d as f64).sqrt();
    let mut coeffs = Array1::zeros(d * d);
    for i in 0..d * d {
        let word = index_word(i, n);
        // Tr(P_i O) summed over the d nonzero entries of P_i
        let mut tr = Complex64::new(0.0, 0.0);
        for col in 0..d {
            let (row, val) = pauli_column_action(&word, col);
            // P_i is Hermitian: (P_i)_{col,row} = conj((P_i)_{row,col})
            tr += val.conj() * op.entries()[(row, col)];
        }
        coeffs[i] = tr * norm;
    }
    LiouvilleVector {
        dim: d * d,
        coeffs,
    }
}

/// Inverse of [`vectorize`].
pub fn devectorize(v: &LiouvilleVector) -> Result<DenseOperator> {
    let d2 = v.dim();
    let d = (d2 as f64).sqrt() as usize;
    if d * d != d2 || !d.is_power_of_two() {
        return Err(Error::InvalidDimension(d2));
    }
    let n = d.trailing_zeros() as usize;
    let norm = 1.0 / (d as f64).sqrt();
    let mut entries = Array2::zeros((d, d));
    for i in 0..d2 {
        let c = v.coeffs[i] * norm;
        if c == Complex64::new(0.0, 0.0) {
            continue;
        }
        let word = index_word(i, n);
        for col in 0..d {
            let (row, val) = pauli_column_action(&word, col);
            entries[(row, col)] += c * val;
        }
    }
    Ok(DenseOperator { dim: d, entries })
}

/// Hilbert-Schmidt inner product `Tr(A^dag B)`.
pub fn hs_inner(a: &DenseOperator, b: &DenseOperator) -> Result<Complex64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(a.entries()
        .iter()
        .zip(b.entries().iter())
        .map(|(x, y)| x.conj() * y)
        .sum())
}

/// Transfer matrix of a linear map on operators: entry `(i, j)` is
/// `Tr(sigma_i apply(sigma_j))` over normalized Paulis. Composition of maps
/// becomes matrix multiplication of the results.
pub fn channel_to_liouville<F>(apply: F, n: usize) -> LiouvilleMatrix
where
    F: Fn(&DenseOperator) -> DenseOperator,
{
    let d = 1usize << n;
    let norm = 1.0 / (d as f64).sqrt();
    let mut entries = Array2::zeros((d * d, d * d));
    for j in 0..d * d {
        let word = index_word(j, n);
        let mut sigma = PauliString { word, sign: 1 }.dense();
        sigma
            .entries_mut()
            .mapv_inplace(|z| z * Complex64::new(norm, 0.0));
        let out = apply(&sigma);
        let col = vectorize(&out);
        for i in 0..d * d {
            entries[(i, j)] = col.coeffs[i];
        }
    }
    LiouvilleMatrix {
        dim: d * d,
        entries,
    }
}
