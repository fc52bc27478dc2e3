//! Generalized Pauli basis and the coherence-vector encoding of density matrices.
//!
//! The basis is `{I,X,Y,Z}^{⊗n}` in lexicographic order with `I < X < Y < Z`
//! and qubit 1 as the leftmost (most significant) factor. Coefficients use the
//! normalization `r_k = Tr(ρ B_k) / 2^n`, so that
//! `ρ = I/2^n + Σ_{k≥1} r_k B_k`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

pub const MAX_QUBITS: usize = 4;

/// Serialized tag for the basis ordering used in every file format.
pub const ORDER_TAG: &str = "lex-IXYZ";

const C0: Complex64 = Complex64::new(0.0, 0.0);
const C1: Complex64 = Complex64::new(1.0, 0.0);
const CI: Complex64 = Complex64::new(0.0, 1.0);

/// Single-qubit Pauli factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    fn from_code(code: usize) -> Self {
        Self::ALL[code]
    }

    pub fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    /// Column of the single nonzero in row `row` and its value.
    fn row_entry(self, row: usize) -> (usize, Complex64) {
        match (self, row) {
            (Pauli::I, r) => (r, C1),
            (Pauli::X, r) => (1 - r, C1),
            (Pauli::Y, 0) => (1, -CI),
            (Pauli::Y, _) => (0, CI),
            (Pauli::Z, 0) => (0, C1),
            (Pauli::Z, _) => (1, -C1),
        }
    }
}

/// A Pauli string stored in monomial form: row `i` has its single nonzero
/// entry `phase[i]` in column `col[i]`.
#[derive(Debug, Clone)]
pub struct PauliString {
    factors: Vec<Pauli>,
    col: Vec<usize>,
    phase: Vec<Complex64>,
}

impl PauliString {
    fn new(factors: Vec<Pauli>) -> Self {
        let n = factors.len();
        let dim = 1usize << n;
        let mut col = vec![0; dim];
        let mut phase = vec![C1; dim];
        for row in 0..dim {
            let mut c = 0usize;
            let mut ph = C1;
            for (q, p) in factors.iter().enumerate() {
                let bit = (row >> (n - 1 - q)) & 1;
                let (cb, v) = p.row_entry(bit);
                c |= cb << (n - 1 - q);
                ph *= v;
            }
            col[row] = c;
            phase[row] = ph;
        }
        Self { factors, col, phase }
    }

    pub fn factors(&self) -> &[Pauli] {
        &self.factors
    }

    pub fn label(&self) -> String {
        self.factors.iter().map(|p| p.symbol()).collect()
    }

    pub fn to_matrix(&self) -> CMatrix {
        let dim = self.col.len();
        let mut m = CMatrix::zeros(dim, dim);
        for (row, (&c, &ph)) in self.col.iter().zip(&self.phase).enumerate() {
            m[(row, c)] = ph;
        }
        m
    }

    /// `Tr(B m)` in O(dim).
    pub fn trace_with(&self, m: &CMatrix) -> Complex64 {
        self.col
            .iter()
            .zip(&self.phase)
            .enumerate()
            .map(|(row, (&c, &ph))| ph * m[(c, row)])
            .sum()
    }

    /// `B m`, exploiting the monomial structure.
    pub fn left_mul(&self, m: &CMatrix) -> CMatrix {
        let dim = self.col.len();
        let mut out = CMatrix::zeros(dim, m.ncols());
        for row in 0..dim {
            let ph = self.phase[row];
            let src = self.col[row];
            for j in 0..m.ncols() {
                out[(row, j)] = ph * m[(src, j)];
            }
        }
        out
    }

    /// `m B`.
    pub fn right_mul(&self, m: &CMatrix) -> CMatrix {
        let dim = self.col.len();
        let mut out = CMatrix::zeros(m.nrows(), dim);
        // (m B)_{i,c} = m_{i,row} B_{row,c}
        for row in 0..dim {
            let ph = self.phase[row];
            let c = self.col[row];
            for i in 0..m.nrows() {
                out[(i, c)] += m[(i, row)] * ph;
            }
        }
        out
    }

    /// Diagonal Pauli strings (only `I` and `Z` factors).
    pub fn is_diagonal(&self) -> bool {
        self.factors.iter().all(|p| matches!(p, Pauli::I | Pauli::Z))
    }
}

/// The ordered generalized Pauli basis for `n` qubits.
#[derive(Debug, Clone)]
pub struct PauliBasis {
    n: usize,
    elements: Vec<PauliString>,
}

impl PauliBasis {
    /// Builds `{I,X,Y,Z}^{⊗n}` for `1 <= n <= 4`.
    pub fn new(n: usize) -> Result<Self> {
        if !(1..=MAX_QUBITS).contains(&n) {
            return Err(Error::Size { n, min: 1, max: MAX_QUBITS });
        }
        let count = 1usize << (2 * n);
        let elements = (0..count)
            .map(|k| {
                let factors = (0..n)
                    .map(|q| Pauli::from_code((k >> (2 * (n - 1 - q))) & 3))
                    .collect();
                PauliString::new(factors)
            })
            .collect();
        Ok(Self { n, elements })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Hilbert-space dimension `2^n`.
    pub fn dim(&self) -> usize {
        1 << self.n
    }

    /// Length of a coherence vector, `4^n - 1`.
    pub fn vector_len(&self) -> usize {
        self.elements.len() - 1
    }

    /// All `4^n` elements, `B_0 = I^{⊗n}` first.
    pub fn elements(&self) -> &[PauliString] {
        &self.elements
    }

    pub fn element(&self, k: usize) -> &PauliString {
        &self.elements[k]
    }

    pub fn labels(&self) -> Vec<String> {
        self.elements.iter().map(PauliString::label).collect()
    }

    /// Index into the full basis (0 = identity) of a label such as `"ZI"`.
    pub fn index_of(&self, label: &str) -> Option<usize> {
        if label.len() != self.n {
            return None;
        }
        let mut k = 0usize;
        for ch in label.chars() {
            let code = match ch {
                'I' => 0,
                'X' => 1,
                'Y' => 2,
                'Z' => 3,
                _ => return None,
            };
            k = 4 * k + code;
        }
        Some(k)
    }

    /// Position of a label inside a coherence vector (identity excluded).
    pub fn coord_of(&self, label: &str) -> Option<usize> {
        self.index_of(label).filter(|&k| k > 0).map(|k| k - 1)
    }

    pub fn encode(&self, rho: &CMatrix) -> Result<CoherenceVector> {
        encode(self, rho)
    }

    pub fn decode(&self, v: &CoherenceVector) -> Result<CMatrix> {
        decode(self, v)
    }

    /// Coefficients `Tr(B_k m)/2^n` for `k >= 1` of an arbitrary matrix.
    pub(crate) fn coefficients(&self, m: &CMatrix) -> DVector<Complex64> {
        let scale = 1.0 / self.dim() as f64;
        DVector::from_iterator(
            self.vector_len(),
            self.elements[1..].iter().map(|b| b.trace_with(m) * scale),
        )
    }

    /// `Σ_{k≥1} r_k B_k`, the traceless deviation part.
    pub fn deviation_matrix(&self, r: &DVector<f64>) -> CMatrix {
        let dim = self.dim();
        let mut m = CMatrix::zeros(dim, dim);
        for (b, &rk) in self.elements[1..].iter().zip(r.iter()) {
            if rk == 0.0 {
                continue;
            }
            for (row, (&c, &ph)) in b.col.iter().zip(&b.phase).enumerate() {
                m[(row, c)] += ph * rk;
            }
        }
        m
    }
}

/// Traceless part of a density matrix in the generalized Pauli basis.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceVector {
    n: usize,
    r: DVector<f64>,
}

impl CoherenceVector {
    pub fn new(n: usize, r: DVector<f64>) -> Result<Self> {
        if !(1..=MAX_QUBITS).contains(&n) {
            return Err(Error::Size { n, min: 1, max: MAX_QUBITS });
        }
        let expected = (1usize << (2 * n)) - 1;
        if r.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: r.len() });
        }
        Ok(Self { n, r })
    }

    pub fn from_slice(n: usize, r: &[f64]) -> Result<Self> {
        Self::new(n, DVector::from_column_slice(r))
    }

    /// The maximally mixed state.
    pub fn zeros(n: usize) -> Self {
        Self { n, r: DVector::zeros((1usize << (2 * n)) - 1) }
    }

    /// Builds a vector from `(label, coefficient)` pairs, zero elsewhere.
    pub fn from_labels(basis: &PauliBasis, entries: &[(&str, f64)]) -> Result<Self> {
        let mut v = Self::zeros(basis.n());
        for &(label, value) in entries {
            let k = basis
                .coord_of(label)
                .ok_or_else(|| Error::Validation(format!("unknown basis label {label:?}")))?;
            v.r[k] = value;
        }
        Ok(v)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.r
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.r
    }

    pub fn as_slice(&self) -> &[f64] {
        self.r.as_slice()
    }

    pub fn norm_sq(&self) -> f64 {
        self.r.norm_squared()
    }

    pub fn to_json(&self) -> CoherenceVectorJson {
        CoherenceVectorJson {
            n: self.n,
            order: ORDER_TAG.to_string(),
            r: self.r.iter().copied().collect(),
        }
    }

    pub fn from_json(json: &CoherenceVectorJson) -> Result<Self> {
        if json.order != ORDER_TAG {
            return Err(Error::Validation(format!(
                "unsupported basis order {:?}, expected {ORDER_TAG:?}",
                json.order
            )));
        }
        Self::from_slice(json.n, &json.r)
    }
}

/// `{ "n": int, "order": "lex-IXYZ", "r": [floats] }`
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoherenceVectorJson {
    pub n: usize,
    pub order: String,
    pub r: Vec<f64>,
}

/// Orthogonal action `r ↦ U_rep r` of a unitary on coherence vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryRep {
    n: usize,
    mat: DMatrix<f64>,
}

impl UnitaryRep {
    pub fn identity(n: usize) -> Self {
        let d = (1usize << (2 * n)) - 1;
        Self { n, mat: DMatrix::identity(d, d) }
    }

    /// Wraps a matrix that is already known to be an orthogonal representation.
    pub fn from_matrix(n: usize, mat: DMatrix<f64>) -> Result<Self> {
        let d = (1usize << (2 * n)) - 1;
        if mat.nrows() != d || mat.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: mat.nrows() });
        }
        Ok(Self { n, mat })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn transpose(&self) -> Self {
        Self { n: self.n, mat: self.mat.transpose() }
    }

    pub fn apply(&self, v: &CoherenceVector) -> CoherenceVector {
        CoherenceVector { n: self.n, r: &self.mat * &v.r }
    }

    /// `self ∘ other`, i.e. `other` acts first.
    pub fn compose(&self, other: &UnitaryRep) -> UnitaryRep {
        UnitaryRep { n: self.n, mat: &self.mat * &other.mat }
    }
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn check_square(basis: &PauliBasis, m: &CMatrix) -> Result<()> {
    let dim = basis.dim();
    if m.nrows() != dim || m.ncols() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: m.nrows() });
    }
    Ok(())
}

/// `r_k = Tr(ρ B_k)/2^n`. Requires a Hermitian, unit-trace input.
pub fn encode(basis: &PauliBasis, rho: &CMatrix) -> Result<CoherenceVector> {
    check_square(basis, rho)?;
    let herm = max_abs(&(rho - rho.adjoint()));
    if herm > 1e-10 {
        return Err(Error::Validation(format!("density matrix not Hermitian (deviation {herm:.3e})")));
    }
    let tr = rho.trace();
    if (tr - C1).norm() > 1e-10 {
        return Err(Error::Validation(format!("density matrix trace {tr} != 1")));
    }
    let coeffs = basis.coefficients(rho);
    Ok(CoherenceVector { n: basis.n(), r: coeffs.map(|z| z.re) })
}

/// `ρ = I/2^n + Σ r_k B_k`.
pub fn decode(basis: &PauliBasis, v: &CoherenceVector) -> Result<CMatrix> {
    if v.n != basis.n() {
        return Err(Error::DimensionMismatch { expected: basis.vector_len(), got: v.len() });
    }
    let dim = basis.dim();
    let mut rho = basis.deviation_matrix(&v.r);
    for i in 0..dim {
        rho[(i, i)] += C1 / dim as f64;
    }
    Ok(rho)
}

/// Orthogonal matrix with entries `Tr(B_k U B_j U†)/2^n`.
pub fn unitary_rep(basis: &PauliBasis, u: &CMatrix) -> Result<UnitaryRep> {
    check_square(basis, u)?;
    let dim = basis.dim();
    let deviation = max_abs(&(u.adjoint() * u - CMatrix::identity(dim, dim)));
    if deviation > 1e-10 {
        return Err(Error::NotUnitary { deviation });
    }
    let d = basis.vector_len();
    let u_dag = u.adjoint();
    let mut mat = DMatrix::zeros(d, d);
    for (j, b) in basis.elements()[1..].iter().enumerate() {
        let conj = b.left_mul(&u_dag);
        let conj = u * conj;
        let col = basis.coefficients(&conj);
        for k in 0..d {
            mat[(k, j)] = col[k].re;
        }
    }
    Ok(UnitaryRep { n: basis.n(), mat })
}

/// Kronecker product of single-qubit (or larger) complex matrices.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

pub(crate) fn complex(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub(crate) const ZERO: Complex64 = C0;
