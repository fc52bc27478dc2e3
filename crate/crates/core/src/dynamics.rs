//! Affine coherence-vector dynamics `ṙ = H r − R (r − r_eq)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{CMatrix, CoherenceVector, PauliBasis, UnitaryRep};

/// Relative tolerance for the (anti)symmetry checks at construction.
const STRUCTURE_TOL: f64 = 1e-10;
/// Relative tolerance for `R r_eq = v`.
const DRIVE_TOL: f64 = 1e-9;

/// Construction options for [`AffineGenerator`].
#[derive(Debug, Clone, Copy, Default)]
pub struct GeneratorOptions {
    /// Accept a positive semidefinite relaxation matrix. Only meant for the
    /// unital special case; reachability analysis always requires SPD.
    pub allow_unital: bool,
}

/// The Bloch-form generator: antisymmetric `H`, symmetric positive definite
/// `R`, drive `v = R r_eq`.
#[derive(Debug, Clone)]
pub struct AffineGenerator {
    n: usize,
    h: DMatrix<f64>,
    r: DMatrix<f64>,
    v: DVector<f64>,
    r_eq: DVector<f64>,
    min_eigenvalue: f64,
}

fn relative_asym(m: &DMatrix<f64>, sign: f64) -> f64 {
    let scale = m.amax().max(1.0);
    (m + m.transpose() * sign).amax() / scale
}

impl AffineGenerator {
    /// Builds a generator from `(H, R, r_eq)`; `v` is derived as `R r_eq`.
    pub fn new(
        n: usize,
        h: DMatrix<f64>,
        r: DMatrix<f64>,
        r_eq: DVector<f64>,
        opts: GeneratorOptions,
    ) -> Result<Self> {
        Self::check_shapes(n, &h, &r, &r_eq)?;
        let v = &r * &r_eq;
        Self::finish(n, h, r, v, r_eq, opts)
    }

    /// Builds a generator from the inhomogeneous drive `v`, solving
    /// `R r_eq = v`.
    pub fn from_drive(
        n: usize,
        h: DMatrix<f64>,
        r: DMatrix<f64>,
        v: DVector<f64>,
        opts: GeneratorOptions,
    ) -> Result<Self> {
        Self::check_shapes(n, &h, &r, &v)?;
        Self::check_structure(&h, &r)?;
        let min_eigenvalue = min_eigenvalue(&r);
        let r_eq = if min_eigenvalue > 0.0 {
            r.clone().cholesky().map(|c| c.solve(&v)).ok_or(Error::ContractivityViolation { min_eigenvalue })?
        } else if opts.allow_unital && v.amax() <= 1e-14 {
            DVector::zeros(v.len())
        } else {
            return Err(Error::ContractivityViolation { min_eigenvalue });
        };
        Self::finish(n, h, r, v, r_eq, opts)
    }

    fn check_shapes(n: usize, h: &DMatrix<f64>, r: &DMatrix<f64>, vec: &DVector<f64>) -> Result<()> {
        if !(1..=crate::pauli::MAX_QUBITS).contains(&n) {
            return Err(Error::Size { n, min: 1, max: crate::pauli::MAX_QUBITS });
        }
        let d = (1usize << (2 * n)) - 1;
        for got in [h.nrows(), h.ncols(), r.nrows(), r.ncols(), vec.len()] {
            if got != d {
                return Err(Error::DimensionMismatch { expected: d, got });
            }
        }
        Ok(())
    }

    fn check_structure(h: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<()> {
        let anti = relative_asym(h, 1.0);
        if anti > STRUCTURE_TOL {
            return Err(Error::InputInconsistency(format!(
                "H is not antisymmetric (relative deviation {anti:.3e})"
            )));
        }
        let sym = relative_asym(r, -1.0);
        if sym > STRUCTURE_TOL {
            return Err(Error::InputInconsistency(format!(
                "R is not symmetric (relative deviation {sym:.3e})"
            )));
        }
        Ok(())
    }

    fn finish(
        n: usize,
        h: DMatrix<f64>,
        r: DMatrix<f64>,
        v: DVector<f64>,
        r_eq: DVector<f64>,
        opts: GeneratorOptions,
    ) -> Result<Self> {
        Self::check_structure(&h, &r)?;
        let min_eigenvalue = min_eigenvalue(&r);
        let scale = r.amax().max(f64::MIN_POSITIVE);
        let spd = min_eigenvalue > 0.0;
        let psd = min_eigenvalue >= -1e-12 * scale;
        if !(spd || (opts.allow_unital && psd)) {
            return Err(Error::ContractivityViolation { min_eigenvalue });
        }
        let residual = (&r * &r_eq - &v).amax();
        if residual > DRIVE_TOL * (1.0 + v.amax()) {
            return Err(Error::InputInconsistency(format!("R r_eq != v (residual {residual:.3e})")));
        }
        Ok(Self { n, h, r, v, r_eq, min_eigenvalue })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.r_eq.len()
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn v(&self) -> &DVector<f64> {
        &self.v
    }

    pub fn r_eq(&self) -> &DVector<f64> {
        &self.r_eq
    }

    pub fn equilibrium(&self) -> CoherenceVector {
        CoherenceVector::new(self.n, self.r_eq.clone()).expect("shape checked at construction")
    }

    /// Smallest eigenvalue of `R`; strictly positive unless built as unital.
    pub fn min_relaxation_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    pub fn is_strictly_contractive(&self) -> bool {
        self.min_eigenvalue > 0.0
    }

    /// Fails with [`Error::ContractivityViolation`] unless `R` is SPD.
    pub fn require_contractive(&self) -> Result<()> {
        if self.is_strictly_contractive() {
            Ok(())
        } else {
            Err(Error::ContractivityViolation { min_eigenvalue: self.min_eigenvalue })
        }
    }

    /// Same relaxation with the Hamiltonian part removed.
    pub fn without_hamiltonian(&self) -> Self {
        Self { h: DMatrix::zeros(self.dim(), self.dim()), ..self.clone() }
    }

    /// Time derivative of the coherence vector.
    pub fn field(&self, r: &DVector<f64>) -> DVector<f64> {
        &self.h * r - &self.r * r + &self.v
    }

    /// Fixed point `r*` of the full free dynamics, `(H - R) r* = -v`.
    pub fn fixed_point(&self) -> Result<DVector<f64>> {
        let a = &self.h - &self.r;
        if self.v.amax() == 0.0 {
            return Ok(DVector::zeros(self.dim()));
        }
        let sol = a.clone().lu().solve(&(-&self.v)).ok_or(Error::FixedPointUndefined)?;
        if (&a * &sol + &self.v).amax() > 1e-9 * (1.0 + self.v.amax()) || !sol.iter().all(|x| x.is_finite()) {
            return Err(Error::FixedPointUndefined);
        }
        Ok(sol)
    }

    /// Exact affine propagator `r ↦ e^{At}(r − r*) + r*` for `t ≥ 0`.
    pub fn propagator(&self, t: f64) -> Result<AffineMap> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::Validation(format!("evolution time must be finite and >= 0, got {t}")));
        }
        let d = self.dim();
        if t == 0.0 {
            return Ok(AffineMap::identity(d));
        }
        let a = (&self.h - &self.r) * t;
        let m = a.exp();
        let fixed = self.fixed_point()?;
        let c = &fixed - &m * &fixed;
        Ok(AffineMap { m, c })
    }

    pub fn to_json(&self) -> GeneratorJson {
        GeneratorJson {
            n: self.n,
            h: rows(&self.h),
            r: rows(&self.r),
            r_eq: self.r_eq.iter().copied().collect(),
        }
    }

    pub fn from_json(json: &GeneratorJson, opts: GeneratorOptions) -> Result<Self> {
        let h = from_rows(&json.h)?;
        let r = from_rows(&json.r)?;
        Self::new(json.n, h, r, DVector::from_column_slice(&json.r_eq), opts)
    }

    /// Rescales the equilibrium (and drive) by `factor`, e.g. to change ε units.
    pub fn scaled_equilibrium(&self, factor: f64) -> Self {
        Self { v: &self.v * factor, r_eq: &self.r_eq * factor, ..self.clone() }
    }
}

fn min_eigenvalue(r: &DMatrix<f64>) -> f64 {
    let sym = (r + r.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != nc) {
        return Err(Error::DimensionMismatch { expected: nc, got: bad.len() });
    }
    Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

/// Generator file: `{ "n": int, "H": [[..]], "R": [[..]], "r_eq": [..] }`,
/// matrices row-major in lex-IXYZ order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorJson {
    pub n: usize,
    #[serde(rename = "H")]
    pub h: Vec<Vec<f64>>,
    #[serde(rename = "R")]
    pub r: Vec<Vec<f64>>,
    pub r_eq: Vec<f64>,
}

/// `x ↦ M x + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    pub m: DMatrix<f64>,
    pub c: DVector<f64>,
}

impl AffineMap {
    pub fn identity(d: usize) -> Self {
        Self { m: DMatrix::identity(d, d), c: DVector::zeros(d) }
    }

    pub fn linear(m: DMatrix<f64>) -> Self {
        let d = m.nrows();
        Self { m, c: DVector::zeros(d) }
    }

    pub fn from_rep(rep: &UnitaryRep) -> Self {
        Self::linear(rep.matrix().clone())
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.m * x + &self.c
    }

    /// The map that applies `self` first and `next` afterwards.
    pub fn then(&self, next: &AffineMap) -> AffineMap {
        AffineMap { m: &next.m * &self.m, c: &next.m * &self.c + &next.c }
    }
}

/// Builds `(H, R, v)` from a Hamiltonian and a dissipator acting on matrices:
/// `H_kj = Tr(−i B_k [H, B_j])/2^n`, `R_kj = −Tr(B_k 𝓡 B_j)/2^n`,
/// `v_k = Tr(B_k 𝓡 I)/4^n`.
pub fn lindblad_to_bloch<F>(
    basis: &PauliBasis,
    hamiltonian: &CMatrix,
    dissipator: F,
    opts: GeneratorOptions,
) -> Result<AffineGenerator>
where
    F: Fn(&CMatrix) -> CMatrix,
{
    let dim = basis.dim();
    if hamiltonian.nrows() != dim || hamiltonian.ncols() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: hamiltonian.nrows() });
    }
    let herm = (hamiltonian - hamiltonian.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if herm > 1e-10 * (1.0 + hamiltonian.iter().map(|z| z.norm()).fold(0.0, f64::max)) {
        return Err(Error::InputInconsistency("Hamiltonian is not Hermitian".into()));
    }
    let d = basis.vector_len();
    let minus_i = Complex64::new(0.0, -1.0);
    let mut h = DMatrix::zeros(d, d);
    let mut r = DMatrix::zeros(d, d);
    let mut max_imag: f64 = 0.0;
    let mut max_trace: f64 = 0.0;
    for (j, b) in basis.elements()[1..].iter().enumerate() {
        let commutator = b.right_mul(hamiltonian) - b.left_mul(hamiltonian);
        let hcol = basis.coefficients(&(commutator * minus_i));
        let rb = dissipator(&b.to_matrix());
        max_trace = max_trace.max(rb.trace().norm());
        let rcol = basis.coefficients(&rb);
        for k in 0..d {
            h[(k, j)] = hcol[k].re;
            r[(k, j)] = -rcol[k].re;
            max_imag = max_imag.max(hcol[k].im.abs()).max(rcol[k].im.abs());
        }
    }
    let r_identity = dissipator(&CMatrix::identity(dim, dim));
    max_trace = max_trace.max(r_identity.trace().norm());
    let vcoef = basis.coefficients(&r_identity);
    let v = DVector::from_iterator(d, vcoef.iter().map(|z| z.re / dim as f64));
    max_imag = max_imag.max(vcoef.iter().map(|z| z.im.abs()).fold(0.0, f64::max));
    if max_trace > 1e-10 {
        return Err(Error::InputInconsistency(format!(
            "dissipator is not trace-annihilating (|Tr 𝓡B| up to {max_trace:.3e})"
        )));
    }
    if max_imag > 1e-10 {
        return Err(Error::InputInconsistency(format!(
            "dissipator does not preserve Hermiticity (imaginary part {max_imag:.3e})"
        )));
    }
    AffineGenerator::from_drive(basis.n(), h, r, v, opts)
}

/// Lindblad dissipator `Σ γ (L ρ L† − ½{L†L, ρ})`.
pub fn lindblad_dissipator(jumps: Vec<(CMatrix, f64)>) -> impl Fn(&CMatrix) -> CMatrix {
    let prepared: Vec<_> = jumps
        .into_iter()
        .map(|(l, rate)| {
            let ld = l.adjoint();
            let ldl = &ld * &l;
            (l, ld, ldl, rate)
        })
        .collect();
    move |rho: &CMatrix| {
        let mut out = CMatrix::zeros(rho.nrows(), rho.ncols());
        for (l, ld, ldl, rate) in &prepared {
            let term = l * rho * ld - (ldl * rho + rho * ldl) * Complex64::new(0.5, 0.0);
            out += term * Complex64::new(*rate, 0.0);
        }
        out
    }
}

/// Exact solution of the affine ODE at time `t`.
pub fn evolve(gen: &AffineGenerator, r0: &CoherenceVector, t: f64) -> Result<CoherenceVector> {
    if r0.n() != gen.n() {
        return Err(Error::DimensionMismatch { expected: gen.dim(), got: r0.len() });
    }
    let map = gen.propagator(t)?;
    CoherenceVector::new(gen.n(), map.apply(r0.as_vector()))
}

/// `Tr ρ² = 1/2^n + 2^n rᵀr`.
pub fn purity(r: &CoherenceVector) -> f64 {
    let dim = (1usize << r.n()) as f64;
    1.0 / dim + dim * r.norm_sq()
}

/// `ṗ = −2^{n+1} rᵀR(r − r_eq)`; the Hamiltonian never contributes.
pub fn purity_rate(gen: &AffineGenerator, r: &CoherenceVector) -> f64 {
    let x = r.as_vector();
    let dev = x - gen.r_eq();
    -((1usize << (r.n() + 1)) as f64) * x.dot(&(gen.r() * dev))
}
