//! Projection of the Bloch dynamics onto the diagonal subspace `{I,Z}^{⊗n}`.
//!
//! Diagonal coordinates are ordered by the bit mask of the qubits carrying a
//! `Z` factor, qubit 1 being the least significant bit. For two qubits this is
//! `(ZI, IZ, ZZ)`, the `(x₁, x₂, x₃)` axes used throughout.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::dynamics::AffineGenerator;
use crate::error::{Error, Result};
use crate::pauli::{CoherenceVector, UnitaryRep};

/// Label of the diagonal coordinate with Z-mask `mask`.
fn mask_label(n: usize, mask: usize) -> String {
    (0..n).map(|q| if mask >> q & 1 == 1 { 'Z' } else { 'I' }).collect()
}

/// Coherence-vector index of the diagonal coordinate with Z-mask `mask`.
fn mask_coord(n: usize, mask: usize) -> usize {
    let k = (0..n).fold(0usize, |k, q| 4 * k + if mask >> q & 1 == 1 { 3 } else { 0 });
    k - 1
}

/// Indices of the `2^n − 1` diagonal coordinates inside a coherence vector.
pub fn diag_slots(n: usize) -> Vec<usize> {
    (1..1usize << n).map(|mask| mask_coord(n, mask)).collect()
}

pub fn diag_labels(n: usize) -> Vec<String> {
    (1..1usize << n).map(|mask| mask_label(n, mask)).collect()
}

/// `χ_mask(b) = (−1)^{popcount(mask & bits(b))}` where `b` indexes the
/// computational basis with qubit 1 as the most significant bit.
pub(crate) fn character(n: usize, mask: usize, b: usize) -> f64 {
    let bits = (0..n).filter(|&q| mask >> q & 1 == 1 && b >> (n - 1 - q) & 1 == 1).count();
    if bits % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// A state in the diagonal subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalVector {
    n: usize,
    x: DVector<f64>,
}

impl DiagonalVector {
    pub fn new(n: usize, x: DVector<f64>) -> Result<Self> {
        let expected = (1usize << n) - 1;
        if x.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: x.len() });
        }
        Ok(Self { n, x })
    }

    pub fn from_slice(n: usize, x: &[f64]) -> Result<Self> {
        Self::new(n, DVector::from_column_slice(x))
    }

    pub fn zeros(n: usize) -> Self {
        Self { n, x: DVector::zeros((1 << n) - 1) }
    }

    /// Keeps only the diagonal coordinates of a coherence vector.
    pub fn from_coherence(v: &CoherenceVector) -> Self {
        let slots = diag_slots(v.n());
        Self { n: v.n(), x: DVector::from_iterator(slots.len(), slots.iter().map(|&k| v.as_slice()[k])) }
    }

    /// Places `x` on the diagonal slots, zeros elsewhere.
    pub fn embed(&self) -> CoherenceVector {
        let mut r = CoherenceVector::zeros(self.n).into_vector();
        for (&k, &xi) in diag_slots(self.n).iter().zip(self.x.iter()) {
            r[k] = xi;
        }
        CoherenceVector::new(self.n, r).expect("matching qubit count")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.x
    }

    pub fn as_slice(&self) -> &[f64] {
        self.x.as_slice()
    }

    /// Deviations `ρ_bb − 1/2^n` of the diagonal entries.
    pub fn spectrum_deviation(&self) -> Vec<f64> {
        let dim = 1usize << self.n;
        (0..dim)
            .map(|b| (1..dim).map(|mask| self.x[mask - 1] * character(self.n, mask, b)).sum())
            .collect()
    }

    /// Inverse of [`spectrum_deviation`](Self::spectrum_deviation).
    pub fn from_spectrum_deviation(n: usize, d: &[f64]) -> Result<Self> {
        let dim = 1usize << n;
        if d.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: d.len() });
        }
        let x = DVector::from_iterator(
            dim - 1,
            (1..dim).map(|mask| (0..dim).map(|b| d[b] * character(n, mask, b)).sum::<f64>() / dim as f64),
        );
        Ok(Self { n, x })
    }

    /// All diagonal entries of the decoded density matrix are non-negative.
    pub fn is_physical(&self) -> bool {
        let base = 1.0 / (1usize << self.n) as f64;
        self.spectrum_deviation().iter().all(|d| base + d >= -1e-12)
    }
}

pub(crate) fn restrict_matrix(m: &DMatrix<f64>, slots: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(slots.len(), slots.len(), |i, j| m[(slots[i], slots[j])])
}

pub(crate) fn restrict_vector(v: &DVector<f64>, slots: &[usize]) -> DVector<f64> {
    DVector::from_iterator(slots.len(), slots.iter().map(|&k| v[k]))
}

/// The affine diagonal field `ẋ = −A x + b` induced by one control,
/// with `A = [UᵀRU]_d` and `b = [UᵀR r_eq]_d`.
#[derive(Debug, Clone)]
pub struct ProjectedControl {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl ProjectedControl {
    pub fn new(gen: &AffineGenerator, rep: &UnitaryRep) -> Result<Self> {
        if rep.n() != gen.n() {
            return Err(Error::DimensionMismatch { expected: gen.dim(), got: rep.matrix().nrows() });
        }
        let slots = diag_slots(gen.n());
        let u = rep.matrix();
        let cols = DMatrix::from_fn(u.nrows(), slots.len(), |i, j| u[(i, slots[j])]);
        let a = cols.transpose() * gen.r() * &cols;
        let b = cols.transpose() * (gen.r() * gen.r_eq());
        Ok(Self { a, b })
    }

    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.b - &self.a * x
    }
}

/// `ẋ = −[UᵀRU]_d x + [UᵀR r_eq]_d`.
pub fn projected_field(gen: &AffineGenerator, rep: &UnitaryRep, x: &DiagonalVector) -> Result<DiagonalVector> {
    if x.n() != gen.n() {
        return Err(Error::DimensionMismatch { expected: (1 << gen.n()) - 1, got: x.x.len() });
    }
    let ctl = ProjectedControl::new(gen, rep)?;
    DiagonalVector::new(gen.n(), ctl.eval(&x.x))
}

/// Evaluates the projected field for every control, in input order.
pub fn direction_set(gen: &AffineGenerator, controls: &[UnitaryRep], x: &DiagonalVector) -> Result<Vec<DiagonalVector>> {
    controls.par_iter().map(|rep| projected_field(gen, rep, x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chloroform::RateSet;
    use crate::oracles::haar_unitary;
    use crate::pauli::{unitary_rep, PauliBasis};
    use crate::under_approx::PermutationControlSet;
    use rand::{rngs::StdRng, SeedableRng};

    #[test]
    fn slots_for_small_systems() {
        let b1 = PauliBasis::new(1).unwrap();
        assert_eq!(diag_slots(1), vec![b1.coord_of("Z").unwrap()]);
        let b2 = PauliBasis::new(2).unwrap();
        let expected: Vec<_> = ["ZI", "IZ", "ZZ"].iter().map(|l| b2.coord_of(l).unwrap()).collect();
        assert_eq!(diag_slots(2), expected);
        assert_eq!(diag_labels(2), vec!["ZI", "IZ", "ZZ"]);
        let labels3 = diag_labels(3);
        assert_eq!(labels3.len(), 7);
        let b3 = PauliBasis::new(3).unwrap();
        for (l, &k) in labels3.iter().zip(&diag_slots(3)) {
            assert!(l.chars().all(|c| c == 'I' || c == 'Z') && l != "III");
            assert_eq!(b3.labels()[k + 1], *l);
        }
        assert_eq!(diag_slots(3), diag_slots(3));
    }

    #[test]
    fn spectrum_round_trip() {
        let x = DiagonalVector::from_slice(2, &[1.0, 4.0, 0.0]).unwrap();
        assert_eq!(x.spectrum_deviation(), vec![5.0, -3.0, 3.0, -5.0]);
        let back = DiagonalVector::from_spectrum_deviation(2, &x.spectrum_deviation()).unwrap();
        assert_eq!(back, x);
        assert!(!x.is_physical());
        assert!(DiagonalVector::from_slice(2, &[0.01, 0.04, 0.0]).unwrap().is_physical());
    }

    #[test]
    fn free_field_vanishes_at_equilibrium() {
        let gen = RateSet::default().assemble().unwrap();
        let x_eq = DiagonalVector::from_coherence(&gen.equilibrium());
        assert_eq!(x_eq.as_slice(), &[1.0, 4.0, 0.0]);
        let f = projected_field(&gen, &UnitaryRep::identity(2), &x_eq).unwrap();
        assert!(f.as_vector().amax() < 1e-15);
    }

    #[test]
    fn identity_control_is_free_diagonal_block() {
        let gen = RateSet::default().assemble().unwrap();
        let x = DiagonalVector::from_slice(2, &[0.3, -1.0, 2.0]).unwrap();
        let f = projected_field(&gen, &UnitaryRep::identity(2), &x).unwrap();
        let full = gen.field(x.embed().as_vector());
        let restricted = restrict_vector(&full, &diag_slots(2));
        assert!((f.as_vector() - restricted).amax() < 1e-12);
    }

    #[test]
    fn field_points_inward_far_outside() {
        let gen = RateSet::default().assemble().unwrap();
        let mut rng = StdRng::seed_from_u64(9);
        let b = PauliBasis::new(2).unwrap();
        for _ in 0..20 {
            let rep = unitary_rep(&b, &haar_unitary(4, &mut rng)).unwrap();
            for dir in [[1.0, 0.0, 0.0], [0.3, -0.5, 0.8], [-1.0, -1.0, 1.0]] {
                let x = DiagonalVector::new(2, DVector::from_row_slice(&dir).normalize() * 10.0).unwrap();
                let f = projected_field(&gen, &rep, &x).unwrap();
                assert!(f.as_vector().dot(x.as_vector()) < 0.0);
            }
        }
    }

    #[test]
    fn permutation_field_matches_full_space_oracle() {
        let gen = RateSet::default().assemble().unwrap();
        let set = PermutationControlSet::new(2).unwrap();
        let slots = diag_slots(2);
        let r_dd = restrict_matrix(gen.r(), &slots);
        let b_d = restrict_vector(&(gen.r() * gen.r_eq()), &slots);
        let x = DiagonalVector::from_slice(2, &[0.7, 1.2, -0.4]).unwrap();
        for k in 0..set.len() {
            let full = set.full_rep(k).unwrap();
            let f = projected_field(&gen, &full, &x).unwrap();
            let q = set.diag_rep(k);
            let expected = q.transpose() * &b_d - q.transpose() * &r_dd * q * x.as_vector();
            assert!((f.as_vector() - expected).amax() < 1e-12);
            // diagonal states under diagonal-preserving unitaries: full dynamics agree
            let r_full = full.apply(&x.embed());
            let full_field = full.transpose().apply(&CoherenceVector::new(2, gen.field(r_full.as_vector())).unwrap());
            assert!((f.as_vector() - restrict_vector(full_field.as_vector(), &slots)).amax() < 1e-10);
        }
    }

    #[test]
    fn hamiltonian_does_not_enter() {
        let gen = RateSet::default().assemble().unwrap();
        let free = gen.without_hamiltonian();
        let mut rng = StdRng::seed_from_u64(2);
        let b = PauliBasis::new(2).unwrap();
        let x = DiagonalVector::from_slice(2, &[1.0, 2.0, 3.0]).unwrap();
        for _ in 0..5 {
            let rep = unitary_rep(&b, &haar_unitary(4, &mut rng)).unwrap();
            let a = projected_field(&gen, &rep, &x).unwrap();
            let c = projected_field(&free, &rep, &x).unwrap();
            assert_eq!(a, c);
        }
    }

    #[test]
    fn direction_set_order_and_duplicates() {
        let gen = RateSet::default().assemble().unwrap();
        let x = DiagonalVector::from_slice(2, &[0.5, 0.5, 0.5]).unwrap();
        let id = UnitaryRep::identity(2);
        let one = direction_set(&gen, std::slice::from_ref(&id), &x).unwrap();
        assert_eq!(one, vec![projected_field(&gen, &id, &x).unwrap()]);
        let set = PermutationControlSet::new(2).unwrap();
        let reps: Vec<_> = (0..set.len()).map(|k| set.full_rep(k).unwrap()).collect();
        let dirs = direction_set(&gen, &reps, &x).unwrap();
        assert_eq!(dirs.len(), 24);
        let twice = direction_set(&gen, &[id.clone(), id], &x).unwrap();
        assert_eq!(twice[0], twice[1]);
    }
}
