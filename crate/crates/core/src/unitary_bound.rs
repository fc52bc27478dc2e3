//! Limits of purely unitary control: the permutation polytope of the
//! spectrum and the best achievable transfer coefficient to a target.

use std::collections::BTreeSet;

use nalgebra::DVector;
use serde::Serialize;

use crate::diag::DiagonalVector;
use crate::error::{Error, Result};
use crate::pauli::{CMatrix, CoherenceVector, PauliBasis};

/// Eigenvalues of the traceless part `Σ r_k B_k`, sorted descending.
pub fn deviation_spectrum(rho: &CoherenceVector) -> Result<Vec<f64>> {
    let basis = PauliBasis::new(rho.n())?;
    let dev = basis.deviation_matrix(rho.as_vector());
    let mut eig: Vec<f64> = dev.symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    Ok(eig)
}

fn check_pair(rho: &CoherenceVector, sigma: &CoherenceVector) -> Result<()> {
    if rho.n() != sigma.n() {
        return Err(Error::DimensionMismatch { expected: rho.len(), got: sigma.len() });
    }
    if sigma.norm_sq() == 0.0 {
        return Err(Error::Validation("target has no traceless component".into()));
    }
    Ok(())
}

/// `max_U Tr(UρU† σ)/Tr(σ²)` on deviation parts: align both spectra in
/// descending order.
pub fn kappa_unitary_max(rho: &CoherenceVector, sigma: &CoherenceVector) -> Result<f64> {
    check_pair(rho, sigma)?;
    let a = deviation_spectrum(rho)?;
    let b = deviation_spectrum(sigma)?;
    let inner: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    let norm: f64 = b.iter().map(|y| y * y).sum();
    Ok(inner / norm)
}

/// `κ_U` for one unitary, `Tr(UρU† σ)/Tr(σ²)` on deviation parts.
pub fn kappa_unitary(rho: &CoherenceVector, sigma: &CoherenceVector, u: &CMatrix) -> Result<f64> {
    check_pair(rho, sigma)?;
    let basis = PauliBasis::new(rho.n())?;
    let r = basis.deviation_matrix(rho.as_vector());
    let s = basis.deviation_matrix(sigma.as_vector());
    let rotated = u * r * u.adjoint();
    Ok((rotated * &s).trace().re / (&s * &s).trace().re)
}

/// Projection coefficient of `output` on `sigma`, provided the component
/// orthogonal to `sigma` is at most `tol·‖output‖`.
pub fn kappa_channel(output: &CoherenceVector, sigma: &CoherenceVector, tol: f64) -> Result<f64> {
    check_pair(output, sigma)?;
    let o = output.as_vector();
    let s = sigma.as_vector();
    let kappa = o.dot(s) / s.norm_squared();
    let residual = (o - s * kappa).norm();
    if residual > tol * o.norm() {
        return Err(Error::ResidualTooLarge { residual: residual / o.norm(), tol });
    }
    Ok(kappa)
}

/// Vertices of the convex hull of all basis permutations of a spectrum.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumPolytope {
    /// Distinct orderings of the deviation spectrum.
    pub vertices: Vec<Vec<f64>>,
    #[serde(skip)]
    pub source_state: CoherenceVector,
    /// Descending deviation spectrum.
    pub spectrum: Vec<f64>,
}

impl SpectrumPolytope {
    /// Vertices mapped to diagonal coordinates.
    pub fn diagonal_vertices(&self) -> Vec<DiagonalVector> {
        let n = self.source_state.n();
        self.vertices
            .iter()
            .map(|v| DiagonalVector::from_spectrum_deviation(n, v).expect("vertex length 2^n"))
            .collect()
    }

    /// Largest `t ≥ 0` such that the diagonal state `t·u` lies in the
    /// polytope (majorization of `t·spec(u)` by the source spectrum).
    pub fn radius_along(&self, u: &DiagonalVector) -> f64 {
        let mut s = u.spectrum_deviation();
        s.sort_by(|a, b| b.total_cmp(a));
        let scale = s.iter().map(|x| x.abs()).fold(0.0, f64::max);
        let mut best = f64::INFINITY;
        let (mut ps, mut pl) = (0.0, 0.0);
        for (si, li) in s.iter().zip(&self.spectrum).take(s.len() - 1) {
            ps += si;
            pl += li;
            if ps > 1e-12 * scale {
                best = best.min(pl / ps);
            }
        }
        best.max(0.0)
    }
}

/// All distinct permutations of the deviation spectrum of `rho`.
pub fn polytope_vertices(rho: &CoherenceVector) -> Result<SpectrumPolytope> {
    let spectrum = deviation_spectrum(rho)?;
    let scale = spectrum.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1.0);
    // snap to a grid so that numerically equal eigenvalues collapse
    let quantum = 1e-10 * scale;
    let keys: Vec<i64> = spectrum.iter().map(|x| (x / quantum).round() as i64).collect();
    let mut seen = BTreeSet::new();
    let mut vertices = Vec::new();
    let mut idx: Vec<usize> = (0..spectrum.len()).collect();
    loop {
        let key: Vec<i64> = idx.iter().map(|&i| keys[i]).collect();
        if seen.insert(key) {
            vertices.push(idx.iter().map(|&i| spectrum[i]).collect());
        }
        // next lexicographic permutation of indices
        let Some(i) = (0..idx.len().saturating_sub(1)).rev().find(|&i| idx[i] < idx[i + 1]) else {
            break;
        };
        let j = (i + 1..idx.len()).rev().find(|&j| idx[j] > idx[i]).expect("successor");
        idx.swap(i, j);
        idx[i + 1..].reverse();
    }
    Ok(SpectrumPolytope { vertices, source_state: rho.clone(), spectrum })
}

/// Pseudo-pure direction `(ZI + IZ + ZZ)/4` of unit effective purity.
pub fn pps_direction() -> CoherenceVector {
    let basis = PauliBasis::new(2).expect("two qubits");
    CoherenceVector::from_labels(&basis, &[("ZI", 0.25), ("IZ", 0.25), ("ZZ", 0.25)]).expect("labels")
}

/// Effective purity `η` of `r` along the unit-purity target `sigma` and the
/// angle between them.
pub fn effective_purity(r: &DVector<f64>, sigma: &CoherenceVector) -> (f64, f64) {
    let s = sigma.as_vector();
    let eta = r.dot(s) / s.norm_squared();
    let cos = (r.dot(s) / (r.norm() * s.norm())).clamp(-1.0, 1.0);
    let theta = if r.norm() == 0.0 { 0.0 } else { cos.acos() };
    (eta, theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chloroform::RateSet;
    use crate::oracles::{haar_unitary, random_density_matrix};
    use crate::pauli::{encode, unitary_rep};
    use rand::{rngs::StdRng, SeedableRng};

    fn chloroform_eq() -> CoherenceVector {
        RateSet::default().assemble().unwrap().equilibrium()
    }

    #[test]
    fn self_transfer_is_one() {
        let mut rng = StdRng::seed_from_u64(8);
        let basis = PauliBasis::new(2).unwrap();
        let rho = encode(&basis, &random_density_matrix(4, &mut rng)).unwrap();
        assert!((kappa_unitary_max(&rho, &rho).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(kappa_unitary_max(&CoherenceVector::zeros(2), &rho).unwrap(), 0.0);
        assert!(kappa_unitary_max(&rho, &CoherenceVector::zeros(2)).is_err());
    }

    #[test]
    fn chloroform_pps_bound() {
        let k = kappa_unitary_max(&chloroform_eq(), &pps_direction()).unwrap();
        assert!((k - 20.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn sorting_dominates_sampling() {
        let mut rng = StdRng::seed_from_u64(31);
        let rho = chloroform_eq();
        let sigma = pps_direction();
        let best = kappa_unitary_max(&rho, &sigma).unwrap();
        for _ in 0..1000 {
            let u = haar_unitary(4, &mut rng);
            assert!(kappa_unitary(&rho, &sigma, &u).unwrap() <= best + 1e-9);
        }
    }

    #[test]
    fn channel_coefficient() {
        let sigma = pps_direction();
        let three = CoherenceVector::new(2, sigma.as_vector() * 3.0).unwrap();
        assert!((kappa_channel(&three, &sigma, 1e-9).unwrap() - 3.0).abs() < 1e-12);
        let mut v = sigma.as_vector().clone();
        v[0] += 5.0;
        let noisy = CoherenceVector::new(2, v).unwrap();
        assert!(matches!(kappa_channel(&noisy, &sigma, 1e-3), Err(Error::ResidualTooLarge { .. })));
    }

    #[test]
    fn chloroform_vertices() {
        let p = polytope_vertices(&chloroform_eq()).unwrap();
        assert_eq!(p.vertices.len(), 24);
        let expected = [5.0, 3.0, -3.0, -5.0];
        for (a, b) in p.spectrum.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        for v in &p.vertices {
            assert!(v.iter().sum::<f64>().abs() < 1e-12);
            let mut s = v.clone();
            s.sort_by(|a, b| b.total_cmp(a));
            assert_eq!(s, p.spectrum);
        }
        let mixed = polytope_vertices(&CoherenceVector::zeros(2)).unwrap();
        assert_eq!(mixed.vertices.len(), 1);
        let basis = PauliBasis::new(2).unwrap();
        let repeated = CoherenceVector::from_labels(&basis, &[("ZI", 1.0)]).unwrap();
        assert_eq!(polytope_vertices(&repeated).unwrap().vertices.len(), 6);
    }

    #[test]
    fn unitary_orbit_stays_on_vertex_spectrum() {
        let mut rng = StdRng::seed_from_u64(13);
        let basis = PauliBasis::new(2).unwrap();
        let rho = chloroform_eq();
        let p = polytope_vertices(&rho).unwrap();
        for _ in 0..20 {
            let rep = unitary_rep(&basis, &haar_unitary(4, &mut rng)).unwrap();
            let spec = deviation_spectrum(&rep.apply(&rho)).unwrap();
            for (a, b) in spec.iter().zip(&p.spectrum) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn pps_radius_matches_unitary_bound() {
        let p = polytope_vertices(&chloroform_eq()).unwrap();
        let u = DiagonalVector::from_slice(2, &[1.0, 1.0, 1.0]).unwrap();
        let unit = DiagonalVector::new(2, u.as_vector().normalize()).unwrap();
        let t = p.radius_along(&unit);
        // η = 20/3 at coefficients η/4 on each axis
        let eta = t / 3f64.sqrt() * 4.0;
        assert!((eta - 20.0 / 3.0).abs() < 1e-12);
        // vertices are on the boundary: radius along a vertex direction equals its norm
        for v in p.diagonal_vertices().iter().take(5) {
            let norm = v.as_vector().norm();
            let dir = DiagonalVector::new(2, v.as_vector() / norm).unwrap();
            assert!((p.radius_along(&dir) - norm).abs() < 1e-9);
        }
    }

    #[test]
    fn effective_purity_and_angle() {
        let sigma = pps_direction();
        let (eta, theta) = effective_purity(&(sigma.as_vector() * 7.0), &sigma);
        assert!((eta - 7.0).abs() < 1e-12 && theta.abs() < 1e-7);
    }
}
