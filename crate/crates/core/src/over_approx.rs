//! Outer bound on the reachable set: the largest purity on the surface where
//! the purity derivative vanishes.
//!
//! Outside the ellipsoid `rᵀR(r − r_eq) = 0` purity strictly decreases under
//! any control, so the origin-centered sphere through the farthest point of the
//! ellipsoid is never left once entered.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::diag::{diag_labels, diag_slots};
use crate::dynamics::AffineGenerator;
use crate::error::{Error, Result};
use crate::pauli::CoherenceVector;

#[derive(Debug, Clone)]
pub struct PurityBound {
    /// `max rᵀr` on the constraint surface.
    pub radius_sq: f64,
    pub argmax: CoherenceVector,
    /// Multiplier `λ` of the unit-sphere problem.
    pub lagrange_mult: f64,
    /// `|rᵀR(r − r_eq)|` at the maximizer.
    pub solver_residual: f64,
    /// Whether the degenerate ("hard") case of the secular equation occurred.
    pub hard_case: bool,
}

/// JSON form `{ "radius_sq", "argmax", "residual", ... }`.
#[derive(Debug, Clone, Serialize)]
pub struct PurityBoundJson {
    pub radius_sq: f64,
    pub argmax: Vec<f64>,
    pub residual: f64,
    pub lagrange_mult: f64,
    pub radius: f64,
}

impl PurityBound {
    pub fn radius(&self) -> f64 {
        self.radius_sq.sqrt()
    }

    pub fn to_json(&self) -> PurityBoundJson {
        PurityBoundJson {
            radius_sq: self.radius_sq,
            argmax: self.argmax.as_slice().to_vec(),
            residual: self.solver_residual,
            lagrange_mult: self.lagrange_mult,
            radius: self.radius(),
        }
    }

    /// `true` when `rᵀr ≤ radius_sq · (1 + rel_tol)`.
    pub fn contains(&self, r: &DVector<f64>, rel_tol: f64) -> bool {
        r.norm_squared() <= self.radius_sq * (1.0 + rel_tol) + f64::MIN_POSITIVE
    }
}

/// Solution of `max ‖c + M y‖²` over `‖y‖ = 1`.
#[derive(Debug, Clone)]
pub struct SphereQp {
    pub y: DVector<f64>,
    pub value: f64,
    pub lambda: f64,
    pub hard_case: bool,
}

/// Maximizes `‖c + M y‖²` on the unit sphere via the secular equation
/// `‖(λI − K)⁻¹ g‖ = 1`, `K = MᵀM`, `g = Mᵀc`, `λ ≥ λ_max(K)`.
pub fn max_on_unit_sphere(m: &DMatrix<f64>, c: &DVector<f64>) -> SphereQp {
    let k = m.transpose() * m;
    let g = m.transpose() * c;
    let eig = k.clone().symmetric_eigen();
    let kappa = &eig.eigenvalues;
    let q = &eig.eigenvectors;
    let gamma = q.transpose() * &g;
    let dim = kappa.len();
    let top = kappa.max();
    let scale = top.abs().max(g.norm()).max(f64::MIN_POSITIVE);
    // eigen-directions sharing the top eigenvalue
    let near_top: Vec<bool> = kappa.iter().map(|&x| top - x <= 1e-12 * scale).collect();

    let objective = |y: &DVector<f64>| (c + m * y).norm_squared();
    let y_of = |lambda: f64| -> DVector<f64> {
        DVector::from_iterator(dim, (0..dim).map(|i| gamma[i] / (lambda - kappa[i])))
    };
    let norm_sq_at = |lambda: f64| -> f64 { (0..dim).map(|i| (gamma[i] / (lambda - kappa[i])).powi(2)).sum() };

    let top_weight: f64 = (0..dim).filter(|&i| near_top[i]).map(|i| gamma[i] * gamma[i]).sum::<f64>().sqrt();
    let rest_norm_sq: f64 =
        (0..dim).filter(|&i| !near_top[i]).map(|i| (gamma[i] / (top - kappa[i])).powi(2)).sum();

    if top_weight <= 1e-13 * scale && rest_norm_sq <= 1.0 {
        // hard case: λ = λ_max, fill the remaining norm along the top eigenspace
        let mut y_eig = DVector::zeros(dim);
        for i in (0..dim).filter(|&i| !near_top[i]) {
            y_eig[i] = gamma[i] / (top - kappa[i]);
        }
        let fill = (1.0 - rest_norm_sq).max(0.0).sqrt();
        let i_top = (0..dim).find(|&i| near_top[i]).expect("nonempty top eigenspace");
        let mut best: Option<(f64, DVector<f64>)> = None;
        for sign in [1.0, -1.0] {
            let mut z = y_eig.clone();
            z[i_top] = sign * fill;
            let y = q * z;
            let v = objective(&y);
            if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
                best = Some((v, y));
            }
        }
        let (value, y) = best.expect("two candidates");
        return SphereQp { y, value, lambda: top, hard_case: true };
    }

    // φ(λ) = ‖y(λ)‖² − 1 decreases on (λ_max, ∞); φ(λ_max + ‖g‖) ≤ 0.
    let mut lo = top;
    let mut hi = top + g.norm().max(f64::MIN_POSITIVE);
    while norm_sq_at(hi) > 1.0 {
        hi = top + 2.0 * (hi - top);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if norm_sq_at(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = hi;
    let z = y_of(lambda);
    let y = q * (&z / z.norm());
    let value = objective(&y);
    SphereQp { y, value, lambda, hard_case: false }
}

/// Largest `rᵀr` subject to `rᵀR(r − r_eq) = 0`.
pub fn max_purity_on_ellipsoid(gen: &AffineGenerator) -> Result<PurityBound> {
    gen.require_contractive()?;
    let n = gen.n();
    let dim = gen.dim();
    let r_eq = gen.r_eq();
    if r_eq.amax() == 0.0 {
        return Ok(PurityBound {
            radius_sq: 0.0,
            argmax: CoherenceVector::zeros(n),
            lagrange_mult: 0.0,
            solver_residual: 0.0,
            hard_case: false,
        });
    }
    let chol = gen
        .r()
        .clone()
        .cholesky()
        .ok_or(Error::ContractivityViolation { min_eigenvalue: gen.min_relaxation_eigenvalue() })?;
    let l = chol.l();
    let b = l.transpose() * r_eq;
    let l_inv_t = l
        .transpose()
        .try_inverse()
        .ok_or(Error::ContractivityViolation { min_eigenvalue: gen.min_relaxation_eigenvalue() })?;
    let c = r_eq * 0.5;
    let m = l_inv_t * (b.norm() / 2.0);
    let qp = max_on_unit_sphere(&m, &c);
    let r = &c + &m * &qp.y;
    let residual = r.dot(&(gen.r() * (&r - r_eq))).abs();
    debug_assert_eq!(r.len(), dim);
    Ok(PurityBound {
        radius_sq: r.norm_squared(),
        argmax: CoherenceVector::new(n, r)?,
        lagrange_mult: qp.lambda,
        solver_residual: residual,
        hard_case: qp.hard_case,
    })
}

/// An origin-centered sphere meets any subspace through the origin in a
/// sphere of the same radius.
pub fn sphere_cross_section(bound: &PurityBound, subspace: &[usize]) -> f64 {
    let _ = subspace;
    bound.radius_sq
}

/// Sphere crossing of one diagonal axis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxisIntersection {
    pub label: String,
    pub plus: f64,
    pub minus: f64,
}

/// `±√radius_sq` on each diagonal axis.
pub fn axis_intersections(bound: &PurityBound) -> Vec<AxisIntersection> {
    let n = bound.argmax.n();
    let s = bound.radius();
    diag_labels(n).into_iter().map(|label| AxisIntersection { label, plus: s, minus: -s }).collect()
}

/// Nonzero crossing of the ellipsoid `ṗ = 0` with each diagonal axis,
/// `t = (R r_eq)_k / R_kk`.
pub fn ellipsoid_axis_intersections(gen: &AffineGenerator) -> Vec<(String, f64)> {
    let drive = gen.r() * gen.r_eq();
    diag_labels(gen.n())
        .into_iter()
        .zip(diag_slots(gen.n()))
        .map(|(label, k)| (label, drive[k] / gen.r()[(k, k)]))
        .collect()
}
