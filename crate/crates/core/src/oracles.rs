//! Independent reference computations used to cross-check the main solvers.
//!
//! Nothing in here is on the production path of another module: the RK4
//! integrator checks the exact affine propagator, the projected-gradient
//! multi-start checks the secular-equation QP solver, and the random samplers
//! feed property tests and certification sweeps.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, RngExt};
use rand_distr::StandardNormal;

use crate::dynamics::AffineGenerator;
use crate::pauli::CMatrix;

/// Haar-random unitary via QR of a complex Ginibre matrix with phase fix.
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let z = CMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let qr = z.qr();
    let q = qr.q();
    let r = qr.r();
    let mut u = q.clone();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..dim {
            u[(i, j)] = q[(i, j)] * phase;
        }
    }
    u
}

/// Random full-rank density matrix `G G† / Tr(G G†)`.
pub fn random_density_matrix<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let m = &g * g.adjoint();
    let tr = m.trace();
    m / tr
}

/// Random symmetric positive definite matrix with eigenvalues in `[lo, hi]`.
pub fn random_spd<R: Rng + ?Sized>(dim: usize, lo: f64, hi: f64, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = g.qr().q();
    let eig = DVector::from_fn(dim, |_, _| lo + (hi - lo) * rng.random::<f64>());
    &q * DMatrix::from_diagonal(&eig) * q.transpose()
}

/// Classic fixed-step RK4 on `ṙ = (H - R) r + v`.
pub fn rk4_evolve(gen: &AffineGenerator, r0: &DVector<f64>, t: f64, steps: usize) -> DVector<f64> {
    let a = gen.h() - gen.r();
    let v = gen.v();
    let f = |r: &DVector<f64>| &a * r + v;
    let h = t / steps as f64;
    let mut r = r0.clone();
    for _ in 0..steps {
        let k1 = f(&r);
        let k2 = f(&(&r + &k1 * (h / 2.0)));
        let k3 = f(&(&r + &k2 * (h / 2.0)));
        let k4 = f(&(&r + &k3 * h));
        r += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    r
}

/// Result of the multi-start projected-gradient search.
#[derive(Debug, Clone)]
pub struct GradientOracleResult {
    pub best_value: f64,
    pub best_point: DVector<f64>,
    pub values: Vec<f64>,
}

/// Maximizes `rᵀr` on the ellipsoid `rᵀR(r - r_eq) = 0` by Riemannian gradient
/// ascent with radial retraction about the ellipsoid center `r_eq/2`.
///
/// Works directly in `r` coordinates and never factorizes `R`.
pub fn purity_bound_gradient_oracle<R: Rng + ?Sized>(
    rmat: &DMatrix<f64>,
    r_eq: &DVector<f64>,
    starts: usize,
    rng: &mut R,
) -> GradientOracleResult {
    let dim = r_eq.len();
    let center = r_eq * 0.5;
    let level = center.dot(&(rmat * &center));
    let retract = |p: &DVector<f64>| -> DVector<f64> {
        let d = p - &center;
        let q = d.dot(&(rmat * &d));
        &center + d * (level / q).sqrt()
    };
    // Step scale: the objective's Hessian is 2I, so O(1/‖R‖·λ_min) steps are safe
    // after normalizing the gradient by the ellipsoid size.
    let diameter = 2.0 * (level / rmat.symmetric_eigenvalues().min()).sqrt();
    let mut values = Vec::with_capacity(starts);
    let mut best_value = f64::NEG_INFINITY;
    let mut best_point = DVector::zeros(dim);
    for _ in 0..starts {
        let dir = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut p = retract(&(&center + dir));
        let mut step = 0.1 * diameter;
        let mut value = p.norm_squared();
        for _ in 0..200_000 {
            let grad = &p * 2.0;
            let normal = rmat * (&p * 2.0 - r_eq);
            let tangent = &grad - &normal * (grad.dot(&normal) / normal.norm_squared());
            let tn = tangent.norm();
            if tn < 1e-15 * (1.0 + p.norm()) {
                break;
            }
            let candidate = retract(&(&p + &tangent * (step / tn)));
            let cv = candidate.norm_squared();
            if cv > value {
                p = candidate;
                value = cv;
                step *= 1.2;
            } else {
                step *= 0.5;
                if step < 1e-14 * diameter {
                    break;
                }
            }
        }
        values.push(value);
        if value > best_value {
            best_value = value;
            best_point = p;
        }
    }
    GradientOracleResult { best_value, best_point, values }
}
