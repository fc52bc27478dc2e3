//! Inner bound on the reachable set from small-time local controllability
//! under the discrete set of basis permutations.
//!
//! At a diagonal state `x` each permutation `Q` supplies a velocity
//! `v_Q(x) = −[QᵀRQ]_d x + [QᵀR r_eq]_d`. The state is STLC when these
//! velocities positively span the whole diagonal space, i.e. no half-space
//! contains all of them.

use std::sync::OnceLock;

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector, Vector3};
use rayon::prelude::*;
use serde::Serialize;

use crate::diag::{character, diag_slots, restrict_matrix, restrict_vector, DiagonalVector, ProjectedControl};
use crate::dynamics::AffineGenerator;
use crate::error::{Error, Result};
use crate::pauli::{complex, unitary_rep, CMatrix, PauliBasis, UnitaryRep, ZERO};

/// Largest qubit count for which all `2^n!` permutations are enumerated.
pub const MAX_PERMUTATION_QUBITS: usize = 3;

/// All permutations of the `2^n` computational basis states, identity first.
#[derive(Debug)]
pub struct PermutationControlSet {
    n: usize,
    perms: Vec<Vec<usize>>,
    diag: Vec<DMatrix<f64>>,
    full: Vec<OnceLock<UnitaryRep>>,
}

impl PermutationControlSet {
    pub fn new(n: usize) -> Result<Self> {
        if !(1..=MAX_PERMUTATION_QUBITS).contains(&n) {
            return Err(Error::Size { n, min: 1, max: MAX_PERMUTATION_QUBITS });
        }
        let dim = 1usize << n;
        let perms = lexicographic_permutations(dim);
        let diag = perms.par_iter().map(|p| diag_permutation_rep(n, p)).collect();
        let full = (0..perms.len()).map(|_| OnceLock::new()).collect();
        Ok(Self { n, perms, diag, full })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.perms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perms.is_empty()
    }

    /// `perm[b]` is the image of basis state `b`.
    pub fn permutation(&self, k: usize) -> &[usize] {
        &self.perms[k]
    }

    pub fn index_of(&self, perm: &[usize]) -> Option<usize> {
        self.perms.iter().position(|p| p == perm)
    }

    /// Action on diagonal coordinates, `(2^n − 1)²`.
    pub fn diag_rep(&self, k: usize) -> &DMatrix<f64> {
        &self.diag[k]
    }

    /// Action on the full coherence vector, computed on first use.
    pub fn full_rep(&self, k: usize) -> Result<UnitaryRep> {
        if let Some(rep) = self.full[k].get() {
            return Ok(rep.clone());
        }
        let basis = PauliBasis::new(self.n)?;
        let rep = unitary_rep(&basis, &permutation_matrix(&self.perms[k]))?;
        Ok(self.full[k].get_or_init(|| rep).clone())
    }

    /// Projected affine fields of every permutation for `gen`.
    pub fn projected(&self, gen: &AffineGenerator) -> Result<Vec<ProjectedControl>> {
        if gen.n() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: gen.n() });
        }
        let slots = diag_slots(self.n);
        let r_dd = restrict_matrix(gen.r(), &slots);
        let b_d = restrict_vector(&(gen.r() * gen.r_eq()), &slots);
        Ok(self
            .diag
            .par_iter()
            .map(|q| ProjectedControl { a: q.transpose() * &r_dd * q, b: q.transpose() * &b_d })
            .collect())
    }
}

/// Permutations of `0..dim` in lexicographic order.
fn lexicographic_permutations(dim: usize) -> Vec<Vec<usize>> {
    let mut p: Vec<usize> = (0..dim).collect();
    let mut out = vec![p.clone()];
    loop {
        let Some(i) = (0..dim.saturating_sub(1)).rev().find(|&i| p[i] < p[i + 1]) else {
            break;
        };
        let j = (i + 1..dim).rev().find(|&j| p[j] > p[i]).expect("successor exists");
        p.swap(i, j);
        p[i + 1..].reverse();
        out.push(p.clone());
    }
    out
}

/// `P |b⟩ = |perm[b]⟩`.
pub fn permutation_matrix(perm: &[usize]) -> CMatrix {
    let dim = perm.len();
    let mut m = CMatrix::from_element(dim, dim, ZERO);
    for (b, &pb) in perm.iter().enumerate() {
        m[(pb, b)] = complex(1.0, 0.0);
    }
    m
}

/// `Q_cm = Σ_b χ_m(b) χ_c(π(b)) / 2^n`.
fn diag_permutation_rep(n: usize, perm: &[usize]) -> DMatrix<f64> {
    let dim = 1usize << n;
    DMatrix::from_fn(dim - 1, dim - 1, |c, m| {
        (0..dim).map(|b| character(n, m + 1, b) * character(n, c + 1, perm[b])).sum::<f64>() / dim as f64
    })
}

/// The cyclic relabeling `(x₁, x₂, x₃) ↦ (x₂, x₃, x₁)` of two qubits:
/// `|b₁b₂⟩ ↦ |b₂, b₁⊕b₂⟩`.
pub fn cyclic_permutation() -> Vec<usize> {
    (0..4)
        .map(|b| {
            let (b1, b2) = (b >> 1, b & 1);
            (b2 << 1) | (b1 ^ b2)
        })
        .collect()
}

/// Outcome of a cone-fullness test.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeVerdict {
    pub is_full: bool,
    /// When not full: `n ≠ 0` with `n·v_k ≤ 0` for every direction.
    pub witness: Option<DVector<f64>>,
}

impl ConeVerdict {
    fn full() -> Self {
        Self { is_full: true, witness: None }
    }

    fn separated(n: DVector<f64>) -> Self {
        Self { is_full: false, witness: Some(n) }
    }
}

const DEGENERATE_PAIR: f64 = 1e-12;
const SIGN_TOL: f64 = 1e-12;

/// Triple-product test in ℝ³: for each independent pair `(v_i, v_j)`, the
/// plane they span separates the set if all `(v_i × v_j)·v_k` share a sign.
pub fn stlc_test_3d(directions: &[DVector<f64>]) -> Result<ConeVerdict> {
    let vs: Vec<Vector3<f64>> = directions
        .iter()
        .map(|v| {
            if v.len() != 3 {
                Err(Error::DimensionMismatch { expected: 3, got: v.len() })
            } else if !v.iter().all(|x| x.is_finite()) {
                Err(Error::Validation("non-finite direction".into()))
            } else {
                Ok(Vector3::new(v[0], v[1], v[2]))
            }
        })
        .collect::<Result<_>>()?;
    let norms: Vec<f64> = vs.iter().map(|v| v.norm()).collect();
    let mut any_plane = false;
    for i in 0..vs.len() {
        for j in i + 1..vs.len() {
            let n = vs[i].cross(&vs[j]);
            let nn = n.norm();
            if nn < DEGENERATE_PAIR * norms[i] * norms[j] || nn == 0.0 {
                continue;
            }
            any_plane = true;
            let mut all_nonpos = true;
            let mut all_nonneg = true;
            for k in (0..vs.len()).filter(|&k| k != i && k != j) {
                let c = n.dot(&vs[k]);
                let tol = SIGN_TOL * nn * norms[k];
                all_nonpos &= c <= tol;
                all_nonneg &= c >= -tol;
                if !all_nonpos && !all_nonneg {
                    break;
                }
            }
            if all_nonpos {
                return Ok(ConeVerdict::separated(DVector::from_column_slice((n / nn).as_slice())));
            }
            if all_nonneg {
                return Ok(ConeVerdict::separated(DVector::from_column_slice((-n / nn).as_slice())));
            }
        }
    }
    if any_plane {
        return Ok(ConeVerdict::full());
    }
    // every direction is parallel to one line (or zero): any normal of that line separates
    let line = vs.iter().zip(&norms).find(|(_, &nv)| nv > 0.0).map(|(v, nv)| v / *nv);
    let witness = match line {
        Some(u) => {
            let helper = if u.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
            u.cross(&helper).normalize()
        }
        None => Vector3::x(),
    };
    Ok(ConeVerdict::separated(DVector::from_column_slice(witness.as_slice())))
}

/// LP tolerance on the separating objective.
const LP_TOL: f64 = 1e-9;

/// Cone fullness in ℝ^m through the alternative system: the cone is the whole
/// space iff `max tᵀn` s.t. `v̂_kᵀn ≤ 0`, `−1 ≤ n ≤ 1` is zero for every
/// `t = ±e_i`.
pub fn stlc_test_lp(directions: &[DVector<f64>]) -> Result<ConeVerdict> {
    let m = directions.first().map_or(0, DVector::len);
    if m == 0 {
        return Err(Error::Validation("directions must be nonempty vectors".into()));
    }
    if let Some(bad) = directions.iter().find(|v| v.len() != m) {
        return Err(Error::DimensionMismatch { expected: m, got: bad.len() });
    }
    if directions.iter().any(|v| !v.iter().all(|x| x.is_finite())) {
        return Err(Error::Validation("non-finite direction".into()));
    }
    let unit: Vec<DVector<f64>> = directions.iter().filter(|v| v.norm() > 0.0).map(|v| v.normalize()).collect();
    for i in 0..m {
        for sign in [1.0, -1.0] {
            let mut lp = Problem::new(OptimizationDirection::Maximize);
            let vars: Vec<_> = (0..m).map(|j| lp.add_var(if j == i { sign } else { 0.0 }, (-1.0, 1.0))).collect();
            for v in &unit {
                let terms: Vec<_> = vars.iter().zip(v.iter()).map(|(&x, &c)| (x, c)).collect();
                lp.add_constraint(terms.as_slice(), ComparisonOp::Le, 0.0);
            }
            let solution = lp
                .solve()
                .map_err(|e| Error::Numerical(format!("cone LP failed: {e}")))?
                .into_solution()
                .map_err(|_| Error::Numerical("cone LP interrupted".into()))?;
            if solution.objective() > LP_TOL {
                let n = DVector::from_iterator(m, vars.iter().map(|&x| solution.var_value(x)));
                return Ok(ConeVerdict::separated(n.normalize()));
            }
        }
    }
    Ok(ConeVerdict::full())
}

/// Dispatches to the triple-product test in ℝ³ and to the LP otherwise.
pub fn stlc_test(directions: &[DVector<f64>]) -> Result<ConeVerdict> {
    match directions.first().map(DVector::len) {
        Some(3) => stlc_test_3d(directions),
        _ => stlc_test_lp(directions),
    }
}

/// STLC test at one diagonal state.
pub fn is_stlc(controls: &[ProjectedControl], x: &DVector<f64>) -> Result<bool> {
    let dirs: Vec<DVector<f64>> = controls.iter().map(|c| c.eval(x)).collect();
    Ok(stlc_test(&dirs)?.is_full)
}

/// `x_σ = (Σ μ_k A_k)⁻¹ (Σ μ_k b_k)` over the controls in `sigma`.
pub fn hypersurface_point(controls: &[ProjectedControl], sigma: &[usize], mu: &[f64]) -> Result<DiagonalVector> {
    let m = controls.first().map_or(0, |c| c.b.len());
    if sigma.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: sigma.len() });
    }
    if mu.len() != sigma.len() {
        return Err(Error::DimensionMismatch { expected: sigma.len(), got: mu.len() });
    }
    if mu.iter().any(|&w| !(w >= 0.0)) || (mu.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Validation("weights must be non-negative and sum to one".into()));
    }
    if let Some(&k) = sigma.iter().find(|&&k| k >= controls.len()) {
        return Err(Error::Validation(format!("control index {k} out of range")));
    }
    let mut a = DMatrix::zeros(m, m);
    let mut b = DVector::zeros(m);
    for (&k, &w) in sigma.iter().zip(mu) {
        a += &controls[k].a * w;
        b += &controls[k].b * w;
    }
    let svd = a.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-12 * smax) {
        return Err(Error::SingularCombination);
    }
    let x = a.lu().solve(&b).ok_or(Error::SingularCombination)?;
    let n = (m + 1).trailing_zeros() as usize;
    DiagonalVector::new(n, x)
}

/// Points of the simplex `{μ ≥ 0, Σμ = 1}` in `k` dimensions on a lattice of
/// `resolution` subdivisions.
pub fn simplex_lattice(k: usize, resolution: usize) -> Vec<Vec<f64>> {
    fn rec(k: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for a in (0..=left).rev() {
            prefix.push(a);
            rec(k - 1, left - a, prefix, out);
            prefix.pop();
        }
    }
    if k == 0 {
        return Vec::new();
    }
    let mut ints = Vec::new();
    rec(k, resolution.max(1), &mut Vec::new(), &mut ints);
    let res = resolution.max(1) as f64;
    ints.into_iter().map(|v| v.into_iter().map(|a| a as f64 / res).collect()).collect()
}

/// Mesh of one hypersurface; singular combinations are skipped.
pub fn hypersurface_mesh(controls: &[ProjectedControl], sigma: &[usize], resolution: usize) -> Vec<DiagonalVector> {
    simplex_lattice(sigma.len(), resolution)
        .par_iter()
        .filter_map(|mu| hypersurface_point(controls, sigma, mu).ok())
        .collect()
}

/// Ray tracing parameters.
#[derive(Debug, Clone)]
pub struct RayOptions {
    /// Bisection tolerance on the radius.
    pub tol: f64,
    /// Outward marching step.
    pub step: f64,
    /// Rays still STLC at this radius are reported as not exiting.
    pub max_radius: f64,
    /// Starting point of every ray.
    pub origin: DVector<f64>,
}

impl RayOptions {
    /// Defaults scaled to a bounding radius (e.g. the purity sphere).
    pub fn for_radius(m: usize, bounding_radius: f64) -> Self {
        let r = bounding_radius.max(f64::MIN_POSITIVE);
        Self { tol: 1e-3, step: r / 100.0, max_radius: 1.5 * r, origin: DVector::zeros(m) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayBoundary {
    pub direction: Vec<f64>,
    /// Distance from the origin of the ray to the first STLC exit.
    pub radius: f64,
    /// False when the ray stayed STLC up to `max_radius`.
    pub exited: bool,
}

/// First exit from the STLC region along each ray: march outward in fixed
/// steps, then bisect the first sign change.
pub fn stlc_boundary_rays(
    controls: &[ProjectedControl],
    ray_dirs: &[DVector<f64>],
    opts: &RayOptions,
) -> Result<Vec<RayBoundary>> {
    let m = opts.origin.len();
    if controls.first().map(|c| c.b.len()) != Some(m) {
        return Err(Error::DimensionMismatch { expected: m, got: controls.first().map_or(0, |c| c.b.len()) });
    }
    if !(opts.tol > 0.0 && opts.step > 0.0 && opts.max_radius > 0.0) {
        return Err(Error::Validation("ray tolerances must be positive".into()));
    }
    for d in ray_dirs {
        if d.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: d.len() });
        }
        if (d.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::Validation("ray directions must have unit norm".into()));
        }
    }
    if !is_stlc(controls, &opts.origin)? {
        return Err(Error::OriginNotControllable);
    }
    ray_dirs
        .par_iter()
        .map(|dir| {
            let at = |s: f64| &opts.origin + dir * s;
            let mut inside = 0.0;
            let mut outside = None;
            let steps = (opts.max_radius / opts.step).ceil() as usize;
            for k in 1..=steps {
                let s = (k as f64 * opts.step).min(opts.max_radius);
                if is_stlc(controls, &at(s))? {
                    inside = s;
                } else {
                    outside = Some(s);
                    break;
                }
            }
            let Some(mut hi) = outside else {
                return Ok(RayBoundary { direction: dir.iter().copied().collect(), radius: inside, exited: false });
            };
            let mut lo = inside;
            while hi - lo > opts.tol {
                let mid = 0.5 * (lo + hi);
                if is_stlc(controls, &at(mid))? {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(RayBoundary { direction: dir.iter().copied().collect(), radius: 0.5 * (lo + hi), exited: true })
        })
        .collect()
}

/// `count` nearly uniform unit vectors in ℝ³ on a Fibonacci lattice.
pub fn fibonacci_sphere(count: usize) -> Vec<DVector<f64>> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            DVector::from_vec(vec![rho * phi.cos(), rho * phi.sin(), z])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chloroform::RateSet;
    use crate::diag::projected_field;
    use crate::over_approx::max_purity_on_ellipsoid;
    use rand::{rngs::StdRng, RngExt, SeedableRng};
    use rand_distr::StandardNormal;

    fn v3(x: f64, y: f64, z: f64) -> DVector<f64> {
        DVector::from_vec(vec![x, y, z])
    }

    #[test]
    fn set_sizes_and_identity_first() {
        let s1 = PermutationControlSet::new(1).unwrap();
        assert_eq!(s1.len(), 2);
        assert_eq!(s1.diag_rep(0)[(0, 0)], 1.0);
        assert_eq!(s1.diag_rep(1)[(0, 0)], -1.0);
        let s2 = PermutationControlSet::new(2).unwrap();
        assert_eq!(s2.len(), 24);
        assert_eq!(s2.permutation(0), &[0, 1, 2, 3]);
        assert_eq!(s2.diag_rep(0), &DMatrix::identity(3, 3));
        assert!(PermutationControlSet::new(4).is_err());
        assert!(PermutationControlSet::new(0).is_err());
    }

    #[test]
    fn three_qubit_set_is_lazy() {
        let s3 = PermutationControlSet::new(3).unwrap();
        assert_eq!(s3.len(), 40320);
        let q = s3.diag_rep(12345);
        assert!((q.transpose() * q - DMatrix::identity(7, 7)).amax() < 1e-12);
        let full = s3.full_rep(12345).unwrap();
        let slots = diag_slots(3);
        assert!((restrict_matrix(full.matrix(), &slots) - q).amax() < 1e-12);
    }

    #[test]
    fn cyclic_relabeling_is_member() {
        let set = PermutationControlSet::new(2).unwrap();
        let k = set.index_of(&cyclic_permutation()).unwrap();
        let x = v3(1.0, 2.0, 3.0);
        assert_eq!(set.diag_rep(k) * x, v3(2.0, 3.0, 1.0));
    }

    #[test]
    fn diag_reps_match_full_conjugation() {
        let set = PermutationControlSet::new(2).unwrap();
        let slots = diag_slots(2);
        for k in 0..set.len() {
            let full = set.full_rep(k).unwrap();
            let m = full.matrix();
            assert!((restrict_matrix(m, &slots) - set.diag_rep(k)).amax() < 1e-12);
            // diagonal coordinates never leak into coherences
            for (i, j) in (0..15).flat_map(|i| slots.iter().map(move |&j| (i, j))) {
                if !slots.contains(&i) {
                    assert!(m[(i, j)].abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn group_closure_and_orthogonality() {
        let set = PermutationControlSet::new(2).unwrap();
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..30 {
            let a = rng.random_range(0..24);
            let b = rng.random_range(0..24);
            // (σ∘τ)(x) = σ(τ(x))
            let composed: Vec<usize> = (0..4).map(|i| set.permutation(a)[set.permutation(b)[i]]).collect();
            let c = set.index_of(&composed).unwrap();
            assert!((set.diag_rep(c) - set.diag_rep(a) * set.diag_rep(b)).amax() < 1e-12);
            let q = set.diag_rep(a);
            let x = v3(0.3, -1.2, 2.0);
            assert!(((q * &x).norm() - x.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn reps_preserve_simplex_image() {
        let set = PermutationControlSet::new(2).unwrap();
        for k in 0..set.len() {
            // vertex states |b⟩⟨b| map to vertex states
            for b in 0..4 {
                let mut spec = vec![-0.25; 4];
                spec[b] = 0.75;
                let x = DiagonalVector::from_spectrum_deviation(2, &spec).unwrap();
                let y = DiagonalVector::new(2, set.diag_rep(k) * x.as_vector()).unwrap();
                let mut dev = y.spectrum_deviation();
                dev.sort_by(f64::total_cmp);
                assert!((dev[3] - 0.75).abs() < 1e-12 && (dev[0] + 0.25).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn projected_controls_match_field() {
        let gen = RateSet::default().assemble().unwrap();
        let set = PermutationControlSet::new(2).unwrap();
        let ctl = set.projected(&gen).unwrap();
        let x = DiagonalVector::from_slice(2, &[0.2, -0.7, 1.1]).unwrap();
        for k in [0, 5, 17, 23] {
            let f = projected_field(&gen, &set.full_rep(k).unwrap(), &x).unwrap();
            assert!((ctl[k].eval(x.as_vector()) - f.as_vector()).amax() < 1e-12);
        }
    }

    #[test]
    fn full_cone_with_axes() {
        let mut rng = StdRng::seed_from_u64(11);
        let mut dirs = vec![v3(1.0, 0.0, 0.0), v3(-1.0, 0.0, 0.0), v3(0.0, 1.0, 0.0), v3(0.0, -1.0, 0.0)];
        dirs.push(v3(0.0, 0.0, 1.0));
        dirs.push(v3(0.0, 0.0, -1.0));
        for _ in 0..18 {
            dirs.push(DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal)));
        }
        assert!(stlc_test_3d(&dirs).unwrap().is_full);
        assert!(stlc_test_lp(&dirs).unwrap().is_full);
    }

    #[test]
    fn half_space_is_not_full() {
        let mut rng = StdRng::seed_from_u64(12);
        let dirs: Vec<_> = (0..24)
            .map(|_| {
                v3(0.1 + rng.random::<f64>(), rng.sample(StandardNormal), rng.sample(StandardNormal))
            })
            .collect();
        for verdict in [stlc_test_3d(&dirs).unwrap(), stlc_test_lp(&dirs).unwrap()] {
            assert!(!verdict.is_full);
            let w = verdict.witness.unwrap();
            assert!(dirs.iter().all(|v| w.dot(v) <= 1e-10 * v.norm()));
        }
        // the only separating normal of this family is close to −e₁ when the spread is wide
        let wide: Vec<_> = (0..24)
            .map(|i| {
                let a = i as f64 / 24.0 * std::f64::consts::TAU;
                v3(0.1, a.cos() * 10.0, a.sin() * 10.0)
            })
            .collect();
        let w = stlc_test_3d(&wide).unwrap().witness.unwrap();
        assert!((w - v3(-1.0, 0.0, 0.0)).norm() < 0.2);
    }

    #[test]
    fn low_dimensional_lp_cases() {
        let one = vec![DVector::from_vec(vec![1.0]), DVector::from_vec(vec![-1.0])];
        assert!(stlc_test_lp(&one).unwrap().is_full);
        let upper = vec![
            DVector::from_vec(vec![1.0, 0.5]),
            DVector::from_vec(vec![-1.0, 0.2]),
            DVector::from_vec(vec![0.0, 1.0]),
        ];
        let v = stlc_test_lp(&upper).unwrap();
        assert!(!v.is_full);
        let w = v.witness.unwrap();
        assert!(w.norm() > 1e-6);
        for u in &upper {
            assert!(u.dot(&w) <= 1e-9);
        }
        let planar = vec![v3(1.0, 0.0, 0.0), v3(-1.0, 0.0, 0.0), v3(0.0, 1.0, 0.0), v3(0.0, -1.0, 0.0)];
        assert!(!stlc_test_3d(&planar).unwrap().is_full);
        assert!(!stlc_test_lp(&planar).unwrap().is_full);
        let collinear = vec![v3(1.0, 1.0, 0.0), v3(-2.0, -2.0, 0.0)];
        let v = stlc_test_3d(&collinear).unwrap();
        assert!(!v.is_full);
        assert!(v.witness.unwrap().dot(&v3(1.0, 1.0, 0.0)).abs() < 1e-12);
    }

    /// Random 24-direction sets biased towards a random half-space by a
    /// random offset, so both verdicts occur.
    fn random_instance(rng: &mut StdRng) -> Vec<DVector<f64>> {
        let axis = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal)).normalize();
        let offset = rng.random::<f64>() * 0.8 - 0.4;
        let mut out = Vec::with_capacity(24);
        while out.len() < 24 {
            let v = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal)).normalize();
            if v.dot(&axis) >= offset {
                out.push(v * (0.1 + rng.random::<f64>()));
            }
        }
        out
    }

    #[test]
    fn triple_products_agree_with_lp() {
        let mut rng = StdRng::seed_from_u64(2024);
        let (mut full, mut not_full) = (0, 0);
        for _ in 0..200 {
            let dirs = random_instance(&mut rng);
            let a = stlc_test_3d(&dirs).unwrap();
            let b = stlc_test_lp(&dirs).unwrap();
            assert_eq!(a.is_full, b.is_full);
            if a.is_full {
                full += 1;
            } else {
                not_full += 1;
            }
        }
        assert!(full > 20 && not_full > 20, "{full} / {not_full}");
    }

    #[test]
    fn chloroform_directions_at_equilibrium() {
        let gen = RateSet::default().assemble().unwrap();
        let set = PermutationControlSet::new(2).unwrap();
        let ctl = set.projected(&gen).unwrap();
        let x_eq = v3(1.0, 4.0, 0.0);
        let dirs: Vec<_> = ctl.iter().map(|c| c.eval(&x_eq)).collect();
        let a = stlc_test_3d(&dirs).unwrap();
        let b = stlc_test_lp(&dirs).unwrap();
        assert_eq!(a.is_full, b.is_full);
        // the maximally mixed state is deep inside
        assert!(is_stlc(&ctl, &v3(0.0, 0.0, 0.0)).unwrap());
    }

    #[test]
    fn hypersurface_points() {
        let gen = RateSet::default().assemble().unwrap();
        let set = PermutationControlSet::new(2).unwrap();
        let ctl = set.projected(&gen).unwrap();
        let x = hypersurface_point(&ctl, &[0, 3, 7], &[1.0, 0.0, 0.0]).unwrap();
        assert!((x.as_vector() - v3(1.0, 4.0, 0.0)).amax() < 1e-12);

        let sigma = [2, 9, 20];
        let mu = [1.0 / 3.0; 3];
        let x = hypersurface_point(&ctl, &sigma, &mu).unwrap();
        // averaged affine system: Σ μ_k (b_k − A_k x) = 0
        let residual: DVector<f64> =
            sigma.iter().map(|&k| (&ctl[k].b - &ctl[k].a * x.as_vector()) / 3.0).sum();
        assert!(residual.amax() < 1e-12);

        let bound = max_purity_on_ellipsoid(&gen).unwrap();
        let v = set.index_of(&cyclic_permutation()).unwrap();
        let xv = hypersurface_point(&ctl, &[v, 0, 1], &[1.0, 0.0, 0.0]).unwrap();
        assert!(xv.as_vector().iter().all(|x| x.is_finite()));
        assert!(xv.as_vector().norm_squared() <= bound.radius_sq * (1.0 + 1e-6));

        assert!(matches!(hypersurface_point(&ctl, &[0, 1], &[0.5, 0.5]), Err(Error::DimensionMismatch { .. })));
        assert!(hypersurface_point(&ctl, &[0, 1, 2], &[0.5, 0.6, -0.1]).is_err());
    }

    #[test]
    fn singular_combination_reported() {
        let zero = ProjectedControl { a: DMatrix::zeros(3, 3), b: DVector::zeros(3) };
        let ctl = vec![zero.clone(), zero.clone(), zero];
        assert!(matches!(hypersurface_point(&ctl, &[0, 1, 2], &[0.2, 0.3, 0.5]), Err(Error::SingularCombination)));
    }

    #[test]
    fn lattice_counts() {
        assert_eq!(simplex_lattice(3, 10).len(), 66);
        assert!(simplex_lattice(3, 4).iter().all(|m| (m.iter().sum::<f64>() - 1.0).abs() < 1e-12));
        assert_eq!(simplex_lattice(1, 5), vec![vec![1.0]]);
    }

    #[test]
    fn mesh_inside_sphere() {
        let gen = RateSet::default().assemble().unwrap();
        let set = PermutationControlSet::new(2).unwrap();
        let ctl = set.projected(&gen).unwrap();
        let bound = max_purity_on_ellipsoid(&gen).unwrap();
        for sigma in [[0, 1, 2], [3, 11, 19], [5, 6, 23]] {
            for x in hypersurface_mesh(&ctl, &sigma, 6) {
                assert!(x.as_vector().norm_squared() <= bound.radius_sq * (1.0 + 1e-6));
            }
        }
    }

    #[test]
    fn boundary_rays() {
        let gen = RateSet::default().assemble().unwrap();
        let set = PermutationControlSet::new(2).unwrap();
        let ctl = set.projected(&gen).unwrap();
        let bound = max_purity_on_ellipsoid(&gen).unwrap();
        let opts = RayOptions::for_radius(3, bound.radius());
        let dirs = vec![v3(1.0, 1.0, 1.0).normalize(), v3(-1.0, -4.0, 0.0).normalize()];
        let rays = stlc_boundary_rays(&ctl, &dirs, &opts).unwrap();
        for r in &rays {
            assert!(r.exited && r.radius > 0.0 && r.radius.is_finite());
            assert!(r.radius <= bound.radius() * (1.0 + 1e-6));
        }
        let again = stlc_boundary_rays(&ctl, &dirs, &opts).unwrap();
        assert_eq!(rays, again);

        let from_eq = RayOptions { origin: v3(1.0, 4.0, 0.0), ..opts.clone() };
        assert!(matches!(stlc_boundary_rays(&ctl, &dirs, &from_eq), Err(Error::OriginNotControllable)));
        assert!(stlc_boundary_rays(&ctl, &[v3(1.0, 1.0, 0.0)], &opts).is_err());
    }

    #[test]
    fn fibonacci_rays_are_unit() {
        let rays = fibonacci_sphere(200);
        assert_eq!(rays.len(), 200);
        assert!(rays.iter().all(|r| (r.norm() - 1.0).abs() < 1e-12));
        let mean: DVector<f64> = rays.iter().sum::<DVector<f64>>() / 200.0;
        assert!(mean.norm() < 0.02);
    }
}
