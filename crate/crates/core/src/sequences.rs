//! Periodic control protocols interleaving instantaneous gates with free
//! relaxation, their fixed points, NOE saturation and gate-error sweeps.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::diag::{diag_labels, diag_slots, restrict_matrix, restrict_vector, DiagonalVector};
use crate::dynamics::{AffineGenerator, AffineMap};
use crate::error::{Error, Result};
use crate::pauli::{complex, identity, kron, unitary_rep, CMatrix, CoherenceVector, PauliBasis, UnitaryRep, ZERO};
use crate::under_approx::{cyclic_permutation, permutation_matrix};
use crate::unitary_bound::{effective_purity, pps_direction};

/// Two-qubit gate matrices; qubit 1 is the carbon (left tensor factor).
pub mod gates {
    use super::*;

    fn on_qubit(qubit: usize, u: &CMatrix) -> CMatrix {
        match qubit {
            1 => kron(u, &identity(2)),
            2 => kron(&identity(2), u),
            _ => panic!("qubit index must be 1 or 2"),
        }
    }

    pub fn hadamard(qubit: usize) -> CMatrix {
        let h = CMatrix::from_row_slice(2, 2, &[
            complex(FRAC_1_SQRT_2, 0.0),
            complex(FRAC_1_SQRT_2, 0.0),
            complex(FRAC_1_SQRT_2, 0.0),
            complex(-FRAC_1_SQRT_2, 0.0),
        ]);
        on_qubit(qubit, &h)
    }

    /// `exp(−iθY/2)` on one qubit.
    pub fn ry(qubit: usize, theta: f64) -> CMatrix {
        let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        let m = CMatrix::from_row_slice(2, 2, &[complex(c, 0.0), complex(-s, 0.0), complex(s, 0.0), complex(c, 0.0)]);
        on_qubit(qubit, &m)
    }

    /// `exp(−iθZ/2)` on one qubit.
    pub fn rz(qubit: usize, theta: f64) -> CMatrix {
        let m = CMatrix::from_row_slice(2, 2, &[
            Complex64::from_polar(1.0, -theta / 2.0),
            ZERO,
            ZERO,
            Complex64::from_polar(1.0, theta / 2.0),
        ]);
        on_qubit(qubit, &m)
    }

    /// Free evolution under `(πJ/2) ZZ` for `t` seconds.
    pub fn coupling(j_hz: f64, t: f64) -> CMatrix {
        let phi = PI * j_hz * t / 2.0;
        let d: Vec<Complex64> = [1.0, -1.0, -1.0, 1.0].iter().map(|&z| Complex64::from_polar(1.0, -phi * z)).collect();
        CMatrix::from_diagonal(&nalgebra::DVector::from_vec(d))
    }

    /// Controlled NOT; `control` and `target` are 1 or 2.
    pub fn cnot(control: usize, target: usize) -> CMatrix {
        assert!(control != target && (1..=2).contains(&control) && (1..=2).contains(&target));
        let perm: Vec<usize> = (0..4)
            .map(|b| {
                let (b1, b2) = (b >> 1, b & 1);
                if control == 1 {
                    (b1 << 1) | (b2 ^ b1)
                } else {
                    ((b1 ^ b2) << 1) | b2
                }
            })
            .collect();
        permutation_matrix(&perm)
    }

    /// The cyclic relabeling `V`: `(x₁, x₂, x₃) ↦ (x₂, x₃, x₁)`.
    pub fn cyclic_v() -> CMatrix {
        permutation_matrix(&cyclic_permutation())
    }

    /// `W = CNOT₁₂ · H₁`, mapping `|00⟩` to a Bell state.
    pub fn w_gate() -> CMatrix {
        cnot(1, 2) * hadamard(1)
    }
}

/// One element of a control sequence.
#[derive(Debug, Clone)]
pub enum Step {
    Gate(UnitaryRep),
    /// Free relaxation for the given number of seconds.
    Relax(f64),
}

/// A period of steps (applied left to right) repeated `repeat` times.
#[derive(Debug, Clone)]
pub struct PeriodicSequence {
    pub steps: Vec<Step>,
    pub repeat: usize,
}

impl PeriodicSequence {
    pub fn new(steps: Vec<Step>, repeat: usize) -> Result<Self> {
        let s = Self { steps, repeat };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps.is_empty() {
            return Err(Error::Validation("sequence has no steps".into()));
        }
        for step in &self.steps {
            match step {
                Step::Relax(t) if !(t.is_finite() && *t >= 0.0) => {
                    return Err(Error::Validation(format!("relaxation time must be finite and >= 0, got {t}")));
                }
                Step::Gate(rep) if rep.n() != self.n().unwrap_or(rep.n()) => {
                    return Err(Error::Validation("gates act on different qubit counts".into()));
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn n(&self) -> Option<usize> {
        self.steps.iter().find_map(|s| match s {
            Step::Gate(rep) => Some(rep.n()),
            Step::Relax(_) => None,
        })
    }

    /// Total relaxation time per period.
    pub fn period(&self) -> f64 {
        self.steps.iter().map(|s| if let Step::Relax(t) = s { *t } else { 0.0 }).sum()
    }
}

/// `[τ − V]`: relax, then apply the cyclic relabeling.
pub fn pps_sequence(tau: f64, repeat: usize) -> Result<PeriodicSequence> {
    let basis = PauliBasis::new(2)?;
    let v = unitary_rep(&basis, &gates::cyclic_v())?;
    PeriodicSequence::new(vec![Step::Relax(tau), Step::Gate(v)], repeat)
}

/// `[W − τ − V − Wᵀ]`, i.e. the PPS period conjugated by `W`: in time order
/// `Wᵀ`, relax, `V`, `W`.
pub fn bell_sequence(tau: f64, repeat: usize) -> Result<PeriodicSequence> {
    let basis = PauliBasis::new(2)?;
    let v = unitary_rep(&basis, &gates::cyclic_v())?;
    let w = unitary_rep(&basis, &gates::w_gate())?;
    PeriodicSequence::new(vec![Step::Gate(w.transpose()), Step::Relax(tau), Step::Gate(v), Step::Gate(w)], repeat)
}

/// Bell-state direction of unit effective purity, `W_rep · pps`.
pub fn bell_direction() -> CoherenceVector {
    let basis = PauliBasis::new(2).expect("two qubits");
    let w = unitary_rep(&basis, &gates::w_gate()).expect("unitary");
    w.apply(&pps_direction())
}

fn step_map(gen: &AffineGenerator, step: &Step) -> Result<AffineMap> {
    match step {
        Step::Gate(rep) => {
            if rep.n() != gen.n() {
                return Err(Error::DimensionMismatch { expected: gen.dim(), got: rep.matrix().nrows() });
            }
            Ok(AffineMap::from_rep(rep))
        }
        Step::Relax(t) => gen.propagator(*t),
    }
}

/// The affine map `x ↦ Mx + c` of one period.
pub fn one_period_map(gen: &AffineGenerator, seq: &PeriodicSequence) -> Result<AffineMap> {
    seq.validate()?;
    let mut map = AffineMap::identity(gen.dim());
    for step in &seq.steps {
        map = map.then(&step_map(gen, step)?);
    }
    Ok(map)
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct FixedPointReport {
    pub x_star: CoherenceVector,
    pub spectral_radius: f64,
    /// Projection coefficient on the unit-purity target.
    pub eta_eff: f64,
    /// Angle between the fixed point and the target (radians).
    pub theta: f64,
    /// Distance to `x_star` after iterating the map from `r_eq`.
    pub iteration_distance: f64,
    pub iterations: usize,
    pub map: AffineMap,
}

/// Iterations of the one-period map used to cross-check the fixed point.
pub const FIXED_POINT_ITERATIONS: usize = 500;

/// Fixed point of the one-period map, `x* = (I − M)⁻¹ c`.
pub fn fixed_point(gen: &AffineGenerator, seq: &PeriodicSequence, target: &CoherenceVector) -> Result<FixedPointReport> {
    let map = one_period_map(gen, seq)?;
    let d = gen.dim();
    let a = DMatrix::identity(d, d) - &map.m;
    let sv = a.clone().svd(false, false).singular_values;
    if !(sv.min() > 1e-12 * sv.max().max(1.0)) {
        return Err(Error::NoUniqueFixedPoint);
    }
    let x = a.lu().solve(&map.c).ok_or(Error::NoUniqueFixedPoint)?;
    let mut it = gen.r_eq().clone();
    for _ in 0..FIXED_POINT_ITERATIONS {
        it = map.apply(&it);
    }
    let (eta_eff, theta) = effective_purity(&x, target);
    Ok(FixedPointReport {
        spectral_radius: spectral_radius(&map.m),
        iteration_distance: (&it - &x).norm(),
        iterations: FIXED_POINT_ITERATIONS,
        x_star: CoherenceVector::new(gen.n(), x)?,
        eta_eff,
        theta,
        map,
    })
}

/// State after each recorded period.
#[derive(Debug, Clone, Serialize)]
pub struct PeriodRecord {
    pub m: usize,
    pub t: f64,
    pub state: Vec<f64>,
    pub eta: f64,
    pub theta: f64,
}

/// Iterates the period map `seq.repeat` times from `x0`, recording every
/// `record_every` periods (and the last one).
pub fn simulate_sequence(
    gen: &AffineGenerator,
    seq: &PeriodicSequence,
    x0: &CoherenceVector,
    record_every: usize,
    target: &CoherenceVector,
) -> Result<Vec<PeriodRecord>> {
    if x0.n() != gen.n() {
        return Err(Error::DimensionMismatch { expected: gen.dim(), got: x0.len() });
    }
    let map = one_period_map(gen, seq)?;
    let every = record_every.max(1);
    let period = seq.period();
    let record = |m: usize, x: &DVector<f64>| {
        let (eta, theta) = effective_purity(x, target);
        PeriodRecord { m, t: m as f64 * period, state: x.iter().copied().collect(), eta, theta }
    };
    let mut x = x0.as_vector().clone();
    let mut out = vec![record(0, &x)];
    for m in 1..=seq.repeat {
        x = map.apply(&x);
        if m % every == 0 || m == seq.repeat {
            out.push(record(m, &x));
        }
    }
    Ok(out)
}

/// Writes simulation records as `t,<labels>,m,eta,theta` CSV.
pub fn write_records_csv<W: std::io::Write>(records: &[PeriodRecord], n: usize, writer: W) -> Result<()> {
    let basis = PauliBasis::new(n)?;
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["t".to_string()];
    header.extend(basis.labels().into_iter().skip(1));
    header.extend(["m", "eta", "theta"].map(String::from));
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![crate::io::fmt_f64(r.t)];
        row.extend(r.state.iter().map(|&v| crate::io::fmt_f64(v)));
        row.push(r.m.to_string());
        row.push(crate::io::fmt_f64(r.eta));
        row.push(crate::io::fmt_f64(r.theta));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Saturated spin for NOE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Spin {
    C,
    H,
}

impl Spin {
    fn qubit(self) -> usize {
        match self {
            Spin::C => 0,
            Spin::H => 1,
        }
    }
}

impl std::str::FromStr for Spin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "C" | "c" | "13C" => Ok(Spin::C),
            "H" | "h" | "1H" => Ok(Spin::H),
            other => Err(Error::Validation(format!("unknown spin '{other}', expected C or H"))),
        }
    }
}

/// Split of the diagonal coordinates into clamped and free ones.
fn noe_partition(spin: Spin) -> (Vec<usize>, Vec<usize>) {
    let labels = diag_labels(2);
    let q = spin.qubit();
    (0..labels.len()).partition(|&i| labels[i].as_bytes()[q] == b'Z')
}

/// Steady state while one spin is saturated: every diagonal coordinate with
/// `Z` on that spin is held at zero and the others relax to
/// `R_ff x_f = (R r_eq)_f`.
pub fn noe_steady_state(gen: &AffineGenerator, spin: Spin) -> Result<DiagonalVector> {
    if gen.n() != 2 {
        return Err(Error::Size { n: gen.n(), min: 2, max: 2 });
    }
    let (_, free) = noe_partition(spin);
    let slots = diag_slots(2);
    let free_slots: Vec<usize> = free.iter().map(|&i| slots[i]).collect();
    let r_ff = restrict_matrix(gen.r(), &free_slots);
    let drive = restrict_vector(&(gen.r() * gen.r_eq()), &free_slots);
    let xf = r_ff.cholesky().ok_or(Error::ContractivityViolation { min_eigenvalue: gen.min_relaxation_eigenvalue() })?
        .solve(&drive);
    let mut x = DVector::zeros(3);
    for (&i, &v) in free.iter().zip(xf.iter()) {
        x[i] = v;
    }
    DiagonalVector::new(2, x)
}

/// Diagonal state under saturation starting from equilibrium, at `times`.
pub fn noe_trajectory(gen: &AffineGenerator, spin: Spin, times: &[f64]) -> Result<Vec<DiagonalVector>> {
    let steady = noe_steady_state(gen, spin)?;
    let (_, free) = noe_partition(spin);
    let slots = diag_slots(2);
    let free_slots: Vec<usize> = free.iter().map(|&i| slots[i]).collect();
    let r_ff = restrict_matrix(gen.r(), &free_slots);
    let x_eq = DiagonalVector::from_coherence(&gen.equilibrium());
    let start = DVector::from_iterator(free.len(), free.iter().map(|&i| x_eq.as_vector()[i]));
    let fixed = DVector::from_iterator(free.len(), free.iter().map(|&i| steady.as_vector()[i]));
    times
        .iter()
        .map(|&t| {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::Validation(format!("time must be finite and >= 0, got {t}")));
            }
            let xf = (&r_ff * -t).exp() * (&start - &fixed) + &fixed;
            let mut x = DVector::zeros(3);
            for (&i, &v) in free.iter().zip(xf.iter()) {
                x[i] = v;
            }
            DiagonalVector::new(2, x)
        })
        .collect()
}

/// Elementary operation of a gate decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pulse {
    Ry { qubit: usize, angle: f64 },
    Rz { qubit: usize, angle: f64 },
    /// Free J evolution for the given number of seconds.
    Coupling { duration: f64 },
}

/// `CNOT_{c→t} = Ry_t(π/2) · CZ · Ry_t(−π/2)`, with
/// `CZ ∝ Rz₁(−π/2) Rz₂(−π/2) · exp(−iπ/4 ZZ)`, in time order.
fn cnot_pulses(control: usize, target: usize, j_hz: f64) -> Vec<Pulse> {
    vec![
        Pulse::Ry { qubit: target, angle: -PI / 2.0 },
        Pulse::Coupling { duration: 1.0 / (2.0 * j_hz) },
        Pulse::Rz { qubit: control, angle: -PI / 2.0 },
        Pulse::Rz { qubit: target, angle: -PI / 2.0 },
        Pulse::Ry { qubit: target, angle: PI / 2.0 },
    ]
}

/// `V = CNOT₂₁ ∘ CNOT₁₂` from single-spin rotations and J delays.
pub fn cyclic_v_pulses(j_hz: f64) -> Vec<Pulse> {
    let mut p = cnot_pulses(1, 2, j_hz);
    p.extend(cnot_pulses(2, 1, j_hz));
    p
}

/// Product of a pulse list; `Ry` angles on qubit 1 (carbon) are scaled by
/// `1 + delta_c`, on qubit 2 (proton) by `1 + delta_h`.
pub fn pulse_unitary(pulses: &[Pulse], j_hz: f64, delta_c: f64, delta_h: f64) -> CMatrix {
    let mut u = identity(4);
    for p in pulses {
        let step = match *p {
            Pulse::Ry { qubit, angle } => {
                let scale = if qubit == 1 { 1.0 + delta_c } else { 1.0 + delta_h };
                gates::ry(qubit, angle * scale)
            }
            Pulse::Rz { qubit, angle } => gates::rz(qubit, angle),
            Pulse::Coupling { duration } => gates::coupling(j_hz, duration),
        };
        u = step * u;
    }
    u
}

/// One cell of a robustness grid.
#[derive(Debug, Clone, Serialize)]
pub struct RobustnessCell {
    pub delta_c: f64,
    pub delta_h: f64,
    /// Relative deviation of the fixed point; `None` when it was lost.
    pub delta: Option<f64>,
    pub spectral_radius: f64,
}

/// Relative error `‖x*_real − x*_ideal‖/‖x*_ideal‖` of the `[τ − V]` fixed
/// point when `V` is built from miscalibrated pulses.
pub fn robustness_sweep(
    gen: &AffineGenerator,
    tau: f64,
    j_hz: f64,
    deltas_c: &[f64],
    deltas_h: &[f64],
) -> Result<Vec<RobustnessCell>> {
    let ideal = fixed_point(gen, &pps_sequence(tau, 1)?, &pps_direction())?;
    let basis = PauliBasis::new(2)?;
    let pulses = cyclic_v_pulses(j_hz);
    let grid: Vec<(f64, f64)> = deltas_c.iter().flat_map(|&c| deltas_h.iter().map(move |&h| (c, h))).collect();
    grid.par_iter()
        .map(|&(dc, dh)| {
            let v = unitary_rep(&basis, &pulse_unitary(&pulses, j_hz, dc, dh))?;
            let seq = PeriodicSequence::new(vec![Step::Relax(tau), Step::Gate(v)], 1)?;
            let map = one_period_map(gen, &seq)?;
            let rho = spectral_radius(&map.m);
            let delta = if rho < 1.0 {
                match fixed_point(gen, &seq, &pps_direction()) {
                    Ok(rep) => Some(
                        (rep.x_star.as_vector() - ideal.x_star.as_vector()).norm() / ideal.x_star.as_vector().norm(),
                    ),
                    Err(Error::NoUniqueFixedPoint) => None,
                    Err(e) => return Err(e),
                }
            } else {
                None
            };
            Ok(RobustnessCell { delta_c: dc, delta_h: dh, delta, spectral_radius: rho })
        })
        .collect()
}

/// `count` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect(),
    }
}
