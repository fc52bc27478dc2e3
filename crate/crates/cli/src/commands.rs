use std::path::Path;

use nalgebra::DVector;
use rand::rngs::StdRng;
use rand::SeedableRng;
use reachset::chloroform::{fit_rates, synthesize, Block, FitOptions, RateSet, TrajectorySample};
use reachset::diag::{diag_labels, DiagonalVector};
use reachset::dynamics::AffineGenerator;
use reachset::io::{fmt_f64, to_json_string};
use reachset::oracles::purity_bound_gradient_oracle;
use reachset::over_approx::{ellipsoid_axis_intersections, max_purity_on_ellipsoid, PurityBound};
use reachset::pauli::{CoherenceVector, CoherenceVectorJson, PauliBasis};
use reachset::sequences::{
    bell_direction, bell_sequence, fixed_point, linspace, noe_steady_state, noe_trajectory, pps_sequence,
    robustness_sweep, simulate_sequence, write_records_csv, PeriodicSequence, Spin,
};
use reachset::under_approx::{fibonacci_sphere, stlc_boundary_rays, PermutationControlSet, RayBoundary, RayOptions};
use reachset::unitary_bound::{kappa_unitary_max, polytope_vertices, pps_direction};
use reachset::{Error, Result};
use serde_json::{json, Value};

use crate::model::{read_rates, require_file, require_parent, Model};
use crate::output::{csv_string, emit, Run};
use crate::{
    BoundArgs, FitArgs, Figure1Args, GeneratorArgs, NoeArgs, Region, RobustnessArgs, SimulateArgs, StlcArgs,
    SynthArgs, UnitaryArgs,
};

/// Relative agreement required between the QP and the gradient oracle.
const CERTIFY_TOL: f64 = 1e-6;

fn check_out(out: Option<&Path>) -> Result<()> {
    out.map_or(Ok(()), require_parent)
}

fn positive(name: &str, x: f64) -> Result<f64> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(Error::Validation(format!("{name} must be positive and finite, got {x}")))
    }
}

fn parse_rays(spec: &str) -> Result<Vec<DVector<f64>>> {
    let bad = || Error::Validation(format!("ray set '{spec}' not understood, expected fibonacci:<count>"));
    let (kind, count) = spec.split_once(':').ok_or_else(bad)?;
    let count: usize = count.parse().map_err(|_| bad())?;
    if kind != "fibonacci" || count == 0 {
        return Err(bad());
    }
    Ok(fibonacci_sphere(count))
}

/// `lo:hi:count` to an inclusive grid.
fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::Validation(format!("grid '{spec}' not understood, expected lo:hi:count"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, n] = parts.as_slice() else {
        return Err(bad());
    };
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if n == 0 || !lo.is_finite() || !hi.is_finite() || hi < lo {
        return Err(bad());
    }
    Ok(linspace(lo, hi, n))
}

fn in_sector(d: &[f64]) -> bool {
    let (x1, x2, x3) = (d[0], d[1], d[2]);
    0.0 <= x3 && x3 <= x1 && x1 <= x2
}

fn require_two_qubits(gen: &AffineGenerator) -> Result<()> {
    if gen.n() != 2 {
        return Err(Error::Validation(format!("this command needs a two-qubit model, got n = {}", gen.n())));
    }
    Ok(())
}

fn bound_json(bound: &PurityBound, gen: &AffineGenerator) -> Value {
    let mut v = serde_json::to_value(bound.to_json()).expect("bound json");
    let axes: Vec<Value> =
        ellipsoid_axis_intersections(gen).into_iter().map(|(label, x)| json!({"label": label, "max": x})).collect();
    v["ellipsoid_axis_intersections"] = Value::Array(axes);
    v
}

pub fn bound(a: &BoundArgs, eps: f64) -> Result<()> {
    let run = Run::start("bound", &json!({"args": a, "epsilon": eps}));
    check_out(a.out.as_deref())?;
    let Model { gen, .. } = a.model.load(eps)?;
    let bound = max_purity_on_ellipsoid(&gen)?;
    let mut out = bound_json(&bound, &gen);
    let mut failure = None;
    if a.certify {
        if a.starts == 0 {
            return Err(Error::Validation("--starts must be at least 1".into()));
        }
        let mut rng = StdRng::seed_from_u64(a.seed);
        let oracle = purity_bound_gradient_oracle(gen.r(), gen.r_eq(), a.starts, &mut rng);
        let scale = bound.radius_sq.max(f64::MIN_POSITIVE);
        let gap = (bound.radius_sq - oracle.best_value) / scale;
        let certified = gap.abs() <= CERTIFY_TOL;
        out["certificate"] = json!({
            "oracle_radius_sq": oracle.best_value,
            "relative_gap": gap,
            "starts": a.starts,
            "seed": a.seed,
            "tolerance": CERTIFY_TOL,
            "certified": certified,
        });
        if !certified {
            failure = Some(Error::Numerical(format!(
                "oracle disagrees with the QP solution (relative gap {gap:.3e})"
            )));
        }
    }
    emit(a.out.as_deref(), &to_json_string(&out))?;
    run.finish(a.out.as_deref(), json!({"hard_case": bound.hard_case, "lagrange_mult": bound.lagrange_mult}))?;
    failure.map_or(Ok(()), Err)
}

struct StlcTrace {
    rays: Vec<RayBoundary>,
    max_radius: f64,
}

fn trace_stlc(gen: &AffineGenerator, rays: &str, tol: f64, step: Option<f64>, origin: Option<&[f64]>) -> Result<StlcTrace> {
    require_two_qubits(gen)?;
    let dirs = parse_rays(rays)?;
    let bound = max_purity_on_ellipsoid(gen)?;
    let mut opts = RayOptions::for_radius(3, bound.radius());
    opts.tol = positive("--tol", tol)?;
    if let Some(s) = step {
        opts.step = positive("--step", s)?;
    }
    if let Some(o) = origin {
        if o.len() != 3 {
            return Err(Error::DimensionMismatch { expected: 3, got: o.len() });
        }
        opts.origin = DVector::from_column_slice(o);
    }
    let controls = PermutationControlSet::new(2)?.projected(gen)?;
    let rays = stlc_boundary_rays(&controls, &dirs, &opts)?;
    Ok(StlcTrace { rays, max_radius: opts.max_radius })
}

fn rays_csv(rays: &[RayBoundary], region: Option<Region>) -> Result<String> {
    let header = ["ray_x", "ray_y", "ray_z", "boundary_radius"].map(String::from);
    let rows: Vec<Vec<String>> = rays
        .iter()
        .filter(|r| region.is_none() || in_sector(&r.direction))
        .map(|r| r.direction.iter().chain([&r.radius]).map(|&x| fmt_f64(x)).collect())
        .collect();
    csv_string(&header, &rows)
}

pub fn stlc(a: &StlcArgs, eps: f64) -> Result<()> {
    let run = Run::start("stlc", &json!({"args": a, "epsilon": eps}));
    check_out(a.out.as_deref())?;
    let Model { gen, .. } = a.model.load(eps)?;
    let trace = trace_stlc(&gen, &a.rays, a.tol, a.step, a.origin.as_deref())?;
    emit(a.out.as_deref(), &rays_csv(&trace.rays, a.region)?)?;
    let open = trace.rays.iter().filter(|r| !r.exited).count();
    run.finish(a.out.as_deref(), json!({"rays": trace.rays.len(), "not_exited": open, "max_radius": trace.max_radius}))
}

fn resolve_target(spec: &str, n: usize) -> Result<CoherenceVector> {
    let target = match spec {
        "pps" => pps_direction(),
        "bell" => bell_direction(),
        path => {
            let p = Path::new(path);
            require_file(p)?;
            let json: CoherenceVectorJson = serde_json::from_str(&std::fs::read_to_string(p)?)?;
            CoherenceVector::from_json(&json)?
        }
    };
    if target.n() != n {
        return Err(Error::DimensionMismatch { expected: 4usize.pow(n as u32) - 1, got: target.len() });
    }
    Ok(target)
}

pub fn unitary(a: &UnitaryArgs, eps: f64) -> Result<()> {
    let run = Run::start("unitary-bound", &json!({"args": a, "epsilon": eps}));
    check_out(a.out.as_deref())?;
    let Model { gen, .. } = a.model.load(eps)?;
    let target = resolve_target(&a.target, gen.n())?;
    let rho = gen.equilibrium();
    let kappa = kappa_unitary_max(&rho, &target)?;
    let polytope = polytope_vertices(&rho)?;
    let diag: Vec<Vec<f64>> = polytope.diagonal_vertices().iter().map(|v| v.as_slice().to_vec()).collect();
    let mut out = json!({
        "target": target.to_json(),
        "kappa_max": kappa,
        "spectrum": polytope.spectrum,
        "diagonal_labels": diag_labels(gen.n()),
        "vertices": diag,
    });
    let target_diag = DiagonalVector::from_coherence(&target);
    if (target_diag.embed().as_vector() - target.as_vector()).norm() == 0.0 {
        let u = target_diag.as_vector().normalize();
        let radius = polytope.radius_along(&DiagonalVector::new(gen.n(), u)?);
        out["polytope_radius_along_target"] = json!(radius);
    }
    emit(a.out.as_deref(), &to_json_string(&out))?;
    run.finish(a.out.as_deref(), Value::Null)
}

fn build_sequence(kind: &str, tau: f64, m: usize) -> Result<(PeriodicSequence, CoherenceVector)> {
    match kind {
        "pps" => Ok((pps_sequence(tau, m)?, pps_direction())),
        "bell" => Ok((bell_sequence(tau, m)?, bell_direction())),
        other => Err(Error::Validation(format!("unknown sequence '{other}', expected pps or bell"))),
    }
}

pub fn simulate(a: &SimulateArgs, eps: f64) -> Result<()> {
    let run = Run::start("simulate", &json!({"args": a, "epsilon": eps}));
    check_out(a.out.as_deref())?;
    let Model { gen, .. } = a.model.load(eps)?;
    require_two_qubits(&gen)?;
    let (seq, target) = build_sequence(&a.seq, a.tau, a.m)?;
    let x0 = match a.start.as_str() {
        "eq" => gen.equilibrium(),
        "zero" => CoherenceVector::zeros(gen.n()),
        other => return Err(Error::Validation(format!("unknown start '{other}', expected eq or zero"))),
    };
    let records = simulate_sequence(&gen, &seq, &x0, a.record_every, &target)?;
    let mut buf = Vec::new();
    write_records_csv(&records, gen.n(), &mut buf)?;
    emit(a.out.as_deref(), &String::from_utf8(buf).expect("utf-8 csv"))?;
    let fp = fixed_point(&gen, &seq, &target)?;
    let summary = json!({
        "fixed_point": fp.x_star.as_slice(),
        "eta_eff": fp.eta_eff,
        "theta": fp.theta,
        "spectral_radius": fp.spectral_radius,
        "iteration_distance": fp.iteration_distance,
    });
    if a.out.is_some() {
        eprint!("{}", to_json_string(&summary));
    }
    run.finish(a.out.as_deref(), summary)
}

pub fn noe(a: &NoeArgs, eps: f64) -> Result<()> {
    let run = Run::start("noe", &json!({"args": a, "epsilon": eps}));
    check_out(a.out.as_deref())?;
    let spin: Spin = a.saturate.parse()?;
    let Model { gen, .. } = a.model.load(eps)?;
    let x = noe_steady_state(&gen, spin)?;
    let bound = max_purity_on_ellipsoid(&gen)?;
    let x_eq = DiagonalVector::from_coherence(&gen.equilibrium());
    let out = json!({
        "saturate": spin,
        "labels": diag_labels(2),
        "x": x.as_slice(),
        "x_eq": x_eq.as_slice(),
        "sphere_radius": bound.radius(),
    });
    emit(a.out.as_deref(), &to_json_string(&out))?;
    run.finish(a.out.as_deref(), Value::Null)
}

pub fn robustness(a: &RobustnessArgs, eps: f64) -> Result<()> {
    let run = Run::start("robustness", &json!({"args": a, "epsilon": eps}));
    check_out(a.out.as_deref())?;
    let grid = parse_grid(&a.grid)?;
    let Model { gen, rates } = a.model.load(eps)?;
    require_two_qubits(&gen)?;
    let j = match (a.j_hz, &rates) {
        (Some(j), _) => j,
        (None, Some(r)) => r.j_hz,
        (None, None) => return Err(Error::Validation("--j-hz is required with --gen".into())),
    };
    let j = positive("J", j)?;
    let cells = robustness_sweep(&gen, positive("--tau", a.tau)?, j, &grid, &grid)?;
    let header = ["delta_c", "delta_h", "delta", "spectral_radius"].map(String::from);
    let rows: Vec<Vec<String>> = cells
        .iter()
        .map(|c| {
            vec![fmt_f64(c.delta_c), fmt_f64(c.delta_h), fmt_f64(c.delta.unwrap_or(f64::NAN)), fmt_f64(c.spectral_radius)]
        })
        .collect();
    emit(a.out.as_deref(), &csv_string(&header, &rows)?)?;
    let max = cells.iter().filter_map(|c| c.delta).fold(0.0, f64::max);
    let lost = cells.iter().filter(|c| c.delta.is_none()).count();
    run.finish(a.out.as_deref(), json!({"max_delta": max, "cells_without_fixed_point": lost, "J_hz": j}))
}

pub fn fit(a: &FitArgs) -> Result<()> {
    let run = Run::start("fit", a);
    check_out(a.out.as_deref())?;
    let block: Block = a.block.parse()?;
    for p in &a.traj {
        require_file(p)?;
    }
    let init = match &a.init {
        Some(p) => read_rates(p)?,
        None => RateSet::default(),
    };
    let trajs = a.traj.iter().map(|p| TrajectorySample::read_csv_path(p)).collect::<Result<Vec<_>>>()?;
    let res = fit_rates(&trajs, block, &init, &FitOptions::default())?;
    emit(a.out.as_deref(), &res.rates.to_json_string())?;
    let fitted: Vec<Value> =
        block.rate_indices().iter().map(|&k| json!({"rate": format!("r{}", k + 1), "value": res.rates.r[k]})).collect();
    run.finish(
        a.out.as_deref(),
        json!({
            "block": block.name(),
            "fitted": fitted,
            "objective": res.objective,
            "rms": res.rms,
            "samples": res.samples,
            "evaluations": res.evaluations,
        }),
    )
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let run = Run::start("synth", a);
    check_out(a.out.as_deref())?;
    let block: Block = a.block.parse()?;
    let rates = match &a.rates {
        Some(p) => read_rates(p)?,
        None => RateSet::default(),
    };
    let times = parse_grid(&a.times)?;
    let mut sample = synthesize(&rates, block, &a.initial, &times)?;
    if a.noise > 0.0 {
        sample = sample.with_noise(a.noise, &mut StdRng::seed_from_u64(a.seed))?;
    }
    let mut buf = Vec::new();
    sample.write_csv(&mut buf)?;
    emit(a.out.as_deref(), &String::from_utf8(buf).expect("utf-8 csv"))?;
    run.finish(a.out.as_deref(), Value::Null)
}

pub fn generator(a: &GeneratorArgs, eps: f64) -> Result<()> {
    let run = Run::start("generator", &json!({"args": a, "epsilon": eps}));
    check_out(a.out.as_deref())?;
    let Model { gen, .. } = a.model.load(eps)?;
    emit(a.out.as_deref(), &to_json_string(&gen.to_json()))?;
    run.finish(a.out.as_deref(), Value::Null)
}

fn diag_of(basis: &PauliBasis, state: &[f64]) -> Vec<f64> {
    diag_labels(2).iter().map(|l| state[basis.coord_of(l).expect("diagonal label")]).collect()
}

pub fn figure1(a: &Figure1Args, eps: f64) -> Result<()> {
    let run = Run::start("figure1", &json!({"args": a, "epsilon": eps}));
    let Model { gen, .. } = a.model.load(eps)?;
    require_two_qubits(&gen)?;
    std::fs::create_dir_all(&a.out_dir)?;
    let dir = &a.out_dir;
    let basis = PauliBasis::new(2)?;
    let labels = diag_labels(2);

    let bound = max_purity_on_ellipsoid(&gen)?;
    std::fs::write(dir.join("sphere.json"), to_json_string(&bound_json(&bound, &gen)))?;

    let trace = trace_stlc(&gen, &a.rays, a.tol, None, None)?;
    std::fs::write(dir.join("stlc_rays.csv"), rays_csv(&trace.rays, a.region)?)?;

    let polytope = polytope_vertices(&gen.equilibrium())?;
    let rows: Vec<Vec<String>> =
        polytope.diagonal_vertices().iter().map(|v| v.as_slice().iter().map(|&x| fmt_f64(x)).collect()).collect();
    std::fs::write(dir.join("polytope_vertices.csv"), csv_string(&labels, &rows)?)?;

    let (seq, target) = build_sequence("pps", a.tau, a.m)?;
    let records = simulate_sequence(&gen, &seq, &gen.equilibrium(), 1, &target)?;
    let mut header = vec!["t".to_string(), "m".to_string()];
    header.extend(labels.iter().cloned());
    header.extend(["eta", "theta"].map(String::from));
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            let mut row = vec![fmt_f64(r.t), r.m.to_string()];
            row.extend(diag_of(&basis, &r.state).into_iter().map(fmt_f64));
            row.extend([fmt_f64(r.eta), fmt_f64(r.theta)]);
            row
        })
        .collect();
    std::fs::write(dir.join("pps_trajectory.csv"), csv_string(&header, &rows)?)?;

    let times = linspace(0.0, 100.0, 201);
    let noe_states = noe_trajectory(&gen, Spin::C, &times)?;
    let mut header = vec!["t".to_string()];
    header.extend(labels.iter().cloned());
    let rows: Vec<Vec<String>> = times
        .iter()
        .zip(&noe_states)
        .map(|(&t, x)| std::iter::once(t).chain(x.as_slice().iter().copied()).map(fmt_f64).collect())
        .collect();
    std::fs::write(dir.join("noe_trajectory.csv"), csv_string(&header, &rows)?)?;

    let fp = fixed_point(&gen, &pps_sequence(a.tau, 1)?, &target)?;
    let noe_x = noe_steady_state(&gen, Spin::C)?;
    let summary = json!({
        "sphere_radius_sq": bound.radius_sq,
        "sphere_radius": bound.radius(),
        "unitary_kappa_max": kappa_unitary_max(&gen.equilibrium(), &target)?,
        "pps_fixed_point": {
            "x": diag_of(&basis, fp.x_star.as_slice()),
            "eta_eff": fp.eta_eff,
            "theta": fp.theta,
        },
        "noe_steady_state": noe_x.as_slice(),
        "diagonal_labels": labels,
    });
    std::fs::write(dir.join("summary.json"), to_json_string(&summary))?;
    run.write_meta(&dir.join("meta.json"), Value::Null)
}
