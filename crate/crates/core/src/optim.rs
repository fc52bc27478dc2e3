//! Derivative-free Nelder–Mead minimization with restarts.

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    /// Converged when the spread of simplex values drops below
    /// `f_tol_abs + f_tol_rel * |f_best|` and the simplex is smaller than `x_tol`.
    pub f_tol_abs: f64,
    pub f_tol_rel: f64,
    pub x_tol: f64,
    pub max_evals: usize,
    /// Number of times the search is restarted from the incumbent.
    pub restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { f_tol_abs: 1e-30, f_tol_rel: 1e-10, x_tol: 1e-13, max_evals: 40_000, restarts: 40 }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
}

/// Minimizes `f` from `x0`; `scale[i]` sets the initial simplex edge in
/// coordinate `i`.
pub fn nelder_mead<F>(f: F, x0: &[f64], scale: &[f64], opts: &NelderMeadOptions) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let mut best = Minimum { x: x0.to_vec(), value: f(x0), evals: 1 };
    let mut edge: Vec<f64> = scale.to_vec();
    for _ in 0..=opts.restarts {
        let run = single_run(&f, &best.x, &edge, opts);
        let evals = best.evals + run.evals;
        let improved = best.value - run.value;
        let threshold = opts.f_tol_abs + opts.f_tol_rel * best.value.abs();
        let moved = run.value <= best.value;
        if moved {
            let step: Vec<f64> = run.x.iter().zip(&best.x).map(|(a, b)| (a - b).abs()).collect();
            best = Minimum { x: run.x, value: run.value, evals };
            // shrink the restart simplex towards the size of the last move
            for (e, (s, sc)) in edge.iter_mut().zip(step.iter().zip(scale)) {
                *e = (s * 10.0).max(sc * 1e-6).min(*sc);
            }
        } else {
            best.evals = evals;
        }
        if !moved || improved <= threshold {
            break;
        }
    }
    best
}

fn single_run<F>(f: &F, x0: &[f64], edge: &[f64], opts: &NelderMeadOptions) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += edge[i];
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| f(p)).collect();
    let mut evals = n + 1;

    while evals < opts.max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = values[n] - values[0];
        let size = simplex[1..]
            .iter()
            .flat_map(|p| p.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread <= opts.f_tol_abs + opts.f_tol_rel * values[0].abs() && size <= opts.x_tol {
            break;
        }
        if size == 0.0 {
            break;
        }

        let centroid: Vec<f64> =
            (0..n).map(|j| simplex[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[n]).map(|(c, w)| c + t * (w - c)).collect()
        };

        let reflected = along(-1.0);
        let fr = f(&reflected);
        evals += 1;
        if fr < values[0] {
            let expanded = along(-2.0);
            let fe = f(&expanded);
            evals += 1;
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
            continue;
        }
        let (contracted, fc) = if fr < values[n] {
            let p = along(-0.5);
            let v = f(&p);
            (p, v)
        } else {
            let p = along(0.5);
            let v = f(&p);
            (p, v)
        };
        evals += 1;
        if fc < values[n].min(fr) {
            simplex[n] = contracted;
            values[n] = fc;
            continue;
        }
        let best = simplex[0].clone();
        for i in 1..=n {
            simplex[i] = simplex[i].iter().zip(&best).map(|(p, b)| b + 0.5 * (p - b)).collect();
            values[i] = f(&simplex[i]);
        }
        evals += n;
    }
    let i = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    Minimum { x: simplex[i].clone(), value: values[i], evals }
}
