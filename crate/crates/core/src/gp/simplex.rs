//! Bounded Nelder-Mead search.

/// Simplex extent, in the caller's coordinates, below which the search stops.
pub const X_TOLERANCE: f64 = 1e-3;

/// Minimizes `objective` inside the box `[lower, upper]`, starting from
/// `start`. Trial points are projected onto the box. Returns the best point
/// seen and its value; the start point is always evaluated first, so the
/// result is never worse than the start.
pub fn minimize_bounded<F>(
    mut objective: F,
    start: &[f64],
    lower: &[f64],
    upper: &[f64],
    initial_step: f64,
    max_evals: usize,
) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> f64,
{
    let n = start.len();
    let clamp = |p: &mut Vec<f64>| {
        for i in 0..n {
            p[i] = p[i].clamp(lower[i], upper[i]);
        }
    };
    let mut evals = 0usize;
    let mut eval = |p: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = objective(p);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut x0 = start.to_vec();
    clamp(&mut x0);
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let f0 = eval(&x0, &mut evals);
    simplex.push((x0.clone(), f0));
    for i in 0..n {
        let mut p = x0.clone();
        // step away from the nearer bound so the vertex stays distinct
        p[i] += if p[i] + initial_step <= upper[i] {
            initial_step
        } else {
            -initial_step
        };
        clamp(&mut p);
        let f = eval(&p, &mut evals);
        simplex.push((p, f));
    }

    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if (worst - best).abs() <= 1e-10 * (1.0 + best.abs()) {
            break;
        }
        // A simplex squeezed against the box collapses before the values
        // agree; stop once it has no extent left.
        let extent = simplex[1..]
            .iter()
            .flat_map(|(p, _)| p.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if extent <= X_TOLERANCE {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|i| simplex[..n].iter().map(|(p, _)| p[i]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| {
            let mut p: Vec<f64> = (0..n)
                .map(|i| centroid[i] + t * (simplex[n].0[i] - centroid[i]))
                .collect();
            clamp(&mut p);
            p
        };

        let reflected = along(-1.0);
        let fr = eval(&reflected, &mut evals);
        if fr < simplex[0].1 {
            let expanded = along(-2.0);
            let fe = eval(&expanded, &mut evals);
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
            continue;
        }
        let contracted = if fr < worst { along(-0.5) } else { along(0.5) };
        let fc = eval(&contracted, &mut evals);
        if fc < worst.min(fr) {
            simplex[n] = (contracted, fc);
            continue;
        }
        // shrink toward the best vertex
        let best_point = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let mut p: Vec<f64> = (0..n)
                .map(|i| best_point[i] + 0.5 * (vertex.0[i] - best_point[i]))
                .collect();
            clamp(&mut p);
            let f = eval(&p, &mut evals);
            *vertex = (p, f);
        }
    }

    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (p, f) = simplex.swap_remove(0);
    if f <= f0 {
        (p, f)
    } else {
        (x0, f0)
    }
}
