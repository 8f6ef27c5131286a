//! Derivative-free simplex minimization (Nelder-Mead).
//!
//! The index estimators' objectives are cheap but nonsmooth in practice
//! (kernel ratios with leave-one-out sums), so we use the classic simplex
//! method with the standard coefficients: reflection 1, expansion 2,
//! contraction 0.5, shrink 0.5. A caller-supplied projection is applied to
//! every candidate point before evaluation, which the estimators use to
//! fold the sign-symmetric objective onto the `beta[0] > 0` half-space.

/// Coefficients and stopping rules. Defaults: spread tolerance `1e-8`,
/// at most `2000` objective evaluations.
#[derive(Debug, Clone)]
pub struct NelderMeadConfig {
    pub max_evals: usize,
    /// Stop when the objective spread over the simplex falls below this.
    pub spread_tol: f64,
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Relative step for the initial simplex edges.
    pub init_step_rel: f64,
    /// Absolute step used when a coordinate of the start point is zero.
    pub init_step_abs: f64,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        NelderMeadConfig {
            max_evals: 2000,
            spread_tol: 1e-8,
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            init_step_rel: 0.1,
            init_step_abs: 0.1,
        }
    }
}

/// Outcome of one simplex run.
#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    /// Best point seen (after projection).
    pub x: Vec<f64>,
    /// Objective at `x`.
    pub fx: f64,
    /// Objective evaluations consumed.
    pub evals: usize,
    /// True when the spread criterion triggered before the budget ran out.
    pub converged: bool,
}

/// Minimize `f` from `x0`. `project` normalizes candidate points in place
/// before each evaluation and must not change the objective value (it is
/// used for symmetries, not constraints).
pub fn minimize<F, P>(
    mut f: F,
    x0: &[f64],
    cfg: &NelderMeadConfig,
    mut project: P,
) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
    P: FnMut(&mut [f64]),
{
    let dim = x0.len();
    assert!(dim >= 1, "cannot optimize over zero dimensions");

    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    // Initial simplex: the start plus one perturbed vertex per coordinate.
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    let mut start = x0.to_vec();
    project(&mut start);
    simplex.push(start.clone());
    for d in 0..dim {
        let mut v = start.clone();
        let step = if v[d].abs() > 1e-12 {
            cfg.init_step_rel * v[d].abs()
        } else {
            cfg.init_step_abs
        };
        v[d] += step;
        project(&mut v);
        simplex.push(v);
    }
    let mut fvals: Vec<f64> = simplex.iter().map(|v| eval(v, &mut evals)).collect();

    let mut best_x = simplex[0].clone();
    let mut best_f = fvals[0];
    for (v, &fv) in simplex.iter().zip(&fvals) {
        if fv < best_f {
            best_f = fv;
            best_x = v.clone();
        }
    }

    let mut converged = false;
    while evals < cfg.max_evals {
        // Order vertices by objective, ties by index for determinism.
        let mut idx: Vec<usize> = (0..=dim).collect();
        idx.sort_by(|&a, &b| fvals[a].total_cmp(&fvals[b]).then(a.cmp(&b)));
        let (lo, hi, second_hi) = (idx[0], idx[dim], idx[dim - 1]);

        if fvals[hi] - fvals[lo] < cfg.spread_tol {
            converged = true;
            break;
        }

        // Centroid of all vertices except the worst.
        let mut centroid = vec![0.0; dim];
        for &i in idx.iter().take(dim) {
            for d in 0..dim {
                centroid[d] += simplex[i][d];
            }
        }
        for c in centroid.iter_mut() {
            *c /= dim as f64;
        }

        let make = |coef: f64, from: &[f64], project: &mut P| -> Vec<f64> {
            let mut v = vec![0.0; dim];
            for d in 0..dim {
                v[d] = centroid[d] + coef * (centroid[d] - from[d]);
            }
            project(&mut v);
            v
        };

        let reflected = make(cfg.reflection, &simplex[hi], &mut project);
        let f_r = eval(&reflected, &mut evals);

        if f_r < fvals[lo] {
            // Try to go further in the same direction.
            let expanded = make(cfg.expansion, &simplex[hi], &mut project);
            let f_e = eval(&expanded, &mut evals);
            if f_e < f_r {
                simplex[hi] = expanded;
                fvals[hi] = f_e;
            } else {
                simplex[hi] = reflected;
                fvals[hi] = f_r;
            }
        } else if f_r < fvals[second_hi] {
            simplex[hi] = reflected;
            fvals[hi] = f_r;
        } else {
            // Contract: outside (half way toward the reflected point) if
            // the reflection improved on the worst, inside otherwise.
            let (contracted, f_limit) = if f_r < fvals[hi] {
                (make(cfg.contraction * cfg.reflection, &simplex[hi], &mut project), f_r)
            } else {
                (make(-cfg.contraction, &simplex[hi], &mut project), fvals[hi])
            };
            let f_c = eval(&contracted, &mut evals);
            if f_c <= f_limit {
                simplex[hi] = contracted;
                fvals[hi] = f_c;
            } else {
                // Shrink everything toward the best vertex.
                let best = simplex[lo].clone();
                for &i in idx.iter().skip(1) {
                    for d in 0..dim {
                        simplex[i][d] = best[d] + cfg.shrink * (simplex[i][d] - best[d]);
                    }
                    let mut v = std::mem::take(&mut simplex[i]);
                    project(&mut v);
                    fvals[i] = eval(&v, &mut evals);
                    simplex[i] = v;
                }
            }
        }

        for (v, &fv) in simplex.iter().zip(&fvals) {
            if fv < best_f {
                best_f = fv;
                best_x = v.clone();
            }
        }
    }

    NelderMeadResult {
        x: best_x,
        fx: best_f,
        evals,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_project(_: &mut [f64]) {}

    #[test]
    fn finds_quadratic_minimum() {
        let res = minimize(
            |x| (x[0] - 3.0).powi(2) + 2.0 * (x[1] + 1.0).powi(2),
            &[0.0, 0.0],
            &NelderMeadConfig::default(),
            no_project,
        );
        assert!(res.converged);
        assert!((res.x[0] - 3.0).abs() < 1e-4, "{:?}", res.x);
        assert!((res.x[1] + 1.0).abs() < 1e-4, "{:?}", res.x);
        assert!(res.fx < 1e-7);
    }

    #[test]
    fn handles_rosenbrock_valley() {
        let rosen = |x: &[f64]| {
            let a = 1.0 - x[0];
            let b = x[1] - x[0] * x[0];
            a * a + 100.0 * b * b
        };
        let res = minimize(rosen, &[-1.2, 1.0], &NelderMeadConfig::default(), no_project);
        assert!(res.fx < 1e-6, "fx = {}", res.fx);
        assert!((res.x[0] - 1.0).abs() < 1e-2);
    }

    #[test]
    fn respects_eval_budget() {
        let cfg = NelderMeadConfig {
            max_evals: 40,
            spread_tol: 0.0,
            ..NelderMeadConfig::default()
        };
        let res = minimize(
            |x| x.iter().map(|v| v * v).sum::<f64>(),
            &[5.0, -3.0, 2.0],
            &cfg,
            no_project,
        );
        assert!(!res.converged);
        // One extra step may finish in flight, but the budget caps growth.
        assert!(res.evals <= 46, "evals = {}", res.evals);
    }

    #[test]
    fn projection_keeps_points_in_half_space() {
        // Sign-symmetric objective folded onto x[0] >= 0.
        let flip = |x: &mut [f64]| {
            if x[0] < 0.0 {
                for v in x.iter_mut() {
                    *v = -*v;
                }
            }
        };
        let res = minimize(
            |x| (x[0].abs() - 2.0).powi(2) + x[1] * x[1],
            &[-1.0, 0.5],
            &NelderMeadConfig::default(),
            flip,
        );
        assert!(res.x[0] >= 0.0);
        assert!((res.x[0] - 2.0).abs() < 1e-4);
    }

    #[test]
    fn never_returns_worse_than_start() {
        let f = |x: &[f64]| x[0].sin() * 10.0 + x[0] * x[0] * 0.01;
        let start = [7.3];
        let res = minimize(f, &start, &NelderMeadConfig::default(), no_project);
        assert!(res.fx <= f(&start));
    }

    #[test]
    fn is_deterministic() {
        let f = |x: &[f64]| (x[0] - 0.3).powi(2) * (1.0 + x[1].cos()) + x[1] * x[1];
        let a = minimize(f, &[2.0, 2.0], &NelderMeadConfig::default(), no_project);
        let b = minimize(f, &[2.0, 2.0], &NelderMeadConfig::default(), no_project);
        assert_eq!(a.fx.to_bits(), b.fx.to_bits());
        assert_eq!(a.evals, b.evals);
    }
}
