use super::polish::polish_l1;
use super::{check_problem, finish, initial_guess, stopping_threshold, RegularizedSolution, SolverConfig};
use crate::error::{Error, Result};
use crate::linear::{dot, norm_sq, operator_norm_estimate, sub, DataVector, LinearForwardMap, POWER_ITERATIONS};
use crate::regularizers::Regularizer;

/// `alpha * dist(-g / alpha, dJ(x))` for the kinds with a prox.
fn defect(j: &Regularizer, alpha: f64, x: &[f64], g: &[f64]) -> f64 {
    match j {
        Regularizer::L1 => x
            .iter()
            .zip(g)
            .map(|(&xi, &gi)| {
                let d = if xi != 0.0 {
                    gi + alpha * xi.signum()
                } else {
                    (gi.abs() - alpha).max(0.0)
                };
                d * d
            })
            .sum::<f64>()
            .sqrt(),
        _ => x
            .iter()
            .zip(g)
            .map(|(xi, gi)| (gi + alpha * xi).powi(2))
            .sum::<f64>()
            .sqrt(),
    }
}

const FIRST_POLISH: usize = 100;

/// Polish attempts at `100 * 2^k` iterations.
fn polish_due(iterations: usize) -> bool {
    iterations >= FIRST_POLISH
        && iterations.is_multiple_of(FIRST_POLISH)
        && (iterations / FIRST_POLISH).is_power_of_two()
}

struct Point {
    x: Vec<f64>,
    fx: Vec<f64>,
    g: Vec<f64>,
}

fn smooth(fx: &[f64], v: &[f64]) -> f64 {
    0.5 * norm_sq(&sub(fx, v))
}

/// Accelerated proximal gradient with backtracking and restart on any
/// increase of the objective, so the accepted iterates are monotone.
///
/// Stops on the optimality defect; `p_alpha` is the subgradient read off
/// the optimality condition.
pub fn solve_fista(
    f: &LinearForwardMap,
    v: &DataVector,
    alpha: f64,
    j: &Regularizer,
    cfg: &SolverConfig,
) -> Result<RegularizedSolution> {
    check_problem(f, v, alpha, cfg)?;
    if !j.has_prox() {
        return Err(Error::Unsupported(format!(
            "FISTA needs a proximal map, got {}",
            j.kind()
        )));
    }
    let threshold = stopping_threshold(f, v, cfg.tol);
    let sigma = operator_norm_estimate(f, POWER_ITERATIONS, cfg.seed)?;
    let mut lip = if sigma > 0.0 { sigma * sigma } else { 1.0 };
    lip /= cfg.step_safety;

    let at = |x: Vec<f64>| {
        let fx = f.apply(&x);
        let g = f.adjoint(&sub(&fx, v));
        Point { x, fx, g }
    };
    let objective = |p: &Point| smooth(&p.fx, v) + alpha * j.value(&p.x);
    let polished = |x: &[f64], def: f64| -> Option<(Point, f64)> {
        if !matches!(j, Regularizer::L1) {
            return None;
        }
        let cand = at(polish_l1(f, v, alpha, x)?);
        let d = defect(j, alpha, &cand.x, &cand.g);
        (d < def).then_some((cand, d))
    };

    let mut cur = at(initial_guess(f.in_dim(), cfg));
    let mut obj = objective(&cur);
    let mut history = Vec::new();
    if cfg.record_history {
        history.push(obj);
    }
    let mut y = Point {
        x: cur.x.clone(),
        fx: cur.fx.clone(),
        g: cur.g.clone(),
    };
    let mut t: f64 = 1.0;
    let mut iterations = 0;
    let mut def = defect(j, alpha, &cur.x, &cur.g);
    while def > threshold {
        if iterations >= cfg.max_iters {
            return Err(Error::NotConverged {
                solver: "FISTA",
                iterations,
                residual: def,
            });
        }
        iterations += 1;
        let smooth_y = smooth(&y.fx, v);
        let next = loop {
            let step = 1.0 / lip;
            let grad_step: Vec<f64> = y.x.iter().zip(&y.g).map(|(a, b)| a - step * b).collect();
            let z = j.prox(alpha * step, &grad_step)?;
            let cand = at(z);
            let dz = sub(&cand.x, &y.x);
            let model = smooth_y + dot(&y.g, &dz) + 0.5 * lip * norm_sq(&dz);
            if smooth(&cand.fx, v) <= model + 1e-14 * (1.0 + smooth_y.abs()) {
                break cand;
            }
            lip *= 2.0;
        };
        let obj_next = objective(&next);
        let restarted = t == 1.0;
        if obj_next > obj && !restarted {
            // momentum overshoot: restart from the last accepted point
            t = 1.0;
            y = Point {
                x: cur.x.clone(),
                fx: cur.fx.clone(),
                g: cur.g.clone(),
            };
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        let extrapolate =
            |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(p, q)| p + beta * (p - q)).collect() };
        y = Point {
            x: extrapolate(&next.x, &cur.x),
            fx: extrapolate(&next.fx, &cur.fx),
            g: extrapolate(&next.g, &cur.g),
        };
        t = t_next;
        obj = obj.min(obj_next);
        cur = next;
        if cfg.record_history {
            history.push(obj_next);
        }
        def = defect(j, alpha, &cur.x, &cur.g);
        if polish_due(iterations) && def > threshold {
            if let Some((cand, d)) = polished(&cur.x, def) {
                if d <= threshold {
                    cur = cand;
                    def = d;
                }
            }
        }
    }

    if let Some((cand, d)) = polished(&cur.x, def) {
        cur = cand;
        def = d;
    }

    let p: Vec<f64> = cur.g.iter().map(|gi| -gi / alpha).collect();
    let l1: f64 = cur.x.iter().map(|x| x.abs()).sum();
    let membership_tol = (10.0 * def / alpha * (1.0 + l1)).max(1e-10);
    finish(
        f,
        v,
        alpha,
        j,
        cur.x,
        p,
        None,
        membership_tol,
        def,
        threshold,
        iterations,
        history,
    )
}
