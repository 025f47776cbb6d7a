use super::polish::polish_tv;
use super::{check_problem, finish, initial_guess, stopping_threshold, RegularizedSolution, SolverConfig};
use crate::error::{Error, Result};
use crate::linear::{dot, norm, operator_norm_estimate, sub, DataVector, LinearForwardMap, POWER_ITERATIONS};
use crate::regularizers::{DiscreteGradient, Regularizer};

struct Certificate {
    defect: f64,
    gap: f64,
}

/// Optimality defect `|F*(Fu - v) + D^T y|` and duality gap
/// `alpha |Du|_1 - <y, Du>` for a dual field `y` with `|y| <= alpha`.
fn certificate(d: &DiscreteGradient, alpha: f64, g: &[f64], du: &[f64], y: &[f64]) -> Certificate {
    let dty = d.transpose(y);
    let r: Vec<f64> = g.iter().zip(&dty).map(|(a, b)| a + b).collect();
    let tv: f64 = du.iter().map(|x| x.abs()).sum();
    Certificate {
        defect: norm(&r),
        gap: (alpha * tv - dot(y, du)).max(0.0),
    }
}

const FIRST_POLISH: usize = 100;

/// Polish attempts at `100 * 2^k` iterations.
fn polish_due(iterations: usize) -> bool {
    iterations >= FIRST_POLISH
        && iterations.is_multiple_of(FIRST_POLISH)
        && (iterations / FIRST_POLISH).is_power_of_two()
}

struct Polished {
    u: Vec<f64>,
    y: Vec<f64>,
    du: Vec<f64>,
    g: Vec<f64>,
    cert: Certificate,
}

/// Best active-set refinement over a few flatness cuts, if it beats `cert`.
fn best_polish(
    f: &LinearForwardMap,
    v: &DataVector,
    alpha: f64,
    d: &DiscreteGradient,
    u: &[f64],
    du: &[f64],
    cert: &Certificate,
) -> Option<Polished> {
    let scale = 1.0 + du.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut best: Option<Polished> = None;
    for cut in [1e-12, 1e-10, 1e-8, 1e-6] {
        let Some((u2, y2)) = polish_tv(f, v, alpha, d, u, cut * scale) else {
            continue;
        };
        let g2 = f.adjoint(&sub(&f.apply(&u2), v));
        let du2 = d.apply(&u2);
        let c2 = certificate(d, alpha, &g2, &du2, &y2);
        let to_beat = best.as_ref().map_or(cert, |b| &b.cert);
        if c2.defect.max(c2.gap) < to_beat.defect.max(to_beat.gap) {
            best = Some(Polished {
                u: u2,
                y: y2,
                du: du2,
                g: g2,
                cert: c2,
            });
        }
    }
    best
}

/// Anisotropic TV: primal-dual splitting with a forward step on the data
/// term and a projected ascent step on the dual field `y = alpha q`.
///
/// Certifies the result by the optimality defect and the duality gap and
/// returns `p_alpha = D^T q`.
pub fn solve_primal_dual(
    f: &LinearForwardMap,
    v: &DataVector,
    alpha: f64,
    j: &Regularizer,
    cfg: &SolverConfig,
) -> Result<RegularizedSolution> {
    check_problem(f, v, alpha, cfg)?;
    let Regularizer::TvAniso(d) = j else {
        return Err(Error::Unsupported(format!(
            "primal-dual solver expects TV, got {}",
            j.kind()
        )));
    };
    crate::linear::check_dim(d.n_pixels(), f.in_dim())?;
    let threshold = stopping_threshold(f, v, cfg.tol);
    let sigma_f = operator_norm_estimate(f, POWER_ITERATIONS, cfg.seed)?;
    let lip = 1.02 * sigma_f * sigma_f;
    let dn = d.norm_sq_bound().max(1.0);
    // step rule 1/tau - s |D|^2 >= lip / 2
    let s = lip.max(1e-3) / (2.0 * dn);
    let tau = cfg.step_safety * 0.99 / (0.5 * lip + s * dn);

    let mut u = initial_guess(f.in_dim(), cfg);
    let mut y = vec![0.0; d.n_edges()];
    let mut g = f.adjoint(&sub(&f.apply(&u), v));
    let mut du = d.apply(&u);
    let mut cert = certificate(d, alpha, &g, &du, &y);
    let mut history = Vec::new();
    let mut iterations = 0;
    while cert.defect > threshold || cert.gap > threshold {
        if cfg.record_history {
            history.push(cert.defect.max(cert.gap));
        }
        if iterations >= cfg.max_iters {
            return Err(Error::NotConverged {
                solver: "primal-dual",
                iterations,
                residual: cert.defect.max(cert.gap),
            });
        }
        iterations += 1;
        let dty = d.transpose(&y);
        let u_next: Vec<f64> = u
            .iter()
            .zip(&g)
            .zip(&dty)
            .map(|((ui, gi), di)| ui - tau * (gi + di))
            .collect();
        let du_next = d.apply(&u_next);
        for ((yi, a), b) in y.iter_mut().zip(&du_next).zip(&du) {
            *yi = (*yi + s * (2.0 * a - b)).clamp(-alpha, alpha);
        }
        u = u_next;
        du = du_next;
        g = f.adjoint(&sub(&f.apply(&u), v));
        cert = certificate(d, alpha, &g, &du, &y);
        if polish_due(iterations) && (cert.defect > threshold || cert.gap > threshold) {
            if let Some(b) = best_polish(f, v, alpha, d, &u, &du, &cert) {
                if b.cert.defect <= threshold && b.cert.gap <= threshold {
                    (u, y, du, g, cert) = (b.u, b.y, b.du, b.g, b.cert);
                }
            }
        }
    }
    if let Some(b) = best_polish(f, v, alpha, d, &u, &du, &cert) {
        (u, y, cert) = (b.u, b.y, b.cert);
    }
    if cfg.record_history {
        history.push(cert.defect.max(cert.gap));
    }
    let q: Vec<f64> = y.iter().map(|yi| yi / alpha).collect();
    let p = d.transpose(&q);
    let membership_tol = (10.0 * cert.gap / alpha).max(1e-10);
    finish(
        f,
        v,
        alpha,
        j,
        u,
        p,
        Some(q),
        membership_tol,
        cert.defect,
        threshold,
        iterations,
        history,
    )
}
