//! Active-set refinement of first-order solutions. The structure read off
//! an approximate minimizer (support and signs, or flat regions and jump
//! signs) turns the problem into a linear system, which CG solves to near
//! machine precision. Callers keep the refined point only if its
//! certificate improves.

use crate::linear::{conjugate_gradient, norm, sub, DataVector, LinearForwardMap};
use crate::regularizers::DiscreteGradient;

const CG_TOL: f64 = 1e-14;

fn cg_iters(n: usize) -> usize {
    20 * n + 100
}

/// Refit on the support of `x` with its signs fixed.
pub(crate) fn polish_l1(f: &LinearForwardMap, v: &DataVector, alpha: f64, x: &[f64]) -> Option<Vec<f64>> {
    let n = x.len();
    let support: Vec<usize> = (0..n).filter(|&i| x[i] != 0.0).collect();
    if support.is_empty() {
        return None;
    }
    let lift = |y: &[f64]| {
        let mut full = vec![0.0; n];
        for (k, &i) in support.iter().enumerate() {
            full[i] = y[k];
        }
        full
    };
    let ftv = f.adjoint(v);
    let b: Vec<f64> = support.iter().map(|&i| ftv[i] - alpha * x[i].signum()).collect();
    let normal = |y: &[f64]| {
        let g = f.normal(&lift(y));
        support.iter().map(|&i| g[i]).collect::<Vec<_>>()
    };
    let x0: Vec<f64> = support.iter().map(|&i| x[i]).collect();
    let out = conjugate_gradient(
        normal,
        &b,
        Some(&x0),
        CG_TOL * (1.0 + norm(&b)),
        cg_iters(support.len()),
    );
    let same_signs = support
        .iter()
        .zip(&out.x)
        .all(|(&i, y)| *y != 0.0 && y.signum() == x[i].signum());
    same_signs.then(|| lift(&out.x))
}

struct Components {
    of_pixel: Vec<usize>,
    count: usize,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

fn components(d: &DiscreteGradient, active: &[bool]) -> Components {
    let n = d.n_pixels();
    let mut parent: Vec<usize> = (0..n).collect();
    for (e, &a) in active.iter().enumerate() {
        if !a {
            let (t, h) = d.edge(e);
            let (rt, rh) = (find(&mut parent, t), find(&mut parent, h));
            if rt != rh {
                parent[rt.max(rh)] = rt.min(rh);
            }
        }
    }
    let mut label = vec![usize::MAX; n];
    let mut count = 0;
    let mut of_pixel = vec![0; n];
    for (i, slot) in of_pixel.iter_mut().enumerate() {
        let r = find(&mut parent, i);
        if label[r] == usize::MAX {
            label[r] = count;
            count += 1;
        }
        *slot = label[r];
    }
    Components { of_pixel, count }
}

/// Refit of a TV solution that is constant on the regions joined by edges
/// with `|Du| <= cut`, with the jump signs of the other edges fixed. Returns
/// the refined point and a dual field `y` with `|y| <= alpha`,
/// `D^T y = F*(v - Fu)` rebuilt by a minimum-norm solve on the flat edges.
pub(crate) fn polish_tv(
    f: &LinearForwardMap,
    v: &DataVector,
    alpha: f64,
    d: &DiscreteGradient,
    u: &[f64],
    cut: f64,
) -> Option<(Vec<f64>, Vec<f64>)> {
    let du = d.apply(u);
    let active: Vec<bool> = du.iter().map(|x| x.abs() > cut).collect();
    let comps = components(d, &active);
    let k = comps.count;
    let lift = |c: &[f64]| comps.of_pixel.iter().map(|&l| c[l]).collect::<Vec<f64>>();
    let reduce = |x: &[f64]| {
        let mut c = vec![0.0; k];
        for (i, &l) in comps.of_pixel.iter().enumerate() {
            c[l] += x[i];
        }
        c
    };
    let signs: Vec<f64> = du
        .iter()
        .zip(&active)
        .map(|(x, &a)| if a { x.signum() } else { 0.0 })
        .collect();
    let dts = d.transpose(&signs);
    let ftv = f.adjoint(v);
    let b = reduce(&ftv.iter().zip(&dts).map(|(a, s)| a - alpha * s).collect::<Vec<_>>());
    let mut sizes = vec![0.0; k];
    let mut mean = vec![0.0; k];
    for (i, &l) in comps.of_pixel.iter().enumerate() {
        sizes[l] += 1.0;
        mean[l] += u[i];
    }
    mean.iter_mut().zip(&sizes).for_each(|(m, s)| *m /= s);
    let out = conjugate_gradient(
        |c| reduce(&f.normal(&lift(c))),
        &b,
        Some(&mean),
        CG_TOL * (1.0 + norm(&b)),
        cg_iters(k),
    );
    let u_new = lift(&out.x);
    let du_new = d.apply(&u_new);
    let signs_kept = du_new
        .iter()
        .zip(&signs)
        .all(|(x, s)| *s == 0.0 || (*x != 0.0 && x.signum() == *s));
    if !signs_kept {
        return None;
    }

    // flat-edge dual: D_I^T y_I = F*(v - Fu) - alpha D_A^T s, minimum norm
    let r = f.adjoint(&sub(v, &f.apply(&u_new)));
    let rhs: Vec<f64> = r.iter().zip(&dts).map(|(a, s)| a - alpha * s).collect();
    let flat: Vec<usize> = (0..active.len()).filter(|&e| !active[e]).collect();
    let embed = |w: &[f64]| {
        let mut y = vec![0.0; active.len()];
        for (kk, &e) in flat.iter().enumerate() {
            y[e] = w[kk];
        }
        y
    };
    let laplacian = |x: &[f64]| {
        let dx = d.apply(x);
        d.transpose(&embed(&flat.iter().map(|&e| dx[e]).collect::<Vec<_>>()))
    };
    let w = conjugate_gradient(laplacian, &rhs, None, CG_TOL * (1.0 + norm(&rhs)), cg_iters(u.len()));
    let dw = d.apply(&w.x);
    let mut y: Vec<f64> = signs.iter().map(|s| alpha * s).collect();
    for &e in &flat {
        y[e] = dw[e];
    }
    if flat.iter().any(|&e| y[e].abs() > alpha) {
        return None;
    }
    Some((u_new, y))
}
