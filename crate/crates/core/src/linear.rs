//! Finite-dimensional spaces and the linear-operator contract.
//!
//! Solutions live in [`SolutionVector`], data in [`DataVector`]. Both are
//! Euclidean; quadrature weights on the data side are folded into the
//! operator rows (see [`crate::operators::make_sampled`]) so that a plain
//! squared norm is always the weighted one.

use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::rng;

macro_rules! euclidean_vector {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
        #[serde(transparent)]
        pub struct $name(Vec<f64>);

        impl $name {
            /// Wraps `entries`, rejecting empty or non-finite input.
            pub fn new(entries: Vec<f64>) -> Result<Self> {
                if entries.is_empty() {
                    return Err(Error::Empty(stringify!($name)));
                }
                if let Some(index) = entries.iter().position(|x| !x.is_finite()) {
                    return Err(Error::NonFinite { index });
                }
                Ok(Self(entries))
            }

            pub fn zeros(dim: usize) -> Self {
                Self(vec![0.0; dim])
            }

            /// Wraps entries produced by the library's own arithmetic.
            pub(crate) fn from_raw(entries: Vec<f64>) -> Self {
                debug_assert!(entries.iter().all(|x| x.is_finite()));
                Self(entries)
            }

            pub fn dim(&self) -> usize {
                self.0.len()
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }

            pub fn into_vec(self) -> Vec<f64> {
                self.0
            }

            pub fn norm(&self) -> f64 {
                norm(&self.0)
            }
        }

        impl Deref for $name {
            type Target = [f64];
            fn deref(&self) -> &[f64] {
                &self.0
            }
        }

        impl AsRef<[f64]> for $name {
            fn as_ref(&self) -> &[f64] {
                &self.0
            }
        }

        impl TryFrom<Vec<f64>> for $name {
            type Error = Error;
            fn try_from(v: Vec<f64>) -> Result<Self> {
                Self::new(v)
            }
        }
    };
}

euclidean_vector!(
    /// Element of the solution space.
    SolutionVector
);
euclidean_vector!(
    /// Element of the data space.
    DataVector
);

/// Euclidean inner product, checked for matching dimensions.
pub fn inner(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(dot(a, b))
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `y += a * x`
#[inline]
pub(crate) fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// A linear map between Euclidean spaces together with its exact adjoint.
///
/// Implementors only provide whole-vector products; row access has default
/// implementations which concrete operators override when rows are cheap.
pub trait LinearMap: Send + Sync + fmt::Debug {
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;

    /// `out = F u`; `out` is overwritten.
    fn apply_into(&self, u: &[f64], out: &mut [f64]);

    /// `out = F* v`; `out` is overwritten.
    fn adjoint_into(&self, v: &[f64], out: &mut [f64]);

    /// Component `row` of `F u`.
    fn row_dot(&self, row: usize, u: &[f64]) -> f64 {
        let mut out = vec![0.0; self.out_dim()];
        self.apply_into(u, &mut out);
        out[row]
    }

    /// `out += scale * F* e_row`.
    fn row_axpy(&self, row: usize, scale: f64, out: &mut [f64]) {
        let mut e = vec![0.0; self.out_dim()];
        e[row] = 1.0;
        let mut col = vec![0.0; self.in_dim()];
        self.adjoint_into(&e, &mut col);
        axpy(scale, &col, out);
    }
}

/// Shared handle to a forward operator `F: U -> V`.
#[derive(Clone, Debug)]
pub struct LinearForwardMap {
    inner: Arc<dyn LinearMap>,
}

impl LinearForwardMap {
    pub fn new<M: LinearMap + 'static>(map: M) -> Self {
        Self { inner: Arc::new(map) }
    }

    pub fn from_arc(inner: Arc<dyn LinearMap>) -> Self {
        Self { inner }
    }

    pub fn in_dim(&self) -> usize {
        self.inner.in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.inner.out_dim()
    }

    pub fn map(&self) -> &dyn LinearMap {
        &*self.inner
    }

    /// `F u`. Panics if `u` has the wrong length.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.in_dim(), "apply: input dimension");
        let mut out = vec![0.0; self.out_dim()];
        self.inner.apply_into(u, &mut out);
        out
    }

    /// `F* v`. Panics if `v` has the wrong length.
    pub fn adjoint(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.out_dim(), "adjoint: input dimension");
        let mut out = vec![0.0; self.in_dim()];
        self.inner.adjoint_into(v, &mut out);
        out
    }

    pub fn try_apply(&self, u: &SolutionVector) -> Result<DataVector> {
        check_dim(self.in_dim(), u.dim())?;
        Ok(DataVector::from_raw(self.apply(u)))
    }

    pub fn try_adjoint(&self, v: &DataVector) -> Result<SolutionVector> {
        check_dim(self.out_dim(), v.dim())?;
        Ok(SolutionVector::from_raw(self.adjoint(v)))
    }

    /// `F*F u`
    pub fn normal(&self, u: &[f64]) -> Vec<f64> {
        self.adjoint(&self.apply(u))
    }

    pub fn row_dot(&self, row: usize, u: &[f64]) -> f64 {
        self.inner.row_dot(row, u)
    }

    pub fn row_axpy(&self, row: usize, scale: f64, out: &mut [f64]) {
        self.inner.row_axpy(row, scale, out)
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        Err(Error::DimensionMismatch { expected, found })
    } else {
        Ok(())
    }
}

/// Largest relative defect `|<Fu,v> - <u,F*v>| / (|u| |v|)` over seeded
/// Gaussian pairs.
pub fn adjoint_consistency_check(f: &LinearForwardMap, trials: usize, seed: u64) -> Result<f64> {
    if trials == 0 {
        return Err(invalid("trials", "must be at least 1"));
    }
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let mut r = rng::substream(seed, "adjoint-check", t as u64);
        let u = rng::gaussian_vec(&mut r, f.in_dim());
        let v = rng::gaussian_vec(&mut r, f.out_dim());
        let lhs = dot(&f.apply(&u), &v);
        let rhs = dot(&u, &f.adjoint(&v));
        let denom = norm(&u) * norm(&v);
        worst = worst.max((lhs - rhs).abs() / denom);
    }
    Ok(worst)
}

/// Default number of power iterations.
pub const POWER_ITERATIONS: usize = 200;

/// Lower estimate of `|F|` by power iteration on `F*F` from a seeded start.
///
/// The returned value is the running maximum of the Rayleigh quotients, so
/// it never exceeds `|F|` and is nondecreasing in `iters`.
pub fn operator_norm_estimate(f: &LinearForwardMap, iters: usize, seed: u64) -> Result<f64> {
    if iters == 0 {
        return Err(invalid("iters", "must be at least 1"));
    }
    let mut x = rng::gaussian_vec(&mut rng::substream(seed, "power-iteration", 0), f.in_dim());
    let mut best: f64 = 0.0;
    for _ in 0..iters {
        let nx = norm(&x);
        if nx == 0.0 {
            break;
        }
        x.iter_mut().for_each(|xi| *xi /= nx);
        let fx = f.apply(&x);
        best = best.max(norm(&fx));
        x = f.adjoint(&fx);
    }
    Ok(best)
}

/// Outcome of [`conjugate_gradient`].
#[derive(Clone, Debug)]
pub(crate) struct CgOutcome {
    pub x: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Conjugate gradients for a symmetric positive semidefinite operator.
///
/// Stops once `|b - A x| <= abs_tol`.
pub(crate) fn conjugate_gradient(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    x0: Option<&[f64]>,
    abs_tol: f64,
    max_iters: usize,
) -> CgOutcome {
    let mut x = x0.map_or_else(|| vec![0.0; b.len()], <[f64]>::to_vec);
    let mut r = if x0.is_some() { sub(b, &apply(&x)) } else { b.to_vec() };
    let mut rr = norm_sq(&r);
    let mut p = r.clone();
    let mut iterations = 0;
    while rr.sqrt() > abs_tol && iterations < max_iters {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let step = rr / pap;
        axpy(step, &p, &mut x);
        axpy(-step, &ap, &mut r);
        let rr_new = norm_sq(&r);
        let beta = rr_new / rr;
        rr = rr_new;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        iterations += 1;
        // recompute the true residual now and then to avoid drift
        if iterations % 50 == 0 {
            r = sub(b, &apply(&x));
            rr = norm_sq(&r);
        }
    }
    let residual = norm(&sub(b, &apply(&x)));
    CgOutcome {
        converged: residual <= abs_tol,
        x,
        residual,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{identity, make_dense};

    #[test]
    fn inner_examples() {
        assert_eq!(inner(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 11.0);
        assert_eq!(inner(&[1.5, -2.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(inner(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn inner_rejects_mismatched_lengths() {
        assert_eq!(
            inner(&[1.0], &[1.0, 2.0]),
            Err(Error::DimensionMismatch { expected: 1, found: 2 })
        );
    }

    #[test]
    fn vectors_reject_non_finite_and_empty() {
        assert_eq!(
            SolutionVector::new(vec![1.0, f64::NAN]),
            Err(Error::NonFinite { index: 1 })
        );
        assert!(DataVector::new(vec![]).is_err());
        assert!(DataVector::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn adjoint_check_identity_and_dense() {
        assert!(adjoint_consistency_check(&identity(5), 10, 1).unwrap() <= 1e-12);
        let a = make_dense(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert!(adjoint_consistency_check(&a, 10, 1).unwrap() <= 1e-12);
        assert!(adjoint_consistency_check(&a, 0, 1).is_err());
    }

    #[test]
    fn power_iteration_examples() {
        let d = make_dense(&[vec![3.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!((operator_norm_estimate(&d, 100, 3).unwrap() - 3.0).abs() < 1e-6);
        assert!((operator_norm_estimate(&identity(7), 5, 3).unwrap() - 1.0).abs() < 1e-9);
        let z = make_dense(&[vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(operator_norm_estimate(&z, 10, 3).unwrap(), 0.0);
    }

    #[test]
    fn cg_solves_spd_system() {
        let a = [[4.0, 1.0], [1.0, 3.0]];
        let apply = |x: &[f64]| vec![a[0][0] * x[0] + a[0][1] * x[1], a[1][0] * x[0] + a[1][1] * x[1]];
        let out = conjugate_gradient(apply, &[1.0, 2.0], None, 1e-14, 10);
        assert!(out.converged);
        assert!((out.x[0] - 1.0 / 11.0).abs() < 1e-13);
        assert!((out.x[1] - 7.0 / 11.0).abs() < 1e-13);
    }
}
