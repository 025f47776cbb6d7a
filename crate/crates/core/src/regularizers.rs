//! Convex regularization functionals, their proximal maps, subgradient
//! certification and Bregman distances.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::linear::{check_dim, dot, norm, sub, DataVector, LinearForwardMap, LinearMap, SolutionVector};
use crate::rng;

/// Membership tolerance attached to subgradients built by exact
/// construction.
pub const DEFAULT_MEMBERSHIP_TOL: f64 = 1e-8;

/// Number of random points used by the inequality sampling in
/// [`Regularizer::is_subgradient`].
pub const MEMBERSHIP_SAMPLES: usize = 100;

const ROUNDOFF_CLAMP: f64 = 1e-12;
const NEGATIVE_LIMIT: f64 = 1e-8;

/// Forward differences on a `rows x cols` grid with replicate (Neumann)
/// boundary: horizontal edges first, then vertical ones. A 1-d signal is
/// the case `rows == 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DiscreteGradient {
    pub rows: usize,
    pub cols: usize,
}

impl DiscreteGradient {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(invalid("grid", "rows and cols must be positive"));
        }
        Ok(Self { rows, cols })
    }

    pub fn one_dim(n: usize) -> Result<Self> {
        Self::new(1, n)
    }

    pub fn n_pixels(&self) -> usize {
        self.rows * self.cols
    }

    fn n_horizontal(&self) -> usize {
        self.rows * (self.cols - 1)
    }

    pub fn n_edges(&self) -> usize {
        self.n_horizontal() + (self.rows - 1) * self.cols
    }

    /// Upper bound on `|D|^2`.
    pub fn norm_sq_bound(&self) -> f64 {
        let mut b = 0.0;
        if self.cols > 1 {
            b += 4.0;
        }
        if self.rows > 1 {
            b += 4.0;
        }
        b
    }

    /// Endpoints `(tail, head)` of edge `e`; the edge value is `u[head] - u[tail]`.
    pub fn edge(&self, e: usize) -> (usize, usize) {
        let nh = self.n_horizontal();
        if e < nh {
            let r = e / (self.cols - 1);
            let c = e % (self.cols - 1);
            let t = r * self.cols + c;
            (t, t + 1)
        } else {
            let k = e - nh;
            (k, k + self.cols)
        }
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_edges()];
        self.apply_into(u, &mut out);
        out
    }

    pub fn transpose(&self, q: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_pixels()];
        self.adjoint_into(q, &mut out);
        out
    }
}

impl LinearMap for DiscreteGradient {
    fn in_dim(&self) -> usize {
        self.n_pixels()
    }
    fn out_dim(&self) -> usize {
        self.n_edges()
    }
    fn apply_into(&self, u: &[f64], out: &mut [f64]) {
        for (e, o) in out.iter_mut().enumerate() {
            let (t, h) = self.edge(e);
            *o = u[h] - u[t];
        }
    }
    fn adjoint_into(&self, q: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (e, &qe) in q.iter().enumerate() {
            let (t, h) = self.edge(e);
            out[h] += qe;
            out[t] -= qe;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularizerKind {
    Quadratic,
    L1,
    TvAniso,
}

impl fmt::Display for RegularizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegularizerKind::Quadratic => "quadratic",
            RegularizerKind::L1 => "l1",
            RegularizerKind::TvAniso => "tv_aniso",
        })
    }
}

impl FromStr for RegularizerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadratic" | "tikhonov" => Ok(Self::Quadratic),
            "l1" => Ok(Self::L1),
            "tv_aniso" | "tv" => Ok(Self::TvAniso),
            other => Err(invalid("regularizer", format!("unknown kind `{other}`"))),
        }
    }
}

/// Convex, nonnegative functional `J` with `J(0) = 0`.
#[derive(Clone, Debug, PartialEq)]
pub enum Regularizer {
    /// `J(u) = |u|^2 / 2`
    Quadratic,
    /// `J(u) = sum |u_i|`
    L1,
    /// `J(u) = |D u|_1`
    TvAniso(DiscreteGradient),
}

/// Result of a subgradient membership test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MembershipCheck {
    pub holds: bool,
    pub max_violation: f64,
}

/// A vector `p` asserted to lie in `dJ(at)`.
///
/// `tol` is the membership tolerance the producer vouches for; `dual`
/// optionally carries the edge field `q` with `p = D^T q` for TV.
#[derive(Clone, Debug, PartialEq)]
pub struct Subgradient {
    pub p: SolutionVector,
    pub at: SolutionVector,
    pub dual: Option<Vec<f64>>,
    pub tol: f64,
}

impl Subgradient {
    pub fn new(p: SolutionVector, at: SolutionVector) -> Self {
        Self {
            p,
            at,
            dual: None,
            tol: DEFAULT_MEMBERSHIP_TOL,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_dual(mut self, q: Vec<f64>) -> Self {
        self.dual = Some(q);
        self
    }
}

/// `p_alpha = F*(v - F u_alpha) / alpha`, the subgradient selected by the
/// optimality condition of `|Fu - v|^2 / 2 + alpha J(u)`.
pub fn subgradient_from_optimality(
    f: &LinearForwardMap,
    v: &DataVector,
    u_alpha: &SolutionVector,
    alpha: f64,
) -> Result<Subgradient> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(invalid("alpha", "must be positive"));
    }
    check_dim(f.in_dim(), u_alpha.dim())?;
    check_dim(f.out_dim(), v.dim())?;
    let r = sub(v, &f.apply(u_alpha));
    let p = f.adjoint(&r).into_iter().map(|x| x / alpha).collect();
    Ok(Subgradient::new(SolutionVector::from_raw(p), u_alpha.clone()))
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    x.signum() * (x.abs() - t).max(0.0)
}

impl Regularizer {
    pub fn kind(&self) -> RegularizerKind {
        match self {
            Regularizer::Quadratic => RegularizerKind::Quadratic,
            Regularizer::L1 => RegularizerKind::L1,
            Regularizer::TvAniso(_) => RegularizerKind::TvAniso,
        }
    }

    /// Builds a regularizer of `kind` acting on `dim` unknowns; TV uses a
    /// square grid when `dim` is a perfect square and `square_grid` is set,
    /// a 1-d chain otherwise.
    pub fn from_kind(kind: RegularizerKind, dim: usize, square_grid: bool) -> Result<Self> {
        Ok(match kind {
            RegularizerKind::Quadratic => Regularizer::Quadratic,
            RegularizerKind::L1 => Regularizer::L1,
            RegularizerKind::TvAniso => {
                let side = (dim as f64).sqrt().round() as usize;
                if square_grid && side * side == dim {
                    Regularizer::TvAniso(DiscreteGradient::new(side, side)?)
                } else {
                    Regularizer::TvAniso(DiscreteGradient::one_dim(dim)?)
                }
            }
        })
    }

    pub fn has_prox(&self) -> bool {
        !matches!(self, Regularizer::TvAniso(_))
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if let Regularizer::TvAniso(d) = self {
            check_dim(d.n_pixels(), n)?;
        }
        Ok(())
    }

    pub fn value(&self, u: &[f64]) -> f64 {
        match self {
            Regularizer::Quadratic => 0.5 * dot(u, u),
            Regularizer::L1 => u.iter().map(|x| x.abs()).sum(),
            Regularizer::TvAniso(d) => {
                assert_eq!(u.len(), d.n_pixels(), "TV: grid size");
                (0..d.n_edges())
                    .map(|e| {
                        let (t, h) = d.edge(e);
                        (u[h] - u[t]).abs()
                    })
                    .sum()
            }
        }
    }

    /// `argmin_y |y - x|^2 / 2 + tau J(y)`
    pub fn prox(&self, tau: f64, x: &[f64]) -> Result<Vec<f64>> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(invalid("tau", "must be positive"));
        }
        match self {
            Regularizer::Quadratic => Ok(x.iter().map(|xi| xi / (1.0 + tau)).collect()),
            Regularizer::L1 => Ok(x.iter().map(|&xi| soft_threshold(xi, tau)).collect()),
            Regularizer::TvAniso(_) => Err(Error::Unsupported(
                "proximal map of anisotropic TV; use the primal-dual solver".into(),
            )),
        }
    }

    /// Distance of `p` from `dJ(u)` by the closed-form rule of each kind.
    ///
    /// For the one-homogeneous kinds `p` is in `dJ(u)` iff `p` lies in the
    /// dual unit ball and `<p, u> = J(u)`; the reported violation is the
    /// larger of the dual-ball defect and the gap `J(u) - <p, u>`.
    pub fn membership_violation(&self, u: &[f64], p: &[f64], dual: Option<&[f64]>) -> Result<f64> {
        check_dim(u.len(), p.len())?;
        self.check_len(u.len())?;
        Ok(match self {
            Regularizer::Quadratic => u.iter().zip(p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max),
            Regularizer::L1 => {
                let excess = p.iter().map(|x| x.abs() - 1.0).fold(0.0, f64::max);
                let gap = self.value(u) - dot(p, u);
                excess.max(gap)
            }
            Regularizer::TvAniso(d) => {
                let residual = match dual {
                    Some(q) => {
                        check_dim(d.n_edges(), q.len())?;
                        let excess = q.iter().map(|x| x.abs() - 1.0).fold(0.0, f64::max);
                        let clipped: Vec<f64> = q.iter().map(|x| x.clamp(-1.0, 1.0)).collect();
                        let r = sub(&d.transpose(&clipped), p);
                        excess.max(r.iter().map(|x| x.abs()).fold(0.0, f64::max))
                    }
                    None => tv_dual_ball_residual(d, p),
                };
                let gap = self.value(u) - dot(p, u);
                residual.max(gap)
            }
        })
    }

    /// Closed-form membership rule combined with the subgradient inequality
    /// `J(u~) >= J(u) + <p, u~ - u>` sampled at seeded points near `u`.
    pub fn is_subgradient(&self, u: &[f64], p: &[f64], tol: f64) -> Result<MembershipCheck> {
        self.is_subgradient_with_dual(u, p, None, tol)
    }

    pub fn is_subgradient_with_dual(
        &self,
        u: &[f64],
        p: &[f64],
        dual: Option<&[f64]>,
        tol: f64,
    ) -> Result<MembershipCheck> {
        if !(tol >= 0.0) {
            return Err(invalid("tol", "must be nonnegative"));
        }
        let closed = self.membership_violation(u, p, dual)?;
        let sampled = self.sampled_violation(u, p);
        let max_violation = closed.max(sampled);
        Ok(MembershipCheck {
            holds: max_violation <= tol,
            max_violation,
        })
    }

    /// Largest violation of the subgradient inequality over
    /// [`MEMBERSHIP_SAMPLES`] points `u + t g` with `|g| = 1`, `t <= 1`.
    fn sampled_violation(&self, u: &[f64], p: &[f64]) -> f64 {
        let ju = self.value(u);
        let mut r = rng::substream(0x5eed, "membership", u.len() as u64);
        let mut worst: f64 = 0.0;
        let mut trial = vec![0.0; u.len()];
        for k in 0..MEMBERSHIP_SAMPLES {
            let g = rng::gaussian_vec(&mut r, u.len());
            let ng = norm(&g);
            if ng == 0.0 {
                continue;
            }
            let t = 10f64.powi(-((k % 4) as i32));
            for ((ti, ui), gi) in trial.iter_mut().zip(u).zip(&g) {
                *ti = ui + t * gi / ng;
            }
            let step: f64 = p.iter().zip(&g).map(|(pi, gi)| pi * gi).sum::<f64>() * t / ng;
            worst = worst.max(ju + step - self.value(&trial));
        }
        worst
    }

    pub fn check_subgradient(&self, s: &Subgradient) -> Result<MembershipCheck> {
        self.is_subgradient_with_dual(&s.at, &s.p, s.dual.as_deref(), s.tol)
    }

    fn require_member(&self, s: &Subgradient) -> Result<()> {
        let check = self.check_subgradient(s)?;
        if check.holds {
            Ok(())
        } else {
            Err(Error::NotASubgradient {
                violation: check.max_violation,
                tol: s.tol,
            })
        }
    }

    /// `J(u~) - J(u) - <p, u~ - u>` for `p = s.p` in `dJ(u)`, `u = s.at`.
    pub fn bregman_distance(&self, u_tilde: &[f64], s: &Subgradient) -> Result<f64> {
        check_dim(s.at.dim(), u_tilde.len())?;
        self.require_member(s)?;
        let diff = sub(u_tilde, &s.at);
        let d = self.value(u_tilde) - self.value(&s.at) - dot(&s.p, &diff);
        let slack = s.tol * (1.0 + l1_norm(&diff));
        clamp_bregman(d, slack)
    }

    /// `<p~ - p, u~ - u>` for subgradients at both points.
    pub fn symmetric_bregman(&self, s_tilde: &Subgradient, s: &Subgradient) -> Result<f64> {
        check_dim(s.at.dim(), s_tilde.at.dim())?;
        self.require_member(s_tilde)?;
        self.require_member(s)?;
        let diff = sub(&s_tilde.at, &s.at);
        let d = dot(&sub(&s_tilde.p, &s.p), &diff);
        let slack = (s.tol + s_tilde.tol) * (1.0 + l1_norm(&diff));
        clamp_bregman(d, slack)
    }
}

fn l1_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

/// Roundoff below `ROUNDOFF_CLAMP` is clamped to zero; values below
/// `-(NEGATIVE_LIMIT + slack)` cannot come from a valid subgradient.
fn clamp_bregman(d: f64, slack: f64) -> Result<f64> {
    if d >= 0.0 {
        Ok(d)
    } else if d >= -ROUNDOFF_CLAMP {
        Ok(0.0)
    } else if d >= -(NEGATIVE_LIMIT + slack) {
        Ok(d)
    } else {
        Err(Error::NegativeBregman { value: d })
    }
}

/// `min { |D^T q - p|_inf : |q|_inf <= 1 }`, i.e. how far `p` is from the
/// dual unit ball of anisotropic TV.
fn tv_dual_ball_residual(d: &DiscreteGradient, p: &[f64]) -> f64 {
    if d.n_edges() == 0 {
        return p.iter().map(|x| x.abs()).fold(0.0, f64::max);
    }
    if d.rows == 1 || d.cols == 1 {
        // chain: D^T q = p has the unique solution q_k = -sum_{i<=k} p_i
        let n = d.n_pixels();
        let mut q = Vec::with_capacity(n - 1);
        let mut acc = 0.0;
        for &pi in &p[..n - 1] {
            acc -= pi;
            q.push(acc);
        }
        let mismatch = (p.iter().sum::<f64>()).abs();
        let excess = q.iter().map(|x| x.abs() - 1.0).fold(0.0, f64::max);
        return mismatch.max(excess);
    }
    let q = project_onto_tv_dual(d, p, 1e-13, 20_000);
    let clipped: Vec<f64> = q.iter().map(|x| x.clamp(-1.0, 1.0)).collect();
    sub(&d.transpose(&clipped), p)
        .iter()
        .map(|x| x.abs())
        .fold(0.0, f64::max)
}

/// Accelerated projected gradient for `min_{|q|<=1} |D^T q - p|^2 / 2`.
pub(crate) fn project_onto_tv_dual(d: &DiscreteGradient, p: &[f64], tol: f64, max_iters: usize) -> Vec<f64> {
    let step = 1.0 / d.norm_sq_bound();
    let mut q = vec![0.0; d.n_edges()];
    let mut y = q.clone();
    let mut t: f64 = 1.0;
    for _ in 0..max_iters {
        let r = sub(&d.transpose(&y), p);
        if r.iter().map(|x| x.abs()).fold(0.0, f64::max) <= tol {
            return y;
        }
        let g = d.apply(&r);
        let q_next: Vec<f64> = y
            .iter()
            .zip(&g)
            .map(|(yi, gi)| (yi - step * gi).clamp(-1.0, 1.0))
            .collect();
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        y = q_next.iter().zip(&q).map(|(a, b)| a + beta * (a - b)).collect();
        q = q_next;
        t = t_next;
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::identity;

    fn sv(x: &[f64]) -> SolutionVector {
        SolutionVector::new(x.to_vec()).unwrap()
    }

    fn tv1(n: usize) -> Regularizer {
        Regularizer::TvAniso(DiscreteGradient::one_dim(n).unwrap())
    }

    #[test]
    fn values() {
        assert_eq!(Regularizer::Quadratic.value(&[3.0, 4.0]), 12.5);
        assert_eq!(Regularizer::L1.value(&[1.0, -2.0]), 3.0);
        assert_eq!(tv1(4).value(&[0.0, 0.0, 1.0, 1.0]), 1.0);
        let tv2 = Regularizer::TvAniso(DiscreteGradient::new(2, 2).unwrap());
        // [[0,1],[0,1]]: two horizontal jumps, no vertical ones
        assert_eq!(tv2.value(&[0.0, 1.0, 0.0, 1.0]), 2.0);
        for j in [Regularizer::Quadratic, Regularizer::L1, tv1(3)] {
            assert_eq!(j.value(&[0.0; 3]), 0.0);
        }
    }

    #[test]
    fn prox_examples() {
        assert_eq!(Regularizer::L1.prox(1.0, &[2.5]).unwrap(), vec![1.5]);
        assert_eq!(Regularizer::L1.prox(1.0, &[-0.5]).unwrap(), vec![0.0]);
        assert_eq!(Regularizer::Quadratic.prox(1.0, &[2.0]).unwrap(), vec![1.0]);
        assert!(matches!(tv1(3).prox(1.0, &[1.0, 2.0, 3.0]), Err(Error::Unsupported(_))));
        assert!(Regularizer::L1.prox(0.0, &[1.0]).is_err());
    }

    #[test]
    fn gradient_transpose_matches() {
        let d = DiscreteGradient::new(3, 4).unwrap();
        let f = LinearForwardMap::new(d);
        assert!(crate::linear::adjoint_consistency_check(&f, 16, 1).unwrap() < 1e-14);
        assert_eq!(d.n_edges(), 3 * 3 + 2 * 4);
    }

    #[test]
    fn optimality_subgradient_examples() {
        let f = identity(1);
        let v = DataVector::new(vec![2.0]).unwrap();
        let s = subgradient_from_optimality(&f, &v, &sv(&[1.0]), 1.0).unwrap();
        assert_eq!(s.p.as_slice(), &[1.0]);
        assert!(Regularizer::Quadratic.check_subgradient(&s).unwrap().holds);
        assert!(Regularizer::L1.check_subgradient(&s).unwrap().holds);

        let v = DataVector::new(vec![0.5]).unwrap();
        let s = subgradient_from_optimality(&f, &v, &sv(&[0.0]), 1.0).unwrap();
        assert_eq!(s.p.as_slice(), &[0.5]);
        assert!(Regularizer::L1.check_subgradient(&s).unwrap().holds);
        assert!(subgradient_from_optimality(&f, &v, &sv(&[0.0]), 0.0).is_err());
    }

    #[test]
    fn membership_examples() {
        let c = Regularizer::Quadratic
            .is_subgradient(&[1.0, 2.0], &[1.0, 2.0], 0.0)
            .unwrap();
        assert!(c.holds);
        assert_eq!(c.max_violation, 0.0);
        assert!(
            Regularizer::L1
                .is_subgradient(&[1.0, 0.0], &[1.0, 0.5], 1e-12)
                .unwrap()
                .holds
        );
        let bad = Regularizer::L1.is_subgradient(&[1.0, 0.0], &[0.5, 0.0], 1e-12).unwrap();
        assert!(!bad.holds);
        assert!(bad.max_violation >= 0.5 - 1e-12);
        assert!(!Regularizer::L1.is_subgradient(&[0.0], &[1.5], 1e-12).unwrap().holds);
    }

    #[test]
    fn tv_membership_with_and_without_dual() {
        let j = tv1(4);
        let u = [0.0, 0.0, 1.0, 1.0];
        // q saturated on the jump edge, free elsewhere
        let q = vec![0.2, 1.0, -0.3];
        let d = DiscreteGradient::one_dim(4).unwrap();
        let p = d.transpose(&q);
        assert!(j.is_subgradient_with_dual(&u, &p, Some(&q), 1e-12).unwrap().holds);
        assert!(j.is_subgradient(&u, &p, 1e-12).unwrap().holds);
        // wrong sign on the jump
        let p_bad = d.transpose(&[0.2, -1.0, -0.3]);
        assert!(!j.is_subgradient(&u, &p_bad, 1e-6).unwrap().holds);

        let j2 = Regularizer::TvAniso(DiscreteGradient::new(3, 3).unwrap());
        let d2 = DiscreteGradient::new(3, 3).unwrap();
        let q2: Vec<f64> = (0..d2.n_edges()).map(|e| ((e as f64) * 0.37).sin() * 0.9).collect();
        let p2 = d2.transpose(&q2);
        assert!(j2.is_subgradient(&[0.5; 9], &p2, 1e-9).unwrap().holds);
    }

    #[test]
    fn bregman_examples() {
        let q = Regularizer::Quadratic;
        let s = Subgradient::new(sv(&[0.0, 0.0]), sv(&[0.0, 0.0]));
        assert_eq!(q.bregman_distance(&[1.0, 0.0], &s).unwrap(), 0.5);

        let l1 = Regularizer::L1;
        let s = Subgradient::new(sv(&[1.0]), sv(&[1.0]));
        assert_eq!(l1.bregman_distance(&[2.0], &s).unwrap(), 0.0);
        assert_eq!(l1.bregman_distance(&[-1.0], &s).unwrap(), 2.0);

        let bad = Subgradient::new(sv(&[0.5]), sv(&[1.0]));
        assert!(matches!(
            l1.bregman_distance(&[2.0], &bad),
            Err(Error::NotASubgradient { .. })
        ));
    }

    #[test]
    fn symmetric_bregman_examples() {
        let q = Regularizer::Quadratic;
        let a = Subgradient::new(sv(&[1.0]), sv(&[1.0]));
        let b = Subgradient::new(sv(&[0.0]), sv(&[0.0]));
        assert_eq!(q.symmetric_bregman(&a, &b).unwrap(), 1.0);
        assert_eq!(q.symmetric_bregman(&a, &a).unwrap(), 0.0);

        let l1 = Regularizer::L1;
        let t = Subgradient::new(sv(&[1.0]), sv(&[2.0]));
        let u = Subgradient::new(sv(&[1.0]), sv(&[1.0]));
        assert_eq!(l1.symmetric_bregman(&t, &u).unwrap(), 0.0);
    }

    #[test]
    fn clamp_rules() {
        assert_eq!(clamp_bregman(-1e-13, 0.0).unwrap(), 0.0);
        assert_eq!(clamp_bregman(-1e-9, 0.0).unwrap(), -1e-9);
        assert!(clamp_bregman(-1e-7, 0.0).is_err());
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("l1".parse::<RegularizerKind>().unwrap(), RegularizerKind::L1);
        assert_eq!("tv".parse::<RegularizerKind>().unwrap(), RegularizerKind::TvAniso);
        assert!("huber".parse::<RegularizerKind>().is_err());
        assert_eq!(
            Regularizer::from_kind(RegularizerKind::TvAniso, 16, true).unwrap(),
            Regularizer::TvAniso(DiscreteGradient::new(4, 4).unwrap())
        );
    }
}
