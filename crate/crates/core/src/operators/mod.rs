//! Concrete forward operators and the sampling design used for risk
//! experiments.

mod radon;

pub use radon::{disk_image, make_radon, phantom_image, RadonGeometry, RadonTransform, RADON_HALF_WIDTH};

use rand::Rng as _;

use crate::error::{invalid, Error, Result};
use crate::linear::{check_dim, DataVector, LinearForwardMap, LinearMap};
use crate::rng;

/// Identity on `R^n`.
#[derive(Clone, Debug)]
pub struct Identity {
    n: usize,
}

impl LinearMap for Identity {
    fn in_dim(&self) -> usize {
        self.n
    }
    fn out_dim(&self) -> usize {
        self.n
    }
    fn apply_into(&self, u: &[f64], out: &mut [f64]) {
        out.copy_from_slice(u);
    }
    fn adjoint_into(&self, v: &[f64], out: &mut [f64]) {
        out.copy_from_slice(v);
    }
    fn row_dot(&self, row: usize, u: &[f64]) -> f64 {
        u[row]
    }
    fn row_axpy(&self, row: usize, scale: f64, out: &mut [f64]) {
        out[row] += scale;
    }
}

pub fn identity(n: usize) -> LinearForwardMap {
    LinearForwardMap::new(Identity { n })
}

/// Row-major dense matrix.
#[derive(Clone, Debug)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Empty("matrix"));
        }
        check_dim(rows * cols, data.len())?;
        if let Some(index) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }
}

impl LinearMap for DenseMatrix {
    fn in_dim(&self) -> usize {
        self.cols
    }
    fn out_dim(&self) -> usize {
        self.rows
    }
    fn apply_into(&self, u: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).iter().zip(u).map(|(a, b)| a * b).sum();
        }
    }
    fn adjoint_into(&self, v: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (i, vi) in v.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
    }
    fn row_dot(&self, row: usize, u: &[f64]) -> f64 {
        self.row(row).iter().zip(u).map(|(a, b)| a * b).sum()
    }
    fn row_axpy(&self, row: usize, scale: f64, out: &mut [f64]) {
        for (o, a) in out.iter_mut().zip(self.row(row)) {
            *o += scale * a;
        }
    }
}

/// Dense operator from a list of rows; the adjoint is the transpose.
pub fn make_dense(matrix: &[Vec<f64>]) -> Result<LinearForwardMap> {
    let rows = matrix.len();
    let cols = matrix.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Err(Error::Empty("matrix"));
    }
    let mut data = Vec::with_capacity(rows * cols);
    for r in matrix {
        check_dim(cols, r.len())?;
        data.extend_from_slice(r);
    }
    Ok(LinearForwardMap::new(DenseMatrix::from_row_major(rows, cols, data)?))
}

/// Circular convolution on `R^n` with a kernel centred at index `(len-1)/2`.
#[derive(Clone, Debug)]
pub struct CircularConvolution {
    kernel: Vec<f64>,
    n: usize,
    centre: usize,
}

impl LinearMap for CircularConvolution {
    fn in_dim(&self) -> usize {
        self.n
    }
    fn out_dim(&self) -> usize {
        self.n
    }
    fn apply_into(&self, u: &[f64], out: &mut [f64]) {
        let n = self.n;
        for (i, o) in out.iter_mut().enumerate() {
            *o = self
                .kernel
                .iter()
                .enumerate()
                .map(|(j, k)| k * u[(i + n + self.centre - j) % n])
                .sum();
        }
    }
    fn adjoint_into(&self, v: &[f64], out: &mut [f64]) {
        let n = self.n;
        for (m, o) in out.iter_mut().enumerate() {
            *o = self
                .kernel
                .iter()
                .enumerate()
                .map(|(j, k)| k * v[(m + j + n - self.centre) % n])
                .sum();
        }
    }
}

pub fn make_convolution(kernel: &[f64], n: usize) -> Result<LinearForwardMap> {
    if n == 0 {
        return Err(invalid("n", "must be positive"));
    }
    if kernel.is_empty() {
        return Err(Error::Empty("kernel"));
    }
    if kernel.len() > n {
        return Err(invalid("kernel", format!("length {} exceeds n = {n}", kernel.len())));
    }
    if let Some(index) = kernel.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(LinearForwardMap::new(CircularConvolution {
        kernel: kernel.to_vec(),
        n,
        centre: (kernel.len() - 1) / 2,
    }))
}

/// Empirical design: which rows of a base operator were drawn, their weights
/// and the additive noise realised at each draw.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledDesign {
    pub sample_rows: Vec<usize>,
    pub weights: Vec<f64>,
    pub noise: DataVector,
    pub seed: u64,
}

impl SampledDesign {
    pub fn new(sample_rows: Vec<usize>, weights: Vec<f64>, noise: Vec<f64>, seed: u64) -> Result<Self> {
        if sample_rows.is_empty() {
            return Err(Error::Empty("sample_rows"));
        }
        check_dim(sample_rows.len(), weights.len())?;
        check_dim(sample_rows.len(), noise.len())?;
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(invalid("weights", "must be finite and nonnegative"));
        }
        Ok(Self {
            sample_rows,
            weights,
            noise: DataVector::new(noise)?,
            seed,
        })
    }

    /// Every row of an `m`-row operator once, weight `1/m`, no noise.
    pub fn full(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::Empty("design"));
        }
        Self::new((0..m).collect(), vec![1.0 / m as f64; m], vec![0.0; m], 0)
    }

    pub fn len(&self) -> usize {
        self.sample_rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_rows.is_empty()
    }
}

/// Draws `n` rows uniformly with replacement, weights `1/n`, and i.i.d.
/// Gaussian noise of standard deviation `noise_sigma`.
pub fn draw_design(base_out_dim: usize, n: usize, noise_sigma: f64, seed: u64) -> Result<SampledDesign> {
    if n == 0 {
        return Err(invalid("N", "must be at least 1"));
    }
    if base_out_dim == 0 {
        return Err(invalid("base_out_dim", "must be positive"));
    }
    if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
        return Err(invalid("noise_sigma", "must be finite and nonnegative"));
    }
    let mut rows_rng = rng::substream(seed, "design", 0);
    let sample_rows = (0..n).map(|_| rows_rng.random_range(0..base_out_dim)).collect();
    let noise = if noise_sigma == 0.0 {
        vec![0.0; n]
    } else {
        let mut noise_rng = rng::substream(seed, "noise", 0);
        rng::gaussian_vec(&mut noise_rng, n)
            .into_iter()
            .map(|x| noise_sigma * x)
            .collect()
    };
    SampledDesign::new(sample_rows, vec![1.0 / n as f64; n], noise, seed)
}

/// Rows of a base operator, each scaled by the square root of its weight.
#[derive(Clone, Debug)]
pub struct SampledMap {
    base: LinearForwardMap,
    rows: Vec<usize>,
    scales: Vec<f64>,
}

impl LinearMap for SampledMap {
    fn in_dim(&self) -> usize {
        self.base.in_dim()
    }
    fn out_dim(&self) -> usize {
        self.rows.len()
    }
    fn apply_into(&self, u: &[f64], out: &mut [f64]) {
        for ((o, &r), s) in out.iter_mut().zip(&self.rows).zip(&self.scales) {
            *o = s * self.base.row_dot(r, u);
        }
    }
    fn adjoint_into(&self, v: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for ((vi, &r), s) in v.iter().zip(&self.rows).zip(&self.scales) {
            if *vi != 0.0 {
                self.base.row_axpy(r, s * vi, out);
            }
        }
    }
    fn row_dot(&self, row: usize, u: &[f64]) -> f64 {
        self.scales[row] * self.base.row_dot(self.rows[row], u)
    }
    fn row_axpy(&self, row: usize, scale: f64, out: &mut [f64]) {
        self.base.row_axpy(self.rows[row], scale * self.scales[row], out)
    }
}

/// Composition of `f` with the sampling operator of `design`; row `i` of the
/// result is `sqrt(weight_i)` times row `sample_rows[i]` of `f`, so that
/// `|F~u - v~|^2` is the weighted empirical mean of squared residuals.
pub fn make_sampled(f: &LinearForwardMap, design: &SampledDesign) -> Result<LinearForwardMap> {
    let m = f.out_dim();
    if let Some(&index) = design.sample_rows.iter().find(|&&r| r >= m) {
        return Err(Error::IndexOutOfRange { index, dim: m });
    }
    Ok(LinearForwardMap::new(SampledMap {
        base: f.clone(),
        rows: design.sample_rows.clone(),
        scales: design.weights.iter().map(|w| w.sqrt()).collect(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::{adjoint_consistency_check, norm_sq};

    #[test]
    fn dense_examples() {
        let i2 = make_dense(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(i2.apply(&[1.0, 2.0]), vec![1.0, 2.0]);
        let a = make_dense(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(a.apply(&[1.0, 0.0]), vec![1.0, 3.0]);
        assert_eq!(a.adjoint(&[1.0, 0.0]), vec![1.0, 2.0]);
    }

    #[test]
    fn dense_rejects_bad_input() {
        assert!(make_dense(&[]).is_err());
        assert!(make_dense(&[vec![]]).is_err());
        assert!(make_dense(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(make_dense(&[vec![f64::NAN]]).is_err());
    }

    #[test]
    fn convolution_examples() {
        let dirac = make_convolution(&[1.0], 5).unwrap();
        let u = [1.0, -2.0, 3.0, 0.5, 4.0];
        assert_eq!(dirac.apply(&u), u.to_vec());

        let avg = make_convolution(&[0.5, 0.5], 6).unwrap();
        assert!(avg.apply(&[2.5; 6]).iter().all(|x| (x - 2.5).abs() < 1e-15));

        let blur = make_convolution(&[0.25, 0.5, 0.25], 8).unwrap();
        let mut e0 = vec![0.0; 8];
        e0[0] = 1.0;
        assert_eq!(blur.apply(&e0), vec![0.5, 0.25, 0.0, 0.0, 0.0, 0.0, 0.0, 0.25]);
    }

    #[test]
    fn convolution_rejects_bad_sizes() {
        assert!(make_convolution(&[1.0], 0).is_err());
        assert!(make_convolution(&[1.0, 1.0, 1.0], 2).is_err());
        assert!(make_convolution(&[], 4).is_err());
    }

    #[test]
    fn convolution_adjoint_is_exact() {
        let k = make_convolution(&[0.1, -0.3, 0.7, 0.2], 11).unwrap();
        assert!(adjoint_consistency_check(&k, 32, 9).unwrap() <= 1e-12);
    }

    #[test]
    fn sampled_full_and_single_row() {
        let a = make_dense(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![-1.0, 0.5]]).unwrap();
        let u = [0.3, -1.2];
        let full = make_sampled(&a, &SampledDesign::full(3).unwrap()).unwrap();
        let lhs = norm_sq(&full.apply(&u));
        let rhs = norm_sq(&a.apply(&u)) / 3.0;
        assert!((lhs - rhs).abs() <= 1e-15 * rhs.max(1.0));

        let single = SampledDesign::new(vec![1], vec![1.0], vec![0.0], 0).unwrap();
        let s = make_sampled(&a, &single).unwrap();
        assert_eq!(s.apply(&u), vec![a.apply(&u)[1]]);
        assert!(adjoint_consistency_check(&full, 16, 2).unwrap() <= 1e-12);
    }

    #[test]
    fn sampled_rejects_out_of_range_rows() {
        let a = identity(3);
        let bad = SampledDesign::new(vec![0, 3], vec![0.5, 0.5], vec![0.0, 0.0], 0).unwrap();
        assert_eq!(
            make_sampled(&a, &bad).unwrap_err(),
            Error::IndexOutOfRange { index: 3, dim: 3 }
        );
    }

    #[test]
    fn design_determinism_and_zero_noise() {
        let a = draw_design(100, 50, 0.0, 4).unwrap();
        assert!(a.noise.iter().all(|&x| x == 0.0));
        let b = draw_design(100, 50, 0.3, 4).unwrap();
        let c = draw_design(100, 50, 0.3, 4).unwrap();
        assert_eq!(b, c);
        assert_eq!(a.sample_rows, b.sample_rows);
        assert!(b.sample_rows.iter().all(|&r| r < 100));
        assert!((b.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(draw_design(100, 0, 0.1, 4).is_err());
    }

    #[test]
    fn design_noise_variance() {
        let d = draw_design(10, 10_000, 0.1, 11).unwrap();
        let n = d.noise.len() as f64;
        let mean = d.noise.iter().sum::<f64>() / n;
        let var = d.noise.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((0.009..=0.011).contains(&var), "variance {var}");
    }
}
