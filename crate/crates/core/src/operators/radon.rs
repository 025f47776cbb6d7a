//! Discrete parallel-beam Radon transform on `[-1,1]^2`.
//!
//! Each ray is traced through the pixel grid and stores the exact length of
//! its intersection with every pixel it crosses, so the backprojection is the
//! exact transpose of the projection.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{invalid, Error, Result};
use crate::linear::{LinearForwardMap, LinearMap};

/// Largest offset of a line that still meets the unit square.
pub const RADON_HALF_WIDTH: f64 = SQRT_2;

/// Parallel-beam geometry. Pixel `(r, c)` is stored at `r * grid_n + c`; row
/// 0 is the top of the image (`y = 1`), column 0 the left edge (`x = -1`).
/// A ray with angle `phi` and signed offset `s` is the line
/// `x cos(phi) + y sin(phi) = s`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadonGeometry {
    pub grid_n: usize,
    pub angles: Vec<f64>,
    pub offsets: Vec<f64>,
}

impl RadonGeometry {
    pub fn new(grid_n: usize, angles: Vec<f64>, offsets: Vec<f64>) -> Result<Self> {
        if grid_n == 0 {
            return Err(invalid("grid_n", "must be positive"));
        }
        if angles.is_empty() {
            return Err(Error::Empty("angles"));
        }
        if offsets.is_empty() {
            return Err(Error::Empty("offsets"));
        }
        if angles.iter().any(|a| !(a.is_finite() && (0.0..PI).contains(a))) {
            return Err(invalid("angles", "must lie in [0, pi)"));
        }
        if offsets.iter().any(|s| !(s.is_finite() && s.abs() <= RADON_HALF_WIDTH)) {
            return Err(invalid("offsets", "must lie in [-sqrt(2), sqrt(2)]"));
        }
        Ok(Self {
            grid_n,
            angles,
            offsets,
        })
    }

    /// `n_angles` equispaced angles `k pi / n_angles` and `n_offsets`
    /// midpoint offsets covering `[-sqrt 2, sqrt 2]`.
    pub fn uniform(grid_n: usize, n_angles: usize, n_offsets: usize) -> Result<Self> {
        let angles = (0..n_angles).map(|k| k as f64 * PI / n_angles as f64).collect();
        let width = 2.0 * RADON_HALF_WIDTH / n_offsets as f64;
        let offsets = (0..n_offsets)
            .map(|j| -RADON_HALF_WIDTH + (j as f64 + 0.5) * width)
            .collect();
        Self::new(grid_n, angles, offsets)
    }

    pub fn n_rays(&self) -> usize {
        self.angles.len() * self.offsets.len()
    }

    /// Row index of the ray `(angle index, offset index)`.
    pub fn ray_index(&self, angle: usize, offset: usize) -> usize {
        angle * self.offsets.len() + offset
    }
}

/// Projection matrix in compressed-row form.
#[derive(Clone, Debug)]
pub struct RadonTransform {
    geometry: RadonGeometry,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl RadonTransform {
    pub fn geometry(&self) -> &RadonGeometry {
        &self.geometry
    }

    fn row(&self, r: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }
}

impl LinearMap for RadonTransform {
    fn in_dim(&self) -> usize {
        self.geometry.grid_n * self.geometry.grid_n
    }
    fn out_dim(&self) -> usize {
        self.geometry.n_rays()
    }
    fn apply_into(&self, u: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            *o = self.row_dot(r, u);
        }
    }
    fn adjoint_into(&self, v: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (r, &vr) in v.iter().enumerate() {
            if vr != 0.0 {
                self.row_axpy(r, vr, out);
            }
        }
    }
    fn row_dot(&self, row: usize, u: &[f64]) -> f64 {
        let (c, v) = self.row(row);
        c.iter().zip(v).map(|(&j, w)| w * u[j as usize]).sum()
    }
    fn row_axpy(&self, row: usize, scale: f64, out: &mut [f64]) {
        let (c, v) = self.row(row);
        for (&j, w) in c.iter().zip(v) {
            out[j as usize] += scale * w;
        }
    }
}

/// Parameter interval `[t0, t1]` of the line `s n + t d` inside `[-1, 1]`
/// along one axis, or `None` if it misses.
fn clip_axis(origin: f64, dir: f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
    if dir.abs() < 1e-15 {
        if origin >= lo && origin <= hi {
            Some((f64::NEG_INFINITY, f64::INFINITY))
        } else {
            None
        }
    } else {
        let a = (lo - origin) / dir;
        let b = (hi - origin) / dir;
        Some((a.min(b), a.max(b)))
    }
}

/// Pixel intersection lengths of one ray, in order of traversal.
fn trace_ray(grid_n: usize, angle: f64, offset: f64, out: &mut Vec<(u32, f64)>) {
    let (nx, ny) = (angle.cos(), angle.sin());
    let (dx, dy) = (-ny, nx);
    let (ox, oy) = (offset * nx, offset * ny);
    let Some((ax0, ax1)) = clip_axis(ox, dx, -1.0, 1.0) else {
        return;
    };
    let Some((ay0, ay1)) = clip_axis(oy, dy, -1.0, 1.0) else {
        return;
    };
    let t0 = ax0.max(ay0);
    let t1 = ax1.min(ay1);
    if t1 - t0 <= 1e-14 {
        return;
    }
    let h = 2.0 / grid_n as f64;
    let mut ts = vec![t0, t1];
    for (origin, dir) in [(ox, dx), (oy, dy)] {
        if dir.abs() < 1e-15 {
            continue;
        }
        for k in 0..=grid_n {
            let t = (-1.0 + k as f64 * h - origin) / dir;
            if t > t0 && t < t1 {
                ts.push(t);
            }
        }
    }
    ts.sort_by(f64::total_cmp);
    for w in ts.windows(2) {
        let len = w[1] - w[0];
        if len <= 1e-14 {
            continue;
        }
        let tm = 0.5 * (w[0] + w[1]);
        let (x, y) = (ox + tm * dx, oy + tm * dy);
        let col = (((x + 1.0) / h).floor() as isize).clamp(0, grid_n as isize - 1) as usize;
        let row = (((1.0 - y) / h).floor() as isize).clamp(0, grid_n as isize - 1) as usize;
        let idx = (row * grid_n + col) as u32;
        match out.last_mut() {
            Some((j, l)) if *j == idx => *l += len,
            _ => out.push((idx, len)),
        }
    }
}

pub fn make_radon(geom: &RadonGeometry) -> LinearForwardMap {
    LinearForwardMap::new(build_radon(geom))
}

pub(crate) fn build_radon(geom: &RadonGeometry) -> RadonTransform {
    let mut row_ptr = Vec::with_capacity(geom.n_rays() + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut buf = Vec::with_capacity(4 * geom.grid_n);
    row_ptr.push(0);
    for &angle in &geom.angles {
        for &offset in &geom.offsets {
            buf.clear();
            trace_ray(geom.grid_n, angle, offset, &mut buf);
            for &(j, l) in &buf {
                cols.push(j);
                vals.push(l);
            }
            row_ptr.push(cols.len());
        }
    }
    RadonTransform {
        geometry: geom.clone(),
        row_ptr,
        cols,
        vals,
    }
}

/// Pixel-centre indicator of a centred disk.
pub fn disk_image(grid_n: usize, radius: f64, value: f64) -> Vec<f64> {
    let h = 2.0 / grid_n as f64;
    let mut img = vec![0.0; grid_n * grid_n];
    for r in 0..grid_n {
        let y = 1.0 - (r as f64 + 0.5) * h;
        for c in 0..grid_n {
            let x = -1.0 + (c as f64 + 0.5) * h;
            if x * x + y * y <= radius * radius {
                img[r * grid_n + c] = value;
            }
        }
    }
    img
}

/// Piecewise-constant test object: an outer disk with two inserts.
pub fn phantom_image(grid_n: usize) -> Vec<f64> {
    let h = 2.0 / grid_n as f64;
    let mut img = vec![0.0; grid_n * grid_n];
    for r in 0..grid_n {
        let y = 1.0 - (r as f64 + 0.5) * h;
        for c in 0..grid_n {
            let x = -1.0 + (c as f64 + 0.5) * h;
            let mut v = 0.0;
            if x * x / 0.64 + y * y / 0.81 <= 1.0 {
                v = 1.0;
            }
            if (x - 0.3).powi(2) + (y - 0.2).powi(2) <= 0.04 {
                v = 2.0;
            }
            if (x + 0.35).powi(2) / 0.02 + (y + 0.3).powi(2) / 0.06 <= 1.0 {
                v = 0.5;
            }
            img[r * grid_n + c] = v;
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::adjoint_consistency_check;

    /// Chord length of `[-1,1]^2` cut by the line at `(angle, s)`.
    fn square_chord(angle: f64, s: f64) -> f64 {
        let (nx, ny) = (angle.cos(), angle.sin());
        let (dx, dy) = (-ny, nx);
        let Some((a0, a1)) = clip_axis(s * nx, dx, -1.0, 1.0) else {
            return 0.0;
        };
        let Some((b0, b1)) = clip_axis(s * ny, dy, -1.0, 1.0) else {
            return 0.0;
        };
        (a1.min(b1) - a0.max(b0)).max(0.0)
    }

    #[test]
    fn geometry_validation() {
        assert!(RadonGeometry::new(8, vec![PI], vec![0.0]).is_err());
        assert!(RadonGeometry::new(8, vec![0.0], vec![1.5]).is_err());
        assert!(RadonGeometry::new(0, vec![0.0], vec![0.0]).is_err());
        let g = RadonGeometry::uniform(8, 6, 10).unwrap();
        assert_eq!(make_radon(&g).out_dim(), 60);
    }

    #[test]
    fn zero_image_projects_to_zero() {
        let r = make_radon(&RadonGeometry::uniform(16, 8, 9).unwrap());
        assert!(r.apply(&vec![0.0; 256]).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn disk_chords_match_analytic_lengths() {
        let angles = vec![0.0, 0.4, PI / 2.0, 2.3];
        let g = RadonGeometry::new(256, angles.clone(), vec![0.0, 0.3]).unwrap();
        let r = make_radon(&g);
        let p = r.apply(&disk_image(256, 0.5, 1.0));
        for a in 0..angles.len() {
            assert!((p[g.ray_index(a, 0)] - 1.0).abs() <= 0.02, "{}", p[g.ray_index(a, 0)]);
            assert!((p[g.ray_index(a, 1)] - 0.8).abs() <= 0.02, "{}", p[g.ray_index(a, 1)]);
        }
    }

    #[test]
    fn constant_image_gives_square_chords() {
        for grid_n in [4usize, 16, 33] {
            let g = RadonGeometry::uniform(grid_n, 13, 17).unwrap();
            let p = make_radon(&g).apply(&vec![1.0; grid_n * grid_n]);
            for (a, &phi) in g.angles.iter().enumerate() {
                for (o, &s) in g.offsets.iter().enumerate() {
                    let exact = square_chord(phi, s);
                    assert!((p[g.ray_index(a, o)] - exact).abs() <= 2.0 / grid_n as f64);
                }
            }
        }
    }

    #[test]
    fn adjoint_is_exact_transpose() {
        let r = make_radon(&RadonGeometry::uniform(16, 12, 20).unwrap());
        assert!(adjoint_consistency_check(&r, 32, 5).unwrap() <= 1e-12);
    }
}
