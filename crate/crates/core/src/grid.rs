//! Uniform periodic grids on the box `[-L, L)^n` and complex grid functions.
//!
//! Node `i` along an axis sits at `-L + i * dx`; in two dimensions values are
//! stored row-major with axis 1 contiguous, so flat index `i0 * M + i1`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral;

pub type C64 = Complex64;

/// A point of R^n with n <= 2; unused coordinates are zero.
pub type Point = [f64; 2];

pub fn norm(p: Point) -> f64 {
    p[0].hypot(p[1])
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpatialGrid {
    dim: usize,
    half_width: f64,
    points: usize,
    spacing: f64,
}

impl SpatialGrid {
    pub fn new(dim: usize, half_width: f64, points: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in {{1, 2}}")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!("half-width {half_width} must be positive")));
        }
        if points < 8 || !points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis {points} must be a power of two >= 8"
            )));
        }
        // M is a power of two, so 2L/M is exact and spacing * M == 2L.
        let spacing = 2.0 * half_width / points as f64;
        Ok(Self {
            dim,
            half_width,
            points,
            spacing,
        })
    }

    /// Smallest power-of-two grid on `[-L, L)^n` with spacing at most `max_spacing`.
    pub fn with_max_spacing(dim: usize, half_width: f64, max_spacing: f64) -> Result<Self> {
        let needed = (2.0 * half_width / max_spacing).ceil().max(8.0) as usize;
        Self::new(dim, half_width, needed.next_power_of_two())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Total number of nodes, `M^n`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight of one node, `dx^n`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        (2.0 * self.half_width).powi(self.dim as i32)
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing
    }

    /// Per-axis indices of a flat node index.
    pub fn split(&self, flat: usize) -> [usize; 2] {
        if self.dim == 1 {
            [flat, 0]
        } else {
            [flat / self.points, flat % self.points]
        }
    }

    pub fn point(&self, flat: usize) -> Point {
        let [i0, i1] = self.split(flat);
        if self.dim == 1 {
            [self.coord(i0), 0.0]
        } else {
            [self.coord(i0), self.coord(i1)]
        }
    }

    pub fn points_iter(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.len()).map(move |k| self.point(k))
    }

    /// True when the node lies on the outermost layer of the box.
    pub fn on_boundary_layer(&self, flat: usize) -> bool {
        let last = self.points - 1;
        let idx = self.split(flat);
        idx[..self.dim].iter().any(|&i| i == 0 || i == last)
    }

    /// Same box with `factor` (a power of two) times more points per axis.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(self.dim, self.half_width, self.points * factor)
    }

    /// Minimal power-of-two `M` such that this box is resolved to `max_spacing`.
    pub fn min_points_for(&self, max_spacing: f64) -> usize {
        ((2.0 * self.half_width / max_spacing).ceil() as usize)
            .max(8)
            .next_power_of_two()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: SpatialGrid,
    values: Vec<C64>,
}

impl GridFunction {
    pub fn new(grid: SpatialGrid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: SpatialGrid) -> Self {
        Self {
            grid,
            values: vec![C64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn constant(grid: SpatialGrid, value: C64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn from_fn(grid: SpatialGrid, f: impl Fn(Point) -> C64) -> Result<Self> {
        let values = grid.points_iter().map(f).collect();
        Self::new(grid, values)
    }

    pub fn from_real_fn(grid: SpatialGrid, f: impl Fn(Point) -> f64) -> Result<Self> {
        Self::from_fn(grid, |p| C64::new(f(p), 0.0))
    }

    pub(crate) fn from_raw(grid: SpatialGrid, values: Vec<C64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scale(&self, a: C64) -> Self {
        Self::from_raw(self.grid, self.values.iter().map(|&v| a * v).collect())
    }

    pub fn conj(&self) -> Self {
        Self::from_raw(self.grid, self.values.iter().map(|v| v.conj()).collect())
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: C64, other: &GridFunction, b: C64) -> Result<Self> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&u, &v)| a * u + b * v)
            .collect();
        Ok(Self::from_raw(self.grid, values))
    }

    pub fn sub(&self, other: &GridFunction) -> Result<Self> {
        self.combine(C64::new(1.0, 0.0), other, C64::new(-1.0, 0.0))
    }

    pub fn abs2(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    /// Discrete `L^2` inner product `dx^n * sum u conj(v)`.
    pub fn inner(&self, other: &GridFunction) -> Result<C64> {
        self.check_same_grid(other)?;
        let s: C64 = self.values.iter().zip(&other.values).map(|(u, v)| u * v.conj()).sum();
        Ok(s * self.grid.cell_volume())
    }

    /// Riemann sum `dx^n * sum values`.
    pub fn integral(&self) -> C64 {
        self.values.iter().sum::<C64>() * self.grid.cell_volume()
    }

    /// Largest magnitude on the outermost grid layer relative to the global peak.
    /// Zero functions report 0.
    pub fn boundary_ratio(&self) -> f64 {
        let peak = norm_linf(self);
        if peak == 0.0 {
            return 0.0;
        }
        let edge = self
            .values
            .iter()
            .enumerate()
            .filter(|(k, _)| self.grid.on_boundary_layer(*k))
            .map(|(_, v)| v.norm())
            .fold(0.0, f64::max);
        edge / peak
    }

    /// Every `factor`-th node of each axis; the result lives on the coarse grid
    /// whose nodes coincide with the selected ones.
    pub fn restrict(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !factor.is_power_of_two() || !self.grid.points.is_multiple_of(factor) {
            return Err(Error::InvalidArgument(format!("restriction factor {factor}")));
        }
        let coarse = SpatialGrid::new(self.grid.dim, self.grid.half_width, self.grid.points / factor)?;
        let m = self.grid.points;
        let values = (0..coarse.len())
            .map(|k| {
                let [i0, i1] = coarse.split(k);
                if coarse.dim == 1 {
                    self.values[i0 * factor]
                } else {
                    self.values[i0 * factor * m + i1 * factor]
                }
            })
            .collect();
        Ok(Self::from_raw(coarse, values))
    }

    pub(crate) fn check_same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}

/// `(dx^n * sum |u_i|^2)^{1/2}`.
pub fn norm_l2(u: &GridFunction) -> f64 {
    let s: f64 = u.values.iter().map(|v| v.norm_sqr()).sum();
    (s * u.grid.cell_volume()).sqrt()
}

/// The `L^2` norm computed from the discrete Fourier coefficients (Parseval).
pub fn norm_l2_spectral(u: &GridFunction) -> f64 {
    spectral::sobolev_norm(u, 0)
}

/// `(sum_{|alpha| <= k} ||d^alpha u||^2)^{1/2}` with spectral derivatives.
/// Orders above 4 are rejected.
pub fn norm_hk(u: &GridFunction, k: usize) -> Result<f64> {
    if k > 4 {
        return Err(Error::UnsupportedOrder(k));
    }
    Ok(spectral::sobolev_norm(u, k))
}

pub fn norm_linf(u: &GridFunction) -> f64 {
    u.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Fourier-collocation derivative of order 1 or 2 along `axis`.
pub fn derivative(u: &GridFunction, axis: usize, order: usize) -> Result<GridFunction> {
    if axis >= u.grid.dim {
        return Err(Error::InvalidArgument(format!(
            "axis {axis} out of range for dimension {}",
            u.grid.dim
        )));
    }
    if !(1..=2).contains(&order) {
        return Err(Error::InvalidArgument(format!(
            "derivative order {order} not in {{1, 2}}"
        )));
    }
    Ok(spectral::derivative(u, axis, order))
}

/// Distributional pairing `dx^n * sum u_i psi_i` (no conjugation).
pub fn pair(u: &GridFunction, psi: &crate::testfn::TestFunction) -> Result<C64> {
    if *u.grid() != *psi.grid() {
        return Err(Error::GridMismatch);
    }
    let s: C64 = u.values.iter().zip(psi.values()).map(|(v, &w)| v * w).sum();
    Ok(s * u.grid.cell_volume())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid1(l: f64, m: usize) -> SpatialGrid {
        SpatialGrid::new(1, l, m).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(SpatialGrid::new(3, 1.0, 16).is_err());
        assert!(SpatialGrid::new(1, 1.0, 12).is_err());
        assert!(SpatialGrid::new(1, 1.0, 4).is_err());
        assert!(SpatialGrid::new(1, -1.0, 16).is_err());
    }

    #[test]
    fn spacing_times_points_is_box_length() {
        for &(l, m) in &[(1.0, 8), (0.3, 1024), (17.25, 4096)] {
            let g = grid1(l, m);
            assert_eq!(g.spacing() * m as f64, 2.0 * l);
        }
    }

    #[test]
    fn rejects_non_finite_values() {
        let g = grid1(1.0, 8);
        let mut v = vec![C64::new(1.0, 0.0); 8];
        v[3] = C64::new(f64::NAN, 0.0);
        assert!(matches!(GridFunction::new(g, v), Err(Error::NonFinite { index: 3 })));
        assert!(GridFunction::new(g, vec![C64::new(0.0, 0.0); 7]).is_err());
    }

    #[test]
    fn l2_of_trivial_functions() {
        for &m in &[8, 64, 512] {
            let g = grid1(1.0, m);
            assert_eq!(norm_l2(&GridFunction::zeros(g)), 0.0);
            let one = GridFunction::constant(g, C64::new(1.0, 0.0));
            assert!((norm_l2(&one) - 2f64.sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn l2_of_identity_matches_exact_integral() {
        // exact: int_{-1}^{1} x^2 dx = 2/3
        let g = grid1(1.0, 256);
        let u = GridFunction::from_real_fn(g, |p| p[0]).unwrap();
        assert!((norm_l2(&u) - (2.0f64 / 3.0).sqrt()).abs() < 1e-3);
    }

    #[test]
    fn linf_of_sine() {
        let g = grid1(1.0, 256);
        let u = GridFunction::from_real_fn(g, |p| (PI * p[0]).sin()).unwrap();
        assert!((norm_linf(&u) - 1.0).abs() < 1e-3);
        assert_eq!(norm_linf(&GridFunction::zeros(g)), 0.0);
    }

    #[test]
    fn h1_of_sine() {
        // int sin^2 = 1 and int (pi cos)^2 = pi^2 over [-1, 1)
        let g = grid1(1.0, 256);
        let u = GridFunction::from_real_fn(g, |p| (PI * p[0]).sin()).unwrap();
        let h1 = norm_hk(&u, 1).unwrap();
        assert!((h1 - (1.0 + PI * PI).sqrt()).abs() < 1e-6);
        assert!((norm_hk(&u, 0).unwrap() - norm_l2(&u)).abs() < 1e-12);
        assert!(matches!(norm_hk(&u, 5), Err(Error::UnsupportedOrder(5))));
    }

    #[test]
    fn hk_of_constant_is_l2() {
        let g = SpatialGrid::new(2, 1.5, 16).unwrap();
        let c = C64::new(0.3, -0.4);
        let u = GridFunction::constant(g, c);
        for k in 0..=4 {
            assert!((norm_hk(&u, k).unwrap() - c.norm() * g.volume().sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_of_fourier_mode() {
        let l = 2.0;
        let g = grid1(l, 64);
        let k = 3.0;
        let u = GridFunction::from_fn(g, |p| C64::new(0.0, k * PI * p[0] / l).exp()).unwrap();
        let du = derivative(&u, 0, 1).unwrap();
        let factor = C64::new(0.0, k * PI / l);
        for (a, b) in du.values().iter().zip(u.values()) {
            assert!((a - factor * b).norm() < 1e-10);
        }
        let one = GridFunction::constant(g, C64::new(1.0, 0.0));
        assert!(norm_linf(&derivative(&one, 0, 1).unwrap()) < 1e-12);
        assert!(norm_linf(&derivative(&one, 0, 2).unwrap()) < 1e-12);
        assert!(derivative(&one, 1, 1).is_err());
        assert!(derivative(&one, 0, 3).is_err());
    }

    #[test]
    fn sawtooth_derivative_is_finite_with_unit_interior_mean() {
        let g = grid1(1.0, 256);
        let u = GridFunction::from_real_fn(g, |p| p[0]).unwrap();
        let du = derivative(&u, 0, 1).unwrap();
        assert!(du.values().iter().all(|v| v.re.is_finite()));
        // oracle: centred finite differences on the interior half equal 1
        let fd_mean = {
            let v = u.values();
            let idx: Vec<usize> = (64..192).collect();
            idx.iter()
                .map(|&i| (v[i + 1].re - v[i - 1].re) / (2.0 * g.spacing()))
                .sum::<f64>()
                / idx.len() as f64
        };
        assert!((fd_mean - 1.0).abs() < 1e-12);
        let mean: f64 = du.values()[64..192].iter().map(|v| v.re).sum::<f64>() / 128.0;
        assert!((mean - fd_mean).abs() < 0.05, "interior mean {mean}");
    }

    #[test]
    fn restrict_keeps_coinciding_nodes() {
        let g = SpatialGrid::new(2, 1.0, 32).unwrap();
        let u = GridFunction::from_real_fn(g, |p| p[0] + 10.0 * p[1]).unwrap();
        let c = u.restrict(4).unwrap();
        assert_eq!(c.grid().points(), 8);
        for (k, v) in c.values().iter().enumerate() {
            let p = c.grid().point(k);
            assert!((v.re - (p[0] + 10.0 * p[1])).abs() < 1e-14);
        }
    }
}
