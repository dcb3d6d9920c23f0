//! FFT plumbing on the periodic box: transforms, wavenumbers, spectral
//! derivatives and Sobolev norms.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::grid::{GridFunction, SpatialGrid, C64};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if forward {
            p.plan_fft_forward(len)
        } else {
            p.plan_fft_inverse(len)
        }
    })
}

fn transpose_square(data: &mut [C64], m: usize) {
    const BLOCK: usize = 32;
    for ib in (0..m).step_by(BLOCK) {
        for jb in (ib..m).step_by(BLOCK) {
            for i in ib..(ib + BLOCK).min(m) {
                let j0 = if ib == jb { i + 1 } else { jb };
                for j in j0..(jb + BLOCK).min(m) {
                    data.swap(i * m + j, j * m + i);
                }
            }
        }
    }
}

fn transform(grid: &SpatialGrid, data: &mut [C64], forward: bool) {
    let m = grid.points();
    let fft = plan(m, forward);
    let mut scratch = vec![C64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    fft.process_with_scratch(data, &mut scratch);
    if grid.dim() == 2 {
        transpose_square(data, m);
        fft.process_with_scratch(data, &mut scratch);
        transpose_square(data, m);
    }
}

/// Unnormalized forward DFT over all axes, in place.
pub fn forward(grid: &SpatialGrid, data: &mut [C64]) {
    transform(grid, data, true);
}

/// Inverse DFT over all axes including the `1/M^n` normalization.
pub fn inverse(grid: &SpatialGrid, data: &mut [C64]) {
    transform(grid, data, false);
    let s = 1.0 / grid.len() as f64;
    data.iter_mut().for_each(|v| *v *= s);
}

/// Angular wavenumbers `pi * k / L` in FFT order, `k = 0, 1, .., M/2 - 1, -M/2, .., -1`.
pub fn wavenumbers(grid: &SpatialGrid) -> Vec<f64> {
    let m = grid.points() as i64;
    let dk = PI / grid.half_width();
    (0..m)
        .map(|k| if k < m / 2 { k as f64 * dk } else { (k - m) as f64 * dk })
        .collect()
}

/// Squared modulus of the per-axis derivative symbol `(i xi)^order`; the
/// Nyquist mode is dropped for odd orders so derivatives of real data stay real.
fn symbol_sq(xi: f64, index: usize, m: usize, order: usize) -> f64 {
    if order % 2 == 1 && index == m / 2 {
        0.0
    } else {
        xi.powi(2 * order as i32)
    }
}

pub(crate) fn derivative(u: &GridFunction, axis: usize, order: usize) -> GridFunction {
    let grid = *u.grid();
    let m = grid.points();
    let xi = wavenumbers(&grid);
    let mut data = u.values().to_vec();
    forward(&grid, &mut data);
    for (k, v) in data.iter_mut().enumerate() {
        let idx = grid.split(k)[axis];
        let factor = if order % 2 == 1 && idx == m / 2 {
            C64::new(0.0, 0.0)
        } else {
            C64::new(0.0, xi[idx]).powu(order as u32)
        };
        *v *= factor;
    }
    inverse(&grid, &mut data);
    GridFunction::from_raw(grid, data)
}

/// Fourier-space weight `sum_{|alpha| <= k} prod_j |symbol_{alpha_j}|^2`.
fn sobolev_weight(grid: &SpatialGrid, xi: &[f64], flat: usize, k: usize) -> f64 {
    let m = grid.points();
    let idx = grid.split(flat);
    if grid.dim() == 1 {
        (0..=k).map(|a| symbol_sq(xi[idx[0]], idx[0], m, a)).sum()
    } else {
        let mut w = 0.0;
        for a in 0..=k {
            for b in 0..=(k - a) {
                w += symbol_sq(xi[idx[0]], idx[0], m, a) * symbol_sq(xi[idx[1]], idx[1], m, b);
            }
        }
        w
    }
}

pub(crate) fn weighted_norm(u: &GridFunction, weight: impl Fn(usize) -> f64) -> f64 {
    let grid = *u.grid();
    let mut data = u.values().to_vec();
    forward(&grid, &mut data);
    let s: f64 = data.iter().enumerate().map(|(k, v)| weight(k) * v.norm_sqr()).sum();
    (s * grid.cell_volume() / grid.len() as f64).sqrt()
}

pub(crate) fn sobolev_norm(u: &GridFunction, k: usize) -> f64 {
    let grid = *u.grid();
    let xi = wavenumbers(&grid);
    weighted_norm(u, |flat| sobolev_weight(&grid, &xi, flat, k))
}

/// `[||u||_{H^0}, .., ||u||_{H^kmax}]` from a single transform.
pub(crate) fn sobolev_norms(u: &GridFunction, kmax: usize) -> Vec<f64> {
    let grid = *u.grid();
    let xi = wavenumbers(&grid);
    let mut data = u.values().to_vec();
    forward(&grid, &mut data);
    let scale = grid.cell_volume() / grid.len() as f64;
    (0..=kmax)
        .map(|k| {
            let s: f64 = data
                .iter()
                .enumerate()
                .map(|(f, v)| sobolev_weight(&grid, &xi, f, k) * v.norm_sqr())
                .sum();
            (s * scale).sqrt()
        })
        .collect()
}

/// `|xi|^2` at a flat Fourier index.
pub(crate) fn xi_sq(grid: &SpatialGrid, xi: &[f64], flat: usize) -> f64 {
    let idx = grid.split(flat);
    (0..grid.dim()).map(|a| xi[idx[a]] * xi[idx[a]]).sum()
}

/// `||(1 + |xi|^2)^{-1/2} F u||`, the periodic-box `H^{-1}` norm.
pub fn norm_h_minus1(u: &GridFunction) -> f64 {
    let grid = *u.grid();
    let xi = wavenumbers(&grid);
    weighted_norm(u, |flat| 1.0 / (1.0 + xi_sq(&grid, &xi, flat)))
}

/// Circular convolution `dx^n * sum_j a_j b_{i-j}` where `b` is indexed by
/// displacement in FFT order.
pub(crate) fn convolve(grid: &SpatialGrid, a: &[C64], kernel_fft_order: &[C64]) -> Vec<C64> {
    let mut fa = a.to_vec();
    let mut fb = kernel_fft_order.to_vec();
    forward(grid, &mut fa);
    forward(grid, &mut fb);
    fa.iter_mut().zip(&fb).for_each(|(x, y)| *x *= y);
    inverse(grid, &mut fa);
    let dv = grid.cell_volume();
    fa.iter_mut().for_each(|v| *v *= dv);
    fa
}

/// Node displacement vector for FFT-ordered index `flat`.
pub(crate) fn displacement(grid: &SpatialGrid, flat: usize) -> [f64; 2] {
    let m = grid.points();
    let dx = grid.spacing();
    let idx = grid.split(flat);
    let d = |i: usize| {
        if i < m / 2 {
            i as f64 * dx
        } else {
            (i as f64 - m as f64) * dx
        }
    };
    if grid.dim() == 1 {
        [d(idx[0]), 0.0]
    } else {
        [d(idx[0]), d(idx[1])]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::norm_l2;

    #[test]
    fn round_trip_2d() {
        let g = SpatialGrid::new(2, 1.0, 16).unwrap();
        let u = GridFunction::from_fn(g, |p| C64::new(p[0] * p[1], p[0] - 0.3 * p[1])).unwrap();
        let mut d = u.values().to_vec();
        forward(&g, &mut d);
        inverse(&g, &mut d);
        for (a, b) in d.iter().zip(u.values()) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn parseval_matches_physical_norm() {
        let g = SpatialGrid::new(2, 2.0, 32).unwrap();
        let u = GridFunction::from_fn(g, |p| C64::new((-p[0] * p[0]).exp(), p[1].sin())).unwrap();
        let a = norm_l2(&u);
        let b = sobolev_norm(&u, 0);
        assert!(((a - b) / a).abs() < 1e-12);
    }

    #[test]
    fn derivative_along_axis_one_in_2d() {
        let g = SpatialGrid::new(2, PI, 32).unwrap();
        let u = GridFunction::from_real_fn(g, |p| (2.0 * p[1]).sin() * p[0].cos()).unwrap();
        let du = derivative(&u, 1, 1);
        for (k, v) in du.values().iter().enumerate() {
            let p = g.point(k);
            assert!((v.re - 2.0 * (2.0 * p[1]).cos() * p[0].cos()).abs() < 1e-10);
        }
        let d2 = derivative(&u, 0, 2);
        for (k, v) in d2.values().iter().enumerate() {
            let p = g.point(k);
            assert!((v.re + (2.0 * p[1]).sin() * p[0].cos()).abs() < 1e-10);
        }
    }

    #[test]
    fn h_minus1_of_mode() {
        // u = e^{i x} on [-pi, pi): ||u||_{H^-1} = sqrt(2 pi / 2)
        let g = SpatialGrid::new(1, PI, 32).unwrap();
        let u = GridFunction::from_fn(g, |p| C64::new(0.0, p[0]).exp()).unwrap();
        assert!((norm_h_minus1(&u) - PI.sqrt()).abs() < 1e-12);
    }
}
