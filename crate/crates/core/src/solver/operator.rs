//! Flux-form discretization of `sum_k d_k(c_k d_k u) + V u` on the periodic grid.

use crate::error::{Error, Result};
use crate::grid::{GridFunction, SpatialGrid, C64};

use super::coefficients::{CoefficientNet, SampledCoefficients};

/// Real symmetric operator `H = A + V`. `half[k][i]` is the coefficient on the
/// edge from node `i` to its successor along axis `k` (mean of the two nodes).
#[derive(Clone, Debug)]
pub struct Operator {
    grid: SpatialGrid,
    half: Vec<Vec<f64>>,
    v: Vec<f64>,
}

#[inline]
pub(crate) fn next(grid: &SpatialGrid, i: usize, axis: usize) -> usize {
    let m = grid.points();
    if grid.dim() == 1 {
        (i + 1) % m
    } else if axis == 0 {
        (i + m) % (m * m)
    } else {
        let (r, c) = (i / m, i % m);
        r * m + (c + 1) % m
    }
}

#[inline]
pub(crate) fn prev(grid: &SpatialGrid, i: usize, axis: usize) -> usize {
    let m = grid.points();
    if grid.dim() == 1 {
        (i + m - 1) % m
    } else if axis == 0 {
        (i + m * m - m) % (m * m)
    } else {
        let (r, c) = (i / m, i % m);
        r * m + (c + m - 1) % m
    }
}

impl Operator {
    /// From node values of each `c_k` and of `V`.
    pub fn from_nodes(grid: SpatialGrid, c: &[Vec<f64>], v: Vec<f64>) -> Result<Self> {
        if c.len() != grid.dim() || v.len() != grid.len() || c.iter().any(|ck| ck.len() != grid.len()) {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                got: v.len(),
            });
        }
        let half = c
            .iter()
            .enumerate()
            .map(|(axis, ck)| {
                (0..grid.len())
                    .map(|i| 0.5 * (ck[i] + ck[next(&grid, i, axis)]))
                    .collect()
            })
            .collect();
        Ok(Self { grid, half, v })
    }

    pub(crate) fn from_sampled(
        grid: SpatialGrid,
        net: &CoefficientNet,
        s: &SampledCoefficients,
        t: f64,
    ) -> Result<Self> {
        let c: Vec<Vec<f64>> = (0..grid.dim()).map(|k| s.c_at(net, k, t)).collect();
        for (k, ck) in c.iter().enumerate() {
            if let Some((index, &value)) = ck.iter().enumerate().find(|(_, x)| **x < net.c0) {
                return Err(Error::CoefficientBelowBound {
                    component: k,
                    index,
                    value,
                    c0: net.c0,
                    t,
                });
            }
        }
        Self::from_nodes(grid, &c, s.v_at(net, t))
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn half_coefficients(&self, axis: usize) -> &[f64] {
        &self.half[axis]
    }

    pub fn potential(&self) -> &[f64] {
        &self.v
    }

    /// `out = H u`.
    pub fn apply_into(&self, u: &[C64], out: &mut [C64]) {
        let g = &self.grid;
        let inv = 1.0 / (g.spacing() * g.spacing());
        for i in 0..g.len() {
            let mut acc = u[i] * self.v[i];
            for (axis, h) in self.half.iter().enumerate() {
                let n = next(g, i, axis);
                let p = prev(g, i, axis);
                acc += (h[i] * (u[n] - u[i]) - h[p] * (u[i] - u[p])) * inv;
            }
            out[i] = acc;
        }
    }

    pub fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        if *u.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let mut out = vec![C64::new(0.0, 0.0); self.grid.len()];
        self.apply_into(u.values(), &mut out);
        GridFunction::new(self.grid, out)
    }

    /// Energy form `sum_k <c_k D_k^+ phi, D_k^+ phi> + <V phi, phi>` with
    /// forward differences and edge coefficients.
    pub fn form(&self, phi: &GridFunction) -> f64 {
        let g = &self.grid;
        let u = phi.values();
        let dx = g.spacing();
        let mut s = 0.0;
        for i in 0..g.len() {
            s += self.v[i] * u[i].norm_sqr();
            for (axis, h) in self.half.iter().enumerate() {
                s += h[i] * ((u[next(g, i, axis)] - u[i]) / dx).norm_sqr();
            }
        }
        s * g.cell_volume()
    }

    pub fn v_sup(&self) -> f64 {
        self.v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// `||phi||^2 + sum_k ||D_k^+ phi||^2`: the grid `H^1` norm squared matching [`Operator::form`].
pub fn discrete_h1_sq(phi: &GridFunction) -> f64 {
    let g = phi.grid();
    let u = phi.values();
    let dx = g.spacing();
    let mut s = 0.0;
    for i in 0..g.len() {
        s += u[i].norm_sqr();
        for axis in 0..g.dim() {
            s += ((u[next(g, i, axis)] - u[i]) / dx).norm_sqr();
        }
    }
    s * g.cell_volume()
}

/// Builds `H(t) = A_eps(t) + V_eps(t)`; coefficients below `c0` are an error.
pub fn build_operator(net: &CoefficientNet, eps: f64, t: f64, grid: SpatialGrid) -> Result<Operator> {
    let s = net.sample(eps, &grid)?;
    Operator::from_sampled(grid, net, &s, t)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoercivityRow {
    pub form: f64,
    /// `a(phi, phi) + lambda ||phi||^2`.
    pub lhs: f64,
    /// `c0 ||phi||_{H^1}^2`.
    pub rhs: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoercivityReport {
    /// `lambda = c0 + ||V||_inf` from the grid values.
    pub lambda: f64,
    pub rows: Vec<CoercivityRow>,
}

impl CoercivityReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }
}

/// Checks `a(t; phi, phi) + lambda ||phi||^2 >= c0 ||phi||_{H^1}^2` for every probe.
pub fn coercivity_check(
    net: &CoefficientNet,
    eps: f64,
    t: f64,
    grid: SpatialGrid,
    probes: &[GridFunction],
) -> Result<CoercivityReport> {
    let op = build_operator(net, eps, t, grid)?;
    let lambda = net.c0 + op.v_sup();
    let rows = probes
        .iter()
        .map(|phi| {
            if *phi.grid() != grid {
                return Err(Error::GridMismatch);
            }
            let form = op.form(phi);
            let l2 = phi.inner(phi)?.re;
            let lhs = form + lambda * l2;
            let rhs = net.c0 * discrete_h1_sq(phi);
            Ok(CoercivityRow {
                form,
                lhs,
                rhs,
                passed: lhs >= rhs * (1.0 - 1e-12),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CoercivityReport { lambda, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::coefficients::{FieldSpec, Profile};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rough_net(dim: usize) -> CoefficientNet {
        CoefficientNet {
            c: vec![FieldSpec::stationary(1.0, 3.0, Profile::Random { seed: 3, cell: 0.05 }); dim],
            v: FieldSpec::stationary(-2.0, 4.0, Profile::Random { seed: 4, cell: 0.1 }),
            c0: 1.0,
        }
    }

    #[test]
    fn constant_coefficient_stencil() {
        let g = SpatialGrid::new(1, 1.0, 16).unwrap();
        let op = build_operator(&CoefficientNet::free(1), 0.5, 0.0, g).unwrap();
        let mut e = vec![C64::new(0.0, 0.0); 16];
        e[0] = C64::new(1.0, 0.0);
        let mut out = vec![C64::new(0.0, 0.0); 16];
        op.apply_into(&e, &mut out);
        let inv = 1.0 / (g.spacing() * g.spacing());
        assert_eq!(out[0].re, -2.0 * inv);
        assert_eq!(out[1].re, inv);
        assert_eq!(out[15].re, inv);
        assert!(out[2..15].iter().all(|v| v.re == 0.0));
    }

    #[test]
    fn symmetric_for_rough_coefficients() {
        for dim in 1..=2 {
            let g = SpatialGrid::new(dim, 1.0, if dim == 1 { 128 } else { 16 }).unwrap();
            let op = build_operator(&rough_net(dim), 0.1, 0.0, g).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let mut rand_fn =
                || GridFunction::new(g, (0..g.len()).map(|_| C64::new(rng.gen::<f64>() - 0.5, 0.0)).collect()).unwrap();
            let (u, v) = (rand_fn(), rand_fn());
            let a = op.apply(&u).unwrap().inner(&v).unwrap();
            let b = u.inner(&op.apply(&v).unwrap()).unwrap();
            assert!((a - b).norm() <= 1e-12 * a.norm().max(1.0), "dim {dim}: {a} vs {b}");
        }
    }

    #[test]
    fn constants_in_kernel_of_divergence_part() {
        let g = SpatialGrid::new(1, 2.0, 64).unwrap();
        let net = CoefficientNet {
            c: vec![FieldSpec::stationary(2.0, 1.0, Profile::Jump { center: 0.3 })],
            v: FieldSpec::constant(0.0),
            c0: 1.0,
        };
        let op = build_operator(&net, 0.05, 0.0, g).unwrap();
        let out = op.apply(&GridFunction::constant(g, C64::new(1.0, 0.0))).unwrap();
        assert!(out.values().iter().all(|v| v.norm() < 1e-9));
    }

    #[test]
    fn form_matches_minus_inner_product() {
        let g = SpatialGrid::new(2, 1.0, 16).unwrap();
        let op = build_operator(&rough_net(2), 0.1, 0.0, g).unwrap();
        let phi = GridFunction::from_fn(g, |p| C64::new((3.0 * p[0]).sin(), p[1] * p[0])).unwrap();
        let mut noa = op.clone();
        noa.v.iter_mut().for_each(|x| *x = 0.0);
        let via_apply = -noa.apply(&phi).unwrap().inner(&phi).unwrap().re
            + phi
                .values()
                .iter()
                .zip(op.potential())
                .map(|(u, v)| v * u.norm_sqr())
                .sum::<f64>()
                * g.cell_volume();
        assert!((op.form(&phi) - via_apply).abs() < 1e-10 * via_apply.abs());
    }

    #[test]
    fn coercivity_with_large_negative_potential() {
        let g = SpatialGrid::new(1, 1.0, 64).unwrap();
        let net = CoefficientNet {
            c: vec![FieldSpec::constant(1.0)],
            v: FieldSpec::constant(-50.0),
            c0: 1.0,
        };
        let phi = GridFunction::from_real_fn(g, |p| (-(p[0] * p[0]) * 8.0).exp()).unwrap();
        let r = coercivity_check(&net, 0.5, 0.0, g, &[phi]).unwrap();
        assert_eq!(r.lambda, 51.0);
        assert!(r.passed());
        assert!(r.rows[0].form < 0.0);
    }
}
