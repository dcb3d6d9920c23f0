//! Exact free evolution `exp(i t Laplacian)` on the periodic box, the
//! probability densities `|u_eps(t)|^2` of square-root Dirac data, and a
//! cross-check of the Crank–Nicolson solver.

use crate::error::{Error, Result};
use crate::fit::{observed_orders, rate_fit};
use crate::grid::{norm_l2, norm_linf, GridFunction, SpatialGrid, C64};
use crate::mollifier::{check_resolution, MollifierSpec};
use crate::quad::integrate_half_line;
use crate::regnet::EpsGrid;
use crate::solver::{solve, solve_from, CauchyProblem, CoefficientNet, GridPolicy, InitialData, TimePolicy};
use crate::spectral;
use crate::testfn::TestFunctionSpec;

use std::f64::consts::PI;

/// Largest admissible `|mass - 1|`.
pub const MASS_TOLERANCE: f64 = 1e-8;
/// Square-root data is sampled with `dx <= eps / SQRT_PER_EPS`.
pub const SQRT_PER_EPS: f64 = 6.0;
/// Outgoing mass fraction above which a run counts as wrapped.
pub const WRAP_LIMIT: f64 = 1e-3;
/// Wrap-free boxes satisfy `L >= WRAP_FACTOR * t / eps`. Periodic images of
/// the packet then sit at `|xi| eps >= 25` in the spectrum of `sqrt(rho)`,
/// where its transform is below 1e-9 of its peak.
pub const WRAP_FACTOR: f64 = 25.0;

/// `F^{-1}[exp(-i t |xi|^2) F u0]`.
pub fn free_evolve(u0: &GridFunction, t: f64) -> GridFunction {
    let grid = *u0.grid();
    let xi = spectral::wavenumbers(&grid);
    let mut data = u0.values().to_vec();
    spectral::forward(&grid, &mut data);
    for (k, v) in data.iter_mut().enumerate() {
        *v *= C64::new(0.0, -t * spectral::xi_sq(&grid, &xi, k)).exp();
    }
    spectral::inverse(&grid, &mut data);
    GridFunction::from_raw(grid, data)
}

/// Fraction of `||u0||^2` carried by wavenumbers that travel farther than the
/// half-width within time `t` (group velocity `2 |xi|`).
pub fn wrap_fraction(u0: &GridFunction, t: f64) -> f64 {
    let grid = *u0.grid();
    let xi = spectral::wavenumbers(&grid);
    let limit = grid.half_width() / (2.0 * t.abs());
    let mut data = u0.values().to_vec();
    spectral::forward(&grid, &mut data);
    let (mut out, mut total) = (0.0, 0.0);
    for (k, v) in data.iter().enumerate() {
        let e = v.norm_sqr();
        total += e;
        if spectral::xi_sq(&grid, &xi, k).sqrt() > limit {
            out += e;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        out / total
    }
}

/// `|u_eps(t)|^2` on the grid together with its discrete mass.
#[derive(Clone, Debug)]
pub struct ProbabilityDensitySnapshot {
    pub t: f64,
    pub eps: f64,
    pub density: GridFunction,
    pub mass: f64,
}

impl ProbabilityDensitySnapshot {
    pub fn new(eps: f64, t: f64, u: &GridFunction) -> Self {
        let values = u.values().iter().map(|v| C64::new(v.norm_sqr(), 0.0)).collect();
        let density = GridFunction::from_raw(*u.grid(), values);
        let mass = density.integral().re;
        Self { t, eps, density, mass }
    }

    /// `<mu_eps^t, psi>` as a Riemann sum with the closed-form `psi`.
    pub fn pair(&self, psi: &TestFunctionSpec) -> f64 {
        let grid = self.density.grid();
        grid.points_iter()
            .zip(self.density.values())
            .map(|(p, d)| psi.eval(p) * d.re)
            .sum::<f64>()
            * grid.cell_volume()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MassReport {
    pub mass: f64,
    pub deviation: f64,
    pub passed: bool,
}

pub fn mass_check(snap: &ProbabilityDensitySnapshot) -> MassReport {
    let deviation = (snap.mass - 1.0).abs();
    MassReport {
        mass: snap.mass,
        deviation,
        passed: deviation <= MASS_TOLERANCE,
    }
}

fn require_sqrt_integrable(spec: &MollifierSpec) -> Result<f64> {
    spec.sqrt_l1()
        .ok_or_else(|| Error::Mollifier(format!("sqrt of {} is not integrable", spec.name())))
}

/// `sqrt(rho_eps)` sampled at the nodes; needs `dx <= eps / 6`.
pub fn sqrt_delta(spec: &MollifierSpec, eps: f64, grid: SpatialGrid) -> Result<GridFunction> {
    require_sqrt_integrable(spec)?;
    if spec.dim() != grid.dim() {
        return Err(Error::InvalidArgument("mollifier and grid dimensions differ".into()));
    }
    check_resolution(eps, &grid, SQRT_PER_EPS)?;
    GridFunction::from_real_fn(grid, |p| spec.rho_eps(eps, p).sqrt())
}

/// Radius `R` (in units of ε) with `rho` mass outside the ball of radius `R` below `mass`.
pub fn tail_radius(spec: &MollifierSpec, mass: f64) -> f64 {
    let outside = |r0: f64| {
        let f = |r: f64| {
            let r = r0 + r;
            let shell = if spec.dim() == 1 { 2.0 } else { 2.0 * PI * r };
            shell * spec.radial(r)
        };
        integrate_half_line(f, 400)
    };
    let mut r = 1.0;
    while outside(r) > mass && r < 1e6 {
        r *= 1.25;
    }
    r
}

/// Box for the √δ evolution: resolves ε, holds the mollifier tail, the test
/// supports, and (for `t_wrap > 0`) the outgoing packet up to `t_wrap`.
pub fn free_box(spec: &MollifierSpec, eps: f64, t_wrap: f64, support: f64) -> Result<SpatialGrid> {
    let needed = (tail_radius(spec, 1e-11) * eps)
        .max(WRAP_FACTOR * t_wrap.abs() / eps)
        .max(support + 0.5)
        .max(2.0);
    let dx = eps / SQRT_PER_EPS;
    let m = ((2.0 * needed / dx).ceil() as usize).max(8).next_power_of_two();
    // Grow the box rather than refine: keeps dx = eps / 6 exactly.
    SpatialGrid::new(spec.dim(), 0.5 * m as f64 * dx, m)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DispersiveReport {
    pub eps: f64,
    pub t: f64,
    pub sup_norm: f64,
    /// `||sqrt(rho_eps)||_{L^1} / (4 pi |t|)^{n/2}`.
    pub bound: f64,
    pub ratio: f64,
    pub wrap_fraction: f64,
    pub passed: bool,
}

fn dispersive_report(
    spec: &MollifierSpec,
    eps: f64,
    t: f64,
    u0: &GridFunction,
    ut: &GridFunction,
) -> Result<DispersiveReport> {
    if t == 0.0 {
        return Err(Error::InvalidArgument("dispersive bound is vacuous at t = 0".into()));
    }
    let l1 = require_sqrt_integrable(spec)? * eps.powf(spec.dim() as f64 / 2.0);
    let bound = l1 / (4.0 * PI * t.abs()).powf(spec.dim() as f64 / 2.0);
    let sup_norm = norm_linf(ut);
    let wrap = wrap_fraction(u0, t);
    Ok(DispersiveReport {
        eps,
        t,
        sup_norm,
        bound,
        ratio: sup_norm / bound,
        wrap_fraction: wrap,
        passed: sup_norm <= bound && wrap <= WRAP_LIMIT,
    })
}

/// Evolves `sqrt(rho_eps)` to time `t` on `grid` and compares the sup-norm with
/// the dispersive bound.
pub fn dispersive_bound_check(spec: &MollifierSpec, eps: f64, t: f64, grid: SpatialGrid) -> Result<DispersiveReport> {
    if t == 0.0 {
        return Err(Error::InvalidArgument("dispersive bound is vacuous at t = 0".into()));
    }
    let u0 = sqrt_delta(spec, eps, grid)?;
    let ut = free_evolve(&u0, t);
    dispersive_report(spec, eps, t, &u0, &ut)
}

/// One `(eps, t)` point of a √δ sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub eps: f64,
    pub t: f64,
    pub points: usize,
    pub half_width: f64,
    pub mass: MassReport,
    pub dispersive: Option<DispersiveReport>,
    /// `<mu_eps^t, psi>` in the order of the sweep's tests.
    pub pairings: Vec<f64>,
}

/// Sweep over ε and t of the √δ example. With `wrap_free` the box holds the
/// outgoing packet up to the largest t; otherwise only tail and supports.
#[derive(Clone, Debug)]
pub struct FreeSweep {
    pub mollifier: MollifierSpec,
    pub eps: EpsGrid,
    pub times: Vec<f64>,
    pub tests: Vec<TestFunctionSpec>,
    pub wrap_free: bool,
}

impl FreeSweep {
    fn support(&self) -> f64 {
        self.tests
            .iter()
            .map(|t| {
                let c = t.center();
                c[0].abs().max(c[1].abs()) + t.radius()
            })
            .fold(0.0, f64::max)
    }

    /// Runs one ε at a time; each ε keeps a single box for all t.
    pub fn run(&self) -> Result<Vec<SweepPoint>> {
        if let Some(t) = self.times.iter().find(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument(format!("time {t}")));
        }
        let t_wrap = if self.wrap_free {
            self.times.iter().fold(0.0f64, |m, t| m.max(t.abs()))
        } else {
            0.0
        };
        let mut out = Vec::new();
        for &eps in self.eps.values() {
            let grid = free_box(&self.mollifier, eps, t_wrap, self.support())?;
            let u0 = sqrt_delta(&self.mollifier, eps, grid)?;
            for &t in &self.times {
                let ut = if t == 0.0 { u0.clone() } else { free_evolve(&u0, t) };
                let dispersive = if t == 0.0 {
                    None
                } else {
                    Some(dispersive_report(&self.mollifier, eps, t, &u0, &ut)?)
                };
                let snap = ProbabilityDensitySnapshot::new(eps, t, &ut);
                out.push(SweepPoint {
                    eps,
                    t,
                    points: grid.points(),
                    half_width: grid.half_width(),
                    mass: mass_check(&snap),
                    dispersive,
                    pairings: self.tests.iter().map(|psi| snap.pair(psi)).collect(),
                });
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VagueRow {
    pub test: String,
    pub pairings: Vec<f64>,
    /// Decay exponent of `|<mu_eps^t, psi>|` in ε.
    pub slope: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VagueReport {
    pub t: f64,
    pub eps: Vec<f64>,
    /// `<mu_eps^t, 1>` for every ε.
    pub masses: Vec<f64>,
    pub rows: Vec<VagueRow>,
    pub dispersive: Vec<DispersiveReport>,
    pub mass_ok: bool,
    pub passed: bool,
}

/// Pairings with every test decay at least like `eps^{n/2}` while the total
/// mass stays 1.
pub fn vague_convergence_check(
    spec: &MollifierSpec,
    t: f64,
    tests: &[TestFunctionSpec],
    eps: &EpsGrid,
) -> Result<VagueReport> {
    if t == 0.0 {
        return Err(Error::InvalidArgument("vague convergence is tested for t != 0".into()));
    }
    let sweep = FreeSweep {
        mollifier: spec.clone(),
        eps: eps.clone(),
        times: vec![t],
        tests: tests.to_vec(),
        wrap_free: true,
    };
    let points = sweep.run()?;
    let e: Vec<f64> = points.iter().map(|p| p.eps).collect();
    let masses: Vec<f64> = points.iter().map(|p| p.mass.mass).collect();
    let mass_ok = points.iter().all(|p| p.mass.passed);
    let target = spec.dim() as f64 / 2.0 - 0.1;
    let rows: Vec<VagueRow> = tests
        .iter()
        .enumerate()
        .map(|(k, psi)| {
            let pairings: Vec<f64> = points.iter().map(|p| p.pairings[k]).collect();
            let abs: Vec<f64> = pairings.iter().map(|v| v.abs()).collect();
            let slope = rate_fit(&e, &abs).map_or(f64::NAN, |f| f.slope);
            VagueRow {
                test: psi.to_string(),
                pairings,
                slope,
                passed: slope >= target,
            }
        })
        .collect();
    let dispersive: Vec<DispersiveReport> = points.iter().filter_map(|p| p.dispersive).collect();
    let passed = mass_ok && rows.iter().all(|r| r.passed) && dispersive.iter().all(|d| d.passed);
    Ok(VagueReport {
        t,
        eps: e,
        masses,
        rows,
        dispersive,
        mass_ok,
        passed,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrossRow {
    pub points: usize,
    pub spacing: f64,
    pub dt: f64,
    /// `||u_CN(T) - exp(i T Laplacian) u0||_{L^2}`.
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrossValidation {
    pub rows: Vec<CrossRow>,
    pub orders: Vec<f64>,
    pub min_order: f64,
}

/// Solves `d_t u = i Laplacian u` with CN on `levels` grids, halving `dx` and
/// `dt` together, and compares with the spectral solution of the same data.
pub fn cross_validate_cn(
    data: &InitialData,
    eps: f64,
    t_final: f64,
    grid: SpatialGrid,
    steps: usize,
    levels: usize,
) -> Result<CrossValidation> {
    if levels < 2 {
        return Err(Error::InvalidArgument("need at least two refinement levels".into()));
    }
    let mut rows = Vec::with_capacity(levels);
    for level in 0..levels {
        let g = grid.refined(1 << level)?;
        let n = steps << level;
        let problem = CauchyProblem::new(
            CoefficientNet::free(g.dim()),
            data.clone(),
            t_final,
            GridPolicy::Fixed(g),
            TimePolicy::Steps(n),
        );
        let r = solve(&problem, eps)?;
        let exact = free_evolve(&r.initial, t_final);
        rows.push(CrossRow {
            points: g.points(),
            spacing: g.spacing(),
            dt: r.dt,
            error: norm_l2(&r.final_state.sub(&exact)?),
        });
    }
    let h: Vec<f64> = rows.iter().map(|r| r.spacing).collect();
    let e: Vec<f64> = rows.iter().map(|r| r.error).collect();
    let orders = observed_orders(&h, &e);
    let min_order = orders.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(CrossValidation {
        rows,
        orders,
        min_order,
    })
}

/// CN against spectral evolution for the plane wave `exp(i pi k x / L)`:
/// returns the measured L2 discrepancy and the closed form
/// `|G^N - exp(-i xi^2 T)| ||u0||` with the CN amplification factor `G`.
pub fn plane_wave_discrepancy(k: i32, grid: SpatialGrid, t_final: f64, steps: usize) -> Result<(f64, f64)> {
    if grid.dim() != 1 {
        return Err(Error::InvalidArgument("plane-wave check is one-dimensional".into()));
    }
    let xi = PI * k as f64 / grid.half_width();
    let u0 = GridFunction::from_fn(grid, |p| C64::new(0.0, xi * p[0]).exp())?;
    let problem = CauchyProblem::new(
        CoefficientNet::free(1),
        InitialData::Zero,
        t_final,
        GridPolicy::Fixed(grid),
        TimePolicy::Steps(steps),
    );
    let r = solve_from(&problem, 1.0, u0.clone())?;
    let exact = free_evolve(&u0, t_final);
    let measured = norm_l2(&r.final_state.sub(&exact)?);
    let dx = grid.spacing();
    let lam = -4.0 / (dx * dx) * (0.5 * xi * dx).sin().powi(2);
    let a = 0.5 * r.dt * lam;
    let g = (C64::new(1.0, a) / C64::new(1.0, -a)).powu(steps as u32);
    let predicted = (g - C64::new(0.0, -xi * xi * t_final).exp()).norm() * norm_l2(&u0);
    Ok((measured, predicted))
}
