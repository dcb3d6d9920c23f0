//! Energy-estimate audit and the negligible-in/negligible-out probe.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fit::growth_fit;
use crate::grid::{norm_l2, GridFunction, Point, C64};
use crate::quad;
use crate::regnet::{classify_moderate_values, AsymptoticFit, EpsGrid, RESIDUAL_THRESHOLD};
use crate::spectral;

use super::cn::{CauchyProblem, Forcing, InitialData, SolveResult, Stepper};

/// One ε of the energy audit. Constants enter as `kappa` times their
/// explicit expressions, so `ratio` is meaningful only up to that factor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyRow {
    pub eps: f64,
    /// `sup_t ||u(t)||_{H^1}^2`.
    pub lhs: f64,
    /// `C2 e^{C1} (||g||_{H^1}^2 + int_0^T ||f||^2 + ||d_t f||_{H^-1}^2)`.
    pub rhs: f64,
    pub ratio: f64,
    pub c1: f64,
    pub c2: f64,
    pub data_h1_sq: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyReport {
    pub kappa: f64,
    pub rows: Vec<EnergyRow>,
    /// Growth of `lhs` against `1/eps`.
    pub lhs_fit: AsymptoticFit,
    /// Growth of `||g_eps||_{H^1}^2` against `1/eps`.
    pub data_fit: AsymptoticFit,
}

impl EnergyReport {
    pub fn max_ratio(&self) -> f64 {
        self.rows.iter().map(|r| r.ratio).fold(0.0, f64::max)
    }
}

/// Audits one completed solve.
pub fn energy_audit(result: &SolveResult, problem: &CauchyProblem, kappa: f64) -> Result<EnergyRow> {
    if !(kappa > 0.0) {
        return Err(Error::InvalidArgument(format!("kappa = {kappa} must be positive")));
    }
    let eps = result.eps;
    let grid = result.grid;
    let t_final = problem.t_final;
    let net = &problem.coeffs;
    let s = net.sample(eps, &grid)?;
    let (dc, dv) = net.dt_sups(&s);
    let v_sup = net.v.sup_abs(&s.v_profile);
    let c1 = kappa * (t_final / net.c0) * (dc + dv);
    let c2 = kappa * t_final * (net.c0 + v_sup);

    let h1 = |u: &GridFunction| spectral::sobolev_norms(u, 1)[1];
    let data_h1_sq = h1(&result.initial).powi(2);
    let forcing_term = match &problem.forcing {
        Forcing::None => 0.0,
        Forcing::Separable { space, time } => {
            let f = space.realize(eps, grid)?;
            let l2 = norm_l2(&f).powi(2);
            let hm1 = spectral::norm_h_minus1(&f).powi(2);
            let panels = (t_final * 20.0).ceil().max(4.0) as usize;
            quad::integrate(
                |t| l2 * time.value(t).powi(2) + hm1 * time.derivative(t).powi(2),
                0.0,
                t_final,
                panels,
            )
        }
    };
    let lhs = result.norm_history.iter().map(|r| r.h1 * r.h1).fold(0.0, f64::max);
    let rhs = c2 * c1.exp() * (data_h1_sq + forcing_term);
    Ok(EnergyRow {
        eps,
        lhs,
        rhs,
        ratio: if rhs > 0.0 {
            lhs / rhs
        } else if lhs == 0.0 {
            0.0
        } else {
            f64::INFINITY
        },
        c1,
        c2,
        data_h1_sq,
    })
}

/// Audits a sweep of solves of the same problem.
pub fn energy_sweep(results: &[SolveResult], problem: &CauchyProblem, kappa: f64) -> Result<EnergyReport> {
    let rows = results
        .iter()
        .map(|r| energy_audit(r, problem, kappa))
        .collect::<Result<Vec<_>>>()?;
    let eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let lhs: Vec<f64> = rows.iter().map(|r| r.lhs).collect();
    let data: Vec<f64> = rows.iter().map(|r| r.data_h1_sq).collect();
    Ok(EnergyReport {
        kappa,
        lhs_fit: classify_moderate_values(&eps, &lhs, RESIDUAL_THRESHOLD),
        data_fit: classify_moderate_values(&eps, &data, RESIDUAL_THRESHOLD),
        rows,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeRow {
    pub eps: f64,
    /// `||u - u~||_{L^2(grid x [0,T])}`.
    pub difference: f64,
    /// `sup_t ||u(t)||_{H^1} / ||g||_{H^1}` of the unperturbed solve.
    pub growth: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeReport {
    pub q: f64,
    pub rows: Vec<ProbeRow>,
    /// Decay exponent of the difference: `difference ~ eps^slope`.
    pub slope: f64,
    pub residual_rms: f64,
    /// Measured energy-growth order `N >= 0`.
    pub growth_order: f64,
    pub passed: bool,
}

/// Slack allowed between the measured slope and `q - N`.
pub const PROBE_SLACK: f64 = 0.5;

/// Solves with data `g` and `g + eps^q w` in lockstep for every ε and fits the
/// decay of the space-time L2 difference.
pub fn uniqueness_probe(
    problem: &CauchyProblem,
    eps: &EpsGrid,
    q: f64,
    w: Arc<dyn Fn(Point) -> C64 + Send + Sync>,
) -> Result<ProbeReport> {
    if !q.is_finite() || q < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "perturbation order {q} must be finite and >= 0"
        )));
    }
    let perturbed = CauchyProblem {
        data: InitialData::Perturbed {
            base: Box::new(problem.data.clone()),
            q,
            w,
        },
        snapshot_times: Vec::new(),
        ..problem.clone()
    };
    let base = CauchyProblem {
        snapshot_times: Vec::new(),
        ..problem.clone()
    };
    let rows = eps
        .values()
        .par_iter()
        .map(|&e| probe_one(&base, &perturbed, e))
        .collect::<Result<Vec<_>>>()?;
    let e: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let diff: Vec<f64> = rows.iter().map(|r| r.difference).collect();
    let growth: Vec<f64> = rows.iter().map(|r| r.growth).collect();
    let fit = growth_fit(&e, &diff);
    let (slope, residual_rms) = fit.map_or((f64::NAN, f64::NAN), |f| (-f.slope, f.residual_rms));
    let growth_order = growth_fit(&e, &growth).map_or(0.0, |f| f.slope.max(0.0));
    let passed = q >= 2.0 && slope >= q - growth_order - PROBE_SLACK && slope > PROBE_SLACK;
    Ok(ProbeReport {
        q,
        rows,
        slope,
        residual_rms,
        growth_order,
        passed,
    })
}

fn probe_one(base: &CauchyProblem, perturbed: &CauchyProblem, eps: f64) -> Result<ProbeRow> {
    let mut a = Stepper::new(base, eps)?;
    let mut b = Stepper::new(perturbed, eps)?;
    let grid = a.grid();
    let dv = grid.cell_volume();
    let diff_sq = |a: &Stepper<'_>, b: &Stepper<'_>| -> f64 {
        a.state()
            .iter()
            .zip(b.state())
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            * dv
    };
    let h1 = |s: &Stepper<'_>| spectral::sobolev_norms(&s.current(), 1)[1];
    let g_h1 = h1(&a);
    let mut sup_h1 = g_h1;
    let mut prev = diff_sq(&a, &b);
    let mut integral = 0.0;
    while !a.done() {
        a.advance()?;
        b.advance()?;
        let cur = diff_sq(&a, &b);
        integral += 0.5 * a.dt() * (prev + cur);
        prev = cur;
        sup_h1 = sup_h1.max(h1(&a));
    }
    Ok(ProbeRow {
        eps,
        difference: integral.sqrt(),
        growth: if g_h1 > 0.0 { sup_h1 / g_h1 } else { 1.0 },
    })
}
