//! Experiment runners. Each returns tables and checks; nothing touches disk here.

use std::sync::Arc;

use colombeau_core::fit::rate_fit;
use colombeau_core::free::{
    plane_wave_discrepancy, sqrt_delta, FreeSweep, ProbabilityDensitySnapshot, MASS_TOLERANCE, WRAP_LIMIT,
};
use colombeau_core::io::{read_net, write_net, Manifest};
use colombeau_core::lab::{association_of_solution, coherence_experiment, CoherenceSetup, Observable, CONTRACTION};
use colombeau_core::measure::{association_check, lower_bound_check, mollify_measure, sqrt_root};
use colombeau_core::regnet::classify_moderate_values;
use colombeau_core::solver::{uniqueness_probe, SpaceFn, PROBE_SLACK};
use colombeau_core::{
    free::free_evolve, solve, CauchyProblem, CoefficientNet, EpsGrid, EpsNet, FieldSpec, GridFunction, GridPolicy,
    InitialData, MollifierSpec, Result, SpatialGrid, TestFunction, TimePolicy, Verdict, C64,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{
    AssociationSpec, CoherenceSpec, ExperimentSpec, FreeSpec, ObservableKind, SqrtMeasureSpec, SweepSpec,
};
use crate::results::{Check, Outcome, Table};
use crate::row;

/// Final states `(eps, u_eps(T))`, written as binary snapshots.
pub type Snapshots = Vec<(f64, GridFunction)>;

pub fn run(spec: &ExperimentSpec, seed: u64) -> Result<(Outcome, Snapshots)> {
    match spec {
        ExperimentSpec::SqrtMeasure(s) => sqrt_measure(s).map(|o| (o, Vec::new())),
        ExperimentSpec::SchrodingerSweep(s) => schrodinger_sweep(s, seed),
        ExperimentSpec::FreeExample(s) => free_example(s).map(|o| (o, Vec::new())),
        ExperimentSpec::Coherence(s) => coherence(s).map(|o| (o, Vec::new())),
        ExperimentSpec::Association(s) => association(s, seed).map(|o| (o, Vec::new())),
        ExperimentSpec::Selftest => selftest().map(|o| (o, Vec::new())),
    }
}

fn slope_of(eps: &[f64], values: &[f64]) -> f64 {
    rate_fit(eps, values).map_or(f64::NAN, |f| f.slope)
}

fn sqrt_measure(s: &SqrtMeasureSpec) -> Result<Outcome> {
    let per_eps = s
        .eps
        .values()
        .par_iter()
        .map(|&e| {
            let h = mollify_measure(&s.measure, &s.mollifier, e, s.grid)?;
            let bound = lower_bound_check(&h, &s.measure, &s.mollifier, e, s.k_radius)?;
            let square = sqrt_root(&h)?.map(|v| v * v)?;
            Ok((bound, square))
        })
        .collect::<Result<Vec<_>>>()?;
    let (bounds, squares): (Vec<_>, Vec<_>) = per_eps.into_iter().unzip();
    let mut out = Outcome::default();

    let mut lb = Table::new(
        "lower_bound.csv",
        &[
            "eps",
            "measured_inf",
            "nominal_bound",
            "sharp_bound",
            "precondition_ok",
            "nominal_holds",
            "sharp_holds",
        ],
    );
    for b in &bounds {
        lb.push(row![
            b.eps,
            b.measured_inf,
            b.nominal_bound,
            b.sharp_bound,
            b.precondition_ok,
            b.nominal_holds,
            b.sharp_holds
        ]);
    }
    out.tables.push(lb);
    let infs: Vec<f64> = bounds.iter().map(|b| b.measured_inf).collect();
    let expected = s.mollifier.tail_exponent() - s.mollifier.dim() as f64;
    let slope = slope_of(s.eps.values(), &infs);
    out.checks.push(Check::at_most(
        "lower_bound_exponent_error",
        (slope - expected).abs(),
        0.15,
        format!("slope {slope:.4} of inf_K h_eps, expected {expected}"),
    ));
    let violations = bounds
        .iter()
        .filter(|b| !b.sharp_holds || (b.precondition_ok && !b.nominal_holds))
        .count();
    out.checks.push(Check::at_most(
        "lower_bound_violations",
        violations as f64,
        0.0,
        "eps values where a claimed lower bound fails",
    ));

    let tests = s
        .tests
        .iter()
        .map(|t| TestFunction::new(t.clone(), s.grid))
        .collect::<Result<Vec<_>>>()?;
    let net = EpsNet::fields(s.eps.clone(), squares, "phi^2")?;
    let report = association_check(&net, &s.measure, &tests, s.tolerance)?;
    let mut assoc = Table::new("association.csv", &["test", "eps", "gap"]);
    for r in &report.rows {
        for (e, g) in report.eps.iter().zip(&r.gaps) {
            assoc.push(row![r.test, e, g]);
        }
        out.checks.push(Check::new(
            format!("association {}", r.test),
            *r.gaps.last().expect("non-empty"),
            s.tolerance,
            r.passed,
            format!("monotone={} slope={:.3}", r.monotone, r.slope),
        ));
    }
    out.tables.push(assoc);
    Ok(out)
}

/// Smooth perturbation direction drawn from the run seed.
fn probe_direction(seed: u64) -> SpaceFn {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let center: f64 = rng.gen_range(-0.5..0.5);
    let k: f64 = rng.gen_range(1.0..4.0);
    let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    Arc::new(move |p| {
        let d2 = (p[0] - center).powi(2) + p[1] * p[1];
        C64::new(0.0, phase + k * p[0]).exp() * (-d2).exp()
    })
}

fn schrodinger_sweep(s: &SweepSpec, seed: u64) -> Result<(Outcome, Snapshots)> {
    let problem = s.problem.build(seed);
    let eps = s.eps.values();
    let mut out = Outcome::default();

    let log = problem
        .coeffs
        .check_log_type(eps, |e| problem.grid.grid_for(e).expect("grid policy validated"))?;
    out.checks.push(Check::new(
        "coefficients_log_type",
        log.relative_residual,
        0.2,
        log.passed,
        format!("sup|d_t c| ~ {:.3} + {:.3} log(1/eps)", log.a, log.b),
    ));

    let results = eps
        .par_iter()
        .map(|&e| solve(&problem, e))
        .collect::<Result<Vec<_>>>()?;
    let mut norms = Table::new("norms.csv", &["eps", "t", "l2", "h1", "h2"]);
    let mut solves = Table::new(
        "solves.csv",
        &[
            "eps",
            "points",
            "steps",
            "dt",
            "sup_h1",
            "max_step_drift",
            "iterations",
            "max_iterations",
            "max_residual",
        ],
    );
    for r in &results {
        for n in &r.norm_history {
            norms.push(row![r.eps, n.t, n.l2, n.h1, n.h2]);
        }
        solves.push(row![
            r.eps,
            r.grid.points(),
            r.steps,
            r.dt,
            r.sup_h1(),
            r.max_step_drift(),
            r.stats.total_iterations,
            r.stats.max_iterations,
            r.stats.max_residual
        ]);
    }
    out.tables.push(norms);
    out.tables.push(solves);

    let drift = results.iter().map(|r| r.max_step_drift()).fold(0.0, f64::max);
    out.checks.push(Check::at_most(
        "unitarity_drift",
        drift,
        s.drift_limit,
        "max per-step relative L2 change",
    ));
    let sup: Vec<f64> = results.iter().map(|r| r.sup_h1()).collect();
    let fit = classify_moderate_values(eps, &sup, s.residual_threshold);
    out.checks.push(Check::new(
        "sup_h1_moderate",
        fit.residual_rms,
        s.residual_threshold,
        matches!(fit.verdict, Verdict::Moderate(_)),
        format!("verdict {} slope {:.4}", fit.verdict, fit.slope),
    ));

    if let Some(q) = s.probe_q {
        let report = uniqueness_probe(&problem, &s.probe_eps, q, probe_direction(seed))?;
        let mut t = Table::new("probe.csv", &["eps", "difference", "growth"]);
        for r in &report.rows {
            t.push(row![r.eps, r.difference, r.growth]);
        }
        out.tables.push(t);
        out.checks.push(Check::new(
            "uniqueness_probe",
            report.slope,
            q - report.growth_order - PROBE_SLACK,
            report.passed,
            format!(
                "q={q} growth order {:.3} residual {:.3}",
                report.growth_order, report.residual_rms
            ),
        ));
    }

    let snapshots = if s.write_snapshots {
        results.iter().map(|r| (r.eps, r.final_state.clone())).collect()
    } else {
        Vec::new()
    };
    Ok((out, snapshots))
}

fn free_example(s: &FreeSpec) -> Result<Outcome> {
    let sweep = FreeSweep {
        mollifier: s.mollifier.clone(),
        eps: s.eps.clone(),
        times: s.times.clone(),
        tests: s.tests.clone(),
        wrap_free: true,
    };
    let points = sweep.run()?;
    let mut out = Outcome::default();
    let mut runs = Table::new(
        "free.csv",
        &[
            "eps",
            "t",
            "points",
            "half_width",
            "mass",
            "sup_norm",
            "bound",
            "ratio",
            "wrap_fraction",
        ],
    );
    let mut pairings = Table::new("pairings.csv", &["eps", "t", "test", "pairing"]);
    for p in &points {
        let (sup, bound, ratio, wrap) = p.dispersive.map_or((f64::NAN, f64::NAN, f64::NAN, 0.0), |d| {
            (d.sup_norm, d.bound, d.ratio, d.wrap_fraction)
        });
        runs.push(row![
            p.eps,
            p.t,
            p.points,
            p.half_width,
            p.mass.mass,
            sup,
            bound,
            ratio,
            wrap
        ]);
        for (psi, v) in s.tests.iter().zip(&p.pairings) {
            pairings.push(row![p.eps, p.t, psi, v]);
        }
    }
    let mass_dev = points.iter().map(|p| p.mass.deviation).fold(0.0, f64::max);
    out.checks.push(Check::at_most(
        "mass",
        mass_dev,
        MASS_TOLERANCE,
        "max |<mu_eps^t, 1> - 1|",
    ));

    let n = s.mollifier.dim() as f64;
    let eps = s.eps.values();
    let sqrt_l1: Vec<f64> = eps.iter().filter_map(|&e| s.mollifier.sqrt_l1_eps(e)).collect();
    let sqrt_l1_slope = if sqrt_l1.len() == eps.len() {
        slope_of(eps, &sqrt_l1)
    } else {
        f64::NAN
    };
    let floor = n / 2.0 - 0.1;
    let mut slopes = Table::new("slopes.csv", &["t", "test", "slope", "rate_floor", "sqrt_l1_slope"]);
    for &t in s.times.iter().filter(|t| **t != 0.0) {
        let at_t: Vec<_> = points.iter().filter(|p| p.t == t).collect();
        for (k, psi) in s.tests.iter().enumerate() {
            let abs: Vec<f64> = at_t.iter().map(|p| p.pairings[k].abs()).collect();
            let slope = slope_of(eps, &abs);
            slopes.push(row![t, psi, slope, floor, sqrt_l1_slope]);
            out.checks.push(Check::at_least(
                format!("decay t={t} {psi}"),
                slope,
                floor,
                "pairing slope in eps",
            ));
        }
        let worst = at_t
            .iter()
            .filter_map(|p| p.dispersive)
            .fold((0.0f64, 0.0f64), |(r, w), d| (r.max(d.ratio), w.max(d.wrap_fraction)));
        out.checks.push(Check::at_most(
            format!("dispersive t={t}"),
            worst.0,
            1.0,
            "max sup|u_eps(t)| / (||sqrt(rho_eps)||_1 / (4 pi |t|)^(n/2))",
        ));
        out.checks.push(Check::at_most(
            format!("wrap t={t}"),
            worst.1,
            WRAP_LIMIT,
            "outgoing mass beyond the box",
        ));
    }
    out.tables.extend([runs, pairings, slopes]);
    Ok(out)
}

fn coherence(s: &CoherenceSpec) -> Result<Outcome> {
    let w = s.width;
    let setup = CoherenceSetup {
        coeffs: s.coeffs.build(0),
        data_name: format!("exp(-x^2/{w}^2)"),
        g0: Arc::new(move |p| C64::new((-p[0] * p[0] / (w * w)).exp(), 0.0)),
        forcing: None,
        mollifier: s.mollifier.clone(),
        eps: s.eps.clone(),
        t_final: s.t_final,
        grid: s.grid,
        steps: s.steps,
        samples: s.samples,
        tolerance: s.tolerance,
        kappa: s.kappa,
    };
    let r = coherence_experiment(&setup)?;
    let mut out = Outcome::default();
    let mut summary = Table::new("coherence.csv", &["eps", "difference", "data_difference", "ratio"]);
    let mut history = Table::new("history.csv", &["eps", "t", "h1_difference"]);
    for row in &r.rows {
        summary.push(row![row.eps, row.difference, row.data_difference, row.ratio]);
        for (t, d) in &row.history {
            history.push(row![row.eps, t, d]);
        }
    }
    out.tables.extend([summary, history]);
    out.checks.push(Check::at_most(
        "reference_gap",
        r.reference_gap,
        s.tolerance / 10.0,
        "sup-t H1 gap between reference and its 2x refinement",
    ));
    out.checks.push(Check::at_least(
        "coherence_slope",
        r.slope,
        s.min_slope,
        "sup-t H1 difference slope in eps",
    ));
    out.checks.push(Check::new(
        "coherence_final",
        r.final_difference,
        s.tolerance,
        r.final_difference < s.tolerance && r.monotone,
        format!("monotone={}", r.monotone),
    ));
    Ok(out)
}

fn association(s: &AssociationSpec, seed: u64) -> Result<Outcome> {
    let problem = s.problem.build(seed);
    let observable = match s.observable {
        ObservableKind::Field => Observable::Field,
        ObservableKind::Density => Observable::Density,
    };
    let a = association_of_solution(&problem, &s.tests, &s.eps, observable)?;
    let mut out = Outcome::default();
    let mut values = Table::new("association.csv", &["test", "t", "eps", "re", "im"]);
    let mut limits = Table::new(
        "limits.csv",
        &["test", "t", "contraction", "associated", "limit_re", "limit_im"],
    );
    for series in &a.series {
        for (e, v) in a.eps.iter().zip(&series.values) {
            values.push(row![series.test, series.t, e, v.re, v.im]);
        }
        let lim = series.limit.unwrap_or(C64::new(f64::NAN, f64::NAN));
        limits.push(row![
            series.test,
            series.t,
            series.contraction,
            series.associated,
            lim.re,
            lim.im
        ]);
        out.checks.push(Check::new(
            format!("associated t={} {}", series.t, series.test),
            series.contraction,
            CONTRACTION,
            series.associated,
            "geometric-mean contraction of successive differences",
        ));
    }
    out.tables.extend([values, limits]);
    Ok(out)
}

/// Small closed-form examples; runs in well under a second.
fn selftest() -> Result<Outcome> {
    let mut out = Outcome::default();

    let eps = EpsGrid::default_dyadic();
    let powers: Vec<f64> = eps.values().iter().map(|e| e.powi(-3)).collect();
    let fit = classify_moderate_values(eps.values(), &powers, 0.1);
    out.checks.push(Check::new(
        "moderate eps^-3",
        fit.slope,
        3.0,
        fit.verdict == Verdict::Moderate(3),
        format!("verdict {}", fit.verdict),
    ));
    out.checks.push(Check::at_least(
        "increasing eps-grid rejected",
        EpsGrid::new(vec![0.1, 0.2]).is_err() as u8 as f64,
        1.0,
        "EpsGrid::new([0.1, 0.2]) is an error",
    ));

    let spec = MollifierSpec::standard(1)?;
    let v = spec.validate(1e6)?;
    out.checks.push(Check::at_most(
        "mollifier mass",
        (v.mass - 1.0).abs(),
        1e-6,
        "standard Cauchy kernel",
    ));

    let grid = SpatialGrid::new(1, 4.0, 256)?;
    let data = InitialData::analytic("packet", |p| {
        C64::new(0.0, 3.0 * p[0]).exp() * (-4.0 * p[0] * p[0]).exp()
    });
    let coeffs = CoefficientNet {
        c: vec![FieldSpec::stationary(
            1.0,
            0.5,
            colombeau_core::solver::Profile::Wave { wavenumber: 1.0 },
        )],
        v: FieldSpec::constant(0.3),
        c0: 0.5,
    };
    let problem = CauchyProblem::new(coeffs, data, 0.5, GridPolicy::Fixed(grid), TimePolicy::Steps(100));
    let r = solve(&problem, 0.5)?;
    out.checks.push(Check::at_most(
        "cn unitarity",
        r.max_step_drift(),
        1e-10,
        "100 steps, M = 256",
    ));

    let (measured, predicted) = plane_wave_discrepancy(3, SpatialGrid::new(1, 2.0, 64)?, 0.5, 20)?;
    out.checks.push(Check::at_most(
        "plane wave phase",
        (measured - predicted).abs(),
        1e-10,
        "CN amplification vs closed form",
    ));

    let sd = MollifierSpec::sqrt_friendly(1)?;
    let g = colombeau_core::free::free_box(&sd, 0.25, 1.0, 1.0)?;
    let u = free_evolve(&sqrt_delta(&sd, 0.25, g)?, 1.0);
    let mass = ProbabilityDensitySnapshot::new(0.25, 1.0, &u).mass;
    out.checks.push(Check::at_most(
        "free mass",
        (mass - 1.0).abs(),
        MASS_TOLERANCE,
        "eps = 1/4, t = 1",
    ));

    let dir = std::env::temp_dir().join(format!("colombeau-selftest-{}", std::process::id()));
    let fields = (0..6)
        .map(|k| {
            if k % 2 == 0 {
                r.initial.clone()
            } else {
                r.final_state.clone()
            }
        })
        .collect();
    let net = EpsNet::fields(EpsGrid::dyadic(1, 6)?, fields, "selftest")?;
    write_net(&net, &dir)?;
    let back = read_net(&dir);
    let _ = std::fs::remove_dir_all(&dir);
    let back = back?;
    let same = back
        .items()
        .iter()
        .zip(net.items())
        .all(|(a, b)| a.values() == b.values());
    out.checks.push(Check::at_least(
        "net round trip",
        same as u8 as f64,
        1.0,
        "binary snapshots are bit-exact",
    ));

    let parsed = Manifest::parse("# sample\nlabel = x\ncount = 0\n")?;
    out.checks.push(Check::at_least(
        "manifest parse",
        (parsed.get("label") == Some("x")) as u8 as f64,
        1.0,
        "key = value with comments",
    ));
    Ok(out)
}
