//! Reference values computed independently of the library routines they check.

use std::f64::consts::PI;

use colombeau_core::free::free_evolve;
use colombeau_core::lab::{association_of_solution, Observable};
use colombeau_core::measure::{association_check, mollify_measure};
use colombeau_core::mollifier::mollify_function;
use colombeau_core::regnet::classify_negligible;
use colombeau_core::{
    norm_l2, pair, scaled_mollifier, CauchyProblem, CoefficientNet, EpsGrid, EpsNet, FieldSpec, GridFunction,
    GridPolicy, InitialData, Measure, MollifierSpec, Seminorm, SpatialGrid, TestFunction, TestFunctionSpec, TimePolicy,
    C64,
};

fn bump(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - x * x)).exp()
    }
}

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n)
        .map(|k| f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 })
        .sum();
    (f(a) + f(b) + inner) * h / 3.0
}

#[test]
fn scaled_mollifier_pairs_like_a_delta() {
    let eps = 0.05;
    let spec = MollifierSpec::standard(1).unwrap();
    let grid = SpatialGrid::new(1, 4.0, 4096).unwrap();
    let rho = scaled_mollifier(&spec, eps, grid).unwrap().field;
    let psi = TestFunction::new(TestFunctionSpec::bump(0.0, 1.0), grid).unwrap();
    let measured = pair(&rho, &psi).unwrap().re;

    let oracle = simpson(|x| eps / (PI * (eps * eps + x * x)) * bump(x), -1.0, 1.0, 200_000);
    assert!((oracle - 0.934_758_7).abs() < 1e-7, "{oracle}");
    assert!((measured - oracle).abs() < 1e-6, "{measured} vs {oracle}");
    // The heavy tail costs a first-order gap: 1 - <rho_eps, psi> ~ (eps / pi) int (1 - psi) / x^2.
    let tail = simpson(
        |x| if x == 0.0 { 1.0 } else { (1.0 - bump(x)) / (x * x) },
        0.0,
        1.0,
        20_000,
    ) + 1.0;
    let gap = 1.0 - measured;
    assert!(
        (gap - 2.0 * eps * tail / PI).abs() < 0.1 * gap,
        "{gap} vs {}",
        2.0 * eps * tail / PI
    );
}

#[test]
fn delta_family_gap_is_first_order() {
    let eps = EpsGrid::dyadic(2, 7).unwrap();
    let spec = MollifierSpec::standard(1).unwrap();
    let grid = SpatialGrid::new(1, 8.0, 16384).unwrap();
    let mu = Measure::dirac(1, [0.0, 0.0]).unwrap();
    let fields = eps
        .values()
        .iter()
        .map(|&e| mollify_measure(&mu, &spec, e, grid))
        .collect::<Result<Vec<_>, _>>()
        .unwrap();
    let net = EpsNet::fields(eps, fields, "rho_eps").unwrap();
    let psi = TestFunction::new(TestFunctionSpec::bump(0.0, 1.0), grid).unwrap();
    let report = association_check(&net, &mu, &[psi], 1e-1).unwrap();
    let row = &report.rows[0];
    assert!(row.passed, "{row:?}");
    assert!(row.slope >= 0.9, "slope {}", row.slope);
}

/// `|| g * rho_eps - g * sigma_eps ||_{L^2}` for the two Cauchy-type kernels,
/// whose transforms are `e^{-|k|}` and `(1 + |k|) e^{-|k|}`, so the
/// difference multiplier is `eps |k| e^{-eps |k|}`.
fn mollification_gap(eps: f64) -> f64 {
    let g_hat = |k: f64| 2.0 * simpson(|x| bump(x) * (k * x).cos(), 0.0, 1.0, 2000);
    let integrand = |k: f64| {
        let m = eps * k * (-eps * k).exp();
        (g_hat(k) * m).powi(2)
    };
    (2.0 * simpson(integrand, 0.0, 60.0 / eps.max(0.5), 6000) / (2.0 * PI)).sqrt()
}

#[test]
fn two_mollifications_differ_at_first_order() {
    let eps = EpsGrid::dyadic(3, 8).unwrap();
    let grid = SpatialGrid::new(1, 32.0, 1024).unwrap();
    let g = |p: [f64; 2]| C64::new(bump(p[0]), 0.0);
    let a = MollifierSpec::standard(1).unwrap();
    let b = MollifierSpec::cauchy_power(1, 4).unwrap();
    let diffs: Vec<GridFunction> = eps
        .values()
        .iter()
        .map(|&e| {
            let u = mollify_function(&g, &a, e, grid).unwrap();
            let w = mollify_function(&g, &b, e, grid).unwrap();
            u.sub(&w).unwrap()
        })
        .collect();
    for (d, &e) in diffs.iter().zip(eps.values()) {
        let (measured, oracle) = (norm_l2(d), mollification_gap(e));
        assert!(
            (measured - oracle).abs() < 0.05 * oracle,
            "eps {e}: {measured} vs {oracle}"
        );
    }
    let net = EpsNet::fields(eps, diffs, "difference").unwrap();
    let fit = classify_negligible(&net, Seminorm::L2, 1).unwrap();
    assert!(fit.slope <= -0.9, "{fit:?}");
}

#[test]
fn dirac_solution_pairings_approach_free_kernel() {
    let t = 0.1;
    let coeffs = CoefficientNet {
        c: vec![FieldSpec::constant(1.0)],
        v: FieldSpec::constant(0.0),
        c0: 1.0,
    };
    let data = InitialData::Mollified {
        measure: Measure::dirac(1, [0.0, 0.0]).unwrap(),
        mollifier: MollifierSpec::standard(1).unwrap(),
    };
    let policy = GridPolicy::PerEps {
        dim: 1,
        half_width: 8.0,
        per_eps: 8.0,
    };
    let problem = CauchyProblem::new(coeffs, data, t, policy, TimePolicy::Steps(400)).with_snapshots(vec![t]);
    let spec = TestFunctionSpec::bump(0.0, 1.0);
    let eps = EpsGrid::dyadic(2, 7).unwrap();
    let assoc = association_of_solution(&problem, std::slice::from_ref(&spec), &eps, Observable::Field).unwrap();
    let series = &assoc.series[0];
    let limit = series.limit.unwrap_or_else(|| panic!("no limit: {series:?}"));

    // <K_t, psi> = (e^{it Laplacian} psi)(0) for the even kernel.
    let fine = SpatialGrid::new(1, 8.0, 4096).unwrap();
    let psi = GridFunction::from_real_fn(fine, |p| spec.eval(p)).unwrap();
    let oracle = free_evolve(&psi, t).values()[2048];
    assert!((limit - oracle).norm() < 1e-2 * oracle.norm(), "{limit} vs {oracle}");
}
