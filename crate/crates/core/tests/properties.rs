use colombeau_core::fit::linear_fit;
use colombeau_core::free::free_evolve;
use colombeau_core::io::Manifest;
use colombeau_core::measure::sqrt_root;
use colombeau_core::regnet::classify_moderate_values;
use colombeau_core::solver::{solve_from, Operator, Profile};
use colombeau_core::{
    norm_l2, CauchyProblem, CoefficientNet, EpsGrid, FieldSpec, GridFunction, GridPolicy, InitialData, SpatialGrid,
    TimePolicy, Verdict, C64,
};
use proptest::prelude::*;

/// Smooth periodic field from a few random Fourier modes.
fn field(grid: SpatialGrid, modes: &[(i32, f64, f64)]) -> GridFunction {
    let l = grid.half_width();
    GridFunction::from_fn(grid, |p| {
        modes
            .iter()
            .map(|&(k, re, im)| {
                let phase = std::f64::consts::PI * k as f64 * p[0] / l;
                C64::new(re, im) * C64::new(0.0, phase).exp()
            })
            .sum()
    })
    .unwrap()
}

fn modes() -> impl Strategy<Value = Vec<(i32, f64, f64)>> {
    prop::collection::vec((-12i32..12, -1.0..1.0f64, -1.0..1.0f64), 1..5)
}

fn rel_diff(a: &GridFunction, b: &GridFunction) -> f64 {
    norm_l2(&a.sub(b).unwrap()) / norm_l2(b).max(1e-300)
}

fn grid() -> SpatialGrid {
    SpatialGrid::new(1, 3.0, 128).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn free_group_law(m in modes(), s in -2.0..2.0f64, t in -2.0..2.0f64) {
        let u = field(grid(), &m);
        prop_assume!(norm_l2(&u) > 1e-6);
        let two = free_evolve(&free_evolve(&u, s), t);
        let one = free_evolve(&u, s + t);
        prop_assert!(rel_diff(&two, &one) < 1e-11);
    }

    #[test]
    fn free_evolution_is_unitary_and_reversible(m in modes(), t in -5.0..5.0f64) {
        let u = field(grid(), &m);
        prop_assume!(norm_l2(&u) > 1e-6);
        let ut = free_evolve(&u, t);
        prop_assert!((norm_l2(&ut) / norm_l2(&u) - 1.0).abs() < 1e-12);
        prop_assert!(rel_diff(&free_evolve(&ut, -t), &u) < 1e-12);
    }

    #[test]
    fn operator_is_symmetric(
        c in prop::collection::vec(0.5..3.0f64, 64),
        v in prop::collection::vec(-2.0..2.0f64, 64),
        a in modes(),
        b in modes(),
    ) {
        let g = SpatialGrid::new(1, 2.0, 64).unwrap();
        let op = Operator::from_nodes(g, &[c], v.clone()).unwrap();
        let (u, w) = (field(g, &a), field(g, &b));
        let lhs = op.apply(&u).unwrap().inner(&w).unwrap();
        let rhs = u.inner(&op.apply(&w).unwrap()).unwrap();
        let scale = norm_l2(&u) * norm_l2(&w) * 1e3;
        prop_assert!((lhs - rhs).norm() <= 1e-12 * scale.max(1.0));

        // Summation by parts: <H u, u> = -sum c |D+ u|^2 + <V u, u>.
        let vu: f64 = u.values().iter().zip(&v).map(|(x, p)| p * x.norm_sqr()).sum::<f64>() * g.cell_volume();
        let huu = op.apply(&u).unwrap().inner(&u).unwrap();
        prop_assert!((huu.re + op.form(&u) - 2.0 * vu).abs() <= 1e-10 * (1.0 + op.form(&u).abs()));
        prop_assert!(huu.im.abs() <= 1e-10 * (1.0 + huu.re.abs()));
    }

    #[test]
    fn crank_nicolson_is_linear_and_unitary(
        a in modes(),
        b in modes(),
        alpha in (-2.0..2.0f64, -2.0..2.0f64),
        seed in any::<u64>(),
    ) {
        let g = SpatialGrid::new(1, 2.0, 128).unwrap();
        let coeffs = CoefficientNet {
            c: vec![FieldSpec::stationary(1.0, 2.0, Profile::Random { seed, cell: 0.1 })],
            v: FieldSpec::stationary(-1.0, 2.0, Profile::Random { seed: seed ^ 1, cell: 0.2 }),
            c0: 1.0,
        };
        let problem = CauchyProblem::new(coeffs, InitialData::Zero, 0.2, GridPolicy::Fixed(g), TimePolicy::Steps(20));
        let (u, w) = (field(g, &a), field(g, &b));
        let k = C64::new(alpha.0, alpha.1);
        let combo = u.combine(k, &w, C64::new(1.0, 0.0)).unwrap();
        prop_assume!(norm_l2(&combo) > 1e-3);
        let su = solve_from(&problem, 0.5, u).unwrap();
        let sw = solve_from(&problem, 0.5, w).unwrap();
        let sc = solve_from(&problem, 0.5, combo).unwrap();
        let expected = su.final_state.combine(k, &sw.final_state, C64::new(1.0, 0.0)).unwrap();
        prop_assert!(rel_diff(&sc.final_state, &expected) < 1e-9);
        prop_assert!(sc.max_step_drift() < 1e-10);
    }

    #[test]
    fn eps_grid_requires_strict_decrease(
        mut v in prop::collection::vec(1e-6..1.0f64, 6..12),
        swap in 0usize..5,
    ) {
        v.sort_by(|a, b| b.partial_cmp(a).unwrap());
        v.dedup();
        prop_assume!(v.len() >= 6);
        prop_assert!(EpsGrid::new(v.clone()).is_ok());
        v.swap(swap, swap + 1);
        prop_assert!(EpsGrid::new(v).is_err());
    }

    #[test]
    fn exact_power_laws_are_moderate_of_their_order(n in 0i32..6, c in 0.01..100.0f64) {
        let eps = EpsGrid::default_dyadic();
        let values: Vec<f64> = eps.values().iter().map(|e| c * e.powi(-n)).collect();
        let fit = classify_moderate_values(eps.values(), &values, 0.1);
        prop_assert_eq!(fit.verdict, Verdict::Moderate(n));
        prop_assert!((fit.slope - n as f64).abs() < 1e-9);
    }

    #[test]
    fn line_fit_recovers_lines(a in -10.0..10.0f64, b in -10.0..10.0f64, xs in prop::collection::vec(-5.0..5.0f64, 3..20)) {
        let spread = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - xs.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assume!(spread > 1e-3);
        let ys: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
        let f = linear_fit(&xs, &ys).unwrap();
        prop_assert!((f.slope - a).abs() < 1e-8 && (f.intercept - b).abs() < 1e-8);
        prop_assert!(f.residual_rms < 1e-8);
    }

    #[test]
    fn sqrt_root_squares_back(v in prop::collection::vec(1e-12..1e6f64, 16)) {
        let g = SpatialGrid::new(1, 1.0, 16).unwrap();
        let h = GridFunction::new(g, v.iter().map(|x| C64::new(*x, 0.0)).collect()).unwrap();
        let r = sqrt_root(&h).unwrap();
        for (a, b) in r.values().iter().zip(&v) {
            prop_assert!((a.re * a.re - b).abs() <= 1e-15 * b.max(1.0) * 4.0);
        }
    }

    #[test]
    fn manifest_round_trips(entries in prop::collection::vec(("[a-z][a-z0-9_.]{0,12}", "[ -~&&[^#]]{0,20}"), 0..10)) {
        let mut m = Manifest::new();
        for (k, v) in &entries {
            m.set(k.clone(), v.trim());
        }
        let back = Manifest::parse(&m.render()).unwrap();
        prop_assert_eq!(back, m);
    }
}
