use isotherm::analysis::{bulk_constant, SolutionField, TimeWindow};
use isotherm::barriers::{profile, BarrierParams, FlatBoundary, Side};
use isotherm::elliptic::{hat_u, radial_closed_form, HatVariant, RadialProfile};
use isotherm::geometry::{distance, Weingarten};
use isotherm::grid::{assemble, solve_steady, CartesianGrid, DiskMedium, OperatorOptions};
use isotherm::harness::fmt_num;
use isotherm::radial::{solve_radial, ProblemKind, RadialSolution, SolverParams};
use isotherm::{Ball, Conductivities, DomainSpec, SceneConfig};
use proptest::prelude::*;
use std::sync::OnceLock;

fn ball_scene(dimension: usize, rho: f64, core: Option<f64>, sigma: Conductivities) -> SceneConfig {
    SceneConfig {
        dimension,
        outer: DomainSpec::ball(vec![0.0; dimension], rho),
        cores: core.map(|a| Ball::new(vec![0.0; dimension], a)).into_iter().collect(),
        sigma,
        surface_offset: 0.0,
    }
}

fn conductivity() -> impl Strategy<Value = f64> {
    (0.1f64..10.0).prop_map(|x| (x * 1e6).round() / 1e6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parallel_surface_points_sit_at_their_depth(
        rho in 0.5f64..3.0, frac in 0.01f64..0.9, shell in any::<bool>(), dim in 2usize..=3
    ) {
        let scene = if shell {
            SceneConfig { outer: DomainSpec::shell(vec![0.0; dim], 0.4 * rho, rho), ..ball_scene(dim, rho, None, Conductivities::uniform(1.0)) }
        } else {
            ball_scene(dim, rho, None, Conductivities::uniform(1.0))
        };
        let depth = frac * scene.inradius();
        for s in scene.parallel_surface(depth).unwrap() {
            prop_assert!((scene.signed_distance(&s.point) - depth).abs() < 1e-10);
        }
    }

    #[test]
    fn weingarten_product_is_constant_on_spheres(rho in 0.5f64..3.0, frac in 0.05f64..0.9, dim in 2usize..=3) {
        let scene = ball_scene(dim, rho, None, Conductivities::uniform(1.0));
        let r = frac * rho;
        let values: Vec<f64> = (0..24)
            .map(|i| {
                let a = i as f64 * 0.5;
                let mut y = vec![rho * a.cos(), rho * a.sin()];
                if dim == 3 {
                    y = vec![rho * a.cos() * a.sin(), rho * a.sin() * a.sin(), rho * a.cos()];
                }
                match scene.weingarten_product(&y, r).unwrap() {
                    Weingarten::Finite(w) => w,
                    Weingarten::Degenerate => f64::NAN,
                }
            })
            .collect();
        let first = values[0];
        prop_assert!(values.iter().all(|&w| (w - first).abs() <= 1e-12 * first.abs().max(1.0)));
    }

    #[test]
    fn whole_space_constant_is_half_the_boundary_constant(s in conductivity(), dim in 2usize..=3) {
        let sigma = Conductivities { core: 1.0, shell: s, medium: s };
        let ratio = bulk_constant(dim, &sigma, ProblemKind::Cauchy).unwrap() / bulk_constant(dim, &sigma, ProblemKind::Ibvp).unwrap();
        prop_assert_eq!(ratio, 0.5);
    }

    #[test]
    fn profile_is_strictly_decreasing(a in -5.0f64..5.0, d in 1e-3f64..1.0) {
        prop_assert!(profile(a + d) < profile(a));
    }

    #[test]
    fn shifted_profiles_bracket_the_profile(xi in -10.0f64..10.0, eps in 0.01f64..0.24) {
        let p = BarrierParams::new(&FlatBoundary { dimension: 2 }, 1.0, 2.0, eps, 0.25).unwrap();
        prop_assert_eq!(p.shifted(Side::Plus, xi), profile(xi - 2.0 * eps));
        prop_assert_eq!(p.shifted(Side::Minus, xi), profile(xi + 2.0 * eps));
        prop_assert!(p.shifted(Side::Minus, xi) < profile(xi) && profile(xi) < p.shifted(Side::Plus, xi));
    }

    #[test]
    fn barriers_satisfy_transmission(ss in conductivity(), sm in conductivity(), eps in 0.01f64..0.24, t in 1e-4f64..1.0) {
        let p = BarrierParams::new(&FlatBoundary { dimension: 2 }, ss, sm, eps, 0.25).unwrap();
        let d = 1e-6 * t.sqrt();
        for side in [Side::Plus, Side::Minus] {
            let (inside, outside) = (p.v(side, d, t), p.v(side, -d, t));
            prop_assert!((inside - outside).abs() < 1e-5);
            // One-sided slopes from d and 2d on each side.
            let gin = (4.0 * p.v(side, d, t) - p.v(side, 2.0 * d, t) - 3.0 * p.v(side, 1e-300, t)) / (2.0 * d);
            let gout = -(4.0 * p.v(side, -d, t) - p.v(side, -2.0 * d, t) - 3.0 * p.v(side, -1e-300, t)) / (2.0 * d);
            let scale = (ss * gin).abs().max(1e-12);
            prop_assert!((ss * gin - sm * gout).abs() <= 1e-4 * scale, "{} {}", ss * gin, sm * gout);
        }
    }

    #[test]
    fn closed_forms_satisfy_transmission(
        sc in conductivity(), ss in conductivity(), rho in 0.5f64..3.0, frac in 0.1f64..0.9, dim in 2usize..=3
    ) {
        let a = frac * rho;
        let scene = ball_scene(dim, rho, Some(a), Conductivities { core: sc, shell: ss, medium: 1.0 });
        let c = radial_closed_form(&scene, ProblemKind::Ibvp).unwrap();
        let n = dim as f64;
        prop_assert!(c.value(rho).abs() < 1e-12);
        let (_, b) = c.core.unwrap();
        let inner = b - a * a / (2.0 * n * sc);
        prop_assert!((inner - c.profile.value(a)).abs() < 1e-12);
        // σ_c V'(a) = σ_s U'(a).
        prop_assert!((sc * (-a / (n * sc)) - ss * c.profile.derivative(a)).abs() < 1e-12);
    }

    #[test]
    fn hat_u_agrees_at_the_anchor(c1 in -0.2f64..0.2, ss in conductivity(), sc in conductivity(), r in 0.05f64..0.3, e in 0.0f64..0.3) {
        let p = RadialProfile::vanishing_at(3, ss, c1, 1.0);
        let d_star = Ball::new(vec![e, 0.0, 0.0], r);
        let variant = if c1 > 0.0 { HatVariant::CaseIi } else { HatVariant::CaseIii };
        prop_assume!(c1.abs() > 1e-6);
        let h = hat_u(&p, sc, &[0.0; 3], &d_star, variant).unwrap();
        prop_assert!((h.value(h.anchor_radius) - p.value(h.anchor_radius)).abs() < 1e-12);
        prop_assert!((h.derivative(0.7) - ss / sc * p.derivative(0.7)).abs() < 1e-12);
    }

    #[test]
    fn raising_boundary_data_raises_the_solution(bump in prop::collection::vec(0.0f64..1.0, 8)) {
        let disk = Ball::new(vec![0.0, 0.0], 0.4);
        let grid = CartesianGrid::centered([0.0, 0.0], 0.5, 1.0 / 32.0).unwrap();
        let op = assemble(&DiskMedium { disk: &disk, sigma: 1.0 }, &grid, OperatorOptions::default(), false).unwrap();
        let h2 = grid.h * grid.h;
        let source: Vec<f64> = op.active.iter().map(|&a| if a { h2 } else { 0.0 }).collect();
        let base = |y: [f64; 2]| y[0] * y[0] - y[1];
        let raised = |y: [f64; 2]| {
            let k = ((y[1].atan2(y[0]) + std::f64::consts::PI) / (2.0 * std::f64::consts::PI) * 8.0) as usize;
            base(y) + bump[k.min(7)]
        };
        let v0 = solve_steady(&op, &source, base).unwrap();
        let v1 = solve_steady(&op, &source, raised).unwrap();
        for c in 0..grid.len() {
            if op.active[c] {
                prop_assert!(v1[c] >= v0[c] - 1e-10);
            }
        }
    }

    #[test]
    fn printed_numbers_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(fmt_num(x).parse::<f64>().unwrap(), x);
    }
}

fn concentric_solution() -> &'static RadialSolution {
    static SOL: OnceLock<RadialSolution> = OnceLock::new();
    SOL.get_or_init(|| {
        let scene = ball_scene(2, 1.0, Some(0.4), Conductivities { core: 5.0, shell: 1.0, medium: 1.0 });
        let params = SolverParams { h: 1.0 / 256.0, t_min: 1e-3, t_max: 0.1, ratio: 1.5, ..Default::default() };
        solve_radial(&scene, ProblemKind::Ibvp, &params).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn balance_is_rotation_invariant_for_concentric_scenes(angle in 0.0f64..6.3) {
        let sol = concentric_solution();
        let window = TimeWindow { lo: 1e-2, hi: 0.1 };
        let pts = |phase: f64| -> Vec<Vec<f64>> {
            (0..6).map(|i| {
                let a = phase + i as f64 * std::f64::consts::PI / 3.0;
                vec![0.8 * a.cos(), 0.8 * a.sin()]
            }).collect()
        };
        let a = isotherm::analysis::balance_deviation(sol, &pts(0.0), 0.15, window).unwrap();
        let b = isotherm::analysis::balance_deviation(sol, &pts(angle), 0.15, window).unwrap();
        prop_assert!(a.deviation < 1e-9 && b.deviation < 1e-9);
    }

    #[test]
    fn heat_content_is_monotone_and_positive(x in -0.3f64..0.3, y in -0.3f64..0.3, r in 0.05f64..0.2) {
        let sol = concentric_solution();
        let ball = Ball::new(vec![x, y], r);
        let mut last = 0.0;
        for k in 0..sol.times().len() {
            // u increases in time for the boundary problem from zero data.
            let q = sol.heat_content(&ball, k).unwrap();
            prop_assert!(q >= last - 1e-14);
            last = q;
        }
        prop_assert!(distance(&ball.center, &[0.0, 0.0]) + r < 1.0);
    }
}
