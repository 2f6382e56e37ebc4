use isotherm::elliptic::{
    auxiliary_by_time_integration, hopf_case_analysis, radial_closed_form, relative_linf, solve_auxiliary_grid,
    solve_auxiliary_radial, HopfCase, HopfParams, HopfVerdict,
};
use isotherm::grid::grid_for_scene;
use isotherm::radial::{solve_radial, ProblemKind, SolverParams};
use isotherm::{Ball, Conductivities, DomainSpec, SceneConfig};

fn disk_with_core() -> SceneConfig {
    SceneConfig {
        dimension: 2,
        outer: DomainSpec::ball(vec![0.0, 0.0], 1.0),
        cores: vec![Ball::new(vec![0.0, 0.0], 0.5)],
        sigma: Conductivities { core: 2.0, shell: 1.0, medium: 1.0 },
        surface_offset: 0.0,
    }
}

#[test]
fn radial_elliptic_matches_closed_form() {
    let scene = disk_with_core();
    let params = SolverParams { h: 1.0 / 256.0, ..Default::default() };
    let aux = solve_auxiliary_radial(&scene, ProblemKind::Ibvp, &params).unwrap();
    let exact = radial_closed_form(&scene, ProblemKind::Ibvp).unwrap();
    let u = aux.value_at_radius(0.5).unwrap();
    let v = aux.value_at_radius(0.0).unwrap();
    assert!((u - 0.1875).abs() < 2e-3 && (v - 0.21875).abs() < 2e-3);
    assert!((u - exact.value(0.5)).abs() < 1e-4);
}

#[test]
fn time_integral_matches_direct_solve_radially() {
    let scene = disk_with_core();
    let params = SolverParams { h: 1.0 / 128.0, t_min: 1e-5, t_max: 4.0, ratio: 1.1, substeps: 8, ..Default::default() };
    let sol = solve_radial(&scene, ProblemKind::Ibvp, &params).unwrap();
    let timed = auxiliary_by_time_integration(&sol).unwrap();
    let direct = solve_auxiliary_radial(&scene, ProblemKind::Ibvp, &params).unwrap();
    assert!(relative_linf(&timed, &direct).unwrap() <= 1e-2);
    assert!((timed.value_at_radius(0.0).unwrap() - 0.21875).abs() <= 5e-3);
}

#[test]
fn grid_auxiliary_is_interface_consistent() {
    let scene = disk_with_core();
    let params = SolverParams { h: 1.0 / 64.0, ..Default::default() };
    let grid = grid_for_scene(&scene, ProblemKind::Ibvp, &params).unwrap();
    let direct = solve_auxiliary_grid(&scene, &grid).unwrap();
    assert!((direct.value_at(&[0.0, 0.0]).unwrap() - 0.21875).abs() <= 2e-3);
    assert!((direct.value_at(&[0.5, 0.0]).unwrap() - 0.1875).abs() <= 2e-3);
    let r = direct.residuals;
    assert!(r.consistent(grid.h, 10.0), "{r:?}");
}

#[test]
fn whole_space_time_integral_reaches_w_at_two() {
    let scene = SceneConfig {
        dimension: 3,
        outer: DomainSpec::ball(vec![0.0; 3], 1.0),
        cores: vec![],
        sigma: Conductivities::uniform(1.0),
        surface_offset: 0.0,
    };
    let params = SolverParams { h: 1.0 / 64.0, t_min: 1e-4, t_max: 100.0, ratio: 1.2, substeps: 8, ..Default::default() };
    let sol = solve_radial(&scene, ProblemKind::Cauchy, &params).unwrap();
    let w = auxiliary_by_time_integration(&sol).unwrap();
    assert!((w.value_at_radius(2.0).unwrap() - 1.0 / 6.0).abs() <= 0.02 / 6.0);
    let direct = solve_auxiliary_radial(&scene, ProblemKind::Cauchy, &params).unwrap();
    assert!((direct.value_at_radius(2.0).unwrap() - 1.0 / 6.0).abs() <= 1e-3);
}

#[test]
fn hopf_cases_reach_their_verdicts() {
    let cases = [
        HopfParams {
            case: HopfCase::I,
            dimension: 2,
            sigma_s: 1.0,
            sigma_c: 2.0,
            domain: DomainSpec::ball(vec![0.0, 0.0], 1.0),
            c1: None,
            d_star: Ball::new(vec![0.0, 0.0], 0.5),
            h: 1.0 / 256.0,
        },
        HopfParams {
            case: HopfCase::Ii,
            dimension: 3,
            sigma_s: 1.0,
            sigma_c: 2.0,
            domain: DomainSpec::ball(vec![0.0; 3], 1.0),
            c1: Some(0.1),
            d_star: Ball::new(vec![0.0; 3], 0.5),
            h: 1.0 / 256.0,
        },
        HopfParams {
            case: HopfCase::Iii,
            dimension: 3,
            sigma_s: 1.0,
            sigma_c: 2.0,
            domain: DomainSpec::ball(vec![0.0; 3], 1.0),
            c1: Some(-0.1),
            d_star: Ball::new(vec![0.0; 3], 0.5),
            h: 1.0 / 256.0,
        },
        HopfParams {
            case: HopfCase::Shell,
            dimension: 2,
            sigma_s: 1.0,
            sigma_c: 2.0,
            domain: DomainSpec::shell(vec![0.0, 0.0], 1.0, 2.0),
            c1: None,
            d_star: Ball::new(vec![1.5, 0.0], 0.3),
            h: 1.0 / 256.0,
        },
    ];
    for p in &cases {
        let r = hopf_case_analysis(p).unwrap();
        match r.case {
            HopfCase::I => {
                assert_eq!(r.verdict, HopfVerdict::Consistent, "{r:?}");
                assert!(r.residual() <= r.tolerance);
            }
            _ => {
                assert_eq!(r.verdict, HopfVerdict::Contradiction, "{r:?}");
                assert!(r.strict && r.gap.abs() >= 10.0 * r.tolerance);
            }
        }
    }
}
