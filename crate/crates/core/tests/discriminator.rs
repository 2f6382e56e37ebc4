use isotherm::barriers::{verify_residual_sign, BarrierParams, FlatBoundary, ResidualSampling};
use isotherm::elliptic::{concentricity_discriminator, DiscriminatorOptions, Verdict};
use isotherm::grid::{grid_for_scene, solve_ibvp_2d, FieldSeries, GridOptions};
use isotherm::radial::{ProblemKind, SolverParams};
use isotherm::{Ball, Conductivities, DomainSpec, SceneConfig};

fn offset_scene(delta: f64) -> SceneConfig {
    SceneConfig {
        dimension: 2,
        outer: DomainSpec::ball(vec![0.0, 0.0], 1.0),
        cores: vec![Ball::new(vec![delta, 0.0], 0.4)],
        sigma: Conductivities { core: 5.0, shell: 1.0, medium: 1.0 },
        surface_offset: 0.2,
    }
}

fn run(scene: &SceneConfig, h: f64) -> FieldSeries {
    let params = SolverParams { h, t_min: 1e-3, t_max: 1.0, ratio: 1.1, substeps: 2, ..Default::default() };
    let grid = grid_for_scene(scene, ProblemKind::Ibvp, &params).unwrap();
    solve_ibvp_2d(scene, &grid, &params, GridOptions::default()).unwrap()
}

#[test]
fn tiny_offset_at_coarse_resolution_asks_for_refinement() {
    let scene = offset_scene(0.01);
    let (coarse, fine) = (run(&scene, 1.0 / 64.0), run(&scene, 1.0 / 128.0));
    let report = concentricity_discriminator(&scene, &[&coarse, &fine], &DiscriminatorOptions::default()).unwrap();
    assert_eq!(report.verdict, Verdict::Inconclusive, "{:?}", report.metrics);
    assert!(report.instruction.is_some());
}

#[test]
fn discriminator_needs_two_resolutions() {
    let scene = offset_scene(0.2);
    let only = run(&scene, 1.0 / 32.0);
    assert!(concentricity_discriminator(&scene, &[&only], &DiscriminatorOptions::default()).is_err());
    let other = run(&offset_scene(0.1), 1.0 / 32.0);
    assert!(concentricity_discriminator(&scene, &[&only, &other], &DiscriminatorOptions::default()).is_err());
}

#[test]
fn barrier_residual_keeps_its_sign_only_up_to_t1() {
    let flat = FlatBoundary { dimension: 2 };
    let p = BarrierParams::new(&flat, 1.0, 4.0, 0.1, 0.25).unwrap();
    let early = verify_residual_sign(&p, &flat, 1e-5, p.t1, ResidualSampling::default()).unwrap();
    assert_eq!(early.violations, 0, "{early:?}");
    let scene = SceneConfig {
        dimension: 2,
        outer: DomainSpec::ball(vec![0.0, 0.0], 1.0),
        cores: vec![],
        sigma: Conductivities { core: 1.0, shell: 1.0, medium: 4.0 },
        surface_offset: 0.0,
    };
    let p = BarrierParams::for_scene(&scene, 0.1, Some(0.25)).unwrap();
    let curved = verify_residual_sign(&p, &scene, 1e-5, p.t1, ResidualSampling::default()).unwrap();
    assert_eq!(curved.violations, 0, "{curved:?}");
    let late = verify_residual_sign(&p, &scene, 4.0 * p.t1, 64.0 * p.t1, ResidualSampling::default()).unwrap();
    assert!(late.violations > 0);
}
