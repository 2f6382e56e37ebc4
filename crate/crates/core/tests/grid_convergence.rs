use isotherm::grid::{grid_for_scene, solve_cauchy_2d, solve_ibvp_2d, BoundaryRule, FaceRule, GridOptions, OperatorOptions};
use isotherm::radial::{solve_radial, ProblemKind, RadialSolution, SolverParams};
use isotherm::{Ball, Conductivities, DomainSpec, SceneConfig};

fn concentric() -> SceneConfig {
    SceneConfig {
        dimension: 2,
        outer: DomainSpec::ball(vec![0.0, 0.0], 1.0),
        cores: vec![Ball::new(vec![0.0, 0.0], 0.5)],
        sigma: Conductivities { core: 5.0, shell: 1.0, medium: 1.0 },
        surface_offset: 0.0,
    }
}

fn base() -> SolverParams {
    SolverParams { t_min: 1e-3, t_max: 0.1, ratio: 1.5, substeps: 4, ..Default::default() }
}

/// Max errors against the radial reference for `t >= 0.01`: over all cells,
/// and over cells at least 0.15 from both interfaces.
fn errors(scene: &SceneConfig, reference: &RadialSolution, n: f64, options: GridOptions) -> (f64, f64) {
    let p = SolverParams { h: 1.0 / n, ..base() };
    let g = grid_for_scene(scene, ProblemKind::Ibvp, &p).unwrap();
    let sol = solve_ibvp_2d(scene, &g, &p, options).unwrap();
    let (mut global, mut away) = (0.0f64, 0.0f64);
    for k in 0..sol.times.len() {
        if sol.times[k] < 0.01 {
            continue;
        }
        let snap = sol.snapshot(k);
        for c in 0..g.len() {
            if !sol.active[c] {
                continue;
            }
            let x = g.cell_center(c);
            let r = x[0].hypot(x[1]);
            let e = (snap[c] - reference.value_at_radius(r, k).unwrap()).abs();
            global = global.max(e);
            if r < 0.35 || (0.65..0.85).contains(&r) {
                away = away.max(e);
            }
        }
    }
    (global, away)
}

#[test]
fn default_scheme_is_second_order_against_radial_reference() {
    let s = concentric();
    let reference = solve_radial(&s, ProblemKind::Ibvp, &SolverParams { h: 1.0 / 4096.0, ..base() }).unwrap();
    let e: Vec<_> = [32.0, 64.0, 128.0].iter().map(|&n| errors(&s, &reference, n, GridOptions::default())).collect();
    for w in e.windows(2) {
        let global = (w[0].0 / w[1].0).log2();
        let away = (w[0].1 / w[1].1).log2();
        assert!(global >= 1.8 && away >= 1.8, "orders {global} {away}");
    }
}

#[test]
fn staircase_boundary_is_first_order() {
    let s = concentric();
    let reference = solve_radial(&s, ProblemKind::Ibvp, &SolverParams { h: 1.0 / 4096.0, ..base() }).unwrap();
    let opts = GridOptions {
        operator: OperatorOptions { face_rule: FaceRule::Harmonic, boundary_rule: BoundaryRule::Staircase, ..Default::default() },
        ..Default::default()
    };
    let coarse = errors(&s, &reference, 32.0, opts);
    let fine = errors(&s, &reference, 64.0, opts);
    let order = (coarse.0 / fine.0).log2();
    assert!((0.7..1.4).contains(&order), "order {order}");
    // The default scheme is much more accurate at the same resolution.
    assert!(errors(&s, &reference, 64.0, GridOptions::default()).0 * 10.0 < fine.0);
}

#[test]
fn offset_scene_is_reflection_symmetric() {
    let mut s = concentric();
    s.cores[0].center = vec![0.2, 0.0];
    let p = SolverParams { h: 1.0 / 48.0, ..base() };
    let g = grid_for_scene(&s, ProblemKind::Ibvp, &p).unwrap();
    let sol = solve_ibvp_2d(&s, &g, &p, GridOptions::default()).unwrap();
    let last = sol.snapshot(sol.times.len() - 1);
    let mut worst = 0.0f64;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let a = last[g.index(i, j)];
            let b = last[g.index(i, g.ny - 1 - j)];
            worst = worst.max((a - b).abs());
        }
    }
    assert!(worst < 1e-10, "asymmetry {worst}");
}

#[test]
fn cauchy_grid_run_matches_radial() {
    let s = SceneConfig {
        dimension: 2,
        outer: DomainSpec::ball(vec![0.0, 0.0], 1.0),
        cores: vec![],
        sigma: Conductivities::uniform(1.0),
        surface_offset: 0.0,
    };
    let params = SolverParams { h: 1.0 / 16.0, t_min: 1e-2, t_max: 0.5, ratio: 1.5, substeps: 4, truncation_factor: 6.0, ..Default::default() };
    let g = grid_for_scene(&s, ProblemKind::Cauchy, &params).unwrap();
    let sol = solve_cauchy_2d(&s, &g, &params, GridOptions::default()).unwrap();
    assert!(sol.truncation.as_ref().unwrap().sensitivity < 1e-3);
    let reference = solve_radial(&s, ProblemKind::Cauchy, &SolverParams { h: 1.0 / 1024.0, ..params.clone() }).unwrap();
    let k = sol.times.len() - 1;
    for r in [0.0, 0.5, 1.5] {
        let a = sol.value_at(&[r, 0.0], k).unwrap();
        let b = reference.value_at_radius(r, k).unwrap();
        assert!((a - b).abs() < 5e-3, "r = {r}: {a} vs {b}");
    }
}
