//! Two-dimensional Cartesian finite-volume solver for general scenes.

pub mod multigrid;
pub mod operator;

use crate::geometry::SceneConfig;
use crate::numerics::geometric_times;
use crate::radial::{check_bounds, check_monotone, ProblemKind, SolverParams, TruncationReport};
use crate::{Error, Result};
pub use multigrid::{pcg, CgStats, Multigrid, Preconditioner};
pub use operator::{assemble, build_operator, BoundaryRule, DiskMedium, FaceRule, FluxOperator, Medium, OperatorOptions, SceneMedium};
use serde::{Deserialize, Serialize};

/// Relative residual at which conjugate gradients stop.
pub const CG_TOLERANCE: f64 = 1e-13;
/// Bound slack for iterates: the linear solves are exact only to the CG
/// tolerance.
pub const ITERATIVE_SLACK: f64 = 1e-10;
const CG_MAX_ITER: usize = 5000;
const MAX_COARSE: usize = 600;

/// Uniform grid of square cells; cell `(i, j)` is centered at
/// `origin + h * (i + 1/2, j + 1/2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartesianGrid {
    pub origin: [f64; 2],
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
}

impl CartesianGrid {
    pub fn new(origin: [f64; 2], h: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(h > 0.0) || nx < 2 || ny < 2 {
            return Err(Error::InvalidArgument(format!("grid {nx} x {ny} with h = {h}")));
        }
        Ok(Self { origin, h, nx, ny })
    }

    /// Square grid centered at `center` covering at least `half_width` in each
    /// direction, with a cell count that coarsens well.
    pub fn centered(center: [f64; 2], half_width: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) || !(half_width > 0.0) {
            return Err(Error::InvalidArgument(format!("half width {half_width}, h = {h}")));
        }
        let half = (half_width / h - 1e-9).ceil() as usize;
        let n = coarsenable_count(2 * half);
        let width = n as f64 * h;
        Self::new([center[0] - 0.5 * width, center[1] - 0.5 * width], h, n, n)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn coords(&self, c: usize) -> (usize, usize) {
        (c % self.nx, c / self.nx)
    }

    pub fn center(&self, i: usize, j: usize) -> [f64; 2] {
        [self.origin[0] + (i as f64 + 0.5) * self.h, self.origin[1] + (j as f64 + 0.5) * self.h]
    }

    pub fn cell_center(&self, c: usize) -> [f64; 2] {
        let (i, j) = self.coords(c);
        self.center(i, j)
    }

    /// Lower-left cell of the bilinear stencil containing `x`, with weights.
    pub fn bilinear(&self, x: &[f64]) -> Option<(usize, usize, f64, f64)> {
        let fx = (x[0] - self.origin[0]) / self.h - 0.5;
        let fy = (x[1] - self.origin[1]) / self.h - 0.5;
        if !(fx >= 0.0 && fy >= 0.0 && fx <= (self.nx - 1) as f64 && fy <= (self.ny - 1) as f64) {
            return None;
        }
        let i = (fx.floor() as usize).min(self.nx - 2);
        let j = (fy.floor() as usize).min(self.ny - 2);
        Some((i, j, fx - i as f64, fy - j as f64))
    }

    /// Bilinear interpolation of cell values.
    pub fn interpolate(&self, values: &[f64], x: &[f64]) -> Option<f64> {
        let (i, j, wx, wy) = self.bilinear(x)?;
        let c = self.index(i, j);
        let v00 = values[c];
        let v10 = values[c + 1];
        let v01 = values[c + self.nx];
        let v11 = values[c + self.nx + 1];
        Some((1.0 - wy) * ((1.0 - wx) * v00 + wx * v10) + wy * ((1.0 - wx) * v01 + wx * v11))
    }
}

/// Smallest count `>= n` of the form `q * 2^L` with a small coarse factor `q`.
fn coarsenable_count(n: usize) -> usize {
    let n = n.max(8) + n % 2;
    let mut best = usize::MAX;
    for l in 0..20 {
        let p = 1usize << l;
        let q = n.div_ceil(p);
        if q < 4 {
            break;
        }
        if q <= 24 {
            let cand = q * p;
            if cand <= best {
                best = cand;
            }
        }
    }
    if best == usize::MAX {
        n
    } else {
        best
    }
}

/// Snapshots of a Cartesian run.
#[derive(Debug, Clone)]
pub struct FieldSeries {
    pub grid: CartesianGrid,
    pub kind: ProblemKind,
    pub scene: SceneConfig,
    pub times: Vec<f64>,
    pub active: Vec<bool>,
    snapshots: Vec<Vec<f64>>,
    step_variance: Vec<f64>,
    pub truncation: Option<TruncationReport>,
    /// Total conjugate gradient iterations over the run.
    pub cg_iterations: usize,
}

impl FieldSeries {
    pub fn snapshot(&self, k: usize) -> &[f64] {
        &self.snapshots[k]
    }

    pub fn step_variance(&self, k: usize) -> f64 {
        self.step_variance[k]
    }

    /// Bilinear interpolation of snapshot `k` at `x`.
    pub fn value_at(&self, x: &[f64], k: usize) -> Result<f64> {
        self.grid.interpolate(&self.snapshots[k], x).ok_or(Error::OutOfHull { r: x[0], t: self.times[k] })
    }
}

/// Grid for a scene: the closure of `Omega` plus two cells for the boundary
/// problem, a box of `truncation_factor` outer radii (or the explicit box) for
/// the whole-space problem.
pub fn grid_for_scene(scene: &SceneConfig, kind: ProblemKind, params: &SolverParams) -> Result<CartesianGrid> {
    if scene.dimension != 2 {
        return Err(Error::InvalidDimension(scene.dimension));
    }
    let c = [scene.outer.center[0], scene.outer.center[1]];
    let outer = scene.outer.outer_radius();
    let half = match kind {
        ProblemKind::Ibvp => params.box_half_width.unwrap_or(outer + 2.0 * params.h),
        ProblemKind::Cauchy => {
            let half = params.box_half_width.unwrap_or(params.truncation_factor * outer);
            if half < 5.0 * outer * (1.0 - 1e-12) {
                return Err(Error::Config(format!("box half-width {half} below five outer radii")));
            }
            half
        }
    };
    CartesianGrid::centered(c, half, params.h)
}

struct Stepper {
    mg: Multigrid,
    shift: f64,
    preconditioner: Preconditioner,
    iterations: usize,
}

impl Stepper {
    fn solve(&mut self, rhs: &[f64], x: &mut [f64], shift: f64) -> Result<()> {
        if shift != self.shift {
            self.mg.set_shift(shift)?;
            self.shift = shift;
        }
        let stats = pcg(&self.mg, self.preconditioner, rhs, x, CG_TOLERANCE, CG_MAX_ITER)?;
        self.iterations += stats.iterations;
        Ok(())
    }
}

fn run(scene: &SceneConfig, grid: &CartesianGrid, kind: ProblemKind, params: &SolverParams, options: OperatorOptions, preconditioner: Preconditioner) -> Result<FieldSeries> {
    params.validate()?;
    let op = build_operator(scene, grid, kind, options)?;
    let h2 = grid.h * grid.h;
    let times = geometric_times(params.t_min, params.t_max, params.ratio)?;
    let n = grid.len();
    let mut u = match kind {
        ProblemKind::Ibvp => op.active.iter().map(|&a| if a { 0.0 } else { 1.0 }).collect::<Vec<_>>(),
        ProblemKind::Cauchy => (0..n)
            .map(|c| if op.active[c] { exterior_fraction(scene, grid, c) } else { 1.0 })
            .collect(),
    };
    let boundary = op.boundary_rhs(|_| 1.0);
    let mut stepper = Stepper { mg: Multigrid::new(&op, h2, MAX_COARSE), shift: f64::NAN, preconditioner, iterations: 0 };
    let mut snapshots: Vec<Vec<f64>> = Vec::with_capacity(times.len());
    let mut step_variance = Vec::with_capacity(times.len());
    let mut variance = 0.0;
    let mut t_prev = 0.0;
    let mut rhs = vec![0.0; n];
    let mut next = u.clone();
    for &t in &times {
        let dt = (t - t_prev) / params.substeps as f64;
        for _ in 0..params.substeps {
            for c in 0..n {
                rhs[c] = if op.active[c] { h2 / dt * u[c] + boundary[c] } else { 0.0 };
            }
            next.copy_from_slice(&u);
            stepper.solve(&rhs, &mut next, 1.0 / dt)?;
            std::mem::swap(&mut u, &mut next);
            check_bounds(&u, t, ITERATIVE_SLACK)?;
            variance += dt * dt;
        }
        if kind == ProblemKind::Ibvp {
            if let Some(prev) = snapshots.last() {
                check_monotone(prev, &u, t)?;
            }
        }
        snapshots.push(u.clone());
        step_variance.push(variance);
        t_prev = t;
    }
    Ok(FieldSeries {
        grid: grid.clone(),
        kind,
        scene: scene.clone(),
        times,
        active: op.active,
        snapshots,
        step_variance,
        truncation: None,
        cg_iterations: stepper.iterations,
    })
}

/// Area fraction of a cell lying outside `Omega`, by 8x8 midpoint sampling.
fn exterior_fraction(scene: &SceneConfig, grid: &CartesianGrid, c: usize) -> f64 {
    let (i, j) = grid.coords(c);
    let x0 = grid.origin[0] + i as f64 * grid.h;
    let y0 = grid.origin[1] + j as f64 * grid.h;
    let m = 8;
    let mut count = 0;
    for a in 0..m {
        for b in 0..m {
            let p = [x0 + (a as f64 + 0.5) / m as f64 * grid.h, y0 + (b as f64 + 0.5) / m as f64 * grid.h];
            if scene.signed_distance(&p) < 0.0 {
                count += 1;
            }
        }
    }
    count as f64 / (m * m) as f64
}

/// Options of the Cartesian time-dependent solvers.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridOptions {
    pub operator: OperatorOptions,
    pub preconditioner: Preconditioner,
}

/// Boundary heating on the Cartesian grid.
pub fn solve_ibvp_2d(scene: &SceneConfig, grid: &CartesianGrid, params: &SolverParams, options: GridOptions) -> Result<FieldSeries> {
    run(scene, grid, ProblemKind::Ibvp, params, options.operator, options.preconditioner)
}

/// Whole-space diffusion on a box with the outer ring pinned to one. The run is
/// repeated on a box of twice the size and the change at probes is checked
/// for `t <= 1`.
pub fn solve_cauchy_2d(scene: &SceneConfig, grid: &CartesianGrid, params: &SolverParams, options: GridOptions) -> Result<FieldSeries> {
    let outer = scene.outer.outer_radius();
    let half = 0.5 * grid.nx.min(grid.ny) as f64 * grid.h;
    if half < 5.0 * outer * (1.0 - 1e-12) {
        return Err(Error::Config(format!("box half-width {half} below five outer radii")));
    }
    let mut sol = run(scene, grid, ProblemKind::Cauchy, params, options.operator, options.preconditioner)?;
    let c = [scene.outer.center[0], scene.outer.center[1]];
    let big = CartesianGrid::centered(c, 2.0 * half, grid.h)?;
    let doubled = run(scene, &big, ProblemKind::Cauchy, params, options.operator, options.preconditioner)?;
    let probes = vec![0.0, 0.5 * outer, outer, 2.0 * outer];
    let mut sensitivity: f64 = 0.0;
    for (k, &t) in sol.times.iter().enumerate() {
        if t > 1.0 {
            break;
        }
        for &r in &probes {
            let x = [c[0] + r, c[1]];
            sensitivity = sensitivity.max((sol.value_at(&x, k)? - doubled.value_at(&x, k)?).abs());
        }
    }
    if sensitivity > params.truncation_tolerance {
        return Err(Error::TruncationSensitivity { sensitivity, tolerance: params.truncation_tolerance });
    }
    sol.truncation = Some(TruncationReport { far_radius: half, probes, sensitivity });
    Ok(sol)
}

/// Steady solve `K v = source + boundary data` on an assembled operator.
pub fn solve_steady(op: &FluxOperator, source: &[f64], g: impl Fn([f64; 2]) -> f64) -> Result<Vec<f64>> {
    let mut mg = Multigrid::new(op, op.grid.h * op.grid.h, MAX_COARSE);
    mg.set_shift(0.0)?;
    let mut rhs = op.boundary_rhs(g);
    for c in 0..rhs.len() {
        rhs[c] = if op.active[c] { rhs[c] + source[c] } else { 0.0 };
    }
    let mut x = vec![0.0; rhs.len()];
    pcg(&mg, Preconditioner::Multigrid, &rhs, &mut x, 1e-12, CG_MAX_ITER)?;
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Ball, Conductivities, DomainSpec};

    fn disk_scene(core: Option<(f64, f64)>) -> SceneConfig {
        SceneConfig {
            dimension: 2,
            outer: DomainSpec::ball(vec![0.0, 0.0], 1.0),
            cores: core.map(|(dx, r)| vec![Ball::new(vec![dx, 0.0], r)]).unwrap_or_default(),
            sigma: Conductivities { core: 5.0, shell: 1.0, medium: 1.0 },
            surface_offset: 0.0,
        }
    }

    #[test]
    fn coarsenable_counts() {
        assert_eq!(coarsenable_count(516), 544);
        assert_eq!(coarsenable_count(260), 272);
        assert!(coarsenable_count(10) >= 10);
    }

    #[test]
    fn constant_sigma_gives_five_point_laplacian() {
        let mut scene = disk_scene(None);
        scene.sigma = Conductivities::uniform(2.0);
        let grid = CartesianGrid::centered([0.0, 0.0], 1.1, 1.0 / 16.0).unwrap();
        let op = build_operator(&scene, &grid, ProblemKind::Ibvp, OperatorOptions::default()).unwrap();
        let c = grid.index(grid.nx / 2, grid.ny / 2);
        assert_eq!(op.diag[c], 8.0);
        assert_eq!(op.east[c], 2.0);
        assert_eq!(op.north[c], 2.0);
        for c in 0..grid.len() {
            if op.active[c] {
                assert!(op.interior_row_sum(c).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn harmonic_face_value() {
        let scene = disk_scene(Some((0.0, 0.5)));
        let grid = CartesianGrid::centered([0.0, 0.0], 1.1, 1.0 / 16.0).unwrap();
        let opts = OperatorOptions { face_rule: FaceRule::Harmonic, ..Default::default() };
        let op = build_operator(&scene, &grid, ProblemKind::Ibvp, opts).unwrap();
        let mut found = false;
        for c in 0..grid.len() {
            let d = c + 1;
            if op.active[c] && op.active[d] && op.sigma[c] != op.sigma[d] {
                assert!((op.east[c] - 5.0 / 3.0).abs() < 1e-15);
                found = true;
            }
        }
        assert!(found);
    }

    #[test]
    fn gap_resolution_is_enforced() {
        let scene = disk_scene(Some((0.0, 0.9)));
        let grid = CartesianGrid::centered([0.0, 0.0], 1.1, 1.0 / 32.0).unwrap();
        assert!(matches!(
            build_operator(&scene, &grid, ProblemKind::Ibvp, OperatorOptions::default()),
            Err(Error::UnderResolved(_))
        ));
    }

    #[test]
    fn multigrid_and_jacobi_agree() {
        let scene = disk_scene(Some((0.2, 0.4)));
        let grid = CartesianGrid::centered([0.0, 0.0], 1.01, 1.0 / 64.0).unwrap();
        let op = build_operator(&scene, &grid, ProblemKind::Ibvp, OperatorOptions::default()).unwrap();
        let mut mg = Multigrid::new(&op, grid.h * grid.h, 100);
        assert!(mg.depth() > 2);
        mg.set_shift(0.0).unwrap();
        let b = op.boundary_rhs(|p| p[0]);
        let mut x1 = vec![0.0; grid.len()];
        let mut x2 = vec![0.0; grid.len()];
        let s1 = pcg(&mg, Preconditioner::Multigrid, &b, &mut x1, 1e-12, 5000).unwrap();
        let s2 = pcg(&mg, Preconditioner::Jacobi, &b, &mut x2, 1e-12, 5000).unwrap();
        assert!(s1.iterations * 4 < s2.iterations, "{} vs {}", s1.iterations, s2.iterations);
        let err = x1.iter().zip(&x2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9);
    }

    #[test]
    fn all_ones_stays_one() {
        let scene = disk_scene(Some((0.1, 0.3)));
        let grid = CartesianGrid::centered([0.0, 0.0], 1.02, 1.0 / 32.0).unwrap();
        let op = build_operator(&scene, &grid, ProblemKind::Ibvp, OperatorOptions::default()).unwrap();
        let mut mg = Multigrid::new(&op, grid.h * grid.h, 100);
        let dt = 0.01;
        mg.set_shift(1.0 / dt).unwrap();
        let boundary = op.boundary_rhs(|_| 1.0);
        let h2 = grid.h * grid.h;
        let rhs: Vec<f64> = (0..grid.len()).map(|c| if op.active[c] { h2 / dt + boundary[c] } else { 0.0 }).collect();
        let mut x = vec![1.0; grid.len()];
        pcg(&mg, Preconditioner::Multigrid, &rhs, &mut x, 1e-12, 100).unwrap();
        assert!(x.iter().all(|v| (v - 1.0).abs() < 1e-10));
    }
}
