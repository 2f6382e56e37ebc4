//! Finite-volume solver for radially symmetric scenes.
//!
//! Nodes carry the unknowns; control volume `i` is the annulus between the
//! midpoints of its neighbouring links. Material interfaces and boundary
//! spheres sit exactly on nodes, so every link lies in a single material and
//! flux continuity across an interface is built into the balance of the
//! interface node. Time stepping is implicit Euler with a fixed number of
//! uniform substeps inside every interval of a geometric snapshot grid.

use crate::geometry::{distance, SceneConfig};
use crate::numerics::{geometric_times, Tridiagonal};
use crate::{Conductivities, Error, Result};
use serde::{Deserialize, Serialize};

/// Slack allowed by the maximum-principle assertion.
pub const MAX_PRINCIPLE_SLACK: f64 = 1e-12;
/// Slack allowed by the monotone-in-time assertion for boundary heating.
pub const MONOTONE_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    /// Heating through the boundary: `u = 1` on the boundary, `u = 0` initially.
    Ibvp,
    /// Whole-space diffusion from the indicator of the exterior.
    Cauchy,
}

/// Discretization parameters shared by the radial and Cartesian solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    /// Spatial step (radial step in the resolved region, cell size in 2D).
    pub h: f64,
    /// First snapshot time.
    pub t_min: f64,
    /// Final time.
    #[serde(rename = "T")]
    pub t_max: f64,
    /// Ratio between consecutive snapshot times, in (1, 1.5].
    pub ratio: f64,
    /// Far radius (radial) or box half-width (2D) in units of the outer radius.
    pub truncation_factor: f64,
    /// Uniform implicit Euler steps per snapshot interval.
    pub substeps: usize,
    /// Growth factor of the radial spacing beyond twice the outer radius.
    pub stretch: f64,
    /// Explicit half-width of the Cartesian box.
    #[serde(rename = "box")]
    pub box_half_width: Option<f64>,
    /// Largest accepted change at the probes when the truncation is doubled.
    pub truncation_tolerance: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            h: 1.0 / 256.0,
            t_min: 1e-5,
            t_max: 10.0,
            ratio: 1.2,
            truncation_factor: 100.0,
            substeps: 1,
            stretch: 1.03,
            box_half_width: None,
            truncation_tolerance: 1e-3,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::Config(format!("h = {} must be positive", self.h)));
        }
        if self.substeps == 0 {
            return Err(Error::Config("substeps must be at least 1".into()));
        }
        if !(self.stretch >= 1.0 && self.stretch <= 1.2) {
            return Err(Error::Config(format!("stretch {} outside [1, 1.2]", self.stretch)));
        }
        if !(self.truncation_tolerance > 0.0) {
            return Err(Error::Config("truncation tolerance must be positive".into()));
        }
        geometric_times(self.t_min, self.t_max, self.ratio).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    pub dimension: usize,
    pub nodes: Vec<f64>,
    /// Node indices of material interfaces and boundary spheres.
    pub interfaces: Vec<usize>,
    pub times: Vec<f64>,
    pub substeps: usize,
    /// Spacing growth used when the grid is extended outwards.
    pub stretch: f64,
}

impl RadialGrid {
    pub fn new(dimension: usize, nodes: Vec<f64>, interfaces: Vec<usize>, times: Vec<f64>, substeps: usize) -> Result<Self> {
        if dimension < 1 {
            return Err(Error::InvalidDimension(dimension));
        }
        if nodes.len() < 3 || nodes.windows(2).any(|w| !(w[1] > w[0])) || nodes[0] < 0.0 {
            return Err(Error::InvalidArgument("radial nodes must be increasing and non-negative".into()));
        }
        if times.is_empty() || times[0] <= 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("snapshot times must be positive and increasing".into()));
        }
        if times.windows(2).any(|w| w[1] / w[0] > 1.5 * (1.0 + 1e-12)) {
            return Err(Error::InvalidArgument("snapshot ratio exceeds 1.5".into()));
        }
        if interfaces.iter().any(|&i| i >= nodes.len()) || substeps == 0 {
            return Err(Error::InvalidArgument("bad interface index or substep count".into()));
        }
        Ok(Self { dimension, nodes, interfaces, times, substeps, stretch: 1.03 })
    }

    /// Grid adapted to a concentric scene.
    ///
    /// Uniform spacing `h` covers `Omega` (and, for the whole-space problem,
    /// the region up to twice the outer radius); beyond that the spacing grows
    /// geometrically up to `truncation_factor` times the outer radius.
    pub fn for_scene(scene: &SceneConfig, kind: ProblemKind, params: &SolverParams) -> Result<Self> {
        scene.validate()?;
        params.validate()?;
        if !scene.is_concentric() {
            return Err(Error::NotConcentric);
        }
        let radii = &scene.outer.radii;
        let outer = scene.outer.outer_radius();
        let mut breaks: Vec<f64> = Vec::new();
        match (kind, scene.outer.inner_radius()) {
            (ProblemKind::Ibvp, Some(inner)) => breaks.extend([inner, radii[1]]),
            (ProblemKind::Ibvp, None) => breaks.push(0.0),
            (ProblemKind::Cauchy, _) => breaks.push(0.0),
        }
        if let Some(a) = scene.core_radius() {
            breaks.push(a);
        }
        if kind == ProblemKind::Cauchy {
            if let Some(inner) = scene.outer.inner_radius() {
                breaks.push(inner);
            }
            if params.truncation_factor < 5.0 {
                return Err(Error::Config(format!(
                    "truncation factor {} below the minimum of 5",
                    params.truncation_factor
                )));
            }
            breaks.push(outer);
            breaks.push(2.0 * outer);
        } else {
            breaks.push(outer);
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let (mut nodes, mut interfaces) = piecewise_uniform(&breaks, params.h)?;
        if kind == ProblemKind::Cauchy {
            interfaces.pop();
            let end = params.truncation_factor * outer;
            extend_stretched(&mut nodes, end, params.stretch);
        }
        let times = geometric_times(params.t_min, params.t_max, params.ratio)?;
        let mut grid = Self::new(scene.dimension, nodes, interfaces, times, params.substeps)?;
        grid.stretch = params.stretch;
        Ok(grid)
    }

    pub fn far_radius(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// Copy of the grid continued with stretched spacing up to `end`.
    pub fn extended(&self, end: f64) -> Self {
        let mut nodes = self.nodes.clone();
        extend_stretched(&mut nodes, end, self.stretch);
        Self { nodes, ..self.clone() }
    }

    /// Control-volume measures without the angular factor.
    pub fn volumes(&self) -> Vec<f64> {
        let n = self.dimension as i32;
        let m = self.nodes.len();
        (0..m)
            .map(|i| {
                let lo = if i == 0 { self.nodes[0] } else { 0.5 * (self.nodes[i - 1] + self.nodes[i]) };
                let hi = if i + 1 == m { self.nodes[i] } else { 0.5 * (self.nodes[i] + self.nodes[i + 1]) };
                (hi.powi(n) - lo.powi(n)) / n as f64
            })
            .collect()
    }

    /// Index `i` with `nodes[i] <= r <= nodes[i + 1]`.
    pub fn locate(&self, r: f64) -> Option<usize> {
        if !(r >= self.nodes[0]) || r > self.far_radius() {
            return None;
        }
        let i = self.nodes.partition_point(|&x| x <= r);
        Some(i.saturating_sub(1).min(self.nodes.len() - 2))
    }

    /// Smallest spacing at or next to radius `r`.
    pub fn spacing_at(&self, r: f64) -> f64 {
        let i = self.locate(r).unwrap_or(self.nodes.len() - 2);
        self.nodes[i + 1] - self.nodes[i]
    }
}

fn piecewise_uniform(breaks: &[f64], h: f64) -> Result<(Vec<f64>, Vec<usize>)> {
    let mut nodes = vec![breaks[0]];
    let mut interfaces = Vec::new();
    for w in breaks.windows(2) {
        let len = w[1] - w[0];
        let n = (len / h - 1e-9).ceil().max(1.0) as usize;
        if n < 4 {
            return Err(Error::UnderResolved(format!(
                "segment [{}, {}] gets only {n} cells at h = {h}",
                w[0], w[1]
            )));
        }
        for j in 1..=n {
            nodes.push(if j == n { w[1] } else { w[0] + len * j as f64 / n as f64 });
        }
        interfaces.push(nodes.len() - 1);
    }
    Ok((nodes, interfaces))
}

fn extend_stretched(nodes: &mut Vec<f64>, end: f64, stretch: f64) {
    let m = nodes.len();
    let mut dr = nodes[m - 1] - nodes[m - 2];
    let mut r = nodes[m - 1];
    while r + dr * stretch < end {
        dr *= stretch;
        r += dr;
        nodes.push(r);
    }
    if end - r < 0.5 * dr && nodes.len() > m {
        nodes.pop();
    }
    if end > *nodes.last().unwrap() {
        nodes.push(end);
    }
}

/// Difference between runs with truncation radius `r_M` and `2 r_M`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationReport {
    pub far_radius: f64,
    pub probes: Vec<f64>,
    /// Largest absolute change of `u` at the probes over all snapshots.
    pub sensitivity: f64,
}

/// Nodal values at every snapshot of a radial run.
#[derive(Debug, Clone)]
pub struct RadialSolution {
    pub grid: RadialGrid,
    pub kind: ProblemKind,
    pub sigma: Conductivities,
    pub scene: SceneConfig,
    values: Vec<Vec<f64>>,
    initial: Vec<f64>,
    step_variance: Vec<f64>,
    pub truncation: Option<TruncationReport>,
}

impl RadialSolution {
    pub fn times(&self) -> &[f64] {
        &self.grid.times
    }

    pub fn snapshot(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    /// Sum of squared step sizes up to snapshot `k`.
    pub fn step_variance(&self, k: usize) -> f64 {
        self.step_variance[k]
    }

    /// Bilinear interpolation in `(r, log t)`.
    pub fn sample(&self, r: f64, t: f64) -> Result<f64> {
        let times = &self.grid.times;
        let i = self.grid.locate(r).ok_or(Error::OutOfHull { r, t })?;
        if !(t >= times[0]) || t > *times.last().unwrap() {
            return Err(Error::OutOfHull { r, t });
        }
        let (k, wt) = if times.len() == 1 {
            (0, 0.0)
        } else {
            let k = times.partition_point(|&s| s <= t).saturating_sub(1).min(times.len() - 2);
            (k, (t.ln() - times[k].ln()) / (times[k + 1].ln() - times[k].ln()))
        };
        let wr = (r - self.grid.nodes[i]) / (self.grid.nodes[i + 1] - self.grid.nodes[i]);
        let at = |k: usize| {
            let v = &self.values[k];
            if wr == 0.0 {
                v[i]
            } else {
                (1.0 - wr) * v[i] + wr * v[i + 1]
            }
        };
        if wt == 0.0 {
            return Ok(at(k));
        }
        Ok((1.0 - wt) * at(k) + wt * at(k + 1))
    }

    #[cfg(test)]
    pub(crate) fn fill_for_tests(&mut self, value: f64) {
        for v in &mut self.values {
            v.iter_mut().for_each(|x| *x = value);
        }
    }

    /// Interpolated profile at snapshot `k`, as a function of radius.
    pub fn value_at_radius(&self, r: f64, k: usize) -> Result<f64> {
        let i = self.grid.locate(r).ok_or(Error::OutOfHull { r, t: self.grid.times[k] })?;
        let wr = (r - self.grid.nodes[i]) / (self.grid.nodes[i + 1] - self.grid.nodes[i]);
        let v = &self.values[k];
        Ok(if wr == 0.0 { v[i] } else { (1.0 - wr) * v[i] + wr * v[i + 1] })
    }

    /// Value at a point of space, through the distance to the scene center.
    pub fn value_at_point(&self, x: &[f64], k: usize) -> Result<f64> {
        self.value_at_radius(distance(x, &self.scene.outer.center), k)
    }
}

/// Radial finite-volume assembly: capacities and link conductances.
#[derive(Debug, Clone)]
pub(crate) struct RadialAssembly {
    pub volumes: Vec<f64>,
    /// `conductance[i]` couples nodes `i` and `i + 1`.
    pub conductance: Vec<f64>,
}

impl RadialAssembly {
    pub fn new(grid: &RadialGrid, scene: &SceneConfig) -> Self {
        let n = grid.dimension as i32;
        let nodes = &grid.nodes;
        let mut conductance = Vec::with_capacity(nodes.len() - 1);
        for w in nodes.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            conductance.push(scene.sigma_of(scene.region_radial(mid)) * mid.powi(n - 1) / (w[1] - w[0]));
        }
        Self { volumes: grid.volumes(), conductance }
    }

    /// Factor `capacity * volumes + K` restricted to `lo..=hi`, plus an extra
    /// diagonal term on the last unknown.
    pub fn factor(&self, capacity: f64, lo: usize, hi: usize, extra_last: f64) -> Result<Tridiagonal> {
        let g = &self.conductance;
        let n = hi - lo + 1;
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for (j, i) in (lo..=hi).enumerate() {
            let left = if i > 0 { g[i - 1] } else { 0.0 };
            let right = if i < g.len() { g[i] } else { 0.0 };
            diag[j] = capacity * self.volumes[i] + left + right;
            lower[j] = -left;
            upper[j] = -right;
        }
        diag[n - 1] += extra_last;
        Tridiagonal::factor(&lower, &diag, &upper)
    }

    /// Dirichlet contributions of fixed nodes adjacent to `lo..=hi`.
    pub fn add_dirichlet(&self, u: &[f64], lo: usize, hi: usize, rhs: &mut [f64]) {
        if lo > 0 {
            rhs[0] += self.conductance[lo - 1] * u[lo - 1];
        }
        if hi + 1 < u.len() {
            rhs[hi - lo] += self.conductance[hi] * u[hi + 1];
        }
    }
}

/// Range of unknown nodes and the initial profile.
fn initial_state(grid: &RadialGrid, scene: &SceneConfig, kind: ProblemKind) -> (usize, usize, Vec<f64>) {
    let m = grid.nodes.len();
    match kind {
        ProblemKind::Ibvp => {
            let mut u = vec![0.0; m];
            u[m - 1] = 1.0;
            let lo = if scene.outer.inner_radius().is_some() {
                u[0] = 1.0;
                1
            } else {
                0
            };
            (lo, m - 2, u)
        }
        ProblemKind::Cauchy => {
            let n = grid.dimension as i32;
            let mut breaks: Vec<f64> = scene.boundary_components().iter().map(|c| c.radius).collect();
            breaks.sort_by(f64::total_cmp);
            let nodes = &grid.nodes;
            let mut u: Vec<f64> = (0..m)
                .map(|i| {
                    let lo = if i == 0 { nodes[0] } else { 0.5 * (nodes[i - 1] + nodes[i]) };
                    let hi = if i + 1 == m { nodes[i] } else { 0.5 * (nodes[i] + nodes[i + 1]) };
                    if hi <= lo {
                        return if scene.signed_distance_radial(nodes[i]) < 0.0 { 1.0 } else { 0.0 };
                    }
                    let mut cuts = vec![lo];
                    cuts.extend(breaks.iter().copied().filter(|&b| b > lo && b < hi));
                    cuts.push(hi);
                    let mut outside = 0.0;
                    for w in cuts.windows(2) {
                        if scene.signed_distance_radial(0.5 * (w[0] + w[1])) < 0.0 {
                            outside += w[1].powi(n) - w[0].powi(n);
                        }
                    }
                    outside / (hi.powi(n) - lo.powi(n))
                })
                .collect();
            u[m - 1] = 1.0;
            (0, m - 2, u)
        }
    }
}

fn integrate(grid: &RadialGrid, scene: &SceneConfig, kind: ProblemKind) -> Result<RadialSolution> {
    let asm = RadialAssembly::new(grid, scene);
    let (lo, hi, mut u) = initial_state(grid, scene, kind);
    let initial = u.clone();
    let mut values: Vec<Vec<f64>> = Vec::with_capacity(grid.times.len());
    let mut step_variance = Vec::with_capacity(grid.times.len());
    let mut variance = 0.0;
    let mut t_prev = 0.0;
    let mut rhs = vec![0.0; hi - lo + 1];
    for &t in &grid.times {
        let dt = (t - t_prev) / grid.substeps as f64;
        let factor = asm.factor(1.0 / dt, lo, hi, 0.0)?;
        for _ in 0..grid.substeps {
            for (j, i) in (lo..=hi).enumerate() {
                rhs[j] = asm.volumes[i] / dt * u[i];
            }
            asm.add_dirichlet(&u, lo, hi, &mut rhs);
            factor.solve_in_place(&mut rhs);
            u[lo..=hi].copy_from_slice(&rhs);
            check_bounds(&u, t, MAX_PRINCIPLE_SLACK)?;
            variance += dt * dt;
        }
        if kind == ProblemKind::Ibvp {
            if let Some(prev) = values.last() {
                check_monotone(prev, &u, t)?;
            }
        }
        values.push(u.clone());
        step_variance.push(variance);
        t_prev = t;
    }
    Ok(RadialSolution {
        grid: grid.clone(),
        kind,
        sigma: scene.sigma,
        scene: scene.clone(),
        values,
        initial,
        step_variance,
        truncation: None,
    })
}

pub(crate) fn check_bounds(u: &[f64], t: f64, slack: f64) -> Result<()> {
    for (i, &v) in u.iter().enumerate() {
        if !(v >= -slack && v <= 1.0 + slack) {
            return Err(Error::InvariantViolated(format!(
                "maximum principle: u = {v:e} at unknown {i}, t = {t:e}"
            )));
        }
    }
    Ok(())
}

pub(crate) fn check_monotone(prev: &[f64], next: &[f64], t: f64) -> Result<()> {
    for (i, (a, b)) in prev.iter().zip(next).enumerate() {
        if *b < a - MONOTONE_SLACK {
            return Err(Error::InvariantViolated(format!(
                "monotonicity in time: u decreased by {:e} at unknown {i}, t = {t:e}",
                a - b
            )));
        }
    }
    Ok(())
}

/// Boundary heating of a concentric scene.
pub fn solve_ibvp_radial(scene: &SceneConfig, grid: &RadialGrid) -> Result<RadialSolution> {
    scene.validate()?;
    if !scene.is_concentric() {
        return Err(Error::NotConcentric);
    }
    check_grid_matches(scene, grid, ProblemKind::Ibvp)?;
    integrate(grid, scene, ProblemKind::Ibvp)
}

/// Whole-space diffusion from the exterior indicator, truncated at the last
/// node with `u = 1` there; the run is repeated with the far radius doubled
/// and the change at the probes is reported.
pub fn solve_cauchy_radial(scene: &SceneConfig, grid: &RadialGrid, tolerance: f64) -> Result<RadialSolution> {
    scene.validate()?;
    if !scene.is_concentric() {
        return Err(Error::NotConcentric);
    }
    let outer = scene.outer.outer_radius();
    if grid.far_radius() < 5.0 * outer * (1.0 - 1e-12) {
        return Err(Error::Config(format!(
            "far radius {} below five outer radii",
            grid.far_radius()
        )));
    }
    check_grid_matches(scene, grid, ProblemKind::Cauchy)?;
    let mut sol = integrate(grid, scene, ProblemKind::Cauchy)?;
    let doubled = integrate(&grid.extended(2.0 * grid.far_radius()), scene, ProblemKind::Cauchy)?;
    let probes = vec![0.0, 0.5 * outer, outer, 2.0 * outer];
    let mut sensitivity: f64 = 0.0;
    for k in 0..grid.times.len() {
        for &r in &probes {
            let a = sol.value_at_radius(r, k)?;
            let b = doubled.value_at_radius(r, k)?;
            sensitivity = sensitivity.max((a - b).abs());
        }
    }
    if sensitivity > tolerance {
        return Err(Error::TruncationSensitivity { sensitivity, tolerance });
    }
    sol.truncation = Some(TruncationReport { far_radius: grid.far_radius(), probes, sensitivity });
    Ok(sol)
}

fn check_grid_matches(scene: &SceneConfig, grid: &RadialGrid, kind: ProblemKind) -> Result<()> {
    if grid.dimension != scene.dimension {
        return Err(Error::InvalidArgument("grid and scene dimensions differ".into()));
    }
    let mut required: Vec<f64> = scene.boundary_components().iter().map(|c| c.radius).collect();
    required.extend(scene.core_radius());
    for r in required {
        let hit = grid.nodes.iter().any(|&x| (x - r).abs() <= 1e-12 * r.max(1.0));
        if !hit {
            return Err(Error::InvalidArgument(format!("interface radius {r} is not a grid node")));
        }
    }
    let outer = scene.outer.outer_radius();
    let last = grid.far_radius();
    let ok = match kind {
        ProblemKind::Ibvp => (last - outer).abs() <= 1e-12 * outer,
        ProblemKind::Cauchy => last > outer,
    };
    if !ok {
        return Err(Error::InvalidArgument("grid does not end on the expected radius".into()));
    }
    Ok(())
}

/// Convenience: build the grid and run the requested problem.
pub fn solve_radial(scene: &SceneConfig, kind: ProblemKind, params: &SolverParams) -> Result<RadialSolution> {
    let grid = RadialGrid::for_scene(scene, kind, params)?;
    match kind {
        ProblemKind::Ibvp => solve_ibvp_radial(scene, &grid),
        ProblemKind::Cauchy => solve_cauchy_radial(scene, &grid, params.truncation_tolerance),
    }
}
