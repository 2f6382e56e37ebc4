//! Auxiliary functions `U, V, W = ∫_0^∞ (1 - u) dt`, their direct elliptic
//! counterparts, closed forms for concentric scenes, the comparison functions
//! `Û` of the case analysis, and the concentricity discriminator.
//!
//! All auxiliary functions solve one transmission problem
//! `-div(σ ∇w) = χ_Omega`: `U` lives on the shell, `V` on the cores and `W`
//! outside `Omega` (whole-space problem only).

use crate::analysis::{stationarity_metric, StationarityReport, TimeWindow};
use crate::geometry::{distance, norm, Ball, DomainSpec, OuterKind, SceneConfig, SurfaceSampling};
use crate::grid::{assemble, build_operator, solve_steady, CartesianGrid, DiskMedium, FieldSeries, OperatorOptions};
use crate::numerics::{fit_line, Tridiagonal};
use crate::radial::{ProblemKind, RadialAssembly, RadialGrid, RadialSolution, SolverParams};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Largest `1 - u` accepted at the final snapshot before the exponential tail
/// is added.
pub const TAIL_BOUND: f64 = 1e-6;

const NOISE_FLOOR: f64 = 1e-10;

fn check_dimension(n: usize) -> Result<()> {
    if n == 2 || n == 3 {
        Ok(())
    } else {
        Err(Error::InvalidDimension(n))
    }
}

// ---------------------------------------------------------------------------
// Radial closed forms

/// `U(r) = c_1 φ(r) - r²/(2Nσ_s) + c_2` with `φ = r^{2-N}` (`-log r` when `N = 2`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub dimension: usize,
    pub sigma_s: f64,
    pub c1: f64,
    pub c2: f64,
}

fn phi(n: usize, r: f64) -> f64 {
    if n == 2 {
        -r.ln()
    } else {
        r.powi(2 - n as i32)
    }
}

fn phi_prime(n: usize, r: f64) -> f64 {
    if n == 2 {
        -1.0 / r
    } else {
        (2.0 - n as f64) * r.powi(1 - n as i32)
    }
}

fn phi_second(n: usize, r: f64) -> f64 {
    if n == 2 {
        1.0 / (r * r)
    } else {
        let nf = n as f64;
        (2.0 - nf) * (1.0 - nf) * r.powi(-(n as i32))
    }
}

impl RadialProfile {
    /// Profile with `U(radius) = 0`.
    pub fn vanishing_at(dimension: usize, sigma_s: f64, c1: f64, radius: f64) -> Self {
        let nf = dimension as f64;
        let c2 = radius * radius / (2.0 * nf * sigma_s) - c1 * phi(dimension, radius);
        Self { dimension, sigma_s, c1, c2 }
    }

    pub fn value(&self, r: f64) -> f64 {
        let nf = self.dimension as f64;
        self.c1 * phi(self.dimension, r) - r * r / (2.0 * nf * self.sigma_s) + self.c2
    }

    pub fn derivative(&self, r: f64) -> f64 {
        let nf = self.dimension as f64;
        self.c1 * phi_prime(self.dimension, r) - r / (nf * self.sigma_s)
    }

    pub fn second_derivative(&self, r: f64) -> f64 {
        let nf = self.dimension as f64;
        self.c1 * phi_second(self.dimension, r) - 1.0 / (nf * self.sigma_s)
    }

    /// Unique critical point when `c_1 < 0`.
    pub fn critical_radius(&self) -> Option<f64> {
        if self.c1 >= 0.0 {
            return None;
        }
        let nf = self.dimension as f64;
        Some(if self.dimension == 2 {
            (2.0 * self.sigma_s * -self.c1).sqrt()
        } else {
            (nf * (nf - 2.0) * self.sigma_s * -self.c1).powf(1.0 / nf)
        })
    }

    pub fn case(&self) -> CaseTag {
        let scale = self.c2.abs().max(1.0);
        if self.c1.abs() <= 1e-14 * scale {
            CaseTag::I
        } else if self.c1 > 0.0 {
            CaseTag::Ii
        } else {
            CaseTag::Iii
        }
    }
}

/// Sign of `c_1`: zero (i), positive (ii), negative (iii).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseTag {
    I,
    Ii,
    Iii,
}

/// Coefficients of the auxiliary functions of a concentric scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialCoefficients {
    pub kind: ProblemKind,
    pub domain: OuterKind,
    pub profile: RadialProfile,
    pub sigma_c: f64,
    pub sigma_m: f64,
    /// Core radius and the constant `b` of `V = b - r²/(2Nσ_c)`.
    pub core: Option<(f64, f64)>,
    /// `W = c_3 r^{2-N}` outside `Omega` (whole-space problem).
    pub c3: Option<f64>,
    /// `W = c_4` in the cavity of a shell (whole-space problem).
    pub c4: Option<f64>,
    pub case: CaseTag,
    pub critical_radius: Option<f64>,
    pub radii: Vec<f64>,
}

impl RadialCoefficients {
    /// The auxiliary function at radius `r`.
    pub fn value(&self, r: f64) -> f64 {
        let n = self.profile.dimension;
        let nf = n as f64;
        let (inner, outer) = match self.domain {
            OuterKind::Ball => (0.0, self.radii[0]),
            OuterKind::Shell => (self.radii[0], self.radii[1]),
        };
        if r > outer {
            return self.c3.map_or(0.0, |c3| c3 * r.powi(2 - n as i32));
        }
        if r < inner {
            return self.c4.unwrap_or(0.0);
        }
        match self.core {
            Some((a, b)) if r < a => b - r * r / (2.0 * nf * self.sigma_c),
            _ => self.profile.value(r),
        }
    }
}

/// Closed-form coefficients for a concentric scene.
pub fn radial_closed_form(scene: &SceneConfig, kind: ProblemKind) -> Result<RadialCoefficients> {
    scene.validate()?;
    if !scene.is_concentric() {
        return Err(Error::NotConcentric);
    }
    let n = scene.dimension;
    check_dimension(n)?;
    let nf = n as f64;
    let s = scene.sigma;
    let q = |r: f64| r * r / (2.0 * nf * s.shell);
    let mut c3 = None;
    let mut c4 = None;
    let profile = match (kind, scene.outer.kind) {
        (ProblemKind::Ibvp, OuterKind::Ball) => RadialProfile::vanishing_at(n, s.shell, 0.0, scene.outer.radii[0]),
        (ProblemKind::Ibvp, OuterKind::Shell) => {
            let (a, b) = (scene.outer.radii[0], scene.outer.radii[1]);
            let c1 = (q(b) - q(a)) / (phi(n, b) - phi(n, a));
            RadialProfile::vanishing_at(n, s.shell, c1, b)
        }
        (ProblemKind::Cauchy, _) if n < 3 => {
            return Err(Error::DivergentTail("the whole-space auxiliary function needs N >= 3".into()));
        }
        (ProblemKind::Cauchy, OuterKind::Ball) => {
            let rho = scene.outer.radii[0];
            let k3 = rho.powi(n as i32) / (nf * (nf - 2.0) * s.medium);
            c3 = Some(k3);
            RadialProfile { dimension: n, sigma_s: s.shell, c1: 0.0, c2: k3 * phi(n, rho) + q(rho) }
        }
        (ProblemKind::Cauchy, OuterKind::Shell) => {
            let (a, b) = (scene.outer.radii[0], scene.outer.radii[1]);
            let c1 = -a.powi(n as i32) / (nf * (nf - 2.0) * s.shell);
            let k3 = s.shell / s.medium * (c1 + b.powi(n as i32) / (nf * (nf - 2.0) * s.shell));
            let profile = RadialProfile { dimension: n, sigma_s: s.shell, c1, c2: (k3 - c1) * phi(n, b) + q(b) };
            c3 = Some(k3);
            c4 = Some(profile.value(a));
            profile
        }
    };
    if scene.outer.kind == OuterKind::Shell {
        let (a, b) = (scene.outer.radii[0], scene.outer.radii[1]);
        if profile.c1 >= 0.0 {
            return Err(Error::InvariantViolated(format!("shell profile has c1 = {} >= 0", profile.c1)));
        }
        match kind {
            ProblemKind::Ibvp => {
                for k in 0..=64 {
                    let r = a + (b - a) * k as f64 / 64.0;
                    if profile.second_derivative(r) >= 0.0 {
                        return Err(Error::InvariantViolated(format!("U'' >= 0 at r = {r}")));
                    }
                }
            }
            ProblemKind::Cauchy => {
                let scale = b / (nf * s.shell);
                if profile.derivative(a).abs() > 1e-12 * scale || profile.derivative(b) >= 0.0 {
                    return Err(Error::InvariantViolated("shell flux conditions fail".into()));
                }
            }
        }
    }
    let core = scene.core_radius().map(|a| (a, profile.value(a) + a * a / (2.0 * nf * s.core)));
    Ok(RadialCoefficients {
        kind,
        domain: scene.outer.kind,
        case: profile.case(),
        critical_radius: profile.critical_radius(),
        profile,
        sigma_c: s.core,
        sigma_m: s.medium,
        core,
        c3,
        c4,
        radii: scene.outer.radii.clone(),
    })
}

// ---------------------------------------------------------------------------
// Auxiliary fields

/// Where the values of an auxiliary field live.
#[derive(Debug, Clone, PartialEq)]
pub enum AuxSupport {
    Radial { nodes: Vec<f64> },
    Cartesian { grid: CartesianGrid, active: Vec<bool> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "method")]
pub enum AuxMethod {
    /// Trapezoid rule over the snapshots plus a fitted tail.
    TimeIntegration { t_final: f64, max_tail: f64 },
    Elliptic { relative_residual: f64 },
}

/// Interface diagnostics: jumps of the one-sided traces across `∂D` (and
/// across `∂Omega` for the whole-space problem), relative to the size of the
/// field and of its flux.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct InterfaceResiduals {
    pub value_jump: f64,
    pub flux_jump: f64,
    /// Largest relative defect of the discrete equations `-div(σ∇w) = χ_Omega`.
    pub pde_residual: f64,
}

impl InterfaceResiduals {
    /// The traces match to first order in `h` with constant `c`.
    pub fn consistent(&self, h: f64, c: f64) -> bool {
        self.value_jump <= c * h && self.flux_jump <= c * h
    }
}

/// `U` on the shell, `V` on the cores and `W` outside `Omega`, stored as one field.
#[derive(Debug, Clone)]
pub struct AuxiliaryFields {
    pub scene: SceneConfig,
    pub kind: ProblemKind,
    pub support: AuxSupport,
    pub values: Vec<f64>,
    pub method: AuxMethod,
    pub residuals: InterfaceResiduals,
}

impl AuxiliaryFields {
    /// Linear (radial) or bilinear (Cartesian) interpolation.
    pub fn value_at(&self, x: &[f64]) -> Result<f64> {
        match &self.support {
            AuxSupport::Radial { .. } => self.value_at_radius(distance(x, &self.scene.outer.center)),
            AuxSupport::Cartesian { grid, .. } => {
                grid.interpolate(&self.values, x).ok_or(Error::OutOfHull { r: norm(x), t: f64::INFINITY })
            }
        }
    }

    pub fn value_at_radius(&self, r: f64) -> Result<f64> {
        match &self.support {
            AuxSupport::Radial { nodes } => {
                let out = Error::OutOfHull { r, t: f64::INFINITY };
                if !(r >= nodes[0]) || r > *nodes.last().unwrap() {
                    return Err(out);
                }
                let i = nodes.partition_point(|&x| x <= r).saturating_sub(1).min(nodes.len() - 2);
                let w = (r - nodes[i]) / (nodes[i + 1] - nodes[i]);
                Ok((1.0 - w) * self.values[i] + w * self.values[i + 1])
            }
            AuxSupport::Cartesian { .. } => {
                let mut x = self.scene.outer.center.clone();
                x[0] += r;
                self.value_at(&x)
            }
        }
    }

    /// Points where the field is compared: unknown cells, or nodes up to
    /// twice the outer radius.
    fn comparison_points(&self) -> Vec<(usize, Vec<f64>)> {
        match &self.support {
            AuxSupport::Radial { nodes } => {
                let limit = 2.0 * self.scene.outer.outer_radius();
                let mut dir = vec![0.0; self.scene.dimension];
                dir[0] = 1.0;
                nodes
                    .iter()
                    .enumerate()
                    .filter(|(_, &r)| r <= limit * (1.0 + 1e-12))
                    .filter(|(_, &r)| self.kind == ProblemKind::Cauchy || self.scene.signed_distance_radial(r) > 0.0)
                    .map(|(i, &r)| (i, self.scene.outer.center.iter().zip(&dir).map(|(c, d)| c + r * d).collect()))
                    .collect()
            }
            AuxSupport::Cartesian { grid, active } => {
                (0..grid.len()).filter(|&c| active[c]).map(|c| (c, grid.cell_center(c).to_vec())).collect()
            }
        }
    }
}

/// `max |a - b| / max |b|` over the comparison points of `a`.
pub fn relative_linf(a: &AuxiliaryFields, b: &AuxiliaryFields) -> Result<f64> {
    let same = a.support == b.support;
    let mut diff: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (i, x) in a.comparison_points() {
        let vb = if same { b.values[i] } else { b.value_at(&x)? };
        diff = diff.max((a.values[i] - vb).abs());
        scale = scale.max(vb.abs());
    }
    if !(scale > 0.0) {
        return Err(Error::InvalidArgument("reference field vanishes".into()));
    }
    Ok(diff / scale)
}

/// A time-dependent solution whose auxiliary functions can be integrated.
#[derive(Debug, Clone, Copy)]
pub enum SolutionRef<'a> {
    Radial(&'a RadialSolution),
    Grid(&'a FieldSeries),
}

impl<'a> From<&'a RadialSolution> for SolutionRef<'a> {
    fn from(s: &'a RadialSolution) -> Self {
        SolutionRef::Radial(s)
    }
}

impl<'a> From<&'a FieldSeries> for SolutionRef<'a> {
    fn from(s: &'a FieldSeries) -> Self {
        SolutionRef::Grid(s)
    }
}

/// `∫_0^∞ (1 - u) dt` at every node or cell.
///
/// Snapshots are integrated with the trapezoid rule from the initial data.
/// The boundary problem adds an exponential tail `e_K/λ`, with `λ` fitted
/// to the sup norms over the last decade, and requires `1 - u` to be below
/// [`TAIL_BOUND`] at the final time. The whole-space problem needs `N = 3` and adds the
/// tail of `a t^{-N/2} + b t^{-N/2-1}` fitted per node.
pub fn auxiliary_by_time_integration<'a>(sol: impl Into<SolutionRef<'a>>) -> Result<AuxiliaryFields> {
    let sol = sol.into();
    let (scene, kind, times) = match sol {
        SolutionRef::Radial(s) => (&s.scene, s.kind, s.times()),
        SolutionRef::Grid(s) => (&s.scene, s.kind, &s.times[..]),
    };
    if kind == ProblemKind::Cauchy && scene.dimension < 3 {
        return Err(Error::DivergentTail("1 - u decays like t^{-N/2}; the time integral needs N >= 3".into()));
    }
    let k_last = times.len() - 1;
    if k_last < 2 {
        return Err(Error::UnderResolved("too few snapshots for the time integral".into()));
    }
    let snapshot = |k: usize| -> &[f64] {
        match sol {
            SolutionRef::Radial(s) => s.snapshot(k),
            SolutionRef::Grid(s) => s.snapshot(k),
        }
    };
    let initial: Vec<f64> = match sol {
        SolutionRef::Radial(s) => s.initial().to_vec(),
        SolutionRef::Grid(s) => initial_grid(s),
    };
    let m = initial.len();
    let mut integral = vec![0.0; m];
    let mut prev: Vec<f64> = initial.iter().map(|u| 1.0 - u).collect();
    let mut t_prev = 0.0;
    for (k, &t) in times.iter().enumerate() {
        let cur = snapshot(k);
        for i in 0..m {
            let e = 1.0 - cur[i];
            integral[i] += 0.5 * (t - t_prev) * (prev[i] + e);
            prev[i] = e;
        }
        t_prev = t;
    }
    let last = snapshot(k_last);
    let (t1, t0) = (times[k_last], times[k_last - 1]);
    let mut max_tail: f64 = 0.0;
    match kind {
        ProblemKind::Ibvp => {
            let sup = |v: &[f64]| v.iter().map(|u| 1.0 - u).fold(0.0, f64::max);
            let m1 = sup(last);
            if m1 >= TAIL_BOUND {
                return Err(Error::UnderResolved(format!(
                    "1 - u = {m1:e} at the final time {t1}; the run must reach below {TAIL_BOUND:e}"
                )));
            }
            // log sup(1 - u) is fitted linearly over the last decade, ignoring
            // values at the level of the solver tolerance.
            let (mut ts, mut logs) = (Vec::new(), Vec::new());
            for (k, &t) in times.iter().enumerate() {
                let m = sup(snapshot(k));
                if t >= 0.1 * t1 && m > NOISE_FLOOR {
                    ts.push(t);
                    logs.push(m.ln());
                }
            }
            let lambda = if ts.len() >= 2 { -fit_line(&ts, &logs)?.slope } else { f64::NAN };
            if lambda > 0.0 {
                for i in 0..m {
                    let tail = (1.0 - last[i]).max(0.0) / lambda;
                    integral[i] += tail;
                    max_tail = max_tail.max(tail);
                }
            } else if m1 > NOISE_FLOOR {
                return Err(Error::FitFailure("1 - u does not decay at the end of the run".into()));
            }
        }
        ProblemKind::Cauchy => {
            let p = 0.5 * scene.dimension as f64;
            for i in 0..m {
                let (e1, e0) = (1.0 - last[i], 1.0 - snapshot(k_last - 1)[i]);
                // e = a t^{-p} + b t^{-p-1} through both snapshots.
                let det = t0.powf(-p) * t1.powf(-p - 1.0) - t1.powf(-p) * t0.powf(-p - 1.0);
                let a = (e0 * t1.powf(-p - 1.0) - e1 * t0.powf(-p - 1.0)) / det;
                let b = (t0.powf(-p) * e1 - t1.powf(-p) * e0) / det;
                let tail = a * t1.powf(1.0 - p) / (p - 1.0) + b * t1.powf(-p) / p;
                integral[i] += tail;
                max_tail = max_tail.max(tail.abs());
            }
        }
    }
    let (support, residuals) = match sol {
        SolutionRef::Radial(s) => {
            for (i, &r) in s.grid.nodes.iter().enumerate() {
                if kind == ProblemKind::Ibvp && scene.signed_distance_radial(r) <= 0.0 {
                    integral[i] = 0.0;
                }
            }
            let res = radial_residuals(scene, kind, &s.grid, &integral, None);
            (AuxSupport::Radial { nodes: s.grid.nodes.clone() }, res)
        }
        SolutionRef::Grid(s) => {
            let res = grid_residuals(scene, &s.grid, &s.active, &integral)?;
            (AuxSupport::Cartesian { grid: s.grid.clone(), active: s.active.clone() }, res)
        }
    };
    Ok(AuxiliaryFields {
        scene: scene.clone(),
        kind,
        support,
        values: integral,
        method: AuxMethod::TimeIntegration { t_final: t1, max_tail },
        residuals,
    })
}

fn initial_grid(s: &FieldSeries) -> Vec<f64> {
    (0..s.grid.len())
        .map(|c| match s.kind {
            ProblemKind::Ibvp => {
                if s.active[c] {
                    0.0
                } else {
                    1.0
                }
            }
            ProblemKind::Cauchy => {
                if s.scene.signed_distance(&s.grid.cell_center(c)) > 0.0 {
                    0.0
                } else {
                    1.0
                }
            }
        })
        .collect()
}

/// Source `∫ χ_Omega r^{N-1} dr` over each control volume.
fn radial_source(scene: &SceneConfig, grid: &RadialGrid) -> Vec<f64> {
    let n = grid.dimension as i32;
    let nodes = &grid.nodes;
    let m = nodes.len();
    let (inner, outer) = match scene.outer.kind {
        OuterKind::Ball => (0.0, scene.outer.radii[0]),
        OuterKind::Shell => (scene.outer.radii[0], scene.outer.radii[1]),
    };
    (0..m)
        .map(|i| {
            let lo = if i == 0 { nodes[0] } else { 0.5 * (nodes[i - 1] + nodes[i]) };
            let hi = if i + 1 == m { nodes[i] } else { 0.5 * (nodes[i] + nodes[i + 1]) };
            let (a, b) = (lo.max(inner), hi.min(outer));
            if b > a {
                (b.powi(n) - a.powi(n)) / n as f64
            } else {
                0.0
            }
        })
        .collect()
}

/// Direct solve of the transmission problem on the radial grid of a
/// concentric scene.
///
/// The whole-space problem is closed at the last node by
/// `∂_r W + (N - 2) W / r = 0`, exact for `c_3 r^{2-N}`.
pub fn solve_auxiliary_radial(scene: &SceneConfig, kind: ProblemKind, params: &SolverParams) -> Result<AuxiliaryFields> {
    check_dimension(scene.dimension)?;
    if kind == ProblemKind::Cauchy && scene.dimension < 3 {
        return Err(Error::DivergentTail("W grows like log r when N = 2".into()));
    }
    let grid = RadialGrid::for_scene(scene, kind, params)?;
    let asm = RadialAssembly::new(&grid, scene);
    let source = radial_source(scene, &grid);
    let m = grid.nodes.len();
    let (lo, hi, extra) = match kind {
        ProblemKind::Ibvp => (usize::from(scene.outer.kind == OuterKind::Shell), m - 2, 0.0),
        ProblemKind::Cauchy => {
            let r = grid.far_radius();
            let nf = scene.dimension as f64;
            (0, m - 1, scene.sigma.medium * (nf - 2.0) * r.powi(scene.dimension as i32 - 2))
        }
    };
    let factor = asm.factor(0.0, lo, hi, extra)?;
    let mut rhs: Vec<f64> = source[lo..=hi].to_vec();
    factor.solve_in_place(&mut rhs);
    let mut values = vec![0.0; m];
    values[lo..=hi].copy_from_slice(&rhs);
    let relative_residual = radial_defect(&asm, &source, &values, lo, hi, extra);
    let residuals = radial_residuals(scene, kind, &grid, &values, Some((&asm, &source, lo, hi, extra)));
    Ok(AuxiliaryFields {
        scene: scene.clone(),
        kind,
        support: AuxSupport::Radial { nodes: grid.nodes.clone() },
        values,
        method: AuxMethod::Elliptic { relative_residual },
        residuals,
    })
}

fn radial_defect(asm: &RadialAssembly, source: &[f64], w: &[f64], lo: usize, hi: usize, extra: f64) -> f64 {
    let g = &asm.conductance;
    let mut worst: f64 = 0.0;
    let scale = source.iter().fold(0.0, |a: f64, b| a.max(b.abs()));
    for i in lo..=hi {
        let mut flux = 0.0;
        if i > 0 {
            flux += g[i - 1] * (w[i] - w[i - 1]);
        }
        if i < g.len() {
            flux += g[i] * (w[i] - w[i + 1]);
        }
        if i == hi {
            flux += extra * w[i];
        }
        let denom = source[i].abs().max(1e-3 * scale).max(f64::MIN_POSITIVE);
        worst = worst.max((flux - source[i]).abs() / denom);
    }
    worst
}

type RadialSystem<'a> = (&'a RadialAssembly, &'a [f64], usize, usize, f64);

fn radial_residuals(
    scene: &SceneConfig,
    kind: ProblemKind,
    grid: &RadialGrid,
    w: &[f64],
    system: Option<RadialSystem<'_>>,
) -> InterfaceResiduals {
    let nodes = &grid.nodes;
    let mut radii: Vec<f64> = scene.core_radius().into_iter().collect();
    if kind == ProblemKind::Cauchy {
        radii.extend(scene.boundary_components().iter().map(|c| c.radius));
    }
    let wmax = w.iter().fold(0.0, |a: f64, b| a.max(b.abs())).max(f64::MIN_POSITIVE);
    let mut res = InterfaceResiduals::default();
    for r in radii {
        let Some(i) = nodes.iter().position(|&x| (x - r).abs() <= 1e-12 * r.max(1.0)) else {
            continue;
        };
        if i < 2 || i + 2 >= nodes.len() {
            continue;
        }
        let hl = nodes[i] - nodes[i - 1];
        let hr = nodes[i + 1] - nodes[i];
        let left = (3.0 * w[i] - 4.0 * w[i - 1] + w[i - 2]) / (2.0 * hl);
        let right = (-3.0 * w[i] + 4.0 * w[i + 1] - w[i + 2]) / (2.0 * hr);
        let sl = scene.sigma_of(scene.region_radial(r - 0.5 * hl));
        let sr = scene.sigma_of(scene.region_radial(r + 0.5 * hr));
        let scale = (sl * left).abs().max((sr * right).abs()).max(f64::MIN_POSITIVE);
        res.flux_jump = res.flux_jump.max((sl * left - sr * right).abs() / scale);
        // Traces from quadratic extrapolation on each side.
        let vl = 3.0 * w[i - 1] - 3.0 * w[i - 2] + w[i.saturating_sub(3)];
        let vr = 3.0 * w[i + 1] - 3.0 * w[i + 2] + w[(i + 3).min(nodes.len() - 1)];
        res.value_jump = res.value_jump.max((vl - vr).abs() / wmax);
    }
    res.pde_residual = match system {
        Some((asm, source, lo, hi, extra)) => radial_defect(asm, source, w, lo, hi, extra),
        None => {
            let asm = RadialAssembly::new(grid, scene);
            let source = radial_source(scene, grid);
            let m = nodes.len();
            let (lo, hi) = match kind {
                ProblemKind::Ibvp => (usize::from(scene.outer.kind == OuterKind::Shell), m - 2),
                ProblemKind::Cauchy => (0, m - 2),
            };
            radial_defect(&asm, &source, w, lo, hi, 0.0)
        }
    };
    res
}

/// Direct solve of the boundary problem's transmission system on a Cartesian grid.
pub fn solve_auxiliary_grid(scene: &SceneConfig, grid: &CartesianGrid) -> Result<AuxiliaryFields> {
    if scene.dimension != 2 {
        return Err(Error::InvalidDimension(scene.dimension));
    }
    let op = build_operator(scene, grid, ProblemKind::Ibvp, OperatorOptions::default())?;
    if op.active_count() == 0 {
        return Err(Error::SingularAssembly("no unknown cells".into()));
    }
    let h2 = grid.h * grid.h;
    let source: Vec<f64> = op.active.iter().map(|&a| if a { h2 } else { 0.0 }).collect();
    let values = solve_steady(&op, &source, |_| 0.0)?;
    let mut kw = vec![0.0; values.len()];
    op.apply(&values, &mut kw);
    let mut rr = 0.0;
    let mut bb = 0.0;
    for c in 0..values.len() {
        if op.active[c] {
            rr += (kw[c] - source[c]).powi(2);
            bb += source[c] * source[c];
        }
    }
    let residuals = grid_residuals(scene, grid, &op.active, &values)?;
    Ok(AuxiliaryFields {
        scene: scene.clone(),
        kind: ProblemKind::Ibvp,
        support: AuxSupport::Cartesian { grid: grid.clone(), active: op.active.clone() },
        values,
        method: AuxMethod::Elliptic { relative_residual: (rr / bb).sqrt() },
        residuals,
    })
}

/// Direct solve on the radial grid for concentric scenes, on the Cartesian
/// grid of spacing `params.h` otherwise.
pub fn solve_auxiliary(scene: &SceneConfig, kind: ProblemKind, params: &SolverParams) -> Result<AuxiliaryFields> {
    scene.validate()?;
    if scene.is_concentric() {
        return solve_auxiliary_radial(scene, kind, params);
    }
    if kind == ProblemKind::Cauchy {
        return Err(Error::InvalidArgument("whole-space auxiliary functions need a concentric N = 3 scene".into()));
    }
    let grid = crate::grid::grid_for_scene(scene, kind, params)?;
    solve_auxiliary_grid(scene, &grid)
}

/// Quadratic through `(s_k, f_k)`: value and slope at `s = 0`.
fn extrapolate(s: [f64; 3], f: [f64; 3]) -> (f64, f64) {
    let mut value = 0.0;
    let mut slope = 0.0;
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        let denom = (s[i] - s[j]) * (s[i] - s[k]);
        value += f[i] * s[j] * s[k] / denom;
        slope += f[i] * -(s[j] + s[k]) / denom;
    }
    (value, slope)
}

fn grid_residuals(scene: &SceneConfig, grid: &CartesianGrid, active: &[bool], w: &[f64]) -> Result<InterfaceResiduals> {
    let h = grid.h;
    let wmax = w.iter().fold(0.0, |a: f64, b| a.max(b.abs())).max(f64::MIN_POSITIVE);
    let dirs = crate::geometry::sphere_directions(2, SurfaceSampling { planar: 32, ..Default::default() });
    let mut res = InterfaceResiduals::default();
    let s = [2.0 * h, 3.0 * h, 4.0 * h];
    for core in &scene.cores {
        for d in &dirs {
            let y = [core.center[0] + core.radius * d[0], core.center[1] + core.radius * d[1]];
            let at = |sign: f64, k: usize| -> Result<f64> {
                let p = [y[0] + sign * s[k] * d[0], y[1] + sign * s[k] * d[1]];
                grid.interpolate(w, &p).ok_or(Error::OutOfHull { r: norm(&p), t: f64::INFINITY })
            };
            let inside = [at(-1.0, 0)?, at(-1.0, 1)?, at(-1.0, 2)?];
            let outside = [at(1.0, 0)?, at(1.0, 1)?, at(1.0, 2)?];
            let (vi, gi) = extrapolate(s, inside);
            let (vo, go) = extrapolate(s, outside);
            let fi = -scene.sigma.core * gi;
            let fo = scene.sigma.shell * go;
            let scale = fi.abs().max(fo.abs()).max(f64::MIN_POSITIVE);
            res.value_jump = res.value_jump.max((vi - vo).abs() / wmax);
            res.flux_jump = res.flux_jump.max((fi - fo).abs() / scale);
        }
    }
    let op = build_operator(scene, grid, ProblemKind::Ibvp, OperatorOptions::default())?;
    let mut kw = vec![0.0; w.len()];
    op.apply(w, &mut kw);
    let h2 = h * h;
    for c in 0..w.len() {
        if active[c] {
            res.pde_residual = res.pde_residual.max((kw[c] - h2).abs() / h2);
        }
    }
    Ok(res)
}

/// Coefficients read off a radial auxiliary field by least squares: `c_1, c_2`
/// on the shell (`r >= ρ/4` without a core) and `c_3` on `[5ρ/4, 2ρ]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FittedCoefficients {
    pub c1: f64,
    pub c2: f64,
    pub c3: Option<f64>,
}

pub fn fit_radial_coefficients(aux: &AuxiliaryFields) -> Result<FittedCoefficients> {
    let AuxSupport::Radial { nodes } = &aux.support else {
        return Err(Error::InvalidArgument("coefficients are read off radial fields only".into()));
    };
    let scene = &aux.scene;
    let n = scene.dimension;
    let nf = n as f64;
    let (inner, outer) = match scene.outer.kind {
        OuterKind::Ball => (scene.core_radius().unwrap_or(0.25 * scene.outer.radii[0]), scene.outer.radii[0]),
        OuterKind::Shell => (scene.outer.radii[0], scene.outer.radii[1]),
    };
    let sigma_s = scene.sigma.shell;
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for (&r, &w) in nodes.iter().zip(&aux.values) {
        if r >= inner && r <= outer {
            rows.push(vec![phi(n, r), 1.0]);
            y.push(w + r * r / (2.0 * nf * sigma_s));
        }
    }
    let c = crate::numerics::least_squares(rows, &y)?;
    let c3 = if aux.kind == ProblemKind::Cauchy {
        let (mut num, mut den) = (0.0, 0.0);
        for (&r, &w) in nodes.iter().zip(&aux.values) {
            if r >= 1.25 * outer && r <= 2.0 * outer {
                let f = phi(n, r);
                num += f * w;
                den += f * f;
            }
        }
        if den == 0.0 {
            return Err(Error::UnderResolved("no nodes outside the domain".into()));
        }
        Some(num / den)
    } else {
        None
    };
    Ok(FittedCoefficients { c1: c[0], c2: c[1], c3 })
}

// ---------------------------------------------------------------------------
// Comparison functions

/// Which anchor the comparison function uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HatVariant {
    /// Anchor at the minimum of `U` on `∂D_*` (case (i) and the shell case).
    CaseIOrShell,
    /// Minimum if `σ_s > σ_c`, maximum otherwise.
    CaseIi,
    /// Maximum if `σ_s > σ_c`, minimum otherwise.
    CaseIii,
}

/// Extremal radii of `U` over the distances from `x_0` to points of `∂D_*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryExtrema {
    /// Radius of the maximum of `U`.
    pub rho_max: f64,
    /// Radius of the minimum of `U`.
    pub rho_min: f64,
    pub u_max: f64,
    pub u_min: f64,
}

/// Range of `|x - x_0|` over `∂D_*`.
fn distance_range(x0: &[f64], d_star: &Ball) -> (f64, f64) {
    let e = distance(&d_star.center, x0);
    ((e - d_star.radius).abs(), e + d_star.radius)
}

pub fn boundary_extrema(profile: &RadialProfile, x0: &[f64], d_star: &Ball) -> BoundaryExtrema {
    let (lo, hi) = distance_range(x0, d_star);
    let mut cands = vec![lo, hi];
    if let Some(rc) = profile.critical_radius() {
        if rc > lo && rc < hi {
            cands.push(rc);
        }
    }
    // Ties go to the smaller radius.
    let mut best_max = (f64::NEG_INFINITY, lo);
    let mut best_min = (f64::INFINITY, lo);
    for r in cands {
        let u = profile.value(r);
        if u > best_max.0 {
            best_max = (u, r);
        }
        if u < best_min.0 {
            best_min = (u, r);
        }
    }
    BoundaryExtrema { rho_max: best_max.1, rho_min: best_min.1, u_max: best_max.0, u_min: best_min.0 }
}

/// `Û(r) = U(ρ_*) + (σ_s/σ_c)(U(r) - U(ρ_*))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HatU {
    pub profile: RadialProfile,
    pub sigma_c: f64,
    pub anchor_radius: f64,
    pub anchor_value: f64,
}

impl HatU {
    pub fn ratio(&self) -> f64 {
        self.profile.sigma_s / self.sigma_c
    }

    pub fn value(&self, r: f64) -> f64 {
        self.anchor_value + self.ratio() * (self.profile.value(r) - self.anchor_value)
    }

    pub fn derivative(&self, r: f64) -> f64 {
        self.ratio() * self.profile.derivative(r)
    }
}

/// Comparison function for the component `d_star` and singular point `x0`.
pub fn hat_u(profile: &RadialProfile, sigma_c: f64, x0: &[f64], d_star: &Ball, variant: HatVariant) -> Result<HatU> {
    let ext = boundary_extrema(profile, x0, d_star);
    let above = profile.sigma_s > sigma_c;
    let use_max = match variant {
        HatVariant::CaseIOrShell => {
            if profile.c1 > 0.0 && profile.case() != CaseTag::I {
                return Err(Error::CaseMismatch(format!("variant (i)/(II) with c1 = {} > 0", profile.c1)));
            }
            false
        }
        HatVariant::CaseIi => {
            if profile.case() != CaseTag::Ii {
                return Err(Error::CaseMismatch(format!("variant (ii) needs c1 > 0, got {}", profile.c1)));
            }
            !above
        }
        HatVariant::CaseIii => {
            if profile.case() != CaseTag::Iii {
                return Err(Error::CaseMismatch(format!("variant (iii) needs c1 < 0, got {}", profile.c1)));
            }
            above
        }
    };
    let (anchor_radius, anchor_value) = if use_max { (ext.rho_max, ext.u_max) } else { (ext.rho_min, ext.u_min) };
    Ok(HatU { profile: *profile, sigma_c, anchor_radius, anchor_value })
}

// ---------------------------------------------------------------------------
// Case analysis

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HopfCase {
    /// `Omega` a ball, `c_1 = 0`.
    I,
    /// `Omega` a ball, `c_1 > 0` (synthetic).
    Ii,
    /// `Omega` a ball, `c_1 < 0` (synthetic).
    Iii,
    /// `Omega` a spherical shell.
    #[serde(rename = "shell")]
    Shell,
}

/// Input of one case of the comparison argument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HopfParams {
    pub case: HopfCase,
    pub dimension: usize,
    pub sigma_s: f64,
    pub sigma_c: f64,
    pub domain: DomainSpec,
    /// Coefficient of the singular part; required for the synthetic cases
    /// (ii) and (iii), derived from the boundary conditions otherwise.
    #[serde(default)]
    pub c1: Option<f64>,
    pub d_star: Ball,
    pub h: f64,
}

/// Outcome of one case of the comparison argument.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HopfReport {
    pub case: HopfCase,
    pub profile: RadialProfile,
    pub hat: HatU,
    /// Extremes of `Û - V` over the samples of `D_*` outside the excised ball.
    pub min_diff: f64,
    pub max_diff: f64,
    /// `∂(Û - V)/∂ν` at the anchor point `x_*` (outward normal of `D_*`).
    pub gap: f64,
    pub x_star: Vec<f64>,
    /// `+1` when the argument predicts `Û >= V`, `-1` for `Û <= V`, `0` when `σ_s = σ_c`.
    pub expected_sign: f64,
    /// Every sample has the predicted strict sign.
    pub strict: bool,
    pub tolerance: f64,
    pub excision_radius: f64,
    pub samples: usize,
    pub verdict: HopfVerdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HopfVerdict {
    /// `Û = V` and the normal derivatives agree within tolerance.
    Consistent,
    /// Strict inequality with a nonzero normal gap at `x_*`.
    Contradiction,
    Unclear,
}

impl HopfReport {
    /// `max(|Û - V|, |gap|)`.
    pub fn residual(&self) -> f64 {
        self.min_diff.abs().max(self.max_diff.abs()).max(self.gap.abs())
    }
}

/// Tolerance of the case-(i) identity at spacing `h` (5e-3 at `h = 1/256`).
pub fn hopf_tolerance(h: f64) -> f64 {
    5e-3 * h * 256.0
}

fn case_profile(p: &HopfParams) -> Result<RadialProfile> {
    let n = p.dimension;
    match (p.case, p.domain.kind) {
        (HopfCase::Shell, OuterKind::Shell) => {
            let (a, b) = (p.domain.radii[0], p.domain.radii[1]);
            let q = |r: f64| r * r / (2.0 * n as f64 * p.sigma_s);
            let c1 = (q(b) - q(a)) / (phi(n, b) - phi(n, a));
            if p.c1.is_some_and(|c| c >= 0.0) {
                return Err(Error::CaseMismatch("a shell forces c1 < 0".into()));
            }
            Ok(RadialProfile::vanishing_at(n, p.sigma_s, c1, b))
        }
        (HopfCase::Shell, OuterKind::Ball) | (_, OuterKind::Shell) => {
            Err(Error::CaseMismatch("the shell case needs a shell domain and the others a ball".into()))
        }
        (case, OuterKind::Ball) => {
            let rho = p.domain.radii[0];
            let c1 = match (case, p.c1) {
                (HopfCase::I, None) => 0.0,
                (HopfCase::I, Some(c)) if c == 0.0 => 0.0,
                (HopfCase::Ii, Some(c)) if c > 0.0 => c,
                (HopfCase::Iii, Some(c)) if c < 0.0 => c,
                (case, c) => return Err(Error::CaseMismatch(format!("c1 = {c:?} does not fit case {case:?}"))),
            };
            let profile = RadialProfile::vanishing_at(n, p.sigma_s, c1, rho);
            if let Some(rc) = profile.critical_radius() {
                if rc >= rho {
                    return Err(Error::CaseMismatch(format!("critical radius {rc} is not inside the ball")));
                }
            }
            Ok(profile)
        }
    }
}

/// `V` in `D_*` with `-ΔV = 1/σ_c` and `V = U` on `∂D_*`.
enum VSolution {
    Radial { nodes: Vec<f64>, values: Vec<f64> },
    Grid { grid: CartesianGrid, active: Vec<bool>, values: Vec<f64> },
}

fn solve_v(p: &HopfParams, profile: &RadialProfile, x0: &[f64]) -> Result<VSolution> {
    let ds = &p.d_star;
    let centered = distance(&ds.center, x0) <= 1e-12 * ds.radius;
    if p.dimension == 3 && centered {
        let n = (ds.radius / p.h).ceil() as usize;
        if n < 8 {
            return Err(Error::UnderResolved(format!("{n} radial cells across D_*")));
        }
        let nodes: Vec<f64> = (0..=n).map(|i| ds.radius * i as f64 / n as f64).collect();
        let grid = RadialGrid::new(3, nodes.clone(), vec![n], vec![1.0], 1)?;
        let vol = grid.volumes();
        let g: Vec<f64> = nodes.windows(2).map(|w| (0.5 * (w[0] + w[1])).powi(2) / (w[1] - w[0])).collect();
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            let left = if i > 0 { g[i - 1] } else { 0.0 };
            diag[i] = left + g[i];
            lower[i] = -left;
            upper[i] = -g[i];
            rhs[i] = vol[i] / p.sigma_c;
        }
        let boundary = profile.value(ds.radius);
        rhs[n - 1] += g[n - 1] * boundary;
        Tridiagonal::factor(&lower, &diag, &upper)?.solve_in_place(&mut rhs);
        rhs.push(boundary);
        return Ok(VSolution::Radial { nodes, values: rhs });
    }
    if p.dimension != 2 {
        return Err(Error::InvalidArgument("off-center components are solved on the plane only".into()));
    }
    let grid = CartesianGrid::centered([ds.center[0], ds.center[1]], ds.radius + 3.0 * p.h, p.h)?;
    let medium = DiskMedium { disk: ds, sigma: 1.0 };
    let op = assemble(&medium, &grid, OperatorOptions::default(), false)?;
    let h2 = p.h * p.h;
    let source: Vec<f64> = op.active.iter().map(|&a| if a { h2 / p.sigma_c } else { 0.0 }).collect();
    let values = solve_steady(&op, &source, |y| profile.value(distance(&y, x0)))?;
    Ok(VSolution::Grid { grid, active: op.active.clone(), values })
}

/// Point of `∂D_*` at distance `rho` from `x0`, in the plane of `x0` and the center.
fn boundary_point_at(x0: &[f64], d_star: &Ball, rho: f64) -> Vec<f64> {
    let n = x0.len();
    let e_vec: Vec<f64> = d_star.center.iter().zip(x0).map(|(c, x)| c - x).collect();
    let e = norm(&e_vec);
    let (u, v) = if e <= 1e-12 * d_star.radius {
        let mut u = vec![0.0; n];
        u[0] = 1.0;
        (u, vec![0.0; n])
    } else {
        let u: Vec<f64> = e_vec.iter().map(|a| a / e).collect();
        let mut v = vec![0.0; n];
        // Any unit vector orthogonal to u.
        let k = if u[0].abs() < 0.9 { 0 } else { 1 };
        v[k] = 1.0;
        let dot = v[k] * u[k];
        let mut v: Vec<f64> = v.iter().zip(&u).map(|(a, b)| a - dot * b).collect();
        let vn = norm(&v);
        v.iter_mut().for_each(|a| *a /= vn);
        (u, v)
    };
    // |c + R(cos ψ u + sin ψ v) - x0|² = e² + R² + 2eR cos ψ.
    let r = d_star.radius;
    let cos = if e <= 1e-12 * r { 1.0 } else { ((rho * rho - e * e - r * r) / (2.0 * e * r)).clamp(-1.0, 1.0) };
    let sin = (1.0 - cos * cos).max(0.0).sqrt();
    (0..n).map(|i| d_star.center[i] + r * (cos * u[i] + sin * v[i])).collect()
}

/// Runs one case of the comparison argument: builds `U` and `Û`, solves for
/// `V` in `D_*`, and compares `Û` with `V` inside `D_*` and in the normal
/// derivative at the anchor point.
///
/// When `x_0 ∈ D_*` the samples within `4h` of `x_0` are skipped, since `Û`
/// is singular there; `V` itself is solved on all of `D_*`.
pub fn hopf_case_analysis(p: &HopfParams) -> Result<HopfReport> {
    check_dimension(p.dimension)?;
    SceneConfig {
        dimension: p.dimension,
        outer: p.domain.clone(),
        cores: vec![],
        sigma: crate::Conductivities { core: p.sigma_c, shell: p.sigma_s, medium: 1.0 },
        surface_offset: 0.0,
    }
    .validate()?;
    p.d_star.validate(p.dimension)?;
    if !(p.sigma_s > 0.0 && p.sigma_c > 0.0 && p.h > 0.0) {
        return Err(Error::InvalidArgument("conductivities and h must be positive".into()));
    }
    let x0 = p.domain.center.clone();
    let profile = case_profile(p)?;
    let (inner, outer) = match p.domain.kind {
        OuterKind::Ball => (0.0, p.domain.radii[0]),
        OuterKind::Shell => (p.domain.radii[0], p.domain.radii[1]),
    };
    let (dlo, dhi) = distance_range(&x0, &p.d_star);
    let contains_x0 = p.d_star.contains(&x0);
    if dhi >= outer || (p.domain.kind == OuterKind::Shell && (contains_x0 || dlo <= inner)) {
        return Err(Error::InvalidArgument("the closure of D_* must lie inside Omega".into()));
    }
    if matches!(p.case, HopfCase::Ii | HopfCase::Iii) && !contains_x0 {
        return Err(Error::CaseMismatch("cases (ii) and (iii) need the singular point inside D_*".into()));
    }
    let variant = match p.case {
        HopfCase::I | HopfCase::Shell => HatVariant::CaseIOrShell,
        HopfCase::Ii => HatVariant::CaseIi,
        HopfCase::Iii => HatVariant::CaseIii,
    };
    let hat = hat_u(&profile, p.sigma_c, &x0, &p.d_star, variant)?;
    let expected_sign = match p.case {
        HopfCase::Ii => 1.0,
        HopfCase::Iii => -1.0,
        HopfCase::I | HopfCase::Shell => {
            if p.sigma_s > p.sigma_c {
                1.0
            } else if p.sigma_s < p.sigma_c {
                -1.0
            } else {
                0.0
            }
        }
    };
    let excision = if contains_x0 && p.case != HopfCase::I { 4.0 * p.h } else { 0.0 };
    let v = solve_v(p, &profile, &x0)?;
    let mut min_diff = f64::INFINITY;
    let mut max_diff = f64::NEG_INFINITY;
    let mut samples = 0;
    let mut visit = |x: &[f64], value: f64| {
        let r = distance(x, &x0);
        if r < excision || r == 0.0 && contains_x0 && p.case != HopfCase::I {
            return;
        }
        let d = hat.value(r) - value;
        min_diff = min_diff.min(d);
        max_diff = max_diff.max(d);
        samples += 1;
    };
    let x_star = boundary_point_at(&x0, &p.d_star, hat.anchor_radius);
    let nu: Vec<f64> = x_star.iter().zip(&p.d_star.center).map(|(a, c)| (a - c) / p.d_star.radius).collect();
    let gap = match &v {
        VSolution::Radial { nodes, values } => {
            let mut x = x0.clone();
            for (r, val) in nodes.iter().zip(values).take(nodes.len() - 1) {
                x[0] = x0[0] + r;
                visit(&x, *val);
            }
            let n = nodes.len() - 1;
            let dr = nodes[n] - nodes[n - 1];
            let d = |i: usize| hat.value(nodes[i]) - values[i];
            (3.0 * d(n) - 4.0 * d(n - 1) + d(n - 2)) / (2.0 * dr)
        }
        VSolution::Grid { grid, active, values } => {
            for c in 0..grid.len() {
                if active[c] {
                    visit(&grid.cell_center(c), values[c]);
                }
            }
            let s = [0.0, 2.0 * p.h, 4.0 * p.h];
            let mut f = [0.0; 3];
            for k in 0..3 {
                let y: Vec<f64> = x_star.iter().zip(&nu).map(|(a, b)| a - s[k] * b).collect();
                let vy = if k == 0 {
                    profile.value(distance(&y, &x0))
                } else {
                    grid.interpolate(values, &y).ok_or(Error::OutOfHull { r: norm(&y), t: f64::INFINITY })?
                };
                f[k] = hat.value(distance(&y, &x0)) - vy;
            }
            // g(s) = (Û - V)(x_* - s ν); the outward derivative is -g'(0).
            -(-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * s[1])
        }
    };
    if samples == 0 {
        return Err(Error::UnderResolved("no samples in D_*".into()));
    }
    let tolerance = hopf_tolerance(p.h);
    let strict = if expected_sign > 0.0 {
        min_diff > 0.0
    } else if expected_sign < 0.0 {
        max_diff < 0.0
    } else {
        false
    };
    let size = min_diff.abs().max(max_diff.abs());
    let verdict = if size <= tolerance && gap.abs() <= tolerance {
        HopfVerdict::Consistent
    } else if strict && gap.abs() > tolerance {
        HopfVerdict::Contradiction
    } else {
        HopfVerdict::Unclear
    };
    Ok(HopfReport {
        case: p.case,
        profile,
        hat,
        min_diff,
        max_diff,
        gap,
        x_star,
        expected_sign,
        strict,
        tolerance,
        excision_radius: excision,
        samples,
        verdict,
    })
}

// ---------------------------------------------------------------------------
// Discriminator

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING-KEBAB-CASE")]
pub enum Verdict {
    Concentric,
    NonConcentric,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscriminatorOptions {
    pub pass_threshold: f64,
    pub fail_threshold: f64,
    pub window: TimeWindow,
    /// Points on `Γ`.
    pub samples: usize,
    /// Constant `c` of the first-order interface consistency bound `c h`.
    pub residual_constant: f64,
}

impl Default for DiscriminatorOptions {
    fn default() -> Self {
        Self { pass_threshold: 5e-3, fail_threshold: 5e-2, window: TimeWindow::default(), samples: 16, residual_constant: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolutionMetric {
    pub h: f64,
    pub metric: f64,
    pub worst_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscriminatorReport {
    pub verdict: Verdict,
    pub metrics: Vec<ResolutionMetric>,
    pub pass_threshold: f64,
    pub fail_threshold: f64,
    pub residuals: Option<InterfaceResiduals>,
    pub residuals_consistent: bool,
    pub hopf: Option<HopfReport>,
    pub instruction: Option<String>,
}

/// Points on `Γ` used by the discriminator.
pub fn gamma_samples(scene: &SceneConfig, count: usize) -> Result<Vec<Vec<f64>>> {
    let sampling = SurfaceSampling { planar: count, ..Default::default() };
    Ok(scene.parallel_surface_with(scene.surface_offset, sampling)?.into_iter().map(|s| s.point).collect())
}

/// Decides whether the runs behave like a concentric configuration.
///
/// `runs` holds the same scene at two or more resolutions. The verdict is
/// CONCENTRIC when the stationarity metric on `Γ` passes at every resolution,
/// the direct auxiliary solve at the finest spacing has consistent interface
/// traces, and (for a concentric core) the case-(i) comparison is
/// consistent; NON-CONCENTRIC when the metric fails at every resolution; and
/// INCONCLUSIVE otherwise.
pub fn concentricity_discriminator(
    scene: &SceneConfig,
    runs: &[&FieldSeries],
    options: &DiscriminatorOptions,
) -> Result<DiscriminatorReport> {
    if runs.len() < 2 {
        return Err(Error::InvalidArgument("the discriminator needs runs at two resolutions".into()));
    }
    if runs.iter().any(|r| &r.scene != scene) {
        return Err(Error::InvalidArgument("runs belong to a different scene".into()));
    }
    let points = gamma_samples(scene, options.samples)?;
    let mut metrics = Vec::new();
    for run in runs {
        let StationarityReport { metric, worst_time, .. } = stationarity_metric(*run, &points, options.window)?;
        metrics.push(ResolutionMetric { h: run.grid.h, metric, worst_time });
    }
    metrics.sort_by(|a, b| b.h.total_cmp(&a.h));
    let finest = metrics.last().unwrap().h;
    let all_pass = metrics.iter().all(|m| m.metric <= options.pass_threshold);
    let all_fail = metrics.iter().all(|m| m.metric > options.fail_threshold);
    let refine = format!("refine h to {} and rerun", finest / 2.0);

    let mut report = DiscriminatorReport {
        verdict: Verdict::Inconclusive,
        metrics,
        pass_threshold: options.pass_threshold,
        fail_threshold: options.fail_threshold,
        residuals: None,
        residuals_consistent: false,
        hopf: None,
        instruction: None,
    };
    if all_fail {
        report.verdict = Verdict::NonConcentric;
        return Ok(report);
    }
    if !all_pass {
        report.instruction = Some(format!("metric between thresholds or resolutions disagree; {refine}"));
        return Ok(report);
    }
    if runs[0].kind == ProblemKind::Ibvp {
        let fine = runs.iter().min_by(|a, b| a.grid.h.total_cmp(&b.grid.h)).unwrap();
        let aux = solve_auxiliary_grid(scene, &fine.grid)?;
        report.residuals_consistent = aux.residuals.consistent(finest, options.residual_constant);
        report.residuals = Some(aux.residuals);
    } else {
        report.residuals_consistent = true;
    }
    let hopf_ok = if scene.is_single_phase() {
        true
    } else if scene.is_concentric() && scene.outer.kind == OuterKind::Ball {
        let core = scene.cores[0].clone();
        let hopf = hopf_case_analysis(&HopfParams {
            case: HopfCase::I,
            dimension: scene.dimension,
            sigma_s: scene.sigma.shell,
            sigma_c: scene.sigma.core,
            domain: scene.outer.clone(),
            c1: None,
            d_star: core,
            h: finest,
        })?;
        let ok = hopf.verdict == HopfVerdict::Consistent;
        report.hopf = Some(hopf);
        ok
    } else {
        false
    };
    if report.residuals_consistent && hopf_ok {
        report.verdict = Verdict::Concentric;
    } else {
        report.instruction = Some(format!("metric passes but the comparison checks do not confirm; {refine}"));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Conductivities;

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
    fn closed_form_disk_values() {
        let c = radial_closed_form(&disk_with_core(), ProblemKind::Ibvp).unwrap();
        assert_eq!(c.case, CaseTag::I);
        assert_eq!(c.profile.c1, 0.0);
        assert!((c.profile.c2 - 0.25).abs() < 1e-15);
        assert!((c.value(0.5) - 0.1875).abs() < 1e-15);
        assert!((c.value(0.0) - 0.21875).abs() < 1e-15);
    }

    #[test]
    fn closed_form_whole_space_ball() {
        let s = SceneConfig {
            dimension: 3,
            outer: DomainSpec::ball(vec![0.0; 3], 1.0),
            cores: vec![],
            sigma: Conductivities::uniform(1.0),
            surface_offset: 0.0,
        };
        let c = radial_closed_form(&s, ProblemKind::Cauchy).unwrap();
        assert!((c.profile.c2 - 0.5).abs() < 1e-15);
        assert!((c.c3.unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((c.value(2.0) - 1.0 / 6.0).abs() < 1e-15);
        // Continuity and flux balance at the boundary.
        assert!((c.profile.value(1.0) - c.value(1.0 + 1e-15)).abs() < 1e-12);
        assert!((c.profile.derivative(1.0) + 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn shell_profiles() {
        let mut s = disk_with_core();
        s.cores.clear();
        s.outer = DomainSpec::shell(vec![0.0, 0.0], 1.0, 2.0);
        let c = radial_closed_form(&s, ProblemKind::Ibvp).unwrap();
        assert!(c.profile.c1 < 0.0);
        assert!(c.profile.value(1.0).abs() < 1e-14 && c.profile.value(2.0).abs() < 1e-14);
        let s3 = SceneConfig { dimension: 3, outer: DomainSpec::shell(vec![0.0; 3], 1.0, 2.0), ..s };
        let c = radial_closed_form(&s3, ProblemKind::Cauchy).unwrap();
        assert!(c.profile.derivative(1.0).abs() < 1e-14);
        assert!((c.c4.unwrap() - c.profile.value(1.0)).abs() < 1e-15);
        assert!((c.c3.unwrap() / 2.0 - c.profile.value(2.0)).abs() < 1e-14);
        assert!(radial_closed_form(&SceneConfig { dimension: 2, ..s3.clone() }, ProblemKind::Cauchy).is_err());
    }

    #[test]
    fn critical_radius_is_stationary() {
        for n in [2, 3] {
            let p = RadialProfile::vanishing_at(n, 1.5, -0.05, 1.0);
            let rc = p.critical_radius().unwrap();
            assert!(p.derivative(rc).abs() < 1e-13);
        }
    }

    #[test]
    fn hat_identities() {
        let p = RadialProfile::vanishing_at(3, 1.0, 0.1, 1.0);
        let ball = Ball::new(vec![0.1, 0.0, 0.0], 0.5);
        let equal = hat_u(&p, 1.0, &[0.0; 3], &ball, HatVariant::CaseIi).unwrap();
        for r in [0.2, 0.4, 0.7] {
            assert!((equal.value(r) - p.value(r)).abs() < 1e-15);
        }
        for sigma_c in [0.5, 2.0] {
            let hat = hat_u(&p, sigma_c, &[0.0; 3], &ball, HatVariant::CaseIi).unwrap();
            let (lo, hi) = (0.4, 0.6);
            for r in [lo, hi] {
                assert!(hat.value(r) - p.value(r) >= -1e-15);
            }
            assert!((hat.derivative(0.5) - p.derivative(0.5) / sigma_c).abs() < 1e-15);
        }
        assert!(hat_u(&p, 2.0, &[0.0; 3], &ball, HatVariant::CaseIii).is_err());
    }

    #[test]
    fn boundary_point_has_requested_distance() {
        let ball = Ball::new(vec![0.3, 0.1], 0.4);
        for rho in [0.0163, 0.2, 0.7162] {
            let x = boundary_point_at(&[0.0, 0.0], &ball, rho);
            let (lo, hi) = distance_range(&[0.0, 0.0], &ball);
            let target = rho.clamp(lo, hi);
            assert!((norm(&x) - target).abs() < 1e-12);
            assert!((distance(&x, &ball.center) - 0.4).abs() < 1e-12);
        }
    }

    #[test]
    fn extrapolation_is_exact_for_quadratics() {
        let f = |s: f64| 1.0 - 2.0 * s + 3.0 * s * s;
        let s = [0.1, 0.2, 0.35];
        let (v, d) = extrapolate(s, [f(s[0]), f(s[1]), f(s[2])]);
        assert!((v - 1.0).abs() < 1e-12 && (d + 2.0).abs() < 1e-11);
    }
}
