//! Analytic scene geometry: a ball or spherical shell `Omega`, ball-shaped
//! core components, and the surfaces parallel to the boundary.

use crate::numerics::unit_ball_volume;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Relative tolerance for "point lies on a sphere" tests.
const ON_BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Self {
        Self { center, radius }
    }

    pub fn dimension(&self) -> usize {
        self.center.len()
    }

    /// Strict containment of a point.
    pub fn contains(&self, x: &[f64]) -> bool {
        distance(x, &self.center) < self.radius
    }

    pub fn validate(&self, dimension: usize) -> Result<()> {
        if self.center.len() != dimension {
            return Err(Error::InvalidScene(format!(
                "ball center has {} coordinates, expected {dimension}",
                self.center.len()
            )));
        }
        if !(self.radius > 0.0) || !self.radius.is_finite() || self.center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidScene(format!("ball radius {} must be positive", self.radius)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OuterKind {
    Ball,
    Shell,
}

/// The outer domain: `radii = [rho]` for a ball, `[rho_minus, rho_plus]` for a shell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub kind: OuterKind,
    pub center: Vec<f64>,
    pub radii: Vec<f64>,
}

impl DomainSpec {
    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        Self { kind: OuterKind::Ball, center, radii: vec![radius] }
    }

    pub fn shell(center: Vec<f64>, inner: f64, outer: f64) -> Self {
        Self { kind: OuterKind::Shell, center, radii: vec![inner, outer] }
    }

    /// Radius of the outer boundary sphere.
    pub fn outer_radius(&self) -> f64 {
        *self.radii.last().unwrap_or(&0.0)
    }

    /// Radius of the inner boundary sphere of a shell.
    pub fn inner_radius(&self) -> Option<f64> {
        match self.kind {
            OuterKind::Ball => None,
            OuterKind::Shell => self.radii.first().copied(),
        }
    }
}

/// Conductivities of the core, the shell `Omega \ D` and the medium outside `Omega`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Conductivities {
    pub core: f64,
    pub shell: f64,
    pub medium: f64,
}

impl Conductivities {
    pub fn uniform(sigma: f64) -> Self {
        Self { core: sigma, shell: sigma, medium: sigma }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub dimension: usize,
    pub outer: DomainSpec,
    #[serde(default)]
    pub cores: Vec<Ball>,
    pub sigma: Conductivities,
    /// Depth `R` of the test surface below the boundary; zero disables it.
    #[serde(default)]
    pub surface_offset: f64,
}

/// Which medium a point belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Core,
    Shell,
    Medium,
}

/// A component sphere of a boundary or parallel surface.
///
/// `orientation` is `+1` when `Omega` lies inside the sphere (outer boundary)
/// and `-1` when it lies outside (inner boundary of a shell).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereComponent {
    pub radius: f64,
    pub orientation: f64,
}

/// A point of a boundary or parallel surface with its differential data.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSample {
    pub point: Vec<f64>,
    /// Outward unit normal (pointing towards the nearest boundary piece).
    pub normal: Vec<f64>,
    /// Principal curvatures with respect to the inward normal.
    pub curvatures: Vec<f64>,
}

/// Angular sampling density for parallel surfaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceSampling {
    /// Points per circle in 2D.
    pub planar: usize,
    /// Polar rings in 3D.
    pub polar: usize,
    /// Points per ring in 3D.
    pub azimuthal: usize,
}

impl Default for SurfaceSampling {
    fn default() -> Self {
        Self { planar: 256, polar: 16, azimuthal: 32 }
    }
}

/// Product of `1/R - kappa_j`; a non-positive factor is reported as degenerate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weingarten {
    Finite(f64),
    Degenerate,
}

impl Weingarten {
    pub fn value(self) -> Option<f64> {
        match self {
            Weingarten::Finite(v) => Some(v),
            Weingarten::Degenerate => None,
        }
    }
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let n = self.dimension;
        if n != 2 && n != 3 {
            return Err(Error::InvalidDimension(n));
        }
        if self.outer.center.len() != n || self.outer.center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidScene(format!("outer center must have {n} finite coordinates")));
        }
        let radii = &self.outer.radii;
        let expected = match self.outer.kind {
            OuterKind::Ball => 1,
            OuterKind::Shell => 2,
        };
        if radii.len() != expected {
            return Err(Error::InvalidScene(format!("{:?} needs {expected} radii", self.outer.kind)));
        }
        if radii.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(Error::InvalidScene("radii must be positive".into()));
        }
        if self.outer.kind == OuterKind::Shell && !(radii[0] < radii[1]) {
            return Err(Error::InvalidScene("shell needs inner radius < outer radius".into()));
        }
        let s = self.sigma;
        for (name, v) in [("core", s.core), ("shell", s.shell), ("medium", s.medium)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidScene(format!("conductivity {name} = {v} must be positive")));
            }
        }
        for (i, core) in self.cores.iter().enumerate() {
            core.validate(n)?;
            let d = distance(&core.center, &self.outer.center);
            let inside = match self.outer.kind {
                OuterKind::Ball => d + core.radius < radii[0],
                OuterKind::Shell => d - core.radius > radii[0] && d + core.radius < radii[1],
            };
            if !inside {
                return Err(Error::InvalidScene(format!("closure of core {i} is not inside the domain")));
            }
            for (j, other) in self.cores.iter().enumerate().skip(i + 1) {
                if distance(&core.center, &other.center) <= core.radius + other.radius {
                    return Err(Error::InvalidScene(format!("cores {i} and {j} are not disjoint")));
                }
            }
        }
        if !(self.surface_offset >= 0.0) || !self.surface_offset.is_finite() {
            return Err(Error::InvalidScene("surface offset must be non-negative".into()));
        }
        if self.surface_offset > 0.0 {
            if self.surface_offset >= self.inradius() {
                return Err(Error::EmptySurface { offset: self.surface_offset });
            }
            self.check_near_boundary_condition()?;
        }
        Ok(())
    }

    pub fn outer_center(&self) -> &[f64] {
        &self.outer.center
    }

    /// Half the thickness of a shell, the radius of a ball.
    pub fn inradius(&self) -> f64 {
        match self.outer.kind {
            OuterKind::Ball => self.outer.radii[0],
            OuterKind::Shell => 0.5 * (self.outer.radii[1] - self.outer.radii[0]),
        }
    }

    pub fn volume(&self) -> f64 {
        let w = unit_ball_volume(self.dimension);
        let n = self.dimension as i32;
        match self.outer.kind {
            OuterKind::Ball => w * self.outer.radii[0].powi(n),
            OuterKind::Shell => w * (self.outer.radii[1].powi(n) - self.outer.radii[0].powi(n)),
        }
    }

    /// True when the conductivity is the same in the cores and the shell.
    pub fn is_single_phase(&self) -> bool {
        self.cores.is_empty() || self.sigma.core == self.sigma.shell
    }

    /// True when every core is centered at the center of `Omega`.
    ///
    /// A shell admits no concentric core, so concentric shells are core-free.
    pub fn is_concentric(&self) -> bool {
        let scale = self.outer.outer_radius();
        self.cores.len() <= 1
            && self
                .cores
                .iter()
                .all(|c| distance(&c.center, &self.outer.center) <= 1e-12 * scale)
    }

    /// Radius of the (single) concentric core, if any.
    pub fn core_radius(&self) -> Option<f64> {
        self.cores.first().map(|c| c.radius)
    }

    /// Boundary spheres of `Omega`, outer first.
    pub fn boundary_components(&self) -> Vec<SphereComponent> {
        let r = &self.outer.radii;
        match self.outer.kind {
            OuterKind::Ball => vec![SphereComponent { radius: r[0], orientation: 1.0 }],
            OuterKind::Shell => vec![
                SphereComponent { radius: r[1], orientation: 1.0 },
                SphereComponent { radius: r[0], orientation: -1.0 },
            ],
        }
    }

    /// Signed distance to the boundary, positive inside `Omega`.
    pub fn signed_distance(&self, x: &[f64]) -> f64 {
        self.signed_distance_radial(distance(x, &self.outer.center))
    }

    /// Signed distance as a function of the distance to the center of `Omega`.
    pub fn signed_distance_radial(&self, r: f64) -> f64 {
        let radii = &self.outer.radii;
        match self.outer.kind {
            OuterKind::Ball => radii[0] - r,
            OuterKind::Shell => (r - radii[0]).min(radii[1] - r),
        }
    }

    pub fn region(&self, x: &[f64]) -> Region {
        if self.signed_distance(x) <= 0.0 {
            Region::Medium
        } else if self.cores.iter().any(|c| c.contains(x)) {
            Region::Core
        } else {
            Region::Shell
        }
    }

    pub fn sigma_of(&self, region: Region) -> f64 {
        match region {
            Region::Core => self.sigma.core,
            Region::Shell => self.sigma.shell,
            Region::Medium => self.sigma.medium,
        }
    }

    pub fn sigma_at(&self, x: &[f64]) -> f64 {
        self.sigma_of(self.region(x))
    }

    /// Region at radius `r` in a concentric scene.
    pub fn region_radial(&self, r: f64) -> Region {
        if self.signed_distance_radial(r) <= 0.0 {
            Region::Medium
        } else if self.core_radius().is_some_and(|a| r < a) {
            Region::Core
        } else {
            Region::Shell
        }
    }

    /// Distance from `x` to the closure of the core set (infinite without cores).
    pub fn distance_to_cores(&self, x: &[f64]) -> f64 {
        self.cores
            .iter()
            .map(|c| (distance(x, &c.center) - c.radius).max(0.0))
            .fold(f64::INFINITY, f64::min)
    }

    /// Checks `dist(x, boundary) <= dist(x, closure of D)` on the test surface.
    ///
    /// On a parallel sphere of radius `a` the nearest point to a core centered
    /// at distance `d` from the center is at distance `|a - d| - r`.
    pub fn check_near_boundary_condition(&self) -> Result<()> {
        let depth = self.surface_offset;
        for comp in self.parallel_components(depth)? {
            for (j, core) in self.cores.iter().enumerate() {
                let d = distance(&core.center, &self.outer.center);
                let gap = (comp.radius - d).abs() - core.radius;
                if gap < depth {
                    return Err(Error::InvalidScene(format!(
                        "test surface at depth {depth} is closer to core {j} (distance {gap}) than to the boundary"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Spheres forming the parallel surface at depth `s`.
    pub fn parallel_components(&self, s: f64) -> Result<Vec<SphereComponent>> {
        if !(s > 0.0) || s >= self.inradius() {
            return Err(Error::EmptySurface { offset: s });
        }
        Ok(self
            .boundary_components()
            .into_iter()
            .map(|c| SphereComponent { radius: c.radius - c.orientation * s, orientation: c.orientation })
            .collect())
    }

    fn locate_on_boundary(&self, y: &[f64]) -> Result<SphereComponent> {
        if y.len() != self.dimension {
            return Err(Error::InvalidArgument(format!("point has {} coordinates", y.len())));
        }
        let r = distance(y, &self.outer.center);
        let mut best: Option<(f64, SphereComponent)> = None;
        for comp in self.boundary_components() {
            let miss = (r - comp.radius).abs();
            if best.as_ref().map_or(true, |(m, _)| miss < *m) {
                best = Some((miss, comp));
            }
        }
        let (miss, comp) = best.expect("domain has a boundary");
        if miss > ON_BOUNDARY_TOL * comp.radius.max(1.0) {
            return Err(Error::NotOnBoundary { distance: miss });
        }
        Ok(comp)
    }

    /// Outward unit normal of `Omega` at a boundary point.
    pub fn boundary_normal(&self, y: &[f64]) -> Result<Vec<f64>> {
        let comp = self.locate_on_boundary(y)?;
        Ok(radial_direction(y, &self.outer.center, comp.orientation))
    }

    /// Principal curvatures at a boundary point with respect to the inward normal.
    pub fn principal_curvatures(&self, y: &[f64]) -> Result<Vec<f64>> {
        let comp = self.locate_on_boundary(y)?;
        Ok(vec![comp.orientation / comp.radius; self.dimension - 1])
    }

    pub fn weingarten_product(&self, y: &[f64], depth: f64) -> Result<Weingarten> {
        if !(depth > 0.0) || !depth.is_finite() {
            return Err(Error::InvalidArgument(format!("depth {depth} must be positive")));
        }
        Ok(weingarten_of(&self.principal_curvatures(y)?, depth))
    }

    /// Uniform angular samples of `{x in Omega : d*(x) = s}` with the default density.
    pub fn parallel_surface(&self, s: f64) -> Result<Vec<SurfaceSample>> {
        self.parallel_surface_with(s, SurfaceSampling::default())
    }

    pub fn parallel_surface_with(&self, s: f64, sampling: SurfaceSampling) -> Result<Vec<SurfaceSample>> {
        let mut out = Vec::new();
        for comp in self.parallel_components(s)? {
            for dir in sphere_directions(self.dimension, sampling) {
                let point: Vec<f64> =
                    self.outer.center.iter().zip(&dir).map(|(c, d)| c + comp.radius * d).collect();
                let normal: Vec<f64> = dir.iter().map(|d| d * comp.orientation).collect();
                let curvatures = vec![comp.orientation / comp.radius; self.dimension - 1];
                out.push(SurfaceSample { point, normal, curvatures });
            }
        }
        Ok(out)
    }

    /// Which boundary sphere a ball touches, if it lies in the closure of
    /// `Omega` and touches the boundary at exactly one point.
    pub fn tangency(&self, ball: &Ball) -> Result<SphereComponent> {
        ball.validate(self.dimension)?;
        let d = distance(&ball.center, &self.outer.center);
        let r = ball.radius;
        let tol = ON_BOUNDARY_TOL * self.outer.outer_radius();
        let radii = &self.outer.radii;
        let (touch, comp) = match self.outer.kind {
            OuterKind::Ball => {
                let gap = radii[0] - (d + r);
                if gap < -tol {
                    return Err(Error::BallOutside(format!("ball sticks out of the domain by {}", -gap)));
                }
                (gap.abs() <= tol && d > tol, SphereComponent { radius: radii[0], orientation: 1.0 })
            }
            OuterKind::Shell => {
                let outer_gap = radii[1] - (d + r);
                let inner_gap = (d - r) - radii[0];
                if outer_gap < -tol || inner_gap < -tol {
                    return Err(Error::BallOutside("ball leaves the shell".into()));
                }
                match (outer_gap.abs() <= tol, inner_gap.abs() <= tol) {
                    (true, false) => (true, SphereComponent { radius: radii[1], orientation: 1.0 }),
                    (false, true) => (true, SphereComponent { radius: radii[0], orientation: -1.0 }),
                    _ => (false, SphereComponent { radius: radii[1], orientation: 1.0 }),
                }
            }
        };
        if !touch {
            return Err(Error::NotTangent("ball does not touch the boundary at a single point".into()));
        }
        Ok(comp)
    }

    /// The contact point of a tangent ball with the boundary.
    pub fn contact_point(&self, ball: &Ball) -> Result<Vec<f64>> {
        let comp = self.tangency(ball)?;
        let dir = radial_direction(&ball.center, &self.outer.center, 1.0);
        Ok(self.outer.center.iter().zip(&dir).map(|(c, d)| c + comp.radius * d).collect())
    }

    /// `H^{N-1}` measure of the parallel surface at depth `s` inside a tangent ball.
    pub fn tube_slice_measure(&self, s: f64, ball: &Ball) -> Result<f64> {
        self.tangency(ball)?;
        if !(s > 0.0) || s >= self.inradius() {
            return Ok(0.0);
        }
        Ok(self
            .parallel_components(s)?
            .iter()
            .map(|comp| sphere_ball_measure(self.dimension, &self.outer.center, comp.radius, ball))
            .sum())
    }

    /// Least-squares slope of the tube slice measure against `√s` over the
    /// two decades `s ∈ [s_min, 100 s_min]`.
    pub fn tube_slope(&self, ball: &Ball, s_min: f64) -> Result<f64> {
        if !(s_min > 0.0) || 100.0 * s_min >= self.inradius() {
            return Err(Error::InvalidArgument(format!("tube fit window starting at {s_min} leaves the domain")));
        }
        let count = 41;
        let mut x = Vec::with_capacity(count);
        let mut y = Vec::with_capacity(count);
        for k in 0..count {
            let s = s_min * 100f64.powf(k as f64 / (count - 1) as f64);
            x.push(s.sqrt());
            y.push(self.tube_slice_measure(s, ball)?);
        }
        Ok(crate::numerics::fit_line(&x, &y)?.slope)
    }

    /// Ball of radius `r` inside `Omega` touching the boundary only at `y`.
    pub fn tangent_ball(&self, y: &[f64], r: f64) -> Result<Ball> {
        let comp = self.locate_on_boundary(y)?;
        let bound = match self.outer.kind {
            OuterKind::Ball => comp.radius,
            OuterKind::Shell => self.inradius(),
        };
        if !(r > 0.0) || r >= bound {
            return Err(Error::RadiusTooLarge { radius: r, bound });
        }
        let normal = radial_direction(y, &self.outer.center, comp.orientation);
        let foot: Vec<f64> =
            self.outer.center.iter().zip(&radial_direction(y, &self.outer.center, 1.0)).map(|(c, d)| c + comp.radius * d).collect();
        Ok(Ball { center: foot.iter().zip(&normal).map(|(p, n)| p - r * n).collect(), radius: r })
    }

    /// First parameter `s` in `(0, 1]` at which the segment `p -> q` crosses the boundary of `Omega`.
    pub fn boundary_crossing(&self, p: &[f64], q: &[f64]) -> Option<f64> {
        self.boundary_components()
            .iter()
            .filter_map(|c| segment_sphere_crossing(p, q, &self.outer.center, c.radius))
            .reduce(f64::min)
    }

    /// First parameter in `(0, 1]` at which `p -> q` crosses a core boundary.
    pub fn core_crossing(&self, p: &[f64], q: &[f64]) -> Option<f64> {
        self.cores
            .iter()
            .filter_map(|c| segment_sphere_crossing(p, q, &c.center, c.radius))
            .reduce(f64::min)
    }
}

/// `prod_j (1/R - kappa_j)`, degenerate when some factor is not positive.
pub fn weingarten_of(curvatures: &[f64], depth: f64) -> Weingarten {
    let mut prod = 1.0;
    for k in curvatures {
        let f = 1.0 / depth - k;
        if f <= 1e-14 / depth {
            return Weingarten::Degenerate;
        }
        prod *= f;
    }
    Weingarten::Finite(prod)
}

fn radial_direction(x: &[f64], center: &[f64], orientation: f64) -> Vec<f64> {
    let d = distance(x, center);
    if d == 0.0 {
        let mut e = vec![0.0; x.len()];
        e[0] = orientation;
        return e;
    }
    x.iter().zip(center).map(|(a, c)| orientation * (a - c) / d).collect()
}

/// Deterministic unit directions: `planar` angles in 2D, a polar-by-azimuthal
/// grid with midpoint polar angles in 3D.
pub fn sphere_directions(dimension: usize, sampling: SurfaceSampling) -> Vec<Vec<f64>> {
    if dimension == 2 {
        (0..sampling.planar)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / sampling.planar as f64;
                vec![a.cos(), a.sin()]
            })
            .collect()
    } else {
        let mut out = Vec::with_capacity(sampling.polar * sampling.azimuthal);
        for i in 0..sampling.polar {
            let th = PI * (i as f64 + 0.5) / sampling.polar as f64;
            for j in 0..sampling.azimuthal {
                let ph = 2.0 * PI * j as f64 / sampling.azimuthal as f64;
                out.push(vec![th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]);
            }
        }
        out
    }
}

/// Measure of the part of the sphere `{|z - c| = a}` inside the open ball.
///
/// With `d` the distance between centers, the sphere point at polar angle
/// `alpha` from the ball direction is inside when
/// `cos(alpha) > (a^2 + d^2 - r^2) / (2 a d)`; the part is an arc of length
/// `2 a alpha` in 2D and a cap of area `2 pi a^2 (1 - cos alpha)` in 3D.
pub fn sphere_ball_measure(dimension: usize, center: &[f64], a: f64, ball: &Ball) -> f64 {
    if !(a > 0.0) {
        return 0.0;
    }
    let d = distance(center, &ball.center);
    let r = ball.radius;
    let full = match dimension {
        2 => 2.0 * PI * a,
        _ => 4.0 * PI * a * a,
    };
    if d == 0.0 {
        return if a < r { full } else { 0.0 };
    }
    let cos_alpha = ((a * a + d * d - r * r) / (2.0 * a * d)).clamp(-1.0, 1.0);
    match dimension {
        2 => 2.0 * a * cos_alpha.acos(),
        _ => 2.0 * PI * a * a * (1.0 - cos_alpha),
    }
}

/// Smallest `s` in `(0, 1]` with `|p + s (q - p) - c| = radius`.
pub fn segment_sphere_crossing(p: &[f64], q: &[f64], c: &[f64], radius: f64) -> Option<f64> {
    let mut aa = 0.0;
    let mut bb = 0.0;
    let mut cc = -radius * radius;
    for i in 0..p.len() {
        let dir = q[i] - p[i];
        let off = p[i] - c[i];
        aa += dir * dir;
        bb += 2.0 * dir * off;
        cc += off * off;
    }
    if aa == 0.0 {
        return None;
    }
    let disc = bb * bb - 4.0 * aa * cc;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    // Numerically stable pair of roots.
    let qv = -0.5 * (bb + bb.signum() * sq);
    let mut roots = [f64::NAN, f64::NAN];
    if qv != 0.0 {
        roots = [qv / aa, cc / qv];
    } else {
        roots[0] = 0.0;
    }
    roots
        .into_iter()
        .filter(|s| s.is_finite() && *s > 0.0 && *s <= 1.0)
        .reduce(f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk(rho: f64) -> SceneConfig {
        SceneConfig {
            dimension: 2,
            outer: DomainSpec::ball(vec![0.0, 0.0], rho),
            cores: vec![],
            sigma: Conductivities::uniform(1.0),
            surface_offset: 0.0,
        }
    }

    fn shell() -> SceneConfig {
        SceneConfig { outer: DomainSpec::shell(vec![0.0, 0.0], 1.0, 2.0), ..disk(1.0) }
    }

    #[test]
    fn signed_distance_examples() {
        let s = disk(1.0);
        assert_eq!(s.signed_distance(&[0.0, 0.0]), 1.0);
        assert!((s.signed_distance(&[1.5, 0.0]) + 0.5).abs() < 1e-15);
        assert!((shell().signed_distance(&[1.25, 0.0]) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn curvature_examples() {
        let sphere = SceneConfig {
            dimension: 3,
            outer: DomainSpec::ball(vec![0.0; 3], 2.0),
            ..disk(2.0)
        };
        assert_eq!(sphere.principal_curvatures(&[0.0, 0.0, 2.0]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(disk(1.0).principal_curvatures(&[0.0, 1.0]).unwrap(), vec![1.0]);
        assert_eq!(shell().principal_curvatures(&[0.0, 2.0]).unwrap(), vec![0.5]);
        assert_eq!(shell().principal_curvatures(&[1.0, 0.0]).unwrap(), vec![-1.0]);
        assert!(matches!(disk(1.0).principal_curvatures(&[0.5, 0.0]), Err(Error::NotOnBoundary { .. })));
    }

    #[test]
    fn weingarten_examples() {
        let sphere = SceneConfig { dimension: 3, outer: DomainSpec::ball(vec![0.0; 3], 2.0), ..disk(2.0) };
        assert_eq!(sphere.weingarten_product(&[2.0, 0.0, 0.0], 1.0).unwrap(), Weingarten::Finite(0.25));
        assert_eq!(disk(2.0).weingarten_product(&[0.0, 2.0], 1.0).unwrap(), Weingarten::Finite(0.5));
        assert_eq!(disk(1.0).weingarten_product(&[1.0, 0.0], 1.0).unwrap(), Weingarten::Degenerate);
    }

    #[test]
    fn parallel_surface_examples() {
        let pts = disk(1.0).parallel_surface(0.25).unwrap();
        assert_eq!(pts.len(), 256);
        for p in &pts {
            assert!((norm(&p.point) - 0.75).abs() < 1e-15);
        }
        let pts = shell().parallel_surface(0.25).unwrap();
        let mut radii: Vec<f64> = pts.iter().map(|p| (norm(&p.point) * 1e12).round() / 1e12).collect();
        radii.dedup();
        assert_eq!(radii, vec![1.75, 1.25]);
        assert!(matches!(disk(1.0).parallel_surface(1.5), Err(Error::EmptySurface { .. })));
    }

    #[test]
    fn tube_measure_matches_arc_formula() {
        let s = disk(2.0);
        let ball = Ball::new(vec![1.0, 0.0], 1.0);
        let m = s.tube_slice_measure(0.01, &ball).unwrap();
        let a: f64 = 1.99;
        // |z| = a meets |z - (1,0)| = 1 where cos(angle) = a / 2.
        let expected = 2.0 * a * (a / 2.0).acos();
        assert!((m - expected).abs() < 1e-14);
        assert!((m - 0.398166).abs() < 1e-6);
        let far = Ball::new(vec![1.5, 0.0], 0.5);
        assert_eq!(s.tube_slice_measure(1.2, &far).unwrap(), 0.0);
        let interior = Ball::new(vec![0.5, 0.0], 0.5);
        assert!(matches!(s.tube_slice_measure(0.1, &interior), Err(Error::NotTangent(_))));
    }

    #[test]
    fn tube_slope_limit() {
        // 2^{1/2} ω_1 (1/r - 1/ρ)^{-1/2} with ω_1 = 2, r = 1, ρ = 2.
        let slope = disk(2.0).tube_slope(&Ball::new(vec![1.0, 0.0], 1.0), 1e-6).unwrap();
        assert!((slope - 4.0).abs() < 0.02, "{slope}");
    }

    #[test]
    fn tangent_ball_examples() {
        let b = disk(2.0).tangent_ball(&[2.0, 0.0], 1.0).unwrap();
        assert_eq!(b.center, vec![1.0, 0.0]);
        let sphere = SceneConfig { dimension: 3, outer: DomainSpec::ball(vec![0.0; 3], 2.0), ..disk(2.0) };
        let b = sphere.tangent_ball(&[0.0, 0.0, 2.0], 0.5).unwrap();
        assert_eq!(b.center, vec![0.0, 0.0, 1.5]);
        assert!(matches!(disk(2.0).tangent_ball(&[2.0, 0.0], 2.0), Err(Error::RadiusTooLarge { .. })));
        let inner = shell().tangent_ball(&[1.0, 0.0], 0.25).unwrap();
        assert!((inner.center[0] - 1.25).abs() < 1e-15);
    }

    #[test]
    fn near_boundary_condition() {
        let mut s = disk(1.0);
        s.cores = vec![Ball::new(vec![0.0, 0.0], 0.5)];
        s.surface_offset = 0.2;
        assert!(s.validate().is_ok());
        s.surface_offset = 0.25;
        assert!(s.validate().is_ok());
        s.surface_offset = 0.26;
        assert!(s.validate().is_err());
        s.surface_offset = 0.2;
        s.cores[0].center = vec![0.1, 0.0];
        assert!(s.validate().is_ok());
        s.cores[0].center = vec![0.15, 0.0];
        assert!(s.validate().is_err());
    }

    #[test]
    fn validation_rejects_bad_scenes() {
        let mut s = disk(1.0);
        s.sigma.shell = -1.0;
        assert!(s.validate().is_err());
        let mut s = disk(1.0);
        s.cores = vec![Ball::new(vec![0.6, 0.0], 0.5)];
        assert!(s.validate().is_err());
        let mut s = disk(1.0);
        s.dimension = 4;
        assert!(matches!(s.validate(), Err(Error::InvalidDimension(4))));
    }

    #[test]
    fn segment_crossing_fraction() {
        let s = segment_sphere_crossing(&[0.0, 0.0], &[2.0, 0.0], &[0.0, 0.0], 1.0).unwrap();
        assert!((s - 0.5).abs() < 1e-15);
        let s = segment_sphere_crossing(&[1.5, 0.0], &[0.5, 0.0], &[0.0, 0.0], 1.0).unwrap();
        assert!((s - 0.5).abs() < 1e-15);
        assert!(segment_sphere_crossing(&[0.0, 0.0], &[0.2, 0.0], &[0.0, 0.0], 1.0).is_none());
    }
}
