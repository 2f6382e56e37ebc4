//! Explicit sub- and supersolutions for the whole-space problem near the
//! boundary, and numerical checks of the inequalities they satisfy.
//!
//! With `F(ξ) = erfc(ξ/2)/2`, `F_±(ξ) = F(ξ ∓ 2ε)`, `η = d*(x)/√t` and
//! `μ = √σ_m/√σ_s`, the barriers are `v_± = (μ/θ_±) F_±(η/√σ_s)` in `Omega` and
//! `(F_±(η/√σ_m) + θ_± - 1)/θ_±` outside, with `θ_± = 1 + (μ - 1) F_±(0)`.

use crate::analysis::{effective_steps, fit_inverse_time_decay, resolved_from, SolutionField, MIN_EFFECTIVE_STEPS};
use crate::geometry::{sphere_directions, OuterKind, SceneConfig, SurfaceSampling};
use crate::radial::ProblemKind;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// `F(ξ) = (1/2√π) ∫_ξ^∞ e^{-s²/4} ds`.
pub fn profile(xi: f64) -> f64 {
    0.5 * libm::erfc(0.5 * xi)
}

pub fn profile_derivative(xi: f64) -> f64 {
    -(-0.25 * xi * xi).exp() / (2.0 * PI.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }
}

/// Geometry seen by the barriers: a signed distance that is smooth on the
/// collar `|d*| <= ρ_0`.
pub trait CollarGeometry {
    fn dimension(&self) -> usize;
    fn signed_distance(&self, x: &[f64]) -> f64;
    /// `max |Δd*|` over the collar of half-width `rho0`.
    fn laplacian_bound(&self, rho0: f64) -> f64;
    /// `Δd*` at `x` (inside the collar).
    fn laplacian(&self, x: &[f64]) -> f64;
    /// Points with `d* = depth`, several per boundary component.
    fn points_at_depth(&self, depth: f64, rays: usize) -> Vec<Vec<f64>>;
}

fn rays_for(dimension: usize, rays: usize) -> Vec<Vec<f64>> {
    let sampling = match dimension {
        2 => SurfaceSampling { planar: rays.max(1), ..Default::default() },
        _ => SurfaceSampling { polar: rays.max(1), azimuthal: rays.max(1), ..Default::default() },
    };
    sphere_directions(dimension, sampling)
}

impl CollarGeometry for SceneConfig {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn signed_distance(&self, x: &[f64]) -> f64 {
        SceneConfig::signed_distance(self, x)
    }

    fn laplacian_bound(&self, rho0: f64) -> f64 {
        let n1 = self.dimension as f64 - 1.0;
        self.boundary_components().iter().map(|c| n1 / (c.radius - rho0)).fold(0.0, f64::max)
    }

    fn laplacian(&self, x: &[f64]) -> f64 {
        // d* = o (R - r) near the component with orientation o.
        let r = crate::geometry::distance(x, &self.outer.center);
        let comp = self
            .boundary_components()
            .into_iter()
            .min_by(|a, b| (r - a.radius).abs().total_cmp(&(r - b.radius).abs()))
            .expect("domain has a boundary");
        -comp.orientation * (self.dimension as f64 - 1.0) / r
    }

    fn points_at_depth(&self, depth: f64, rays: usize) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        for comp in self.boundary_components() {
            let radius = comp.radius - comp.orientation * depth;
            if radius <= 0.0 {
                continue;
            }
            for dir in rays_for(self.dimension, rays) {
                out.push(self.outer.center.iter().zip(&dir).map(|(c, d)| c + radius * d).collect());
            }
        }
        out
    }
}

/// The half-space `{x_1 < 0}`: a flat boundary with `Δd* = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatBoundary {
    pub dimension: usize,
}

impl CollarGeometry for FlatBoundary {
    fn dimension(&self) -> usize {
        self.dimension
    }
    fn signed_distance(&self, x: &[f64]) -> f64 {
        -x[0]
    }
    fn laplacian_bound(&self, _rho0: f64) -> f64 {
        0.0
    }
    fn laplacian(&self, _x: &[f64]) -> f64 {
        0.0
    }
    fn points_at_depth(&self, depth: f64, rays: usize) -> Vec<Vec<f64>> {
        (0..rays.max(1))
            .map(|k| {
                let mut p = vec![0.0; self.dimension];
                p[0] = -depth;
                if self.dimension > 1 {
                    p[1] = k as f64 * 0.1;
                }
                p
            })
            .collect()
    }
}

/// Constants of the barrier construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierParams {
    pub epsilon: f64,
    pub sigma_s: f64,
    pub sigma_m: f64,
    pub mu: f64,
    pub theta_plus: f64,
    pub theta_minus: f64,
    /// Collar half-width.
    pub rho0: f64,
    /// `max |Δd*|` over the collar.
    pub m_bound: f64,
    /// `(1/max(σ_s, σ_m)) (ε/2M)²`; infinite for a flat boundary.
    pub t1: f64,
    pub e1: Option<f64>,
    pub e2: Option<f64>,
    pub t_eps: Option<f64>,
}

impl BarrierParams {
    /// Parameters for a conductivity pair and a collar geometry.
    pub fn new(geometry: &dyn CollarGeometry, sigma_s: f64, sigma_m: f64, epsilon: f64, rho0: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 0.25) {
            return Err(Error::InvalidArgument(format!("epsilon {epsilon} outside (0, 1/4)")));
        }
        if !(sigma_s > 0.0 && sigma_m > 0.0) {
            return Err(Error::InvalidArgument("conductivities must be positive".into()));
        }
        if !(rho0 > 0.0) {
            return Err(Error::InvalidArgument(format!("collar half-width {rho0} must be positive")));
        }
        let mu = sigma_m.sqrt() / sigma_s.sqrt();
        let theta = |side: Side| 1.0 + (mu - 1.0) * profile(-side.sign() * 2.0 * epsilon);
        let m_bound = geometry.laplacian_bound(rho0);
        let t1 = if m_bound > 0.0 {
            (epsilon / (2.0 * m_bound)).powi(2) / sigma_s.max(sigma_m)
        } else {
            f64::INFINITY
        };
        Ok(Self {
            epsilon,
            sigma_s,
            sigma_m,
            mu,
            theta_plus: theta(Side::Plus),
            theta_minus: theta(Side::Minus),
            rho0,
            m_bound,
            t1,
            e1: None,
            e2: None,
            t_eps: None,
        })
    }

    /// Parameters for a scene; `rho0 = None` picks half the clearance between
    /// the boundary and the cores (and the cavity of a shell).
    pub fn for_scene(scene: &SceneConfig, epsilon: f64, rho0: Option<f64>) -> Result<Self> {
        scene.validate()?;
        let clearance = collar_clearance(scene);
        let rho0 = rho0.unwrap_or(0.5 * clearance);
        if rho0 >= clearance {
            return Err(Error::InvalidArgument(format!(
                "collar half-width {rho0} reaches the cores or the center (clearance {clearance})"
            )));
        }
        Self::new(scene, scene.sigma.shell, scene.sigma.medium, epsilon, rho0)
    }

    pub fn theta(&self, side: Side) -> f64 {
        match side {
            Side::Plus => self.theta_plus,
            Side::Minus => self.theta_minus,
        }
    }

    /// `F_±(ξ) = F(ξ ∓ 2ε)`.
    pub fn shifted(&self, side: Side, xi: f64) -> f64 {
        profile(xi - side.sign() * 2.0 * self.epsilon)
    }

    fn shifted_derivative(&self, side: Side, xi: f64) -> f64 {
        profile_derivative(xi - side.sign() * 2.0 * self.epsilon)
    }

    /// `v_±` as a function of the signed distance.
    pub fn v(&self, side: Side, dstar: f64, t: f64) -> f64 {
        let eta = dstar / t.sqrt();
        let theta = self.theta(side);
        if dstar > 0.0 {
            self.mu / theta * self.shifted(side, eta / self.sigma_s.sqrt())
        } else {
            (self.shifted(side, eta / self.sigma_m.sqrt()) + theta - 1.0) / theta
        }
    }

    pub fn v_at(&self, geometry: &dyn CollarGeometry, x: &[f64], t: f64, side: Side) -> f64 {
        self.v(side, geometry.signed_distance(x), t)
    }

    /// Closed form of `(v_±)_t - σ Δv_±` off the boundary.
    pub fn residual(&self, side: Side, dstar: f64, laplacian_d: f64, t: f64) -> f64 {
        let theta = self.theta(side);
        let (sigma, scale) = if dstar > 0.0 { (self.sigma_s, self.mu) } else { (self.sigma_m, 1.0) };
        let xi = dstar / (sigma * t).sqrt();
        -scale / (t * theta) * (side.sign() * self.epsilon + (sigma * t).sqrt() * laplacian_d) * self.shifted_derivative(side, xi)
    }

    /// `w_± = (1 ± ε) v_± ± 2 E_1 e^{-E_2/t}`; needs fitted `E_1, E_2`.
    pub fn w(&self, side: Side, dstar: f64, t: f64) -> Result<f64> {
        let (e1, e2) = self.decay()?;
        let s = side.sign();
        Ok((1.0 + s * self.epsilon) * self.v(side, dstar, t) + s * 2.0 * e1 * (-e2 / t).exp())
    }

    fn decay(&self) -> Result<(f64, f64)> {
        match (self.e1, self.e2) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(Error::InvalidArgument("E1 and E2 have not been fitted".into())),
        }
    }

    /// One-sided normal fluxes `σ ∂v/∂d*` at the boundary from inside and
    /// outside, by second-order one-sided differences of step `h`.
    pub fn boundary_fluxes(&self, side: Side, t: f64, h: f64) -> (f64, f64) {
        let inside = -3.0 * self.v(side, 1e-300, t) + 4.0 * self.v(side, h, t) - self.v(side, 2.0 * h, t);
        let outside = 3.0 * self.v(side, 0.0, t) - 4.0 * self.v(side, -h, t) + self.v(side, -2.0 * h, t);
        (self.sigma_s * inside / (2.0 * h), self.sigma_m * outside / (2.0 * h))
    }
}

/// Distance from the boundary to the nearest obstacle of the collar: the
/// cores, the center of a ball domain, or the center of a shell's cavity.
pub fn collar_clearance(scene: &SceneConfig) -> f64 {
    let mut clearance = match scene.outer.kind {
        OuterKind::Ball => scene.outer.radii[0],
        OuterKind::Shell => scene.outer.radii[0].min(scene.inradius()),
    };
    for core in &scene.cores {
        let d = crate::geometry::distance(&core.center, &scene.outer.center);
        let gap = scene
            .boundary_components()
            .iter()
            .map(|c| if c.orientation > 0.0 { c.radius - d - core.radius } else { d - core.radius - c.radius })
            .fold(f64::INFINITY, f64::min);
        clearance = clearance.min(gap);
    }
    clearance
}

/// Outcome of the residual-sign check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    /// `min (+1)·residual` over samples for `v_+` (Richardson-corrected).
    pub min_plus: f64,
    /// `min (-1)·residual` over samples for `v_-`.
    pub min_minus: f64,
    /// Samples whose signed residual falls below `-(tol_fd + budget)`.
    pub violations: usize,
    pub samples: usize,
    /// Largest finite-difference error estimate seen.
    pub fd_budget: f64,
    /// Largest deviation between the corrected difference quotient and the closed form.
    pub closed_form_gap: f64,
    pub t_range: (f64, f64),
}

/// Sampling of the collar for the residual check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResidualSampling {
    /// Spatial difference step; the half step is used for the Richardson pair.
    pub h_fd: f64,
    pub tol_fd: f64,
    pub depths: usize,
    pub times: usize,
    pub rays: usize,
}

impl Default for ResidualSampling {
    fn default() -> Self {
        Self { h_fd: 1e-4, tol_fd: 1e-6, depths: 24, times: 24, rays: 4 }
    }
}

fn fd_residual(params: &BarrierParams, geometry: &dyn CollarGeometry, side: Side, x: &[f64], t: f64, h: f64) -> f64 {
    let v = |p: &[f64], tt: f64| params.v_at(geometry, p, tt, side);
    let dt = 1e-3 * t * h / 1e-4;
    let vt = (v(x, t + dt) - v(x, t - dt)) / (2.0 * dt);
    let center = v(x, t);
    let mut lap = 0.0;
    let mut p = x.to_vec();
    for i in 0..x.len() {
        p[i] = x[i] + h;
        let a = v(&p, t);
        p[i] = x[i] - h;
        let b = v(&p, t);
        p[i] = x[i];
        lap += (a - 2.0 * center + b) / (h * h);
    }
    let sigma = if geometry.signed_distance(x) > 0.0 { params.sigma_s } else { params.sigma_m };
    vt - sigma * lap
}

/// Checks `(±1){(v_±)_t - σΔv_±} > 0` on the collar (minus a margin around
/// the boundary) for times in `[t_lo, t_hi]`, by centered differences at two
/// steps with a Richardson error budget.
pub fn verify_residual_sign(
    params: &BarrierParams,
    geometry: &dyn CollarGeometry,
    t_lo: f64,
    t_hi: f64,
    sampling: ResidualSampling,
) -> Result<ResidualReport> {
    let h = sampling.h_fd;
    let margin = 2.0 * h;
    if !(t_lo > 0.0 && t_hi >= t_lo) {
        return Err(Error::InvalidArgument(format!("bad time range [{t_lo}, {t_hi}]")));
    }
    if params.rho0 <= margin {
        return Err(Error::InvalidArgument("collar is thinner than the boundary margin".into()));
    }
    let sigma_min = params.sigma_s.min(params.sigma_m);
    if (sigma_min * t_lo).sqrt() < 20.0 * h {
        return Err(Error::UnderResolved(format!("difference step {h} too coarse for t = {t_lo:e}")));
    }
    let nd = sampling.depths.max(2);
    let nt = sampling.times.max(2);
    let mut depths = Vec::with_capacity(2 * nd);
    for i in 0..nd {
        let d = margin + (params.rho0 - margin) * i as f64 / (nd - 1) as f64;
        depths.push(d);
        depths.push(-d);
    }
    let mut report = ResidualReport {
        min_plus: f64::INFINITY,
        min_minus: f64::INFINITY,
        violations: 0,
        samples: 0,
        fd_budget: 0.0,
        closed_form_gap: 0.0,
        t_range: (t_lo, t_hi),
    };
    for k in 0..nt {
        let t = t_lo * (t_hi / t_lo).powf(k as f64 / (nt - 1) as f64);
        for &d in &depths {
            for x in geometry.points_at_depth(d, sampling.rays) {
                for side in [Side::Plus, Side::Minus] {
                    let coarse = fd_residual(params, geometry, side, &x, t, h);
                    let fine = fd_residual(params, geometry, side, &x, t, 0.5 * h);
                    let corrected = (4.0 * fine - coarse) / 3.0;
                    let budget = (fine - coarse).abs();
                    let exact = params.residual(side, geometry.signed_distance(&x), geometry.laplacian(&x), t);
                    report.closed_form_gap = report.closed_form_gap.max((corrected - exact).abs());
                    report.fd_budget = report.fd_budget.max(budget);
                    let signed = side.sign() * corrected;
                    match side {
                        Side::Plus => report.min_plus = report.min_plus.min(signed),
                        Side::Minus => report.min_minus = report.min_minus.min(signed),
                    }
                    if signed < -(sampling.tol_fd + budget) {
                        report.violations += 1;
                    }
                    report.samples += 1;
                }
            }
        }
    }
    Ok(report)
}

/// Outcome of the sandwich check `w_- <= u <= w_+`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichReport {
    pub violations: usize,
    /// `min (u - w_-, w_+ - u)` over samples.
    pub worst_margin: f64,
    pub e1: f64,
    pub e2: f64,
    pub t1_eps: f64,
    pub t_eps: f64,
    /// First snapshot time included.
    pub t_resolved: f64,
    pub samples: usize,
    /// Set when the collar is thinner than four cells.
    pub thin_collar: bool,
}

/// Violation threshold of the sandwich check.
pub const SANDWICH_TOLERANCE: f64 = 1e-8;
/// Relative tolerance of the bisection for `t_ε`.
pub const T_EPS_TOLERANCE: f64 = 1e-4;

/// Fits `E_1, E_2` on `Omega` minus the collar, finds `t_ε` and counts
/// violations of `w_- <= u <= w_+` on the collar and `Omega` up to `t_ε`.
///
/// Samples are taken along `rays` rays per boundary component with the
/// field's spacing at the boundary. Snapshots before the boundary layer is
/// resolved in space and time are skipped, since the discrete kernel of the
/// first few implicit steps has heavier tails than the Gaussian.
pub fn verify_sandwich(field: &dyn SolutionField, params: &mut BarrierParams, rays: usize) -> Result<SandwichReport> {
    let scene = field.scene().clone();
    if field.kind() != ProblemKind::Cauchy {
        return Err(Error::InvalidArgument("barriers describe the whole-space problem".into()));
    }
    let times = field.times();
    let t_cap = params.t1.min(1.0);
    let boundary_point = scene.points_at_depth(0.0, 1).remove(0);
    let h = field.spacing(&boundary_point);
    let t_res = resolved_from(field, &boundary_point);
    let usable: Vec<usize> = (0..times.len())
        .filter(|&k| times[k] >= t_res && times[k] <= t_cap && effective_steps(field, k) >= MIN_EFFECTIVE_STEPS)
        .collect();
    if usable.is_empty() {
        return Err(Error::UnderResolved(format!("no resolved snapshot in [{t_res:e}, {t_cap:e}]")));
    }
    let deepest = scene.inradius().min(match scene.outer.kind {
        OuterKind::Ball => scene.outer.radii[0],
        OuterKind::Shell => scene.inradius(),
    });
    let steps = ((deepest + params.rho0) / h).ceil() as usize;
    let mut points: Vec<(f64, Vec<f64>)> = Vec::new();
    for i in 0..=steps {
        let d = (-params.rho0 + i as f64 * h).min(deepest);
        for x in scene.points_at_depth(d, rays) {
            let ds = scene.signed_distance(&x);
            points.push((ds, x));
        }
    }

    // E1, E2 from the interior beyond the collar.
    let mut decay = Vec::new();
    for &k in &usable {
        let t = times[k];
        let mut m: f64 = 0.0;
        for (ds, x) in &points {
            if *ds < params.rho0 {
                continue;
            }
            let u = field.value_at(x, k)?;
            m = m.max(u.abs()).max(params.v(Side::Plus, *ds, t)).max(params.v(Side::Minus, *ds, t));
        }
        decay.push((t, m));
    }
    let (e1, e2) = fit_inverse_time_decay(&decay)?;
    params.e1 = Some(e1);
    params.e2 = Some(e2);

    // t_eps: largest t <= t1 for which the comparisons on the outer collar
    // boundary hold at every snapshot up to t.
    let outer_points = scene.points_at_depth(-params.rho0, rays);
    let mut first_bad = f64::INFINITY;
    for &k in &usable {
        let t = times[k];
        let mut ok = true;
        for x in &outer_points {
            let ds = scene.signed_distance(x);
            let u = field.value_at(x, k)?;
            if u < params.w(Side::Minus, ds, t)? - SANDWICH_TOLERANCE || u > params.w(Side::Plus, ds, t)? + SANDWICH_TOLERANCE {
                ok = false;
                break;
            }
        }
        if !ok {
            first_bad = t;
            break;
        }
    }
    let holds = |t: f64| t < first_bad;
    let t_eps = if holds(t_cap) {
        t_cap
    } else {
        let (mut lo, mut hi) = (0.0, t_cap);
        while hi - lo > T_EPS_TOLERANCE * hi {
            let mid = 0.5 * (lo + hi);
            if holds(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    params.t_eps = Some(t_eps);

    let mut violations = 0;
    let mut worst = f64::INFINITY;
    let mut samples = 0;
    for &k in &usable {
        let t = times[k];
        if t > t_eps {
            break;
        }
        for (ds, x) in &points {
            let u = field.value_at(x, k)?;
            let lower = params.w(Side::Minus, *ds, t)?;
            let upper = params.w(Side::Plus, *ds, t)?;
            let margin = (u - lower).min(upper - u);
            worst = worst.min(margin);
            if margin < -SANDWICH_TOLERANCE {
                violations += 1;
            }
            samples += 1;
        }
    }
    if samples == 0 {
        return Err(Error::UnderResolved("no snapshot at or before t_eps".into()));
    }
    Ok(SandwichReport {
        violations,
        worst_margin: worst,
        e1,
        e2,
        t1_eps: params.t1,
        t_eps,
        t_resolved: times[usable[0]],
        samples,
        thin_collar: params.rho0 < 4.0 * h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Conductivities, DomainSpec};

    fn disk() -> SceneConfig {
        SceneConfig {
            dimension: 2,
            outer: DomainSpec::ball(vec![0.0, 0.0], 1.0),
            cores: vec![],
            sigma: Conductivities { core: 1.0, shell: 1.0, medium: 4.0 },
            surface_offset: 0.0,
        }
    }

    #[test]
    fn profile_values() {
        assert_eq!(profile(0.0), 0.5);
        assert!((profile(2.0) - 0.07865).abs() < 1e-5);
        assert!((profile(-10.0) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn profile_ode() {
        for xi in [-3.0, -0.5, 0.0, 1.0, 4.0] {
            let h = 1e-4;
            let d2 = (profile(xi + h) - 2.0 * profile(xi) + profile(xi - h)) / (h * h);
            assert!((d2 + 0.5 * xi * profile_derivative(xi)).abs() < 1e-6);
        }
    }

    #[test]
    fn theta_limit_and_continuity() {
        let p = BarrierParams::new(&disk(), 1.0, 4.0, 1e-9, 0.25).unwrap();
        assert!((p.theta_plus - 1.5).abs() < 1e-8);
        let p = BarrierParams::new(&disk(), 1.0, 4.0, 0.1, 0.25).unwrap();
        for side in [Side::Plus, Side::Minus] {
            let inside = p.v(side, 1e-300, 0.01);
            let outside = p.v(side, 0.0, 0.01);
            assert!((inside - outside).abs() < 1e-14);
            let (a, b) = p.boundary_fluxes(side, 0.01, 1e-5);
            assert!((a - b).abs() < 1e-6 * a.abs().max(1.0), "{a} vs {b}");
        }
        assert!(p.v(Side::Plus, 5.0, 1e-3) < 1e-30);
    }

    #[test]
    fn t1_formula() {
        let p = BarrierParams::new(&disk(), 1.0, 4.0, 0.1, 0.25).unwrap();
        let m = 1.0 / 0.75;
        assert!((p.m_bound - m).abs() < 1e-15);
        assert_eq!(p.t1, (0.1 / (2.0 * m)).powi(2) / 4.0);
    }

    #[test]
    fn auto_collar_avoids_core() {
        let mut s = disk();
        s.cores = vec![crate::Ball::new(vec![0.2, 0.0], 0.4)];
        s.sigma.core = 3.0;
        let p = BarrierParams::for_scene(&s, 0.1, None).unwrap();
        assert!((p.rho0 - 0.2).abs() < 1e-12);
        assert!(BarrierParams::for_scene(&s, 0.1, Some(0.45)).is_err());
    }
}
