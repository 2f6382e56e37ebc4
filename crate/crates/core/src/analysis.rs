//! Integral functionals of solutions and their small-time limits.
//!
//! Everything here is a pure function of an immutable solution. Radial
//! solutions are integrated with the co-area formula over spheres centered at
//! the scene center; Cartesian solutions by cell quadrature.

use crate::geometry::{distance, norm, Ball, Conductivities, SceneConfig, Weingarten};
use crate::grid::FieldSeries;
use crate::numerics::{aitken, fit_line, gauss_legendre, least_squares, unit_ball_volume};
use crate::radial::{ProblemKind, RadialSolution};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Denominator floor for relative deviations.
pub const RELATIVE_FLOOR: f64 = 1e-12;
/// Floor below which `u` is treated as underflowed in logarithms.
pub const LOG_FLOOR: f64 = 1e-300;
/// Subsamples per direction in cells cut by a ball's boundary.
pub const CUT_CELL_SUBSAMPLES: usize = 16;

/// Common view of radial and Cartesian solutions.
pub trait SolutionField {
    fn scene(&self) -> &SceneConfig;
    fn kind(&self) -> ProblemKind;
    fn times(&self) -> &[f64];
    fn value_at(&self, x: &[f64], k: usize) -> Result<f64>;
    /// Sum of squared implicit Euler steps up to snapshot `k`.
    fn step_variance(&self, k: usize) -> f64;
    /// Spatial resolution near `x`.
    fn spacing(&self, x: &[f64]) -> f64;
    /// `∫_B u(z, t_k) dz`.
    fn heat_content(&self, ball: &Ball, k: usize) -> Result<f64>;
    /// `∫_B (z - c) u(z, t_k) dz` with `c` the center of the ball.
    fn first_moment(&self, ball: &Ball, k: usize) -> Result<Vec<f64>>;
}

fn domain_tolerance(scene: &SceneConfig) -> f64 {
    1e-9 * scene.outer.outer_radius()
}

fn check_ball_in_omega(scene: &SceneConfig, ball: &Ball) -> Result<()> {
    ball.validate(scene.dimension)?;
    if scene.signed_distance(&ball.center) < ball.radius - domain_tolerance(scene) {
        return Err(Error::BallOutside(format!(
            "ball of radius {} at {:?} leaves the domain",
            ball.radius, ball.center
        )));
    }
    Ok(())
}

/// Measure of the part of the sphere of radius `s` around the scene center
/// inside `ball`, and the first moment of that part about the ball center
/// projected on the direction from the scene center to the ball center.
fn cap_integrals(dimension: usize, s: f64, d: f64, r: f64) -> (f64, f64) {
    if s <= 0.0 {
        return (0.0, 0.0);
    }
    if d == 0.0 {
        if s < r {
            let full = match dimension {
                2 => 2.0 * PI * s,
                _ => 4.0 * PI * s * s,
            };
            return (full, 0.0);
        }
        return (0.0, 0.0);
    }
    let cos_a = ((s * s + d * d - r * r) / (2.0 * s * d)).clamp(-1.0, 1.0);
    let alpha = cos_a.acos();
    let sin_a = alpha.sin();
    match dimension {
        2 => (2.0 * s * alpha, 2.0 * s * s * sin_a - 2.0 * d * s * alpha),
        _ => {
            let cap = 2.0 * PI * s * s * (1.0 - cos_a);
            (cap, PI * s * s * s * sin_a * sin_a - d * cap)
        }
    }
}

impl RadialSolution {
    /// Co-area integrals of `u` (and of the projected moment) over a ball.
    fn ball_integrals(&self, ball: &Ball, k: usize) -> Result<(f64, f64)> {
        let n = self.scene.dimension;
        if n != 2 && n != 3 {
            return Err(Error::InvalidDimension(n));
        }
        match self.kind {
            ProblemKind::Ibvp => check_ball_in_omega(&self.scene, ball)?,
            ProblemKind::Cauchy => ball.validate(n)?,
        }
        let d = distance(&ball.center, &self.scene.outer.center);
        let r = ball.radius;
        let lo = (d - r).max(0.0);
        let hi = d + r;
        let nodes = &self.grid.nodes;
        let tol = domain_tolerance(&self.scene);
        if lo < nodes[0] - tol || hi > self.grid.far_radius() + tol {
            return Err(Error::BallOutside("ball leaves the radial grid".into()));
        }
        let lo = lo.max(nodes[0]);
        let hi = hi.min(self.grid.far_radius());
        let kink = (d - r).abs();
        let u = self.snapshot(k);
        let (gx, gw) = gauss_legendre(8);
        let mut mass = 0.0;
        let mut moment = 0.0;
        let first = self.grid.locate(lo).unwrap_or(0);
        for i in first..nodes.len() - 1 {
            let (a0, b0) = (nodes[i], nodes[i + 1]);
            if a0 >= hi {
                break;
            }
            let mut cuts = vec![a0.max(lo), b0.min(hi)];
            if kink > cuts[0] && kink < cuts[1] {
                cuts.insert(1, kink);
            }
            let slope = (u[i + 1] - u[i]) / (b0 - a0);
            for w in cuts.windows(2) {
                let (a, b) = (w[0], w[1]);
                if b <= a {
                    continue;
                }
                let mid = 0.5 * (a + b);
                // Square-root substitutions towards both ends absorb the
                // edge singularities of the cap measure.
                for (q, wq) in gx.iter().zip(&gw) {
                    let v = 0.5 * (q + 1.0);
                    let jac = 0.5 * wq * 2.0 * v;
                    for (s, len) in [(a + (mid - a) * v * v, mid - a), (b - (b - mid) * v * v, b - mid)] {
                        let (m, mom) = cap_integrals(n, s, d, r);
                        let val = u[i] + slope * (s - a0);
                        mass += jac * len * m * val;
                        moment += jac * len * mom * val;
                    }
                }
            }
        }
        Ok((mass, moment))
    }
}

impl SolutionField for RadialSolution {
    fn scene(&self) -> &SceneConfig {
        &self.scene
    }
    fn kind(&self) -> ProblemKind {
        self.kind
    }
    fn times(&self) -> &[f64] {
        RadialSolution::times(self)
    }
    fn value_at(&self, x: &[f64], k: usize) -> Result<f64> {
        self.value_at_point(x, k)
    }
    fn step_variance(&self, k: usize) -> f64 {
        RadialSolution::step_variance(self, k)
    }
    fn spacing(&self, x: &[f64]) -> f64 {
        self.grid.spacing_at(distance(x, &self.scene.outer.center))
    }
    fn heat_content(&self, ball: &Ball, k: usize) -> Result<f64> {
        Ok(self.ball_integrals(ball, k)?.0)
    }
    fn first_moment(&self, ball: &Ball, k: usize) -> Result<Vec<f64>> {
        let (_, m) = self.ball_integrals(ball, k)?;
        let d = distance(&ball.center, &self.scene.outer.center);
        if d == 0.0 {
            return Ok(vec![0.0; ball.center.len()]);
        }
        Ok(ball.center.iter().zip(&self.scene.outer.center).map(|(c, o)| m * (c - o) / d).collect())
    }
}

impl FieldSeries {
    /// Cell quadrature of `u` and `(z - c) u` over a disk.
    fn ball_integrals(&self, ball: &Ball, k: usize) -> Result<(f64, [f64; 2])> {
        ball.validate(2)?;
        if self.kind == ProblemKind::Ibvp {
            check_ball_in_omega(&self.scene, ball)?;
        }
        let g = &self.grid;
        let (c, r) = ([ball.center[0], ball.center[1]], ball.radius);
        let lo_x = ((c[0] - r - g.origin[0]) / g.h).floor();
        let hi_x = ((c[0] + r - g.origin[0]) / g.h).ceil();
        let lo_y = ((c[1] - r - g.origin[1]) / g.h).floor();
        let hi_y = ((c[1] + r - g.origin[1]) / g.h).ceil();
        if lo_x < 0.0 || lo_y < 0.0 || hi_x > g.nx as f64 || hi_y > g.ny as f64 {
            return Err(Error::BallOutside("ball leaves the computational box".into()));
        }
        let u = self.snapshot(k);
        let h = g.h;
        let m = CUT_CELL_SUBSAMPLES;
        let sub = h / m as f64;
        let mut mass = 0.0;
        let mut moment = [0.0; 2];
        for j in lo_y as usize..hi_y as usize {
            for i in lo_x as usize..hi_x as usize {
                let x0 = g.origin[0] + i as f64 * h - c[0];
                let y0 = g.origin[1] + j as f64 * h - c[1];
                let near_x = 0f64.clamp(x0, x0 + h);
                let near_y = 0f64.clamp(y0, y0 + h);
                if near_x * near_x + near_y * near_y >= r * r {
                    continue;
                }
                let far_x = x0.abs().max((x0 + h).abs());
                let far_y = y0.abs().max((y0 + h).abs());
                let value = u[g.index(i, j)];
                if far_x * far_x + far_y * far_y <= r * r {
                    mass += h * h * value;
                    moment[0] += h * h * value * (x0 + 0.5 * h);
                    moment[1] += h * h * value * (y0 + 0.5 * h);
                    continue;
                }
                for b in 0..m {
                    let py = y0 + (b as f64 + 0.5) * sub;
                    for a in 0..m {
                        let px = x0 + (a as f64 + 0.5) * sub;
                        if px * px + py * py < r * r {
                            mass += sub * sub * value;
                            moment[0] += sub * sub * value * px;
                            moment[1] += sub * sub * value * py;
                        }
                    }
                }
            }
        }
        Ok((mass, moment))
    }
}

impl SolutionField for FieldSeries {
    fn scene(&self) -> &SceneConfig {
        &self.scene
    }
    fn kind(&self) -> ProblemKind {
        self.kind
    }
    fn times(&self) -> &[f64] {
        &self.times
    }
    fn value_at(&self, x: &[f64], k: usize) -> Result<f64> {
        FieldSeries::value_at(self, x, k)
    }
    fn step_variance(&self, k: usize) -> f64 {
        FieldSeries::step_variance(self, k)
    }
    fn spacing(&self, _x: &[f64]) -> f64 {
        self.grid.h
    }
    fn heat_content(&self, ball: &Ball, k: usize) -> Result<f64> {
        Ok(self.ball_integrals(ball, k)?.0)
    }
    fn first_moment(&self, ball: &Ball, k: usize) -> Result<Vec<f64>> {
        Ok(self.ball_integrals(ball, k)?.1.to_vec())
    }
}

/// `∫_0^∞ F(ξ) ξ^p dξ` with `F(ξ) = erfc(ξ/2)/2`.
pub fn profile_moment(p: f64) -> f64 {
    2f64.powf(p) * libm::tgamma(0.5 * p + 1.0) / (PI.sqrt() * (p + 1.0))
}

/// `c(N) = 2^{(N-1)/2} ω_{N-1} ∫_0^∞ F(ξ) ξ^{(N-1)/2} dξ`.
pub fn c_constant(dimension: usize) -> f64 {
    let p = 0.5 * (dimension as f64 - 1.0);
    2f64.powf(p) * unit_ball_volume(dimension - 1) * profile_moment(p)
}

/// The constant of the small-time heat-content law near a boundary point.
pub fn bulk_constant(dimension: usize, sigma: &Conductivities, kind: ProblemKind) -> Result<f64> {
    if dimension != 2 && dimension != 3 {
        return Err(Error::InvalidDimension(dimension));
    }
    let base = sigma.shell.powf((dimension as f64 + 1.0) / 4.0) * c_constant(dimension);
    Ok(match kind {
        ProblemKind::Ibvp => 2.0 * base,
        ProblemKind::Cauchy => {
            let (s, m) = (sigma.shell.sqrt(), sigma.medium.sqrt());
            2.0 * m / (s + m) * base
        }
    })
}

/// Samples with `t_min <= t <= t_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeWindow {
    pub lo: f64,
    pub hi: f64,
}

impl Default for TimeWindow {
    fn default() -> Self {
        Self { lo: 1e-2, hi: 1.0 }
    }
}

impl TimeWindow {
    pub fn contains(&self, t: f64) -> bool {
        t >= self.lo * (1.0 - 1e-12) && t <= self.hi * (1.0 + 1e-12)
    }
}

/// Position of a ball relative to the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Contact {
    /// Touches the boundary at one point with positive Weingarten factor.
    Tangent,
    /// Touches where `1/r = κ`: the limit is `+∞`.
    Degenerate,
    /// Does not reach the boundary: the limit is zero.
    Interior,
}

/// Extrapolated small-time limit of `Q(t) t^{-(N+1)/4}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticsResult {
    /// `(t_k, Q_k)` over all resolved snapshots.
    pub samples: Vec<(f64, f64)>,
    /// Fit window of the smallest resolved decade.
    pub window: TimeWindow,
    pub limit: f64,
    pub slope: f64,
    pub model: &'static str,
    pub error_estimate: f64,
    pub fit_rms: f64,
    /// Relative variation of the normalized content over the fit window.
    pub variation: f64,
    pub contact: Contact,
    /// `C(N, σ) {∏(1/r - κ_j)}^{-1/2}`; `None` in the degenerate case.
    pub target: Option<f64>,
    /// The normalized content grows as `t` decreases.
    pub divergent: bool,
}

/// Earliest time at which a solution is trusted near `x` for boundary-layer
/// quantities.
pub(crate) fn resolved_from(field: &dyn SolutionField, x: &[f64]) -> f64 {
    let h = field.spacing(x);
    (10.0 * field.times()[0]).max((20.0 * h).powi(2))
}

/// Implicit Euler steps at snapshot `k`, measured as `t^2 / Σ dt^2`.
pub(crate) fn effective_steps(field: &dyn SolutionField, k: usize) -> f64 {
    let t = field.times()[k];
    t * t / field.step_variance(k)
}

pub(crate) const MIN_EFFECTIVE_STEPS: f64 = 50.0;

fn fit_sqrt_model(samples: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    let x: Vec<f64> = samples.iter().map(|s| s.0.sqrt()).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let fit = fit_line(&x, &y)?;
    Ok((fit.intercept, fit.slope, fit.rms))
}

/// Fits `Q(t) t^{-(N+1)/4} = A + B √t` on the smallest resolved decade.
pub fn asymptotic_heat_content(field: &dyn SolutionField, ball: &Ball) -> Result<AsymptoticsResult> {
    let scene = field.scene();
    let n = scene.dimension;
    let (contact, target, touch) = match scene.tangency(ball) {
        Ok(_) => {
            let y = scene.contact_point(ball)?;
            let constant = bulk_constant(n, &scene.sigma, field.kind())?;
            match scene.weingarten_product(&y, ball.radius)? {
                Weingarten::Finite(w) => (Contact::Tangent, Some(constant / w.sqrt()), y),
                Weingarten::Degenerate => (Contact::Degenerate, None, y),
            }
        }
        Err(Error::NotTangent(_)) if scene.signed_distance(&ball.center) > ball.radius => {
            (Contact::Interior, Some(0.0), ball.center.clone())
        }
        Err(e) => return Err(e),
    };
    let power = (n as f64 + 1.0) / 4.0;
    let t_res = resolved_from(field, &touch);
    let mut samples = Vec::new();
    let mut normalized = Vec::new();
    for (k, &t) in field.times().iter().enumerate() {
        if t < t_res * (1.0 - 1e-12) || effective_steps(field, k) < MIN_EFFECTIVE_STEPS {
            continue;
        }
        let q = field.heat_content(ball, k)?;
        samples.push((t, q));
        normalized.push((t, q * t.powf(-power)));
    }
    if samples.is_empty() {
        return Err(Error::UnderResolved("no snapshot resolves the boundary layer".into()));
    }
    let t0 = normalized[0].0;
    let window = TimeWindow { lo: t0, hi: 10.0 * t0 };
    let decade: Vec<(f64, f64)> = normalized.iter().copied().filter(|s| window.contains(s.0)).collect();
    let next: Vec<(f64, f64)> = normalized
        .iter()
        .copied()
        .filter(|s| s.0 >= window.hi * (1.0 - 1e-12) && s.0 <= 10.0 * window.hi * (1.0 + 1e-12))
        .collect();
    if decade.len() < 3 {
        return Err(Error::UnderResolved(format!("only {} resolved samples in the first decade", decade.len())));
    }
    let (limit, slope, fit_rms) = fit_sqrt_model(&decade)?;
    let error_estimate = if next.len() >= 3 {
        (fit_sqrt_model(&next)?.0 - limit).abs() + fit_rms
    } else {
        fit_rms
    };
    let values: Vec<f64> = decade.iter().map(|s| s.1).collect();
    let (vmin, vmax) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let variation = (vmax - vmin) / mean.abs().max(RELATIVE_FLOOR);
    let log_fit = fit_line(
        &decade.iter().map(|s| s.0.ln()).collect::<Vec<_>>(),
        &decade.iter().map(|s| s.1.max(LOG_FLOOR).ln()).collect::<Vec<_>>(),
    )?;
    let divergent = contact == Contact::Degenerate || log_fit.slope < -0.05;
    if contact == Contact::Tangent && variation > 0.05 {
        return Err(Error::UnderResolved(format!(
            "normalized heat content varies by {variation:.3} over the first resolved decade"
        )));
    }
    Ok(AsymptoticsResult {
        samples,
        window,
        limit,
        slope,
        model: "A + B sqrt(t)",
        error_estimate,
        fit_rms,
        variation,
        contact,
        target,
        divergent,
    })
}

/// Extrapolated value of `-4 t log u(x, t)` as `t -> 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VaradhanResult {
    /// `(t_k, -4 t_k log u_k)` on the fit decade.
    pub samples: Vec<(f64, f64)>,
    pub limit: f64,
    /// `d*(x)^2`.
    pub target: f64,
    /// Spread of the Aitken estimates over all triples of the decade.
    pub residual: f64,
}

/// Varadhan's limit at an interior point, from the smallest resolved decade.
///
/// A snapshot is resolved when the spatial step is small against the decay
/// length `2t/d` and when the implicit Euler error in the exponent, about
/// `(d^2/4t) / (2 n_eff)`, stays below one percent.
pub fn varadhan_profile(field: &dyn SolutionField, x: &[f64]) -> Result<VaradhanResult> {
    let scene = field.scene();
    let d = scene.signed_distance(x);
    if !(d > 0.0) {
        return Err(Error::InvalidArgument("Varadhan point must lie inside the domain".into()));
    }
    let h = field.spacing(x);
    let mut resolved = Vec::new();
    for (k, &t) in field.times().iter().enumerate() {
        if h * d / (2.0 * t) > 0.2 {
            continue;
        }
        if (d * d / (4.0 * t)) / (2.0 * effective_steps(field, k)) > 0.005 {
            continue;
        }
        let u = field.value_at(x, k)?;
        if u <= LOG_FLOOR {
            continue;
        }
        resolved.push((t, -4.0 * t * u.ln()));
    }
    let Some(&(t0, _)) = resolved.first() else {
        return Err(Error::UnderResolved("no snapshot resolves the Varadhan exponent".into()));
    };
    let samples: Vec<(f64, f64)> = resolved.into_iter().filter(|s| s.0 <= 10.0 * t0 * (1.0 + 1e-12)).collect();
    if samples.len() < 3 {
        return Err(Error::UnderResolved(format!("only {} Varadhan samples in the first decade", samples.len())));
    }
    // Adjacent triples: the error of -4t log u carries a t log t term, so
    // the local contraction ratio is only nearly constant.
    let estimates: Vec<f64> = samples.windows(3).filter_map(|w| aitken(w[0].1, w[1].1, w[2].1)).collect();
    let limit = *estimates.first().ok_or_else(|| Error::FitFailure("Aitken denominators vanish".into()))?;
    let residual = estimates.iter().map(|e| (e - limit).abs()).fold(0.0, f64::max);
    Ok(VaradhanResult { samples, limit, target: d * d, residual })
}

/// Maximum relative heat-content mismatch between equal balls.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceReport {
    pub deviation: f64,
    pub worst_time: f64,
    /// `(t, max_i H_i, min_i H_i)` per snapshot in the window.
    pub trace: Vec<(f64, f64, f64)>,
}

/// Relative spread of `∫_{B_r(p_i)} u` over the sample points, maximized over
/// the snapshots in `window`.
pub fn balance_deviation(field: &dyn SolutionField, points: &[Vec<f64>], r: f64, window: TimeWindow) -> Result<BalanceReport> {
    let scene = field.scene();
    let tol = domain_tolerance(scene);
    let balls: Vec<Ball> = points.iter().map(|p| Ball::new(p.clone(), r)).collect();
    for b in &balls {
        b.validate(scene.dimension)?;
        if scene.signed_distance(&b.center) < r - tol || scene.distance_to_cores(&b.center) < r - tol {
            return Err(Error::BallOutside(format!("ball at {:?} leaves the shell", b.center)));
        }
    }
    if balls.len() < 2 {
        return Err(Error::InvalidArgument("balance needs at least two balls".into()));
    }
    let mut report = BalanceReport { deviation: 0.0, worst_time: f64::NAN, trace: Vec::new() };
    for (k, &t) in field.times().iter().enumerate() {
        if !window.contains(t) {
            continue;
        }
        let mut hmax = f64::NEG_INFINITY;
        let mut hmin = f64::INFINITY;
        for b in &balls {
            let q = field.heat_content(b, k)?;
            hmax = hmax.max(q);
            hmin = hmin.min(q);
        }
        let dev = (hmax - hmin) / hmin.max(RELATIVE_FLOOR);
        if dev > report.deviation || report.worst_time.is_nan() {
            report.deviation = report.deviation.max(dev);
            report.worst_time = t;
        }
        report.trace.push((t, hmax, hmin));
    }
    if report.trace.is_empty() {
        return Err(Error::InvalidArgument("no snapshot inside the time window".into()));
    }
    Ok(report)
}

/// First moment of `u` over a ball about its center.
pub fn gradient_moment(field: &dyn SolutionField, ball: &Ball, k: usize) -> Result<Vec<f64>> {
    field.first_moment(ball, k)
}

/// Spread of `u` over samples of a surface.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationarityReport {
    /// `sup_t (max_i u - min_i u) / mean_i u` over the window.
    pub metric: f64,
    pub worst_time: f64,
    /// `(t, a(t))` with `a` the sample mean, per snapshot in the window.
    pub trace: Vec<(f64, f64)>,
    /// `(t, relative spread)` per snapshot in the window.
    pub spread: Vec<(f64, f64)>,
}

pub fn stationarity_metric(field: &dyn SolutionField, points: &[Vec<f64>], window: TimeWindow) -> Result<StationarityReport> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("no surface samples".into()));
    }
    let mut report = StationarityReport { metric: 0.0, worst_time: f64::NAN, trace: Vec::new(), spread: Vec::new() };
    for (k, &t) in field.times().iter().enumerate() {
        if !window.contains(t) {
            continue;
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for p in points {
            let u = field.value_at(p, k)?;
            lo = lo.min(u);
            hi = hi.max(u);
            sum += u;
        }
        let mean = sum / points.len() as f64;
        let spread = (hi - lo) / mean.max(RELATIVE_FLOOR);
        if spread > report.metric || report.worst_time.is_nan() {
            report.metric = report.metric.max(spread);
            report.worst_time = t;
        }
        report.trace.push((t, mean));
        report.spread.push((t, spread));
    }
    if report.trace.is_empty() {
        return Err(Error::InvalidArgument("no snapshot inside the time window".into()));
    }
    Ok(report)
}

/// Fitted constants of the a priori decay bounds, each with its fit window.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "bound", rename_all = "kebab-case")]
pub enum DecayFit {
    /// `u <= B e^{-b/t}` on a compact subset of the domain.
    Interior { big_b: f64, b: f64, window: TimeWindow },
    /// `1 - u <= M t^{-N/2} |Omega|` for the whole-space problem.
    Power { m: f64, window: TimeWindow },
    /// `1 - u <= C e^{-λ t}` for the boundary problem.
    Approach { c: f64, lambda: f64, window: TimeWindow },
    /// `β^{-1} r^{2-N} <= ∫_0^∞ (1 - u) dt <= β r^{2-N}` for `r >= L`.
    FarField { beta: f64, l: f64 },
}

impl DecayFit {
    pub fn constants(&self) -> Vec<f64> {
        match *self {
            DecayFit::Interior { big_b, b, .. } => vec![big_b, b],
            DecayFit::Power { m, .. } => vec![m],
            DecayFit::Approach { c, lambda, .. } => vec![c, lambda],
            DecayFit::FarField { beta, l } => vec![beta, l],
        }
    }

    pub fn all_positive(&self) -> bool {
        self.constants().iter().all(|c| *c > 0.0 && c.is_finite())
    }
}

/// Fits `log y = log E1 - E2 / t` by least squares, then raises `E1` until
/// the bound covers every sample.
pub fn fit_inverse_time_decay(samples: &[(f64, f64)]) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> = samples.iter().copied().filter(|s| s.1 > LOG_FLOOR).collect();
    if pts.len() < 2 {
        return Err(Error::FitFailure("fewer than two positive samples".into()));
    }
    let rows: Vec<Vec<f64>> = pts.iter().map(|s| vec![1.0, -1.0 / s.0]).collect();
    let y: Vec<f64> = pts.iter().map(|s| s.1.ln()).collect();
    let coef = least_squares(rows, &y)?;
    let rate = coef[1];
    if !(rate > 0.0) {
        return Err(Error::FitFailure(format!("decay rate {rate} is not positive")));
    }
    let log_e1 = pts.iter().map(|s| s.1.ln() + rate / s.0).fold(coef[0], f64::max);
    Ok((log_e1.exp(), rate))
}

/// `u <= B e^{-b/t}` at the given points for snapshots in `window`.
pub fn fit_interior_decay(field: &dyn SolutionField, points: &[Vec<f64>], window: TimeWindow) -> Result<DecayFit> {
    let mut samples = Vec::new();
    for (k, &t) in field.times().iter().enumerate() {
        if !window.contains(t) {
            continue;
        }
        let mut m: f64 = 0.0;
        for p in points {
            m = m.max(field.value_at(p, k)?);
        }
        samples.push((t, m));
    }
    let (big_b, b) = fit_inverse_time_decay(&samples)?;
    Ok(DecayFit::Interior { big_b, b, window })
}

/// Smallest `M` with `1 - u(x, t) <= M t^{-N/2} |Omega|` over `window`.
pub fn fit_power_decay(field: &dyn SolutionField, x: &[f64], window: TimeWindow) -> Result<DecayFit> {
    let scene = field.scene();
    let half_n = 0.5 * scene.dimension as f64;
    let vol = scene.volume();
    let mut m: f64 = 0.0;
    let mut any = false;
    for (k, &t) in field.times().iter().enumerate() {
        if window.contains(t) {
            m = m.max((1.0 - field.value_at(x, k)?) * t.powf(half_n) / vol);
            any = true;
        }
    }
    if !any || !(m > 0.0) {
        return Err(Error::FitFailure("no positive deficit in the window".into()));
    }
    Ok(DecayFit::Power { m, window })
}

/// `max_x (1 - u) <= C e^{-λ t}` over `window`, by regression of the log
/// deficit then raising `C` to cover all samples.
pub fn fit_exponential_approach(field: &dyn SolutionField, points: &[Vec<f64>], window: TimeWindow) -> Result<DecayFit> {
    let mut t = Vec::new();
    let mut y = Vec::new();
    for (k, &tk) in field.times().iter().enumerate() {
        if !window.contains(tk) {
            continue;
        }
        let mut m: f64 = 0.0;
        for p in points {
            m = m.max(1.0 - field.value_at(p, k)?);
        }
        if m > LOG_FLOOR {
            t.push(tk);
            y.push(m.ln());
        }
    }
    if t.len() < 2 {
        return Err(Error::FitFailure("fewer than two positive deficits".into()));
    }
    let fit = fit_line(&t, &y)?;
    let lambda = -fit.slope;
    if !(lambda > 0.0) {
        return Err(Error::FitFailure(format!("approach rate {lambda} is not positive")));
    }
    let log_c = t.iter().zip(&y).map(|(tk, yk)| yk + lambda * tk).fold(fit.intercept, f64::max);
    Ok(DecayFit::Approach { c: log_c.exp(), lambda, window })
}

/// Smallest `β` bracketing `Φ(r) r^{N-2}` in `[1/β, β]` for the given radii.
pub fn fit_far_field(dimension: usize, radii: &[f64], integrals: &[f64]) -> Result<DecayFit> {
    if radii.is_empty() || radii.len() != integrals.len() {
        return Err(Error::InvalidArgument("radii and integrals must match".into()));
    }
    let mut beta: f64 = 1.0;
    for (r, phi) in radii.iter().zip(integrals) {
        let scaled = phi * r.powi(dimension as i32 - 2);
        if !(scaled > 0.0) {
            return Err(Error::FitFailure(format!("non-positive time integral at r = {r}")));
        }
        beta = beta.max(scaled).max(1.0 / scaled);
    }
    let l = radii.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(DecayFit::FarField { beta, l })
}

/// Unit vector along `v`, or `None` for the zero vector.
pub fn direction(v: &[f64]) -> Option<Vec<f64>> {
    let n = norm(v);
    (n > 0.0).then(|| v.iter().map(|x| x / n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::{solve_radial, SolverParams};
    use crate::DomainSpec;

    fn disk(rho: f64, sigma: f64) -> SceneConfig {
        SceneConfig {
            dimension: 2,
            outer: DomainSpec::ball(vec![0.0, 0.0], rho),
            cores: vec![],
            sigma: Conductivities::uniform(sigma),
            surface_offset: 0.0,
        }
    }

    #[test]
    fn c_of_two() {
        assert!((c_constant(2) - 1.3637).abs() < 1e-3);
        let sigma = Conductivities::uniform(1.0);
        let ratio = bulk_constant(2, &sigma, ProblemKind::Cauchy).unwrap() / bulk_constant(2, &sigma, ProblemKind::Ibvp).unwrap();
        assert_eq!(ratio, 0.5);
    }

    #[test]
    fn profile_moment_matches_quadrature() {
        // Midpoint rule on [0, 40] of erfc(ξ/2)/2 ξ^p.
        for p in [0.0, 0.5, 1.0, 1.5] {
            let n = 400_000;
            let dx = 40.0 / n as f64;
            let q: f64 = (0..n).map(|i| {
                let x = (i as f64 + 0.5) * dx;
                0.5 * libm::erfc(0.5 * x) * x.powf(p) * dx
            }).sum();
            assert!((q - profile_moment(p)).abs() < 1e-6, "p = {p}: {q} vs {}", profile_moment(p));
        }
    }

    #[test]
    fn sigma_scaling_of_bulk_constant() {
        let a = bulk_constant(3, &Conductivities { core: 1.0, shell: 1.0, medium: 4.0 }, ProblemKind::Cauchy).unwrap();
        let b = bulk_constant(3, &Conductivities { core: 1.0, shell: 4.0, medium: 16.0 }, ProblemKind::Cauchy).unwrap();
        assert!((b / a - 4f64.powf(1.0)).abs() < 1e-12);
    }

    #[test]
    fn cap_integrals_sum_to_ball_volume() {
        // Integrate the cap measure over s for an off-center ball.
        for n in [2usize, 3] {
            let (d, r) = (0.7, 0.4);
            let m = 200_000;
            let ds = 2.0 * r / m as f64;
            let vol: f64 = (0..m).map(|i| cap_integrals(n, d - r + (i as f64 + 0.5) * ds, d, r).0 * ds).sum();
            let exact = unit_ball_volume(n) * r.powi(n as i32);
            assert!((vol - exact).abs() < 1e-6, "{n}: {vol} vs {exact}");
        }
    }

    fn constant_field(scene: SceneConfig, value: f64) -> RadialSolution {
        let params = SolverParams { h: 1.0 / 64.0, t_min: 0.5, t_max: 1.0, ..Default::default() };
        let mut sol = solve_radial(&scene, ProblemKind::Ibvp, &params).unwrap();
        sol.fill_for_tests(value);
        sol
    }

    #[test]
    fn heat_content_of_constants() {
        let one = constant_field(disk(2.0, 1.0), 1.0);
        let q = one.heat_content(&Ball::new(vec![0.5, 0.3], 1.0), 0).unwrap();
        assert!((q - PI).abs() < 1e-9, "{q}");
        let m = one.first_moment(&Ball::new(vec![0.5, 0.3], 1.0), 0).unwrap();
        assert!(norm(&m) < 1e-9);
        let zero = constant_field(disk(2.0, 1.0), 0.0);
        assert_eq!(zero.heat_content(&Ball::new(vec![0.5, 0.3], 1.0), 0).unwrap(), 0.0);
    }

    #[test]
    fn ball_outside_is_rejected() {
        let one = constant_field(disk(1.0, 1.0), 1.0);
        assert!(one.heat_content(&Ball::new(vec![0.5, 0.0], 0.6), 0).is_err());
    }

    #[test]
    fn inverse_time_fit_recovers_constants() {
        let s: Vec<(f64, f64)> = [0.01f64, 0.02, 0.04, 0.08].iter().map(|&t| (t, 3.0 * (-0.5 / t).exp())).collect();
        let (e1, e2) = fit_inverse_time_decay(&s).unwrap();
        assert!((e1 - 3.0).abs() < 1e-9 && (e2 - 0.5).abs() < 1e-12);
    }
}
