//! Named experiments. A JSON config selects a scene, solver parameters and
//! one analysis pipeline; running it writes CSV tables, a long-format table
//! and a manifest listing every file with its size and SHA-256.
//!
//! Floating-point output uses 17 significant digits so that reruns can be
//! compared byte for byte.

use crate::analysis::{
    asymptotic_heat_content, balance_deviation, stationarity_metric, varadhan_profile, SolutionField,
};
use crate::barriers::{verify_residual_sign, verify_sandwich, BarrierParams, ResidualSampling, SANDWICH_TOLERANCE};
use crate::elliptic::{
    auxiliary_by_time_integration, concentricity_discriminator, fit_radial_coefficients, gamma_samples,
    hopf_case_analysis, radial_closed_form, relative_linf, solve_auxiliary, AuxiliaryFields, DiscriminatorOptions,
    HopfCase, HopfParams, HopfVerdict, Verdict,
};
use crate::geometry::{Ball, SceneConfig, Weingarten};
use crate::grid::{grid_for_scene, solve_cauchy_2d, solve_ibvp_2d, FieldSeries, GridOptions};
use crate::numerics::unit_ball_volume;
use crate::radial::{solve_radial, ProblemKind, RadialSolution, SolverParams};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Environment variable holding the default output root.
pub const OUTPUT_ROOT_ENV: &str = "ISOTHERM_OUT";
pub const DEFAULT_OUTPUT_ROOT: &str = "isotherm-out";

/// Output root from [`OUTPUT_ROOT_ENV`], falling back to [`DEFAULT_OUTPUT_ROOT`].
pub fn default_output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV).map_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT), PathBuf::from)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub id: String,
    pub scene: SceneConfig,
    #[serde(default)]
    pub solver: SolverParams,
    pub analysis: Analysis,
    /// Output directory; defaults to `<root>/<id>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// Bounds on the balance deviation over `Γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BalanceCheck {
    pub radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at_most: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at_least: Option<f64>,
}

/// Which auxiliary field a spot value is read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuxSource {
    Elliptic,
    Time,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpotValue {
    pub point: Vec<f64>,
    pub value: f64,
    pub tolerance: f64,
    pub source: AuxSource,
}

/// The analysis run on the scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pipeline", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Analysis {
    /// Concentricity discriminator on boundary-problem runs at several spacings.
    Discriminator {
        resolutions: Vec<f64>,
        #[serde(default)]
        options: DiscriminatorOptions,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        balance: Option<BalanceCheck>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect: Option<Verdict>,
    },
    /// Varadhan limit at `point` against `d(point)^2`.
    Varadhan { point: Vec<f64>, tolerance: f64 },
    /// Small-time heat content of a tangent ball against its closed-form
    /// limit, and optionally the tube slice slope.
    Asymptotics {
        ball: Ball,
        #[serde(default = "default_kind")]
        kind: ProblemKind,
        tolerance: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tube: Option<TubeCheck>,
    },
    /// Ratio of whole-space to boundary-problem limits.
    HalfConstant { ball: Ball, expected: f64, tolerance: f64 },
    /// Time-integrated against directly solved auxiliary functions.
    Auxiliary {
        #[serde(default = "default_kind")]
        kind: ProblemKind,
        tolerance: f64,
        #[serde(default)]
        spots: Vec<SpotValue>,
        /// Tolerance of the fitted radial coefficients against the closed form.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        coefficients: Option<f64>,
    },
    /// Barrier sandwich and residual sign on the whole-space radial run.
    Sandwich {
        epsilon: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rho0: Option<f64>,
        #[serde(default = "default_rays")]
        rays: usize,
        /// Start of the residual-sign time range.
        residual_from: f64,
        #[serde(default)]
        sampling: ResidualSampling,
    },
    /// Comparison-function cases; every case other than (i) must separate by
    /// `separation` times the case-(i) residual.
    Hopf { cases: Vec<HopfParams>, separation: f64 },
    /// Cartesian runs against a radial reference on a concentric plane scene.
    Convergence {
        resolutions: Vec<f64>,
        reference_h: f64,
        /// Cells closer than this to an interface count only in the global error.
        margin: f64,
        from_time: f64,
        away_order: f64,
        global_order: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TubeCheck {
    pub s_min: f64,
    pub tolerance: f64,
}

fn default_kind() -> ProblemKind {
    ProblemKind::Ibvp
}

fn default_rays() -> usize {
    1
}

impl Analysis {
    pub fn name(&self) -> &'static str {
        match self {
            Analysis::Discriminator { .. } => "discriminator",
            Analysis::Varadhan { .. } => "varadhan",
            Analysis::Asymptotics { .. } => "asymptotics",
            Analysis::HalfConstant { .. } => "half-constant",
            Analysis::Auxiliary { .. } => "auxiliary",
            Analysis::Sandwich { .. } => "sandwich",
            Analysis::Hopf { .. } => "hopf",
            Analysis::Convergence { .. } => "convergence",
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// SHA-256 of the compact JSON form.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(serde_json::to_vec(self)?)))
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() || !self.id.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
            return Err(Error::Config(format!("experiment id {:?} must be a non-empty file-name-safe string", self.id)));
        }
        self.scene.validate()?;
        self.solver.validate()?;
        match &self.analysis {
            Analysis::Discriminator { resolutions, .. } | Analysis::Convergence { resolutions, .. } => {
                if resolutions.len() < 2 || resolutions.iter().any(|h| !(*h > 0.0)) {
                    return Err(Error::Config("at least two positive resolutions are required".into()));
                }
            }
            Analysis::Hopf { cases, .. } => {
                if !cases.iter().any(|c| c.case == HopfCase::I) {
                    return Err(Error::Config("the case analysis needs a case (i) reference".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Sets the spatial step; for multi-resolution pipelines the finest
    /// spacing becomes `h` and the others keep their ratios to it.
    pub fn with_resolution(mut self, h: f64) -> Self {
        self.solver.h = h;
        if let Analysis::Discriminator { resolutions, .. } | Analysis::Convergence { resolutions, .. } = &mut self.analysis {
            let finest = resolutions.iter().copied().fold(f64::INFINITY, f64::min);
            for r in resolutions.iter_mut() {
                *r *= h / finest;
            }
        }
        self
    }
}

// ---------------------------------------------------------------------------
// Bundled experiments

const BUNDLED: [(&str, &str); 10] = [
    ("theorem1-concentric", include_str!("../experiments/theorem1-concentric.json")),
    ("theorem1-offset", include_str!("../experiments/theorem1-offset.json")),
    ("asymptotics-2d", include_str!("../experiments/asymptotics-2d.json")),
    ("cauchy-halfconstant", include_str!("../experiments/cauchy-halfconstant.json")),
    ("barriers-sandwich", include_str!("../experiments/barriers-sandwich.json")),
    ("hopf-cases", include_str!("../experiments/hopf-cases.json")),
    ("varadhan-disk", include_str!("../experiments/varadhan-disk.json")),
    ("auxiliary-disk", include_str!("../experiments/auxiliary-disk.json")),
    ("auxiliary-cauchy-3d", include_str!("../experiments/auxiliary-cauchy-3d.json")),
    ("solver-convergence", include_str!("../experiments/solver-convergence.json")),
];

/// Names of the bundled experiments; the first six form the default suite.
pub fn bundled_names() -> Vec<&'static str> {
    BUNDLED.iter().map(|(n, _)| *n).collect()
}

pub fn bundled(name: &str) -> Result<ExperimentConfig> {
    let name = if name == "theorem1-offset-0.2" { "theorem1-offset" } else { name };
    let (_, text) = BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::Config(format!("no bundled experiment named {name:?}")))?;
    ExperimentConfig::from_json(text)
}

// ---------------------------------------------------------------------------
// Results

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Outcome {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Human-readable acceptance condition, e.g. `<= 0.001`.
    pub condition: String,
    pub outcome: Outcome,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        let outcome = if value <= bound { Outcome::Pass } else { Outcome::Fail };
        Self { name: name.into(), value, condition: format!("<= {bound:e}"), outcome }
    }

    fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        let outcome = if value >= bound { Outcome::Pass } else { Outcome::Fail };
        Self { name: name.into(), value, condition: format!(">= {bound:e}"), outcome }
    }

    fn near(name: impl Into<String>, value: f64, target: f64, tolerance: f64) -> Self {
        let outcome = if (value - target).abs() <= tolerance { Outcome::Pass } else { Outcome::Fail };
        Self { name: name.into(), value, condition: format!("= {target:e} +- {tolerance:e}"), outcome }
    }

    fn relative(name: impl Into<String>, value: f64, target: f64, tolerance: f64) -> Self {
        let outcome = if (value - target).abs() <= tolerance * target.abs() { Outcome::Pass } else { Outcome::Fail };
        Self { name: name.into(), value, condition: format!("= {target:e} +- {}%", tolerance * 100.0), outcome }
    }

    fn flag(name: impl Into<String>, ok: bool) -> Self {
        let outcome = if ok { Outcome::Pass } else { Outcome::Fail };
        Self { name: name.into(), value: f64::from(u8::from(ok)), condition: "= 1".into(), outcome }
    }
}

/// A CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// 17 significant digits.
pub fn fmt_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// One row of the long-format table.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub quantity: String,
    pub t: Option<f64>,
    pub value: f64,
}

/// Everything a run produces before it is written out.
#[derive(Debug, Clone)]
pub struct Report {
    pub config: ExperimentConfig,
    pub verdict: Option<Verdict>,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
    pub samples: Vec<Sample>,
    pub notes: Vec<String>,
    pub wall_time: f64,
}

impl Report {
    fn new(config: &ExperimentConfig) -> Self {
        Self {
            config: config.clone(),
            verdict: None,
            checks: Vec::new(),
            tables: Vec::new(),
            samples: Vec::new(),
            notes: Vec::new(),
            wall_time: 0.0,
        }
    }

    fn sample(&mut self, quantity: impl Into<String>, t: Option<f64>, value: f64) {
        self.samples.push(Sample { quantity: quantity.into(), t, value });
    }

    fn check(&mut self, check: Check) {
        self.sample(format!("check:{}", check.name), None, check.value);
        self.checks.push(check);
    }

    /// 0 decided, 1 a check failed, 2 inconclusive.
    pub fn exit_code(&self) -> i32 {
        exit_code_of(self.verdict, &self.checks)
    }
}

fn exit_code_of(verdict: Option<Verdict>, checks: &[Check]) -> i32 {
    if checks.iter().any(|c| c.outcome == Outcome::Fail) {
        1
    } else if verdict == Some(Verdict::Inconclusive) || checks.iter().any(|c| c.outcome == Outcome::Inconclusive) {
        2
    } else {
        0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    pub pipeline: String,
    pub config_hash: String,
    pub tool_version: String,
    pub wall_time_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    pub exit_code: i32,
    pub checks: Vec<Check>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub files: Vec<FileRecord>,
}

impl RunManifest {
    pub const FILE_NAME: &'static str = "manifest.json";

    pub fn load(dir: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(dir.join(Self::FILE_NAME))?)?)
    }

    /// Recomputes the checksums of the listed files; returns the mismatches.
    pub fn verify_files(&self, dir: &Path) -> Result<Vec<String>> {
        let mut bad = Vec::new();
        for f in &self.files {
            let data = std::fs::read(dir.join(&f.path))?;
            if data.len() as u64 != f.bytes || hex::encode(Sha256::digest(&data)) != f.sha256 {
                bad.push(f.path.clone());
            }
        }
        Ok(bad)
    }
}

// ---------------------------------------------------------------------------
// Running

/// A solution of either solver.
#[derive(Debug, Clone)]
pub enum Simulation {
    Radial(RadialSolution),
    Grid(FieldSeries),
}

impl Simulation {
    pub fn field(&self) -> &dyn SolutionField {
        match self {
            Simulation::Radial(s) => s,
            Simulation::Grid(s) => s,
        }
    }
}

/// Radial solver for concentric scenes, Cartesian solver for other plane scenes.
pub fn simulate(scene: &SceneConfig, kind: ProblemKind, params: &SolverParams) -> Result<Simulation> {
    scene.validate()?;
    if scene.is_concentric() {
        return Ok(Simulation::Radial(solve_radial(scene, kind, params)?));
    }
    let grid = grid_for_scene(scene, kind, params)?;
    Ok(Simulation::Grid(match kind {
        ProblemKind::Ibvp => solve_ibvp_2d(scene, &grid, params, GridOptions::default())?,
        ProblemKind::Cauchy => solve_cauchy_2d(scene, &grid, params, GridOptions::default())?,
    }))
}

/// Probe points: samples of `Γ` when the scene has a test surface, otherwise
/// eleven points on the first axis from the center to the boundary.
pub fn probe_points(scene: &SceneConfig) -> Result<Vec<Vec<f64>>> {
    if scene.surface_offset > 0.0 {
        return gamma_samples(scene, 16);
    }
    let (lo, hi) = match scene.outer.inner_radius() {
        Some(a) => (a, scene.outer.outer_radius()),
        None => (0.0, scene.outer.outer_radius()),
    };
    Ok((0..=10)
        .map(|k| {
            let mut x = scene.outer.center.clone();
            x[0] += lo + (hi - lo) * k as f64 / 10.0;
            x
        })
        .collect())
}

/// Values of `u` at the probe points over time.
pub fn probe_table(sim: &Simulation) -> Result<Table> {
    let field = sim.field();
    let scene = field.scene();
    let points = probe_points(scene)?;
    let mut table = Table::new("probes", &["t", "probe", "x", "y", "z", "u"]);
    for (k, &t) in field.times().iter().enumerate() {
        for (i, p) in points.iter().enumerate() {
            let coord = |j: usize| p.get(j).map_or_else(String::new, |&v| fmt_num(v));
            table.push(vec![fmt_num(t), i.to_string(), coord(0), coord(1), coord(2), fmt_num(field.value_at(p, k)?)]);
        }
    }
    Ok(table)
}

/// Runs the solver only and reports the probe table.
pub fn run_simulation(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    let start = Instant::now();
    let kind = match &config.analysis {
        Analysis::Asymptotics { kind, .. } | Analysis::Auxiliary { kind, .. } => *kind,
        Analysis::Sandwich { .. } => ProblemKind::Cauchy,
        _ => ProblemKind::Ibvp,
    };
    let sim = simulate(&config.scene, kind, &config.solver)?;
    let mut report = Report::new(config);
    let table = probe_table(&sim)?;
    for row in &table.rows {
        report.sample(format!("u[probe={}]", row[1]), Some(row[0].parse().unwrap_or(f64::NAN)), row[5].parse().unwrap_or(f64::NAN));
    }
    report.tables.push(table);
    report.wall_time = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Runs the configured pipeline.
pub fn execute(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    let start = Instant::now();
    let mut report = Report::new(config);
    match &config.analysis {
        Analysis::Discriminator { resolutions, options, balance, expect } => {
            discriminator_pipeline(config, resolutions, options, balance.as_ref(), *expect, &mut report)?
        }
        Analysis::Varadhan { point, tolerance } => varadhan_pipeline(config, point, *tolerance, &mut report)?,
        Analysis::Asymptotics { ball, kind, tolerance, tube } => {
            asymptotics_pipeline(config, ball, *kind, *tolerance, tube.as_ref(), &mut report)?
        }
        Analysis::HalfConstant { ball, expected, tolerance } => {
            half_constant_pipeline(config, ball, *expected, *tolerance, &mut report)?
        }
        Analysis::Auxiliary { kind, tolerance, spots, coefficients } => {
            auxiliary_pipeline(config, *kind, *tolerance, spots, *coefficients, &mut report)?
        }
        Analysis::Sandwich { epsilon, rho0, rays, residual_from, sampling } => {
            sandwich_pipeline(config, *epsilon, *rho0, *rays, *residual_from, *sampling, &mut report)?
        }
        Analysis::Hopf { cases, separation } => hopf_pipeline(cases, *separation, &mut report)?,
        Analysis::Convergence { resolutions, reference_h, margin, from_time, away_order, global_order } => {
            convergence_pipeline(
                config,
                resolutions,
                *reference_h,
                *margin,
                *from_time,
                (*away_order, *global_order),
                &mut report,
            )?
        }
    }
    report.wall_time = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Executes the pipeline and writes its report under `root`.
pub fn run_experiment(config: &ExperimentConfig, root: &Path) -> Result<RunManifest> {
    let report = execute(config)?;
    let dir = config.output.clone().unwrap_or_else(|| root.join(&config.id));
    emit_report(&report, &dir)
}

fn write_file(dir: &Path, name: &str, data: &[u8], files: &mut Vec<FileRecord>) -> Result<()> {
    std::fs::write(dir.join(name), data)?;
    files.push(FileRecord { path: name.into(), bytes: data.len() as u64, sha256: hex::encode(Sha256::digest(data)) });
    Ok(())
}

/// Writes `config.json`, one CSV per table, `checks.csv`, `long.csv` and
/// `manifest.json` into `dir`.
pub fn emit_report(report: &Report, dir: &Path) -> Result<RunManifest> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let mut config = report.config.to_json()?;
    config.push('\n');
    write_file(dir, "config.json", config.as_bytes(), &mut files)?;
    for table in &report.tables {
        write_file(dir, &format!("{}.csv", table.name), table.to_csv().as_bytes(), &mut files)?;
    }
    let mut checks = Table::new("checks", &["check", "value", "condition", "outcome"]);
    for c in &report.checks {
        let outcome = serde_json::to_value(c.outcome)?.as_str().unwrap_or_default().to_string();
        checks.push(vec![c.name.clone(), fmt_num(c.value), c.condition.clone(), outcome]);
    }
    write_file(dir, "checks.csv", checks.to_csv().as_bytes(), &mut files)?;
    let mut long = String::from("experiment,quantity,t,value\n");
    for s in &report.samples {
        let t = s.t.map_or_else(String::new, fmt_num);
        let _ = writeln!(long, "{},{},{},{}", report.config.id, s.quantity, t, fmt_num(s.value));
    }
    write_file(dir, "long.csv", long.as_bytes(), &mut files)?;
    let manifest = RunManifest {
        experiment: report.config.id.clone(),
        pipeline: report.config.analysis.name().into(),
        config_hash: report.config.hash()?,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        wall_time_seconds: report.wall_time,
        verdict: report.verdict,
        exit_code: report.exit_code(),
        checks: report.checks.clone(),
        notes: report.notes.clone(),
        files,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(dir.join(RunManifest::FILE_NAME), text)?;
    Ok(manifest)
}

// ---------------------------------------------------------------------------
// Pipelines

fn discriminator_pipeline(
    config: &ExperimentConfig,
    resolutions: &[f64],
    options: &DiscriminatorOptions,
    balance: Option<&BalanceCheck>,
    expect: Option<Verdict>,
    report: &mut Report,
) -> Result<()> {
    let scene = &config.scene;
    let mut runs = Vec::new();
    for &h in resolutions {
        let params = SolverParams { h, ..config.solver.clone() };
        let grid = grid_for_scene(scene, ProblemKind::Ibvp, &params)?;
        runs.push(solve_ibvp_2d(scene, &grid, &params, GridOptions::default())?);
    }
    let points = gamma_samples(scene, options.samples)?;
    let mut stat = Table::new("stationarity", &["h", "t", "mean", "relative_spread"]);
    let mut bal = Table::new("balance", &["h", "t", "max_heat", "min_heat"]);
    for run in &runs {
        let h = run.grid.h;
        let s = stationarity_metric(run, &points, options.window)?;
        for ((t, a), (_, spread)) in s.trace.iter().zip(&s.spread) {
            stat.push(vec![fmt_num(h), fmt_num(*t), fmt_num(*a), fmt_num(*spread)]);
            report.sample(format!("stationarity_spread[h={h}]"), Some(*t), *spread);
        }
        if let Some(b) = balance {
            let r = balance_deviation(run, &points, b.radius, options.window)?;
            for (t, hi, lo) in &r.trace {
                bal.push(vec![fmt_num(h), fmt_num(*t), fmt_num(*hi), fmt_num(*lo)]);
            }
            if let Some(bound) = b.at_most {
                report.check(Check::at_most(format!("balance_deviation[h={h}]"), r.deviation, bound));
            }
            if let Some(bound) = b.at_least {
                report.check(Check::at_least(format!("balance_deviation[h={h}]"), r.deviation, bound));
            }
            if b.at_most.is_none() && b.at_least.is_none() {
                report.sample(format!("balance_deviation[h={h}]"), None, r.deviation);
            }
        }
    }
    let refs: Vec<&FieldSeries> = runs.iter().collect();
    let d = concentricity_discriminator(scene, &refs, options)?;
    let mut metrics = Table::new("discriminator", &["h", "metric", "worst_time"]);
    for m in &d.metrics {
        metrics.push(vec![fmt_num(m.h), fmt_num(m.metric), fmt_num(m.worst_time)]);
        report.sample(format!("stationarity_metric[h={}]", m.h), None, m.metric);
    }
    if let Some(r) = d.residuals {
        report.sample("interface_value_jump", None, r.value_jump);
        report.sample("interface_flux_jump", None, r.flux_jump);
        report.sample("interface_pde_residual", None, r.pde_residual);
    }
    if let Some(hopf) = &d.hopf {
        report.sample("hopf_case_i_residual", None, hopf.residual());
    }
    report.tables.extend([stat, metrics]);
    if balance.is_some() {
        report.tables.push(bal);
    }
    if let Some(note) = &d.instruction {
        report.notes.push(note.clone());
    }
    report.verdict = Some(d.verdict);
    if let Some(expected) = expect {
        report.check(Check::flag(format!("verdict={}", verdict_name(expected)), d.verdict == expected));
    }
    Ok(())
}

pub fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Concentric => "CONCENTRIC",
        Verdict::NonConcentric => "NON-CONCENTRIC",
        Verdict::Inconclusive => "INCONCLUSIVE",
    }
}

fn varadhan_pipeline(config: &ExperimentConfig, point: &[f64], tolerance: f64, report: &mut Report) -> Result<()> {
    let sim = simulate(&config.scene, ProblemKind::Ibvp, &config.solver)?;
    let v = varadhan_profile(sim.field(), point)?;
    let mut table = Table::new("varadhan", &["t", "minus_4t_log_u"]);
    for (t, y) in &v.samples {
        table.push(vec![fmt_num(*t), fmt_num(*y)]);
        report.sample("minus_4t_log_u", Some(*t), *y);
    }
    report.tables.push(table);
    report.sample("aitken_spread", None, v.residual);
    report.check(Check::relative("varadhan_limit", v.limit, v.target, tolerance));
    Ok(())
}

fn heat_content_table(name: &str, samples: &[(f64, f64)], power: f64, report: &mut Report) -> Table {
    let mut table = Table::new(name, &["t", "heat_content", "normalized"]);
    for (t, q) in samples {
        let n = q * t.powf(-power);
        table.push(vec![fmt_num(*t), fmt_num(*q), fmt_num(n)]);
        report.sample(format!("{name}_normalized"), Some(*t), n);
    }
    table
}

fn asymptotics_pipeline(
    config: &ExperimentConfig,
    ball: &Ball,
    kind: ProblemKind,
    tolerance: f64,
    tube: Option<&TubeCheck>,
    report: &mut Report,
) -> Result<()> {
    let scene = &config.scene;
    let n = scene.dimension;
    let sim = simulate(scene, kind, &config.solver)?;
    let a = asymptotic_heat_content(sim.field(), ball)?;
    let power = (n as f64 + 1.0) / 4.0;
    let table = heat_content_table("heat_content", &a.samples, power, report);
    report.tables.push(table);
    report.sample("fit_error_estimate", None, a.error_estimate);
    match a.target {
        Some(target) => report.check(Check::relative("heat_content_limit", a.limit, target, tolerance)),
        None => report.check(Check::flag("heat_content_divergent", a.divergent)),
    }
    if let Some(tc) = tube {
        let slope = scene.tube_slope(ball, tc.s_min)?;
        let y = scene.contact_point(ball)?;
        let Weingarten::Finite(w) = scene.weingarten_product(&y, ball.radius)? else {
            return Err(Error::InvalidArgument("tube slope needs a non-degenerate contact".into()));
        };
        let target = 2f64.powf(0.5 * (n as f64 - 1.0)) * unit_ball_volume(n - 1) / w.sqrt();
        report.check(Check::relative("tube_slope", slope, target, tc.tolerance));
    }
    Ok(())
}

fn half_constant_pipeline(
    config: &ExperimentConfig,
    ball: &Ball,
    expected: f64,
    tolerance: f64,
    report: &mut Report,
) -> Result<()> {
    let scene = &config.scene;
    let power = (scene.dimension as f64 + 1.0) / 4.0;
    let ibvp = simulate(scene, ProblemKind::Ibvp, &config.solver)?;
    let cauchy = simulate(scene, ProblemKind::Cauchy, &config.solver)?;
    let a = asymptotic_heat_content(ibvp.field(), ball)?;
    let b = asymptotic_heat_content(cauchy.field(), ball)?;
    let t1 = heat_content_table("heat_content_ibvp", &a.samples, power, report);
    let t2 = heat_content_table("heat_content_cauchy", &b.samples, power, report);
    report.tables.extend([t1, t2]);
    report.sample("limit_ibvp", None, a.limit);
    report.sample("limit_cauchy", None, b.limit);
    if scene.sigma.medium != scene.sigma.shell {
        report.notes.push("the ratio is one half only when the medium and shell conductivities agree".into());
    }
    report.check(Check::near("cauchy_to_ibvp_ratio", b.limit / a.limit, expected, tolerance));
    Ok(())
}

fn aux_value(aux: &AuxiliaryFields, point: &[f64]) -> Result<f64> {
    aux.value_at(point)
}

fn auxiliary_pipeline(
    config: &ExperimentConfig,
    kind: ProblemKind,
    tolerance: f64,
    spots: &[SpotValue],
    coefficients: Option<f64>,
    report: &mut Report,
) -> Result<()> {
    let scene = &config.scene;
    let sim = simulate(scene, kind, &config.solver)?;
    let timed = match &sim {
        Simulation::Radial(s) => auxiliary_by_time_integration(s)?,
        Simulation::Grid(s) => auxiliary_by_time_integration(s)?,
    };
    let direct = match &sim {
        Simulation::Radial(_) => solve_auxiliary(scene, kind, &config.solver)?,
        Simulation::Grid(s) => crate::elliptic::solve_auxiliary_grid(scene, &s.grid)?,
    };
    let mut table = Table::new("auxiliary", &["x", "y", "z", "time_integrated", "elliptic"]);
    let points = match &sim {
        Simulation::Radial(s) => s
            .grid
            .nodes
            .iter()
            .filter(|&&r| r <= 2.0 * scene.outer.outer_radius())
            .map(|&r| {
                let mut x = scene.outer.center.clone();
                x[0] += r;
                x
            })
            .collect::<Vec<_>>(),
        Simulation::Grid(_) => probe_points(scene)?,
    };
    for p in &points {
        let coord = |j: usize| p.get(j).map_or_else(String::new, |&v| fmt_num(v));
        table.push(vec![coord(0), coord(1), coord(2), fmt_num(aux_value(&timed, p)?), fmt_num(aux_value(&direct, p)?)]);
    }
    report.tables.push(table);
    report.sample("interface_flux_jump", None, direct.residuals.flux_jump);
    report.check(Check::at_most("time_vs_elliptic_relative_linf", relative_linf(&timed, &direct)?, tolerance));
    for s in spots {
        let field = match s.source {
            AuxSource::Elliptic => &direct,
            AuxSource::Time => &timed,
        };
        let source = if s.source == AuxSource::Elliptic { "elliptic" } else { "time" };
        let value = aux_value(field, &s.point)?;
        let at: Vec<String> = s.point.iter().map(|v| v.to_string()).collect();
        report.check(Check::near(format!("{source}_value_at({})", at.join(";")), value, s.value, s.tolerance));
    }
    if let Some(tol) = coefficients {
        let exact = radial_closed_form(scene, kind)?;
        let fitted = fit_radial_coefficients(&direct)?;
        report.check(Check::near("c1", fitted.c1, exact.profile.c1, tol));
        report.check(Check::near("c2", fitted.c2, exact.profile.c2, tol));
        if let (Some(c3), Some(e3)) = (fitted.c3, exact.c3) {
            report.check(Check::near("c3", c3, e3, tol));
        }
    }
    Ok(())
}

fn sandwich_pipeline(
    config: &ExperimentConfig,
    epsilon: f64,
    rho0: Option<f64>,
    rays: usize,
    residual_from: f64,
    sampling: ResidualSampling,
    report: &mut Report,
) -> Result<()> {
    let scene = &config.scene;
    let mut params = BarrierParams::for_scene(scene, epsilon, rho0)?;
    if !params.t1.is_finite() {
        return Err(Error::InvalidArgument("flat collars have no barrier time scale".into()));
    }
    let solver = SolverParams { t_max: 1.01 * params.t1, ..config.solver.clone() };
    let sim = simulate(scene, ProblemKind::Cauchy, &solver)?;
    let s = verify_sandwich(sim.field(), &mut params, rays)?;
    let r = verify_residual_sign(&params, scene, residual_from, params.t1, sampling)?;
    let mut table = Table::new("barriers", &["quantity", "value"]);
    for (name, value) in [
        ("t1", params.t1),
        ("t_eps", s.t_eps),
        ("t_resolved", s.t_resolved),
        ("e1", s.e1),
        ("e2", s.e2),
        ("worst_margin", s.worst_margin),
        ("residual_min_plus", r.min_plus),
        ("residual_min_minus", r.min_minus),
        ("fd_budget", r.fd_budget),
        ("closed_form_gap", r.closed_form_gap),
    ] {
        table.push(vec![name.into(), fmt_num(value)]);
        report.sample(name, None, value);
    }
    report.tables.push(table);
    if s.thin_collar {
        report.notes.push("collar thinner than four cells".into());
    }
    report.notes.push(format!("sandwich tolerance {SANDWICH_TOLERANCE:e} over {} samples", s.samples));
    report.check(Check::at_most("sandwich_violations", s.violations as f64, 0.0));
    report.check(Check::at_most("residual_sign_violations", r.violations as f64, 0.0));
    Ok(())
}

fn hopf_pipeline(cases: &[HopfParams], separation: f64, report: &mut Report) -> Result<()> {
    let mut results = Vec::new();
    for p in cases {
        results.push(hopf_case_analysis(p)?);
    }
    let mut table = Table::new(
        "hopf",
        &["case", "c1", "anchor_radius", "min_difference", "max_difference", "normal_gap", "tolerance", "verdict"],
    );
    for r in &results {
        let case = serde_json::to_value(r.case)?.as_str().unwrap_or_default().to_string();
        let verdict = serde_json::to_value(r.verdict)?.as_str().unwrap_or_default().to_string();
        table.push(vec![
            case,
            fmt_num(r.profile.c1),
            fmt_num(r.hat.anchor_radius),
            fmt_num(r.min_diff),
            fmt_num(r.max_diff),
            fmt_num(r.gap),
            fmt_num(r.tolerance),
            verdict,
        ]);
    }
    report.tables.push(table);
    let reference = results.iter().filter(|r| r.case == HopfCase::I).map(|r| r.residual()).fold(0.0, f64::max);
    for (i, r) in results.iter().enumerate() {
        let label = serde_json::to_value(r.case)?.as_str().unwrap_or_default().to_string();
        let label = format!("{label}#{i}");
        if r.case == HopfCase::I {
            report.check(Check::at_most(format!("case_{label}_residual"), r.residual(), r.tolerance));
        } else {
            report.check(Check::flag(format!("case_{label}_strict_sign"), r.strict));
            report.check(Check::at_least(format!("case_{label}_normal_gap"), r.gap.abs(), separation * reference));
            if r.verdict != HopfVerdict::Contradiction {
                report.notes.push(format!("case {label} verdict {:?}", r.verdict));
            }
        }
    }
    Ok(())
}

fn convergence_pipeline(
    config: &ExperimentConfig,
    resolutions: &[f64],
    reference_h: f64,
    margin: f64,
    from_time: f64,
    orders: (f64, f64),
    report: &mut Report,
) -> Result<()> {
    let scene = &config.scene;
    if scene.dimension != 2 || !scene.is_concentric() {
        return Err(Error::InvalidArgument("convergence runs need a concentric plane scene".into()));
    }
    let reference = solve_radial(scene, ProblemKind::Ibvp, &SolverParams { h: reference_h, ..config.solver.clone() })?;
    let mut interfaces: Vec<f64> = scene.boundary_components().iter().map(|c| c.radius).collect();
    interfaces.extend(scene.core_radius());
    let mut hs: Vec<f64> = resolutions.to_vec();
    hs.sort_by(|a, b| b.total_cmp(a));
    let mut table = Table::new("convergence", &["h", "global_error", "away_error", "bound_violations"]);
    let mut errors = Vec::new();
    let mut total_violations = 0usize;
    for &h in &hs {
        let params = SolverParams { h, ..config.solver.clone() };
        let grid = grid_for_scene(scene, ProblemKind::Ibvp, &params)?;
        let sol = solve_ibvp_2d(scene, &grid, &params, GridOptions::default())?;
        let (mut global, mut away, mut violations) = (0.0f64, 0.0f64, 0usize);
        for k in 0..sol.times.len() {
            let snap = sol.snapshot(k);
            let slack = crate::grid::ITERATIVE_SLACK;
            violations += snap.iter().filter(|&&u| !(-slack..=1.0 + slack).contains(&u)).count();
            if sol.times[k] < from_time {
                continue;
            }
            for c in 0..grid.len() {
                if !sol.active[c] {
                    continue;
                }
                let x = grid.cell_center(c);
                let r = crate::geometry::distance(&x, &scene.outer.center);
                let e = (snap[c] - reference.value_at_radius(r, k)?).abs();
                global = global.max(e);
                if interfaces.iter().all(|&a| (r - a).abs() >= margin) {
                    away = away.max(e);
                }
            }
        }
        total_violations += violations;
        table.push(vec![fmt_num(h), fmt_num(global), fmt_num(away), violations.to_string()]);
        report.sample(format!("global_error[h={h}]"), None, global);
        report.sample(format!("away_error[h={h}]"), None, away);
        errors.push((h, global, away));
    }
    report.tables.push(table);
    for w in errors.windows(2) {
        let ratio = (w[0].0 / w[1].0).ln();
        let global = (w[0].1 / w[1].1).ln() / ratio;
        let away = (w[0].2 / w[1].2).ln() / ratio;
        report.check(Check::at_least(format!("away_order[h={}]", w[1].0), away, orders.0));
        report.check(Check::at_least(format!("global_order[h={}]", w[1].0), global, orders.1));
    }
    report.check(Check::at_most("max_principle_violations", total_violations as f64, 0.0));
    Ok(())
}
