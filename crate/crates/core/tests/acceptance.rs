//! Acceptance runner: one PASS/FAIL line per criterion, with the measured
//! values, tolerances and wall time.

use isotherm::elliptic::{auxiliary_by_time_integration, relative_linf, solve_auxiliary_grid, Verdict};
use isotherm::grid::{grid_for_scene, solve_ibvp_2d, GridOptions};
use isotherm::harness::{bundled, execute, Analysis, Check, Outcome, Report};
use isotherm::radial::{ProblemKind, SolverParams};
use isotherm::{Ball, Conductivities, DomainSpec, SceneConfig};
use std::f64::consts::PI;
use std::time::{Duration, Instant};

struct Line {
    number: usize,
    title: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
    budget: Duration,
}

fn minutes(m: u64) -> Duration {
    Duration::from_secs(60 * m)
}

fn find<'a>(report: &'a Report, name: &str) -> Option<&'a Check> {
    report.checks.iter().find(|c| c.name == name)
}

fn all_pass(report: &Report) -> bool {
    !report.checks.is_empty() && report.checks.iter().all(|c| c.outcome == Outcome::Pass)
}

fn describe(report: &Report) -> String {
    report.checks.iter().map(|c| format!("{}={:.6e} ({})", c.name, c.value, c.condition)).collect::<Vec<_>>().join("; ")
}

fn run(name: &str) -> (Result<Report, String>, Duration) {
    let start = Instant::now();
    let r = bundled(name).and_then(|c| execute(&c)).map_err(|e| e.to_string());
    (r, start.elapsed())
}

/// Criterion from a bundled experiment whose checks are exactly the criterion.
fn from_experiment(number: usize, title: &'static str, name: &str, budget: Duration) -> Line {
    let (r, elapsed) = run(name);
    match r {
        Ok(report) => Line { number, title, pass: all_pass(&report), detail: describe(&report), elapsed, budget },
        Err(e) => Line { number, title, pass: false, detail: format!("error: {e}"), elapsed, budget },
    }
}

/// `2 c(2) √2` with `c(2) = 2^{1/2}·2·2^{3/2}Γ(5/4)/(3√π)`.
fn heat_content_oracle() -> f64 {
    let c2 = 2f64.sqrt() * 2.0 * (2f64.powf(1.5) * libm::tgamma(1.25)) / (3.0 * PI.sqrt());
    2.0 * c2 * 2f64.sqrt()
}

fn criterion_2() -> Line {
    let title = "heat-content asymptotics, disk rho=2, tangent r=1";
    let budget = minutes(5);
    let (r, elapsed) = run("asymptotics-2d");
    let oracle = heat_content_oracle();
    match r.as_ref().map(|rep| find(rep, "heat_content_limit").map(|c| c.value)) {
        Ok(Some(limit)) => {
            let rel = (limit - oracle).abs() / oracle;
            Line {
                number: 2,
                title,
                pass: rel <= 0.03,
                detail: format!("limit={limit:.6} oracle={oracle:.6} rel={rel:.3e} (<= 3e-2)"),
                elapsed,
                budget,
            }
        }
        Ok(None) => Line { number: 2, title, pass: false, detail: "no limit reported".into(), elapsed, budget },
        Err(e) => Line { number: 2, title, pass: false, detail: format!("error: {e}"), elapsed, budget },
    }
}

fn criterion_4() -> Line {
    let start = Instant::now();
    let scene = SceneConfig {
        dimension: 2,
        outer: DomainSpec::ball(vec![0.0, 0.0], 2.0),
        cores: vec![],
        sigma: Conductivities::uniform(1.0),
        surface_offset: 0.0,
    };
    let slope = scene.tube_slope(&Ball::new(vec![1.0, 0.0], 1.0), 1e-6);
    let (pass, detail) = match slope {
        Ok(s) => ((s - 4.0).abs() <= 0.02, format!("slope={s:.6} target=4 (+- 0.5%)")),
        Err(e) => (false, format!("error: {e}")),
    };
    Line { number: 4, title: "tube slice slope vs sqrt(s)", pass, detail, elapsed: start.elapsed(), budget: Duration::from_secs(1) }
}

struct TheoremRuns {
    concentric: Result<Report, String>,
    offset: Result<Report, String>,
    elapsed: Duration,
}

fn theorem_runs() -> TheoremRuns {
    let start = Instant::now();
    let (concentric, _) = run("theorem1-concentric");
    let (offset, _) = run("theorem1-offset");
    TheoremRuns { concentric, offset, elapsed: start.elapsed() }
}

fn balance_values(report: &Report) -> Vec<(String, f64)> {
    report
        .checks
        .iter()
        .filter(|c| c.name.starts_with("balance_deviation"))
        .map(|c| (c.name.clone(), c.value))
        .collect()
}

fn criterion_5(runs: &TheoremRuns) -> Line {
    let title = "balance law on Gamma (16 points)";
    let mut pass = true;
    let mut detail = Vec::new();
    for (label, report, ok) in [
        ("concentric", &runs.concentric, (|v: f64| v <= 1e-3) as fn(f64) -> bool),
        ("offset 0.2", &runs.offset, |v: f64| v >= 1e-2),
    ] {
        match report {
            Ok(r) => {
                let values = balance_values(r);
                if values.len() < 2 {
                    pass = false;
                }
                for (name, v) in values {
                    pass &= ok(v);
                    detail.push(format!("{label} {name}={v:.3e}"));
                }
            }
            Err(e) => {
                pass = false;
                detail.push(format!("{label} error: {e}"));
            }
        }
    }
    detail.push("bounds: concentric <= 1e-3, offset >= 1e-2".into());
    Line { number: 5, title, pass, detail: detail.join("; "), elapsed: runs.elapsed, budget: minutes(10) }
}

fn criterion_6(runs: &TheoremRuns) -> Line {
    let mut pass = true;
    let mut detail = Vec::new();
    for (label, report, expected) in
        [("concentric", &runs.concentric, Verdict::Concentric), ("offset 0.2", &runs.offset, Verdict::NonConcentric)]
    {
        match report {
            Ok(r) => {
                pass &= r.verdict == Some(expected) && r.exit_code() == 0;
                let metrics: Vec<String> = r
                    .samples
                    .iter()
                    .filter(|s| s.quantity.starts_with("stationarity_metric"))
                    .map(|s| format!("{}={:.3e}", s.quantity, s.value))
                    .collect();
                detail.push(format!("{label}: {:?} exit {} {}", r.verdict, r.exit_code(), metrics.join(" ")));
            }
            Err(e) => {
                pass = false;
                detail.push(format!("{label} error: {e}"));
            }
        }
    }
    Line {
        number: 6,
        title: "discriminator end to end",
        pass,
        detail: detail.join("; "),
        elapsed: runs.elapsed,
        budget: minutes(15),
    }
}

fn criterion_7() -> Line {
    let title = "auxiliary U: time integration vs elliptic, spot values";
    let start = Instant::now();
    let (radial, _) = run("auxiliary-disk");
    let mut pass = true;
    let mut detail = Vec::new();
    match radial {
        Ok(r) => {
            pass &= all_pass(&r);
            detail.push(format!("radial: {}", describe(&r)));
        }
        Err(e) => {
            pass = false;
            detail.push(format!("radial error: {e}"));
        }
    }
    // The Cartesian path on the same scene.
    let config = bundled("auxiliary-disk").expect("bundled");
    let params = SolverParams { h: 1.0 / 128.0, substeps: 8, ..config.solver.clone() };
    let grid_result = grid_for_scene(&config.scene, ProblemKind::Ibvp, &params).and_then(|grid| {
        let series = solve_ibvp_2d(&config.scene, &grid, &params, GridOptions::default())?;
        let timed = auxiliary_by_time_integration(&series)?;
        let direct = solve_auxiliary_grid(&config.scene, &grid)?;
        Ok((relative_linf(&timed, &direct)?, direct.value_at(&[0.5, 0.0])?, direct.value_at(&[0.0, 0.0])?))
    });
    match grid_result {
        Ok((rel, u, v)) => {
            pass &= rel <= 1e-2 && (u - 0.1875).abs() <= 2e-3 && (v - 0.21875).abs() <= 2e-3;
            detail.push(format!("grid h=1/128: rel_linf={rel:.3e} (<= 1e-2) U(0.5)={u:.6} V(0)={v:.6} (+- 2e-3)"));
        }
        Err(e) => {
            pass = false;
            detail.push(format!("grid error: {e}"));
        }
    }
    Line { number: 7, title, pass, detail: detail.join("; "), elapsed: start.elapsed(), budget: minutes(5) }
}

fn criterion_10() -> Line {
    let title = "case analysis (i), (ii), (iii), shell";
    let (r, elapsed) = run("hopf-cases");
    let budget = minutes(5);
    match r {
        Ok(report) => {
            let separation = match &bundled("hopf-cases").expect("bundled").analysis {
                Analysis::Hopf { separation, .. } => *separation,
                _ => 0.0,
            };
            let pass = all_pass(&report) && separation >= 10.0;
            Line { number: 10, title, pass, detail: describe(&report), elapsed, budget }
        }
        Err(e) => Line { number: 10, title, pass: false, detail: format!("error: {e}"), elapsed, budget },
    }
}

fn main() {
    let mut lines = Vec::new();
    let mut emit = |line: Line| {
        let ok = line.pass && line.elapsed <= line.budget;
        println!(
            "criterion {:>2}: {} | {} | {} | {:.1} s (budget {} s)",
            line.number,
            if ok { "PASS" } else { "FAIL" },
            line.title,
            line.detail,
            line.elapsed.as_secs_f64(),
            line.budget.as_secs()
        );
        lines.push(ok);
    };
    emit(from_experiment(1, "Varadhan limit at the disk center", "varadhan-disk", minutes(1)));
    emit(criterion_2());
    emit(from_experiment(3, "half-constant ratio", "cauchy-halfconstant", minutes(10)));
    emit(criterion_4());
    let runs = theorem_runs();
    emit(criterion_5(&runs));
    emit(criterion_6(&runs));
    emit(criterion_7());
    emit(from_experiment(8, "whole-space N=3 coefficients and W(2)", "auxiliary-cauchy-3d", minutes(5)));
    emit(from_experiment(9, "barrier sandwich and residual sign", "barriers-sandwich", minutes(2)));
    emit(criterion_10());
    emit(from_experiment(11, "2D vs radial convergence, max principle", "solver-convergence", minutes(10)));
    let passed = lines.iter().filter(|&&ok| ok).count();
    println!("acceptance: {passed}/{} criteria pass", lines.len());
    if passed != lines.len() {
        std::process::exit(1);
    }
}
