use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use isotherm::harness::{
    bundled, bundled_names, emit_report, execute, run_simulation, verdict_name, Analysis, ExperimentConfig, Outcome,
    RunManifest, DEFAULT_OUTPUT_ROOT, OUTPUT_ROOT_ENV,
};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Heat conduction experiments on balls and shells.
#[derive(Parser)]
#[command(name = "isotherm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the solver only and write probe values over time.
    Simulate(Single),
    /// Run the configured analysis pipeline.
    Analyze(Single),
    /// Run the concentricity discriminator of a config.
    Discriminate(Single),
    /// Run several experiments (the bundled suite by default).
    Suite(Suite),
}

#[derive(Args)]
struct Common {
    /// Output root; each experiment writes to `<out>/<id>`.
    #[arg(long, env = OUTPUT_ROOT_ENV, default_value = DEFAULT_OUTPUT_ROOT)]
    out: PathBuf,
    /// Override the spatial step (the finest one for multi-resolution pipelines).
    #[arg(long)]
    resolution: Option<f64>,
}

#[derive(Args)]
struct Single {
    /// Config file, or the name of a bundled experiment.
    #[arg(long)]
    config: String,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Suite {
    /// Config files or bundled names; defaults to the six core experiments.
    #[arg(long)]
    config: Vec<String>,
    /// Include every bundled experiment.
    #[arg(long, conflicts_with = "config")]
    all: bool,
    /// Experiments run at the same time.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    common: Common,
}

fn load(name: &str, resolution: Option<f64>) -> anyhow::Result<ExperimentConfig> {
    let path = Path::new(name);
    let config = if path.exists() {
        ExperimentConfig::load(path).with_context(|| format!("reading {name}"))?
    } else if bundled_names().contains(&name) || name == "theorem1-offset-0.2" {
        bundled(name)?
    } else {
        bail!("{name} is neither a file nor a bundled experiment ({})", bundled_names().join(", "));
    };
    Ok(match resolution {
        Some(h) if h > 0.0 => config.with_resolution(h),
        Some(h) => bail!("resolution must be positive, got {h}"),
        None => config,
    })
}

fn output_dir(config: &ExperimentConfig, root: &Path) -> PathBuf {
    config.output.clone().unwrap_or_else(|| root.join(&config.id))
}

fn summary(m: &RunManifest) -> String {
    let status = match m.verdict {
        Some(v) => verdict_name(v).to_string(),
        None if m.checks.iter().any(|c| c.outcome == Outcome::Fail) => "FAIL".into(),
        None => "PASS".into(),
    };
    let failed: Vec<&str> =
        m.checks.iter().filter(|c| c.outcome == Outcome::Fail).map(|c| c.name.as_str()).collect();
    let mut line = format!("{}: {status} ({:.1} s)", m.experiment, m.wall_time_seconds);
    if !failed.is_empty() {
        line.push_str(&format!(" failed: {}", failed.join(", ")));
    }
    line
}

fn run_one(config: &ExperimentConfig, root: &Path, simulate_only: bool) -> anyhow::Result<RunManifest> {
    let report = if simulate_only { run_simulation(config)? } else { execute(config)? };
    let dir = output_dir(config, root);
    let manifest = emit_report(&report, &dir).with_context(|| format!("writing {}", dir.display()))?;
    for note in &manifest.notes {
        eprintln!("{}: {note}", manifest.experiment);
    }
    Ok(manifest)
}

fn single(args: &Single, mode: &str) -> anyhow::Result<i32> {
    let config = load(&args.config, args.common.resolution)?;
    if mode == "discriminate" && !matches!(config.analysis, Analysis::Discriminator { .. }) {
        bail!("{} does not configure the discriminator pipeline", config.id);
    }
    let manifest = run_one(&config, &args.common.out, mode == "simulate")?;
    println!("{} -> {}", summary(&manifest), output_dir(&config, &args.common.out).display());
    Ok(manifest.exit_code)
}

fn suite(args: &Suite) -> anyhow::Result<i32> {
    let names: Vec<String> = if !args.config.is_empty() {
        args.config.clone()
    } else if args.all {
        bundled_names().iter().map(|s| s.to_string()).collect()
    } else {
        bundled_names().iter().take(6).map(|s| s.to_string()).collect()
    };
    let configs = names.iter().map(|n| load(n, args.common.resolution)).collect::<anyhow::Result<Vec<_>>>()?;
    let results: Vec<Mutex<Option<anyhow::Result<RunManifest>>>> = configs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..args.jobs.clamp(1, configs.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(config) = configs.get(i) else { break };
                let r = run_one(config, &args.common.out, false);
                *results[i].lock().unwrap() = Some(r);
            });
        }
    });
    let mut code = 0;
    for (config, slot) in configs.iter().zip(results) {
        match slot.into_inner().unwrap().expect("every experiment runs") {
            Ok(m) => {
                println!("{}", summary(&m));
                code = worst(code, m.exit_code);
            }
            Err(e) => {
                println!("{}: ERROR {e:#}", config.id);
                code = worst(code, 1);
            }
        }
    }
    Ok(code)
}

/// Errors dominate inconclusive runs, which dominate decided ones.
fn worst(a: i32, b: i32) -> i32 {
    let rank = |c: i32| match c {
        0 => 0,
        2 => 1,
        _ => 2,
    };
    if rank(b) > rank(a) {
        b
    } else {
        a
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => single(a, "simulate"),
        Command::Analyze(a) => single(a, "analyze"),
        Command::Discriminate(a) => single(a, "discriminate"),
        Command::Suite(a) => suite(a),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
