use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use lure_pcac_core::config::{load_preset, load_text};
use lure_pcac_core::export::{
    render_meta, write_stability, write_trajectory, RunSummary, META_FILE, STABILITY_FILE, TRAJECTORY_FILE,
};
use lure_pcac_core::lure::{simulate, SimulationConfig};
use lure_pcac_core::stability::{dmisb_check, probe_grid, run_analysis, sector_check};
use lure_pcac_core::Error;

const EXIT_IO: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGED: u8 = 3;
const EXIT_SECTOR: u8 = 4;

const PROBE_POINTS: usize = 10_000;
const PROBE_RANGE: f64 = 20.0;

#[derive(Parser)]
#[command(name = "lure-pcac", version, about = "Predictive cost adaptive control of Lur'e systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the closed loop and write trajectory.csv.
    Simulate(RunArgs),
    /// Run the closed loop and evaluate the certificates at the configured checkpoints.
    Analyze(RunArgs),
    /// Check the nonlinearity against the configured sector on a probe grid.
    SectorCheck(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Built-in preset: ex1, ex1p, ex2, ex3 or ex4.
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    preset: Option<String>,
    /// Configuration file with `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Override one key, e.g. `--set bpre.horizon=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

enum Failure {
    Config(String),
    Io(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } => Failure::Config(e.to_string()),
            other => Failure::Io(other.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Io(e)
    }
}

fn load(args: &RunArgs) -> Result<(SimulationConfig, String), Failure> {
    match (&args.preset, &args.config) {
        (Some(name), _) => Ok((load_preset(name, &args.overrides)?, format!("preset {name}"))),
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            Ok((load_text(&text, &args.overrides)?, format!("file {}", path.display())))
        }
        (None, None) => Err(Failure::Config("one of --preset or --config is required".into())),
    }
}

fn create(dir: &Path, name: &str) -> anyhow::Result<BufWriter<File>> {
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn write_meta(dir: &Path, config: &SimulationConfig, summary: &RunSummary) -> anyhow::Result<()> {
    let path = dir.join(META_FILE);
    fs::write(&path, render_meta(config, summary)).with_context(|| format!("writing {}", path.display()))
}

fn run_simulation(args: &RunArgs, analyze: bool) -> Result<u8, Failure> {
    let (config, source) = load(args)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let (trajectory, reports) = if analyze {
        let run = run_analysis(&config)?;
        (run.trajectory, Some(run.reports))
    } else {
        (simulate(&config)?, None)
    };
    write_trajectory(create(&args.out, TRAJECTORY_FILE)?, &trajectory).context("writing trajectory")?;
    if let Some(reports) = &reports {
        write_stability(create(&args.out, STABILITY_FILE)?, reports).context("writing stability")?;
    }
    let summary = RunSummary {
        mode: if analyze { "analyze" } else { "simulate" }.into(),
        source,
        steps: trajectory.len(),
        diverged_at: trajectory.diverged_at,
        reports: reports
            .as_ref()
            .map(|r| (r.len(), r.iter().filter(|x| x.is_consistent()).count())),
    };
    write_meta(&args.out, &config, &summary)?;

    println!("steps: {}", trajectory.len());
    if let Some(reports) = &reports {
        if let Some(last) = reports.last() {
            println!(
                "k = {}: circle {} (alpha {:.6}, beta {:.6}), tsypkin {} (alpha {:.6}, beta {:.6})",
                last.k,
                verdict(last.cc_pass),
                last.alpha_cc,
                last.beta_cc,
                verdict(last.tc_pass),
                last.alpha_tc,
                last.beta_tc
            );
        }
    }
    if let Some(k) = trajectory.diverged_at {
        eprintln!("state diverged at k = {k}; partial files kept in {}", args.out.display());
        return Ok(EXIT_DIVERGED);
    }
    Ok(0)
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "met"
    } else {
        "not met"
    }
}

fn run_sector_check(args: &RunArgs) -> Result<u8, Failure> {
    let (config, source) = load(args)?;
    let sector = &config.analysis.sector;
    let probes = probe_grid(config.outputs(), -PROBE_RANGE, PROBE_RANGE, PROBE_POINTS);
    let sc = sector_check(&config.nonlinearity, &sector.k1, &sector.k2, &probes)?;
    println!("{source}: {} probes on [-{PROBE_RANGE}, {PROBE_RANGE}]^{}", probes.len(), config.outputs());
    println!(
        "sector [K1, K2]: {} (max of (g - K1 y)'(g - K2 y) = {:.3e})",
        if sc.pass { "pass" } else { "FAIL" },
        sc.worst
    );
    if config.outputs() == config.inputs() {
        match dmisb_check(&config.nonlinearity, sector.k_l, &sector.kappa(), &probes) {
            Ok(d) => println!(
                "loop-shifted sector [0, kappa] with monotonicity (informational): {} (monotone {}, max {:.3e})",
                if d.pass { "pass" } else { "fail" },
                d.monotone,
                d.worst
            ),
            Err(e) => println!("loop-shifted check skipped: {e}"),
        }
    }
    Ok(if sc.pass { 0 } else { EXIT_SECTOR })
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("LURE_PCAC_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .with_context(|| format!("LURE_PCAC_THREADS must be a positive integer, got `{v}`"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("building thread pool")?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_CONFIG);
    }
    let result = match &cli.command {
        Command::Simulate(args) => run_simulation(args, false),
        Command::Analyze(args) => run_simulation(args, true),
        Command::SectorCheck(args) => run_sector_check(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_IO)
        }
    }
}
