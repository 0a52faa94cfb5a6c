use clap::{Parser, Subcommand};
use shockhopf_cli::{emit_report, run_stages, CachePolicy, CliError, Formats, RunConfig, Stage, Verdict};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "shockhopf", version, about = "Viscous shock Hopf experiments: stages, caching and reports")]
struct Cli {
    /// TOML run config; built-in defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for within-stage parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Recompute every stage and leave the cache untouched.
    #[arg(long, global = true)]
    no_cache: bool,
    /// Restrict `report` to these stages (repeatable).
    #[arg(long = "stage", global = true)]
    stages: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Shock profiles and the Burgers reference.
    Profile,
    /// Zero eigenstructure, crossing pair and projectors.
    Spectrum,
    /// Kernel norm laws and the cancellation identity.
    Kernels,
    /// Naive and resummed series, right-inverse ledger, continuization.
    Resum,
    /// Normal-form branch and exemplar periodic orbits.
    Hopf,
    /// Transverse gap decay and the cellular orbit.
    Cylinder,
    /// Every stage (or those given with --stage) and the criteria.
    Report,
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(out) = cli.out {
        cfg.output_dir = out;
    }
    if cli.no_cache {
        cfg.cache = CachePolicy::Off;
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Config(e.to_string()))?;
    }
    let stages: Vec<Stage> = match cli.command {
        Command::Profile => vec![Stage::Profile],
        Command::Spectrum => vec![Stage::Spectrum],
        Command::Kernels => vec![Stage::Kernels],
        Command::Resum => vec![Stage::Resum],
        Command::Hopf => vec![Stage::Hopf],
        Command::Cylinder => vec![Stage::Cylinder],
        Command::Report if cli.stages.is_empty() => Stage::ALL.to_vec(),
        Command::Report => cli.stages.iter().map(|s| s.parse()).collect::<Result<_, _>>()?,
    };
    let mut report = run_stages(&cfg, &stages)?;
    let dir = cfg.output_dir.clone();
    emit_report(&mut report, Formats::ALL, &dir)?;
    for s in &report.stages {
        match &s.error {
            Some(e) => println!("stage {:<9} FAILED  {e}", s.stage.to_string()),
            None => println!("stage {:<9} {:<8} {:.2} s", s.stage.to_string(), format!("{:?}", s.status).to_lowercase(), s.seconds),
        }
    }
    for c in report.criteria.iter().filter(|c| c.verdict != Verdict::NotRun || c.id == 11) {
        println!("{}", c.line());
    }
    println!("report: {}", dir.join(format!("report-{}.json", report.short_hash())).display());
    Ok(report.exit_code())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("shockhopf: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
