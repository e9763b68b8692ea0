use clap::{Parser, Subcommand};
use kfp_lab::exec;
use kfp_lab::runner::check::run_checks;
use kfp_lab::runner::{
    build_model, compute_constants, emit_report, read_config_list, run_batch, run_scenario, ScenarioConfig,
};
use kfp_lab::{Error, Result};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "kfp-lab",
    version,
    about = "Hypocoercive decay experiments for kinetic Fokker-Planck equations"
)]
struct Cli {
    /// Worker threads (0 uses all cores).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override the time step.
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Override the final time.
    #[arg(long = "t-final", global = true)]
    t_final: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its CSV trajectory and JSON summary.
    Run { config: PathBuf },
    /// Run every scenario listed in a file, one path per line.
    Batch { list: PathBuf },
    /// Compute the constants only.
    Constants { config: PathBuf },
    /// Run the invariant suite.
    Check,
}

fn overrides(cli: &Cli) -> impl Fn(&mut ScenarioConfig) + Sync + '_ {
    move |c: &mut ScenarioConfig| {
        if let Some(dt) = cli.dt {
            c.schedule.dt = dt;
        }
        if let Some(t) = cli.t_final {
            c.schedule.t_final = t;
        }
    }
}

fn load(cli: &Cli, path: &Path) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::load(path)?;
    overrides(cli)(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Run { config } => {
            let cfg = load(cli, config)?;
            let bundle = run_scenario(&cfg)?;
            let (json, csv) = emit_report(&bundle, &cli.out)?;
            if let Some(csv) = csv {
                println!("trajectory: {}", csv.display());
            }
            println!("summary: {}", json.display());
            if let Some(msg) = &bundle.summary.failure {
                eprintln!("run failed: {msg}");
            }
            Ok(bundle.exit_code)
        }
        Command::Batch { list } => {
            let configs = read_config_list(list)?;
            let adjust = overrides(cli);
            let (index, entries) = run_batch(&configs, &cli.out, &adjust)?;
            for e in &entries {
                println!("{}: {}", e.config, e.status);
            }
            println!("index: {}", index.display());
            Ok(entries.iter().map(|e| e.exit_code).max().unwrap_or(0))
        }
        Command::Constants { config } => {
            let cfg = load(cli, config)?;
            let (eq, ops) = build_model(&cfg).map_err(|(_, e)| e)?;
            let consts = compute_constants(&cfg, &eq, &ops)?;
            let text = serde_json::to_string_pretty(&consts)
                .map_err(|e| Error::Numerical(format!("serialization failed: {e}")))?;
            std::fs::create_dir_all(&cli.out).map_err(|e| Error::io(&cli.out, e))?;
            let path = cli.out.join("constants.json");
            std::fs::write(&path, format!("{text}\n")).map_err(|e| Error::io(&path, e))?;
            println!("{text}");
            Ok(0)
        }
        Command::Check => {
            let results = run_checks();
            for r in &results {
                println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
            }
            Ok(if results.iter().all(|r| r.passed) { 0 } else { 2 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match exec::with_workers(cli.workers, || execute(&cli)) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
