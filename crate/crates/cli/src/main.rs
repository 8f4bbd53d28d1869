use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use eirp_cli::bench::bench_table;
use eirp_cli::report::report;
use eirp_cli::{run_sweep, Config};
use eirp_core::scheduler::StrategyKind;

#[derive(Parser)]
#[command(name = "eirp-sim", about = "EIRP-constrained downlink scheduler simulator", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep and write its CSVs.
    Sweep(SweepArgs),
    /// Summarise a finished sweep directory.
    Report {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Time the water-filling solver against the user count.
    BenchSolver {
        #[arg(long, default_value_t = 16)]
        max_users: usize,
        #[arg(long, default_value_t = 20000)]
        iters: usize,
    },
    /// Print the effective configuration.
    EmitConfig(SweepArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// Config file, applied over the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// desk or table1.
    #[arg(long, default_value = "desk")]
    preset: String,
    /// Run seeds `scenario.seed .. scenario.seed + N`.
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    strategy: Option<Vec<StrategyKind>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    rho_db: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    epsilon: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    packet_mbits: Option<Vec<f64>>,
}

impl SweepArgs {
    fn config(&self) -> anyhow::Result<Config> {
        let mut cfg = Config::preset(&self.preset)?;
        if let Some(path) = &self.config {
            cfg = Config::load(path, cfg)?;
        }
        let w = &mut cfg.sweep;
        if let Some(n) = self.seeds {
            let base = cfg.scenario.seed;
            w.seeds = Some((base..base + n).collect());
        }
        if self.strategy.is_some() {
            w.strategies = self.strategy.clone();
        }
        if self.rho_db.is_some() {
            w.rho_db = self.rho_db.clone();
        }
        if self.epsilon.is_some() {
            w.epsilon = self.epsilon.clone();
        }
        if self.packet_mbits.is_some() {
            w.packet_mbits = self.packet_mbits.clone();
        }
        if let Some(out) = &self.out {
            cfg.output.dir = out.display().to_string();
        }
        cfg.validate().context("command-line overrides")?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Sweep(args) => {
            let cfg = args.config()?;
            let out = PathBuf::from(&cfg.output.dir);
            let outcome = run_sweep(&cfg, &out, &mut std::io::stderr())?;
            let text = report(&out)?;
            print!("{text}");
            Ok(outcome.passed())
        }
        Command::Report { out } => {
            let text = report(&out)?;
            print!("{text}");
            Ok(!text.contains("compliance: FAIL"))
        }
        Command::BenchSolver { max_users, iters } => {
            println!("users,median_us,p90_us,allocs_per_sec");
            for r in bench_table(max_users, iters) {
                println!(
                    "{},{:.3},{:.3},{:.0}",
                    r.users,
                    r.median_ns / 1e3,
                    r.p90_ns / 1e3,
                    r.allocs_per_sec
                );
            }
            Ok(true)
        }
        Command::EmitConfig(args) => {
            print!("{}", args.config()?.emit());
            Ok(true)
        }
    }
}
