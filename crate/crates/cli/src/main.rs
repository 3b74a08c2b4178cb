use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cusp_cli::config::{Experiment, ExperimentConfig, Overrides};
use cusp_cli::{experiments, summary};

#[derive(Parser)]
#[command(name = "cusplab", version, about = "Numerical experiments on cusp domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Flat JSON config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "c", allow_negative_numbers = true)]
    c: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Green function along the cusp axis against the Hopf-type decay.
    GreenProfile(Common),
    /// Injectivity, boundary angles and image-boundary asymptotics of F.
    ConformalCheck(Common),
    /// Regularity flags of h_B and subharmonicity of the barrier.
    BarrierCheck(Common),
    /// Hopf-type lower bound for the Green-function candidate.
    HopfCertify(Common),
    /// Exhaustion sequence and the patch-and-decay simulation.
    ExhaustionSim(Common),
    /// Capacities of dyadic shells and the Wiener series.
    CapacityScan(Common),
    /// One CSV row per report file.
    Summary {
        /// Also write summary.csv into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
        reports: Vec<PathBuf>,
    },
}

fn run_experiment(experiment: Experiment, common: Common) -> ExitCode {
    let flags = Overrides {
        seed: common.seed,
        out: common.out,
        c: common.c,
        alpha: common.alpha,
        threads: common.threads,
    };
    let cfg = match ExperimentConfig::resolve(experiment, common.config.as_deref(), &flags) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(3);
        }
    };
    let outcome = match pool.install(|| experiments::run(&cfg)) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {} failed: {e}", experiment.name());
            return ExitCode::from(3);
        }
    };
    if let Err(e) = outcome.write(&cfg.output_dir) {
        eprintln!("error: cannot write to {}: {e}", cfg.output_dir.display());
        return ExitCode::from(3);
    }
    let r = &outcome.report;
    for (gate, ok) in &r.gates {
        println!("{:<40} {}", gate, if *ok { "pass" } else { "FAIL" });
    }
    println!(
        "{}: {} ({})",
        r.experiment,
        if r.pass { "pass" } else { "FAIL" },
        cfg.output_dir.join("report.json").display()
    );
    if r.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn run_summary(out: Option<PathBuf>, reports: Vec<PathBuf>) -> ExitCode {
    if reports.is_empty() {
        eprintln!("error: summary needs at least one report file");
        return ExitCode::from(2);
    }
    let paths: Vec<&std::path::Path> = reports.iter().map(PathBuf::as_path).collect();
    let s = summary::summarize(&paths);
    print!("{}", s.csv);
    if let Some(dir) = out {
        if let Err(e) = std::fs::create_dir_all(&dir).and_then(|_| std::fs::write(dir.join("summary.csv"), &s.csv)) {
            eprintln!("error: cannot write summary to {}: {e}", dir.display());
            return ExitCode::from(3);
        }
    }
    ExitCode::from(s.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::GreenProfile(c) => run_experiment(Experiment::GreenProfile, c),
        Command::ConformalCheck(c) => run_experiment(Experiment::ConformalCheck, c),
        Command::BarrierCheck(c) => run_experiment(Experiment::BarrierCheck, c),
        Command::HopfCertify(c) => run_experiment(Experiment::HopfCertify, c),
        Command::ExhaustionSim(c) => run_experiment(Experiment::ExhaustionSim, c),
        Command::CapacityScan(c) => run_experiment(Experiment::CapacityScan, c),
        Command::Summary { out, reports } => run_summary(out, reports),
    }
}
