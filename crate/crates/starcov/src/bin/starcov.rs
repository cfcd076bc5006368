//! Command-line front end: run sweeps, validate the closed forms against
//! their Monte Carlo oracles, or solve a single design instance.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use starcov::config::Config;
use starcov::sweep::{run_sweep, solve_single, validate};

#[derive(Parser)]
#[command(name = "starcov", version, about = "STAR-RIS covert communication analytics and design")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Override the master seed from the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker thread count (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured parameter sweep and write sweep.csv.
    Sweep {
        config: PathBuf,
        /// Output directory for CSV and trace files.
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Write per-run solver traces (JSONL) next to the CSV.
        #[arg(long)]
        trace: bool,
    },
    /// Check every closed form against its Monte Carlo / grid oracle.
    Validate { config: PathBuf },
    /// Solve a single design instance at the configured parameters.
    Solve {
        config: PathBuf,
        /// Print the per-iteration solver trace as JSONL.
        #[arg(long)]
        trace: bool,
    },
}

fn load(path: &PathBuf, seed: Option<u64>) -> Result<Config, starcov::Error> {
    let mut cfg = Config::from_path(path)?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool, starcov::Error> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| starcov::Error::config(format!("--jobs: {e}")))?;
    }
    match cli.command {
        Command::Sweep { config, out_dir, trace } => {
            let mut cfg = load(&config, cli.seed)?;
            if trace {
                cfg.output.traces = true;
            }
            let outcome = run_sweep(&cfg, &out_dir)?;
            println!("wrote {} ({} rows)", outcome.csv_path.display(), outcome.rows.len());
            for row in &outcome.rows {
                println!(
                    "  {}={} scheme={} mean_rate={:.4} std={:.4} feasible={}/{}",
                    row.sweep_var,
                    row.sweep_value,
                    row.scheme,
                    row.mean_rate,
                    row.std_rate,
                    row.feasible_count,
                    row.seed_count
                );
            }
            Ok(true)
        }
        Command::Validate { config } => {
            let cfg = load(&config, cli.seed)?;
            let report = validate(&cfg)?;
            for check in &report.checks {
                let tag = if check.passed { "PASS" } else { "FAIL" };
                println!("{tag} {}: {}", check.name, check.detail);
            }
            Ok(report.passed())
        }
        Command::Solve { config, trace } => {
            let cfg = load(&config, cli.seed)?;
            let (inst, res) = solve_single(&cfg)?;
            if trace {
                for rec in &res.trace {
                    println!("{}", serde_json::to_string(rec).expect("trace serializes"));
                }
            }
            let (bf, profile) = inst.decode(&res.x)?;
            println!("feasible: {}", res.feasible);
            println!("converged: {} ({} outer iterations)", res.converged, res.outer_iterations);
            println!("covert rate (bit/s/Hz): {:.6}", -res.f[0]);
            println!("constraints (<= 0): {:?}", &res.f[1..]);
            println!(
                "power split: Bob {:.4} W, Carol {:.4} W (budget {:.4} W)",
                bf.varpi_b(),
                bf.varpi_c(),
                inst.params.p_max
            );
            let mean_beta = profile.beta_r.iter().sum::<f64>() / profile.beta_r.len() as f64;
            println!("mean reflection amplitude: {mean_beta:.4}");
            Ok(res.feasible)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
