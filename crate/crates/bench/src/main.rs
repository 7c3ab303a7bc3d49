use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ssp_bench::emit::{emit_results, summary_csv, text_table, OutputFormat};
use ssp_bench::{presets, run_experiment, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "ssp-bench",
    about = "Replicated benchmarks for stochastic saddle-point solvers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file or preset name.
    Run {
        /// Path to a config file, or the name of a shipped preset.
        #[arg(long)]
        config: String,
        /// Master seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Replication count override.
        #[arg(long)]
        reps: Option<usize>,
        /// Output file; results also print to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Output format for --out.
        #[arg(long, default_value = "csv")]
        format: OutputFormat,
        /// Worker threads (0 = automatic).
        #[arg(long)]
        parallel: Option<usize>,
        /// Procedure override: plain | rde | pbssp.
        #[arg(long)]
        procedure: Option<String>,
        /// Target accuracy override.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Failure probability override.
        #[arg(long)]
        p: Option<f64>,
        /// Schedule base override.
        #[arg(long)]
        nu: Option<f64>,
        /// Proximal round count override.
        #[arg(long = "T")]
        t_rounds: Option<usize>,
        /// Trial count override.
        #[arg(long)]
        m: Option<usize>,
    },
    /// List the shipped presets.
    ListPresets,
    /// Parse and validate a config file, reporting problems.
    ValidateConfig {
        #[arg(long)]
        config: String,
    },
}

#[allow(clippy::too_many_arguments)]
fn apply_overrides(
    mut cfg: ExperimentConfig,
    seed: Option<u64>,
    reps: Option<usize>,
    parallel: Option<usize>,
    procedure: Option<String>,
    epsilon: Option<f64>,
    p: Option<f64>,
    nu: Option<f64>,
    t_rounds: Option<usize>,
    m: Option<usize>,
) -> ExperimentConfig {
    if let Some(v) = seed {
        cfg.master_seed = v;
    }
    if let Some(v) = reps {
        cfg.replications = v;
    }
    if let Some(v) = parallel {
        cfg.parallel = v;
    }
    if let Some(v) = procedure {
        cfg.procedure = v;
    }
    if let Some(v) = epsilon {
        cfg.epsilon = v;
    }
    if let Some(v) = p {
        cfg.p = v;
    }
    if nu.is_some() {
        cfg.nu = nu;
    }
    if t_rounds.is_some() {
        cfg.t_rounds = t_rounds;
    }
    if m.is_some() {
        cfg.m = m;
    }
    cfg
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            seed,
            reps,
            out,
            format,
            parallel,
            procedure,
            epsilon,
            p,
            nu,
            t_rounds,
            m,
        } => {
            let cfg = match presets::load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::FAILURE;
                }
            };
            let cfg = apply_overrides(
                cfg, seed, reps, parallel, procedure, epsilon, p, nu, t_rounds, m,
            );
            if let Err(e) = cfg.validate() {
                eprintln!("error: {e}");
                return ExitCode::FAILURE;
            }
            if cfg.long_running {
                eprintln!(
                    "note: '{}' is a long-running full-scale configuration",
                    cfg.name
                );
            }
            match run_experiment(&cfg) {
                Ok(result) => {
                    let summaries = [result.summary];
                    print!("{}", text_table(&summaries, cfg.epsilon));
                    if let Some(path) = out {
                        if let Err(e) = emit_results(&summaries, format, cfg.epsilon, &path) {
                            eprintln!("error: {e}");
                            return ExitCode::FAILURE;
                        }
                        eprintln!("wrote {}", path.display());
                    } else if format == OutputFormat::Csv {
                        print!("{}", summary_csv(&summaries));
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
        Command::ListPresets => {
            for (name, text) in presets::PRESETS {
                let first_comment = text
                    .lines()
                    .take_while(|l| l.starts_with('#'))
                    .map(|l| l.trim_start_matches('#').trim())
                    .collect::<Vec<_>>()
                    .join(" ");
                println!("{name:<18} {first_comment}");
            }
            ExitCode::SUCCESS
        }
        Command::ValidateConfig { config } => match presets::load(&config) {
            Ok(cfg) => {
                println!("ok: '{}' parses and validates", cfg.name);
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("invalid: {e}");
                ExitCode::FAILURE
            }
        },
    }
}
