use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use qfp_herald_cli::commands::{self, Pick};
use qfp_herald_cli::schema::{read_json, to_json, RunConfig};
use qfp_herald_cli::{CliError, CliResult};

#[derive(Parser)]
#[command(
    name = "qfp-herald",
    version,
    about = "Design heralded non-Gaussian states on frequency-bin circuits"
)]
struct Cli {
    /// RNG seed; drawn from OS entropy and recorded when absent
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for swarm evaluation
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file (output directory for `wavefunction`)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the Fock cutoff of the heralded mode
    #[arg(long = "n-c", global = true)]
    n_c: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Selection {
    Cost,
    Fidelity,
}

impl From<Selection> for Pick {
    fn from(s: Selection) -> Self {
        match s {
            Selection::Cost => Pick::Cost,
            Selection::Fidelity => Pick::Fidelity,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the particle swarm for a configuration file
    Design {
        #[arg(long)]
        config: PathBuf,
    },
    /// Re-evaluate a design result or a hand-written design
    Evaluate {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "cost")]
        pick: Selection,
        /// Cutoff for the convergence probe (default n_c + 10)
        #[arg(long)]
        probe_n_c: Option<usize>,
    },
    /// Cross-check the Gaussian pipeline against the Fock-basis simulator
    OracleCheck {
        #[arg(long, default_value_t = 50)]
        trials: usize,
    },
    /// Write quadrature wavefunction and Fock distribution CSVs
    Wavefunction {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "cost")]
        pick: Selection,
        #[arg(long, default_value_t = -6.0, allow_hyphen_values = true)]
        q_min: f64,
        #[arg(long, default_value_t = 6.0, allow_hyphen_values = true)]
        q_max: f64,
        #[arg(long, default_value_t = 241)]
        points: usize,
    },
    /// Print loop-hafnian table sizes
    Tables {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        n_s: usize,
        #[arg(long, default_value_t = 3)]
        n_squeezed: usize,
    },
    /// Bundle every result in a directory into one JSON array
    Report { dir: PathBuf },
}

fn emit(json: &str, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, &e))?;
            }
            std::fs::write(path, json).map_err(|e| CliError::io(path, &e))
        }
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Invariant(format!("thread pool: {e}")))?;
    }
    let out = cli.out.as_deref();
    match cli.command {
        Command::Design { config } => {
            let cfg: RunConfig = read_json(&config)?;
            let result = commands::design(&cfg, cli.seed, cli.n_c)?;
            let best = result.best_by_cost.state.as_ref();
            eprintln!(
                "seed {}: best cost {:.6}, P {:.6}, F {:.6}",
                result.seed,
                result.best_by_cost.cost,
                best.map_or(0.0, |s| s.probability),
                best.and_then(|s| s.fidelity).unwrap_or(0.0)
            );
            let target = out.map(Path::to_path_buf).or_else(|| {
                cfg.output
                    .as_ref()
                    .map(|p| config.parent().unwrap_or(Path::new("")).join(p))
            });
            emit(&to_json(&result)?, target.as_deref())
        }
        Command::Evaluate {
            file,
            pick,
            probe_n_c,
        } => {
            let result = commands::evaluate(&file, pick.into(), cli.n_c, probe_n_c, cli.seed)?;
            eprintln!(
                "P {:.6}, F {:.6}, cost {:.6}, converged at n_c = {}: {}",
                result.probability,
                result.fidelity,
                result.cost,
                result.probe_n_c,
                result.converged
            );
            emit(&to_json(&result)?, out)
        }
        Command::OracleCheck { trials } => {
            if trials == 0 {
                eprintln!("warning: zero trials requested; the check passes vacuously");
            }
            let report = commands::oracle_check(trials, cli.seed)?;
            eprintln!(
                "{} trials (seed {}): max |Δ|c|²| = {:.3e}, max |ΔP| = {:.3e}: {}",
                report.trials,
                report.seed,
                report.max_delta_population,
                report.max_delta_probability,
                if report.pass { "pass" } else { "FAIL" }
            );
            emit(&to_json(&report)?, out)?;
            if !report.pass {
                return Err(CliError::Invariant(
                    "oracle disagreement above tolerance".into(),
                ));
            }
            Ok(())
        }
        Command::Wavefunction {
            file,
            pick,
            q_min,
            q_max,
            points,
        } => {
            let dir =
                out.ok_or_else(|| CliError::Config("wavefunction needs --out <dir>".into()))?;
            for path in commands::wavefunction(&file, pick.into(), q_min, q_max, points, dir)? {
                eprintln!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Tables {
            config,
            n_s,
            n_squeezed,
        } => {
            let (n_s, n_squeezed, n_c) = match config {
                Some(path) => {
                    let cfg: RunConfig = read_json(&path)?;
                    (
                        cfg.space.n_s,
                        cfg.space.n_squeezed,
                        cli.n_c.unwrap_or(cfg.space.n_c),
                    )
                }
                None => (
                    n_s,
                    n_squeezed,
                    cli.n_c.unwrap_or(qfp_herald::herald::DEFAULT_CUTOFF),
                ),
            };
            emit(&to_json(&commands::tables(n_s, n_squeezed, n_c)?)?, out)
        }
        Command::Report { dir } => {
            let (bundle, skipped) = commands::report(&dir)?;
            for msg in skipped {
                eprintln!("skipped {msg}");
            }
            eprintln!("{} records", bundle.records.len());
            emit(&to_json(&bundle)?, out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
