use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use ambiport_cli::experiments::{self, Axis, FactorialLevels};
use ambiport_cli::output::{self, Format, Header, Rows};
use ambiport_cli::settings::{self, CONFIG_DIR_ENV};
use ambiport_cli::{CliError, DEFAULT_AAA, DEFAULT_RAA};
use ambiport_core::{AmbiguitySpec, Config, DriftMode, SimSettings};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "ambiport", version, about = "Delegated portfolio choice under smooth ambiguity")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML config; relative paths are also looked up in the config directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory holding configs; `ambiport.toml` there is the default.
    #[arg(long, global = true, env = CONFIG_DIR_ENV)]
    config_dir: Option<PathBuf>,
    /// Override a config key, e.g. `--set market.r=0.03`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Worker threads for sweeps and simulation.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Simulation seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configuration and print the summary.
    Solve {
        /// Use the power aggregator at this relative ambiguity aversion.
        #[arg(long, conflicts_with = "gamma")]
        raa: Option<f64>,
        /// Use the exponential aggregator at this absolute ambiguity aversion.
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Worst-case q* across relative ambiguity aversion levels.
    TableRaa {
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_RAA)]
        raa: Vec<f64>,
    },
    /// Worst-case q* across absolute ambiguity aversion levels.
    TableAaa {
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_AAA)]
        gamma: Vec<f64>,
    },
    /// 2^3 design over prior optimism, RRA and RAA.
    Factorial {
        #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [0.5, 0.8])]
        prior_q: Vec<f64>,
        #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [0.3, 0.5])]
        rra: Vec<f64>,
        #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [0.01, 0.3])]
        raa: Vec<f64>,
    },
    /// Terminal wealth against the state-price density, per preference level.
    Frontier {
        #[arg(long, value_enum, default_value_t = Axis::Raa)]
        axis: Axis,
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<f64>>,
        #[arg(long, default_value_t = 400)]
        points: usize,
        /// Right end of the state-price grid.
        #[arg(long)]
        xi_max: Option<f64>,
    },
    /// Risky share against wealth at time t, per preference level.
    Policy {
        #[arg(long, value_enum, default_value_t = Axis::Raa)]
        axis: Axis,
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<f64>>,
        #[arg(long, default_value_t = 200)]
        points: usize,
        /// Calendar time; defaults to one year before the horizon.
        #[arg(long)]
        t: Option<f64>,
    },
    /// Monte Carlo validation of the worst-case policy.
    Simulate {
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
        #[arg(long, default_value_t = 500)]
        steps: usize,
        /// Hold the drift fixed instead of drawing it from the prior.
        #[arg(long)]
        fixed_z: Option<f64>,
        /// Skip the wealth SDE; only the filter and the surface are tracked.
        #[arg(long)]
        no_wealth: bool,
        /// Write the recorded trajectories to this CSV file.
        #[arg(long)]
        paths_out: Option<PathBuf>,
        /// Number of trajectories kept for `--paths-out`.
        #[arg(long, default_value_t = 100)]
        record: usize,
    },
}

fn emit<T: Rows>(g: &Global, command: &str, config: Config, body: &T) -> Result<(), CliError> {
    let header = Header::new(command, config);
    match &g.out {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            output::write(&mut w, g.format, &header, body)?;
            w.flush()?;
        }
        None => output::write(std::io::stdout().lock(), g.format, &header, body)?,
    }
    Ok(())
}

fn pair(v: &[f64]) -> [f64; 2] {
    [v[0], v[1]]
}

fn run(cli: Cli) -> Result<(), CliError> {
    let g = &cli.global;
    if let Some(n) = g.jobs {
        if n == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let mut config = settings::load(g.config.as_deref(), g.config_dir.as_deref(), &g.overrides)?;
    match cli.command {
        Command::Solve { raa, gamma } => {
            if let Some(a) = raa {
                config.ambiguity = AmbiguitySpec::power_from_raa(a);
            }
            if let Some(gamma) = gamma {
                config.ambiguity = AmbiguitySpec::Exponential { gamma };
            }
            let problem = config.validate()?;
            let s = experiments::solve(&problem)?;
            emit(g, "solve", config, &s)
        }
        Command::TableRaa { raa } => {
            let problem = config.validate()?;
            let rows = experiments::table_raa(&problem, &raa)?;
            emit(g, "table-raa", config, &rows)
        }
        Command::TableAaa { gamma } => {
            let problem = config.validate()?;
            let rows = experiments::table_aaa(&problem, &gamma)?;
            emit(g, "table-aaa", config, &rows)
        }
        Command::Factorial { prior_q, rra, raa } => {
            let problem = config.validate()?;
            let levels = FactorialLevels {
                prior_q: pair(&prior_q),
                rra: pair(&rra),
                raa: pair(&raa),
            };
            let f = experiments::factorial(&problem, &levels)?;
            emit(g, "factorial", config, &f)
        }
        Command::Frontier {
            axis,
            levels,
            points,
            xi_max,
        } => {
            if points == 0 {
                return Err(CliError::Usage("--points must be positive".into()));
            }
            let problem = config.validate()?;
            let levels = levels.unwrap_or_else(|| axis.default_levels());
            let solved = experiments::solve_levels(&problem, axis, &levels)?;
            let rows = experiments::terminal_wealth_curves(&solved, xi_max, points);
            emit(g, "frontier", config, &rows)
        }
        Command::Policy { axis, levels, points, t } => {
            let problem = config.validate()?;
            let t = t.unwrap_or(problem.market.horizon - 1.0);
            if !(t >= 0.0 && t < problem.market.horizon) {
                return Err(CliError::Usage(format!("--t must lie in [0, {})", problem.market.horizon)));
            }
            let levels = levels.unwrap_or_else(|| axis.default_levels());
            let solved = experiments::solve_levels(&problem, axis, &levels)?;
            let rows = experiments::policy_curves(&solved, t, points)?;
            emit(g, "policy", config, &rows)
        }
        Command::Simulate {
            paths,
            steps,
            fixed_z,
            no_wealth,
            paths_out,
            record,
        } => {
            if paths == 0 {
                return Err(CliError::Usage("--paths must be positive".into()));
            }
            let problem = config.validate()?;
            let defaults = SimSettings::default();
            let settings = SimSettings {
                n_paths: paths,
                n_steps: steps,
                seed: g.seed.unwrap_or(defaults.seed),
                mode: fixed_z.map_or(DriftMode::DrawFromPrior, |z| DriftMode::Fixed { z }),
                track_wealth: !no_wealth,
                record_paths: if paths_out.is_some() { record } else { 0 },
                ..defaults
            };
            let (report, bundle) = experiments::simulate_report(&problem, &settings)?;
            if let Some(p) = paths_out {
                let w = BufWriter::new(File::create(p)?);
                ambiport_core::sim::write_paths_csv(&bundle, w)?;
            }
            emit(g, "simulate", config, &report)
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
