//! `sheq`: command-line harness for the stochastic heat equation toolkit.
//!
//! Subcommands evaluate moment formulas, run the oracle-equivalence
//! validation campaign, estimate growth indices and Hölder exponents, and
//! drive lattice Monte Carlo simulations.  Every run writes a manifest with
//! the fully resolved configuration; identical configurations (including
//! the seed) produce byte-identical outputs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sheq_cli::commands;
use sheq_cli::config::RunConfig;
use sheq_cli::CliError;

#[derive(Parser)]
#[command(name = "sheq", version, about = "Moment calculus and Monte Carlo for the 1-D stochastic heat equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand; unset flags fall back to the config
/// file, then to built-in defaults.
#[derive(Args, Debug, Clone)]
struct Common {
    /// Flat key=value config file; CLI flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Initial measure, e.g. `lebesgue | delta[:loc] | exp_decay:a |
    /// exp_growth:a,p | gaussian_bump:c,w | indicator:l,r |
    /// atoms:(loc,mass);(...) | delta_prime[:loc]`
    #[arg(long)]
    measure: Option<String>,
    /// Diffusion coefficient nu > 0.
    #[arg(long)]
    nu: Option<f64>,
    /// Noise intensity lambda.
    #[arg(long)]
    lambda: Option<f64>,
    /// Quasi-linear offset (0 gives the parabolic Anderson model).
    #[arg(long)]
    vv: Option<f64>,
    /// RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (manifest plus artifacts).
    #[arg(long)]
    out: Option<String>,
    /// Table format: csv or json.
    #[arg(long)]
    format: Option<String>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        config.set_opt("measure", &self.measure);
        config.set_opt("nu", &self.nu);
        config.set_opt("lambda", &self.lambda);
        config.set_opt("vv", &self.vv);
        config.set_opt("seed", &self.seed);
        config.set_opt("out", &self.out);
        config.set_opt("format", &self.format);
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate moment formulas (exact, quadrature, bounds) on a (t, x) grid.
    Moments {
        #[command(flatten)]
        common: Common,
        /// Time points (comma separated).
        #[arg(long)]
        t: Option<String>,
        /// Space points (comma separated).
        #[arg(long)]
        x: Option<String>,
        /// Moment order (even integer >= 2).
        #[arg(long)]
        p: Option<u32>,
    },
    /// Two-point correlation: closed forms, the general evaluator and the
    /// comparison integrals.
    Twopoint {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        t: Option<String>,
        #[arg(long)]
        x: Option<f64>,
        #[arg(long)]
        y: Option<f64>,
        /// closed | general | auto
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        cache_t: Option<usize>,
        #[arg(long)]
        cache_x: Option<usize>,
    },
    /// Growth-index bounds and the empirical transition estimate.
    Growth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        p: Option<u32>,
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long)]
        t_samples: Option<usize>,
        #[arg(long)]
        alpha_margin: Option<f64>,
    },
    /// Lattice Monte Carlo simulation with field snapshots and probes.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dx: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        /// Final time.
        #[arg(long = "T")]
        horizon: Option<f64>,
        /// Domain half width.
        #[arg(long = "L")]
        half_width: Option<f64>,
        /// Replicate count.
        #[arg(long = "M")]
        replicates: Option<u32>,
        /// exponential_mild | explicit_fd
        #[arg(long)]
        scheme: Option<String>,
        /// dirichlet_zero | periodic
        #[arg(long)]
        boundary: Option<String>,
        /// Snapshot times for fields.csv (comma separated; default T).
        #[arg(long)]
        snapshot_t: Option<String>,
        /// Write the first N replicates as binary .she1 snapshots.
        #[arg(long)]
        binary_fields: Option<u32>,
        /// Probe points "t,x" or "t,x,y", ';'-separated.
        #[arg(long)]
        probe: Option<String>,
    },
    /// Hölder-exponent estimation from lattice variograms.
    Holder {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        t0: Option<f64>,
        /// space | time
        #[arg(long)]
        direction: Option<String>,
        /// Number of dyadic lags (>= 4).
        #[arg(long)]
        lags: Option<usize>,
        #[arg(long)]
        dx: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long = "M")]
        replicates: Option<u32>,
    },
    /// Deterministic Picard second-moment iteration (convergence study and
    /// rough-data divergence detection).
    Picard {
        #[command(flatten)]
        common: Common,
        #[arg(long = "T")]
        horizon: Option<f64>,
        #[arg(long)]
        t_cells: Option<usize>,
        #[arg(long = "L")]
        half_width: Option<f64>,
        #[arg(long)]
        x_cells: Option<usize>,
    },
    /// Run the oracle-equivalence validation campaign.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Run only these criteria (comma separated ids).
        #[arg(long)]
        only: Option<String>,
        /// Reduced replicate counts and wider bands, labelled "quick".
        #[arg(long)]
        quick: bool,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Moments { common, t, x, p } => {
            let mut config = common.resolve()?;
            config.set_opt("t", &t);
            config.set_opt("x", &x);
            config.set_opt("p", &p);
            commands::cmd_moments(&config)
        }
        Command::Twopoint { common, t, x, y, method, cache_t, cache_x } => {
            let mut config = common.resolve()?;
            config.set_opt("t", &t);
            config.set_opt("x", &x);
            config.set_opt("y", &y);
            config.set_opt("method", &method);
            config.set_opt("cache-t", &cache_t);
            config.set_opt("cache-x", &cache_x);
            commands::cmd_twopoint(&config)
        }
        Command::Growth { common, p, t_max, t_samples, alpha_margin } => {
            let mut config = common.resolve()?;
            config.set_opt("p", &p);
            config.set_opt("t-max", &t_max);
            config.set_opt("t-samples", &t_samples);
            config.set_opt("alpha-margin", &alpha_margin);
            commands::cmd_growth(&config)
        }
        Command::Simulate {
            common,
            dx,
            dt,
            horizon,
            half_width,
            replicates,
            scheme,
            boundary,
            snapshot_t,
            binary_fields,
            probe,
        } => {
            let mut config = common.resolve()?;
            config.set_opt("dx", &dx);
            config.set_opt("dt", &dt);
            config.set_opt("horizon", &horizon);
            config.set_opt("half-width", &half_width);
            config.set_opt("replicates", &replicates);
            config.set_opt("scheme", &scheme);
            config.set_opt("boundary", &boundary);
            config.set_opt("snapshot-t", &snapshot_t);
            config.set_opt("binary-fields", &binary_fields);
            config.set_opt("probe", &probe);
            commands::cmd_simulate(&config)
        }
        Command::Holder { common, t0, direction, lags, dx, dt, replicates } => {
            let mut config = common.resolve()?;
            config.set_opt("t0", &t0);
            config.set_opt("direction", &direction);
            config.set_opt("lags", &lags);
            config.set_opt("dx", &dx);
            config.set_opt("dt", &dt);
            config.set_opt("replicates", &replicates);
            commands::cmd_holder(&config)
        }
        Command::Picard { common, horizon, t_cells, half_width, x_cells } => {
            let mut config = common.resolve()?;
            config.set_opt("horizon", &horizon);
            config.set_opt("t-cells", &t_cells);
            config.set_opt("half-width", &half_width);
            config.set_opt("x-cells", &x_cells);
            commands::cmd_picard(&config)
        }
        Command::Validate { common, only, quick } => {
            let mut config = common.resolve()?;
            config.set_opt("only", &only);
            if quick {
                config.set("quick", "true");
            }
            commands::cmd_validate(&config)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sheq: {e}");
            ExitCode::from(e.status.code())
        }
    }
}
