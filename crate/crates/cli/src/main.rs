use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use liekernels::Error;

mod commands;
mod config;

use config::{Format, Kind, Metric, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "liekernels", version, about = "Heat and Matérn Gaussian-process kernels on compact Lie groups and homogeneous spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (stdout when omitted). A resolved-config echo is written to `<out>.config.json`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Space, e.g. S2, RP2, SU(2), SO(3), SO(3)/SO(2).
    #[arg(long, global = true)]
    space: Option<String>,
    #[arg(long, global = true, value_enum)]
    kernel: Option<Kind>,
    #[arg(long, global = true)]
    kappa: Option<f64>,
    #[arg(long, global = true)]
    nu: Option<f64>,
    #[arg(long, global = true)]
    sigma2: Option<f64>,
    #[arg(long, global = true)]
    budget: Option<usize>,
    #[arg(long, global = true)]
    features: Option<usize>,
    /// Eigenvalue scale for spheres and projective spaces.
    #[arg(long, global = true, value_enum)]
    metric: Option<Metric>,
    /// Observation noise variance.
    #[arg(long, global = true)]
    noise: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List representations (or spectral levels) with dimensions and eigenvalues.
    Reps,
    /// Kernel matrix of a point file.
    Kernel {
        #[arg(long)]
        points: PathBuf,
    },
    /// Prior draws at a point file, or posterior draws when --data is given.
    Sample {
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        count: Option<usize>,
    },
    /// Posterior mean, standard deviation and one posterior sample.
    Regress {
        /// CSV rows of coordinates followed by the target.
        #[arg(long)]
        data: PathBuf,
        /// Query points; a Haar-random grid is used when omitted.
        #[arg(long)]
        query: Option<PathBuf>,
        #[arg(long)]
        grid: Option<usize>,
        /// Fit κ, σ² and the noise by maximum marginal likelihood first.
        #[arg(long)]
        fit: bool,
    },
    /// Kernel values over a ladder of budgets and of feature counts.
    Converge {
        /// CSV rows holding the coordinates of x followed by those of y.
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long, value_delimiter = ',')]
        budgets: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        feature_ladder: Option<Vec<usize>>,
    },
}

fn resolve(common: &Common, command: &Command) -> liekernels::Result<RunConfig> {
    let mut c = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    macro_rules! set {
        ($($f:ident),*) => { $( if let Some(v) = common.$f.clone() { c.$f = v; } )* };
    }
    set!(space, kernel, kappa, sigma2, budget, features, format, noise);
    if common.nu.is_some() {
        c.nu = common.nu;
    }
    if common.seed.is_some() {
        c.seed = common.seed;
    }
    if common.metric.is_some() {
        c.metric = common.metric;
    }
    match command {
        Command::Sample { count: Some(n), .. } => c.count = *n,
        Command::Regress { grid, fit, .. } => {
            if let Some(g) = grid {
                c.grid = *g;
            }
            c.fit |= *fit;
        }
        Command::Converge { budgets, feature_ladder, .. } => {
            if let Some(b) = budgets {
                c.budgets = b.clone();
            }
            if let Some(f) = feature_ladder {
                c.feature_ladder = f.clone();
            }
        }
        _ => {}
    }
    c.validate()?;
    Ok(c)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Domain(_) | Error::SpaceMismatch(_) => 2,
        Error::Numerical(_) | Error::DegenerateLevel(_) => 3,
        Error::Io(_) | Error::Parse(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = resolve(&cli.common, &cli.command)
        .and_then(|cfg| commands::run(&cli.command, &cfg, cli.common.out.as_deref()));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
