use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tdnls::experiments::{emit_outputs, run, ExperimentConfig, ExperimentKind};
use tdnls::{Error, Scheme};

/// Monte Carlo experiments for the truncated cubic NLS with third-order
/// dispersion and its transported Gaussian measures.
///
/// Exit status: 0 on success, 1 when a validation check fails or a run
/// errors, 2 on configuration errors.
#[derive(Parser)]
#[command(name = "tdnls", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Paired Monte Carlo check of the pushforward identity.
    Pushforward(RunArgs),
    /// Moments of the transported density over N, 2N, 4N.
    Moments(RunArgs),
    /// Besov tail probabilities and their decay in lambda^2.
    Tails(RunArgs),
    /// Step, resolution and F(u_N) convergence studies.
    Convergence(RunArgs),
    /// Invariant suite with a JSON verdict.
    Validate(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat TOML configuration file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Truncation N.
    #[arg(long, short = 'N')]
    max_mode: Option<usize>,
    /// Time horizon.
    #[arg(long = "t", alias = "time")]
    t: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    /// L2 cutoff R.
    #[arg(long, short = 'R')]
    radius: Option<f64>,
    #[arg(long)]
    p_moment: Option<f64>,
    /// Comma-separated ascending lambda values.
    #[arg(long, value_delimiter = ',')]
    lambda_grid: Option<Vec<f64>>,
    #[arg(long)]
    besov_s: Option<f64>,
    #[arg(long)]
    besov_p: Option<f64>,
    /// L2 bound B of the tail event.
    #[arg(long, short = 'B')]
    l2_bound: Option<f64>,
    /// Restrict the initial law to one mode (moment probe).
    #[arg(long, allow_hyphen_values = true)]
    degenerate_mode: Option<i64>,
    /// Cubic-product grid size override.
    #[arg(long)]
    grid_size: Option<usize>,
    /// gauss_legendre or rk4.
    #[arg(long, value_parser = parse_scheme)]
    scheme: Option<Scheme>,
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    match s {
        "gauss_legendre" | "gauss-legendre" => Ok(Scheme::GaussLegendre),
        "rk4" => Ok(Scheme::Rk4),
        other => Err(format!("unknown scheme '{other}', expected gauss_legendre or rk4")),
    }
}

impl RunArgs {
    fn into_config(self, experiment: ExperimentKind) -> tdnls::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        cfg.experiment = experiment;
        macro_rules! apply {
            ($($field:ident => $target:ident),* $(,)?) => {
                $(if let Some(v) = self.$field { cfg.$target = v; })*
            };
        }
        apply!(
            seed => seed,
            out => out_dir,
            n_samples => n_samples,
            alpha => alpha,
            beta => beta,
            max_mode => max_mode,
            t => t,
            step => step,
            radius => radius,
            p_moment => p_moment,
            lambda_grid => lambda_grid,
            besov_s => besov_s,
            besov_p => besov_p,
            l2_bound => l2_bound,
            scheme => scheme,
        );
        if self.degenerate_mode.is_some() {
            cfg.degenerate_mode = self.degenerate_mode;
        }
        if self.grid_size.is_some() {
            cfg.grid_size = self.grid_size;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Pushforward(a) => (ExperimentKind::Pushforward, a),
        Command::Moments(a) => (ExperimentKind::Moments, a),
        Command::Tails(a) => (ExperimentKind::Tails, a),
        Command::Convergence(a) => (ExperimentKind::Convergence, a),
        Command::Validate(a) => (ExperimentKind::Validate, a),
    };
    let config = match args.into_config(kind) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("tdnls: {e}");
            return ExitCode::from(2);
        }
    };
    let output = match run(&config) {
        Ok(o) => o,
        Err(e @ Error::Config(_)) => {
            eprintln!("tdnls: {e}");
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("tdnls: {} failed: {e}", kind.name());
            return ExitCode::from(1);
        }
    };
    let paths = match emit_outputs(&config, &output, &config.out_dir) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("tdnls: {e}");
            return ExitCode::from(1);
        }
    };
    println!("{}", paths.summary.display());
    println!("{}", paths.samples.display());
    if output.passed {
        ExitCode::SUCCESS
    } else {
        eprintln!(
            "tdnls: {} reported failing checks, see {}",
            kind.name(),
            paths.summary.display()
        );
        ExitCode::from(1)
    }
}
