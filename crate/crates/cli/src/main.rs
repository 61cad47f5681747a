use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cohort_shapley::config::ModeKind;
use cohort_shapley_cli::{exit_code, init_threads, load_config, pipeline, Overrides};

/// Cohort Shapley variable importance from observed data only.
#[derive(Parser)]
#[command(name = "cohort-shapley", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Per-target attributions (CSV + JSON lines).
    Attribute(CommonArgs),
    /// Attributions plus per-group mean tables.
    Aggregate(CommonArgs),
    /// Bayesian-bootstrap uncertainty for groups and targets.
    Bootstrap(CommonArgs),
    /// Exact ANOVA / Sobol' indices of a product-grid file.
    Sobol(CommonArgs),
    /// Full pipeline: attribute, aggregate, histograms, bootstrap, manifest.
    Report(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override for every seeded stage.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 or unset: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Estimation mode override.
    #[arg(long, value_parser = ["exact", "mc"])]
    mode: Option<String>,
    /// Permutation count for Monte Carlo mode.
    #[arg(long = "n-perms")]
    n_perms: Option<usize>,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            out: self.out.clone(),
            seed: self.seed,
            threads: self.threads,
            mode: self.mode.as_deref().map(|m| match m {
                "mc" => ModeKind::MonteCarlo,
                _ => ModeKind::Exact,
            }),
            n_perms: self.n_perms,
        }
    }
}

type StageFn = fn(&cohort_shapley::RunConfig, &std::path::Path) -> cohort_shapley::Result<()>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, run): (&CommonArgs, StageFn) = match &cli.cmd {
        Cmd::Attribute(a) => (a, pipeline::cmd_attribute),
        Cmd::Aggregate(a) => (a, pipeline::cmd_aggregate),
        Cmd::Bootstrap(a) => (a, pipeline::cmd_bootstrap),
        Cmd::Sobol(a) => (a, pipeline::cmd_sobol),
        Cmd::Report(a) => (a, pipeline::cmd_report),
    };
    let cfg = match load_config(&args.config, &args.overrides()) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e) as u8);
        }
    };
    init_threads(cfg.threads);
    match run(&cfg, &args.config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
