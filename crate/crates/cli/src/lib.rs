//! Library half of the command-line tool: config overrides, the pipeline
//! stages behind each subcommand, and static SVG rendering.

pub mod pipeline;
pub mod svg;

use std::path::PathBuf;

use cohort_shapley::config::ModeKind;
use cohort_shapley::{config, Error, Result, RunConfig};

/// Flag-level overrides applied on top of the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub mode: Option<ModeKind>,
    pub n_perms: Option<usize>,
}

pub fn load_config(path: &std::path::Path, ov: &Overrides) -> Result<RunConfig> {
    let mut cfg = config::load_config(path)?;
    if let Some(out) = &ov.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = ov.seed {
        cfg.seed = seed;
        if let Some(b) = cfg.bootstrap.as_mut() {
            b.seed = seed;
        }
        if let Some(s) = cfg.sobol.as_mut() {
            s.pickfreeze_seed = seed;
        }
    }
    if let Some(threads) = ov.threads {
        cfg.threads = threads;
    }
    if let Some(mode) = ov.mode {
        cfg.mode_kind = mode;
    }
    if let Some(n_perms) = ov.n_perms {
        if n_perms == 0 {
            return Err(Error::Config {
                line: None,
                msg: "n_perms must be at least 1".into(),
            });
        }
        cfg.n_perms = n_perms;
    }
    Ok(cfg)
}

/// Sizes the global thread pool; later calls are no-ops, which is fine for
/// tests that run several pipelines in one process.
pub fn init_threads(threads: usize) {
    if threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
}

/// Exit code contract: 2 for configuration problems, 3 for data problems.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_config() {
        2
    } else {
        3
    }
}
