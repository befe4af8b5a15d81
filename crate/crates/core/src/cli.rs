//! Command-line front end: `synth`, `features` and `run`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::PipelineConfig;
use crate::pipeline::{self, NestedCv};
use crate::sigproc::{self, io::read_dataset};
use crate::spectral::{build_feature_matrix, FeatureMatrix};
use crate::svm::KernelKind;
use crate::synth::{self, SynthSpec};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Linear,
    Rbf,
}

impl From<KernelArg> for KernelKind {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Linear => KernelKind::Linear,
            KernelArg::Rbf => KernelKind::Rbf,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "fesc", version, about = "Coherence features, consensus feature selection and SVM evaluation")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured base seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Overrides the configured SVM kernel.
    #[arg(long, global = true, value_enum)]
    pub kernel: Option<KernelArg>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset from a JSON spec.
    Synth {
        spec: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Preprocess a trial dataset and write the feature-matrix CSV.
    Features {
        data: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Nested cross-validation with consensus feature selection.
    Run {
        features: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NoFeasibleModel => EXIT_INFEASIBLE,
        Error::Solver(_) | Error::Convergence { .. } | Error::DisconnectedGraph { .. } => EXIT_FAILURE,
        _ => EXIT_INPUT,
    }
}

impl Cli {
    fn effective_config(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(k) = self.kernel {
            cfg.svm.kernel = k.into();
        }
        cfg.validate()?;
        log::info!("effective configuration:\n{}", cfg.to_toml());
        Ok(cfg)
    }
}

pub fn cmd_synth(spec_path: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut spec = SynthSpec::load(spec_path)?;
    if let Some(s) = seed {
        spec.noise_seed = s;
    }
    log::info!("synth: noise seed {}", spec.noise_seed);
    let truth = synth::write(&spec, out)?;
    log::info!("wrote {} trials to {}; planted columns {:?}", 2 * spec.n_trials_per_class, out.display(), truth.names);
    Ok(())
}

pub fn cmd_features(data: &Path, cfg: &PipelineConfig, out: &Path) -> Result<FeatureMatrix> {
    let (meta, trials) = read_dataset(data)?;
    let conditioned = sigproc::condition(&trials, &cfg.preprocess)?;
    let fm = build_feature_matrix(&conditioned, &cfg.features.bands, cfg.features.scheme())?.with_class_names(meta.class_names.clone());
    fm.write_csv(out)?;
    log::info!("wrote {} rows x {} features to {}", fm.n_rows(), fm.n_features(), out.display());
    Ok(fm)
}

fn infeasibility_map(nested: &NestedCv) -> String {
    let mut s = String::from("no feasible consensus parameters; grid per outer fold (x = feasible, . = infeasible):\n");
    for f in &nested.folds {
        let marks: String = f.grid.cells.iter().map(|c| if c.accuracy.is_some() { 'x' } else { '.' }).collect();
        s.push_str(&format!("  fold {}: {marks}\n", f.fold));
    }
    s
}

pub fn cmd_run(features: &Path, cfg: &PipelineConfig, out: &Path) -> Result<pipeline::CvReport> {
    let fm = FeatureMatrix::read_csv(features)?;
    log::info!("loaded {} rows x {} features; class counts {:?}", fm.n_rows(), fm.n_features(), fm.class_counts());
    let nested = pipeline::nested_cv(&fm, cfg)?;
    pipeline::write_grid_csv(out, &nested.folds)?;
    let report = match pipeline::finish(&fm, cfg, &nested) {
        Ok(r) => r,
        Err(Error::NoFeasibleModel) => {
            eprint!("{}", infeasibility_map(&nested));
            return Err(Error::NoFeasibleModel);
        }
        Err(e) => return Err(e),
    };
    pipeline::write_outputs(out, &report, &nested)?;
    Ok(report)
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth { spec, out } => cmd_synth(spec, out, cli.seed),
        Command::Features { data, out } => {
            let cfg = cli.effective_config()?;
            cmd_features(data, &cfg, out).map(|_| ())
        }
        Command::Run { features, out } => {
            let cfg = cli.effective_config()?;
            let report = cmd_run(features, &cfg, out)?;
            println!(
                "gamma {} | training {:.4} | holdout {:.4} | {} features -> {}",
                report.gamma,
                report.training_accuracy,
                report.holdout_accuracy,
                report.selected_features.len(),
                out.join("report.json").display()
            );
            Ok(())
        }
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        pool = pool.num_threads(j);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return EXIT_FAILURE;
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_global_flags() {
        let cli = Cli::try_parse_from(["fesc", "run", "f.csv", "--out", "o", "--jobs", "4", "--kernel", "linear", "--seed", "9"]).unwrap();
        assert_eq!(cli.jobs, Some(4));
        assert_eq!(cli.kernel, Some(KernelArg::Linear));
        assert_eq!(cli.effective_config().unwrap().seed, 9);
        assert_eq!(cli.effective_config().unwrap().svm.kernel, KernelKind::Linear);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::NoFeasibleModel), 3);
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::Solver("x".into())), 1);
        assert_eq!(run(["fesc", "bogus"]), 2);
        assert_eq!(run(["fesc", "synth", "/nonexistent/spec.json", "--out", "/tmp/x"]), 2);
    }
}
