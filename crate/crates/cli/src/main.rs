use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use augdfa::checkpoint::Checkpoint;
use augdfa::data::fixtures::{write_synthetic_cifar, write_synthetic_mnist};
use augdfa_cli::config::ExperimentConfig;
use augdfa_cli::{pso, run, sweep};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "augdfa", version, about = "Train networks with augmented direct feedback alignment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML or JSON experiment config; defaults apply without one.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dataset root; overrides `data_dir`.
    #[arg(long)]
    data_dir: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<(ExperimentConfig, PathBuf)> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(d) = &self.data_dir {
            cfg.data_dir = Some(d.clone());
        }
        let out = self
            .out
            .clone()
            .or_else(|| cfg.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from(format!("runs/{:?}-{}", cfg.model, cfg.seed).to_lowercase()));
        Ok((cfg, out))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train one model.
    Train(Common),
    /// Sweep one config axis with repeats.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Search Fourier feedback nonlinearities with a particle swarm.
    Pso {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Print the header and tensor summary of a checkpoint.
    InspectCheckpoint { path: PathBuf },
    /// Write synthetic MNIST-format and CIFAR-format files.
    GenFixtures {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        n_train: usize,
        #[arg(long, default_value_t = 200)]
        n_test: usize,
        /// Records per CIFAR batch file; 0 skips CIFAR.
        #[arg(long, default_value_t = 0)]
        cifar_per_file: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn inspect(path: &Path) -> Result<()> {
    let ck = Checkpoint::load(path).with_context(|| format!("reading checkpoint {}", path.display()))?;
    println!("kind {}\nseed {}\nepoch {}", ck.kind, ck.seed, ck.epoch);
    for t in &ck.tensors {
        println!("{:<20} {:?} norm {:.6e}", t.name, t.shape, t.norm());
    }
    Ok(())
}

fn main_inner(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(common) => {
            let (cfg, out) = common.load()?;
            let o = run::run_experiment(&cfg, Some(&out))?;
            let last = o.history.epochs.last();
            println!(
                "{} epochs, test acc {}, diverged {}, output {}",
                o.history.epochs.len(),
                last.map_or("n/a".into(), |m| format!("{:.4}", m.test_acc)),
                o.history.diverged,
                out.display()
            );
        }
        Command::Sweep { common, jobs } => {
            let (cfg, out) = common.load()?;
            let rows = sweep::run_sweep(&cfg, Some(&out), jobs.max(1))?;
            println!("{} runs, results in {}", rows.len(), out.join("sweep.csv").display());
        }
        Command::Pso { common, jobs } => {
            let (cfg, out) = common.load()?;
            let r = pso::run_pso(&cfg, Some(&out), jobs.max(1))?;
            println!("best score {:.4}, results in {}", r.best_score, out.display());
        }
        Command::InspectCheckpoint { path } => inspect(&path)?,
        Command::GenFixtures {
            out,
            n_train,
            n_test,
            cifar_per_file,
            seed,
        } => {
            write_synthetic_mnist(&out.join("mnist"), n_train, n_test, seed)?;
            if cifar_per_file > 0 {
                write_synthetic_cifar(&out.join("cifar10"), cifar_per_file, seed)?;
            }
            println!("fixtures written to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
