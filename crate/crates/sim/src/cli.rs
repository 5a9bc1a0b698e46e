//! Command-line front end.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use crate::config::{parse_config, ExperimentConfig, ExperimentKind};
use crate::harness::{bound_records, run_experiment, MseRecord};
use crate::output::{emit_csv, summary};

#[derive(Debug, Parser)]
#[command(name = "losmimo", version, about = "LOS MIMO channel and frequency offset estimation benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the bounds of an experiment grid without simulation.
    Crb(RunArgs),
    /// Run one experiment and write its records as CSV.
    Simulate(RunArgs),
    /// Run the fig2, fig3 and fig4 presets into one directory.
    Sweep(SweepArgs),
    /// Print preset configurations as TOML.
    Presets {
        /// Only this preset (fig2, fig3 or fig4).
        name: Option<String>,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML experiment description.
    #[arg(long, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in experiment: fig2, fig3 or fig4.
    #[arg(long)]
    pub preset: Option<String>,
    /// Output CSV path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory for outputs without an explicit path.
    #[arg(long, env = "LOSMIMO_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Skip the table on stdout.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, env = "LOSMIMO_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub quiet: bool,
}

fn apply_overrides(cfg: &mut ExperimentConfig, seed: Option<u64>, trials: Option<usize>) -> anyhow::Result<()> {
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(t) = trials {
        cfg.trials = t;
    }
    cfg.validate()?;
    Ok(())
}

/// Configuration named by `--config` or `--preset`, with overrides applied.
pub fn load(args: &RunArgs) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            parse_config(&text).with_context(|| format!("in {}", path.display()))?
        }
        (None, Some(name)) => ExperimentConfig::preset_named(name)?,
        (None, None) => bail!("one of --config or --preset is required"),
    };
    apply_overrides(&mut cfg, args.seed, args.trials)?;
    Ok(cfg)
}

fn output_path(explicit: Option<&Path>, cfg: &ExperimentConfig, dir: Option<&Path>, suffix: &str) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    if let Some(p) = &cfg.output {
        return match dir {
            Some(d) if p.is_relative() => d.join(p),
            _ => p.clone(),
        };
    }
    dir.unwrap_or(Path::new(".")).join(format!("{}{suffix}.csv", cfg.name))
}

fn finish(records: &[MseRecord], path: &Path, quiet: bool) -> anyhow::Result<()> {
    emit_csv(records, path).with_context(|| format!("writing {}", path.display()))?;
    if !quiet {
        print!("{}", summary(records));
    }
    eprintln!("wrote {} records to {}", records.len(), path.display());
    Ok(())
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Crb(args) => {
            let cfg = load(&args)?;
            let records = bound_records(&cfg)?;
            let path = output_path(args.out.as_deref(), &cfg, args.out_dir.as_deref(), "_crb");
            finish(&records, &path, args.quiet)
        }
        Command::Simulate(args) => {
            let cfg = load(&args)?;
            let records = run_experiment(&cfg)?;
            let path = output_path(args.out.as_deref(), &cfg, args.out_dir.as_deref(), "");
            finish(&records, &path, args.quiet)
        }
        Command::Sweep(args) => {
            let dir = args.out.or(args.out_dir).unwrap_or_else(|| PathBuf::from("."));
            for kind in [ExperimentKind::Fig2, ExperimentKind::Fig3, ExperimentKind::Fig4] {
                let mut cfg = ExperimentConfig::preset(kind);
                apply_overrides(&mut cfg, args.seed, args.trials)?;
                let records = run_experiment(&cfg)?;
                finish(&records, &dir.join(format!("{}.csv", cfg.name)), args.quiet)?;
            }
            Ok(())
        }
        Command::Presets { name } => {
            let kinds = match name {
                Some(n) => vec![n.parse::<ExperimentKind>()?],
                None => vec![ExperimentKind::Fig2, ExperimentKind::Fig3, ExperimentKind::Fig4],
            };
            for kind in kinds {
                println!("# {}\n{}", kind.as_str(), ExperimentConfig::preset(kind).render());
            }
            Ok(())
        }
    }
}
