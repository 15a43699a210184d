//! Command-line interface.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{ArgAction, Args, Parser, Subcommand};
use mcgdm_core::gradcheck::{check_head_grad, check_local_loss, random_instance, Tolerance};

use crate::checkpoint::save_checkpoint;
use crate::config::{parse_config, Config, Mode, CONFIG_HELP};
use crate::experiment::{generate, mean_std, run_seed};
use crate::output::{checkpoint_path, create_dir, dataset_csv, metrics_csv, metrics_path, summarize, write_file};
use crate::{AppError, AppResult};

#[derive(Debug, Parser)]
#[command(name = "mcgdm", version, about = "Federated domain generalization simulator with gradient matching")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Leave-one-domain-out training; the held-out domain is never seen.
    #[command(after_long_help = CONFIG_HELP)]
    RunDg(RunArgs),
    /// Domain adaptation to an unlabeled target via pseudo-label voting.
    #[command(after_long_help = CONFIG_HELP)]
    RunDa(RunArgs),
    /// Compare autodiff gradients of the local objective against finite
    /// differences.
    GradCheck(GradCheckArgs),
    /// Write the configured datasets as CSV, one file per domain.
    #[command(after_long_help = CONFIG_HELP)]
    GenData(GenDataArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Output directory, replaces `out_dir` from the config.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Append a seed to the configured list.
    #[arg(long = "seed", value_name = "N")]
    pub seeds: Vec<u64>,
    /// Set a config key, e.g. `hp.lambda=0.3`. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Train the clients of each round concurrently.
    #[arg(long, value_name = "BOOL", action = ArgAction::Set, default_value_t = false)]
    pub parallel_clients: bool,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct GradCheckArgs {
    /// Upper bounds of the layer widths; each instance draws widths below them.
    #[arg(long, value_delimiter = ',', default_value = "6,8,5")]
    pub arch: Vec<usize>,
    #[arg(long, default_value_t = 4)]
    pub classes: usize,
    #[arg(long, default_value_t = 8)]
    pub batch: usize,
    /// Instances checked against finite differences.
    #[arg(long, default_value_t = 20)]
    pub trials: u64,
    /// Instances checked for the closed-form head gradient.
    #[arg(long, default_value_t = 50)]
    pub head_trials: u64,
    /// Relative tolerance for coordinates with |g| > 1e-6.
    #[arg(long, default_value_t = 1e-5)]
    pub tolerance: f64,
    /// Absolute tolerance for the remaining coordinates.
    #[arg(long, default_value_t = 1e-7)]
    pub abs_tolerance: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub head_tolerance: f64,
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-5)]
    pub step: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl ConfigArgs {
    fn resolve(&self, mode: Option<Mode>) -> AppResult<Config> {
        let mut overrides = self.overrides.clone();
        if let Some(m) = mode {
            let tag = match m {
                Mode::Dg => "dg",
                Mode::Da => "da",
            };
            overrides.push(format!("mode=\"{tag}\""));
        }
        let mut cfg = parse_config(&self.config, &overrides)?;
        for &s in &self.seeds {
            if !cfg.seeds.contains(&s) {
                cfg.seeds.push(s);
            }
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        Ok(cfg)
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> AppResult<()> {
    match cli.command {
        Command::RunDg(a) => cmd_run(Mode::Dg, &a, out),
        Command::RunDa(a) => cmd_run(Mode::Da, &a, out),
        Command::GradCheck(a) => cmd_grad_check(&a, out),
        Command::GenData(a) => cmd_gen_data(&a, out),
    }
}

fn say(out: &mut dyn Write, line: std::fmt::Arguments) -> AppResult<()> {
    writeln!(out, "{line}").map_err(|e| AppError::io("<stdout>", e))
}

pub fn cmd_run(mode: Mode, args: &RunArgs, out: &mut dyn Write) -> AppResult<()> {
    let cfg = args.config.resolve(Some(mode))?;
    create_dir(&cfg.out_dir)?;
    let what = match mode {
        Mode::Dg => "unseen",
        Mode::Da => "target",
    };
    let mut runs = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let started = Instant::now();
        let run = run_seed(&cfg, seed, args.parallel_clients)?;
        write_file(&metrics_path(&cfg.out_dir, seed), &metrics_csv(&run.outcome.metrics))?;
        save_checkpoint(&run.outcome.global, &checkpoint_path(&cfg.out_dir, seed))?;
        say(
            out,
            format_args!(
                "seed {seed}: {what} accuracy {:.4}, source accuracy {:.4} ({:.1}s)",
                run.outcome.headline_accuracy,
                run.outcome.source_accuracy,
                started.elapsed().as_secs_f64()
            ),
        )?;
        runs.push(run);
    }
    let summary = summarize(&cfg, &runs);
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_file(&cfg.out_dir.join("summary.json"), &(json + "\n"))?;
    let (mean, std) = mean_std(&runs.iter().map(|r| r.outcome.headline_accuracy).collect::<Vec<_>>());
    say(
        out,
        format_args!("{what} accuracy over {} seeds: {mean:.4} ± {std:.4}", runs.len()),
    )
}

pub fn cmd_grad_check(args: &GradCheckArgs, out: &mut dyn Write) -> AppResult<()> {
    if args.trials == 0 || args.head_trials == 0 {
        return Err(AppError::Config("trials must be >= 1".into()));
    }
    let tol = Tolerance {
        relative: args.tolerance,
        absolute: args.abs_tolerance,
        ..Tolerance::default()
    };
    let (mut rel, mut abs) = (0.0f64, 0.0f64);
    let mut failure = None;
    for trial in 0..args.trials {
        let inst = random_instance(&args.arch, args.classes, args.batch, args.seed, trial)?;
        let d = check_local_loss(&inst, args.step, tol)?;
        rel = rel.max(d.worst_relative);
        abs = abs.max(d.worst_absolute);
        if let (None, Some((k, a, r))) = (&failure, d.violation) {
            failure = Some(format!(
                "trial {trial}, coordinate {k}: autodiff {a:e} vs finite difference {r:e}"
            ));
        }
    }
    say(
        out,
        format_args!(
            "local loss: {} trials, worst relative error {rel:.3e}, worst absolute error {abs:.3e}",
            args.trials
        ),
    )?;

    let mut head = 0.0f64;
    for trial in 0..args.head_trials {
        let inst = random_instance(&args.arch, args.classes.max(2), args.batch, args.seed, 1_000_000 + trial)?;
        let diff = check_head_grad(&inst)?;
        if diff > args.head_tolerance && failure.is_none() {
            failure = Some(format!("head gradient trial {trial}: max abs difference {diff:e}"));
        }
        head = head.max(diff);
    }
    say(
        out,
        format_args!("head gradient: {} trials, max abs difference {head:.3e}", args.head_trials),
    )?;
    match failure {
        Some(f) => Err(AppError::GradCheck(f)),
        None => Ok(()),
    }
}

pub fn cmd_gen_data(args: &GenDataArgs, out: &mut dyn Write) -> AppResult<()> {
    let cfg = args.config.resolve(None)?;
    create_dir(&cfg.out_dir)?;
    let seed = *cfg.seeds.last().expect("validated non-empty");
    for d in generate(&cfg, seed)? {
        let path = cfg.out_dir.join(format!("domain_{}.csv", d.domain_id));
        write_file(&path, &dataset_csv(&d))?;
        say(out, format_args!("wrote {} ({} rows)", path.display(), d.len()))?;
    }
    Ok(())
}
