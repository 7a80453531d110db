//! Command-line front end: experiments, ablations, table precomputation,
//! stats re-aggregation and point-set generation.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use crossing_core::config::ExperimentConfig;
use crossing_core::environment::RewardConfig;
use crossing_core::experiment;
use crossing_core::points::{generate_points, read_points_csv, write_points_csv, PointSetSpec};
use crossing_core::stats;

/// Output-directory override, outside the config file.
const OUTPUT_DIR_ENV: &str = "CROSSING_OUTPUT_DIR";

#[derive(Parser)]
#[command(
    name = "crossing",
    version,
    about = "stochastic search for truncated crossing-equation solutions"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a full experiment described by a config file
    Run(RunArgs),
    /// Compare constraint variants on a planted problem, shared seeds
    Ablate(AblateArgs),
    /// Build the block/constraint table for a config and cache it as CSV
    Precompute(PrecomputeArgs),
    /// Re-aggregate an existing results CSV
    Stats(StatsArgs),
    /// Generate a sample point set, or inspect an existing one
    Points(PointsArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Override the output directory (flag > CROSSING_OUTPUT_DIR > file)
    #[arg(long)]
    output_dir: Option<String>,
    /// Override the number of runs
    #[arg(long)]
    runs: Option<usize>,
    /// Override how many best runs enter the statistics
    #[arg(long)]
    top_k: Option<usize>,
    /// Override the base seed
    #[arg(long)]
    base_seed: Option<u64>,
    /// Write per-run reward traces (JSONL) even if the file says not to
    #[arg(long)]
    write_traces: bool,
}

#[derive(Args)]
struct AblateArgs {
    /// Experiment config (TOML); must define a planted [synthetic] problem
    #[arg(long)]
    config: PathBuf,
    /// Override the output directory (flag > CROSSING_OUTPUT_DIR > file)
    #[arg(long)]
    output_dir: Option<String>,
    /// Also run the single-constraint variant (w2 = 0)
    #[arg(long)]
    include_single: bool,
}

#[derive(Args)]
struct PrecomputeArgs {
    /// Experiment config (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Where to write the table CSV
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    /// Results CSV produced by `run`
    #[arg(long)]
    results: PathBuf,
    /// How many best runs enter the statistics
    #[arg(long)]
    top_k: usize,
    /// Sum group over 1-based parameter columns, e.g. --group tail=2,3
    #[arg(long = "group", value_parser = parse_group)]
    groups: Vec<(String, Vec<usize>)>,
    /// Rewrite the CSV with a fresh summary block appended
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PointsArgs {
    /// Inspect this point-set CSV instead of generating one
    #[arg(long, conflicts_with_all = ["count", "seed", "margin", "complex"])]
    from: Option<PathBuf>,
    #[arg(long, default_value_t = 180)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    margin: f64,
    /// Emit conjugate pairs off the real axis as well
    #[arg(long)]
    complex: bool,
    /// Where to write the CSV (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_group(s: &str) -> Result<(String, Vec<usize>), String> {
    let (name, rest) = s.split_once('=').ok_or("expected name=i,j,...")?;
    if name.is_empty() {
        return Err("group name is empty".into());
    }
    let mut cols = Vec::new();
    for part in rest.split(',') {
        let col: usize = part.trim().parse().map_err(|_| format!("bad column {part:?}"))?;
        if col == 0 {
            return Err("columns are 1-based".into());
        }
        cols.push(col - 1);
    }
    if cols.is_empty() {
        return Err("group has no columns".into());
    }
    Ok((name.to_string(), cols))
}

fn load_config(path: &PathBuf) -> Result<ExperimentConfig> {
    ExperimentConfig::from_path(path)
        .with_context(|| format!("loading config {}", path.display()))
}

fn apply_output_dir(cfg: &mut ExperimentConfig, flag: &Option<String>) {
    if let Some(dir) = flag {
        cfg.experiment.output_dir = dir.clone();
    } else if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
        if !dir.is_empty() {
            cfg.experiment.output_dir = dir;
        }
    }
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let mut cfg = load_config(&args.config)?;
    apply_output_dir(&mut cfg, &args.output_dir);
    if let Some(n) = args.runs {
        cfg.experiment.run_count = n;
    }
    if let Some(k) = args.top_k {
        cfg.experiment.top_k = k;
    }
    if let Some(s) = args.base_seed {
        cfg.experiment.base_seed = s;
    }
    if args.write_traces {
        cfg.experiment.write_traces = true;
    }

    let out = experiment::run_experiment(&cfg, true)?;
    for r in &out.rows {
        println!(
            "run seed {:>6}  best reward {:>12.6e}  steps {:>8}",
            r.seed, r.best_reward, r.total_steps
        );
    }
    println!();
    print!("{}", stats::summary_text(&out.stats));
    if let Some(planted) = &out.planted_free {
        println!();
        for ((name, mean), plant) in
            out.param_names.iter().zip(&out.stats.mean).zip(planted)
        {
            println!(
                "{name}: mean {mean:.8} vs plant {plant:.8} (rel err {:.3e})",
                (mean - plant).abs() / plant.abs().max(f64::MIN_POSITIVE)
            );
        }
    }
    if let Some(dir) = &out.artifact_dir {
        println!("\nartifacts written to {}", dir.display());
    }
    Ok(())
}

fn cmd_ablate(args: &AblateArgs) -> Result<()> {
    let mut cfg = load_config(&args.config)?;
    apply_output_dir(&mut cfg, &args.output_dir);

    let full = RewardConfig { use_constraints: true, ..cfg.reward };
    let none = RewardConfig { use_constraints: false, ..cfg.reward };
    let mut variants = vec![("no_constraints".to_string(), none)];
    if args.include_single {
        let single = RewardConfig { w2: 0.0, ..full };
        variants.push(("one_constraint".to_string(), single));
    }
    variants.push(("two_constraints".to_string(), full));

    let report = experiment::ablation_compare(&cfg, &variants, true)?;
    print!("{}", report.text());
    if let Some(dir) = &report.artifact_dir {
        println!("\nartifacts written to {}", dir.display());
    }
    Ok(())
}

fn cmd_precompute(args: &PrecomputeArgs) -> Result<()> {
    let cfg = load_config(&args.config)?;
    let setup = experiment::prepare(&cfg)?;
    setup.table.write_csv(&args.out)?;
    println!(
        "table for g = {}: {} channels x {} points -> {}",
        setup.table.g(),
        setup.table.n_channels(),
        setup.table.n_points(),
        args.out.display()
    );
    Ok(())
}

fn cmd_stats(args: &StatsArgs) -> Result<()> {
    let (names, rows) = stats::read_results_csv(&args.results)
        .with_context(|| format!("reading {}", args.results.display()))?;
    for (_, cols) in &args.groups {
        for &c in cols {
            if c >= names.len() {
                bail!("group column {} out of range (have {} parameters)", c + 1, names.len());
            }
        }
    }
    let st = stats::aggregate(&rows, args.top_k, &names, &args.groups)?;
    print!("{}", stats::summary_text(&st));
    if let Some(out) = &args.out {
        stats::write_results_csv(out, &names, &rows, Some(&st))?;
        println!("\nrewritten with summary to {}", out.display());
    }
    Ok(())
}

fn cmd_points(args: &PointsArgs) -> Result<()> {
    let set = match &args.from {
        Some(path) => read_points_csv(path)?,
        None => {
            let spec = PointSetSpec {
                count: args.count,
                seed: args.seed,
                margin: args.margin,
                complex: args.complex,
            };
            generate_points(&spec)?
        }
    };
    let inside = set
        .points()
        .iter()
        .all(|x| x.norm() < 1.0 && (1.0 - x).norm() < 1.0);
    let kind = if set.points().iter().any(|x| x.im != 0.0) { "complex" } else { "real" };
    match (&args.from, &args.out) {
        (_, Some(path)) => {
            write_points_csv(&set, path)?;
            println!(
                "{} {kind} points (all inside convergence lens: {}) -> {}",
                set.count(),
                inside,
                path.display()
            );
        }
        (Some(path), None) => {
            println!(
                "{}: {} {kind} points (all inside convergence lens: {})",
                path.display(),
                set.count(),
                inside
            );
        }
        (None, None) => {
            print!("{}", crossing_core::points::points_to_csv_string(&set));
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    match &Cli::parse().cmd {
        Cmd::Run(a) => cmd_run(a),
        Cmd::Ablate(a) => cmd_ablate(a),
        Cmd::Precompute(a) => cmd_precompute(a),
        Cmd::Stats(a) => cmd_stats(a),
        Cmd::Points(a) => cmd_points(a),
    }
}
