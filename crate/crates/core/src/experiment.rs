//! End-to-end orchestration: a validated config becomes a precomputed
//! table, a batch of independent seeded searches, aggregated statistics
//! and report artifacts.
//!
//! Everything that can fail from bad input (file references, spectrum
//! lookups, window/layout construction) fails here before the first
//! search step runs. Run seeds are `base_seed .. base_seed + run_count`,
//! and results are collected in seed order, so aggregates do not depend on
//! scheduling.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::environment::{
    crossing_norm, CftState, CrossingEnv, FreeLayout, ParamKind, RewardConfig,
};
use crate::error::{Error, Result};
use crate::model::{Coupling, CurvatureTable};
use crate::plot::{ErrorBar, Marker, Plot, Series};
use crate::points::{generate_points, read_points_csv};
use crate::precompute::BlockTable;
use crate::quadrature::QuadratureControl;
use crate::search::{run_search, RunRecord};
use crate::specfun::SeriesControl;
use crate::stats::{self, AggregateStats, RunSummary};

/// A validated experiment, ready to run.
pub struct ExperimentSetup {
    pub table: BlockTable,
    pub template: CftState,
    /// Searched-parameter names in layout order (1-based channel labels).
    pub param_names: Vec<String>,
    /// Sum groups translated from channel numbers to layout indices.
    pub group_indices: Vec<(String, Vec<usize>)>,
    /// Planted values of the searched parameters, when synthetic.
    pub planted_free: Option<Vec<f64>>,
}

/// Load every input, build the table (planting the synthetic solution if
/// configured) and resolve the searched-parameter layout.
pub fn prepare(cfg: &ExperimentConfig) -> Result<ExperimentSetup> {
    let deltas = cfg.validate()?;

    let points = match &cfg.points.path {
        Some(p) => read_points_csv(Path::new(p))?,
        None => generate_points(&cfg.points.generator_spec())?,
    };
    let curvature = match (&cfg.synthetic, &cfg.model.curvature_table) {
        (None, Some(path)) if cfg.reward.use_constraints => {
            Some(CurvatureTable::from_path(Path::new(path))?)
        }
        _ => None,
    };

    let table = BlockTable::build(
        Coupling::new(cfg.model.g)?,
        &deltas,
        points,
        curvature.as_ref(),
        &QuadratureControl::default(),
        &SeriesControl::default(),
    )?;
    let table = match &cfg.synthetic {
        Some(sy) => table.with_planted_solution(&sy.planted)?,
        None => table,
    };

    let n = deltas.len();
    let mut ope = vec![0.0; n];
    let mut fixed = vec![false; n];
    for f in &cfg.fixed {
        ope[f.channel - 1] = f.value;
        fixed[f.channel - 1] = true;
    }
    let template = CftState::with_fixed_deltas(deltas, ope, fixed)?;
    let layout = FreeLayout::of(&template);
    let param_names = layout
        .entries
        .iter()
        .map(|e| match e.kind {
            ParamKind::Delta => format!("delta_{}", e.channel + 1),
            ParamKind::OpeSq => format!("ope_sq_{}", e.channel + 1),
        })
        .collect();
    let group_indices = cfg
        .experiment
        .sum_groups
        .iter()
        .map(|g| {
            let idx = g
                .channels
                .iter()
                .map(|c| {
                    layout
                        .entries
                        .iter()
                        .position(|e| e.kind == ParamKind::OpeSq && e.channel == c - 1)
                        .expect("validated against the free channels")
                })
                .collect();
            (g.name.clone(), idx)
        })
        .collect();
    let planted_free = cfg
        .synthetic
        .as_ref()
        .map(|sy| layout.entries.iter().map(|e| sy.planted[e.channel]).collect());

    // surface layout problems (nothing free, free deltas) before running
    CrossingEnv::new(&table, template.clone(), cfg.reward)?;

    Ok(ExperimentSetup { table, template, param_names, group_indices, planted_free })
}

fn run_all(setup: &ExperimentSetup, cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    let base = cfg.experiment.base_seed;
    let seeds: Vec<u64> =
        (0..cfg.experiment.run_count as u64).map(|i| base.wrapping_add(i)).collect();
    let reward = cfg.reward;
    let work = || -> Result<Vec<RunRecord>> {
        seeds
            .par_iter()
            .map(|&seed| {
                let wrap = |e: Error| Error::Run { seed, source: Box::new(e) };
                let mut env =
                    CrossingEnv::new(&setup.table, setup.template.clone(), reward).map_err(wrap)?;
                run_search(&mut env, &cfg.sac, &cfg.schedule, seed, None).map_err(wrap)
            })
            .collect()
    };
    if cfg.experiment.parallelism > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.experiment.parallelism)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work)
    } else {
        work()
    }
}

pub struct ExperimentOutput {
    pub stats: AggregateStats,
    pub rows: Vec<RunSummary>,
    pub records: Vec<RunRecord>,
    pub param_names: Vec<String>,
    pub planted_free: Option<Vec<f64>>,
    pub artifact_dir: Option<PathBuf>,
}

/// Run the whole experiment. With `write_artifacts`, the output directory
/// receives the resolved config, the results CSV with its summary block, a
/// text summary and the two report plots (plus per-run reward traces when
/// enabled).
pub fn run_experiment(cfg: &ExperimentConfig, write_artifacts: bool) -> Result<ExperimentOutput> {
    let setup = prepare(cfg)?;
    let records = run_all(&setup, cfg)?;
    let rows: Vec<RunSummary> = records.iter().map(RunSummary::from_record).collect();
    let st =
        stats::aggregate(&rows, cfg.experiment.top_k, &setup.param_names, &setup.group_indices)?;
    let artifact_dir = if write_artifacts {
        Some(write_experiment_artifacts(cfg, &setup, &records, &rows, &st)?)
    } else {
        None
    };
    Ok(ExperimentOutput {
        stats: st,
        rows,
        records,
        param_names: setup.param_names,
        planted_free: setup.planted_free,
        artifact_dir,
    })
}

fn write_experiment_artifacts(
    cfg: &ExperimentConfig,
    setup: &ExperimentSetup,
    records: &[RunRecord],
    rows: &[RunSummary],
    st: &AggregateStats,
) -> Result<PathBuf> {
    let dir = PathBuf::from(&cfg.experiment.output_dir);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(dir.display().to_string(), e))?;

    cfg.write(&dir.join("config.toml"))?;
    stats::write_results_csv(&dir.join("results.csv"), &setup.param_names, rows, Some(st))?;

    let mut summary = format!(
        "g = {}\nchannels = {}\npoints = {}\nruns = {} (statistics on best {})\n\n",
        setup.table.g(),
        setup.table.n_channels(),
        setup.table.n_points(),
        rows.len(),
        st.k
    );
    summary.push_str(&stats::summary_text(st));
    let spath = dir.join("summary.txt");
    std::fs::write(&spath, summary).map_err(|e| Error::io(spath.display().to_string(), e))?;

    coefficient_plot(setup, rows, st)?.write_svg(&dir.join("coefficients.svg"), 720, 480)?;
    reward_plot(rows, st.k)?.write_svg(&dir.join("rewards.svg"), 720, 480)?;

    if cfg.experiment.write_traces {
        let tdir = dir.join("traces");
        std::fs::create_dir_all(&tdir).map_err(|e| Error::io(tdir.display().to_string(), e))?;
        for r in records {
            let mut text = String::new();
            for (step, reward) in &r.reward_history {
                text.push_str(
                    &serde_json::json!({"step": step, "best_reward": reward}).to_string(),
                );
                text.push('\n');
            }
            let path = tdir.join(format!("run_{}.jsonl", r.seed));
            std::fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))?;
        }
    }
    Ok(dir)
}

fn coefficient_plot(
    setup: &ExperimentSetup,
    rows: &[RunSummary],
    st: &AggregateStats,
) -> Result<Plot> {
    let best = stats::top_k(rows, st.k)?;
    let mut plot = Plot::new("searched parameters, best runs", "parameter", "value");
    plot.x_ticks = Some(
        st.param_names.iter().enumerate().map(|(i, n)| ((i + 1) as f64, n.clone())).collect(),
    );
    plot.series.push(Series {
        label: format!("best {} runs", st.k),
        points: best
            .iter()
            .flat_map(|r| {
                r.values.iter().enumerate().map(|(i, &v)| ((i + 1) as f64, v)).collect::<Vec<_>>()
            })
            .collect(),
        marker: Marker::Circle,
    });
    plot.error_bars = st
        .mean
        .iter()
        .zip(&st.std)
        .enumerate()
        .map(|(i, (&m, &s))| ErrorBar { x: (i + 1) as f64, mean: m, std: s })
        .collect();
    if let Some(planted) = &setup.planted_free {
        for (i, &v) in planted.iter().enumerate() {
            plot.h_lines.push((v, format!("plant {}", st.param_names[i])));
        }
    }
    Ok(plot)
}

fn reward_plot(rows: &[RunSummary], k: usize) -> Result<Plot> {
    let best = stats::top_k(rows, k)?;
    let mut plot = Plot::new("best reward per run", "run seed", "best reward");
    plot.log_y = true;
    plot.series.push(Series {
        label: "all runs".into(),
        points: rows.iter().map(|r| (r.seed as f64, r.best_reward)).collect(),
        marker: Marker::Circle,
    });
    plot.series.push(Series {
        label: format!("best {k}"),
        points: best.iter().map(|r| (r.seed as f64, r.best_reward)).collect(),
        marker: Marker::Cross,
    });
    Ok(plot)
}

pub struct AblationVariant {
    pub label: String,
    pub reward: RewardConfig,
    pub stats: AggregateStats,
    pub rows: Vec<RunSummary>,
    /// Median over the searched coefficients of |mean - plant| / plant.
    pub median_rel_err: f64,
    /// Mean crossing-equation residual norm of the best-k states.
    pub mean_crossing_norm: f64,
}

pub struct AblationReport {
    /// Planted values of the searched parameters.
    pub reference: Vec<f64>,
    pub variants: Vec<AblationVariant>,
    pub artifact_dir: Option<PathBuf>,
}

impl AblationReport {
    pub fn text(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::new();
        writeln!(s, "constraint ablation over a planted problem").unwrap();
        writeln!(s, "reference values: {:?}", self.reference).unwrap();
        writeln!(s).unwrap();
        writeln!(
            s,
            "{:<20} {:>16} {:>18} {:>14} {:>14}",
            "variant", "median rel err", "mean |E|", "w1", "w2"
        )
        .unwrap();
        for v in &self.variants {
            writeln!(
                s,
                "{:<20} {:>16.6e} {:>18.6e} {:>14.3e} {:>14.3e}",
                v.label,
                v.median_rel_err,
                v.mean_crossing_norm,
                if v.reward.use_constraints { v.reward.w1 } else { 0.0 },
                if v.reward.use_constraints { v.reward.w2 } else { 0.0 },
            )
            .unwrap();
        }
        if let (Some(first), Some(last)) = (self.variants.first(), self.variants.last()) {
            if last.median_rel_err > 0.0 {
                writeln!(s).unwrap();
                writeln!(
                    s,
                    "error ratio {} / {} = {:.3}",
                    first.label,
                    last.label,
                    first.median_rel_err / last.median_rel_err
                )
                .unwrap();
            }
        }
        s
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Run the same planted experiment once per reward variant with identical
/// seeds, and compare recovery error against the plant.
pub fn ablation_compare(
    cfg: &ExperimentConfig,
    variants: &[(String, RewardConfig)],
    write_artifacts: bool,
) -> Result<AblationReport> {
    if variants.len() < 2 {
        return Err(Error::Config("ablation needs at least two variants".into()));
    }
    if cfg.synthetic.is_none() {
        return Err(Error::Config(
            "ablation compares against a planted solution; set [synthetic]".into(),
        ));
    }

    let mut out_variants = Vec::with_capacity(variants.len());
    let mut reference = Vec::new();
    let mut artifact_dir = None;
    for (label, reward) in variants {
        let mut vcfg = cfg.clone();
        vcfg.reward = *reward;
        let setup = prepare(&vcfg)?;
        let planted = setup
            .planted_free
            .clone()
            .expect("synthetic checked above");
        if planted.iter().any(|v| *v <= 0.0) {
            return Err(Error::Config(
                "relative error against a zero plant is undefined; use positive plants".into(),
            ));
        }
        reference = planted.clone();

        let records = run_all(&setup, &vcfg)?;
        let rows: Vec<RunSummary> = records.iter().map(RunSummary::from_record).collect();
        let st = stats::aggregate(
            &rows,
            vcfg.experiment.top_k,
            &setup.param_names,
            &setup.group_indices,
        )?;
        let rel: Vec<f64> = st
            .mean
            .iter()
            .zip(&planted)
            .map(|(m, p)| (m - p).abs() / p)
            .collect();
        let best = stats::top_k(&rows, st.k)?;
        let mut norm_sum = 0.0;
        for b in &best {
            let rec = records.iter().find(|r| r.seed == b.seed).expect("seed from rows");
            norm_sum += crossing_norm(&rec.best_state, &setup.table)?;
        }
        let mean_norm = norm_sum / best.len() as f64;

        if write_artifacts {
            let dir = PathBuf::from(&vcfg.experiment.output_dir);
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
            stats::write_results_csv(
                &dir.join(format!("results_{label}.csv")),
                &setup.param_names,
                &rows,
                Some(&st),
            )?;
            artifact_dir = Some(dir);
        }

        out_variants.push(AblationVariant {
            label: label.clone(),
            reward: *reward,
            stats: st,
            rows,
            median_rel_err: median(rel),
            mean_crossing_norm: mean_norm,
        });
    }

    let report = AblationReport { reference, variants: out_variants, artifact_dir };
    if let Some(dir) = &report.artifact_dir {
        let path = dir.join("ablation.txt");
        std::fs::write(&path, report.text())
            .map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    Ok(report)
}
