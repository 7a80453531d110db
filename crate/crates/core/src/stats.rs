//! Aggregation over completed searches: best-k selection, per-parameter
//! mean/std, and the two conventions for the statistics of a sum of
//! coefficients.
//!
//! Standard deviations use the population convention (divide by k).
//! Summaries report both the std and the standard error std/sqrt(k).

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::search::RunRecord;

/// The slice of a run that statistics and the results file work on.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub seed: u64,
    pub best_reward: f64,
    pub total_steps: usize,
    /// Searched parameter values in layout order.
    pub values: Vec<f64>,
}

impl RunSummary {
    pub fn from_record(r: &RunRecord) -> RunSummary {
        RunSummary {
            seed: r.seed,
            best_reward: r.best_reward,
            total_steps: r.total_steps,
            values: r.best_free_values.clone(),
        }
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation (1/n inside the square root).
pub fn population_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// The `k` runs with the largest best reward; ties at the cutoff go to the
/// lower seed so selection is deterministic.
pub fn top_k(rows: &[RunSummary], k: usize) -> Result<Vec<RunSummary>> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if rows.len() < k {
        return Err(Error::InsufficientRuns { need: k, have: rows.len() });
    }
    let mut sorted: Vec<&RunSummary> = rows.iter().collect();
    sorted.sort_by(|a, b| b.best_reward.total_cmp(&a.best_reward).then(a.seed.cmp(&b.seed)));
    Ok(sorted[..k].iter().map(|r| (*r).clone()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SumMode {
    /// Form the sum per run, then take statistics over runs.
    Direct,
    /// Sum the per-coefficient means; variance is the sum of the
    /// per-coefficient variances (independence assumption).
    Propagated,
}

fn check_indices(rows: &[RunSummary], indices: &[usize]) -> Result<usize> {
    if rows.is_empty() {
        return Err(Error::NotEnoughData { have: 0, need: 1 });
    }
    let dim = rows[0].values.len();
    if rows.iter().any(|r| r.values.len() != dim) {
        return Err(Error::InvalidParameter("runs disagree on parameter count".into()));
    }
    if indices.is_empty() {
        return Err(Error::InvalidParameter("sum group has no indices".into()));
    }
    for (pos, &i) in indices.iter().enumerate() {
        if i >= dim {
            return Err(Error::InvalidParameter(format!(
                "sum index {i} out of range for {dim} parameters"
            )));
        }
        if indices[..pos].contains(&i) {
            return Err(Error::InvalidParameter(format!("sum index {i} repeated")));
        }
    }
    Ok(dim)
}

/// Mean and population std of the sum of the selected parameters.
pub fn sum_group_stats(rows: &[RunSummary], indices: &[usize], mode: SumMode) -> Result<(f64, f64)> {
    check_indices(rows, indices)?;
    match mode {
        SumMode::Direct => {
            let sums: Vec<f64> =
                rows.iter().map(|r| indices.iter().map(|&i| r.values[i]).sum()).collect();
            Ok((mean(&sums), population_std(&sums)))
        }
        SumMode::Propagated => {
            let mut m = 0.0;
            let mut var = 0.0;
            for &i in indices {
                let col: Vec<f64> = rows.iter().map(|r| r.values[i]).collect();
                m += mean(&col);
                let s = population_std(&col);
                var += s * s;
            }
            Ok((m, var.sqrt()))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SumGroup {
    pub name: String,
    pub indices: Vec<usize>,
    pub direct_mean: f64,
    pub direct_std: f64,
    pub propagated_mean: f64,
    pub propagated_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateStats {
    pub k: usize,
    pub param_names: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub sum_groups: Vec<SumGroup>,
}

/// Select the best `k` of `rows` and aggregate: per-parameter mean/std plus
/// both statistics for each named sum group.
pub fn aggregate(
    rows: &[RunSummary],
    k: usize,
    param_names: &[String],
    groups: &[(String, Vec<usize>)],
) -> Result<AggregateStats> {
    let best = top_k(rows, k)?;
    let dim = check_indices(&best, &(0..best[0].values.len()).collect::<Vec<_>>())?;
    if param_names.len() != dim {
        return Err(Error::InvalidParameter(format!(
            "{} parameter names for {dim} parameters",
            param_names.len()
        )));
    }
    let mut means = Vec::with_capacity(dim);
    let mut stds = Vec::with_capacity(dim);
    for i in 0..dim {
        let col: Vec<f64> = best.iter().map(|r| r.values[i]).collect();
        means.push(mean(&col));
        stds.push(population_std(&col));
    }
    let mut sum_groups = Vec::with_capacity(groups.len());
    for (name, indices) in groups {
        let (dm, ds) = sum_group_stats(&best, indices, SumMode::Direct)?;
        let (pm, ps) = sum_group_stats(&best, indices, SumMode::Propagated)?;
        sum_groups.push(SumGroup {
            name: name.clone(),
            indices: indices.clone(),
            direct_mean: dm,
            direct_std: ds,
            propagated_mean: pm,
            propagated_std: ps,
        });
    }
    Ok(AggregateStats { k, param_names: param_names.to_vec(), mean: means, std: stds, sum_groups })
}

/// Tabular part of the results file: tagged rows, one `run` row per search.
pub fn results_csv_string(param_names: &[String], rows: &[RunSummary]) -> String {
    let mut s = String::new();
    writeln!(s, "format,results,1").unwrap();
    writeln!(s, "param,{}", param_names.join(",")).unwrap();
    for r in rows {
        write!(s, "run,{},{:.16e},{}", r.seed, r.best_reward, r.total_steps).unwrap();
        for v in &r.values {
            write!(s, ",{v:.16e}").unwrap();
        }
        writeln!(s).unwrap();
    }
    s
}

/// Summary block appended below the run rows; `read` skips these lines, so
/// a results file can always be re-aggregated.
pub fn summary_block_string(st: &AggregateStats) -> String {
    let mut s = String::new();
    writeln!(s, "summary,k,{}", st.k).unwrap();
    let root_k = (st.k as f64).sqrt();
    for (i, name) in st.param_names.iter().enumerate() {
        writeln!(
            s,
            "summary_param,{name},{:.16e},{:.16e},{:.16e}",
            st.mean[i],
            st.std[i],
            st.std[i] / root_k
        )
        .unwrap();
    }
    for g in &st.sum_groups {
        writeln!(
            s,
            "summary_group,{},{:.16e},{:.16e},{:.16e},{:.16e}",
            g.name, g.direct_mean, g.direct_std, g.propagated_mean, g.propagated_std
        )
        .unwrap();
    }
    s
}

pub fn write_results_csv(
    path: &Path,
    param_names: &[String],
    rows: &[RunSummary],
    summary: Option<&AggregateStats>,
) -> Result<()> {
    let mut s = results_csv_string(param_names, rows);
    if let Some(st) = summary {
        s.push_str(&summary_block_string(st));
    }
    std::fs::write(path, s).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn results_from_csv_str(text: &str, origin: &str) -> Result<(Vec<String>, Vec<RunSummary>)> {
    let mut names: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    let mut saw_format = false;
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        match cols[0] {
            "format" => {
                if cols != ["format", "results", "1"] {
                    return Err(Error::parse(origin, ln + 1, "unsupported results format"));
                }
                saw_format = true;
            }
            "param" => {
                if cols.len() < 2 {
                    return Err(Error::parse(origin, ln + 1, "param row lists no names"));
                }
                names = Some(cols[1..].iter().map(|s| s.to_string()).collect());
            }
            "run" => {
                let names = names
                    .as_ref()
                    .ok_or_else(|| Error::parse(origin, ln + 1, "run row before param row"))?;
                if cols.len() != 4 + names.len() {
                    return Err(Error::parse(
                        origin,
                        ln + 1,
                        format!("expected {} columns, found {}", 4 + names.len(), cols.len()),
                    ));
                }
                let seed: u64 = cols[1]
                    .parse()
                    .map_err(|_| Error::parse(origin, ln + 1, format!("bad seed '{}'", cols[1])))?;
                let best_reward: f64 = cols[2].parse().map_err(|_| {
                    Error::parse(origin, ln + 1, format!("bad reward '{}'", cols[2]))
                })?;
                let total_steps: usize = cols[3].parse().map_err(|_| {
                    Error::parse(origin, ln + 1, format!("bad step count '{}'", cols[3]))
                })?;
                let values: Result<Vec<f64>> = cols[4..]
                    .iter()
                    .map(|c| {
                        c.parse::<f64>().map_err(|_| {
                            Error::parse(origin, ln + 1, format!("bad value '{c}'"))
                        })
                    })
                    .collect();
                rows.push(RunSummary { seed, best_reward, total_steps, values: values? });
            }
            // summary lines are output-only
            t if t.starts_with("summary") => {}
            other => {
                return Err(Error::parse(origin, ln + 1, format!("unexpected row '{other}'")));
            }
        }
    }
    if !saw_format {
        return Err(Error::parse(origin, 1, "missing format row"));
    }
    match names {
        Some(n) => Ok((n, rows)),
        None => Err(Error::parse(origin, 1, "missing param row")),
    }
}

pub fn read_results_csv(path: &Path) -> Result<(Vec<String>, Vec<RunSummary>)> {
    let origin = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(origin.clone(), e))?;
    results_from_csv_str(&text, &origin)
}

/// Human-readable report of an aggregate.
pub fn summary_text(st: &AggregateStats) -> String {
    let mut s = String::new();
    let root_k = (st.k as f64).sqrt();
    writeln!(s, "statistics over the best {} runs by reward", st.k).unwrap();
    writeln!(s).unwrap();
    writeln!(s, "{:<14} {:>22} {:>14} {:>14}", "parameter", "mean", "std", "std/sqrt(k)").unwrap();
    for (i, name) in st.param_names.iter().enumerate() {
        writeln!(
            s,
            "{:<14} {:>22.15e} {:>14.6e} {:>14.6e}",
            name,
            st.mean[i],
            st.std[i],
            st.std[i] / root_k
        )
        .unwrap();
    }
    if !st.sum_groups.is_empty() {
        writeln!(s).unwrap();
        writeln!(
            s,
            "{:<14} {:>22} {:>14} {:>14}",
            "sum group", "direct mean", "direct std", "propagated std"
        )
        .unwrap();
        for g in &st.sum_groups {
            writeln!(
                s,
                "{:<14} {:>22.15e} {:>14.6e} {:>14.6e}",
                g.name, g.direct_mean, g.direct_std, g.propagated_std
            )
            .unwrap();
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn row(seed: u64, reward: f64, values: &[f64]) -> RunSummary {
        RunSummary { seed, best_reward: reward, total_steps: 100, values: values.to_vec() }
    }

    #[test]
    fn moments_use_population_convention() {
        assert_eq!(mean(&[1.0, 3.0]), 2.0);
        // population std of {1,3} is 1; the sample convention would give sqrt(2)
        assert_eq!(population_std(&[1.0, 3.0]), 1.0);
        assert_eq!(population_std(&[4.0]), 0.0);
    }

    #[test]
    fn top_k_selects_by_reward_then_seed() {
        let rows = vec![row(0, 3.0, &[0.1]), row(1, 1.0, &[0.2]), row(2, 2.0, &[0.3])];
        let got = top_k(&rows, 2).unwrap();
        assert_eq!(got.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![0, 2]);

        let all = top_k(&rows, 3).unwrap();
        assert_eq!(all.len(), 3);
        assert_eq!(all.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![0, 2, 1]);

        // tie at the cutoff goes to the lower seed
        let rows = vec![row(5, 1.0, &[0.0]), row(2, 1.0, &[0.0]), row(9, 4.0, &[0.0])];
        let got = top_k(&rows, 2).unwrap();
        assert_eq!(got.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![9, 2]);

        assert!(matches!(top_k(&rows, 4), Err(Error::InsufficientRuns { need: 4, have: 3 })));
        assert!(top_k(&rows, 0).is_err());
    }

    #[test]
    fn sum_stats_on_single_record_are_exact() {
        let rows = vec![row(0, 1.0, &[0.2, 0.3])];
        let (m, s) = sum_group_stats(&rows, &[0, 1], SumMode::Direct).unwrap();
        assert_eq!((m, s), (0.5, 0.0));
        let (m, s) = sum_group_stats(&rows, &[0, 1], SumMode::Propagated).unwrap();
        assert_eq!((m, s), (0.5, 0.0));
    }

    #[test]
    fn anticorrelated_pair_separates_the_two_modes() {
        // v0 + v1 = 0.6 in every record while each coefficient wanders
        let rows = vec![
            row(0, 1.0, &[0.1, 0.5]),
            row(1, 1.0, &[0.3, 0.3]),
            row(2, 1.0, &[0.5, 0.1]),
            row(3, 1.0, &[0.2, 0.4]),
        ];
        let (dm, ds) = sum_group_stats(&rows, &[0, 1], SumMode::Direct).unwrap();
        assert!((dm - 0.6).abs() < 1e-15);
        assert!(ds < 1e-15);
        let (pm, ps) = sum_group_stats(&rows, &[0, 1], SumMode::Propagated).unwrap();
        assert!((pm - 0.6).abs() < 1e-15);
        assert!(ps > 0.1);
    }

    #[test]
    fn random_fixture_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let rows: Vec<RunSummary> = (0..50)
            .map(|i| {
                let values: Vec<f64> = (0..4).map(|_| rng.gen::<f64>()).collect();
                row(i, rng.gen(), &values)
            })
            .collect();
        let idx = [1, 3];
        let (dm, ds) = sum_group_stats(&rows, &idx, SumMode::Direct).unwrap();
        let (pm, ps) = sum_group_stats(&rows, &idx, SumMode::Propagated).unwrap();

        // brute force with explicit loops
        let n = rows.len() as f64;
        let sums: Vec<f64> = rows.iter().map(|r| r.values[1] + r.values[3]).collect();
        let bm = sums.iter().sum::<f64>() / n;
        let bv = sums.iter().map(|s| (s - bm) * (s - bm)).sum::<f64>() / n;
        assert!((dm - bm).abs() < 1e-14);
        assert!((ds - bv.sqrt()).abs() < 1e-14);

        let mut pmean = 0.0;
        let mut pvar = 0.0;
        for &i in &idx {
            let cm = rows.iter().map(|r| r.values[i]).sum::<f64>() / n;
            pmean += cm;
            pvar += rows.iter().map(|r| (r.values[i] - cm) * (r.values[i] - cm)).sum::<f64>() / n;
        }
        assert!((pm - pmean).abs() < 1e-14);
        assert!((ps - pvar.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn independent_columns_agree_in_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rows: Vec<RunSummary> = (0..10_000)
            .map(|i| {
                let values: Vec<f64> =
                    (0..2).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                row(i, 0.0, &values)
            })
            .collect();
        let (_, ds) = sum_group_stats(&rows, &[0, 1], SumMode::Direct).unwrap();
        let (_, ps) = sum_group_stats(&rows, &[0, 1], SumMode::Propagated).unwrap();
        assert!((ds / ps - 1.0).abs() < 0.05, "direct {ds} vs propagated {ps}");
    }

    #[test]
    fn index_validation() {
        let rows = vec![row(0, 1.0, &[0.1, 0.2])];
        assert!(sum_group_stats(&rows, &[], SumMode::Direct).is_err());
        assert!(sum_group_stats(&rows, &[2], SumMode::Direct).is_err());
        assert!(sum_group_stats(&rows, &[0, 0], SumMode::Direct).is_err());
        assert!(sum_group_stats(&[], &[0], SumMode::Direct).is_err());
    }

    #[test]
    fn aggregate_selects_then_reports() {
        let rows = vec![
            row(0, 5.0, &[0.10, 0.20]),
            row(1, 4.0, &[0.12, 0.18]),
            row(2, 0.1, &[0.90, 0.90]), // excluded by top-k
        ];
        let names = vec!["a".to_string(), "b".to_string()];
        let groups = vec![("ab".to_string(), vec![0, 1])];
        let st = aggregate(&rows, 2, &names, &groups).unwrap();
        assert_eq!(st.k, 2);
        assert!((st.mean[0] - 0.11).abs() < 1e-15);
        assert!((st.mean[1] - 0.19).abs() < 1e-15);
        assert!((st.std[0] - 0.01).abs() < 1e-15);
        let g = &st.sum_groups[0];
        assert!((g.direct_mean - 0.30).abs() < 1e-15);
        // the fixture is perfectly anticorrelated
        assert!(g.direct_std < 1e-15);
        assert!(g.propagated_std > 0.01);

        let text = summary_text(&st);
        assert!(text.contains("best 2 runs"));
        assert!(text.contains("ab"));
    }

    #[test]
    fn results_csv_round_trips_and_skips_summary() {
        let rows = vec![row(3, 12.5, &[0.1, 0.9]), row(1, 2.25, &[0.4, 0.6])];
        let names = vec!["x".to_string(), "y".to_string()];
        let st = aggregate(&rows, 2, &names, &[("xy".to_string(), vec![0, 1])]).unwrap();
        let mut text = results_csv_string(&names, &rows);
        text.push_str(&summary_block_string(&st));

        let (names2, rows2) = results_from_csv_str(&text, "mem").unwrap();
        assert_eq!(names2, names);
        assert_eq!(rows2, rows);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.csv");
        write_results_csv(&path, &names, &rows, Some(&st)).unwrap();
        let (names3, rows3) = read_results_csv(&path).unwrap();
        assert_eq!(names3, names);
        assert_eq!(rows3, rows);
    }

    #[test]
    fn results_csv_rejects_malformed_input() {
        assert!(matches!(
            results_from_csv_str("format,results,2\n", "m"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(results_from_csv_str("", "m").is_err());
        assert!(results_from_csv_str("format,results,1\nparam,a\n", "m").is_ok());
        assert!(matches!(
            results_from_csv_str("format,results,1\nrun,0,1.0,5,0.1\n", "m"),
            Err(Error::Parse { line: 2, .. })
        ));
        let text = "format,results,1\nparam,a\nrun,0,1.0,notasteps,0.1\n";
        assert!(matches!(results_from_csv_str(text, "m"), Err(Error::Parse { line: 3, .. })));
        let text = "format,results,1\nparam,a\nrun,0,1.0,5,0.1,0.2\n";
        assert!(matches!(results_from_csv_str(text, "m"), Err(Error::Parse { line: 3, .. })));
    }
}
