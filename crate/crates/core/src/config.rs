//! Experiment configuration (TOML) and the scaling-dimension input table.
//!
//! The config file is a flat-sectioned TOML document; every section except
//! `[model]` has complete defaults. Serialization is deterministic
//! (struct-ordered, no maps), so serialize -> parse -> serialize is
//! byte-identical.
//!
//! Relative paths inside a config are resolved against the directory of
//! the config file when loaded via [`ExperimentConfig::from_path`].

use std::path::Path;

use crate::environment::{RewardConfig, OPE_SQ_MAX};
use crate::error::{Error, Result};
use crate::model::DELTA_POLE_GUARD;
use crate::points::PointSetSpec;
use crate::sac::SacHyperParams;
use crate::search::SearchSchedule;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// Coupling constant.
    pub g: f64,
    /// Inline spectrum; exactly one of `deltas` / `delta_table` must be set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    /// CSV with header g,d1..dN; the row for `g` is matched exactly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_table: Option<String>,
    /// Curvature CSV used by the constraint right-hand sides. Required for
    /// non-synthetic runs with constraints enabled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curvature_table: Option<String>,
}

/// Sample points: either a CSV of `re,im` rows or generator settings.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PointsSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    pub count: usize,
    pub seed: u64,
    pub margin: f64,
    pub complex: bool,
}

impl Default for PointsSection {
    fn default() -> Self {
        let spec = PointSetSpec::default();
        Self {
            path: None,
            count: spec.count,
            seed: spec.seed,
            margin: spec.margin,
            complex: spec.complex,
        }
    }
}

impl PointsSection {
    pub fn generator_spec(&self) -> PointSetSpec {
        PointSetSpec {
            count: self.count,
            seed: self.seed,
            margin: self.margin,
            complex: self.complex,
        }
    }
}

/// Pins channel `channel` (1-based) to a known coefficient value.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedValue {
    pub channel: usize,
    pub value: f64,
}

/// Planted-solution mode: the table's inhomogeneous parts are replaced so
/// that `planted` is the exact global optimum.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSection {
    pub planted: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SumGroupSpec {
    pub name: String,
    /// 1-based channel indices whose coefficients are summed.
    pub channels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub run_count: usize,
    pub top_k: usize,
    pub base_seed: u64,
    pub output_dir: String,
    /// Worker threads for the run loop; 0 lets the pool decide.
    pub parallelism: usize,
    /// Write per-run reward-history JSON lines next to the results.
    pub write_traces: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub sum_groups: Vec<SumGroupSpec>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            run_count: 16,
            top_k: 4,
            base_seed: 0,
            output_dir: "out".into(),
            parallelism: 0,
            write_traces: false,
            sum_groups: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub points: PointsSection,
    #[serde(default)]
    pub reward: RewardConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fixed: Vec<FixedValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSection>,
    #[serde(default)]
    pub sac: SacHyperParams,
    #[serde(default)]
    pub schedule: SearchSchedule,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<ExperimentConfig> {
        toml::from_str(text)
            .map_err(|e| Error::Config(format!("{origin}: {}", e.message())))
    }

    pub fn from_path(path: &Path) -> Result<ExperimentConfig> {
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(origin.clone(), e))?;
        let mut cfg = Self::from_toml_str(&text, &origin)?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string())
            .map_err(|e| Error::io(path.display().to_string(), e))
    }

    /// Interpret relative file references against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<String>| {
            if let Some(s) = p {
                if !Path::new(s).is_absolute() {
                    *s = base.join(&*s).display().to_string();
                }
            }
        };
        fix(&mut self.model.delta_table);
        fix(&mut self.model.curvature_table);
        fix(&mut self.points.path);
        if !Path::new(&self.experiment.output_dir).is_absolute() {
            self.experiment.output_dir =
                base.join(&self.experiment.output_dir).display().to_string();
        }
    }

    /// The spectrum this config asks for: inline values, or the matching
    /// delta-table row.
    pub fn resolve_deltas(&self) -> Result<Vec<f64>> {
        match (&self.model.deltas, &self.model.delta_table) {
            (Some(d), None) => Ok(d.clone()),
            (None, Some(path)) => {
                let table = DeltaTable::from_path(Path::new(path))?;
                Ok(table.deltas_for(self.model.g)?.to_vec())
            }
            (Some(_), Some(_)) => Err(Error::Config(
                "set either model.deltas or model.delta_table, not both".into(),
            )),
            (None, None) => {
                Err(Error::Config("one of model.deltas or model.delta_table is required".into()))
            }
        }
    }

    /// Structural validation that needs no file access beyond the delta
    /// table. Every search-relevant section is checked here so bad configs
    /// fail before any run starts.
    pub fn validate(&self) -> Result<Vec<f64>> {
        if !(self.model.g > 0.0) || !self.model.g.is_finite() {
            return Err(Error::Config(format!("model.g = {} must be positive", self.model.g)));
        }
        let deltas = self.resolve_deltas()?;
        if deltas.is_empty() {
            return Err(Error::Config("spectrum has no channels".into()));
        }
        let n = deltas.len();
        self.points.generator_spec().validate()?;
        self.reward.validate()?;
        self.sac.validate()?;
        self.schedule.validate()?;

        for (pos, f) in self.fixed.iter().enumerate() {
            if f.channel == 0 || f.channel > n {
                return Err(Error::Config(format!(
                    "fixed channel {} outside 1..={n}",
                    f.channel
                )));
            }
            if self.fixed[..pos].iter().any(|o| o.channel == f.channel) {
                return Err(Error::Config(format!("fixed channel {} repeated", f.channel)));
            }
            if !(0.0..=OPE_SQ_MAX).contains(&f.value) {
                return Err(Error::Config(format!(
                    "fixed value {} for channel {} outside [0, {OPE_SQ_MAX}]",
                    f.value, f.channel
                )));
            }
        }
        if self.fixed.len() == n {
            return Err(Error::Config("every coefficient is fixed; nothing to search".into()));
        }

        if let Some(sy) = &self.synthetic {
            if sy.planted.len() != n {
                return Err(Error::Config(format!(
                    "synthetic.planted has {} values for {n} channels",
                    sy.planted.len()
                )));
            }
            for (i, v) in sy.planted.iter().enumerate() {
                if !(0.0..=OPE_SQ_MAX).contains(v) {
                    return Err(Error::Config(format!(
                        "synthetic.planted[{i}] = {v} outside [0, {OPE_SQ_MAX}]"
                    )));
                }
            }
        } else if self.reward.use_constraints && self.model.curvature_table.is_none() {
            return Err(Error::Config(
                "constraints are enabled but model.curvature_table is not set".into(),
            ));
        }

        let e = &self.experiment;
        if e.run_count == 0 {
            return Err(Error::Config("experiment.run_count must be positive".into()));
        }
        if e.top_k == 0 || e.top_k > e.run_count {
            return Err(Error::Config(format!(
                "experiment.top_k = {} must lie in 1..={}",
                e.top_k, e.run_count
            )));
        }
        let free: Vec<usize> =
            (1..=n).filter(|c| !self.fixed.iter().any(|f| f.channel == *c)).collect();
        for gspec in &e.sum_groups {
            if gspec.channels.is_empty() {
                return Err(Error::Config(format!("sum group '{}' is empty", gspec.name)));
            }
            for &c in &gspec.channels {
                if !free.contains(&c) {
                    return Err(Error::Config(format!(
                        "sum group '{}' references channel {c}, which is not a searched channel",
                        gspec.name
                    )));
                }
            }
        }
        Ok(deltas)
    }
}

/// Scaling dimensions as a function of the coupling, from a CSV with
/// header `g,d1,...,dN`. Lookups match rows exactly; there is no
/// interpolation in g.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaTable {
    rows: Vec<(f64, Vec<f64>)>,
    n_deltas: usize,
}

impl DeltaTable {
    pub fn from_csv_str(text: &str, origin: &str) -> Result<DeltaTable> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(origin, 1, "empty delta table"))?;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.len() < 2 || cols[0] != "g" {
            return Err(Error::parse(origin, 1, "header must be g,d1,...,dN"));
        }
        for (i, c) in cols[1..].iter().enumerate() {
            if *c != format!("d{}", i + 1) {
                return Err(Error::parse(
                    origin,
                    1,
                    format!("expected column d{}, found '{c}'", i + 1),
                ));
            }
        }
        let n_deltas = cols.len() - 1;
        let mut rows: Vec<(f64, Vec<f64>)> = Vec::new();
        for (ln, line) in lines {
            let cells: Vec<&str> = line.trim().split(',').collect();
            if cells.len() != n_deltas + 1 {
                return Err(Error::parse(
                    origin,
                    ln + 1,
                    format!("expected {} columns, found {}", n_deltas + 1, cells.len()),
                ));
            }
            let mut nums = Vec::with_capacity(cells.len());
            for c in &cells {
                let v: f64 = c.trim().parse().map_err(|_| {
                    Error::parse(origin, ln + 1, format!("bad number '{c}'"))
                })?;
                nums.push(v);
            }
            let g = nums[0];
            if let Some((prev, _)) = rows.last() {
                if g <= *prev {
                    return Err(Error::parse(
                        origin,
                        ln + 1,
                        format!("g values must be strictly increasing ({prev} then {g})"),
                    ));
                }
            }
            for (i, d) in nums[1..].iter().enumerate() {
                if !(*d > 0.0) || !d.is_finite() {
                    return Err(Error::parse(
                        origin,
                        ln + 1,
                        format!("d{} = {d} must be positive", i + 1),
                    ));
                }
                if (d - 1.0).abs() <= DELTA_POLE_GUARD {
                    return Err(Error::parse(
                        origin,
                        ln + 1,
                        format!("d{} = {d} sits on the block pole at 1", i + 1),
                    ));
                }
            }
            rows.push((g, nums[1..].to_vec()));
        }
        if rows.is_empty() {
            return Err(Error::parse(origin, 1, "delta table has no data rows"));
        }
        Ok(DeltaTable { rows, n_deltas })
    }

    pub fn from_path(path: &Path) -> Result<DeltaTable> {
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(origin.clone(), e))?;
        Self::from_csv_str(&text, &origin)
    }

    pub fn n_deltas(&self) -> usize {
        self.n_deltas
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn g_values(&self) -> Vec<f64> {
        self.rows.iter().map(|(g, _)| *g).collect()
    }

    pub fn deltas_for(&self, g: f64) -> Result<&[f64]> {
        self.rows
            .iter()
            .find(|(rg, _)| *rg == g)
            .map(|(_, d)| d.as_slice())
            .ok_or(Error::NoRowForG(g))
    }
}
