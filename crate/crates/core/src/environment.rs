//! Search-facing view of the crossing problem: parameter state, reward,
//! search windows and the environment an agent interacts with.
//!
//! The environment walks cyclically through the channels that have at
//! least one searched parameter; each step rewrites that channel's free
//! parameters from the agent's action (mapped through the current search
//! window) and returns the reward of the updated full state. There is no
//! terminal condition; episodes are cut off by the search loop's patience
//! counter.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::precompute::BlockTable;

/// Upper bound of the searched dimension range.
pub const DELTA_MAX: f64 = 10.0;
/// Lower bound of the searched dimension range, kept clear of the block's
/// pole at delta = 1.
pub const DELTA_SEARCH_MIN: f64 = 1.0 + 1e-6;
/// Upper bound for squared OPE coefficients.
pub const OPE_SQ_MAX: f64 = 1.0;

/// Agreement required between state and table spectra.
pub const DELTA_MATCH_TOL: f64 = 1e-12;

/// One candidate solution: conformal dimensions and squared OPE
/// coefficients per channel, with per-parameter fixed masks.
#[derive(Debug, Clone, PartialEq)]
pub struct CftState {
    deltas: Vec<f64>,
    ope_sq: Vec<f64>,
    delta_fixed: Vec<bool>,
    ope_fixed: Vec<bool>,
}

impl CftState {
    pub fn new(
        deltas: Vec<f64>,
        ope_sq: Vec<f64>,
        delta_fixed: Vec<bool>,
        ope_fixed: Vec<bool>,
    ) -> Result<CftState> {
        let n = deltas.len();
        if n == 0 {
            return Err(Error::InvalidParameter("state has no channels".into()));
        }
        if ope_sq.len() != n || delta_fixed.len() != n || ope_fixed.len() != n {
            return Err(Error::InvalidParameter(format!(
                "state vectors disagree in length: {} deltas, {} ope, {} / {} masks",
                n,
                ope_sq.len(),
                delta_fixed.len(),
                ope_fixed.len()
            )));
        }
        for (i, d) in deltas.iter().enumerate() {
            if !d.is_finite() || *d <= 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "delta[{i}] = {d} must be finite and > 1"
                )));
            }
        }
        for (i, c) in ope_sq.iter().enumerate() {
            if !c.is_finite() || *c < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "ope_sq[{i}] = {c} must be finite and non-negative"
                )));
            }
        }
        Ok(CftState { deltas, ope_sq, delta_fixed, ope_fixed })
    }

    /// All-fixed spectrum with searched OPE coefficients given by the mask
    /// (true = fixed). Fixed coefficients take the provided values; free
    /// ones start at zero.
    pub fn with_fixed_deltas(
        deltas: Vec<f64>,
        ope_sq: Vec<f64>,
        ope_fixed: Vec<bool>,
    ) -> Result<CftState> {
        let n = deltas.len();
        CftState::new(deltas, ope_sq, vec![true; n], ope_fixed)
    }

    pub fn n_channels(&self) -> usize {
        self.deltas.len()
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn ope_sq(&self) -> &[f64] {
        &self.ope_sq
    }

    pub fn delta_fixed(&self) -> &[bool] {
        &self.delta_fixed
    }

    pub fn ope_fixed(&self) -> &[bool] {
        &self.ope_fixed
    }
}

/// Which parameter of a channel a free slot refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Delta,
    OpeSq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FreeParam {
    pub kind: ParamKind,
    pub channel: usize,
}

/// Flat ordering of the searched parameters: channels in index order, and
/// within a channel the dimension before the coefficient.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FreeLayout {
    pub entries: Vec<FreeParam>,
    /// Channels with at least one free parameter, in index order; the
    /// environment cycles through exactly these.
    pub visited: Vec<usize>,
}

impl FreeLayout {
    pub fn of(state: &CftState) -> FreeLayout {
        let mut entries = Vec::new();
        let mut visited = Vec::new();
        for n in 0..state.n_channels() {
            let mut any = false;
            if !state.delta_fixed[n] {
                entries.push(FreeParam { kind: ParamKind::Delta, channel: n });
                any = true;
            }
            if !state.ope_fixed[n] {
                entries.push(FreeParam { kind: ParamKind::OpeSq, channel: n });
                any = true;
            }
            if any {
                visited.push(n);
            }
        }
        FreeLayout { entries, visited }
    }

    pub fn free_count(&self) -> usize {
        self.entries.len()
    }

    /// Largest number of free parameters on any single visited channel;
    /// this is the action dimension.
    pub fn max_per_channel(&self) -> usize {
        self.visited
            .iter()
            .map(|&n| self.entries.iter().filter(|e| e.channel == n).count())
            .max()
            .unwrap_or(0)
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.entries
            .iter()
            .map(|e| match e.kind {
                ParamKind::Delta => (DELTA_SEARCH_MIN, DELTA_MAX),
                ParamKind::OpeSq => (0.0, OPE_SQ_MAX),
            })
            .collect()
    }

    pub fn read(&self, state: &CftState) -> Vec<f64> {
        self.entries
            .iter()
            .map(|e| match e.kind {
                ParamKind::Delta => state.deltas[e.channel],
                ParamKind::OpeSq => state.ope_sq[e.channel],
            })
            .collect()
    }
}

/// Per-parameter search interval, stored as center and half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowParam {
    pub center: f64,
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchWindow {
    pub params: Vec<WindowParam>,
}

impl SearchWindow {
    /// Window spanning the full bounds of every parameter.
    pub fn full_range(bounds: &[(f64, f64)]) -> SearchWindow {
        SearchWindow {
            params: bounds
                .iter()
                .map(|&(lo, hi)| WindowParam {
                    center: 0.5 * (lo + hi),
                    half_width: 0.5 * (hi - lo),
                })
                .collect(),
        }
    }

    pub fn centers(&self) -> Vec<f64> {
        self.params.iter().map(|p| p.center).collect()
    }

    pub fn half_widths(&self) -> Vec<f64> {
        self.params.iter().map(|p| p.half_width).collect()
    }

    /// Affine map of a parameter value into [-1, 1] (clamped; values can
    /// sit just outside after the window shrank around a boundary).
    pub fn normalize(&self, i: usize, value: f64) -> f64 {
        let p = self.params[i];
        if p.half_width == 0.0 {
            return 0.0;
        }
        ((value - p.center) / p.half_width).clamp(-1.0, 1.0)
    }

    /// Inverse of [`normalize`] for an action component in [-1, 1].
    pub fn denormalize(&self, i: usize, action: f64) -> f64 {
        let p = self.params[i];
        p.center + action.clamp(-1.0, 1.0) * p.half_width
    }
}

/// Reward shape: additive reciprocals or the reciprocal of the weighted
/// sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardForm {
    Additive,
    Pooled,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub form: RewardForm,
    pub w1: f64,
    pub w2: f64,
    pub use_constraints: bool,
    pub reward_cap: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self { form: RewardForm::Pooled, w1: 1e4, w2: 1e5, use_constraints: true, reward_cap: 1e12 }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.w1 >= 0.0) || !(self.w2 >= 0.0) {
            return Err(Error::InvalidParameter("constraint weights must be non-negative".into()));
        }
        if !(self.reward_cap > 0.0) || !self.reward_cap.is_finite() {
            return Err(Error::InvalidParameter("reward cap must be positive and finite".into()));
        }
        Ok(())
    }
}

fn check_spectrum(state: &CftState, table: &BlockTable) -> Result<()> {
    if state.n_channels() != table.n_channels() {
        return Err(Error::InvalidParameter(format!(
            "state has {} channels, table has {}",
            state.n_channels(),
            table.n_channels()
        )));
    }
    for (n, (s, t)) in state.deltas().iter().zip(table.deltas()).enumerate() {
        if (s - t).abs() > DELTA_MATCH_TOL {
            return Err(Error::DeltaMismatch { channel: n, state: *s, table: *t });
        }
    }
    Ok(())
}

/// Residual of the truncated crossing equation at every sample point:
/// E_k = h(x_k) + sum_n c_n F_{delta_n}(x_k).
pub fn crossing_vector(state: &CftState, table: &BlockTable) -> Result<Vec<Complex64>> {
    check_spectrum(state, table)?;
    let mut out = Vec::with_capacity(table.n_points());
    for k in 0..table.n_points() {
        let mut e = table.h(k);
        for (n, &c) in state.ope_sq().iter().enumerate() {
            e += c * table.f_row(k)[n];
        }
        out.push(e);
    }
    Ok(out)
}

/// Euclidean norm of the residual vector, treating each complex entry as
/// two real components.
pub fn crossing_norm(state: &CftState, table: &BlockTable) -> Result<f64> {
    let e = crossing_vector(state, table)?;
    Ok(e.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
}

/// Values of the two integral constraints:
/// I_i = sum_n c_n Int_i[delta_n] + rhs_i.
pub fn constraint_values(state: &CftState, table: &BlockTable) -> Result<(f64, f64)> {
    check_spectrum(state, table)?;
    let (rhs1, rhs2) = table.rhs_values();
    let i1 = state
        .ope_sq()
        .iter()
        .zip(table.int1_values())
        .map(|(c, v)| c * v)
        .sum::<f64>()
        + rhs1;
    let i2 = state
        .ope_sq()
        .iter()
        .zip(table.int2_values())
        .map(|(c, v)| c * v)
        .sum::<f64>()
        + rhs2;
    Ok((i1, i2))
}

fn capped_ratio(num: f64, den: f64, cap: f64) -> f64 {
    if num == 0.0 {
        return 0.0;
    }
    let r = num / den.abs();
    if r.is_finite() && r < cap {
        r
    } else {
        cap
    }
}

/// Reward from the residual norm and constraint values. Capped, never NaN
/// and never infinite.
pub fn reward_from_parts(e_norm: f64, i1: f64, i2: f64, cfg: &RewardConfig) -> f64 {
    let cap = cfg.reward_cap;
    let r = match (cfg.form, cfg.use_constraints) {
        (RewardForm::Additive, true) => {
            capped_ratio(1.0, e_norm, cap)
                + capped_ratio(cfg.w1, i1, cap)
                + capped_ratio(cfg.w2, i2, cap)
        }
        (RewardForm::Additive, false) => capped_ratio(1.0, e_norm, cap),
        (RewardForm::Pooled, true) => {
            capped_ratio(1.0, e_norm + cfg.w1 * i1.abs() + cfg.w2 * i2.abs(), cap)
        }
        (RewardForm::Pooled, false) => capped_ratio(1.0, e_norm, cap),
    };
    r.min(cap)
}

/// Full reward of a state against a table.
pub fn reward(state: &CftState, table: &BlockTable, cfg: &RewardConfig) -> Result<f64> {
    let e_norm = crossing_norm(state, table)?;
    let (i1, i2) = if cfg.use_constraints {
        constraint_values(state, table)?
    } else {
        (0.0, 0.0)
    };
    Ok(reward_from_parts(e_norm, i1, i2, cfg))
}

/// New state with channel n's free parameters set from the raw action
/// (components in [-1, 1], mapped through the window; surplus components
/// are ignored, as the action vector is sized for the busiest channel).
pub fn apply_action(
    state: &CftState,
    channel: usize,
    raw_action: &[f64],
    window: &SearchWindow,
) -> Result<CftState> {
    let layout = FreeLayout::of(state);
    if window.params.len() != layout.free_count() {
        return Err(Error::InvalidParameter(format!(
            "window has {} parameters, layout has {}",
            window.params.len(),
            layout.free_count()
        )));
    }
    let mut out = state.clone();
    let mut used = 0;
    for (i, e) in layout.entries.iter().enumerate() {
        if e.channel != channel {
            continue;
        }
        let a = raw_action.get(used).copied().ok_or_else(|| {
            Error::InvalidParameter(format!(
                "action has {} components, channel {channel} needs more",
                raw_action.len()
            ))
        })?;
        let (lo, hi) = layout.bounds()[i];
        let v = window.denormalize(i, a).clamp(lo, hi);
        match e.kind {
            ParamKind::Delta => out.deltas[e.channel] = v,
            ParamKind::OpeSq => out.ope_sq[e.channel] = v,
        }
        used += 1;
    }
    Ok(out)
}

/// Interface the search loop drives. Implemented by [`CrossingEnv`] and by
/// test stubs exercising the schedule mechanics.
pub trait SearchEnvironment {
    fn obs_dim(&self) -> usize;
    fn act_dim(&self) -> usize;
    /// Global bounds per free parameter, in layout order.
    fn param_bounds(&self) -> Vec<(f64, f64)>;
    /// Move the state to the window centers and restart the channel cycle.
    fn reset_to(&mut self, window: &SearchWindow) -> Result<()>;
    /// Restart the channel cycle, keeping the state (used when a new best
    /// is found).
    fn restart_episode(&mut self);
    /// Current free parameters normalized through the window.
    fn observe(&self, window: &SearchWindow) -> Vec<f64>;
    /// Apply an action at the current cycle position and return the reward
    /// of the updated state.
    fn step(&mut self, action: &[f64], window: &SearchWindow) -> Result<f64>;
    /// Current free parameter values in layout order.
    fn free_values(&self) -> Vec<f64>;
    /// Current full state.
    fn snapshot(&self) -> CftState;
}

/// The crossing-equation environment over a precomputed table.
pub struct CrossingEnv<'a> {
    table: &'a BlockTable,
    cfg: RewardConfig,
    state: CftState,
    layout: FreeLayout,
    cursor: usize,
}

impl<'a> CrossingEnv<'a> {
    /// `template` supplies the spectrum, the fixed values and the masks.
    /// Free dimensions are rejected here: the table carries kernel columns
    /// for exact dimensions only, so a searched delta could never be
    /// scored against it.
    pub fn new(table: &'a BlockTable, template: CftState, cfg: RewardConfig) -> Result<CrossingEnv<'a>> {
        cfg.validate()?;
        check_spectrum(&template, table)?;
        if template.delta_fixed().iter().any(|f| !f) {
            return Err(Error::Config(
                "free conformal dimensions are not searchable against a fixed-spectrum table; \
                 fix all deltas"
                    .into(),
            ));
        }
        let layout = FreeLayout::of(&template);
        if layout.free_count() == 0 {
            return Err(Error::Config("no free parameters to search".into()));
        }
        Ok(CrossingEnv { table, cfg, state: template, layout, cursor: 0 })
    }

    pub fn layout(&self) -> &FreeLayout {
        &self.layout
    }

    pub fn reward_config(&self) -> &RewardConfig {
        &self.cfg
    }
}

impl SearchEnvironment for CrossingEnv<'_> {
    fn obs_dim(&self) -> usize {
        self.layout.free_count()
    }

    fn act_dim(&self) -> usize {
        self.layout.max_per_channel()
    }

    fn param_bounds(&self) -> Vec<(f64, f64)> {
        self.layout.bounds()
    }

    fn reset_to(&mut self, window: &SearchWindow) -> Result<()> {
        if window.params.len() != self.layout.free_count() {
            return Err(Error::InvalidParameter(format!(
                "window has {} parameters, expected {}",
                window.params.len(),
                self.layout.free_count()
            )));
        }
        for (i, e) in self.layout.entries.iter().enumerate() {
            let v = window.params[i].center;
            match e.kind {
                ParamKind::Delta => self.state.deltas[e.channel] = v,
                ParamKind::OpeSq => self.state.ope_sq[e.channel] = v,
            }
        }
        self.cursor = 0;
        Ok(())
    }

    fn restart_episode(&mut self) {
        self.cursor = 0;
    }

    fn observe(&self, window: &SearchWindow) -> Vec<f64> {
        self.layout
            .read(&self.state)
            .iter()
            .enumerate()
            .map(|(i, &v)| window.normalize(i, v))
            .collect()
    }

    fn step(&mut self, action: &[f64], window: &SearchWindow) -> Result<f64> {
        let channel = self.layout.visited[self.cursor];
        self.state = apply_action(&self.state, channel, action, window)?;
        self.cursor = (self.cursor + 1) % self.layout.visited.len();
        reward(&self.state, self.table, &self.cfg)
    }

    fn free_values(&self) -> Vec<f64> {
        self.layout.read(&self.state)
    }

    fn snapshot(&self) -> CftState {
        self.state.clone()
    }
}
