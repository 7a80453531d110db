//! The refinement loop: repeated agent runs inside a search window that is
//! recentered on the best state found so far and shrunk geometrically.
//!
//! Structure per run, fully deterministic under the run seed:
//!
//! ```text
//! for stage in 0..max_window_exp:        window-reduction loop
//!     for _ in 0..pc_max:                fresh agent each iteration
//!         reset state to window centers
//!         step until faff_max consecutive steps bring no new best reward
//!     window := recenter_and_shrink(window, best, window_rate)
//! ```
//!
//! A strict best-reward improvement resets the patience counter and rewinds
//! the environment's channel cycle while keeping the improved state. The
//! counters (steps per inner loop, reinits per stage, one shrink per stage)
//! are recorded in a [`SearchTrace`] so tests can assert the mechanics
//! exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::environment::{CftState, SearchEnvironment, SearchWindow, WindowParam};
use crate::error::{Error, Result};
use crate::sac::{SacAgent, SacHyperParams, Transition};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSchedule {
    /// Steps without a new best reward before the agent is reinitialized.
    pub faff_max: usize,
    /// Agent (re)initializations per window stage.
    pub pc_max: usize,
    /// Number of window reductions over the whole run.
    pub max_window_exp: usize,
    /// Half-width factor applied at each reduction.
    pub window_rate: f64,
}

impl Default for SearchSchedule {
    fn default() -> Self {
        Self { faff_max: 10_000, pc_max: 10, max_window_exp: 25, window_rate: 0.7 }
    }
}

impl SearchSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.faff_max == 0 || self.pc_max == 0 || self.max_window_exp == 0 {
            return Err(Error::InvalidParameter(
                "faff_max, pc_max and max_window_exp must be positive".into(),
            ));
        }
        if !(self.window_rate > 0.0 && self.window_rate < 1.0) {
            return Err(Error::InvalidParameter("window_rate must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Counters and window geometry for one window stage, as executed.
#[derive(Debug, Clone, PartialEq)]
pub struct StageTrace {
    /// Window half-widths while this stage was searched.
    pub half_widths: Vec<f64>,
    pub centers: Vec<f64>,
    /// Environment steps taken by each of the stage's `pc_max` agents.
    pub inner_steps: Vec<usize>,
    pub best_reward_at_end: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SearchTrace {
    pub stages: Vec<StageTrace>,
    /// Half-widths after the final reduction (never searched).
    pub final_half_widths: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub seed: u64,
    pub best_reward: f64,
    pub best_state: CftState,
    /// Best free parameters in layout order, the values statistics run on.
    pub best_free_values: Vec<f64>,
    /// (total step count, best reward) at each strict improvement;
    /// nondecreasing in the second component.
    pub reward_history: Vec<(usize, f64)>,
    pub total_steps: usize,
    pub trace: SearchTrace,
}

/// Shrink every parameter's half-width by `rate` and recenter it on the
/// best value, then intersect with the global bounds. Widths stay exactly
/// `previous * rate` whenever the recentered interval fits inside the
/// bounds; otherwise the clipped interval's midpoint and half-span are
/// stored. A best value outside its bounds (which the environments never
/// produce) is handled by sliding the window just inside.
pub fn recenter_and_shrink(
    window: &SearchWindow,
    best: &[f64],
    rate: f64,
    bounds: &[(f64, f64)],
) -> SearchWindow {
    assert_eq!(window.params.len(), best.len());
    assert_eq!(window.params.len(), bounds.len());
    let params = window
        .params
        .iter()
        .zip(best)
        .zip(bounds)
        .map(|((p, &c), &(lo_b, hi_b))| {
            let hw = p.half_width * rate;
            let (lo, hi) = (c - hw, c + hw);
            if lo >= lo_b && hi <= hi_b {
                return WindowParam { center: c, half_width: hw };
            }
            let (lo, hi) = if hi < lo_b {
                (lo_b, (lo_b + 2.0 * hw).min(hi_b))
            } else if lo > hi_b {
                ((hi_b - 2.0 * hw).max(lo_b), hi_b)
            } else {
                (lo.max(lo_b), hi.min(hi_b))
            };
            WindowParam { center: 0.5 * (lo + hi), half_width: 0.5 * (hi - lo) }
        })
        .collect();
    SearchWindow { params }
}

/// Drive one full search over `env`. `initial` defaults to the full
/// parameter bounds. Each agent reinitialization draws a fresh network
/// seed from a master stream seeded by `seed`, so records are reproducible
/// bit for bit.
pub fn run_search<E: SearchEnvironment>(
    env: &mut E,
    hp: &SacHyperParams,
    sched: &SearchSchedule,
    seed: u64,
    initial: Option<&SearchWindow>,
) -> Result<RunRecord> {
    sched.validate()?;
    hp.validate()?;
    let bounds = env.param_bounds();
    if env.obs_dim() == 0 || bounds.is_empty() {
        return Err(Error::Config("no free parameters to search".into()));
    }
    let mut window = match initial {
        Some(w) => {
            if w.params.len() != bounds.len() {
                return Err(Error::InvalidParameter(format!(
                    "initial window has {} parameters, expected {}",
                    w.params.len(),
                    bounds.len()
                )));
            }
            w.clone()
        }
        None => SearchWindow::full_range(&bounds),
    };

    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut best_reward = f64::NEG_INFINITY;
    let mut best_state = env.snapshot();
    let mut best_values = env.free_values();
    let mut history = Vec::new();
    let mut total_steps = 0usize;
    let mut trace = SearchTrace::default();

    for _stage in 0..sched.max_window_exp {
        let mut inner_steps = Vec::with_capacity(sched.pc_max);
        for _pc in 0..sched.pc_max {
            let agent_hp = SacHyperParams { seed: master.gen(), ..*hp };
            let mut agent = SacAgent::new(env.obs_dim(), env.act_dim(), agent_hp)?;
            env.reset_to(&window)?;
            let mut patience = 0usize;
            let mut steps_here = 0usize;
            while patience < sched.faff_max {
                let obs = env.observe(&window);
                let (action, _) = agent.sample_action(&obs, false);
                let r = env.step(&action, &window)?;
                let next_obs = env.observe(&window);
                agent.record(Transition { obs, action, reward: r, next_obs, done: false });
                if agent.ready_to_update() {
                    agent.update_step()?;
                }
                total_steps += 1;
                steps_here += 1;
                if r > best_reward {
                    best_reward = r;
                    best_state = env.snapshot();
                    best_values = env.free_values();
                    history.push((total_steps, r));
                    patience = 0;
                    env.restart_episode();
                } else {
                    patience += 1;
                }
            }
            inner_steps.push(steps_here);
        }
        trace.stages.push(StageTrace {
            half_widths: window.half_widths(),
            centers: window.centers(),
            inner_steps,
            best_reward_at_end: best_reward,
        });
        window = recenter_and_shrink(&window, &best_values, sched.window_rate, &bounds);
    }
    trace.final_half_widths = window.half_widths();

    Ok(RunRecord {
        seed,
        best_reward,
        best_state,
        best_free_values: best_values,
        reward_history: history,
        total_steps,
        trace,
    })
}
