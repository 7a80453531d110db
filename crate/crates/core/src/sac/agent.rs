//! Soft actor-critic with a squashed-Gaussian policy and twin critics.
//!
//! The temperature is fixed at 1 and exploration strength is set through
//! `reward_scale` instead: rewards are multiplied by it inside the critic
//! targets, which is equivalent to an entropy coefficient of
//! 1/reward_scale. Everything is seeded and single-threaded; two agents
//! built with the same seed and fed the same transitions stay bitwise
//! identical.
//!
//! The exact loss/gradient routines used by `update_step` are public, so
//! tests can finite-difference them directly rather than checking a
//! reimplementation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::adam::Adam;
use super::mlp::{Mlp, MlpCache};
use super::replay::{ReplayBuffer, Transition};
use crate::error::{Error, Result};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// Keeps log(1 - tanh^2) finite when the squash saturates.
const SQUASH_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SacHyperParams {
    pub hidden: (usize, usize),
    pub learning_rate: f64,
    pub gamma: f64,
    pub tau: f64,
    pub reward_scale: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub seed: u64,
}

impl Default for SacHyperParams {
    fn default() -> Self {
        Self {
            hidden: (256, 256),
            learning_rate: 0.005,
            gamma: 0.99,
            tau: 0.0005,
            reward_scale: 10.0,
            batch_size: 256,
            buffer_capacity: 100_000,
            seed: 0,
        }
    }
}

impl SacHyperParams {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.0 == 0 || self.hidden.1 == 0 {
            return Err(Error::InvalidParameter("hidden layer sizes must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidParameter("learning rate must be positive".into()));
        }
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidParameter("gamma must lie in [0, 1)".into()));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::InvalidParameter("tau must lie in (0, 1]".into()));
        }
        if !(self.reward_scale > 0.0) {
            return Err(Error::InvalidParameter("reward scale must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch size must be positive".into()));
        }
        if self.buffer_capacity < self.batch_size {
            return Err(Error::InvalidParameter(
                "buffer capacity must be at least the batch size".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SacDiagnostics {
    pub q1_loss: f64,
    pub q2_loss: f64,
    pub actor_loss: f64,
}

/// Everything about one reparameterized policy draw that the losses and
/// their gradients need.
struct PolicyDraw {
    action: Vec<f64>,
    log_prob: f64,
    sigma: Vec<f64>,
    ls_raw: Vec<f64>,
}

fn draw_from_head(out: &[f64], zetas: &[f64], act_dim: usize) -> PolicyDraw {
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    let mut action = Vec::with_capacity(act_dim);
    let mut sigma = Vec::with_capacity(act_dim);
    let mut ls_raw = Vec::with_capacity(act_dim);
    let mut log_prob = 0.0;
    for i in 0..act_dim {
        let mean = out[i];
        let raw = out[act_dim + i];
        let ls = raw.clamp(LOG_STD_MIN, LOG_STD_MAX);
        let s = ls.exp();
        let u = mean + s * zetas[i];
        let a = u.tanh();
        log_prob += -ls - 0.5 * zetas[i] * zetas[i] - 0.5 * ln_2pi - (1.0 - a * a + SQUASH_EPS).ln();
        action.push(a);
        sigma.push(s);
        ls_raw.push(raw);
    }
    PolicyDraw { action, log_prob, sigma, ls_raw }
}

pub struct SacAgent {
    hp: SacHyperParams,
    obs_dim: usize,
    act_dim: usize,
    policy: Mlp,
    q1: Mlp,
    q2: Mlp,
    q1_target: Mlp,
    q2_target: Mlp,
    opt_policy: Adam,
    opt_q1: Adam,
    opt_q2: Adam,
    buffer: ReplayBuffer,
    rng: ChaCha8Rng,
}

impl SacAgent {
    pub fn new(obs_dim: usize, act_dim: usize, hp: SacHyperParams) -> Result<SacAgent> {
        hp.validate()?;
        if obs_dim == 0 || act_dim == 0 {
            return Err(Error::InvalidParameter("observation and action dims must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
        let (h1, h2) = hp.hidden;
        let policy = Mlp::new(&[obs_dim, h1, h2, 2 * act_dim], &mut rng, true);
        let q1 = Mlp::new(&[obs_dim + act_dim, h1, h2, 1], &mut rng, false);
        let q2 = Mlp::new(&[obs_dim + act_dim, h1, h2, 1], &mut rng, false);
        let q1_target = q1.clone();
        let q2_target = q2.clone();
        let opt_policy = Adam::new(policy.param_count(), hp.learning_rate);
        let opt_q1 = Adam::new(q1.param_count(), hp.learning_rate);
        let opt_q2 = Adam::new(q2.param_count(), hp.learning_rate);
        let buffer = ReplayBuffer::new(hp.buffer_capacity);
        Ok(SacAgent {
            hp,
            obs_dim,
            act_dim,
            policy,
            q1,
            q2,
            q1_target,
            q2_target,
            opt_policy,
            opt_q1,
            opt_q2,
            buffer,
            rng,
        })
    }

    /// Fresh networks, optimizers, replay buffer and rng under a new seed;
    /// dimensions and hyperparameters are kept.
    pub fn reinitialize(&mut self, seed: u64) {
        let hp = SacHyperParams { seed, ..self.hp };
        *self = SacAgent::new(self.obs_dim, self.act_dim, hp).expect("dims already validated");
    }

    pub fn hyper_params(&self) -> &SacHyperParams {
        &self.hp
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn act_dim(&self) -> usize {
        self.act_dim
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    pub fn ready_to_update(&self) -> bool {
        self.buffer.len() >= self.hp.batch_size
    }

    pub fn record(&mut self, t: Transition) {
        assert_eq!(t.obs.len(), self.obs_dim);
        assert_eq!(t.action.len(), self.act_dim);
        assert_eq!(t.next_obs.len(), self.obs_dim);
        self.buffer.push(t);
    }

    /// Mean and clamped log-std of the policy at an observation.
    pub fn policy_head(&self, obs: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut cache = MlpCache::default();
        self.policy.forward(obs, &mut cache);
        let out = cache.output();
        let mean = out[..self.act_dim].to_vec();
        let ls = out[self.act_dim..]
            .iter()
            .map(|r| r.clamp(LOG_STD_MIN, LOG_STD_MAX))
            .collect();
        (mean, ls)
    }

    /// Sample an action (tanh of a Gaussian draw) and its log-probability.
    /// `deterministic` takes the distribution mean instead of sampling.
    pub fn sample_action(&mut self, obs: &[f64], deterministic: bool) -> (Vec<f64>, f64) {
        let mut cache = MlpCache::default();
        self.policy.forward(obs, &mut cache);
        let zetas: Vec<f64> = (0..self.act_dim)
            .map(|_| if deterministic { 0.0 } else { self.rng.sample(StandardNormal) })
            .collect();
        let draw = draw_from_head(cache.output(), &zetas, self.act_dim);
        (draw.action, draw.log_prob)
    }

    /// Critic regression targets
    /// y = scale * r + gamma (1 - done)(min_i Qtarget_i(s', a') - log pi(a'|s'))
    /// with a' drawn from the current policy using the supplied noise.
    pub fn targets_for(&self, batch: &[Transition], next_zetas: &[Vec<f64>]) -> Vec<f64> {
        assert_eq!(batch.len(), next_zetas.len());
        let mut cache = MlpCache::default();
        let mut out = Vec::with_capacity(batch.len());
        for (tr, z) in batch.iter().zip(next_zetas) {
            self.policy.forward(&tr.next_obs, &mut cache);
            let draw = draw_from_head(cache.output(), z, self.act_dim);
            let mut qin = tr.next_obs.clone();
            qin.extend_from_slice(&draw.action);
            self.q1_target.forward(&qin, &mut cache);
            let q1 = cache.output()[0];
            self.q2_target.forward(&qin, &mut cache);
            let q2 = cache.output()[0];
            let cont = if tr.done { 0.0 } else { 1.0 };
            out.push(
                self.hp.reward_scale * tr.reward
                    + self.hp.gamma * cont * (q1.min(q2) - draw.log_prob),
            );
        }
        out
    }

    /// Mean squared Bellman error of critic `which` (0 or 1) against fixed
    /// targets, and its parameter gradient.
    pub fn critic_loss_and_grads(
        &self,
        batch: &[Transition],
        targets: &[f64],
        which: usize,
    ) -> (f64, Vec<f64>) {
        let net = if which == 0 { &self.q1 } else { &self.q2 };
        let scale = 1.0 / batch.len() as f64;
        let mut grads = vec![0.0; net.param_count()];
        let mut cache = MlpCache::default();
        let mut loss = 0.0;
        for (tr, &y) in batch.iter().zip(targets) {
            let mut qin = tr.obs.clone();
            qin.extend_from_slice(&tr.action);
            net.forward(&qin, &mut cache);
            let q = cache.output()[0];
            loss += (q - y) * (q - y) * scale;
            net.backward(&cache, &[2.0 * (q - y) * scale], Some(&mut grads), None);
        }
        (loss, grads)
    }

    pub fn critic_loss(&self, batch: &[Transition], targets: &[f64], which: usize) -> f64 {
        let net = if which == 0 { &self.q1 } else { &self.q2 };
        let mut cache = MlpCache::default();
        let mut loss = 0.0;
        for (tr, &y) in batch.iter().zip(targets) {
            let mut qin = tr.obs.clone();
            qin.extend_from_slice(&tr.action);
            net.forward(&qin, &mut cache);
            let q = cache.output()[0];
            loss += (q - y) * (q - y) / batch.len() as f64;
        }
        loss
    }

    /// Actor loss mean(log pi(a|s) - min_i Q_i(s, a)) under reparameterized
    /// draws with the supplied noise, and its gradient with respect to the
    /// policy parameters. The gradient flows through the squash into the
    /// minimum critic's action input; critic parameters are not touched.
    pub fn actor_loss_and_grads(&self, obs_batch: &[Vec<f64>], zetas: &[Vec<f64>]) -> (f64, Vec<f64>) {
        self.actor_core(obs_batch, zetas, true)
    }

    pub fn actor_loss(&self, obs_batch: &[Vec<f64>], zetas: &[Vec<f64>]) -> f64 {
        self.actor_core(obs_batch, zetas, false).0
    }

    fn actor_core(
        &self,
        obs_batch: &[Vec<f64>],
        zetas: &[Vec<f64>],
        with_grads: bool,
    ) -> (f64, Vec<f64>) {
        assert_eq!(obs_batch.len(), zetas.len());
        let scale = 1.0 / obs_batch.len() as f64;
        let mut grads = vec![0.0; if with_grads { self.policy.param_count() } else { 0 }];
        let mut pi_cache = MlpCache::default();
        let mut q_cache1 = MlpCache::default();
        let mut q_cache2 = MlpCache::default();
        let mut dq_input = Vec::new();
        let mut loss = 0.0;
        for (obs, z) in obs_batch.iter().zip(zetas) {
            self.policy.forward(obs, &mut pi_cache);
            let draw = draw_from_head(pi_cache.output(), z, self.act_dim);
            let mut qin = obs.clone();
            qin.extend_from_slice(&draw.action);
            self.q1.forward(&qin, &mut q_cache1);
            self.q2.forward(&qin, &mut q_cache2);
            let (v1, v2) = (q_cache1.output()[0], q_cache2.output()[0]);
            let q_min = v1.min(v2);
            loss += (draw.log_prob - q_min) * scale;
            if !with_grads {
                continue;
            }
            let (net, cache) = if v1 <= v2 { (&self.q1, &q_cache1) } else { (&self.q2, &q_cache2) };
            net.backward(cache, &[1.0], None, Some(&mut dq_input));
            let dq_da = &dq_input[self.obs_dim..];
            let mut grad_out = vec![0.0; 2 * self.act_dim];
            for i in 0..self.act_dim {
                let a = draw.action[i];
                let jac = 1.0 - a * a;
                // d log pi / du through the squash correction, minus the
                // critic pulled back through a = tanh(u)
                let dldu = 2.0 * a * jac / (jac + SQUASH_EPS) - dq_da[i] * jac;
                grad_out[i] = dldu * scale;
                let clamped = draw.ls_raw[i] < LOG_STD_MIN || draw.ls_raw[i] > LOG_STD_MAX;
                grad_out[self.act_dim + i] =
                    if clamped { 0.0 } else { (dldu * draw.sigma[i] * z[i] - 1.0) * scale };
            }
            self.policy.backward(&pi_cache, &grad_out, Some(&mut grads), None);
        }
        (loss, grads)
    }

    fn draw_noise(&mut self, n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..self.act_dim).map(|_| self.rng.sample(StandardNormal)).collect())
            .collect()
    }

    /// One gradient update of both critics and the actor from a uniformly
    /// sampled replay batch, followed by the soft target update.
    pub fn update_step(&mut self) -> Result<SacDiagnostics> {
        if self.buffer.len() < self.hp.batch_size {
            return Err(Error::NotEnoughData { have: self.buffer.len(), need: self.hp.batch_size });
        }
        let idx = self.buffer.sample_indices(&mut self.rng, self.hp.batch_size);
        let batch: Vec<Transition> = idx.iter().map(|&i| self.buffer.get(i).clone()).collect();

        let next_zetas = self.draw_noise(batch.len());
        let targets = self.targets_for(&batch, &next_zetas);
        let (q1_loss, g1) = self.critic_loss_and_grads(&batch, &targets, 0);
        self.opt_q1.step(self.q1.params_mut(), &g1);
        let (q2_loss, g2) = self.critic_loss_and_grads(&batch, &targets, 1);
        self.opt_q2.step(self.q2.params_mut(), &g2);

        let zetas = self.draw_noise(batch.len());
        let obs_batch: Vec<Vec<f64>> = batch.iter().map(|t| t.obs.clone()).collect();
        let (actor_loss, gp) = self.actor_loss_and_grads(&obs_batch, &zetas);
        self.opt_policy.step(self.policy.params_mut(), &gp);

        self.q1_target.soft_update_from(&self.q1, self.hp.tau);
        self.q2_target.soft_update_from(&self.q2, self.hp.tau);
        Ok(SacDiagnostics { q1_loss, q2_loss, actor_loss })
    }

    pub fn policy_params(&self) -> &[f64] {
        self.policy.params()
    }

    pub fn set_policy_params(&mut self, p: &[f64]) {
        self.policy.set_params(p);
    }

    pub fn critic_params(&self, which: usize) -> &[f64] {
        if which == 0 { self.q1.params() } else { self.q2.params() }
    }

    pub fn set_critic_params(&mut self, which: usize, p: &[f64]) {
        if which == 0 { self.q1.set_params(p) } else { self.q2.set_params(p) }
    }

    /// Write all five networks to a line-tagged CSV.
    pub fn save_checkpoint(&self, path: &std::path::Path) -> Result<()> {
        use std::fmt::Write as _;
        let mut s = String::new();
        writeln!(s, "format,sac-checkpoint,1").unwrap();
        writeln!(s, "dims,{},{}", self.obs_dim, self.act_dim).unwrap();
        writeln!(s, "hidden,{},{}", self.hp.hidden.0, self.hp.hidden.1).unwrap();
        let nets: [(&str, &Mlp); 5] = [
            ("policy", &self.policy),
            ("q1", &self.q1),
            ("q2", &self.q2),
            ("q1_target", &self.q1_target),
            ("q2_target", &self.q2_target),
        ];
        for (name, net) in nets {
            write!(s, "net,{name},{}", net.param_count()).unwrap();
            for p in net.params() {
                write!(s, ",{p:.16e}").unwrap();
            }
            writeln!(s).unwrap();
        }
        std::fs::write(path, s).map_err(|e| Error::io(path.display().to_string(), e))
    }

    /// Load a checkpoint previously written by [`save_checkpoint`] into
    /// this agent. Topology must match.
    pub fn load_checkpoint(&mut self, path: &std::path::Path) -> Result<()> {
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(origin.clone(), e))?;
        let mut nets_seen = 0;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            match (i, cols[0]) {
                (0, "format") => {
                    if cols != ["format", "sac-checkpoint", "1"] {
                        return Err(Error::parse(&origin, 1, "unsupported checkpoint format"));
                    }
                }
                (1, "dims") => {
                    let want = [self.obs_dim.to_string(), self.act_dim.to_string()];
                    if cols.len() != 3 || cols[1] != want[0] || cols[2] != want[1] {
                        return Err(Error::parse(
                            &origin,
                            2,
                            format!("dims mismatch: agent is {},{}", self.obs_dim, self.act_dim),
                        ));
                    }
                }
                (2, "hidden") => {
                    let want = [self.hp.hidden.0.to_string(), self.hp.hidden.1.to_string()];
                    if cols.len() != 3 || cols[1] != want[0] || cols[2] != want[1] {
                        return Err(Error::parse(
                            &origin,
                            3,
                            format!("hidden mismatch: agent is {:?}", self.hp.hidden),
                        ));
                    }
                }
                (_, "net") => {
                    if cols.len() < 3 {
                        return Err(Error::parse(&origin, i + 1, "short net row"));
                    }
                    let net = match cols[1] {
                        "policy" => &mut self.policy,
                        "q1" => &mut self.q1,
                        "q2" => &mut self.q2,
                        "q1_target" => &mut self.q1_target,
                        "q2_target" => &mut self.q2_target,
                        other => {
                            return Err(Error::parse(&origin, i + 1, format!("unknown net '{other}'")))
                        }
                    };
                    let count: usize = cols[2]
                        .parse()
                        .map_err(|_| Error::parse(&origin, i + 1, "bad parameter count"))?;
                    if count != net.param_count() || cols.len() != 3 + count {
                        return Err(Error::parse(
                            &origin,
                            i + 1,
                            format!("expected {} parameters for {}", net.param_count(), cols[1]),
                        ));
                    }
                    let vals: Result<Vec<f64>> = cols[3..]
                        .iter()
                        .map(|s| {
                            s.parse::<f64>()
                                .map_err(|_| Error::parse(&origin, i + 1, format!("bad float '{s}'")))
                        })
                        .collect();
                    net.set_params(&vals?);
                    nets_seen += 1;
                }
                _ => return Err(Error::parse(&origin, i + 1, format!("unexpected row '{}'", cols[0]))),
            }
        }
        if nets_seen != 5 {
            return Err(Error::parse(&origin, 0, format!("expected 5 nets, found {nets_seen}")));
        }
        Ok(())
    }
}
