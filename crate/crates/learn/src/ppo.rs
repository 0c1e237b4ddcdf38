//! Rollout storage and the combined update
//! `L_total = ω_rl·L_rl + ω_sup·L_sup` for the actor, MSE for the critic.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::gae::{compute_gae, normalize};
use crate::loss::{clipped_surrogate_tape, gaussian_entropy_tape, gaussian_log_prob_tape, masked_mean_tape};
use crate::mat::Mat;
use crate::networks::{CriticNet, PolicyIds, PolicyNet};
use crate::nn::Module;
use crate::optim::{clip_grad_norm, Adam};
use crate::tape::{Gradients, Graph, Id};
use crate::LearnError;

/// Which Base/Oracle pair supervises observation `o_t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SupervisionPairing {
    /// `(o_t, τ*_{t+1} − τ^b_{t+1})`, the replay-buffer tuple.
    Next,
    /// `(o_t, τ*_t − τ^b_t)`.
    Same,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip: f64,
    pub lr: f64,
    pub epochs: usize,
    /// Timesteps per minibatch.
    pub minibatch: usize,
    pub w_rl: f64,
    pub w_sup: f64,
    pub entropy_coef: f64,
    pub grad_clip: f64,
    pub episodes: usize,
    /// Seconds of simulated time per training episode.
    pub episode_length: f64,
    /// Truncated-BPTT chunk length.
    pub chunk_len: usize,
    /// Transitions collected between updates.
    pub steps_per_update: usize,
    pub hidden: usize,
    pub layers: usize,
    pub critic_hidden: Vec<usize>,
    pub init_log_std: f64,
    /// Evaluate every this many training episodes (0 disables).
    pub eval_interval: usize,
    pub eval_episodes: usize,
    /// Stop once an evaluation reaches this success rate in [0, 1].
    pub early_stop_success: f64,
    pub pairing: SupervisionPairing,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip: 0.2,
            lr: 3e-4,
            epochs: 4,
            minibatch: 256,
            w_rl: 1.0,
            w_sup: 10.0,
            entropy_coef: 1e-3,
            grad_clip: 1.0,
            episodes: 1500,
            episode_length: 10.0,
            chunk_len: 32,
            steps_per_update: 2048,
            hidden: 64,
            layers: 2,
            critic_hidden: vec![512, 256, 256],
            init_log_std: -1.0,
            eval_interval: 100,
            eval_episodes: 10,
            early_stop_success: 1.1,
            pairing: SupervisionPairing::Next,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LearnError> {
        let bad = |m: &str| Err(LearnError::Config(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda must lie in [0, 1]");
        }
        if !(self.clip > 0.0) || !(self.lr >= 0.0) || !(self.grad_clip > 0.0) {
            return bad("clip and grad_clip must be positive, lr non-negative");
        }
        if self.w_rl < 0.0 || self.w_sup < 0.0 || self.entropy_coef < 0.0 {
            return bad("loss weights must be non-negative");
        }
        if self.epochs == 0 || self.minibatch == 0 || self.chunk_len == 0 || self.hidden == 0 || self.layers == 0 {
            return bad("epochs, minibatch, chunk_len, hidden and layers must be positive");
        }
        if !(self.episode_length > 0.0) {
            return bad("episode_length must be positive");
        }
        Ok(())
    }
}

/// One control step of a training rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub privileged: Vec<f64>,
    /// Actor hidden state before this step, per layer.
    pub hidden: Vec<Vec<f64>>,
    pub tau_base: Vec<f64>,
    pub tau_oracle: Vec<f64>,
    /// Applied residual (squashed).
    pub tau_residual: Vec<f64>,
    /// Pre-squash sample.
    pub u: Vec<f64>,
    pub log_prob: f64,
    /// Supervised target in pre-squash space.
    pub sup_target: Vec<f64>,
    pub reward: f64,
    pub terminal: bool,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub transitions: Vec<Transition>,
    /// Critic value after the last step (ignored if it was terminal).
    pub last_value: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }
}

/// One time slice of a chunked minibatch (B rows, one per chunk).
#[derive(Debug, Clone)]
pub struct ActorStep {
    pub obs: Mat,
    pub u: Mat,
    pub old_log_prob: Mat,
    pub advantages: Mat,
    pub target: Mat,
    pub mask: Mat,
}

#[derive(Debug, Clone)]
pub struct ActorBatch {
    pub h0: Vec<Mat>,
    pub steps: Vec<ActorStep>,
}

impl ActorBatch {
    pub fn valid(&self) -> f64 {
        self.steps.iter().map(|s| s.mask.sum()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub w_rl: f64,
    pub w_sup: f64,
    pub entropy_coef: f64,
    pub clip: f64,
}

impl From<&TrainConfig> for LossWeights {
    fn from(c: &TrainConfig) -> Self {
        Self {
            w_rl: c.w_rl,
            w_sup: c.w_sup,
            entropy_coef: c.entropy_coef,
            clip: c.clip,
        }
    }
}

/// Graph nodes of the actor objective.
#[derive(Debug, Clone, Copy)]
pub struct ActorLoss {
    pub total: Id,
    /// Clipped surrogate minus entropy bonus.
    pub rl: Id,
    /// Negative log-likelihood of the supervised target.
    pub sup: Id,
    pub entropy: Id,
    /// Per-step log-probabilities (for diagnostics).
    pub log_probs: Id,
}

/// Records the actor objective over a chunked batch.
pub fn actor_loss(g: &mut Graph, net: &PolicyNet, ids: &PolicyIds, batch: &ActorBatch, w: LossWeights) -> ActorLoss {
    let log_std = net.log_std_tape(g, ids);
    let mut h: Vec<Id> = batch.h0.iter().map(|m| g.constant(m.clone())).collect();
    let total_valid = batch.valid().max(1.0);
    let mut surr_sum: Option<Id> = None;
    let mut sup_sum: Option<Id> = None;
    let mut all_lp: Option<Id> = None;
    let add = |g: &mut Graph, acc: Option<Id>, x: Id| match acc {
        Some(a) => Some(g.add(a, x)),
        None => Some(x),
    };
    for step in &batch.steps {
        let x = g.constant(step.obs.clone());
        let (mean, next) = net.step_tape(g, ids, x, &h);
        h = next;
        let u = g.constant(step.u.clone());
        let lp = gaussian_log_prob_tape(g, u, mean, log_std);
        let surr = clipped_surrogate_tape(g, lp, &step.old_log_prob, &step.advantages, w.clip);
        let s = masked_mean_tape(g, surr, &step.mask);
        let s = g.scale(s, step.mask.sum().max(1.0) / total_valid);
        surr_sum = add(g, surr_sum, s);
        let target = g.constant(step.target.clone());
        let tlp = gaussian_log_prob_tape(g, target, mean, log_std);
        let nll = g.scale(tlp, -1.0);
        let n = masked_mean_tape(g, nll, &step.mask);
        let n = g.scale(n, step.mask.sum().max(1.0) / total_valid);
        sup_sum = add(g, sup_sum, n);
        all_lp = Some(match all_lp {
            Some(a) => g.concat_cols(a, lp),
            None => lp,
        });
    }
    let surr = surr_sum.expect("batch has at least one step");
    let sup = sup_sum.unwrap();
    let entropy = gaussian_entropy_tape(g, log_std);
    let neg_surr = g.scale(surr, -1.0);
    let ent = g.scale(entropy, -w.entropy_coef);
    let rl = g.add(neg_surr, ent);
    let a = g.scale(rl, w.w_rl);
    let b = g.scale(sup, w.w_sup);
    let total = g.add(a, b);
    ActorLoss {
        total,
        rl,
        sup,
        entropy,
        log_probs: all_lp.unwrap(),
    }
}

/// Mean squared error of the critic on a batch of privileged observations.
pub fn critic_loss(g: &mut Graph, critic: &CriticNet, ids: &[Id], x: &Mat, returns: &Mat) -> Id {
    let xi = g.constant(x.clone());
    let v = critic.forward_tape(g, ids, xi);
    let r = g.constant(returns.clone());
    let d = g.sub(v, r);
    let d2 = g.square(d);
    g.mean(d2)
}

/// Gradients for `ids` in order (zeros where the output did not depend on
/// a parameter).
pub fn gradients_for(grads: &Gradients, ids: &[Id], module: &impl Module) -> Vec<Mat> {
    ids.iter()
        .zip(module.params())
        .map(|(id, p)| grads.get(*id).cloned().unwrap_or_else(|| Mat::zeros(p.rows, p.cols)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UpdateStats {
    pub loss_rl: f64,
    pub loss_sup: f64,
    pub loss_critic: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub actor_grad_norm: f64,
    pub critic_grad_norm: f64,
    pub minibatches: usize,
    /// Minibatches dropped because a loss was not finite.
    pub skipped: usize,
}

#[derive(Debug, Clone, Copy)]
struct Chunk {
    traj: usize,
    start: usize,
    len: usize,
}

/// Actor, critic and their optimizers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Learner {
    pub actor: PolicyNet,
    pub critic: CriticNet,
    pub actor_opt: Adam,
    pub critic_opt: Adam,
}

impl Learner {
    pub fn new(actor: PolicyNet, critic: CriticNet, lr: f64) -> Self {
        let actor_opt = Adam::new(&actor, lr);
        let critic_opt = Adam::new(&critic, lr);
        Self {
            actor,
            critic,
            actor_opt,
            critic_opt,
        }
    }

    /// Runs `epochs` passes of minibatch updates over the trajectories.
    pub fn update(&mut self, trajectories: &[Trajectory], cfg: &TrainConfig, rng: &mut impl Rng) -> UpdateStats {
        let mut advantages = Vec::with_capacity(trajectories.len());
        let mut returns = Vec::with_capacity(trajectories.len());
        for t in trajectories {
            let r: Vec<f64> = t.transitions.iter().map(|x| x.reward).collect();
            let v: Vec<f64> = t.transitions.iter().map(|x| x.value).collect();
            let d: Vec<bool> = t.transitions.iter().map(|x| x.terminal).collect();
            let (a, ret) = compute_gae(&r, &v, &d, t.last_value, cfg.gamma, cfg.gae_lambda);
            advantages.push(a);
            returns.push(ret);
        }
        let mut flat: Vec<f64> = advantages.iter().flatten().copied().collect();
        normalize(&mut flat);
        let mut k = 0;
        for a in advantages.iter_mut() {
            for v in a.iter_mut() {
                *v = flat[k];
                k += 1;
            }
        }

        let mut chunks = Vec::new();
        for (i, t) in trajectories.iter().enumerate() {
            let mut start = 0;
            while start < t.len() {
                let len = cfg.chunk_len.min(t.len() - start);
                chunks.push(Chunk { traj: i, start, len });
                start += len;
            }
        }
        let per_batch = (cfg.minibatch / cfg.chunk_len).max(1);
        let weights = LossWeights::from(cfg);
        let mut stats = UpdateStats::default();
        for _ in 0..cfg.epochs {
            chunks.shuffle(rng);
            for group in chunks.chunks(per_batch) {
                let batch = self.actor_batch(trajectories, &advantages, group, cfg.chunk_len);
                let (x, r) = critic_batch(trajectories, &returns, group);
                stats.minibatches += 1;
                if !self.actor_step(&batch, weights, cfg.grad_clip, &mut stats) {
                    stats.skipped += 1;
                    continue;
                }
                self.critic_step(&x, &r, cfg.grad_clip, &mut stats);
            }
        }
        let n = (stats.minibatches - stats.skipped).max(1) as f64;
        for v in [
            &mut stats.loss_rl,
            &mut stats.loss_sup,
            &mut stats.loss_critic,
            &mut stats.entropy,
            &mut stats.approx_kl,
            &mut stats.clip_fraction,
            &mut stats.actor_grad_norm,
            &mut stats.critic_grad_norm,
        ] {
            *v /= n;
        }
        stats
    }

    fn actor_batch(&self, trajs: &[Trajectory], adv: &[Vec<f64>], group: &[Chunk], len: usize) -> ActorBatch {
        let b = group.len();
        let (obs_dim, act_dim) = (self.actor.obs_dim(), self.actor.act_dim());
        let h0 = (0..self.actor.layers.len())
            .map(|l| {
                let rows: Vec<&[f64]> = group.iter().map(|c| trajs[c.traj].transitions[c.start].hidden[l].as_slice()).collect();
                Mat::from_rows(&rows)
            })
            .collect();
        let steps = (0..len)
            .map(|k| {
                let mut s = ActorStep {
                    obs: Mat::zeros(b, obs_dim),
                    u: Mat::zeros(b, act_dim),
                    old_log_prob: Mat::zeros(b, 1),
                    advantages: Mat::zeros(b, 1),
                    target: Mat::zeros(b, act_dim),
                    mask: Mat::zeros(b, 1),
                };
                for (row, c) in group.iter().enumerate() {
                    if k >= c.len {
                        continue;
                    }
                    let tr = &trajs[c.traj].transitions[c.start + k];
                    s.obs.row_mut(row).copy_from_slice(&tr.obs);
                    s.u.row_mut(row).copy_from_slice(&tr.u);
                    s.target.row_mut(row).copy_from_slice(&tr.sup_target);
                    s.old_log_prob.data[row] = tr.log_prob;
                    s.advantages.data[row] = adv[c.traj][c.start + k];
                    s.mask.data[row] = 1.0;
                }
                s
            })
            .collect();
        ActorBatch { h0, steps }
    }

    fn actor_step(&mut self, batch: &ActorBatch, w: LossWeights, clip: f64, stats: &mut UpdateStats) -> bool {
        let mut g = Graph::new();
        let ids = self.actor.bind_ids(&mut g);
        let loss = actor_loss(&mut g, &self.actor, &ids, batch, w);
        let total = g.scalar(loss.total);
        if !total.is_finite() {
            return false;
        }
        let grads = g.backward(loss.total);
        let mut gs = gradients_for(&grads, &ids.all, &self.actor);
        if !gs.iter().all(Mat::is_finite) {
            return false;
        }
        stats.actor_grad_norm += clip_grad_norm(&mut gs, clip);
        self.actor_opt.step(&mut self.actor, &gs);
        stats.loss_rl += g.scalar(loss.rl);
        stats.loss_sup += g.scalar(loss.sup);
        stats.entropy += g.scalar(loss.entropy);
        // Ratio diagnostics over valid entries.
        let lp = g.value(loss.log_probs);
        let (mut kl, mut clipped, mut n) = (0.0, 0.0, 0.0_f64);
        for (k, s) in batch.steps.iter().enumerate() {
            for row in 0..s.mask.rows {
                if s.mask.data[row] > 0.0 {
                    let d = s.old_log_prob.data[row] - lp.at(row, k);
                    kl += d;
                    if ((-d).exp() - 1.0).abs() > w.clip {
                        clipped += 1.0;
                    }
                    n += 1.0;
                }
            }
        }
        stats.approx_kl += kl / n.max(1.0);
        stats.clip_fraction += clipped / n.max(1.0);
        true
    }

    fn critic_step(&mut self, x: &Mat, r: &Mat, clip: f64, stats: &mut UpdateStats) {
        let mut g = Graph::new();
        let ids = self.critic.bind(&mut g);
        let loss = critic_loss(&mut g, &self.critic, &ids, x, r);
        if !g.scalar(loss).is_finite() {
            return;
        }
        let grads = g.backward(loss);
        let mut gs = gradients_for(&grads, &ids, &self.critic);
        stats.critic_grad_norm += clip_grad_norm(&mut gs, clip);
        self.critic_opt.step(&mut self.critic, &gs);
        stats.loss_critic += g.scalar(loss);
    }
}

fn critic_batch(trajs: &[Trajectory], returns: &[Vec<f64>], group: &[Chunk]) -> (Mat, Mat) {
    let rows: Vec<&[f64]> = group
        .iter()
        .flat_map(|c| (c.start..c.start + c.len).map(move |k| trajs[c.traj].transitions[k].privileged.as_slice()))
        .collect();
    let r: Vec<f64> = group.iter().flat_map(|c| returns[c.traj][c.start..c.start + c.len].iter().copied()).collect();
    let n = r.len();
    (Mat::from_rows(&rows), Mat::from_vec(n, 1, r))
}
