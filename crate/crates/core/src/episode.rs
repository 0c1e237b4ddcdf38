//! One simulated episode: randomization, the Base/Oracle/residual control
//! loop with delayed actuation, rewards, metrics and optional traces.
//!
//! Each control tick at time `t`:
//! 1. the Base runs on the filtered noisy state with the nominal model;
//! 2. an actuation draw `(Δt_delay, α)` is sampled for this command;
//! 3. the Oracle runs on the true state at `t + Δt_delay` (the instant the
//!    command reaches the motors) with the randomized model, divided by α;
//! 4. the actor (if any) adds its residual;
//! 5. `α·τ` is queued for release at `t + Δt_delay` and the plant advances
//!    one period, the previous command acting until the release;
//! 6. reward and termination use the true state at `t + Δt_sim`.

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use resloco_control::{tracking_errors, GaitScheduler, Reference, TickStatus, TrackingErrors};
use resloco_learn::loss::{log_prob, sample_gaussian};
use resloco_learn::{CriticNet, Hidden, Mat, PolicyNet, SupervisionPairing, Trajectory, Transition};
use resloco_sim::{advance, foot_pose, standing_pose, RobotModel, SimState, Terrain, Vec9, NJ};

use crate::config::Config;
use crate::policy::{
    build_observation, build_privileged, check_termination, compute_reward, ActionMap, BasePolicy, LowPass,
    ObservationInputs, OraclePolicy, PrivilegedInputs, RewardBreakdown,
};
use crate::randomization::{
    apply_actuation, perturb_state, randomize_model, randomize_terrain, sample_actuation, ActuationDraw, ModelDraw,
    RandomizationConfig,
};
use crate::CoreError;

/// Controllers compared by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Oracle,
    Base,
    /// Base controller at the high rate.
    Mbc,
    /// Residual, RL loss only.
    ResRl,
    /// Residual, supervised loss only.
    Il,
    /// Direct torques, RL + supervised loss.
    Or,
    /// Residual, RL + supervised loss.
    Bor,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::Oracle,
        Variant::Base,
        Variant::Mbc,
        Variant::ResRl,
        Variant::Il,
        Variant::Or,
        Variant::Bor,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Oracle => "oracle",
            Variant::Base => "base",
            Variant::Mbc => "mbc",
            Variant::ResRl => "resrl",
            Variant::Il => "il",
            Variant::Or => "or",
            Variant::Bor => "bor",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        Variant::ALL.into_iter().find(|v| v.name().eq_ignore_ascii_case(s))
    }

    /// Needs a trained actor.
    pub fn is_learned(self) -> bool {
        matches!(self, Variant::ResRl | Variant::Il | Variant::Or | Variant::Bor)
    }

    /// Adds the actor output to the Base torque.
    pub fn is_residual(self) -> bool {
        matches!(self, Variant::ResRl | Variant::Il | Variant::Bor)
    }

    /// Loss weights `(ω_rl, ω_sup)` relative to the configured ones.
    pub fn loss_weights(self, w_rl: f64, w_sup: f64) -> (f64, f64) {
        match self {
            Variant::ResRl => (w_rl, 0.0),
            Variant::Il => (0.0, w_sup),
            _ => (w_rl, w_sup),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// The actor driving a learned variant.
#[derive(Debug, Clone, Copy)]
pub struct Agent<'a> {
    pub actor: &'a PolicyNet,
    /// Present while collecting training data.
    pub critic: Option<&'a CriticNet>,
    /// Sample actions; otherwise use the mean.
    pub stochastic: bool,
}

#[derive(Debug, Clone)]
pub struct EpisodeOptions<'a> {
    pub variant: Variant,
    pub beta: f64,
    pub seed: u64,
    /// Simulated time [s].
    pub duration: f64,
    pub agent: Option<Agent<'a>>,
    /// Store training transitions.
    pub collect: bool,
    pub record_trace: bool,
    /// Evaluate the Oracle even when the variant does not need it.
    pub force_oracle: bool,
    pub pairing: SupervisionPairing,
}

impl<'a> EpisodeOptions<'a> {
    pub fn eval(variant: Variant, beta: f64, seed: u64, duration: f64) -> Self {
        Self {
            variant,
            beta,
            seed,
            duration,
            agent: None,
            collect: false,
            record_trace: false,
            force_oracle: false,
            pairing: SupervisionPairing::Next,
        }
    }
}

/// Randomization applied to one episode, enough to replay it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeDraws {
    pub seed: u64,
    pub beta: f64,
    pub model: ModelDraw,
    pub friction: f64,
    pub terrain: Vec<[f64; 2]>,
    pub commands: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub success: bool,
    /// Mean ‖e_ξ‖ over ticks [cm].
    pub dcm_cm: f64,
    /// Mean swing-foot position error over ticks [cm].
    pub foot_cm: f64,
    /// Sum of rewards without the torque-tracking term.
    pub ret: f64,
    pub fall_time: Option<f64>,
    pub ticks: usize,
    /// Controller ticks that fell back to a degraded solution.
    pub fallbacks: u64,
}

/// Per-tick record for export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub command: f64,
    pub q: [f64; 9],
    pub qd: [f64; 9],
    pub tau_base: [f64; NJ],
    pub tau_residual: [f64; NJ],
    pub tau: [f64; NJ],
    pub tau_oracle: [f64; NJ],
    pub xi: [f64; 2],
    pub xi_ref: [f64; 2],
    pub xi_dot_ref: [f64; 2],
    pub vrp_ref: [f64; 2],
    pub feet: [[f64; 3]; 2],
    pub feet_ref: [[f64; 3]; 2],
    /// 0 = double support, 1 = left stance, 2 = right stance.
    pub support: u8,
    pub e_xi: [f64; 2],
    pub e_foot: [f64; 3],
    /// VRP commanded by the Base controller.
    pub vrp_cmd: [f64; 2],
    /// Base QP outcome.
    pub status: TickStatus,
    pub reward: RewardBreakdown,
    pub terminated: bool,
}

#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub metrics: EpisodeMetrics,
    pub draws: EpisodeDraws,
    pub trajectory: Option<Trajectory>,
    pub trace: Vec<TraceRow>,
    /// Per-tick rewards including R_τ.
    pub rewards: Vec<f64>,
}

/// Independent RNG streams of one episode.
struct Streams {
    noise: ChaCha8Rng,
    actuation: ChaCha8Rng,
    action: ChaCha8Rng,
}

fn stream(seed: u64, k: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(k);
    r
}

/// Model, terrain and command draws of an episode (streams 0–2).
pub fn episode_draws(cfg: &Config, beta: f64, seed: u64, duration: f64) -> (RobotModel, Terrain, EpisodeDraws) {
    let dr = cfg.randomization.at_beta(beta);
    let (model, draw) = randomize_model(&cfg.model, &dr, &mut stream(seed, 0));
    let terrain = randomize_terrain(&dr, &mut stream(seed, 1));
    let mut crng = stream(seed, 2);
    let n = (duration / cfg.control.command_interval).ceil() as usize + 1;
    let r = cfg.control.command_range;
    let commands = (0..n)
        .map(|_| {
            let u: f64 = crng.random();
            -r + 2.0 * r * u
        })
        .collect();
    let draws = EpisodeDraws {
        seed,
        beta,
        model: draw,
        friction: terrain.friction,
        terrain: terrain.profile.clone(),
        commands,
    };
    (model, terrain, draws)
}

fn support_code(r: &Reference) -> u8 {
    match r.swing {
        None => 0,
        Some(s) => 2 - s.side as u8,
    }
}

fn hidden_rows(h: &Hidden) -> Vec<Vec<f64>> {
    h.iter().map(|m| m.data.clone()).collect()
}

/// Runs one episode.
pub fn run_episode(cfg: &Config, opts: &EpisodeOptions) -> Result<EpisodeOutcome, CoreError> {
    let variant = opts.variant;
    if variant.is_learned() && opts.agent.is_none() {
        return Err(CoreError::Config(format!("variant {variant} needs a trained policy")));
    }
    let dr: RandomizationConfig = cfg.randomization.at_beta(opts.beta);
    let ctl = &cfg.control;
    let (model, terrain, draws) = episode_draws(cfg, opts.beta, opts.seed, opts.duration);
    let mut rng = Streams {
        noise: stream(opts.seed, 3),
        actuation: stream(opts.seed, 4),
        action: stream(opts.seed, 5),
    };

    // The nominal pose: randomized masses can put the nominal CoM height
    // out of reach, and geometry is not randomized.
    let q0 = standing_pose(&cfg.model, [0.0, 0.0], 0.0, cfg.gait.foot_center, cfg.gait.com_height)?;
    let mut state = SimState::new(q0, Vec9::zeros());
    let kin = state.kinematics(&model);
    let stance = [foot_pose(&model, &kin, 0), foot_pose(&model, &kin, 1)];
    let xi0 = Vector2::from(resloco_sim::dcm(&model, &state));
    let command_at = |t: f64| {
        let i = ((t + 1e-9) / ctl.command_interval).floor() as usize;
        draws.commands[i.min(draws.commands.len() - 1)]
    };
    // Controllers plan on flat ground.
    let plan_terrain = Terrain::flat(cfg.randomization.nominal_friction);
    let mut scheduler = GaitScheduler::new(cfg.gait.clone(), plan_terrain, stance, 0, xi0, 0.0, command_at(0.0))?;

    // The filter only exists to reject sensor noise; without noise it
    // would be pure lag.
    let filter = (opts.beta > 0.0 && ctl.filter_cutoff_hz > 0.0).then(|| LowPass::new(ctl.filter_cutoff_hz));
    let mut base = BasePolicy::new(cfg.model.clone(), cfg.gains.clone(), filter, cfg.randomization.nominal_friction);
    let mut oracle = OraclePolicy::new(cfg.gains.clone());
    let limits = model.torque_limits();
    let residual_map = ActionMap::new(&cfg.model, ctl.residual_fraction);
    let direct_map = ActionMap::new(&cfg.model, ctl.direct_fraction);
    let action_map = if variant == Variant::Or { &direct_map } else { &residual_map };

    let mbc = variant == Variant::Mbc;
    let sub = if mbc { (ctl.period / ctl.mbc_period).round() as usize } else { 1 };
    let sub_dt = ctl.period / sub as f64;
    let need_oracle = variant == Variant::Oracle || opts.collect || opts.force_oracle || opts.record_trace;
    let need_base = variant != Variant::Oracle && variant != Variant::Or || opts.record_trace;
    let ticks = (opts.duration / ctl.period).round() as usize;

    let mut hidden = opts.agent.map(|a| a.actor.initial_state(1));
    let mut tau_prev = [0.0; NJ];
    let mut transitions: Vec<Transition> = Vec::new();
    let mut sup_targets: Vec<Vec<f64>> = Vec::new();
    let mut trace = Vec::new();
    let mut rewards = Vec::with_capacity(ticks);
    let (mut dcm_sum, mut foot_sum, mut ret) = (0.0, 0.0, 0.0);
    let mut fall_time = None;
    let mut done = 0;
    let mut measured = 0usize;

    for _ in 0..ticks {
        let t = state.t;
        let q_now = state.q;
        let qd_now = state.qd;
        let mut tau_base = [0.0; NJ];
        let mut tau_oracle = [0.0; NJ];
        let mut tau_residual = [0.0; NJ];
        let mut tau = [0.0; NJ];
        let mut obs = Vec::new();
        let mut oracle_errors = TrackingErrors::default();
        let mut u = Vec::new();
        let mut logp = 0.0;
        let mut h_before = Vec::new();
        let mut diverged = false;
        let mut vrp_cmd = [f64::NAN; 2];
        let mut status = TickStatus::Optimal;

        for _ in 0..sub {
            let ts = state.t;
            scheduler.update(ts, command_at(ts))?;
            let reference = scheduler.reference(ts);
            let noisy = perturb_state(&state.q, &state.qd, &dr, &mut rng.noise);
            let draw = sample_actuation(&dr, &mut rng.actuation);
            let (est, base_errors) = if need_base {
                let (est, out) = base.tick(&noisy, &reference, sub_dt);
                tau_base = out.tau;
                vrp_cmd = out.vrp_cmd;
                status = out.status;
                (est, out.errors)
            } else {
                let est = match &mut base.filter {
                    Some(f) => f.apply(&noisy, sub_dt),
                    None => noisy,
                };
                let e = base.errors(&est, &reference);
                (est, e)
            };
            if need_oracle {
                let (tau_o, errs) = oracle_tick(&mut oracle, &model, &terrain, &state, &scheduler, &draw, ctl.physics_dt)?;
                tau_oracle = tau_o;
                oracle_errors = errs;
            }
            if let Some(agent) = opts.agent {
                let tau_b_obs = if variant == Variant::Or { [0.0; NJ] } else { tau_base };
                obs = build_observation(
                    &ObservationInputs {
                        est: &est,
                        tau_base: &tau_b_obs,
                        tau_prev: &tau_prev,
                        errors: &base_errors,
                    },
                    &limits,
                    &cfg.observation,
                );
                let h = hidden.as_ref().expect("agent has hidden state");
                h_before = hidden_rows(h);
                let (mean, h_next) = agent.actor.step(&Mat::row_vector(&obs), h);
                hidden = Some(h_next);
                let std = agent.actor.std();
                u = if agent.stochastic {
                    sample_gaussian(&mean.data, &std, &mut rng.action)
                } else {
                    mean.data.clone()
                };
                logp = log_prob(&u, &mean.data, &std);
                tau_residual = action_map.torque(&u);
            }
            tau = match variant {
                Variant::Oracle => tau_oracle,
                Variant::Base | Variant::Mbc => tau_base,
                Variant::Or => tau_residual,
                _ => std::array::from_fn(|i| tau_base[i] + tau_residual[i]),
            };
            apply_actuation(&tau, &draw, &mut state.actuation, ts);
            match advance(&state, &model, &terrain, sub_dt, ctl.physics_dt) {
                Ok(s) => state = s,
                Err(_) => {
                    diverged = true;
                    break;
                }
            }
        }

        // Ground truth after the period.
        let t_next = t + ctl.period;
        let reference = scheduler.reference(t_next);
        let errors = if diverged {
            TrackingErrors {
                e_xi: [f64::INFINITY; 2],
                ..Default::default()
            }
        } else {
            tracking_errors(&model, &state.kinematics(&model), &reference, model.time_constant())
        };
        let terminated = diverged || check_termination(errors.e_xi, cfg.reward.termination_threshold);
        let oracle_ref = if need_oracle { tau_oracle } else { tau };
        let reward = compute_reward(&errors, &tau, &tau_prev, &oracle_ref, &cfg.reward, terminated);
        rewards.push(reward.total());
        ret += reward.without_torque();
        done += 1;
        if !diverged {
            dcm_sum += errors.dcm_norm();
            foot_sum += errors.e_foot[0].hypot(errors.e_foot[1]);
            measured += 1;
        }

        if opts.collect {
            let agent = opts.agent.expect("collection needs an agent");
            let privileged = build_privileged(
                &obs,
                &PrivilegedInputs {
                    q: &q_now,
                    qd: &qd_now,
                    tau_oracle: &tau_oracle,
                    errors: &oracle_errors,
                },
                &limits,
                &cfg.observation,
            );
            let value = agent.critic.map_or(0.0, |c| c.value(&privileged));
            let target_tau: [f64; NJ] = if variant == Variant::Or {
                tau_oracle
            } else {
                std::array::from_fn(|i| tau_oracle[i] - tau_base[i])
            };
            sup_targets.push(action_map.action(&target_tau));
            transitions.push(Transition {
                obs: obs.clone(),
                privileged,
                hidden: h_before.clone(),
                tau_base: tau_base.to_vec(),
                tau_oracle: tau_oracle.to_vec(),
                tau_residual: tau_residual.to_vec(),
                u: u.clone(),
                log_prob: logp,
                sup_target: Vec::new(),
                reward: reward.total(),
                terminal: terminated,
                value,
            });
        }
        if opts.record_trace {
            let kin = (!diverged).then(|| state.kinematics(&model));
            let xi = if diverged { [f64::NAN; 2] } else { resloco_sim::dcm(&model, &state) };
            let feet = match &kin {
                Some(k) => [0, 1].map(|s| {
                    let p = foot_pose(&model, k, s);
                    [p.x, p.y, p.z]
                }),
                None => [[f64::NAN; 3]; 2],
            };
            let mut feet_ref = reference.feet.map(|p| [p.x, p.y, p.z]);
            if let Some(s) = reference.swing {
                feet_ref[s.side] = [s.pose.x, s.pose.y, s.pose.z];
            }
            trace.push(TraceRow {
                t: t_next,
                command: command_at(t),
                q: state.q.into(),
                qd: state.qd.into(),
                tau_base,
                tau_residual,
                tau,
                tau_oracle,
                xi,
                xi_ref: [reference.dcm.xi.x, reference.dcm.xi.y],
                xi_dot_ref: [reference.dcm.xi_dot.x, reference.dcm.xi_dot.y],
                vrp_ref: [reference.dcm.vrp.x, reference.dcm.vrp.y],
                feet,
                feet_ref,
                support: support_code(&reference),
                e_xi: errors.e_xi,
                e_foot: errors.e_foot,
                vrp_cmd,
                status,
                reward,
                terminated,
            });
        }
        tau_prev = tau;
        if terminated {
            fall_time = Some(t_next);
            break;
        }
    }

    let trajectory = opts.collect.then(|| {
        let n = transitions.len();
        for k in 0..n {
            let j = match opts.pairing {
                SupervisionPairing::Next if k + 1 < n => k + 1,
                _ => k,
            };
            transitions[k].sup_target = sup_targets[j].clone();
        }
        let terminal = transitions.last().is_some_and(|t| t.terminal);
        // Bootstrap a truncated episode from the last value estimate.
        let last_value = if terminal { 0.0 } else { transitions.last().map_or(0.0, |t| t.value) };
        Trajectory {
            transitions,
            last_value,
        }
    });
    let valid = measured.max(1);
    let metrics = EpisodeMetrics {
        success: fall_time.is_none(),
        dcm_cm: 100.0 * dcm_sum / valid as f64,
        foot_cm: 100.0 * foot_sum / valid as f64,
        ret,
        fall_time,
        ticks: done,
        fallbacks: base.wbc.failures + oracle.wbc.failures,
    };
    Ok(EpisodeOutcome {
        metrics,
        draws,
        trajectory,
        trace,
        rewards,
    })
}

/// Oracle command for the state the plant will be in when the command
/// lands, predicted by simulating the delay under the queued torques.
fn oracle_tick(
    oracle: &mut OraclePolicy,
    model: &RobotModel,
    terrain: &Terrain,
    state: &SimState,
    scheduler: &GaitScheduler,
    draw: &ActuationDraw,
    dt: f64,
) -> Result<([f64; NJ], TrackingErrors), CoreError> {
    let delay = draw.delay();
    let predicted;
    let s = if delay > 0.0 {
        predicted = advance(state, model, terrain, delay, dt)?;
        &predicted
    } else {
        state
    };
    let reference = scheduler.reference(state.t + delay);
    let (cmd, out) = oracle.tick(model, &s.q, &s.qd, &reference, terrain.friction, draw.alpha);
    Ok((cmd, out.errors))
}

/// Draws `n` episode seeds from a run seed.
pub fn episode_seeds(run_seed: u64, n: usize) -> Vec<u64> {
    let mut r = stream(run_seed, 7);
    (0..n).map(|_| r.random()).collect()
}
