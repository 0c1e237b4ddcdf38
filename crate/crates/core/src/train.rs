//! Training runs: alternating collection and PPO updates, periodic
//! evaluation, and a run directory with logs and checkpoints.
//!
//! Episode seeds, network initialization and each update draw from
//! independent streams of the run seed, so a run resumed from its latest
//! checkpoint continues exactly as if it had never stopped.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use resloco_learn::{Adam, Checkpoint, CriticNet, Learner, Mat, Module, PolicyNet, TrainConfig, Trajectory, UpdateStats};
use resloco_sim::NJ;

use crate::config::Config;
use crate::episode::{episode_seeds, run_episode, Agent, EpisodeMetrics, EpisodeOptions, Variant};
use crate::policy::{OBS_DIM, PRIVILEGED_DIM};
use crate::CoreError;

/// Files of one training run.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.toml")
    }

    /// One JSON object per update.
    pub fn log(&self) -> PathBuf {
        self.root.join("train_log.jsonl")
    }

    pub fn curve(&self) -> PathBuf {
        self.root.join("eval_curve.csv")
    }

    /// Randomization draws of every training episode.
    pub fn draws(&self) -> PathBuf {
        self.root.join("draws.jsonl")
    }

    pub fn checkpoints(&self) -> PathBuf {
        self.root.join("checkpoints")
    }

    /// Full learner state after the most recent update.
    pub fn latest(&self) -> PathBuf {
        self.checkpoints().join("latest.ckpt")
    }

    /// Actor snapshot at an evaluation point.
    pub fn snapshot(&self, episode: usize) -> PathBuf {
        self.checkpoints().join(format!("policy_ep{episode:06}.ckpt"))
    }

    /// Actor at the end of training.
    pub fn policy(&self) -> PathBuf {
        self.root.join("policy.ckpt")
    }
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub variant: Variant,
    pub seed: u64,
    /// Randomization level during training and evaluation snapshots.
    pub beta: f64,
    /// Where logs and checkpoints go; nothing is written without one.
    pub run_dir: Option<PathBuf>,
    /// Continue from the run directory's latest checkpoint if present.
    pub resume: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateLog {
    pub update: usize,
    /// Training episodes finished before this update.
    pub episode: usize,
    /// Transitions collected so far.
    pub steps: usize,
    pub batch_steps: usize,
    /// Mean per-episode reward sum of the batch (including R_τ).
    pub mean_return: f64,
    pub mean_length: f64,
    #[serde(flatten)]
    pub stats: UpdateStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub episode: usize,
    pub steps: usize,
    /// Percent of evaluation episodes without a fall.
    pub success: f64,
    pub dcm_cm: f64,
    pub foot_cm: f64,
    pub ret: f64,
}

impl EvalPoint {
    pub fn from_metrics(episode: usize, steps: usize, m: &[EpisodeMetrics]) -> Self {
        let n = m.len().max(1) as f64;
        Self {
            episode,
            steps,
            success: 100.0 * m.iter().filter(|x| x.success).count() as f64 / n,
            dcm_cm: m.iter().map(|x| x.dcm_cm).sum::<f64>() / n,
            foot_cm: m.iter().map(|x| x.foot_cm).sum::<f64>() / n,
            ret: m.iter().map(|x| x.ret).sum::<f64>() / n,
        }
    }
}

#[derive(Debug)]
pub enum Progress<'a> {
    Update(&'a UpdateLog),
    Eval(&'a EvalPoint),
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub learner: Learner,
    pub updates: Vec<UpdateLog>,
    pub curve: Vec<EvalPoint>,
    pub episodes: usize,
    pub steps: usize,
    pub stopped_early: bool,
}

fn stream(seed: u64, k: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(k);
    r
}

const INIT_STREAM: u64 = 9;
const EVAL_STREAM: u64 = 10;
const UPDATE_STREAM_BASE: u64 = 1 << 20;

/// Training configuration with the variant's loss weights applied.
pub fn variant_train_config(cfg: &Config, variant: Variant) -> TrainConfig {
    let mut t = cfg.train.clone();
    (t.w_rl, t.w_sup) = variant.loss_weights(cfg.train.w_rl, cfg.train.w_sup);
    t
}

/// Freshly initialized actor and critic for a run seed.
pub fn init_learner(cfg: &Config, seed: u64) -> Learner {
    let t = &cfg.train;
    let mut rng = stream(seed, INIT_STREAM);
    let actor = PolicyNet::new(OBS_DIM, NJ, t.hidden, t.layers, t.init_log_std, &mut rng);
    let critic = CriticNet::new(PRIVILEGED_DIM, &t.critic_hidden, &mut rng);
    Learner::new(actor, critic, t.lr)
}

/// Seeds of the evaluation episodes run during training.
pub fn training_eval_seeds(seed: u64, n: usize) -> Vec<u64> {
    let mut r = stream(seed, EVAL_STREAM);
    (0..n).map(|_| r.random()).collect()
}

/// Deterministic evaluation of an actor over `seeds`.
pub fn evaluate_actor(
    cfg: &Config,
    variant: Variant,
    actor: &PolicyNet,
    beta: f64,
    seeds: &[u64],
) -> Result<Vec<EpisodeMetrics>, CoreError> {
    seeds
        .iter()
        .map(|&seed| {
            let mut o = EpisodeOptions::eval(variant, beta, seed, cfg.control.eval_duration);
            o.agent = Some(Agent {
                actor,
                critic: None,
                stochastic: false,
            });
            Ok(run_episode(cfg, &o)?.metrics)
        })
        .collect()
}

/// Trains a learned variant.
pub fn train(cfg: &Config, opts: &TrainOptions, mut progress: impl FnMut(Progress)) -> Result<TrainOutcome, CoreError> {
    let variant = opts.variant;
    if !variant.is_learned() {
        return Err(CoreError::Config(format!("variant {variant} has nothing to train")));
    }
    cfg.validate()?;
    let tcfg = variant_train_config(cfg, variant);
    let hash = cfg.hash();
    let run = opts.run_dir.as_ref().map(RunDir::new);

    let mut learner = init_learner(cfg, opts.seed);
    let mut progress_state = Resume::default();
    if let Some(run) = &run {
        fs::create_dir_all(run.checkpoints())?;
        if opts.resume && run.latest().exists() {
            let ckpt = read_checkpoint(&run.latest())?;
            if ckpt.get("resume_key") != Some(&resume_key(cfg)) {
                return Err(CoreError::Config(format!(
                    "{} was written with a different configuration",
                    run.latest().display()
                )));
            }
            progress_state = restore_learner(&ckpt, &mut learner, variant)?;
            truncate_logs(run, progress_state.episodes)?;
        } else {
            for p in [run.log(), run.curve(), run.draws()] {
                if p.exists() {
                    fs::remove_file(p)?;
                }
            }
        }
        fs::write(run.config(), cfg.to_toml())?;
    }
    let Resume {
        episodes: start,
        updates: mut n_updates,
        steps: mut total_steps,
    } = progress_state;

    let seeds = episode_seeds(opts.seed, tcfg.episodes);
    let eval_seeds = training_eval_seeds(opts.seed, tcfg.eval_episodes);
    let mut buffer: Vec<Trajectory> = Vec::new();
    let mut buffer_steps = 0;
    let mut updates = Vec::new();
    let mut curve = Vec::new();
    let mut stopped_early = false;
    let mut episodes = start;

    for (ep, &seed) in seeds.iter().enumerate().skip(start) {
        let outcome = {
            let mut o = EpisodeOptions::eval(variant, opts.beta, seed, tcfg.episode_length);
            o.agent = Some(Agent {
                actor: &learner.actor,
                critic: Some(&learner.critic),
                stochastic: true,
            });
            o.collect = true;
            o.pairing = tcfg.pairing;
            run_episode(cfg, &o)?
        };
        if let Some(run) = &run {
            append_json(&run.draws(), &outcome.draws)?;
        }
        let traj = outcome.trajectory.expect("collection returns a trajectory");
        buffer_steps += traj.len();
        total_steps += traj.len();
        buffer.push(traj);
        episodes = ep + 1;

        if buffer_steps >= tcfg.steps_per_update {
            let mut rng = stream(opts.seed, UPDATE_STREAM_BASE + n_updates as u64);
            let stats = learner.update(&buffer, &tcfg, &mut rng);
            let returns: Vec<f64> = buffer.iter().map(|t| t.transitions.iter().map(|x| x.reward).sum()).collect();
            let log = UpdateLog {
                update: n_updates,
                episode: episodes,
                steps: total_steps,
                batch_steps: buffer_steps,
                mean_return: returns.iter().sum::<f64>() / returns.len() as f64,
                mean_length: buffer_steps as f64 / buffer.len() as f64,
                stats,
            };
            n_updates += 1;
            buffer.clear();
            buffer_steps = 0;
            if let Some(run) = &run {
                append_json(&run.log(), &log)?;
                let state = Resume {
                    episodes,
                    updates: n_updates,
                    steps: total_steps,
                };
                let mut ck = learner_checkpoint(&learner, variant, hash, state);
                ck.tensors.push(("resume_key".into(), resume_key(cfg)));
                write_atomic(&run.latest(), &ck)?;
            }
            progress(Progress::Update(&log));
            updates.push(log);
        }

        if tcfg.eval_interval > 0 && episodes % tcfg.eval_interval == 0 {
            let m = evaluate_actor(cfg, variant, &learner.actor, opts.beta, &eval_seeds)?;
            let point = EvalPoint::from_metrics(episodes, total_steps, &m);
            if let Some(run) = &run {
                append_curve(&run.curve(), &point)?;
                write_atomic(&run.snapshot(episodes), &policy_checkpoint(&learner.actor, variant, hash))?;
            }
            progress(Progress::Eval(&point));
            let done = point.success >= 100.0 * tcfg.early_stop_success;
            curve.push(point);
            if done {
                stopped_early = true;
                break;
            }
        }
    }

    if let Some(run) = &run {
        write_atomic(&run.policy(), &policy_checkpoint(&learner.actor, variant, hash))?;
    }
    Ok(TrainOutcome {
        learner,
        updates,
        curve,
        episodes,
        steps: total_steps,
        stopped_early,
    })
}

/// Hash of everything except the episode budget, so a finished run can
/// be extended.
fn resume_key(cfg: &Config) -> Mat {
    let mut c = cfg.clone();
    c.train.episodes = 0;
    let h = c.hash();
    Mat::from_vec(1, 8, h.chunks(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()) as f64).collect())
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Resume {
    episodes: usize,
    updates: usize,
    steps: usize,
}

fn variant_index(v: Variant) -> f64 {
    Variant::ALL.iter().position(|&x| x == v).unwrap() as f64
}

fn push_module(tensors: &mut Vec<(String, Mat)>, prefix: &str, m: &impl Module) {
    for (i, p) in m.params().into_iter().enumerate() {
        tensors.push((format!("{prefix}.{i:03}"), p.clone()));
    }
}

fn push_adam(tensors: &mut Vec<(String, Mat)>, prefix: &str, a: &Adam) {
    for (i, m) in a.m.iter().enumerate() {
        tensors.push((format!("{prefix}_m.{i:03}"), m.clone()));
    }
    for (i, v) in a.v.iter().enumerate() {
        tensors.push((format!("{prefix}_v.{i:03}"), v.clone()));
    }
    tensors.push((format!("{prefix}_t"), Mat::from_vec(1, 1, vec![a.t as f64])));
}

/// Actor-only checkpoint used for evaluation.
pub fn policy_checkpoint(actor: &PolicyNet, variant: Variant, hash: [u8; 32]) -> Checkpoint {
    let mut tensors = vec![("variant".to_string(), Mat::from_vec(1, 1, vec![variant_index(variant)]))];
    push_module(&mut tensors, "actor", actor);
    Checkpoint {
        config_hash: hash,
        tensors,
    }
}

fn learner_checkpoint(l: &Learner, variant: Variant, hash: [u8; 32], r: Resume) -> Checkpoint {
    let mut ck = policy_checkpoint(&l.actor, variant, hash);
    push_module(&mut ck.tensors, "critic", &l.critic);
    push_adam(&mut ck.tensors, "actor_opt", &l.actor_opt);
    push_adam(&mut ck.tensors, "critic_opt", &l.critic_opt);
    ck.tensors.push((
        "progress".into(),
        Mat::from_vec(1, 3, vec![r.episodes as f64, r.updates as f64, r.steps as f64]),
    ));
    ck
}

fn load_into(m: &mut impl Module, stored: &[&Mat], what: &str) -> Result<(), CoreError> {
    let mut params = m.params_mut();
    let shapes_match = params.len() == stored.len()
        && params.iter().zip(stored).all(|(p, s)| p.rows == s.rows && p.cols == s.cols);
    if !shapes_match {
        return Err(CoreError::Config(format!("checkpoint {what} does not match the configured network shape")));
    }
    for (p, s) in params.iter_mut().zip(stored) {
        p.data.copy_from_slice(&s.data);
    }
    Ok(())
}

fn load_adam(a: &mut Adam, ck: &Checkpoint, prefix: &str) -> Result<(), CoreError> {
    let m = ck.group(&format!("{prefix}_m"));
    let v = ck.group(&format!("{prefix}_v"));
    let t = ck.get(&format!("{prefix}_t"));
    match t {
        Some(t) if m.len() == a.m.len() && v.len() == a.v.len() => {
            a.m = m.into_iter().cloned().collect();
            a.v = v.into_iter().cloned().collect();
            a.t = t.data[0] as u64;
            Ok(())
        }
        _ => Err(CoreError::Config(format!("checkpoint lacks optimizer state {prefix}"))),
    }
}

fn checkpoint_variant(ck: &Checkpoint) -> Result<Variant, CoreError> {
    ck.get("variant")
        .and_then(|m| Variant::ALL.get(m.data[0] as usize).copied())
        .ok_or_else(|| CoreError::Config("checkpoint does not record its variant".into()))
}

fn restore_learner(ck: &Checkpoint, l: &mut Learner, variant: Variant) -> Result<Resume, CoreError> {
    let stored = checkpoint_variant(ck)?;
    if stored != variant {
        return Err(CoreError::Config(format!("checkpoint was trained as {stored}, not {variant}")));
    }
    load_into(&mut l.actor, &ck.group("actor"), "actor")?;
    load_into(&mut l.critic, &ck.group("critic"), "critic")?;
    load_adam(&mut l.actor_opt, ck, "actor_opt")?;
    load_adam(&mut l.critic_opt, ck, "critic_opt")?;
    let p = ck
        .get("progress")
        .ok_or_else(|| CoreError::Config("checkpoint lacks training progress".into()))?;
    Ok(Resume {
        episodes: p.data[0] as usize,
        updates: p.data[1] as usize,
        steps: p.data[2] as usize,
    })
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint, CoreError> {
    let f = File::open(path).map_err(|e| CoreError::Config(format!("{}: {e}", path.display())))?;
    Ok(Checkpoint::read(BufReader::new(f))?)
}

/// Loads the actor of a checkpoint written by [`train`]; the network shape
/// comes from `cfg`.
pub fn load_policy(cfg: &Config, path: &Path) -> Result<(Variant, PolicyNet), CoreError> {
    let ck = read_checkpoint(path)?;
    let variant = checkpoint_variant(&ck)?;
    let mut actor = init_learner(cfg, 0).actor;
    load_into(&mut actor, &ck.group("actor"), "actor")?;
    Ok((variant, actor))
}

fn write_atomic(path: &Path, ck: &Checkpoint) -> Result<(), CoreError> {
    let tmp = path.with_extension("tmp");
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        ck.write(&mut w)?;
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn append_json(path: &Path, value: &impl Serialize) -> Result<(), CoreError> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    serde_json::to_writer(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

fn append_curve(path: &Path, p: &EvalPoint) -> Result<(), CoreError> {
    let fresh = !path.exists();
    let f = OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(f);
    w.serialize(p)?;
    w.flush()?;
    Ok(())
}

pub fn read_curve(path: &Path) -> Result<Vec<EvalPoint>, CoreError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

pub fn read_log(path: &Path) -> Result<Vec<UpdateLog>, CoreError> {
    let f = BufReader::new(File::open(path)?);
    f.lines()
        .filter(|l| l.as_ref().map_or(true, |s| !s.trim().is_empty()))
        .map(|l| Ok(serde_json::from_str(&l?)?))
        .collect()
}

/// Drops log entries written after the checkpoint being resumed.
fn truncate_logs(run: &RunDir, episodes: usize) -> Result<(), CoreError> {
    if run.log().exists() {
        let keep: Vec<UpdateLog> = read_log(&run.log())?.into_iter().filter(|l| l.episode <= episodes).collect();
        fs::remove_file(run.log())?;
        for l in &keep {
            append_json(&run.log(), l)?;
        }
    }
    if run.curve().exists() {
        let keep: Vec<EvalPoint> = read_curve(&run.curve())?.into_iter().filter(|p| p.episode <= episodes).collect();
        fs::remove_file(run.curve())?;
        for p in &keep {
            append_curve(&run.curve(), p)?;
        }
    }
    if run.draws().exists() {
        let text = fs::read_to_string(run.draws())?;
        let kept: Vec<&str> = text.lines().take(episodes).collect();
        fs::write(run.draws(), kept.iter().map(|l| format!("{l}\n")).collect::<String>())?;
    }
    Ok(())
}
