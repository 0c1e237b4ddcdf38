//! Finite-difference oracle for every trainable gradient.
//!
//! Small randomly initialized networks keep a full sweep over all
//! parameters cheap; the code paths are the ones used at full size.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mat::Mat;
use crate::networks::{CriticNet, PolicyNet};
use crate::nn::Module;
use crate::ppo::{actor_loss, critic_loss, gradients_for, ActorBatch, ActorStep, LossWeights};
use crate::tape::Graph;

const H: f64 = 1e-5;

pub const WEIGHTS: LossWeights = LossWeights {
    w_rl: 1.0,
    w_sup: 10.0,
    entropy_coef: 1e-3,
    clip: 0.2,
};

/// Relative agreement with an absolute floor for entries that vanish.
pub fn close(analytic: f64, numeric: f64, rel: f64) -> bool {
    (analytic - numeric).abs() <= rel * analytic.abs().max(numeric.abs()) + 1e-9
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    /// Σ w ⊙ (actor mean) over a sequence.
    ActorOutput,
    Critic,
    Supervised,
    Rl,
    Total,
}

pub const TARGETS: [Target; 5] = [Target::ActorOutput, Target::Critic, Target::Supervised, Target::Rl, Target::Total];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub target: Target,
    pub points: usize,
    pub entries: usize,
    /// Entries outside the relative tolerance.
    pub failures: usize,
    /// Largest |a − n| / max(|a|, |n|, 1e-5).
    pub worst: f64,
}

fn random_mat(rows: usize, cols: usize, scale: f64, rng: &mut impl Rng) -> Mat {
    Mat::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect())
}

fn random_actor(rng: &mut impl Rng) -> PolicyNet {
    let mut net = PolicyNet::new(5, 3, 6, 2, -0.5, rng);
    // Non-zero head and an unclamped log-std so every parameter matters.
    net.head.w = random_mat(6, 3, 0.5, rng);
    net.head.b = random_mat(1, 3, 0.5, rng);
    net.log_std = random_mat(1, 3, 0.8, rng);
    net
}

fn random_batch(net: &PolicyNet, rng: &mut impl Rng) -> ActorBatch {
    let b = 3;
    let steps = (0..4)
        .map(|k| ActorStep {
            obs: random_mat(b, 5, 1.0, rng),
            u: random_mat(b, 3, 1.0, rng),
            // Ratios well away from the clip boundary.
            old_log_prob: random_mat(b, 1, 1.0, rng).map(|v| v - 3.0),
            advantages: random_mat(b, 1, 1.5, rng),
            target: random_mat(b, 3, 1.0, rng),
            mask: Mat::from_vec(b, 1, vec![1.0, 1.0, if k < 3 { 1.0 } else { 0.0 }]),
        })
        .collect();
    ActorBatch {
        h0: net.initial_state(b).iter().map(|m| random_mat(m.rows, m.cols, 0.5, rng)).collect(),
        steps,
    }
}

/// Compares `analytic` with central differences of `eval` over every
/// parameter entry; returns (entries, failures, worst).
fn sweep<M: Module + Clone>(module: &M, eval: impl Fn(&M) -> f64, analytic: &[Mat], rel: f64) -> (usize, usize, f64) {
    let base = module.flat();
    let flat: Vec<f64> = analytic.iter().flat_map(|g| g.data.iter().copied()).collect();
    assert_eq!(flat.len(), base.len());
    let mut probe = module.clone();
    let mut p = base.clone();
    let (mut failures, mut worst) = (0, 0.0_f64);
    for k in 0..base.len() {
        p[k] = base[k] + H;
        probe.set_flat(&p);
        let up = eval(&probe);
        p[k] = base[k] - H;
        probe.set_flat(&p);
        let down = eval(&probe);
        p[k] = base[k];
        let fd = (up - down) / (2.0 * H);
        if !close(flat[k], fd, rel) {
            failures += 1;
        }
        worst = worst.max((flat[k] - fd).abs() / flat[k].abs().max(fd.abs()).max(1e-5));
    }
    (base.len(), failures, worst)
}

fn actor_output(net: &PolicyNet, batch: &ActorBatch, w: &Mat, g: &mut Graph) -> (Vec<crate::tape::Id>, crate::tape::Id) {
    let ids = net.bind_ids(g);
    let mut h: Vec<_> = batch.h0.iter().map(|m| g.constant(m.clone())).collect();
    let wi = g.constant(w.clone());
    let mut acc = None;
    for s in &batch.steps {
        let x = g.constant(s.obs.clone());
        let (mean, next) = net.step_tape(g, &ids, x, &h);
        h = next;
        let p = g.mul(mean, wi);
        let s = g.sum(p);
        acc = Some(match acc {
            Some(a) => g.add(a, s),
            None => s,
        });
    }
    (ids.all, acc.unwrap())
}

/// Actor-loss value and gradient for one of the loss targets.
pub fn actor_loss_grad(net: &PolicyNet, batch: &ActorBatch, w: LossWeights, target: Target) -> (f64, Vec<Mat>) {
    let mut g = Graph::new();
    let ids = net.bind_ids(&mut g);
    let l = actor_loss(&mut g, net, &ids, batch, w);
    let out = match target {
        Target::Rl => l.rl,
        Target::Supervised => l.sup,
        Target::Total => l.total,
        _ => panic!("not an actor loss"),
    };
    let grads = g.backward(out);
    (g.scalar(out), gradients_for(&grads, &ids.all, net))
}

/// Runs the oracle for one target over `points` random parameter points.
pub fn check(target: Target, points: usize, seed: u64, rel: f64) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = GradCheck {
        target,
        points,
        entries: 0,
        failures: 0,
        worst: 0.0,
    };
    for _ in 0..points {
        let (n, f, w) = match target {
            Target::Critic => {
                let critic = CriticNet::new(7, &[9, 6, 5], &mut rng);
                let x = random_mat(6, 7, 1.5, &mut rng);
                let r = random_mat(6, 1, 3.0, &mut rng);
                let eval = |c: &CriticNet| {
                    let mut g = Graph::new();
                    let ids = c.bind(&mut g);
                    let l = critic_loss(&mut g, c, &ids, &x, &r);
                    (g.backward(l), ids, g.scalar(l))
                };
                let (grads, ids, _) = eval(&critic);
                let analytic = gradients_for(&grads, &ids, &critic);
                sweep(&critic, |c| eval(c).2, &analytic, rel)
            }
            Target::ActorOutput => {
                let net = random_actor(&mut rng);
                let batch = random_batch(&net, &mut rng);
                let w = random_mat(3, 3, 1.0, &mut rng);
                let mut g = Graph::new();
                let (ids, o) = actor_output(&net, &batch, &w, &mut g);
                let analytic = gradients_for(&g.backward(o), &ids, &net);
                let eval = |n: &PolicyNet| {
                    let mut g = Graph::new();
                    let (_, o) = actor_output(n, &batch, &w, &mut g);
                    g.scalar(o)
                };
                sweep(&net, eval, &analytic, rel)
            }
            t => {
                let net = random_actor(&mut rng);
                let batch = random_batch(&net, &mut rng);
                let (_, analytic) = actor_loss_grad(&net, &batch, WEIGHTS, t);
                sweep(&net, |n| actor_loss_grad(n, &batch, WEIGHTS, t).0, &analytic, rel)
            }
        };
        out.entries += n;
        out.failures += f;
        out.worst = out.worst.max(w);
    }
    out
}

/// Largest |∇L_total − (ω_rl·∇L_rl + ω_sup·∇L_sup)| over random points,
/// each gradient from its own backward pass.
pub fn total_gradient_linearity(points: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let net = random_actor(&mut rng);
        let batch = random_batch(&net, &mut rng);
        let (_, total) = actor_loss_grad(&net, &batch, WEIGHTS, Target::Total);
        let (_, rl) = actor_loss_grad(&net, &batch, WEIGHTS, Target::Rl);
        let (_, sup) = actor_loss_grad(&net, &batch, WEIGHTS, Target::Supervised);
        for ((t, r), s) in total.iter().zip(&rl).zip(&sup) {
            for k in 0..t.len() {
                worst = worst.max((t.data[k] - (WEIGHTS.w_rl * r.data[k] + WEIGHTS.w_sup * s.data[k])).abs());
            }
        }
    }
    worst
}
