use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resloco_learn::gradcheck::{actor_loss_grad, Target, WEIGHTS};
use resloco_learn::loss::{log_prob, sample_gaussian};
use resloco_learn::{
    ActorBatch, ActorStep, CriticNet, Graph, Learner, Mat, Module, PolicyNet, TrainConfig, Trajectory, Transition,
};

fn bandit_transition(learner: &Learner, rng: &mut impl Rng) -> Transition {
    let net = &learner.actor;
    let h = net.initial_state(1);
    let (mean, _) = net.step(&Mat::row_vector(&[1.0]), &h);
    let std = net.std();
    let u = sample_gaussian(&mean.data, &std, rng);
    // Arm 1 (u > 0) pays 1, arm 0 pays 0.
    let reward = if u[0] > 0.0 { 1.0 } else { 0.0 };
    Transition {
        obs: vec![1.0],
        privileged: vec![1.0],
        hidden: h.iter().map(|m| m.data.clone()).collect(),
        tau_base: vec![0.0],
        tau_oracle: vec![0.0],
        tau_residual: vec![0.0],
        log_prob: log_prob(&u, &mean.data, &std),
        u,
        sup_target: vec![0.0],
        reward,
        terminal: true,
        value: learner.critic.value(&[1.0]),
    }
}

#[test]
fn ppo_solves_two_armed_bandit() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let actor = PolicyNet::new(1, 1, 4, 1, 0.0, &mut rng);
    let critic = CriticNet::new(1, &[8], &mut rng);
    let cfg = TrainConfig {
        lr: 1e-2,
        w_sup: 0.0,
        chunk_len: 1,
        minibatch: 64,
        ..TrainConfig::default()
    };
    let mut learner = Learner::new(actor, critic, cfg.lr);
    for _ in 0..200 {
        let batch: Vec<Trajectory> = (0..64)
            .map(|_| Trajectory {
                transitions: vec![bandit_transition(&learner, &mut rng)],
                last_value: 0.0,
            })
            .collect();
        learner.update(&batch, &cfg, &mut rng);
    }
    let (mean, _) = learner.actor.step(&Mat::row_vector(&[1.0]), &learner.actor.initial_state(1));
    let std = learner.actor.std()[0];
    // P(u > 0) = Φ(μ/σ); Φ(1.645) = 0.95.
    assert!(mean.data[0] / std > 1.645, "mean {} std {std}", mean.data[0]);
}

fn fixed_batch(net: &PolicyNet, rng: &mut impl Rng) -> ActorBatch {
    let b = 4;
    let rand = |r: usize, c: usize, rng: &mut ChaCha8Rng| {
        Mat::from_vec(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect())
    };
    let mut local = ChaCha8Rng::seed_from_u64(rng.random());
    let steps = (0..8)
        .map(|_| ActorStep {
            obs: rand(b, 5, &mut local),
            u: rand(b, 3, &mut local),
            old_log_prob: Mat::filled(b, 1, -3.0),
            advantages: rand(b, 1, &mut local),
            target: rand(b, 3, &mut local),
            mask: Mat::filled(b, 1, 1.0),
        })
        .collect();
    ActorBatch {
        h0: net.initial_state(b),
        steps,
    }
}

#[test]
fn imitation_only_overfits_one_batch_monotonically() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut net = PolicyNet::new(5, 3, 16, 2, -1.0, &mut rng);
    let batch = fixed_batch(&net, &mut rng);
    let mut adam = resloco_learn::Adam::new(&net, 1e-3);
    let w = resloco_learn::LossWeights {
        w_rl: 0.0,
        ..WEIGHTS
    };
    let mut last = f64::INFINITY;
    for _ in 0..50 {
        let (l, g) = actor_loss_grad(&net, &batch, w, Target::Supervised);
        assert!(l < last, "L_sup rose from {last} to {l}");
        last = l;
        adam.step(&mut net, &g);
    }
}

#[test]
fn zero_weights_leave_actor_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let actor = PolicyNet::new(1, 1, 4, 1, 0.0, &mut rng);
    let critic = CriticNet::new(1, &[8], &mut rng);
    let cfg = TrainConfig {
        w_rl: 0.0,
        w_sup: 0.0,
        entropy_coef: 0.0,
        lr: 0.0,
        chunk_len: 1,
        ..TrainConfig::default()
    };
    let mut learner = Learner::new(actor, critic, 1e-2);
    learner.critic_opt.lr = 0.0;
    let before = (learner.actor.flat(), learner.critic.flat());
    let batch: Vec<Trajectory> = (0..16)
        .map(|_| Trajectory {
            transitions: vec![bandit_transition(&learner, &mut rng)],
            last_value: 0.0,
        })
        .collect();
    learner.update(&batch, &cfg, &mut rng);
    assert_eq!(learner.actor.flat(), before.0);
    assert_eq!(learner.critic.flat(), before.1);
}

#[test]
fn recurrence_is_chunking_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let net = PolicyNet::new(5, 3, 8, 2, -1.0, &mut rng);
    let mut head = net.clone();
    head.head.w = Mat::from_vec(8, 3, (0..24).map(|k| (k as f64 * 0.3).sin()).collect());
    let xs: Vec<Mat> = (0..10)
        .map(|k| Mat::from_vec(1, 5, (0..5).map(|j| ((k * 5 + j) as f64 * 0.7).cos()).collect()))
        .collect();
    // Step by step with carried state.
    let mut h = head.initial_state(1);
    let mut stepwise = Vec::new();
    for x in &xs {
        let (m, hn) = head.step(x, &h);
        stepwise.push(m);
        h = hn;
    }
    // Two tape chunks, the second seeded with the state after the first.
    let mut g = Graph::new();
    let ids = head.bind_ids(&mut g);
    let mut hid: Vec<_> = head.initial_state(1).into_iter().map(|m| g.constant(m)).collect();
    let mut h_mid = None;
    for (k, x) in xs.iter().enumerate() {
        if k == 4 {
            let vals: Vec<Mat> = hid.iter().map(|i| g.value(*i).clone()).collect();
            h_mid = Some(vals.clone());
            hid = vals.into_iter().map(|m| g.constant(m)).collect();
        }
        let xi = g.constant(x.clone());
        let (m, hn) = head.step_tape(&mut g, &ids, xi, &hid);
        hid = hn;
        assert!(g.value(m).zip_map(&stepwise[k], |a, b| (a - b).abs()).data.iter().all(|d| *d < 1e-14));
    }
    assert!(h_mid.is_some());
}

#[test]
fn supervised_loss_ignores_sample_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let net = PolicyNet::new(5, 3, 8, 2, -1.0, &mut rng);
    let batch = fixed_batch(&net, &mut rng);
    let (l, _) = actor_loss_grad(&net, &batch, WEIGHTS, Target::Supervised);
    // Reverse the rows (sequences) of every step.
    let flip = |m: &Mat| {
        let rows: Vec<&[f64]> = (0..m.rows).rev().map(|r| m.row(r)).collect();
        Mat::from_rows(&rows)
    };
    let mut swapped = batch.clone();
    swapped.h0 = batch.h0.iter().map(flip).collect();
    for s in swapped.steps.iter_mut() {
        *s = ActorStep {
            obs: flip(&s.obs),
            u: flip(&s.u),
            old_log_prob: flip(&s.old_log_prob),
            advantages: flip(&s.advantages),
            target: flip(&s.target),
            mask: flip(&s.mask),
        };
    }
    let (l2, _) = actor_loss_grad(&net, &swapped, WEIGHTS, Target::Supervised);
    assert!((l - l2).abs() < 1e-12);
}

#[test]
fn update_is_deterministic() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let actor = PolicyNet::new(1, 1, 4, 1, 0.0, &mut rng);
        let critic = CriticNet::new(1, &[8], &mut rng);
        let cfg = TrainConfig {
            chunk_len: 1,
            minibatch: 8,
            ..TrainConfig::default()
        };
        let mut learner = Learner::new(actor, critic, cfg.lr);
        for _ in 0..5 {
            let batch: Vec<Trajectory> = (0..16)
                .map(|_| Trajectory {
                    transitions: vec![bandit_transition(&learner, &mut rng)],
                    last_value: 0.0,
                })
                .collect();
            learner.update(&batch, &cfg, &mut rng);
        }
        learner.actor.flat().iter().chain(learner.critic.flat().iter()).map(|v| v.to_bits()).collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}
