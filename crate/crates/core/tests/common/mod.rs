//! Statistical checks of the randomization draws, shared by the
//! randomization tests and the acceptance report.

#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use resloco::randomization::{perturb_state, randomize_model, randomize_terrain, sample_actuation, RandomizationConfig};
use resloco_sim::{RobotModel, Vec9};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn moments(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Mean and variance of N(0, σ²) samples within 3 standard errors.
pub fn normal_check(name: &str, x: &[f64], sigma: f64) -> Check {
    let n = x.len() as f64;
    let (m, v) = moments(x);
    let tol_m = 3.0 * sigma / n.sqrt();
    let tol_v = 3.0 * sigma * sigma * (2.0 / (n - 1.0)).sqrt();
    Check {
        name: name.into(),
        pass: m.abs() <= tol_m && (v - sigma * sigma).abs() <= tol_v,
        detail: format!("mean {m:.2e} (±{tol_m:.1e}), std {:.5} vs {sigma}", v.sqrt()),
    }
}

/// Support, mean and variance of U(lo, hi) samples within 3 standard
/// errors (fourth central moment w⁴/80).
pub fn uniform_check(name: &str, x: &[f64], lo: f64, hi: f64) -> Check {
    let n = x.len() as f64;
    let w = hi - lo;
    let (m, v) = moments(x);
    let tol_m = 3.0 * w / (12.0 * n).sqrt();
    let tol_v = 3.0 * ((w.powi(4) / 80.0 - w.powi(4) / 144.0) / n).sqrt();
    let inside = x.iter().all(|v| (lo..=hi).contains(v));
    Check {
        name: name.into(),
        pass: inside && (m - 0.5 * (lo + hi)).abs() <= tol_m && (v - w * w / 12.0).abs() <= tol_v,
        detail: format!("mean {m:.5} vs {:.5} (±{tol_m:.1e}), var {v:.3e} vs {:.3e}, in support {inside}", 0.5 * (lo + hi), w * w / 12.0),
    }
}

fn stream(seed: u64, k: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(k);
    r
}

/// Every randomized quantity at β = 1 from `n` draws.
pub fn table_checks(n: usize, seed: u64) -> Vec<Check> {
    let cfg = RandomizationConfig::default().at_beta(1.0);
    let mut checks = Vec::new();

    let mut rng = stream(seed, 0);
    let (q, qd) = (Vec9::repeat(0.3), Vec9::repeat(-0.2));
    let mut noise = vec![Vec::with_capacity(n); 18];
    for _ in 0..n {
        let s = perturb_state(&q, &qd, &cfg, &mut rng);
        for i in 0..9 {
            noise[i].push(s.q[i] - q[i]);
            noise[9 + i].push(s.qd[i] - qd[i]);
        }
    }
    let q_rows = [
        ("torso position x", &cfg.torso_position),
        ("torso position z", &cfg.torso_position),
        ("torso rotation", &cfg.torso_rotation),
    ];
    let qd_rows = [
        ("linear velocity x", &cfg.linear_velocity),
        ("linear velocity z", &cfg.linear_velocity),
        ("angular velocity", &cfg.angular_velocity),
    ];
    for (i, (name, row)) in q_rows.iter().enumerate() {
        checks.push(normal_check(name, &noise[i], cfg.sigma(row)));
    }
    for j in 3..9 {
        checks.push(normal_check(&format!("joint position {}", j - 3), &noise[j], cfg.sigma(&cfg.joint_position)));
    }
    for (i, (name, row)) in qd_rows.iter().enumerate() {
        checks.push(normal_check(name, &noise[9 + i], cfg.sigma(row)));
    }
    for j in 3..9 {
        checks.push(normal_check(&format!("joint velocity {}", j - 3), &noise[9 + j], cfg.sigma(&cfg.joint_velocity)));
    }

    let model = RobotModel::nominal();
    let mut rng = stream(seed, 1);
    let (nl, nj) = (model.links.len(), model.joints.len());
    let (mut mass, mut fric, mut damp) = (vec![Vec::new(); nl], vec![Vec::new(); nj], vec![Vec::new(); nj]);
    for _ in 0..n {
        let (m, d) = randomize_model(&model, &cfg, &mut rng);
        for l in 0..nl {
            mass[l].push(d.mass_scale[l]);
            // The model itself carries the scaled mass and inertia.
            assert!((m.links[l].mass - d.mass_scale[l] * model.links[l].mass).abs() < 1e-12);
        }
        for j in 0..nj {
            fric[j].push(d.friction_scale[j]);
            damp[j].push(d.damping_scale[j]);
        }
    }
    let (ml, mh) = cfg.bounds(&cfg.body_mass);
    let (fl, fh) = cfg.bounds(&cfg.joint_friction);
    let (dl, dh) = cfg.bounds(&cfg.joint_damping);
    for (l, x) in mass.iter().enumerate() {
        checks.push(uniform_check(&format!("body mass link {l}"), x, ml, mh));
    }
    for (j, x) in fric.iter().enumerate() {
        checks.push(uniform_check(&format!("joint friction {j}"), x, fl, fh));
    }
    for (j, x) in damp.iter().enumerate() {
        checks.push(uniform_check(&format!("joint damping {j}"), x, dl, dh));
    }

    let mut rng = stream(seed, 2);
    let (mut alpha, mut delay) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for _ in 0..n {
        let d = sample_actuation(&cfg, &mut rng);
        alpha.push(d.alpha);
        delay.push(d.delay_ms);
    }
    let (al, ah) = cfg.bounds(&cfg.motor_efficiency);
    checks.push(uniform_check("motor efficiency", &alpha, al, ah));
    let (dl, dh) = cfg.delay_bounds();
    checks.push(uniform_check("motor delay [ms]", &delay, dl, dh));

    let mut rng = stream(seed, 3);
    let friction: Vec<f64> = (0..n).map(|_| randomize_terrain(&cfg, &mut rng).friction).collect();
    let (fl, fh) = cfg.friction_bounds();
    checks.push(uniform_check("floor friction", &friction, fl, fh));
    checks
}

/// β = 0: noise and scales vanish exactly; delay and floor friction keep
/// their configured ranges.
pub fn degeneracy_checks(n: usize, seed: u64) -> Vec<Check> {
    let cfg = RandomizationConfig::default().at_beta(0.0);
    let model = RobotModel::nominal();
    let mut rng = stream(seed, 4);
    let q = Vec9::from_fn(|i, _| 0.1 * i as f64);
    let qd = Vec9::from_fn(|i, _| -0.05 * i as f64);
    let (mut noise_exact, mut model_exact, mut alpha_exact, mut delay_ok, mut friction_ok) = (true, true, true, true, true);
    for _ in 0..n {
        let s = perturb_state(&q, &qd, &cfg, &mut rng);
        noise_exact &= s.q == q && s.qd == qd;
        model_exact &= randomize_model(&model, &cfg, &mut rng).0 == model;
        let a = sample_actuation(&cfg, &mut rng);
        alpha_exact &= a.alpha == 1.0;
        delay_ok &= (2.0..=4.0).contains(&a.delay_ms);
        friction_ok &= (0.5..=1.1).contains(&randomize_terrain(&cfg, &mut rng).friction);
    }
    [
        ("beta 0: state noise exactly zero", noise_exact),
        ("beta 0: model unchanged", model_exact),
        ("beta 0: efficiency exactly 1", alpha_exact),
        ("beta 0: delay stays in [2, 4] ms", delay_ok),
        ("beta 0: floor friction stays in [0.5, 1.1]", friction_ok),
    ]
    .into_iter()
    .map(|(name, pass)| Check {
        name: name.into(),
        pass,
        detail: String::new(),
    })
    .collect()
}
