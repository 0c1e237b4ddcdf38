//! Domain randomization: sensor noise, model perturbation, actuation
//! delay/efficiency and terrain.
//!
//! Every sampler consumes a fixed number of variates regardless of β or
//! the enable flags, so two configurations that share a seed see coupled
//! draws (common random numbers). A quantity drawn as `U(lo, hi)` is
//! `lo + (hi − lo)·u` with `u ~ U(0, 1)`, and Gaussian noise is `σ·z`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use resloco_sim::{ActuationBuffer, RobotModel, Terrain, Vec9, NJ};

use crate::CoreError;

/// Additive Gaussian noise with standard deviation `sigma·β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Noise {
    pub enabled: bool,
    pub sigma: f64,
}

/// Multiplicative scale `U(1 − below·β, 1 + above·β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scale {
    pub enabled: bool,
    pub below: f64,
    pub above: f64,
}

/// β-independent `U(low, high)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub enabled: bool,
    pub low: f64,
    pub high: f64,
}

const fn noise(sigma: f64) -> Noise {
    Noise { enabled: true, sigma }
}

const fn scale(below: f64, above: f64) -> Scale {
    Scale {
        enabled: true,
        below,
        above,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomizationConfig {
    /// Randomization level in [0, 1].
    pub beta: f64,
    pub torso_position: Noise,
    pub torso_rotation: Noise,
    pub linear_velocity: Noise,
    pub angular_velocity: Noise,
    pub joint_position: Noise,
    pub joint_velocity: Noise,
    pub body_mass: Scale,
    pub joint_friction: Scale,
    pub joint_damping: Scale,
    /// α_decay ~ U(1 − below·β, 1 + above·β).
    pub motor_efficiency: Scale,
    /// Total command-to-motor delay [ms]. Disabled means zero delay.
    pub motor_delay_ms: Range,
    /// Ground friction coefficient. Disabled means `nominal_friction`.
    pub floor_friction: Range,
    pub nominal_friction: f64,
    /// Peak terrain height deviation at β = 1 [m].
    pub terrain_amplitude: f64,
    /// Spacing of the terrain breakpoints [m].
    pub terrain_spacing: f64,
    /// Half-width of the flat pad around the start position [m].
    pub terrain_start_pad: f64,
    /// Terrain extends over [−extent, extent] [m].
    pub terrain_extent: f64,
    pub seed: u64,
}

impl Default for RandomizationConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            torso_position: noise(0.05),
            torso_rotation: noise(0.05),
            linear_velocity: noise(0.1),
            angular_velocity: noise(0.1),
            joint_position: noise(0.05),
            joint_velocity: noise(0.1),
            body_mass: scale(0.2, 0.5),
            joint_friction: scale(0.5, 0.1),
            joint_damping: scale(0.5, 0.2),
            motor_efficiency: scale(0.2, 0.0),
            motor_delay_ms: Range {
                enabled: true,
                low: 2.0,
                high: 4.0,
            },
            floor_friction: Range {
                enabled: true,
                low: 0.5,
                high: 1.1,
            },
            nominal_friction: 1.0,
            terrain_amplitude: 0.01,
            terrain_spacing: 0.25,
            terrain_start_pad: 0.3,
            terrain_extent: 6.0,
            seed: 0,
        }
    }
}

impl RandomizationConfig {
    /// Same distributions at another level.
    pub fn at_beta(&self, beta: f64) -> Self {
        Self { beta, ..self.clone() }
    }

    /// Standard deviation of a noise row at the configured level.
    pub fn sigma(&self, n: &Noise) -> f64 {
        if n.enabled {
            n.sigma * self.beta
        } else {
            0.0
        }
    }

    /// Bounds of a scale row at the configured level.
    pub fn bounds(&self, s: &Scale) -> (f64, f64) {
        if s.enabled {
            (1.0 - s.below * self.beta, 1.0 + s.above * self.beta)
        } else {
            (1.0, 1.0)
        }
    }

    /// Bounds of the motor delay [ms].
    pub fn delay_bounds(&self) -> (f64, f64) {
        let r = &self.motor_delay_ms;
        if r.enabled {
            (r.low, r.high)
        } else {
            (0.0, 0.0)
        }
    }

    pub fn friction_bounds(&self) -> (f64, f64) {
        let r = &self.floor_friction;
        if r.enabled {
            (r.low, r.high)
        } else {
            (self.nominal_friction, self.nominal_friction)
        }
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        let bad = |msg: String| Err(CoreError::Config(msg));
        if !(0.0..=1.0).contains(&self.beta) {
            return bad(format!("beta {} outside [0, 1]", self.beta));
        }
        let noises = [
            ("torso_position", self.torso_position),
            ("torso_rotation", self.torso_rotation),
            ("linear_velocity", self.linear_velocity),
            ("angular_velocity", self.angular_velocity),
            ("joint_position", self.joint_position),
            ("joint_velocity", self.joint_velocity),
        ];
        for (name, n) in noises {
            if !(n.sigma >= 0.0) {
                return bad(format!("{name}: sigma must be non-negative"));
            }
        }
        let scales = [
            ("body_mass", self.body_mass),
            ("joint_friction", self.joint_friction),
            ("joint_damping", self.joint_damping),
            ("motor_efficiency", self.motor_efficiency),
        ];
        for (name, s) in scales {
            if !(s.below >= 0.0 && s.above >= 0.0 && s.below < 1.0) {
                return bad(format!("{name}: need 0 <= below < 1 and above >= 0"));
            }
        }
        let (dl, dh) = (self.motor_delay_ms.low, self.motor_delay_ms.high);
        if !(0.0 <= dl && dl <= dh && dh < 5.0) {
            return bad("motor_delay_ms: need 0 <= low <= high < 5".into());
        }
        let (fl, fh) = (self.floor_friction.low, self.floor_friction.high);
        if !(0.0 < fl && fl <= fh) || !(self.nominal_friction > 0.0) {
            return bad("floor friction bounds must be positive and ordered".into());
        }
        if !(self.terrain_amplitude >= 0.0 && self.terrain_spacing > 0.0 && self.terrain_extent > self.terrain_start_pad) {
            return bad("terrain: need amplitude >= 0, spacing > 0, extent > start pad".into());
        }
        Ok(())
    }
}

fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    let u: f64 = rng.random();
    lo + (hi - lo) * u
}

fn gaussian(rng: &mut impl Rng, sigma: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    sigma * z
}

/// Scales drawn for one randomized model; kept for the Oracle and logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDraw {
    /// Per link, applied to mass and rotational inertia.
    pub mass_scale: Vec<f64>,
    pub friction_scale: Vec<f64>,
    pub damping_scale: Vec<f64>,
}

/// M′ ← DR(M). The nominal model is left untouched.
pub fn randomize_model(model: &RobotModel, cfg: &RandomizationConfig, rng: &mut impl Rng) -> (RobotModel, ModelDraw) {
    let (ml, mh) = cfg.bounds(&cfg.body_mass);
    let (fl, fh) = cfg.bounds(&cfg.joint_friction);
    let (dl, dh) = cfg.bounds(&cfg.joint_damping);
    let mass_scale: Vec<f64> = model.links.iter().map(|_| uniform(rng, ml, mh)).collect();
    let friction_scale: Vec<f64> = model.joints.iter().map(|_| uniform(rng, fl, fh)).collect();
    let damping_scale: Vec<f64> = model.joints.iter().map(|_| uniform(rng, dl, dh)).collect();
    let mut out = model.clone();
    for (link, s) in out.links.iter_mut().zip(&mass_scale) {
        link.mass *= s;
        link.inertia *= s;
    }
    for ((joint, f), d) in out.joints.iter_mut().zip(&friction_scale).zip(&damping_scale) {
        joint.friction *= f;
        joint.damping *= d;
    }
    let draw = ModelDraw {
        mass_scale,
        friction_scale,
        damping_scale,
    };
    (out, draw)
}

/// Noisy generalized coordinates and velocities s′.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyState {
    pub q: Vec9,
    pub qd: Vec9,
}

/// s′ = s + noise. Base pose `(x, z)` and pitch, base velocities and
/// joint positions/velocities each get their own noise range.
pub fn perturb_state(q: &Vec9, qd: &Vec9, cfg: &RandomizationConfig, rng: &mut impl Rng) -> NoisyState {
    let pos = cfg.sigma(&cfg.torso_position);
    let rot = cfg.sigma(&cfg.torso_rotation);
    let lin = cfg.sigma(&cfg.linear_velocity);
    let ang = cfg.sigma(&cfg.angular_velocity);
    let jp = cfg.sigma(&cfg.joint_position);
    let jv = cfg.sigma(&cfg.joint_velocity);
    let q_sigma = [pos, pos, rot, jp, jp, jp, jp, jp, jp];
    let qd_sigma = [lin, lin, ang, jv, jv, jv, jv, jv, jv];
    let mut nq = *q;
    let mut nqd = *qd;
    for i in 0..9 {
        nq[i] += gaussian(rng, q_sigma[i]);
    }
    for i in 0..9 {
        nqd[i] += gaussian(rng, qd_sigma[i]);
    }
    NoisyState { q: nq, qd: nqd }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActuationDraw {
    pub delay_ms: f64,
    pub alpha: f64,
}

impl ActuationDraw {
    /// Ideal motors: no delay, full efficiency.
    pub const IDEAL: Self = Self {
        delay_ms: 0.0,
        alpha: 1.0,
    };

    pub fn delay(&self) -> f64 {
        self.delay_ms * 1e-3
    }
}

pub fn sample_actuation(cfg: &RandomizationConfig, rng: &mut impl Rng) -> ActuationDraw {
    let (dl, dh) = cfg.delay_bounds();
    let (al, ah) = cfg.bounds(&cfg.motor_efficiency);
    let delay_ms = uniform(rng, dl, dh);
    let alpha = uniform(rng, al, ah);
    ActuationDraw { delay_ms, alpha }
}

/// Queues `α·τ` to reach the motors `Δt_delay` after `now`. Until then the
/// previously queued torque keeps acting. Release times never run
/// backwards, so a short delay cannot overtake an older command.
pub fn apply_actuation(tau: &[f64; NJ], draw: &ActuationDraw, buffer: &mut ActuationBuffer, now: f64) {
    let mut release = now + draw.delay();
    if let Some((last, _)) = buffer.pending().last() {
        release = release.max(*last);
    }
    let scaled = tau.map(|t| draw.alpha * t);
    if release <= now {
        buffer.applied = scaled;
    } else {
        buffer.command(release, scaled);
    }
}

/// Random piecewise-linear ground with a flat start pad.
pub fn randomize_terrain(cfg: &RandomizationConfig, rng: &mut impl Rng) -> Terrain {
    let (fl, fh) = cfg.friction_bounds();
    let friction = uniform(rng, fl, fh);
    let amplitude = cfg.terrain_amplitude * cfg.beta;
    let n = (2.0 * cfg.terrain_extent / cfg.terrain_spacing).round() as usize;
    let mut profile = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let x = -cfg.terrain_extent + i as f64 * cfg.terrain_spacing;
        let h = uniform(rng, -amplitude, amplitude);
        let h = if x.abs() <= cfg.terrain_start_pad { 0.0 } else { h };
        profile.push([x, h]);
    }
    if amplitude == 0.0 {
        return Terrain::flat(friction);
    }
    Terrain { profile, friction }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_config_is_valid() {
        RandomizationConfig::default().validate().unwrap();
        assert!(RandomizationConfig::default().at_beta(1.5).validate().is_err());
    }

    #[test]
    fn zero_beta_keeps_model() {
        let cfg = RandomizationConfig::default().at_beta(0.0);
        let m = RobotModel::nominal();
        let (m2, draw) = randomize_model(&m, &cfg, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(m, m2);
        assert!(draw.mass_scale.iter().all(|s| *s == 1.0));
    }

    #[test]
    fn efficiency_scales_command() {
        let mut buf = ActuationBuffer::default();
        apply_actuation(&[10.0; NJ], &ActuationDraw { delay_ms: 0.0, alpha: 0.9 }, &mut buf, 0.0);
        assert_eq!(buf.applied, [9.0; NJ]);
    }

    #[test]
    fn zero_amplitude_gives_flat_ground() {
        let cfg = RandomizationConfig {
            terrain_amplitude: 0.0,
            ..Default::default()
        };
        let t = randomize_terrain(&cfg, &mut ChaCha8Rng::seed_from_u64(2));
        assert!(t.profile.is_empty());
        assert!((0.5..=1.1).contains(&t.friction));
    }
}
