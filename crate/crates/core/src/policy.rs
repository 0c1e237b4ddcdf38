//! Base and Oracle controllers, the residual action map, observation
//! vectors, rewards and termination.

use serde::{Deserialize, Serialize};

use resloco_control::{tracking_errors, Measured, Reference, TickOutput, TrackingErrors, WbcGains, WholeBodyController};
use resloco_learn::loss::{squash, unsquash};
use resloco_sim::{RobotModel, Vec9, NJ};

use crate::randomization::NoisyState;

/// First-order low-pass filter `y ← y + a·(x − y)` over s′.
#[derive(Debug, Clone, PartialEq)]
pub struct LowPass {
    pub cutoff_hz: f64,
    y: Option<(Vec9, Vec9)>,
}

impl LowPass {
    pub fn new(cutoff_hz: f64) -> Self {
        Self { cutoff_hz, y: None }
    }

    /// Smoothing factor for a sample period `dt`.
    pub fn gain(&self, dt: f64) -> f64 {
        let rc = 1.0 / (2.0 * std::f64::consts::PI * self.cutoff_hz);
        dt / (dt + rc)
    }

    /// The first sample initializes the filter state.
    pub fn apply(&mut self, x: &NoisyState, dt: f64) -> NoisyState {
        let a = self.gain(dt);
        let (q, qd) = match &self.y {
            None => (x.q, x.qd),
            Some((q, qd)) => (q + (x.q - q) * a, qd + (x.qd - qd) * a),
        };
        self.y = Some((q, qd));
        NoisyState { q, qd }
    }

    pub fn reset(&mut self) {
        self.y = None;
    }
}

/// π_b: the whole-body controller on (optionally filtered) noisy state with
/// the nominal model.
#[derive(Debug, Clone)]
pub struct BasePolicy {
    pub model: RobotModel,
    pub wbc: WholeBodyController,
    pub filter: Option<LowPass>,
    /// Friction coefficient the controller assumes.
    pub friction: f64,
}

impl BasePolicy {
    pub fn new(model: RobotModel, gains: WbcGains, filter: Option<LowPass>, friction: f64) -> Self {
        Self {
            model,
            wbc: WholeBodyController::new(gains),
            filter,
            friction,
        }
    }

    /// Filters s′ (when enabled), then runs one controller tick. Returns the
    /// state estimate the controller used alongside its output.
    pub fn tick(&mut self, noisy: &NoisyState, reference: &Reference, dt: f64) -> (NoisyState, TickOutput) {
        let est = match &mut self.filter {
            Some(f) => f.apply(noisy, dt),
            None => noisy.clone(),
        };
        let out = self.wbc.tick(&Measured { model: &self.model, q: &est.q, qd: &est.qd }, reference, self.friction);
        (est, out)
    }

    /// Tracking errors the Base would report for `est`, without solving.
    pub fn errors(&self, est: &NoisyState, reference: &Reference) -> TrackingErrors {
        let kin = resloco_sim::Kinematics::new(&self.model, &est.q, &est.qd);
        tracking_errors(&self.model, &kin, reference, self.model.time_constant())
    }

    pub fn reset(&mut self) {
        self.wbc.reset();
        if let Some(f) = &mut self.filter {
            f.reset();
        }
    }
}

/// π_*: the whole-body controller on the true state with the randomized
/// model, divided by the motor efficiency it knows.
#[derive(Debug, Clone)]
pub struct OraclePolicy {
    pub wbc: WholeBodyController,
}

impl OraclePolicy {
    pub fn new(gains: WbcGains) -> Self {
        Self {
            wbc: WholeBodyController::new(gains),
        }
    }

    pub fn tick(
        &mut self,
        model: &RobotModel,
        q: &Vec9,
        qd: &Vec9,
        reference: &Reference,
        friction: f64,
        alpha: f64,
    ) -> ([f64; NJ], TickOutput) {
        let out = self.wbc.tick(&Measured { model, q, qd }, reference, friction);
        (oracle_command(&out.tau, alpha), out)
    }

    pub fn reset(&mut self) {
        self.wbc.reset();
    }
}

/// Command that delivers `tau` after efficiency decay `alpha`.
pub fn oracle_command(tau: &[f64; NJ], alpha: f64) -> [f64; NJ] {
    tau.map(|t| t / alpha)
}

/// Maps pre-squash actions `u` to torques `s·tanh(u)` and back.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionMap {
    pub scale: [f64; NJ],
}

impl ActionMap {
    /// Residual bound `fraction·τ_max` per joint.
    pub fn new(model: &RobotModel, fraction: f64) -> Self {
        Self {
            scale: model.torque_limits().map(|t| fraction * t),
        }
    }

    pub fn torque(&self, u: &[f64]) -> [f64; NJ] {
        let a = squash(u, &self.scale);
        std::array::from_fn(|i| a[i])
    }

    /// Pre-squash action whose torque is `tau` (clipped inside the bound).
    pub fn action(&self, tau: &[f64; NJ]) -> Vec<f64> {
        unsquash(tau, &self.scale)
    }
}

/// Normalization applied to observation entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObservationScales {
    pub joint_position: f64,
    pub joint_velocity: f64,
    pub base_velocity: f64,
    /// Torques are divided by the joint limit, then multiplied by this.
    pub torque: f64,
    pub dcm_error: f64,
    pub foot_error: f64,
}

impl Default for ObservationScales {
    fn default() -> Self {
        Self {
            joint_position: 1.0,
            joint_velocity: 0.1,
            base_velocity: 0.5,
            torque: 1.0,
            dcm_error: 10.0,
            foot_error: 10.0,
        }
    }
}

/// Actor observation length: joints (6 + 6), τ^b, τ_{t−1}, e_ξ (2), e_foot (3).
pub const OBS_DIM: usize = 4 * NJ + 5;
/// Critic observation length: o_t, base (v, ω), true joints, τ*, Oracle errors.
pub const PRIVILEGED_DIM: usize = OBS_DIM + 3 + 3 * NJ + 5;

/// Quantities the actor is allowed to see at one tick.
pub struct ObservationInputs<'a> {
    pub est: &'a NoisyState,
    pub tau_base: &'a [f64; NJ],
    pub tau_prev: &'a [f64; NJ],
    pub errors: &'a TrackingErrors,
}

/// Privileged quantities, seen only by the critic.
pub struct PrivilegedInputs<'a> {
    pub q: &'a Vec9,
    pub qd: &'a Vec9,
    pub tau_oracle: &'a [f64; NJ],
    pub errors: &'a TrackingErrors,
}

fn push_torque(out: &mut Vec<f64>, tau: &[f64; NJ], limits: &[f64; NJ], s: f64) {
    out.extend(tau.iter().zip(limits).map(|(t, l)| s * t / l));
}

fn push_errors(out: &mut Vec<f64>, e: &TrackingErrors, s: &ObservationScales) {
    out.extend(e.e_xi.iter().map(|v| s.dcm_error * v));
    out.extend(e.e_foot.iter().map(|v| s.foot_error * v));
}

/// o_t = [q′, q̇′, τ^b, τ_{t−1}, e′_ξ, e′_foot].
pub fn build_observation(inp: &ObservationInputs, limits: &[f64; NJ], s: &ObservationScales) -> Vec<f64> {
    let mut o = Vec::with_capacity(OBS_DIM);
    o.extend((3..9).map(|i| s.joint_position * inp.est.q[i]));
    o.extend((3..9).map(|i| s.joint_velocity * inp.est.qd[i]));
    push_torque(&mut o, inp.tau_base, limits, s.torque);
    push_torque(&mut o, inp.tau_prev, limits, s.torque);
    push_errors(&mut o, inp.errors, s);
    o
}

/// o^privi = [o_t, v, ω, q, q̇, τ*, e_ξ, e_foot].
pub fn build_privileged(obs: &[f64], p: &PrivilegedInputs, limits: &[f64; NJ], s: &ObservationScales) -> Vec<f64> {
    let mut o = Vec::with_capacity(PRIVILEGED_DIM);
    o.extend_from_slice(obs);
    o.extend((0..3).map(|i| s.base_velocity * p.qd[i]));
    o.extend((3..9).map(|i| s.joint_position * p.q[i]));
    o.extend((3..9).map(|i| s.joint_velocity * p.qd[i]));
    push_torque(&mut o, p.tau_oracle, limits, s.torque);
    push_errors(&mut o, p.errors, s);
    o
}

/// `(w, λ)` of a `w·exp(−λ·d)` term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub w: f64,
    pub lambda: f64,
}

impl Term {
    pub fn eval(&self, d: f64) -> f64 {
        self.w * (-self.lambda * d).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardParams {
    pub dcm: Term,
    pub foot: Term,
    pub torso: Term,
    pub torque: Term,
    pub smooth: Term,
    pub termination_penalty: f64,
    /// ‖e_ξ‖ above this ends the episode [m].
    pub termination_threshold: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            dcm: Term { w: 20.0, lambda: 10.0 },
            foot: Term { w: 5.0, lambda: 10.0 },
            torso: Term { w: 1.0, lambda: 10.0 },
            torque: Term { w: 5.0, lambda: 0.01 },
            smooth: Term { w: 0.01, lambda: 0.01 },
            termination_penalty: -20.0,
            termination_threshold: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub dcm: f64,
    pub foot: f64,
    pub torso: f64,
    pub torque: f64,
    pub smooth: f64,
    pub termination: f64,
}

impl RewardBreakdown {
    pub fn total(&self) -> f64 {
        self.dcm + self.foot + self.torso + self.torque + self.smooth + self.termination
    }

    /// Total without the torque-tracking term (the evaluation return).
    pub fn without_torque(&self) -> f64 {
        self.dcm + self.foot + self.torso + self.smooth + self.termination
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Tick reward from ground-truth errors, the applied command `tau`, the
/// previous command and the Oracle command.
pub fn compute_reward(
    errors: &TrackingErrors,
    tau: &[f64; NJ],
    tau_prev: &[f64; NJ],
    tau_oracle: &[f64; NJ],
    p: &RewardParams,
    terminated: bool,
) -> RewardBreakdown {
    RewardBreakdown {
        dcm: p.dcm.eval(errors.dcm_norm()),
        foot: p.foot.eval(errors.foot_norm()),
        torso: p.torso.eval(errors.e_rot.abs()),
        torque: p.torque.eval(dist(tau, tau_oracle)),
        smooth: p.smooth.eval(dist(tau, tau_prev)),
        termination: if terminated { p.termination_penalty } else { 0.0 },
    }
}

/// True once the DCM error exceeds the threshold (or is not finite).
pub fn check_termination(e_xi: [f64; 2], threshold: f64) -> bool {
    let n = e_xi[0].hypot(e_xi[1]);
    !(n <= threshold)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_gain_matches_rc_formula() {
        let f = LowPass::new(20.0);
        let rc = 1.0 / (2.0 * std::f64::consts::PI * 20.0);
        assert!((f.gain(0.005) - 0.005 / (0.005 + rc)).abs() < 1e-15);
    }

    #[test]
    fn filter_converges_to_constant_input() {
        let mut f = LowPass::new(20.0);
        let x0 = NoisyState { q: Vec9::zeros(), qd: Vec9::zeros() };
        let x1 = NoisyState { q: Vec9::repeat(1.0), qd: Vec9::repeat(-1.0) };
        f.apply(&x0, 0.005);
        let mut y = f.apply(&x1, 0.005);
        for _ in 0..200 {
            y = f.apply(&x1, 0.005);
        }
        assert!((y.q[4] - 1.0).abs() < 1e-12 && (y.qd[4] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn termination_threshold() {
        assert!(!check_termination([0.19, 0.0], 0.2));
        assert!(check_termination([0.21, 0.0], 0.2));
        assert!(!check_termination([0.0, 0.0], 0.2));
        assert!(check_termination([f64::NAN, 0.0], 0.2));
    }

    #[test]
    fn oracle_command_undoes_efficiency() {
        let cmd = oracle_command(&[8.0; NJ], 0.8);
        assert!(cmd.iter().all(|c| (c - 10.0).abs() < 1e-12));
        assert!(cmd.iter().all(|c| (0.8 * c - 8.0).abs() < 1e-12));
    }

    #[test]
    fn dimensions() {
        assert_eq!(OBS_DIM, 29);
        assert_eq!(PRIVILEGED_DIM, 55);
    }
}
