//! Closed-form DCM reference from a backward pass over VRP phases.
//!
//! Within a phase of length T the VRP moves linearly from `v0` to `vT`.
//! The solution of `ξ̇ = (ξ − v)/b` ending at `ξ(T) = ξT` is
//!
//! ```text
//! ξ(t) = v(t) + b·s + e^((t−T)/b)·(ξT − vT − b·s),   s = (vT − v0)/T
//! ```
//!
//! which is affine in `(v0, vT, ξT)` with coefficients α, β, γ.

use nalgebra::Vector2;

use crate::gait::GaitParams;
use crate::vrp::VrpPlan;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcmPhase {
    pub start: f64,
    pub duration: f64,
    pub v0: Vector2<f64>,
    pub v_end: Vector2<f64>,
    /// Terminal DCM ξ_ψ(T).
    pub xi_end: Vector2<f64>,
}

impl DcmPhase {
    /// `(ξ, v)` at local time `t ∈ [0, T]`.
    fn eval(&self, t: f64, b: f64) -> (Vector2<f64>, Vector2<f64>) {
        let big_t = self.duration;
        let slope = (self.v_end - self.v0) / big_t;
        let v = self.v0 + slope * t;
        let decay = ((t - big_t) / b).exp();
        let xi = v + slope * b + (self.xi_end - self.v_end - slope * b) * decay;
        (xi, v)
    }

    /// Coefficients `(α, β, γ)` with `ξ(t) = α·v0 + β·vT + γ·ξT`.
    pub fn coefficients(&self, t: f64, b: f64) -> (f64, f64, f64) {
        let r = b / self.duration;
        let tau = t / self.duration;
        let gamma = ((t - self.duration) / b).exp();
        (1.0 - tau - r + r * gamma, tau + r - gamma * (1.0 + r), gamma)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DcmTrajectory {
    pub phases: Vec<DcmPhase>,
    pub b: f64,
}

/// Reference values at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcmSample {
    pub xi: Vector2<f64>,
    pub xi_dot: Vector2<f64>,
    pub vrp: Vector2<f64>,
}

/// Chains the closed form backward from `ξ(T_final) = v_n`.
pub fn dcm_backward_pass(plan: &VrpPlan, gait: &GaitParams) -> DcmTrajectory {
    let b = gait.b();
    let n = plan.num_phases();
    let mut phases = Vec::with_capacity(n);
    let mut start = 0.0;
    for i in 0..n {
        phases.push(DcmPhase {
            start,
            duration: plan.durations[i],
            v0: plan.waypoints[i],
            v_end: plan.waypoints[i + 1],
            xi_end: Vector2::zeros(),
        });
        start += plan.durations[i];
    }
    let mut xi = *plan.waypoints.last().unwrap();
    for p in phases.iter_mut().rev() {
        p.xi_end = xi;
        xi = p.eval(0.0, b).0;
    }
    DcmTrajectory { phases, b }
}

impl DcmTrajectory {
    pub fn horizon(&self) -> f64 {
        self.phases.last().map_or(0.0, |p| p.start + p.duration)
    }

    /// Moves the first waypoint so that `ξ(0) = xi0` exactly; the rest of
    /// the trajectory is unaffected.
    pub fn anchor(&mut self, xi0: Vector2<f64>) {
        let b = self.b;
        let p = &mut self.phases[0];
        let (alpha, beta, gamma) = p.coefficients(0.0, b);
        p.v0 = (xi0 - p.v_end * beta - p.xi_end * gamma) / alpha;
    }

    /// Phase index and local time at plan time `t` (clamped to the plan).
    pub fn locate(&self, t: f64) -> (usize, f64) {
        let t = t.max(0.0);
        let i = self.phases.partition_point(|p| p.start <= t).saturating_sub(1);
        let p = &self.phases[i];
        (i, (t - p.start).min(p.duration))
    }

    /// `(ξ_ref, ξ̇_ref, v_ref)`; beyond the horizon the DCM rests on the
    /// final waypoint.
    pub fn eval(&self, t: f64) -> DcmSample {
        if t >= self.horizon() {
            let v = self.phases.last().unwrap().v_end;
            return DcmSample {
                xi: v,
                xi_dot: Vector2::zeros(),
                vrp: v,
            };
        }
        let (i, local) = self.locate(t);
        self.eval_in_phase(i, local)
    }

    /// Evaluates phase `i` at local time `t` (used for left/right limits at
    /// boundaries).
    pub fn eval_in_phase(&self, i: usize, t: f64) -> DcmSample {
        let (xi, v) = self.phases[i].eval(t, self.b);
        DcmSample {
            xi,
            xi_dot: (xi - v) / self.b,
            vrp: v,
        }
    }
}
