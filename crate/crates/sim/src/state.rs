//! Simulator state and the actuation delay buffer.

use serde::{Deserialize, Serialize};

use crate::contact::{ContactWrench, NC};
use crate::kinematics::{Kinematics, Vec9};
use crate::model::{RobotModel, NJ};

/// Torque commands waiting to reach the motors.
///
/// `applied` is what the plant currently receives; each pending entry
/// replaces it once the clock reaches its release time.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ActuationBuffer {
    pub applied: [f64; NJ],
    pending: Vec<(f64, [f64; NJ])>,
}

impl ActuationBuffer {
    pub fn new(applied: [f64; NJ]) -> Self {
        Self {
            applied,
            pending: Vec::new(),
        }
    }

    /// Queues `tau` for release at time `release`. Entries stay sorted by
    /// release time; equal times keep submission order.
    pub fn command(&mut self, release: f64, tau: [f64; NJ]) {
        let at = self.pending.partition_point(|(t, _)| *t <= release);
        self.pending.insert(at, (release, tau));
    }

    pub fn next_release(&self) -> Option<f64> {
        self.pending.first().map(|(t, _)| *t)
    }

    /// Applies every command whose release time is ≤ `t`.
    pub fn release_due(&mut self, t: f64) {
        let n = self.pending.partition_point(|(r, _)| *r <= t);
        if n > 0 {
            self.applied = self.pending[n - 1].1;
            self.pending.drain(..n);
        }
    }

    pub fn pending(&self) -> &[(f64, [f64; NJ])] {
        &self.pending
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub q: Vec9,
    pub qd: Vec9,
    pub t: f64,
    /// Heel/toe contact flags from the last integration step.
    pub contact_active: [bool; NC],
    /// Mean contact forces applied over the last step.
    pub contact_forces: [ContactWrench; NC],
    pub actuation: ActuationBuffer,
}

impl SimState {
    pub fn new(q: Vec9, qd: Vec9) -> Self {
        Self {
            q,
            qd,
            t: 0.0,
            contact_active: [false; NC],
            contact_forces: [ContactWrench::default(); NC],
            actuation: ActuationBuffer::default(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.qd.iter()).all(|v| v.is_finite())
    }

    pub fn joint_positions(&self) -> [f64; NJ] {
        std::array::from_fn(|i| self.q[3 + i])
    }

    pub fn joint_velocities(&self) -> [f64; NJ] {
        std::array::from_fn(|i| self.qd[3 + i])
    }

    pub fn kinematics(&self, model: &RobotModel) -> Kinematics {
        Kinematics::new(model, &self.q, &self.qd)
    }
}

/// Whole-body CoM position and velocity.
pub fn com_state(model: &RobotModel, state: &SimState) -> ([f64; 2], [f64; 2]) {
    let (x, v) = state.kinematics(model).com(model);
    ([x.x, x.y], [v.x, v.y])
}

/// Divergent component of motion ξ = x + b ẋ.
pub fn dcm(model: &RobotModel, state: &SimState) -> [f64; 2] {
    let (x, v) = com_state(model, state);
    let b = model.time_constant();
    [x[0] + b * v[0], x[1] + b * v[1]]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn buffer_releases_in_time_order() {
        let mut buf = ActuationBuffer::default();
        buf.command(0.004, [2.0; NJ]);
        buf.command(0.002, [1.0; NJ]);
        assert_eq!(buf.next_release(), Some(0.002));
        buf.release_due(0.001);
        assert_eq!(buf.applied, [0.0; NJ]);
        buf.release_due(0.003);
        assert_eq!(buf.applied, [1.0; NJ]);
        buf.release_due(0.004);
        assert_eq!(buf.applied, [2.0; NJ]);
        assert!(buf.pending().is_empty());
    }
}
