//! Terrain profile and heel/toe penalty contacts.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::kinematics::{Kinematics, PointJacobian, Vec9};
use crate::model::{RobotModel, FOOT_BODY};
use crate::SimError;

/// Contact points: left heel, left toe, right heel, right toe.
pub const NC: usize = 4;

/// Piecewise-linear height profile with Coulomb friction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Terrain {
    /// `(x, h)` breakpoints with strictly increasing x. Heights are held
    /// constant beyond the ends; an empty profile is flat at zero.
    pub profile: Vec<[f64; 2]>,
    pub friction: f64,
}

impl Default for Terrain {
    fn default() -> Self {
        Self::flat(1.0)
    }
}

impl Terrain {
    pub fn flat(friction: f64) -> Self {
        Self {
            profile: Vec::new(),
            friction,
        }
    }

    pub fn new(profile: Vec<[f64; 2]>, friction: f64) -> Result<Self, SimError> {
        let t = Self { profile, friction };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.friction > 0.0) {
            return Err(SimError::InvalidTerrain("friction must be positive".into()));
        }
        if self.profile.windows(2).any(|w| !(w[1][0] > w[0][0])) {
            return Err(SimError::InvalidTerrain("breakpoints must be strictly increasing".into()));
        }
        Ok(())
    }

    fn segment(&self, x: f64) -> Option<usize> {
        let n = self.profile.len();
        if n < 2 || x <= self.profile[0][0] || x >= self.profile[n - 1][0] {
            return None;
        }
        Some(self.profile.partition_point(|p| p[0] <= x) - 1)
    }

    pub fn height(&self, x: f64) -> f64 {
        match (self.segment(x), self.profile.first(), self.profile.last()) {
            (Some(i), _, _) => {
                let [x0, h0] = self.profile[i];
                let [x1, h1] = self.profile[i + 1];
                h0 + (h1 - h0) * (x - x0) / (x1 - x0)
            }
            (None, Some(first), Some(last)) => {
                if x <= first[0] {
                    first[1]
                } else {
                    last[1]
                }
            }
            _ => 0.0,
        }
    }

    pub fn slope(&self, x: f64) -> f64 {
        match self.segment(x) {
            Some(i) => {
                let [x0, h0] = self.profile[i];
                let [x1, h1] = self.profile[i + 1];
                (h1 - h0) / (x1 - x0)
            }
            None => 0.0,
        }
    }
}

/// Force at one contact point. `tangential` is along +x, `normal` along +z.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ContactWrench {
    pub normal: f64,
    pub tangential: f64,
    pub position: [f64; 2],
}

impl ContactWrench {
    pub fn is_active(&self) -> bool {
        self.normal > 0.0
    }
}

/// `(body, local point)` of contact `k`.
pub fn contact_point(model: &RobotModel, k: usize) -> (usize, [f64; 2]) {
    let body = FOOT_BODY[k / 2];
    let local = if k % 2 == 0 { model.foot.heel } else { model.foot.toe };
    (body, local)
}

pub fn contact_jacobian(model: &RobotModel, kin: &Kinematics, k: usize) -> PointJacobian {
    let (b, local) = contact_point(model, k);
    kin.point_jacobian(b, &kin.point(b, local))
}

/// Contact forces plus, for each point, the velocity gains
/// `(∂(-f_t)/∂ẋ, ∂(-f_n)/∂ż)` used by the integrator's implicit kick.
pub(crate) fn contact_forces(
    model: &RobotModel,
    kin: &Kinematics,
    terrain: &Terrain,
) -> [(ContactWrench, [f64; 2]); NC] {
    let g = &model.foot;
    std::array::from_fn(|k| {
        let (b, local) = contact_point(model, k);
        let p = kin.point(b, local);
        let v = kin.point_velocity(b, &p);
        let mut w = ContactWrench {
            position: [p.x, p.y],
            ..Default::default()
        };
        let depth = terrain.height(p.x) - p.y;
        if depth <= 0.0 {
            return (w, [0.0, 0.0]);
        }
        let depth_rate = terrain.slope(p.x) * v.x - v.y;
        let fn_raw = g.stiffness * depth + g.damping * depth_rate;
        if fn_raw <= 0.0 {
            return (w, [0.0, 0.0]);
        }
        w.normal = fn_raw;
        let viscous = g.tangential * v.x.abs();
        let cap = terrain.friction * fn_raw;
        let mut gains = [0.0, g.damping];
        if viscous < cap {
            w.tangential = -g.tangential * v.x;
            gains[0] = g.tangential;
        } else {
            w.tangential = -cap * v.x.signum();
        }
        (w, gains)
    })
}

/// Penalty contact forces at the heel and toe points of both feet.
pub fn contact_model(model: &RobotModel, q: &Vec9, qd: &Vec9, terrain: &Terrain) -> [ContactWrench; NC] {
    let kin = Kinematics::new(model, q, qd);
    contact_forces(model, &kin, terrain).map(|(w, _)| w)
}

/// World positions of the four contact points.
pub fn contact_positions(model: &RobotModel, kin: &Kinematics) -> [Vector2<f64>; NC] {
    std::array::from_fn(|k| {
        let (b, local) = contact_point(model, k);
        kin.point(b, local)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn terrain_interpolates_and_holds_ends() {
        let t = Terrain::new(vec![[0.0, 0.0], [1.0, 0.1], [2.0, 0.0]], 0.8).unwrap();
        assert!((t.height(0.5) - 0.05).abs() < 1e-15);
        assert!((t.slope(1.5) + 0.1).abs() < 1e-15);
        assert_eq!(t.height(-3.0), 0.0);
        assert_eq!(t.height(5.0), 0.0);
        assert_eq!(Terrain::flat(1.0).height(3.0), 0.0);
    }

    #[test]
    fn terrain_rejects_unordered_breakpoints() {
        assert!(Terrain::new(vec![[0.0, 0.0], [0.0, 0.1]], 1.0).is_err());
        assert!(Terrain::new(vec![], 0.0).is_err());
    }
}
