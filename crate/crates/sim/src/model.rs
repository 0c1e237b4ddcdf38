//! Kinematic and inertial description of the planar biped.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::SimError;

/// Number of generalized coordinates: base x, base z, base pitch, six joints.
pub const NQ: usize = 9;
/// Number of actuated joints.
pub const NJ: usize = 6;
/// Number of rigid bodies.
pub const NB: usize = 7;
/// Body index of each foot, left then right.
pub const FOOT_BODY: [usize; 2] = [3, 6];

/// Body index moved by generalized coordinate `dof`.
#[inline]
pub fn dof_body(dof: usize) -> usize {
    if dof < 3 {
        0
    } else {
        dof - 2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub name: String,
    /// Parent body; `None` only for the floating torso.
    pub parent: Option<usize>,
    /// Location of this link's joint in the parent frame [m].
    pub joint: [f64; 2],
    pub mass: f64,
    /// Rotational inertia about the link CoM [kg·m²].
    pub inertia: f64,
    pub length: f64,
    /// CoM in the link frame [m].
    pub com: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    pub name: String,
    /// Viscous damping [N·m·s/rad].
    pub damping: f64,
    /// Dry (Coulomb) friction magnitude [N·m].
    pub friction: f64,
    pub torque_limit: f64,
}

/// Flat foot with heel and toe contact points, plus penalty-contact gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FootGeometry {
    /// Heel point in the foot frame (origin at the ankle) [m].
    pub heel: [f64; 2],
    pub toe: [f64; 2],
    /// Normal stiffness k_n [N/m].
    pub stiffness: f64,
    /// Normal damping d_n [N·s/m].
    pub damping: f64,
    /// Tangential viscous coefficient k_t [N·s/m].
    pub tangential: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobotModel {
    pub links: Vec<Link>,
    pub joints: Vec<Joint>,
    pub foot: FootGeometry,
    /// Nominal CoM height above the stance sole, Δz [m].
    pub com_height: f64,
    pub gravity: f64,
    /// Velocity scale of the tanh friction regularization [rad/s].
    pub friction_eps: f64,
}

fn link(name: &str, parent: Option<usize>, joint: [f64; 2], mass: f64, length: f64, com: [f64; 2], inertia: f64) -> Link {
    Link {
        name: name.into(),
        parent,
        joint,
        mass,
        inertia,
        length,
        com,
    }
}

fn joint(name: &str, damping: f64, friction: f64, torque_limit: f64) -> Joint {
    Joint {
        name: name.into(),
        damping,
        friction,
        torque_limit,
    }
}

impl Default for RobotModel {
    fn default() -> Self {
        Self::nominal()
    }
}

impl RobotModel {
    /// 16 kg desk-scale biped with 0.4 m leg segments and 0.2 m feet.
    pub fn nominal() -> Self {
        let rod = |m: f64, l: f64| m * l * l / 12.0;
        let mut links = vec![link("torso", None, [0.0, 0.0], 8.0, 0.5, [0.0, 0.2], rod(8.0, 0.5))];
        for (side, base) in [("l", 0), ("r", 3)] {
            links.push(link(&format!("thigh_{side}"), Some(0), [0.0, 0.0], 2.0, 0.4, [0.0, -0.2], rod(2.0, 0.4)));
            links.push(link(&format!("shank_{side}"), Some(base + 1), [0.0, -0.4], 1.5, 0.4, [0.0, -0.2], rod(1.5, 0.4)));
            links.push(link(&format!("foot_{side}"), Some(base + 2), [0.0, -0.4], 0.5, 0.2, [0.05, -0.03], 0.004));
        }
        let mut joints = Vec::new();
        for side in ["l", "r"] {
            joints.push(joint(&format!("hip_{side}"), 0.1, 0.3, 50.0));
            joints.push(joint(&format!("knee_{side}"), 0.1, 0.3, 60.0));
            joints.push(joint(&format!("ankle_{side}"), 0.05, 0.2, 30.0));
        }
        Self {
            links,
            joints,
            foot: FootGeometry {
                heel: [-0.05, -0.05],
                toe: [0.15, -0.05],
                stiffness: 5e4,
                damping: 500.0,
                tangential: 1e3,
            },
            com_height: 0.7,
            gravity: 9.81,
            friction_eps: 1e-3,
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self, SimError> {
        let model: Self = toml::from_str(s).map_err(|e| SimError::Config(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| SimError::Config(e.to_string()))?;
        Self::from_toml_str(&text)
    }

    /// Total mass m.
    pub fn mass(&self) -> f64 {
        self.links.iter().map(|l| l.mass).sum()
    }

    /// DCM time constant b = sqrt(Δz / g).
    pub fn time_constant(&self) -> f64 {
        (self.com_height / self.gravity).sqrt()
    }

    pub fn torque_limits(&self) -> [f64; NJ] {
        std::array::from_fn(|i| self.joints[i].torque_limit)
    }

    pub fn clamp_torques(&self, tau: &[f64; NJ]) -> [f64; NJ] {
        std::array::from_fn(|i| {
            let lim = self.joints[i].torque_limit;
            tau[i].clamp(-lim, lim)
        })
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidModel(msg));
        if self.links.len() != NB || self.joints.len() != NJ {
            return bad(format!("expected {NB} links and {NJ} joints"));
        }
        let parents = [None, Some(0), Some(1), Some(2), Some(0), Some(4), Some(5)];
        for (i, l) in self.links.iter().enumerate() {
            if l.parent != parents[i] {
                return bad(format!("link {} has parent {:?}, expected {:?}", l.name, l.parent, parents[i]));
            }
            if !(l.mass > 0.0 && l.inertia > 0.0 && l.length > 0.0) {
                return bad(format!("link {} needs positive mass, inertia and length", l.name));
            }
        }
        for j in &self.joints {
            if !(j.torque_limit > 0.0) || j.damping < 0.0 || j.friction < 0.0 {
                return bad(format!("joint {} has invalid limits or passive terms", j.name));
            }
        }
        if !(self.foot.heel[0] < self.foot.toe[0]) {
            return bad("heel must lie behind the toe".into());
        }
        if !(self.com_height > 0.0 && self.gravity > 0.0 && self.friction_eps > 0.0) {
            return bad("com height, gravity and friction scale must be positive".into());
        }
        Ok(())
    }

    /// Copy with gravity removed, used by tests and the gravity-free checks.
    pub fn without_gravity(&self) -> Self {
        Self {
            gravity: 0.0,
            ..self.clone()
        }
    }

    /// Copy with all joint damping and dry friction removed.
    pub fn without_passive(&self) -> Self {
        let mut m = self.clone();
        for j in &mut m.joints {
            j.damping = 0.0;
            j.friction = 0.0;
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nominal_is_valid() {
        let m = RobotModel::nominal();
        m.validate().unwrap();
        assert!((m.mass() - 16.0).abs() < 1e-12);
        assert!((m.time_constant() - (0.7f64 / 9.81).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn toml_overrides_keep_defaults() {
        let m = RobotModel::from_toml_str("com_height = 0.65\n").unwrap();
        assert_eq!(m.com_height, 0.65);
        assert_eq!(m.links, RobotModel::nominal().links);
    }

    #[test]
    fn rejects_heel_ahead_of_toe() {
        let mut m = RobotModel::nominal();
        m.foot.heel = [0.2, -0.05];
        assert!(m.validate().is_err());
    }
}
