//! Rolling walking plan: replans at the start of every double support.

use std::io::Write;

use nalgebra::{Vector2, Vector3};

use resloco_sim::Terrain;

use crate::dcm::{dcm_backward_pass, DcmSample, DcmTrajectory};
use crate::gait::{plan_footsteps, FootPose, Footstep, GaitParams};
use crate::swing::{swing_trajectory, FootTrajectory};
use crate::vrp::{vrp_waypoints, Support, VrpPlan};
use crate::PlanError;

/// Swing-foot reference at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwingReference {
    pub side: usize,
    pub pose: Vector3<f64>,
    pub vel: Vector3<f64>,
    pub acc: Vector3<f64>,
}

/// Everything the whole-body controller needs at one control tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    pub dcm: DcmSample,
    pub support: Support,
    pub swing: Option<SwingReference>,
    /// Planned pose of each foot (the stance target for loaded feet).
    pub feet: [FootPose; 2],
}

/// One plan built at a double-support start.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkingPlan {
    /// Absolute start time [s].
    pub t0: f64,
    pub stance: [FootPose; 2],
    pub footsteps: Vec<Footstep>,
    pub vrp: VrpPlan,
    pub dcm: DcmTrajectory,
    /// Swing trajectory of each single-support phase.
    pub swings: Vec<Option<(usize, FootTrajectory)>>,
}

impl WalkingPlan {
    /// Builds a plan whose DCM starts exactly at `xi0`.
    pub fn build(
        t0: f64,
        stance: [FootPose; 2],
        first_swing: usize,
        command: f64,
        xi0: Vector2<f64>,
        gait: &GaitParams,
        terrain: &Terrain,
    ) -> Result<Self, PlanError> {
        let footsteps = plan_footsteps(stance, first_swing, command, gait, terrain)?;
        let vrp = vrp_waypoints(stance, &footsteps, xi0, gait);
        let mut dcm = dcm_backward_pass(&vrp, gait);
        dcm.anchor(xi0);
        let mut feet = stance;
        let mut next = footsteps.iter();
        let swings = vrp
            .support
            .iter()
            .map(|s| match s.swing_foot() {
                Some(side) => {
                    let step = next.next().expect("one footstep per single support");
                    let tr = swing_trajectory(feet[side], step.pose, gait.t_ss, gait.apex);
                    feet[side] = step.pose;
                    Some((side, tr))
                }
                None => None,
            })
            .collect();
        Ok(Self {
            t0,
            stance,
            footsteps,
            vrp,
            dcm,
            swings,
        })
    }

    /// Reference at absolute time `t`.
    pub fn reference(&self, t: f64) -> Reference {
        let local = t - self.t0;
        let dcm = self.dcm.eval(local);
        let (i, tau) = self.dcm.locate(local);
        let past_end = local >= self.dcm.horizon();
        let support = if past_end { Support::Double } else { self.vrp.support[i] };
        // Planned foot poses at this time: landed steps replace their stance.
        let mut feet = self.stance;
        let mut swing = None;
        let mut steps = self.footsteps.iter();
        for (k, s) in self.swings.iter().enumerate() {
            if let Some((side, tr)) = s {
                let step = steps.next().unwrap();
                if k < i || past_end {
                    feet[*side] = step.pose;
                } else if k == i {
                    let (pose, vel, acc) = tr.eval(tau);
                    swing = Some(SwingReference {
                        side: *side,
                        pose,
                        vel,
                        acc,
                    });
                    feet[*side] = pose;
                }
            }
        }
        Reference {
            dcm,
            support,
            swing,
            feet,
        }
    }
}

/// Keeps a plan current: at every double-support start the next plan is
/// built from the landed footsteps, the latest command and the previous
/// plan's DCM reference (so ξ_ref is continuous across replans).
#[derive(Debug, Clone)]
pub struct GaitScheduler {
    pub gait: GaitParams,
    terrain: Terrain,
    plan: WalkingPlan,
    next_swing: usize,
    cycle: u64,
    t_start: f64,
}

impl GaitScheduler {
    pub fn new(
        gait: GaitParams,
        terrain: Terrain,
        stance: [FootPose; 2],
        first_swing: usize,
        xi0: Vector2<f64>,
        t0: f64,
        command: f64,
    ) -> Result<Self, PlanError> {
        gait.validate()?;
        let plan = WalkingPlan::build(t0, stance, first_swing, command, xi0, &gait, &terrain)?;
        Ok(Self {
            gait,
            terrain,
            plan,
            next_swing: 1 - first_swing,
            cycle: 0,
            t_start: t0,
        })
    }

    pub fn plan(&self) -> &WalkingPlan {
        &self.plan
    }

    fn next_replan(&self) -> f64 {
        self.t_start + (self.cycle + 1) as f64 * self.gait.cycle()
    }

    /// Replans if `t` has reached the next double-support start, using
    /// `command` for the new plan. Returns true when a new plan was built.
    pub fn update(&mut self, t: f64, command: f64) -> Result<bool, PlanError> {
        let mut replanned = false;
        while t >= self.next_replan() - 1e-9 {
            let t_new = self.next_replan();
            let xi0 = self.plan.dcm.eval(t_new - self.plan.t0).xi;
            let mut stance = self.plan.stance;
            let first = self.plan.footsteps[0];
            stance[first.side] = first.pose;
            self.plan = WalkingPlan::build(t_new, stance, self.next_swing, command, xi0, &self.gait, &self.terrain)?;
            self.next_swing = 1 - self.next_swing;
            self.cycle += 1;
            replanned = true;
        }
        Ok(replanned)
    }

    pub fn reference(&self, t: f64) -> Reference {
        self.plan.reference(t)
    }
}

/// Writes `t, ξ, ξ̇, v, swing pose` rows sampled every `dt` over the plan.
pub fn export_plan_csv<W: Write>(plan: &WalkingPlan, dt: f64, out: W) -> Result<(), PlanError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "t", "xi_x", "xi_z", "xid_x", "xid_z", "vrp_x", "vrp_z", "swing_side", "swing_x", "swing_z", "swing_pitch",
    ])?;
    let n = (plan.dcm.horizon() / dt).round() as usize;
    for k in 0..=n {
        let t = plan.t0 + k as f64 * dt;
        let r = plan.reference(t);
        let d = r.dcm;
        let mut row: Vec<String> = [t, d.xi.x, d.xi.y, d.xi_dot.x, d.xi_dot.y, d.vrp.x, d.vrp.y]
            .iter()
            .map(|v| format!("{v:.12e}"))
            .collect();
        match r.swing {
            Some(s) => {
                row.push(s.side.to_string());
                row.extend(s.pose.iter().map(|v| format!("{v:.12e}")));
            }
            None => row.extend(["", "", "", ""].map(String::from)),
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| PlanError::Io(e.to_string()))?;
    Ok(())
}
