//! Inverse-dynamics whole-body controller.
//!
//! Decision variables are `[q̈ (9), heel/toe forces (4 × (f_x, f_z)), τ (6)]`.

use nalgebra::{DMatrix, DVector, SMatrix, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use resloco_qp::{QpProblem, QpSolver, QpStatus, Settings};
use resloco_sim::contact::contact_jacobian;
use resloco_sim::dynamics::passive_forces;
use resloco_sim::{bias_forces, foot_pose, foot_pose_jacobian, Kinematics, RobotModel, Vec9, NC, NJ, NQ};

use crate::scheduler::Reference;

const NF: usize = 2 * NC;
const NV: usize = NQ + NF + NJ;
const F0: usize = NQ;
const T0: usize = NQ + NF;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WbcGains {
    /// Diagonal of K_ξ [1/s].
    pub k_xi: [f64; 2],
    pub w_com: f64,
    pub w_foot: f64,
    pub w_torso: f64,
    pub w_reg: f64,
    /// Natural frequency of the swing-foot PD [rad/s] (critically damped).
    pub foot_omega: f64,
    /// Natural frequency of the torso-pitch PD [rad/s] (critically damped).
    pub torso_omega: f64,
    /// Stance feet are asked for `−k·J q̇` acceleration to bleed off slip [1/s].
    pub stance_damping: f64,
    pub qp_tol: f64,
    pub qp_max_iter: usize,
}

impl Default for WbcGains {
    fn default() -> Self {
        Self {
            k_xi: [4.0, 4.0],
            w_com: 10.0,
            w_foot: 5.0,
            w_torso: 1.0,
            w_reg: 1e-4,
            foot_omega: 20.0,
            torso_omega: 20.0,
            stance_damping: 0.0,
            qp_tol: 1e-6,
            qp_max_iter: 2000,
        }
    }
}

/// Commanded VRP `v = v_ref + (I + b·K_ξ)(ξ − ξ_ref)`.
pub fn dcm_control_law(xi: Vector2<f64>, xi_ref: Vector2<f64>, v_ref: Vector2<f64>, k_xi: [f64; 2], b: f64) -> Vector2<f64> {
    let e = xi - xi_ref;
    v_ref + Vector2::new((1.0 + b * k_xi[0]) * e.x, (1.0 + b * k_xi[1]) * e.y)
}

/// Total CoM force `F = m/b²·(x − v)`.
pub fn com_force(x: Vector2<f64>, v_cmd: Vector2<f64>, mass: f64, b: f64) -> Vector2<f64> {
    (x - v_cmd) * (mass / (b * b))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrackingErrors {
    /// ξ − ξ_ref [m].
    pub e_xi: [f64; 2],
    /// Swing-foot pose error (x, z, pitch); zero in double support.
    pub e_foot: [f64; 3],
    /// Torso pitch error [rad].
    pub e_rot: f64,
}

impl TrackingErrors {
    pub fn dcm_norm(&self) -> f64 {
        self.e_xi[0].hypot(self.e_xi[1])
    }

    pub fn foot_norm(&self) -> f64 {
        self.e_foot.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TickStatus {
    Optimal,
    /// QP hit its iteration limit; the best iterate was used.
    Approximate,
    /// QP failed; previous torques reused.
    Reused,
    /// QP failed again (or no previous torques); gravity compensation.
    GravityCompensation,
    /// No stance foot; gravity compensation.
    Flight,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickOutput {
    pub tau: [f64; NJ],
    pub errors: TrackingErrors,
    /// Commanded VRP.
    pub vrp_cmd: [f64; 2],
    pub status: TickStatus,
    /// Planned accelerations and contact forces when the QP succeeded.
    pub qdd: Option<Vec9>,
    pub forces: Option<[f64; NF]>,
}

/// Measured (or estimated) quantities the controller works from.
pub struct Measured<'a> {
    pub model: &'a RobotModel,
    pub q: &'a Vec9,
    pub qd: &'a Vec9,
}

/// Tracking errors of a state against a reference.
pub fn tracking_errors(model: &RobotModel, kin: &Kinematics, reference: &Reference, b: f64) -> TrackingErrors {
    let (x, v) = kin.com(model);
    let xi = x + v * b;
    let e_xi = xi - reference.dcm.xi;
    let e_foot = match reference.swing {
        Some(s) => {
            let p = foot_pose(model, kin, s.side);
            [p.x - s.pose.x, p.y - s.pose.y, p.z - s.pose.z]
        }
        None => [0.0; 3],
    };
    TrackingErrors {
        e_xi: [e_xi.x, e_xi.y],
        e_foot,
        e_rot: kin.angle[0],
    }
}

/// QP built for one tick plus the commanded VRP it encodes.
pub struct WbcProblem {
    pub qp: QpProblem,
    pub vrp_cmd: Vector2<f64>,
    pub com_force: Vector2<f64>,
}

fn add_task<const R: usize>(
    h: &mut DMatrix<f64>,
    g: &mut DVector<f64>,
    j: &SMatrix<f64, R, NQ>,
    target: &SMatrix<f64, R, 1>,
    w: f64,
) {
    let jtj = j.transpose() * j * w;
    let jtt = j.transpose() * target * w;
    for r in 0..NQ {
        for c in 0..NQ {
            h[(r, c)] += jtj[(r, c)];
        }
        g[r] -= jtt[r];
    }
}

/// Builds the whole-body QP for feet flagged in `stance`. Returns `None`
/// when no foot is in stance.
pub fn build_wbc_qp(
    m: &Measured,
    reference: &Reference,
    stance: [bool; 2],
    gains: &WbcGains,
    friction: f64,
) -> Option<WbcProblem> {
    if !stance[0] && !stance[1] {
        return None;
    }
    let model = m.model;
    let kin = Kinematics::new(model, m.q, m.qd);
    let b = model.time_constant();
    let mass = model.mass();

    let mut h = DMatrix::zeros(NV, NV);
    let mut g = DVector::zeros(NV);

    // CoM: achieved acceleration vs the commanded CoM force / m.
    let (x, xd) = kin.com(model);
    let xi = x + xd * b;
    let vrp_cmd = dcm_control_law(xi, reference.dcm.xi, reference.dcm.vrp, gains.k_xi, b);
    let force = com_force(x, vrp_cmd, mass, b);
    let (jc, jc_bias) = kin.com_jacobian(model);
    add_task(&mut h, &mut g, &jc, &(force / mass - jc_bias), gains.w_com);

    // Swing foot PD.
    if let Some(s) = reference.swing {
        if !stance[s.side] {
            let (jf, jf_bias) = foot_pose_jacobian(model, &kin, s.side);
            let pose = foot_pose(model, &kin, s.side);
            let vel = jf * m.qd;
            let kp = gains.foot_omega * gains.foot_omega;
            let kd = 2.0 * gains.foot_omega;
            let acc: Vector3<f64> = s.acc + (s.pose - pose) * kp + (s.vel - vel) * kd;
            add_task(&mut h, &mut g, &jf, &(acc - jf_bias), gains.w_foot);
        }
    }

    // Torso pitch PD toward upright.
    let mut jt = SMatrix::<f64, 1, NQ>::zeros();
    jt[2] = 1.0;
    let kp = gains.torso_omega * gains.torso_omega;
    let kd = 2.0 * gains.torso_omega;
    let torso = SMatrix::<f64, 1, 1>::new(-kp * m.q[2] - kd * m.qd[2]);
    add_task(&mut h, &mut g, &jt, &torso, gains.w_torso);

    // Normalized regularization on torques and forces.
    let mg = mass * model.gravity;
    for i in 0..NJ {
        let lim = model.joints[i].torque_limit;
        h[(T0 + i, T0 + i)] += gains.w_reg / (lim * lim);
    }
    for i in 0..NF {
        h[(F0 + i, F0 + i)] += gains.w_reg / (mg * mg);
    }

    // Equalities.
    let n_stance = stance.iter().filter(|s| **s).count();
    let n_eq = NQ + 3 * n_stance + 4 * (2 - n_stance);
    let mut a = DMatrix::zeros(n_eq, NV);
    let mut beq = DVector::zeros(n_eq);
    let mass_matrix = resloco_sim::dynamics::mass_matrix(model, m.q);
    let rhs = passive_forces(model, m.qd) - bias_forces(model, m.q, m.qd);
    for r in 0..NQ {
        for c in 0..NQ {
            a[(r, c)] = mass_matrix[(r, c)];
        }
        beq[r] = rhs[r];
    }
    for k in 0..NC {
        let jk = contact_jacobian(model, &kin, k);
        for r in 0..NQ {
            a[(r, F0 + 2 * k)] = -jk[(0, r)];
            a[(r, F0 + 2 * k + 1)] = -jk[(1, r)];
        }
    }
    for i in 0..NJ {
        a[(3 + i, T0 + i)] = -1.0;
    }
    let mut row = NQ;
    for side in 0..2 {
        if stance[side] {
            let (jf, jf_bias) = foot_pose_jacobian(model, &kin, side);
            let target = -jf_bias - jf * m.qd * gains.stance_damping;
            for r in 0..3 {
                for c in 0..NQ {
                    a[(row + r, c)] = jf[(r, c)];
                }
                beq[row + r] = target[r];
            }
            row += 3;
        } else {
            for r in 0..4 {
                a[(row + r, F0 + 4 * side + r)] = 1.0;
            }
            row += 4;
        }
    }

    // Inequalities: unilateral, friction cone, torque limits.
    let n_in = 3 * NC + 2 * NJ;
    let mut c = DMatrix::zeros(n_in, NV);
    let mut d = DVector::zeros(n_in);
    for k in 0..NC {
        let (fx, fz) = (F0 + 2 * k, F0 + 2 * k + 1);
        c[(3 * k, fz)] = -1.0;
        c[(3 * k + 1, fx)] = 1.0;
        c[(3 * k + 1, fz)] = -friction;
        c[(3 * k + 2, fx)] = -1.0;
        c[(3 * k + 2, fz)] = -friction;
    }
    for i in 0..NJ {
        let lim = model.joints[i].torque_limit;
        let r = 3 * NC + 2 * i;
        c[(r, T0 + i)] = 1.0;
        c[(r + 1, T0 + i)] = -1.0;
        d[r] = lim;
        d[r + 1] = lim;
    }

    // Exact symmetry for the solver's check.
    let h = (&h + h.transpose()) * 0.5;
    Some(WbcProblem {
        qp: QpProblem::new(h, g).with_equalities(a, beq).with_inequalities(c, d),
        vrp_cmd,
        com_force: force,
    })
}

/// Joint torques cancelling gravity at the current configuration.
pub fn gravity_compensation(model: &RobotModel, q: &Vec9) -> [f64; NJ] {
    let g = bias_forces(model, q, &Vec9::zeros());
    model.clamp_torques(&std::array::from_fn(|i| g[3 + i]))
}

/// Stateful controller: owns the QP workspace (warm start) and the
/// fallback bookkeeping.
#[derive(Debug, Clone)]
pub struct WholeBodyController {
    pub gains: WbcGains,
    solver: QpSolver,
    last: Option<[f64; NJ]>,
    reused: bool,
    /// Ticks that ended in a fallback.
    pub failures: u64,
}

impl WholeBodyController {
    pub fn new(gains: WbcGains) -> Self {
        let solver = QpSolver::new(Settings {
            tol: gains.qp_tol,
            max_iter: gains.qp_max_iter,
            ..Settings::default()
        });
        Self {
            gains,
            solver,
            last: None,
            reused: false,
            failures: 0,
        }
    }

    /// One control tick: reference → DCM law → CoM force → QP → clamped torques.
    pub fn tick(&mut self, m: &Measured, reference: &Reference, friction: f64) -> TickOutput {
        let model = m.model;
        let kin = Kinematics::new(model, m.q, m.qd);
        let errors = tracking_errors(model, &kin, reference, model.time_constant());
        let stance = reference.support.stance();
        let Some(problem) = build_wbc_qp(m, reference, stance, &self.gains, friction) else {
            self.failures += 1;
            return TickOutput {
                tau: gravity_compensation(model, m.q),
                errors,
                vrp_cmd: [0.0; 2],
                status: TickStatus::Flight,
                qdd: None,
                forces: None,
            };
        };
        let vrp_cmd = [problem.vrp_cmd.x, problem.vrp_cmd.y];
        let solution = self.solver.solve(&problem.qp);
        let usable = match &solution {
            Ok(s) => matches!(s.status, QpStatus::Optimal | QpStatus::MaxIterations) && s.x.iter().all(|v| v.is_finite()),
            Err(_) => false,
        };
        if usable {
            let s = solution.unwrap();
            let tau = model.clamp_torques(&std::array::from_fn(|i| s.x[T0 + i]));
            self.last = Some(tau);
            self.reused = false;
            return TickOutput {
                tau,
                errors,
                vrp_cmd,
                status: if s.status == QpStatus::Optimal { TickStatus::Optimal } else { TickStatus::Approximate },
                qdd: Some(Vec9::from_fn(|i, _| s.x[i])),
                forces: Some(std::array::from_fn(|i| s.x[F0 + i])),
            };
        }
        self.failures += 1;
        self.solver.reset_warm_start();
        let (tau, status) = match self.last {
            Some(prev) if !self.reused => {
                self.reused = true;
                (prev, TickStatus::Reused)
            }
            _ => (gravity_compensation(model, m.q), TickStatus::GravityCompensation),
        };
        TickOutput {
            tau,
            errors,
            vrp_cmd,
            status,
            qdd: None,
            forces: None,
        }
    }

    pub fn reset(&mut self) {
        self.solver.reset_warm_start();
        self.last = None;
        self.reused = false;
        self.failures = 0;
    }
}
