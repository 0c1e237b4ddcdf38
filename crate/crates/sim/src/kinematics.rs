//! Forward kinematics in world-frame planar spatial notation.
//!
//! Motion vectors are `(ω, vx, vz)` with the linear part taken at the world
//! origin; force vectors are `(n, fx, fz)` with the moment about the origin.

use nalgebra::{SMatrix, SVector, Vector2, Vector3};

use crate::model::{dof_body, RobotModel, NB, NQ};

pub type Vec9 = SVector<f64, NQ>;
pub type Mat9 = SMatrix<f64, NQ, NQ>;
pub type PointJacobian = SMatrix<f64, 2, NQ>;
pub type RowJacobian = SMatrix<f64, 1, NQ>;

#[inline]
pub(crate) fn rot(theta: f64, v: [f64; 2]) -> Vector2<f64> {
    let (s, c) = theta.sin_cos();
    Vector2::new(c * v[0] - s * v[1], s * v[0] + c * v[1])
}

/// `ω × p` for a scalar planar angular rate.
#[inline]
pub(crate) fn cross_w(w: f64, p: &Vector2<f64>) -> Vector2<f64> {
    Vector2::new(-w * p.y, w * p.x)
}

/// Planar motion cross product `m1 × m2`.
#[inline]
pub(crate) fn cross_motion(a: &Vector3<f64>, b: &Vector3<f64>) -> Vector3<f64> {
    let lin = cross_w(a[0], &Vector2::new(b[1], b[2])) - cross_w(b[0], &Vector2::new(a[1], a[2]));
    Vector3::new(0.0, lin.x, lin.y)
}

/// Planar force cross product `m ×* f`.
#[inline]
pub(crate) fn cross_force(m: &Vector3<f64>, f: &Vector3<f64>) -> Vector3<f64> {
    let n = m[1] * f[2] - m[2] * f[1];
    let lin = cross_w(m[0], &Vector2::new(f[1], f[2]));
    Vector3::new(n, lin.x, lin.y)
}

/// Motion subspace of a revolute joint located at `o`.
#[inline]
fn revolute(o: &Vector2<f64>) -> Vector3<f64> {
    Vector3::new(1.0, o.y, -o.x)
}

/// Body poses, spatial velocities and velocity-product accelerations at one
/// `(q, q̇)`.
#[derive(Debug, Clone)]
pub struct Kinematics {
    pub origin: [Vector2<f64>; NB],
    pub angle: [f64; NB],
    /// World-frame motion subspace of each generalized coordinate.
    pub subspace: [Vector3<f64>; NQ],
    pub velocity: [Vector3<f64>; NB],
    /// Spatial acceleration at q̈ = 0 without gravity.
    pub bias: [Vector3<f64>; NB],
    /// `supports[b][j]` is true when coordinate j moves body b.
    pub supports: [[bool; NQ]; NB],
}

impl Kinematics {
    pub fn new(model: &RobotModel, q: &Vec9, qd: &Vec9) -> Self {
        let mut origin = [Vector2::zeros(); NB];
        let mut angle = [0.0; NB];
        let mut subspace = [Vector3::zeros(); NQ];
        let mut velocity = [Vector3::zeros(); NB];
        let mut bias = [Vector3::zeros(); NB];
        let mut supports = [[false; NQ]; NB];

        origin[0] = Vector2::new(q[0], q[1]);
        angle[0] = q[2];
        subspace[0] = Vector3::new(0.0, 1.0, 0.0);
        subspace[1] = Vector3::new(0.0, 0.0, 1.0);
        subspace[2] = revolute(&origin[0]);
        let v_trans = subspace[0] * qd[0] + subspace[1] * qd[1];
        velocity[0] = v_trans + subspace[2] * qd[2];
        bias[0] = cross_motion(&v_trans, &subspace[2]) * qd[2];
        supports[0][..3].iter_mut().for_each(|s| *s = true);

        for b in 1..NB {
            let p = model.links[b].parent.expect("non-root link has a parent");
            let dof = b + 2;
            origin[b] = origin[p] + rot(angle[p], model.links[b].joint);
            angle[b] = angle[p] + q[dof];
            subspace[dof] = revolute(&origin[b]);
            velocity[b] = velocity[p] + subspace[dof] * qd[dof];
            bias[b] = bias[p] + cross_motion(&velocity[p], &subspace[dof]) * qd[dof];
            supports[b] = supports[p];
            supports[b][dof] = true;
        }
        Self {
            origin,
            angle,
            subspace,
            velocity,
            bias,
            supports,
        }
    }

    pub fn at_rest(model: &RobotModel, q: &Vec9) -> Self {
        Self::new(model, q, &Vec9::zeros())
    }

    /// World position of a point given in body `b`'s frame.
    pub fn point(&self, b: usize, local: [f64; 2]) -> Vector2<f64> {
        self.origin[b] + rot(self.angle[b], local)
    }

    pub fn com_of(&self, model: &RobotModel, b: usize) -> Vector2<f64> {
        self.point(b, model.links[b].com)
    }

    /// Velocity of the body-fixed point currently at world position `p`.
    pub fn point_velocity(&self, b: usize, p: &Vector2<f64>) -> Vector2<f64> {
        let v = &self.velocity[b];
        Vector2::new(v[1], v[2]) + cross_w(v[0], p)
    }

    /// Classical acceleration of a body-fixed point at q̈ = 0, no gravity
    /// (the `J̇ q̇` term).
    pub fn point_bias(&self, b: usize, p: &Vector2<f64>) -> Vector2<f64> {
        let a = &self.bias[b];
        let vp = self.point_velocity(b, p);
        Vector2::new(a[1], a[2]) + cross_w(a[0], p) + cross_w(self.velocity[b][0], &vp)
    }

    pub fn point_jacobian(&self, b: usize, p: &Vector2<f64>) -> PointJacobian {
        let mut j = PointJacobian::zeros();
        for dof in 0..NQ {
            if self.supports[b][dof] {
                let s = &self.subspace[dof];
                let col = Vector2::new(s[1], s[2]) + cross_w(s[0], p);
                j[(0, dof)] = col.x;
                j[(1, dof)] = col.y;
            }
        }
        j
    }

    /// Jacobian of body `b`'s absolute angle.
    pub fn angle_jacobian(&self, b: usize) -> RowJacobian {
        let mut j = RowJacobian::zeros();
        for dof in 2..NQ {
            if self.supports[b][dof] {
                j[dof] = 1.0;
            }
        }
        j
    }

    /// Whole-body CoM position and velocity.
    pub fn com(&self, model: &RobotModel) -> (Vector2<f64>, Vector2<f64>) {
        let mut x = Vector2::zeros();
        let mut v = Vector2::zeros();
        for b in 0..NB {
            let m = model.links[b].mass;
            let c = self.com_of(model, b);
            x += c * m;
            v += self.point_velocity(b, &c) * m;
        }
        let total = model.mass();
        (x / total, v / total)
    }

    /// CoM Jacobian and `J̇ q̇` term.
    pub fn com_jacobian(&self, model: &RobotModel) -> (PointJacobian, Vector2<f64>) {
        let mut j = PointJacobian::zeros();
        let mut bias = Vector2::zeros();
        for b in 0..NB {
            let m = model.links[b].mass;
            let c = self.com_of(model, b);
            j += self.point_jacobian(b, &c) * m;
            bias += self.point_bias(b, &c) * m;
        }
        let total = model.mass();
        (j / total, bias / total)
    }
}

/// Generalized coordinate of the joint driving body `b` (b ≥ 1).
#[inline]
pub fn body_dof(b: usize) -> usize {
    debug_assert!(b >= 1);
    b + 2
}

/// True when coordinate `dof` moves body `b`.
pub fn dof_moves_body(model: &RobotModel, dof: usize, b: usize) -> bool {
    let target = dof_body(dof);
    let mut cur = Some(b);
    while let Some(c) = cur {
        if c == target {
            return true;
        }
        cur = model.links[c].parent;
    }
    false
}

/// Foot pose `(ankle x, sole z, absolute pitch)` of foot `side` (0 left, 1 right).
pub fn foot_pose(model: &RobotModel, kin: &Kinematics, side: usize) -> Vector3<f64> {
    let b = crate::model::FOOT_BODY[side];
    let sole = kin.point(b, [0.0, model.foot.heel[1]]);
    Vector3::new(kin.origin[b].x, sole.y, kin.angle[b])
}

/// Jacobian of [`foot_pose`] and the matching `J̇ q̇` term.
pub fn foot_pose_jacobian(model: &RobotModel, kin: &Kinematics, side: usize) -> (SMatrix<f64, 3, NQ>, Vector3<f64>) {
    let b = crate::model::FOOT_BODY[side];
    let ankle = kin.origin[b];
    let sole = kin.point(b, [0.0, model.foot.heel[1]]);
    let ja = kin.point_jacobian(b, &ankle);
    let js = kin.point_jacobian(b, &sole);
    let jr = kin.angle_jacobian(b);
    let mut j = SMatrix::<f64, 3, NQ>::zeros();
    j.row_mut(0).copy_from(&ja.row(0));
    j.row_mut(1).copy_from(&js.row(1));
    j.row_mut(2).copy_from(&jr);
    let ba = kin.point_bias(b, &ankle);
    let bs = kin.point_bias(b, &sole);
    (j, Vector3::new(ba.x, bs.y, 0.0))
}
