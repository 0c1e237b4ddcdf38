//! Degree-6 swing-foot polynomials.
//!
//! Each channel is `p(τ) = s + (g − s)·(10τ³ − 15τ⁴ + 6τ⁵) + c·τ³(1 − τ)³`
//! with τ = t/T: zero velocity and acceleration at both ends, and `c`
//! placing the midpoint. Coefficients are stored in powers of t.

use nalgebra::Vector3;

use crate::gait::FootPose;

#[derive(Debug, Clone, PartialEq)]
pub struct FootTrajectory {
    pub start: FootPose,
    pub target: FootPose,
    pub duration: f64,
    /// `coeffs[channel][k]` multiplies `t^k`; channels are x, z, pitch.
    pub coeffs: [[f64; 7]; 3],
}

fn channel(start: f64, target: f64, mid: f64, duration: f64) -> [f64; 7] {
    let d = target - start;
    let c = 64.0 * (mid - 0.5 * (start + target));
    let tau = [start, 0.0, 0.0, 10.0 * d + c, -15.0 * d - 3.0 * c, 6.0 * d + 3.0 * c, -c];
    let mut out = [0.0; 7];
    let mut scale = 1.0;
    for k in 0..7 {
        out[k] = tau[k] / scale;
        scale *= duration;
    }
    out
}

/// Swing from `start` to `target` over `duration`; the sole peaks `apex`
/// above the mean of the end heights at mid-swing. Horizontal and pitch
/// channels pass through the mean of their end values at mid-swing.
pub fn swing_trajectory(start: FootPose, target: FootPose, duration: f64, apex: f64) -> FootTrajectory {
    let mid = (start + target) * 0.5 + Vector3::new(0.0, apex, 0.0);
    FootTrajectory {
        start,
        target,
        duration,
        coeffs: std::array::from_fn(|i| channel(start[i], target[i], mid[i], duration)),
    }
}

impl FootTrajectory {
    /// Position, velocity and acceleration at `t`, clamped to `[0, T]`.
    pub fn eval(&self, t: f64) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        let t = t.clamp(0.0, self.duration);
        let mut p = Vector3::zeros();
        let mut v = Vector3::zeros();
        let mut a = Vector3::zeros();
        for (ch, c) in self.coeffs.iter().enumerate() {
            // Horner on the polynomial and its derivatives.
            let mut pp = 0.0;
            let mut vv = 0.0;
            let mut aa = 0.0;
            for k in (0..7).rev() {
                pp = pp * t + c[k];
                if k >= 1 {
                    vv = vv * t + k as f64 * c[k];
                }
                if k >= 2 {
                    aa = aa * t + (k * (k - 1)) as f64 * c[k];
                }
            }
            p[ch] = pp;
            v[ch] = vv;
            a[ch] = aa;
        }
        (p, v, a)
    }
}
