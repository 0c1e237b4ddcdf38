//! Squashed-Gaussian action distribution and the training losses.
//!
//! Actions are sampled as `u ~ N(μ, σ²)` and applied as `s·tanh(u)`. All
//! likelihoods are evaluated on `u`; the squashing Jacobian depends only on
//! the sample, so it cancels in probability ratios and has no parameter
//! gradient.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::mat::Mat;
use crate::tape::{Graph, Id};

/// Bound on |tanh(u)| when inverting a torque into the pre-squash space.
/// Saturated supervision targets would otherwise sit at large |u| and
/// inflate the fitted std.
pub const SQUASH_LIMIT: f64 = 0.9;

pub fn sample_gaussian(mean: &[f64], std: &[f64], rng: &mut impl Rng) -> Vec<f64> {
    mean.iter()
        .zip(std)
        .map(|(m, s)| {
            let n: f64 = rng.sample(StandardNormal);
            m + s * n
        })
        .collect()
}

/// Diagonal Gaussian log-density of `u`.
pub fn log_prob(u: &[f64], mean: &[f64], std: &[f64]) -> f64 {
    u.iter()
        .zip(mean)
        .zip(std)
        .map(|((u, m), s)| {
            let z = (u - m) / s;
            -0.5 * z * z - s.ln() - 0.5 * (2.0 * PI).ln()
        })
        .sum()
}

/// Log-density of the squashed action `a = s·tanh(u)` (change of variables).
pub fn squashed_log_prob(u: &[f64], mean: &[f64], std: &[f64], scale: &[f64]) -> f64 {
    let jac: f64 = u.iter().zip(scale).map(|(u, s)| (s * (1.0 - u.tanh().powi(2))).ln()).sum();
    log_prob(u, mean, std) - jac
}

pub fn squash(u: &[f64], scale: &[f64]) -> Vec<f64> {
    u.iter().zip(scale).map(|(u, s)| s * u.tanh()).collect()
}

/// Pre-squash value whose squashed image is `a` (clipped to the bound).
pub fn unsquash(a: &[f64], scale: &[f64]) -> Vec<f64> {
    a.iter()
        .zip(scale)
        .map(|(a, s)| (a / s).clamp(-SQUASH_LIMIT, SQUASH_LIMIT).atanh())
        .collect()
}

/// Per-row log-density (B × 1) of constant samples `u` under `N(mean, e^{2·log_std})`.
pub fn gaussian_log_prob_tape(g: &mut Graph, u: Id, mean: Id, log_std: Id) -> Id {
    let dim = g.value(u).cols as f64;
    let diff = g.sub(u, mean);
    let neg = g.scale(log_std, -1.0);
    let inv_std = g.exp(neg);
    let z = g.mul_row(diff, inv_std);
    let z2 = g.square(z);
    let quad = g.sum_cols(z2);
    let half = g.scale(quad, -0.5);
    let ls_sum = g.sum(log_std);
    let neg_ls = g.scale(ls_sum, -1.0);
    let lp = g.add_row(half, neg_ls);
    g.add_scalar(lp, -0.5 * dim * (2.0 * PI).ln())
}

/// Entropy of the diagonal Gaussian (scalar node).
pub fn gaussian_entropy_tape(g: &mut Graph, log_std: Id) -> Id {
    let dim = g.value(log_std).cols as f64;
    let s = g.sum(log_std);
    g.add_scalar(s, 0.5 * dim * (1.0 + (2.0 * PI).ln()))
}

/// `Σ mask·x / Σ mask` for a B × 1 column `x`.
pub fn masked_mean_tape(g: &mut Graph, x: Id, mask: &Mat) -> Id {
    let total: f64 = mask.sum();
    let m = g.constant(mask.clone());
    let xm = g.mul(x, m);
    let s = g.sum(xm);
    g.scale(s, 1.0 / total.max(1.0))
}

/// Clipped surrogate terms `min(ρ·Â, clip(ρ, 1−ε, 1+ε)·Â)` (B × 1).
pub fn clipped_surrogate_tape(g: &mut Graph, log_prob: Id, old_log_prob: &Mat, advantages: &Mat, clip: f64) -> Id {
    let old = g.constant(old_log_prob.clone());
    let adv = g.constant(advantages.clone());
    let diff = g.sub(log_prob, old);
    let ratio = g.exp(diff);
    let unclipped = g.mul(ratio, adv);
    let clipped_ratio = g.clamp(ratio, 1.0 - clip, 1.0 + clip);
    let clipped = g.mul(clipped_ratio, adv);
    g.min(unclipped, clipped)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nll_at_mean_is_log_normalizer() {
        let u = [0.3, -0.2, 0.1, 0.0, 1.0, -1.0];
        let std = [1.0; 6];
        let nll = -log_prob(&u, &u, &std);
        assert!((nll - 6.0 * 0.5 * (2.0 * PI).ln()).abs() < 1e-12);
        assert!((nll - 5.5136).abs() < 1e-4);
        let sigma = [0.5, 0.7, 1.3, 2.0, 0.1, 1.0];
        let expect: f64 = sigma.iter().map(|s: &f64| (s * (2.0 * PI).sqrt()).ln()).sum();
        assert!((-log_prob(&u, &u, &sigma) - expect).abs() < 1e-12);
    }

    #[test]
    fn tape_log_prob_matches_direct() {
        let mut g = Graph::new();
        let u = g.constant(Mat::from_rows(&[&[0.1, -0.4], &[1.0, 0.2]]));
        let m = g.constant(Mat::from_rows(&[&[0.0, 0.1], &[0.5, -0.3]]));
        let ls = g.constant(Mat::row_vector(&[-0.5, 0.3]));
        let lp = gaussian_log_prob_tape(&mut g, u, m, ls);
        let std = [(-0.5f64).exp(), 0.3f64.exp()];
        assert!((g.value(lp).data[0] - log_prob(&[0.1, -0.4], &[0.0, 0.1], &std)).abs() < 1e-12);
        assert!((g.value(lp).data[1] - log_prob(&[1.0, 0.2], &[0.5, -0.3], &std)).abs() < 1e-12);
    }

    #[test]
    fn squash_round_trip_and_density() {
        let scale = [25.0, 30.0];
        let a = [10.0, -12.0];
        let u = unsquash(&a, &scale);
        let back = squash(&u, &scale);
        assert!((back[0] - a[0]).abs() < 1e-12 && (back[1] - a[1]).abs() < 1e-12);
        // Saturated requests are clipped to the squash limit.
        let u = unsquash(&[100.0, -100.0], &scale);
        assert!((u[0] - SQUASH_LIMIT.atanh()).abs() < 1e-12 && (u[1] + SQUASH_LIMIT.atanh()).abs() < 1e-12);
        // Density integrates to one over the squashed range (1-D check).
        let n = 200_000;
        let (m, s, sc) = (0.3, 0.8, 2.0);
        let mut total = 0.0;
        for k in 0..n {
            let a = -sc + (k as f64 + 0.5) * 2.0 * sc / n as f64;
            let u = (a / sc).atanh();
            total += squashed_log_prob(&[u], &[m], &[s], &[sc]).exp() * 2.0 * sc / n as f64;
        }
        assert!((total - 1.0).abs() < 1e-3, "{total}");
    }

    #[test]
    fn surrogate_clip_zeroes_gradient() {
        let mut g = Graph::new();
        let lp = g.param(&Mat::from_vec(2, 1, vec![0.5, 0.05]));
        let old = Mat::from_vec(2, 1, vec![0.0, 0.0]);
        let adv = Mat::from_vec(2, 1, vec![1.0, 1.0]);
        let s = clipped_surrogate_tape(&mut g, lp, &old, &adv, 0.2);
        let total = g.sum(s);
        let grads = g.backward(total);
        let d = grads.get(lp).unwrap();
        // ρ = e^0.5 > 1.2 with Â > 0: clipped, zero gradient.
        assert_eq!(d.data[0], 0.0);
        assert!((d.data[1] - 0.05f64.exp()).abs() < 1e-12);
    }
}
