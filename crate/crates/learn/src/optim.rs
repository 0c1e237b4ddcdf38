//! Adam with global gradient-norm clipping.

use serde::{Deserialize, Serialize};

use crate::mat::Mat;
use crate::nn::Module;

/// Rescales `grads` so their joint L2 norm is at most `max_norm`; returns
/// the norm before clipping.
pub fn clip_grad_norm(grads: &mut [Mat], max_norm: f64) -> f64 {
    let norm = grads.iter().map(Mat::norm_sq).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        grads.iter_mut().for_each(|g| g.scale_assign(s));
    }
    norm
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub m: Vec<Mat>,
    pub v: Vec<Mat>,
    pub t: u64,
}

impl Adam {
    pub fn new(module: &impl Module, lr: f64) -> Self {
        let zeros: Vec<Mat> = module.params().iter().map(|p| Mat::zeros(p.rows, p.cols)).collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    pub fn step(&mut self, module: &mut impl Module, grads: &[Mat]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for (k, p) in module.params_mut().into_iter().enumerate() {
            let (m, v, g) = (&mut self.m[k], &mut self.v[k], &grads[k]);
            for i in 0..p.data.len() {
                m.data[i] = self.beta1 * m.data[i] + (1.0 - self.beta1) * g.data[i];
                v.data[i] = self.beta2 * v.data[i] + (1.0 - self.beta2) * g.data[i] * g.data[i];
                let mh = m.data[i] / c1;
                let vh = v.data[i] / c2;
                p.data[i] -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Linear;

    #[test]
    fn clipping_caps_the_norm() {
        let mut g = vec![Mat::filled(1, 2, 3.0), Mat::filled(1, 1, 4.0)];
        let n = clip_grad_norm(&mut g, 1.0);
        assert!((n - 34f64.sqrt()).abs() < 1e-12);
        let after = g.iter().map(Mat::norm_sq).sum::<f64>().sqrt();
        assert!((after - 1.0).abs() < 1e-12);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut l = Linear::zeros(2, 1);
        let mut adam = Adam::new(&l, 0.01);
        let grads = vec![Mat::from_vec(2, 1, vec![5.0, -0.1]), Mat::zeros(1, 1)];
        adam.step(&mut l, &grads);
        assert!((l.w.data[0] + 0.01).abs() < 1e-9 && (l.w.data[1] - 0.01).abs() < 1e-6);
        assert_eq!(l.b.data[0], 0.0);
    }
}
