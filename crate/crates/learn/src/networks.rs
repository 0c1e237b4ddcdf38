//! Recurrent Gaussian actor and privileged critic.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::mat::Mat;
use crate::nn::{GruLayer, Linear, Mlp, Module};
use crate::tape::{Graph, Id};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// Recurrent state: one `batch × H` matrix per layer.
pub type Hidden = Vec<Mat>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyNet {
    pub layers: Vec<GruLayer>,
    /// Mean of the pre-squash action, zero-initialized.
    pub head: Linear,
    /// State-independent log standard deviation (1 × action dim).
    pub log_std: Mat,
}

/// Graph handles of a bound [`PolicyNet`].
#[derive(Debug, Clone)]
pub struct PolicyIds {
    pub all: Vec<Id>,
}

impl PolicyIds {
    fn layer(&self, i: usize) -> &[Id] {
        &self.all[4 * i..4 * i + 4]
    }

    fn head(&self) -> &[Id] {
        let n = self.all.len();
        &self.all[n - 3..n - 1]
    }

    pub fn log_std(&self) -> Id {
        *self.all.last().unwrap()
    }
}

impl PolicyNet {
    pub fn new(obs_dim: usize, act_dim: usize, hidden: usize, layers: usize, init_log_std: f64, rng: &mut impl Rng) -> Self {
        let layers = (0..layers)
            .map(|i| GruLayer::new(if i == 0 { obs_dim } else { hidden }, hidden, rng))
            .collect();
        Self {
            layers,
            head: Linear::zeros(hidden, act_dim),
            log_std: Mat::filled(1, act_dim, init_log_std),
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.layers[0].input.inputs()
    }

    pub fn act_dim(&self) -> usize {
        self.head.outputs()
    }

    pub fn hidden_size(&self) -> usize {
        self.layers[0].hidden()
    }

    pub fn initial_state(&self, batch: usize) -> Hidden {
        self.layers.iter().map(|l| Mat::zeros(batch, l.hidden())).collect()
    }

    pub fn bind_ids(&self, g: &mut Graph) -> PolicyIds {
        PolicyIds { all: self.bind(g) }
    }

    /// One recurrent step on the tape; returns the action mean and the new
    /// per-layer hidden states.
    pub fn step_tape(&self, g: &mut Graph, ids: &PolicyIds, x: Id, h: &[Id]) -> (Id, Vec<Id>) {
        let mut input = x;
        let mut next = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter().enumerate() {
            let hn = GruLayer::step_tape(g, ids.layer(i), l.hidden(), input, h[i]);
            next.push(hn);
            input = hn;
        }
        (Linear::forward_tape(g, ids.head(), input), next)
    }

    /// Clamped log-std on the tape (1 × act_dim).
    pub fn log_std_tape(&self, g: &mut Graph, ids: &PolicyIds) -> Id {
        g.clamp(ids.log_std(), LOG_STD_MIN, LOG_STD_MAX)
    }

    /// Tape-free step: `(mean, new hidden)` for a batch of observations.
    pub fn step(&self, x: &Mat, h: &Hidden) -> (Mat, Hidden) {
        let mut input = x.clone();
        let mut next = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter().enumerate() {
            let hn = l.step(&input, &h[i]);
            input = hn.clone();
            next.push(hn);
        }
        (self.head.forward(&input), next)
    }

    pub fn std(&self) -> Vec<f64> {
        self.log_std.data.iter().map(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX).exp()).collect()
    }
}

impl Module for PolicyNet {
    fn params(&self) -> Vec<&Mat> {
        let mut p: Vec<&Mat> = self.layers.iter().flat_map(|l| l.params()).collect();
        p.extend(self.head.params());
        p.push(&self.log_std);
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Mat> {
        let mut p: Vec<&mut Mat> = self.layers.iter_mut().flat_map(|l| l.params_mut()).collect();
        p.extend(self.head.params_mut());
        p.push(&mut self.log_std);
        p
    }
}

/// Value network on privileged observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticNet {
    pub mlp: Mlp,
}

impl CriticNet {
    /// `in → hidden[0] → … → 1`, ELU activations.
    pub fn new(input: usize, hidden: &[usize], rng: &mut impl Rng) -> Self {
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        Self { mlp: Mlp::new(&sizes, rng) }
    }

    pub fn input_dim(&self) -> usize {
        self.mlp.layers[0].inputs()
    }

    /// Values of a batch (rows) of privileged observations.
    pub fn values(&self, x: &Mat) -> Vec<f64> {
        self.mlp.forward(x).data
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.values(&Mat::row_vector(x))[0]
    }

    pub fn forward_tape(&self, g: &mut Graph, ids: &[Id], x: Id) -> Id {
        self.mlp.forward_tape(g, ids, x)
    }
}

impl Module for CriticNet {
    fn params(&self) -> Vec<&Mat> {
        self.mlp.params()
    }

    fn params_mut(&mut self) -> Vec<&mut Mat> {
        self.mlp.params_mut()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_head_gives_zero_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = PolicyNet::new(7, 3, 8, 2, -1.0, &mut rng);
        let (mean, h) = net.step(&Mat::filled(1, 7, 0.3), &net.initial_state(1));
        assert!(mean.data.iter().all(|v| *v == 0.0));
        assert_eq!(h.len(), 2);
        assert!(net.std().iter().all(|s| (s - (-1.0f64).exp()).abs() < 1e-15));
    }

    #[test]
    fn parameter_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = PolicyNet::new(29, 6, 64, 2, -1.0, &mut rng);
        let gru = |i: usize| i * 192 + 192 + 64 * 192 + 192;
        assert_eq!(net.num_params(), gru(29) + gru(64) + 64 * 6 + 6 + 6);
        let critic = CriticNet::new(55, &[512, 256, 256], &mut rng);
        assert_eq!(critic.num_params(), 55 * 512 + 512 + 512 * 256 + 256 + 256 * 256 + 256 + 256 + 1);
    }
}
