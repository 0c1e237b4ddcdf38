//! Network building blocks: dense layers, gated recurrent cells, MLPs.
//!
//! Every block has two forward paths: one recording onto a [`Graph`] for
//! training and a tape-free one for rollouts. Both perform the same
//! floating-point operations in the same order.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::mat::{gemm, Mat};
use crate::tape::{elu, sigmoid, Graph, Id};

/// Parameter access in a fixed order shared by binding, optimizers and
/// checkpoints.
pub trait Module {
    fn params(&self) -> Vec<&Mat>;
    fn params_mut(&mut self) -> Vec<&mut Mat>;

    fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Registers every parameter as a differentiable leaf.
    fn bind(&self, g: &mut Graph) -> Vec<Id> {
        self.params().into_iter().map(|p| g.param(p)).collect()
    }

    fn flat(&self) -> Vec<f64> {
        self.params().iter().flat_map(|p| p.data.iter().copied()).collect()
    }

    fn set_flat(&mut self, values: &[f64]) {
        let mut k = 0;
        for p in self.params_mut() {
            let n = p.len();
            p.data.copy_from_slice(&values[k..k + n]);
            k += n;
        }
        assert_eq!(k, values.len(), "flat parameter length mismatch");
    }
}

fn uniform(rows: usize, cols: usize, bound: f64, rng: &mut impl Rng) -> Mat {
    Mat::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-bound..bound)).collect())
}

/// `y = x·W + b` with `W` stored input-major (in × out).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub w: Mat,
    pub b: Mat,
}

impl Linear {
    /// Uniform ±1/√in initialization.
    pub fn new(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        Self {
            w: uniform(inputs, outputs, bound, rng),
            b: uniform(1, outputs, bound, rng),
        }
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            w: Mat::zeros(inputs, outputs),
            b: Mat::zeros(1, outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.w.rows
    }

    pub fn outputs(&self) -> usize {
        self.w.cols
    }

    pub fn forward_tape(g: &mut Graph, ids: &[Id], x: Id) -> Id {
        let y = g.matmul(x, ids[0]);
        g.add_row(y, ids[1])
    }

    pub fn forward(&self, x: &Mat) -> Mat {
        let mut y = Mat::zeros(x.rows, self.w.cols);
        gemm(1.0, x, false, &self.w, false, 0.0, &mut y);
        for r in 0..y.rows {
            y.row_mut(r).iter_mut().zip(&self.b.data).for_each(|(a, b)| *a += b);
        }
        y
    }
}

impl Module for Linear {
    fn params(&self) -> Vec<&Mat> {
        vec![&self.w, &self.b]
    }

    fn params_mut(&mut self) -> Vec<&mut Mat> {
        vec![&mut self.w, &mut self.b]
    }
}

/// Gated recurrent cell (reset, update, candidate gate blocks in that
/// column order):
///
/// ```text
/// r = σ(x·Wr + br + h·Ur + cr)      z = σ(x·Wz + bz + h·Uz + cz)
/// n = tanh(x·Wn + bn + r ⊙ (h·Un + cn))
/// h' = n + z ⊙ (h − n)
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruLayer {
    pub input: Linear,
    pub recurrent: Linear,
}

impl GruLayer {
    pub fn new(inputs: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        Self {
            input: Linear {
                w: uniform(inputs, 3 * hidden, bound, rng),
                b: uniform(1, 3 * hidden, bound, rng),
            },
            recurrent: Linear {
                w: uniform(hidden, 3 * hidden, bound, rng),
                b: uniform(1, 3 * hidden, bound, rng),
            },
        }
    }

    pub fn hidden(&self) -> usize {
        self.recurrent.w.rows
    }

    pub fn step_tape(g: &mut Graph, ids: &[Id], hidden: usize, x: Id, h: Id) -> Id {
        let gx = Linear::forward_tape(g, &ids[0..2], x);
        let gh = Linear::forward_tape(g, &ids[2..4], h);
        let xr = g.slice_cols(gx, 0, 2 * hidden);
        let hr = g.slice_cols(gh, 0, 2 * hidden);
        let pre = g.add(xr, hr);
        let gates = g.sigmoid(pre);
        let r = g.slice_cols(gates, 0, hidden);
        let z = g.slice_cols(gates, hidden, hidden);
        let xn = g.slice_cols(gx, 2 * hidden, hidden);
        let hn = g.slice_cols(gh, 2 * hidden, hidden);
        let rh = g.mul(r, hn);
        let npre = g.add(xn, rh);
        let n = g.tanh(npre);
        let diff = g.sub(h, n);
        let zd = g.mul(z, diff);
        g.add(n, zd)
    }

    pub fn step(&self, x: &Mat, h: &Mat) -> Mat {
        let hd = self.hidden();
        let gx = self.input.forward(x);
        let gh = self.recurrent.forward(h);
        let mut out = Mat::zeros(h.rows, hd);
        for row in 0..h.rows {
            let (ax, ah, hr) = (gx.row(row), gh.row(row), h.row(row));
            for j in 0..hd {
                let r = sigmoid(ax[j] + ah[j]);
                let z = sigmoid(ax[hd + j] + ah[hd + j]);
                let n = (ax[2 * hd + j] + r * ah[2 * hd + j]).tanh();
                out.set(row, j, n + z * (hr[j] - n));
            }
        }
        out
    }
}

impl Module for GruLayer {
    fn params(&self) -> Vec<&Mat> {
        vec![&self.input.w, &self.input.b, &self.recurrent.w, &self.recurrent.b]
    }

    fn params_mut(&mut self) -> Vec<&mut Mat> {
        vec![&mut self.input.w, &mut self.input.b, &mut self.recurrent.w, &mut self.recurrent.b]
    }
}

/// Feed-forward network with ELU on every layer but the last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    /// `sizes = [in, h1, ..., out]`.
    pub fn new(sizes: &[usize], rng: &mut impl Rng) -> Self {
        Self {
            layers: sizes.windows(2).map(|w| Linear::new(w[0], w[1], rng)).collect(),
        }
    }

    pub fn forward_tape(&self, g: &mut Graph, ids: &[Id], x: Id) -> Id {
        let mut y = x;
        let n = self.layers.len();
        for i in 0..n {
            y = Linear::forward_tape(g, &ids[2 * i..2 * i + 2], y);
            if i + 1 < n {
                y = g.elu(y);
            }
        }
        y
    }

    pub fn forward(&self, x: &Mat) -> Mat {
        let mut y = x.clone();
        let n = self.layers.len();
        for (i, l) in self.layers.iter().enumerate() {
            y = l.forward(&y);
            if i + 1 < n {
                y = y.map(elu);
            }
        }
        y
    }
}

impl Module for Mlp {
    fn params(&self) -> Vec<&Mat> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Mat> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tape_and_direct_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let gru = GruLayer::new(5, 4, &mut rng);
        let mlp = Mlp::new(&[4, 8, 3], &mut rng);
        let x = uniform(2, 5, 1.0, &mut rng);
        let h = uniform(2, 4, 1.0, &mut rng);
        let direct = mlp.forward(&gru.step(&x, &h));

        let mut g = Graph::new();
        let gid = gru.bind(&mut g);
        let mid = mlp.bind(&mut g);
        let xi = g.constant(x);
        let hi = g.constant(h);
        let h2 = GruLayer::step_tape(&mut g, &gid, 4, xi, hi);
        let y = mlp.forward_tape(&mut g, &mid, h2);
        let diff = g.value(y).zip_map(&direct, |a, b| (a - b).abs());
        assert!(diff.data.iter().all(|d| *d < 1e-14));
    }

    #[test]
    fn flat_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut mlp = Mlp::new(&[3, 5, 2], &mut rng);
        let flat = mlp.flat();
        assert_eq!(flat.len(), mlp.num_params());
        assert_eq!(mlp.num_params(), 3 * 5 + 5 + 5 * 2 + 2);
        let doubled: Vec<f64> = flat.iter().map(|v| 2.0 * v).collect();
        mlp.set_flat(&doubled);
        assert_eq!(mlp.flat(), doubled);
    }
}
