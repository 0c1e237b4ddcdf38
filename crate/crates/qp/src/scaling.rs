//! Ruiz equilibration of the KKT data.

/// Row-major dense matrix used in the solver hot loop.
#[derive(Debug, Clone)]
pub(crate) struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Dense {
    pub fn from_nalgebra(m: &nalgebra::DMatrix<f64>) -> Self {
        let (rows, cols) = m.shape();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(m[(i, j)]);
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// out = self · v
    pub fn mul_vec(&self, v: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), v);
        }
    }

    /// out = selfᵀ · v
    pub fn tr_mul_vec(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Scaled problem data and the scaling that produced it.
///
/// The scaled problem is `P̂ = c·D P D`, `q̂ = c·D q`, `Â = E A D`,
/// `l̂ = E l`, `û = E u`; unscaled iterates are recovered as
/// `x = D x̂`, `z = E⁻¹ ẑ`, `y = E ŷ / c`.
#[derive(Debug, Clone)]
pub(crate) struct Scaled {
    pub p: Dense,
    pub q: Vec<f64>,
    pub a: Dense,
    pub l: Vec<f64>,
    pub u: Vec<f64>,
    pub d: Vec<f64>,
    pub e: Vec<f64>,
    pub c: f64,
}

const MIN_SCALE: f64 = 1e-4;
const MAX_SCALE: f64 = 1e4;

fn clamp_scale(norm: f64) -> f64 {
    if norm < MIN_SCALE {
        1.0
    } else {
        norm.min(MAX_SCALE)
    }
}

pub(crate) fn ruiz(
    mut p: Dense,
    mut q: Vec<f64>,
    mut a: Dense,
    mut l: Vec<f64>,
    mut u: Vec<f64>,
    iterations: usize,
) -> Scaled {
    let n = q.len();
    let m = l.len();
    let mut d = vec![1.0; n];
    let mut e = vec![1.0; m];
    let mut c = 1.0;
    let mut dd = vec![0.0; n];
    let mut de = vec![0.0; m];

    for _ in 0..iterations {
        // Column norms of K = [P Aᵀ; A 0].
        for j in 0..n {
            let mut norm: f64 = 0.0;
            for i in 0..n {
                norm = norm.max(p.at(i, j).abs());
            }
            for i in 0..m {
                norm = norm.max(a.at(i, j).abs());
            }
            dd[j] = 1.0 / clamp_scale(norm).sqrt();
        }
        for i in 0..m {
            let norm = a.row(i).iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
            de[i] = 1.0 / clamp_scale(norm).sqrt();
        }
        for i in 0..n {
            for j in 0..n {
                p.data[i * n + j] *= dd[i] * dd[j];
            }
            q[i] *= dd[i];
            d[i] *= dd[i];
        }
        for i in 0..m {
            for j in 0..n {
                a.data[i * n + j] *= de[i] * dd[j];
            }
            e[i] *= de[i];
        }
        // Cost scaling.
        let mut mean_col = 0.0;
        for j in 0..n {
            let mut norm: f64 = 0.0;
            for i in 0..n {
                norm = norm.max(p.at(i, j).abs());
            }
            mean_col += norm;
        }
        if n > 0 {
            mean_col /= n as f64;
        }
        let q_norm = q.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        let gamma = 1.0 / clamp_scale(mean_col.max(q_norm));
        p.data.iter_mut().for_each(|v| *v *= gamma);
        q.iter_mut().for_each(|v| *v *= gamma);
        c *= gamma;
    }
    for i in 0..m {
        l[i] *= e[i];
        u[i] *= e[i];
    }
    Scaled {
        p,
        q,
        a,
        l,
        u,
        d,
        e,
        c,
    }
}
