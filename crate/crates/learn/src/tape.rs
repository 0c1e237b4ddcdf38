//! Reverse-mode automatic differentiation over a linear tape of matrix
//! operations.
//!
//! Nodes are appended in evaluation order, so a single backward sweep in
//! reverse order visits every node after all of its consumers.

use crate::mat::{gemm, Mat};

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Id(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Id, Id),
    Add(Id, Id),
    Sub(Id, Id),
    Mul(Id, Id),
    /// `a + r` with the 1 × n row `r` broadcast over rows.
    AddRow(Id, Id),
    /// `a ⊙ r` with the 1 × n row `r` broadcast over rows.
    MulRow(Id, Id),
    /// `a ⊙ c` with the m × 1 column `c` broadcast over columns.
    MulCol(Id, Id),
    Scale(Id, f64),
    AddScalar(Id),
    Sigmoid(Id),
    Tanh(Id),
    Elu(Id),
    Exp(Id),
    Log(Id),
    Square(Id),
    /// Gradient passes only strictly inside `(lo, hi)`.
    Clamp(Id, f64, f64),
    /// Elementwise minimum; ties route the gradient to the first input.
    Min(Id, Id),
    SliceCols(Id, usize),
    ConcatCols(Id, Id),
    /// Sum over columns (m × n → m × 1).
    SumCols(Id),
    /// Sum of all entries (→ 1 × 1).
    Sum(Id),
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Mat,
    grad: bool,
}

#[derive(Debug, Default, Clone)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients of one backward sweep, indexed by node.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Mat>>,
}

impl Gradients {
    /// Gradient of a node; zero-shaped-as-value if it did not influence
    /// the output.
    pub fn get(&self, id: Id) -> Option<&Mat> {
        self.grads[id.0].as_ref()
    }

    pub fn take(&mut self, id: Id) -> Option<Mat> {
        self.grads[id.0].take()
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Mat, grad: bool) -> Id {
        self.nodes.push(Node { op, value, grad });
        Id(self.nodes.len() - 1)
    }

    fn needs(&self, ids: &[Id]) -> bool {
        ids.iter().any(|i| self.nodes[i.0].grad)
    }

    /// Input that is not differentiated.
    pub fn constant(&mut self, value: Mat) -> Id {
        self.push(Op::Leaf, value, false)
    }

    /// Differentiable leaf (a copy of `value`).
    pub fn param(&mut self, value: &Mat) -> Id {
        self.push(Op::Leaf, value.clone(), true)
    }

    pub fn value(&self, id: Id) -> &Mat {
        &self.nodes[id.0].value
    }

    /// Scalar value of a 1 × 1 node.
    pub fn scalar(&self, id: Id) -> f64 {
        let v = self.value(id);
        assert_eq!(v.shape(), (1, 1), "not a scalar node");
        v.data[0]
    }

    pub fn matmul(&mut self, a: Id, b: Id) -> Id {
        let v = self.value(a).matmul(self.value(b));
        let g = self.needs(&[a, b]);
        self.push(Op::MatMul(a, b), v, g)
    }

    pub fn add(&mut self, a: Id, b: Id) -> Id {
        let v = self.value(a).zip_map(self.value(b), |x, y| x + y);
        let g = self.needs(&[a, b]);
        self.push(Op::Add(a, b), v, g)
    }

    pub fn sub(&mut self, a: Id, b: Id) -> Id {
        let v = self.value(a).zip_map(self.value(b), |x, y| x - y);
        let g = self.needs(&[a, b]);
        self.push(Op::Sub(a, b), v, g)
    }

    pub fn mul(&mut self, a: Id, b: Id) -> Id {
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y);
        let g = self.needs(&[a, b]);
        self.push(Op::Mul(a, b), v, g)
    }

    pub fn add_row(&mut self, a: Id, row: Id) -> Id {
        let (av, rv) = (self.value(a), self.value(row));
        assert_eq!((rv.rows, rv.cols), (1, av.cols), "row broadcast shape");
        let mut v = av.clone();
        for r in 0..v.rows {
            v.row_mut(r).iter_mut().zip(&rv.data).for_each(|(x, y)| *x += y);
        }
        let g = self.needs(&[a, row]);
        self.push(Op::AddRow(a, row), v, g)
    }

    pub fn mul_row(&mut self, a: Id, row: Id) -> Id {
        let (av, rv) = (self.value(a), self.value(row));
        assert_eq!((rv.rows, rv.cols), (1, av.cols), "row broadcast shape");
        let mut v = av.clone();
        for r in 0..v.rows {
            v.row_mut(r).iter_mut().zip(&rv.data).for_each(|(x, y)| *x *= y);
        }
        let g = self.needs(&[a, row]);
        self.push(Op::MulRow(a, row), v, g)
    }

    pub fn mul_col(&mut self, a: Id, col: Id) -> Id {
        let (av, cv) = (self.value(a), self.value(col));
        assert_eq!((cv.rows, cv.cols), (av.rows, 1), "column broadcast shape");
        let mut v = av.clone();
        for r in 0..v.rows {
            let s = cv.data[r];
            v.row_mut(r).iter_mut().for_each(|x| *x *= s);
        }
        let g = self.needs(&[a, col]);
        self.push(Op::MulCol(a, col), v, g)
    }

    pub fn scale(&mut self, a: Id, s: f64) -> Id {
        let v = self.value(a).map(|x| x * s);
        let g = self.needs(&[a]);
        self.push(Op::Scale(a, s), v, g)
    }

    pub fn add_scalar(&mut self, a: Id, s: f64) -> Id {
        let v = self.value(a).map(|x| x + s);
        let g = self.needs(&[a]);
        self.push(Op::AddScalar(a), v, g)
    }

    fn unary(&mut self, a: Id, op: Op, f: impl Fn(f64) -> f64) -> Id {
        let v = self.value(a).map(f);
        let g = self.needs(&[a]);
        self.push(op, v, g)
    }

    pub fn sigmoid(&mut self, a: Id) -> Id {
        self.unary(a, Op::Sigmoid(a), sigmoid)
    }

    pub fn tanh(&mut self, a: Id) -> Id {
        self.unary(a, Op::Tanh(a), f64::tanh)
    }

    pub fn elu(&mut self, a: Id) -> Id {
        self.unary(a, Op::Elu(a), elu)
    }

    pub fn exp(&mut self, a: Id) -> Id {
        self.unary(a, Op::Exp(a), f64::exp)
    }

    pub fn log(&mut self, a: Id) -> Id {
        self.unary(a, Op::Log(a), f64::ln)
    }

    pub fn square(&mut self, a: Id) -> Id {
        self.unary(a, Op::Square(a), |x| x * x)
    }

    pub fn clamp(&mut self, a: Id, lo: f64, hi: f64) -> Id {
        self.unary(a, Op::Clamp(a, lo, hi), |x| x.clamp(lo, hi))
    }

    pub fn min(&mut self, a: Id, b: Id) -> Id {
        let v = self.value(a).zip_map(self.value(b), |x, y| if x <= y { x } else { y });
        let g = self.needs(&[a, b]);
        self.push(Op::Min(a, b), v, g)
    }

    /// Columns `start .. start + len`.
    pub fn slice_cols(&mut self, a: Id, start: usize, len: usize) -> Id {
        let av = self.value(a);
        assert!(start + len <= av.cols, "column slice out of range");
        let mut v = Mat::zeros(av.rows, len);
        for r in 0..av.rows {
            v.row_mut(r).copy_from_slice(&av.row(r)[start..start + len]);
        }
        let g = self.needs(&[a]);
        self.push(Op::SliceCols(a, start), v, g)
    }

    pub fn concat_cols(&mut self, a: Id, b: Id) -> Id {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.rows, bv.rows, "row counts differ");
        let mut v = Mat::zeros(av.rows, av.cols + bv.cols);
        for r in 0..av.rows {
            v.row_mut(r)[..av.cols].copy_from_slice(av.row(r));
            v.row_mut(r)[av.cols..].copy_from_slice(bv.row(r));
        }
        let g = self.needs(&[a, b]);
        self.push(Op::ConcatCols(a, b), v, g)
    }

    pub fn sum_cols(&mut self, a: Id) -> Id {
        let av = self.value(a);
        let v = Mat::from_vec(av.rows, 1, (0..av.rows).map(|r| av.row(r).iter().sum()).collect());
        let g = self.needs(&[a]);
        self.push(Op::SumCols(a), v, g)
    }

    pub fn sum(&mut self, a: Id) -> Id {
        let v = Mat::filled(1, 1, self.value(a).sum());
        let g = self.needs(&[a]);
        self.push(Op::Sum(a), v, g)
    }

    pub fn mean(&mut self, a: Id) -> Id {
        let n = self.value(a).len() as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    /// Reverse sweep from the scalar node `out` (seed 1).
    pub fn backward(&self, out: Id) -> Gradients {
        assert_eq!(self.value(out).shape(), (1, 1), "backward needs a scalar output");
        let mut grads: Vec<Option<Mat>> = vec![None; self.nodes.len()];
        grads[out.0] = Some(Mat::filled(1, 1, 1.0));
        for i in (0..=out.0).rev() {
            if !self.nodes[i].grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Gradients { grads }
    }

    fn accumulate(&self, grads: &mut [Option<Mat>], id: Id, delta: Mat) {
        if !self.nodes[id.0].grad {
            return;
        }
        match &mut grads[id.0] {
            Some(g) => g.add_assign(&delta),
            slot => *slot = Some(delta),
        }
    }

    fn propagate(&self, i: usize, g: &Mat, grads: &mut [Option<Mat>]) {
        let node = &self.nodes[i];
        let y = &node.value;
        let val = |id: Id| &self.nodes[id.0].value;
        let wants = |id: Id| self.nodes[id.0].grad;
        match node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if wants(a) {
                    let mut da = Mat::zeros(val(a).rows, val(a).cols);
                    gemm(1.0, g, false, val(b), true, 0.0, &mut da);
                    self.accumulate(grads, a, da);
                }
                if wants(b) {
                    let mut db = Mat::zeros(val(b).rows, val(b).cols);
                    gemm(1.0, val(a), true, g, false, 0.0, &mut db);
                    self.accumulate(grads, b, db);
                }
            }
            Op::Add(a, b) => {
                self.accumulate(grads, a, g.clone());
                self.accumulate(grads, b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, a, g.clone());
                self.accumulate(grads, b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                if wants(a) {
                    self.accumulate(grads, a, g.zip_map(val(b), |x, y| x * y));
                }
                if wants(b) {
                    self.accumulate(grads, b, g.zip_map(val(a), |x, y| x * y));
                }
            }
            Op::AddRow(a, r) => {
                self.accumulate(grads, a, g.clone());
                if wants(r) {
                    self.accumulate(grads, r, g.col_sums());
                }
            }
            Op::MulRow(a, r) => {
                let rv = val(r);
                if wants(a) {
                    let mut da = g.clone();
                    for row in 0..da.rows {
                        da.row_mut(row).iter_mut().zip(&rv.data).for_each(|(x, y)| *x *= y);
                    }
                    self.accumulate(grads, a, da);
                }
                if wants(r) {
                    self.accumulate(grads, r, g.zip_map(val(a), |x, y| x * y).col_sums());
                }
            }
            Op::MulCol(a, c) => {
                let cv = val(c);
                if wants(a) {
                    let mut da = g.clone();
                    for row in 0..da.rows {
                        let s = cv.data[row];
                        da.row_mut(row).iter_mut().for_each(|x| *x *= s);
                    }
                    self.accumulate(grads, a, da);
                }
                if wants(c) {
                    let prod = g.zip_map(val(a), |x, y| x * y);
                    let dc = Mat::from_vec(prod.rows, 1, (0..prod.rows).map(|r| prod.row(r).iter().sum()).collect());
                    self.accumulate(grads, c, dc);
                }
            }
            Op::Scale(a, s) => self.accumulate(grads, a, g.map(|x| x * s)),
            Op::AddScalar(a) => self.accumulate(grads, a, g.clone()),
            Op::Sigmoid(a) => self.accumulate(grads, a, g.zip_map(y, |d, s| d * s * (1.0 - s))),
            Op::Tanh(a) => self.accumulate(grads, a, g.zip_map(y, |d, t| d * (1.0 - t * t))),
            Op::Elu(a) => {
                let x = val(a);
                let mut da = g.zip_map(y, |d, e| d * (e + 1.0));
                for (k, xv) in x.data.iter().enumerate() {
                    if *xv > 0.0 {
                        da.data[k] = g.data[k];
                    }
                }
                self.accumulate(grads, a, da);
            }
            Op::Exp(a) => self.accumulate(grads, a, g.zip_map(y, |d, e| d * e)),
            Op::Log(a) => self.accumulate(grads, a, g.zip_map(val(a), |d, x| d / x)),
            Op::Square(a) => self.accumulate(grads, a, g.zip_map(val(a), |d, x| 2.0 * d * x)),
            Op::Clamp(a, lo, hi) => {
                self.accumulate(grads, a, g.zip_map(val(a), |d, x| if x > lo && x < hi { d } else { 0.0 }))
            }
            Op::Min(a, b) => {
                let (av, bv) = (val(a), val(b));
                let mut da = g.clone();
                let mut db = g.clone();
                for k in 0..g.len() {
                    if av.data[k] <= bv.data[k] {
                        db.data[k] = 0.0;
                    } else {
                        da.data[k] = 0.0;
                    }
                }
                self.accumulate(grads, a, da);
                self.accumulate(grads, b, db);
            }
            Op::SliceCols(a, start) => {
                let av = val(a);
                let mut da = Mat::zeros(av.rows, av.cols);
                for r in 0..g.rows {
                    da.row_mut(r)[start..start + g.cols].copy_from_slice(g.row(r));
                }
                self.accumulate(grads, a, da);
            }
            Op::ConcatCols(a, b) => {
                let na = val(a).cols;
                if wants(a) {
                    let mut da = Mat::zeros(g.rows, na);
                    for r in 0..g.rows {
                        da.row_mut(r).copy_from_slice(&g.row(r)[..na]);
                    }
                    self.accumulate(grads, a, da);
                }
                if wants(b) {
                    let mut db = Mat::zeros(g.rows, g.cols - na);
                    for r in 0..g.rows {
                        db.row_mut(r).copy_from_slice(&g.row(r)[na..]);
                    }
                    self.accumulate(grads, b, db);
                }
            }
            Op::SumCols(a) => {
                let av = val(a);
                let mut da = Mat::zeros(av.rows, av.cols);
                for r in 0..av.rows {
                    let s = g.data[r];
                    da.row_mut(r).iter_mut().for_each(|x| *x = s);
                }
                self.accumulate(grads, a, da);
            }
            Op::Sum(a) => {
                let av = val(a);
                self.accumulate(grads, a, Mat::filled(av.rows, av.cols, g.data[0]));
            }
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}
