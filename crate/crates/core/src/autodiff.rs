// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Reverse-mode automatic differentiation over dense `f64` matrices.
//!
//! A [`Tape`] records every operation of one forward pass. Values are kept on
//! the tape, so a [`Var`] is just an index. Calling [`Tape::backward`] on a
//! 1x1 output walks the tape in reverse and returns the adjoint of every
//! node; [`Tape::param_grads`] folds those into parameter-shaped gradients.

use ndarray::{s, Array2, Axis, Zip};

use crate::nn::{Gradients, ParamStore};

pub type Tensor = Array2<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    /// `a` (n x d) plus a broadcast row `b` (1 x d).
    AddRow(Var, Var),
    MulConst(Var, Tensor),
    Scale(Var, f64),
    Relu(Var),
    SumRows(Var),
    MeanRows(Var),
    SumAll(Var),
    LogSoftmaxRows(Var),
    SoftmaxRows(Var),
    /// Row softmax restricted to entries where the mask is nonzero.
    MaskedSoftmaxRows(Var),
    Transpose(Var),
    Reshape(Var),
    ConcatCols(Vec<Var>),
    GatherRows(Var, Vec<usize>),
    Pick(Var, usize, usize),
}

struct Node {
    value: Tensor,
    op: Op,
    param: Option<usize>,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints of every tape node, indexed by [`Var`].
pub struct Adjoints(Vec<Option<Tensor>>);

impl Adjoints {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.0[v.0].as_ref()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op, param: None });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A constant input; receives an adjoint but no parameter gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn scalar_constant(&mut self, v: f64) -> Var {
        self.push(Array2::from_elem((1, 1), v), Op::Leaf)
    }

    /// Places every parameter of `store` on the tape; the returned vector is
    /// indexed by parameter id.
    pub fn bind(&mut self, store: &ParamStore) -> Vec<Var> {
        (0..store.len())
            .map(|id| {
                let v = self.push(store.value(id).clone(), Op::Leaf);
                self.nodes[v.0].param = Some(id);
                v
            })
            .collect()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) * self.value(b);
        self.push(v, Op::Mul(a, b))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        assert_eq!(self.value(row).nrows(), 1, "add_row expects a 1 x d row");
        let v = self.value(a) + self.value(row);
        self.push(v, Op::AddRow(a, row))
    }

    pub fn mul_const(&mut self, a: Var, c: Tensor) -> Var {
        let v = self.value(a) * &c;
        self.push(v, Op::MulConst(a, c))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let v = self.value(a) * k;
        self.push(v, Op::Scale(a, k))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x.max(0.0));
        self.push(v, Op::Relu(a))
    }

    pub fn sum_rows(&mut self, a: Var) -> Var {
        let v = self.value(a).sum_axis(Axis(0)).insert_axis(Axis(0));
        self.push(v, Op::SumRows(a))
    }

    pub fn mean_rows(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let v = x.sum_axis(Axis(0)).insert_axis(Axis(0)) / x.nrows() as f64;
        self.push(v, Op::MeanRows(a))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let v = Array2::from_elem((1, 1), self.value(a).sum());
        self.push(v, Op::SumAll(a))
    }

    pub fn log_softmax_rows(&mut self, a: Var) -> Var {
        let v = log_softmax_rows(self.value(a));
        self.push(v, Op::LogSoftmaxRows(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let v = log_softmax_rows(self.value(a)).mapv(f64::exp);
        self.push(v, Op::SoftmaxRows(a))
    }

    /// Softmax of each row over the entries where `mask` is nonzero; masked
    /// entries come out as exactly zero. Every row needs one unmasked entry.
    pub fn masked_softmax_rows(&mut self, a: Var, mask: &Tensor) -> Var {
        let x = self.value(a);
        assert_eq!(x.dim(), mask.dim());
        let mut out = Array2::zeros(x.raw_dim());
        for ((mut o, xr), mr) in out.rows_mut().into_iter().zip(x.rows()).zip(mask.rows()) {
            let max = xr.iter().zip(mr).filter(|(_, &m)| m != 0.0).map(|(&v, _)| v).fold(f64::NEG_INFINITY, f64::max);
            assert!(max.is_finite(), "masked softmax row without unmasked entries");
            let mut total = 0.0;
            for ((ov, &xv), &mv) in o.iter_mut().zip(xr).zip(mr) {
                if mv != 0.0 {
                    *ov = (xv - max).exp();
                    total += *ov;
                }
            }
            o /= total;
        }
        self.push(out, Op::MaskedSoftmaxRows(a))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a).t().to_owned();
        self.push(v, Op::Transpose(a))
    }

    /// Row-major reshape.
    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Var {
        let x = self.value(a);
        let data: Vec<f64> = x.iter().copied().collect();
        let v = Array2::from_shape_vec((rows, cols), data).expect("reshape keeps the element count");
        self.push(v, Op::Reshape(a))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let v = ndarray::concatenate(Axis(1), &views).expect("concat_cols needs equal row counts");
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    /// Row `i` of the result is row `index[i]` of `a`; repeats are allowed.
    pub fn gather_rows(&mut self, a: Var, index: Vec<usize>) -> Var {
        let v = self.value(a).select(Axis(0), &index);
        self.push(v, Op::GatherRows(a, index))
    }

    /// The single entry `a[r, c]` as a 1x1 node.
    pub fn pick(&mut self, a: Var, r: usize, c: usize) -> Var {
        let v = Array2::from_elem((1, 1), self.value(a)[[r, c]]);
        self.push(v, Op::Pick(a, r, c))
    }

    /// Reverse sweep from a 1x1 `output`.
    pub fn backward(&self, output: Var) -> Adjoints {
        assert_eq!(self.value(output).dim(), (1, 1), "backward needs a scalar output");
        let mut adj: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        adj[output.0] = Some(Array2::ones((1, 1)));

        fn acc(adj: &mut [Option<Tensor>], v: Var, g: Tensor) {
            match &mut adj[v.0] {
                Some(existing) => *existing += &g,
                slot @ None => *slot = Some(g),
            }
        }

        for idx in (0..=output.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let ga = g.dot(&self.value(*b).t());
                    let gb = self.value(*a).t().dot(&g);
                    acc(&mut adj, *a, ga);
                    acc(&mut adj, *b, gb);
                }
                Op::Add(a, b) => {
                    acc(&mut adj, *a, g.clone());
                    acc(&mut adj, *b, g.clone());
                }
                Op::Sub(a, b) => {
                    acc(&mut adj, *a, g.clone());
                    acc(&mut adj, *b, -&g);
                }
                Op::Mul(a, b) => {
                    acc(&mut adj, *a, &g * self.value(*b));
                    acc(&mut adj, *b, &g * self.value(*a));
                }
                Op::AddRow(a, row) => {
                    acc(&mut adj, *row, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(&mut adj, *a, g.clone());
                }
                Op::MulConst(a, c) => acc(&mut adj, *a, &g * c),
                Op::Scale(a, k) => acc(&mut adj, *a, &g * *k),
                Op::Relu(a) => {
                    let mut ga = g.clone();
                    Zip::from(&mut ga).and(&node.value).for_each(|gv, &y| {
                        if y <= 0.0 {
                            *gv = 0.0;
                        }
                    });
                    acc(&mut adj, *a, ga);
                }
                Op::SumRows(a) => {
                    let n = self.value(*a).nrows();
                    let ga = g.broadcast((n, g.ncols())).expect("row broadcast").to_owned();
                    acc(&mut adj, *a, ga);
                }
                Op::MeanRows(a) => {
                    let n = self.value(*a).nrows();
                    let ga = g.broadcast((n, g.ncols())).expect("row broadcast").to_owned() / n as f64;
                    acc(&mut adj, *a, ga);
                }
                Op::SumAll(a) => {
                    let ga = Array2::from_elem(self.value(*a).raw_dim(), g[[0, 0]]);
                    acc(&mut adj, *a, ga);
                }
                Op::LogSoftmaxRows(a) => {
                    // d/dx = g - softmax * rowsum(g)
                    let p = node.value.mapv(f64::exp);
                    let gsum = g.sum_axis(Axis(1)).insert_axis(Axis(1));
                    let ga = &g - &(&p * &gsum);
                    acc(&mut adj, *a, ga);
                }
                Op::SoftmaxRows(a) | Op::MaskedSoftmaxRows(a) => {
                    // d/dx = p * (g - rowsum(g * p)); masked entries have p = 0
                    let p = &node.value;
                    let dot = (&g * p).sum_axis(Axis(1)).insert_axis(Axis(1));
                    let ga = p * &(&g - &dot);
                    acc(&mut adj, *a, ga);
                }
                Op::Transpose(a) => acc(&mut adj, *a, g.t().to_owned()),
                Op::Reshape(a) => {
                    let (r, c) = self.value(*a).dim();
                    let data: Vec<f64> = g.iter().copied().collect();
                    acc(&mut adj, *a, Array2::from_shape_vec((r, c), data).expect("reshape back"));
                }
                Op::ConcatCols(parts) => {
                    let mut start = 0;
                    for p in parts {
                        let w = self.value(*p).ncols();
                        acc(&mut adj, *p, g.slice(s![.., start..start + w]).to_owned());
                        start += w;
                    }
                }
                Op::GatherRows(a, index) => {
                    let mut ga = Array2::zeros(self.value(*a).raw_dim());
                    for (out_row, &src) in index.iter().enumerate() {
                        let mut dst = ga.row_mut(src);
                        dst += &g.row(out_row);
                    }
                    acc(&mut adj, *a, ga);
                }
                Op::Pick(a, r, c) => {
                    let mut ga = Array2::zeros(self.value(*a).raw_dim());
                    ga[[*r, *c]] = g[[0, 0]];
                    acc(&mut adj, *a, ga);
                }
            }
            adj[idx] = Some(g);
        }
        Adjoints(adj)
    }

    /// Gradient of `output` with respect to every parameter bound from `store`.
    /// Parameters that did not influence the output get zeros.
    pub fn param_grads(&self, output: Var, store: &ParamStore) -> Gradients {
        let adj = self.backward(output);
        let mut grads = Gradients::zeros_like(store);
        for (i, node) in self.nodes.iter().enumerate() {
            if let (Some(pid), Some(g)) = (node.param, &adj.0[i]) {
                grads.accumulate(pid, g);
            }
        }
        grads
    }
}

/// Numerically stable row-wise log-softmax.
pub fn log_softmax_rows(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - lse);
    }
    out
}
