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

//! Parameters, layers and optimizers shared by the classifier and the score
//! network.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{GalaError, Result};

/// Named parameter tensors, addressed by integer id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> usize {
        self.names.push(name.into());
        self.values.push(value);
        self.values.len() - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn value(&self, id: usize) -> &Tensor {
        &self.values[id]
    }

    pub fn value_mut(&mut self, id: usize) -> &mut Tensor {
        &mut self.values[id]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.iter().all(|x| x.is_finite()))
    }

    /// Copies values from `other`, which must have identical names and shapes.
    pub fn load_from(&mut self, other: &ParamStore) -> Result<()> {
        if other.len() != self.len() {
            return Err(GalaError::Shape(format!("{} tensors, expected {}", other.len(), self.len())));
        }
        for i in 0..self.len() {
            if other.names[i] != self.names[i] || other.values[i].dim() != self.values[i].dim() {
                return Err(GalaError::Shape(format!(
                    "tensor {i}: got {} {:?}, expected {} {:?}",
                    other.names[i],
                    other.values[i].dim(),
                    self.names[i],
                    self.values[i].dim()
                )));
            }
        }
        self.values.clone_from(&other.values);
        Ok(())
    }

    pub fn to_records(&self) -> Vec<TensorRecord> {
        self.iter()
            .map(|(name, v)| TensorRecord {
                name: name.to_owned(),
                shape: [v.nrows(), v.ncols()],
                data: v.iter().copied().collect(),
            })
            .collect()
    }

    pub fn from_records(records: &[TensorRecord]) -> Result<Self> {
        let mut store = ParamStore::new();
        for r in records {
            let v = Array2::from_shape_vec((r.shape[0], r.shape[1]), r.data.clone())
                .map_err(|e| GalaError::Shape(format!("tensor {}: {e}", r.name)))?;
            store.add(r.name.clone(), v);
        }
        Ok(store)
    }
}

/// Row-major serialized tensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

/// Parameter-shaped gradient collection.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients(pub Vec<Tensor>);

impl Gradients {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Gradients(store.values.iter().map(|v| Array2::zeros(v.raw_dim())).collect())
    }

    pub fn accumulate(&mut self, id: usize, g: &Tensor) {
        self.0[id] += g;
    }

    pub fn add_scaled(&mut self, other: &Gradients, k: f64) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            a.scaled_add(k, b);
        }
    }

    pub fn scale(&mut self, k: f64) {
        for g in &mut self.0 {
            *g *= k;
        }
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|g| g.iter().map(|v| v * v).sum::<f64>()).sum::<f64>().sqrt()
    }
}

/// Glorot-uniform weight matrix.
pub fn glorot(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-limit..limit))
}

/// Affine map `x W + b` on row vectors.
#[derive(Clone, Copy, Debug)]
pub struct Linear {
    pub weight: usize,
    pub bias: usize,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        let weight = store.add(format!("{name}.weight"), glorot(fan_in, fan_out, rng));
        let bias = store.add(format!("{name}.bias"), Array2::zeros((1, fan_out)));
        Linear { weight, bias }
    }

    pub fn zeroed(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize) -> Self {
        let weight = store.add(format!("{name}.weight"), Array2::zeros((fan_in, fan_out)));
        let bias = store.add(format!("{name}.bias"), Array2::zeros((1, fan_out)));
        Linear { weight, bias }
    }

    pub fn forward(&self, tape: &mut Tape, p: &[Var], x: Var) -> Var {
        let h = tape.matmul(x, p[self.weight]);
        tape.add_row(h, p[self.bias])
    }

    pub fn fan_in(&self, store: &ParamStore) -> usize {
        store.value(self.weight).nrows()
    }
}

/// Stack of linear layers with ReLU between them (not after the last).
#[derive(Clone, Debug)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    /// `widths` lists input, hidden and output widths. With `zero_last` the
    /// final layer starts at zero so the network initially outputs zeros.
    pub fn new(store: &mut ParamStore, name: &str, widths: &[usize], zero_last: bool, rng: &mut impl Rng) -> Self {
        let n = widths.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let lname = format!("{name}.{i}");
                if zero_last && i == n - 1 {
                    Linear::zeroed(store, &lname, widths[i], widths[i + 1])
                } else {
                    Linear::new(store, &lname, widths[i], widths[i + 1], rng)
                }
            })
            .collect();
        Mlp { layers }
    }

    pub fn forward(&self, tape: &mut Tape, p: &[Var], mut x: Var) -> Var {
        for (i, layer) in self.layers.iter().enumerate() {
            x = layer.forward(tape, p, x);
            if i + 1 < self.layers.len() {
                x = tape.relu(x);
            }
        }
        x
    }
}

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(store: &ParamStore, lr: f64) -> Self {
        let zeros = Gradients::zeros_like(store).0;
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: zeros.clone(), v: zeros }
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        for (id, g) in grads.0.iter().enumerate() {
            let m = &mut self.m[id];
            let v = &mut self.v[id];
            let w = store.value_mut(id);
            ndarray::Zip::from(w).and(m).and(v).and(g).for_each(|w, m, v, &g| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *w -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
            });
        }
    }
}

/// Exponential moving average of parameters.
///
/// The effective decay is `min(momentum, (1 + n) / (10 + n))` after `n`
/// updates, so short runs are not pinned to the initialization.
#[derive(Clone, Debug)]
pub struct Ema {
    pub momentum: f64,
    updates: u64,
    shadow: ParamStore,
}

impl Ema {
    pub fn new(store: &ParamStore, momentum: f64) -> Self {
        Ema { momentum, updates: 0, shadow: store.clone() }
    }

    pub fn update(&mut self, store: &ParamStore) {
        let n = self.updates as f64;
        let decay = self.momentum.min((1.0 + n) / (10.0 + n));
        self.updates += 1;
        for id in 0..store.len() {
            let s = self.shadow.value_mut(id);
            s.zip_mut_with(store.value(id), |s, &p| *s = decay * *s + (1.0 - decay) * p);
        }
    }

    pub fn shadow(&self) -> &ParamStore {
        &self.shadow
    }
}
