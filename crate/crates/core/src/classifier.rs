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

//! GCN graph classifier: symmetric-normalized message passing, global
//! pooling, and a two-layer softmax head.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{GalaError, Result};
use crate::graph::{Dataset, Graph};
use crate::nn::{Adam, Gradients, Linear, Mlp, ParamStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    Mean,
    Sum,
}

impl std::str::FromStr for Pooling {
    type Err = GalaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Pooling::Mean),
            "sum" => Ok(Pooling::Sum),
            other => Err(GalaError::Config(format!("unknown pooling {other:?}"))),
        }
    }
}

impl std::fmt::Display for Pooling {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Pooling::Mean => "mean",
            Pooling::Sum => "sum",
        })
    }
}

/// Architecture of the classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub pooling: Pooling,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig { num_layers: 3, hidden_dim: 64, pooling: Pooling::Mean }
    }
}

/// Optimization settings for supervised training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { lr: 1e-3, epochs: 100, batch_size: 64, seed: 0 }
    }
}

/// Softmax output of the classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelDistribution {
    pub probs: Vec<f64>,
}

impl LabelDistribution {
    pub fn confidence(&self) -> f64 {
        self.probs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Argmax with ties going to the lowest index.
    pub fn predicted_class(&self) -> usize {
        let mut best = 0;
        for (c, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = c;
            }
        }
        best
    }
}

/// `D^{-1/2} (A + I) D^{-1/2}` with `D` the degree matrix of `A + I`.
pub fn normalized_adjacency(g: &Graph) -> Array2<f64> {
    let mut a = g.adjacency_matrix();
    for i in 0..g.node_count() {
        a[[i, i]] = 1.0;
    }
    let inv_sqrt: Array1<f64> = a.sum_axis(Axis(1)).mapv(|d| 1.0 / d.sqrt());
    for ((i, j), v) in a.indexed_iter_mut() {
        *v *= inv_sqrt[i] * inv_sqrt[j];
    }
    a
}

/// Mean or sum over the rows of a node-embedding matrix.
pub fn global_pool(embeddings: &Array2<f64>, kind: Pooling) -> Result<Array1<f64>> {
    if embeddings.nrows() == 0 {
        return Err(GalaError::DegenerateInput("pooling an empty embedding matrix".into()));
    }
    Ok(match kind {
        Pooling::Mean => embeddings.mean_axis(Axis(0)).expect("nonempty"),
        Pooling::Sum => embeddings.sum_axis(Axis(0)),
    })
}

#[derive(Clone, Debug)]
pub struct ClassifierModel {
    config: ClassifierConfig,
    input_dim: usize,
    num_classes: usize,
    store: ParamStore,
    layers: Vec<Linear>,
    head: Mlp,
    /// Hash of the training configuration that produced the parameters.
    pub config_hash: String,
}

impl ClassifierModel {
    pub fn new(config: ClassifierConfig, input_dim: usize, num_classes: usize, seed: u64) -> Result<Self> {
        if config.num_layers == 0 || config.hidden_dim == 0 || input_dim == 0 || num_classes == 0 {
            return Err(GalaError::Argument("classifier widths and depth must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let layers = (0..config.num_layers)
            .map(|k| {
                let fan_in = if k == 0 { input_dim } else { config.hidden_dim };
                Linear::new(&mut store, &format!("gcn.{k}"), fan_in, config.hidden_dim, &mut rng)
            })
            .collect();
        let h = config.hidden_dim;
        let head = Mlp::new(&mut store, "head", &[h, h, num_classes], false, &mut rng);
        Ok(ClassifierModel { config, input_dim, num_classes, store, layers, head, config_hash: String::new() })
    }

    pub fn config(&self) -> &ClassifierConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn check_input(&self, g: &Graph) -> Result<()> {
        if g.attribute_dim() != self.input_dim {
            return Err(GalaError::Shape(format!(
                "graph has {} attribute columns, classifier expects {}",
                g.attribute_dim(),
                self.input_dim
            )));
        }
        if g.node_count() == 0 {
            return Err(GalaError::DegenerateInput("graph without nodes".into()));
        }
        Ok(())
    }

    fn encode_on_tape(&self, tape: &mut Tape, p: &[Var], g: &Graph) -> Var {
        let a_hat = tape.constant(normalized_adjacency(g));
        let mut h = tape.constant(g.attributes().clone());
        for layer in &self.layers {
            let agg = tape.matmul(a_hat, h);
            let z = layer.forward(tape, p, agg);
            h = tape.relu(z);
        }
        h
    }

    /// Records the forward pass for `g` and returns its 1 x C logits.
    pub fn logits_on_tape(&self, tape: &mut Tape, p: &[Var], g: &Graph) -> Result<Var> {
        self.check_input(g)?;
        let h = self.encode_on_tape(tape, p, g);
        let z = match self.config.pooling {
            Pooling::Mean => tape.mean_rows(h),
            Pooling::Sum => tape.sum_rows(h),
        };
        Ok(self.head.forward(tape, p, z))
    }

    /// Records `log p(G)` for `g` as a 1 x C node.
    pub fn log_probs_on_tape(&self, tape: &mut Tape, p: &[Var], g: &Graph) -> Result<Var> {
        let logits = self.logits_on_tape(tape, p, g)?;
        Ok(tape.log_softmax_rows(logits))
    }

    /// Node embeddings after all message-passing rounds, |V| x hidden_dim.
    pub fn encode_nodes(&self, g: &Graph) -> Result<Array2<f64>> {
        self.check_input(g)?;
        let mut tape = Tape::new();
        let p = tape.bind(&self.store);
        let h = self.encode_on_tape(&mut tape, &p, g);
        Ok(tape.value(h).clone())
    }

    pub fn classify(&self, g: &Graph) -> Result<LabelDistribution> {
        let mut tape = Tape::new();
        let p = tape.bind(&self.store);
        let lp = self.log_probs_on_tape(&mut tape, &p, g)?;
        Ok(LabelDistribution { probs: tape.value(lp).iter().map(|v| v.exp()).collect() })
    }

    pub fn classify_all(&self, graphs: &[Graph]) -> Result<Vec<LabelDistribution>> {
        graphs.iter().map(|g| self.classify(g)).collect()
    }

    /// Fraction of labeled graphs whose argmax matches the label.
    pub fn accuracy(&self, graphs: &[Graph]) -> Result<f64> {
        let mut hits = 0usize;
        let mut total = 0usize;
        for g in graphs {
            if let Some(y) = g.label() {
                total += 1;
                if self.classify(g)?.predicted_class() == y {
                    hits += 1;
                }
            }
        }
        if total == 0 {
            return Err(GalaError::Argument("no labeled graphs to score".into()));
        }
        Ok(hits as f64 / total as f64)
    }

    /// Mean cross-entropy over `(graph, class)` pairs and its exact gradient.
    pub fn gradients(&self, batch: &[(&Graph, usize)]) -> Result<(f64, Gradients)> {
        if batch.is_empty() {
            return Err(GalaError::Argument("empty batch".into()));
        }
        let mut tape = Tape::new();
        let p = tape.bind(&self.store);
        let loss = cross_entropy_on_tape(self, &mut tape, &p, batch)?;
        Ok((tape.scalar(loss), tape.param_grads(loss, &self.store)))
    }
}

/// Mean of `-log p(g)[y]` over the batch, recorded on `tape`.
pub fn cross_entropy_on_tape(
    model: &ClassifierModel,
    tape: &mut Tape,
    p: &[Var],
    batch: &[(&Graph, usize)],
) -> Result<Var> {
    let mut total: Option<Var> = None;
    for &(g, y) in batch {
        if y >= model.num_classes() {
            return Err(GalaError::Contract(format!("class {y} outside 0..{}", model.num_classes())));
        }
        let lp = model.log_probs_on_tape(tape, p, g)?;
        let term = tape.pick(lp, 0, y);
        total = Some(match total {
            Some(t) => tape.add(t, term),
            None => term,
        });
    }
    let total = total.ok_or_else(|| GalaError::Argument("empty batch".into()))?;
    Ok(tape.scale(total, -1.0 / batch.len() as f64))
}

/// Supervised training on labeled graphs. Returns the model and the mean
/// training loss of every epoch.
pub fn train_supervised(
    model: &mut ClassifierModel,
    graphs: &[Graph],
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    let labeled: Vec<(&Graph, usize)> = graphs
        .iter()
        .enumerate()
        .map(|(i, g)| g.label().map(|y| (g, y)).ok_or_else(|| GalaError::Contract(format!("graph {i} is unlabeled"))))
        .collect::<Result<_>>()?;
    if labeled.is_empty() {
        return Err(GalaError::Argument("no training graphs".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_c1a5);
    let mut opt = Adam::new(model.params(), cfg.lr);
    let mut order: Vec<usize> = (0..labeled.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let batch: Vec<(&Graph, usize)> = chunk.iter().map(|&i| labeled[i]).collect();
            let (loss, grads) = model.gradients(&batch)?;
            opt.step(model.params_mut(), &grads);
            epoch_loss += loss * batch.len() as f64;
        }
        trace.push(epoch_loss / labeled.len() as f64);
    }
    Ok(trace)
}

/// Builds and trains a fresh classifier on the labeled source domain.
pub fn pretrain_source(
    source: &Dataset,
    arch: &ClassifierConfig,
    cfg: &TrainConfig,
) -> Result<(ClassifierModel, Vec<f64>)> {
    let mut model = ClassifierModel::new(arch.clone(), source.attribute_dim(), source.num_classes(), cfg.seed)?;
    let trace = train_supervised(&mut model, source.graphs(), cfg)?;
    model.config_hash = crate::checkpoint::config_hash(&(arch, cfg));
    Ok((model, trace))
}
