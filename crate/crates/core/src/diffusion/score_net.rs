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

//! Message-passing score network over dense pair features.
//!
//! Edge inputs per node pair `(m, n)` are the random-walk probabilities
//! `R^1..R^r` of the thresholded adjacency, the raw entry `A_t[m, n]`, and
//! the entry's residual `(A_t - m(t) Adot) / sigma(t)` in noise units. Node
//! inputs are the self-pair edge embedding next to a degree one-hot. The
//! network predicts the standardized noise; the score is that prediction
//! divided by `-sigma(t)`.

use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{NoiseSchedule, ScoreModel};
use crate::autodiff::{Tape, Var};
use crate::error::{GalaError, Result};
use crate::graph::degree_onehot_from_degrees;
use crate::nn::{glorot, Linear, Mlp, ParamStore};

/// Largest magnitude fed through the residual channel.
const RESIDUAL_CLIP: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreNetConfig {
    pub num_layers: usize,
    pub walk_length: usize,
    /// Width of node and edge features.
    pub hidden_dim: usize,
    /// Width of the two hidden layers of the output head.
    pub head_hidden: usize,
    pub max_degree: usize,
    /// 0 selects plain sum aggregation; otherwise the number of attention heads.
    pub attention_heads: usize,
}

impl Default for ScoreNetConfig {
    fn default() -> Self {
        ScoreNetConfig {
            num_layers: 4,
            walk_length: 4,
            hidden_dim: 32,
            head_hidden: 32,
            max_degree: crate::graph::DEFAULT_MAX_DEGREE,
            attention_heads: 0,
        }
    }
}

/// Thresholded adjacency, its column-normalized transition matrix, and the
/// walk matrices `R^1..R^r`.
#[derive(Clone, Debug)]
pub struct WalkFeatures {
    pub indicator: Array2<f64>,
    pub transition: Array2<f64>,
    pub powers: Vec<Array2<f64>>,
}

impl WalkFeatures {
    /// Pair-major feature matrix: row `m * n + n'` holds `R^k[m, n']` for k = 1..=r.
    pub fn pair_features(&self) -> Array2<f64> {
        let n = self.indicator.nrows();
        let r = self.powers.len();
        Array2::from_shape_fn((n * n, r), |(row, k)| self.powers[k][[row / n, row % n]])
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.indicator.sum_axis(Axis(0)).iter().map(|&d| d as usize).collect()
    }
}

/// `Adot = 1[A_t > 1/2]` (zero diagonal), `R = Adot D^-1` with zero columns
/// for isolated nodes, and its first `r` powers.
pub fn random_walk_features(a_t: &Array2<f64>, r: usize) -> WalkFeatures {
    let n = a_t.nrows();
    let indicator = Array2::from_shape_fn((n, n), |(i, j)| if i != j && a_t[[i, j]] > 0.5 { 1.0 } else { 0.0 });
    let deg = indicator.sum_axis(Axis(0));
    let transition = Array2::from_shape_fn((n, n), |(i, j)| if deg[j] > 0.0 { indicator[[i, j]] / deg[j] } else { 0.0 });
    let mut powers = Vec::with_capacity(r);
    let mut cur = transition.clone();
    for k in 0..r {
        if k > 0 {
            cur = cur.dot(&transition);
        }
        powers.push(cur.clone());
    }
    WalkFeatures { indicator, transition, powers }
}

/// `[sin(1000 t w_k), cos(1000 t w_k)]` with geometric frequencies.
pub fn sinusoidal_embedding(t: f64, dim: usize) -> Array2<f64> {
    let half = dim / 2;
    let mut out = Array2::zeros((1, dim));
    for k in 0..half {
        let freq = (-(10_000f64.ln()) * k as f64 / half.max(1) as f64).exp();
        let arg = 1000.0 * t * freq;
        out[[0, k]] = arg.sin();
        out[[0, half + k]] = arg.cos();
    }
    out
}

#[derive(Clone, Debug)]
struct AttentionHead {
    query: usize,
    key: usize,
    value: usize,
}

#[derive(Clone, Debug)]
struct ScoreLayer {
    attention: Vec<AttentionHead>,
    node: Linear,
    edge: Linear,
    edge_src: usize,
    edge_dst: usize,
}

#[derive(Clone, Debug)]
pub struct ScoreNetwork {
    config: ScoreNetConfig,
    schedule: NoiseSchedule,
    store: ParamStore,
    phi: Mlp,
    time_in: Linear,
    time_out: Linear,
    layers: Vec<ScoreLayer>,
    head: Mlp,
    /// Whether the parameters are an exponential moving average.
    pub is_ema: bool,
    pub config_hash: String,
}

impl ScoreNetwork {
    pub fn new(config: ScoreNetConfig, schedule: NoiseSchedule, seed: u64) -> Result<Self> {
        let d = config.hidden_dim;
        if config.num_layers == 0 || config.walk_length == 0 || d == 0 || config.head_hidden == 0 {
            return Err(GalaError::Argument("score network sizes must be positive".into()));
        }
        if config.attention_heads > 0 && !d.is_multiple_of(config.attention_heads) {
            return Err(GalaError::Argument(format!(
                "hidden width {d} not divisible by {} heads",
                config.attention_heads
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let phi = Mlp::new(&mut store, "phi", &[config.walk_length + 2, d, d], false, &mut rng);
        let time_in = Linear::new(&mut store, "time_in", d, d, &mut rng);
        let time_out = Linear::new(&mut store, "time_out", d, d, &mut rng);
        let node_in0 = d + config.max_degree + 1;
        let layers = (0..config.num_layers)
            .map(|k| {
                let f_in = if k == 0 { node_in0 } else { d };
                let attention = (0..config.attention_heads)
                    .map(|h| {
                        let dh = d / config.attention_heads;
                        AttentionHead {
                            query: store.add(format!("layer.{k}.attn.{h}.query"), glorot(f_in, dh, &mut rng)),
                            key: store.add(format!("layer.{k}.attn.{h}.key"), glorot(f_in, dh, &mut rng)),
                            value: store.add(format!("layer.{k}.attn.{h}.value"), glorot(f_in, dh, &mut rng)),
                        }
                    })
                    .collect::<Vec<_>>();
                let agg_width = if attention.is_empty() { f_in } else { d };
                ScoreLayer {
                    attention,
                    node: Linear::new(&mut store, &format!("layer.{k}.node"), f_in + agg_width, d, &mut rng),
                    edge: Linear::new(&mut store, &format!("layer.{k}.edge"), d, d, &mut rng),
                    edge_src: store.add(format!("layer.{k}.edge_src"), glorot(d, d, &mut rng)),
                    edge_dst: store.add(format!("layer.{k}.edge_dst"), glorot(d, d, &mut rng)),
                }
            })
            .collect();
        let h = config.head_hidden;
        let head = Mlp::new(&mut store, "head", &[d, h, h, 1], true, &mut rng);
        Ok(ScoreNetwork {
            config,
            schedule,
            store,
            phi,
            time_in,
            time_out,
            layers,
            head,
            is_ema: false,
            config_hash: String::new(),
        })
    }

    pub fn config(&self) -> &ScoreNetConfig {
        &self.config
    }

    pub fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    #[cfg(test)]
    pub(crate) fn head_layers(&self) -> &[Linear] {
        &self.head.layers
    }

    /// Zeroes the final head layer so the network outputs a zero score.
    pub fn zero_output_head(&mut self) {
        let last = *self.head.layers.last().expect("head has layers");
        self.store.value_mut(last.weight).fill(0.0);
        self.store.value_mut(last.bias).fill(0.0);
    }

    /// Records the score for `a_t` at time `t` as an n x n node.
    pub fn forward_on_tape(&self, tape: &mut Tape, p: &[Var], a_t: &Array2<f64>, t: f64) -> Var {
        let n = a_t.nrows();
        let d = self.config.hidden_dim;
        let walks = random_walk_features(a_t, self.config.walk_length);
        let m_t = self.schedule.mean_scale(t);
        let sigma = self.schedule.std(t).max(f64::MIN_POSITIVE);

        let mut pair_in = Array2::zeros((n * n, self.config.walk_length + 2));
        pair_in.slice_mut(ndarray::s![.., ..self.config.walk_length]).assign(&walks.pair_features());
        for m in 0..n {
            for k in 0..n {
                if m == k {
                    continue;
                }
                let row = m * n + k;
                let raw = a_t[[m, k]];
                pair_in[[row, self.config.walk_length]] = raw;
                let resid = (raw - m_t * walks.indicator[[m, k]]) / sigma;
                pair_in[[row, self.config.walk_length + 1]] = resid.clamp(-RESIDUAL_CLIP, RESIDUAL_CLIP);
            }
        }

        let temb_raw = tape.constant(sinusoidal_embedding(t, d));
        let temb_in = self.time_in.forward(tape, p, temb_raw);
        let temb_out = self.time_out.forward(tape, p, temb_raw);

        let x = tape.constant(pair_in);
        let e0 = self.phi.forward(tape, p, x);
        let mut e = tape.add_row(e0, temb_in);

        let diag_idx: Vec<usize> = (0..n).map(|i| i * n + i).collect();
        let src_idx: Vec<usize> = (0..n * n).map(|row| row / n).collect();
        let dst_idx: Vec<usize> = (0..n * n).map(|row| row % n).collect();

        let self_edges = tape.gather_rows(e, diag_idx);
        let deg_onehot = tape.constant(degree_onehot_from_degrees(&walks.degrees(), self.config.max_degree));
        let mut f = tape.concat_cols(&[self_edges, deg_onehot]);

        let adj = tape.constant(walks.indicator.clone());
        let attn_mask = &walks.indicator + &Array2::<f64>::eye(n);
        for layer in &self.layers {
            let agg = if layer.attention.is_empty() {
                tape.matmul(adj, f)
            } else {
                let scale = 1.0 / ((d / layer.attention.len()) as f64).sqrt();
                let heads: Vec<Var> = layer
                    .attention
                    .iter()
                    .map(|h| {
                        let q = tape.matmul(f, p[h.query]);
                        let k = tape.matmul(f, p[h.key]);
                        let v = tape.matmul(f, p[h.value]);
                        let kt = tape.transpose(k);
                        let logits = tape.matmul(q, kt);
                        let logits = tape.scale(logits, scale);
                        let weights = tape.masked_softmax_rows(logits, &attn_mask);
                        tape.matmul(weights, v)
                    })
                    .collect();
                tape.concat_cols(&heads)
            };
            let both = tape.concat_cols(&[f, agg]);
            let upd = layer.node.forward(tape, p, both);
            f = tape.relu(upd);

            let from_src = tape.matmul(f, p[layer.edge_src]);
            let from_src = tape.gather_rows(from_src, src_idx.clone());
            let from_dst = tape.matmul(f, p[layer.edge_dst]);
            let from_dst = tape.gather_rows(from_dst, dst_idx.clone());
            let own = layer.edge.forward(tape, p, e);
            let sum = tape.add(own, from_src);
            let sum = tape.add(sum, from_dst);
            let act = tape.relu(sum);
            e = tape.add(e, act);
        }

        let e = tape.add_row(e, temb_out);
        let out = self.head.forward(tape, p, e);
        let m = tape.reshape(out, n, n);
        let mt = tape.transpose(m);
        let sym = tape.add(m, mt);
        let off_diag = Array2::from_shape_fn((n, n), |(i, j)| if i == j { 0.0 } else { 1.0 });
        let eps_hat = tape.mul_const(sym, off_diag);
        tape.scale(eps_hat, -0.5 / sigma)
    }

    /// Score estimate for a symmetric `a_t` at time `t`.
    pub fn score_forward(&self, a_t: &Array2<f64>, t: f64) -> Array2<f64> {
        let mut tape = Tape::new();
        let p = tape.bind(&self.store);
        let out = self.forward_on_tape(&mut tape, &p, a_t, t);
        tape.value(out).clone()
    }
}

impl ScoreModel for ScoreNetwork {
    fn score(&self, a_t: &Array2<f64>, t: f64) -> Array2<f64> {
        self.score_forward(a_t, t)
    }

    fn is_usable(&self) -> bool {
        self.store.all_finite()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::sde::{check_symmetric, forward_perturb};
    use crate::graph::Graph;
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn random_state(n: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let edges: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .filter(|_| rng.random::<f64>() < 0.35)
            .collect();
        let a0 = Graph::unattributed(n, edges).unwrap().adjacency_matrix();
        forward_perturb(&a0, 0.3, &NoiseSchedule::default(), &mut rng).unwrap().a
    }

    /// Probability that a k-step uniform walk from `start` ends at `end`,
    /// by enumerating every walk.
    fn walk_probability(adj: &[Vec<usize>], start: usize, end: usize, k: usize) -> f64 {
        if k == 0 {
            return if start == end { 1.0 } else { 0.0 };
        }
        let nbrs = &adj[start];
        nbrs.iter().map(|&nb| walk_probability(adj, nb, end, k - 1) / nbrs.len() as f64).sum()
    }

    #[test]
    fn single_edge_walks_alternate() {
        let a = ndarray::array![[0.0, 0.9], [0.9, 0.0]];
        let w = random_walk_features(&a, 4);
        assert_eq!(w.transition, ndarray::array![[0.0, 1.0], [1.0, 0.0]]);
        assert_eq!(w.powers[1], Array2::<f64>::eye(2));
        assert_eq!(w.pair_features().row(1).to_vec(), vec![1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn empty_graph_has_zero_walks() {
        let w = random_walk_features(&Array2::from_elem((4, 4), 0.2), 3);
        assert!(w.pair_features().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn walk_powers_match_enumeration() {
        let tri = Graph::unattributed(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        let house = Graph::unattributed(5, [(0, 1), (1, 2), (2, 3), (3, 0), (2, 4), (3, 4)]).unwrap();
        for g in [tri, house] {
            let w = random_walk_features(&g.adjacency_matrix(), 5);
            let adj = g.neighbors();
            for (k, pow) in w.powers.iter().enumerate() {
                for m in 0..g.node_count() {
                    for n in 0..g.node_count() {
                        // R^k[m, n]: walk from n ends at m
                        let brute = walk_probability(&adj, n, m, k + 1);
                        assert!((pow[[m, n]] - brute).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn zero_head_gives_zero_score_and_output_is_symmetric() {
        let net = ScoreNetwork::new(ScoreNetConfig::default(), NoiseSchedule::default(), 1).unwrap();
        let a = random_state(7, 2);
        assert!(net.score_forward(&a, 0.4).iter().all(|&v| v == 0.0));

        let mut net = net;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let last = *net.head.layers.last().unwrap();
        let shape = net.params().value(last.weight).raw_dim();
        *net.params_mut().value_mut(last.weight) = Array2::from_shape_fn(shape, |_| rng.random_range(-0.5..0.5));
        let s = net.score_forward(&a, 0.4);
        check_symmetric(&s).unwrap();
        assert!(s.iter().any(|&v| v != 0.0));
    }

    fn randomized_head(config: ScoreNetConfig, seed: u64) -> ScoreNetwork {
        let mut net = ScoreNetwork::new(config, NoiseSchedule::default(), seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
        let last = *net.head.layers.last().unwrap();
        let shape = net.params().value(last.weight).raw_dim();
        *net.params_mut().value_mut(last.weight) = Array2::from_shape_fn(shape, |_| rng.random_range(-0.5..0.5));
        net
    }

    #[test]
    fn permutation_equivariance() {
        for heads in [0, 4] {
            let net = randomized_head(ScoreNetConfig { attention_heads: heads, ..ScoreNetConfig::default() }, 5);
            let mut rng = ChaCha8Rng::seed_from_u64(6);
            for trial in 0..5 {
                let a = random_state(10, 100 + trial);
                let mut perm: Vec<usize> = (0..10).collect();
                perm.shuffle(&mut rng);
                // permuted[perm[i], perm[j]] = a[i, j]
                let mut pa = Array2::zeros((10, 10));
                for i in 0..10 {
                    for j in 0..10 {
                        pa[[perm[i], perm[j]]] = a[[i, j]];
                    }
                }
                let s = net.score_forward(&a, 0.37);
                let ps = net.score_forward(&pa, 0.37);
                for i in 0..10 {
                    for j in 0..10 {
                        assert!((ps[[perm[i], perm[j]]] - s[[i, j]]).abs() <= 1e-5);
                    }
                }
            }
        }
    }

    fn probe_loss(net: &ScoreNetwork, a: &Array2<f64>, w: &Array2<f64>) -> f64 {
        (net.score_forward(a, 0.3) * w).sum()
    }

    #[test]
    fn gradients_match_central_differences() {
        for heads in [0, 2] {
            let mut net = randomized_head(ScoreNetConfig { attention_heads: heads, num_layers: 2, ..ScoreNetConfig::default() }, 11);
            let a = random_state(6, 12);
            let mut rng = ChaCha8Rng::seed_from_u64(13);
            // zero biases on all-zero input rows sit exactly on a ReLU kink
            for id in 0..net.params().len() {
                if net.params().name(id).ends_with("bias") {
                    net.params_mut().value_mut(id).mapv_inplace(|_| rng.random_range(-0.1..0.1));
                }
            }
            let w = Array2::from_shape_fn((6, 6), |_| rng.random_range(-1.0..1.0));
            let mut tape = Tape::new();
            let p = tape.bind(net.params());
            let s = net.forward_on_tape(&mut tape, &p, &a, 0.3);
            let wv = tape.constant(w.clone());
            let prod = tape.mul(s, wv);
            let loss = tape.sum_all(prod);
            let grads = tape.param_grads(loss, net.params());
            for _ in 0..30 {
                let id = rng.random_range(0..net.params().len());
                let shape = net.params().value(id).dim();
                let (r, c) = (rng.random_range(0..shape.0), rng.random_range(0..shape.1));
                let orig = net.params().value(id)[[r, c]];
                net.params_mut().value_mut(id)[[r, c]] = orig + 1e-5;
                let up = probe_loss(&net, &a, &w);
                net.params_mut().value_mut(id)[[r, c]] = orig - 1e-5;
                let down = probe_loss(&net, &a, &w);
                net.params_mut().value_mut(id)[[r, c]] = orig;
                let fd = (up - down) / 2e-5;
                let an = grads.0[id][[r, c]];
                let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
                assert!(rel <= 1e-4, "{} [{r},{c}]: {an} vs {fd}", net.params().name(id));
            }
        }
    }

    #[test]
    fn sinusoid_is_bounded() {
        let e = sinusoidal_embedding(0.5, 32);
        assert!(e.iter().all(|v| v.abs() <= 1.0));
        assert_eq!(sinusoidal_embedding(0.0, 4), ndarray::array![[0.0, 0.0, 1.0, 1.0]]);
    }
}
