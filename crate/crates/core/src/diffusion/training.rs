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

//! Denoising score matching on source adjacency matrices.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sde::{perturb_with_noise, symmetric_noise};
use super::{NoiseSchedule, ScoreModel, ScoreNetwork};
use crate::autodiff::Tape;
use crate::error::{GalaError, Result};
use crate::graph::Graph;
use crate::nn::{Adam, Ema, Gradients};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffusionTrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub ema_momentum: f64,
    /// Lower end of the training time range.
    pub eps_t: f64,
    pub epochs: usize,
    /// Noise draws per graph per epoch.
    pub samples_per_graph: usize,
    pub seed: u64,
}

impl Default for DiffusionTrainConfig {
    fn default() -> Self {
        DiffusionTrainConfig {
            lr: 2e-5,
            batch_size: 128,
            ema_momentum: 0.9999,
            eps_t: 1e-3,
            epochs: 100,
            samples_per_graph: 1,
            seed: 0,
        }
    }
}

/// EMA network plus the per-epoch mean training loss of the raw network.
#[derive(Clone, Debug)]
pub struct TrainedScore {
    pub network: ScoreNetwork,
    pub loss_trace: Vec<f64>,
}

/// One draw of the weighted objective `v(t) ||rho(A_t, t) - score||^2`.
fn weighted_error(model: &dyn ScoreModel, a0: &Array2<f64>, t: f64, eps: &Array2<f64>, schedule: &NoiseSchedule) -> f64 {
    let state = perturb_with_noise(a0, t, schedule, eps);
    let target = super::analytic_score(&state.a, a0, t, schedule).expect("t > 0 by construction");
    let pred = model.score(&state.a, t);
    schedule.variance(t) * (&pred - &target).mapv(|x| x * x).sum()
}

/// Loss and parameter gradient of one draw.
fn draw_gradients(net: &ScoreNetwork, a0: &Array2<f64>, t: f64, eps: &Array2<f64>) -> (f64, Gradients) {
    let schedule = net.schedule();
    let state = perturb_with_noise(a0, t, schedule, eps);
    let target = super::analytic_score(&state.a, a0, t, schedule).expect("t > 0 by construction");
    let mut tape = Tape::new();
    let p = tape.bind(net.params());
    let rho = net.forward_on_tape(&mut tape, &p, &state.a, t);
    let target = tape.constant(target);
    let diff = tape.sub(rho, target);
    let sq = tape.mul(diff, diff);
    let total = tape.sum_all(sq);
    let loss = tape.scale(total, schedule.variance(t));
    (tape.scalar(loss), tape.param_grads(loss, net.params()))
}

/// Trains `net` in place and returns the EMA copy with the loss trace.
pub fn train_score_network(mut net: ScoreNetwork, source: &[Graph], cfg: &DiffusionTrainConfig) -> Result<TrainedScore> {
    if source.is_empty() {
        return Err(GalaError::Argument("score training needs at least one graph".into()));
    }
    if cfg.batch_size == 0 || cfg.samples_per_graph == 0 {
        return Err(GalaError::Argument("batch size and samples per graph must be positive".into()));
    }
    if !(cfg.eps_t > 0.0 && cfg.eps_t < 1.0) {
        return Err(GalaError::Argument(format!("eps_t {} outside (0, 1)", cfg.eps_t)));
    }
    let adjacency: Vec<Array2<f64>> = source.iter().map(Graph::adjacency_matrix).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xd1ff_0000);
    let mut adam = Adam::new(net.params(), cfg.lr);
    let mut ema = Ema::new(net.params(), cfg.ema_momentum);
    let mut trace = Vec::with_capacity(cfg.epochs);

    let mut order: Vec<usize> = (0..source.len()).flat_map(|i| std::iter::repeat_n(i, cfg.samples_per_graph)).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = Gradients::zeros_like(net.params());
            for &gi in batch {
                let t = rng.random_range(cfg.eps_t..1.0);
                let eps = symmetric_noise(adjacency[gi].nrows(), &mut rng);
                let (loss, g) = draw_gradients(&net, &adjacency[gi], t, &eps);
                if !loss.is_finite() {
                    return Err(GalaError::Model(format!("non-finite score loss at epoch {epoch}")));
                }
                epoch_loss += loss;
                grads.add_scaled(&g, 1.0 / batch.len() as f64);
            }
            adam.step(net.params_mut(), &grads);
            ema.update(net.params());
        }
        trace.push(epoch_loss / order.len() as f64);
    }

    let mut network = net;
    network.params_mut().load_from(ema.shadow())?;
    network.is_ema = true;
    Ok(TrainedScore { network, loss_trace: trace })
}

/// Mean weighted score-matching error of `model` over `draws` fixed
/// (t, noise) pairs per graph. The draws depend only on `seed`, so
/// different models can be compared on identical noise.
pub fn score_matching_loss(
    model: &dyn ScoreModel,
    graphs: &[Graph],
    schedule: &NoiseSchedule,
    draws: usize,
    eps_t: f64,
    seed: u64,
) -> Result<f64> {
    if graphs.is_empty() || draws == 0 {
        return Err(GalaError::Argument("evaluation needs graphs and draws".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for g in graphs {
        let a0 = g.adjacency_matrix();
        for _ in 0..draws {
            let t = rng.random_range(eps_t..1.0);
            let eps = symmetric_noise(a0.nrows(), &mut rng);
            total += weighted_error(model, &a0, t, &eps, schedule);
        }
    }
    Ok(total / (graphs.len() * draws) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::{AnalyticScore, ScoreNetConfig, ZeroScore};

    fn small_net(seed: u64) -> ScoreNetwork {
        let cfg = ScoreNetConfig { num_layers: 2, hidden_dim: 16, head_hidden: 16, ..ScoreNetConfig::default() };
        ScoreNetwork::new(cfg, NoiseSchedule::default(), seed).unwrap()
    }

    fn ring(n: usize) -> Graph {
        Graph::unattributed(n, (0..n).map(|i| (i, (i + 1) % n))).unwrap()
    }

    #[test]
    fn empty_corpus_is_rejected() {
        let err = train_score_network(small_net(0), &[], &DiffusionTrainConfig::default()).unwrap_err();
        assert!(matches!(err, GalaError::Argument(_)));
    }

    #[test]
    fn analytic_score_has_zero_loss_and_zero_score_does_not() {
        let g = ring(8);
        let schedule = NoiseSchedule::default();
        let exact = AnalyticScore { a0: g.adjacency_matrix(), schedule };
        let l = score_matching_loss(&exact, std::slice::from_ref(&g), &schedule, 10, 1e-3, 3).unwrap();
        assert!(l.abs() < 1e-18);
        let z = score_matching_loss(&ZeroScore, &[g], &schedule, 200, 1e-3, 3).unwrap();
        // ||eps||^2 over the off-diagonal has expectation n(n-1)
        assert!((z / 56.0 - 1.0).abs() < 0.05, "{z}");
    }

    #[test]
    fn fresh_network_matches_zero_baseline_exactly() {
        let g = ring(6);
        let schedule = NoiseSchedule::default();
        let net = small_net(1);
        let a = score_matching_loss(&net, std::slice::from_ref(&g), &schedule, 5, 1e-3, 9).unwrap();
        let b = score_matching_loss(&ZeroScore, &[g], &schedule, 5, 1e-3, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tape_loss_matches_evaluator() {
        let g = ring(7);
        let mut net = small_net(2);
        let last = *net.head_layers().last().unwrap();
        net.params_mut().value_mut(last.weight).fill(0.3);
        let a0 = g.adjacency_matrix();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let eps = symmetric_noise(7, &mut rng);
        let (tape_loss, _) = draw_gradients(&net, &a0, 0.42, &eps);
        let direct = weighted_error(&net, &a0, 0.42, &eps, net.schedule());
        assert!((tape_loss - direct).abs() <= 1e-9 * direct.abs().max(1.0));
    }

    #[test]
    fn memorizable_graph_loss_halves() {
        let g = ring(8);
        let cfg = DiffusionTrainConfig { lr: 2e-3, batch_size: 8, epochs: 60, samples_per_graph: 8, ema_momentum: 0.99, ..Default::default() };
        let out = train_score_network(small_net(3), &[g], &cfg).unwrap();
        assert!(out.loss_trace.iter().all(|l| l.is_finite()));
        let first = out.loss_trace[0];
        let last = out.loss_trace[out.loss_trace.len() - 5..].iter().sum::<f64>() / 5.0;
        assert!(last <= 0.5 * first, "first {first} last {last}");
        assert!(out.network.is_ema);
    }
}
