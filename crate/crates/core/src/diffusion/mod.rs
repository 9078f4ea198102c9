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

//! Score-based diffusion over adjacency matrices.

mod schedule;
pub(crate) mod sde;
mod score_net;
mod training;

pub use schedule::NoiseSchedule;
pub use score_net::{random_walk_features, sinusoidal_embedding, ScoreNetConfig, ScoreNetwork, WalkFeatures};
pub use sde::{
    adapt_target_graph, adapt_target_graph_steps, analytic_score, edge_agreement, forward_perturb, integrate_reverse,
    provenance, reconstruct_adjacency, reverse_step, reverse_step_with_noise, sample_prior, step_count, symmetric_noise,
    symmetrize, AnalyticScore, DiffusionState, ScoreModel, ZeroScore,
};
pub use training::{score_matching_loss, train_score_network, DiffusionTrainConfig, TrainedScore};
