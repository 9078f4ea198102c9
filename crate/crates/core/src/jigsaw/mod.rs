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

//! Community-based subgraph exchange and the consistency objective.

mod consistency;
mod exchange;
mod louvain;

pub use consistency::{consistency_loss, consistency_loss_on_tape, kl_divergence};
pub use exchange::{
    exchange_splits, induced_subgraph, jigsaw_exchange, split_graph, split_on, write_trace, JigsawPair, JigsawTrace,
    Split,
};
pub use louvain::{louvain_communities, modularity, Partition};
