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

//! Two-domain stochastic block model benchmark.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SynthSpec;
use crate::error::{GalaError, Result};
use crate::graph::{Dataset, Graph};

fn sample_graph(n: usize, label: usize, intra: f64, inter: f64, max_degree: usize, rng: &mut impl Rng) -> Result<Graph> {
    let half = n / 2;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let same_block = label == 1 || (i < half) == (j < half);
            let p = if same_block { intra } else { inter };
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let structure = Graph::unattributed(n, edges.iter().copied())?;
    Graph::new(n, edges, structure.degree_onehot(max_degree), Some(label))
}

fn domain(spec: &SynthSpec, intra: f64, inter: f64, rng: &mut ChaCha8Rng) -> Result<Dataset> {
    let mut labels: Vec<usize> = (0..spec.graphs_per_domain).map(|i| i % 2).collect();
    labels.shuffle(rng);
    let graphs = labels
        .into_iter()
        .map(|y| {
            let n = rng.random_range(spec.min_nodes..=spec.max_nodes);
            sample_graph(n, y, intra, inter, spec.max_degree, rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(graphs, 2)
}

/// Sparse source and dense target domains with balanced labels.
pub fn generate_synthetic_benchmark(spec: &SynthSpec, seed: u64) -> Result<(Dataset, Dataset)> {
    if spec.graphs_per_domain < 2 || !spec.graphs_per_domain.is_multiple_of(2) {
        return Err(GalaError::Argument(format!("graphs_per_domain must be even and >= 2, got {}", spec.graphs_per_domain)));
    }
    if spec.min_nodes < 2 || spec.min_nodes > spec.max_nodes {
        return Err(GalaError::Argument("node range must satisfy 2 <= min <= max".into()));
    }
    for p in [spec.source_intra, spec.source_inter, spec.target_intra, spec.target_inter] {
        if !(0.0..=1.0).contains(&p) {
            return Err(GalaError::Argument(format!("edge probability {p} outside [0, 1]")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let source = domain(spec, spec.source_intra, spec.source_inter, &mut rng)?;
    rng.set_stream(2);
    let target = domain(spec, spec.target_intra, spec.target_inter, &mut rng)?;
    Ok((source, target))
}
