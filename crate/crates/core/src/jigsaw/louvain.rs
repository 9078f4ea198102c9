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

//! Modularity and greedy Louvain community detection.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GalaError, Result};
use crate::graph::Graph;

/// Moves must raise modularity by more than this to count.
const TOLERANCE: f64 = 1e-9;

const RESTARTS: usize = 8;

/// Community id of every node; ids run contiguously from 0.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    community_of: Vec<usize>,
    num_communities: usize,
}

impl Partition {
    /// Renumbers arbitrary labels to 0.. in order of first appearance.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut map = std::collections::HashMap::new();
        let community_of: Vec<usize> = labels
            .iter()
            .map(|l| {
                let next = map.len();
                *map.entry(*l).or_insert(next)
            })
            .collect();
        Partition { num_communities: map.len(), community_of }
    }

    pub fn singletons(n: usize) -> Self {
        Partition { community_of: (0..n).collect(), num_communities: n }
    }

    pub fn community_of(&self) -> &[usize] {
        &self.community_of
    }

    pub fn num_communities(&self) -> usize {
        self.num_communities
    }

    pub fn len(&self) -> usize {
        self.community_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.community_of.is_empty()
    }

    /// Nodes of community `c` in increasing order.
    pub fn members(&self, c: usize) -> Vec<usize> {
        self.community_of.iter().enumerate().filter(|(_, &x)| x == c).map(|(i, _)| i).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.num_communities];
        for &c in &self.community_of {
            s[c] += 1;
        }
        s
    }
}

/// Newman modularity `sum_c [e_c / m - (deg_c / 2m)^2]`; 0 without edges.
pub fn modularity(g: &Graph, p: &Partition) -> Result<f64> {
    if p.len() != g.node_count() {
        return Err(GalaError::Argument(format!("partition covers {} of {} nodes", p.len(), g.node_count())));
    }
    let m = g.edge_count() as f64;
    if m == 0.0 {
        return Ok(0.0);
    }
    let c = p.community_of();
    let mut internal = vec![0.0; p.num_communities()];
    let mut degree = vec![0.0; p.num_communities()];
    for &(a, b) in g.edges() {
        degree[c[a]] += 1.0;
        degree[c[b]] += 1.0;
        if c[a] == c[b] {
            internal[c[a]] += 1.0;
        }
    }
    Ok(internal.iter().zip(&degree).map(|(e, d)| e / m - (d / (2.0 * m)).powi(2)).sum())
}

/// Weighted multigraph used across aggregation levels. `self_loops[i]`
/// holds the total weight of edges folded inside super-node `i`.
struct Level {
    adj: Vec<Vec<(usize, f64)>>,
    self_loops: Vec<f64>,
}

impl Level {
    fn strength(&self, i: usize) -> f64 {
        self.adj[i].iter().map(|(_, w)| w).sum::<f64>() + 2.0 * self.self_loops[i]
    }
}

/// Local moving on one level. Returns the community of each node and
/// whether anything moved.
fn local_moving(level: &Level, total: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, bool) {
    let n = level.adj.len();
    let strength: Vec<f64> = (0..n).map(|i| level.strength(i)).collect();
    let mut comm: Vec<usize> = (0..n).collect();
    let mut tot: Vec<f64> = strength.clone();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let two_m = 2.0 * total;
    let mut moved_any = false;
    let mut links = vec![0.0; n];
    let mut touched: Vec<usize> = Vec::new();
    loop {
        let mut moved = false;
        for &i in &order {
            let own = comm[i];
            for &(j, w) in &level.adj[i] {
                if links[comm[j]] == 0.0 {
                    touched.push(comm[j]);
                }
                links[comm[j]] += w;
            }
            tot[own] -= strength[i];
            // gain of joining c, up to a constant: k_i,c - tot_c k_i / 2m
            let gain = |c: usize, links: &[f64], tot: &[f64]| links[c] - tot[c] * strength[i] / two_m;
            let stay = gain(own, &links, &tot);
            let mut best = own;
            let mut best_gain = stay;
            for &c in &touched {
                let g = gain(c, &links, &tot);
                if g > best_gain + TOLERANCE * total {
                    best = c;
                    best_gain = g;
                }
            }
            tot[best] += strength[i];
            if best != own {
                comm[i] = best;
                moved = true;
                moved_any = true;
            }
            for &c in &touched {
                links[c] = 0.0;
            }
            touched.clear();
        }
        if !moved {
            break;
        }
    }
    (comm, moved_any)
}

fn aggregate(level: &Level, comm: &[usize], k: usize) -> Level {
    let mut weights = std::collections::BTreeMap::new();
    let mut self_loops = vec![0.0; k];
    for (i, nbrs) in level.adj.iter().enumerate() {
        self_loops[comm[i]] += level.self_loops[i];
        for &(j, w) in nbrs {
            let (a, b) = (comm[i], comm[j]);
            if a == b {
                // each undirected edge is listed from both ends
                self_loops[a] += w / 2.0;
            } else {
                *weights.entry((a, b)).or_insert(0.0) += w;
            }
        }
    }
    let mut adj = vec![Vec::new(); k];
    for ((a, b), w) in weights {
        adj[a].push((b, w));
    }
    Level { adj, self_loops }
}

/// Greedy modularity maximization: local moving then aggregation, repeated
/// until a pass improves nothing. Node visit order is shuffled by `seed`;
/// the best of a few seeded restarts is kept, since one greedy descent can
/// merge its way into a poor optimum on small graphs.
pub fn louvain_communities(g: &Graph, seed: u64) -> Partition {
    let n = g.node_count();
    if n == 0 || g.edge_count() == 0 {
        return Partition::singletons(n);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Partition)> = None;
    for _ in 0..RESTARTS {
        let p = refine(g, louvain_once(g, &mut rng));
        let q = modularity(g, &p).expect("sizes agree");
        if best.as_ref().is_none_or(|(bq, _)| q > bq + TOLERANCE) {
            best = Some((q, p));
        }
    }
    best.expect("at least one restart").1
}

/// Single-node moves on the original graph, including moving a node out
/// to a community of its own, until none raises modularity.
fn refine(g: &Graph, p: Partition) -> Partition {
    let n = g.node_count();
    let two_m = 2.0 * g.edge_count() as f64;
    let nbrs = g.neighbors();
    let deg: Vec<f64> = nbrs.iter().map(|v| v.len() as f64).collect();
    let mut comm = p.community_of().to_vec();
    let mut tot = vec![0.0; n];
    for i in 0..n {
        tot[comm[i]] += deg[i];
    }
    loop {
        let mut moved = false;
        for i in 0..n {
            let own = comm[i];
            tot[own] -= deg[i];
            let mut links = std::collections::BTreeMap::new();
            for &j in &nbrs[i] {
                *links.entry(comm[j]).or_insert(0.0) += 1.0;
            }
            let gain = |c: usize| links.get(&c).copied().unwrap_or(0.0) - tot[c] * deg[i] / two_m;
            let mut best = own;
            let mut best_gain = gain(own);
            for &c in links.keys() {
                if gain(c) > best_gain + TOLERANCE * two_m {
                    best = c;
                    best_gain = gain(c);
                }
            }
            // an unused id stands for a fresh singleton with zero gain
            if 0.0 > best_gain + TOLERANCE * two_m {
                if let Some(free) = (0..n).find(|&c| tot[c] == 0.0 && !comm.contains(&c)) {
                    best = free;
                }
            }
            tot[best] += deg[i];
            if best != own {
                comm[i] = best;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    Partition::from_labels(&comm)
}

fn louvain_once(g: &Graph, rng: &mut ChaCha8Rng) -> Partition {
    let n = g.node_count();
    let total = g.edge_count() as f64;
    let mut level = Level {
        adj: g.neighbors().into_iter().map(|nb| nb.into_iter().map(|j| (j, 1.0)).collect()).collect(),
        self_loops: vec![0.0; n],
    };
    let mut assignment: Vec<usize> = (0..n).collect();
    let mut best_q = modularity(g, &Partition::singletons(n)).expect("sizes agree");
    loop {
        let (comm, moved) = local_moving(&level, total, rng);
        if !moved {
            break;
        }
        let relabeled = Partition::from_labels(&comm);
        let candidate: Vec<usize> = assignment.iter().map(|&c| relabeled.community_of()[c]).collect();
        let q = modularity(g, &Partition::from_labels(&candidate)).expect("sizes agree");
        if q <= best_q + TOLERANCE {
            break;
        }
        best_q = q;
        assignment = candidate;
        level = aggregate(&level, relabeled.community_of(), relabeled.num_communities());
    }
    Partition::from_labels(&assignment)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::Rng;

    pub(crate) fn two_triangles() -> Graph {
        Graph::unattributed(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap()
    }

    /// Best modularity over every set partition (restricted growth strings).
    pub(crate) fn brute_force_best(g: &Graph) -> f64 {
        fn rec(i: usize, labels: &mut Vec<usize>, max: usize, g: &Graph, best: &mut f64) {
            if i == labels.len() {
                *best = best.max(modularity(g, &Partition::from_labels(labels)).unwrap());
                return;
            }
            for c in 0..=max + 1 {
                labels[i] = c;
                rec(i + 1, labels, max.max(c), g, best);
            }
        }
        let n = g.node_count();
        let mut labels = vec![0; n];
        let mut best = f64::NEG_INFINITY;
        if n == 0 {
            return 0.0;
        }
        rec(1, &mut labels, 0, g, &mut best);
        best
    }

    #[test]
    fn modularity_examples() {
        let g = two_triangles();
        let q = modularity(&g, &Partition::from_labels(&[0, 0, 0, 1, 1, 1])).unwrap();
        assert!((q - 0.5).abs() < 1e-12);
        assert!(modularity(&g, &Partition::from_labels(&[0; 6])).unwrap().abs() < 1e-12);
        assert_eq!(modularity(&Graph::unattributed(3, []).unwrap(), &Partition::singletons(3)).unwrap(), 0.0);
    }

    #[test]
    fn louvain_examples() {
        let g = two_triangles();
        for seed in 0..10 {
            let p = louvain_communities(&g, seed);
            assert_eq!(p.num_communities(), 2);
            assert!((modularity(&g, &p).unwrap() - 0.5).abs() < 1e-12);
            assert_eq!(p.community_of()[0], p.community_of()[2]);
            assert_ne!(p.community_of()[0], p.community_of()[3]);
        }
        let k4 = Graph::unattributed(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]).unwrap();
        assert!(brute_force_best(&k4).abs() < 1e-12);
        assert_eq!(louvain_communities(&k4, 3).num_communities(), 1);
        assert_eq!(louvain_communities(&Graph::unattributed(5, []).unwrap(), 0).num_communities(), 5);
        assert_eq!(louvain_communities(&Graph::unattributed(1, []).unwrap(), 0).num_communities(), 1);
    }

    #[test]
    fn near_optimal_on_small_random_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..50 {
            let n = rng.random_range(2..=8);
            let p = rng.random_range(0.2..0.7);
            let edges: Vec<_> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).filter(|_| rng.random::<f64>() < p).collect();
            let g = Graph::unattributed(n, edges).unwrap();
            let part = louvain_communities(&g, rng.random());
            let q = modularity(&g, &part).unwrap();
            assert!(q >= modularity(&g, &Partition::singletons(n)).unwrap() - 1e-12);
            assert!(brute_force_best(&g) - q <= 0.05, "n={n} q={q}");
        }
    }

    #[test]
    fn partition_ids_are_contiguous() {
        let p = Partition::from_labels(&[7, 3, 7, 9]);
        assert_eq!(p.community_of(), &[0, 1, 0, 2]);
        assert_eq!(p.sizes(), vec![2, 1, 1]);
        assert_eq!(p.members(0), vec![0, 2]);
    }
}
