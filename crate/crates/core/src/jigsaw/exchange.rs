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

//! Subgraph exchange between a confident and an unconfident graph.

use std::collections::VecDeque;
use std::io::Write;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::louvain::{louvain_communities, Partition};
use crate::error::{GalaError, Result};
use crate::graph::Graph;

/// A graph cut into a removed community and the rest.
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    /// Original ids of the kept nodes, increasing.
    pub complement_nodes: Vec<usize>,
    /// Original ids of the removed nodes, increasing.
    pub subgraph_nodes: Vec<usize>,
    pub complement: Graph,
    pub subgraph: Graph,
    /// Crossing edges as (complement-side, subgraph-side) original ids.
    pub cut_edges: Vec<(usize, usize)>,
}

/// Induced subgraph on `nodes` (original ids, increasing), label dropped.
pub fn induced_subgraph(g: &Graph, nodes: &[usize]) -> Graph {
    let mut local = vec![usize::MAX; g.node_count()];
    for (k, &v) in nodes.iter().enumerate() {
        local[v] = k;
    }
    let edges = g
        .edges()
        .iter()
        .filter(|&&(a, b)| local[a] != usize::MAX && local[b] != usize::MAX)
        .map(|&(a, b)| (local[a], local[b]));
    let attrs = g.attributes().select(Axis(0), nodes);
    Graph::new(nodes.len(), edges, attrs, None).expect("induced subgraph of a valid graph is valid")
}

/// Connected node set of `ceil(|V| / 4)` nodes grown breadth-first from a
/// random start; smaller when the start's component is smaller.
fn bfs_quarter(g: &Graph, rng: &mut impl Rng) -> Vec<usize> {
    let n = g.node_count();
    let target = n.div_ceil(4);
    let nbrs = g.neighbors();
    let start = rng.random_range(0..n);
    let mut seen = vec![false; n];
    let mut picked = Vec::with_capacity(target);
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(v) = queue.pop_front() {
        picked.push(v);
        if picked.len() == target {
            break;
        }
        let mut next: Vec<usize> = nbrs[v].iter().copied().filter(|&u| !seen[u]).collect();
        next.shuffle(rng);
        for u in next {
            seen[u] = true;
            queue.push_back(u);
        }
    }
    picked.sort_unstable();
    picked
}

/// Removes one uniformly chosen community. A one-community partition falls
/// back to a BFS-grown quarter of the graph.
pub fn split_graph(g: &Graph, p: &Partition, rng: &mut impl Rng) -> Result<Split> {
    if g.node_count() == 0 || p.num_communities() == 0 {
        return Err(GalaError::Argument("cannot split an empty graph".into()));
    }
    if p.len() != g.node_count() {
        return Err(GalaError::Argument(format!("partition covers {} of {} nodes", p.len(), g.node_count())));
    }
    let removed = if p.num_communities() == 1 {
        bfs_quarter(g, rng)
    } else {
        p.members(rng.random_range(0..p.num_communities()))
    };
    Ok(split_on(g, &removed))
}

/// Split with an explicit removed node set.
pub fn split_on(g: &Graph, removed: &[usize]) -> Split {
    let mut in_sub = vec![false; g.node_count()];
    for &v in removed {
        in_sub[v] = true;
    }
    let subgraph_nodes: Vec<usize> = (0..g.node_count()).filter(|&v| in_sub[v]).collect();
    let complement_nodes: Vec<usize> = (0..g.node_count()).filter(|&v| !in_sub[v]).collect();
    let cut_edges = g
        .edges()
        .iter()
        .filter(|&&(a, b)| in_sub[a] != in_sub[b])
        .map(|&(a, b)| if in_sub[b] { (a, b) } else { (b, a) })
        .collect();
    Split {
        complement: induced_subgraph(g, &complement_nodes),
        subgraph: induced_subgraph(g, &subgraph_nodes),
        complement_nodes,
        subgraph_nodes,
        cut_edges,
    }
}

/// Maps each of `removed` slots onto `incoming` slots: injective when
/// there is room, otherwise uniform with repetition.
fn rewiring_map(removed: usize, incoming: usize, rng: &mut impl Rng) -> Vec<usize> {
    if incoming >= removed {
        let mut slots: Vec<usize> = (0..incoming).collect();
        slots.shuffle(rng);
        slots.truncate(removed);
        slots
    } else {
        (0..removed).map(|_| rng.random_range(0..incoming)).collect()
    }
}

/// `host.complement` joined with `incoming`, cut edges rewired through
/// `sigma` (indexed by position in `host.subgraph_nodes`).
fn assemble(host: &Split, incoming: &Graph, sigma: &[usize]) -> Result<Graph> {
    let a = host.complement.node_count();
    let mut comp_local = std::collections::HashMap::new();
    for (k, &v) in host.complement_nodes.iter().enumerate() {
        comp_local.insert(v, k);
    }
    let sub_pos = |v: usize| host.subgraph_nodes.binary_search(&v).expect("cut edge ends in the subgraph");
    let mut edges: Vec<(usize, usize)> = host.complement.edges().to_vec();
    edges.extend(incoming.edges().iter().map(|&(x, y)| (a + x, a + y)));
    edges.extend(host.cut_edges.iter().map(|&(u, v)| (comp_local[&u], a + sigma[sub_pos(v)])));
    let dim = host.complement.attribute_dim().max(incoming.attribute_dim());
    if host.complement.attribute_dim() != incoming.attribute_dim() && host.complement.node_count() > 0 && incoming.node_count() > 0 {
        return Err(GalaError::Shape(format!(
            "attribute widths differ: {} vs {}",
            host.complement.attribute_dim(),
            incoming.attribute_dim()
        )));
    }
    let mut attrs = Array2::zeros((a + incoming.node_count(), dim));
    if a > 0 {
        attrs.slice_mut(ndarray::s![..a, ..]).assign(host.complement.attributes());
    }
    if incoming.node_count() > 0 {
        attrs.slice_mut(ndarray::s![a.., ..]).assign(incoming.attributes());
    }
    Graph::new(a + incoming.node_count(), edges, attrs, None)
}

/// Both augmented graphs and what went into them.
#[derive(Clone, Debug, PartialEq)]
pub struct JigsawPair {
    pub confident_split: Split,
    pub unconfident_split: Split,
    pub augmented_confident: Graph,
    pub augmented_unconfident: Graph,
    /// Incoming-slot index for each removed node of the confident host.
    pub sigma_confident: Vec<usize>,
    pub sigma_unconfident: Vec<usize>,
}

/// Swaps the removed subgraphs of two splits.
pub fn exchange_splits(confident: Split, unconfident: Split, rng: &mut impl Rng) -> Result<JigsawPair> {
    let sigma_confident = rewiring_map(confident.subgraph.node_count(), unconfident.subgraph.node_count(), rng);
    let sigma_unconfident = rewiring_map(unconfident.subgraph.node_count(), confident.subgraph.node_count(), rng);
    let augmented_confident = assemble(&confident, &unconfident.subgraph, &sigma_confident)?;
    let augmented_unconfident = assemble(&unconfident, &confident.subgraph, &sigma_unconfident)?;
    Ok(JigsawPair {
        confident_split: confident,
        unconfident_split: unconfident,
        augmented_confident,
        augmented_unconfident,
        sigma_confident,
        sigma_unconfident,
    })
}

/// Louvain-partitions both graphs, removes one community from each and
/// swaps them, reattaching cut edges through a random map.
pub fn jigsaw_exchange(confident: &Graph, unconfident: &Graph, rng: &mut impl Rng) -> Result<JigsawPair> {
    if confident.node_count() == 0 || unconfident.node_count() == 0 {
        return Err(GalaError::Argument("jigsaw needs two nonempty graphs".into()));
    }
    let pc = louvain_communities(confident, rng.random());
    let pu = louvain_communities(unconfident, rng.random());
    let sc = split_graph(confident, &pc, rng)?;
    let su = split_graph(unconfident, &pu, rng)?;
    exchange_splits(sc, su, rng)
}

/// One line of the augmentation trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JigsawTrace {
    pub epoch: usize,
    pub pair: (usize, usize),
    pub community_sizes: (usize, usize),
    pub cut_edge_counts: (usize, usize),
    pub sigma: (Vec<usize>, Vec<usize>),
}

impl JigsawTrace {
    pub fn new(epoch: usize, pair: (usize, usize), jp: &JigsawPair) -> Self {
        JigsawTrace {
            epoch,
            pair,
            community_sizes: (jp.confident_split.subgraph_nodes.len(), jp.unconfident_split.subgraph_nodes.len()),
            cut_edge_counts: (jp.confident_split.cut_edges.len(), jp.unconfident_split.cut_edges.len()),
            sigma: (jp.sigma_confident.clone(), jp.sigma_unconfident.clone()),
        }
    }
}

pub fn write_trace(rows: &[JigsawTrace], path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| GalaError::io(path, e))?);
    for r in rows {
        let line = serde_json::to_string(r).expect("trace serializes");
        writeln!(f, "{line}").map_err(|e| GalaError::io(path, e))?;
    }
    f.flush().map_err(|e| GalaError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jigsaw::louvain::tests::two_triangles;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn labeled_path(offset: f64) -> Graph {
        let x = ndarray::array![[offset], [offset + 1.0], [offset + 2.0]];
        Graph::new(3, [(0, 1), (1, 2)], x, Some(1)).unwrap()
    }

    fn random_graph(rng: &mut ChaCha8Rng) -> Graph {
        let n = rng.random_range(1..16);
        let p = rng.random_range(0.0..0.8);
        let edges: Vec<_> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).filter(|_| rng.random::<f64>() < p).collect();
        let x = Array2::from_shape_fn((n, 2), |_| rng.random::<f64>());
        Graph::new(n, edges, x, Some(0)).unwrap()
    }

    #[test]
    fn split_examples() {
        let g = two_triangles();
        let s = split_on(&g, &[3, 4, 5]);
        assert_eq!(s.complement_nodes, vec![0, 1, 2]);
        assert_eq!(s.complement.edge_count(), 3);
        assert!(s.cut_edges.is_empty());

        let s = split_on(&labeled_path(0.0), &[2]);
        assert_eq!(s.complement.edges(), &[(0, 1)]);
        assert_eq!(s.subgraph.node_count(), 1);
        assert_eq!(s.cut_edges, vec![(1, 2)]);
    }

    #[test]
    fn single_community_falls_back_to_a_connected_quarter() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ring = Graph::unattributed(10, (0..10).map(|i| (i, (i + 1) % 10))).unwrap();
        let s = split_graph(&ring, &Partition::from_labels(&[0; 10]), &mut rng).unwrap();
        assert_eq!(s.subgraph_nodes.len(), 3);
        assert_eq!(s.subgraph.edge_count(), 2);
    }

    #[test]
    fn path_exchange_rewires_by_hand_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sc = split_on(&labeled_path(0.0), &[2]);
        let su = split_on(&labeled_path(10.0), &[2]);
        let jp = exchange_splits(sc, su, &mut rng).unwrap();
        // a-b plus the incoming z, attached where c was
        assert_eq!(jp.augmented_confident.node_count(), 3);
        assert_eq!(jp.augmented_confident.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(jp.augmented_confident.attributes().column(0).to_vec(), vec![0.0, 1.0, 12.0]);
        assert_eq!(jp.augmented_confident.label(), None);
    }

    #[test]
    fn zero_cut_exchange_is_disjoint_union() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = two_triangles();
        let jp = exchange_splits(split_on(&g, &[0, 1, 2]), split_on(&g, &[3, 4, 5]), &mut rng).unwrap();
        assert_eq!(jp.augmented_confident.edge_count(), 6);
        assert_eq!(louvain_communities(&jp.augmented_confident, 0).num_communities(), 2);
    }

    #[test]
    fn conservation_and_validity_over_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let (gc, gu) = (random_graph(&mut rng), random_graph(&mut rng));
            let jp = jigsaw_exchange(&gc, &gu, &mut rng).unwrap();
            for (host, s) in [(&gc, &jp.confident_split), (&gu, &jp.unconfident_split)] {
                assert_eq!(s.complement.node_count() + s.subgraph.node_count(), host.node_count());
                assert_eq!(s.complement.edge_count() + s.subgraph.edge_count() + s.cut_edges.len(), host.edge_count());
            }
            let (ac, au) = (&jp.augmented_confident, &jp.augmented_unconfident);
            assert_eq!(ac.node_count(), jp.confident_split.complement.node_count() + jp.unconfident_split.subgraph.node_count());
            assert_eq!(au.node_count(), jp.unconfident_split.complement.node_count() + jp.confident_split.subgraph.node_count());
            for g in [ac, au] {
                assert!(g.edges().iter().all(|&(a, b)| a < b && b < g.node_count()));
                let adj = g.adjacency_matrix();
                assert_eq!(adj, adj.t());
            }
            let mut before: Vec<Vec<u64>> = gc.attributes().rows().into_iter().chain(gu.attributes().rows()).map(|r| r.iter().map(|v| v.to_bits()).collect()).collect();
            let mut after: Vec<Vec<u64>> = ac.attributes().rows().into_iter().chain(au.attributes().rows()).map(|r| r.iter().map(|v| v.to_bits()).collect()).collect();
            before.sort();
            after.sort();
            assert_eq!(before, after);
        }
    }

    #[test]
    fn trace_is_json_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let jp = jigsaw_exchange(&labeled_path(0.0), &two_triangles(), &mut rng).unwrap();
        write_trace(&[JigsawTrace::new(0, (1, 2), &jp)], &path).unwrap();
        let line = std::fs::read_to_string(&path).unwrap();
        let back: JigsawTrace = serde_json::from_str(line.trim()).unwrap();
        assert_eq!(back.pair, (1, 2));
    }
}
