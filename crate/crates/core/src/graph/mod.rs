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

//! Undirected attributed graphs, datasets, and the feature views the models
//! consume (adjacency matrices, degree one-hot encodings).

mod json;
mod split;
mod tudataset;

pub use json::{read_json_lines, write_json_lines, GraphJson, Provenance};
pub use split::{split_by_density, train_test_split, DomainSplit, SubDataset, TrainTest};
pub use tudataset::{parse_tu_dataset, write_tu_dataset};

use std::collections::BTreeSet;

use ndarray::Array2;

use crate::error::{GalaError, Result};

/// Degree one-hot width used when no other value is configured.
pub const DEFAULT_MAX_DEGREE: usize = 10;

/// An undirected simple graph with a node attribute matrix and an optional
/// class label.
///
/// Edges are stored once as `(i, j)` with `i < j`, sorted. A graph may have
/// zero nodes only as the leftover of a subgraph split.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    attributes: Array2<f64>,
    label: Option<usize>,
}

impl Graph {
    /// Builds a graph, normalizing every pair to `(min, max)` and collapsing
    /// duplicates. Self-loops and out-of-range endpoints are rejected.
    pub fn new(
        node_count: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        attributes: Array2<f64>,
        label: Option<usize>,
    ) -> Result<Self> {
        if attributes.nrows() != node_count {
            return Err(GalaError::Shape(format!(
                "attribute matrix has {} rows for {} nodes",
                attributes.nrows(),
                node_count
            )));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a >= node_count || b >= node_count {
                return Err(GalaError::Integrity(format!(
                    "edge ({a}, {b}) outside node range 0..{node_count}"
                )));
            }
            if a == b {
                return Err(GalaError::Integrity(format!("self-loop on node {a}")));
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(Graph { node_count, edges: set.into_iter().collect(), attributes, label })
    }

    /// Graph with a constant single attribute column, handy for structure-only work.
    pub fn unattributed(node_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        Self::new(node_count, edges, Array2::ones((node_count, 1)), None)
    }

    /// Builds the graph whose edges are the strictly-upper entries of `adj`
    /// above `threshold`.
    pub fn from_adjacency(adj: &Array2<f64>, threshold: f64, attributes: Array2<f64>) -> Result<Self> {
        let n = adj.nrows();
        if adj.ncols() != n {
            return Err(GalaError::Shape(format!("adjacency is {}x{}", n, adj.ncols())));
        }
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if adj[[i, j]] > threshold {
                    edges.push((i, j));
                }
            }
        }
        Self::new(n, edges, attributes, None)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn attributes(&self) -> &Array2<f64> {
        &self.attributes
    }

    pub fn attribute_dim(&self) -> usize {
        self.attributes.ncols()
    }

    pub fn label(&self) -> Option<usize> {
        self.label
    }

    pub fn with_label(mut self, label: Option<usize>) -> Self {
        self.label = label;
        self
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.binary_search(&(a.min(b), a.max(b))).is_ok()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.node_count];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.node_count];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    /// Edge density `2|E| / (|V|(|V|-1))`.
    pub fn density(&self) -> Result<f64> {
        let n = self.node_count;
        if n < 2 {
            return Err(GalaError::DegenerateInput(format!("density needs at least 2 nodes, got {n}")));
        }
        Ok(2.0 * self.edges.len() as f64 / (n * (n - 1)) as f64)
    }

    /// Dense 0/1 adjacency matrix, symmetric with zero diagonal.
    pub fn adjacency_matrix(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.node_count, self.node_count));
        for &(a, b) in &self.edges {
            m[[a, b]] = 1.0;
            m[[b, a]] = 1.0;
        }
        m
    }

    /// One row per node, one-hot at `min(degree, max_degree)`.
    pub fn degree_onehot(&self, max_degree: usize) -> Array2<f64> {
        degree_onehot_from_degrees(&self.degrees(), max_degree)
    }

    /// Relabels nodes so that old node `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.node_count;
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(GalaError::Argument("not a permutation of the node set".into()));
        }
        let mut attrs = Array2::zeros(self.attributes.raw_dim());
        for (old, &new) in perm.iter().enumerate() {
            attrs.row_mut(new).assign(&self.attributes.row(old));
        }
        let edges = self.edges.iter().map(|&(a, b)| (perm[a], perm[b]));
        Self::new(n, edges, attrs, self.label)
    }

    /// Same nodes and attributes, replaced edge set, no label.
    pub fn with_edges(&self, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        Self::new(self.node_count, edges, self.attributes.clone(), None)
    }
}

pub(crate) fn degree_onehot_from_degrees(degrees: &[usize], max_degree: usize) -> Array2<f64> {
    let mut m = Array2::zeros((degrees.len(), max_degree + 1));
    for (i, &d) in degrees.iter().enumerate() {
        m[[i, d.min(max_degree)]] = 1.0;
    }
    m
}

/// An ordered collection of graphs sharing an attribute width and label space.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    graphs: Vec<Graph>,
    num_classes: usize,
    attribute_dim: usize,
}

impl Dataset {
    pub fn new(graphs: Vec<Graph>, num_classes: usize) -> Result<Self> {
        if num_classes == 0 {
            return Err(GalaError::Argument("num_classes must be positive".into()));
        }
        let attribute_dim = graphs.first().map_or(0, Graph::attribute_dim);
        for (i, g) in graphs.iter().enumerate() {
            if g.attribute_dim() != attribute_dim {
                return Err(GalaError::Shape(format!(
                    "graph {i} has attribute width {} but dataset uses {attribute_dim}",
                    g.attribute_dim()
                )));
            }
            if let Some(y) = g.label() {
                if y >= num_classes {
                    return Err(GalaError::Integrity(format!(
                        "graph {i} has label {y} outside 0..{num_classes}"
                    )));
                }
            }
        }
        Ok(Dataset { graphs, num_classes, attribute_dim })
    }

    pub fn graphs(&self) -> &[Graph] {
        &self.graphs
    }

    pub fn into_graphs(self) -> Vec<Graph> {
        self.graphs
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn attribute_dim(&self) -> usize {
        self.attribute_dim
    }

    pub fn get(&self, i: usize) -> Option<&Graph> {
        self.graphs.get(i)
    }

    /// New dataset holding the graphs at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let graphs = indices
            .iter()
            .map(|&i| {
                self.graphs
                    .get(i)
                    .cloned()
                    .ok_or_else(|| GalaError::Argument(format!("index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset { graphs, num_classes: self.num_classes, attribute_dim: self.attribute_dim })
    }

    /// Copy with every label removed.
    pub fn unlabeled(&self) -> Self {
        let graphs = self.graphs.iter().map(|g| g.clone().with_label(None)).collect();
        Dataset { graphs, num_classes: self.num_classes, attribute_dim: self.attribute_dim }
    }

    pub fn labels(&self) -> Vec<Option<usize>> {
        self.graphs.iter().map(Graph::label).collect()
    }

    pub fn densities(&self) -> Result<Vec<f64>> {
        self.graphs.iter().map(Graph::density).collect()
    }
}
