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

//! Reader and writer for the TUDataset text layout.
//!
//! A dataset `DS` lives in a directory holding `DS_A.txt` (1-indexed,
//! comma-separated node pairs), `DS_graph_indicator.txt` (graph id per node),
//! `DS_graph_labels.txt` and at least one of `DS_node_labels.txt` /
//! `DS_node_attributes.txt`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use super::{Dataset, Graph};
use crate::error::{GalaError, Result};

fn dataset_prefix(dir: &Path) -> Result<String> {
    let entries = fs::read_dir(dir).map_err(|e| GalaError::io(dir, e))?;
    let mut names: Vec<String> = entries
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter_map(|n| n.strip_suffix("_A.txt").map(str::to_owned))
        .collect();
    names.sort();
    names
        .into_iter()
        .next()
        .ok_or_else(|| GalaError::format(dir, "no *_A.txt edge file"))
}

fn read_required(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(GalaError::format(path, "missing file"));
    }
    fs::read_to_string(path).map_err(|e| GalaError::io(path, e))
}

fn read_optional(path: &Path) -> Result<Option<String>> {
    if path.exists() {
        fs::read_to_string(path).map(Some).map_err(|e| GalaError::io(path, e))
    } else {
        Ok(None)
    }
}

fn nonempty_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty())
}

fn parse_num<T: std::str::FromStr>(path: &Path, line: usize, s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| GalaError::format(path, format!("line {line}: cannot parse {s:?}")))
}

fn parse_int_column(path: &Path, text: &str) -> Result<Vec<i64>> {
    nonempty_lines(text).map(|(no, l)| parse_num(path, no, l)).collect()
}

/// Reads a TUDataset directory. Node labels become one-hot columns placed
/// before any continuous attributes; graph labels are remapped to `0..C` in
/// ascending order of their raw values.
pub fn parse_tu_dataset(dir: &Path) -> Result<Dataset> {
    let prefix = dataset_prefix(dir)?;
    let file = |suffix: &str| -> PathBuf { dir.join(format!("{prefix}_{suffix}.txt")) };

    let indicator_path = file("graph_indicator");
    let indicator = parse_int_column(&indicator_path, &read_required(&indicator_path)?)?;
    let labels_path = file("graph_labels");
    let raw_labels = parse_int_column(&labels_path, &read_required(&labels_path)?)?;
    let node_labels_path = file("node_labels");
    let node_labels = read_optional(&node_labels_path)?
        .map(|t| parse_int_column(&node_labels_path, &t))
        .transpose()?;
    let attrs_path = file("node_attributes");
    let node_attrs = read_optional(&attrs_path)?
        .map(|t| {
            nonempty_lines(&t)
                .map(|(no, l)| l.split(',').map(|v| parse_num::<f64>(&attrs_path, no, v)).collect())
                .collect::<Result<Vec<Vec<f64>>>>()
        })
        .transpose()?;
    if node_labels.is_none() && node_attrs.is_none() {
        return Err(GalaError::format(dir, "neither node_labels nor node_attributes present"));
    }

    let total_nodes = indicator.len();
    // graph ids must start at 1 and never skip or go back
    let mut graph_start = Vec::new();
    let mut prev = 0i64;
    for (node, &gid) in indicator.iter().enumerate() {
        if gid == prev + 1 {
            graph_start.push(node);
            prev = gid;
        } else if gid != prev {
            return Err(GalaError::Integrity(format!(
                "graph indicator jumps from {prev} to {gid} at node {}",
                node + 1
            )));
        }
    }
    let num_graphs = graph_start.len();
    if raw_labels.len() != num_graphs {
        return Err(GalaError::Integrity(format!(
            "{num_graphs} graphs but {} graph labels",
            raw_labels.len()
        )));
    }
    if let Some(nl) = &node_labels {
        if nl.len() != total_nodes {
            return Err(GalaError::Integrity(format!("{} node labels for {total_nodes} nodes", nl.len())));
        }
    }
    if let Some(na) = &node_attrs {
        if na.len() != total_nodes {
            return Err(GalaError::Integrity(format!("{} attribute rows for {total_nodes} nodes", na.len())));
        }
        let w = na.first().map_or(0, Vec::len);
        if na.iter().any(|r| r.len() != w) {
            return Err(GalaError::format(&attrs_path, "ragged attribute rows"));
        }
    }

    let a_path = file("A");
    let a_text = read_required(&a_path)?;
    let mut edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); num_graphs];
    for (no, line) in nonempty_lines(&a_text) {
        let mut parts = line.split(',');
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(GalaError::format(&a_path, format!("line {no}: expected two comma-separated ids")));
        };
        let a: usize = parse_num(&a_path, no, a)?;
        let b: usize = parse_num(&a_path, no, b)?;
        if a == 0 || b == 0 || a > total_nodes || b > total_nodes {
            return Err(GalaError::Integrity(format!("line {no}: node id out of range 1..={total_nodes}")));
        }
        let (a, b) = (a - 1, b - 1);
        let (ga, gb) = (indicator[a], indicator[b]);
        if ga != gb {
            return Err(GalaError::Integrity(format!(
                "line {no}: edge ({}, {}) joins graph {ga} and graph {gb}",
                a + 1,
                b + 1
            )));
        }
        if a == b {
            continue;
        }
        let g = (ga - 1) as usize;
        let base = graph_start[g];
        edges[g].push((a - base, b - base));
    }

    let label_map: BTreeMap<i64, usize> = {
        let mut vals: Vec<i64> = raw_labels.clone();
        vals.sort_unstable();
        vals.dedup();
        vals.into_iter().enumerate().map(|(i, v)| (v, i)).collect()
    };
    let node_label_map: Option<BTreeMap<i64, usize>> = node_labels.as_ref().map(|nl| {
        let mut vals = nl.clone();
        vals.sort_unstable();
        vals.dedup();
        vals.into_iter().enumerate().map(|(i, v)| (v, i)).collect()
    });
    let onehot_width = node_label_map.as_ref().map_or(0, BTreeMap::len);
    let cont_width = node_attrs.as_ref().and_then(|na| na.first()).map_or(0, Vec::len);
    let width = onehot_width + cont_width;

    let mut graphs = Vec::with_capacity(num_graphs);
    for (g, edge_list) in edges.into_iter().enumerate() {
        let start = graph_start[g];
        let end = graph_start.get(g + 1).copied().unwrap_or(total_nodes);
        let n = end - start;
        let mut x = Array2::zeros((n, width));
        for local in 0..n {
            let node = start + local;
            if let (Some(nl), Some(map)) = (&node_labels, &node_label_map) {
                x[[local, map[&nl[node]]]] = 1.0;
            }
            if let Some(na) = &node_attrs {
                for (c, &v) in na[node].iter().enumerate() {
                    x[[local, onehot_width + c]] = v;
                }
            }
        }
        graphs.push(Graph::new(n, edge_list, x, Some(label_map[&raw_labels[g]]))?);
    }
    Dataset::new(graphs, label_map.len().max(1))
}

/// Writes `dataset` as TUDataset `name` under `dir`. Attributes are written
/// verbatim as `node_attributes`; every graph must carry a label.
pub fn write_tu_dataset(dataset: &Dataset, dir: &Path, name: &str) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| GalaError::io(dir, e))?;
    let mut a = String::new();
    let mut indicator = String::new();
    let mut labels = String::new();
    let mut attrs = String::new();
    let mut offset = 0usize;
    for (gi, g) in dataset.graphs().iter().enumerate() {
        let y = g
            .label()
            .ok_or_else(|| GalaError::Contract(format!("graph {gi} has no label; TU layout needs one")))?;
        labels.push_str(&format!("{y}\n"));
        for row in g.attributes().rows() {
            indicator.push_str(&format!("{}\n", gi + 1));
            let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            attrs.push_str(&cells.join(", "));
            attrs.push('\n');
        }
        for &(u, v) in g.edges() {
            let (u, v) = (u + offset + 1, v + offset + 1);
            a.push_str(&format!("{u}, {v}\n{v}, {u}\n"));
        }
        offset += g.node_count();
    }
    let write = |suffix: &str, body: &str| -> Result<()> {
        let path = dir.join(format!("{name}_{suffix}.txt"));
        fs::write(&path, body).map_err(|e| GalaError::io(&path, e))
    };
    write("A", &a)?;
    write("graph_indicator", &indicator)?;
    write("graph_labels", &labels)?;
    write("node_attributes", &attrs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_fixture(dir: &Path, a: &str) {
        fs::write(dir.join("T_A.txt"), a).unwrap();
        fs::write(dir.join("T_graph_indicator.txt"), "1\n1\n1\n2\n2\n").unwrap();
        fs::write(dir.join("T_graph_labels.txt"), "3\n7\n").unwrap();
        fs::write(dir.join("T_node_labels.txt"), "0\n1\n0\n1\n1\n").unwrap();
    }

    #[test]
    fn two_graph_fixture() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path(), "1, 2\n2, 1\n2, 3\n3, 2\n1, 3\n3,1\n4, 5\n5, 4\n");
        let d = parse_tu_dataset(dir.path()).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.num_classes(), 2);
        assert_eq!(d.graphs()[0].edges(), &[(0, 1), (0, 2), (1, 2)]);
        assert_eq!(d.graphs()[1].edges(), &[(0, 1)]);
        assert_eq!(d.labels(), vec![Some(0), Some(1)]);
        assert_eq!(d.graphs()[0].attributes(), &ndarray::array![[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]]);
    }

    #[test]
    fn cross_graph_edge_is_integrity_error() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path(), "5, 1\n");
        assert!(matches!(parse_tu_dataset(dir.path()), Err(GalaError::Integrity(_))));
    }

    #[test]
    fn missing_file_and_gapped_indicator() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path(), "1, 2\n");
        fs::remove_file(dir.path().join("T_graph_labels.txt")).unwrap();
        assert!(matches!(parse_tu_dataset(dir.path()), Err(GalaError::Format { .. })));

        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path(), "1, 2\n");
        fs::write(dir.path().join("T_graph_indicator.txt"), "1\n1\n1\n3\n3\n").unwrap();
        assert!(matches!(parse_tu_dataset(dir.path()), Err(GalaError::Integrity(_))));
    }

    #[test]
    fn both_node_files_concatenate() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path(), "1, 2\n");
        fs::write(dir.path().join("T_node_attributes.txt"), "0.5\n1.5\n2.5\n3.5\n4.5\n").unwrap();
        let d = parse_tu_dataset(dir.path()).unwrap();
        assert_eq!(d.attribute_dim(), 3);
        assert_eq!(d.graphs()[1].attributes(), &ndarray::array![[0.0, 1.0, 3.5], [0.0, 1.0, 4.5]]);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        fn arb_dataset() -> impl Strategy<Value = Dataset> {
            let graph = (1usize..7, proptest::collection::vec((0usize..7, 0usize..7), 0..12), 0usize..3, -3.0f64..3.0)
                .prop_map(|(n, pairs, y, a)| {
                    let edges = pairs.into_iter().map(|(i, j)| (i % n, j % n)).filter(|(i, j)| i != j);
                    let x = Array2::from_shape_fn((n, 2), |(i, j)| a * (i as f64 + 1.0) / (j as f64 + 3.0));
                    Graph::new(n, edges, x, Some(y)).unwrap()
                });
            proptest::collection::vec(graph, 1..6).prop_map(|mut gs| {
                // all three classes present so label remapping is the identity
                for (i, g) in gs.iter_mut().enumerate().take(3) {
                    *g = g.clone().with_label(Some(i));
                }
                let c = gs.iter().filter_map(Graph::label).max().unwrap() + 1;
                Dataset::new(gs, c).unwrap()
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]
            #[test]
            fn write_then_parse_round_trips(d in arb_dataset()) {
                let dir = tempfile::tempdir().unwrap();
                write_tu_dataset(&d, dir.path(), "RT").unwrap();
                let back = parse_tu_dataset(dir.path()).unwrap();
                prop_assert_eq!(&back, &d);
                write_tu_dataset(&back, dir.path(), "RT").unwrap();
                prop_assert_eq!(parse_tu_dataset(dir.path()).unwrap(), back);
            }
        }
    }
}
