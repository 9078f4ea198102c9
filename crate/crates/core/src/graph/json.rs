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

//! Canonical one-object-per-graph JSON used by every dump.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{GalaError, Result};

/// Reconstruction metadata attached to diffusion outputs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub t_recon: f64,
    pub steps: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphJson {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
    pub x: Vec<Vec<f64>>,
    pub y: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl From<&Graph> for GraphJson {
    fn from(g: &Graph) -> Self {
        GraphJson {
            n: g.node_count(),
            edges: g.edges().iter().map(|&(a, b)| [a, b]).collect(),
            x: g.attributes().rows().into_iter().map(|r| r.to_vec()).collect(),
            y: g.label(),
            provenance: None,
        }
    }
}

impl GraphJson {
    pub fn with_provenance(mut self, p: Provenance) -> Self {
        self.provenance = Some(p);
        self
    }

    pub fn to_graph(&self) -> Result<Graph> {
        let width = self.x.first().map_or(0, Vec::len);
        if self.x.iter().any(|r| r.len() != width) {
            return Err(GalaError::Shape("ragged attribute rows".into()));
        }
        let flat: Vec<f64> = self.x.iter().flatten().copied().collect();
        let attrs = Array2::from_shape_vec((self.x.len(), width), flat)
            .map_err(|e| GalaError::Shape(e.to_string()))?;
        Graph::new(self.n, self.edges.iter().map(|e| (e[0], e[1])), attrs, self.y)
    }
}

pub fn write_json_lines(path: &Path, graphs: impl IntoIterator<Item = GraphJson>) -> Result<()> {
    let file = File::create(path).map_err(|e| GalaError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for g in graphs {
        let line = serde_json::to_string(&g).expect("graph json serializes");
        writeln!(out, "{line}").map_err(|e| GalaError::io(path, e))?;
    }
    out.flush().map_err(|e| GalaError::io(path, e))
}

pub fn read_json_lines(path: &Path) -> Result<Vec<GraphJson>> {
    let file = File::open(path).map_err(|e| GalaError::io(path, e))?;
    let mut out = Vec::new();
    for (no, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| GalaError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let g = serde_json::from_str(&line)
            .map_err(|e| GalaError::format(path, format!("line {}: {e}", no + 1)))?;
        out.push(g);
    }
    Ok(out)
}
