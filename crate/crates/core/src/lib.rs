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

//! Source-free graph domain adaptation: a GCN classifier, a score-based
//! diffusion model that rewrites target graphs in source style, curriculum
//! pseudo-labels and subgraph-exchange consistency training.

pub mod autodiff;
pub mod checkpoint;
pub mod classifier;
pub mod diffusion;
pub mod error;
pub mod graph;
pub mod jigsaw;
pub mod nn;
pub mod pseudo_label;
pub mod trainer;

pub use error::{GalaError, Result};
