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

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::error::{GalaError, Result};

/// Fraction of every (class-stratified) group that goes to training.
pub const TRAIN_FRACTION: f64 = 0.8;

/// Index lists into one dataset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrainTest {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct SubDataset {
    pub dataset: Dataset,
    /// Position of each member graph in the parent dataset.
    pub parent_indices: Vec<usize>,
    pub split: TrainTest,
}

/// Density-ordered partition of a dataset into domains.
#[derive(Clone, Debug)]
pub struct DomainSplit {
    pub parts: Vec<SubDataset>,
    /// `parts[i]` holds densities in `[boundaries[i-1], boundaries[i])`, up to ties.
    pub boundaries: Vec<f64>,
}

/// Seeded 8:2 split, stratified by class when labels are present.
pub fn train_test_split(d: &Dataset, seed: u64) -> TrainTest {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: BTreeMap<Option<usize>, Vec<usize>> = BTreeMap::new();
    for (i, g) in d.graphs().iter().enumerate() {
        by_class.entry(g.label()).or_default().push(i);
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for members in by_class.values_mut() {
        members.shuffle(&mut rng);
        let n_train = (members.len() as f64 * TRAIN_FRACTION).round() as usize;
        train.extend_from_slice(&members[..n_train]);
        test.extend_from_slice(&members[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    TrainTest { train, test }
}

/// Sorts graphs by density (ties by original index) and cuts them into `k`
/// equal-count groups; the `N mod k` leftover graphs go one each to the
/// densest groups.
pub fn split_by_density(d: &Dataset, k: usize, seed: u64) -> Result<DomainSplit> {
    if k < 2 {
        return Err(GalaError::Argument(format!("need at least 2 domains, got {k}")));
    }
    if d.len() < k {
        return Err(GalaError::Argument(format!("{} graphs cannot fill {k} domains", d.len())));
    }
    let densities = d.densities()?;
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.sort_by(|&a, &b| densities[a].total_cmp(&densities[b]).then(a.cmp(&b)));

    let base = d.len() / k;
    let extra = d.len() % k;
    let mut parts = Vec::with_capacity(k);
    let mut boundaries = Vec::with_capacity(k - 1);
    let mut start = 0;
    for i in 0..k {
        let size = base + usize::from(i >= k - extra);
        let mut members = order[start..start + size].to_vec();
        if i > 0 {
            boundaries.push(densities[members[0]]);
        }
        members.sort_unstable();
        let dataset = d.subset(&members)?;
        let split = train_test_split(&dataset, seed.wrapping_add(i as u64));
        parts.push(SubDataset { dataset, parent_indices: members, split });
        start += size;
    }
    Ok(DomainSplit { parts, boundaries })
}
