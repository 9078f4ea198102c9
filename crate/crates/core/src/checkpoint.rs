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

//! Self-describing JSON checkpoints for the classifier and the score network.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifier::{ClassifierConfig, ClassifierModel};
use crate::diffusion::{NoiseSchedule, ScoreNetConfig, ScoreNetwork};
use crate::error::{GalaError, Result};
use crate::nn::{ParamStore, TensorRecord};

const FORMAT_VERSION: u32 = 1;

/// Hex SHA-256 of the JSON encoding of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config serializes");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize, Deserialize)]
struct Checkpoint<C> {
    kind: String,
    format_version: u32,
    config: C,
    config_hash: String,
    tensors: Vec<TensorRecord>,
}

#[derive(Deserialize)]
struct Header {
    kind: String,
    format_version: u32,
}

#[derive(Serialize, Deserialize)]
struct ClassifierMeta {
    arch: ClassifierConfig,
    input_dim: usize,
    num_classes: usize,
}

#[derive(Serialize, Deserialize)]
struct ScoreNetMeta {
    arch: ScoreNetConfig,
    beta_min: f64,
    beta_max: f64,
    ema: bool,
}

fn write<C: Serialize>(path: &Path, ckpt: &Checkpoint<C>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| GalaError::io(dir, e))?;
    }
    let body = serde_json::to_string(ckpt).expect("checkpoint serializes");
    fs::write(path, body).map_err(|e| GalaError::io(path, e))
}

fn read<C: DeserializeOwned>(path: &Path, kind: &str) -> Result<Checkpoint<C>> {
    let body = fs::read_to_string(path).map_err(|e| GalaError::io(path, e))?;
    let header: Header = serde_json::from_str(&body).map_err(|e| GalaError::format(path, e.to_string()))?;
    if header.kind != kind {
        return Err(GalaError::Model(format!("{} holds a {} checkpoint, expected {kind}", path.display(), header.kind)));
    }
    if header.format_version != FORMAT_VERSION {
        return Err(GalaError::Model(format!("unsupported checkpoint version {}", header.format_version)));
    }
    serde_json::from_str(&body).map_err(|e| GalaError::format(path, e.to_string()))
}

fn restore(target: &mut ParamStore, records: &[TensorRecord]) -> Result<()> {
    let loaded = ParamStore::from_records(records)?;
    target.load_from(&loaded).map_err(|e| GalaError::Model(format!("checkpoint does not fit the architecture: {e}")))?;
    if !target.all_finite() {
        return Err(GalaError::Model("checkpoint holds non-finite parameters".into()));
    }
    Ok(())
}

pub fn save_classifier(model: &ClassifierModel, path: &Path) -> Result<()> {
    let meta = ClassifierMeta {
        arch: model.config().clone(),
        input_dim: model.input_dim(),
        num_classes: model.num_classes(),
    };
    write(
        path,
        &Checkpoint {
            kind: "classifier".into(),
            format_version: FORMAT_VERSION,
            config: meta,
            config_hash: model.config_hash.clone(),
            tensors: model.params().to_records(),
        },
    )
}

pub fn load_classifier(path: &Path) -> Result<ClassifierModel> {
    let ckpt: Checkpoint<ClassifierMeta> = read(path, "classifier")?;
    let mut model = ClassifierModel::new(ckpt.config.arch, ckpt.config.input_dim, ckpt.config.num_classes, 0)?;
    restore(model.params_mut(), &ckpt.tensors)?;
    model.config_hash = ckpt.config_hash;
    Ok(model)
}

pub fn save_score_network(net: &ScoreNetwork, path: &Path) -> Result<()> {
    let schedule = net.schedule();
    let meta = ScoreNetMeta {
        arch: net.config().clone(),
        beta_min: schedule.beta_min,
        beta_max: schedule.beta_max,
        ema: net.is_ema,
    };
    write(
        path,
        &Checkpoint {
            kind: "score_network".into(),
            format_version: FORMAT_VERSION,
            config: meta,
            config_hash: net.config_hash.clone(),
            tensors: net.params().to_records(),
        },
    )
}

pub fn load_score_network(path: &Path) -> Result<ScoreNetwork> {
    let ckpt: Checkpoint<ScoreNetMeta> = read(path, "score_network")?;
    let schedule = NoiseSchedule::new(ckpt.config.beta_min, ckpt.config.beta_max)?;
    let mut net = ScoreNetwork::new(ckpt.config.arch, schedule, 0)?;
    restore(net.params_mut(), &ckpt.tensors)?;
    net.is_ema = ckpt.config.ema;
    net.config_hash = ckpt.config_hash;
    Ok(net)
}
