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

//! Experiment configuration and its flat `key = value` file format.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::classifier::{ClassifierConfig, TrainConfig};
use crate::diffusion::{DiffusionTrainConfig, NoiseSchedule, ScoreNetConfig};
use crate::error::{GalaError, Result};
use crate::pseudo_label::CurriculumSchedule;

/// Where graphs come from. An empty `path` selects the synthetic benchmark.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub path: String,
    /// Density groups for a TU dataset.
    pub num_domains: usize,
    pub source_domain: usize,
    pub target_domain: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig { path: String::new(), num_domains: 4, source_domain: 0, target_domain: 1 }
    }
}

/// Two-class benchmark: class 0 is a two-block SBM, class 1 a single
/// block at the intra-block probability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub graphs_per_domain: usize,
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub source_intra: f64,
    pub source_inter: f64,
    pub target_intra: f64,
    pub target_inter: f64,
    /// Degree one-hot attributes have `max_degree + 1` columns.
    pub max_degree: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            graphs_per_domain: 200,
            min_nodes: 12,
            max_nodes: 24,
            source_intra: 0.35,
            source_inter: 0.05,
            target_intra: 0.7,
            target_inter: 0.2,
            max_degree: crate::graph::DEFAULT_MAX_DEGREE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PretrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        PretrainConfig { lr: t.lr, epochs: t.epochs, batch_size: t.batch_size }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub ema_momentum: f64,
    pub eps_t: f64,
    pub epochs: usize,
    pub samples_per_graph: usize,
    pub beta_min: f64,
    pub beta_max: f64,
    pub dt: f64,
    pub t_recon: f64,
    /// Overrides the step count derived from `t_recon / dt`.
    pub steps: Option<usize>,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        let t = DiffusionTrainConfig::default();
        let s = NoiseSchedule::default();
        DiffusionConfig {
            lr: t.lr,
            batch_size: t.batch_size,
            ema_momentum: t.ema_momentum,
            eps_t: t.eps_t,
            epochs: t.epochs,
            samples_per_graph: t.samples_per_graph,
            beta_min: s.beta_min,
            beta_max: s.beta_max,
            dt: 0.001,
            t_recon: 0.1,
            steps: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurriculumConfig {
    pub alpha_start: f64,
    pub alpha_end: f64,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        let c = CurriculumSchedule::default();
        CurriculumConfig { alpha_start: c.alpha_start, alpha_end: c.alpha_end }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    /// Reconstruct the target graphs again at the start of every epoch.
    pub rereconstruct: bool,
    /// Include the subgraph-exchange consistency term.
    pub jigsaw: bool,
    /// Write the per-pair exchange trace.
    pub trace: bool,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        AdaptConfig { epochs: 50, lr: 1e-3, batch_size: 64, rereconstruct: false, jigsaw: true, trace: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub synth: SynthSpec,
    /// First seed; runs use `seed, seed + 1, ...`.
    pub seed: u64,
    pub seeds: usize,
    pub classifier: ClassifierConfig,
    pub pretrain: PretrainConfig,
    pub score_net: ScoreNetConfig,
    pub diffusion: DiffusionConfig,
    pub curriculum: CurriculumConfig,
    pub adapt: AdaptConfig,
    pub output: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data: DataConfig::default(),
            synth: SynthSpec::default(),
            seed: 0,
            seeds: 5,
            classifier: ClassifierConfig::default(),
            pretrain: PretrainConfig::default(),
            score_net: ScoreNetConfig::default(),
            diffusion: DiffusionConfig::default(),
            curriculum: CurriculumConfig::default(),
            adapt: AdaptConfig::default(),
            output: "gala-out".into(),
        }
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, Value)>) {
    match v {
        Value::Object(map) => {
            for (k, inner) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, inner, out);
            }
        }
        other => out.push((prefix.to_string(), other.clone())),
    }
}

fn set_path(root: &mut Value, key: &str, value: Value) {
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for part in &parts[..parts.len() - 1] {
        cur = cur.get_mut(*part).expect("path validated against defaults");
    }
    cur[parts[parts.len() - 1]] = value;
}

/// Parses `raw` into the JSON type of `template`.
fn parse_value(key: &str, raw: &str, template: &Value) -> Result<Value> {
    let bad = || GalaError::Config(format!("cannot parse {raw:?} for {key}"));
    Ok(match template {
        Value::Bool(_) => Value::Bool(raw.parse().map_err(|_| bad())?),
        Value::String(_) => Value::String(raw.to_string()),
        Value::Number(n) if n.is_f64() => {
            let x: f64 = raw.parse().map_err(|_| bad())?;
            Value::from(x)
        }
        Value::Number(_) => Value::from(raw.parse::<u64>().map_err(|_| bad())?),
        // optional integers
        Value::Null => {
            if raw == "none" {
                Value::Null
            } else {
                Value::from(raw.parse::<u64>().map_err(|_| bad())?)
            }
        }
        _ => return Err(bad()),
    })
}

impl ExperimentConfig {
    fn template() -> Vec<(String, Value)> {
        let mut out = Vec::new();
        flatten("", &serde_json::to_value(ExperimentConfig::default()).expect("config serializes"), &mut out);
        out
    }

    /// Every key the file format accepts.
    pub fn keys() -> Vec<String> {
        Self::template().into_iter().map(|(k, _)| k).collect()
    }

    /// Applies `key = value` overrides in order. Unknown keys are errors.
    pub fn apply<'a>(&mut self, pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<()> {
        let template = Self::template();
        let mut root = serde_json::to_value(&*self).expect("config serializes");
        for (key, raw) in pairs {
            let (_, t) = template
                .iter()
                .find(|(k, _)| k == key)
                .ok_or_else(|| GalaError::Config(format!("unknown config key {key:?}")))?;
            set_path(&mut root, key, parse_value(key, raw, t)?);
        }
        *self = serde_json::from_value(root).map_err(|e| GalaError::Config(e.to_string()))?;
        self.validate()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| GalaError::Config(format!("line {}: expected key = value", lineno + 1)))?;
            pairs.push((k.trim(), v.trim()));
        }
        let mut cfg = ExperimentConfig::default();
        cfg.apply(pairs)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| GalaError::io(path, e))?;
        Self::parse(&text)
    }

    /// One `key = value` line per field, in a fixed order.
    pub fn to_text(&self) -> String {
        let mut flat = Vec::new();
        flatten("", &serde_json::to_value(self).expect("config serializes"), &mut flat);
        flat.iter()
            .map(|(k, v)| match v {
                Value::String(s) => format!("{k} = {s}\n"),
                Value::Null => format!("{k} = none\n"),
                Value::Number(n) if n.is_f64() => format!("{k} = {:?}\n", n.as_f64().expect("f64")),
                other => format!("{k} = {other}\n"),
            })
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| GalaError::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(GalaError::Config(m));
        if self.seeds == 0 {
            return bad("seeds must be at least 1".into());
        }
        if !(self.diffusion.t_recon > 0.0 && self.diffusion.t_recon < 1.0) {
            return bad(format!("diffusion.t_recon {} outside (0, 1)", self.diffusion.t_recon));
        }
        if self.diffusion.dt <= 0.0 {
            return bad("diffusion.dt must be positive".into());
        }
        NoiseSchedule::new(self.diffusion.beta_min, self.diffusion.beta_max).map_err(|e| GalaError::Config(e.to_string()))?;
        CurriculumSchedule::new(self.curriculum.alpha_start, self.curriculum.alpha_end, self.adapt.epochs)
            .map_err(|e| GalaError::Config(e.to_string()))?;
        if self.synth.min_nodes < 2 || self.synth.min_nodes > self.synth.max_nodes {
            return bad("synth node range must satisfy 2 <= min_nodes <= max_nodes".into());
        }
        if self.data.source_domain == self.data.target_domain {
            return bad("source and target domains must differ".into());
        }
        Ok(())
    }

    /// Output directory, with `GALA_OUT` taking precedence.
    pub fn output_dir(&self) -> PathBuf {
        std::env::var_os("GALA_OUT").map(PathBuf::from).unwrap_or_else(|| PathBuf::from(&self.output))
    }

    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds as u64).map(|k| self.seed + k).collect()
    }

    pub fn schedule(&self) -> NoiseSchedule {
        NoiseSchedule { beta_min: self.diffusion.beta_min, beta_max: self.diffusion.beta_max }
    }

    pub fn pretrain_config(&self, seed: u64) -> TrainConfig {
        TrainConfig { lr: self.pretrain.lr, epochs: self.pretrain.epochs, batch_size: self.pretrain.batch_size, seed }
    }

    pub fn diffusion_train_config(&self, seed: u64) -> DiffusionTrainConfig {
        DiffusionTrainConfig {
            lr: self.diffusion.lr,
            batch_size: self.diffusion.batch_size,
            ema_momentum: self.diffusion.ema_momentum,
            eps_t: self.diffusion.eps_t,
            epochs: self.diffusion.epochs,
            samples_per_graph: self.diffusion.samples_per_graph,
            seed,
        }
    }

    pub fn curriculum(&self) -> CurriculumSchedule {
        CurriculumSchedule {
            alpha_start: self.curriculum.alpha_start,
            alpha_end: self.curriculum.alpha_end,
            total_epochs: self.adapt.epochs,
        }
    }

    /// Reverse steps per reconstruction.
    pub fn reverse_steps(&self) -> Result<usize> {
        match self.diffusion.steps {
            Some(s) => Ok(s),
            None => crate::diffusion::step_count(self.diffusion.t_recon, self.diffusion.dt),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_published_settings() {
        let c = ExperimentConfig::default();
        assert_eq!((c.classifier.num_layers, c.classifier.hidden_dim), (3, 64));
        assert_eq!((c.pretrain.lr, c.pretrain.epochs, c.pretrain.batch_size), (1e-3, 100, 64));
        assert_eq!((c.score_net.num_layers, c.diffusion.lr, c.diffusion.batch_size), (4, 2e-5, 128));
        assert_eq!((c.diffusion.ema_momentum, c.diffusion.dt, c.diffusion.t_recon), (0.9999, 0.001, 0.1));
        assert_eq!((c.curriculum.alpha_start, c.curriculum.alpha_end), (0.95, 0.99));
        assert_eq!(c.seeds, 5);
        assert_eq!(c.reverse_steps().unwrap(), 100);
    }

    #[test]
    fn text_round_trip_is_lossless() {
        let mut c = ExperimentConfig::default();
        c.apply([("diffusion.t_recon", "0.30000000000000004"), ("adapt.jigsaw", "false"), ("diffusion.steps", "1000"), ("data.path", "/tmp/x y")])
            .unwrap();
        let back = ExperimentConfig::parse(&c.to_text()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.diffusion.t_recon, 0.30000000000000004);
        assert_eq!(back.reverse_steps().unwrap(), 1000);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(matches!(ExperimentConfig::parse("classifier.depth = 3"), Err(GalaError::Config(_))));
        assert!(matches!(ExperimentConfig::parse("seeds = many"), Err(GalaError::Config(_))));
        assert!(matches!(ExperimentConfig::parse("diffusion.t_recon = 1.5"), Err(GalaError::Config(_))));
        assert!(matches!(ExperimentConfig::parse("no equals sign"), Err(GalaError::Config(_))));
        let c = ExperimentConfig::parse("# comment\n\nclassifier.pooling = sum\n").unwrap();
        assert_eq!(c.classifier.pooling.to_string(), "sum");
    }
}
