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

//! Pretrain, train the diffusion model, reconstruct, adapt, evaluate.

use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::analysis::{density_shift_report, linear_fit, DensityShift, LinearFit, Summary};
use super::{generate_synthetic_benchmark, ExperimentConfig};
use crate::autodiff::Tape;
use crate::classifier::{pretrain_source, ClassifierModel};
use crate::diffusion::{adapt_target_graph_steps, train_score_network, ScoreNetwork};
use crate::error::{GalaError, Result};
use crate::graph::{parse_tu_dataset, split_by_density, train_test_split, Dataset, Graph};
use crate::jigsaw::{consistency_loss_on_tape, jigsaw_exchange, JigsawTrace};
use crate::nn::Adam;
use crate::pseudo_label::{
    class_diagnostics, class_max, compute_records, select_confident, sup_loss_on_tape, thresholds, ClassDiagnostics,
};

const RECON_SALT: u64 = 0x7ec0_0000;
const ADAPT_SALT: u64 = 0xada9_0000;

/// Labeled source and target domains, each split 8:2.
#[derive(Clone, Debug)]
pub struct Domains {
    pub task: String,
    pub source_train: Dataset,
    pub source_test: Dataset,
    pub target_train: Dataset,
    pub target_test: Dataset,
}

fn split_pair(d: &Dataset, seed: u64) -> Result<(Dataset, Dataset)> {
    let s = train_test_split(d, seed);
    Ok((d.subset(&s.train)?, d.subset(&s.test)?))
}

/// Loads the configured domains. An empty data path generates the
/// synthetic benchmark from `seed`; a directory holding `source/` and
/// `target/` is read as two TU datasets; any other directory is one TU
/// dataset split into density domains.
pub fn load_domains(cfg: &ExperimentConfig, seed: u64) -> Result<Domains> {
    let (task, source, target) = if cfg.data.path.is_empty() {
        let (s, t) = generate_synthetic_benchmark(&cfg.synth, seed)?;
        ("synthetic".to_string(), s, t)
    } else {
        let dir = Path::new(&cfg.data.path);
        if dir.join("source").is_dir() && dir.join("target").is_dir() {
            let name = dir.file_name().map_or("data".into(), |n| n.to_string_lossy().into_owned());
            (name, parse_tu_dataset(&dir.join("source"))?, parse_tu_dataset(&dir.join("target"))?)
        } else {
            let full = parse_tu_dataset(dir)?;
            let k = cfg.data.num_domains;
            let (s, t) = (cfg.data.source_domain, cfg.data.target_domain);
            if s >= k || t >= k {
                return Err(GalaError::Argument(format!("domain ids {s}, {t} outside 0..{k}")));
            }
            let mut split = split_by_density(&full, k, seed)?;
            let name = dir.file_name().map_or("data".into(), |n| n.to_string_lossy().into_owned());
            let target = std::mem::replace(&mut split.parts[t].dataset, Dataset::new(Vec::new(), 1)?);
            (format!("{name}:E{s}->E{t}"), split.parts[s].dataset.clone(), target)
        }
    };
    if target.is_empty() {
        return Err(GalaError::Argument("target domain has no graphs".into()));
    }
    if source.attribute_dim() != target.attribute_dim() {
        return Err(GalaError::Shape(format!(
            "source attributes have {} columns, target {}",
            source.attribute_dim(),
            target.attribute_dim()
        )));
    }
    let (source_train, source_test) = split_pair(&source, seed)?;
    let (target_train, target_test) = split_pair(&target, seed ^ 1)?;
    Ok(Domains { task, source_train, source_test, target_train, target_test })
}

/// Owner of the source training data. Dropping it flips a shared flag so
/// tests can check that adaptation starts only after the source is gone.
pub struct SourceHandle {
    data: Dataset,
    released: Arc<AtomicBool>,
}

#[derive(Clone, Debug)]
pub struct SourceProbe(Arc<AtomicBool>);

impl SourceProbe {
    pub fn is_released(&self) -> bool {
        self.0.load(Ordering::SeqCst)
    }
}

impl SourceHandle {
    pub fn new(data: Dataset) -> Self {
        SourceHandle { data, released: Arc::new(AtomicBool::new(false)) }
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn probe(&self) -> SourceProbe {
        SourceProbe(self.released.clone())
    }
}

impl Drop for SourceHandle {
    fn drop(&mut self) {
        self.released.store(true, Ordering::SeqCst);
    }
}

/// Frozen score network plus reconstruction settings.
pub struct Reconstructor<'a> {
    pub network: &'a ScoreNetwork,
    pub t_recon: f64,
    pub steps: usize,
    pub seed: u64,
}

impl Reconstructor<'_> {
    /// Reconstructs every graph with its own random stream `(salt, offset + i)`,
    /// so results do not depend on processing order.
    pub fn run(&self, graphs: &[Graph], salt: u64, offset: usize) -> Result<Vec<Graph>> {
        graphs
            .iter()
            .enumerate()
            .map(|(i, g)| {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ RECON_SALT ^ salt.wrapping_mul(0x9e37_79b9));
                rng.set_stream((offset + i) as u64);
                adapt_target_graph_steps(g, self.network, self.network.schedule(), self.t_recon, self.steps, &mut rng)
            })
            .collect()
    }
}

/// Losses and confident-set size of one adaptation epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss_sup: f64,
    pub loss_con: f64,
    pub loss_total: f64,
    pub confident_count: usize,
    /// Accuracy on the evaluation graphs after the epoch, when provided.
    pub accuracy: Option<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct AdaptOutcome {
    pub epochs: Vec<EpochLog>,
    pub diagnostics: Vec<ClassDiagnostics>,
    pub trace: Vec<JigsawTrace>,
}

/// Self-training on unlabeled `graphs`: per epoch, class-adaptive
/// pseudo-labels, then per batch `L = L_sup + L_con` with random
/// confident/unconfident pairing for the subgraph exchange.
/// `regenerate` (epoch -> graphs) replaces the graphs at the start of every
/// epoch after the first when set.
pub fn adapt_classifier(
    model: &mut ClassifierModel,
    graphs: &[Graph],
    cfg: &ExperimentConfig,
    seed: u64,
    eval: Option<&[Graph]>,
    mut regenerate: Option<&mut dyn FnMut(usize) -> Result<Vec<Graph>>>,
) -> Result<AdaptOutcome> {
    if graphs.is_empty() {
        return Err(GalaError::Argument("no target graphs to adapt on".into()));
    }
    let sched = cfg.curriculum();
    let mut adam = Adam::new(model.params(), cfg.adapt.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ADAPT_SALT);
    let mut current: Vec<Graph> = graphs.to_vec();
    let mut out = AdaptOutcome::default();
    let c = model.num_classes();

    for epoch in 0..cfg.adapt.epochs {
        if epoch > 0 {
            if let Some(f) = regenerate.as_mut() {
                current = f(epoch)?;
            }
        }
        let records = compute_records(model, &current)?;
        let m = class_max(&records, c)?;
        let tau = thresholds(&m, epoch, &sched);
        let confident = select_confident(&records, &tau);
        out.diagnostics.extend(class_diagnostics(epoch, &m, &tau, &confident));
        let mut pseudo = vec![None; current.len()];
        for &(i, y) in &confident {
            pseudo[i] = Some(y);
        }

        let mut order: Vec<usize> = (0..current.len()).collect();
        order.shuffle(&mut rng);
        let (mut sum_sup, mut sum_con) = (0.0, 0.0);
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.adapt.batch_size.max(1)) {
            batches += 1;
            let conf_b: Vec<(usize, usize)> = chunk.iter().filter_map(|&i| pseudo[i].map(|y| (i, y))).collect();
            let mut unconf_b: Vec<usize> = chunk.iter().copied().filter(|&i| pseudo[i].is_none()).collect();
            let mut aug_conf: Vec<(Graph, usize)> = Vec::new();
            let mut aug_unconf: Vec<(Graph, Vec<f64>)> = Vec::new();
            if cfg.adapt.jigsaw {
                let mut conf_order = conf_b.clone();
                conf_order.shuffle(&mut rng);
                unconf_b.shuffle(&mut rng);
                for (&(j, y), &k) in conf_order.iter().zip(&unconf_b) {
                    let (gj, gk) = (&current[j], &current[k]);
                    if gj.node_count() == 0 || gk.node_count() == 0 {
                        continue;
                    }
                    let pair = jigsaw_exchange(gj, gk, &mut rng)?;
                    if cfg.adapt.trace {
                        out.trace.push(JigsawTrace::new(epoch, (j, k), &pair));
                    }
                    let teacher = model.classify(gk)?.probs;
                    aug_conf.push((pair.augmented_confident, y));
                    aug_unconf.push((pair.augmented_unconfident, teacher));
                }
            }

            let mut tape = Tape::new();
            let p = tape.bind(model.params());
            let sup = sup_loss_on_tape(model, &mut tape, &p, &current, &conf_b)?;
            let conf_refs: Vec<(&Graph, usize)> = aug_conf.iter().map(|(g, y)| (g, *y)).collect();
            let unconf_refs: Vec<(&Graph, &[f64])> = aug_unconf.iter().map(|(g, t)| (g, t.as_slice())).collect();
            let con = consistency_loss_on_tape(model, &mut tape, &p, &conf_refs, &unconf_refs)?;
            let (ls, lc) = (sup.map_or(0.0, |v| tape.scalar(v)), con.map_or(0.0, |v| tape.scalar(v)));
            let total = match (sup, con) {
                (Some(a), Some(b)) => Some(tape.add(a, b)),
                (a, b) => a.or(b),
            };
            if let Some(total) = total {
                if !tape.scalar(total).is_finite() {
                    return Err(GalaError::Model(format!("non-finite adaptation loss at epoch {epoch}")));
                }
                let grads = tape.param_grads(total, model.params());
                adam.step(model.params_mut(), &grads);
            }
            sum_sup += ls;
            sum_con += lc;
        }
        let loss_sup = sum_sup / batches as f64;
        let loss_con = sum_con / batches as f64;
        let accuracy = match eval {
            Some(e) => Some(model.accuracy(e)?),
            None => None,
        };
        out.epochs.push(EpochLog {
            epoch,
            loss_sup,
            loss_con,
            loss_total: loss_sup + loss_con,
            confident_count: confident.len(),
            accuracy,
        });
    }
    Ok(out)
}

/// Outcome of one seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub source_test_accuracy: f64,
    /// Pretrained model on the raw target test graphs.
    pub source_only_accuracy: f64,
    /// Adapted model on the reconstructed target test graphs.
    pub adapted_accuracy: Option<f64>,
    /// Adapted model on the raw target test graphs.
    pub adapted_raw_accuracy: Option<f64>,
    pub epochs: Vec<EpochLog>,
    pub density: Option<DensityShift>,
    pub source_released_before_adaptation: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub task: String,
    pub seeds: Vec<SeedReport>,
    pub source_only: Summary,
    pub adapted: Option<Summary>,
    pub adapted_raw: Option<Summary>,
}

impl MetricsReport {
    pub fn from_seeds(task: String, seeds: Vec<SeedReport>) -> Self {
        let collect = |f: &dyn Fn(&SeedReport) -> Option<f64>| -> Option<Summary> {
            let v: Option<Vec<f64>> = seeds.iter().map(f).collect();
            v.filter(|v| !v.is_empty()).map(|v| Summary::of(&v))
        };
        MetricsReport {
            source_only: Summary::of(&seeds.iter().map(|s| s.source_only_accuracy).collect::<Vec<_>>()),
            adapted: collect(&|s| s.adapted_accuracy),
            adapted_raw: collect(&|s| s.adapted_raw_accuracy),
            task,
            seeds,
        }
    }
}

/// Wall-clock seconds per stage; kept apart from the metrics so those stay
/// reproducible byte for byte.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub seed: u64,
    pub pretrain: f64,
    pub diffusion: f64,
    pub reconstruct: f64,
    pub adapt: f64,
}

/// Everything a seed run produces besides the report.
#[derive(Clone, Debug, Default)]
pub struct SeedArtifacts {
    pub timings: StageTimings,
    pub diagnostics: Vec<ClassDiagnostics>,
    pub trace: Vec<JigsawTrace>,
    pub reconstructed_test: Vec<Graph>,
}

/// Models trained on the source domain, and the target data they will
/// meet. Built by [`prepare_seed`], which drops the source before returning.
pub struct Prepared {
    pub task: String,
    pub seed: u64,
    pub classifier: ClassifierModel,
    pub score: ScoreNetwork,
    pub source_test_accuracy: f64,
    pub source_density_mean: f64,
    pub target_train: Dataset,
    pub target_test: Dataset,
    pub probe: SourceProbe,
    pub timings: StageTimings,
}

/// Optional pre-trained models that replace the source stages.
#[derive(Default)]
pub struct Checkpoints {
    pub classifier: Option<ClassifierModel>,
    pub score: Option<ScoreNetwork>,
}

fn mean_density(graphs: &[Graph]) -> f64 {
    graphs.iter().map(|g| g.density().unwrap_or(0.0)).sum::<f64>() / graphs.len().max(1) as f64
}

/// Source stages: pretrain the classifier and train the score network (or
/// take them from `ckpt`), then release the source data.
pub fn prepare_seed(cfg: &ExperimentConfig, domains: Domains, seed: u64, ckpt: &Checkpoints) -> Result<Prepared> {
    let Domains { task, source_train, source_test, target_train, target_test } = domains;
    let source = SourceHandle::new(source_train);
    let probe = source.probe();
    let mut timings = StageTimings { seed, ..Default::default() };
    if let Some(c) = &ckpt.classifier {
        if c.input_dim() != target_train.attribute_dim() {
            return Err(GalaError::Model(format!(
                "classifier checkpoint expects {} attribute columns, data has {}",
                c.input_dim(),
                target_train.attribute_dim()
            )));
        }
    }

    let t0 = Instant::now();
    let classifier = match &ckpt.classifier {
        Some(c) => c.clone(),
        None => pretrain_source(source.data(), &cfg.classifier, &cfg.pretrain_config(seed))?.0,
    };
    timings.pretrain = t0.elapsed().as_secs_f64();
    let source_test_accuracy = if source_test.is_empty() { f64::NAN } else { classifier.accuracy(source_test.graphs())? };

    let t0 = Instant::now();
    let score = match &ckpt.score {
        Some(s) => s.clone(),
        None => {
            let net = ScoreNetwork::new(cfg.score_net.clone(), cfg.schedule(), seed)?;
            train_score_network(net, source.data().graphs(), &cfg.diffusion_train_config(seed))?.network
        }
    };
    timings.diffusion = t0.elapsed().as_secs_f64();
    let source_density_mean = mean_density(source.data().graphs());
    drop(source);
    drop(source_test);

    Ok(Prepared {
        task,
        seed,
        classifier,
        score,
        source_test_accuracy,
        source_density_mean,
        target_train,
        target_test,
        probe,
        timings,
    })
}

/// Target stages on prepared models: reconstruct, adapt, evaluate.
pub fn adapt_seed(cfg: &ExperimentConfig, prep: &Prepared) -> Result<(SeedReport, SeedArtifacts)> {
    if !prep.probe.is_released() {
        return Err(GalaError::Contract("source data still held when adaptation starts".into()));
    }
    let seed = prep.seed;
    let mut timings = prep.timings.clone();
    let source_only_accuracy = prep.classifier.accuracy(prep.target_test.graphs())?;
    let unlabeled = prep.target_train.unlabeled();
    let recon = Reconstructor {
        network: &prep.score,
        t_recon: cfg.diffusion.t_recon,
        steps: cfg.reverse_steps()?,
        seed,
    };
    let t0 = Instant::now();
    let recon_train = recon.run(unlabeled.graphs(), 0, 0)?;
    let recon_test = recon.run(prep.target_test.graphs(), 0, recon_train.len())?;
    timings.reconstruct = t0.elapsed().as_secs_f64();
    // labels are attached only for scoring
    let recon_test_labeled: Vec<Graph> =
        recon_test.iter().zip(prep.target_test.graphs()).map(|(r, g)| r.clone().with_label(g.label())).collect();

    let before: Vec<Graph> = unlabeled.graphs().iter().chain(prep.target_test.graphs()).cloned().collect();
    let after: Vec<Graph> = recon_train.iter().chain(&recon_test).cloned().collect();
    let density = density_shift_report(&before, &after, prep.source_density_mean)?;

    let t0 = Instant::now();
    let mut model = prep.classifier.clone();
    let mut regen = |epoch: usize| recon.run(unlabeled.graphs(), epoch as u64, 0);
    let regenerate: Option<&mut dyn FnMut(usize) -> Result<Vec<Graph>>> =
        if cfg.adapt.rereconstruct { Some(&mut regen) } else { None };
    let outcome = adapt_classifier(&mut model, &recon_train, cfg, seed, Some(&recon_test_labeled), regenerate)?;
    timings.adapt = t0.elapsed().as_secs_f64();

    let report = SeedReport {
        seed,
        source_test_accuracy: prep.source_test_accuracy,
        source_only_accuracy,
        adapted_accuracy: Some(model.accuracy(&recon_test_labeled)?),
        adapted_raw_accuracy: Some(model.accuracy(prep.target_test.graphs())?),
        epochs: outcome.epochs,
        density: Some(density),
        source_released_before_adaptation: prep.probe.is_released(),
    };
    let artifacts = SeedArtifacts { timings, diagnostics: outcome.diagnostics, trace: outcome.trace, reconstructed_test: recon_test };
    Ok((report, artifacts))
}

/// Full runs over every configured seed.
pub fn run_adaptation(cfg: &ExperimentConfig, ckpt: &Checkpoints) -> Result<(MetricsReport, Vec<SeedArtifacts>)> {
    cfg.validate()?;
    let mut reports = Vec::new();
    let mut artifacts = Vec::new();
    let mut task = String::new();
    for seed in cfg.seed_list() {
        let domains = load_domains(cfg, seed)?;
        task = domains.task.clone();
        let prep = prepare_seed(cfg, domains, seed, ckpt)?;
        let (r, a) = adapt_seed(cfg, &prep)?;
        reports.push(r);
        artifacts.push(a);
    }
    Ok((MetricsReport::from_seeds(task, reports), artifacts))
}

/// Accuracy of the pretrained classifier on raw target test graphs.
pub fn evaluate_source_only(cfg: &ExperimentConfig, classifier: Option<&ClassifierModel>) -> Result<MetricsReport> {
    cfg.validate()?;
    let mut reports = Vec::new();
    let mut task = String::new();
    for seed in cfg.seed_list() {
        let d = load_domains(cfg, seed)?;
        task = d.task.clone();
        let model = match classifier {
            Some(c) => c.clone(),
            None => pretrain_source(&d.source_train, &cfg.classifier, &cfg.pretrain_config(seed))?.0,
        };
        let source_test_accuracy = if d.source_test.is_empty() { f64::NAN } else { model.accuracy(d.source_test.graphs())? };
        reports.push(SeedReport {
            seed,
            source_test_accuracy,
            source_only_accuracy: model.accuracy(d.target_test.graphs())?,
            adapted_accuracy: None,
            adapted_raw_accuracy: None,
            epochs: Vec::new(),
            density: None,
            source_released_before_adaptation: false,
        });
    }
    Ok(MetricsReport::from_seeds(task, reports))
}

/// Wall-clock of the adaptation loop at each target-set size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub sizes: Vec<usize>,
    /// Fastest of the repeats, in seconds.
    pub seconds: Vec<f64>,
    pub fit: LinearFit,
}

impl ScalingReport {
    /// `time(2n) / time(n)` for every size whose double was also measured.
    pub fn doubling_ratios(&self) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        for (i, &n) in self.sizes.iter().enumerate() {
            if let Some(j) = self.sizes.iter().position(|&m| m == 2 * n) {
                out.push((n, self.seconds[j] / self.seconds[i]));
            }
        }
        out
    }
}

/// Times `adapt_classifier` from the same starting model on the first
/// `size` graphs of `pool`, cycled when the pool is shorter. Each size is
/// run `repeats` times, interleaved with the other sizes, and the minimum
/// is kept. Cycling a fixed pool with a
/// one-epoch config keeps the per-graph work identical across sizes.
pub fn scaling_probe(
    model: &ClassifierModel,
    pool: &[Graph],
    sizes: &[usize],
    cfg: &ExperimentConfig,
    repeats: usize,
) -> Result<ScalingReport> {
    if sizes.is_empty() {
        return Err(GalaError::Argument("scaling probe needs at least one size".into()));
    }
    if pool.is_empty() || sizes.contains(&0) {
        return Err(GalaError::Argument("scaling probe needs a non-empty pool and positive sizes".into()));
    }
    let sets: Vec<Vec<Graph>> = sizes.iter().map(|&n| pool.iter().cycle().take(n).cloned().collect()).collect();
    let mut seconds = vec![f64::INFINITY; sizes.len()];
    // repeats are interleaved across sizes so a burst of machine load hits
    // every size rather than skewing one of them
    for _ in 0..repeats.max(1) {
        for (graphs, best) in sets.iter().zip(seconds.iter_mut()) {
            let mut m = model.clone();
            let t0 = Instant::now();
            adapt_classifier(&mut m, graphs, cfg, cfg.seed, None, None)?;
            *best = best.min(t0.elapsed().as_secs_f64());
        }
    }
    let xs: Vec<f64> = sizes.iter().map(|&n| n as f64).collect();
    let fit = linear_fit(&xs, &seconds);
    Ok(ScalingReport { sizes: sizes.to_vec(), seconds, fit })
}

/// One grid point of the sensitivity sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub t_recon: f64,
    pub alpha_start: f64,
    pub source_only: Summary,
    pub adapted: Summary,
    pub adapted_raw: Summary,
}

/// Grid over reconstruction point and initial curriculum scale. The source
/// stages run once per seed and are shared by every grid point.
pub fn sweep(cfg: &ExperimentConfig, t_recons: &[f64], alpha_starts: &[f64], ckpt: &Checkpoints) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    if t_recons.is_empty() || alpha_starts.is_empty() {
        return Err(GalaError::Argument("sweep grid is empty".into()));
    }
    let mut grid = Vec::new();
    for &t in t_recons {
        for &a in alpha_starts {
            let mut c = cfg.clone();
            c.diffusion.t_recon = t;
            c.curriculum.alpha_start = a;
            c.curriculum.alpha_end = c.curriculum.alpha_end.max(a);
            c.validate()?;
            grid.push(c);
        }
    }
    let mut per_point: Vec<Vec<SeedReport>> = vec![Vec::new(); grid.len()];
    for seed in cfg.seed_list() {
        let prep = prepare_seed(cfg, load_domains(cfg, seed)?, seed, ckpt)?;
        for (c, reports) in grid.iter().zip(per_point.iter_mut()) {
            reports.push(adapt_seed(c, &prep)?.0);
        }
    }
    Ok(grid
        .iter()
        .zip(per_point)
        .map(|(c, reports)| {
            let m = MetricsReport::from_seeds(String::new(), reports);
            SweepRow {
                t_recon: c.diffusion.t_recon,
                alpha_start: c.curriculum.alpha_start,
                source_only: m.source_only,
                adapted: m.adapted.expect("adapted runs report accuracy"),
                adapted_raw: m.adapted_raw.expect("adapted runs report accuracy"),
            }
        })
        .collect())
}
