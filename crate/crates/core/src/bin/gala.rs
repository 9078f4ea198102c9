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

//! `gala`: command-line front end.
//!
//! Exit codes: 0 success, 1 usage/contract/model errors, 2 unreadable or
//! malformed files.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gala::checkpoint::{load_classifier, load_score_network, save_classifier, save_score_network};
use gala::classifier::pretrain_source;
use gala::diffusion::{provenance, train_score_network, ScoreNetwork};
use gala::graph::{write_json_lines, write_tu_dataset, GraphJson};
use gala::trainer::{
    evaluate_source_only, generate_synthetic_benchmark, load_domains, read_metrics, render_table, run_adaptation,
    summary_csv, sweep, write_run_outputs, write_sweep, Checkpoints, ExperimentConfig, Reconstructor,
};
use gala::{GalaError, Result};

#[derive(Parser)]
#[command(name = "gala", version, about = "Source-free graph domain adaptation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Config file (flat key=value lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any config key; repeatable, e.g. `--set adapt.epochs=20`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Dataset directory (TU format). Empty means the synthetic benchmark.
    #[arg(long)]
    data: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of consecutive seeds starting at `--seed`.
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    source_domain: Option<usize>,
    #[arg(long)]
    target_domain: Option<usize>,
    /// Reconstruction point; `sweep` accepts a comma-separated grid.
    #[arg(long, value_delimiter = ',')]
    t_recon: Vec<f64>,
    /// Initial curriculum scale; `sweep` accepts a comma-separated grid.
    #[arg(long, value_delimiter = ',')]
    alpha_start: Vec<f64>,
    #[arg(long)]
    adapt_epochs: Option<usize>,
}

impl Common {
    /// Defaults, then the config file, then flags. `--t-recon` and
    /// `--alpha-start` must be single values here.
    fn resolve(&self) -> Result<ExperimentConfig> {
        for (name, v) in [("--t-recon", &self.t_recon), ("--alpha-start", &self.alpha_start)] {
            if v.len() > 1 {
                return Err(GalaError::Argument(format!("{name} takes one value outside `sweep`")));
            }
        }
        self.resolve_base()
    }

    fn resolve_base(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        let mut pairs: Vec<(String, String)> = Vec::new();
        let mut flag = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                pairs.push((k.to_string(), v));
            }
        };
        flag("data.path", self.data.clone());
        flag("output", self.out.clone());
        flag("seed", self.seed.map(|v| v.to_string()));
        flag("seeds", self.seeds.map(|v| v.to_string()));
        flag("data.source_domain", self.source_domain.map(|v| v.to_string()));
        flag("data.target_domain", self.target_domain.map(|v| v.to_string()));
        flag("diffusion.t_recon", self.t_recon.first().map(|v| format!("{v:?}")));
        flag("curriculum.alpha_start", self.alpha_start.first().map(|v| format!("{v:?}")));
        flag("adapt.epochs", self.adapt_epochs.map(|v| v.to_string()));
        for s in &self.set {
            let (k, v) = s.split_once('=').ok_or_else(|| GalaError::Config(format!("--set expects KEY=VALUE, got `{s}`")))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        cfg.apply(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct ModelPaths {
    /// Classifier checkpoint; pretrains on the source when absent.
    #[arg(long)]
    classifier: Option<PathBuf>,
    /// Score network checkpoint; trains on the source when absent.
    #[arg(long)]
    score: Option<PathBuf>,
}

impl ModelPaths {
    fn load(&self) -> Result<Checkpoints> {
        Ok(Checkpoints {
            classifier: self.classifier.as_deref().map(load_classifier).transpose()?,
            score: self.score.as_deref().map(load_score_network).transpose()?,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train the classifier on the source domain; writes classifier.json.
    Pretrain(Common),
    /// Train the score network on the source domain; writes score.json.
    TrainDiffusion(Common),
    /// Translate target graphs with a trained score network; writes reconstructed.jsonl.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        score: PathBuf,
    },
    /// Full pipeline over all seeds; writes metrics and traces.
    Adapt {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        models: ModelPaths,
    },
    /// Source-only accuracy on raw target test graphs.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        classifier: Option<PathBuf>,
    },
    /// Write the synthetic two-domain benchmark as TU datasets under source/ and target/.
    Synth(Common),
    /// Grid over reconstruction point and initial curriculum scale.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        models: ModelPaths,
    },
    /// Print a table from one or more run directories (reads metrics.json).
    Report { dirs: Vec<PathBuf> },
}

fn out_dir(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let d = cfg.output_dir();
    std::fs::create_dir_all(&d).map_err(|e| GalaError::Io { path: d.clone(), source: e })?;
    Ok(d)
}

fn save_config(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    cfg.save(&dir.join("run.cfg"))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Pretrain(c) => {
            let cfg = c.resolve()?;
            let d = load_domains(&cfg, cfg.seed)?;
            let (model, trace) = pretrain_source(&d.source_train, &cfg.classifier, &cfg.pretrain_config(cfg.seed))?;
            let dir = out_dir(&cfg)?;
            save_classifier(&model, &dir.join("classifier.json"))?;
            let acc = if d.source_test.is_empty() { f64::NAN } else { model.accuracy(d.source_test.graphs())? };
            println!("source test accuracy {acc:.4}, final loss {:.4}", trace.last().copied().unwrap_or(f64::NAN));
            println!("wrote {}", dir.join("classifier.json").display());
        }
        Command::TrainDiffusion(c) => {
            let cfg = c.resolve()?;
            let d = load_domains(&cfg, cfg.seed)?;
            let net = ScoreNetwork::new(cfg.score_net.clone(), cfg.schedule(), cfg.seed)?;
            let trained = train_score_network(net, d.source_train.graphs(), &cfg.diffusion_train_config(cfg.seed))?;
            let dir = out_dir(&cfg)?;
            save_score_network(&trained.network, &dir.join("score.json"))?;
            if let (Some(first), Some(last)) = (trained.loss_trace.first(), trained.loss_trace.last()) {
                println!("score loss {first:.4} -> {last:.4}");
            }
            println!("wrote {}", dir.join("score.json").display());
        }
        Command::Reconstruct { common, score } => {
            let cfg = common.resolve()?;
            let net = load_score_network(&score)?;
            let d = load_domains(&cfg, cfg.seed)?;
            let steps = cfg.reverse_steps()?;
            let r = Reconstructor { network: &net, t_recon: cfg.diffusion.t_recon, steps, seed: cfg.seed };
            let graphs: Vec<_> = d.target_train.unlabeled().into_graphs().into_iter().chain(d.target_test.into_graphs()).collect();
            let recon = r.run(&graphs, 0, 0)?;
            let dir = out_dir(&cfg)?;
            let path = dir.join("reconstructed.jsonl");
            let p = provenance(cfg.diffusion.t_recon, steps, cfg.seed);
            write_json_lines(&path, recon.iter().map(|g| GraphJson::from(g).with_provenance(p)))?;
            println!("wrote {} graphs to {}", recon.len(), path.display());
        }
        Command::Adapt { common, models } => {
            let cfg = common.resolve()?;
            let (report, artifacts) = run_adaptation(&cfg, &models.load()?)?;
            let dir = out_dir(&cfg)?;
            write_run_outputs(&dir, &report, &artifacts)?;
            save_config(&cfg, &dir)?;
            print!("{}", render_table(&[report]));
        }
        Command::Evaluate { common, classifier } => {
            let cfg = common.resolve()?;
            let model = classifier.as_deref().map(load_classifier).transpose()?;
            let report = evaluate_source_only(&cfg, model.as_ref())?;
            let dir = out_dir(&cfg)?;
            write_run_outputs(&dir, &report, &[])?;
            save_config(&cfg, &dir)?;
            print!("{}", summary_csv(&report));
        }
        Command::Synth(c) => {
            let cfg = c.resolve()?;
            let (s, t) = generate_synthetic_benchmark(&cfg.synth, cfg.seed)?;
            let dir = out_dir(&cfg)?;
            write_tu_dataset(&s, &dir.join("source"), "SOURCE")?;
            write_tu_dataset(&t, &dir.join("target"), "TARGET")?;
            println!("wrote {} source and {} target graphs under {}", s.len(), t.len(), dir.display());
        }
        Command::Sweep { common, models } => {
            let cfg = common.resolve_base()?;
            let t = if common.t_recon.is_empty() { vec![cfg.diffusion.t_recon] } else { common.t_recon.clone() };
            let a = if common.alpha_start.is_empty() { vec![cfg.curriculum.alpha_start] } else { common.alpha_start.clone() };
            let rows = sweep(&cfg, &t, &a, &models.load()?)?;
            let dir = out_dir(&cfg)?;
            write_sweep(&dir, &rows)?;
            save_config(&cfg, &dir)?;
            print!("{}", gala::trainer::sweep_csv(&rows));
        }
        Command::Report { dirs } => {
            if dirs.is_empty() {
                return Err(GalaError::Argument("report needs at least one run directory".into()));
            }
            let reports = dirs.iter().map(|d| read_metrics(&d.join("metrics.json"))).collect::<Result<Vec<_>>>()?;
            print!("{}", render_table(&reports));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
