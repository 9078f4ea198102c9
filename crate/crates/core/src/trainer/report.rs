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

//! Files written by a run, and the text tables printed by `gala report`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::analysis::Summary;
use super::pipeline::{MetricsReport, SeedArtifacts, StageTimings, SweepRow};
use crate::error::{GalaError, Result};
use crate::jigsaw::write_trace;
use crate::pseudo_label::write_diagnostics_csv;

pub const METRICS_CSV_HEADER: &str = "task,seed,epoch,loss_sup,loss_con,loss_total,confident_count,accuracy";

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| GalaError::io(path, e))
}

fn json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report types serialize");
    s.push('\n');
    s
}

fn opt(x: Option<f64>) -> String {
    x.map_or(String::new(), |v| format!("{v:?}"))
}

/// Per-epoch rows of every seed.
pub fn metrics_csv(report: &MetricsReport) -> String {
    let mut out = format!("{METRICS_CSV_HEADER}\n");
    for s in &report.seeds {
        for e in &s.epochs {
            let _ = writeln!(
                out,
                "{},{},{},{:?},{:?},{:?},{},{}",
                report.task,
                s.seed,
                e.epoch,
                e.loss_sup,
                e.loss_con,
                e.loss_total,
                e.confident_count,
                opt(e.accuracy)
            );
        }
    }
    out
}

/// Mean and sample std of each reported accuracy.
pub fn summary_csv(report: &MetricsReport) -> String {
    let mut out = String::from("task,method,mean,std,n\n");
    let rows = [("source_only", Some(&report.source_only)), ("adapted", report.adapted.as_ref()), ("adapted_raw", report.adapted_raw.as_ref())];
    for (name, s) in rows {
        if let Some(s) = s {
            let _ = writeln!(out, "{},{name},{:?},{:?},{}", report.task, s.mean, s.std, s.n);
        }
    }
    out
}

/// Writes metrics.csv, summary.csv, metrics.json, timings.json, and per seed
/// thresholds_seed{s}.csv plus jigsaw_trace_seed{s}.jsonl when traced.
/// Everything except timings.json is a pure function of config and seed.
pub fn write_run_outputs(dir: &Path, report: &MetricsReport, artifacts: &[SeedArtifacts]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| GalaError::io(dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: String, text: String| -> Result<()> {
        let p = dir.join(name);
        write(&p, &text)?;
        written.push(p);
        Ok(())
    };
    put("metrics.csv".into(), metrics_csv(report))?;
    put("summary.csv".into(), summary_csv(report))?;
    put("metrics.json".into(), json(report))?;
    let timings: Vec<&StageTimings> = artifacts.iter().map(|a| &a.timings).collect();
    put("timings.json".into(), json(&timings))?;
    for (s, a) in report.seeds.iter().zip(artifacts) {
        if !a.diagnostics.is_empty() {
            let p = dir.join(format!("thresholds_seed{}.csv", s.seed));
            write_diagnostics_csv(&a.diagnostics, &p)?;
            written.push(p);
        }
        if !a.trace.is_empty() {
            let p = dir.join(format!("jigsaw_trace_seed{}.jsonl", s.seed));
            write_trace(&a.trace, &p)?;
            written.push(p);
        }
    }
    Ok(written)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("t_recon,alpha_start,source_only_mean,source_only_std,adapted_mean,adapted_std,adapted_raw_mean,adapted_raw_std,n\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{}",
            r.t_recon, r.alpha_start, r.source_only.mean, r.source_only.std, r.adapted.mean, r.adapted.std, r.adapted_raw.mean, r.adapted_raw.std, r.adapted.n
        );
    }
    out
}

pub fn write_sweep(dir: &Path, rows: &[SweepRow]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| GalaError::io(dir, e))?;
    write(&dir.join("sweep.csv"), &sweep_csv(rows))?;
    write(&dir.join("sweep.json"), &json(&rows))
}

pub fn read_metrics(path: &Path) -> Result<MetricsReport> {
    let text = fs::read_to_string(path).map_err(|e| GalaError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| GalaError::format(path, e.to_string()))
}

fn pct(s: &Summary) -> String {
    format!("{:.1} ± {:.1}", 100.0 * s.mean, 100.0 * s.std)
}

/// Markdown table of one or more runs, accuracies in percent.
pub fn render_table(reports: &[MetricsReport]) -> String {
    let mut out = String::from("| task | seeds | source-only | adapted | adapted (raw graphs) |\n|---|---|---|---|---|\n");
    for r in reports {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} |",
            r.task,
            r.source_only.n,
            pct(&r.source_only),
            r.adapted.as_ref().map_or("-".into(), pct),
            r.adapted_raw.as_ref().map_or("-".into(), pct)
        );
    }
    out
}
