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

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = "seeds = 1
synth.graphs_per_domain = 40
pretrain.epochs = 10
diffusion.epochs = 2
diffusion.batch_size = 16
diffusion.steps = 5
adapt.epochs = 3
";

fn gala(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gala"))
        .args(args)
        .current_dir(dir)
        .env_remove("GALA_OUT")
        .output()
        .expect("binary runs")
}

fn ok(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.cfg"), TINY).unwrap();
    dir
}

#[test]
fn synth_then_pretrain_runs_end_to_end() {
    let d = setup();
    ok(&gala(d.path(), &["synth", "--config", "run.cfg", "--out", "data"]));
    assert!(d.path().join("data/source/SOURCE_A.txt").is_file());
    assert!(d.path().join("data/target/TARGET_graph_labels.txt").is_file());
    ok(&gala(d.path(), &["pretrain", "--config", "run.cfg", "--data", "data", "--out", "m"]));
    assert!(d.path().join("m/classifier.json").is_file());
}

#[test]
fn adapt_twice_gives_identical_metrics() {
    let d = setup();
    for out in ["a", "b"] {
        ok(&gala(d.path(), &["adapt", "--config", "run.cfg", "--seed", "7", "--out", out]));
    }
    for f in ["metrics.csv", "metrics.json", "summary.csv", "thresholds_seed7.csv"] {
        let a = fs::read(d.path().join("a").join(f)).unwrap();
        let b = fs::read(d.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
    let csv = fs::read_to_string(d.path().join("a/metrics.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "task,seed,epoch,loss_sup,loss_con,loss_total,confident_count,accuracy");
    assert_eq!(csv.lines().count(), 1 + 3);
    let report = ok(&gala(d.path(), &["report", "a"]));
    assert!(report.contains("| synthetic | 1 |"));
}

#[test]
fn sweep_emits_one_row_per_value() {
    let d = setup();
    let out = ok(&gala(d.path(), &["sweep", "--config", "run.cfg", "--t-recon", "0.05,0.1,0.2,0.3,0.4", "--out", "s"]));
    assert_eq!(out.lines().count(), 1 + 5);
    let csv = fs::read_to_string(d.path().join("s/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 5);
}

#[test]
fn checkpoints_feed_reconstruct_and_adapt() {
    let d = setup();
    ok(&gala(d.path(), &["pretrain", "--config", "run.cfg", "--out", "m"]));
    ok(&gala(d.path(), &["train-diffusion", "--config", "run.cfg", "--out", "m"]));
    ok(&gala(d.path(), &["reconstruct", "--config", "run.cfg", "--out", "m", "--score", "m/score.json"]));
    let lines = fs::read_to_string(d.path().join("m/reconstructed.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 40);
    assert!(lines.contains("\"provenance\""));
    ok(&gala(
        d.path(),
        &["adapt", "--config", "run.cfg", "--out", "a", "--classifier", "m/classifier.json", "--score", "m/score.json"],
    ));
    let e = ok(&gala(d.path(), &["evaluate", "--config", "run.cfg", "--out", "e", "--classifier", "m/classifier.json"]));
    assert!(e.contains("synthetic,source_only,"));
}

#[test]
fn gala_out_overrides_output() {
    let d = setup();
    let o = Command::new(env!("CARGO_BIN_EXE_gala"))
        .args(["synth", "--config", "run.cfg", "--out", "ignored"])
        .current_dir(d.path())
        .env("GALA_OUT", d.path().join("env"))
        .output()
        .unwrap();
    ok(&o);
    assert!(d.path().join("env/source").is_dir());
    assert!(!d.path().join("ignored").exists());
}

#[test]
fn exit_codes() {
    let d = setup();
    assert_eq!(gala(d.path(), &["adapt", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(gala(d.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(gala(d.path(), &["adapt", "--set", "adapt.nope=1"]).status.code(), Some(1));
    assert_eq!(gala(d.path(), &["adapt", "--config", "absent.cfg"]).status.code(), Some(2));
    assert_eq!(gala(d.path(), &["pretrain", "--data", "absent_dir"]).status.code(), Some(2));
    assert_eq!(gala(d.path(), &["--help"]).status.code(), Some(0));
    fs::write(d.path().join("bad.json"), "{ not json").unwrap();
    assert_eq!(gala(d.path(), &["adapt", "--config", "run.cfg", "--classifier", "bad.json"]).status.code(), Some(2));
}
