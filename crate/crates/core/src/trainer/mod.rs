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

//! End-to-end adaptation runs, the synthetic benchmark and reporting.

mod analysis;
mod config;
mod pipeline;
mod report;
mod synth;

pub use config::{AdaptConfig, CurriculumConfig, DataConfig, DiffusionConfig, ExperimentConfig, PretrainConfig, SynthSpec};
pub use synth::generate_synthetic_benchmark;
pub use analysis::{binomial_upper_tail, density_shift_report, linear_fit, DensityShift, LinearFit, Summary};
pub use pipeline::{
    adapt_classifier, adapt_seed, evaluate_source_only, load_domains, prepare_seed, run_adaptation, scaling_probe, sweep,
    AdaptOutcome, Checkpoints, Domains, EpochLog, MetricsReport, Prepared, Reconstructor, ScalingReport, SeedArtifacts,
    SeedReport, SourceHandle, SourceProbe, StageTimings, SweepRow,
};
pub use report::{
    metrics_csv, read_metrics, render_table, summary_csv, sweep_csv, write_run_outputs, write_sweep, METRICS_CSV_HEADER,
};
