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

//! Class-adaptive confidence thresholds with a linear curriculum.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::classifier::{cross_entropy_on_tape, ClassifierModel, LabelDistribution};
use crate::error::{GalaError, Result};
use crate::graph::Graph;
use crate::nn::Gradients;

#[derive(Clone, Debug, PartialEq)]
pub struct ConfidenceRecord {
    pub graph_index: usize,
    pub probs: LabelDistribution,
    pub confidence: f64,
    pub predicted_class: usize,
}

impl ConfidenceRecord {
    pub fn new(graph_index: usize, probs: LabelDistribution) -> Self {
        let confidence = probs.confidence();
        let predicted_class = probs.predicted_class();
        ConfidenceRecord { graph_index, probs, confidence, predicted_class }
    }
}

/// Predictions of `model` on every graph, indexed by position.
pub fn compute_records(model: &ClassifierModel, graphs: &[Graph]) -> Result<Vec<ConfidenceRecord>> {
    graphs.iter().enumerate().map(|(i, g)| Ok(ConfidenceRecord::new(i, model.classify(g)?))).collect()
}

/// `alpha(e)` rising linearly from `alpha_start` at epoch 0 to `alpha_end`
/// at the last epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurriculumSchedule {
    pub alpha_start: f64,
    pub alpha_end: f64,
    pub total_epochs: usize,
}

impl Default for CurriculumSchedule {
    fn default() -> Self {
        CurriculumSchedule { alpha_start: 0.95, alpha_end: 0.99, total_epochs: 50 }
    }
}

impl CurriculumSchedule {
    pub fn new(alpha_start: f64, alpha_end: f64, total_epochs: usize) -> Result<Self> {
        if !(alpha_start > 0.0 && alpha_start <= alpha_end && alpha_end <= 1.0) {
            return Err(GalaError::Argument(format!("need 0 < alpha_start <= alpha_end <= 1, got {alpha_start}, {alpha_end}")));
        }
        Ok(CurriculumSchedule { alpha_start, alpha_end, total_epochs })
    }

    pub fn alpha(&self, epoch: usize) -> f64 {
        if self.total_epochs <= 1 {
            return self.alpha_start;
        }
        let frac = epoch as f64 / (self.total_epochs - 1) as f64;
        (self.alpha_start + (self.alpha_end - self.alpha_start) * frac).clamp(self.alpha_start, self.alpha_end)
    }
}

/// Highest confidence among records predicted as each class; `None` for
/// classes nobody predicts.
pub fn class_max(records: &[ConfidenceRecord], num_classes: usize) -> Result<Vec<Option<f64>>> {
    if records.is_empty() {
        return Err(GalaError::Argument("no confidence records".into()));
    }
    let mut m: Vec<Option<f64>> = vec![None; num_classes];
    for r in records {
        let slot = m
            .get_mut(r.predicted_class)
            .ok_or_else(|| GalaError::Contract(format!("class {} outside 0..{num_classes}", r.predicted_class)))?;
        *slot = Some(slot.map_or(r.confidence, |v| v.max(r.confidence)));
    }
    Ok(m)
}

/// `tau_c = M_c * alpha(e)`, or `alpha(e)` for absent classes.
pub fn thresholds(m: &[Option<f64>], epoch: usize, sched: &CurriculumSchedule) -> Vec<f64> {
    let a = sched.alpha(epoch);
    m.iter().map(|mc| mc.map_or(a, |v| v * a)).collect()
}

/// `(graph_index, pseudo_label)` for every record strictly above its
/// class threshold.
pub fn select_confident(records: &[ConfidenceRecord], tau: &[f64]) -> Vec<(usize, usize)> {
    records
        .iter()
        .filter(|r| r.confidence > tau[r.predicted_class])
        .map(|r| (r.graph_index, r.predicted_class))
        .collect()
}

/// Selection with one global threshold, for comparison.
pub fn select_fixed(records: &[ConfidenceRecord], threshold: f64) -> Vec<(usize, usize)> {
    let tau = vec![threshold; records.iter().map(|r| r.probs.probs.len()).max().unwrap_or(0)];
    select_confident(records, &tau)
}

/// Count of confident graphs per class.
pub fn class_counts(confident: &[(usize, usize)], num_classes: usize) -> Vec<usize> {
    let mut counts = vec![0; num_classes];
    for &(_, y) in confident {
        counts[y] += 1;
    }
    counts
}

/// Shannon entropy (nats) of the class shares of a confident set; 0 when empty.
pub fn class_share_entropy(confident: &[(usize, usize)], num_classes: usize) -> f64 {
    let total = confident.len() as f64;
    if total == 0.0 {
        return 0.0;
    }
    class_counts(confident, num_classes)
        .into_iter()
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum::<f64>()
        .max(0.0)
}

/// Records `L_sup` on `tape`; `None` for an empty confident set.
pub fn sup_loss_on_tape(
    model: &ClassifierModel,
    tape: &mut Tape,
    p: &[Var],
    graphs: &[Graph],
    confident: &[(usize, usize)],
) -> Result<Option<Var>> {
    if confident.is_empty() {
        return Ok(None);
    }
    let batch = confident
        .iter()
        .map(|&(i, y)| graphs.get(i).map(|g| (g, y)).ok_or_else(|| GalaError::Argument(format!("graph index {i} out of range"))))
        .collect::<Result<Vec<_>>>()?;
    cross_entropy_on_tape(model, tape, p, &batch).map(Some)
}

/// Mean negative log-probability of the pseudo-labels, with gradients.
/// An empty set gives zero loss and zero gradients.
pub fn sup_loss(model: &ClassifierModel, graphs: &[Graph], confident: &[(usize, usize)]) -> Result<(f64, Gradients)> {
    let mut tape = Tape::new();
    let p = tape.bind(model.params());
    match sup_loss_on_tape(model, &mut tape, &p, graphs, confident)? {
        Some(loss) => Ok((tape.scalar(loss), tape.param_grads(loss, model.params()))),
        None => Ok((0.0, Gradients::zeros_like(model.params()))),
    }
}

/// One row of the per-epoch threshold dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassDiagnostics {
    pub epoch: usize,
    pub class: usize,
    pub m_c: Option<f64>,
    pub tau_c: f64,
    pub confident_count: usize,
    pub class_share: f64,
}

pub fn class_diagnostics(epoch: usize, m: &[Option<f64>], tau: &[f64], confident: &[(usize, usize)]) -> Vec<ClassDiagnostics> {
    let counts = class_counts(confident, m.len());
    let total = confident.len();
    (0..m.len())
        .map(|c| ClassDiagnostics {
            epoch,
            class: c,
            m_c: m[c],
            tau_c: tau[c],
            confident_count: counts[c],
            class_share: if total == 0 { 0.0 } else { counts[c] as f64 / total as f64 },
        })
        .collect()
}

/// CSV with header `epoch,class,M_c,tau_c,confident_count,class_share`;
/// an absent class leaves `M_c` empty.
pub fn write_diagnostics_csv(rows: &[ClassDiagnostics], path: &Path) -> Result<()> {
    let mut out = String::from("epoch,class,M_c,tau_c,confident_count,class_share\n");
    for r in rows {
        let m = r.m_c.map(|v| format!("{v:?}")).unwrap_or_default();
        out.push_str(&format!("{},{},{},{:?},{},{:?}\n", r.epoch, r.class, m, r.tau_c, r.confident_count, r.class_share));
    }
    let mut f = std::fs::File::create(path).map_err(|e| GalaError::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| GalaError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::ClassifierConfig;
    use proptest::prelude::*;

    fn rec(i: usize, probs: &[f64]) -> ConfidenceRecord {
        ConfidenceRecord::new(i, LabelDistribution { probs: probs.to_vec() })
    }

    #[test]
    fn class_max_examples() {
        let r = [rec(0, &[0.7, 0.3]), rec(1, &[0.6, 0.4]), rec(2, &[0.2, 0.8])];
        assert_eq!(class_max(&r, 2).unwrap(), vec![Some(0.7), Some(0.8)]);
        let r = [rec(0, &[0.7, 0.3]), rec(1, &[0.6, 0.4])];
        assert_eq!(class_max(&r, 2).unwrap(), vec![Some(0.7), None]);
        let tie = rec(0, &[0.5, 0.5]);
        assert_eq!(tie.predicted_class, 0);
        assert_eq!(class_max(&[tie], 2).unwrap(), vec![Some(0.5), None]);
        assert!(matches!(class_max(&[], 2), Err(GalaError::Argument(_))));
    }

    #[test]
    fn threshold_examples() {
        let s = CurriculumSchedule::default();
        assert!((thresholds(&[Some(0.9)], 0, &s)[0] - 0.855).abs() < 1e-12);
        assert!((thresholds(&[Some(1.0)], 49, &s)[0] - 0.99).abs() < 1e-12);
        assert_eq!(thresholds(&[None], 0, &s), vec![0.95]);
        assert_eq!(s.alpha(0), 0.95);
        assert_eq!(s.alpha(49), 0.99);
        assert_eq!(s.alpha(500), 0.99);
    }

    #[test]
    fn selection_is_strict() {
        let r = [rec(0, &[0.9, 0.1]), rec(1, &[0.855, 0.145])];
        assert_eq!(select_confident(&r, &[0.855, 0.5]), vec![(0, 0)]);
    }

    #[test]
    fn sup_loss_closed_forms() {
        let mut m = ClassifierModel::new(ClassifierConfig::default(), 3, 6, 0).unwrap();
        for id in 0..m.params().len() {
            m.params_mut().value_mut(id).fill(0.0);
        }
        let g = Graph::new(3, [(0, 1)], ndarray::Array2::ones((3, 3)), None).unwrap();
        let (l, _) = sup_loss(&m, std::slice::from_ref(&g), &[(0, 4)]).unwrap();
        // all-zero weights predict uniformly
        assert!((l - 6f64.ln()).abs() < 1e-12);
        let (l, grads) = sup_loss(&m, &[g], &[]).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(grads.norm(), 0.0);
    }

    #[test]
    fn diagnostics_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let rows = class_diagnostics(3, &[Some(0.8), None], &[0.76, 0.95], &[(0, 0), (4, 0)]);
        write_diagnostics_csv(&rows, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "epoch,class,M_c,tau_c,confident_count,class_share\n3,0,0.8,0.76,2,1.0\n3,1,,0.95,0,0.0\n");
    }

    fn records_strategy() -> impl Strategy<Value = Vec<ConfidenceRecord>> {
        prop::collection::vec(prop::collection::vec(0.01f64..1.0, 3), 1..40).prop_map(|rows| {
            rows.into_iter()
                .enumerate()
                .map(|(i, w)| {
                    let s: f64 = w.iter().sum();
                    rec(i, &w.iter().map(|v| v / s).collect::<Vec<_>>())
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn argmax_record_of_each_class_is_selected(records in records_strategy(), e in 0usize..50) {
            let s = CurriculumSchedule::default();
            let m = class_max(&records, 3).unwrap();
            let chosen = select_confident(&records, &thresholds(&m, e, &s));
            for (c, mc) in m.iter().enumerate() {
                if mc.is_some() {
                    prop_assert!(chosen.iter().any(|&(_, y)| y == c));
                }
            }
        }

        #[test]
        fn confident_set_shrinks_with_epoch(records in records_strategy(), e in 0usize..49) {
            let s = CurriculumSchedule::default();
            let m = class_max(&records, 3).unwrap();
            let early = select_confident(&records, &thresholds(&m, e, &s));
            let late = select_confident(&records, &thresholds(&m, e + 1, &s));
            prop_assert!(late.iter().all(|x| early.contains(x)));
            prop_assert!(s.alpha(e) <= s.alpha(e + 1));
        }

        #[test]
        fn selection_is_scale_free_within_a_class(records in records_strategy(), k in 0.1f64..1.0, e in 0usize..50) {
            let s = CurriculumSchedule::default();
            let base = select_confident(&records, &thresholds(&class_max(&records, 3).unwrap(), e, &s));
            // shrink every confidence predicted as class 0 by a common factor
            let scaled: Vec<ConfidenceRecord> = records.iter().map(|r| {
                let mut r = r.clone();
                if r.predicted_class == 0 { r.confidence *= k; }
                r
            }).collect();
            let again = select_confident(&scaled, &thresholds(&class_max(&scaled, 3).unwrap(), e, &s));
            prop_assert_eq!(base, again);
        }

        #[test]
        fn selection_commutes_with_reordering(records in records_strategy(), e in 0usize..50) {
            let s = CurriculumSchedule::default();
            let tau = thresholds(&class_max(&records, 3).unwrap(), e, &s);
            let mut rev = records.clone();
            rev.reverse();
            let mut a = select_confident(&records, &tau);
            let mut b = select_confident(&rev, &tau);
            b.reverse();
            prop_assert_eq!(&a, &b);
            a.sort();
            prop_assert!(a.windows(2).all(|w| w[0] != w[1]));
        }
    }
}
