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

//! Consistency objective on exchanged graphs.

use ndarray::Array2;

use crate::autodiff::{Tape, Var};
use crate::classifier::{cross_entropy_on_tape, ClassifierModel};
use crate::error::{GalaError, Result};
use crate::graph::Graph;
use crate::nn::Gradients;

/// `KL(p || q) = sum_c p_c ln(p_c / q_c)`, with `0 ln 0 = 0`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).filter(|(&a, _)| a > 0.0).map(|(&a, &b)| a * (a / b).ln()).sum()
}

/// Records `CE(augmented confident, pseudo-label) + mean KL(p~ || p)`.
/// `unconfident` pairs each augmented graph with the fixed prediction `p`
/// on its original; `p` takes no gradient. `None` when both sets are empty.
pub fn consistency_loss_on_tape(
    model: &ClassifierModel,
    tape: &mut Tape,
    p: &[Var],
    confident: &[(&Graph, usize)],
    unconfident: &[(&Graph, &[f64])],
) -> Result<Option<Var>> {
    let ce = if confident.is_empty() { None } else { Some(cross_entropy_on_tape(model, tape, p, confident)?) };
    let mut kl_total: Option<Var> = None;
    for &(g, teacher) in unconfident {
        if teacher.len() != model.num_classes() {
            return Err(GalaError::Shape(format!("teacher has {} classes, model {}", teacher.len(), model.num_classes())));
        }
        let lp = model.log_probs_on_tape(tape, p, g)?;
        let logits = model.logits_on_tape(tape, p, g)?;
        let probs = tape.softmax_rows(logits);
        let log_teacher = tape.constant(Array2::from_shape_fn((1, teacher.len()), |(_, c)| teacher[c].max(f64::MIN_POSITIVE).ln()));
        let diff = tape.sub(lp, log_teacher);
        let weighted = tape.mul(probs, diff);
        let kl = tape.sum_all(weighted);
        kl_total = Some(match kl_total {
            Some(t) => tape.add(t, kl),
            None => kl,
        });
    }
    let kl = kl_total.map(|t| tape.scale(t, 1.0 / unconfident.len() as f64));
    Ok(match (ce, kl) {
        (Some(a), Some(b)) => Some(tape.add(a, b)),
        (a, b) => a.or(b),
    })
}

/// Loss value and gradients; empty sets contribute zero.
pub fn consistency_loss(
    model: &ClassifierModel,
    confident: &[(&Graph, usize)],
    unconfident: &[(&Graph, &[f64])],
) -> Result<(f64, Gradients)> {
    let mut tape = Tape::new();
    let p = tape.bind(model.params());
    match consistency_loss_on_tape(model, &mut tape, &p, confident, unconfident)? {
        Some(l) => Ok((tape.scalar(l), tape.param_grads(l, model.params()))),
        None => Ok((0.0, Gradients::zeros_like(model.params()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::ClassifierConfig;

    fn graph(n: usize) -> Graph {
        Graph::new(n, (1..n).map(|i| (i - 1, i)), Array2::from_shape_fn((n, 3), |(i, j)| ((i + j) % 3) as f64), None).unwrap()
    }

    #[test]
    fn kl_examples() {
        assert!((kl_divergence(&[0.5, 0.5], &[0.9, 0.1]) - 0.5108).abs() < 1e-4);
        assert_eq!(kl_divergence(&[0.3, 0.7], &[0.3, 0.7]), 0.0);
    }

    #[test]
    fn kl_term_vanishes_when_teacher_matches() {
        let m = ClassifierModel::new(ClassifierConfig::default(), 3, 2, 1).unwrap();
        let g = graph(5);
        let teacher = m.classify(&g).unwrap().probs;
        let (l, _) = consistency_loss(&m, &[], &[(&g, &teacher)]).unwrap();
        assert!(l.abs() < 1e-12);
        let (l, _) = consistency_loss(&m, &[], &[(&g, &[0.99, 0.01])]).unwrap();
        assert!(l > 0.0);
    }

    #[test]
    fn value_matches_direct_evaluation() {
        let m = ClassifierModel::new(ClassifierConfig::default(), 3, 2, 2).unwrap();
        let (a, b) = (graph(4), graph(6));
        let teacher = [0.2, 0.8];
        let (l, grads) = consistency_loss(&m, &[(&a, 1)], &[(&b, &teacher)]).unwrap();
        let pa = m.classify(&a).unwrap().probs;
        let pb = m.classify(&b).unwrap().probs;
        let expected = -pa[1].ln() + kl_divergence(&pb, &teacher);
        assert!((l - expected).abs() < 1e-12);
        assert!(l >= 0.0);
        assert!(grads.norm() > 0.0);
        let (zero, g0) = consistency_loss(&m, &[], &[]).unwrap();
        assert_eq!((zero, g0.norm()), (0.0, 0.0));
    }
}
