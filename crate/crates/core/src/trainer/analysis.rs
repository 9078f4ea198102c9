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

//! Summary statistics, the density-shift sign test and the linear fit.

use serde::{Deserialize, Serialize};

use crate::error::{GalaError, Result};
use crate::graph::Graph;

/// Mean and sample standard deviation (n - 1 denominator; 0 for one value).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Summary { mean: f64::NAN, std: f64::NAN, n };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std = if n < 2 { 0.0 } else { (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() };
        Summary { mean, std, n }
    }
}

/// `P(X >= k)` for `X ~ Binomial(n, 1/2)`.
pub fn binomial_upper_tail(k: usize, n: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    // ln C(n, i) - n ln 2, built up term by term
    let mut log_term = -(n as f64) * std::f64::consts::LN_2;
    let mut tail = 0.0;
    for i in 0..=n {
        if i > 0 {
            log_term += ((n - i + 1) as f64).ln() - (i as f64).ln();
        }
        if i >= k {
            tail += log_term.exp();
        }
    }
    tail.min(1.0)
}

/// Density of a graph, 0 for fewer than two nodes.
fn density_or_zero(g: &Graph) -> f64 {
    g.density().unwrap_or(0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityShift {
    pub source_mean: f64,
    pub mean_before: f64,
    pub mean_after: f64,
    /// `after - before` per graph.
    pub deltas: Vec<f64>,
    /// Graphs that ended strictly closer to the source mean.
    pub moved_toward: usize,
    /// Graphs whose distance to the source mean changed at all.
    pub moved: usize,
    /// `moved_toward` over all graphs.
    pub toward_fraction: f64,
    /// One-sided sign test over the graphs that moved.
    pub p_value: f64,
}

/// Per-graph density change between aligned graph lists, and how many
/// moved toward `source_mean`.
pub fn density_shift_report(before: &[Graph], after: &[Graph], source_mean: f64) -> Result<DensityShift> {
    if before.len() != after.len() {
        return Err(GalaError::Argument(format!("{} graphs before but {} after", before.len(), after.len())));
    }
    if before.is_empty() {
        return Err(GalaError::Argument("no graphs to compare".into()));
    }
    let b: Vec<f64> = before.iter().map(density_or_zero).collect();
    let a: Vec<f64> = after.iter().map(density_or_zero).collect();
    let mut moved = 0;
    let mut moved_toward = 0;
    for (x, y) in b.iter().zip(&a) {
        let (d0, d1) = ((x - source_mean).abs(), (y - source_mean).abs());
        if d1 != d0 {
            moved += 1;
            if d1 < d0 {
                moved_toward += 1;
            }
        }
    }
    let n = b.len() as f64;
    Ok(DensityShift {
        source_mean,
        mean_before: b.iter().sum::<f64>() / n,
        mean_after: a.iter().sum::<f64>() / n,
        deltas: b.iter().zip(&a).map(|(x, y)| y - x).collect(),
        moved_toward,
        moved,
        toward_fraction: moved_toward as f64 / n,
        p_value: binomial_upper_tail(moved_toward, moved),
    })
}

/// Least-squares line `y = slope x + intercept`. `None` fields mean the
/// fit is degenerate (fewer than two distinct x).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub r_squared: Option<f64>,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    let n = xs.len() as f64;
    let degenerate = LinearFit { slope: None, intercept: None, r_squared: None };
    if xs.len() != ys.len() || xs.len() < 2 {
        return degenerate;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return degenerate;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    LinearFit { slope: Some(slope), intercept: Some(intercept), r_squared: Some(r_squared) }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> Graph {
        Graph::unattributed(n, (1..n).map(|i| (i - 1, i))).unwrap()
    }

    fn complete(n: usize) -> Graph {
        Graph::unattributed(n, (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))).unwrap()
    }

    #[test]
    fn sample_std_matches_hand_value() {
        let s = Summary::of(&[0.5, 0.7, 0.6]);
        assert!((s.mean - 0.6).abs() < 1e-12);
        assert!((s.std - 0.1).abs() < 1e-12);
        assert_eq!(Summary::of(&[0.4]).std, 0.0);
    }

    #[test]
    fn binomial_tail_values() {
        assert!((binomial_upper_tail(2, 2) - 0.25).abs() < 1e-12);
        assert!((binomial_upper_tail(1, 2) - 0.75).abs() < 1e-12);
        assert!((binomial_upper_tail(0, 5) - 1.0).abs() < 1e-12);
        // P(X >= 115 | n = 200) is about 0.02
        let p = binomial_upper_tail(115, 200);
        assert!(p > 0.01 && p < 0.03, "{p}");
    }

    #[test]
    fn density_shift_examples() {
        let before = vec![complete(5), complete(6)];
        let same = density_shift_report(&before, &before, 0.2).unwrap();
        assert_eq!((same.moved, same.toward_fraction), (0, 0.0));
        assert!(same.deltas.iter().all(|d| *d == 0.0));
        let after = vec![path(5), path(6)];
        let r = density_shift_report(&before, &after, 0.2).unwrap();
        assert_eq!(r.toward_fraction, 1.0);
        assert!(r.mean_after < r.mean_before);
        assert!(matches!(density_shift_report(&before, &after[..1], 0.2), Err(GalaError::Argument(_))));
    }

    #[test]
    fn linear_fit_cases() {
        let f = linear_fit(&[1.0, 2.0, 4.0], &[3.0, 5.0, 9.0]);
        assert!((f.slope.unwrap() - 2.0).abs() < 1e-12);
        assert!((f.intercept.unwrap() - 1.0).abs() < 1e-12);
        assert!((f.r_squared.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(linear_fit(&[3.0], &[1.0]).slope, None);
        assert_eq!(linear_fit(&[3.0, 3.0], &[1.0, 2.0]).slope, None);
    }
}
