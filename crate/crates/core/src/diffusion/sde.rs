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

//! Forward perturbation, the Gaussian conditional score, and reverse-time
//! Euler-Maruyama integration over symmetric adjacency matrices.

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use super::NoiseSchedule;
use crate::error::{GalaError, Result};
use crate::graph::{Graph, Provenance};

/// A continuous adjacency matrix at diffusion time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionState {
    pub a: Array2<f64>,
    pub t: f64,
}

/// Anything that estimates `grad log p_t(A)` for a symmetric `A`.
pub trait ScoreModel {
    fn score(&self, a_t: &Array2<f64>, t: f64) -> Array2<f64>;

    fn is_usable(&self) -> bool {
        true
    }
}

/// The exact conditional score `-(A_t - A0 m(t)) / v(t)` around a known `A0`.
#[derive(Clone, Debug)]
pub struct AnalyticScore {
    pub a0: Array2<f64>,
    pub schedule: NoiseSchedule,
}

impl ScoreModel for AnalyticScore {
    fn score(&self, a_t: &Array2<f64>, t: f64) -> Array2<f64> {
        analytic_score(a_t, &self.a0, t, &self.schedule).expect("analytic score evaluated at t > 0")
    }
}

/// The constant-zero score.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroScore;

impl ScoreModel for ZeroScore {
    fn score(&self, a_t: &Array2<f64>, _t: f64) -> Array2<f64> {
        Array2::zeros(a_t.raw_dim())
    }
}

pub(crate) fn check_symmetric(a: &Array2<f64>) -> Result<()> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(GalaError::Contract(format!("matrix is {}x{}, not square", n, a.ncols())));
    }
    for i in 0..n {
        if a[[i, i]] != 0.0 {
            return Err(GalaError::Contract(format!("nonzero diagonal at {i}")));
        }
        for j in (i + 1)..n {
            if a[[i, j]] != a[[j, i]] {
                return Err(GalaError::Contract(format!("asymmetric entry ({i}, {j})")));
            }
        }
    }
    Ok(())
}

/// Symmetric standard-normal matrix: upper triangle i.i.d., mirrored, zero diagonal.
pub fn symmetric_noise(n: usize, rng: &mut impl Rng) -> Array2<f64> {
    let mut z = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let v: f64 = rng.sample(StandardNormal);
            z[[i, j]] = v;
            z[[j, i]] = v;
        }
    }
    z
}

/// Forces exact symmetry and a zero diagonal.
pub fn symmetrize(a: &mut Array2<f64>) {
    let n = a.nrows();
    for i in 0..n {
        a[[i, i]] = 0.0;
        for j in (i + 1)..n {
            let v = 0.5 * (a[[i, j]] + a[[j, i]]);
            a[[i, j]] = v;
            a[[j, i]] = v;
        }
    }
}

/// Samples `A(t) = A0 m(t) + sqrt(v(t)) eps` with symmetric noise `eps`.
pub fn forward_perturb(a0: &Array2<f64>, t: f64, schedule: &NoiseSchedule, rng: &mut impl Rng) -> Result<DiffusionState> {
    check_symmetric(a0)?;
    if !(t > 0.0 && t <= 1.0) {
        return Err(GalaError::Contract(format!("perturbation time {t} outside (0, 1]")));
    }
    let eps = symmetric_noise(a0.nrows(), rng);
    Ok(perturb_with_noise(a0, t, schedule, &eps))
}

pub(crate) fn perturb_with_noise(a0: &Array2<f64>, t: f64, schedule: &NoiseSchedule, eps: &Array2<f64>) -> DiffusionState {
    let a = a0 * schedule.mean_scale(t) + eps * schedule.std(t);
    DiffusionState { a, t }
}

/// `-(A_t - A0 m(t)) / v(t)`, the regression target of score matching.
pub fn analytic_score(a_t: &Array2<f64>, a0: &Array2<f64>, t: f64, schedule: &NoiseSchedule) -> Result<Array2<f64>> {
    let v = schedule.variance(t);
    if t <= 0.0 || v <= 0.0 {
        return Err(GalaError::SingularVariance(t));
    }
    if a_t.dim() != a0.dim() {
        return Err(GalaError::Shape(format!("A_t is {:?} but A0 is {:?}", a_t.dim(), a0.dim())));
    }
    Ok((a_t - &(a0 * schedule.mean_scale(t))) / -v)
}

/// One Euler-Maruyama step of the reverse SDE with caller-supplied noise `z`.
pub fn reverse_step_with_noise(
    state: &DiffusionState,
    dt: f64,
    model: &dyn ScoreModel,
    schedule: &NoiseSchedule,
    z: &Array2<f64>,
) -> Result<DiffusionState> {
    // tolerate accumulated rounding when stepping onto t = 0
    if dt.is_nan() || dt <= 0.0 || state.t < dt - 1e-12 {
        return Err(GalaError::Contract(format!("cannot step back {dt} from t = {}", state.t)));
    }
    let beta = schedule.beta(state.t);
    let score = model.score(&state.a, state.t);
    let drift = &state.a * (0.5 * beta) + &score * beta;
    let mut a = &state.a + &(drift * dt) + &(z * (beta * dt).sqrt());
    symmetrize(&mut a);
    Ok(DiffusionState { a, t: (state.t - dt).max(0.0) })
}

/// One Euler-Maruyama step of the reverse SDE:
/// `A(t - dt) = A + [beta A / 2 + beta score] dt + sqrt(beta dt) Z`.
pub fn reverse_step(
    state: &DiffusionState,
    dt: f64,
    model: &dyn ScoreModel,
    schedule: &NoiseSchedule,
    rng: &mut impl Rng,
) -> Result<DiffusionState> {
    let z = symmetric_noise(state.a.nrows(), rng);
    reverse_step_with_noise(state, dt, model, schedule, &z)
}

/// Number of reverse steps that cover `t_recon` with step `dt`.
pub fn step_count(t_recon: f64, dt: f64) -> Result<usize> {
    if dt.is_nan() || dt <= 0.0 {
        return Err(GalaError::Argument(format!("step size {dt} must be positive")));
    }
    let steps = (t_recon / dt).round();
    if steps < 1.0 || (steps * dt - t_recon).abs() > 1e-9 {
        return Err(GalaError::Argument(format!("step {dt} does not divide t_recon {t_recon}")));
    }
    Ok(steps as usize)
}

/// Integrates the reverse SDE from `start` down to `t = 0` in `steps` equal steps.
pub fn integrate_reverse(
    start: DiffusionState,
    steps: usize,
    model: &dyn ScoreModel,
    schedule: &NoiseSchedule,
    rng: &mut impl Rng,
) -> Result<DiffusionState> {
    let t0 = start.t;
    let dt = t0 / steps as f64;
    let mut state = start;
    for k in 0..steps {
        // re-anchor the clock on the grid so rounding never accumulates
        state.t = t0 * (steps - k) as f64 / steps as f64;
        state = reverse_step(&state, dt, model, schedule, rng)?;
    }
    state.t = 0.0;
    Ok(state)
}

/// Noises `a0` to `t_recon` and integrates back to 0, returning the
/// continuous result.
pub fn reconstruct_adjacency(
    a0: &Array2<f64>,
    model: &dyn ScoreModel,
    schedule: &NoiseSchedule,
    t_recon: f64,
    steps: usize,
    rng: &mut impl Rng,
) -> Result<Array2<f64>> {
    if !model.is_usable() {
        return Err(GalaError::Model("score model has non-finite parameters".into()));
    }
    if !(t_recon > 0.0 && t_recon < 1.0) {
        return Err(GalaError::Argument(format!("t_recon {t_recon} outside (0, 1)")));
    }
    let noised = forward_perturb(a0, t_recon, schedule, rng)?;
    Ok(integrate_reverse(noised, steps, model, schedule, rng)?.a)
}

/// Converts a graph into its reconstruction under `model`: forward noise to
/// `t_recon`, reverse-integrate in steps of `dt`, threshold at 1/2. Node
/// count and attributes are kept; the label is dropped.
pub fn adapt_target_graph(
    g: &Graph,
    model: &dyn ScoreModel,
    schedule: &NoiseSchedule,
    t_recon: f64,
    dt: f64,
    rng: &mut impl Rng,
) -> Result<Graph> {
    let steps = step_count(t_recon, dt)?;
    adapt_target_graph_steps(g, model, schedule, t_recon, steps, rng)
}

/// As [`adapt_target_graph`] with an explicit step count.
pub fn adapt_target_graph_steps(
    g: &Graph,
    model: &dyn ScoreModel,
    schedule: &NoiseSchedule,
    t_recon: f64,
    steps: usize,
    rng: &mut impl Rng,
) -> Result<Graph> {
    if steps == 0 {
        return Err(GalaError::Argument("need at least one reverse step".into()));
    }
    let a = reconstruct_adjacency(&g.adjacency_matrix(), model, schedule, t_recon, steps, rng)?;
    Graph::from_adjacency(&a, 0.5, g.attributes().clone())
}

/// Draws a graph from the prior at `t = 1` and integrates down to 0.
/// Nodes get a single constant attribute column.
pub fn sample_prior(
    n_nodes: usize,
    model: &dyn ScoreModel,
    schedule: &NoiseSchedule,
    dt: f64,
    rng: &mut impl Rng,
) -> Result<Graph> {
    if !model.is_usable() {
        return Err(GalaError::Model("score model has non-finite parameters".into()));
    }
    let steps = step_count(1.0, dt)?;
    let start = DiffusionState { a: symmetric_noise(n_nodes, rng), t: 1.0 };
    let a = integrate_reverse(start, steps, model, schedule, rng)?.a;
    Graph::from_adjacency(&a, 0.5, Array2::ones((n_nodes, 1)))
}

/// Fraction of unordered node pairs whose edge indicator agrees.
pub fn edge_agreement(a: &Graph, b: &Graph) -> f64 {
    let n = a.node_count();
    assert_eq!(n, b.node_count(), "edge agreement needs equal node counts");
    let pairs = n * n.saturating_sub(1) / 2;
    if pairs == 0 {
        return 1.0;
    }
    let mut same = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            if a.has_edge(i, j) == b.has_edge(i, j) {
                same += 1;
            }
        }
    }
    same as f64 / pairs as f64
}

/// Metadata for a reconstruction dump.
pub fn provenance(t_recon: f64, steps: usize, seed: u64) -> Provenance {
    Provenance { t_recon, steps, seed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_graph(n: usize, p: f64, seed: u64) -> Graph {
        let mut r = rng(seed);
        let edges: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .filter(|_| r.random::<f64>() < p)
            .collect();
        Graph::unattributed(n, edges).unwrap()
    }

    #[test]
    fn forward_moments_at_t_0_1() {
        let s = NoiseSchedule::default();
        let a0 = ndarray::array![[0.0, 1.0], [1.0, 0.0]];
        let mut r = rng(11);
        let n = 100_000;
        let samples: Vec<f64> = (0..n).map(|_| forward_perturb(&a0, 0.1, &s, &mut r).unwrap().a[[0, 1]]).collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let sd = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((mean - 0.946722).abs() / 0.946722 < 0.01);
        assert!((sd - 0.322053).abs() / 0.322053 < 0.01);
    }

    #[test]
    fn forward_limits_and_zero_matrix_variance() {
        let s = NoiseSchedule::default();
        let a0 = random_graph(6, 0.5, 1).adjacency_matrix();
        let st = forward_perturb(&a0, 1e-9, &s, &mut rng(0)).unwrap();
        assert!((&st.a - &a0).iter().all(|d| d.abs() < 1e-3));
        check_symmetric(&st.a).unwrap();

        let zero = Array2::zeros((2, 2));
        let mut r = rng(5);
        let n = 100_000;
        let var = (0..n).map(|_| forward_perturb(&zero, 1.0, &s, &mut r).unwrap().a[[1, 0]].powi(2)).sum::<f64>() / n as f64;
        assert!((var - 0.999957).abs() < 0.01);
    }

    #[test]
    fn forward_rejects_asymmetric() {
        let a = ndarray::array![[0.0, 1.0], [0.0, 0.0]];
        assert!(matches!(forward_perturb(&a, 0.5, &NoiseSchedule::default(), &mut rng(0)), Err(GalaError::Contract(_))));
    }

    #[test]
    fn analytic_score_examples() {
        let s = NoiseSchedule::default();
        let a0 = random_graph(5, 0.5, 2).adjacency_matrix();
        let at_mean = &a0 * s.mean_scale(0.3);
        assert!(analytic_score(&at_mean, &a0, 0.3, &s).unwrap().iter().all(|v| v.abs() < 1e-12));

        let mut dev = &a0 * s.mean_scale(0.1);
        dev[[0, 1]] += 1.0;
        let sc = analytic_score(&dev, &a0, 0.1, &s).unwrap();
        assert!((sc[[0, 1]] - (-9.6415)).abs() < 1e-3);

        let a_t = forward_perturb(&a0, 0.4, &s, &mut rng(3)).unwrap().a;
        let alpha = 2.5;
        let lhs = analytic_score(&(&a_t * alpha), &a0, 0.4, &s).unwrap();
        let rhs = (&(&a_t * alpha) - &(&a0 * s.mean_scale(0.4))) / -s.variance(0.4);
        assert!((&lhs - &rhs).iter().all(|d| d.abs() < 1e-12));

        assert!(matches!(analytic_score(&a0, &a0, 0.0, &s), Err(GalaError::SingularVariance(_))));
    }

    #[test]
    fn zero_beta_leaves_state_unchanged() {
        let flat = NoiseSchedule { beta_min: 0.0, beta_max: 0.0 };
        let a = forward_perturb(&random_graph(5, 0.4, 4).adjacency_matrix(), 0.2, &NoiseSchedule::default(), &mut rng(1)).unwrap();
        let next = reverse_step(&a, 0.01, &ZeroScore, &flat, &mut rng(2)).unwrap();
        assert_eq!(next.a, a.a);
        assert!((next.t - 0.19).abs() < 1e-12);
    }

    #[test]
    fn drift_only_step_scales_exactly() {
        let s = NoiseSchedule::default();
        let a = DiffusionState { a: random_graph(5, 0.5, 6).adjacency_matrix() * 0.7, t: 0.3 };
        let z = Array2::zeros((5, 5));
        let next = reverse_step_with_noise(&a, 0.001, &ZeroScore, &s, &z).unwrap();
        let factor = 1.0 + 0.5 * s.beta(0.3) * 0.001;
        assert!((&next.a - &(&a.a * factor)).iter().all(|d| d.abs() < 1e-15));
    }

    #[test]
    fn step_past_zero_is_contract_error() {
        let st = DiffusionState { a: Array2::zeros((2, 2)), t: 0.001 };
        assert!(matches!(
            reverse_step(&st, 0.01, &ZeroScore, &NoiseSchedule::default(), &mut rng(0)),
            Err(GalaError::Contract(_))
        ));
    }

    #[test]
    fn analytic_step_contracts_toward_mean() {
        let s = NoiseSchedule::default();
        let a0 = random_graph(8, 0.4, 7).adjacency_matrix();
        let model = AnalyticScore { a0: a0.clone(), schedule: s };
        let dt = 0.001;
        let target = &a0 * s.mean_scale(0.1 - dt);
        let mut r = rng(8);
        let (mut before, mut after) = (0.0, 0.0);
        for _ in 0..100 {
            let st = forward_perturb(&a0, 0.1, &s, &mut r).unwrap();
            let next = reverse_step(&st, dt, &model, &s, &mut r).unwrap();
            before += (&st.a - &target).mapv(|v| v * v).sum().sqrt();
            after += (&next.a - &target).mapv(|v| v * v).sum().sqrt();
        }
        assert!(after < before, "{after} !< {before}");
    }

    #[test]
    fn reconstruction_step_count_and_passthrough() {
        assert_eq!(step_count(0.1, 0.001).unwrap(), 100);
        assert!(step_count(0.1, 0.003).is_err());
        let g = random_graph(10, 0.3, 9);
        let x = Array2::from_shape_fn((10, 3), |(i, j)| (i * 3 + j) as f64);
        let g = Graph::new(10, g.edges().iter().copied(), x, Some(1)).unwrap();
        let s = NoiseSchedule::default();
        let model = AnalyticScore { a0: g.adjacency_matrix(), schedule: s };
        let out = adapt_target_graph(&g, &model, &s, 0.1, 0.001, &mut rng(1)).unwrap();
        assert_eq!(out.node_count(), g.node_count());
        assert_eq!(out.attributes(), g.attributes());
        assert_eq!(out.label(), None);
    }

    #[test]
    fn memorized_graph_is_recovered() {
        let s = NoiseSchedule::default();
        let g = random_graph(20, 0.3, 10);
        let model = AnalyticScore { a0: g.adjacency_matrix(), schedule: s };
        let mut r = rng(12);
        let acc: f64 = (0..20)
            .map(|_| edge_agreement(&g, &adapt_target_graph(&g, &model, &s, 0.1, 0.001, &mut r).unwrap()))
            .sum::<f64>()
            / 20.0;
        assert!(acc >= 0.95, "{acc}");
    }

    struct Broken;
    impl ScoreModel for Broken {
        fn score(&self, a: &Array2<f64>, _: f64) -> Array2<f64> {
            Array2::from_elem(a.raw_dim(), f64::NAN)
        }
        fn is_usable(&self) -> bool {
            false
        }
    }

    #[test]
    fn unusable_model_is_model_error() {
        let g = random_graph(4, 0.5, 0);
        let r = adapt_target_graph(&g, &Broken, &NoiseSchedule::default(), 0.1, 0.001, &mut rng(0));
        assert!(matches!(r, Err(GalaError::Model(_))));
    }

    #[test]
    fn prior_samples_are_valid_and_vary() {
        let s = NoiseSchedule::default();
        let a0 = random_graph(8, 0.3, 3).adjacency_matrix();
        let model = AnalyticScore { a0, schedule: s };
        let mut distinct = 0;
        for k in 0..10 {
            let g1 = sample_prior(8, &ZeroScore, &s, 0.01, &mut rng(100 + 2 * k)).unwrap();
            let g2 = sample_prior(8, &ZeroScore, &s, 0.01, &mut rng(101 + 2 * k)).unwrap();
            check_symmetric(&g1.adjacency_matrix()).unwrap();
            if g1.edges() != g2.edges() {
                distinct += 1;
            }
        }
        assert_eq!(distinct, 10);
        assert!(sample_prior(8, &model, &s, 0.01, &mut rng(0)).is_ok());
    }
}
