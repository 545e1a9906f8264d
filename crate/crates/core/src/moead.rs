//! Decomposition-based multi-objective optimizer over window vectors.
//!
//! Objectives are `(F_K1..F_KN, F_age)`: each vehicle's fairness-index
//! deviation from the network mean, then the network average age.

use rand::seq::index::sample;
use rand::{Rng as _, SeedableRng};
use thiserror::Error;

use crate::aoi::{self, AoiError};
use crate::fairness::{self, FairnessError};
use crate::scenario::{Scenario, WindowVector};
use crate::variation::{Rng, Variation};

/// Objective value assigned to windows whose rate set is infeasible.
pub const INFEASIBLE: f64 = 1e30;

#[derive(Debug, Error)]
pub enum MoeadError {
    #[error("invalid optimizer config: {0}")]
    Config(String),
    #[error("weight vector {0} has zero norm")]
    ZeroWeight(usize),
    #[error("archive is empty")]
    EmptyArchive,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Fairness(#[from] FairnessError),
    #[error(transparent)]
    Aoi(#[from] AoiError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(pub Vec<f64>);

impl std::ops::Deref for WeightVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveVector(pub Vec<f64>);

impl ObjectiveVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Fairness deviations `F_K1..F_KN`.
    pub fn deviations(&self) -> &[f64] {
        &self.0[..self.0.len() - 1]
    }

    pub fn max_deviation(&self) -> f64 {
        self.deviations().iter().copied().fold(0.0, f64::max)
    }

    pub fn age(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    pub fn is_feasible(&self) -> bool {
        self.0.iter().all(|&f| f < INFEASIBLE)
    }

    /// Pareto dominance under minimization.
    pub fn dominates(&self, other: &Self) -> bool {
        let mut strictly = false;
        for (a, b) in self.0.iter().zip(&other.0) {
            if a > b {
                return false;
            }
            strictly |= a < b;
        }
        strictly
    }

    pub fn weakly_dominates(&self, other: &Self) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }
}

impl std::ops::Deref for ObjectiveVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub windows: WindowVector,
    pub objectives: ObjectiveVector,
}

/// Cumulative set of mutually nondominated feasible solutions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParetoArchive {
    entries: Vec<Solution>,
    ideal: Vec<f64>,
}

impl ParetoArchive {
    pub fn new(objectives: usize) -> Self {
        Self { entries: Vec::new(), ideal: vec![f64::INFINITY; objectives] }
    }

    pub fn entries(&self) -> &[Solution] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The ideal point `z*` over every feasible evaluation seen so far.
    pub fn ideal_point(&self) -> &[f64] {
        &self.ideal
    }

    pub fn update_ideal(&mut self, f: &ObjectiveVector) {
        if !f.is_feasible() {
            return;
        }
        for (z, &x) in self.ideal.iter_mut().zip(f.iter()) {
            *z = z.min(x);
        }
    }

    /// Inserts unless an entry weakly dominates `s`; evicts entries `s` dominates.
    pub fn insert(&mut self, s: Solution) -> bool {
        if !s.objectives.is_feasible() || self.entries.iter().any(|e| e.objectives.weakly_dominates(&s.objectives)) {
            return false;
        }
        self.entries.retain(|e| !s.objectives.dominates(&e.objectives));
        self.entries.push(s);
        true
    }

    pub fn is_mutually_nondominated(&self) -> bool {
        self.entries.iter().enumerate().all(|(i, a)| {
            self.entries.iter().enumerate().all(|(j, b)| i == j || !a.objectives.dominates(&b.objectives))
        })
    }

    pub fn objectives(&self) -> Vec<Vec<f64>> {
        self.entries.iter().map(|e| e.objectives.0.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub generations: usize,
    pub partitions: usize,
    pub neighborhood_size: usize,
    pub neighbor_prob: f64,
    pub rng_seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { generations: 100, partitions: 7, neighborhood_size: 20, neighbor_prob: 0.8, rng_seed: 1 }
    }
}

impl OptimizerConfig {
    /// `C(n_p + M - 1, M - 1)` subproblems for `M` objectives.
    pub fn population_size(&self, objectives: usize) -> usize {
        binomial(self.partitions + objectives - 1, objectives - 1)
    }
}

pub fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// All simplex-lattice points with denominator `n_p`, in lexicographic order.
pub fn das_dennis_weights(m: usize, n_p: usize) -> Vec<WeightVector> {
    fn fill(prefix: &mut Vec<usize>, left: usize, slots: usize, n_p: usize, out: &mut Vec<WeightVector>) {
        if slots == 1 {
            prefix.push(left);
            out.push(WeightVector(prefix.iter().map(|&k| k as f64 / n_p as f64).collect()));
            prefix.pop();
            return;
        }
        for k in 0..=left {
            prefix.push(k);
            fill(prefix, left - k, slots - 1, n_p, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if m >= 1 && n_p >= 1 {
        fill(&mut Vec::with_capacity(m), n_p, m, n_p, &mut out);
    }
    out
}

/// For every weight, the `k` most cosine-similar weights; ties go to the lower index.
pub fn build_neighborhoods(weights: &[WeightVector], k: usize) -> Result<Vec<Vec<usize>>, MoeadError> {
    if k == 0 || k > weights.len() {
        return Err(MoeadError::Config(format!("neighborhood size {k} outside 1..={}", weights.len())));
    }
    let norms: Vec<f64> = weights.iter().map(|w| w.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    if let Some(i) = norms.iter().position(|&n| n == 0.0) {
        return Err(MoeadError::ZeroWeight(i));
    }
    Ok((0..weights.len())
        .map(|i| {
            let cos = |j: usize| {
                weights[i].iter().zip(weights[j].iter()).map(|(a, b)| a * b).sum::<f64>() / (norms[i] * norms[j])
            };
            let mut order: Vec<(usize, f64)> =
                (0..weights.len()).map(|j| (j, if j == i { f64::INFINITY } else { cos(j) })).collect();
            order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            order.into_iter().take(k).map(|(j, _)| j).collect()
        })
        .collect())
}

/// `max_i w_i |f_i - z_i|`.
pub fn tchebycheff(f: &[f64], w: &[f64], z: &[f64]) -> f64 {
    f.iter().zip(w).zip(z).map(|((f, w), z)| w * (f - z).abs()).fold(0.0, f64::max)
}

pub fn evaluate_objectives(windows: &WindowVector, scenario: &Scenario) -> Result<ObjectiveVector, EvalError> {
    let report = fairness::fairness_report(windows, scenario)?;
    let age = aoi::network_aoi(&aoi::rate_set(windows, scenario)?)?;
    let mut f = report.per_vehicle_deviation;
    f.push(age);
    Ok(ObjectiveVector(f))
}

/// Like [`evaluate_objectives`] but maps failures to the sentinel vector.
pub fn evaluate_or_sentinel(windows: &WindowVector, scenario: &Scenario) -> ObjectiveVector {
    evaluate_objectives(windows, scenario).unwrap_or_else(|e| {
        log::debug!("infeasible window vector {:?}: {e}", windows.as_slice());
        ObjectiveVector(vec![INFEASIBLE; scenario.num_vehicles() + 1])
    })
}

/// State handed to the observer after initialization (generation 0) and after each generation.
pub struct Snapshot<'a> {
    pub generation: usize,
    pub archive: &'a ParetoArchive,
    pub population: &'a [Solution],
    /// Objective vectors that entered the archive during this generation.
    pub accepted: &'a [ObjectiveVector],
    pub evaluations: usize,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub archive: ParetoArchive,
    pub population: Vec<Solution>,
    pub weights: Vec<WeightVector>,
    pub evaluations: usize,
    pub infeasible: usize,
}

pub fn evolve(
    scenario: &Scenario,
    config: &OptimizerConfig,
    operator: &dyn Variation,
) -> Result<ParetoArchive, MoeadError> {
    Ok(run(scenario, config, operator, |_| {})?.archive)
}

pub fn run(
    scenario: &Scenario,
    config: &OptimizerConfig,
    operator: &dyn Variation,
    mut observer: impl FnMut(&Snapshot<'_>),
) -> Result<RunResult, MoeadError> {
    if !(0.0..=1.0).contains(&config.neighbor_prob) {
        return Err(MoeadError::Config(format!("neighbor_prob {} outside [0, 1]", config.neighbor_prob)));
    }
    if config.partitions == 0 {
        return Err(MoeadError::Config("partitions must be at least 1".into()));
    }
    let n = scenario.num_vehicles();
    let m = n + 1;
    let weights = das_dennis_weights(m, config.partitions);
    // Small objective counts give fewer subproblems than the default neighborhood.
    let k = config.neighborhood_size.min(weights.len());
    let neighborhoods = build_neighborhoods(&weights, k)?;
    let bounds = scenario.bounds();
    let mut rng = Rng::seed_from_u64(config.rng_seed);

    let mut archive = ParetoArchive::new(m);
    let mut accepted = Vec::new();
    let mut infeasible = 0;
    let mut evaluate = |w: WindowVector, archive: &mut ParetoArchive, accepted: &mut Vec<ObjectiveVector>| {
        let objectives = evaluate_or_sentinel(&w, scenario);
        let s = Solution { windows: w, objectives };
        if s.objectives.is_feasible() {
            archive.update_ideal(&s.objectives);
            if archive.insert(s.clone()) {
                accepted.push(s.objectives.clone());
            }
        } else {
            infeasible += 1;
        }
        s
    };

    let mut population: Vec<Solution> = (0..weights.len())
        .map(|_| {
            let w = (0..n).map(|_| rng.random_range(bounds.lower..=bounds.upper)).collect();
            evaluate(WindowVector::new(w), &mut archive, &mut accepted)
        })
        .collect();
    let mut evaluations = population.len();
    observer(&Snapshot { generation: 0, archive: &archive, population: &population, accepted: &accepted, evaluations });

    let everyone: Vec<usize> = (0..population.len()).collect();
    let want = operator.parents_required();
    for generation in 1..=config.generations {
        accepted.clear();
        for hood in &neighborhoods {
            let pool = if rng.random::<f64>() < config.neighbor_prob { hood } else { &everyone };
            let picks: Vec<usize> = if pool.len() >= want {
                sample(&mut rng, pool.len(), want).into_iter().map(|k| pool[k]).collect()
            } else {
                (0..want).map(|_| pool[rng.random_range(0..pool.len())]).collect()
            };
            let parents: Vec<&Solution> = picks.iter().map(|&k| &population[k]).collect();
            let child = operator.mate(&parents, bounds, &mut rng);
            debug_assert!(child.within(bounds), "{} produced out-of-bounds offspring", operator.name());
            let child = evaluate(child.clamped(bounds), &mut archive, &mut accepted);
            evaluations += 1;

            let z = archive.ideal_point().to_vec();
            for &j in hood {
                let g_child = tchebycheff(&child.objectives, &weights[j], &z);
                let g_old = tchebycheff(&population[j].objectives, &weights[j], &z);
                if g_child < g_old {
                    population[j] = child.clone();
                    debug_assert!(tchebycheff(&population[j].objectives, &weights[j], &z) < g_old);
                }
            }
        }
        observer(&Snapshot {
            generation,
            archive: &archive,
            population: &population,
            accepted: &accepted,
            evaluations,
        });
    }
    Ok(RunResult { archive, population, weights, evaluations, infeasible })
}

/// Sorted ascending, the value at 1-based position `ceil(0.9 n)`.
pub fn k_bound(deviations: &[f64]) -> Result<f64, MoeadError> {
    if deviations.is_empty() {
        return Err(MoeadError::EmptyArchive);
    }
    let mut v = deviations.to_vec();
    v.sort_by(f64::total_cmp);
    let j = (0.9 * v.len() as f64 - 1e-9).ceil().max(1.0) as usize;
    Ok(v[j - 1])
}

/// Minimum-age solution among those whose every deviation is within
/// [`k_bound`]; falls back to the smallest maximum deviation.
pub fn select_solution(solutions: &[Solution]) -> Result<&Solution, MoeadError> {
    let devs: Vec<f64> = solutions.iter().map(|s| s.objectives.max_deviation()).collect();
    let bound = k_bound(&devs)?;
    let argmin = |key: &dyn Fn(usize) -> Option<f64>| {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..solutions.len() {
            if let Some(k) = key(i) {
                if !matches!(best, Some((_, b)) if b <= k) {
                    best = Some((i, k));
                }
            }
        }
        best.map(|(i, _)| i)
    };
    let i = argmin(&|i| (devs[i] <= bound).then(|| solutions[i].objectives.age()))
        .or_else(|| argmin(&|i| Some(devs[i])))
        .expect("nonempty");
    Ok(&solutions[i])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::variation::Sbx;

    fn sol(devs: &[f64], age: f64) -> Solution {
        let mut f = devs.to_vec();
        f.push(age);
        Solution { windows: WindowVector::uniform(devs.len(), 20.0), objectives: ObjectiveVector(f) }
    }

    #[test]
    fn das_dennis_examples() {
        assert_eq!(das_dennis_weights(4, 7).len(), 120);
        let w = das_dennis_weights(2, 2);
        let got: Vec<Vec<f64>> = w.into_iter().map(|w| w.0).collect();
        assert_eq!(got, vec![vec![0.0, 1.0], vec![0.5, 0.5], vec![1.0, 0.0]]);
        for m in 2..=5 {
            for n_p in 1..=8 {
                let w = das_dennis_weights(m, n_p);
                assert_eq!(w.len(), binomial(n_p + m - 1, m - 1), "m={m} n_p={n_p}");
                assert!(w.iter().all(|v| (v.iter().sum::<f64>() - 1.0).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn neighborhood_examples() {
        let w = das_dennis_weights(2, 4);
        let nb = build_neighborhoods(&w, 2).unwrap();
        assert_eq!(nb[0], vec![0, 1]);
        for (i, n) in nb.iter().enumerate() {
            assert_eq!(n[0], i);
        }
        let all = build_neighborhoods(&w, w.len()).unwrap();
        assert!(all.iter().all(|n| {
            let mut s = n.clone();
            s.sort();
            s == (0..w.len()).collect::<Vec<_>>()
        }));
        assert!(matches!(
            build_neighborhoods(&[WeightVector(vec![0.0, 0.0]), WeightVector(vec![1.0, 0.0])], 1),
            Err(MoeadError::ZeroWeight(0))
        ));
    }

    #[test]
    fn tchebycheff_examples() {
        assert_eq!(tchebycheff(&[1.0, 2.0], &[0.3, 0.7], &[1.0, 2.0]), 0.0);
        assert_eq!(tchebycheff(&[2.0, 4.0], &[0.5, 0.5], &[0.0, 0.0]), 2.0);
        assert_eq!(tchebycheff(&[100.0, 1.0], &[0.0, 1.0], &[0.0, 0.0]), 1.0);
    }

    #[test]
    fn archive_rules() {
        let mut a = ParetoArchive::new(2);
        assert!(a.insert(sol(&[1.0], 2.0)));
        assert!(!a.insert(sol(&[1.0], 2.0)), "duplicate");
        assert!(!a.insert(sol(&[1.5], 2.0)), "dominated");
        assert!(a.insert(sol(&[2.0], 1.0)));
        assert!(a.insert(sol(&[0.5], 0.5)));
        assert_eq!(a.len(), 1);
        assert!(!a.insert(sol(&[INFEASIBLE], INFEASIBLE)));
    }

    #[test]
    fn k_bound_examples() {
        let d: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(k_bound(&d).unwrap(), 9.0);
        assert_eq!(k_bound(&[3.5]).unwrap(), 3.5);
        assert_eq!(k_bound(&[2.0; 7]).unwrap(), 2.0);
        assert!(k_bound(&[]).is_err());
    }

    #[test]
    fn selection_examples() {
        // Ages decrease with deviation so the bound decides.
        let s: Vec<Solution> = (1..=10).map(|d| sol(&[f64::from(d)], 100.0 - f64::from(d))).collect();
        assert_eq!(select_solution(&s).unwrap().objectives.age(), 91.0);

        let s = vec![sol(&[1.0], 5.0), sol(&[1.0], 3.0), sol(&[1.0], 3.0)];
        assert!(std::ptr::eq(select_solution(&s).unwrap(), &s[1]));
    }

    #[test]
    fn identical_vehicles_have_zero_deviation() {
        let config = crate::scenario::ScenarioConfig { num_vehicles: 2, lane_width: 0.0, ..Default::default() };
        let v = crate::scenario::build_highway(&config, &[25.0, 29.0])
            .unwrap()
            .into_iter()
            .map(|v| crate::scenario::VehicleParams { speed: 25.0, priority: 1, ..v })
            .collect();
        let s = crate::scenario::validate(config, v).unwrap();
        let f = evaluate_objectives(&WindowVector::uniform(2, 60.0), &s).unwrap();
        assert_eq!(f.deviations(), &[0.0, 0.0]);
    }

    #[test]
    fn wider_windows_age_more() {
        let s = Scenario::default_highway();
        let mut last = 0.0;
        for w in [20.0, 50.0, 100.0, 150.0] {
            let f = evaluate_objectives(&WindowVector::uniform(3, w), &s).unwrap();
            assert!(f.age() > last);
            last = f.age();
        }
    }

    #[test]
    fn zero_generations_keeps_initial_front() {
        let s = Scenario::default_highway();
        let cfg = OptimizerConfig { generations: 0, ..Default::default() };
        let r = run(&s, &cfg, &Sbx::default(), |_| {}).unwrap();
        let mut expect = ParetoArchive::new(4);
        for p in &r.population {
            expect.insert(p.clone());
        }
        assert_eq!(r.archive.entries(), expect.entries());
        assert_eq!(r.evaluations, 120);
    }

    #[test]
    fn short_run_is_deterministic_and_improves_ideal() {
        let s = Scenario::default_highway();
        let cfg = OptimizerConfig { generations: 5, rng_seed: 9, ..Default::default() };
        let mut ideals = Vec::new();
        let a = run(&s, &cfg, &Sbx::default(), |snap| {
            assert!(snap.archive.is_mutually_nondominated());
            ideals.push(snap.archive.ideal_point().to_vec());
        })
        .unwrap();
        for pair in ideals.windows(2) {
            assert!(pair[1].iter().zip(&pair[0]).all(|(n, o)| n <= o));
        }
        let b = evolve(&s, &cfg, &Sbx::default()).unwrap();
        assert_eq!(a.archive, b);
        assert!(b.entries().iter().all(|e| e.windows.within(s.bounds())));
    }
}
