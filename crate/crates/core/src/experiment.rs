//! Sweeps over average velocity and vehicle count, and operator comparisons.
//!
//! Trials run in parallel; rows come back ordered by (sweep value, operator,
//! trial) whatever the completion order.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::fairness;
use crate::llm::{HttpClient, LlmConfig, LlmError, LlmMate};
use crate::metrics::{self, HvReport, Normalizer};
use crate::moead::{self, EvalError, MoeadError, OptimizerConfig};
use crate::scenario::{Scenario, ScenarioError, WindowVector, MIN_LANE_SPEED_GAP};
use crate::variation::{De, Sbx, Variation};

/// Generations over which the HV must stay flat to count as converged.
pub const CONVERGENCE_WINDOW: usize = 10;
pub const CONVERGENCE_EPSILON: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Optimizer(#[from] MoeadError),
    #[error(transparent)]
    Evaluation(#[from] EvalError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("unknown operator {0:?}, expected sbx, de, llm or mock-llm")]
    UnknownOperator(String),
    #[error("sweep spec: {0}")]
    Spec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OperatorChoice {
    Sbx,
    De,
    Llm,
    MockLlm,
}

impl OperatorChoice {
    pub fn name(self) -> &'static str {
        match self {
            OperatorChoice::Sbx => "sbx",
            OperatorChoice::De => "de",
            OperatorChoice::Llm => "llm",
            OperatorChoice::MockLlm => "mock-llm",
        }
    }

    /// A fresh operator; the mock is seeded per run.
    pub fn build(self, seed: u64) -> Result<Box<dyn Variation>, ExperimentError> {
        Ok(match self {
            OperatorChoice::Sbx => Box::new(Sbx::default()),
            OperatorChoice::De => Box::new(De::default()),
            OperatorChoice::MockLlm => Box::new(LlmMate::mock(seed)),
            OperatorChoice::Llm => {
                let config = LlmConfig::from_env()?;
                let retries = config.max_retries;
                Box::new(LlmMate::new("llm", Box::new(HttpClient::new(config)?), retries))
            }
        })
    }
}

impl fmt::Display for OperatorChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OperatorChoice {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sbx" => Ok(OperatorChoice::Sbx),
            "de" => Ok(OperatorChoice::De),
            "llm" => Ok(OperatorChoice::Llm),
            "mock-llm" => Ok(OperatorChoice::MockLlm),
            other => Err(ExperimentError::UnknownOperator(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub values: Vec<f64>,
    pub trials: usize,
    pub operators: Vec<OperatorChoice>,
    /// Window used by every vehicle in the baseline (ms).
    pub baseline_window: f64,
    pub optimizer: OptimizerConfig,
    pub master_seed: u64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            values: vec![20.0, 22.0, 24.0, 26.0, 28.0, 30.0],
            trials: 30,
            operators: vec![OperatorChoice::MockLlm],
            baseline_window: 100.0,
            optimizer: OptimizerConfig::default(),
            master_seed: 1,
        }
    }
}

impl SweepSpec {
    fn check(&self) -> Result<(), ExperimentError> {
        if self.values.is_empty() {
            return Err(ExperimentError::Spec("no sweep values".into()));
        }
        if self.trials == 0 {
            return Err(ExperimentError::Spec("trials must be at least 1".into()));
        }
        Ok(())
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.master_seed.wrapping_add(trial as u64)
    }
}

/// Label used for fixed-window rows.
pub const BASELINE: &str = "baseline";

/// One evaluated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluated {
    pub windows: WindowVector,
    pub deviations: Vec<f64>,
    pub age: f64,
    pub kindex: Vec<f64>,
    pub kindex_avg: f64,
}

impl Evaluated {
    pub fn max_deviation(&self) -> f64 {
        self.deviations.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// Average velocity (m/s) or vehicle count, depending on the sweep.
    pub value: f64,
    pub operator: String,
    pub trial: usize,
    pub outcome: Result<Evaluated, String>,
}

pub fn evaluate_windows(windows: WindowVector, scenario: &Scenario) -> Result<Evaluated, ExperimentError> {
    let report = fairness::fairness_report(&windows, scenario).map_err(EvalError::from)?;
    let f = moead::evaluate_objectives(&windows, scenario)?;
    Ok(Evaluated {
        windows,
        deviations: report.per_vehicle_deviation,
        age: f.age(),
        kindex: report.per_vehicle_index,
        kindex_avg: report.network_index,
    })
}

/// Optimizes, selects `w*` and evaluates it.
pub fn optimize_once(
    scenario: &Scenario,
    config: &OptimizerConfig,
    operator: OperatorChoice,
) -> Result<Evaluated, ExperimentError> {
    let op = operator.build(config.rng_seed)?;
    let archive = moead::evolve(scenario, config, op.as_ref())?;
    let best = moead::select_solution(archive.entries())?;
    evaluate_windows(best.windows.clone(), scenario)
}

/// Lane speeds centred on `avg` with the minimum gap between lanes.
pub fn lane_speeds(avg: f64, n: usize) -> Vec<f64> {
    let mid = (n as f64 - 1.0) / 2.0;
    (0..n).map(|i| avg + MIN_LANE_SPEED_GAP * (i as f64 - mid)).collect()
}

/// Speeds `20, 24, 28, ...` for `n` vehicles.
pub fn fleet_speeds(n: usize) -> Vec<f64> {
    (0..n).map(|i| 20.0 + MIN_LANE_SPEED_GAP * i as f64).collect()
}

fn run_sweep(
    spec: &SweepSpec,
    scenarios: Vec<(f64, Result<Scenario, ScenarioError>)>,
) -> Result<Vec<SweepRow>, ExperimentError> {
    spec.check()?;
    let mut jobs = Vec::new();
    for (idx, (value, _)) in scenarios.iter().enumerate() {
        jobs.push((idx, *value, None, 0));
        for &op in &spec.operators {
            for trial in 0..spec.trials {
                jobs.push((idx, *value, Some(op), trial));
            }
        }
    }
    Ok(jobs
        .into_par_iter()
        .map(|(idx, value, op, trial)| {
            let outcome = match &scenarios[idx].1 {
                Err(e) => Err(e.to_string()),
                Ok(s) => match op {
                    None => evaluate_windows(WindowVector::uniform(s.num_vehicles(), spec.baseline_window), s),
                    Some(op) => {
                        let config = OptimizerConfig { rng_seed: spec.trial_seed(trial), ..spec.optimizer.clone() };
                        optimize_once(s, &config, op)
                    }
                }
                .map_err(|e| e.to_string()),
            };
            let operator = op.map_or(BASELINE.to_string(), |o| o.name().to_string());
            SweepRow { value, operator, trial, outcome }
        })
        .collect())
}

/// Sweeps the average lane speed; values are average velocities (m/s).
pub fn sweep_velocity(spec: &SweepSpec, template: &Scenario) -> Result<Vec<SweepRow>, ExperimentError> {
    let n = template.num_vehicles();
    let scenarios = spec.values.iter().map(|&v| (v, template.with_lane_speeds(&lane_speeds(v, n)))).collect();
    run_sweep(spec, scenarios)
}

/// Sweeps the fleet size; values are vehicle counts.
pub fn sweep_vehicles(spec: &SweepSpec, template: &Scenario) -> Result<Vec<SweepRow>, ExperimentError> {
    let scenarios = spec
        .values
        .iter()
        .map(|&n| {
            if n < 1.0 || n.fract() != 0.0 {
                return (n, Err(invalid_count(n)));
            }
            (n, template.with_lane_speeds(&fleet_speeds(n as usize)))
        })
        .collect();
    run_sweep(spec, scenarios)
}

fn invalid_count(n: f64) -> ScenarioError {
    ScenarioError::Invalid(vec![crate::scenario::Violation {
        field: "num_vehicles",
        message: format!("vehicle count must be a positive integer (got {n})"),
    }])
}

/// One optimizer run with per-generation bookkeeping.
#[derive(Debug, Clone)]
pub struct TracedRun {
    pub operator: OperatorChoice,
    pub trial: usize,
    /// Objective vectors accepted into the archive, per generation.
    pub accepted: Vec<Vec<Vec<f64>>>,
    /// Wall-clock seconds since run start, per generation.
    pub elapsed: Vec<f64>,
    pub final_front: Vec<Vec<f64>>,
    /// Evaluations that hit an infeasible rate set.
    pub infeasible: usize,
}

pub fn traced_run(
    scenario: &Scenario,
    config: &OptimizerConfig,
    operator: OperatorChoice,
    trial: usize,
) -> Result<TracedRun, ExperimentError> {
    let op = operator.build(config.rng_seed)?;
    let start = Instant::now();
    let mut accepted = Vec::new();
    let mut elapsed = Vec::new();
    let result = moead::run(scenario, config, op.as_ref(), |snap| {
        accepted.push(snap.accepted.iter().map(|f| f.0.clone()).collect());
        elapsed.push(start.elapsed().as_secs_f64());
    })?;
    Ok(TracedRun {
        operator,
        trial,
        accepted,
        elapsed,
        final_front: result.archive.objectives(),
        infeasible: result.infeasible,
    })
}

#[derive(Debug, Clone)]
pub struct OperatorReport {
    pub operator: OperatorChoice,
    pub trial: usize,
    pub hv: HvReport,
    pub elapsed: Vec<f64>,
}

/// Normalized HV series for every operator and trial, all measured against
/// the union of the runs' final archives. Operators that cannot be built
/// (such as `llm` without credentials) are skipped with a warning.
pub fn compare_operators(spec: &SweepSpec, scenario: &Scenario) -> Result<Vec<OperatorReport>, ExperimentError> {
    spec.check()?;
    let jobs: Vec<(OperatorChoice, usize)> =
        spec.operators.iter().flat_map(|&op| (0..spec.trials).map(move |t| (op, t))).collect();
    let runs: Vec<Result<TracedRun, ExperimentError>> = jobs
        .into_par_iter()
        .map(|(op, trial)| {
            let config = OptimizerConfig { rng_seed: spec.trial_seed(trial), ..spec.optimizer.clone() };
            traced_run(scenario, &config, op, trial)
        })
        .collect();
    let mut ok = Vec::new();
    for r in runs {
        match r {
            Ok(run) => ok.push(run),
            Err(ExperimentError::Llm(e)) => log::warn!("skipping llm operator: {e}"),
            Err(e) => return Err(e),
        }
    }
    let Some(normalizer) = Normalizer::from_sets(ok.iter().map(|r| r.final_front.as_slice())) else {
        return Ok(Vec::new());
    };
    Ok(ok
        .into_par_iter()
        .map(|run| {
            let series = metrics::hv_series(&run.accepted, &normalizer);
            let converged_at = metrics::track_convergence(&series, CONVERGENCE_WINDOW, CONVERGENCE_EPSILON);
            OperatorReport {
                operator: run.operator,
                trial: run.trial,
                hv: HvReport { per_generation_hv: series, reference_point: normalizer.reference(), converged_at },
                elapsed: run.elapsed,
            }
        })
        .collect())
}
