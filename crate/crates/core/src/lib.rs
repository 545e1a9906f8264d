//! Fair channel access and age of information for NR V2X Mode 2 sidelink
//! scheduling, with a decomposition-based optimizer over per-vehicle
//! selection-window sizes.
//!
//! The models are analytic: [`fairness`] gives each vehicle's share of
//! delivered throughput per unit of coverage time, [`aoi`] the average age of
//! information under priority preemption. [`moead`] searches window vectors
//! that balance both, with classical or language-model ([`llm`]) crossover.

pub mod aoi;
pub mod channel;
pub mod experiment;
pub mod fairness;
pub mod llm;
pub mod metrics;
pub mod moead;
pub mod scenario;
pub mod variation;

pub use aoi::{AoiError, RateSet, ShsSolution};
pub use fairness::{FairnessError, FairnessReport};
pub use moead::{ObjectiveVector, OptimizerConfig, ParetoArchive, Solution, WeightVector};
pub use scenario::{Scenario, ScenarioConfig, ScenarioError, VehicleParams, WindowBounds, WindowVector};
pub use variation::{Rng, Variation};
