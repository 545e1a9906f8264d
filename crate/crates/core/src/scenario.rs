//! Scenario configuration, highway geometry and validation.
//!
//! A [`Scenario`] is the validated, immutable bundle of protocol parameters,
//! vehicles and the per-vehicle link budget derived from them. Every model in
//! the crate reads its inputs from here.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel;

/// Minimum speed difference between vehicles in adjacent lanes (m/s).
pub const MIN_LANE_SPEED_GAP: f64 = 4.0;

/// Slot-duration range accepted for `t_fa` (ms), from 1 ms down to 0.0625 ms.
pub const T_FA_RANGE: (f64, f64) = (0.0625, 1.0);

/// Closed interval of admissible selection-window sizes (ms).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct WindowBounds {
    pub lower: f64,
    pub upper: f64,
}

impl WindowBounds {
    pub fn new(lower: f64, upper: f64) -> Self {
        Self { lower, upper }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, w: f64) -> bool {
        w >= self.lower && w <= self.upper
    }

    pub fn clamp(&self, w: f64) -> f64 {
        w.clamp(self.lower, self.upper)
    }
}

impl From<[f64; 2]> for WindowBounds {
    fn from(v: [f64; 2]) -> Self {
        Self::new(v[0], v[1])
    }
}

impl From<WindowBounds> for [f64; 2] {
    fn from(b: WindowBounds) -> Self {
        [b.lower, b.upper]
    }
}

/// The decision variable: one selection-window size per vehicle (ms).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WindowVector(pub Vec<f64>);

impl WindowVector {
    pub fn new(w: Vec<f64>) -> Self {
        Self(w)
    }

    pub fn uniform(n: usize, w: f64) -> Self {
        Self(vec![w; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn within(&self, bounds: WindowBounds) -> bool {
        self.0.iter().all(|&w| bounds.contains(w))
    }

    pub fn clamped(mut self, bounds: WindowBounds) -> Self {
        for w in &mut self.0 {
            *w = bounds.clamp(*w);
        }
        self
    }
}

impl std::ops::Index<usize> for WindowVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Physical and protocol parameters of one experiment.
///
/// Times are in milliseconds, powers in watts, distances in metres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub num_vehicles: usize,
    /// Hz.
    pub bandwidth: f64,
    pub path_loss_exponent: f64,
    /// Linear noise power (W). Scenario files may give `noise_db` instead.
    pub noise_power: f64,
    /// Length of road covered by the RSU (m).
    pub rsu_coverage: f64,
    /// Perpendicular distance from the RSU to the centreline of lane 0 (m).
    pub rsu_offset: f64,
    /// Distance between adjacent lane centrelines (m).
    pub lane_width: f64,
    pub numerology: u32,
    /// Resource reservation interval (ms).
    pub rri: f64,
    pub num_subchannels: u32,
    pub total_resources: u32,
    pub avg_candidates: u32,
    pub shared_candidates: u32,
    pub packet_bits: f64,
    pub t_fa: f64,
    /// Sender processing time (ms).
    pub t_p: f64,
    pub retransmission_count: u32,
    pub window_bounds: WindowBounds,
    /// Carrier wavelength (m).
    pub carrier_wavelength: f64,
    /// Transmit power given to generated vehicles (W).
    pub tx_power: f64,
    /// Packet generation rate given to generated vehicles (packets/s).
    pub packet_rate: f64,
    pub rng_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            num_vehicles: 3,
            bandwidth: 20e6,
            path_loss_exponent: 3.0,
            noise_power: db_to_linear(9.0),
            rsu_coverage: 200.0,
            rsu_offset: 5.0,
            lane_width: 3.5,
            numerology: 0,
            rri: 100.0,
            num_subchannels: 10,
            total_resources: 100,
            avg_candidates: 10,
            shared_candidates: 10,
            packet_bits: 500.0,
            t_fa: 0.468,
            t_p: 0.5,
            retransmission_count: 1,
            window_bounds: WindowBounds::new(20.0, 150.0),
            carrier_wavelength: 299_792_458.0 / 5.9e9,
            tx_power: 1e6,
            packet_rate: 10.0,
            rng_seed: 1,
        }
    }
}

impl ScenarioConfig {
    /// Number of slots in one reservation frame, `1000 * 2^mu * RRI`.
    pub fn frame_slots(&self) -> f64 {
        1000.0 * f64::from(1u32 << self.numerology) * self.rri
    }
}

/// Per-vehicle parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    pub id: usize,
    /// m/s.
    pub speed: f64,
    /// W.
    pub tx_power: f64,
    /// Larger value means higher priority.
    pub priority: i32,
    /// packets/s.
    pub packet_rate: f64,
    pub lane_index: usize,
    pub cos_theta: f64,
}

/// Traversal-averaged link budget of one vehicle (unit channel gain).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    /// Mean of `log2(1 + SNR)` over the coverage chord.
    pub spectral_efficiency: f64,
    /// Mean Shannon rate over the coverage chord (bit/s).
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("lanes {lane} and {next} differ by {gap} m/s, need at least {MIN_LANE_SPEED_GAP} m/s")]
    SpeedGap { lane: usize, next: usize, gap: f64 },
    #[error("scenario file is not valid")]
    Parse(#[from] serde_json::Error),
    #[error("reading scenario file")]
    Io(#[from] std::io::Error),
}

impl ScenarioError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            ScenarioError::Invalid(v) => v,
            _ => &[],
        }
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.message.as_str()).collect::<Vec<_>>().join("; ")
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// A validated scenario. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    config: ScenarioConfig,
    vehicles: Vec<VehicleParams>,
    links: Vec<LinkBudget>,
}

impl Scenario {
    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn vehicles(&self) -> &[VehicleParams] {
        &self.vehicles
    }

    pub fn vehicle(&self, i: usize) -> &VehicleParams {
        &self.vehicles[i]
    }

    pub fn num_vehicles(&self) -> usize {
        self.vehicles.len()
    }

    pub fn link(&self, i: usize) -> LinkBudget {
        self.links[i]
    }

    pub fn bounds(&self) -> WindowBounds {
        self.config.window_bounds
    }

    /// RSU position: mid-chord, `rsu_offset` metres off lane 0.
    pub fn rsu_position(&self) -> (f64, f64) {
        (self.config.rsu_coverage / 2.0, -self.config.rsu_offset)
    }

    /// Position of vehicle `i` after travelling `x` metres into coverage.
    pub fn vehicle_position(&self, i: usize, x: f64) -> (f64, f64) {
        let lane = self.vehicles[i].lane_index as f64;
        (x, lane * self.config.lane_width)
    }

    /// Builds a one-vehicle-per-lane highway and validates it.
    pub fn highway(mut config: ScenarioConfig, lane_speeds: &[f64]) -> Result<Self, ScenarioError> {
        let vehicles = build_highway(&config, lane_speeds)?;
        config.num_vehicles = vehicles.len();
        validate(config, vehicles)
    }

    /// The default three-lane scenario with lane speeds 20, 24, 28 m/s.
    pub fn default_highway() -> Self {
        Self::highway(ScenarioConfig::default(), &[20.0, 24.0, 28.0]).expect("default scenario is valid")
    }

    /// Same configuration with new lane speeds.
    pub fn with_lane_speeds(&self, lane_speeds: &[f64]) -> Result<Self, ScenarioError> {
        Self::highway(self.config.clone(), lane_speeds)
    }

    pub fn to_json(&self) -> String {
        let file = ScenarioFile::from_scenario(self);
        serde_json::to_string_pretty(&file).expect("scenario serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let file: ScenarioFile = serde_json::from_str(text)?;
        file.into_scenario()
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Checks every invariant and derives the per-vehicle link budget.
pub fn validate(config: ScenarioConfig, vehicles: Vec<VehicleParams>) -> Result<Scenario, ScenarioError> {
    let mut bad = Vec::new();
    let mut check = |ok: bool, field: &'static str, message: String| {
        if !ok {
            bad.push(Violation { field, message });
        }
    };
    let c = &config;

    check(c.num_vehicles >= 1, "num_vehicles", "num_vehicles must be at least 1".into());
    check(
        c.num_vehicles == vehicles.len(),
        "num_vehicles",
        format!("num_vehicles is {} but {} vehicles were given", c.num_vehicles, vehicles.len()),
    );
    check(c.bandwidth > 0.0, "bandwidth", format!("bandwidth must be positive (got {})", c.bandwidth));
    check(c.noise_power > 0.0, "noise_power", format!("noise_power must be positive (got {})", c.noise_power));
    check(
        c.path_loss_exponent >= 0.0 && c.path_loss_exponent.is_finite(),
        "path_loss_exponent",
        format!("path_loss_exponent must be finite and non-negative (got {})", c.path_loss_exponent),
    );
    check(c.rsu_coverage > 0.0, "rsu_coverage", format!("rsu_coverage must be positive (got {})", c.rsu_coverage));
    check(c.rsu_offset > 0.0, "rsu_offset", format!("rsu_offset must be positive (got {})", c.rsu_offset));
    check(c.lane_width >= 0.0, "lane_width", format!("lane_width must be non-negative (got {})", c.lane_width));
    check(c.num_subchannels > 0, "num_subchannels", "num_subchannels must be positive".into());
    check(
        c.num_subchannels <= c.total_resources,
        "num_subchannels",
        format!("num_subchannels ({}) must not exceed total_resources ({})", c.num_subchannels, c.total_resources),
    );
    check(c.avg_candidates > 0, "avg_candidates", "avg_candidates must be positive".into());
    check(
        u64::from(c.shared_candidates) <= u64::from(c.avg_candidates).pow(2),
        "shared_candidates",
        format!(
            "shared_candidates ({}) must not exceed avg_candidates^2 ({})",
            c.shared_candidates,
            u64::from(c.avg_candidates).pow(2)
        ),
    );
    check(c.rri > 0.0, "rri", format!("rri must be positive (got {})", c.rri));
    check(
        c.t_fa >= T_FA_RANGE.0 && c.t_fa <= T_FA_RANGE.1,
        "t_fa",
        format!("t_fa must lie in [{}, {}] ms (got {})", T_FA_RANGE.0, T_FA_RANGE.1, c.t_fa),
    );
    check(c.t_p >= 0.0, "t_p", format!("t_p must be non-negative (got {})", c.t_p));
    check(c.packet_bits >= 0.0, "packet_bits", format!("packet_bits must be non-negative (got {})", c.packet_bits));
    check(
        c.carrier_wavelength > 0.0,
        "carrier_wavelength",
        format!("carrier_wavelength must be positive (got {})", c.carrier_wavelength),
    );
    let wb = c.window_bounds;
    check(
        wb.lower <= wb.upper,
        "window_bounds",
        format!("window bounds inverted (lower {} > upper {})", wb.lower, wb.upper),
    );
    check(wb.lower >= 0.0, "window_bounds", format!("window lower bound must be non-negative (got {})", wb.lower));
    if c.rri > 0.0 && wb.lower <= wb.upper {
        let worst = (2.0 * wb.upper + 1.0) / c.frame_slots();
        check(
            worst <= 1.0,
            "window_bounds",
            format!(
                "window overlap probability reaches {worst:.3} > 1 at the upper bound; rri or numerology too small"
            ),
        );
    }

    for (i, v) in vehicles.iter().enumerate() {
        check(v.id == i, "vehicles.id", format!("vehicle at position {i} has id {}", v.id));
        check(v.speed > 0.0, "vehicles.speed", format!("vehicle {i} speed must be positive (got {})", v.speed));
        check(
            v.tx_power > 0.0,
            "vehicles.tx_power",
            format!("vehicle {i} tx_power must be positive (got {})", v.tx_power),
        );
        check(
            (0.0..=1000.0).contains(&v.packet_rate),
            "vehicles.packet_rate",
            format!("vehicle {i} packet_rate must lie in [0, 1000] (got {})", v.packet_rate),
        );
        check(
            v.cos_theta.abs() <= 1.0,
            "vehicles.cos_theta",
            format!("vehicle {i} |cos_theta| must be at most 1 (got {})", v.cos_theta),
        );
    }

    if !bad.is_empty() {
        return Err(ScenarioError::Invalid(bad));
    }

    let mut scenario = Scenario { config, vehicles, links: Vec::new() };
    scenario.links = (0..scenario.num_vehicles()).map(|i| channel::traversal_link_budget(&scenario, i)).collect();
    Ok(scenario)
}

/// One vehicle per lane, lane `i` driving at `lane_speeds[i]`.
///
/// Priorities decrease with lane index so vehicle 0 ranks highest.
pub fn build_highway(config: &ScenarioConfig, lane_speeds: &[f64]) -> Result<Vec<VehicleParams>, ScenarioError> {
    if lane_speeds.is_empty() {
        return Err(ScenarioError::Invalid(vec![Violation {
            field: "lane_speeds",
            message: "at least one lane speed is required".into(),
        }]));
    }
    for (lane, pair) in lane_speeds.windows(2).enumerate() {
        let gap = (pair[1] - pair[0]).abs();
        // Tolerate float noise from generated sweeps such as 24.000000000000004.
        if gap + 1e-9 < MIN_LANE_SPEED_GAP {
            return Err(ScenarioError::SpeedGap { lane, next: lane + 1, gap });
        }
    }
    let n = lane_speeds.len();
    Ok(lane_speeds
        .iter()
        .enumerate()
        .map(|(i, &speed)| VehicleParams {
            id: i,
            speed,
            tx_power: config.tx_power,
            priority: (n - i) as i32,
            packet_rate: config.packet_rate,
            lane_index: i,
            cos_theta: 1.0,
        })
        .collect())
}

/// On-disk scenario. Keys follow [`ScenarioConfig`]; missing keys take the
/// default, `noise_db` may replace `noise_power`, and the vehicle set is
/// given either explicitly or as `lane_speeds`.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    num_vehicles: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bandwidth: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    path_loss_exponent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    noise_power: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    noise_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rsu_coverage: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rsu_offset: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lane_width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    numerology: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rri: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    num_subchannels: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    total_resources: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    avg_candidates: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    shared_candidates: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    packet_bits: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_fa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    retransmission_count: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    window_bounds: Option<WindowBounds>,
    #[serde(skip_serializing_if = "Option::is_none")]
    carrier_wavelength: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tx_power: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    packet_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rng_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    vehicles: Option<Vec<VehicleParams>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lane_speeds: Option<Vec<f64>>,
}

impl ScenarioFile {
    fn from_scenario(s: &Scenario) -> Self {
        let c = s.config.clone();
        ScenarioFile {
            num_vehicles: Some(c.num_vehicles),
            bandwidth: Some(c.bandwidth),
            path_loss_exponent: Some(c.path_loss_exponent),
            noise_power: Some(c.noise_power),
            noise_db: None,
            rsu_coverage: Some(c.rsu_coverage),
            rsu_offset: Some(c.rsu_offset),
            lane_width: Some(c.lane_width),
            numerology: Some(c.numerology),
            rri: Some(c.rri),
            num_subchannels: Some(c.num_subchannels),
            total_resources: Some(c.total_resources),
            avg_candidates: Some(c.avg_candidates),
            shared_candidates: Some(c.shared_candidates),
            packet_bits: Some(c.packet_bits),
            t_fa: Some(c.t_fa),
            t_p: Some(c.t_p),
            retransmission_count: Some(c.retransmission_count),
            window_bounds: Some(c.window_bounds),
            carrier_wavelength: Some(c.carrier_wavelength),
            tx_power: Some(c.tx_power),
            packet_rate: Some(c.packet_rate),
            rng_seed: Some(c.rng_seed),
            vehicles: Some(s.vehicles.clone()),
            lane_speeds: None,
        }
    }

    fn into_scenario(self) -> Result<Scenario, ScenarioError> {
        let invalid =
            |field, message: &str| ScenarioError::Invalid(vec![Violation { field, message: message.to_string() }]);
        let d = ScenarioConfig::default();
        let noise_power = match (self.noise_power, self.noise_db) {
            (Some(_), Some(_)) => return Err(invalid("noise_db", "give either noise_power or noise_db, not both")),
            (Some(w), None) => w,
            (None, Some(db)) => db_to_linear(db),
            (None, None) => d.noise_power,
        };
        let mut config = ScenarioConfig {
            num_vehicles: self.num_vehicles.unwrap_or(d.num_vehicles),
            bandwidth: self.bandwidth.unwrap_or(d.bandwidth),
            path_loss_exponent: self.path_loss_exponent.unwrap_or(d.path_loss_exponent),
            noise_power,
            rsu_coverage: self.rsu_coverage.unwrap_or(d.rsu_coverage),
            rsu_offset: self.rsu_offset.unwrap_or(d.rsu_offset),
            lane_width: self.lane_width.unwrap_or(d.lane_width),
            numerology: self.numerology.unwrap_or(d.numerology),
            rri: self.rri.unwrap_or(d.rri),
            num_subchannels: self.num_subchannels.unwrap_or(d.num_subchannels),
            total_resources: self.total_resources.unwrap_or(d.total_resources),
            avg_candidates: self.avg_candidates.unwrap_or(d.avg_candidates),
            shared_candidates: self.shared_candidates.unwrap_or(d.shared_candidates),
            packet_bits: self.packet_bits.unwrap_or(d.packet_bits),
            t_fa: self.t_fa.unwrap_or(d.t_fa),
            t_p: self.t_p.unwrap_or(d.t_p),
            retransmission_count: self.retransmission_count.unwrap_or(d.retransmission_count),
            window_bounds: self.window_bounds.unwrap_or(d.window_bounds),
            carrier_wavelength: self.carrier_wavelength.unwrap_or(d.carrier_wavelength),
            tx_power: self.tx_power.unwrap_or(d.tx_power),
            packet_rate: self.packet_rate.unwrap_or(d.packet_rate),
            rng_seed: self.rng_seed.unwrap_or(d.rng_seed),
        };
        let vehicles = match (self.vehicles, self.lane_speeds) {
            (Some(_), Some(_)) => return Err(invalid("vehicles", "give either vehicles or lane_speeds, not both")),
            (Some(v), None) => v,
            (None, Some(speeds)) => build_highway(&config, &speeds)?,
            (None, None) => build_highway(&config, &[20.0, 24.0, 28.0])?,
        };
        if self.num_vehicles.is_none() {
            config.num_vehicles = vehicles.len();
        }
        validate(config, vehicles)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn messages(err: ScenarioError) -> Vec<String> {
        err.violations().iter().map(|v| v.message.clone()).collect()
    }

    #[test]
    fn default_highway_is_accepted() {
        let s = Scenario::default_highway();
        let c = s.config();
        assert_eq!(c.num_vehicles, 3);
        assert_eq!(c.bandwidth, 20e6);
        assert!((c.noise_power - 7.943_282_347).abs() < 1e-8);
        assert_eq!(c.window_bounds, WindowBounds::new(20.0, 150.0));
        assert_eq!(s.vehicles().len(), 3);
    }

    #[test]
    fn zero_subchannels_rejected() {
        let config = ScenarioConfig { num_subchannels: 0, ..Default::default() };
        let err = Scenario::highway(config, &[20.0, 24.0, 28.0]).unwrap_err();
        assert!(messages(err).iter().any(|m| m == "num_subchannels must be positive"));
    }

    #[test]
    fn inverted_window_bounds_rejected() {
        let config = ScenarioConfig { window_bounds: WindowBounds::new(150.0, 20.0), ..Default::default() };
        let err = Scenario::highway(config, &[20.0, 24.0, 28.0]).unwrap_err();
        let msgs = messages(err);
        assert!(msgs.iter().any(|m| m.starts_with("window bounds inverted")), "{msgs:?}");
    }

    #[test]
    fn all_violations_reported_together() {
        let config = ScenarioConfig { bandwidth: 0.0, t_fa: 2.0, avg_candidates: 0, ..Default::default() };
        let err = Scenario::highway(config, &[20.0]).unwrap_err();
        let fields: Vec<_> = err.violations().iter().map(|v| v.field).collect();
        assert!(fields.contains(&"bandwidth"));
        assert!(fields.contains(&"t_fa"));
        assert!(fields.contains(&"avg_candidates"));
    }

    #[test]
    fn highway_gaps() {
        let c = ScenarioConfig::default();
        let v = build_highway(&c, &[20.0, 24.0, 28.0]).unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(v[1].speed - v[0].speed, 4.0);
        assert_eq!(v[2].speed - v[1].speed, 4.0);
        assert!(v[0].priority > v[1].priority && v[1].priority > v[2].priority);

        assert!(matches!(build_highway(&c, &[20.0, 21.0]), Err(ScenarioError::SpeedGap { lane: 0, .. })));
        assert_eq!(build_highway(&c, &[30.0]).unwrap().len(), 1);
    }

    #[test]
    fn noise_db_accepted_at_file_boundary() {
        let s = Scenario::from_json(r#"{"noise_db": 9, "lane_speeds": [20, 24]}"#).unwrap();
        assert!((s.config().noise_power - db_to_linear(9.0)).abs() < 1e-12);
        assert_eq!(s.num_vehicles(), 2);

        let err = Scenario::from_json(r#"{"noise_db": 9, "noise_power": 1.0}"#).unwrap_err();
        assert!(err.to_string().contains("noise_db"));
        assert!(Scenario::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn overlap_probability_above_one_rejected() {
        let config = ScenarioConfig { rri: 0.1, ..Default::default() };
        let err = Scenario::highway(config, &[20.0, 24.0]).unwrap_err();
        assert!(err.violations().iter().any(|v| v.field == "window_bounds"));
    }

    #[test]
    fn json_round_trip() {
        let s = Scenario::default_highway();
        let back = Scenario::from_json(&s.to_json()).unwrap();
        assert_eq!(s, back);
    }
}
