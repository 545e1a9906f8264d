//! SPS collision and half-duplex losses, packet reception ratio, and the
//! per-vehicle fairness index with its deviation from the network mean.

use std::sync::Once;

use thiserror::Error;

use crate::scenario::{Scenario, WindowVector};

#[derive(Debug, Error, PartialEq)]
pub enum FairnessError {
    #[error("speed must be positive (got {0})")]
    NonPositiveSpeed(f64),
    #[error("window overlap probability {0} exceeds 1; rri/numerology inconsistent with the windows")]
    OverlapAboveOne(f64),
    #[error("packet rate {0} exceeds 1000 packets/s, half-duplex probability would exceed 1")]
    PacketRateTooHigh(f64),
    #[error("window vector has {got} entries, scenario has {expected} vehicles")]
    Dimension { expected: usize, got: usize },
}

/// Time spent inside coverage, `R / v` (s).
pub fn dwell_time(coverage: f64, speed: f64) -> Result<f64, FairnessError> {
    if speed <= 0.0 {
        return Err(FairnessError::NonPositiveSpeed(speed));
    }
    Ok(coverage / speed)
}

/// Probability that two selection windows overlap, `(w_i + w_j + 1) / (1000 2^mu RRI)`.
pub fn overlap_probability(w_i: f64, w_j: f64, numerology: u32, rri: f64) -> Result<f64, FairnessError> {
    let p = (w_i + w_j + 1.0) / (1000.0 * f64::from(1u32 << numerology) * rri);
    if p > 1.0 {
        return Err(FairnessError::OverlapAboveOne(p));
    }
    Ok(p)
}

/// Mean number of slots shared by two overlapping windows.
pub fn shared_resources(w_i: f64, w_j: f64) -> f64 {
    (w_i + 1.0) * (w_j + 1.0) / (w_i + w_j + 1.0)
}

static CLAMP_WARNING: Once = Once::new();

/// Probability that both vehicles pick from the shared part of the window,
/// `(N_Sc N_Sh / N_r)^2`, clamped to 1.
pub fn shared_selection_prob(num_subchannels: u32, shared: f64, total_resources: u32) -> f64 {
    let p = (f64::from(num_subchannels) * shared / f64::from(total_resources)).powi(2);
    if p > 1.0 {
        CLAMP_WARNING.call_once(|| {
            log::warn!("shared-selection probability {p:.3} exceeds 1 and is clamped; N_Sc * N_Sh > N_r")
        });
        1.0
    } else {
        p
    }
}

/// Pairwise collision probability `P_O P_SH|O C_Ca / N_Ca^2`.
pub fn collision_probability(w_i: f64, w_j: f64, scenario: &Scenario) -> Result<f64, FairnessError> {
    let c = scenario.config();
    let p_o = overlap_probability(w_i, w_j, c.numerology, c.rri)?;
    let p_sh = shared_selection_prob(c.num_subchannels, shared_resources(w_i, w_j), c.total_resources);
    let common = f64::from(c.shared_candidates) / f64::from(c.avg_candidates).powi(2);
    Ok(p_o * p_sh * common)
}

/// Half-duplex loss probability `tau / 1000`.
pub fn half_duplex_probability(packet_rate: f64) -> Result<f64, FairnessError> {
    if packet_rate > 1000.0 {
        return Err(FairnessError::PacketRateTooHigh(packet_rate));
    }
    Ok(packet_rate.max(0.0) / 1000.0)
}

fn check_dim(windows: &WindowVector, scenario: &Scenario) -> Result<(), FairnessError> {
    if windows.len() != scenario.num_vehicles() {
        return Err(FairnessError::Dimension { expected: scenario.num_vehicles(), got: windows.len() });
    }
    Ok(())
}

/// `prod_{j != i} (1 - delta_COL(i, j))`.
fn collision_survival(i: usize, windows: &WindowVector, scenario: &Scenario) -> Result<f64, FairnessError> {
    let mut s = 1.0;
    for j in 0..windows.len() {
        if j != i {
            s *= 1.0 - collision_probability(windows[i], windows[j], scenario)?;
        }
    }
    Ok(s)
}

/// Packet reception ratio of vehicle `i` at the RSU.
pub fn prr(i: usize, windows: &WindowVector, scenario: &Scenario) -> Result<f64, FairnessError> {
    check_dim(windows, scenario)?;
    let mut hd = 1.0;
    for (j, v) in scenario.vehicles().iter().enumerate() {
        if j != i {
            hd *= 1.0 - half_duplex_probability(v.packet_rate)?;
        }
    }
    Ok(collision_survival(i, windows, scenario)? * hd)
}

/// Fairness index `log2(1 + SNR) prod_{j != i}(1 - delta_COL) / v_i` with the
/// log term averaged over the coverage chord at unit channel gain.
pub fn fairness_index(i: usize, windows: &WindowVector, scenario: &Scenario) -> Result<f64, FairnessError> {
    check_dim(windows, scenario)?;
    let v = scenario.vehicle(i);
    if v.speed <= 0.0 {
        return Err(FairnessError::NonPositiveSpeed(v.speed));
    }
    Ok(scenario.link(i).spectral_efficiency * collision_survival(i, windows, scenario)? / v.speed)
}

/// Expected bits delivered during the stay in coverage, `C_i T_i P_PRR`.
/// Reported for diagnostics; the optimizer works on index deviations.
pub fn expected_bits(rate: f64, dwell: f64, prr: f64) -> f64 {
    rate * dwell * prr
}

#[derive(Debug, Clone, PartialEq)]
pub struct FairnessReport {
    pub per_vehicle_index: Vec<f64>,
    pub network_index: f64,
    pub per_vehicle_prr: Vec<f64>,
    /// `per_pair_collision[i][j]`, zero on the diagonal.
    pub per_pair_collision: Vec<Vec<f64>>,
    /// `|K_index - K_index^i|`.
    pub per_vehicle_deviation: Vec<f64>,
}

impl FairnessReport {
    pub fn max_deviation(&self) -> f64 {
        self.per_vehicle_deviation.iter().copied().fold(0.0, f64::max)
    }
}

pub fn fairness_report(windows: &WindowVector, scenario: &Scenario) -> Result<FairnessReport, FairnessError> {
    check_dim(windows, scenario)?;
    let n = scenario.num_vehicles();
    let mut collision = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                collision[i][j] = collision_probability(windows[i], windows[j], scenario)?;
            }
        }
    }
    let index = (0..n).map(|i| fairness_index(i, windows, scenario)).collect::<Result<Vec<_>, _>>()?;
    let prrs = (0..n).map(|i| prr(i, windows, scenario)).collect::<Result<Vec<_>, _>>()?;
    let network = index.iter().sum::<f64>() / n as f64;
    let deviation = index.iter().map(|k| (network - k).abs()).collect();
    Ok(FairnessReport {
        per_vehicle_index: index,
        network_index: network,
        per_vehicle_prr: prrs,
        per_pair_collision: collision,
        per_vehicle_deviation: deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{ScenarioConfig, VehicleParams};

    fn identical(n: usize) -> Scenario {
        let config = ScenarioConfig { num_vehicles: n, lane_width: 0.0, ..Default::default() };
        let vehicles = (0..n)
            .map(|id| VehicleParams {
                id,
                speed: 25.0,
                tx_power: config.tx_power,
                priority: 1,
                packet_rate: 10.0,
                lane_index: 0,
                cos_theta: 1.0,
            })
            .collect();
        crate::scenario::validate(config, vehicles).unwrap()
    }

    #[test]
    fn dwell_time_examples() {
        assert_eq!(dwell_time(200.0, 20.0).unwrap(), 10.0);
        assert!((dwell_time(200.0, 30.0).unwrap() - 6.666_666_666_7).abs() < 1e-9);
        assert_eq!(dwell_time(0.0, 30.0).unwrap(), 0.0);
        assert!(dwell_time(200.0, 0.0).is_err());
    }

    #[test]
    fn overlap_examples() {
        assert!((overlap_probability(0.0, 0.0, 0, 100.0).unwrap() - 1e-5).abs() < 1e-18);
        assert!((overlap_probability(20.0, 20.0, 0, 100.0).unwrap() - 4.1e-4).abs() < 1e-16);
        let a = overlap_probability(50.0, 70.0, 0, 100.0).unwrap();
        let b = overlap_probability(50.0, 70.0, 1, 100.0).unwrap();
        assert!((a / b - 2.0).abs() < 1e-12);
        assert!(matches!(overlap_probability(150.0, 150.0, 0, 0.1), Err(FairnessError::OverlapAboveOne(_))));
    }

    #[test]
    fn overlap_increases_with_both_windows() {
        let mut last = 0.0;
        for w in [20.0, 40.0, 80.0, 150.0] {
            let p = overlap_probability(w, w, 0, 100.0).unwrap();
            assert!(p > last);
            last = p;
        }
    }

    #[test]
    fn shared_resource_examples() {
        assert_eq!(shared_resources(0.0, 0.0), 1.0);
        let w = 37.0;
        assert!((shared_resources(w, w) - (w + 1.0) * (w + 1.0) / (2.0 * w + 1.0)).abs() < 1e-12);
        assert!((shared_resources(20.0, 150.0) - 3171.0 / 171.0).abs() < 1e-12);
    }

    #[test]
    fn shared_selection_examples() {
        assert_eq!(shared_selection_prob(10, 10.0, 100), 1.0);
        assert_eq!(shared_selection_prob(10, 0.0, 100), 0.0);
        assert!((shared_selection_prob(10, 5.0, 100) - 0.25).abs() < 1e-15);
        assert_eq!(shared_selection_prob(10, 441.0 / 41.0, 100), 1.0);
    }

    #[test]
    fn collision_examples() {
        let s = Scenario::default_highway();
        // N_Sc N_Sh / N_r = 10 * (441/41) / 100 > 1 so the shared factor clamps.
        let got = collision_probability(20.0, 20.0, &s).unwrap();
        assert!((got - 4.1e-4 * 1.0 * 0.1).abs() < 1e-18, "{got:e}");

        let config = ScenarioConfig { total_resources: 1000, ..Default::default() };
        let s = Scenario::highway(config, &[20.0, 24.0]).unwrap();
        let got = collision_probability(20.0, 20.0, &s).unwrap();
        let expect = 4.1e-4 * (10.0 * (441.0 / 41.0) / 1000.0_f64).powi(2) * 0.1;
        assert!((got - expect).abs() < 1e-18);
    }

    #[test]
    fn half_duplex_examples() {
        assert_eq!(half_duplex_probability(0.0).unwrap(), 0.0);
        assert_eq!(half_duplex_probability(10.0).unwrap(), 0.01);
        assert_eq!(half_duplex_probability(1000.0).unwrap(), 1.0);
        assert!(half_duplex_probability(1000.5).is_err());
    }

    #[test]
    fn prr_examples() {
        let mut s = identical(3);
        s = crate::scenario::validate(
            s.config().clone(),
            s.vehicles().iter().map(|v| VehicleParams { packet_rate: 0.0, ..v.clone() }).collect(),
        )
        .unwrap();
        let w = WindowVector::uniform(3, 20.0);
        let one_minus_col = 1.0 - collision_probability(20.0, 20.0, &s).unwrap();
        assert!((prr(0, &w, &s).unwrap() - one_minus_col.powi(2)).abs() < 1e-15);

        let saturated = crate::scenario::validate(
            s.config().clone(),
            s.vehicles().iter().map(|v| VehicleParams { packet_rate: 1000.0, ..v.clone() }).collect(),
        )
        .unwrap();
        assert_eq!(prr(0, &w, &saturated).unwrap(), 0.0);

        let t = Scenario::default_highway();
        let got = prr(1, &w, &t).unwrap();
        let d = 4.1e-5;
        let expect = (1.0 - d) * (1.0 - d) * 0.99 * 0.99;
        assert!((got - expect).abs() < 1e-15);
    }

    #[test]
    fn fairness_index_scaling() {
        let s = identical(2);
        let w = WindowVector::uniform(2, 50.0);
        let k0 = fairness_index(0, &w, &s).unwrap();
        let k1 = fairness_index(1, &w, &s).unwrap();
        assert_eq!(k0, k1);

        let fast = Scenario::highway(ScenarioConfig::default(), &[20.0, 40.0]).unwrap();
        let slow = Scenario::highway(ScenarioConfig::default(), &[20.0, 80.0]).unwrap();
        let a = fairness_index(1, &w, &fast).unwrap();
        let b = fairness_index(1, &w, &slow).unwrap();
        assert!((a / b - 2.0).abs() < 1e-12);
    }

    #[test]
    fn index_decreases_with_speed_on_default_highway() {
        let s = Scenario::default_highway();
        let w = WindowVector::uniform(3, 20.0);
        let k: Vec<f64> = (0..3).map(|i| fairness_index(i, &w, &s).unwrap()).collect();
        assert!(k[0] > k[1] && k[1] > k[2], "{k:?}");
    }

    #[test]
    fn report_examples() {
        let s = identical(3);
        let r = fairness_report(&WindowVector::uniform(3, 80.0), &s).unwrap();
        assert!(r.per_vehicle_deviation.iter().all(|&d| d == 0.0));

        let single = Scenario::highway(ScenarioConfig::default(), &[25.0]).unwrap();
        let r = fairness_report(&WindowVector::uniform(1, 80.0), &single).unwrap();
        assert_eq!(r.per_vehicle_deviation, vec![0.0]);

        let r = fairness_report(&WindowVector::uniform(3, 80.0), &Scenario::default_highway()).unwrap();
        assert!(r.max_deviation() > 0.0);
        let mean = r.per_vehicle_index.iter().sum::<f64>() / 3.0;
        assert!((mean - r.network_index).abs() <= f64::EPSILON * mean);
    }

    #[test]
    fn dimension_mismatch() {
        let s = Scenario::default_highway();
        assert!(matches!(
            fairness_report(&WindowVector::uniform(2, 20.0), &s),
            Err(FairnessError::Dimension { expected: 3, got: 2 })
        ));
    }
}
