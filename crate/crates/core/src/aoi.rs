//! Age of information under preemption, modelled as a stochastic hybrid
//! system over the channel-occupancy chain `{0 (idle), 1..N (link k busy)}`.
//!
//! Transitions: idle -> k at `R_k`, k -> idle at `H_k` (delivery), and
//! k -> j at `p[k][j]` (link k preempted by j, its packet dropped). For a
//! target link k the hybrid state is `[x0, x1]`: the age at the monitor and
//! the age of k's packet in service.
//!
//! The solver here solves the balance and first-moment equations of that
//! chain exactly. The classic closed form, which subtracts the preemption
//! outflow from `H_k` instead of adding it, is kept in [`subtractive`] for
//! comparison. With the preemption rates of realistic scenarios (`p ~ H`)
//! that form is infeasible, and on asymmetric rate sets it disagrees with
//! [`simulate_shs`] while the exact solver agrees. When `p = 0` the two
//! coincide.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::scenario::{Scenario, WindowVector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AoiError {
    #[error("rate set dimensions disagree: {0}")]
    Dimension(String),
    #[error("{name} rate for link {link} must be finite and non-negative (got {value})")]
    BadRate { name: &'static str, link: usize, value: f64 },
    #[error("link {link} is infeasible: {reason}")]
    Infeasible { link: usize, reason: String },
    #[error("link index {0} out of range")]
    LinkOutOfRange(usize),
    #[error("{what} for vehicle {vehicle} is not positive ({value} s)")]
    NonPositiveTime { what: &'static str, vehicle: usize, value: f64 },
}

/// Service, failure-return and preemption rates (1/s).
#[derive(Debug, Clone, PartialEq)]
pub struct RateSet {
    pub h: Vec<f64>,
    pub r: Vec<f64>,
    /// `p[i][j]`: rate at which link i is preempted by link j.
    pub p: Vec<Vec<f64>>,
}

impl RateSet {
    pub fn new(h: Vec<f64>, r: Vec<f64>, p: Vec<Vec<f64>>) -> Result<Self, AoiError> {
        let n = h.len();
        if n == 0 {
            return Err(AoiError::Dimension("no links".into()));
        }
        if r.len() != n || p.len() != n || p.iter().any(|row| row.len() != n) {
            return Err(AoiError::Dimension(format!("H has {n} links, R has {}, p is {} rows", r.len(), p.len())));
        }
        for k in 0..n {
            check_rate("service", k, h[k])?;
            check_rate("failure-return", k, r[k])?;
            for &x in &p[k] {
                check_rate("preemption", k, x)?;
            }
            if p[k][k] != 0.0 {
                return Err(AoiError::Dimension(format!("p[{k}][{k}] must be zero")));
            }
        }
        Ok(Self { h, r, p })
    }

    /// Links without preemption.
    pub fn without_preemption(h: Vec<f64>, r: Vec<f64>) -> Result<Self, AoiError> {
        let n = h.len();
        Self::new(h, r, vec![vec![0.0; n]; n])
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    /// `sum_j p[k][j]`, the rate at which link k loses its packet.
    pub fn preemption_outflow(&self, k: usize) -> f64 {
        self.p[k].iter().sum()
    }

    /// Total exit rate of busy state k.
    fn exit_rate(&self, k: usize) -> f64 {
        self.h[k] + self.preemption_outflow(k)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            h: self.h.iter().map(|x| x * c).collect(),
            r: self.r.iter().map(|x| x * c).collect(),
            p: self.p.iter().map(|row| row.iter().map(|x| x * c).collect()).collect(),
        }
    }
}

fn check_rate(name: &'static str, link: usize, value: f64) -> Result<(), AoiError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(AoiError::BadRate { name, link, value })
    }
}

fn ms(x: f64) -> f64 {
    x / 1000.0
}

/// Packet airtime `Bit / C_i` (s).
fn packet_time(i: usize, scenario: &Scenario) -> f64 {
    scenario.config().packet_bits / scenario.link(i).rate
}

/// Scheduling time `t_p + t_fa + w_i` (s).
fn scheduling_time(w: f64, scenario: &Scenario) -> f64 {
    let c = scenario.config();
    ms(c.t_p + c.t_fa + w)
}

fn positive(what: &'static str, vehicle: usize, t: f64) -> Result<f64, AoiError> {
    if t > 0.0 && t.is_finite() {
        Ok(t)
    } else {
        Err(AoiError::NonPositiveTime { what, vehicle, value: t })
    }
}

/// `H_i = 1 / (t_sch + t_pkt)`, successful transmissions need no retransmission.
pub fn service_rate(i: usize, w: f64, scenario: &Scenario) -> Result<f64, AoiError> {
    let t = positive("successful transmission time", i, scheduling_time(w, scenario) + packet_time(i, scenario))?;
    Ok(1.0 / t)
}

/// `R_i = 1 / (T_ini + n T_r)` with `T_r = t_NACK + t_sch + t_pkt` and
/// `t_NACK = t_p + t_fa + t_pkt`.
pub fn failure_rate(i: usize, w: f64, scenario: &Scenario) -> Result<f64, AoiError> {
    let c = scenario.config();
    let t_pkt = packet_time(i, scenario);
    let t_sch = scheduling_time(w, scenario);
    let t_nack = ms(c.t_p + c.t_fa) + t_pkt;
    let t_r = t_nack + t_sch + t_pkt;
    let total = t_sch + t_pkt + f64::from(c.retransmission_count) * t_r;
    Ok(1.0 / positive("failed transmission time", i, total)?)
}

/// `p[i][j] = 1 / (t_sch^i + t_p^j)` when j outranks i, else 0.
pub fn preemption_rate(i: usize, j: usize, windows: &WindowVector, scenario: &Scenario) -> f64 {
    if i == j || scenario.vehicle(j).priority <= scenario.vehicle(i).priority {
        return 0.0;
    }
    1.0 / (scheduling_time(windows[i], scenario) + ms(scenario.config().t_p))
}

/// The rate set induced by a window vector.
pub fn rate_set(windows: &WindowVector, scenario: &Scenario) -> Result<RateSet, AoiError> {
    let n = scenario.num_vehicles();
    if windows.len() != n {
        return Err(AoiError::Dimension(format!("{} windows for {n} vehicles", windows.len())));
    }
    let h = (0..n).map(|i| service_rate(i, windows[i], scenario)).collect::<Result<_, _>>()?;
    let r = (0..n).map(|i| failure_rate(i, windows[i], scenario)).collect::<Result<_, _>>()?;
    let p = (0..n).map(|i| (0..n).map(|j| preemption_rate(i, j, windows, scenario)).collect()).collect();
    RateSet::new(h, r, p)
}

/// `M = diag(H_q + sum_j p[q][j]) - p^T`, the generator block for busy states.
fn busy_generator(rates: &RateSet) -> DMatrix<f64> {
    let n = rates.len();
    DMatrix::from_fn(n, n, |q, j| if q == j { rates.exit_rate(q) } else { -rates.p[j][q] })
}

fn solve(m: &DMatrix<f64>, rhs: &[f64]) -> Option<Vec<f64>> {
    m.clone().lu().solve(&DVector::from_column_slice(rhs)).map(|x| x.iter().copied().collect())
}

/// Busy-state probabilities relative to idle, `beta = pi_q / pi_0`.
fn relative_occupancy(rates: &RateSet) -> Result<Vec<f64>, AoiError> {
    let beta = solve(&busy_generator(rates), &rates.r)
        .ok_or_else(|| AoiError::Infeasible { link: 0, reason: "balance equations are singular".into() })?;
    for (k, &b) in beta.iter().enumerate() {
        if !b.is_finite() || b < -1e-12 {
            return Err(AoiError::Infeasible { link: k, reason: format!("negative occupancy {b}") });
        }
    }
    Ok(beta.into_iter().map(|b| b.max(0.0)).collect())
}

/// Stationary distribution `(pi_0, pi_1..pi_N)` and the normalizer `C = 1 / pi_0`.
pub fn stationary_distribution(rates: &RateSet) -> Result<(Vec<f64>, f64), AoiError> {
    let beta = relative_occupancy(rates)?;
    let c = 1.0 + beta.iter().sum::<f64>();
    let mut pi = Vec::with_capacity(beta.len() + 1);
    pi.push(1.0 / c);
    pi.extend(beta.iter().map(|b| b / c));
    Ok((pi, c))
}

/// First-moment correlation vectors for target link k.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationVectors {
    /// `v_00`; `v_01` is identically zero.
    pub v00: f64,
    /// `v_q0` for q = 1..N (index q - 1).
    pub v_q0: Vec<f64>,
    /// `v_k1`; `v_q1 = 0` for q != k.
    pub v_k1: f64,
}

impl CorrelationVectors {
    /// `Delta_k = v_00 + sum_q v_q0`.
    pub fn age(&self) -> f64 {
        self.v00 + self.v_q0.iter().sum::<f64>()
    }
}

fn check_link(k: usize, rates: &RateSet) -> Result<(), AoiError> {
    if k >= rates.len() {
        return Err(AoiError::LinkOutOfRange(k));
    }
    if rates.h[k] <= 0.0 {
        return Err(AoiError::Infeasible { link: k, reason: "service rate is zero, age grows without bound".into() });
    }
    Ok(())
}

/// Solves the first-moment equations for link k given `pi` from
/// [`stationary_distribution`].
pub fn correlation_vectors(k: usize, rates: &RateSet, pi: &[f64]) -> Result<CorrelationVectors, AoiError> {
    check_link(k, rates)?;
    let n = rates.len();
    if pi.len() != n + 1 {
        return Err(AoiError::Dimension(format!("pi has {} entries, expected {}", pi.len(), n + 1)));
    }
    let busy = &pi[1..];
    let beta: Vec<f64> = busy.iter().map(|p| p / pi[0]).collect();
    if beta[k] <= 0.0 {
        return Err(AoiError::Infeasible { link: k, reason: "link is never scheduled".into() });
    }
    let m = busy_generator(rates);
    let alpha =
        solve(&m, busy).ok_or_else(|| AoiError::Infeasible { link: k, reason: "age equations are singular".into() })?;
    let v_k1 = busy[k] / rates.exit_rate(k);
    // Idle-state balance; the sum over q != k of H_q beta_q equals sum R - H_k beta_k.
    let inflow: f64 = (0..n).filter(|&q| q != k).map(|q| rates.h[q] * alpha[q]).sum();
    let v00 = (pi[0] + inflow + rates.h[k] * v_k1) / (rates.h[k] * beta[k]);
    let v_q0 = (0..n).map(|q| alpha[q] + beta[q] * v00).collect();
    Ok(CorrelationVectors { v00, v_q0, v_k1 })
}

/// Average age of link k (s).
pub fn link_aoi(k: usize, rates: &RateSet) -> Result<f64, AoiError> {
    check_link(k, rates)?;
    let (pi, _) = stationary_distribution(rates)?;
    Ok(correlation_vectors(k, rates, &pi)?.age())
}

/// Mean of the per-link ages (s).
pub fn network_aoi(rates: &RateSet) -> Result<f64, AoiError> {
    Ok(shs_solution(rates)?.network_aoi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShsSolution {
    pub pi: Vec<f64>,
    pub normalizer: f64,
    /// One entry per target link.
    pub vectors: Vec<CorrelationVectors>,
    pub per_link_aoi: Vec<f64>,
    pub network_aoi: f64,
}

pub fn shs_solution(rates: &RateSet) -> Result<ShsSolution, AoiError> {
    let (pi, normalizer) = stationary_distribution(rates)?;
    let vectors = (0..rates.len()).map(|k| correlation_vectors(k, rates, &pi)).collect::<Result<Vec<_>, _>>()?;
    let per_link_aoi: Vec<f64> = vectors.iter().map(CorrelationVectors::age).collect();
    let network_aoi = per_link_aoi.iter().sum::<f64>() / per_link_aoi.len() as f64;
    Ok(ShsSolution { pi, normalizer, vectors, per_link_aoi, network_aoi })
}

/// Event-driven simulation of the chain with the hybrid resets for link k.
/// Returns the time-average of `x0` after discarding the first 1% of events.
pub fn simulate_shs(rates: &RateSet, k: usize, horizon_events: u64, seed: u64) -> Result<f64, AoiError> {
    check_link(k, rates)?;
    let n = rates.len();
    // `exits[s]` lists (rate, destination) with destination n + 1 meaning idle.
    let idle = 0usize;
    let mut exits: Vec<Vec<(f64, usize)>> = Vec::with_capacity(n + 1);
    exits.push((0..n).map(|q| (rates.r[q], q + 1)).filter(|e| e.0 > 0.0).collect());
    for q in 0..n {
        let mut e = vec![(rates.h[q], idle)];
        e.extend((0..n).filter(|&j| rates.p[q][j] > 0.0).map(|j| (rates.p[q][j], j + 1)));
        exits.push(e.into_iter().filter(|e| e.0 > 0.0).collect());
    }
    let totals: Vec<f64> = exits.iter().map(|e| e.iter().map(|x| x.0).sum()).collect();
    if totals[0] <= 0.0 {
        return Err(AoiError::Infeasible { link: k, reason: "no link is ever scheduled".into() });
    }

    let target = k + 1;
    let burn_in = horizon_events / 100;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut x0, mut x1) = (0.0f64, 0.0f64);
    let mut state = idle;
    let (mut area, mut elapsed) = (0.0f64, 0.0f64);

    for event in 0..horizon_events {
        let total = totals[state];
        if total <= 0.0 {
            return Err(AoiError::Infeasible { link: state - 1, reason: "absorbing state".into() });
        }
        let u: f64 = rng.random();
        let dt = -(1.0 - u).ln() / total;
        if event >= burn_in {
            area += x0 * dt + 0.5 * dt * dt;
            elapsed += dt;
        }
        x0 += dt;
        if state == target {
            x1 += dt;
        }

        let mut pick = rng.random::<f64>() * total;
        let mut next = exits[state].last().expect("state has exits").1;
        for &(rate, dest) in &exits[state] {
            if pick < rate {
                next = dest;
                break;
            }
            pick -= rate;
        }
        if state == target {
            if next == idle {
                x0 = x1;
            }
            x1 = 0.0;
        }
        state = next;
    }
    Ok(area / elapsed)
}

/// The closed form with preemption outflow subtracted from the service rate,
/// kept for comparison against [`super::shs_solution`].
pub mod subtractive {
    use super::{check_link, AoiError, RateSet};

    /// `H_k - sum_j p[j][k]`.
    fn inflow_margin(k: usize, rates: &RateSet) -> f64 {
        rates.h[k] - (0..rates.len()).map(|j| rates.p[j][k]).sum::<f64>()
    }

    /// `H_k - sum_j p[k][j]`.
    fn outflow_margin(k: usize, rates: &RateSet) -> f64 {
        rates.h[k] - rates.preemption_outflow(k)
    }

    /// Every link must satisfy `H_k > sum_j p[k][j]` and `H_k > sum_j p[j][k]`.
    pub fn check_feasible(rates: &RateSet) -> Result<(), AoiError> {
        for k in 0..rates.len() {
            let (a, b) = (inflow_margin(k, rates), outflow_margin(k, rates));
            if a <= 0.0 || b <= 0.0 {
                return Err(AoiError::Infeasible {
                    link: k,
                    reason: format!("H - sum p is not positive ({:.4} / {:.4})", a, b),
                });
            }
        }
        Ok(())
    }

    pub fn stationary_distribution(rates: &RateSet) -> Result<(Vec<f64>, f64), AoiError> {
        check_feasible(rates)?;
        let rel: Vec<f64> = (0..rates.len()).map(|k| rates.r[k] / inflow_margin(k, rates)).collect();
        let c = 1.0 + rel.iter().sum::<f64>();
        let mut pi = vec![1.0 / c];
        pi.extend(rel.iter().map(|x| x / c));
        Ok((pi, c))
    }

    /// `(v00, v_q0, v_k1)`.
    pub fn correlation_vectors(k: usize, rates: &RateSet, pi: &[f64]) -> Result<(f64, Vec<f64>, f64), AoiError> {
        check_link(k, rates)?;
        check_feasible(rates)?;
        let v00 = outflow_margin(k, rates) / (rates.h[k] * rates.r[k]);
        let v_q0 = (0..rates.len()).map(|q| (pi[q + 1] + rates.r[q] * v00) / outflow_margin(q, rates)).collect();
        let v_k1 = pi[k + 1] / outflow_margin(k, rates);
        Ok((v00, v_q0, v_k1))
    }

    pub fn link_aoi(k: usize, rates: &RateSet) -> Result<f64, AoiError> {
        let (pi, c) = stationary_distribution(rates)?;
        let (v00, _, _) = correlation_vectors(k, rates, &pi)?;
        let tail: f64 = (0..rates.len()).map(|q| pi[q + 1] / outflow_margin(q, rates)).sum();
        Ok(v00 * c + tail)
    }
}
