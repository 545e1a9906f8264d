//! Variation operators for bounded real vectors.

use rand::Rng as _;
use rand_chacha::ChaCha8Rng;

use crate::moead::Solution;
use crate::scenario::{WindowBounds, WindowVector};

/// The RNG threaded through the optimizer and every operator.
pub type Rng = ChaCha8Rng;

/// Produces one offspring from a set of parents.
pub trait Variation: Send + Sync {
    fn name(&self) -> &str;

    /// How many parents `mate` expects.
    fn parents_required(&self) -> usize {
        2
    }

    /// The result must lie within `bounds`.
    fn mate(&self, parents: &[&Solution], bounds: WindowBounds, rng: &mut Rng) -> WindowVector;
}

/// Simulated binary crossover followed by polynomial mutation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sbx {
    pub eta_c: f64,
    pub eta_m: f64,
}

impl Default for Sbx {
    fn default() -> Self {
        Self { eta_c: 20.0, eta_m: 20.0 }
    }
}

impl Variation for Sbx {
    fn name(&self) -> &str {
        "sbx"
    }

    fn mate(&self, parents: &[&Solution], bounds: WindowBounds, rng: &mut Rng) -> WindowVector {
        let a = parents[0].windows.as_slice();
        let b = parents.get(1).unwrap_or(&parents[0]).windows.as_slice();
        let (child, _) = sbx_pair(a, b, bounds, self.eta_c, rng);
        polynomial_mutation(child, bounds, self.eta_m, rng)
    }
}

/// `x_1 + F (x_2 - x_3)` followed by polynomial mutation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct De {
    pub f: f64,
    pub eta_m: f64,
}

impl Default for De {
    fn default() -> Self {
        Self { f: 0.5, eta_m: 20.0 }
    }
}

impl Variation for De {
    fn name(&self) -> &str {
        "de"
    }

    fn parents_required(&self) -> usize {
        3
    }

    fn mate(&self, parents: &[&Solution], bounds: WindowBounds, rng: &mut Rng) -> WindowVector {
        let pick = |i: usize| parents[i.min(parents.len() - 1)].windows.as_slice();
        let (x, r1, r2) = (pick(0), pick(1), pick(2));
        let v = (0..x.len()).map(|i| bounds.clamp(x[i] + self.f * (r1[i] - r2[i]))).collect();
        polynomial_mutation(v, bounds, self.eta_m, rng)
    }
}

/// Bounded SBX on every coordinate with probability 1/2. Returns both children.
pub fn sbx_pair(a: &[f64], b: &[f64], bounds: WindowBounds, eta: f64, rng: &mut Rng) -> (Vec<f64>, Vec<f64>) {
    let (lo, hi) = (bounds.lower, bounds.upper);
    let mut c1 = a.to_vec();
    let mut c2 = b.to_vec();
    for i in 0..a.len() {
        if rng.random::<f64>() > 0.5 || (a[i] - b[i]).abs() <= 1e-14 {
            continue;
        }
        let (y1, y2) = if a[i] < b[i] { (a[i], b[i]) } else { (b[i], a[i]) };
        let u: f64 = rng.random();
        let spread = |beta: f64| {
            let alpha = 2.0 - beta.powf(-(eta + 1.0));
            if u <= 1.0 / alpha {
                (u * alpha).powf(1.0 / (eta + 1.0))
            } else {
                (1.0 / (2.0 - u * alpha)).powf(1.0 / (eta + 1.0))
            }
        };
        let bq1 = spread(1.0 + 2.0 * (y1 - lo) / (y2 - y1));
        let bq2 = spread(1.0 + 2.0 * (hi - y2) / (y2 - y1));
        let mut x1 = (0.5 * ((y1 + y2) - bq1 * (y2 - y1))).clamp(lo, hi);
        let mut x2 = (0.5 * ((y1 + y2) + bq2 * (y2 - y1))).clamp(lo, hi);
        if rng.random::<f64>() < 0.5 {
            std::mem::swap(&mut x1, &mut x2);
        }
        c1[i] = x1;
        c2[i] = x2;
    }
    (c1, c2)
}

/// Bounded polynomial mutation at per-coordinate rate `1 / len`.
pub fn polynomial_mutation(mut x: Vec<f64>, bounds: WindowBounds, eta: f64, rng: &mut Rng) -> WindowVector {
    let (lo, hi) = (bounds.lower, bounds.upper);
    let rate = 1.0 / x.len().max(1) as f64;
    let span = hi - lo;
    for y in &mut x {
        if rng.random::<f64>() >= rate || span <= 0.0 {
            continue;
        }
        let u: f64 = rng.random();
        let power = 1.0 / (eta + 1.0);
        let delta = if u < 0.5 {
            let xy = 1.0 - (*y - lo) / span;
            (2.0 * u + (1.0 - 2.0 * u) * xy.powf(eta + 1.0)).powf(power) - 1.0
        } else {
            let xy = 1.0 - (hi - *y) / span;
            1.0 - (2.0 * (1.0 - u) + 2.0 * (u - 0.5) * xy.powf(eta + 1.0)).powf(power)
        };
        *y = (*y + delta * span).clamp(lo, hi);
    }
    WindowVector::new(x.into_iter().map(|v| bounds.clamp(v)).collect())
}
