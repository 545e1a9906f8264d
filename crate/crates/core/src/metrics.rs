//! Hypervolume (minimization) and convergence tracking.

/// Reference coordinate used on normalized objectives.
pub const NORMALIZED_REFERENCE: f64 = 1.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hypervolume {
    pub value: f64,
    /// Points discarded because they exceed the reference point somewhere.
    pub dropped: usize,
}

/// Exact hypervolume dominated by `points` and bounded by `reference`.
pub fn hypervolume(points: &[Vec<f64>], reference: &[f64]) -> Hypervolume {
    let usable: Vec<Vec<f64>> =
        points.iter().filter(|p| p.iter().zip(reference).all(|(x, r)| x <= r)).cloned().collect();
    let dropped = points.len() - usable.len();
    Hypervolume { value: volume(nondominated(usable), reference), dropped }
}

fn weakly_dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

/// Drops weakly dominated points and duplicates.
fn nondominated(mut pts: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    pts.sort_by(|a, b| {
        a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    });
    pts.dedup();
    // Lexicographic order means a dominator always precedes what it dominates.
    let mut kept: Vec<Vec<f64>> = Vec::with_capacity(pts.len());
    for p in pts {
        if !kept.iter().any(|k| weakly_dominates(k, &p)) {
            kept.push(p);
        }
    }
    kept
}

fn box_volume(p: &[f64], r: &[f64]) -> f64 {
    p.iter().zip(r).map(|(x, r)| r - x).product()
}

/// Volume of a nondominated set. Points are processed worst-first in the
/// first objective so each point's overlap with later points shares that
/// coordinate and the recursion drops a dimension.
fn volume(mut pts: Vec<Vec<f64>>, r: &[f64]) -> f64 {
    match (pts.len(), r.len()) {
        (0, _) => return 0.0,
        (1, _) => return box_volume(&pts[0], r),
        (_, 1) => return r[0] - pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min),
        (_, 2) => return volume_2d(pts, r),
        _ => {}
    }
    pts.sort_by(|a, b| b[0].total_cmp(&a[0]));
    let mut total = 0.0;
    for i in 0..pts.len() {
        let p = &pts[i];
        let limit: Vec<Vec<f64>> =
            pts[i + 1..].iter().map(|q| p[1..].iter().zip(&q[1..]).map(|(a, b)| a.max(*b)).collect()).collect();
        let overlap = volume(nondominated(limit), &r[1..]);
        total += (r[0] - p[0]) * (box_volume(&p[1..], &r[1..]) - overlap);
    }
    total
}

fn volume_2d(mut pts: Vec<Vec<f64>>, r: &[f64]) -> f64 {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut ceiling = r[1];
    let mut total = 0.0;
    for p in pts {
        if p[1] < ceiling {
            total += (r[0] - p[0]) * (ceiling - p[1]);
            ceiling = p[1];
        }
    }
    total
}

/// Incremental hypervolume of a growing point set.
#[derive(Debug, Clone)]
pub struct HvTracker {
    reference: Vec<f64>,
    front: Vec<Vec<f64>>,
    value: f64,
    dropped: usize,
}

impl HvTracker {
    pub fn new(reference: Vec<f64>) -> Self {
        Self { reference, front: Vec::new(), value: 0.0, dropped: 0 }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn dropped(&self) -> usize {
        self.dropped
    }

    /// Adds `p` and returns its exclusive contribution.
    pub fn add(&mut self, p: &[f64]) -> f64 {
        if !weakly_dominates(p, &self.reference) {
            self.dropped += 1;
            return 0.0;
        }
        if self.front.iter().any(|q| weakly_dominates(q, p)) {
            return 0.0;
        }
        let limit: Vec<Vec<f64>> =
            self.front.iter().map(|q| q.iter().zip(p).map(|(a, b)| a.max(*b)).collect()).collect();
        let gain = box_volume(p, &self.reference) - volume(nondominated(limit), &self.reference);
        self.value += gain;
        self.front.retain(|q| !weakly_dominates(p, q));
        self.front.push(p.to_vec());
        gain
    }
}

/// Affine map of objectives onto `[0, 1]` using the bounds of a point union.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Normalizer {
    /// Bounds of every point in every set. Returns `None` when all sets are empty.
    pub fn from_sets<'a>(sets: impl IntoIterator<Item = &'a [Vec<f64>]>) -> Option<Self> {
        let mut lower: Option<Vec<f64>> = None;
        let mut upper: Vec<f64> = Vec::new();
        for p in sets.into_iter().flatten() {
            match &mut lower {
                None => {
                    lower = Some(p.clone());
                    upper = p.clone();
                }
                Some(lo) => {
                    for i in 0..p.len() {
                        lo[i] = lo[i].min(p[i]);
                        upper[i] = upper[i].max(p[i]);
                    }
                }
            }
        }
        lower.map(|lower| Self { lower, upper })
    }

    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        p.iter()
            .enumerate()
            .map(|(i, x)| {
                let span = self.upper[i] - self.lower[i];
                if span > 0.0 {
                    (x - self.lower[i]) / span
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn reference(&self) -> Vec<f64> {
        vec![NORMALIZED_REFERENCE; self.lower.len()]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HvReport {
    pub per_generation_hv: Vec<f64>,
    pub reference_point: Vec<f64>,
    pub converged_at: Option<usize>,
}

/// Normalized hypervolume after each generation, given the points that
/// entered the archive in each generation (index 0 = initial population).
pub fn hv_series(accepted_by_generation: &[Vec<Vec<f64>>], normalizer: &Normalizer) -> Vec<f64> {
    let mut tracker = HvTracker::new(normalizer.reference());
    accepted_by_generation
        .iter()
        .map(|points| {
            for p in points {
                tracker.add(&normalizer.apply(p));
            }
            tracker.value()
        })
        .collect()
}

/// First `g` with `max - min < epsilon` over `series[g..g + window]`.
pub fn track_convergence(series: &[f64], window: usize, epsilon: f64) -> Option<usize> {
    let window = window.max(1);
    if series.len() < window {
        return None;
    }
    (0..=series.len() - window).find(|&g| {
        let s = &series[g..g + window];
        let hi = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = s.iter().copied().fold(f64::INFINITY, f64::min);
        hi - lo < epsilon
    })
}
