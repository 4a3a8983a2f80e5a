//! Robust Lp-norm trend tracking of per-RRU angle streams and of selected
//! cluster centers over TTIs.
//!
//! Each trend is a linear angle-vs-TTI model fitted by iteratively
//! reweighted least squares on Sum |residual|^p with 1 <= p <= 2 (p = 1 by
//! default, which bounds outlier influence). The tracker seeds, gates,
//! merges, and retires trends per TTI and predicts by extrapolation.

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Residual floor inside IRLS weights and the Eq-15 style prediction weight
/// floor; both expressions divide by residual magnitudes.
const RESIDUAL_FLOOR: f64 = 1e-6;
const WEIGHT_FLOOR: f64 = 1e-6;

/// Minimizes Sum_i |y_i - a t_i - b|^p.
///
/// Requires at least two points with distinct abscissae. For p = 2 this is
/// the closed-form least-squares line; for 1 <= p < 2 it runs IRLS with a
/// residual floor, keeping the objective non-increasing across iterations.
pub fn lp_fit(points: &[(f64, f64)], p: f64) -> Result<(f64, f64)> {
    if !(1.0..=2.0).contains(&p) {
        return Err(Error::Domain(format!("lp_fit: p = {p} outside [1, 2]")));
    }
    if points.len() < 2 {
        return Err(Error::DegenerateAbscissae);
    }
    let t0 = points[0].0;
    if points.iter().all(|&(t, _)| t == t0) {
        return Err(Error::DegenerateAbscissae);
    }

    let ols = weighted_line(points, None).expect("distinct abscissae checked");
    if p == 2.0 {
        return Ok(ols);
    }

    let objective = |a: f64, b: f64| -> f64 {
        points.iter().map(|&(t, y)| (y - a * t - b).abs().powf(p)).sum()
    };

    let (mut a, mut b) = ols;
    let mut best_obj = objective(a, b);
    let mut weights = vec![0.0; points.len()];
    for _ in 0..200 {
        for (w, &(t, y)) in weights.iter_mut().zip(points) {
            let r = (y - a * t - b).abs().max(RESIDUAL_FLOOR);
            *w = r.powf(p - 2.0);
        }
        let (na, nb) = match weighted_line(points, Some(&weights)) {
            Some(line) => line,
            None => break,
        };
        let new_obj = objective(na, nb);
        // The IRLS step is a majorize-minimize update; with the residual
        // floor it can stall but must not climb.
        if new_obj > best_obj + 1e-12 * best_obj.abs().max(1.0) {
            break;
        }
        let delta = (na - a).abs() + (nb - b).abs();
        a = na;
        b = nb;
        best_obj = new_obj;
        if delta < 1e-10 {
            break;
        }
    }

    // For p = 1 the objective is piecewise linear and can be flat on a whole
    // region (balanced residual signs), where IRLS legitimately stalls away
    // from a vertex. An optimal L1 line always exists through two points, so
    // polish deterministically: take the first pairwise line that does at
    // least as well.
    if p == 1.0 && points.len() <= 64 {
        let tol = 1e-12 * best_obj.abs().max(1.0);
        'outer: for i in 0..points.len() {
            for j in i + 1..points.len() {
                let (ti, yi) = points[i];
                let (tj, yj) = points[j];
                if ti == tj {
                    continue;
                }
                let va = (yj - yi) / (tj - ti);
                let vb = yi - va * ti;
                if objective(va, vb) <= best_obj + tol {
                    a = va;
                    b = vb;
                    break 'outer;
                }
            }
        }
    }
    Ok((a, b))
}

/// Closed-form (weighted) least squares line through the points.
fn weighted_line(points: &[(f64, f64)], weights: Option<&[f64]>) -> Option<(f64, f64)> {
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let mut sw = 0.0;
    let mut st = 0.0;
    let mut sy = 0.0;
    let mut stt = 0.0;
    let mut sty = 0.0;
    for (i, &(t, y)) in points.iter().enumerate() {
        let wi = w(i);
        sw += wi;
        st += wi * t;
        sy += wi * y;
        stt += wi * t * t;
        sty += wi * t * y;
    }
    let det = sw * stt - st * st;
    if det.abs() < 1e-12 * sw.max(1.0) * stt.max(1.0) {
        return None;
    }
    let a = (sw * sty - st * sy) / det;
    let b = (stt * sy - st * sty) / det;
    Some((a, b))
}

/// One linear trend over a bounded buffer of (TTI, angle) samples.
#[derive(Debug, Clone)]
pub struct TrendState {
    pub id: usize,
    pub slope: f64,
    pub intercept: f64,
    /// (tti, unwrapped angle) pairs, TTIs strictly increasing.
    pub buffer: VecDeque<(u64, f64)>,
    pub p: f64,
    /// Mean |residual|^p over the buffer after the last fit.
    pub deviation: f64,
    pub created_tti: u64,
    pub last_update_tti: u64,
    fitted: bool,
}

impl TrendState {
    fn new(id: usize, tti: u64, value: f64, p: f64) -> TrendState {
        let mut buffer = VecDeque::new();
        buffer.push_back((tti, value));
        TrendState {
            id,
            slope: 0.0,
            intercept: value,
            buffer,
            p,
            deviation: 0.0,
            created_tti: tti,
            last_update_tti: tti,
            fitted: false,
        }
    }

    /// Appends a sample, unwrapping it onto the trend's angle branch, and
    /// refits.
    fn push_and_fit(&mut self, tti: u64, value: f64, n_buffer_max: usize) {
        let last = self.buffer.back().map(|&(_, v)| v).unwrap_or(value);
        let unwrapped = unwrap_to_branch(value, last);
        self.buffer.push_back((tti, unwrapped));
        while self.buffer.len() > n_buffer_max {
            self.buffer.pop_front();
        }
        self.last_update_tti = tti;
        self.refit();
    }

    fn refit(&mut self) {
        let pts: Vec<(f64, f64)> = self.buffer.iter().map(|&(t, v)| (t as f64, v)).collect();
        let distinct = pts.iter().any(|&(t, _)| t != pts[0].0);
        if pts.len() >= 2 && distinct {
            if let Ok((a, b)) = lp_fit(&pts, self.p) {
                self.slope = a;
                self.intercept = b;
                self.fitted = true;
            }
        } else {
            self.slope = 0.0;
            self.intercept = pts[0].1;
        }
        self.deviation = pts
            .iter()
            .map(|&(t, y)| (y - self.slope * t - self.intercept).abs().powf(self.p))
            .sum::<f64>()
            / pts.len() as f64;
    }

    /// Extrapolated angle at `tti` (unwrapped branch) with the buffer-length
    /// over residual-sum weight; unavailable until two samples are buffered.
    pub fn predict(&self, tti: u64) -> Result<(f64, f64)> {
        if self.buffer.len() < 2 || !self.fitted {
            return Err(Error::Invalid("trend not fitted yet".into()));
        }
        let pred = self.slope * tti as f64 + self.intercept;
        let residual_sum: f64 = self
            .buffer
            .iter()
            .map(|&(t, y)| (y - self.slope * t as f64 - self.intercept).abs().powf(self.p))
            .sum();
        let weight = self.buffer.len() as f64 / residual_sum.max(WEIGHT_FLOOR);
        Ok((pred, weight))
    }

    /// Best angle guess at `tti`: the fit when available, else the single
    /// buffered value.
    fn guess(&self, tti: u64) -> f64 {
        if self.fitted {
            self.slope * tti as f64 + self.intercept
        } else {
            self.buffer.back().map(|&(_, v)| v).unwrap_or(0.0)
        }
    }

    /// Characteristic residual scale in radians ((deviation)^(1/p)).
    pub fn scale(&self) -> f64 {
        self.deviation.powf(1.0 / self.p)
    }
}

fn unwrap_to_branch(value: f64, reference: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let mut v = value;
    while v - reference > std::f64::consts::PI {
        v -= tau;
    }
    while reference - v > std::f64::consts::PI {
        v += tau;
    }
    v
}

/// Extrapolated angle prediction per the trend model with its Eq-15 weight.
pub fn predict_angle(trend: &TrendState, tti: u64) -> Result<(f64, f64)> {
    trend
        .predict(tti)
        .map(|(pred, w)| (crate::array_signal::wrap_angle(pred), w))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrackerConfig {
    /// Gate = clamp(gate_scale * trend scale, gate_min, gate_max), radians.
    pub gate_min: f64,
    pub gate_max: f64,
    pub gate_scale: f64,
    pub n_buffer_max: usize,
    /// Trends idle longer than this are erased.
    pub max_idle_ttis: u64,
    /// Trends whose predictions converge closer than this merge, radians.
    pub merge_threshold: f64,
    /// Trends with deviation above this are erased, radians^p.
    pub deviation_ceiling: f64,
    /// Norm exponent, 1 <= p <= 2.
    pub p: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            gate_min: 1f64.to_radians(),
            gate_max: 10f64.to_radians(),
            gate_scale: 3.0,
            n_buffer_max: 32,
            max_idle_ttis: 20,
            merge_threshold: 0.5f64.to_radians(),
            deviation_ceiling: 0.15,
            p: 1.0,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gate_min <= 0.0
            || self.gate_max < self.gate_min
            || self.gate_scale <= 0.0
            || self.n_buffer_max < 2
            || self.max_idle_ttis == 0
            || self.merge_threshold <= 0.0
            || self.deviation_ceiling <= 0.0
        {
            return Err(Error::Invalid("tracker config values must be positive".into()));
        }
        if !(1.0..=2.0).contains(&self.p) {
            return Err(Error::Invalid("tracker p outside [1, 2]".into()));
        }
        Ok(())
    }
}

/// Multi-trend angle tracker for one (RRU, axis) stream.
#[derive(Debug, Clone, Default)]
pub struct Tracker {
    pub trends: Vec<TrendState>,
    next_id: usize,
    last_tti: Option<u64>,
}

/// Which trend each estimate landed in during an update.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    /// Index into the (sorted) estimate list passed to `update_tracker`.
    pub estimate_index: usize,
    pub trend_id: usize,
    /// True when the estimate seeded a new trend.
    pub seeded: bool,
}

impl Tracker {
    pub fn new() -> Tracker {
        Tracker::default()
    }

    pub fn trend(&self, id: usize) -> Option<&TrendState> {
        self.trends.iter().find(|t| t.id == id)
    }
}

/// Advances the tracker by one TTI of estimates.
///
/// Estimates are sorted internally, so the outcome does not depend on their
/// order within the TTI. Each estimate joins the trend whose prediction is
/// nearest within the gate, otherwise seeds a new trend; joined trends are
/// refitted; converged trends merge (lower deviation survives); idle or
/// noisy trends are erased; buffers are truncated oldest-out.
pub fn update_tracker(
    tracker: &mut Tracker,
    tti: u64,
    estimates: &[f64],
    cfg: &TrackerConfig,
) -> Result<Vec<Assignment>> {
    cfg.validate()?;
    if let Some(last) = tracker.last_tti {
        if tti <= last {
            return Err(Error::NonMonotonicTti { last, got: tti });
        }
    }
    tracker.last_tti = Some(tti);

    let mut sorted: Vec<f64> = estimates.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());

    // Candidate (distance, estimate, trend slot) pairs within the gate.
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (ei, &est) in sorted.iter().enumerate() {
        for (si, trend) in tracker.trends.iter().enumerate() {
            let gate = (cfg.gate_scale * trend.scale()).clamp(cfg.gate_min, cfg.gate_max);
            let dist = angular_distance(est, trend.guess(tti));
            if dist <= gate {
                pairs.push((dist, ei, si));
            }
        }
    }
    pairs.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut est_taken = vec![false; sorted.len()];
    let mut trend_taken = vec![false; tracker.trends.len()];
    let mut assignments = Vec::new();
    for (_, ei, si) in pairs {
        if est_taken[ei] || trend_taken[si] {
            continue;
        }
        est_taken[ei] = true;
        trend_taken[si] = true;
        let trend = &mut tracker.trends[si];
        trend.push_and_fit(tti, sorted[ei], cfg.n_buffer_max);
        assignments.push(Assignment {
            estimate_index: ei,
            trend_id: trend.id,
            seeded: false,
        });
    }

    // Unmatched estimates seed new trends.
    for (ei, &est) in sorted.iter().enumerate() {
        if est_taken[ei] {
            continue;
        }
        let id = tracker.next_id;
        tracker.next_id += 1;
        tracker.trends.push(TrendState::new(id, tti, est, cfg.p));
        assignments.push(Assignment {
            estimate_index: ei,
            trend_id: id,
            seeded: true,
        });
    }

    // Merge trends whose predictions converge; keep the lower deviation.
    let mut removed: Vec<usize> = Vec::new();
    for i in 0..tracker.trends.len() {
        for j in i + 1..tracker.trends.len() {
            if removed.contains(&i) || removed.contains(&j) {
                continue;
            }
            let (a, b) = (&tracker.trends[i], &tracker.trends[j]);
            if angular_distance(a.guess(tti), b.guess(tti)) < cfg.merge_threshold {
                let drop = if (a.deviation, a.id) <= (b.deviation, b.id) { j } else { i };
                removed.push(drop);
            }
        }
    }
    let mut slot = 0usize;
    tracker.trends.retain(|_| {
        let keep = !removed.contains(&slot);
        slot += 1;
        keep
    });

    // Retire idle and noisy trends.
    tracker.trends.retain(|t| {
        let idle = tti - t.last_update_tti;
        idle <= cfg.max_idle_ttis && t.deviation <= cfg.deviation_ceiling
    });

    assignments.sort_by_key(|a| a.estimate_index);
    Ok(assignments)
}

fn angular_distance(a: f64, b: f64) -> f64 {
    crate::array_signal::wrap_angle(a - b).abs()
}

/// Single-trend tracker applied independently to the x, y, z coordinates of
/// a cluster-center stream (no gating: every sample joins).
#[derive(Debug, Clone)]
pub struct CenterTracker {
    axes: [TrendState; 3],
    n_buffer_max: usize,
    last_tti: Option<u64>,
}

impl CenterTracker {
    pub fn new(cfg: &TrackerConfig) -> CenterTracker {
        CenterTracker {
            axes: [
                TrendState::new(0, 0, 0.0, cfg.p),
                TrendState::new(1, 0, 0.0, cfg.p),
                TrendState::new(2, 0, 0.0, cfg.p),
            ],
            n_buffer_max: cfg.n_buffer_max,
            last_tti: None,
        }
    }

    pub fn update(&mut self, tti: u64, center: Vec3) -> Result<()> {
        if let Some(last) = self.last_tti {
            if tti <= last {
                return Err(Error::NonMonotonicTti { last, got: tti });
            }
        }
        let first = self.last_tti.is_none();
        self.last_tti = Some(tti);
        for (axis, value) in self.axes.iter_mut().zip([center.x, center.y, center.z]) {
            if first {
                *axis = TrendState::new(axis.id, tti, value, axis.p);
            } else {
                // Coordinates are not angles: bypass branch unwrapping.
                axis.buffer.push_back((tti, value));
                while axis.buffer.len() > self.n_buffer_max {
                    axis.buffer.pop_front();
                }
                axis.last_update_tti = tti;
                axis.refit();
            }
        }
        Ok(())
    }

    /// Fitted center at `tti`; falls back to the last raw sample until two
    /// samples are buffered.
    pub fn predict(&self, tti: u64) -> Option<Vec3> {
        self.last_tti?;
        let v: Vec<f64> = self.axes.iter().map(|a| a.guess(tti)).collect();
        Some(Vec3::new(v[0], v[1], v[2]))
    }

    pub fn sample_count(&self) -> usize {
        self.axes[0].buffer.len()
    }
}

/// Runs the center tracker over a (tti, center) stream, returning the
/// smoothed prediction at each step.
pub fn track_cluster_centers(
    stream: &[(u64, Vec3)],
    cfg: &TrackerConfig,
) -> Result<Vec<(u64, Vec3)>> {
    cfg.validate()?;
    let mut tracker = CenterTracker::new(cfg);
    let mut out = Vec::with_capacity(stream.len());
    for &(tti, center) in stream {
        tracker.update(tti, center)?;
        out.push((tti, tracker.predict(tti).expect("updated")));
    }
    Ok(out)
}
