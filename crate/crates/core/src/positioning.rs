//! Central-unit fusion: re-traces reported directions through the known map
//! with a bias search, forms position candidates from multi-RRU ray
//! intersections (or height-plane crossings for single-RRU operation),
//! weights and filters them, and flags misses by candidate variance.

use crate::array_signal::AngleReport;
use crate::error::{Error, Result};
use crate::geometry::{segment_segment_closest, Vec3};
use crate::propagation::specular_polyline;
use crate::scene::{RruConfig, SceneModel};
use serde::{Deserialize, Serialize};

/// Bias search around each reported direction: an odd grid per axis so the
/// unbiased direction is always sampled, with the Gaussian prior sigma set
/// to one third of the maximum bias.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BiasSearchConfig {
    /// Maximum bias per axis, radians.
    pub max_bias_az: f64,
    pub max_bias_el: f64,
    /// Grid point counts per axis (odd).
    pub grid_az: usize,
    pub grid_el: usize,
    /// Reflections allowed during the central-unit re-trace.
    pub max_reflections: usize,
}

impl Default for BiasSearchConfig {
    fn default() -> Self {
        BiasSearchConfig {
            max_bias_az: 2f64.to_radians(),
            max_bias_el: 2f64.to_radians(),
            grid_az: 5,
            grid_el: 5,
            max_reflections: 3,
        }
    }
}

impl BiasSearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_bias_az <= 0.0 || self.max_bias_el <= 0.0 {
            return Err(Error::Invalid("max bias must be positive".into()));
        }
        if self.grid_az == 0 || self.grid_el == 0 || self.grid_az % 2 == 0 || self.grid_el % 2 == 0
        {
            return Err(Error::Invalid("bias grid counts must be odd".into()));
        }
        Ok(())
    }

    /// Prior sigma per axis: |max bias| / 3.
    pub fn prior_sigma_az(&self) -> f64 {
        self.max_bias_az / 3.0
    }

    pub fn prior_sigma_el(&self) -> f64 {
        self.max_bias_el / 3.0
    }

    fn offsets(max: f64, n: usize) -> Vec<f64> {
        if n == 1 {
            return vec![0.0];
        }
        (0..n)
            .map(|i| -max + 2.0 * max * i as f64 / (n - 1) as f64)
            .collect()
    }
}

/// One re-traced ray: the polyline it followed through the map and the
/// probabilistic weight of its bias hypothesis.
#[derive(Debug, Clone)]
pub struct TracedRay {
    pub rru_id: usize,
    /// Index of the originating peak within that RRU's report.
    pub peak_index: usize,
    /// (azimuth, elevation) bias applied to the reported direction.
    pub bias: (f64, f64),
    /// Polyline vertices from the RRU through reflections to termination.
    pub polyline: Vec<Vec3>,
    /// P(est | biased) * P(biased) for this ray.
    pub weight_factor: f64,
}

impl TracedRay {
    pub fn reflection_count(&self) -> usize {
        self.polyline.len().saturating_sub(2)
    }
}

fn gaussian_pdf(x: f64, sigma: f64) -> f64 {
    let s = sigma.max(1e-9);
    (-0.5 * (x / s).powi(2)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
}

/// Launches the bias grid around every reported peak and traces each ray
/// through the map with specular reflections.
pub fn ray_search(
    reports: &[AngleReport],
    scene: &SceneModel,
    rrus: &[RruConfig],
    cfg: &BiasSearchConfig,
) -> Result<Vec<TracedRay>> {
    cfg.validate()?;
    let positions: Vec<Vec3> = rrus.iter().map(|r| r.position).collect();
    let bounds = scene.trace_bounds(&positions);
    let mut rays = Vec::new();
    for report in reports {
        let rru = rrus
            .iter()
            .find(|r| r.id == report.rru_id)
            .ok_or_else(|| Error::UnknownId(format!("rru {}", report.rru_id)))?;
        for (peak_index, peak) in report.peaks.iter().enumerate() {
            let sigma_peak = (peak.width / 2.355).max(1e-4);
            for &b_el in &BiasSearchConfig::offsets(cfg.max_bias_el, cfg.grid_el) {
                for &b_az in &BiasSearchConfig::offsets(cfg.max_bias_az, cfg.grid_az) {
                    let dir = Vec3::from_angles(peak.azimuth + b_az, peak.elevation + b_el);
                    let polyline =
                        specular_polyline(scene, rru.position, dir, cfg.max_reflections, &bounds);
                    if polyline.len() < 2 {
                        continue;
                    }
                    let prior = gaussian_pdf(b_az, cfg.prior_sigma_az())
                        * gaussian_pdf(b_el, cfg.prior_sigma_el());
                    let likelihood =
                        gaussian_pdf(b_az, sigma_peak) * gaussian_pdf(b_el, sigma_peak);
                    rays.push(TracedRay {
                        rru_id: report.rru_id,
                        peak_index,
                        bias: (b_az, b_el),
                        polyline,
                        weight_factor: prior * likelihood,
                    });
                }
            }
        }
    }
    Ok(rays)
}

/// Ray-tracer side outputs attached to a candidate for later filtering.
#[derive(Debug, Clone, PartialEq)]
pub struct RtOutputs {
    pub ray_count: usize,
    pub reflection_counts: Vec<usize>,
    /// Sorted, deduplicated contributing RRU ids.
    pub rrus: Vec<usize>,
    /// True when every contributing ray arrived without reflections.
    pub los_flag: bool,
    /// Closest approach between the contributing rays, meters (zero for
    /// single-ray candidates).
    pub min_mutual_distance: f64,
}

/// A 3D position hypothesis with its probabilistic weight.
#[derive(Debug, Clone)]
pub struct PositionCandidate {
    pub position: Vec3,
    pub weight: f64,
    pub rt: RtOutputs,
}

/// Sum of per-ray weight factors contributing to one candidate.
pub fn candidate_weight(factors: &[f64]) -> f64 {
    factors.iter().sum()
}

/// Forms position candidates.
///
/// Rays from distinct RRUs produce a candidate at the midpoint of their
/// closest-approach pair when the gap is below `d_intersect`. When all
/// rays share one RRU, each ray instead contributes its first crossing of
/// the z = `ue_height` plane. Candidates below ground or outside the scene
/// bounds are discarded; output order is canonical (position, then weight).
pub fn intersect_rays(
    rays: &[TracedRay],
    scene: &SceneModel,
    ue_height: f64,
    d_intersect: f64,
) -> Result<Vec<PositionCandidate>> {
    if d_intersect <= 0.0 {
        return Err(Error::Invalid("d_intersect must be positive".into()));
    }
    let bounds = scene.bounds().inflated(1.0);
    let mut candidates = Vec::new();

    let mut rru_ids: Vec<usize> = rays.iter().map(|r| r.rru_id).collect();
    rru_ids.sort_unstable();
    rru_ids.dedup();

    if rru_ids.len() >= 2 {
        for i in 0..rays.len() {
            for j in i + 1..rays.len() {
                let (a, b) = (&rays[i], &rays[j]);
                if a.rru_id == b.rru_id {
                    continue;
                }
                let mut best: Option<(Vec3, Vec3, f64)> = None;
                for sa in a.polyline.windows(2) {
                    for sb in b.polyline.windows(2) {
                        let (pa, pb, d) = segment_segment_closest(sa[0], sa[1], sb[0], sb[1]);
                        if best.as_ref().map_or(true, |(_, _, bd)| d < *bd) {
                            best = Some((pa, pb, d));
                        }
                    }
                }
                if let Some((pa, pb, d)) = best {
                    if d < d_intersect {
                        let position = (pa + pb) * 0.5;
                        if position.z >= 0.0 && bounds.contains(position) {
                            candidates.push(PositionCandidate {
                                position,
                                weight: candidate_weight(&[a.weight_factor, b.weight_factor]),
                                rt: RtOutputs {
                                    ray_count: 2,
                                    reflection_counts: vec![
                                        a.reflection_count(),
                                        b.reflection_count(),
                                    ],
                                    rrus: {
                                        let mut ids = vec![a.rru_id, b.rru_id];
                                        ids.sort_unstable();
                                        ids
                                    },
                                    los_flag: a.reflection_count() == 0
                                        && b.reflection_count() == 0,
                                    min_mutual_distance: d,
                                },
                            });
                        }
                    }
                }
            }
        }
    } else {
        for ray in rays {
            if let Some(position) = first_plane_crossing(&ray.polyline, ue_height) {
                if position.z >= 0.0 && bounds.contains(position) {
                    candidates.push(PositionCandidate {
                        position,
                        weight: ray.weight_factor,
                        rt: RtOutputs {
                            ray_count: 1,
                            reflection_counts: vec![ray.reflection_count()],
                            rrus: vec![ray.rru_id],
                            los_flag: ray.reflection_count() == 0,
                            min_mutual_distance: 0.0,
                        },
                    });
                }
            }
        }
    }

    candidates.sort_by(|a, b| {
        (a.position.x, a.position.y, a.position.z, a.weight)
            .partial_cmp(&(b.position.x, b.position.y, b.position.z, b.weight))
            .unwrap()
    });
    Ok(candidates)
}

fn first_plane_crossing(polyline: &[Vec3], height: f64) -> Option<Vec3> {
    for seg in polyline.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let (da, db) = (a.z - height, b.z - height);
        if da == 0.0 {
            return Some(a);
        }
        if da * db < 0.0 {
            let t = da / (da - db);
            return Some(a + (b - a) * t);
        }
    }
    None
}

/// Weighted mean position over the candidates (the expectation step).
pub fn expected_position(candidates: &[PositionCandidate]) -> Result<Vec3> {
    let total: f64 = candidates.iter().map(|c| c.weight).sum();
    if candidates.is_empty() || total <= 0.0 {
        return Err(Error::NoPosition);
    }
    let mut acc = Vec3::ZERO;
    for c in candidates {
        acc = acc + c.position * c.weight;
    }
    Ok(acc / total)
}

/// Threshold predicates over the ray-tracer side outputs.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FilterPolicy {
    /// Candidates backed by fewer rays are dropped.
    pub min_ray_count: usize,
    /// Candidates with any contributing ray bouncing more than this are
    /// dropped.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_reflections: Option<usize>,
    /// When set, keep only candidates whose LOS flag matches.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub require_los: Option<bool>,
}

/// Drops candidates failing any predicate; order is preserved.
pub fn filter_candidates(
    candidates: Vec<PositionCandidate>,
    policy: &FilterPolicy,
) -> Vec<PositionCandidate> {
    candidates
        .into_iter()
        .filter(|c| {
            if c.rt.ray_count < policy.min_ray_count {
                return false;
            }
            if let Some(max_r) = policy.max_reflections {
                if c.rt.reflection_counts.iter().any(|&r| r > max_r) {
                    return false;
                }
            }
            if let Some(need_los) = policy.require_los {
                if c.rt.los_flag != need_los {
                    return false;
                }
            }
            true
        })
        .collect()
}

/// Miss detection threshold on the candidate variance, square meters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MissConfig {
    pub epsilon0: f64,
}

impl Default for MissConfig {
    fn default() -> Self {
        MissConfig { epsilon0: 25.0 }
    }
}

/// Weighted positional variance: trace of the weighted covariance of the
/// candidate positions, square meters.
pub fn candidate_variance(candidates: &[PositionCandidate]) -> f64 {
    let total: f64 = candidates.iter().map(|c| c.weight).sum();
    if candidates.is_empty() || total <= 0.0 {
        return f64::INFINITY;
    }
    let mean = expected_position(candidates).expect("non-empty with positive weight");
    candidates
        .iter()
        .map(|c| c.weight * (c.position - mean).norm_squared())
        .sum::<f64>()
        / total
}

/// True when the candidate spread exceeds the variance threshold; an empty
/// candidate set is a miss by convention.
pub fn detect_miss(candidates: &[PositionCandidate], cfg: &MissConfig) -> bool {
    if candidates.is_empty() {
        return true;
    }
    candidate_variance(candidates) > cfg.epsilon0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array_signal::Peak;
    use crate::scene::SceneBuilder;
    use approx::assert_relative_eq;

    fn open_scene() -> SceneModel {
        SceneBuilder::new()
            .material("concrete", 2.4, 0.4, 4.0)
            .ground((-300.0, -300.0), (300.0, 300.0), 0)
            .build()
            .unwrap()
    }

    fn rru(id: usize, pos: Vec3) -> RruConfig {
        RruConfig {
            id,
            position: pos,
            rotation_azimuth: 0.0,
            tilt: 10f64.to_radians(),
            rows: 4,
            cols: 8,
            spacing_h: 0.0428,
            spacing_v: 0.0428,
        }
    }

    fn report_toward(rru_id: usize, from: Vec3, target: Vec3) -> AngleReport {
        let u = (target - from).normalized();
        AngleReport {
            rru_id,
            tti: 0,
            peaks: vec![Peak {
                azimuth: u.azimuth(),
                elevation: u.elevation(),
                power: 1.0,
                width: 0.5f64.to_radians(),
            }],
        }
    }

    #[test]
    fn single_peak_unit_grid_single_ray() {
        let scene = open_scene();
        let rrus = [rru(0, Vec3::new(0.0, 0.0, 20.0))];
        let reports = [report_toward(0, rrus[0].position, Vec3::new(100.0, 50.0, 1.5))];
        let cfg = BiasSearchConfig {
            grid_az: 1,
            grid_el: 1,
            ..Default::default()
        };
        let rays = ray_search(&reports, &scene, &rrus, &cfg).unwrap();
        assert_eq!(rays.len(), 1);
        assert_eq!(rays[0].bias, (0.0, 0.0));
        let expected = gaussian_pdf(0.0, cfg.prior_sigma_az())
            * gaussian_pdf(0.0, cfg.prior_sigma_el())
            * gaussian_pdf(0.0, 0.5f64.to_radians() / 2.355).powi(2);
        assert_relative_eq!(rays[0].weight_factor, expected, max_relative = 1e-12);
    }

    #[test]
    fn bias_grid_symmetric_weights() {
        let scene = open_scene();
        let rrus = [rru(0, Vec3::new(0.0, 0.0, 20.0))];
        let reports = [report_toward(0, rrus[0].position, Vec3::new(100.0, 50.0, 1.5))];
        let cfg = BiasSearchConfig::default();
        let rays = ray_search(&reports, &scene, &rrus, &cfg).unwrap();
        assert_eq!(rays.len(), 25);
        // Prior and likelihood are even in the bias, so mirrored offsets
        // carry equal weight.
        for r in &rays {
            let mirror = rays
                .iter()
                .find(|m| m.bias == (-r.bias.0, -r.bias.1))
                .unwrap();
            assert_relative_eq!(r.weight_factor, mirror.weight_factor, max_relative = 1e-9);
        }
    }

    #[test]
    fn unknown_rru_errors() {
        let scene = open_scene();
        let rrus = [rru(0, Vec3::new(0.0, 0.0, 20.0))];
        let mut report = report_toward(0, rrus[0].position, Vec3::new(100.0, 50.0, 1.5));
        report.rru_id = 9;
        let err = ray_search(&[report], &scene, &rrus, &BiasSearchConfig::default()).unwrap_err();
        assert!(matches!(err, Error::UnknownId(_)));
    }

    #[test]
    fn mirror_wall_reflection_in_polyline() {
        let scene = SceneBuilder::new()
            .material("concrete", 2.4, 0.4, 4.0)
            .ground((-300.0, -300.0), (300.0, 300.0), 0)
            .building(&[(-100.0, 50.0), (100.0, 50.0), (100.0, 55.0), (-100.0, 55.0)], 40.0, 0)
            .build()
            .unwrap();
        let rrus = [rru(0, Vec3::new(0.0, 0.0, 20.0))];
        // Aim at the wall with a slight downward angle.
        let target = Vec3::new(10.0, 50.0, 18.0);
        let reports = [report_toward(0, rrus[0].position, target)];
        let cfg = BiasSearchConfig {
            grid_az: 1,
            grid_el: 1,
            ..Default::default()
        };
        let rays = ray_search(&reports, &scene, &rrus, &cfg).unwrap();
        let poly = &rays[0].polyline;
        assert!(poly.len() >= 3, "expected a reflection: {poly:?}");
        // Specular law: the wall normal is (0, -1, 0), so the y component
        // flips while x and z are preserved.
        let d_in = (poly[1] - poly[0]).normalized();
        let d_out = (poly[2] - poly[1]).normalized();
        assert_relative_eq!(d_in.x, d_out.x, epsilon = 1e-9);
        assert_relative_eq!(d_in.z, d_out.z, epsilon = 1e-9);
        assert_relative_eq!(d_in.y, -d_out.y, epsilon = 1e-9);
    }

    #[test]
    fn two_rays_intersect_at_target() {
        let scene = open_scene();
        let rrus = [
            rru(0, Vec3::new(0.0, 0.0, 20.0)),
            rru(1, Vec3::new(200.0, 0.0, 20.0)),
        ];
        let ue = Vec3::new(100.0, 0.0, 1.5);
        let reports = [
            report_toward(0, rrus[0].position, ue),
            report_toward(1, rrus[1].position, ue),
        ];
        let cfg = BiasSearchConfig {
            grid_az: 1,
            grid_el: 1,
            ..Default::default()
        };
        let rays = ray_search(&reports, &scene, &rrus, &cfg).unwrap();
        let cands = intersect_rays(&rays, &scene, 1.5, 1.0).unwrap();
        assert_eq!(cands.len(), 1);
        assert!(cands[0].position.distance(ue) < 1e-6, "{:?}", cands[0].position);
        assert_eq!(cands[0].rt.ray_count, 2);
        assert_eq!(cands[0].rt.rrus, vec![0, 1]);
        assert!(cands[0].rt.los_flag);
    }

    #[test]
    fn parallel_rays_no_candidate() {
        let scene = open_scene();
        let mk = |rru_id, x| TracedRay {
            rru_id,
            peak_index: 0,
            bias: (0.0, 0.0),
            polyline: vec![Vec3::new(x, 0.0, 20.0), Vec3::new(x, 200.0, 20.0)],
            weight_factor: 1.0,
        };
        let rays = [mk(0, 0.0), mk(1, 50.0)];
        let cands = intersect_rays(&rays, &scene, 1.5, 1.0).unwrap();
        assert!(cands.is_empty());
    }

    #[test]
    fn single_rru_plane_crossing() {
        let scene = open_scene();
        let rays = [TracedRay {
            rru_id: 0,
            peak_index: 0,
            bias: (0.0, 0.0),
            polyline: vec![Vec3::new(30.0, 40.0, 20.0), Vec3::new(30.0, 40.0, -5.0)],
            weight_factor: 0.7,
        }];
        let cands = intersect_rays(&rays, &scene, 1.5, 1.0).unwrap();
        assert_eq!(cands.len(), 1);
        assert_relative_eq!(cands[0].position.x, 30.0, epsilon = 1e-12);
        assert_relative_eq!(cands[0].position.y, 40.0, epsilon = 1e-12);
        assert_relative_eq!(cands[0].position.z, 1.5, epsilon = 1e-12);
        assert_eq!(cands[0].rt.ray_count, 1);
        assert_relative_eq!(cands[0].weight, 0.7);
    }

    #[test]
    fn candidate_order_independent_of_ray_order() {
        let scene = open_scene();
        let rrus = [
            rru(0, Vec3::new(0.0, 0.0, 20.0)),
            rru(1, Vec3::new(200.0, 0.0, 20.0)),
            rru(2, Vec3::new(100.0, 150.0, 20.0)),
        ];
        let ue = Vec3::new(90.0, 20.0, 1.5);
        let reports: Vec<AngleReport> = rrus
            .iter()
            .map(|r| report_toward(r.id, r.position, ue))
            .collect();
        let cfg = BiasSearchConfig {
            grid_az: 3,
            grid_el: 3,
            max_bias_az: 0.5f64.to_radians(),
            max_bias_el: 0.5f64.to_radians(),
            ..Default::default()
        };
        let rays = ray_search(&reports, &scene, &rrus, &cfg).unwrap();
        let mut shuffled = rays.clone();
        shuffled.reverse();
        let a = intersect_rays(&rays, &scene, 1.5, 2.0).unwrap();
        let b = intersect_rays(&shuffled, &scene, 1.5, 2.0).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert!(x.position.distance(y.position) < 1e-12);
            assert_relative_eq!(x.weight, y.weight, max_relative = 1e-12);
        }
    }

    #[test]
    fn weight_sum_rules() {
        assert_relative_eq!(candidate_weight(&[0.2]), 0.2);
        assert_relative_eq!(candidate_weight(&[0.2, 0.3]), 0.5);
        let n = 7;
        let f = 0.11;
        assert_relative_eq!(candidate_weight(&vec![f; n]), n as f64 * f, max_relative = 1e-12);
    }

    fn cand(p: Vec3, w: f64) -> PositionCandidate {
        PositionCandidate {
            position: p,
            weight: w,
            rt: RtOutputs {
                ray_count: 2,
                reflection_counts: vec![0, 0],
                rrus: vec![0, 1],
                los_flag: true,
                min_mutual_distance: 0.1,
            },
        }
    }

    #[test]
    fn expected_position_weighted_mean() {
        let single = [cand(Vec3::new(3.0, -1.0, 2.0), 0.4)];
        assert!(expected_position(&single).unwrap().distance(single[0].position) < 1e-12);

        let pair = [cand(Vec3::ZERO, 1.0), cand(Vec3::new(2.0, 0.0, 0.0), 1.0)];
        assert!(expected_position(&pair).unwrap().distance(Vec3::new(1.0, 0.0, 0.0)) < 1e-12);

        let weighted = [cand(Vec3::ZERO, 3.0), cand(Vec3::new(2.0, 0.0, 0.0), 1.0)];
        assert!(
            expected_position(&weighted)
                .unwrap()
                .distance(Vec3::new(0.5, 0.0, 0.0))
                < 1e-12
        );
    }

    #[test]
    fn expected_position_errors() {
        assert_eq!(expected_position(&[]).unwrap_err(), Error::NoPosition);
        let zero = [cand(Vec3::ZERO, 0.0)];
        assert_eq!(expected_position(&zero).unwrap_err(), Error::NoPosition);
    }

    #[test]
    fn expected_position_scale_invariant() {
        let cands = [
            cand(Vec3::new(1.0, 2.0, 0.0), 0.3),
            cand(Vec3::new(-2.0, 1.0, 1.0), 0.9),
            cand(Vec3::new(0.5, -1.0, 0.5), 0.1),
        ];
        let scaled: Vec<PositionCandidate> = cands
            .iter()
            .map(|c| cand(c.position, c.weight * 77.7))
            .collect();
        let a = expected_position(&cands).unwrap();
        let b = expected_position(&scaled).unwrap();
        assert!(a.distance(b) < 1e-12);
    }

    #[test]
    fn filter_policies() {
        let mut single = cand(Vec3::ZERO, 1.0);
        single.rt.ray_count = 1;
        let mut bouncy = cand(Vec3::new(1.0, 0.0, 0.0), 1.0);
        bouncy.rt.reflection_counts = vec![3, 0];
        bouncy.rt.los_flag = false;
        let pair = cand(Vec3::new(2.0, 0.0, 0.0), 1.0);
        let all = vec![single, bouncy, pair];

        let identity = filter_candidates(
            all.clone(),
            &FilterPolicy {
                min_ray_count: 1,
                ..Default::default()
            },
        );
        assert_eq!(identity.len(), 3);

        let pairwise = filter_candidates(
            all.clone(),
            &FilterPolicy {
                min_ray_count: 2,
                ..Default::default()
            },
        );
        assert_eq!(pairwise.len(), 2);

        let low_bounce = filter_candidates(
            all,
            &FilterPolicy {
                min_ray_count: 0,
                max_reflections: Some(2),
                require_los: None,
            },
        );
        assert_eq!(low_bounce.len(), 2);
    }

    #[test]
    fn miss_detection_variance() {
        let tight = [cand(Vec3::ZERO, 1.0), cand(Vec3::new(0.3, 0.0, 0.0), 1.0)];
        assert!(!detect_miss(&tight, &MissConfig { epsilon0: 25.0 }));

        // Two equal-weight candidates 100 m apart: variance is 50^2 = 2500.
        let split = [cand(Vec3::ZERO, 1.0), cand(Vec3::new(100.0, 0.0, 0.0), 1.0)];
        assert_relative_eq!(candidate_variance(&split), 2500.0, max_relative = 1e-12);
        assert!(detect_miss(&split, &MissConfig { epsilon0: 25.0 }));

        let identical = vec![cand(Vec3::new(5.0, 5.0, 1.0), 2.0); 3];
        assert_eq!(candidate_variance(&identical), 0.0);
        assert!(!detect_miss(&identical, &MissConfig { epsilon0: 25.0 }));

        assert!(detect_miss(&[], &MissConfig::default()));
    }
}
