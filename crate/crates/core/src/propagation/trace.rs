//! Shooting-and-bouncing-rays tracer with exact geometric correction.
//!
//! Specular chains are discovered by launching a Fibonacci-sphere direction
//! set and testing a capture sphere around the receiver on every segment.
//! Each discovered chain (sequence of reflecting triangles) is then solved
//! exactly with the image method and validated for visibility, so reported
//! path lengths and angles carry no launch-discretization error and
//! reciprocity holds to floating-point accuracy.

use super::physics::{
    diffraction_loss_db, diffraction_v, free_space_field, reflection_amplitude, scattering_gain,
    DiffractionGeometry, SPEED_OF_LIGHT,
};
use super::{Interaction, InteractionKind, PathComponent, TraceConfig};
use crate::geometry::{point_segment_closest, ray_aabb_intersect, Aabb, Ray, Triangle, Vec3};
use crate::scene::SceneModel;
use rayon::prelude::*;
use std::collections::BTreeMap;

/// Endpoint slack for visibility checks along solved paths, meters.
const VIS_MARGIN: f64 = 1e-2;

/// Traces all propagation paths from `tx` to `rx` through the scene.
///
/// Returns the line-of-sight path when unoccluded, specular reflection
/// paths up to `max_reflections` bounces, and (when enabled) single-lobe
/// scattered paths and single-edge knife-edge diffraction paths. The list
/// is sorted by (path_length, interaction count) and pruned at
/// `min_path_gain_db`.
pub fn trace_paths(
    scene: &SceneModel,
    tx: Vec3,
    rx: Vec3,
    cfg: &TraceConfig,
) -> Vec<PathComponent> {
    let lambda = cfg.lambda();
    let bounds = scene.trace_bounds(&[tx, rx]);
    let mut paths: Vec<PathComponent> = Vec::new();

    let los_clear = scene.segment_clear(tx, rx, 1e-3);
    if los_clear {
        if let Some(p) = line_of_sight_path(tx, rx, lambda) {
            paths.push(p);
        }
    }

    for chain in discover_chains(scene, tx, rx, cfg, &bounds) {
        if let Some(p) = solve_specular_chain(scene, tx, rx, &chain, lambda) {
            paths.push(p);
        }
    }

    if cfg.enable_scattering {
        paths.extend(scattered_paths(scene, tx, rx, cfg, lambda));
    }

    if cfg.enable_diffraction && !los_clear {
        paths.extend(diffraction_paths(scene, tx, rx, lambda));
    }

    paths.retain(|p| p.gain_db() >= cfg.min_path_gain_db);
    paths.sort_by(|a, b| {
        a.path_length
            .partial_cmp(&b.path_length)
            .unwrap()
            .then(a.interactions.len().cmp(&b.interactions.len()))
            .then(a.aoa_azimuth.partial_cmp(&b.aoa_azimuth).unwrap())
    });
    paths
}

fn line_of_sight_path(tx: Vec3, rx: Vec3, lambda: f64) -> Option<PathComponent> {
    let d = rx - tx;
    let len = d.norm();
    if len <= 0.0 {
        return None;
    }
    let gain = free_space_field(len, lambda).ok()?;
    let u = d / len;
    Some(PathComponent {
        complex_gain: gain,
        delay: len / SPEED_OF_LIGHT,
        aoa_azimuth: (-u).azimuth(),
        aoa_elevation: (-u).elevation(),
        aod_azimuth: u.azimuth(),
        aod_elevation: u.elevation(),
        interactions: Vec::new(),
        path_length: len,
        is_los: true,
    })
}

/// Evenly distributed unit directions (golden-angle spiral).
pub fn fibonacci_sphere(count: usize) -> impl Iterator<Item = Vec3> {
    let golden_angle = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
    (0..count).map(move |i| {
        let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
        let r = (1.0 - z * z).max(0.0).sqrt();
        let phi = golden_angle * i as f64;
        Vec3::new(r * phi.cos(), r * phi.sin(), z)
    })
}

/// Launches the direction set and returns the distinct reflecting-triangle
/// chains whose bounced rays passed within the capture sphere of `rx`,
/// keeping (per chain) the ray with the smallest miss distance.
fn discover_chains(
    scene: &SceneModel,
    tx: Vec3,
    rx: Vec3,
    cfg: &TraceConfig,
    bounds: &Aabb,
) -> Vec<Vec<usize>> {
    let step = cfg.angular_step();
    let dirs: Vec<Vec3> = fibonacci_sphere(cfg.ray_count).collect();

    let per_ray: Vec<Vec<(Vec<usize>, f64)>> = dirs
        .par_iter()
        .map(|&dir0| {
            let mut found: Vec<(Vec<usize>, f64)> = Vec::new();
            let mut origin = tx;
            let mut dir = dir0;
            let mut acc = 0.0;
            let mut chain: Vec<usize> = Vec::new();
            for bounce in 0..=cfg.max_reflections {
                let ray = Ray::new(origin, dir);
                let hit = scene.nearest_hit(&ray);
                let t_end = match &hit {
                    Some(h) => h.t,
                    None => match ray_aabb_intersect(&ray, bounds) {
                        Some((_, t_far)) => t_far,
                        None => break,
                    },
                };
                if !chain.is_empty() {
                    let seg_end = origin + dir * t_end;
                    let (dist, t_frac) = point_segment_closest(rx, origin, seg_end);
                    let unfolded = acc + t_frac * t_end;
                    let r_cap = cfg.capture_radius_coefficient * unfolded.max(1.0) * step;
                    if dist < r_cap {
                        found.push((chain.clone(), dist));
                    }
                }
                let h = match hit {
                    Some(h) if bounce < cfg.max_reflections => h,
                    _ => break,
                };
                let tri = &scene.triangles()[h.triangle];
                let mut n = tri.normal;
                if dir.dot(n) > 0.0 {
                    n = -n;
                }
                chain.push(h.triangle);
                acc += h.t;
                origin = h.point;
                dir = dir.reflect(n);
            }
            found
        })
        .collect();

    // Merge in launch order so dedup ties are deterministic.
    let mut best: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    for found in per_ray {
        for (chain, miss) in found {
            best.entry(chain)
                .and_modify(|m| {
                    if miss < *m {
                        *m = miss;
                    }
                })
                .or_insert(miss);
        }
    }
    best.into_keys().collect()
}

fn mirror_point(p: Vec3, plane_point: Vec3, normal: Vec3) -> Vec3 {
    p - normal * (2.0 * (p - plane_point).dot(normal))
}

/// Barycentric inside-test against a triangle, with a small edge tolerance.
fn point_in_triangle(p: Vec3, tri: &Triangle) -> bool {
    let e1 = tri.v1 - tri.v0;
    let e2 = tri.v2 - tri.v0;
    let s = p - tri.v0;
    let d11 = e1.dot(e1);
    let d12 = e1.dot(e2);
    let d22 = e2.dot(e2);
    let s1 = s.dot(e1);
    let s2 = s.dot(e2);
    let det = d11 * d22 - d12 * d12;
    if det.abs() < 1e-30 {
        return false;
    }
    let u = (d22 * s1 - d12 * s2) / det;
    let v = (d11 * s2 - d12 * s1) / det;
    let tol = 1e-9;
    u >= -tol && v >= -tol && u + v <= 1.0 + tol
}

/// Solves one reflecting chain exactly via successive images of `tx`;
/// validates reflection points and inter-segment visibility.
fn solve_specular_chain(
    scene: &SceneModel,
    tx: Vec3,
    rx: Vec3,
    chain: &[usize],
    lambda: f64,
) -> Option<PathComponent> {
    let tris: Vec<&Triangle> = chain.iter().map(|&i| &scene.triangles()[i]).collect();

    let mut images = Vec::with_capacity(chain.len());
    let mut img = tx;
    for tri in &tris {
        img = mirror_point(img, tri.v0, tri.normal);
        images.push(img);
    }

    // Walk backwards from the receiver to place the reflection points.
    let mut points = vec![Vec3::ZERO; chain.len()];
    let mut target = rx;
    for k in (0..chain.len()).rev() {
        let tri = tris[k];
        let seg = target - images[k];
        let denom = seg.dot(tri.normal);
        if denom.abs() < 1e-12 {
            return None;
        }
        let t = (tri.v0 - images[k]).dot(tri.normal) / denom;
        if !(1e-9..=1.0 - 1e-9).contains(&t) {
            return None;
        }
        let x = images[k] + seg * t;
        if !point_in_triangle(x, tri) {
            return None;
        }
        points[k] = x;
        target = x;
    }

    // Visibility along every sub-segment.
    let mut vertices = Vec::with_capacity(chain.len() + 2);
    vertices.push(tx);
    vertices.extend_from_slice(&points);
    vertices.push(rx);
    for w in vertices.windows(2) {
        if !scene.segment_clear(w[0], w[1], VIS_MARGIN) {
            return None;
        }
    }

    let mut total_len = 0.0;
    let mut amplitude = 1.0;
    let mut interactions = Vec::with_capacity(chain.len());
    for (k, tri) in tris.iter().enumerate() {
        let incoming = (points[k] - vertices[k]).normalized();
        let cos_i = incoming.dot(tri.normal).abs().clamp(0.0, 1.0);
        let theta_i = cos_i.acos().min(std::f64::consts::FRAC_PI_2 - 1e-9);
        let material = scene.material(tri.material_id);
        amplitude *= reflection_amplitude(material, theta_i).ok()?;
        interactions.push(Interaction {
            kind: InteractionKind::Reflection,
            point: points[k],
            material_id: tri.material_id,
        });
    }
    for w in vertices.windows(2) {
        total_len += w[0].distance(w[1]);
    }
    debug_assert!(
        (total_len - images.last().unwrap().distance(rx)).abs() < 1e-6 * total_len.max(1.0),
        "image distance mismatch"
    );

    let gain = free_space_field(total_len, lambda).ok()? * amplitude;
    let u_arrive = (points[chain.len() - 1] - rx).normalized();
    let u_depart = (points[0] - tx).normalized();
    Some(PathComponent {
        complex_gain: gain,
        delay: total_len / SPEED_OF_LIGHT,
        aoa_azimuth: u_arrive.azimuth(),
        aoa_elevation: u_arrive.elevation(),
        aod_azimuth: u_depart.azimuth(),
        aod_elevation: u_depart.elevation(),
        interactions,
        path_length: total_len,
        is_los: false,
    })
}

/// Subdivides a triangle until its longest edge is below `tile` and yields
/// the sub-triangle centroids.
fn tile_centroids(v0: Vec3, v1: Vec3, v2: Vec3, tile: f64, out: &mut Vec<Vec3>) {
    let e = (v0.distance(v1)).max(v1.distance(v2)).max(v2.distance(v0));
    if e <= tile {
        out.push((v0 + v1 + v2) / 3.0);
        return;
    }
    let m01 = (v0 + v1) * 0.5;
    let m12 = (v1 + v2) * 0.5;
    let m20 = (v2 + v0) * 0.5;
    tile_centroids(v0, m01, m20, tile, out);
    tile_centroids(m01, v1, m12, tile, out);
    tile_centroids(m20, m12, v2, tile, out);
    tile_centroids(m01, m12, m20, tile, out);
}

/// One scattered sub-path per illuminated wall tile, with the single-lobe
/// directive gain toward the receiver.
fn scattered_paths(
    scene: &SceneModel,
    tx: Vec3,
    rx: Vec3,
    cfg: &TraceConfig,
    lambda: f64,
) -> Vec<PathComponent> {
    use crate::scene::ObjectKind;
    let mut out = Vec::new();
    for obj in scene.objects() {
        if obj.kind == ObjectKind::Ground {
            continue;
        }
        for ti in obj.triangle_range.clone() {
            let tri = &scene.triangles()[ti];
            let mut tiles = Vec::new();
            tile_centroids(tri.v0, tri.v1, tri.v2, cfg.scattering_tile_size, &mut tiles);
            for p in tiles {
                let to_tx = tx - p;
                let to_rx = rx - p;
                let side_tx = to_tx.dot(tri.normal);
                let side_rx = to_rx.dot(tri.normal);
                if side_tx.abs() < 1e-9 || side_rx.abs() < 1e-9 || side_tx.signum() != side_rx.signum()
                {
                    continue;
                }
                let r1 = to_tx.norm();
                let r2 = to_rx.norm();
                if r1 < 0.5 || r2 < 0.5 {
                    continue;
                }
                if !scene.segment_clear(tx, p, VIS_MARGIN) || !scene.segment_clear(p, rx, VIS_MARGIN)
                {
                    continue;
                }
                let mut n = tri.normal;
                if side_tx < 0.0 {
                    n = -n;
                }
                let incident = (p - tx) / r1;
                let specular = incident.reflect(n);
                let cos_psi = specular.dot(to_rx / r2).clamp(-1.0, 1.0);
                let psi = cos_psi.acos();
                let material = scene.material(tri.material_id);
                let amp = scattering_gain(psi, material).sqrt();
                if amp <= 0.0 {
                    continue;
                }
                let total = r1 + r2;
                let gain = match free_space_field(total, lambda) {
                    Ok(g) => g * amp,
                    Err(_) => continue,
                };
                let u_arrive = (p - rx) / r2.max(1e-12);
                let u_depart = (p - tx) / r1.max(1e-12);
                out.push(PathComponent {
                    complex_gain: gain,
                    delay: total / SPEED_OF_LIGHT,
                    aoa_azimuth: u_arrive.azimuth(),
                    aoa_elevation: u_arrive.elevation(),
                    aod_azimuth: u_depart.azimuth(),
                    aod_elevation: u_depart.elevation(),
                    interactions: vec![Interaction {
                        kind: InteractionKind::Scattering,
                        point: p,
                        material_id: tri.material_id,
                    }],
                    path_length: total,
                    is_los: false,
                });
            }
        }
    }
    out
}

/// Single-edge knife-edge diffraction paths, generated only when the direct
/// segment is blocked.
fn diffraction_paths(scene: &SceneModel, tx: Vec3, rx: Vec3, lambda: f64) -> Vec<PathComponent> {
    let mut out = Vec::new();
    let near = scene.grid().query_segment(tx, rx, 60.0);

    for edge in scene.diffraction_edges() {
        if !near.contains(&(edge.object as u32)) {
            continue;
        }
        // Fermat point on the edge: minimize |tx - q| + |q - rx| (convex in s).
        let f = |s: f64| {
            let q = edge.a + (edge.b - edge.a) * s;
            tx.distance(q) + q.distance(rx)
        };
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..64 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if f(m1) <= f(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        let s = 0.5 * (lo + hi);
        let q = edge.a + (edge.b - edge.a) * s;
        let d1 = tx.distance(q);
        let d2 = q.distance(rx);
        if d1 < 0.5 || d2 < 0.5 {
            continue;
        }
        if !scene.segment_clear(tx, q, VIS_MARGIN) || !scene.segment_clear(q, rx, VIS_MARGIN) {
            continue;
        }
        // Clearance of the edge point over the direct line; the direct
        // segment is blocked here, so the knife edge protrudes (h > 0).
        let (h, _) = point_segment_closest(q, tx, rx);
        let geom = match DiffractionGeometry::new(h, d1, d2, lambda) {
            Ok(g) => g,
            Err(_) => continue,
        };
        let v = diffraction_v(&geom);
        let loss_db = diffraction_loss_db(v);
        let amp = 10f64.powf(-loss_db / 20.0);
        let total = d1 + d2;
        let gain = match free_space_field(total, lambda) {
            Ok(g) => g * amp,
            Err(_) => continue,
        };
        let u_arrive = (q - rx) / d2;
        let u_depart = (q - tx) / d1;
        out.push(PathComponent {
            complex_gain: gain,
            delay: total / SPEED_OF_LIGHT,
            aoa_azimuth: u_arrive.azimuth(),
            aoa_elevation: u_arrive.elevation(),
            aod_azimuth: u_depart.azimuth(),
            aod_elevation: u_depart.elevation(),
            interactions: vec![Interaction {
                kind: InteractionKind::Diffraction,
                point: q,
                material_id: edge.material_id,
            }],
            path_length: total,
            is_los: false,
        });
    }
    out
}

/// Geometric specular walk used by the central unit's ray search: reflects
/// at each wall hit up to `max_reflections` and ends at the final surface
/// hit or at the scene boundary. Returns the polyline vertices.
pub fn specular_polyline(
    scene: &SceneModel,
    origin: Vec3,
    direction: Vec3,
    max_reflections: usize,
    bounds: &Aabb,
) -> Vec<Vec3> {
    let mut vertices = vec![origin];
    let mut o = origin;
    let mut dir = direction.normalized();
    for bounce in 0..=max_reflections {
        let ray = Ray::new(o, dir);
        match scene.nearest_hit(&ray) {
            Some(h) => {
                vertices.push(h.point);
                if bounce == max_reflections {
                    break;
                }
                let tri = &scene.triangles()[h.triangle];
                let mut n = tri.normal;
                if dir.dot(n) > 0.0 {
                    n = -n;
                }
                dir = dir.reflect(n);
                o = h.point;
            }
            None => {
                let t_exit = ray_aabb_intersect(&ray, bounds)
                    .map(|(_, t_far)| t_far)
                    .unwrap_or(1000.0);
                vertices.push(o + dir * t_exit.max(1.0));
                break;
            }
        }
    }
    vertices
}
