//! Controlled map perturbation for the inaccuracy study: whole buildings are
//! rigidly shifted by Gaussian horizontal offsets and material coefficients
//! are scaled by uniform multiplicative draws.

use super::format::{bundle_from_doc, doc_from_str, doc_to_string};
use super::{ObjectKind, SceneModel};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::rng::derive_rng;
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

/// How much the map handed to the central unit deviates from the true one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    /// Standard deviation of the per-building horizontal shift, meters.
    pub wall_position_sigma: f64,
    /// Lower bound of the multiplicative material-coefficient scale.
    pub transmission_scale_low: f64,
    /// Upper bound of the multiplicative material-coefficient scale.
    pub transmission_scale_high: f64,
    pub rng_seed: u64,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        PerturbationSpec {
            wall_position_sigma: 0.0,
            transmission_scale_low: 1.0,
            transmission_scale_high: 1.0,
            rng_seed: 0,
        }
    }
}

impl PerturbationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.wall_position_sigma < 0.0 {
            return Err(Error::Invalid("wall_position_sigma must be >= 0".into()));
        }
        if !(self.transmission_scale_low > 0.0
            && self.transmission_scale_low <= self.transmission_scale_high)
        {
            return Err(Error::Invalid(
                "transmission scale bounds must satisfy 0 < low <= high".into(),
            ));
        }
        Ok(())
    }

    fn is_identity(&self) -> bool {
        self.wall_position_sigma == 0.0
            && self.transmission_scale_low == 1.0
            && self.transmission_scale_high == 1.0
    }
}

/// The draws behind one perturbation: building offsets, then per-material
/// (refractive, scattering) scale pairs, in table order. Shared between the
/// model-level and file-level perturbation paths so both agree exactly.
pub(crate) struct PerturbationDraws {
    pub offsets: Vec<(f64, f64)>,
    pub material_scales: Vec<(f64, f64)>,
}

pub(crate) fn perturbation_draws(
    spec: &PerturbationSpec,
    n_buildings: usize,
    n_materials: usize,
) -> PerturbationDraws {
    let mut rng = derive_rng(spec.rng_seed, &[0x7065_7274]);
    let offsets = if spec.wall_position_sigma > 0.0 {
        let normal = Normal::new(0.0, spec.wall_position_sigma).expect("sigma validated");
        (0..n_buildings)
            .map(|_| (normal.sample(&mut rng), normal.sample(&mut rng)))
            .collect()
    } else {
        // Burn the same number of draws so material scales do not depend on
        // whether position noise is enabled.
        for _ in 0..2 * n_buildings {
            let _: f64 = rng.gen();
        }
        vec![(0.0, 0.0); n_buildings]
    };
    let material_scales = if spec.transmission_scale_low < spec.transmission_scale_high {
        let uniform = Uniform::new_inclusive(spec.transmission_scale_low, spec.transmission_scale_high);
        (0..n_materials)
            .map(|_| (uniform.sample(&mut rng), uniform.sample(&mut rng)))
            .collect()
    } else {
        vec![
            (spec.transmission_scale_low, spec.transmission_scale_low);
            n_materials
        ]
    };
    PerturbationDraws {
        offsets,
        material_scales,
    }
}

/// Returns a perturbed copy of the scene; the original is untouched.
///
/// Each building is translated rigidly in the horizontal plane, each
/// material's refractive index and scattering amplitude are scaled by
/// independent uniform draws (clamped back into their valid ranges).
/// Deterministic for a fixed `rng_seed`; the identity spec returns a
/// bit-identical scene.
pub fn perturb_scene(scene: &SceneModel, spec: &PerturbationSpec) -> Result<SceneModel> {
    spec.validate()?;
    if spec.is_identity() {
        return Ok(scene.clone());
    }

    let n_buildings = scene
        .objects()
        .iter()
        .filter(|o| matches!(o.kind, ObjectKind::Building { .. }))
        .count();
    let draws = perturbation_draws(spec, n_buildings, scene.materials().len());

    let mut triangles = scene.triangles().to_vec();
    let mut building_seq = 0usize;
    for obj in scene.objects() {
        if let ObjectKind::Building { .. } = obj.kind {
            let (dx, dy) = draws.offsets[building_seq];
            building_seq += 1;
            let offset = Vec3::new(dx, dy, 0.0);
            for t in &mut triangles[obj.triangle_range.clone()] {
                *t = t.translated(offset);
            }
        }
    }

    let mut materials = scene.materials().to_vec();
    for (m, (sn, ss)) in materials.iter_mut().zip(&draws.material_scales) {
        m.refractive_index = (m.refractive_index * sn).max(1.0);
        m.scattering_amplitude = (m.scattering_amplitude * ss).clamp(0.0, 1.0);
    }

    // Rebuild object boxes for the moved spans; topology is unchanged.
    let mut objects = scene.objects().to_vec();
    for obj in &mut objects {
        let mut aabb = crate::geometry::Aabb::empty();
        for t in &triangles[obj.triangle_range.clone()] {
            aabb.grow(t.v0);
            aabb.grow(t.v1);
            aabb.grow(t.v2);
        }
        obj.aabb = aabb;
    }

    SceneModel::new(triangles, materials, objects)
}

/// File-level perturbation: applies the same draws to the raw document so the
/// emitted file reloads to exactly the scene `perturb_scene` would produce.
pub fn perturb_scene_file(text: &str, spec: &PerturbationSpec) -> Result<String> {
    spec.validate()?;
    let mut doc = doc_from_str(text)?;
    // Validate before perturbing so errors mention the pristine file.
    bundle_from_doc(&doc)?;

    let draws = perturbation_draws(spec, doc.buildings.len(), doc.materials.len());
    for (b, (dx, dy)) in doc.buildings.iter_mut().zip(&draws.offsets) {
        if let Some(fp) = &mut b.footprint {
            for p in fp.iter_mut() {
                p[0] += dx;
                p[1] += dy;
            }
        }
        if let Some(tris) = &mut b.triangles {
            for t in tris.iter_mut() {
                for v in 0..3 {
                    t[3 * v] += dx;
                    t[3 * v + 1] += dy;
                }
            }
        }
    }
    for (m, (sn, ss)) in doc.materials.iter_mut().zip(&draws.material_scales) {
        m.refractive_index = (m.refractive_index * sn).max(1.0);
        m.scattering_amplitude = (m.scattering_amplitude * ss).clamp(0.0, 1.0);
    }
    doc_to_string(&doc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::SceneBuilder;

    fn scene() -> SceneModel {
        SceneBuilder::new()
            .material("concrete", 2.4, 0.4, 4.0)
            .material("brick", 2.0, 0.3, 4.0)
            .ground((-100.0, -100.0), (100.0, 100.0), 0)
            .building(&[(0.0, 10.0), (20.0, 10.0), (20.0, 30.0), (0.0, 30.0)], 15.0, 0)
            .building(&[(-40.0, -30.0), (-20.0, -30.0), (-20.0, -10.0), (-40.0, -10.0)], 20.0, 1)
            .build()
            .unwrap()
    }

    #[test]
    fn identity_spec_is_noop() {
        let s = scene();
        let p = perturb_scene(&s, &PerturbationSpec::default()).unwrap();
        for (a, b) in s.triangles().iter().zip(p.triangles()) {
            assert_eq!(a.v0, b.v0);
            assert_eq!(a.v1, b.v1);
            assert_eq!(a.v2, b.v2);
        }
        assert_eq!(s.materials(), p.materials());
    }

    #[test]
    fn deterministic_under_seed() {
        let s = scene();
        let spec = PerturbationSpec {
            wall_position_sigma: 1.0,
            rng_seed: 42,
            ..Default::default()
        };
        let a = perturb_scene(&s, &spec).unwrap();
        let b = perturb_scene(&s, &spec).unwrap();
        for (ta, tb) in a.triangles().iter().zip(b.triangles()) {
            assert_eq!(ta.v0, tb.v0);
        }
        // And it actually moved something.
        let moved = a
            .triangles()
            .iter()
            .zip(s.triangles())
            .any(|(ta, ts)| ta.v0 != ts.v0);
        assert!(moved);
    }

    #[test]
    fn ground_never_moves_and_counts_preserved() {
        let s = scene();
        let spec = PerturbationSpec {
            wall_position_sigma: 2.0,
            transmission_scale_low: 0.5,
            transmission_scale_high: 2.0,
            rng_seed: 7,
        };
        let p = perturb_scene(&s, &spec).unwrap();
        assert_eq!(s.triangles().len(), p.triangles().len());
        for (a, b) in s.triangles()[0..2].iter().zip(&p.triangles()[0..2]) {
            assert_eq!(a.v0, b.v0);
        }
    }

    #[test]
    fn scale_bounds_respected() {
        let s = scene();
        let spec = PerturbationSpec {
            transmission_scale_low: 0.5,
            transmission_scale_high: 2.0,
            rng_seed: 3,
            ..Default::default()
        };
        let p = perturb_scene(&s, &spec).unwrap();
        for (orig, new) in s.materials().iter().zip(p.materials()) {
            let lo = (orig.refractive_index * 0.5).max(1.0);
            let hi = orig.refractive_index * 2.0;
            assert!(new.refractive_index >= lo - 1e-12 && new.refractive_index <= hi + 1e-12);
            assert!(new.scattering_amplitude <= (orig.scattering_amplitude * 2.0).min(1.0) + 1e-12);
            assert!(new.scattering_amplitude >= orig.scattering_amplitude * 0.5 - 1e-12);
        }
    }

    #[test]
    fn building_shift_is_rigid() {
        let s = scene();
        let spec = PerturbationSpec {
            wall_position_sigma: 1.5,
            rng_seed: 11,
            ..Default::default()
        };
        let p = perturb_scene(&s, &spec).unwrap();
        for orig in s.objects() {
            if let ObjectKind::Building { .. } = orig.kind {
                let r = orig.triangle_range.clone();
                let d0 = p.triangles()[r.start].v0 - s.triangles()[r.start].v0;
                for (a, b) in s.triangles()[r.clone()].iter().zip(&p.triangles()[r]) {
                    let d = b.v0 - a.v0;
                    assert!((d - d0).norm() < 1e-12);
                    assert_eq!(d.z, 0.0);
                }
            }
        }
    }
}
