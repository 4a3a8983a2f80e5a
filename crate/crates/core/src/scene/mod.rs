//! Scene description: buildings, ground, materials, RRU and UE placements,
//! plus controlled map perturbation for inaccuracy studies.
//!
//! Scenes are loaded from a structured text file (see `docs/scene_format.md`)
//! and are immutable afterwards; perturbation produces a new scene value.

mod format;
mod perturb;

pub use format::{expected_triangle_count, load_scene, load_scene_str, SceneBundle};
pub use perturb::{perturb_scene, perturb_scene_file, PerturbationSpec};

use crate::error::{Error, Result};
use crate::geometry::{build_bvh, nearest_hit, Aabb, BvhTree, Ray, SceneHit, SpatialGrid, Triangle, Vec3};

/// Electrical surface properties used by reflection and scattering.
#[derive(Debug, Clone, PartialEq)]
pub struct Material {
    pub name: String,
    /// Refractive index n (>= 1).
    pub refractive_index: f64,
    /// Scattering amplitude scale factor E_S0 in [0, 1].
    pub scattering_amplitude: f64,
    /// Directive-lobe exponent alpha_R (> 0).
    pub scattering_exponent: f64,
}

impl Material {
    pub fn validate(&self) -> Result<()> {
        if self.refractive_index < 1.0 {
            return Err(Error::Invalid(format!(
                "material '{}': refractive_index {} < 1",
                self.name, self.refractive_index
            )));
        }
        if !(0.0..=1.0).contains(&self.scattering_amplitude) {
            return Err(Error::Invalid(format!(
                "material '{}': scattering_amplitude {} outside [0, 1]",
                self.name, self.scattering_amplitude
            )));
        }
        if self.scattering_exponent <= 0.0 {
            return Err(Error::Invalid(format!(
                "material '{}': scattering_exponent {} <= 0",
                self.name, self.scattering_exponent
            )));
        }
        Ok(())
    }
}

/// What a contiguous triangle range represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectKind {
    Ground,
    Building { index: usize },
}

/// A named span of triangles within the scene triangle list.
#[derive(Debug, Clone)]
pub struct SceneObject {
    pub kind: ObjectKind,
    pub triangle_range: std::ops::Range<usize>,
    pub aabb: Aabb,
}

/// An edge of the mesh that can diffract: shared by two faces meeting at a
/// significant dihedral angle (roof rims, vertical building corners).
#[derive(Debug, Clone, Copy)]
pub struct DiffractionEdge {
    pub a: Vec3,
    pub b: Vec3,
    pub material_id: u32,
    /// Building object index owning the edge.
    pub object: usize,
}

/// Immutable scene geometry with its acceleration structures.
#[derive(Debug, Clone)]
pub struct SceneModel {
    triangles: Vec<Triangle>,
    materials: Vec<Material>,
    objects: Vec<SceneObject>,
    bounds: Aabb,
    bvh: BvhTree,
    grid: SpatialGrid,
    edges: Vec<DiffractionEdge>,
}

impl SceneModel {
    /// Assembles a scene from object spans; enforces the type invariants
    /// (materials referenced exist, ground plane present at z = 0).
    pub fn new(
        triangles: Vec<Triangle>,
        materials: Vec<Material>,
        objects: Vec<SceneObject>,
    ) -> Result<SceneModel> {
        for m in &materials {
            m.validate()?;
        }
        for t in &triangles {
            if t.material_id as usize >= materials.len() {
                return Err(Error::UnknownId(format!(
                    "triangle references material index {} of {}",
                    t.material_id,
                    materials.len()
                )));
            }
        }
        let has_ground = objects.iter().any(|o| {
            o.kind == ObjectKind::Ground
                && triangles[o.triangle_range.clone()]
                    .iter()
                    .all(|t| t.v0.z.abs() < 1e-9 && t.v1.z.abs() < 1e-9 && t.v2.z.abs() < 1e-9)
        });
        if !has_ground {
            return Err(Error::Invalid("scene has no ground plane at z = 0".into()));
        }

        let mut bounds = Aabb::empty();
        for t in &triangles {
            bounds.grow(t.v0);
            bounds.grow(t.v1);
            bounds.grow(t.v2);
        }

        let mut grid = SpatialGrid::new(SpatialGrid::DEFAULT_CELL_SIZE, bounds.min_corner);
        for (i, o) in objects.iter().enumerate() {
            grid.insert(i as u32, &o.aabb);
        }

        let edges = extract_diffraction_edges(&triangles, &objects);
        let bvh = build_bvh(triangles.clone())?;

        Ok(SceneModel {
            triangles,
            materials,
            objects,
            bounds,
            bvh,
            grid,
            edges,
        })
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn materials(&self) -> &[Material] {
        &self.materials
    }

    pub fn material(&self, id: u32) -> &Material {
        &self.materials[id as usize]
    }

    pub fn objects(&self) -> &[SceneObject] {
        &self.objects
    }

    pub fn bounds(&self) -> Aabb {
        self.bounds
    }

    /// Scene bounds grown to cover the given stations and track points, with
    /// headroom; rays leaving this box are considered lost.
    pub fn trace_bounds(&self, extra: &[Vec3]) -> Aabb {
        let mut b = self.bounds;
        for &p in extra {
            b.grow(p);
        }
        b.inflated(1.0)
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn diffraction_edges(&self) -> &[DiffractionEdge] {
        &self.edges
    }

    /// Nearest triangle hit along the ray.
    pub fn nearest_hit(&self, ray: &Ray) -> Option<SceneHit> {
        nearest_hit(ray, &self.bvh)
    }

    /// True when the open segment between two points is free of geometry.
    /// Endpoints sitting on surfaces are excused by the `endpoint_margin`.
    pub fn segment_clear(&self, from: Vec3, to: Vec3, endpoint_margin: f64) -> bool {
        let d = to - from;
        let len = d.norm();
        if len <= 2.0 * endpoint_margin {
            return true;
        }
        let ray = Ray::new(from, d);
        match self.nearest_hit(&ray) {
            Some(hit) => hit.t >= len - endpoint_margin,
            None => true,
        }
    }
}

/// Faces meeting at less than this cosine of dihedral angle spawn a
/// diffraction edge (30 degrees).
const EDGE_DIHEDRAL_COS: f64 = 0.866;

fn quantize(v: Vec3) -> (i64, i64, i64) {
    // Vertices produced by extrusion share exact coordinates; quantizing at
    // 0.1 mm makes the pairing robust to serialization round-trips.
    (
        (v.x * 1e4).round() as i64,
        (v.y * 1e4).round() as i64,
        (v.z * 1e4).round() as i64,
    )
}

fn extract_diffraction_edges(
    triangles: &[Triangle],
    objects: &[SceneObject],
) -> Vec<DiffractionEdge> {
    use std::collections::HashMap;
    let mut edges: Vec<DiffractionEdge> = Vec::new();

    for (obj_index, obj) in objects.iter().enumerate() {
        if obj.kind == ObjectKind::Ground {
            continue;
        }
        let mut by_edge: HashMap<((i64, i64, i64), (i64, i64, i64)), Vec<usize>> = HashMap::new();
        for ti in obj.triangle_range.clone() {
            let t = &triangles[ti];
            for (a, b) in [(t.v0, t.v1), (t.v1, t.v2), (t.v2, t.v0)] {
                let (qa, qb) = (quantize(a), quantize(b));
                let key = if qa <= qb { (qa, qb) } else { (qb, qa) };
                by_edge.entry(key).or_default().push(ti);
            }
        }
        let mut keys: Vec<_> = by_edge.keys().copied().collect();
        keys.sort_unstable();
        for key in keys {
            let faces = &by_edge[&key];
            if faces.len() != 2 {
                continue;
            }
            let (na, nb) = (triangles[faces[0]].normal, triangles[faces[1]].normal);
            if na.dot(nb).abs() >= EDGE_DIHEDRAL_COS {
                continue; // near-coplanar pair, e.g. the two halves of a quad
            }
            let a = Vec3::new(key.0 .0 as f64 / 1e4, key.0 .1 as f64 / 1e4, key.0 .2 as f64 / 1e4);
            let b = Vec3::new(key.1 .0 as f64 / 1e4, key.1 .1 as f64 / 1e4, key.1 .2 as f64 / 1e4);
            if a.z < 1e-6 && b.z < 1e-6 {
                continue; // foot of a wall: no under-ground diffraction
            }
            edges.push(DiffractionEdge {
                a,
                b,
                material_id: triangles[faces[0]].material_id,
                object: obj_index,
            });
        }
    }
    edges
}

/// One RRU site: a rectangular antenna panel at a mast position.
#[derive(Debug, Clone, PartialEq)]
pub struct RruConfig {
    pub id: usize,
    pub position: Vec3,
    /// Panel rotation in the horizontal plane (radians).
    pub rotation_azimuth: f64,
    /// Downward mechanical tilt (radians), in [0, pi/2).
    pub tilt: f64,
    /// Vertical element count i_v.
    pub rows: usize,
    /// Horizontal element count i_h.
    pub cols: usize,
    /// Horizontal element spacing d_h (m).
    pub spacing_h: f64,
    /// Vertical element spacing d_v (m).
    pub spacing_v: f64,
}

impl RruConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rows < 1 || self.cols < 1 {
            return Err(Error::Invalid(format!(
                "rru {}: rows/cols must be >= 1",
                self.id
            )));
        }
        if self.spacing_h <= 0.0 || self.spacing_v <= 0.0 {
            return Err(Error::Invalid(format!(
                "rru {}: element spacings must be positive",
                self.id
            )));
        }
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&self.tilt) {
            return Err(Error::Invalid(format!(
                "rru {}: tilt {} outside [0, pi/2)",
                self.id, self.tilt
            )));
        }
        Ok(())
    }

    pub fn element_count(&self) -> usize {
        self.rows * self.cols
    }
}

/// A UE track: strictly increasing TTIs with positions inside the scene.
#[derive(Debug, Clone, PartialEq)]
pub struct UeTrajectory {
    pub id: usize,
    pub points: Vec<(u64, Vec3)>,
}

impl UeTrajectory {
    pub fn validate(&self, bounds: &Aabb) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::Invalid(format!("ue track {}: empty", self.id)));
        }
        for w in self.points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::Invalid(format!(
                    "ue track {}: tti {} not greater than {}",
                    self.id, w[1].0, w[0].0
                )));
            }
        }
        for (tti, p) in &self.points {
            if !bounds.contains(*p) {
                return Err(Error::Invalid(format!(
                    "ue track {}: position at tti {} outside scene bounds",
                    self.id, tti
                )));
            }
        }
        Ok(())
    }
}

/// Convenience builder used by tests and fixture authoring.
#[derive(Debug, Default)]
pub struct SceneBuilder {
    triangles: Vec<Triangle>,
    materials: Vec<Material>,
    objects: Vec<SceneObject>,
    buildings: usize,
}

impl SceneBuilder {
    pub fn new() -> SceneBuilder {
        SceneBuilder::default()
    }

    pub fn material(mut self, name: &str, n: f64, scatter: f64, alpha: f64) -> SceneBuilder {
        self.materials.push(Material {
            name: name.to_string(),
            refractive_index: n,
            scattering_amplitude: scatter,
            scattering_exponent: alpha,
        });
        self
    }

    /// Rectangular ground patch at z = 0 (two triangles).
    pub fn ground(mut self, min: (f64, f64), max: (f64, f64), material: u32) -> SceneBuilder {
        let start = self.triangles.len();
        let a = Vec3::new(min.0, min.1, 0.0);
        let b = Vec3::new(max.0, min.1, 0.0);
        let c = Vec3::new(max.0, max.1, 0.0);
        let d = Vec3::new(min.0, max.1, 0.0);
        self.triangles.push(Triangle::new(a, b, c, material).unwrap());
        self.triangles.push(Triangle::new(a, c, d, material).unwrap());
        let mut aabb = Aabb::empty();
        for t in &self.triangles[start..] {
            aabb.grow(t.v0);
            aabb.grow(t.v1);
            aabb.grow(t.v2);
        }
        self.objects.push(SceneObject {
            kind: ObjectKind::Ground,
            triangle_range: start..self.triangles.len(),
            aabb,
        });
        self
    }

    /// Extrudes a convex footprint polygon (counter-clockwise) to a prism of
    /// the given height: 2n wall triangles plus fan-triangulated roof and
    /// floor, 4n - 4 triangles total.
    pub fn building(mut self, footprint: &[(f64, f64)], height: f64, material: u32) -> SceneBuilder {
        let start = self.triangles.len();
        let n = footprint.len();
        assert!(n >= 3, "footprint needs at least 3 vertices");
        let base: Vec<Vec3> = footprint.iter().map(|&(x, y)| Vec3::new(x, y, 0.0)).collect();
        let top: Vec<Vec3> = footprint
            .iter()
            .map(|&(x, y)| Vec3::new(x, y, height))
            .collect();
        for i in 0..n {
            let j = (i + 1) % n;
            self.triangles
                .push(Triangle::new(base[i], base[j], top[j], material).unwrap());
            self.triangles
                .push(Triangle::new(base[i], top[j], top[i], material).unwrap());
        }
        for i in 1..n - 1 {
            self.triangles
                .push(Triangle::new(top[0], top[i], top[i + 1], material).unwrap());
            self.triangles
                .push(Triangle::new(base[0], base[i + 1], base[i], material).unwrap());
        }
        let mut aabb = Aabb::empty();
        for t in &self.triangles[start..] {
            aabb.grow(t.v0);
            aabb.grow(t.v1);
            aabb.grow(t.v2);
        }
        self.objects.push(SceneObject {
            kind: ObjectKind::Building { index: self.buildings },
            triangle_range: start..self.triangles.len(),
            aabb,
        });
        self.buildings += 1;
        self
    }

    /// A raw triangle mesh registered as a building.
    pub fn mesh(mut self, triangles: Vec<Triangle>, _material: u32) -> SceneBuilder {
        let start = self.triangles.len();
        self.triangles.extend(triangles);
        let mut aabb = Aabb::empty();
        for t in &self.triangles[start..] {
            aabb.grow(t.v0);
            aabb.grow(t.v1);
            aabb.grow(t.v2);
        }
        self.objects.push(SceneObject {
            kind: ObjectKind::Building { index: self.buildings },
            triangle_range: start..self.triangles.len(),
            aabb,
        });
        self.buildings += 1;
        self
    }

    pub fn build(self) -> Result<SceneModel> {
        SceneModel::new(self.triangles, self.materials, self.objects)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basic_scene() -> SceneModel {
        SceneBuilder::new()
            .material("concrete", 2.4, 0.4, 4.0)
            .ground((-100.0, -100.0), (100.0, 100.0), 0)
            .building(&[(0.0, 10.0), (20.0, 10.0), (20.0, 30.0), (0.0, 30.0)], 15.0, 0)
            .build()
            .unwrap()
    }

    #[test]
    fn box_building_is_twelve_triangles() {
        let scene = basic_scene();
        assert_eq!(scene.triangles().len(), 2 + 12);
        assert_eq!(scene.objects().len(), 2);
    }

    #[test]
    fn missing_ground_rejected() {
        let r = SceneBuilder::new()
            .material("concrete", 2.4, 0.4, 4.0)
            .building(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)], 5.0, 0)
            .build();
        assert!(r.is_err());
    }

    #[test]
    fn invalid_material_rejected() {
        let r = SceneBuilder::new()
            .material("weird", 0.5, 0.4, 4.0)
            .ground((-10.0, -10.0), (10.0, 10.0), 0)
            .build();
        assert!(r.is_err());
    }

    #[test]
    fn diffraction_edges_exclude_ground_and_wall_feet() {
        let scene = basic_scene();
        // Box: 4 roof rim edges + 4 vertical corners survive; the 4 edges at
        // z = 0 and all ground edges are excluded.
        assert_eq!(scene.diffraction_edges().len(), 8);
        for e in scene.diffraction_edges() {
            assert!(e.a.z > 0.0 || e.b.z > 0.0);
        }
    }

    #[test]
    fn segment_clear_sees_wall() {
        let scene = basic_scene();
        // Across the building: blocked.
        assert!(!scene.segment_clear(
            Vec3::new(10.0, -20.0, 2.0),
            Vec3::new(10.0, 50.0, 2.0),
            1e-3
        ));
        // Above the roof: clear.
        assert!(scene.segment_clear(
            Vec3::new(10.0, -20.0, 20.0),
            Vec3::new(10.0, 50.0, 20.0),
            1e-3
        ));
    }
}
