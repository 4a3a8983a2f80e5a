//! Scene file parsing and emission.
//!
//! The on-disk format is a TOML document with `materials`, `ground`,
//! `buildings`, `rrus`, and `ue_tracks` sections; angles are degrees in
//! files and radians internally. See `docs/scene_format.md` for the schema.

use super::{RruConfig, SceneBuilder, SceneModel, UeTrajectory};
use crate::error::{Error, Result};
use crate::geometry::{Triangle, Vec3};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Everything a scene file describes.
#[derive(Debug, Clone)]
pub struct SceneBundle {
    pub scene: SceneModel,
    pub rrus: Vec<RruConfig>,
    pub ue_tracks: Vec<UeTrajectory>,
    pub name: String,
}

impl SceneBundle {
    pub fn rru(&self, id: usize) -> Result<&RruConfig> {
        self.rrus
            .iter()
            .find(|r| r.id == id)
            .ok_or_else(|| Error::UnknownId(format!("rru {id}")))
    }

    pub fn track(&self, id: usize) -> Result<&UeTrajectory> {
        self.ue_tracks
            .iter()
            .find(|t| t.id == id)
            .ok_or_else(|| Error::UnknownId(format!("ue track {id}")))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct SceneDoc {
    #[serde(default)]
    pub name: Option<String>,
    pub ground: GroundDoc,
    #[serde(default)]
    pub materials: Vec<MaterialDoc>,
    #[serde(default)]
    pub buildings: Vec<BuildingDoc>,
    #[serde(default)]
    pub rrus: Vec<RruDoc>,
    #[serde(default)]
    pub ue_tracks: Vec<TrackDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct MaterialDoc {
    pub id: String,
    pub refractive_index: f64,
    #[serde(default = "default_scatter")]
    pub scattering_amplitude: f64,
    #[serde(default = "default_alpha")]
    pub alpha_r: f64,
}

fn default_scatter() -> f64 {
    0.4
}

fn default_alpha() -> f64 {
    4.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct GroundDoc {
    pub material: String,
    /// [[min_x, min_y], [max_x, max_y]] extent in meters.
    pub extent: [[f64; 2]; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct BuildingDoc {
    pub material: String,
    /// Convex footprint polygon; extruded from z = 0 to `height`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub footprint: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<f64>,
    /// Raw mesh alternative: flat list of triangles as nine coordinates each.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triangles: Option<Vec<[f64; 9]>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct RruDoc {
    pub id: usize,
    pub position: [f64; 3],
    pub azimuth_deg: f64,
    #[serde(default = "default_tilt")]
    pub tilt_deg: f64,
    #[serde(default = "default_rows")]
    pub rows: usize,
    #[serde(default = "default_cols")]
    pub cols: usize,
    pub spacing_h: f64,
    pub spacing_v: f64,
}

fn default_tilt() -> f64 {
    10.0
}

fn default_rows() -> usize {
    4
}

fn default_cols() -> usize {
    8
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct TrackDoc {
    pub id: usize,
    /// [tti, x, y, z] rows.
    pub points: Vec<[f64; 4]>,
}

/// Loads and validates a scene file.
pub fn load_scene(path: impl AsRef<Path>) -> Result<SceneBundle> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    load_scene_str(&text)
}

/// Loads a scene from TOML text.
pub fn load_scene_str(text: &str) -> Result<SceneBundle> {
    let doc: SceneDoc = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    bundle_from_doc(&doc)
}

pub(crate) fn bundle_from_doc(doc: &SceneDoc) -> Result<SceneBundle> {
    let mut builder = SceneBuilder::new();
    let mut material_index = std::collections::BTreeMap::new();
    for (i, m) in doc.materials.iter().enumerate() {
        if material_index.insert(m.id.clone(), i as u32).is_some() {
            return Err(Error::Invalid(format!("duplicate material id '{}'", m.id)));
        }
        builder = builder.material(&m.id, m.refractive_index, m.scattering_amplitude, m.alpha_r);
    }
    let lookup = |id: &str| -> Result<u32> {
        material_index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownId(format!("material '{id}'")))
    };

    let gm = lookup(&doc.ground.material)?;
    let [gmin, gmax] = doc.ground.extent;
    if gmin[0] >= gmax[0] || gmin[1] >= gmax[1] {
        return Err(Error::Invalid("ground extent is degenerate".into()));
    }
    builder = builder.ground((gmin[0], gmin[1]), (gmax[0], gmax[1]), gm);

    for (i, b) in doc.buildings.iter().enumerate() {
        let mat = lookup(&b.material)?;
        match (&b.footprint, b.height, &b.triangles) {
            (Some(fp), Some(h), None) => {
                if fp.len() < 3 {
                    return Err(Error::Invalid(format!(
                        "building {i}: footprint needs >= 3 vertices"
                    )));
                }
                if h <= 0.0 {
                    return Err(Error::Invalid(format!("building {i}: height must be > 0")));
                }
                let pts = normalize_ccw(fp);
                check_convex(&pts, i)?;
                builder = builder.building(&pts, h, mat);
            }
            (None, None, Some(tris)) => {
                let mut mesh = Vec::with_capacity(tris.len());
                for (ti, t) in tris.iter().enumerate() {
                    mesh.push(
                        Triangle::new(
                            Vec3::new(t[0], t[1], t[2]),
                            Vec3::new(t[3], t[4], t[5]),
                            Vec3::new(t[6], t[7], t[8]),
                            mat,
                        )
                        .map_err(|e| Error::Invalid(format!("building {i} triangle {ti}: {e}")))?,
                    );
                }
                if mesh.is_empty() {
                    return Err(Error::Invalid(format!("building {i}: empty mesh")));
                }
                builder = builder.mesh(mesh, mat);
            }
            _ => {
                return Err(Error::Invalid(format!(
                    "building {i}: provide either footprint+height or triangles"
                )));
            }
        }
    }

    let scene = builder.build()?;

    let mut rrus = Vec::with_capacity(doc.rrus.len());
    for r in &doc.rrus {
        let rru = RruConfig {
            id: r.id,
            position: Vec3::new(r.position[0], r.position[1], r.position[2]),
            rotation_azimuth: r.azimuth_deg.to_radians(),
            tilt: r.tilt_deg.to_radians(),
            rows: r.rows,
            cols: r.cols,
            spacing_h: r.spacing_h,
            spacing_v: r.spacing_v,
        };
        rru.validate()?;
        rrus.push(rru);
    }
    if rrus.len() != doc.rrus.iter().map(|r| r.id).collect::<std::collections::BTreeSet<_>>().len() {
        return Err(Error::Invalid("duplicate rru ids".into()));
    }

    let track_bounds = scene.bounds().inflated(1.0);
    let mut ue_tracks = Vec::with_capacity(doc.ue_tracks.len());
    for t in &doc.ue_tracks {
        let points = t
            .points
            .iter()
            .map(|p| (p[0] as u64, Vec3::new(p[1], p[2], p[3])))
            .collect();
        let traj = UeTrajectory { id: t.id, points };
        traj.validate(&track_bounds)?;
        ue_tracks.push(traj);
    }

    Ok(SceneBundle {
        scene,
        rrus,
        ue_tracks,
        name: doc.name.clone().unwrap_or_else(|| "scene".to_string()),
    })
}

fn normalize_ccw(fp: &[[f64; 2]]) -> Vec<(f64, f64)> {
    let mut signed = 0.0;
    for i in 0..fp.len() {
        let j = (i + 1) % fp.len();
        signed += fp[i][0] * fp[j][1] - fp[j][0] * fp[i][1];
    }
    let mut pts: Vec<(f64, f64)> = fp.iter().map(|p| (p[0], p[1])).collect();
    if signed < 0.0 {
        pts.reverse();
    }
    pts
}

fn check_convex(pts: &[(f64, f64)], building: usize) -> Result<()> {
    let n = pts.len();
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        let c = pts[(i + 2) % n];
        let cross = (b.0 - a.0) * (c.1 - b.1) - (b.1 - a.1) * (c.0 - b.0);
        if cross < -1e-9 {
            return Err(Error::Invalid(format!(
                "building {building}: footprint is not convex"
            )));
        }
    }
    Ok(())
}

pub(crate) fn doc_from_str(text: &str) -> Result<SceneDoc> {
    toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

pub(crate) fn doc_to_string(doc: &SceneDoc) -> Result<String> {
    toml::to_string_pretty(doc).map_err(|e| Error::Io(e.to_string()))
}

/// Counts what a document will produce, for fixture documentation checks.
pub fn expected_triangle_count(doc_text: &str) -> Result<usize> {
    let doc: SceneDoc = toml::from_str(doc_text).map_err(|e| Error::Parse(e.to_string()))?;
    let mut n = 2; // ground
    for b in &doc.buildings {
        n += match (&b.footprint, &b.triangles) {
            (Some(fp), None) => 4 * fp.len() - 4,
            (None, Some(t)) => t.len(),
            _ => 0,
        };
    }
    Ok(n)
}

impl SceneModel {
    /// Exposes the material list as (name -> index) for format consumers.
    pub fn material_index(&self, name: &str) -> Option<u32> {
        self.materials()
            .iter()
            .position(|m| m.name == name)
            .map(|i| i as u32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "minimal"

[ground]
material = "concrete"
extent = [[-50.0, -50.0], [50.0, 50.0]]

[[materials]]
id = "concrete"
refractive_index = 2.4
scattering_amplitude = 0.4
alpha_r = 4.0

[[buildings]]
material = "concrete"
footprint = [[0.0, 10.0], [20.0, 10.0], [20.0, 30.0], [0.0, 30.0]]
height = 15.0

[[rrus]]
id = 0
position = [0.0, -40.0, 20.0]
azimuth_deg = 0.0
tilt_deg = 10.0
rows = 4
cols = 8
spacing_h = 0.0428
spacing_v = 0.0428

[[ue_tracks]]
id = 0
points = [[0, 10.0, -20.0, 1.5], [1, 12.0, -20.0, 1.5]]
"#;

    #[test]
    fn minimal_file_loads() {
        let bundle = load_scene_str(MINIMAL).unwrap();
        assert_eq!(bundle.scene.triangles().len(), 2 + 12);
        assert_eq!(bundle.rrus.len(), 1);
        assert_eq!(bundle.ue_tracks.len(), 1);
        assert_eq!(bundle.name, "minimal");
    }

    #[test]
    fn missing_material_names_the_id() {
        let text = MINIMAL.replace("material = \"concrete\"\nfootprint", "material = \"glass\"\nfootprint");
        let err = load_scene_str(&text).unwrap_err();
        match err {
            Error::UnknownId(msg) => assert!(msg.contains("glass"), "{msg}"),
            other => panic!("expected UnknownId, got {other}"),
        }
    }

    #[test]
    fn parse_error_carries_context() {
        let err = load_scene_str("ground = 3").unwrap_err();
        match err {
            Error::Parse(msg) => assert!(!msg.is_empty()),
            other => panic!("expected Parse, got {other}"),
        }
    }

    #[test]
    fn non_monotonic_track_rejected() {
        let text = MINIMAL.replace(
            "points = [[0, 10.0, -20.0, 1.5], [1, 12.0, -20.0, 1.5]]",
            "points = [[5, 10.0, -20.0, 1.5], [5, 12.0, -20.0, 1.5]]",
        );
        assert!(load_scene_str(&text).is_err());
    }

    #[test]
    fn clockwise_footprint_normalized() {
        let text = MINIMAL.replace(
            "footprint = [[0.0, 10.0], [20.0, 10.0], [20.0, 30.0], [0.0, 30.0]]",
            "footprint = [[0.0, 10.0], [0.0, 30.0], [20.0, 30.0], [20.0, 10.0]]",
        );
        let bundle = load_scene_str(&text).unwrap();
        assert_eq!(bundle.scene.triangles().len(), 14);
    }

    #[test]
    fn triangle_count_helper_matches() {
        assert_eq!(expected_triangle_count(MINIMAL).unwrap(), 14);
    }
}
