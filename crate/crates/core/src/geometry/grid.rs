//! Uniform spatial grid mapping scene objects to the cells their bounding
//! boxes overlap. Used as a broad phase to shortlist objects near a ray
//! corridor before any per-triangle work.

use super::{Aabb, Vec3};
use std::collections::HashMap;

#[derive(Debug, Clone)]
pub struct SpatialGrid {
    cell_size: f64,
    origin: Vec3,
    cells: HashMap<(i64, i64, i64), Vec<u32>>,
}

impl SpatialGrid {
    /// Default cell size in meters; matches building scale at ~150 m
    /// inter-site distance.
    pub const DEFAULT_CELL_SIZE: f64 = 25.0;

    pub fn new(cell_size: f64, origin: Vec3) -> SpatialGrid {
        assert!(cell_size > 0.0);
        SpatialGrid {
            cell_size,
            origin,
            cells: HashMap::new(),
        }
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    fn cell_of(&self, p: Vec3) -> (i64, i64, i64) {
        (
            ((p.x - self.origin.x) / self.cell_size).floor() as i64,
            ((p.y - self.origin.y) / self.cell_size).floor() as i64,
            ((p.z - self.origin.z) / self.cell_size).floor() as i64,
        )
    }

    /// Registers an object in every cell its box overlaps.
    pub fn insert(&mut self, id: u32, aabb: &Aabb) {
        let lo = self.cell_of(aabb.min_corner);
        let hi = self.cell_of(aabb.max_corner);
        for cx in lo.0..=hi.0 {
            for cy in lo.1..=hi.1 {
                for cz in lo.2..=hi.2 {
                    self.cells.entry((cx, cy, cz)).or_default().push(id);
                }
            }
        }
    }

    /// Object ids whose registered cells overlap the query box, sorted and
    /// deduplicated.
    pub fn query_aabb(&self, aabb: &Aabb) -> Vec<u32> {
        let lo = self.cell_of(aabb.min_corner);
        let hi = self.cell_of(aabb.max_corner);
        let mut out = Vec::new();
        for cx in lo.0..=hi.0 {
            for cy in lo.1..=hi.1 {
                for cz in lo.2..=hi.2 {
                    if let Some(ids) = self.cells.get(&(cx, cy, cz)) {
                        out.extend_from_slice(ids);
                    }
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Object ids near the segment from `a` to `b`, inflated by `margin`.
    pub fn query_segment(&self, a: Vec3, b: Vec3, margin: f64) -> Vec<u32> {
        let mut aabb = Aabb::empty();
        aabb.grow(a);
        aabb.grow(b);
        self.query_aabb(&aabb.inflated(margin))
    }

    /// True when the object id is registered in every cell the box overlaps.
    pub fn covers(&self, id: u32, aabb: &Aabb) -> bool {
        let lo = self.cell_of(aabb.min_corner);
        let hi = self.cell_of(aabb.max_corner);
        for cx in lo.0..=hi.0 {
            for cy in lo.1..=hi.1 {
                for cz in lo.2..=hi.2 {
                    match self.cells.get(&(cx, cy, cz)) {
                        Some(ids) if ids.contains(&id) => {}
                        _ => return false,
                    }
                }
            }
        }
        true
    }
}
