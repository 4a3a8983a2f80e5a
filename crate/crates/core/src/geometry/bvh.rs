//! Bounding volume hierarchy over triangles.
//!
//! Built by median split on the longest axis of the node bounds, leaves
//! holding at most four triangles. Construction is deterministic for a
//! fixed input order; traversal returns exactly the brute-force minimum-t
//! hit (ties broken toward the lower original triangle index).

use super::{ray_aabb_intersect, ray_triangle_intersect, Aabb, Ray, Triangle, Vec3};
use crate::error::{Error, Result};

const LEAF_SIZE: usize = 4;

/// Nodes are laid out in depth-first order: an internal node's left child is
/// the next node, the right child index is stored.
#[derive(Debug, Clone)]
struct BvhNode {
    aabb: Aabb,
    /// Leaf: index of the first triangle slot. Internal: index of the right
    /// child node.
    right_or_first: u32,
    /// Number of triangles for a leaf, zero for internal nodes.
    count: u32,
}

impl BvhNode {
    fn is_leaf(&self) -> bool {
        self.count > 0
    }
}

/// Immutable triangle BVH. Triangles are stored reordered for leaf locality;
/// query results report the original input indices.
#[derive(Debug, Clone)]
pub struct BvhTree {
    nodes: Vec<BvhNode>,
    triangles: Vec<Triangle>,
    original_index: Vec<u32>,
}

/// A nearest-hit query result.
#[derive(Debug, Clone, Copy)]
pub struct SceneHit {
    pub t: f64,
    pub point: Vec3,
    pub barycentric: (f64, f64),
    /// Index of the hit triangle in the original input order.
    pub triangle: usize,
    pub material_id: u32,
}

/// Builds a BVH over the given triangles. Errors on an empty list.
pub fn build_bvh(triangles: Vec<Triangle>) -> Result<BvhTree> {
    if triangles.is_empty() {
        return Err(Error::EmptyScene);
    }
    let mut order: Vec<u32> = (0..triangles.len() as u32).collect();
    let mut nodes = Vec::with_capacity(2 * triangles.len());
    build_node(&triangles, &mut order, 0, triangles.len(), &mut nodes);

    // Reorder triangle storage to match leaf ranges.
    let reordered: Vec<Triangle> = order.iter().map(|&i| triangles[i as usize]).collect();
    Ok(BvhTree {
        nodes,
        triangles: reordered,
        original_index: order,
    })
}

fn range_bounds(triangles: &[Triangle], order: &[u32], start: usize, end: usize) -> Aabb {
    let mut aabb = Aabb::empty();
    for &i in &order[start..end] {
        let t = &triangles[i as usize];
        aabb.grow(t.v0);
        aabb.grow(t.v1);
        aabb.grow(t.v2);
    }
    aabb
}

fn build_node(
    triangles: &[Triangle],
    order: &mut [u32],
    start: usize,
    end: usize,
    nodes: &mut Vec<BvhNode>,
) -> usize {
    let aabb = range_bounds(triangles, order, start, end);
    let node_index = nodes.len();
    nodes.push(BvhNode {
        aabb,
        right_or_first: start as u32,
        count: (end - start) as u32,
    });
    if end - start <= LEAF_SIZE {
        return node_index;
    }

    let axis = aabb.longest_axis();
    let key = |i: u32| {
        let c = triangles[i as usize].centroid();
        match axis {
            0 => c.x,
            1 => c.y,
            _ => c.z,
        }
    };
    order[start..end].sort_by(|&a, &b| {
        key(a)
            .partial_cmp(&key(b))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mid = start + (end - start) / 2;

    let left = build_node(triangles, order, start, mid, nodes);
    debug_assert_eq!(left, node_index + 1);
    let right = build_node(triangles, order, mid, end, nodes);
    nodes[node_index].right_or_first = right as u32;
    nodes[node_index].count = 0;
    node_index
}

impl BvhTree {
    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn root_aabb(&self) -> Aabb {
        self.nodes[0].aabb
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Checks the structural invariants: each triangle in exactly one leaf,
    /// each node box containing its descendants' boxes.
    pub fn validate(&self) -> bool {
        let mut seen = vec![false; self.triangles.len()];
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if node.is_leaf() {
                let first = node.right_or_first as usize;
                for slot in first..first + node.count as usize {
                    if seen[slot] {
                        return false;
                    }
                    seen[slot] = true;
                    let grown = node.aabb.union(&self.triangles[slot].aabb());
                    if grown != node.aabb {
                        return false;
                    }
                }
            } else {
                for child in [n + 1, node.right_or_first as usize] {
                    let grown = node.aabb.union(&self.nodes[child].aabb);
                    if grown != node.aabb {
                        return false;
                    }
                    stack.push(child);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Minimum-t intersection of the ray against all triangles in the tree.
pub fn nearest_hit(ray: &Ray, bvh: &BvhTree) -> Option<SceneHit> {
    let mut best: Option<SceneHit> = None;
    let mut stack: Vec<usize> = Vec::with_capacity(64);
    stack.push(0);
    while let Some(n) = stack.pop() {
        let node = &bvh.nodes[n];
        let interval = match ray_aabb_intersect(ray, &node.aabb) {
            Some(iv) => iv,
            None => continue,
        };
        if let Some(b) = &best {
            if interval.0 > b.t {
                continue;
            }
        }
        if node.is_leaf() {
            let first = node.right_or_first as usize;
            for slot in first..first + node.count as usize {
                if let Some(hit) = ray_triangle_intersect(ray, &bvh.triangles[slot]) {
                    let original = bvh.original_index[slot] as usize;
                    let better = match &best {
                        None => true,
                        Some(b) => hit.t < b.t || (hit.t == b.t && original < b.triangle),
                    };
                    if better {
                        best = Some(SceneHit {
                            t: hit.t,
                            point: hit.point,
                            barycentric: hit.barycentric,
                            triangle: original,
                            material_id: bvh.triangles[slot].material_id,
                        });
                    }
                }
            }
        } else {
            let left = n + 1;
            let right = node.right_or_first as usize;
            // Visit the nearer child first.
            let tl = ray_aabb_intersect(ray, &bvh.nodes[left].aabb).map(|iv| iv.0);
            let tr = ray_aabb_intersect(ray, &bvh.nodes[right].aabb).map(|iv| iv.0);
            match (tl, tr) {
                (Some(a), Some(b)) if a <= b => {
                    stack.push(right);
                    stack.push(left);
                }
                (Some(_), Some(_)) => {
                    stack.push(left);
                    stack.push(right);
                }
                (Some(_), None) => stack.push(left),
                (None, Some(_)) => stack.push(right),
                (None, None) => {}
            }
        }
    }
    best
}

/// Brute-force reference: minimum-t over a triangle slice with the same tie
/// rule as the BVH traversal. Kept beside the tree so oracle tests share the
/// intersection kernel but not the traversal.
pub fn brute_force_nearest(ray: &Ray, triangles: &[Triangle]) -> Option<SceneHit> {
    let mut best: Option<SceneHit> = None;
    for (i, tri) in triangles.iter().enumerate() {
        if let Some(hit) = ray_triangle_intersect(ray, tri) {
            let better = match &best {
                None => true,
                Some(b) => hit.t < b.t,
            };
            if better {
                best = Some(SceneHit {
                    t: hit.t,
                    point: hit.point,
                    barycentric: hit.barycentric,
                    triangle: i,
                    material_id: tri.material_id,
                });
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;

    fn tri(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> Triangle {
        Triangle::new(
            Vec3::new(a[0], a[1], a[2]),
            Vec3::new(b[0], b[1], b[2]),
            Vec3::new(c[0], c[1], c[2]),
            0,
        )
        .unwrap()
    }

    #[test]
    fn empty_scene_errors() {
        assert_eq!(build_bvh(Vec::new()).unwrap_err(), Error::EmptyScene);
    }

    #[test]
    fn single_triangle_leaf() {
        let t = tri([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let bvh = build_bvh(vec![t]).unwrap();
        assert_eq!(bvh.node_count(), 1);
        assert_eq!(bvh.root_aabb(), t.aabb());
        assert!(bvh.validate());
    }

    #[test]
    fn two_distant_clusters_split() {
        let a = tri([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let b = tri([100.0, 0.0, 0.0], [101.0, 0.0, 0.0], [100.0, 1.0, 0.0]);
        let tris = vec![a, a, a, b, b, b];
        let bvh = build_bvh(tris).unwrap();
        assert_eq!(bvh.node_count(), 3);
        assert!(bvh.validate());
        // Child boxes are disjoint.
        let left = &bvh.nodes[1].aabb;
        let right = &bvh.nodes[bvh.nodes[0].right_or_first as usize].aabb;
        assert!(!left.overlaps(right));
    }

    #[test]
    fn nearer_of_stacked_walls() {
        let near1 = tri([-5.0, -5.0, 1.0], [5.0, -5.0, 1.0], [0.0, 5.0, 1.0]);
        let far1 = tri([-5.0, -5.0, 2.0], [5.0, -5.0, 2.0], [0.0, 5.0, 2.0]);
        let bvh = build_bvh(vec![far1, near1]).unwrap();
        let ray = Ray::new(Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 1.0));
        let hit = nearest_hit(&ray, &bvh).unwrap();
        assert_eq!(hit.triangle, 1);
        assert!((hit.t - 1.0).abs() < 1e-12);
    }

    #[test]
    fn miss_everything() {
        let t = tri([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let bvh = build_bvh(vec![t]).unwrap();
        let ray = Ray::new(Vec3::new(10.0, 10.0, 1.0), Vec3::new(0.0, 0.0, 1.0));
        assert!(nearest_hit(&ray, &bvh).is_none());
    }

    #[test]
    fn deterministic_rebuild() {
        let tris: Vec<Triangle> = (0..100)
            .map(|i| {
                let x = (i as f64 * 0.37).sin() * 50.0;
                let y = (i as f64 * 0.73).cos() * 50.0;
                tri([x, y, 0.0], [x + 1.0, y, 0.0], [x, y + 1.0, 0.0])
            })
            .collect();
        let a = build_bvh(tris.clone()).unwrap();
        let b = build_bvh(tris).unwrap();
        assert_eq!(a.original_index, b.original_index);
        assert_eq!(a.node_count(), b.node_count());
    }
}
