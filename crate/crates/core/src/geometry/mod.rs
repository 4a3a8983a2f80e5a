//! Core 3D primitives, ray-surface intersection, and acceleration structures.
//!
//! Coordinates are right-handed with z up. Azimuth is measured from the +y
//! axis clockwise toward +x, elevation from the horizontal plane toward +z,
//! so the unit vector for (azimuth, elevation) is
//! `(cos el * sin az, cos el * cos az, sin el)`.

mod bvh;
mod grid;

pub use bvh::{brute_force_nearest, build_bvh, nearest_hit, BvhTree, SceneHit};
pub use grid::SpatialGrid;

use crate::error::{Error, Result};
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Minimum parametric hit distance; prevents self-intersection of rays
/// re-launched from a surface after reflection. Scene scale is meters.
pub const T_EPSILON: f64 = 1e-4;

/// Minimum triangle area in square meters.
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

/// A 3D point or direction in meters (unitless for directions).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3 {
            x: self.y * other.z - self.z * other.y,
            y: self.z * other.x - self.x * other.z,
            z: self.x * other.y - self.y * other.x,
        }
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn normalized(self) -> Vec3 {
        let n = self.norm();
        debug_assert!(n > 0.0, "normalizing the zero vector");
        self / n
    }

    pub fn distance(self, other: Vec3) -> f64 {
        (self - other).norm()
    }

    /// Component-wise minimum.
    pub fn min(self, other: Vec3) -> Vec3 {
        Vec3::new(self.x.min(other.x), self.y.min(other.y), self.z.min(other.z))
    }

    /// Component-wise maximum.
    pub fn max(self, other: Vec3) -> Vec3 {
        Vec3::new(self.x.max(other.x), self.y.max(other.y), self.z.max(other.z))
    }

    /// Azimuth of this direction: angle from +y clockwise toward +x.
    pub fn azimuth(self) -> f64 {
        self.x.atan2(self.y)
    }

    /// Elevation of this direction above the horizontal plane.
    pub fn elevation(self) -> f64 {
        let h = (self.x * self.x + self.y * self.y).sqrt();
        self.z.atan2(h)
    }

    /// Unit direction vector for the given azimuth/elevation pair.
    pub fn from_angles(azimuth: f64, elevation: f64) -> Vec3 {
        let (sa, ca) = azimuth.sin_cos();
        let (se, ce) = elevation.sin_cos();
        Vec3::new(ce * sa, ce * ca, se)
    }

    /// Reflection of an incident direction off a surface with the given normal.
    pub fn reflect(self, normal: Vec3) -> Vec3 {
        self - normal * (2.0 * self.dot(normal))
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// A ray with a unit direction and the path length accumulated before its
/// origin (zero for freshly launched rays).
#[derive(Debug, Clone, Copy)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
    pub accumulated_length: f64,
}

impl Ray {
    /// Builds a ray, normalizing the direction.
    pub fn new(origin: Vec3, direction: Vec3) -> Ray {
        Ray {
            origin,
            direction: direction.normalized(),
            accumulated_length: 0.0,
        }
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

/// A scene triangle with a precomputed unit normal.
#[derive(Debug, Clone, Copy)]
pub struct Triangle {
    pub v0: Vec3,
    pub v1: Vec3,
    pub v2: Vec3,
    pub material_id: u32,
    pub normal: Vec3,
}

impl Triangle {
    /// Builds a triangle; rejects degenerate ones (area <= 1e-12 m^2).
    pub fn new(v0: Vec3, v1: Vec3, v2: Vec3, material_id: u32) -> Result<Triangle> {
        let cross = (v1 - v0).cross(v2 - v0);
        let doubled_area = cross.norm();
        if doubled_area * 0.5 <= MIN_TRIANGLE_AREA {
            return Err(Error::Invalid(format!(
                "degenerate triangle with area {:.3e} m^2",
                doubled_area * 0.5
            )));
        }
        Ok(Triangle {
            v0,
            v1,
            v2,
            material_id,
            normal: cross / doubled_area,
        })
    }

    pub fn area(&self) -> f64 {
        (self.v1 - self.v0).cross(self.v2 - self.v0).norm() * 0.5
    }

    pub fn centroid(&self) -> Vec3 {
        (self.v0 + self.v1 + self.v2) / 3.0
    }

    pub fn aabb(&self) -> Aabb {
        Aabb {
            min_corner: self.v0.min(self.v1).min(self.v2),
            max_corner: self.v0.max(self.v1).max(self.v2),
        }
    }

    /// Translates all vertices by `offset`; the normal is unchanged.
    pub fn translated(&self, offset: Vec3) -> Triangle {
        Triangle {
            v0: self.v0 + offset,
            v1: self.v1 + offset,
            v2: self.v2 + offset,
            material_id: self.material_id,
            normal: self.normal,
        }
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min_corner: Vec3,
    pub max_corner: Vec3,
}

impl Aabb {
    /// The empty box (inverted bounds); grows to valid bounds via `grow`.
    pub fn empty() -> Aabb {
        Aabb {
            min_corner: Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            max_corner: Vec3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    pub fn new(min_corner: Vec3, max_corner: Vec3) -> Aabb {
        debug_assert!(
            min_corner.x <= max_corner.x
                && min_corner.y <= max_corner.y
                && min_corner.z <= max_corner.z
        );
        Aabb { min_corner, max_corner }
    }

    pub fn grow(&mut self, p: Vec3) {
        self.min_corner = self.min_corner.min(p);
        self.max_corner = self.max_corner.max(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min_corner: self.min_corner.min(other.min_corner),
            max_corner: self.max_corner.max(other.max_corner),
        }
    }

    pub fn contains(&self, p: Vec3) -> bool {
        p.x >= self.min_corner.x
            && p.x <= self.max_corner.x
            && p.y >= self.min_corner.y
            && p.y <= self.max_corner.y
            && p.z >= self.min_corner.z
            && p.z <= self.max_corner.z
    }

    pub fn overlaps(&self, other: &Aabb) -> bool {
        self.min_corner.x <= other.max_corner.x
            && self.max_corner.x >= other.min_corner.x
            && self.min_corner.y <= other.max_corner.y
            && self.max_corner.y >= other.min_corner.y
            && self.min_corner.z <= other.max_corner.z
            && self.max_corner.z >= other.min_corner.z
    }

    pub fn centroid(&self) -> Vec3 {
        (self.min_corner + self.max_corner) * 0.5
    }

    /// Index of the longest axis (0 = x, 1 = y, 2 = z).
    pub fn longest_axis(&self) -> usize {
        let d = self.max_corner - self.min_corner;
        if d.x >= d.y && d.x >= d.z {
            0
        } else if d.y >= d.z {
            1
        } else {
            2
        }
    }

    pub fn inflated(&self, margin: f64) -> Aabb {
        let m = Vec3::new(margin, margin, margin);
        Aabb {
            min_corner: self.min_corner - m,
            max_corner: self.max_corner + m,
        }
    }
}

/// Result of a ray-triangle intersection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    /// Parametric distance along the ray.
    pub t: f64,
    pub point: Vec3,
    /// Barycentric coordinates with respect to (v1 - v0, v2 - v0).
    pub barycentric: (f64, f64),
}

/// Moller-Trumbore ray-triangle intersection.
///
/// Hits on the boundary count; hits at t <= T_EPSILON are discarded.
pub fn ray_triangle_intersect(ray: &Ray, tri: &Triangle) -> Option<Hit> {
    let e1 = tri.v1 - tri.v0;
    let e2 = tri.v2 - tri.v0;
    let p = ray.direction.cross(e2);
    let det = e1.dot(p);
    if det.abs() < 1e-12 {
        return None;
    }
    let inv_det = 1.0 / det;
    let s = ray.origin - tri.v0;
    let u = s.dot(p) * inv_det;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let v = ray.direction.dot(q) * inv_det;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(q) * inv_det;
    if t <= T_EPSILON {
        return None;
    }
    Some(Hit {
        t,
        point: ray.at(t),
        barycentric: (u, v),
    })
}

/// Slab test. Returns `(t_near, t_far)` with `t_near` clamped to zero for
/// rays originating inside the box; `None` on a miss (including boxes
/// entirely behind the origin).
pub fn ray_aabb_intersect(ray: &Ray, aabb: &Aabb) -> Option<(f64, f64)> {
    let mut t_min = f64::NEG_INFINITY;
    let mut t_max = f64::INFINITY;
    let o = [ray.origin.x, ray.origin.y, ray.origin.z];
    let d = [ray.direction.x, ray.direction.y, ray.direction.z];
    let lo = [aabb.min_corner.x, aabb.min_corner.y, aabb.min_corner.z];
    let hi = [aabb.max_corner.x, aabb.max_corner.y, aabb.max_corner.z];
    for axis in 0..3 {
        if d[axis].abs() < 1e-15 {
            if o[axis] < lo[axis] || o[axis] > hi[axis] {
                return None;
            }
        } else {
            let inv = 1.0 / d[axis];
            let mut t1 = (lo[axis] - o[axis]) * inv;
            let mut t2 = (hi[axis] - o[axis]) * inv;
            if t1 > t2 {
                std::mem::swap(&mut t1, &mut t2);
            }
            t_min = t_min.max(t1);
            t_max = t_max.min(t2);
            if t_min > t_max {
                return None;
            }
        }
    }
    if t_max < 0.0 {
        return None;
    }
    Some((t_min.max(0.0), t_max))
}

/// Closest points between two segments [a0, a1] and [b0, b1].
/// Returns (point_on_a, point_on_b, distance).
pub fn segment_segment_closest(a0: Vec3, a1: Vec3, b0: Vec3, b1: Vec3) -> (Vec3, Vec3, f64) {
    let u = a1 - a0;
    let v = b1 - b0;
    let w = a0 - b0;
    let a = u.dot(u);
    let b = u.dot(v);
    let c = v.dot(v);
    let d = u.dot(w);
    let e = v.dot(w);
    let denom = a * c - b * b;

    let (mut s, mut t);
    if denom > 1e-12 {
        s = ((b * e - c * d) / denom).clamp(0.0, 1.0);
    } else {
        // Near-parallel segments: pin s and solve for t.
        s = 0.0;
    }
    t = if c > 1e-30 { (b * s + e) / c } else { 0.0 };

    if t < 0.0 {
        t = 0.0;
        s = if a > 1e-30 { (-d / a).clamp(0.0, 1.0) } else { 0.0 };
    } else if t > 1.0 {
        t = 1.0;
        s = if a > 1e-30 { ((b - d) / a).clamp(0.0, 1.0) } else { 0.0 };
    }

    let pa = a0 + u * s;
    let pb = b0 + v * t;
    (pa, pb, pa.distance(pb))
}

/// Distance from a point to a segment, with the clamped parameter.
pub fn point_segment_closest(p: Vec3, a: Vec3, b: Vec3) -> (f64, f64) {
    let ab = b - a;
    let len_sq = ab.norm_squared();
    let t = if len_sq > 1e-30 {
        ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let closest = a + ab * t;
    (p.distance(closest), t)
}
