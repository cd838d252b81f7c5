use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{RigidTransform, Vec3};

/// Ray parameters below this are treated as starting on the surface.
const MIN_HIT: f64 = 1e-9;
/// The ground plane is the square `|x|, |z| ≤ GROUND_HALF_EXTENT` in object coordinates.
pub const GROUND_HALF_EXTENT: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Shape {
    /// Sphere centred at the object origin.
    Sphere { radius: f64 },
    /// Box aligned with the object axes, centred at the object origin.
    Box { half_extents: [f64; 3] },
    /// Plane `y = height` in object coordinates (y points down), bounded by
    /// [`GROUND_HALF_EXTENT`].
    GroundPlane { height: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    #[serde(flatten)]
    pub shape: Shape,
    #[serde(default)]
    pub albedo: u32,
}

impl Primitive {
    pub fn sphere(radius: f64) -> Self {
        Self {
            shape: Shape::Sphere { radius },
            albedo: 0,
        }
    }

    pub fn cuboid(half_extents: [f64; 3]) -> Self {
        Self {
            shape: Shape::Box { half_extents },
            albedo: 0,
        }
    }

    pub fn ground(height: f64) -> Self {
        Self {
            shape: Shape::GroundPlane { height },
            albedo: 0,
        }
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        match self.shape {
            Shape::Sphere { radius } if !positive(radius) => Err(Error::spec(
                format!("{field}.radius"),
                format!("must be positive, got {radius}"),
            )),
            Shape::Box { half_extents } if !half_extents.iter().all(|h| positive(*h)) => {
                Err(Error::spec(
                    format!("{field}.half_extents"),
                    format!("must be positive, got {half_extents:?}"),
                ))
            }
            Shape::GroundPlane { height } if !positive(height) => Err(Error::spec(
                format!("{field}.height"),
                format!("must be positive, got {height}"),
            )),
            _ => Ok(()),
        }
    }

    /// Nearest ray parameter `λ > 0` with `origin + λ·dir` on the surface, in
    /// object coordinates.
    pub fn intersect_local(&self, origin: &Vec3, dir: &Vec3) -> Option<f64> {
        match self.shape {
            Shape::Sphere { radius } => intersect_sphere(origin, dir, radius),
            Shape::Box { half_extents } => intersect_box(origin, dir, &half_extents),
            Shape::GroundPlane { height } => {
                if dir.y == 0.0 {
                    return None;
                }
                let lambda = (height - origin.y) / dir.y;
                let hit = origin + dir * lambda;
                let inside = hit.x.abs() <= GROUND_HALF_EXTENT && hit.z.abs() <= GROUND_HALF_EXTENT;
                (lambda > MIN_HIT && inside).then_some(lambda)
            }
        }
    }

    /// World-space intersection for an object posed by `pose` (object → world).
    /// Poses are rigid, so the ray parameter is frame independent.
    pub fn intersect(&self, pose: &RigidTransform, origin: &Vec3, dir: &Vec3) -> Option<f64> {
        let rt = pose.rotation.transpose();
        let o = rt * (origin - pose.translation);
        let d = rt * dir;
        self.intersect_local(&o, &d)
    }
}

fn intersect_sphere(o: &Vec3, d: &Vec3, r: f64) -> Option<f64> {
    let a = d.dot(d);
    let b = o.dot(d);
    let c = o.dot(o) - r * r;
    let disc = b * b - a * c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let near = (-b - sq) / a;
    if near > MIN_HIT {
        return Some(near);
    }
    let far = (-b + sq) / a;
    (far > MIN_HIT).then_some(far)
}

fn intersect_box(o: &Vec3, d: &Vec3, h: &[f64; 3]) -> Option<f64> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    for axis in 0..3 {
        if d[axis] == 0.0 {
            if o[axis].abs() > h[axis] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d[axis];
        let mut t0 = (-h[axis] - o[axis]) * inv;
        let mut t1 = (h[axis] - o[axis]) * inv;
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        t_near = t_near.max(t0);
        t_far = t_far.min(t1);
        if t_near > t_far {
            return None;
        }
    }
    if t_near > MIN_HIT {
        Some(t_near)
    } else if t_far > MIN_HIT {
        Some(t_far)
    } else {
        None
    }
}
