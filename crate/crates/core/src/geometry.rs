//! Pinhole cameras, rigid motions and pixel-aligned point maps.
//!
//! Conventions used throughout the crate:
//!
//! * pixels are enumerated row-major (row by row, left to right), so flat index
//!   `k` is pixel `(k % width, k / width)`;
//! * pixel `(i, j)` has continuous image coordinates `(i + 0.5, j + 0.5)`;
//! * camera frames are x right, y down, z forward; a camera pose maps camera
//!   coordinates to world coordinates.

use nalgebra::{Matrix3, Rotation3, Vector2, Vector3, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Homogeneous pixel grid of an image of a given size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelGrid {
    width: usize,
    height: usize,
}

impl PixelGrid {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Argument(format!(
                "pixel grid must be non-empty, got {width}x{height}"
            )));
        }
        Ok(Self { width, height })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Integer pixel `(column, row)` of flat index `k`.
    pub fn pixel(&self, k: usize) -> (usize, usize) {
        (k % self.width, k / self.width)
    }

    pub fn index(&self, column: usize, row: usize) -> usize {
        row * self.width + column
    }

    /// Column `k` of the homogeneous grid matrix: `(x + 0.5, y + 0.5, 1)`.
    pub fn homogeneous(&self, k: usize) -> Vec3 {
        let (x, y) = self.pixel(k);
        Vec3::new(x as f64 + 0.5, y as f64 + 0.5, 1.0)
    }

    /// Flat index of the pixel whose square contains continuous point `uv`.
    pub fn containing(&self, uv: &Vector2<f64>) -> Option<usize> {
        if !(uv.x >= 0.0 && uv.y >= 0.0) {
            return None;
        }
        let (x, y) = (uv.x.floor() as usize, uv.y.floor() as usize);
        (x < self.width && y < self.height).then(|| self.index(x, y))
    }
}

/// Similarity transform `p ↦ s·R·p + t`. With `scale == 1` this is an SE(3) element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Mat3,
    pub translation: Vec3,
    pub scale: f64,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Mat3::identity(),
            translation: Vec3::zeros(),
            scale: 1.0,
        }
    }

    pub fn new(rotation: Mat3, translation: Vec3) -> Self {
        Self {
            rotation,
            translation,
            scale: 1.0,
        }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self::new(Mat3::identity(), translation)
    }

    /// Rotation given as a rotation vector (axis times angle, radians).
    pub fn from_rotation_vector(rotvec: Vec3, translation: Vec3) -> Self {
        Self::new(*Rotation3::new(rotvec).matrix(), translation)
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p * self.scale + self.translation
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation * self.scale + self.translation,
            scale: self.scale * other.scale,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        let inv_scale = 1.0 / self.scale;
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation) * inv_scale,
            scale: inv_scale,
        }
    }

    /// Largest entry of `|RᵀR − I|`.
    pub fn orthonormality_error(&self) -> f64 {
        (self.rotation.transpose() * self.rotation - Mat3::identity()).amax()
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        self.scale > 0.0
            && self.scale.is_finite()
            && self.translation.iter().all(|v| v.is_finite())
            && self.orthonormality_error() <= tol
            && (self.rotation.determinant() - 1.0).abs() <= tol
    }

    /// Projects the rotation back onto SO(3) (nearest orthonormal matrix).
    pub fn orthonormalized(&self) -> RigidTransform {
        let svd = SVD::new(self.rotation, true, true);
        let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut d = Mat3::identity();
        if (u * v_t).determinant() < 0.0 {
            d[(2, 2)] = -1.0;
        }
        RigidTransform {
            rotation: u * d * v_t,
            ..*self
        }
    }
}

pub fn se3_compose(a: &RigidTransform, b: &RigidTransform) -> RigidTransform {
    a.compose(b)
}

pub fn se3_inverse(t: &RigidTransform) -> RigidTransform {
    t.inverse()
}

/// Pinhole camera with zero skew and a camera-to-world pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub pose: RigidTransform,
}

impl CameraModel {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, pose: RigidTransform) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0 && fx.is_finite() && fy.is_finite()) {
            return Err(Error::Argument(format!(
                "focal lengths must be positive and finite, got fx={fx}, fy={fy}"
            )));
        }
        if !(cx.is_finite() && cy.is_finite()) {
            return Err(Error::Argument("principal point must be finite".into()));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            pose,
        })
    }

    /// Square-pixel camera with the principal point at the image centre.
    pub fn centered(focal: f64, width: usize, height: usize, pose: RigidTransform) -> Result<Self> {
        Self::new(focal, focal, width as f64 / 2.0, height as f64 / 2.0, pose)
    }

    pub fn calibration(&self) -> Mat3 {
        Mat3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn principal_point(&self) -> Vector2<f64> {
        Vector2::new(self.cx, self.cy)
    }

    /// Pixel and depth of a camera-frame point, or `None` behind the camera.
    pub fn project_point(&self, p: &Vec3) -> Option<(Vector2<f64>, f64)> {
        if !(p.z > 0.0) || !p.iter().all(|v| v.is_finite()) {
            return None;
        }
        let u = Vector2::new(self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy);
        Some((u, p.z))
    }

    /// `K⁻¹·u` for homogeneous pixel `u`; its z component is 1, so scaling it
    /// by a depth gives the camera-frame point.
    pub fn ray(&self, u: &Vec3) -> Vec3 {
        Vec3::new((u.x - self.cx) / self.fx, (u.y - self.cy) / self.fy, 1.0)
    }

    pub fn unproject_pixel(&self, u: &Vec3, depth: f64) -> Vec3 {
        self.ray(u) * depth
    }
}

/// Which timestamp and which camera frame a point map is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FrameTag {
    pub time: u8,
    pub view: u8,
}

impl FrameTag {
    pub const fn new(time: u8, view: u8) -> Self {
        Self { time, view }
    }
}

impl std::fmt::Display for FrameTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(t{}, pi{})", self.time, self.view)
    }
}

/// Pixel-aligned grid of 3D points with a validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct PointMap {
    pub width: usize,
    pub height: usize,
    pub points: Vec<Vec3>,
    pub valid: Vec<bool>,
    pub frame: FrameTag,
}

impl PointMap {
    pub fn new(
        width: usize,
        height: usize,
        points: Vec<Vec3>,
        valid: Vec<bool>,
        frame: FrameTag,
    ) -> Result<Self> {
        let n = width * height;
        if points.len() != n || valid.len() != n {
            return Err(Error::Argument(format!(
                "point map {width}x{height} needs {n} points and flags, got {} and {}",
                points.len(),
                valid.len()
            )));
        }
        let mut map = Self {
            width,
            height,
            points,
            valid,
            frame,
        };
        map.invalidate_non_finite();
        Ok(map)
    }

    pub fn invalid(width: usize, height: usize, frame: FrameTag) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            points: vec![Vec3::zeros(); n],
            valid: vec![false; n],
            frame,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    pub fn same_shape(&self, other: &PointMap) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn valid_points(&self) -> impl Iterator<Item = (usize, &Vec3)> {
        self.points
            .iter()
            .enumerate()
            .filter(move |(i, _)| self.valid[*i])
    }

    fn invalidate_non_finite(&mut self) {
        for (p, v) in self.points.iter().zip(self.valid.iter_mut()) {
            if *v && !p.iter().all(|c| c.is_finite()) {
                *v = false;
            }
        }
    }

    /// Applies `T` to every valid column. The frame tag is left to the caller.
    pub fn transformed(&self, t: &RigidTransform) -> PointMap {
        let points = self
            .points
            .iter()
            .zip(&self.valid)
            .map(|(p, v)| if *v { t.apply(p) } else { *p })
            .collect();
        PointMap {
            points,
            valid: self.valid.clone(),
            ..*self
        }
    }

    pub fn scaled(&self, alpha: f64) -> PointMap {
        PointMap {
            points: self.points.iter().map(|p| p * alpha).collect(),
            valid: self.valid.clone(),
            ..*self
        }
    }

    pub fn with_frame(mut self, frame: FrameTag) -> Self {
        self.frame = frame;
        self
    }

    /// Vertically stacks maps of equal width into a single map; the frame tag
    /// is taken from the first map.
    pub fn stack(maps: &[&PointMap]) -> Result<PointMap> {
        let first = maps
            .first()
            .ok_or_else(|| Error::Argument("cannot stack zero point maps".into()))?;
        if maps.iter().any(|m| m.width != first.width) {
            return Err(Error::Argument("stacked maps must share a width".into()));
        }
        let mut points = Vec::new();
        let mut valid = Vec::new();
        let mut height = 0;
        for m in maps {
            points.extend_from_slice(&m.points);
            valid.extend_from_slice(&m.valid);
            height += m.height;
        }
        Ok(PointMap {
            width: first.width,
            height,
            points,
            valid,
            frame: first.frame,
        })
    }

    /// Depth channel (z coordinate) of a camera-frame map.
    pub fn depth_map(&self) -> DepthMap {
        let depths: Vec<f64> = self.points.iter().map(|p| p.z).collect();
        let valid = self
            .valid
            .iter()
            .zip(&depths)
            .map(|(v, z)| *v && *z > 0.0)
            .collect();
        DepthMap {
            width: self.width,
            height: self.height,
            depths,
            valid,
        }
    }
}

pub fn se3_apply(t: &RigidTransform, map: &PointMap) -> PointMap {
    map.transformed(t)
}

/// Per-pixel positive depths.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    pub depths: Vec<f64>,
    pub valid: Vec<bool>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, depths: Vec<f64>, valid: Vec<bool>) -> Result<Self> {
        let n = width * height;
        if depths.len() != n || valid.len() != n {
            return Err(Error::Argument(format!(
                "depth map {width}x{height} needs {n} entries"
            )));
        }
        Ok(Self {
            width,
            height,
            depths,
            valid,
        })
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub pixels: Vec<Vector2<f64>>,
    pub depths: DepthMap,
}

/// Solves `u·λ = K·p` column-wise. Points at or behind the image plane are
/// invalidated individually.
pub fn project(points: &PointMap, cam: &CameraModel) -> Projection {
    let n = points.len();
    let mut pixels = vec![Vector2::repeat(f64::NAN); n];
    let mut depths = vec![0.0; n];
    let mut valid = vec![false; n];
    for (i, p) in points.valid_points() {
        if let Some((u, z)) = cam.project_point(p) {
            pixels[i] = u;
            depths[i] = z;
            valid[i] = true;
        }
    }
    Projection {
        pixels,
        depths: DepthMap {
            width: points.width,
            height: points.height,
            depths,
            valid,
        },
    }
}

/// `P = K⁻¹ U diag(Λ)`. Non-positive or non-finite depths invalidate their pixel.
pub fn unproject(depths: &DepthMap, cam: &CameraModel, grid: &PixelGrid) -> Result<PointMap> {
    if depths.width != grid.width() || depths.height != grid.height() {
        return Err(Error::Argument(format!(
            "depth map is {}x{} but grid is {}x{}",
            depths.width,
            depths.height,
            grid.width(),
            grid.height()
        )));
    }
    let n = grid.len();
    let mut points = vec![Vec3::zeros(); n];
    let mut valid = vec![false; n];
    for k in 0..n {
        let z = depths.depths[k];
        if depths.valid[k] && z > 0.0 && z.is_finite() {
            points[k] = cam.unproject_pixel(&grid.homogeneous(k), z);
            valid[k] = true;
        }
    }
    Ok(PointMap {
        width: grid.width(),
        height: grid.height(),
        points,
        valid,
        frame: FrameTag::new(1, 1),
    })
}

/// Median Euclidean norm of the valid points selected by `mask` (all valid
/// points when `mask` is `None`).
pub fn median_norm(map: &PointMap, mask: Option<&[bool]>) -> Option<f64> {
    let norms: Vec<f64> = map
        .valid_points()
        .filter(|(i, _)| mask.is_none_or(|m| m[*i]))
        .map(|(_, p)| p.norm())
        .collect();
    crate::numeric::median(&norms)
}
