//! Scene descriptions and their TOML representation.
//!
//! ```toml
//! width = 128
//! height = 96
//! seed = 7
//!
//! [camera1]
//! fx = 110.0
//! fy = 110.0
//! cx = 64.0
//! cy = 48.0
//! pose = { translation = [0.0, 0.0, 0.0], rotation = [-0.38, 0.0, 0.0] }
//!
//! [camera2]
//! # same fields as camera1
//!
//! [[objects]]
//! dynamic = true
//! primitive = { kind = "sphere", radius = 0.5 }
//! pose_t1 = { translation = [1.0, 1.0, 5.5] }
//! pose_t2 = { translation = [0.8, 1.0, 6.5], rotation = [0.0, 0.2, 0.0] }
//! ```
//!
//! Rotations are rotation vectors in radians. `pose_t2` may be omitted for a
//! static object and must not differ from `pose_t1` unless `dynamic = true`.
//! Primitive kinds are `sphere` (`radius`), `box` (`half_extents`) and
//! `ground-plane` (`height`, the plane `y = height` with y pointing down,
//! limited to a square of half-width 50 around the object origin).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::primitive::Primitive;
use crate::error::{Error, Result};
use crate::geometry::{CameraModel, RigidTransform, Vec3};

pub const MAX_PIXELS: usize = 512 * 384;
pub const GROUND_HEIGHT: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseSpec {
    pub translation: [f64; 3],
    #[serde(default)]
    pub rotation: [f64; 3],
}

impl PoseSpec {
    pub fn new(translation: [f64; 3], rotation: [f64; 3]) -> Self {
        Self {
            translation,
            rotation,
        }
    }

    pub fn at(translation: [f64; 3]) -> Self {
        Self::new(translation, [0.0; 3])
    }

    pub fn transform(&self) -> RigidTransform {
        RigidTransform::from_rotation_vector(
            Vec3::from(self.rotation),
            Vec3::from(self.translation),
        )
    }

    fn validate(&self, field: &str) -> Result<()> {
        if self.translation.iter().chain(&self.rotation).all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::spec(field, "pose components must be finite"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSpec {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub pose: PoseSpec,
}

impl CameraSpec {
    pub fn model(&self) -> Result<CameraModel> {
        CameraModel::new(self.fx, self.fy, self.cx, self.cy, self.pose.transform())
    }

    fn validate(&self, field: &str) -> Result<()> {
        for (name, v) in [("fx", self.fx), ("fy", self.fy)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::spec(
                    format!("{field}.{name}"),
                    format!("focal length must be positive, got {v}"),
                ));
            }
        }
        for (name, v) in [("cx", self.cx), ("cy", self.cy)] {
            if !v.is_finite() {
                return Err(Error::spec(format!("{field}.{name}"), "must be finite"));
            }
        }
        self.pose.validate(&format!("{field}.pose"))
    }
}

/// An object and its pose (object → world) at both timestamps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectTrack {
    pub primitive: Primitive,
    pub pose_t1: PoseSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose_t2: Option<PoseSpec>,
    #[serde(default)]
    pub dynamic: bool,
}

impl ObjectTrack {
    pub fn fixed(primitive: Primitive, pose: PoseSpec) -> Self {
        Self {
            primitive,
            pose_t1: pose,
            pose_t2: None,
            dynamic: false,
        }
    }

    pub fn moving(primitive: Primitive, pose_t1: PoseSpec, pose_t2: PoseSpec) -> Self {
        Self {
            primitive,
            pose_t1,
            pose_t2: Some(pose_t2),
            dynamic: true,
        }
    }

    /// Pose at timestamp 1 or 2. A static object reuses its first pose.
    pub fn pose(&self, time: u8) -> RigidTransform {
        match (time, self.dynamic, self.pose_t2) {
            (2, true, Some(p)) => p.transform(),
            _ => self.pose_t1.transform(),
        }
    }

    fn validate(&self, field: &str) -> Result<()> {
        self.primitive.validate(&format!("{field}.primitive"))?;
        self.pose_t1.validate(&format!("{field}.pose_t1"))?;
        if let Some(p2) = &self.pose_t2 {
            p2.validate(&format!("{field}.pose_t2"))?;
            if !self.dynamic && *p2 != self.pose_t1 {
                return Err(Error::spec(
                    format!("{field}.pose_t2"),
                    "a static object must keep the same pose at both timestamps",
                ));
            }
        } else if self.dynamic {
            return Err(Error::spec(
                format!("{field}.pose_t2"),
                "a dynamic object needs a second pose",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    #[serde(default)]
    pub seed: u64,
    pub camera1: CameraSpec,
    pub camera2: CameraSpec,
    pub objects: Vec<ObjectTrack>,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.objects.is_empty() {
            return Err(Error::spec("objects", "scene needs at least one object"));
        }
        self.validate_rendering()
    }

    /// Every check of [`SceneSpec::validate`] except the object count.
    pub(crate) fn validate_rendering(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::spec("width", "image size must be non-zero"));
        }
        if self.width.saturating_mul(self.height) > MAX_PIXELS {
            return Err(Error::spec(
                "width",
                format!("image has more than {MAX_PIXELS} pixels"),
            ));
        }
        self.camera1.validate("camera1")?;
        self.camera2.validate("camera2")?;
        for (i, o) in self.objects.iter().enumerate() {
            o.validate(&format!("objects[{i}]"))?;
        }
        Ok(())
    }

    /// Parses and validates a TOML scene description.
    pub fn from_toml(text: &str) -> Result<Self> {
        let line_of = |e: &toml::de::Error| {
            e.span()
                .map(|s| format!("line {}", text[..s.start.min(text.len())].matches('\n').count() + 1))
                .unwrap_or_else(|| "document".into())
        };
        let de = toml::de::Deserializer::parse(text).map_err(|e| Error::spec(line_of(&e), e.message().to_string()))?;
        let spec: SceneSpec = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let field = if path.is_empty() || path == "." { line_of(&inner) } else { path };
            Error::spec(field, inner.message().to_string())
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scene spec is always representable")
    }

    pub fn camera(&self, view: u8) -> Result<CameraModel> {
        match view {
            1 => self.camera1.model(),
            _ => self.camera2.model(),
        }
    }

    pub fn has_dynamic_objects(&self) -> bool {
        self.objects.iter().any(|o| o.dynamic)
    }

    /// Built-in scene families: `two-spheres`, `random` and `static`.
    pub fn preset(name: &str, seed: u64) -> Result<Self> {
        let cfg = RandomSceneConfig::default();
        match name {
            "two-spheres" => Ok(two_spheres(seed, &cfg)),
            "random" => Ok(SceneSpec::random(seed, &cfg)),
            "static" => Ok(SceneSpec::random(
                seed,
                &RandomSceneConfig {
                    dynamic_probability: 0.0,
                    force_dynamic: false,
                    ..cfg
                },
            )),
            other => Err(Error::spec(
                "preset",
                format!("unknown preset `{other}` (expected two-spheres, random, static)"),
            )),
        }
    }

    /// Seeded random scene: a ground plane plus spheres and boxes resting on
    /// it, seen by a downward-pitched camera pair.
    pub fn random(seed: u64, cfg: &RandomSceneConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (camera1, camera2) = camera_pair(&mut rng, cfg);
        let n = rng.random_range(cfg.min_objects..=cfg.max_objects);
        let mut objects = vec![ObjectTrack::fixed(
            Primitive::ground(GROUND_HEIGHT),
            PoseSpec::at([0.0; 3]),
        )];
        for k in 0..n {
            let dynamic = (k == 0 && cfg.force_dynamic) || rng.random_bool(cfg.dynamic_probability);
            objects.push(random_object(&mut rng, cfg, dynamic, k as u32 + 1));
        }
        SceneSpec {
            width: cfg.width,
            height: cfg.height,
            seed,
            camera1,
            camera2,
            objects,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomSceneConfig {
    pub width: usize,
    pub height: usize,
    /// Focal length as a multiple of the image width.
    pub focal_ratio: f64,
    pub min_objects: usize,
    pub max_objects: usize,
    pub dynamic_probability: f64,
    /// First object is always dynamic.
    pub force_dynamic: bool,
    /// Range of the translation magnitude of dynamic objects.
    pub motion: (f64, f64),
    /// Largest yaw change of dynamic objects, radians.
    pub max_spin: f64,
    pub camera_motion: bool,
}

impl Default for RandomSceneConfig {
    fn default() -> Self {
        Self {
            width: 128,
            height: 96,
            focal_ratio: 0.86,
            min_objects: 2,
            max_objects: 6,
            dynamic_probability: 0.4,
            force_dynamic: true,
            motion: (1.0, 1.6),
            max_spin: 0.2,
            camera_motion: true,
        }
    }
}

impl RandomSceneConfig {
    pub fn with_size(mut self, width: usize, height: usize) -> Self {
        self.width = width;
        self.height = height;
        self
    }
}

const PITCH: f64 = 0.384; // about 22 degrees downwards

fn camera_pair(rng: &mut ChaCha8Rng, cfg: &RandomSceneConfig) -> (CameraSpec, CameraSpec) {
    let f = cfg.focal_ratio * cfg.width as f64;
    let (cx, cy) = (cfg.width as f64 / 2.0, cfg.height as f64 / 2.0);
    let jitter = |rng: &mut ChaCha8Rng, a: f64| rng.random_range(-a..=a);
    let pose1 = PoseSpec::new(
        [jitter(rng, 0.2), jitter(rng, 0.1), jitter(rng, 0.2)],
        [-PITCH + jitter(rng, 0.03), jitter(rng, 0.05), 0.0],
    );
    let pose2 = if cfg.camera_motion {
        let rel = RigidTransform::from_rotation_vector(
            Vec3::new(jitter(rng, 0.05), jitter(rng, 0.14), jitter(rng, 0.03)),
            Vec3::new(jitter(rng, 0.6), jitter(rng, 0.15), jitter(rng, 0.5)),
        );
        let abs = pose1.transform().compose(&rel);
        let rotvec = nalgebra::Rotation3::from_matrix_unchecked(abs.rotation).scaled_axis();
        PoseSpec::new(abs.translation.into(), rotvec.into())
    } else {
        pose1
    };
    let cam = |pose| CameraSpec {
        fx: f,
        fy: f,
        cx,
        cy,
        pose,
    };
    (cam(pose1), cam(pose2))
}

fn random_object(rng: &mut ChaCha8Rng, cfg: &RandomSceneConfig, dynamic: bool, albedo: u32) -> ObjectTrack {
    let depth = rng.random_range(4.5..8.0);
    let x = rng.random_range(-0.35..0.35) * depth;
    let yaw = rng.random_range(-1.0..1.0);
    let (mut primitive, lift) = if rng.random_bool(0.5) {
        let r = rng.random_range(0.35..0.8);
        (Primitive::sphere(r), r)
    } else {
        let h = [
            rng.random_range(0.3..0.7),
            rng.random_range(0.3..0.7),
            rng.random_range(0.3..0.7),
        ];
        (Primitive::cuboid(h), h[1])
    };
    primitive.albedo = albedo;
    let pose_t1 = PoseSpec::new([x, GROUND_HEIGHT - lift, depth], [0.0, yaw, 0.0]);
    if !dynamic {
        return ObjectTrack::fixed(primitive, pose_t1);
    }
    let heading = rng.random_range(0.0..std::f64::consts::TAU);
    let dist = rng.random_range(cfg.motion.0..cfg.motion.1);
    let spin = rng.random_range(-cfg.max_spin..=cfg.max_spin);
    let pose_t2 = PoseSpec::new(
        [
            x + dist * heading.cos(),
            GROUND_HEIGHT - lift,
            depth + dist * heading.sin(),
        ],
        [0.0, yaw + spin, 0.0],
    );
    ObjectTrack::moving(primitive, pose_t1, pose_t2)
}

fn two_spheres(seed: u64, cfg: &RandomSceneConfig) -> SceneSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (camera1, camera2) = camera_pair(&mut rng, cfg);
    let j = |rng: &mut ChaCha8Rng| rng.random_range(-0.2..0.2);
    let mut still = Primitive::sphere(0.6);
    still.albedo = 1;
    let mut mover = Primitive::sphere(0.5);
    mover.albedo = 2;
    let start = [1.0 + j(&mut rng), GROUND_HEIGHT - 0.5, 5.5 + j(&mut rng)];
    let end = [start[0] - 0.3 + j(&mut rng), start[1], start[2] + 1.2];
    SceneSpec {
        width: cfg.width,
        height: cfg.height,
        seed,
        camera1,
        camera2,
        objects: vec![
            ObjectTrack::fixed(Primitive::ground(GROUND_HEIGHT), PoseSpec::at([0.0; 3])),
            ObjectTrack::fixed(
                still,
                PoseSpec::at([-1.0 + j(&mut rng), GROUND_HEIGHT - 0.6, 6.0 + j(&mut rng)]),
            ),
            ObjectTrack::moving(mover, PoseSpec::at(start), PoseSpec::new(end, [0.0, 0.3, 0.0])),
        ],
    }
}
