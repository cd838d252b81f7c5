//! Exact ground-truth dynamic point maps for analytic rigid scenes.

mod primitive;
mod scene;

pub use primitive::{Primitive, Shape, GROUND_HALF_EXTENT};
pub use scene::{
    CameraSpec, ObjectTrack, PoseSpec, RandomSceneConfig, SceneSpec, GROUND_HEIGHT, MAX_PIXELS,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{unproject, CameraModel, DepthMap, PixelGrid, PointMap, RigidTransform, Vec3};
use crate::quad::{frame_tags, ConfidenceGrid, DpmQuad, FlowField, FlowKind, FlowSet, MapId};

/// Largest distance, in pixel footprints of image 2, between the two samples
/// of a ground-truth correspondence.
pub const CORRESPONDENCE_TOLERANCE_PX: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct RaycastImage {
    pub depth: DepthMap,
    pub object_ids: Vec<Option<u32>>,
}

/// Renders depth and object ids of camera `view` with all objects posed at
/// timestamp `time`. Misses are invalid pixels; a scene without objects
/// renders as all-invalid.
pub fn raycast(spec: &SceneSpec, view: u8, time: u8) -> Result<RaycastImage> {
    spec.validate_rendering()?;
    if !matches!(view, 1 | 2) || !matches!(time, 1 | 2) {
        return Err(Error::Argument(format!(
            "camera and timestamp must be 1 or 2, got {view} and {time}"
        )));
    }
    let cam = spec.camera(view)?;
    Ok(raycast_posed(spec, &cam, &posed_objects(spec, time)))
}

fn posed_objects(spec: &SceneSpec, time: u8) -> Vec<(Primitive, RigidTransform)> {
    spec.objects
        .iter()
        .map(|o| (o.primitive, o.pose(time)))
        .collect()
}

fn raycast_posed(
    spec: &SceneSpec,
    cam: &CameraModel,
    objects: &[(Primitive, RigidTransform)],
) -> RaycastImage {
    let grid = PixelGrid::new(spec.width, spec.height).expect("validated size");
    let origin = cam.pose.translation;
    let hits: Vec<Option<(f64, u32)>> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let dir = cam.pose.rotation * cam.ray(&grid.homogeneous(k));
            let mut best: Option<(f64, u32)> = None;
            for (id, (prim, pose)) in objects.iter().enumerate() {
                if let Some(lambda) = prim.intersect(pose, &origin, &dir) {
                    if best.is_none_or(|(b, _)| lambda < b) {
                        best = Some((lambda, id as u32));
                    }
                }
            }
            best
        })
        .collect();
    let depths = hits.iter().map(|h| h.map_or(0.0, |(d, _)| d)).collect();
    let valid = hits.iter().map(|h| h.is_some()).collect();
    RaycastImage {
        depth: DepthMap {
            width: spec.width,
            height: spec.height,
            depths,
            valid,
        },
        object_ids: hits.iter().map(|h| h.map(|(_, id)| id)).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectMotion {
    pub id: u32,
    pub dynamic: bool,
    /// Motion from the first to the second timestamp, in camera-1 coordinates.
    pub motion: RigidTransform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub camera1: CameraModel,
    pub camera2: CameraModel,
    /// Maps camera-2 coordinates to camera-1 coordinates.
    pub camera_motion: RigidTransform,
    pub objects: Vec<ObjectMotion>,
    pub flows: FlowSet,
    /// For image-1 pixels that observe the same physical point as some image-2
    /// pixel (within [`CORRESPONDENCE_TOLERANCE_PX`]), that pixel.
    pub correspondence: Vec<Option<usize>>,
}

impl GroundTruth {
    pub fn object(&self, id: u32) -> Option<&ObjectMotion> {
        self.objects.iter().find(|o| o.id == id)
    }
}

/// A generated pair: the quad referred to camera 1, its input-swapped
/// counterpart referred to camera 2, and ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSample {
    pub quad: DpmQuad,
    pub swapped: DpmQuad,
    pub ground_truth: GroundTruth,
}

impl SceneSample {
    pub fn generate(spec: &SceneSpec) -> Result<Self> {
        let (quad, ground_truth) = build_quad(spec)?;
        let swapped = build_swapped_quad(spec)?;
        Ok(Self {
            quad,
            swapped,
            ground_truth,
        })
    }
}

/// Builds the quad referred to `(t1, π1)` together with ground truth.
pub fn build_quad(spec: &SceneSpec) -> Result<(DpmQuad, GroundTruth)> {
    spec.validate()?;
    let built = build_oriented(spec, false)?;
    let gt = ground_truth(spec, &built)?;
    Ok((built.quad, gt))
}

/// The quad obtained by swapping the two inputs: image 2 comes first and all
/// maps are referred to camera 2.
pub fn build_swapped_quad(spec: &SceneSpec) -> Result<DpmQuad> {
    spec.validate()?;
    Ok(build_oriented(spec, true)?.quad)
}

struct Oriented {
    quad: DpmQuad,
    cam_a: CameraModel,
    cam_b: CameraModel,
    /// Raw camera-frame maps of each image.
    local_a: PointMap,
    local_b: PointMap,
    /// World motion of each object from time A to time B, `None` if static.
    world_motion: Vec<Option<RigidTransform>>,
}

fn build_oriented(spec: &SceneSpec, swapped: bool) -> Result<Oriented> {
    let (view_a, view_b) = if swapped { (2, 1) } else { (1, 2) };
    let (time_a, time_b) = (view_a, view_b);
    let cam_a = spec.camera(view_a)?;
    let cam_b = spec.camera(view_b)?;
    let grid = PixelGrid::new(spec.width, spec.height)?;

    let ray_a = raycast_posed(spec, &cam_a, &posed_objects(spec, time_a));
    let ray_b = raycast_posed(spec, &cam_b, &posed_objects(spec, time_b));
    let local_a = unproject(&ray_a.depth, &cam_a, &grid)?;
    let local_b = unproject(&ray_b.depth, &cam_b, &grid)?;

    let world_motion: Vec<Option<RigidTransform>> = spec
        .objects
        .iter()
        .map(|o| {
            o.dynamic
                .then(|| o.pose(time_b).compose(&o.pose(time_a).inverse()))
        })
        .collect();
    let a_from_world = cam_a.pose.inverse();

    let map_points = |local: &PointMap,
                      cam: &CameraModel,
                      ids: &[Option<u32>],
                      motion: &(dyn Fn(usize) -> Option<RigidTransform> + Sync)|
     -> Vec<Vec3> {
        local
            .points
            .par_iter()
            .enumerate()
            .map(|(k, p)| {
                if !local.valid[k] {
                    return *p;
                }
                let mut w = cam.pose.apply(p);
                if let Some(m) = ids[k].and_then(|id| motion(id as usize)) {
                    w = m.apply(&w);
                }
                a_from_world.apply(&w)
            })
            .collect()
    };
    let forward = |id: usize| world_motion[id];
    let backward = |id: usize| world_motion[id].map(|m| m.inverse());
    let none = |_: usize| None;

    let tags = frame_tags(time_a, view_a);
    let valid_a = local_a.valid.clone();
    let valid_b = local_b.valid.clone();
    let mk = |points: Vec<Vec3>, valid: &[bool], id: MapId| PointMap {
        width: spec.width,
        height: spec.height,
        points,
        valid: valid.to_vec(),
        frame: tags[id.index()],
    };

    let p11 = local_a.clone().with_frame(tags[0]);
    let p22 = mk(map_points(&local_b, &cam_b, &ray_b.object_ids, &none), &valid_b, MapId::P22);
    let dyn_a = dynamic_mask(spec, &ray_a.object_ids);
    let dyn_b = dynamic_mask(spec, &ray_b.object_ids);

    // Static pixels are copied rather than round-tripped through world space.
    let mut p12 = mk(map_points(&local_a, &cam_a, &ray_a.object_ids, &forward), &valid_a, MapId::P12);
    let mut p21 = mk(map_points(&local_b, &cam_b, &ray_b.object_ids, &backward), &valid_b, MapId::P21);
    for k in 0..grid.len() {
        if !dyn_a[k] {
            p12.points[k] = p11.points[k];
        }
        if !dyn_b[k] {
            p21.points[k] = p22.points[k];
        }
    }

    let confidence = [
        ConfidenceGrid::ground_truth(&valid_a),
        ConfidenceGrid::ground_truth(&valid_b),
        ConfidenceGrid::ground_truth(&valid_a),
        ConfidenceGrid::ground_truth(&valid_b),
    ];
    let quad = DpmQuad {
        width: spec.width,
        height: spec.height,
        p11,
        p21,
        p12,
        p22,
        confidence,
        object_ids: [ray_a.object_ids, ray_b.object_ids],
        dynamic_masks: [dyn_a, dyn_b],
    };
    Ok(Oriented {
        quad,
        cam_a,
        cam_b,
        local_a,
        local_b,
        world_motion,
    })
}

fn dynamic_mask(spec: &SceneSpec, ids: &[Option<u32>]) -> Vec<bool> {
    ids.iter()
        .map(|id| id.is_some_and(|i| spec.objects[i as usize].dynamic))
        .collect()
}

fn ground_truth(spec: &SceneSpec, built: &Oriented) -> Result<GroundTruth> {
    let quad = &built.quad;
    let (cam1, cam2) = (built.cam_a, built.cam_b);
    let camera_motion = cam1.pose.inverse().compose(&cam2.pose);
    let objects = spec
        .objects
        .iter()
        .enumerate()
        .map(|(id, o)| ObjectMotion {
            id: id as u32,
            dynamic: o.dynamic,
            motion: match built.world_motion[id] {
                Some(m) => cam1.pose.inverse().compose(&m).compose(&cam1.pose),
                None => RigidTransform::identity(),
            },
        })
        .collect();

    // Image 1's points at t2 expressed directly in camera 2: P1(t2, π2).
    let cam2_from_world = cam2.pose.inverse();
    let ids1 = &quad.object_ids[0];
    let at_t2_world: Vec<Option<Vec3>> = built
        .local_a
        .points
        .iter()
        .enumerate()
        .map(|(k, p)| {
            built.local_a.valid[k].then(|| {
                let w = cam1.pose.apply(p);
                match ids1[k].and_then(|id| built.world_motion[id as usize]) {
                    Some(m) => m.apply(&w),
                    None => w,
                }
            })
        })
        .collect();
    let p1_t2_pi2 = PointMap {
        points: at_t2_world
            .iter()
            .map(|w| w.map_or(Vec3::zeros(), |w| cam2_from_world.apply(&w)))
            .collect(),
        valid: quad.p11.valid.clone(),
        ..quad.p11.clone()
    };
    let p2_t2_pi2 = &built.local_b;

    let flows = FlowSet {
        scene_forward: Some(FlowField::difference(
            FlowKind::SceneForward,
            &p1_t2_pi2,
            &quad.p11,
        )?),
        scene_backward: Some(FlowField::difference(
            FlowKind::SceneBackward,
            &quad.p21,
            p2_t2_pi2,
        )?),
        object_forward: FlowField::difference(FlowKind::ObjectForward, &quad.p12, &quad.p11)?,
        object_backward: FlowField::difference(FlowKind::ObjectBackward, &quad.p21, &quad.p22)?,
    };

    let grid = PixelGrid::new(spec.width, spec.height)?;
    let depth2 = &built.local_b;
    let ids2 = &quad.object_ids[1];
    let correspondence = (0..grid.len())
        .map(|k| {
            let q = p1_t2_pi2.points[k];
            let (uv, _) = cam2.project_point(&q).filter(|_| quad.p11.valid[k])?;
            let i = grid.containing(&uv)?;
            if ids2[i] != ids1[k] || !depth2.valid[i] {
                return None;
            }
            let footprint = depth2.points[i].z / cam2.fx.min(cam2.fy);
            let gap = (quad.p21.points[i] - quad.p11.points[k]).norm();
            (gap <= CORRESPONDENCE_TOLERANCE_PX * footprint).then_some(i)
        })
        .collect();

    Ok(GroundTruth {
        camera1: cam1,
        camera2: cam2,
        camera_motion,
        objects,
        flows,
        correspondence,
    })
}

/// Adds i.i.d. zero-mean Gaussian noise of standard deviation `sigma` to every
/// valid point of every map. Each pixel of each map has its own random stream
/// keyed by `seed`, so the result does not depend on scheduling.
pub fn perturb(quad: &DpmQuad, sigma: f64, seed: u64) -> Result<DpmQuad> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::Argument(format!(
            "noise level must be a finite non-negative number, got {sigma}"
        )));
    }
    let mut out = quad.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    let n = quad.len() as u64;
    for id in MapId::ALL {
        let base = id.index() as u64 * n;
        let map = out.map_mut(id);
        let valid = map.valid.clone();
        map.points.par_iter_mut().enumerate().for_each(|(k, p)| {
            if !valid[k] {
                return;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(base + k as u64);
            let noise = Vec3::from_fn(|_, _| StandardNormal.sample(&mut rng));
            *p += noise * sigma;
        });
    }
    Ok(out)
}
