#![allow(dead_code)]

use dpm_core::geometry::{FrameTag, PointMap, Vec3};
use dpm_core::synth::{CameraSpec, PoseSpec, SceneSpec};
use dpm_core::RigidTransform;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn iou(a: &[bool], b: &[bool]) -> f64 {
    let inter = a.iter().zip(b).filter(|(x, y)| **x && **y).count();
    let union = a.iter().zip(b).filter(|(x, y)| **x || **y).count();
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn median_depth(map: &PointMap) -> f64 {
    median(map.valid_points().map(|(_, p)| p.z).collect())
}

/// Full scan over every target pixel in index order; first of equal
/// distances wins.
pub fn naive_nearest(query: &PointMap, target: &PointMap) -> Vec<Option<(usize, f64)>> {
    query
        .points
        .iter()
        .zip(&query.valid)
        .map(|(q, ok)| {
            if !*ok {
                return None;
            }
            let mut best: Option<(usize, f64)> = None;
            for (i, (p, v)) in target.points.iter().zip(&target.valid).enumerate() {
                if !*v {
                    continue;
                }
                let d = q - p;
                let d2 = d.x * d.x + d.y * d.y + d.z * d.z;
                if best.is_none_or(|(_, b)| d2 < b) {
                    best = Some((i, d2));
                }
            }
            best.map(|(i, d2)| (i, d2.sqrt()))
        })
        .collect()
}

/// A random loss instance: ground truth in front of the camera, a noisy
/// prediction, a few invalid pixels and confidences in `[0.05, 0.95]`.
pub fn loss_instance(seed: u64, width: usize, height: usize) -> (PointMap, PointMap, Vec<f64>) {
    let mut r = rng(seed);
    let n = width * height;
    let mut gt = Vec::with_capacity(n);
    let mut pred = Vec::with_capacity(n);
    let mut valid = Vec::with_capacity(n);
    let noise = r.random_range(0.01..0.5);
    for _ in 0..n {
        let g = Vec3::new(
            r.random_range(-2.0..2.0),
            r.random_range(-1.5..1.5),
            r.random_range(2.0..9.0),
        );
        let e = Vec3::new(
            r.random_range(-1.0..1.0),
            r.random_range(-1.0..1.0),
            r.random_range(-1.0..1.0),
        );
        gt.push(g);
        pred.push(g * r.random_range(0.5..2.0) + e * noise * g.norm());
        valid.push(r.random_bool(0.9));
    }
    let conf = (0..n).map(|_| r.random_range(0.05..0.95)).collect();
    let tag = FrameTag::new(1, 1);
    (
        PointMap::new(width, height, pred, valid.clone(), tag).unwrap(),
        PointMap::new(width, height, gt, valid, tag).unwrap(),
        conf,
    )
}

/// Replaces the second camera with one displaced by `rel` from the first.
pub fn with_camera_offset(mut spec: SceneSpec, rel: &RigidTransform) -> SceneSpec {
    let abs = spec.camera1.pose.transform().compose(rel);
    let rotvec = nalgebra::Rotation3::from_matrix_unchecked(abs.rotation).scaled_axis();
    spec.camera2 = CameraSpec {
        pose: PoseSpec::new(abs.translation.into(), rotvec.into()),
        ..spec.camera1
    };
    spec
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub mod monte_carlo {
    //! Noisy-input experiments whose observed statistics are pinned in
    //! `tests/oracles/calibration.toml`.

    use dpm_core::geometry::{PixelGrid, Vec3};
    use dpm_core::metrics::{rpe_rot, rpe_trans};
    use dpm_core::solvers::{estimate_camera_motion, object_mask, recover_focal, track_object, MaskMode};
    use dpm_core::synth::{perturb, RandomSceneConfig, SceneSample, SceneSpec};
    use rand::Rng;

    pub const SEEDS: u64 = 100;

    /// Relative focal error per seed with 10% of the valid points moved onto
    /// another pixel's ray at three times their depth.
    pub fn focal_with_outliers() -> Vec<f64> {
        let cfg = RandomSceneConfig {
            focal_ratio: 200.0 / 128.0,
            ..RandomSceneConfig::default()
        };
        (0..SEEDS)
            .map(|seed| {
                let s = SceneSample::generate(&SceneSpec::random(seed, &cfg)).unwrap();
                let cam = s.ground_truth.camera1;
                assert_eq!(cam.fx, 200.0);
                let grid = PixelGrid::new(s.quad.width, s.quad.height).unwrap();
                let mut map = s.quad.p11.clone();
                let mut r = super::rng(seed ^ 0xF0CA1);
                let valid: Vec<usize> = map.valid_points().map(|(k, _)| k).collect();
                for &k in &valid {
                    if !r.random_bool(0.1) {
                        continue;
                    }
                    let j = r.random_range(0..grid.len());
                    map.points[k] = cam.ray(&grid.homogeneous(j)) * (3.0 * map.points[k].z);
                }
                let f = recover_focal(&map, &grid, cam.principal_point()).unwrap();
                (f - 200.0).abs() / 200.0
            })
            .collect()
    }

    fn noisy(seed: u64) -> (SceneSample, dpm_core::DpmQuad, dpm_core::DpmQuad) {
        let s = SceneSample::generate(&SceneSpec::preset("random", seed).unwrap()).unwrap();
        let sigma = 0.01 * super::median_depth(&s.quad.p11);
        let q = perturb(&s.quad, sigma, seed).unwrap();
        let sw = perturb(&s.swapped, sigma, seed + 1_000_000).unwrap();
        (s, q, sw)
    }

    /// Camera rotation error (degrees) per seed at σ = 1% of the median depth.
    pub fn camera_rotation_deg() -> Vec<f64> {
        (0..SEEDS)
            .map(|seed| {
                let (s, q, sw) = noisy(seed);
                let cm = estimate_camera_motion(&q, &sw, MaskMode::GroundTruth, true).unwrap();
                rpe_rot(&s.ground_truth.camera_motion.rotation, &cm.transform.rotation)
                    .unwrap()
                    .to_degrees()
            })
            .collect()
    }

    /// Per dynamic object: rotation error (radians) and the displacement
    /// error at the object's centroid, at σ = 1% of the median depth.
    pub fn tracking_errors() -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for seed in 0..SEEDS {
            let (s, q, _) = noisy(seed);
            for obj in s.ground_truth.objects.iter().filter(|o| o.dynamic) {
                let mask = object_mask(&s.quad, obj.id);
                if mask.iter().filter(|m| **m).count() < 20 {
                    continue;
                }
                let est = track_object(&q, &mask).unwrap();
                let pts: Vec<Vec3> = s.quad.p11.valid_points().filter(|(k, _)| mask[*k]).map(|(_, p)| *p).collect();
                let c = pts.iter().sum::<Vec3>() / pts.len() as f64;
                out.push((
                    rpe_rot(&obj.motion.rotation, &est.rotation).unwrap(),
                    rpe_trans(&obj.motion.apply(&c), &est.apply(&c)),
                ));
            }
        }
        out
    }
}
