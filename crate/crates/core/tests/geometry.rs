mod common;

use dpm_core::geometry::{
    project, se3_apply, se3_compose, se3_inverse, unproject, CameraModel, DepthMap, FrameTag, PixelGrid,
    PointMap, RigidTransform, Vec3,
};
use proptest::prelude::*;
use rand::Rng;

fn camera(f: f64, w: usize, h: usize) -> CameraModel {
    CameraModel::centered(f, w, h, RigidTransform::identity()).unwrap()
}

fn random_transform(r: &mut impl Rng, angle: f64, shift: f64) -> RigidTransform {
    RigidTransform::from_rotation_vector(
        Vec3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)) * angle,
        Vec3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)) * shift,
    )
}

#[test]
fn projection_round_trip_over_ten_thousand_points() {
    let mut r = common::rng(11);
    let (w, h) = (100, 100);
    let cam = CameraModel::new(137.0, 141.0, 50.3, 49.1, RigidTransform::identity()).unwrap();
    let grid = PixelGrid::new(w, h).unwrap();
    let depth: Vec<f64> = (0..w * h).map(|_| r.random_range(0.1..100.0)).collect();
    let dm = DepthMap::new(w, h, depth.clone(), vec![true; w * h]).unwrap();
    let points = unproject(&dm, &cam, &grid).unwrap();
    let proj = project(&points, &cam);
    let (mut px, mut rel) = (0.0f64, 0.0f64);
    for k in 0..w * h {
        let u = grid.homogeneous(k);
        px = px.max((proj.pixels[k].x - u.x).abs()).max((proj.pixels[k].y - u.y).abs());
        rel = rel.max((proj.depths.depths[k] - depth[k]).abs() / depth[k]);
    }
    assert!(px < 1e-7, "pixel error {px:e}");
    assert!(rel < 1e-9, "depth error {rel:e}");
}

#[test]
fn long_compose_chains_stay_orthonormal() {
    let mut r = common::rng(12);
    for _ in 0..5 {
        let mut t = RigidTransform::identity();
        for _ in 0..1000 {
            t = se3_compose(&t, &random_transform(&mut r, 1.0, 2.0));
        }
        assert!(t.orthonormality_error() < 1e-8, "{:e}", t.orthonormality_error());
        assert!((t.rotation.determinant() - 1.0).abs() < 1e-8);
    }
}

#[test]
fn transform_examples() {
    let mut r = common::rng(13);
    let grid = PixelGrid::new(8, 6).unwrap();
    let dm = DepthMap::new(8, 6, (0..48).map(|k| 1.0 + k as f64 * 0.1).collect(), vec![true; 48]).unwrap();
    let p = unproject(&dm, &camera(10.0, 8, 6), &grid).unwrap();
    assert_eq!(se3_apply(&RigidTransform::identity(), &p), p);
    let t = random_transform(&mut r, 2.0, 5.0);
    let back = se3_apply(&se3_inverse(&t), &se3_apply(&t, &p));
    for (a, b) in back.points.iter().zip(&p.points) {
        assert!((a - b).amax() < 1e-9);
    }
    assert_eq!(se3_compose(&RigidTransform::identity(), &t), t);
    let tt = se3_inverse(&se3_inverse(&t));
    assert!((tt.rotation - t.rotation).amax() < 1e-12);
    assert!((tt.translation - t.translation).amax() < 1e-12);
}

#[test]
fn calibration_matrix_shape() {
    let cam = CameraModel::new(120.0, 110.0, 64.0, 48.0, RigidTransform::identity()).unwrap();
    let k = cam.calibration();
    assert_eq!(k[(1, 0)], 0.0);
    assert_eq!(k[(2, 0)], 0.0);
    assert_eq!(k[(2, 1)], 0.0);
    assert_eq!(k[(2, 2)], 1.0);
    assert_eq!(k[(0, 1)], 0.0);
}

#[test]
fn grid_third_row_is_ones() {
    let grid = PixelGrid::new(7, 5).unwrap();
    for k in 0..grid.len() {
        let u = grid.homogeneous(k);
        assert_eq!(u.z, 1.0);
        assert_eq!((u.x - 0.5, u.y - 0.5), ((k % 7) as f64, (k / 7) as f64));
    }
}

#[test]
fn non_finite_points_are_invalidated_on_construction() {
    let pts = vec![Vec3::new(f64::NAN, 0.0, 1.0), Vec3::new(0.0, 0.0, 1.0)];
    let m = PointMap::new(2, 1, pts, vec![true, true], FrameTag::new(1, 1)).unwrap();
    assert_eq!(m.valid, vec![false, true]);
}

proptest! {
    #[test]
    fn projection_is_scale_covariant(
        x in -5.0..5.0f64, y in -5.0..5.0f64, z in 0.1..50.0f64, alpha in 1e-3..1e3f64,
    ) {
        let cam = camera(100.0, 128, 96);
        let p = PointMap::new(1, 1, vec![Vec3::new(x, y, z)], vec![true], FrameTag::new(1, 1)).unwrap();
        let a = project(&p, &cam);
        let b = project(&p.scaled(alpha), &cam);
        prop_assert!((a.pixels[0] - b.pixels[0]).amax() <= 1e-12 * (1.0 + a.pixels[0].amax()));
        prop_assert!((b.depths.depths[0] - alpha * z).abs() <= 1e-12 * alpha * z);
    }

    #[test]
    fn points_behind_the_camera_are_dropped(x in -5.0..5.0f64, y in -5.0..5.0f64, z in -50.0..0.0f64) {
        let p = PointMap::new(1, 1, vec![Vec3::new(x, y, z)], vec![true], FrameTag::new(1, 1)).unwrap();
        prop_assert!(!project(&p, &camera(100.0, 128, 96)).depths.valid[0]);
    }

    #[test]
    fn inverse_undoes_transform(seed in any::<u64>(), x in -10.0..10.0f64, y in -10.0..10.0f64, z in -10.0..10.0f64) {
        let mut r = common::rng(seed);
        let t = random_transform(&mut r, 3.0, 10.0);
        let p = Vec3::new(x, y, z);
        prop_assert!((t.inverse().apply(&t.apply(&p)) - p).amax() < 1e-9);
        prop_assert!(t.compose(&t.inverse()).orthonormality_error() < 1e-12);
    }
}
