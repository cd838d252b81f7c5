use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::geometry::{PixelGrid, PointMap};
use crate::numeric::pairwise_sum;

pub const MIN_FOCAL_POINTS: usize = 10;
const MAX_ITERATIONS: usize = 10;

/// Recovers a shared focal length from `U·diag(Λ) = K·P` with a known
/// principal point.
///
/// Minimises `Σ ‖(uᵢ − c) − f·(xᵢ/zᵢ, yᵢ/zᵢ)‖` by Weiszfeld-style reweighted
/// least squares started from the closed-form least-squares focal.
pub fn recover_focal(map: &PointMap, grid: &PixelGrid, principal_point: Vector2<f64>) -> Result<f64> {
    if map.width != grid.width() || map.height != grid.height() {
        return Err(Error::Argument("point map and pixel grid differ in size".into()));
    }
    let mut obs = Vec::new();
    let mut rays = Vec::new();
    for (k, p) in map.valid_points() {
        if p.z > 0.0 {
            let u = grid.homogeneous(k);
            obs.push(Vector2::new(u.x, u.y) - principal_point);
            rays.push(Vector2::new(p.x / p.z, p.y / p.z));
        }
    }
    if obs.len() < MIN_FOCAL_POINTS {
        return Err(Error::InsufficientData {
            needed: MIN_FOCAL_POINTS,
            got: obs.len(),
        });
    }

    let weighted = |w: &[f64]| -> (f64, f64) {
        let num: Vec<f64> = obs.iter().zip(&rays).zip(w).map(|((a, b), w)| w * a.dot(b)).collect();
        let den: Vec<f64> = rays.iter().zip(w).map(|(b, w)| w * b.dot(b)).collect();
        (pairwise_sum(&num), pairwise_sum(&den))
    };

    let (num, den) = weighted(&vec![1.0; obs.len()]);
    let scale = rays.iter().map(|b| b.norm()).fold(0.0, f64::max);
    if !(den > 1e-24 * obs.len() as f64) || scale < 1e-12 {
        return Err(Error::DegenerateGeometry(
            "all points lie on the optical axis".into(),
        ));
    }
    let mut focal = num / den;
    for _ in 0..MAX_ITERATIONS {
        let floor = 1e-12 * focal.abs().max(1.0);
        let w: Vec<f64> = obs
            .iter()
            .zip(&rays)
            .map(|(a, b)| 1.0 / (a - b * focal).norm().max(floor))
            .collect();
        let (num, den) = weighted(&w);
        let next = num / den;
        let done = (next - focal).abs() <= 1e-15 * focal.abs();
        focal = next;
        if done {
            break;
        }
    }
    if !focal.is_finite() || focal <= 0.0 {
        return Err(Error::DegenerateGeometry(format!("recovered focal {focal} is not positive")));
    }
    Ok(focal)
}
