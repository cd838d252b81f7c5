use crate::error::{Error, Result};
use crate::geometry::{median_norm, DepthMap, Mat3, PointMap, Vec3};
use crate::numeric::{median, pairwise_sum};
use crate::quad::FlowField;

use super::losses::Normalization;

/// Rotations further than this from orthonormal are rejected.
pub const ROTATION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeError {
    pub value: f64,
    pub pixels: usize,
    /// Pixels dropped because the normalised ground-truth point has zero norm.
    pub excluded: usize,
}

/// Mean relative point error after normalising each cloud by its median norm
/// over the mask.
pub fn l_rel(pred: &PointMap, gt: &PointMap, mask: &[bool]) -> Result<RelativeError> {
    if pred.len() != gt.len() || mask.len() != gt.len() {
        return Err(Error::Argument("prediction, ground truth and mask differ in size".into()));
    }
    let sel: Vec<bool> = (0..gt.len())
        .map(|i| mask[i] && pred.valid[i] && gt.valid[i])
        .collect();
    if !sel.iter().any(|s| *s) {
        return Err(Error::Argument("mask selects no valid pixel".into()));
    }
    let zp = median_norm(pred, Some(&sel)).unwrap_or(0.0);
    let zg = median_norm(gt, Some(&sel)).unwrap_or(0.0);
    if !(zp > 0.0) || !(zg > 0.0) {
        return Err(Error::DegenerateInput("median norm is zero".into()));
    }
    let mut terms = Vec::new();
    let mut excluded = 0;
    for i in (0..gt.len()).filter(|i| sel[*i]) {
        let g = gt.points[i] / zg;
        let gn = g.norm();
        if gn == 0.0 {
            excluded += 1;
            continue;
        }
        terms.push((pred.points[i] / zp - g).norm() / gn);
    }
    if terms.is_empty() {
        return Err(Error::DegenerateInput("every selected ground-truth point is zero".into()));
    }
    Ok(RelativeError {
        value: pairwise_sum(&terms) / terms.len() as f64,
        pixels: terms.len(),
        excluded,
    })
}

/// Relative error of several maps scored together: `Joint` stacks them under
/// one median normaliser, `PerMap` normalises each map on its own and pools
/// the per-pixel terms.
pub fn l_rel_stacked(
    preds: &[&PointMap],
    gts: &[&PointMap],
    masks: &[&[bool]],
    mode: Normalization,
) -> Result<RelativeError> {
    if preds.len() != gts.len() || preds.len() != masks.len() || preds.is_empty() {
        return Err(Error::Argument("need matching non-empty lists of maps".into()));
    }
    match mode {
        Normalization::Joint => {
            let pred = PointMap::stack(preds)?;
            let gt = PointMap::stack(gts)?;
            let mask: Vec<bool> = masks.iter().flat_map(|m| m.iter().copied()).collect();
            l_rel(&pred, &gt, &mask)
        }
        Normalization::PerMap => {
            let mut total = 0.0;
            let (mut pixels, mut excluded) = (0, 0);
            for ((p, g), m) in preds.iter().zip(gts).zip(masks) {
                let r = l_rel(p, g, m)?;
                total += r.value * r.pixels as f64;
                pixels += r.pixels;
                excluded += r.excluded;
            }
            Ok(RelativeError {
                value: total / pixels as f64,
                pixels,
                excluded,
            })
        }
    }
}

/// Mean end-point error over `mask` (every jointly valid pixel if `None`).
pub fn epe(pred: &FlowField, gt: &FlowField, mask: Option<&[bool]>) -> Result<f64> {
    if pred.width != gt.width || pred.height != gt.height || pred.vectors.len() != gt.vectors.len() {
        return Err(Error::Argument("flow fields differ in shape".into()));
    }
    if mask.is_some_and(|m| m.len() != gt.vectors.len()) {
        return Err(Error::Argument("mask has the wrong length".into()));
    }
    let terms: Vec<f64> = (0..gt.vectors.len())
        .filter(|&i| pred.valid[i] && gt.valid[i] && mask.is_none_or(|m| m[i]))
        .map(|i| (pred.vectors[i] - gt.vectors[i]).norm())
        .collect();
    if terms.is_empty() {
        return Err(Error::Argument("mask selects no valid flow vector".into()));
    }
    Ok(pairwise_sum(&terms) / terms.len() as f64)
}

fn check_rotation(r: &Mat3, name: &str) -> Result<()> {
    let ortho = (r.transpose() * r - Mat3::identity()).amax();
    let det = r.determinant();
    if !(ortho <= ROTATION_TOLERANCE) || !((det - 1.0).abs() <= ROTATION_TOLERANCE) {
        return Err(Error::Argument(format!(
            "{name} is not a rotation (orthonormality error {ortho:e}, det {det})"
        )));
    }
    Ok(())
}

/// Geodesic angle `arccos((tr(RᵀR̂) − 1)/2)` in radians, within `[0, π]`.
pub fn rpe_rot(r: &Mat3, r_hat: &Mat3) -> Result<f64> {
    check_rotation(r, "R")?;
    check_rotation(r_hat, "R_hat")?;
    let c = ((r.transpose() * r_hat).trace() - 1.0) / 2.0;
    Ok(c.clamp(-1.0, 1.0).acos())
}

pub fn rpe_trans(t: &Vec3, t_hat: &Vec3) -> f64 {
    (t - t_hat).norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DepthAlign {
    #[default]
    None,
    /// Rescale the prediction so its median matches the ground truth's.
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthMetrics {
    pub abs_rel: f64,
    pub delta_1_25: f64,
    pub pixels: usize,
}

pub fn depth_metrics(
    pred: &DepthMap,
    gt: &DepthMap,
    mask: Option<&[bool]>,
    align: DepthAlign,
) -> Result<DepthMetrics> {
    if pred.depths.len() != gt.depths.len() || mask.is_some_and(|m| m.len() != gt.depths.len()) {
        return Err(Error::Argument("depth maps and mask differ in size".into()));
    }
    let idx: Vec<usize> = (0..gt.depths.len())
        .filter(|&i| gt.valid[i] && pred.valid[i] && gt.depths[i] > 0.0 && mask.is_none_or(|m| m[i]))
        .collect();
    if idx.is_empty() {
        return Err(Error::Argument("no pixel with positive ground-truth depth".into()));
    }
    let scale = match align {
        DepthAlign::None => 1.0,
        DepthAlign::Median => {
            let mp = median(&idx.iter().map(|&i| pred.depths[i]).collect::<Vec<_>>()).unwrap();
            let mg = median(&idx.iter().map(|&i| gt.depths[i]).collect::<Vec<_>>()).unwrap();
            if !(mp > 0.0) {
                return Err(Error::DegenerateInput("median predicted depth is zero".into()));
            }
            mg / mp
        }
    };
    let mut rel = Vec::with_capacity(idx.len());
    let mut inliers = 0usize;
    for &i in &idx {
        let (p, g) = (pred.depths[i] * scale, gt.depths[i]);
        rel.push((p - g).abs() / g);
        if (p / g).max(g / p) < 1.25 {
            inliers += 1;
        }
    }
    Ok(DepthMetrics {
        abs_rel: pairwise_sum(&rel) / idx.len() as f64,
        delta_1_25: inliers as f64 / idx.len() as f64,
        pixels: idx.len(),
    })
}
