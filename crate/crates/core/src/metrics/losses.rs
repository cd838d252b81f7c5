//! Scale-invariant regression loss and its confidence-calibrated form.
//!
//! Both clouds are divided by their mean point norm over the pixels valid in
//! both, and the per-pixel loss is the distance between the normalised points.

use crate::error::{Error, Result};
use crate::geometry::{PointMap, Vec3};
use crate::numeric::pairwise_sum;

pub const DEFAULT_ALPHA: f64 = 0.2;

/// How several maps are normalised when scored together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Stack the maps and normalise the stack once.
    #[default]
    Joint,
    /// Normalise each map by its own statistic.
    PerMap,
}

struct Normalized {
    joint: Vec<bool>,
    count: usize,
    pred_scale: f64,
    gt_scale: f64,
}

fn normalizers(pred: &PointMap, gt: &PointMap) -> Result<Normalized> {
    if pred.len() != gt.len() {
        return Err(Error::Argument(format!(
            "prediction has {} pixels, ground truth {}",
            pred.len(),
            gt.len()
        )));
    }
    let joint: Vec<bool> = pred.valid.iter().zip(&gt.valid).map(|(a, b)| *a && *b).collect();
    let count = joint.iter().filter(|v| **v).count();
    if count == 0 {
        return Err(Error::DegenerateInput("no pixel is valid in both maps".into()));
    }
    let mean_norm = |m: &PointMap| {
        let norms: Vec<f64> = m
            .points
            .iter()
            .zip(&joint)
            .filter(|(_, v)| **v)
            .map(|(p, _)| p.norm())
            .collect();
        pairwise_sum(&norms) / count as f64
    };
    let (pred_scale, gt_scale) = (mean_norm(pred), mean_norm(gt));
    if !(pred_scale > 0.0) || !(gt_scale > 0.0) {
        return Err(Error::DegenerateInput(
            "point cloud has zero mean norm".into(),
        ));
    }
    Ok(Normalized {
        joint,
        count,
        pred_scale,
        gt_scale,
    })
}

/// Per-pixel loss; `None` where either map is invalid.
pub fn l_reg_per_pixel(pred: &PointMap, gt: &PointMap) -> Result<Vec<Option<f64>>> {
    let n = normalizers(pred, gt)?;
    Ok((0..pred.len())
        .map(|i| {
            n.joint[i].then(|| {
                (pred.points[i] / n.pred_scale - gt.points[i] / n.gt_scale).norm()
            })
        })
        .collect())
}

pub fn l_reg(pred: &PointMap, gt: &PointMap, pixel: usize) -> Result<f64> {
    if pixel >= pred.len() {
        return Err(Error::Argument(format!("pixel {pixel} out of range")));
    }
    l_reg_per_pixel(pred, gt)?[pixel]
        .ok_or_else(|| Error::Argument(format!("pixel {pixel} is not valid in both maps")))
}

/// Mean of the per-pixel loss over `mask` (all jointly valid pixels if `None`).
pub fn l_reg_mean(pred: &PointMap, gt: &PointMap, mask: Option<&[bool]>) -> Result<f64> {
    let per = l_reg_per_pixel(pred, gt)?;
    let vals: Vec<f64> = per
        .iter()
        .enumerate()
        .filter(|(i, _)| mask.is_none_or(|m| m[*i]))
        .filter_map(|(_, v)| *v)
        .collect();
    if vals.is_empty() {
        return Err(Error::Argument("mask selects no valid pixel".into()));
    }
    Ok(pairwise_sum(&vals) / vals.len() as f64)
}

fn check_confidence(conf: &[f64], len: usize, alpha: f64) -> Result<()> {
    if conf.len() != len {
        return Err(Error::Argument("confidence grid has the wrong length".into()));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Argument(format!("alpha must be positive, got {alpha}")));
    }
    if let Some((i, c)) = conf.iter().enumerate().find(|(_, c)| !(**c > 0.0 && **c <= 1.0)) {
        return Err(Error::Domain(format!(
            "confidence {c} at pixel {i} is outside (0, 1]"
        )));
    }
    Ok(())
}

/// `(1/N) Σ [Cᵢ·L_reg(i) − α·log Cᵢ]` over the `N` jointly valid pixels.
pub fn l_conf(pred: &PointMap, gt: &PointMap, conf: &[f64], alpha: f64) -> Result<f64> {
    check_confidence(conf, pred.len(), alpha)?;
    let per = l_reg_per_pixel(pred, gt)?;
    let terms: Vec<f64> = per
        .iter()
        .zip(conf)
        .filter_map(|(l, c)| l.map(|l| c * l - alpha * c.ln()))
        .collect();
    Ok(pairwise_sum(&terms) / terms.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceLossGradient {
    /// ∂L/∂p̂ per pixel, zero at excluded pixels.
    pub points: Vec<Vec3>,
    /// ∂L/∂C per pixel, zero at excluded pixels.
    pub confidence: Vec<f64>,
}

/// Analytic gradient of [`l_conf`] with respect to the predicted points and
/// the confidences, differentiating through the prediction's normaliser.
pub fn l_conf_grad(
    pred: &PointMap,
    gt: &PointMap,
    conf: &[f64],
    alpha: f64,
) -> Result<ConfidenceLossGradient> {
    check_confidence(conf, pred.len(), alpha)?;
    let n = normalizers(pred, gt)?;
    let count = n.count as f64;
    let len = pred.len();
    let mut unit = vec![Vec3::zeros(); len];
    let mut dconf = vec![0.0; len];
    for i in 0..len {
        if !n.joint[i] {
            continue;
        }
        let r = pred.points[i] / n.pred_scale - gt.points[i] / n.gt_scale;
        let l = r.norm();
        dconf[i] = (l - alpha / conf[i]) / count;
        if l > 0.0 {
            unit[i] = r / l;
        }
    }
    // Σ Cᵢ eᵢ·p̂ᵢ, the coupling through the mean-norm normaliser.
    let coupling: Vec<f64> = (0..len)
        .filter(|i| n.joint[*i])
        .map(|i| conf[i] * unit[i].dot(&pred.points[i]))
        .collect();
    let coupling = pairwise_sum(&coupling);
    let m = n.pred_scale;
    let points = (0..len)
        .map(|k| {
            if !n.joint[k] {
                return Vec3::zeros();
            }
            let p = pred.points[k];
            let norm = p.norm();
            let dir = if norm > 0.0 { p / norm } else { Vec3::zeros() };
            (unit[k] * (conf[k] / m) - dir * (coupling / (m * m * count))) / count
        })
        .collect();
    Ok(ConfidenceLossGradient {
        points,
        confidence: dconf,
    })
}

/// Per-pixel minimiser of [`l_conf`] over `C ∈ (0, 1]` for a fixed
/// prediction: `min(1, α / L_reg)`, and 1 where the regression loss vanishes.
pub fn optimal_confidence(pred: &PointMap, gt: &PointMap, alpha: f64) -> Result<Vec<Option<f64>>> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Argument(format!("alpha must be positive, got {alpha}")));
    }
    Ok(l_reg_per_pixel(pred, gt)?
        .into_iter()
        .map(|l| l.map(|l| if l > alpha { alpha / l } else { 1.0 }))
        .collect())
}

/// Confidence loss over several maps at once; confidences are given per map.
pub fn stacked_l_conf(
    preds: &[&PointMap],
    gts: &[&PointMap],
    confs: &[&[f64]],
    alpha: f64,
    mode: Normalization,
) -> Result<f64> {
    if preds.len() != gts.len() || preds.len() != confs.len() || preds.is_empty() {
        return Err(Error::Argument("need matching non-empty lists of maps".into()));
    }
    match mode {
        Normalization::Joint => {
            let pred = PointMap::stack(preds)?;
            let gt = PointMap::stack(gts)?;
            let conf: Vec<f64> = confs.iter().flat_map(|c| c.iter().copied()).collect();
            l_conf(&pred, &gt, &conf, alpha)
        }
        Normalization::PerMap => {
            let mut terms = Vec::new();
            for ((p, g), c) in preds.iter().zip(gts).zip(confs) {
                check_confidence(c, p.len(), alpha)?;
                for (l, c) in l_reg_per_pixel(p, g)?.iter().zip(c.iter()) {
                    if let Some(l) = l {
                        terms.push(c * l - alpha * c.ln());
                    }
                }
            }
            Ok(pairwise_sum(&terms) / terms.len() as f64)
        }
    }
}
