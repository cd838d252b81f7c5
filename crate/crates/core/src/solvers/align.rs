use nalgebra::{SymmetricEigen, SVD};

use crate::error::{Error, Result};
use crate::geometry::{Mat3, RigidTransform, Vec3};
use crate::numeric::{pairwise_sum, pairwise_sum_vec3};

/// Relative size of the second principal variance below which the source is
/// considered collinear.
const COLLINEAR_TOLERANCE: f64 = 1e-12;

/// Closed-form weighted least-squares alignment (Umeyama).
///
/// Returns the similarity (or rigid motion when `with_scale` is false)
/// minimising `Σ wᵢ‖dstᵢ − (s·R·srcᵢ + t)‖²`, with the reflection case
/// corrected so that `det(R) = +1`. `weights = None` weighs every pair equally.
pub fn umeyama_align(
    src: &[Vec3],
    dst: &[Vec3],
    weights: Option<&[f64]>,
    with_scale: bool,
) -> Result<RigidTransform> {
    if src.len() != dst.len() || weights.is_some_and(|w| w.len() != src.len()) {
        return Err(Error::Argument(
            "source, destination and weights must have equal lengths".into(),
        ));
    }
    let uniform = vec![1.0; src.len()];
    let w = weights.unwrap_or(&uniform);
    if w.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::Argument("weights must be finite and non-negative".into()));
    }
    let effective = w.iter().filter(|w| **w > 0.0).count();
    if effective < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: effective,
        });
    }
    let total = pairwise_sum(w);
    let weighted_mean = |pts: &[Vec3]| {
        let terms: Vec<Vec3> = pts.iter().zip(w).map(|(p, w)| p * *w).collect();
        pairwise_sum_vec3(&terms) / total
    };
    let mu_src = weighted_mean(src);
    let mu_dst = weighted_mean(dst);

    let mut cross = Mat3::zeros();
    let mut src_scatter = Mat3::zeros();
    // Column-wise accumulation keeps every entry a fixed-order pairwise sum.
    let centered: Vec<(Vec3, Vec3, f64)> = src
        .iter()
        .zip(dst)
        .zip(w)
        .map(|((s, d), w)| (s - mu_src, d - mu_dst, *w))
        .collect();
    let mut terms = vec![0.0; centered.len()];
    for r in 0..3 {
        for c in 0..3 {
            for (t, (s, d, w)) in terms.iter_mut().zip(&centered) {
                *t = w * d[r] * s[c];
            }
            cross[(r, c)] = pairwise_sum(&terms) / total;
            for (t, (s, _, w)) in terms.iter_mut().zip(&centered) {
                *t = w * s[r] * s[c];
            }
            src_scatter[(r, c)] = pairwise_sum(&terms) / total;
        }
    }
    let src_variance = src_scatter.trace();
    let eig = SymmetricEigen::new(src_scatter).eigenvalues;
    let mut ev = [eig[0], eig[1], eig[2]];
    ev.sort_by(|a, b| b.total_cmp(a));
    if !(src_variance > 0.0) || ev[1] <= COLLINEAR_TOLERANCE * src_variance {
        return Err(Error::DegenerateGeometry(
            "source points are collinear or coincident".into(),
        ));
    }

    let svd = SVD::new(cross, true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let sv = svd.singular_values;
    let mut sign = Mat3::identity();
    if u.determinant() * v_t.determinant() < 0.0 {
        // flip the direction of the smallest singular value
        let smallest = (0..3).min_by(|a, b| sv[*a].total_cmp(&sv[*b])).unwrap();
        sign[(smallest, smallest)] = -1.0;
    }
    let rotation = u * sign * v_t;
    let scale = if with_scale {
        (sign * Mat3::from_diagonal(&sv)).trace() / src_variance
    } else {
        1.0
    };
    if with_scale && !(scale > 0.0) {
        return Err(Error::DegenerateGeometry(format!(
            "recovered scale {scale} is not positive"
        )));
    }
    let translation = mu_dst - rotation * mu_src * scale;
    Ok(RigidTransform {
        rotation,
        translation,
        scale,
    })
}

/// `Σ wᵢ‖dstᵢ − T(srcᵢ)‖²`.
pub fn alignment_cost(t: &RigidTransform, src: &[Vec3], dst: &[Vec3], weights: Option<&[f64]>) -> f64 {
    let terms: Vec<f64> = src
        .iter()
        .zip(dst)
        .enumerate()
        .map(|(i, (s, d))| weights.map_or(1.0, |w| w[i]) * (d - t.apply(s)).norm_squared())
        .collect();
    pairwise_sum(&terms)
}
