use crate::error::{Error, Result};
use crate::geometry::{median_norm, FrameTag, PointMap, RigidTransform, Vec3};
use crate::quad::{DpmQuad, FlowField, FlowKind, FlowSet};

use super::align::umeyama_align;

/// Default motion threshold as a fraction of the median point norm of `P11`.
pub const DEFAULT_EPS_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct MotionMask {
    pub mask: Vec<bool>,
    pub eps: f64,
}

impl MotionMask {
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }
}

/// Pixels whose two same-view, different-time points are more than `eps`
/// apart. Invalid pixels are never marked.
pub fn motion_mask(a: &PointMap, b: &PointMap, eps: f64) -> Result<MotionMask> {
    if !a.same_shape(b) || a.len() != b.len() {
        return Err(Error::Argument(format!(
            "motion mask operands are {}x{} and {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::Argument(format!("threshold must be non-negative, got {eps}")));
    }
    let mask = (0..a.len())
        .map(|i| a.valid[i] && b.valid[i] && (a.points[i] - b.points[i]).norm() > eps)
        .collect();
    Ok(MotionMask { mask, eps })
}

/// `DEFAULT_EPS_FRACTION · Z_med(P11)`.
pub fn default_eps(quad: &DpmQuad) -> Result<f64> {
    median_norm(&quad.p11, None)
        .map(|z| DEFAULT_EPS_FRACTION * z)
        .ok_or_else(|| Error::DegenerateInput("P11 has no valid points".into()))
}

/// Motion masks of image 1 (`P11` vs `P12`) and image 2 (`P21` vs `P22`).
pub fn segment_motion(quad: &DpmQuad, eps: f64) -> Result<[MotionMask; 2]> {
    Ok([
        motion_mask(&quad.p11, &quad.p12, eps)?,
        motion_mask(&quad.p21, &quad.p22, eps)?,
    ])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaskMode {
    /// Use the quad's ground-truth dynamic mask of image 2.
    GroundTruth,
    /// Threshold `P21` against `P22`; `None` picks [`default_eps`].
    Auto(Option<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraMotion {
    /// Maps camera-2 coordinates to camera-1 coordinates.
    pub transform: RigidTransform,
    pub static_pixels: usize,
}

/// Camera motion from image 2's static points, aligning `P2(t1, π2)` (taken
/// from the input-swapped quad) onto `P2(t1, π1)`.
pub fn estimate_camera_motion(
    quad: &DpmQuad,
    swapped: &DpmQuad,
    mode: MaskMode,
    with_scale: bool,
) -> Result<CameraMotion> {
    let source = &swapped.p12;
    let target = &quad.p21;
    let expected = FrameTag::new(quad.p21.frame.time, swapped.reference_view());
    if source.frame != expected || swapped.reference_view() == quad.reference_view() {
        return Err(Error::Argument(format!(
            "swapped quad must provide image 2 at {expected}, found {}",
            source.frame
        )));
    }
    if !source.same_shape(target) {
        return Err(Error::Argument("quad and swapped quad differ in size".into()));
    }
    let dynamic = match mode {
        MaskMode::GroundTruth => quad.dynamic_masks[1].clone(),
        MaskMode::Auto(eps) => {
            let eps = match eps {
                Some(e) => e,
                None => default_eps(quad)?,
            };
            motion_mask(&quad.p21, &quad.p22, eps)?.mask
        }
    };
    let (src, dst): (Vec<Vec3>, Vec<Vec3>) = (0..target.len())
        .filter(|&i| source.valid[i] && target.valid[i] && !dynamic[i])
        .map(|i| (source.points[i], target.points[i]))
        .unzip();
    if src.len() < 3 {
        return Err(Error::InsufficientStaticStructure {
            static_points: src.len(),
        });
    }
    let transform = umeyama_align(&src, &dst, None, with_scale)?;
    Ok(CameraMotion {
        transform,
        static_pixels: src.len(),
    })
}

/// Image-1 pixels that hit object `id`.
pub fn object_mask(quad: &DpmQuad, id: u32) -> Vec<bool> {
    quad.object_ids[0].iter().map(|o| *o == Some(id)).collect()
}

/// Rigid motion of the object under `mask` between the two timestamps, in
/// camera-1 coordinates: aligns `M ⊙ P11` onto `M ⊙ P12`.
pub fn track_object(quad: &DpmQuad, mask: &[bool]) -> Result<RigidTransform> {
    if mask.len() != quad.len() {
        return Err(Error::Argument("object mask has the wrong length".into()));
    }
    let (src, dst): (Vec<Vec3>, Vec<Vec3>) = (0..quad.len())
        .filter(|&i| mask[i] && quad.p11.valid[i] && quad.p12.valid[i])
        .map(|i| (quad.p11.points[i], quad.p12.points[i]))
        .unzip();
    umeyama_align(&src, &dst, None, false)
}

/// Where the second-camera maps needed by scene flow come from.
#[derive(Debug, Clone, Copy)]
pub enum SecondView<'a> {
    /// The quad predicted with the two inputs swapped.
    Swapped(&'a DpmQuad),
    /// Known camera motion mapping camera-2 coordinates to camera-1 coordinates.
    Pose(&'a RigidTransform),
}

/// Object flows always; scene flows when `scene_flow` is set, which needs a
/// second view.
///
/// `OF-F = P1(t2,π1) − P1(t1,π1)`, `OF-B = P2(t1,π1) − P2(t2,π1)`,
/// `SF-F = P1(t2,π2) − P1(t1,π1)`, `SF-B = P2(t1,π1) − P2(t2,π2)`.
pub fn compute_flows(
    quad: &DpmQuad,
    second: Option<SecondView<'_>>,
    scene_flow: bool,
) -> Result<FlowSet> {
    let object_forward = FlowField::difference(FlowKind::ObjectForward, &quad.p12, &quad.p11)?;
    let object_backward = FlowField::difference(FlowKind::ObjectBackward, &quad.p21, &quad.p22)?;
    let (scene_forward, scene_backward) = match (scene_flow, second) {
        (false, _) => (None, None),
        (true, None) => {
            return Err(Error::Argument(
                "scene flow needs the swapped quad or the camera motion".into(),
            ))
        }
        (true, Some(view)) => {
            let (p1_t2_pi2, p2_t2_pi2) = second_view_maps(quad, view)?;
            (
                Some(FlowField::difference(FlowKind::SceneForward, &p1_t2_pi2, &quad.p11)?),
                Some(FlowField::difference(FlowKind::SceneBackward, &quad.p21, &p2_t2_pi2)?),
            )
        }
    };
    Ok(FlowSet {
        scene_forward,
        scene_backward,
        object_forward,
        object_backward,
    })
}

fn second_view_maps(quad: &DpmQuad, view: SecondView<'_>) -> Result<(PointMap, PointMap)> {
    match view {
        SecondView::Swapped(sw) => {
            if sw.reference_view() == quad.reference_view() || !sw.p11.same_shape(&quad.p11) {
                return Err(Error::Argument(
                    "swapped quad must be referred to the other camera and match in size".into(),
                ));
            }
            // The swapped quad's second image is image 1; its first timestamp is t2.
            Ok((sw.p21.clone(), sw.p11.clone()))
        }
        SecondView::Pose(t) => {
            let to_second = t.inverse();
            let second = 3 - quad.reference_view();
            let tag = FrameTag::new(quad.p12.frame.time, second);
            Ok((
                quad.p12.transformed(&to_second).with_frame(tag),
                quad.p22.transformed(&to_second).with_frame(tag),
            ))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedCloud {
    pub points: Vec<Vec3>,
    /// Image (1 or 2) each point came from.
    pub source: Vec<u8>,
    /// Pixel index within its source image.
    pub pixel: Vec<usize>,
}

impl FusedCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Both images' points at timestamp slot `time` (1 or 2), concatenated.
pub fn fuse_points(quad: &DpmQuad, time: u8) -> Result<FusedCloud> {
    let maps = match time {
        1 => [&quad.p11, &quad.p21],
        2 => [&quad.p12, &quad.p22],
        other => return Err(Error::Argument(format!("time must be 1 or 2, got {other}"))),
    };
    let mut out = FusedCloud {
        points: Vec::new(),
        source: Vec::new(),
        pixel: Vec::new(),
    };
    for (img, map) in maps.iter().enumerate() {
        for (k, p) in map.valid_points() {
            out.points.push(*p);
            out.source.push(img as u8 + 1);
            out.pixel.push(k);
        }
    }
    Ok(out)
}
