//! The dynamic point map quadruple of one ordered image pair, and flow fields.

use crate::error::{Error, Result};
use crate::geometry::{FrameTag, PointMap, Vec3};

/// Identifies one of the four maps. `P{image}{time}`: `P21` is image 2's
/// points at the first timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MapId {
    P11,
    P21,
    P12,
    P22,
}

impl MapId {
    pub const ALL: [MapId; 4] = [MapId::P11, MapId::P21, MapId::P12, MapId::P22];

    pub fn name(self) -> &'static str {
        match self {
            MapId::P11 => "P11",
            MapId::P21 => "P21",
            MapId::P12 => "P12",
            MapId::P22 => "P22",
        }
    }

    /// Which image (1 or 2) the map's pixels belong to.
    pub fn image(self) -> usize {
        match self {
            MapId::P11 | MapId::P12 => 1,
            MapId::P21 | MapId::P22 => 2,
        }
    }

    /// Which timestamp slot (1 or 2) the map's points are expressed at.
    pub fn time(self) -> usize {
        match self {
            MapId::P11 | MapId::P21 => 1,
            MapId::P12 | MapId::P22 => 2,
        }
    }

    pub fn index(self) -> usize {
        match self {
            MapId::P11 => 0,
            MapId::P21 => 1,
            MapId::P12 => 2,
            MapId::P22 => 3,
        }
    }
}

/// Per-pixel confidences in `(0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceGrid(Vec<f64>);

impl ConfidenceGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, c)) = values
            .iter()
            .enumerate()
            .find(|(_, c)| !(**c > 0.0 && **c <= 1.0))
        {
            return Err(Error::Domain(format!(
                "confidence at pixel {i} is {c}, outside (0, 1]"
            )));
        }
        Ok(Self(values))
    }

    pub fn constant(len: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; len])
    }

    /// 1 at valid pixels, 0.5 elsewhere.
    pub fn ground_truth(valid: &[bool]) -> Self {
        Self(valid.iter().map(|v| if *v { 1.0 } else { 0.5 }).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpmQuad {
    pub width: usize,
    pub height: usize,
    pub p11: PointMap,
    pub p21: PointMap,
    pub p12: PointMap,
    pub p22: PointMap,
    /// Indexed by [`MapId::index`].
    pub confidence: [ConfidenceGrid; 4],
    /// Object hit at every pixel of image 1 and image 2.
    pub object_ids: [Vec<Option<u32>>; 2],
    /// Ground-truth dynamic masks of image 1 and image 2.
    pub dynamic_masks: [Vec<bool>; 2],
}

impl DpmQuad {
    pub fn map(&self, id: MapId) -> &PointMap {
        match id {
            MapId::P11 => &self.p11,
            MapId::P21 => &self.p21,
            MapId::P12 => &self.p12,
            MapId::P22 => &self.p22,
        }
    }

    pub fn map_mut(&mut self, id: MapId) -> &mut PointMap {
        match id {
            MapId::P11 => &mut self.p11,
            MapId::P21 => &mut self.p21,
            MapId::P12 => &mut self.p12,
            MapId::P22 => &mut self.p22,
        }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Camera frame all four maps are expressed in.
    pub fn reference_view(&self) -> u8 {
        self.p11.frame.view
    }

    /// Checks shapes and the shared-viewpoint / shared-validity invariants.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        for id in MapId::ALL {
            let m = self.map(id);
            if m.width != self.width || m.height != self.height || m.points.len() != n {
                return Err(Error::Argument(format!(
                    "{} is {}x{}, quad is {}x{}",
                    id.name(),
                    m.width,
                    m.height,
                    self.width,
                    self.height
                )));
            }
            if m.frame.view != self.reference_view() {
                return Err(Error::Argument(format!(
                    "{} is expressed in view {}, expected {}",
                    id.name(),
                    m.frame.view,
                    self.reference_view()
                )));
            }
            if self.confidence[id.index()].len() != n {
                return Err(Error::Argument(format!(
                    "confidence of {} has wrong length",
                    id.name()
                )));
            }
        }
        for k in 0..2 {
            if self.object_ids[k].len() != n || self.dynamic_masks[k].len() != n {
                return Err(Error::Argument(format!(
                    "image {} object ids or mask have wrong length",
                    k + 1
                )));
            }
        }
        Ok(())
    }

    /// Every point of every map multiplied by `alpha`.
    pub fn scaled(&self, alpha: f64) -> DpmQuad {
        let mut out = self.clone();
        for id in MapId::ALL {
            *out.map_mut(id) = self.map(id).scaled(alpha);
        }
        out
    }

    /// Values rounded through single precision and invalid points zeroed, as
    /// read back from disk.
    pub fn to_storage_precision(&self) -> DpmQuad {
        let mut out = self.clone();
        for id in MapId::ALL {
            let map = out.map_mut(id);
            for (p, v) in map.points.iter_mut().zip(&map.valid) {
                *p = if *v { p.map(|c| c as f32 as f64) } else { Vec3::zeros() };
            }
        }
        for k in 0..4 {
            out.confidence[k] =
                ConfidenceGrid(self.confidence[k].0.iter().map(|c| *c as f32 as f64).collect());
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FlowKind {
    SceneForward,
    SceneBackward,
    ObjectForward,
    ObjectBackward,
}

impl FlowKind {
    pub const ALL: [FlowKind; 4] = [
        FlowKind::SceneForward,
        FlowKind::SceneBackward,
        FlowKind::ObjectForward,
        FlowKind::ObjectBackward,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            FlowKind::SceneForward => "SF-F",
            FlowKind::SceneBackward => "SF-B",
            FlowKind::ObjectForward => "OF-F",
            FlowKind::ObjectBackward => "OF-B",
        }
    }

    pub fn from_tag(tag: &str) -> Option<FlowKind> {
        FlowKind::ALL.into_iter().find(|k| k.tag() == tag)
    }
}

/// Per-pixel 3D displacements.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub kind: FlowKind,
    pub width: usize,
    pub height: usize,
    pub vectors: Vec<Vec3>,
    pub valid: Vec<bool>,
}

impl FlowField {
    /// `to − from` column-wise; valid only where both are valid.
    pub fn difference(kind: FlowKind, to: &PointMap, from: &PointMap) -> Result<FlowField> {
        if !to.same_shape(from) {
            return Err(Error::Argument(format!(
                "{}: operand maps differ in shape",
                kind.tag()
            )));
        }
        let valid: Vec<bool> = to.valid.iter().zip(&from.valid).map(|(a, b)| *a && *b).collect();
        let vectors = to
            .points
            .iter()
            .zip(&from.points)
            .zip(&valid)
            .map(|((a, b), v)| if *v { a - b } else { Vec3::zeros() })
            .collect();
        Ok(FlowField {
            kind,
            width: to.width,
            height: to.height,
            vectors,
            valid,
        })
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }
}

/// The four flows of a pair. Scene flows need maps in the second camera frame
/// and may be absent.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSet {
    pub scene_forward: Option<FlowField>,
    pub scene_backward: Option<FlowField>,
    pub object_forward: FlowField,
    pub object_backward: FlowField,
}

impl FlowSet {
    pub fn get(&self, kind: FlowKind) -> Option<&FlowField> {
        match kind {
            FlowKind::SceneForward => self.scene_forward.as_ref(),
            FlowKind::SceneBackward => self.scene_backward.as_ref(),
            FlowKind::ObjectForward => Some(&self.object_forward),
            FlowKind::ObjectBackward => Some(&self.object_backward),
        }
    }
}

/// Frame tags of the four maps of a quad whose first image is taken at
/// `first_time` from camera `first_view`.
pub(crate) fn frame_tags(first_time: u8, first_view: u8) -> [FrameTag; 4] {
    let other = 3 - first_time;
    [
        FrameTag::new(first_time, first_view),
        FrameTag::new(first_time, first_view),
        FrameTag::new(other, first_view),
        FrameTag::new(other, first_view),
    ]
}
