//! Dynamic point maps for two-view 4D geometry.
//!
//! - [`geometry`]: pinhole cameras, rigid transforms, point and depth maps.
//! - [`synth`]: analytic ray-cast scenes with exact ground truth.
//! - [`solvers`]: focal length, camera motion, object tracking, motion
//!   segmentation, matching, flows and fusion.
//! - [`metrics`]: training losses and evaluation metrics.
//! - [`io`]: the DPMA container and PLY export.

pub mod error;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod numeric;
pub mod quad;
pub mod solvers;
pub mod synth;

pub use error::{Error, Result};
pub use geometry::{CameraModel, DepthMap, FrameTag, Mat3, PixelGrid, PointMap, RigidTransform, Vec3};
pub use quad::{ConfidenceGrid, DpmQuad, FlowField, FlowKind, FlowSet, MapId};
