//! Downstream tasks solved directly from a dynamic point map quadruple.

mod align;
mod focal;
mod matching;
mod tasks;

pub use align::{alignment_cost, umeyama_align};
pub use focal::{recover_focal, MIN_FOCAL_POINTS};
pub use matching::{
    match_points, match_points_with, Correspondence, Match, SearchStrategy, BRUTE_FORCE_LIMIT,
};
pub use tasks::{
    compute_flows, default_eps, estimate_camera_motion, fuse_points, motion_mask, object_mask,
    segment_motion, track_object, CameraMotion, FusedCloud, MaskMode, MotionMask, SecondView,
    DEFAULT_EPS_FRACTION,
};
