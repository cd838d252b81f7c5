//! Training losses and evaluation metrics.

mod eval;
mod losses;
mod report;

pub use eval::{
    depth_metrics, epe, l_rel, l_rel_stacked, rpe_rot, rpe_trans, DepthAlign, DepthMetrics,
    RelativeError, ROTATION_TOLERANCE,
};
pub use losses::{
    l_conf, l_conf_grad, l_reg, l_reg_mean, l_reg_per_pixel, optimal_confidence,
    stacked_l_conf,
    ConfidenceLossGradient, Normalization, DEFAULT_ALPHA,
};
pub use report::{
    DepthSection, DirectionalEpe, EpeSection, MetricReport, ObjectPoseError, PoseError, PoseSection,
};
