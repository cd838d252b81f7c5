//! Metric reports as TOML documents with fixed key names.
//!
//! ```toml
//! [l_rel]           # per map, keys P11 P21 P12 P22
//! [epe.scene_flow]  # keys forward, backward
//! [epe.object_flow]
//! [pose.camera]     # rot_rad, rot_deg, trans
//! [[pose.objects]]  # id, rot_rad, rot_deg, trans
//! [depth]           # abs_rel, delta_1_25
//! [counts]          # pixels used per metric
//! ```
//!
//! Sections that were not evaluated are omitted.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DirectionalEpe {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forward: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backward: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EpeSection {
    pub scene_flow: DirectionalEpe,
    pub object_flow: DirectionalEpe,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseError {
    pub rot_rad: f64,
    pub rot_deg: f64,
    pub trans: f64,
}

impl PoseError {
    pub fn new(rot_rad: f64, trans: f64) -> Self {
        Self {
            rot_rad,
            rot_deg: rot_rad.to_degrees(),
            trans,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectPoseError {
    pub id: u32,
    pub rot_rad: f64,
    pub rot_deg: f64,
    pub trans: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PoseSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub camera: Option<PoseError>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub objects: Vec<ObjectPoseError>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthSection {
    pub abs_rel: f64,
    pub delta_1_25: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub l_rel: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epe: Option<EpeSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pose: Option<PoseSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<DepthSection>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub counts: BTreeMap<String, u64>,
}

impl MetricReport {
    /// Every scalar in the report, with a dotted key.
    pub fn scalars(&self) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> = self
            .l_rel
            .iter()
            .map(|(k, v)| (format!("l_rel.{k}"), *v))
            .collect();
        if let Some(e) = &self.epe {
            for (name, d) in [("scene_flow", &e.scene_flow), ("object_flow", &e.object_flow)] {
                if let Some(v) = d.forward {
                    out.push((format!("epe.{name}.forward"), v));
                }
                if let Some(v) = d.backward {
                    out.push((format!("epe.{name}.backward"), v));
                }
            }
        }
        if let Some(p) = &self.pose {
            if let Some(c) = &p.camera {
                out.push(("pose.camera.rot_rad".into(), c.rot_rad));
                out.push(("pose.camera.rot_deg".into(), c.rot_deg));
                out.push(("pose.camera.trans".into(), c.trans));
            }
            for o in &p.objects {
                out.push((format!("pose.objects.{}.rot_rad", o.id), o.rot_rad));
                out.push((format!("pose.objects.{}.rot_deg", o.id), o.rot_deg));
                out.push((format!("pose.objects.{}.trans", o.id), o.trans));
            }
        }
        if let Some(d) = &self.depth {
            out.push(("depth.abs_rel".into(), d.abs_rel));
            out.push(("depth.delta_1_25".into(), d.delta_1_25));
        }
        out
    }

    /// All scalars finite and non-negative.
    pub fn check(&self) -> Result<()> {
        for (k, v) in self.scalars() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Domain(format!("metric {k} is {v}")));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("metric report is always serializable")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Argument(format!("malformed metric report: {e}")))
    }
}
