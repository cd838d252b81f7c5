use std::path::Path;

use dpm_core::geometry::{PixelGrid, RigidTransform, Vec3};
use dpm_core::io::{flow_ply, point_cloud_ply, write_archive, DpmArchive, PlyFormat};
use dpm_core::metrics::{rpe_rot, rpe_trans};
use dpm_core::numeric::pairwise_sum_vec3;
use dpm_core::quad::{DpmQuad, FlowKind};
use dpm_core::solvers::{
    compute_flows, default_eps, estimate_camera_motion, fuse_points, match_points, object_mask,
    recover_focal, segment_motion, track_object, MaskMode, SecondView,
};
use nalgebra::Vector2;
use serde::Serialize;

use crate::args::{Eps, FlowArg, MaskArg, PlyArg, SolveTask};
use crate::{load, num, usage, write_file, CliResult};

#[derive(Serialize)]
pub(crate) struct TransformOut {
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
    pub scale: f64,
}

impl From<&RigidTransform> for TransformOut {
    fn from(t: &RigidTransform) -> Self {
        let r = &t.rotation;
        Self {
            rotation: [0, 1, 2].map(|i| [r[(i, 0)], r[(i, 1)], r[(i, 2)]]),
            translation: t.translation.into(),
            scale: t.scale,
        }
    }
}

fn write_toml(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let text = toml::to_string(value).expect("result documents are serializable");
    write_file(path, text.as_bytes())
}

fn ply_format(f: PlyArg) -> PlyFormat {
    match f {
        PlyArg::Ascii => PlyFormat::Ascii,
        PlyArg::Binary => PlyFormat::BinaryLittleEndian,
    }
}

pub(crate) fn flow_kind(f: FlowArg) -> FlowKind {
    match f {
        FlowArg::SfF => FlowKind::SceneForward,
        FlowArg::SfB => FlowKind::SceneBackward,
        FlowArg::OfF => FlowKind::ObjectForward,
        FlowArg::OfB => FlowKind::ObjectBackward,
    }
}

/// Rotation angle of `t`, radians.
fn angle(t: &RigidTransform) -> f64 {
    rpe_rot(&nalgebra::Matrix3::identity(), &t.rotation).unwrap_or(f64::NAN)
}

/// Centroid of image-1 object points at the first timestamp.
pub(crate) fn object_centre(quad: &DpmQuad, mask: &[bool]) -> Option<Vec3> {
    let pts: Vec<Vec3> = quad
        .p11
        .valid_points()
        .filter(|(k, _)| mask[*k])
        .map(|(_, p)| *p)
        .collect();
    (!pts.is_empty()).then(|| pairwise_sum_vec3(&pts) / pts.len() as f64)
}

/// Rotation and centre-translation error of an estimated object motion.
pub(crate) fn motion_error(gt: &RigidTransform, est: &RigidTransform, centre: &Vec3) -> CliResult<(f64, f64)> {
    let rot = rpe_rot(&gt.rotation, &est.rotation)?;
    let trans = rpe_trans(&gt.apply(centre), &est.apply(centre));
    Ok((rot, trans))
}

pub(crate) fn iou(a: &[bool], b: &[bool]) -> f64 {
    let inter = a.iter().zip(b).filter(|(x, y)| **x && **y).count();
    let union = a.iter().zip(b).filter(|(x, y)| **x || **y).count();
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

pub fn solve(task: &SolveTask) -> CliResult<String> {
    match task {
        SolveTask::Focal { archive, cx, cy, out } => {
            let a = load(archive)?;
            let grid = PixelGrid::new(a.quad.width, a.quad.height)?;
            let pp = match (cx, cy, &a.ground_truth) {
                (Some(x), Some(y), _) => Vector2::new(*x, *y),
                (_, _, Some(gt)) => gt.camera1.principal_point(),
                _ => Vector2::new(a.quad.width as f64 / 2.0, a.quad.height as f64 / 2.0),
            };
            let f = recover_focal(&a.quad.p11, &grid, pp)?;
            if let Some(path) = out {
                #[derive(Serialize)]
                struct Out {
                    focal: f64,
                    cx: f64,
                    cy: f64,
                }
                write_toml(path, &Out { focal: f, cx: pp.x, cy: pp.y })?;
            }
            Ok(match &a.ground_truth {
                Some(gt) => format!(
                    "focal f={} gt={} rel_err={}",
                    num(f),
                    num(gt.camera1.fx),
                    num((f - gt.camera1.fx).abs() / gt.camera1.fx)
                ),
                None => format!("focal f={}", num(f)),
            })
        }
        SolveTask::Camera {
            archive,
            mask,
            eps,
            with_scale,
            out,
        } => {
            let a = load(archive)?;
            let Some(swapped) = &a.swapped else {
                return usage("camera motion needs the swapped quad, which this archive lacks");
            };
            let mode = match (mask, eps) {
                (MaskArg::Gt, _) => MaskMode::GroundTruth,
                (MaskArg::Auto, Eps::Auto) => MaskMode::Auto(None),
                (MaskArg::Auto, Eps::Value(v)) => MaskMode::Auto(Some(*v)),
            };
            let cm = estimate_camera_motion(&a.quad, swapped, mode, with_scale.unwrap_or(a.ground_truth.is_none()))?;
            if let Some(path) = out {
                #[derive(Serialize)]
                struct Out {
                    static_pixels: usize,
                    camera_motion: TransformOut,
                }
                write_toml(
                    path,
                    &Out {
                        static_pixels: cm.static_pixels,
                        camera_motion: (&cm.transform).into(),
                    },
                )?;
            }
            Ok(match &a.ground_truth {
                Some(gt) => format!(
                    "camera static={} rot_err_rad={} trans_err={} scale={}",
                    cm.static_pixels,
                    num(rpe_rot(&gt.camera_motion.rotation, &cm.transform.rotation)?),
                    num(rpe_trans(&gt.camera_motion.translation, &cm.transform.translation)),
                    num(cm.transform.scale)
                ),
                None => format!(
                    "camera static={} angle_rad={} translation={} scale={}",
                    cm.static_pixels,
                    num(angle(&cm.transform)),
                    num(cm.transform.translation.norm()),
                    num(cm.transform.scale)
                ),
            })
        }
        SolveTask::Object { archive, id, out } => solve_objects(&load(archive)?, *id, out.as_deref()),
        SolveTask::Segment { archive, eps, gt, out } => {
            let a = load(archive)?;
            let eps = match eps {
                Eps::Auto => default_eps(&a.quad)?,
                Eps::Value(v) => *v,
            };
            let masks = segment_motion(&a.quad, eps)?;
            let reference = match gt {
                Some(path) => {
                    let g = load(path)?;
                    if g.quad.len() != a.quad.len() {
                        return Err(dpm_core::Error::Argument("ground-truth archive differs in size".into()).into());
                    }
                    Some(g.quad.dynamic_masks)
                }
                None => a.ground_truth.as_ref().map(|_| a.quad.dynamic_masks.clone()),
            };
            let mut line = format!(
                "segment eps={} moving1={} moving2={}",
                num(eps),
                masks[0].count(),
                masks[1].count()
            );
            if let Some(r) = reference {
                line += &format!(
                    " iou1={} iou2={}",
                    num(iou(&masks[0].mask, &r[0])),
                    num(iou(&masks[1].mask, &r[1]))
                );
            }
            if let Some(path) = out {
                let mut copy = a.clone();
                copy.quad.dynamic_masks = [masks[0].mask.clone(), masks[1].mask.clone()];
                write_archive(&copy, path)?;
            }
            Ok(line)
        }
        SolveTask::Match { archive, out } => {
            let a = load(archive)?;
            let c = match_points(&a.quad.p11, &a.quad.p21)?;
            if let Some(path) = out {
                #[derive(Serialize)]
                struct Out {
                    target: Vec<i64>,
                    distance: Vec<f64>,
                }
                let target = c.matches.iter().map(|m| m.map_or(-1, |m| m.target as i64)).collect();
                let distance = c.matches.iter().map(|m| m.map_or(-1.0, |m| m.distance)).collect();
                write_toml(path, &Out { target, distance })?;
            }
            let mut line = format!("match queries={} matched={}", a.quad.p11.valid_count(), c.matched_count());
            if let Some(gt) = &a.ground_truth {
                let covisible: Vec<(usize, usize)> = gt
                    .correspondence
                    .iter()
                    .enumerate()
                    .filter_map(|(k, i)| i.map(|i| (k, i)))
                    .collect();
                let correct = covisible
                    .iter()
                    .filter(|(k, i)| c.matches[*k].is_some_and(|m| m.target == *i))
                    .count();
                let acc = if covisible.is_empty() { 1.0 } else { correct as f64 / covisible.len() as f64 };
                line += &format!(" covisible={} accuracy={}", covisible.len(), num(acc));
            }
            Ok(line)
        }
        SolveTask::Flow {
            archive,
            sf,
            kind,
            format,
            out,
        } => {
            let a = load(archive)?;
            if *sf && a.swapped.is_none() {
                return usage("--sf needs the swapped quad, which this archive lacks");
            }
            let flows = compute_flows(&a.quad, a.swapped.as_ref().map(SecondView::Swapped), *sf)?;
            let mut parts = vec!["flow".to_string()];
            for k in FlowKind::ALL {
                let Some(f) = flows.get(k) else { continue };
                let norms: Vec<f64> = f
                    .vectors
                    .iter()
                    .zip(&f.valid)
                    .filter(|(_, v)| **v)
                    .map(|(d, _)| d.norm())
                    .collect();
                let mean = if norms.is_empty() { 0.0 } else { dpm_core::numeric::pairwise_sum(&norms) / norms.len() as f64 };
                let mut part = format!("{}={}", k.tag(), num(mean));
                if let Some(g) = a.ground_truth.as_ref().and_then(|g| g.flows.get(k)) {
                    part += &format!("/epe={}", num(dpm_core::metrics::epe(f, g, None)?));
                }
                parts.push(part);
            }
            if let Some(path) = out {
                let k = flow_kind(*kind);
                let Some(f) = flows.get(k) else {
                    return usage(format!("{} is not computed; pass --sf", k.tag()));
                };
                // Arrows start at the map the flow is measured from.
                let origin = match (k, &a.swapped) {
                    (FlowKind::ObjectForward | FlowKind::SceneForward, _) => a.quad.p11.clone(),
                    (FlowKind::ObjectBackward, _) => a.quad.p22.clone(),
                    (FlowKind::SceneBackward, Some(sw)) => sw.p11.clone(),
                    (FlowKind::SceneBackward, None) => unreachable!("scene flow implies a swapped quad"),
                };
                write_file(path, &flow_ply(&origin, f, ply_format(*format))?)?;
            }
            Ok(parts.join(" "))
        }
        SolveTask::Fuse {
            archive,
            time,
            format,
            out,
        } => {
            let a = load(archive)?;
            let cloud = fuse_points(&a.quad, *time)?;
            if let Some(path) = out {
                write_file(path, &point_cloud_ply(&cloud.points, Some(&cloud.source), ply_format(*format))?)?;
            }
            let first = cloud.source.iter().filter(|s| **s == 1).count();
            Ok(format!(
                "fuse time={} points={} image1={} image2={}",
                time,
                cloud.len(),
                first,
                cloud.len() - first
            ))
        }
    }
}

fn solve_objects(a: &DpmArchive, id: Option<u32>, out: Option<&Path>) -> CliResult<String> {
    let ids: Vec<u32> = match id {
        Some(i) => vec![i],
        None => {
            let mut seen: Vec<u32> = a.quad.object_ids[0].iter().flatten().copied().collect();
            seen.sort_unstable();
            seen.dedup();
            seen
        }
    };
    #[derive(Serialize)]
    struct Tracked {
        id: u32,
        pixels: usize,
        motion: TransformOut,
    }
    let mut tracked = Vec::new();
    let mut failed = 0usize;
    let mut worst = (0.0f64, 0.0f64);
    let mut single = String::new();
    for i in ids {
        let mask = object_mask(&a.quad, i);
        let pixels = mask.iter().filter(|m| **m).count();
        let est = match track_object(&a.quad, &mask) {
            Ok(t) => t,
            Err(e) if id.is_some() => return Err(e.into()),
            Err(_) => {
                failed += 1;
                continue;
            }
        };
        let centre = object_centre(&a.quad, &mask).unwrap_or_else(Vec3::zeros);
        match a.ground_truth.as_ref().and_then(|g| g.object(i)) {
            Some(obj) => {
                let (r, t) = motion_error(&obj.motion, &est, &centre)?;
                worst = (worst.0.max(r), worst.1.max(t));
                single = format!("object id={i} pixels={pixels} rot_err_rad={} trans_err={}", num(r), num(t));
            }
            None => {
                single = format!(
                    "object id={i} pixels={pixels} angle_rad={} displacement={}",
                    num(angle(&est)),
                    num((est.apply(&centre) - centre).norm())
                );
            }
        }
        tracked.push(Tracked {
            id: i,
            pixels,
            motion: (&est).into(),
        });
    }
    let count = tracked.len();
    if let Some(path) = out {
        #[derive(Serialize)]
        struct Out {
            objects: Vec<Tracked>,
        }
        write_toml(path, &Out { objects: tracked })?;
    }
    if id.is_some() {
        return Ok(single);
    }
    let mut line = format!("object tracked={count} failed={failed}");
    if a.ground_truth.is_some() {
        line += &format!(" max_rot_err_rad={} max_trans_err={}", num(worst.0), num(worst.1));
    }
    Ok(line)
}
