use dpm_core::io::DpmArchive;
use dpm_core::metrics::{
    depth_metrics, epe, l_rel, l_rel_stacked, DepthAlign, DepthSection, DirectionalEpe,
    EpeSection, MetricReport, Normalization, ObjectPoseError, PoseError, PoseSection,
};
use dpm_core::quad::{FlowKind, FlowSet, MapId};
use dpm_core::solvers::{
    compute_flows, estimate_camera_motion, object_mask, track_object, MaskMode, SecondView,
};
use dpm_core::Error;

use crate::args::{AlignArg, EvalArgs, EvalKind, NormArg};
use crate::solve::{motion_error, object_centre};
use crate::{load, num, write_file, CliResult};

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), num)
}

/// Flows stored in the archive, or flows computed from its quads.
fn flows_of(a: &DpmArchive, recompute: bool) -> CliResult<FlowSet> {
    if let (false, Some(gt)) = (recompute, &a.ground_truth) {
        return Ok(gt.flows.clone());
    }
    let second = a.swapped.as_ref().map(SecondView::Swapped);
    Ok(compute_flows(&a.quad, second, second.is_some())?)
}

pub fn eval(args: &EvalArgs) -> CliResult<String> {
    let pred = load(&args.pred)?;
    let gt = load(&args.gt)?;
    if (pred.quad.width, pred.quad.height) != (gt.quad.width, gt.quad.height) {
        return Err(Error::Argument(format!(
            "prediction is {}x{}, ground truth {}x{}",
            pred.quad.width, pred.quad.height, gt.quad.width, gt.quad.height
        ))
        .into());
    }
    let mut report = MetricReport::default();
    let line = match args.kind {
        EvalKind::Pointmap => {
            match args.norm {
                NormArg::PerMap => {
                    for id in MapId::ALL {
                        let g = gt.quad.map(id);
                        let r = l_rel(pred.quad.map(id), g, &g.valid)?;
                        report.l_rel.insert(id.name().into(), r.value);
                        report.counts.insert(format!("l_rel.{}", id.name()), r.pixels as u64);
                    }
                }
                NormArg::Joint => {
                    let preds: Vec<_> = MapId::ALL.iter().map(|id| pred.quad.map(*id)).collect();
                    let gts: Vec<_> = MapId::ALL.iter().map(|id| gt.quad.map(*id)).collect();
                    let masks: Vec<&[bool]> = gts.iter().map(|m| m.valid.as_slice()).collect();
                    let r = l_rel_stacked(&preds, &gts, &masks, Normalization::Joint)?;
                    report.l_rel.insert("stacked".into(), r.value);
                    report.counts.insert("l_rel.stacked".into(), r.pixels as u64);
                }
            }
            let parts: Vec<String> = report.l_rel.iter().map(|(k, v)| format!("{k}={}", num(*v))).collect();
            format!("eval pointmap {}", parts.join(" "))
        }
        EvalKind::Depth => {
            let align = match args.align {
                AlignArg::None => DepthAlign::None,
                AlignArg::Median => DepthAlign::Median,
            };
            let m = depth_metrics(&pred.quad.p11.depth_map(), &gt.quad.p11.depth_map(), None, align)?;
            report.depth = Some(DepthSection {
                abs_rel: m.abs_rel,
                delta_1_25: m.delta_1_25,
            });
            report.counts.insert("depth".into(), m.pixels as u64);
            format!("eval depth abs_rel={} delta_1_25={}", num(m.abs_rel), num(m.delta_1_25))
        }
        EvalKind::Flow => {
            let pf = flows_of(&pred, args.recompute)?;
            let gf = flows_of(&gt, false)?;
            let mut value = |k: FlowKind| -> CliResult<Option<f64>> {
                match (pf.get(k), gf.get(k)) {
                    (Some(p), Some(g)) => {
                        let v = epe(p, g, None)?;
                        let n = p.valid.iter().zip(&g.valid).filter(|(a, b)| **a && **b).count();
                        report.counts.insert(format!("epe.{}", k.tag()), n as u64);
                        Ok(Some(v))
                    }
                    _ => Ok(None),
                }
            };
            let section = EpeSection {
                scene_flow: DirectionalEpe {
                    forward: value(FlowKind::SceneForward)?,
                    backward: value(FlowKind::SceneBackward)?,
                },
                object_flow: DirectionalEpe {
                    forward: value(FlowKind::ObjectForward)?,
                    backward: value(FlowKind::ObjectBackward)?,
                },
            };
            report.epe = Some(section);
            format!(
                "eval flow SF-F={} SF-B={} OF-F={} OF-B={}",
                opt(section.scene_flow.forward),
                opt(section.scene_flow.backward),
                opt(section.object_flow.forward),
                opt(section.object_flow.backward)
            )
        }
        EvalKind::Pose => {
            let truth = gt
                .ground_truth
                .as_ref()
                .ok_or_else(|| Error::Argument("ground-truth archive carries no poses".into()))?;
            let mut quad = pred.quad.clone();
            quad.object_ids = gt.quad.object_ids.clone();
            quad.dynamic_masks = gt.quad.dynamic_masks.clone();
            let mut section = PoseSection::default();
            if let Some(sw) = &pred.swapped {
                let cm = estimate_camera_motion(&quad, sw, MaskMode::GroundTruth, pred.ground_truth.is_none())?;
                let rot = dpm_core::metrics::rpe_rot(&truth.camera_motion.rotation, &cm.transform.rotation)?;
                let trans = dpm_core::metrics::rpe_trans(&truth.camera_motion.translation, &cm.transform.translation);
                section.camera = Some(PoseError::new(rot, trans));
                report.counts.insert("pose.camera".into(), cm.static_pixels as u64);
            }
            let mut failed = 0u64;
            for obj in truth.objects.iter().filter(|o| o.dynamic) {
                let mask = object_mask(&gt.quad, obj.id);
                let Some(centre) = object_centre(&gt.quad, &mask) else {
                    continue;
                };
                match track_object(&quad, &mask) {
                    Ok(est) => {
                        let (rot, trans) = motion_error(&obj.motion, &est, &centre)?;
                        let p = PoseError::new(rot, trans);
                        section.objects.push(ObjectPoseError {
                            id: obj.id,
                            rot_rad: p.rot_rad,
                            rot_deg: p.rot_deg,
                            trans: p.trans,
                        });
                        report.counts.insert(
                            format!("pose.object.{}", obj.id),
                            mask.iter().filter(|m| **m).count() as u64,
                        );
                    }
                    Err(_) => failed += 1,
                }
            }
            if failed > 0 {
                report.counts.insert("pose.objects_failed".into(), failed);
            }
            let mean = |f: fn(&ObjectPoseError) -> f64| {
                let v: Vec<f64> = section.objects.iter().map(f).collect();
                (!v.is_empty()).then(|| dpm_core::numeric::pairwise_sum(&v) / v.len() as f64)
            };
            let line = format!(
                "eval pose camera_rot_rad={} camera_trans={} objects={} mean_rot_rad={} mean_trans={}",
                opt(section.camera.map(|c| c.rot_rad)),
                opt(section.camera.map(|c| c.trans)),
                section.objects.len(),
                opt(mean(|o| o.rot_rad)),
                opt(mean(|o| o.trans))
            );
            report.pose = Some(section);
            line
        }
    };
    report.check()?;
    if let Some(path) = &args.out {
        write_file(path, report.to_toml().as_bytes())?;
    }
    Ok(line)
}
