//! PLY export of point clouds and flow fields.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::{PointMap, Vec3};
use crate::quad::FlowField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlyFormat {
    #[default]
    Ascii,
    BinaryLittleEndian,
}

impl PlyFormat {
    fn keyword(self) -> &'static str {
        match self {
            PlyFormat::Ascii => "ascii",
            PlyFormat::BinaryLittleEndian => "binary_little_endian",
        }
    }
}

fn header(format: PlyFormat, vertices: usize, source: bool, edges: Option<usize>) -> String {
    let mut h = String::new();
    writeln!(h, "ply").unwrap();
    writeln!(h, "format {} 1.0", format.keyword()).unwrap();
    writeln!(h, "element vertex {vertices}").unwrap();
    for c in ["x", "y", "z"] {
        writeln!(h, "property float {c}").unwrap();
    }
    if source {
        writeln!(h, "property uchar source").unwrap();
    }
    if let Some(e) = edges {
        writeln!(h, "element edge {e}").unwrap();
        writeln!(h, "property int vertex1").unwrap();
        writeln!(h, "property int vertex2").unwrap();
    }
    writeln!(h, "end_header").unwrap();
    h
}

fn push_vertex(out: &mut Vec<u8>, format: PlyFormat, p: &Vec3, source: Option<u8>) {
    let xyz = [p.x as f32, p.y as f32, p.z as f32];
    match format {
        PlyFormat::Ascii => {
            let mut line = format!("{} {} {}", xyz[0], xyz[1], xyz[2]);
            if let Some(s) = source {
                write!(line, " {s}").unwrap();
            }
            line.push('\n');
            out.extend_from_slice(line.as_bytes());
        }
        PlyFormat::BinaryLittleEndian => {
            for c in xyz {
                out.extend_from_slice(&c.to_le_bytes());
            }
            if let Some(s) = source {
                out.push(s);
            }
        }
    }
}

/// A point cloud, optionally tagged with a per-point source image id.
pub fn point_cloud_ply(points: &[Vec3], source: Option<&[u8]>, format: PlyFormat) -> Result<Vec<u8>> {
    if source.is_some_and(|s| s.len() != points.len()) {
        return Err(Error::Argument("one source tag per point is required".into()));
    }
    let mut out = header(format, points.len(), source.is_some(), None).into_bytes();
    for (i, p) in points.iter().enumerate() {
        push_vertex(&mut out, format, p, source.map(|s| s[i]));
    }
    Ok(out)
}

/// The valid points of a map.
pub fn point_map_ply(map: &PointMap, format: PlyFormat) -> Result<Vec<u8>> {
    let pts: Vec<Vec3> = map.valid_points().map(|(_, p)| *p).collect();
    point_cloud_ply(&pts, None, format)
}

/// Each valid flow vector as an arrow: a vertex at the origin point, one at
/// its displaced position, and an edge between them.
pub fn flow_ply(origins: &PointMap, flow: &FlowField, format: PlyFormat) -> Result<Vec<u8>> {
    if origins.width != flow.width || origins.height != flow.height {
        return Err(Error::Argument("flow and origin map differ in shape".into()));
    }
    let pixels: Vec<usize> = (0..flow.vectors.len())
        .filter(|&k| flow.valid[k] && origins.valid[k])
        .collect();
    let mut out = header(format, 2 * pixels.len(), false, Some(pixels.len())).into_bytes();
    for &k in &pixels {
        let a = origins.points[k];
        push_vertex(&mut out, format, &a, None);
        push_vertex(&mut out, format, &(a + flow.vectors[k]), None);
    }
    for e in 0..pixels.len() {
        let (a, b) = (2 * e as i32, 2 * e as i32 + 1);
        match format {
            PlyFormat::Ascii => out.extend_from_slice(format!("{a} {b}\n").as_bytes()),
            PlyFormat::BinaryLittleEndian => {
                out.extend_from_slice(&a.to_le_bytes());
                out.extend_from_slice(&b.to_le_bytes());
            }
        }
    }
    Ok(out)
}
