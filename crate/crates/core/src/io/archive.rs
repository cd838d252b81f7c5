//! The DPMA single-file container.
//!
//! Layout: the magic bytes `DPMA`, a little-endian `u32` format version, a
//! little-endian `u64` header length, the UTF-8 TOML header, then the payload.
//! Directory offsets are relative to the start of the payload; tensors are
//! packed back to back in directory order with nothing after the last one.
//! Floating tensors are `f32` little-endian in planar `[channel][row][col]`
//! layout, with NaN written at invalid pixels.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::geometry::{CameraModel, FrameTag, Mat3, PointMap, RigidTransform, Vec3};
use crate::quad::{ConfidenceGrid, DpmQuad, FlowField, FlowKind, FlowSet, MapId};
use crate::synth::{GroundTruth, ObjectMotion};

pub const MAGIC: [u8; 4] = *b"DPMA";
pub const FORMAT_VERSION: u32 = 1;
const PREAMBLE: usize = 16;
const SWAPPED_PREFIX: &str = "swapped/";

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not a DPMA archive (bad magic bytes)")]
    BadMagic,
    #[error("unsupported archive version {found} (this build reads version {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },
    #[error("file truncated: {0}")]
    Truncated(String),
    #[error("malformed header: {0}")]
    Header(String),
    #[error("tensor `{name}`: {reason}")]
    Entry { name: String, reason: String },
    #[error("tensor `{tensor}`: non-finite value at valid pixel {pixel}")]
    NonFiniteAtValid { tensor: String, pixel: usize },
}

fn entry_err(name: &str, reason: impl Into<String>) -> Error {
    ArchiveError::Entry {
        name: name.to_string(),
        reason: reason.into(),
    }
    .into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TensorKind {
    Pointmap,
    Confidence,
    Validity,
    Objid,
    Flow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    U8,
    I32,
}

impl Dtype {
    fn size(self) -> u64 {
        match self {
            Dtype::U8 => 1,
            Dtype::F32 | Dtype::I32 => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub kind: TensorKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame: Option<FrameTag>,
    pub channels: u32,
    pub dtype: Dtype,
    pub offset: u64,
    pub length: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct TransformHeader {
    /// Row-major.
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
    scale: f64,
}

impl From<&RigidTransform> for TransformHeader {
    fn from(t: &RigidTransform) -> Self {
        let r = &t.rotation;
        Self {
            rotation: [0, 1, 2].map(|i| [r[(i, 0)], r[(i, 1)], r[(i, 2)]]),
            translation: [t.translation.x, t.translation.y, t.translation.z],
            scale: t.scale,
        }
    }
}

impl TransformHeader {
    fn transform(&self) -> RigidTransform {
        RigidTransform {
            rotation: Mat3::from_fn(|i, j| self.rotation[i][j]),
            translation: Vec3::from(self.translation),
            scale: self.scale,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct CameraHeader {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    pose: TransformHeader,
}

impl CameraHeader {
    fn camera(&self) -> Result<CameraModel> {
        CameraModel::new(self.fx, self.fy, self.cx, self.cy, self.pose.transform())
    }
}

impl From<&CameraModel> for CameraHeader {
    fn from(c: &CameraModel) -> Self {
        Self {
            fx: c.fx,
            fy: c.fy,
            cx: c.cx,
            cy: c.cy,
            pose: (&c.pose).into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct ObjectHeader {
    id: u32,
    dynamic: bool,
    motion: TransformHeader,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GroundTruthHeader {
    camera1: CameraHeader,
    camera2: CameraHeader,
    camera_motion: TransformHeader,
    #[serde(default)]
    objects: Vec<ObjectHeader>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    width: usize,
    height: usize,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ground_truth: Option<GroundTruthHeader>,
    tensors: Vec<TensorEntry>,
}

/// Everything a DPMA file holds.
#[derive(Debug, Clone, PartialEq)]
pub struct DpmArchive {
    pub quad: DpmQuad,
    /// The quad predicted with the two inputs swapped, referred to camera 2.
    pub swapped: Option<DpmQuad>,
    pub ground_truth: Option<GroundTruth>,
    pub metadata: BTreeMap<String, String>,
}

impl DpmArchive {
    pub fn new(quad: DpmQuad) -> Self {
        Self {
            quad,
            swapped: None,
            ground_truth: None,
            metadata: BTreeMap::new(),
        }
    }

    /// The archive as it reads back from disk: tensors rounded through `f32`
    /// and invalid entries zeroed.
    pub fn to_storage_precision(&self) -> DpmArchive {
        let mut out = self.clone();
        out.quad = self.quad.to_storage_precision();
        out.swapped = self.swapped.as_ref().map(|q| q.to_storage_precision());
        if let Some(gt) = &mut out.ground_truth {
            for kind in FlowKind::ALL {
                if let Some(f) = flow_slot(&mut gt.flows, kind) {
                    for (v, ok) in f.vectors.iter_mut().zip(&f.valid) {
                        *v = if *ok { v.map(|c| c as f32 as f64) } else { Vec3::zeros() };
                    }
                }
            }
        }
        out
    }
}

fn flow_slot(flows: &mut FlowSet, kind: FlowKind) -> Option<&mut FlowField> {
    match kind {
        FlowKind::SceneForward => flows.scene_forward.as_mut(),
        FlowKind::SceneBackward => flows.scene_backward.as_mut(),
        FlowKind::ObjectForward => Some(&mut flows.object_forward),
        FlowKind::ObjectBackward => Some(&mut flows.object_backward),
    }
}

/// Summary returned by [`validate_archive`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub version: u32,
    pub width: usize,
    pub height: usize,
    pub tensors: usize,
    pub has_swapped: bool,
    pub has_ground_truth: bool,
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "DPMA v{} {}x{} tensors={} swapped={} ground_truth={}",
            self.version,
            self.width,
            self.height,
            self.tensors,
            self.has_swapped,
            self.has_ground_truth
        )
    }
}

// ---------------------------------------------------------------- writing

struct Writer {
    entries: Vec<TensorEntry>,
    payload: Vec<u8>,
}

impl Writer {
    fn push(&mut self, name: String, kind: TensorKind, frame: Option<FrameTag>, channels: u32, dtype: Dtype, bytes: Vec<u8>) {
        self.entries.push(TensorEntry {
            name,
            kind,
            frame,
            channels,
            dtype,
            offset: self.payload.len() as u64,
            length: bytes.len() as u64,
        });
        self.payload.extend_from_slice(&bytes);
    }

    fn vectors(&mut self, name: String, kind: TensorKind, frame: Option<FrameTag>, vectors: &[Vec3], valid: &[bool]) {
        let mut bytes = Vec::with_capacity(vectors.len() * 12);
        for c in 0..3 {
            for (v, ok) in vectors.iter().zip(valid) {
                let x = if *ok { v[c] as f32 } else { f32::NAN };
                bytes.extend_from_slice(&x.to_le_bytes());
            }
        }
        self.push(name, kind, frame, 3, Dtype::F32, bytes);
    }

    fn mask(&mut self, name: String, mask: &[bool]) {
        let bytes = mask.iter().map(|m| *m as u8).collect();
        self.push(name, TensorKind::Validity, None, 1, Dtype::U8, bytes);
    }

    fn indices(&mut self, name: String, ids: impl Iterator<Item = Option<u64>>) -> Result<()> {
        let mut bytes = Vec::new();
        for id in ids {
            let v = match id {
                None => -1i32,
                Some(i) => i32::try_from(i).map_err(|_| entry_err(&name, format!("index {i} exceeds i32")))?,
            };
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        self.push(name, TensorKind::Objid, None, 1, Dtype::I32, bytes);
        Ok(())
    }

    fn quad(&mut self, prefix: &str, quad: &DpmQuad) -> Result<()> {
        for id in MapId::ALL {
            let m = quad.map(id);
            let name = format!("{prefix}{}", id.name());
            self.vectors(name.clone(), TensorKind::Pointmap, Some(m.frame), &m.points, &m.valid);
            self.mask(format!("{name}/valid"), &m.valid);
            let conf = quad.confidence[id.index()].values();
            let mut bytes = Vec::with_capacity(conf.len() * 4);
            for c in conf {
                bytes.extend_from_slice(&(*c as f32).to_le_bytes());
            }
            self.push(format!("{name}/confidence"), TensorKind::Confidence, None, 1, Dtype::F32, bytes);
        }
        for k in 0..2 {
            self.indices(
                format!("{prefix}objid/{}", k + 1),
                quad.object_ids[k].iter().map(|o| o.map(u64::from)),
            )?;
            self.mask(format!("{prefix}dynamic/{}", k + 1), &quad.dynamic_masks[k]);
        }
        Ok(())
    }
}

/// Serializes an archive. Identical inputs give identical bytes.
pub fn encode_archive(archive: &DpmArchive) -> Result<Vec<u8>> {
    let quad = &archive.quad;
    quad.validate()?;
    let mut w = Writer {
        entries: Vec::new(),
        payload: Vec::new(),
    };
    w.quad("", quad)?;
    if let Some(sw) = &archive.swapped {
        sw.validate()?;
        if sw.width != quad.width || sw.height != quad.height {
            return Err(Error::Argument("swapped quad differs in size".into()));
        }
        w.quad(SWAPPED_PREFIX, sw)?;
    }
    let ground_truth = match &archive.ground_truth {
        None => None,
        Some(gt) => {
            for kind in FlowKind::ALL {
                if let Some(f) = gt.flows.get(kind) {
                    if f.vectors.len() != quad.len() || f.valid.len() != quad.len() {
                        return Err(Error::Argument(format!("ground-truth {} has the wrong size", kind.tag())));
                    }
                    w.vectors(format!("gt/{}", kind.tag()), TensorKind::Flow, None, &f.vectors, &f.valid);
                }
            }
            if gt.correspondence.len() != quad.len() {
                return Err(Error::Argument("ground-truth correspondence has the wrong size".into()));
            }
            w.indices(
                "gt/correspondence".into(),
                gt.correspondence.iter().map(|c| c.map(|i| i as u64)),
            )?;
            Some(GroundTruthHeader {
                camera1: (&gt.camera1).into(),
                camera2: (&gt.camera2).into(),
                camera_motion: (&gt.camera_motion).into(),
                objects: gt
                    .objects
                    .iter()
                    .map(|o| ObjectHeader {
                        id: o.id,
                        dynamic: o.dynamic,
                        motion: (&o.motion).into(),
                    })
                    .collect(),
            })
        }
    };
    let header = Header {
        format_version: FORMAT_VERSION,
        width: quad.width,
        height: quad.height,
        metadata: archive.metadata.clone(),
        ground_truth,
        tensors: w.entries,
    };
    let text = toml::to_string(&header)
        .map_err(|e| Error::Argument(format!("archive header cannot be serialized: {e}")))?;
    let mut out = Vec::with_capacity(PREAMBLE + text.len() + w.payload.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(text.len() as u64).to_le_bytes());
    out.extend_from_slice(text.as_bytes());
    out.extend_from_slice(&w.payload);
    Ok(out)
}

pub fn write_archive(archive: &DpmArchive, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_archive(archive)?;
    let path = path.as_ref();
    std::fs::write(path, bytes).map_err(|source| {
        ArchiveError::Io {
            path: path.display().to_string(),
            source,
        }
        .into()
    })
}

// ---------------------------------------------------------------- reading

struct Reader<'a> {
    header: Header,
    payload: &'a [u8],
    len: usize,
}

impl<'a> Reader<'a> {
    fn parse(bytes: &'a [u8]) -> Result<Self> {
        if bytes.len() < 4 || bytes[..4] != MAGIC {
            return Err(ArchiveError::BadMagic.into());
        }
        if bytes.len() < PREAMBLE {
            return Err(ArchiveError::Truncated(format!(
                "{} bytes, preamble needs {PREAMBLE}",
                bytes.len()
            ))
            .into());
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(ArchiveError::UnsupportedVersion {
                found: version,
                supported: FORMAT_VERSION,
            }
            .into());
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let available = (bytes.len() - PREAMBLE) as u64;
        if header_len > available {
            return Err(ArchiveError::Truncated(format!(
                "header declares {header_len} bytes, {available} remain"
            ))
            .into());
        }
        let end = PREAMBLE + header_len as usize;
        let text = std::str::from_utf8(&bytes[PREAMBLE..end])
            .map_err(|e| ArchiveError::Header(format!("not UTF-8: {e}")))?;
        let header: Header =
            toml::from_str(text).map_err(|e| ArchiveError::Header(e.to_string()))?;
        if header.format_version != version {
            return Err(ArchiveError::Header(format!(
                "header says version {}, preamble says {version}",
                header.format_version
            ))
            .into());
        }
        let len = header
            .width
            .checked_mul(header.height)
            .filter(|n| *n > 0)
            .ok_or_else(|| ArchiveError::Header(format!("bad size {}x{}", header.width, header.height)))?;
        let payload = &bytes[end..];
        let mut expected_offset = 0u64;
        for e in &header.tensors {
            if e.offset != expected_offset {
                return Err(entry_err(
                    &e.name,
                    format!("offset {} but packing requires {expected_offset}", e.offset),
                ));
            }
            let end = e.offset.checked_add(e.length).ok_or_else(|| entry_err(&e.name, "offset overflows"))?;
            if end > payload.len() as u64 {
                return Err(entry_err(
                    &e.name,
                    format!("bytes {}..{end} lie past the end of the payload ({} bytes)", e.offset, payload.len()),
                ));
            }
            expected_offset = end;
        }
        if expected_offset != payload.len() as u64 {
            return Err(ArchiveError::Header(format!(
                "{} trailing payload bytes",
                payload.len() as u64 - expected_offset
            ))
            .into());
        }
        for (i, e) in header.tensors.iter().enumerate() {
            if header.tensors[..i].iter().any(|o| o.name == e.name) {
                return Err(entry_err(&e.name, "duplicate tensor name"));
            }
        }
        Ok(Self { header, payload, len })
    }

    fn entry(&self, name: &str) -> Option<&TensorEntry> {
        self.header.tensors.iter().find(|e| e.name == name)
    }

    /// Raw bytes of `name` after checking kind, dtype and size.
    fn raw(&self, name: &str, kind: TensorKind, dtype: Dtype, channels: u32) -> Result<Option<(&TensorEntry, &'a [u8])>> {
        let Some(e) = self.entry(name) else {
            return Ok(None);
        };
        if e.kind != kind || e.dtype != dtype || e.channels != channels {
            return Err(entry_err(
                name,
                format!(
                    "expected {kind:?} {dtype:?} x{channels}, found {:?} {:?} x{}",
                    e.kind, e.dtype, e.channels
                ),
            ));
        }
        let expected = (self.len as u64)
            .checked_mul(channels as u64)
            .and_then(|n| n.checked_mul(dtype.size()));
        if expected != Some(e.length) {
            return Err(entry_err(
                name,
                format!("length {} does not match a {}x{} grid", e.length, self.header.width, self.header.height),
            ));
        }
        let start = e.offset as usize;
        Ok(Some((e, &self.payload[start..start + e.length as usize])))
    }

    fn required<T>(&self, name: &str, v: Option<T>) -> Result<T> {
        v.ok_or_else(|| entry_err(name, "missing"))
    }

    fn f32s(bytes: &[u8]) -> impl Iterator<Item = f32> + '_ {
        bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()))
    }

    fn mask(&self, name: &str) -> Result<Option<Vec<bool>>> {
        let Some((_, bytes)) = self.raw(name, TensorKind::Validity, Dtype::U8, 1)? else {
            return Ok(None);
        };
        bytes
            .iter()
            .enumerate()
            .map(|(i, b)| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(entry_err(name, format!("flag {other} at pixel {i} is not 0 or 1"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    fn indices(&self, name: &str, bound: Option<usize>) -> Result<Option<Vec<Option<u32>>>> {
        let Some((_, bytes)) = self.raw(name, TensorKind::Objid, Dtype::I32, 1)? else {
            return Ok(None);
        };
        bytes
            .chunks_exact(4)
            .enumerate()
            .map(|(i, c)| {
                let v = i32::from_le_bytes(c.try_into().unwrap());
                match v {
                    -1 => Ok(None),
                    v if v >= 0 && bound.is_none_or(|b| (v as usize) < b) => Ok(Some(v as u32)),
                    v => Err(entry_err(name, format!("index {v} at pixel {i} is out of range"))),
                }
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    /// Planar three-channel floats; with `valid = None` a vector is valid iff
    /// all of its channels are finite.
    fn vectors(&self, name: &str, kind: TensorKind, valid: Option<&[bool]>) -> Result<Option<(Option<FrameTag>, Vec<Vec3>, Vec<bool>)>> {
        let Some((e, bytes)) = self.raw(name, kind, Dtype::F32, 3)? else {
            return Ok(None);
        };
        let n = self.len;
        let vals: Vec<f32> = Self::f32s(bytes).collect();
        let mut points = Vec::with_capacity(n);
        let mut flags = Vec::with_capacity(n);
        for k in 0..n {
            let v = [vals[k], vals[n + k], vals[2 * n + k]];
            let finite = v.iter().all(|c| c.is_finite());
            let ok = match valid {
                Some(mask) => {
                    if mask[k] && !finite {
                        return Err(ArchiveError::NonFiniteAtValid {
                            tensor: name.to_string(),
                            pixel: k,
                        }
                        .into());
                    }
                    mask[k]
                }
                None => {
                    if !finite && v.iter().any(|c| c.is_finite()) {
                        return Err(entry_err(name, format!("partially non-finite vector at pixel {k}")));
                    }
                    finite
                }
            };
            flags.push(ok);
            points.push(if ok { Vec3::new(v[0] as f64, v[1] as f64, v[2] as f64) } else { Vec3::zeros() });
        }
        Ok(Some((e.frame, points, flags)))
    }

    fn quad(&self, prefix: &str) -> Result<Option<DpmQuad>> {
        let any = prefix.is_empty() || self.header.tensors.iter().any(|e| e.name.starts_with(prefix));
        if !any {
            return Ok(None);
        }
        let mut maps = Vec::with_capacity(4);
        let mut confidence = Vec::with_capacity(4);
        for id in MapId::ALL {
            let name = format!("{prefix}{}", id.name());
            let vname = format!("{name}/valid");
            let valid = self.required(&vname, self.mask(&vname)?)?;
            let (frame, points, valid) =
                self.required(&name, self.vectors(&name, TensorKind::Pointmap, Some(&valid))?)?;
            let frame = frame.ok_or_else(|| entry_err(&name, "missing frame tag"))?;
            if !(1..=2).contains(&frame.time) || !(1..=2).contains(&frame.view) {
                return Err(entry_err(&name, format!("frame tag {frame} is not in {{1, 2}}")));
            }
            maps.push(PointMap {
                width: self.header.width,
                height: self.header.height,
                points,
                valid,
                frame,
            });
            let cname = format!("{name}/confidence");
            let (_, bytes) = self.required(&cname, self.raw(&cname, TensorKind::Confidence, Dtype::F32, 1)?)?;
            let values = Self::f32s(bytes).map(f64::from).collect();
            confidence.push(ConfidenceGrid::new(values).map_err(|e| entry_err(&cname, e.to_string()))?);
        }
        let mut ids = Vec::with_capacity(2);
        let mut dynamic = Vec::with_capacity(2);
        for k in 1..=2 {
            let name = format!("{prefix}objid/{k}");
            ids.push(self.required(&name, self.indices(&name, None)?)?);
            let name = format!("{prefix}dynamic/{k}");
            dynamic.push(self.required(&name, self.mask(&name)?)?);
        }
        let mut maps = maps.into_iter();
        let quad = DpmQuad {
            width: self.header.width,
            height: self.header.height,
            p11: maps.next().unwrap(),
            p21: maps.next().unwrap(),
            p12: maps.next().unwrap(),
            p22: maps.next().unwrap(),
            confidence: confidence.try_into().unwrap(),
            object_ids: ids.try_into().unwrap(),
            dynamic_masks: dynamic.try_into().unwrap(),
        };
        quad.validate()
            .map_err(|e| ArchiveError::Header(format!("inconsistent quad `{prefix}`: {e}")))?;
        Ok(Some(quad))
    }

    fn ground_truth(&self) -> Result<Option<GroundTruth>> {
        let Some(h) = &self.header.ground_truth else {
            return Ok(None);
        };
        let header_err = |e: Error| ArchiveError::Header(format!("ground truth: {e}"));
        let mut flows = Vec::new();
        for kind in FlowKind::ALL {
            let name = format!("gt/{}", kind.tag());
            flows.push(self.vectors(&name, TensorKind::Flow, None)?.map(|(_, vectors, valid)| FlowField {
                kind,
                width: self.header.width,
                height: self.header.height,
                vectors,
                valid,
            }));
        }
        let mut flows = flows.into_iter();
        let (sf, sb) = (flows.next().unwrap(), flows.next().unwrap());
        let of = self.required("gt/OF-F", flows.next().unwrap())?;
        let ob = self.required("gt/OF-B", flows.next().unwrap())?;
        let correspondence = self
            .required("gt/correspondence", self.indices("gt/correspondence", Some(self.len))?)?
            .into_iter()
            .map(|c| c.map(|i| i as usize))
            .collect();
        Ok(Some(GroundTruth {
            camera1: h.camera1.camera().map_err(header_err)?,
            camera2: h.camera2.camera().map_err(header_err)?,
            camera_motion: h.camera_motion.transform(),
            objects: h
                .objects
                .iter()
                .map(|o| ObjectMotion {
                    id: o.id,
                    dynamic: o.dynamic,
                    motion: o.motion.transform(),
                })
                .collect(),
            flows: FlowSet {
                scene_forward: sf,
                scene_backward: sb,
                object_forward: of,
                object_backward: ob,
            },
            correspondence,
        }))
    }
}

/// Parses and validates an archive held in memory. Never panics.
pub fn decode_archive(bytes: &[u8]) -> Result<DpmArchive> {
    let r = Reader::parse(bytes)?;
    let quad = r
        .quad("")?
        .ok_or_else(|| entry_err("P11", "missing"))?;
    let swapped = r.quad(SWAPPED_PREFIX)?;
    let ground_truth = r.ground_truth()?;
    Ok(DpmArchive {
        quad,
        swapped,
        ground_truth,
        metadata: r.header.metadata.clone(),
    })
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| {
        ArchiveError::Io {
            path: path.display().to_string(),
            source,
        }
        .into()
    })
}

pub fn read_archive(path: impl AsRef<Path>) -> Result<DpmArchive> {
    decode_archive(&read_bytes(path.as_ref())?)
}

/// Checks magic, version, directory bounds and the NaN policy.
pub fn validate_archive(path: impl AsRef<Path>) -> Result<ValidationReport> {
    let bytes = read_bytes(path.as_ref())?;
    validate_bytes(&bytes)
}

pub fn validate_bytes(bytes: &[u8]) -> Result<ValidationReport> {
    let archive = decode_archive(bytes)?;
    let r = Reader::parse(bytes)?;
    Ok(ValidationReport {
        version: r.header.format_version,
        width: archive.quad.width,
        height: archive.quad.height,
        tensors: r.header.tensors.len(),
        has_swapped: archive.swapped.is_some(),
        has_ground_truth: archive.ground_truth.is_some(),
    })
}

/// Directory of an archive without decoding tensors.
pub fn tensor_directory(bytes: &[u8]) -> Result<Vec<TensorEntry>> {
    Ok(Reader::parse(bytes)?.header.tensors)
}

/// Byte offset of the payload within an encoded archive.
pub fn payload_offset(bytes: &[u8]) -> Result<usize> {
    let r = Reader::parse(bytes)?;
    Ok(bytes.len() - r.payload.len())
}
