//! Persistence: the DPMA container, PLY export. Metric reports live in
//! [`crate::metrics::MetricReport`].

mod archive;
mod ply;

pub use archive::{
    decode_archive, encode_archive, payload_offset, read_archive, tensor_directory,
    validate_archive, validate_bytes, write_archive, ArchiveError, DpmArchive, Dtype, TensorEntry,
    TensorKind, ValidationReport, FORMAT_VERSION, MAGIC,
};
pub use ply::{flow_ply, point_cloud_ply, point_map_ply, PlyFormat};
