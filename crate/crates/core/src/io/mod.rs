//! On-disk formats: native scaffold stream, splat PLY, PNG/PFM rasters,
//! trajectory JSON and cubemap directories.

mod cubemap_dir;
mod image_io;
mod ply;
mod scaffold_file;
mod trajectory_json;

pub use cubemap_dir::{read_face_set, read_meta, write_face_set, CubemapMeta, FaceFormat, META_FILE};
pub use image_io::{
    decode_png, encode_png, read_equirect_pfm, read_equirect_png, read_pfm, read_pfm_from, read_png, write_pfm,
    write_pfm_to, write_png, BitDepth, RowOrder,
};
pub use ply::{export_splat_ply, import_splat_ply, PlyExport, OPACITY_EPS, SH_C0};
pub use scaffold_file::{
    encoded_len, read_scaffold, write_scaffold, FLAG_LAYOUT, HEADER_BYTES, MAGIC, QUAT_NORM_TOLERANCE, RECORD_BYTES,
    VERSION,
};
pub use trajectory_json::{
    load_trajectory, read_trajectory, save_trajectory, trajectory_from_json, trajectory_to_json, write_trajectory,
};

use std::path::Path;

use crate::error::Result;
use crate::scaffold::GaussianScaffold;

pub fn save_scaffold(path: &Path, s: &GaussianScaffold) -> Result<u64> {
    write_scaffold(s, std::fs::File::create(path)?)
}

pub fn load_scaffold(path: &Path) -> Result<GaussianScaffold> {
    read_scaffold(std::fs::File::open(path)?)
}
