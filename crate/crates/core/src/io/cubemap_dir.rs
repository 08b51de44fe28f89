//! A face set on disk: `<face>.png` or `<face>.pfm` per face plus `cubemap.json`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::camera::CameraIntrinsics;
use crate::error::{Error, Result};
use crate::geometry::FaceId;
use crate::projection::CubemapFaceSet;

use super::image_io::{read_pfm, read_png, write_pfm, write_png, BitDepth, RowOrder};

pub const META_FILE: &str = "cubemap.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubemapMeta {
    pub face_size: usize,
    pub fov_deg: f64,
    pub intrinsics: CameraIntrinsics,
    pub faces: Vec<FaceId>,
}

impl CubemapMeta {
    pub fn of(set: &CubemapFaceSet) -> Self {
        Self {
            face_size: set.face_size(),
            fov_deg: set.fov_deg(),
            intrinsics: *set.intrinsics(),
            faces: FaceId::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaceFormat {
    Png(BitDepth),
    Pfm,
}

/// Writes all six faces and the metadata file into `dir` (created if needed).
pub fn write_face_set(dir: &Path, set: &CubemapFaceSet, format: FaceFormat) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for face in FaceId::ALL {
        let r = set.face(face);
        match format {
            FaceFormat::Png(d) => write_png(&dir.join(format!("{face}.png")), r, RowOrder::BottomUp, d)?,
            FaceFormat::Pfm => write_pfm(&dir.join(format!("{face}.pfm")), r, RowOrder::BottomUp)?,
        }
    }
    let meta = serde_json::to_string_pretty(&CubemapMeta::of(set))?;
    std::fs::write(dir.join(META_FILE), meta + "\n")?;
    Ok(())
}

/// Reads the metadata file if present.
pub fn read_meta(dir: &Path) -> Result<Option<CubemapMeta>> {
    let p = dir.join(META_FILE);
    if !p.exists() {
        return Ok(None);
    }
    Ok(Some(serde_json::from_str(&std::fs::read_to_string(p)?)?))
}

/// Loads six faces from `dir`, preferring `.pfm` over `.png` per face. The
/// field of view comes from `cubemap.json`, or `fov_deg` when that is absent
/// or overridden.
pub fn read_face_set(dir: &Path, fov_deg: Option<f64>) -> Result<CubemapFaceSet> {
    if !dir.is_dir() {
        return Err(Error::invalid(format!(
            "face directory {} does not exist",
            dir.display()
        )));
    }
    let meta = read_meta(dir)?;
    let fov = fov_deg.or(meta.as_ref().map(|m| m.fov_deg)).ok_or_else(|| {
        Error::invalid(format!(
            "no {META_FILE} in {} and no field of view given",
            dir.display()
        ))
    })?;
    let mut faces = Vec::with_capacity(6);
    for face in FaceId::ALL {
        let pfm = dir.join(format!("{face}.pfm"));
        let png = dir.join(format!("{face}.png"));
        let r = if pfm.exists() {
            read_pfm(&pfm, RowOrder::BottomUp)?
        } else if png.exists() {
            read_png(&png, RowOrder::BottomUp)?
        } else {
            return Err(Error::invalid(format!(
                "missing face file for {face}: neither {face}.png nor {face}.pfm in {}",
                dir.display()
            )));
        };
        faces.push(r);
    }
    CubemapFaceSet::new(faces, fov)
}
