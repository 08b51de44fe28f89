//! Trajectory JSON, shared with the viewer:
//!
//! ```json
//! {"intrinsics": {"focal": f, "cx": cx, "cy": cy, "width": w, "height": h},
//!  "frames": [{"index": 0, "rotation": [9 floats, row-major], "translation": [3 floats]}]}
//! ```

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::camera::{CameraIntrinsics, CameraPose};
use crate::error::{Error, Result};
use crate::metrics::{Trajectory, TrajectoryFrame};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameJson {
    index: u64,
    rotation: [f64; 9],
    translation: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct TrajectoryJson {
    intrinsics: CameraIntrinsics,
    frames: Vec<FrameJson>,
}

pub fn trajectory_to_json(t: &Trajectory) -> String {
    let doc = TrajectoryJson {
        intrinsics: t.intrinsics,
        frames: t
            .frames()
            .iter()
            .map(|f| {
                let r = &f.pose.rotation;
                FrameJson {
                    index: f.index,
                    rotation: std::array::from_fn(|i| r[(i / 3, i % 3)]),
                    translation: [f.pose.translation.x, f.pose.translation.y, f.pose.translation.z],
                }
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("trajectory serializes")
}

pub fn trajectory_from_json(text: &str) -> Result<Trajectory> {
    let doc: TrajectoryJson = serde_json::from_str(text)?;
    let frames = doc
        .frames
        .into_iter()
        .map(|f| {
            let rotation = Matrix3::from_row_slice(&f.rotation);
            let pose = CameraPose::new(rotation, Vector3::from(f.translation))
                .map_err(|e| Error::invalid(format!("frame {}: {e}", f.index)))?;
            Ok(TrajectoryFrame { index: f.index, pose })
        })
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(doc.intrinsics, frames)
}

pub fn write_trajectory<W: Write>(t: &Trajectory, mut sink: W) -> Result<()> {
    sink.write_all(trajectory_to_json(t).as_bytes())?;
    sink.write_all(b"\n")?;
    Ok(())
}

pub fn read_trajectory<R: Read>(mut source: R) -> Result<Trajectory> {
    let mut s = String::new();
    source.read_to_string(&mut s)?;
    trajectory_from_json(&s)
}

pub fn load_trajectory(path: &Path) -> Result<Trajectory> {
    read_trajectory(std::fs::File::open(path)?)
}

pub fn save_trajectory(path: &Path, t: &Trajectory) -> Result<()> {
    write_trajectory(t, std::fs::File::create(path)?)
}
