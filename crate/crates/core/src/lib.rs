//! Geometric core for lifting a 360-degree panorama into an explorable 3D
//! Gaussian scaffold.
//!
//! The pipeline: project an equirectangular panorama onto six perspective
//! anchor faces ([`projection::e2c`]), optionally exchange information across
//! faces through the equirect domain ([`fusion::bidirectional_fuse`]), lift
//! per-face colour and depth into one Gaussian per pixel
//! ([`scaffold::lift_to_scaffold`]), and render the scaffold from arbitrary
//! cameras ([`render::render`]). [`metrics`] scores depth maps and camera
//! trajectories, and [`io`] holds the file formats.

pub mod camera;
pub mod error;
pub mod fusion;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod motion;
pub mod projection;
pub mod raster;
pub mod render;
pub mod scaffold;
pub mod synth;

pub use camera::{CameraIntrinsics, CameraPose};
pub use error::{Error, FormatError, Result};
pub use geometry::{
    dir_from_equirect, edge_direction, equirect_from_dir, face_intrinsics, face_rotations, CubeRig, FaceId,
};
pub use metrics::{Trajectory, TrajectoryFrame};
pub use projection::{c2e, e2c, CubemapFaceSet};
pub use raster::{EquirectRaster, Raster};
pub use render::{project_gaussian, render, RenderedView};
pub use scaffold::{lift_to_scaffold, scaffold_from_pano, unproject_pixel, Gaussian, GaussianScaffold, LiftParams};
