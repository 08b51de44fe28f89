//! Pinhole intrinsics and world-to-camera poses.
//!
//! Camera frame: `+x` right, `+y` up (shared with the world frame), `+z` along
//! the optical axis. Image coordinates are `u = f*x/z + cx`, `v = f*y/z + cy`,
//! so rasters of perspective images have their row index growing with camera
//! `+y`. Writers in [`crate::io`] take care of flipping to top-down files.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square-pixel pinhole intrinsics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(focal: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Self {
            focal,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    /// Intrinsics of a centred camera with the given horizontal field of view.
    pub fn from_fov(width: usize, height: usize, fov_deg: f64) -> Result<Self> {
        if !(fov_deg > 0.0 && fov_deg < 180.0) {
            return Err(Error::invalid(format!("fov_deg must be in (0, 180), got {fov_deg}")));
        }
        let focal = (width as f64 / 2.0) / crate::geometry::tan_deg(fov_deg / 2.0);
        Self::new(focal, width as f64 / 2.0, height as f64 / 2.0, width, height)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.focal.is_finite() && self.focal > 0.0) {
            return Err(Error::invalid(format!("focal must be > 0, got {}", self.focal)));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("intrinsics width/height must be positive"));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64) {
            return Err(Error::invalid(format!("cx {} outside [0, {})", self.cx, self.width)));
        }
        if !(self.cy >= 0.0 && self.cy < self.height as f64) {
            return Err(Error::invalid(format!("cy {} outside [0, {})", self.cy, self.height)));
        }
        Ok(())
    }

    /// `K^-1 (u, v, 1)`: the camera-frame ray with unit z.
    #[inline]
    pub fn ray(&self, u: f64, v: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.focal, (v - self.cy) / self.focal, 1.0)
    }

    /// `K x / z`. Caller guarantees `z != 0`.
    #[inline]
    pub fn project(&self, p: &Vector3<f64>) -> Vector2<f64> {
        Vector2::new(self.focal * p.x / p.z + self.cx, self.focal * p.y / p.z + self.cy)
    }

    /// Rescales to a different image size, keeping the field of view.
    pub fn resized(&self, width: usize, height: usize) -> Result<Self> {
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        Self::new(self.focal * sx, self.cx * sx, self.cy * sy, width, height)
    }
}

/// World-to-camera rigid transform: `x_cam = rotation * x_world + translation`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraPose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

pub(crate) const ROTATION_TOLERANCE: f64 = 1e-9;

impl CameraPose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        check_rotation(&rotation, ROTATION_TOLERANCE)?;
        if !translation.iter().all(|t| t.is_finite()) {
            return Err(Error::invalid("pose translation must be finite"));
        }
        Ok(Self { rotation, translation })
    }

    /// Camera at `eye` looking at `target`, with world `+y` as the up hint.
    pub fn look_at(eye: Vector3<f64>, target: Vector3<f64>) -> Result<Self> {
        let forward = target - eye;
        if forward.norm() == 0.0 {
            return Err(Error::invalid("look_at: eye and target coincide"));
        }
        let z = forward.normalize();
        let x = Vector3::y().cross(&z);
        if x.norm() < 1e-12 {
            return Err(Error::invalid("look_at: view direction parallel to up"));
        }
        let x = x.normalize();
        let y = z.cross(&x);
        let rotation = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
        Ok(Self {
            rotation,
            translation: -(rotation * eye),
        })
    }

    /// Camera centre in world coordinates, `-R^T T`.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    #[inline]
    pub fn to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// The 3x4 matrix `[R | T]`, row-major.
    pub fn matrix3x4(&self) -> [[f64; 4]; 3] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            [r[(0, 0)], r[(0, 1)], r[(0, 2)], t.x],
            [r[(1, 0)], r[(1, 1)], r[(1, 2)], t.y],
            [r[(2, 0)], r[(2, 1)], r[(2, 2)], t.z],
        ]
    }
}

pub(crate) fn check_rotation(r: &Matrix3<f64>, tol: f64) -> Result<()> {
    if !r.iter().all(|v| v.is_finite()) {
        return Err(Error::invalid("rotation has non-finite entries"));
    }
    let err = (r.transpose() * r - Matrix3::identity()).abs().max();
    if err > tol {
        return Err(Error::invalid(format!(
            "rotation is not orthonormal (|R^T R - I| = {err:e})"
        )));
    }
    if r.determinant() <= 0.0 {
        return Err(Error::invalid("rotation has negative determinant"));
    }
    Ok(())
}

/// Geodesic angle between two rotations, `acos((tr(A B^T) - 1) / 2)`.
///
/// Evaluated through unit quaternions as `4 atan2(|qa - qb|, |qa + qb|)` with
/// `qa . qb >= 0`, which is accurate over the whole range and exactly 0 for
/// equal inputs (the acos form loses half the digits near 0).
pub fn geodesic_angle(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let quat = |m: &Matrix3<f64>| {
        UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*m))
            .into_inner()
            .coords
    };
    let (qa, mut qb) = (quat(a), quat(b));
    if qa.dot(&qb) < 0.0 {
        qb = -qb;
    }
    4.0 * (qa - qb).norm().atan2((qa + qb).norm())
}
