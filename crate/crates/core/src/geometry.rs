//! Sphere parameterisation and the six-face cube camera rig.
//!
//! World frame: `+y` up, `+z` forward, `+x` towards increasing longitude.
//! A unit direction `q` relates to longitude `theta` and latitude `phi` by
//! `q = (sin(theta) cos(phi), sin(phi), cos(theta) cos(phi))`. Face `i` is a
//! pinhole camera at the origin whose camera-to-world rotation is `R_i`; a
//! direction projects onto it as `p = K R_i^T q`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::camera::CameraIntrinsics;
use crate::error::{Error, Result};

/// Unit direction for a longitude/latitude pair. Longitude wraps into
/// `[-pi, pi)`, latitude clamps to `[-pi/2, pi/2]`.
pub fn dir_from_equirect(theta: f64, phi: f64) -> Vector3<f64> {
    let theta = wrap_longitude(theta);
    let phi = phi.clamp(-FRAC_PI_2, FRAC_PI_2);
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Vector3::new(st * cp, sp, ct * cp)
}

/// Inverse of [`dir_from_equirect`]. At the poles longitude is defined as 0.
pub fn equirect_from_dir(q: &Vector3<f64>) -> Result<(f64, f64)> {
    let n = q.norm();
    if !(n.is_finite() && (n - 1.0).abs() <= 1e-6) {
        return Err(Error::invalid(format!(
            "equirect_from_dir expects a unit vector, got norm {n}"
        )));
    }
    Ok(angles_of(q))
}

/// Longitude/latitude of any non-zero direction (not necessarily unit).
#[inline]
pub(crate) fn angles_of(q: &Vector3<f64>) -> (f64, f64) {
    let horizontal = q.x.hypot(q.z);
    let phi = q.y.atan2(horizontal);
    let theta = if horizontal == 0.0 {
        0.0
    } else {
        wrap_longitude(q.x.atan2(q.z))
    };
    (theta, phi)
}

#[inline]
pub fn wrap_longitude(theta: f64) -> f64 {
    if (-PI..PI).contains(&theta) {
        return theta;
    }
    let t = (theta + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can round up to exactly 2*pi
    if t >= PI {
        t - 2.0 * PI
    } else {
        t
    }
}

/// Cube faces in canonical order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FaceId {
    Front,
    Right,
    Back,
    Left,
    Up,
    Down,
}

impl FaceId {
    pub const ALL: [FaceId; 6] = [
        FaceId::Front,
        FaceId::Right,
        FaceId::Back,
        FaceId::Left,
        FaceId::Up,
        FaceId::Down,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<FaceId> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            FaceId::Front => "front",
            FaceId::Right => "right",
            FaceId::Back => "back",
            FaceId::Left => "left",
            FaceId::Up => "up",
            FaceId::Down => "down",
        }
    }

    /// World axis the face looks along.
    pub fn axis(self) -> Vector3<f64> {
        match self {
            FaceId::Front => Vector3::z(),
            FaceId::Right => Vector3::x(),
            FaceId::Back => -Vector3::z(),
            FaceId::Left => -Vector3::x(),
            FaceId::Up => Vector3::y(),
            FaceId::Down => -Vector3::y(),
        }
    }

    /// Camera-to-world rotation. Side faces keep world `+y` as camera `+y`.
    pub fn rotation(self) -> Matrix3<f64> {
        #[rustfmt::skip]
        let m = match self {
            FaceId::Front => Matrix3::identity(),
            FaceId::Right => Matrix3::new(
                0.0, 0.0, 1.0,
                0.0, 1.0, 0.0,
                -1.0, 0.0, 0.0),
            FaceId::Back => Matrix3::new(
                -1.0, 0.0, 0.0,
                0.0, 1.0, 0.0,
                0.0, 0.0, -1.0),
            FaceId::Left => Matrix3::new(
                0.0, 0.0, -1.0,
                0.0, 1.0, 0.0,
                1.0, 0.0, 0.0),
            FaceId::Up => Matrix3::new(
                1.0, 0.0, 0.0,
                0.0, 0.0, 1.0,
                0.0, -1.0, 0.0),
            FaceId::Down => Matrix3::new(
                1.0, 0.0, 0.0,
                0.0, 0.0, -1.0,
                0.0, 1.0, 0.0),
        };
        m
    }
}

impl fmt::Display for FaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FaceId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        FaceId::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown face id {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FaceRotation {
    pub face: FaceId,
    pub rotation: Matrix3<f64>,
}

/// The six face rotations in canonical order (front, right, back, left, up, down).
pub fn face_rotations() -> [FaceRotation; 6] {
    FaceId::ALL.map(|face| FaceRotation {
        face,
        rotation: face.rotation(),
    })
}

/// `tan(deg)` for degree arguments, exact at 45 degrees so that 90-degree
/// faces get a focal length of exactly `w/2`.
pub(crate) fn tan_deg(deg: f64) -> f64 {
    if deg == 45.0 {
        1.0
    } else {
        deg.to_radians().tan()
    }
}

/// Intrinsics of a square face with the given field of view:
/// `f = (w/2) / tan(fov/2)`, principal point at the image centre.
pub fn face_intrinsics(face_size: usize, fov_deg: f64) -> Result<CameraIntrinsics> {
    if face_size < 2 || face_size % 2 != 0 {
        return Err(Error::invalid(format!(
            "face_size must be even and >= 2, got {face_size}"
        )));
    }
    if !(fov_deg > 0.0 && fov_deg < 180.0) {
        return Err(Error::invalid(format!("fov_deg must be in (0, 180), got {fov_deg}")));
    }
    let half = face_size as f64 / 2.0;
    CameraIntrinsics::new(half / tan_deg(fov_deg / 2.0), half, half, face_size, face_size)
}

/// Projection geometry shared by all faces of a cubemap.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CubeRig {
    pub intrinsics: CameraIntrinsics,
    pub fov_deg: f64,
    half_tan: f64,
    plane_norm: f64,
}

impl CubeRig {
    pub fn new(face_size: usize, fov_deg: f64) -> Result<Self> {
        let intrinsics = face_intrinsics(face_size, fov_deg)?;
        let half_tan = tan_deg(fov_deg / 2.0);
        Ok(Self {
            intrinsics,
            fov_deg,
            half_tan,
            plane_norm: (1.0 + half_tan * half_tan).sqrt(),
        })
    }

    pub fn face_size(&self) -> usize {
        self.intrinsics.width
    }

    /// Unit world direction through continuous pixel `(u, v)` of `face`:
    /// `R_i K^-1 (u, v, 1)`, normalised.
    #[inline]
    pub fn pixel_direction(&self, face: FaceId, u: f64, v: f64) -> Vector3<f64> {
        (face.rotation() * self.intrinsics.ray(u, v)).normalize()
    }

    /// `p = K R_i^T q`; `None` when `q` points away from the face.
    #[inline]
    pub fn project(&self, face: FaceId, q: &Vector3<f64>) -> Option<Vector2<f64>> {
        let c = face.rotation().transpose() * q;
        (c.z > 0.0).then(|| self.intrinsics.project(&c))
    }

    /// Angular distance (radians) from `q` to the nearest side plane of the
    /// face frustum; positive inside, negative outside.
    #[inline]
    pub fn frustum_margin(&self, face: FaceId, q: &Vector3<f64>) -> f64 {
        let c = face.rotation().transpose() * q;
        let n = c.norm();
        let t = self.half_tan;
        // outward plane normals (+-1, 0, -t) and (0, +-1, -t), scaled by 1/plane_norm
        let worst = (c.x.abs() - t * c.z).max(c.y.abs() - t * c.z);
        (-worst / (self.plane_norm * n)).clamp(-1.0, 1.0).asin()
    }

    /// Convex blend weights of every face whose frustum contains `q`.
    ///
    /// Each face is weighted by its frustum margin, so weights fall to zero at
    /// a face's border. When all containing faces sit exactly on their border
    /// (cube seams at 90 degrees) they share the weight equally.
    pub fn blend_weights(&self, q: &Vector3<f64>) -> BlendWeights {
        let mut w = BlendWeights::default();
        for face in FaceId::ALL {
            let m = self.frustum_margin(face, q);
            if m >= -MARGIN_SLACK {
                w.push(face, m.max(0.0));
            }
        }
        w.normalize();
        w
    }
}

/// Unit direction that leaves face `a`'s 90-degree boundary towards the
/// adjacent face `b` by angle `beta` (negative stays inside `a`), offset by `s`
/// along the shared edge (`s = +-1` reaches the edge's ends at the cube
/// corners). `a` and `b` must have perpendicular axes.
pub fn edge_direction(a: FaceId, b: FaceId, beta: f64, s: f64) -> Vector3<f64> {
    let (axis_a, axis_b) = (a.axis(), b.axis());
    let along = axis_a.cross(&axis_b);
    (axis_a + axis_b * (std::f64::consts::FRAC_PI_4 + beta).tan() + along * s).normalize()
}

/// Directions this close outside a frustum (radians) still count as inside,
/// absorbing rounding on exact 90-degree seams.
pub(crate) const MARGIN_SLACK: f64 = 1e-12;

/// Faces containing a direction, with convex blend weights. Holds at most
/// six entries inline.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BlendWeights {
    len: usize,
    items: [(usize, f64); 6],
}

impl BlendWeights {
    fn push(&mut self, face: FaceId, w: f64) {
        self.items[self.len] = (face.index(), w);
        self.len += 1;
    }

    fn normalize(&mut self) {
        let total: f64 = self.items[..self.len].iter().map(|p| p.1).sum();
        if total > 0.0 {
            for p in &mut self.items[..self.len] {
                p.1 /= total;
            }
        } else {
            let eq = 1.0 / self.len.max(1) as f64;
            for p in &mut self.items[..self.len] {
                p.1 = eq;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = (FaceId, f64)> + '_ {
        self.items[..self.len].iter().map(|&(i, w)| (FaceId::ALL[i], w))
    }

    pub fn sum(&self) -> f64 {
        self.items[..self.len].iter().map(|p| p.1).sum()
    }
}
