//! Lifting anchor faces (colour + depth) into a per-pixel 3D Gaussian scaffold.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::camera::CameraIntrinsics;
use crate::error::{Error, Result};
use crate::geometry::FaceId;
use crate::projection::{e2c, e2c_nearest, CubemapFaceSet};
use crate::raster::EquirectRaster;

/// One 3D Gaussian. Covariance is `R S S^T R^T` with `R` from `rotation`
/// (w, x, y, z) and `S = diag(scale)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gaussian {
    pub center: Vector3<f64>,
    pub rotation: Quaternion<f64>,
    pub scale: Vector3<f64>,
    pub opacity: f64,
    pub color: Vector3<f64>,
}

impl Gaussian {
    /// Checks the invariants, with `quat_tol` the allowed deviation of the
    /// quaternion norm from 1.
    pub fn check(&self, quat_tol: f64) -> std::result::Result<(), String> {
        if !self.center.iter().all(|v| v.is_finite()) {
            return Err("center is not finite".into());
        }
        if !(0.0..=1.0).contains(&self.opacity) {
            return Err(format!("opacity {} outside [0, 1]", self.opacity));
        }
        if !self.scale.iter().all(|&s| s > 0.0 && s.is_finite()) {
            return Err(format!("scale {:?} must be positive", self.scale.as_slice()));
        }
        let n = self.rotation.norm();
        if !((n - 1.0).abs() <= quat_tol) {
            return Err(format!("quaternion norm {n} is not 1"));
        }
        if !self.color.iter().all(|c| (0.0..=1.0).contains(c)) {
            return Err(format!("color {:?} outside [0, 1]", self.color.as_slice()));
        }
        Ok(())
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        UnitQuaternion::new_normalize(self.rotation)
            .to_rotation_matrix()
            .into_inner()
    }

    /// World-space covariance.
    pub fn covariance(&self) -> Matrix3<f64> {
        let m = self.rotation_matrix() * Matrix3::from_diagonal(&self.scale);
        m * m.transpose()
    }
}

/// Where a scaffold's Gaussians came from: one per pixel of each face, in
/// face-major then row-major order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceLayout {
    pub face_size: usize,
    pub fov_deg: f64,
    pub faces: Vec<FaceId>,
}

impl SourceLayout {
    pub fn pixel_count(&self) -> usize {
        self.face_size * self.face_size * self.faces.len()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GaussianScaffold {
    pub gaussians: Vec<Gaussian>,
    pub source_layout: Option<SourceLayout>,
}

impl GaussianScaffold {
    pub fn new(gaussians: Vec<Gaussian>, source_layout: Option<SourceLayout>) -> Self {
        Self {
            gaussians,
            source_layout,
        }
    }

    pub fn len(&self) -> usize {
        self.gaussians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaussians.is_empty()
    }

    /// Source pixels dropped for invalid depth, when the layout is known.
    pub fn culled_count(&self) -> Option<usize> {
        self.source_layout
            .as_ref()
            .map(|l| l.pixel_count().saturating_sub(self.len()))
    }
}

/// How panoramic depth values are measured.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthConvention {
    /// Euclidean distance from the panorama centre along the ray.
    #[default]
    RayDistance,
    /// Distance along each face's optical axis.
    ZDepth,
}

/// Per-Gaussian attributes that the lifting does not derive from the images.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LiftParams {
    pub opacity: f64,
    /// Isotropic scale is `scale_mult * depth / focal`, one pixel footprint at 1.0.
    pub scale_mult: f64,
    /// Camera-frame offset added to every unprojected centre.
    pub delta: Vector3<f64>,
    pub depth_convention: DepthConvention,
}

impl Default for LiftParams {
    fn default() -> Self {
        Self {
            opacity: 0.8,
            scale_mult: 1.0,
            delta: Vector3::zeros(),
            depth_convention: DepthConvention::RayDistance,
        }
    }
}

impl LiftParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.opacity) {
            return Err(Error::invalid(format!("opacity {} outside [0, 1]", self.opacity)));
        }
        if !(self.scale_mult > 0.0 && self.scale_mult.is_finite()) {
            return Err(Error::invalid(format!(
                "scale_mult must be > 0, got {}",
                self.scale_mult
            )));
        }
        if !self.delta.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("delta must be finite"));
        }
        Ok(())
    }
}

/// `K^-1 (u_x, u_y, 1) d + delta`, in camera coordinates.
pub fn unproject_pixel(u: (f64, f64), d: f64, k: &CameraIntrinsics, delta: &Vector3<f64>) -> Result<Vector3<f64>> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::InvalidDepth(d));
    }
    let (w, h) = (k.width as f64, k.height as f64);
    if !((0.0..=w).contains(&u.0) && (0.0..=h).contains(&u.1)) {
        return Err(Error::invalid(format!(
            "pixel ({}, {}) outside {}x{} image",
            u.0, u.1, k.width, k.height
        )));
    }
    Ok(k.ray(u.0, u.1) * d + delta)
}

#[inline]
fn valid_depth(d: f64) -> bool {
    d > 0.0 && d.is_finite()
}

/// One Gaussian per valid-depth face pixel; `depth` is z-depth per face.
pub fn lift_to_scaffold(rgb: &CubemapFaceSet, depth: &CubemapFaceSet, params: &LiftParams) -> Result<GaussianScaffold> {
    lift_impl(rgb, depth, None, params)
}

/// As [`lift_to_scaffold`], with a per-pixel camera-frame offset map (three
/// channels) added on top of `params.delta`.
pub fn lift_to_scaffold_with_offsets(
    rgb: &CubemapFaceSet,
    depth: &CubemapFaceSet,
    offsets: &CubemapFaceSet,
    params: &LiftParams,
) -> Result<GaussianScaffold> {
    if offsets.channels() != 3 || !offsets.same_geometry(rgb) {
        return Err(Error::invalid("offset map must be a 3-channel face set matching rgb"));
    }
    lift_impl(rgb, depth, Some(offsets), params)
}

fn lift_impl(
    rgb: &CubemapFaceSet,
    depth: &CubemapFaceSet,
    offsets: Option<&CubemapFaceSet>,
    params: &LiftParams,
) -> Result<GaussianScaffold> {
    params.validate()?;
    if rgb.channels() != 3 {
        return Err(Error::invalid(format!(
            "rgb faces need 3 channels, got {}",
            rgb.channels()
        )));
    }
    if depth.channels() != 1 {
        return Err(Error::invalid(format!(
            "depth faces need 1 channel, got {}",
            depth.channels()
        )));
    }
    if !rgb.same_geometry(depth) {
        return Err(Error::invalid(
            "rgb and depth face sets differ in size or field of view",
        ));
    }
    let k = *rgb.intrinsics();
    let n = rgb.face_size();
    let mut gaussians = Vec::with_capacity(6 * n * n);
    for face in FaceId::ALL {
        let rot = face.rotation();
        let (crgb, cdepth) = (rgb.face(face), depth.face(face));
        for y in 0..n {
            for x in 0..n {
                let d = cdepth.get(x, y, 0);
                if !valid_depth(d) {
                    continue;
                }
                let mut delta = params.delta;
                if let Some(off) = offsets {
                    let o = off.face(face).pixel(x, y);
                    delta += Vector3::new(o[0], o[1], o[2]);
                }
                let cam = unproject_pixel((x as f64 + 0.5, y as f64 + 0.5), d, &k, &delta)?;
                let c = crgb.pixel(x, y);
                let s = params.scale_mult * d / k.focal;
                gaussians.push(Gaussian {
                    center: rot * cam,
                    rotation: Quaternion::identity(),
                    scale: Vector3::repeat(s),
                    opacity: params.opacity,
                    color: Vector3::new(c[0], c[1], c[2]).map(|v| v.clamp(0.0, 1.0)),
                });
            }
        }
    }
    Ok(GaussianScaffold {
        gaussians,
        source_layout: Some(SourceLayout {
            face_size: n,
            fov_deg: rgb.fov_deg(),
            faces: FaceId::ALL.to_vec(),
        }),
    })
}

/// Converts per-face ray distances into z-depths: `d_z = d_ray / |K^-1 u|`.
/// Invalid samples pass through unchanged.
pub fn ray_to_z_depth(depth: &CubemapFaceSet) -> Result<CubemapFaceSet> {
    let k = *depth.intrinsics();
    let faces = depth
        .faces()
        .iter()
        .map(|f| {
            let mut out = f.clone();
            for y in 0..f.height() {
                for x in 0..f.width() {
                    let d = f.get(x, y, 0);
                    if valid_depth(d) {
                        let norm = k.ray(x as f64 + 0.5, y as f64 + 0.5).norm();
                        out.set(x, y, 0, d / norm);
                    }
                }
            }
            out
        })
        .collect();
    CubemapFaceSet::new(faces, depth.fov_deg())
}

/// Projects a panorama and its depth map onto anchor faces and lifts them.
/// Colour is resampled bilinearly, depth by nearest neighbour.
pub fn scaffold_from_pano(
    pano: &EquirectRaster,
    pano_depth: &EquirectRaster,
    face_size: usize,
    fov_deg: f64,
    params: &LiftParams,
) -> Result<GaussianScaffold> {
    if pano.width() != pano_depth.width() || pano.height() != pano_depth.height() {
        return Err(Error::invalid(format!(
            "panorama is {}x{} but depth is {}x{}",
            pano.width(),
            pano.height(),
            pano_depth.width(),
            pano_depth.height()
        )));
    }
    let rgb = e2c(pano, face_size, fov_deg)?;
    let depth = e2c_nearest(pano_depth, face_size, fov_deg)?;
    let depth = match params.depth_convention {
        DepthConvention::RayDistance => ray_to_z_depth(&depth)?,
        DepthConvention::ZDepth => depth,
    };
    lift_to_scaffold(&rgb, &depth, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::face_intrinsics;

    #[test]
    fn unproject_examples() {
        let k = face_intrinsics(512, 90.0).unwrap();
        let z = Vector3::zeros();
        assert_eq!(
            unproject_pixel((k.cx, k.cy), 3.0, &k, &z).unwrap(),
            Vector3::new(0.0, 0.0, 3.0)
        );
        assert_eq!(
            unproject_pixel((k.cx + k.focal, k.cy), 2.0, &k, &z).unwrap(),
            Vector3::new(2.0, 0.0, 2.0)
        );
        assert_eq!(
            unproject_pixel((k.cx, k.cy), 1.0, &k, &Vector3::new(0.1, 0.0, 0.0)).unwrap(),
            Vector3::new(0.1, 0.0, 1.0)
        );
        assert!(matches!(
            unproject_pixel((1.0, 1.0), 0.0, &k, &z),
            Err(Error::InvalidDepth(_))
        ));
        assert!(matches!(
            unproject_pixel((1.0, 1.0), -1.0, &k, &z),
            Err(Error::InvalidDepth(_))
        ));
        assert!(unproject_pixel((600.0, 1.0), 1.0, &k, &z).is_err());
    }

    fn faces(n: usize, fov: f64, rgb: f64, d: f64) -> (CubemapFaceSet, CubemapFaceSet) {
        (
            CubemapFaceSet::filled(n, 3, fov, rgb).unwrap(),
            CubemapFaceSet::filled(n, 1, fov, d).unwrap(),
        )
    }

    #[test]
    fn constant_depth_keeps_z_per_face() {
        let (rgb, depth) = faces(8, 90.0, 0.5, 2.0);
        let s = lift_to_scaffold(&rgb, &depth, &LiftParams::default()).unwrap();
        assert_eq!(s.len(), 6 * 64);
        assert_eq!(s.culled_count(), Some(0));
        for (i, g) in s.gaussians.iter().enumerate() {
            let face = FaceId::ALL[i / 64];
            let cam = face.rotation().transpose() * g.center;
            assert!((cam.z - 2.0).abs() < 1e-12);
            assert_eq!(g.opacity, 0.8);
            assert_eq!(g.rotation, Quaternion::identity());
            assert!((g.scale.x - 2.0 / 4.0).abs() < 1e-15);
        }
    }

    #[test]
    fn face_size_two_centres_on_rays() {
        let (rgb, depth) = faces(2, 90.0, 0.2, 2.0);
        let s = lift_to_scaffold(&rgb, &depth, &LiftParams::default()).unwrap();
        let k = face_intrinsics(2, 90.0).unwrap();
        // every pixel centre of a 2x2 90-degree face has |K^-1 u| = sqrt(1.5)
        let expected = 2.0 * k.ray(0.5, 0.5).norm();
        for g in &s.gaussians {
            assert!((g.center.norm() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_depth_is_culled() {
        let (rgb, mut depth) = faces(4, 95.0, 0.2, 1.0);
        depth.face_mut(FaceId::Left).set(1, 2, 0, 0.0);
        depth.face_mut(FaceId::Up).set(0, 0, 0, f64::NAN);
        depth.face_mut(FaceId::Up).set(3, 3, 0, -5.0);
        let s = lift_to_scaffold(&rgb, &depth, &LiftParams::default()).unwrap();
        assert_eq!(s.len() + 3, 6 * 16);
        assert_eq!(s.culled_count(), Some(3));
    }

    #[test]
    fn geometry_mismatch_rejected() {
        let (rgb, _) = faces(4, 95.0, 0.2, 1.0);
        let depth = CubemapFaceSet::filled(4, 1, 90.0, 1.0).unwrap();
        assert!(lift_to_scaffold(&rgb, &depth, &LiftParams::default()).is_err());
        let depth = CubemapFaceSet::filled(8, 1, 95.0, 1.0).unwrap();
        assert!(lift_to_scaffold(&rgb, &depth, &LiftParams::default()).is_err());
        let bad = LiftParams {
            opacity: 1.5,
            ..Default::default()
        };
        let depth = CubemapFaceSet::filled(4, 1, 95.0, 1.0).unwrap();
        assert!(lift_to_scaffold(&rgb, &depth, &bad).is_err());
    }

    #[test]
    fn per_pixel_offsets_add_to_delta() {
        let (rgb, depth) = faces(2, 90.0, 0.2, 1.0);
        let mut off = CubemapFaceSet::filled(2, 3, 90.0, 0.0).unwrap();
        off.face_mut(FaceId::Front)
            .pixel_mut(1, 1)
            .copy_from_slice(&[0.0, 0.0, 0.5]);
        let params = LiftParams {
            delta: Vector3::new(0.1, 0.0, 0.0),
            ..Default::default()
        };
        let a = lift_to_scaffold(&rgb, &depth, &params).unwrap();
        let b = lift_to_scaffold_with_offsets(&rgb, &depth, &off, &params).unwrap();
        assert_eq!(
            b.gaussians[3].center - a.gaussians[3].center,
            Vector3::new(0.0, 0.0, 0.5)
        );
        assert_eq!(a.gaussians[0].center, b.gaussians[0].center);
    }

    #[test]
    fn sphere_pano_lands_on_sphere() {
        let pano = EquirectRaster::filled(64, 3, 0.5).unwrap();
        let depth = EquirectRaster::filled(64, 1, 2.5).unwrap();
        let s = scaffold_from_pano(&pano, &depth, 8, 95.0, &LiftParams::default()).unwrap();
        assert_eq!(s.len(), 6 * 64);
        for g in &s.gaussians {
            assert!((g.center.norm() - 2.5).abs() < 1e-12);
        }
        let wrong = EquirectRaster::filled(32, 1, 2.5).unwrap();
        assert!(scaffold_from_pano(&pano, &wrong, 8, 95.0, &LiftParams::default()).is_err());
    }

    #[test]
    fn covariance_of_isotropic_gaussian() {
        let g = Gaussian {
            center: Vector3::zeros(),
            rotation: Quaternion::new(0.5, 0.5, 0.5, 0.5),
            scale: Vector3::repeat(0.3),
            opacity: 1.0,
            color: Vector3::zeros(),
        };
        assert!((g.covariance() - Matrix3::identity() * 0.09).norm() < 1e-15);
        assert!(g.check(1e-9).is_ok());
    }
}
