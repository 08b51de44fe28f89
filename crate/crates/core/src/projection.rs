//! Equirect <-> cubemap resampling (E2C / C2E).

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::camera::CameraIntrinsics;
use crate::error::{Error, Result};
use crate::geometry::{angles_of, dir_from_equirect, CubeRig, FaceId};
use crate::raster::{
    equirect_angles, sample_bilinear_clamped, sample_bilinear_wrap_x, sample_nearest_wrap_x, EquirectRaster, Raster,
};

/// Six square perspective rasters sharing a centre and intrinsics.
#[derive(Clone, Debug, PartialEq)]
pub struct CubemapFaceSet {
    faces: Vec<Raster>,
    rig: CubeRig,
}

impl CubemapFaceSet {
    /// `faces` must be given in [`FaceId::ALL`] order.
    pub fn new(faces: Vec<Raster>, fov_deg: f64) -> Result<Self> {
        if faces.len() != 6 {
            return Err(Error::invalid(format!("expected 6 faces, got {}", faces.len())));
        }
        let size = faces[0].width();
        let channels = faces[0].channels();
        for (f, r) in FaceId::ALL.iter().zip(&faces) {
            if r.width() != size || r.height() != size {
                return Err(Error::invalid(format!(
                    "face {f} is {}x{}, expected {size}x{size}",
                    r.width(),
                    r.height()
                )));
            }
            if r.channels() != channels {
                return Err(Error::invalid(format!(
                    "face {f} has {} channels, expected {channels}",
                    r.channels()
                )));
            }
        }
        let rig = CubeRig::new(size, fov_deg)?;
        Ok(Self { faces, rig })
    }

    pub fn filled(face_size: usize, channels: usize, fov_deg: f64, value: f64) -> Result<Self> {
        let face = Raster::filled(face_size, face_size, channels, value)?;
        Self::new(vec![face; 6], fov_deg)
    }

    pub fn face(&self, id: FaceId) -> &Raster {
        &self.faces[id.index()]
    }

    pub fn face_mut(&mut self, id: FaceId) -> &mut Raster {
        &mut self.faces[id.index()]
    }

    pub fn faces(&self) -> &[Raster] {
        &self.faces
    }

    pub fn into_faces(self) -> Vec<Raster> {
        self.faces
    }

    pub fn rig(&self) -> &CubeRig {
        &self.rig
    }

    pub fn intrinsics(&self) -> &CameraIntrinsics {
        &self.rig.intrinsics
    }

    pub fn fov_deg(&self) -> f64 {
        self.rig.fov_deg
    }

    pub fn face_size(&self) -> usize {
        self.rig.face_size()
    }

    pub fn channels(&self) -> usize {
        self.faces[0].channels()
    }

    pub fn same_geometry(&self, other: &CubemapFaceSet) -> bool {
        self.rig == other.rig
    }

    /// Applies `f` to each face pair, producing a new set with this geometry.
    pub fn zip_map(
        &self,
        other: &CubemapFaceSet,
        mut f: impl FnMut(&Raster, &Raster) -> Result<Raster>,
    ) -> Result<CubemapFaceSet> {
        if !self.same_geometry(other) {
            return Err(Error::invalid("face sets have different geometry"));
        }
        let faces = self
            .faces
            .iter()
            .zip(&other.faces)
            .map(|(a, b)| f(a, b))
            .collect::<Result<Vec<_>>>()?;
        CubemapFaceSet::new(faces, self.fov_deg())
    }
}

fn render_faces(
    rig: &CubeRig,
    channels: usize,
    sample: impl Fn(&Vector3<f64>, &mut [f64]) + Sync,
) -> Result<Vec<Raster>> {
    let size = rig.face_size();
    FaceId::ALL
        .iter()
        .map(|&face| {
            let mut r = Raster::zeros(size, size, channels)?;
            r.rows_mut().enumerate().par_bridge().for_each(|(y, row)| {
                let v = y as f64 + 0.5;
                for (x, px) in row.chunks_exact_mut(channels).enumerate() {
                    let q = rig.pixel_direction(face, x as f64 + 0.5, v);
                    sample(&q, px);
                }
            });
            Ok(r)
        })
        .collect()
}

#[inline]
fn equirect_point(src: &Raster, q: &Vector3<f64>) -> (f64, f64) {
    let (theta, phi) = angles_of(q);
    crate::raster::equirect_coords(theta, phi, src.width(), src.height())
}

/// Equirect-to-cube: each face pixel takes the bilinear sample of `src`
/// along its viewing direction.
pub fn e2c(src: &EquirectRaster, face_size: usize, fov_deg: f64) -> Result<CubemapFaceSet> {
    let rig = CubeRig::new(face_size, fov_deg)?;
    let src = src.as_raster();
    let faces = render_faces(&rig, src.channels(), |q, out| {
        let (x, y) = equirect_point(src, q);
        sample_bilinear_wrap_x(src, x, y, out);
    })?;
    Ok(CubemapFaceSet { faces, rig })
}

/// Like [`e2c`] but with nearest-neighbour lookup, for depth maps.
pub fn e2c_nearest(src: &EquirectRaster, face_size: usize, fov_deg: f64) -> Result<CubemapFaceSet> {
    let rig = CubeRig::new(face_size, fov_deg)?;
    let src = src.as_raster();
    let faces = render_faces(&rig, src.channels(), |q, out| {
        let (x, y) = equirect_point(src, q);
        out.copy_from_slice(sample_nearest_wrap_x(src, x, y));
    })?;
    Ok(CubemapFaceSet { faces, rig })
}

/// Samples the cube set along world direction `q`, blending every face whose
/// frustum contains it. Returns `false` (leaving `out` untouched) when no
/// face sees `q`.
pub fn c2e_sample(src: &CubemapFaceSet, q: &Vector3<f64>, out: &mut [f64]) -> bool {
    let weights = src.rig.blend_weights(q);
    let mut it = weights.iter();
    let Some((first, _)) = it.next() else {
        return false;
    };
    sample_face(src, first, q, out);
    if weights.len() == 1 {
        return true;
    }
    // out = s0 + sum_{k>0} w_k (s_k - s0), exact when all samples agree
    let n = out.len();
    let mut stack = [0.0f64; 48];
    let mut heap;
    let buf: &mut [f64] = if 3 * n <= stack.len() {
        &mut stack[..3 * n]
    } else {
        heap = vec![0.0; 3 * n];
        &mut heap
    };
    let (base, rest) = buf.split_at_mut(n);
    let (sample, acc) = rest.split_at_mut(n);
    base.copy_from_slice(out);
    for (face, w) in it {
        sample_face(src, face, q, sample);
        for ((a, s), b) in acc.iter_mut().zip(sample.iter()).zip(base.iter()) {
            *a += w * (s - b);
        }
    }
    for ((o, b), a) in out.iter_mut().zip(base.iter()).zip(acc.iter()) {
        *o = b + a;
    }
    true
}

#[inline]
fn sample_face(src: &CubemapFaceSet, face: FaceId, q: &Vector3<f64>, out: &mut [f64]) {
    let c = face.rotation().transpose() * q;
    let p = src.rig.intrinsics.project(&c);
    sample_bilinear_clamped(&src.faces[face.index()], p.x, p.y, out);
}

/// Cube-to-equirect: each output pixel blends the bilinear samples of all
/// faces containing its direction (see [`CubeRig::blend_weights`]).
pub fn c2e(src: &CubemapFaceSet, out_width: usize, out_height: usize) -> Result<EquirectRaster> {
    if out_width != 2 * out_height {
        return Err(Error::invalid(format!(
            "output must be 2:1, got {out_width}x{out_height}"
        )));
    }
    let channels = src.channels();
    let mut out = Raster::zeros(out_width, out_height, channels)?;
    let uncovered: Vec<(usize, f64)> = out
        .rows_mut()
        .enumerate()
        .par_bridge()
        .map(|(y, row)| {
            let mut missed = 0usize;
            let mut solid = 0.0;
            for (x, px) in row.chunks_exact_mut(channels).enumerate() {
                let (theta, phi) = equirect_angles(x as f64 + 0.5, y as f64 + 0.5, out_width, out_height);
                let q = dir_from_equirect(theta, phi);
                if !c2e_sample(src, &q, px) {
                    missed += 1;
                    solid += phi.cos();
                }
            }
            (missed, solid)
        })
        .collect();
    let (pixels, cos_sum) = uncovered.iter().fold((0, 0.0), |(p, s), (mp, ms)| (p + mp, s + ms));
    if pixels > 0 {
        let cell = (2.0 * std::f64::consts::PI / out_width as f64) * (std::f64::consts::PI / out_height as f64);
        return Err(Error::Uncovered {
            pixels,
            solid_angle_sr: cos_sum * cell,
        });
    }
    EquirectRaster::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smooth(width: usize) -> EquirectRaster {
        let r = Raster::from_fn(width, width / 2, 2, |x, y, px| {
            let (t, p) = equirect_angles(x as f64 + 0.5, y as f64 + 0.5, width, width / 2);
            let q = dir_from_equirect(t, p);
            px[0] = 0.5 + 0.3 * q.x + 0.1 * q.y * q.z;
            px[1] = 0.4 - 0.2 * q.z;
        })
        .unwrap();
        EquirectRaster::new(r).unwrap()
    }

    #[test]
    fn constant_roundtrip_is_exact() {
        let v = 0.1 + 0.2 + 0.3;
        let pano = EquirectRaster::filled(64, 3, v).unwrap();
        for fov in [90.0, 95.0, 120.0] {
            let faces = e2c(&pano, 16, fov).unwrap();
            assert!(faces.faces().iter().all(|f| f.data().iter().all(|&x| x == v)));
            let back = c2e(&faces, 64, 32).unwrap();
            assert!(back.data().iter().all(|&x| x == v), "fov {fov}");
        }
    }

    #[test]
    fn channels_preserved() {
        let faces = e2c(&smooth(64), 8, 95.0).unwrap();
        assert_eq!(faces.channels(), 2);
        assert_eq!(c2e(&faces, 32, 16).unwrap().channels(), 2);
    }

    #[test]
    fn peak_lands_on_front_centre() {
        let mut pano = EquirectRaster::filled(128, 1, 0.0).unwrap();
        pano.set(64, 32, 0, 1.0);
        let faces = e2c(&pano, 64, 95.0).unwrap();
        let front = faces.face(FaceId::Front);
        let (mut best, mut at) = (f64::MIN, (0, 0));
        for y in 0..64 {
            for x in 0..64 {
                if front.get(x, y, 0) > best {
                    best = front.get(x, y, 0);
                    at = (x, y);
                }
            }
        }
        assert!(best > 0.0);
        // the white pixel's sample point sits half a pano pixel right/below the centre
        assert!((31..=33).contains(&at.0) && (30..=32).contains(&at.1), "{at:?}");
        for f in [FaceId::Back, FaceId::Up, FaceId::Down] {
            assert!(faces.face(f).data().iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn c2e_rejects_bad_aspect_and_uncovered() {
        let faces = CubemapFaceSet::filled(8, 1, 80.0, 1.0).unwrap();
        assert!(c2e(&faces, 30, 16).is_err());
        match c2e(&faces, 32, 16) {
            Err(Error::Uncovered { pixels, solid_angle_sr }) => {
                assert!(pixels > 0);
                assert!(solid_angle_sr > 0.0 && solid_angle_sr < 4.0 * std::f64::consts::PI);
            }
            other => panic!("expected Uncovered, got {other:?}"),
        }
    }

    #[test]
    fn single_face_paints_its_frustum_at_90() {
        let mut faces = CubemapFaceSet::filled(16, 1, 90.0, 0.0).unwrap();
        faces.face_mut(FaceId::Right).data_mut().fill(1.0);
        let pano = c2e(&faces, 128, 64).unwrap();
        for y in 0..64 {
            for x in 0..128 {
                let (t, p) = pano.angles_of_pixel(x, y);
                let q = dir_from_equirect(t, p);
                let inside = q.x > q.y.abs() && q.x > q.z.abs();
                let v = pano.get(x, y, 0);
                if inside {
                    assert_eq!(v, 1.0);
                } else {
                    assert_eq!(v, 0.0, "pixel {x},{y} outside right frustum");
                }
            }
        }
    }

    #[test]
    fn face_set_validation() {
        let good = Raster::zeros(8, 8, 1).unwrap();
        let bad = Raster::zeros(8, 6, 1).unwrap();
        assert!(CubemapFaceSet::new(vec![good.clone(); 5], 90.0).is_err());
        let mut v = vec![good.clone(); 6];
        v[3] = bad;
        assert!(CubemapFaceSet::new(v, 90.0).is_err());
        let mut v = vec![good; 6];
        v[2] = Raster::zeros(8, 8, 2).unwrap();
        assert!(CubemapFaceSet::new(v, 90.0).is_err());
    }
}
