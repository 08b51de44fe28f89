//! Seeded synthetic panoramas with analytic depth.
//!
//! * room: the inside of a 4 m cube centred on the camera, walls at +-2 m;
//! * gradient: a band-limited colour field over directions at unit depth;
//! * sphere: the same colour field on a sphere of given radius.
//!
//! Colours are low-order sinusoids of a 3D position, so they are smooth across
//! wall corners and survive resampling well.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{dir_from_equirect, FaceId};
use crate::projection::CubemapFaceSet;
use crate::raster::{equirect_angles, EquirectRaster, Raster};

pub const ROOM_HALF_EXTENT: f64 = 2.0;

/// Three sinusoids over 3D points, one per colour channel.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothTexture {
    freq: [Vector3<f64>; 3],
    phase: [f64; 3],
    amplitude: f64,
}

impl SmoothTexture {
    /// `max_freq` bounds each angular frequency component, in radians per unit.
    pub fn random(seed: u64, max_freq: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = || {
            Vector3::new(
                rng.gen_range(-max_freq..max_freq),
                rng.gen_range(-max_freq..max_freq),
                rng.gen_range(-max_freq..max_freq),
            )
        };
        let freq = [f(), f(), f()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let phase = [0; 3].map(|_| rng.gen_range(0.0..std::f64::consts::TAU));
        Self {
            freq,
            phase,
            amplitude: 0.35,
        }
    }

    pub fn eval(&self, p: &Vector3<f64>, out: &mut [f64]) {
        for c in 0..3 {
            out[c] = 0.5 + self.amplitude * (self.freq[c].dot(p) + self.phase[c]).sin();
        }
    }
}

/// Distance from the room centre to the wall along unit direction `q`.
pub fn room_ray_distance(q: &Vector3<f64>) -> f64 {
    ROOM_HALF_EXTENT / q.abs().max()
}

/// A synthetic panorama together with its ray-distance depth.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthPano {
    pub color: EquirectRaster,
    pub depth: EquirectRaster,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scene {
    Room,
    Gradient,
    Sphere { radius: f64 },
}

impl Scene {
    fn depth(&self, q: &Vector3<f64>) -> f64 {
        match *self {
            Scene::Room => room_ray_distance(q),
            Scene::Gradient => 1.0,
            Scene::Sphere { radius } => radius,
        }
    }

    fn texture(&self, seed: u64) -> SmoothTexture {
        match self {
            Scene::Room => SmoothTexture::random(seed, 1.5),
            _ => SmoothTexture::random(seed, 2.5),
        }
    }

    fn validate(&self) -> Result<()> {
        if let Scene::Sphere { radius } = *self {
            if !(radius > 0.0 && radius.is_finite()) {
                return Err(Error::invalid(format!("sphere radius must be > 0, got {radius}")));
            }
        }
        Ok(())
    }
}

/// Renders `scene` into a `width` x `width/2` panorama.
pub fn synth_pano(scene: Scene, width: usize, seed: u64) -> Result<SynthPano> {
    scene.validate()?;
    if width < 2 || width % 2 != 0 {
        return Err(Error::invalid(format!(
            "panorama width must be even and >= 2, got {width}"
        )));
    }
    let h = width / 2;
    let tex = scene.texture(seed);
    let color = Raster::from_fn(width, h, 3, |x, y, px| {
        let (t, p) = equirect_angles(x as f64 + 0.5, y as f64 + 0.5, width, h);
        let q = dir_from_equirect(t, p);
        tex.eval(&(q * scene.depth(&q)), px);
    })?;
    let depth = Raster::from_fn(width, h, 1, |x, y, px| {
        let (t, p) = equirect_angles(x as f64 + 0.5, y as f64 + 0.5, width, h);
        px[0] = scene.depth(&dir_from_equirect(t, p));
    })?;
    Ok(SynthPano {
        color: EquirectRaster::new(color)?,
        depth: EquirectRaster::new(depth)?,
    })
}

/// Anchor faces of `scene` evaluated analytically per face pixel: colour and
/// z-depth along each face's optical axis.
pub fn synth_faces(
    scene: Scene,
    face_size: usize,
    fov_deg: f64,
    seed: u64,
) -> Result<(CubemapFaceSet, CubemapFaceSet)> {
    scene.validate()?;
    let mut rgb = CubemapFaceSet::filled(face_size, 3, fov_deg, 0.0)?;
    let mut depth = CubemapFaceSet::filled(face_size, 1, fov_deg, 0.0)?;
    let k = *rgb.intrinsics();
    let tex = scene.texture(seed);
    for face in FaceId::ALL {
        let r = face.rotation();
        let c = Raster::from_fn(face_size, face_size, 3, |x, y, px| {
            let ray = r * k.ray(x as f64 + 0.5, y as f64 + 0.5);
            let q = ray.normalize();
            tex.eval(&(q * scene.depth(&q)), px);
        })?;
        let d = Raster::from_fn(face_size, face_size, 1, |x, y, px| {
            let ray = k.ray(x as f64 + 0.5, y as f64 + 0.5);
            let world = r * ray;
            px[0] = match scene {
                // ray has unit camera z, so the wall hit parameter is the z-depth
                Scene::Room => ROOM_HALF_EXTENT / world.abs().max(),
                _ => scene.depth(&world.normalize()) / ray.norm(),
            };
        })?;
        *rgb.face_mut(face) = c;
        *depth.face_mut(face) = d;
    }
    Ok((rgb, depth))
}
