//! Bidirectional cross-face fusion.
//!
//! Per-face rasters are gathered into an equirect latent (C2E), filtered
//! there by a fixed kernel, scattered back to the faces (E2C) and added as a
//! residual:
//!
//! ```text
//! latent = H(C2E(faces))
//! fused_i = faces_i + E2C(latent)_i
//! ```
//!
//! The filter runs periodically in longitude and with replicated edges in
//! latitude. Every stage is linear, so the whole map is linear in the faces.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{edge_direction, FaceId};
use crate::projection::{c2e, e2c, CubemapFaceSet};
use crate::raster::{sample_bilinear_clamped, EquirectRaster, Raster};

/// A 2D correlation kernel with odd side lengths.
#[derive(Clone, Debug, PartialEq)]
pub struct FusionKernel {
    rows: usize,
    cols: usize,
    taps: Vec<f64>,
    averaging: bool,
}

impl FusionKernel {
    /// General kernel, taps row-major.
    pub fn new(rows: usize, cols: usize, taps: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || rows % 2 == 0 || cols % 2 == 0 {
            return Err(Error::invalid(format!(
                "kernel side lengths must be odd and >= 1, got {rows}x{cols}"
            )));
        }
        if taps.len() != rows * cols {
            return Err(Error::LengthMismatch {
                what: "kernel taps vs rows*cols",
                left: taps.len(),
                right: rows * cols,
            });
        }
        if !taps.iter().all(|t| t.is_finite()) {
            return Err(Error::invalid("kernel taps must be finite"));
        }
        Ok(Self {
            rows,
            cols,
            taps,
            averaging: false,
        })
    }

    /// Averaging kernel: taps non-negative with unit DC gain (within 1e-12).
    pub fn averaging(rows: usize, cols: usize, taps: Vec<f64>) -> Result<Self> {
        let mut k = Self::new(rows, cols, taps)?;
        if k.taps.iter().any(|&t| t < 0.0) {
            return Err(Error::invalid("averaging kernel has negative taps"));
        }
        let gain = k.dc_gain();
        if (gain - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "averaging kernel has dc gain {gain}, expected 1"
            )));
        }
        k.averaging = true;
        Ok(k)
    }

    pub fn zero() -> Self {
        Self::new(1, 1, vec![0.0]).unwrap()
    }

    pub fn identity() -> Self {
        Self::averaging(1, 1, vec![1.0]).unwrap()
    }

    /// Normalised isotropic Gaussian, `size` x `size`.
    pub fn gaussian(size: usize, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("gaussian sigma must be > 0, got {sigma}")));
        }
        if size % 2 == 0 {
            return Err(Error::invalid(format!("gaussian size must be odd, got {size}")));
        }
        let r = (size / 2) as f64;
        let mut taps = Vec::with_capacity(size * size);
        for y in 0..size {
            for x in 0..size {
                let (dx, dy) = (x as f64 - r, y as f64 - r);
                taps.push((-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp());
            }
        }
        let sum: f64 = taps.iter().sum();
        taps.iter_mut().for_each(|t| *t /= sum);
        Self::averaging(size, size, taps)
    }

    pub fn box_filter(size: usize) -> Result<Self> {
        let n = size * size;
        Self::averaging(size, size, vec![1.0 / n as f64; n])
    }

    /// Parses `zero`, `identity`, `gaussian<N>` (sigma 1) or `box<N>`.
    pub fn from_name(name: &str) -> Result<Self> {
        let size_of = |rest: &str| {
            rest.parse::<usize>()
                .map_err(|_| Error::invalid(format!("bad kernel size in {name:?}")))
        };
        match name {
            "zero" => Ok(Self::zero()),
            "identity" => Ok(Self::identity()),
            _ if name.starts_with("gaussian") => Self::gaussian(size_of(&name[8..])?, 1.0),
            _ if name.starts_with("box") => Self::box_filter(size_of(&name[3..])?),
            _ => Err(Error::invalid(format!(
                "unknown kernel {name:?} (expected zero, identity, gaussian<N>, box<N>)"
            ))),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn is_averaging(&self) -> bool {
        self.averaging
    }

    pub fn dc_gain(&self) -> f64 {
        self.taps.iter().sum()
    }
}

impl Default for FusionKernel {
    /// 5x5 normalised Gaussian with sigma 1.
    fn default() -> Self {
        Self::gaussian(5, 1.0).unwrap()
    }
}

/// Equirect latent resolution used when none is given: `(4 s, 2 s)`.
pub fn default_latent_size(face_size: usize) -> (usize, usize) {
    (4 * face_size, 2 * face_size)
}

/// Correlates `src` with `kernel`, wrapping columns and clamping rows.
pub fn filter_equirect(src: &EquirectRaster, kernel: &FusionKernel) -> EquirectRaster {
    let (w, h, ch) = (src.width(), src.height(), src.channels());
    let (ry, rx) = ((kernel.rows / 2) as isize, (kernel.cols / 2) as isize);
    let mut out = src.as_raster().clone();
    out.rows_mut().enumerate().par_bridge().for_each(|(y, row)| {
        row.fill(0.0);
        for ky in 0..kernel.rows {
            let sy = (y as isize + ky as isize - ry).clamp(0, h as isize - 1) as usize;
            for kx in 0..kernel.cols {
                let tap = kernel.taps[ky * kernel.cols + kx];
                if tap == 0.0 {
                    continue;
                }
                let dx = kx as isize - rx;
                for x in 0..w {
                    let sx = (x as isize + dx).rem_euclid(w as isize) as usize;
                    let s = src.pixel(sx, sy);
                    let o = &mut row[x * ch..(x + 1) * ch];
                    for c in 0..ch {
                        o[c] += tap * s[c];
                    }
                }
            }
        }
    });
    EquirectRaster::new(out).expect("shape preserved")
}

/// Intermediate products of one fusion pass.
#[derive(Clone, Debug)]
pub struct FusionOutput {
    /// `faces + residual`.
    pub fused: CubemapFaceSet,
    /// Filtered equirect latent `H(C2E(faces))`.
    pub latent: EquirectRaster,
    /// `E2C(latent)`, the term added to each face.
    pub residual: CubemapFaceSet,
}

/// `fused_i = faces_i + E2C(H(C2E(faces)))_i`. The output shares the
/// geometry of `faces`.
pub fn bidirectional_fuse(
    faces: &CubemapFaceSet,
    kernel: &FusionKernel,
    equirect_size: (usize, usize),
) -> Result<CubemapFaceSet> {
    Ok(bidirectional_fuse_detailed(faces, kernel, equirect_size)?.fused)
}

pub fn bidirectional_fuse_detailed(
    faces: &CubemapFaceSet,
    kernel: &FusionKernel,
    (width, height): (usize, usize),
) -> Result<FusionOutput> {
    if width != 2 * height {
        return Err(Error::invalid(format!(
            "equirect latent must be 2:1, got {width}x{height}"
        )));
    }
    let gathered = c2e(faces, width, height)?;
    let latent = filter_equirect(&gathered, kernel);
    let residual = e2c(&latent, faces.face_size(), faces.fov_deg())?;
    let fused = faces.zip_map(&residual, |f, r| {
        let mut out = f.clone();
        for (o, &d) in out.data_mut().iter_mut().zip(r.data()) {
            // a zero residual leaves the input bit pattern (including -0.0) alone
            if d != 0.0 {
                *o += d;
            }
        }
        Ok(out)
    })?;
    Ok(FusionOutput {
        fused,
        latent,
        residual,
    })
}

/// Cross-face agreement of a face-space signal over the overlap bands.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OverlapAgreement {
    pub samples: usize,
    pub max_abs_diff: f64,
    pub mean_abs_diff: f64,
}

/// Bilinearly samples `set` on both faces of every cube edge at directions
/// seen by both faces and compares the values. Directions within half a pixel
/// of either image border are skipped, since clamped sampling there is not
/// interpolation. `steps` controls the density along each edge and across the
/// band.
pub fn overlap_agreement(set: &CubemapFaceSet, steps: usize) -> OverlapAgreement {
    let rig = set.rig();
    let overlap = (set.fov_deg() / 2.0 - 45.0).to_radians();
    let ch = set.channels();
    let size = set.face_size() as f64;
    let (mut a, mut b) = (vec![0.0; ch], vec![0.0; ch]);
    let (mut n, mut max, mut sum) = (0usize, 0.0f64, 0.0f64);
    for (fa, fb) in cube_edges() {
        for i in 0..=steps {
            let s = -1.0 + 2.0 * i as f64 / steps as f64;
            for j in 0..=steps {
                // angle measured from the 90-degree seam, in the a-b plane
                let beta = if overlap > 0.0 {
                    -overlap + 2.0 * overlap * j as f64 / steps as f64
                } else {
                    0.0
                };
                let q = edge_direction(fa, fb, beta, s);
                if rig.frustum_margin(fa, &q) < 0.0 || rig.frustum_margin(fb, &q) < 0.0 {
                    continue;
                }
                let pa = rig.project(fa, &q).expect("inside frustum");
                let pb = rig.project(fb, &q).expect("inside frustum");
                if !(interpolable(&pa, size) && interpolable(&pb, size)) {
                    continue;
                }
                sample_bilinear_clamped(set.face(fa), pa.x, pa.y, &mut a);
                sample_bilinear_clamped(set.face(fb), pb.x, pb.y, &mut b);
                for c in 0..ch {
                    let d = (a[c] - b[c]).abs();
                    max = max.max(d);
                    sum += d;
                    n += 1;
                }
            }
        }
    }
    OverlapAgreement {
        samples: n,
        max_abs_diff: max,
        mean_abs_diff: if n > 0 { sum / n as f64 } else { 0.0 },
    }
}

/// The twelve pairs of adjacent faces.
// inside the hull of pixel centres, where bilinear sampling never clamps
fn interpolable(p: &nalgebra::Vector2<f64>, size: f64) -> bool {
    p.x >= 0.5 && p.x <= size - 0.5 && p.y >= 0.5 && p.y <= size - 0.5
}

pub fn cube_edges() -> Vec<(FaceId, FaceId)> {
    let mut edges = Vec::with_capacity(12);
    for (i, &a) in FaceId::ALL.iter().enumerate() {
        for &b in &FaceId::ALL[i + 1..] {
            if a.axis().dot(&b.axis()) == 0.0 {
                edges.push((a, b));
            }
        }
    }
    edges
}

/// Stacks a linear combination of two face sets: `a * x + b * y`.
pub fn combine(x: &CubemapFaceSet, a: f64, y: &CubemapFaceSet, b: f64) -> Result<CubemapFaceSet> {
    x.zip_map(y, |p, q| p.axpby(a, q, b))
}

/// Largest elementwise difference between two face sets of equal shape.
pub fn max_abs_diff(x: &CubemapFaceSet, y: &CubemapFaceSet) -> f64 {
    x.faces()
        .iter()
        .zip(y.faces())
        .map(|(p, q): (&Raster, &Raster)| p.max_abs_diff(q))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_faces(size: usize, ch: usize, fov: f64, seed: u64) -> CubemapFaceSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let faces = (0..6)
            .map(|_| {
                Raster::from_fn(size, size, ch, |_, _, px| {
                    px.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0))
                })
                .unwrap()
            })
            .collect();
        CubemapFaceSet::new(faces, fov).unwrap()
    }

    #[test]
    fn zero_kernel_is_bitwise_identity() {
        let mut faces = random_faces(8, 3, 95.0, 1);
        faces.face_mut(FaceId::Up).set(0, 0, 0, -0.0);
        let out = bidirectional_fuse(&faces, &FusionKernel::zero(), (32, 16)).unwrap();
        for (a, b) in faces.faces().iter().zip(out.faces()) {
            for (x, y) in a.data().iter().zip(b.data()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn identity_kernel_doubles_constants() {
        let faces = CubemapFaceSet::filled(8, 2, 95.0, 0.3).unwrap();
        let out = bidirectional_fuse(&faces, &FusionKernel::identity(), (32, 16)).unwrap();
        assert!(out.faces().iter().all(|f| f.data().iter().all(|&v| v == 0.6)));
        assert!(out.same_geometry(&faces));
    }

    #[test]
    fn detail_is_preserved_by_residual() {
        let faces = random_faces(8, 1, 95.0, 2);
        let o = bidirectional_fuse_detailed(&faces, &FusionKernel::default(), (32, 16)).unwrap();
        let back = combine(&o.fused, 1.0, &o.residual, -1.0).unwrap();
        assert!(max_abs_diff(&back, &faces) < 1e-9);
    }

    #[test]
    fn kernel_validation() {
        assert!(FusionKernel::new(2, 1, vec![0.0, 0.0]).is_err());
        assert!(FusionKernel::new(3, 3, vec![0.0; 8]).is_err());
        assert!(FusionKernel::averaging(1, 3, vec![0.5, 0.6, -0.1]).is_err());
        assert!(FusionKernel::averaging(1, 3, vec![0.5, 0.6, 0.1]).is_err());
        let g = FusionKernel::default();
        assert!(g.is_averaging());
        assert!((g.dc_gain() - 1.0).abs() < 1e-12);
        assert_eq!(FusionKernel::from_name("gaussian5").unwrap(), g);
        assert_eq!(FusionKernel::from_name("box3").unwrap().taps().len(), 9);
        assert!(FusionKernel::from_name("sobel").is_err());
        assert!(FusionKernel::from_name("gaussian4").is_err());
    }

    #[test]
    fn latent_must_be_2_to_1() {
        let faces = CubemapFaceSet::filled(8, 1, 95.0, 0.0).unwrap();
        assert!(bidirectional_fuse(&faces, &FusionKernel::identity(), (30, 16)).is_err());
    }

    #[test]
    fn filter_wraps_longitude() {
        let mut r = EquirectRaster::filled(8, 1, 0.0).unwrap();
        r.set(0, 2, 0, 1.0);
        let k = FusionKernel::new(1, 3, vec![1.0, 0.0, 0.0]).unwrap();
        // correlation: out[x] = in[x-1]
        let out = filter_equirect(&r, &k);
        assert_eq!(out.get(1, 2, 0), 1.0);
        let k = FusionKernel::new(1, 3, vec![0.0, 0.0, 1.0]).unwrap();
        let out = filter_equirect(&r, &k);
        assert_eq!(out.get(7, 2, 0), 1.0);
        // replicate in latitude: the top row sees itself above
        let mut r = EquirectRaster::filled(8, 1, 0.0).unwrap();
        r.set(3, 0, 0, 1.0);
        let k = FusionKernel::new(3, 1, vec![1.0, 0.0, 0.0]).unwrap();
        let out = filter_equirect(&r, &k);
        assert_eq!(out.get(3, 0, 0), 1.0);
        assert_eq!(out.get(3, 1, 0), 1.0);
    }

    #[test]
    fn twelve_edges() {
        let e = cube_edges();
        assert_eq!(e.len(), 12);
        for f in FaceId::ALL {
            assert_eq!(e.iter().filter(|(a, b)| *a == f || *b == f).count(), 4);
        }
    }
}
