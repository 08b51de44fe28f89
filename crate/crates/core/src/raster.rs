//! Dense multi-channel rasters and the sampling kernels used by every
//! resampling path in the crate.
//!
//! Pixel `(i, j)` covers the continuous square `[i, i+1) x [j, j+1)` and its
//! sample sits at `(i + 0.5, j + 0.5)`. All sampling functions take
//! continuous coordinates in that frame.

use std::ops::{Deref, DerefMut};

use crate::error::{Error, FormatError, Result};

/// Row-major interleaved raster of `f64` samples.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Raster {
    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        check_dims(width, height, channels)?;
        Ok(Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        })
    }

    pub fn zeros(width: usize, height: usize, channels: usize) -> Result<Self> {
        Self::filled(width, height, channels, 0.0)
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(width, height, channels)?;
        if data.len() != width * height * channels {
            return Err(Error::LengthMismatch {
                what: "raster data length vs width*height*channels",
                left: data.len(),
                right: width * height * channels,
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Builds a raster by evaluating `f(x, y, pixel)` for every pixel.
    pub fn from_fn<F>(width: usize, height: usize, channels: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize, &mut [f64]),
    {
        let mut r = Self::zeros(width, height, channels)?;
        for y in 0..height {
            for x in 0..width {
                f(x, y, r.pixel_mut(x, y));
            }
        }
        Ok(r)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f64] {
        let i = (y * self.width + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    /// Mutable rows, for parallel fills.
    pub fn rows_mut(&mut self) -> std::slice::ChunksExactMut<'_, f64> {
        let stride = self.width * self.channels;
        self.data.chunks_exact_mut(stride)
    }

    pub fn same_shape(&self, other: &Raster) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub fn flipped_vertical(&self) -> Raster {
        let stride = self.width * self.channels;
        let mut data = Vec::with_capacity(self.data.len());
        for row in self.data.chunks_exact(stride).rev() {
            data.extend_from_slice(row);
        }
        Raster { data, ..*self }
    }

    /// Copies channel `c` into a one-channel raster.
    pub fn channel(&self, c: usize) -> Raster {
        assert!(c < self.channels, "channel {c} out of range");
        let data = self.data.chunks_exact(self.channels).map(|px| px[c]).collect();
        Raster {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }

    /// Returns `a * self + b * other`, elementwise.
    pub fn axpby(&self, a: f64, other: &Raster, b: f64) -> Result<Raster> {
        if !self.same_shape(other) {
            return Err(Error::invalid("axpby on rasters of different shape"));
        }
        let data = self.data.iter().zip(&other.data).map(|(x, y)| a * x + b * y).collect();
        Ok(Raster { data, ..*self })
    }

    pub fn max_abs_diff(&self, other: &Raster) -> f64 {
        assert!(self.same_shape(other));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn check_dims(width: usize, height: usize, channels: usize) -> Result<()> {
    if width == 0 || height == 0 || channels == 0 {
        return Err(Error::invalid(format!(
            "raster dimensions must be positive, got {width}x{height}x{channels}"
        )));
    }
    Ok(())
}

/// Linear interpolation written so that `lerp(a, a, t) == a` exactly.
#[inline(always)]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

/// Splits a continuous coordinate into the lower sample index and fraction.
#[inline(always)]
fn split(coord: f64) -> (isize, f64) {
    let s = coord - 0.5;
    let i = s.floor();
    (i as isize, s - i)
}

#[inline(always)]
fn clamp_index(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

#[inline(always)]
fn wrap_index(i: isize, n: usize) -> usize {
    i.rem_euclid(n as isize) as usize
}

fn bilinear_with(r: &Raster, u: f64, v: f64, out: &mut [f64], xi: impl Fn(isize, usize) -> usize) {
    debug_assert_eq!(out.len(), r.channels);
    let (ix, tx) = split(u);
    let (iy, ty) = split(v);
    let x0 = xi(ix, r.width);
    let x1 = xi(ix + 1, r.width);
    let y0 = clamp_index(iy, r.height);
    let y1 = clamp_index(iy + 1, r.height);
    let p00 = r.pixel(x0, y0);
    let p10 = r.pixel(x1, y0);
    let p01 = r.pixel(x0, y1);
    let p11 = r.pixel(x1, y1);
    for c in 0..r.channels {
        let top = lerp(p00[c], p10[c], tx);
        let bottom = lerp(p01[c], p11[c], tx);
        out[c] = lerp(top, bottom, ty);
    }
}

/// Bilinear sample with clamp-to-edge addressing on both axes.
pub fn sample_bilinear_clamped(r: &Raster, u: f64, v: f64, out: &mut [f64]) {
    bilinear_with(r, u, v, out, clamp_index);
}

/// Bilinear sample that wraps horizontally (longitude) and clamps vertically.
pub fn sample_bilinear_wrap_x(r: &Raster, u: f64, v: f64, out: &mut [f64]) {
    bilinear_with(r, u, v, out, wrap_index);
}

/// Nearest-neighbour lookup: the pixel whose square contains `(u, v)`.
pub fn sample_nearest_wrap_x<'a>(r: &'a Raster, u: f64, v: f64) -> &'a [f64] {
    let x = wrap_index(u.floor() as isize, r.width);
    let y = clamp_index(v.floor() as isize, r.height);
    r.pixel(x, y)
}

/// A panorama raster in equirectangular layout.
///
/// Column coordinate `x` maps to longitude `theta = 2*pi*x/W - pi` (zero at
/// the horizontal centre, increasing to the right); row coordinate `y` maps
/// to latitude `phi = pi/2 - pi*y/H` (north pole at the top edge).
#[derive(Clone, Debug, PartialEq)]
pub struct EquirectRaster(Raster);

impl EquirectRaster {
    pub fn new(raster: Raster) -> Result<Self> {
        if raster.width != 2 * raster.height {
            return Err(FormatError::AspectRatio {
                width: raster.width,
                height: raster.height,
            }
            .into());
        }
        Ok(Self(raster))
    }

    pub fn filled(width: usize, channels: usize, value: f64) -> Result<Self> {
        if width % 2 != 0 {
            return Err(Error::invalid("equirect width must be even"));
        }
        Self::new(Raster::filled(width, width / 2, channels, value)?)
    }

    pub fn into_raster(self) -> Raster {
        self.0
    }

    pub fn as_raster(&self) -> &Raster {
        &self.0
    }

    /// Continuous pixel coordinates of a longitude/latitude pair.
    #[inline]
    pub fn coords_of(&self, theta: f64, phi: f64) -> (f64, f64) {
        equirect_coords(theta, phi, self.0.width, self.0.height)
    }

    /// Longitude/latitude of the sample at pixel `(x, y)`.
    #[inline]
    pub fn angles_of_pixel(&self, x: usize, y: usize) -> (f64, f64) {
        equirect_angles(x as f64 + 0.5, y as f64 + 0.5, self.0.width, self.0.height)
    }
}

impl Deref for EquirectRaster {
    type Target = Raster;
    fn deref(&self) -> &Raster {
        &self.0
    }
}

impl DerefMut for EquirectRaster {
    fn deref_mut(&mut self) -> &mut Raster {
        &mut self.0
    }
}

#[inline]
pub fn equirect_coords(theta: f64, phi: f64, width: usize, height: usize) -> (f64, f64) {
    use std::f64::consts::{FRAC_PI_2, PI, TAU};
    (
        (theta + PI) / TAU * width as f64,
        (FRAC_PI_2 - phi) / PI * height as f64,
    )
}

#[inline]
pub fn equirect_angles(x: f64, y: f64, width: usize, height: usize) -> (f64, f64) {
    use std::f64::consts::{FRAC_PI_2, PI, TAU};
    (x / width as f64 * TAU - PI, FRAC_PI_2 - y / height as f64 * PI)
}
