//! PNG colour rasters and PFM float rasters.
//!
//! Files are always written upright. Equirect rasters already keep the top
//! row first; perspective rasters keep camera `+y` (up) at high row indices
//! and are flipped on the way in and out.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{BigEndian, ByteOrder, LittleEndian};
use image::{DynamicImage, ImageBuffer, ImageFormat, Luma, Rgb};

use crate::error::{Error, FormatError, Result};
use crate::raster::{EquirectRaster, Raster};

/// How a raster's rows map onto the picture.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowOrder {
    /// Row 0 is the top of the picture (equirect panoramas).
    TopDown,
    /// Row 0 is the bottom of the picture (perspective faces and renders).
    BottomUp,
}

impl RowOrder {
    fn to_top_down(self, r: &Raster) -> std::borrow::Cow<'_, Raster> {
        match self {
            RowOrder::TopDown => std::borrow::Cow::Borrowed(r),
            RowOrder::BottomUp => std::borrow::Cow::Owned(r.flipped_vertical()),
        }
    }

    fn from_top_down(self, r: Raster) -> Raster {
        match self {
            RowOrder::TopDown => r,
            RowOrder::BottomUp => r.flipped_vertical(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BitDepth {
    #[default]
    Eight,
    Sixteen,
}

/// Decodes a PNG into RGB (or single-channel for greyscale) samples in [0, 1].
/// Any alpha channel is dropped.
pub fn decode_png(bytes: &[u8], order: RowOrder) -> Result<Raster> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let raster = match img {
        DynamicImage::ImageLuma8(_) | DynamicImage::ImageLumaA8(_) => {
            let g = img.to_luma8();
            Raster::from_vec(w, h, 1, g.into_raw().into_iter().map(|v| v as f64 / 255.0).collect())?
        }
        DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA16(_) => {
            let g = img.to_luma16();
            Raster::from_vec(w, h, 1, g.into_raw().into_iter().map(|v| v as f64 / 65535.0).collect())?
        }
        DynamicImage::ImageRgb16(_) | DynamicImage::ImageRgba16(_) => {
            let g = img.to_rgb16();
            Raster::from_vec(w, h, 3, g.into_raw().into_iter().map(|v| v as f64 / 65535.0).collect())?
        }
        _ => {
            let g = img.to_rgb8();
            Raster::from_vec(w, h, 3, g.into_raw().into_iter().map(|v| v as f64 / 255.0).collect())?
        }
    };
    Ok(order.from_top_down(raster))
}

pub fn read_png(path: &Path, order: RowOrder) -> Result<Raster> {
    decode_png(&std::fs::read(path)?, order)
}

fn quantize(v: f64, max: f64) -> f64 {
    (v.clamp(0.0, 1.0) * max).round()
}

/// Encodes a 1- or 3-channel raster; values are clamped to [0, 1].
pub fn encode_png(r: &Raster, order: RowOrder, depth: BitDepth) -> Result<Vec<u8>> {
    let r = order.to_top_down(r);
    let (w, h) = (r.width() as u32, r.height() as u32);
    let img = match (r.channels(), depth) {
        (1, BitDepth::Eight) => DynamicImage::ImageLuma8(
            ImageBuffer::<Luma<u8>, _>::from_raw(w, h, r.data().iter().map(|&v| quantize(v, 255.0) as u8).collect())
                .expect("buffer size matches"),
        ),
        (1, BitDepth::Sixteen) => DynamicImage::ImageLuma16(
            ImageBuffer::<Luma<u16>, _>::from_raw(
                w,
                h,
                r.data().iter().map(|&v| quantize(v, 65535.0) as u16).collect(),
            )
            .expect("buffer size matches"),
        ),
        (3, BitDepth::Eight) => DynamicImage::ImageRgb8(
            ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, r.data().iter().map(|&v| quantize(v, 255.0) as u8).collect())
                .expect("buffer size matches"),
        ),
        (3, BitDepth::Sixteen) => DynamicImage::ImageRgb16(
            ImageBuffer::<Rgb<u16>, _>::from_raw(w, h, r.data().iter().map(|&v| quantize(v, 65535.0) as u16).collect())
                .expect("buffer size matches"),
        ),
        (c, _) => return Err(Error::invalid(format!("PNG output needs 1 or 3 channels, got {c}"))),
    };
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

pub fn write_png(path: &Path, r: &Raster, order: RowOrder, depth: BitDepth) -> Result<()> {
    std::fs::write(path, encode_png(r, order, depth)?)?;
    Ok(())
}

/// Writes a 1-channel (`Pf`) or 3-channel (`PF`) little-endian PFM.
pub fn write_pfm_to<W: Write>(r: &Raster, order: RowOrder, sink: W) -> Result<()> {
    let magic = match r.channels() {
        1 => "Pf",
        3 => "PF",
        c => return Err(Error::invalid(format!("PFM needs 1 or 3 channels, got {c}"))),
    };
    let mut w = BufWriter::new(sink);
    write!(w, "{magic}\n{} {}\n-1.0\n", r.width(), r.height())?;
    let row_len = r.width() * r.channels();
    let mut buf = vec![0u8; 4 * row_len];
    // PFM stores the bottom row first
    let rows: Box<dyn Iterator<Item = &[f64]>> = match order {
        RowOrder::BottomUp => Box::new(r.data().chunks_exact(row_len)),
        RowOrder::TopDown => Box::new(r.data().chunks_exact(row_len).rev()),
    };
    for row in rows {
        for (i, &v) in row.iter().enumerate() {
            LittleEndian::write_f32(&mut buf[4 * i..4 * i + 4], v as f32);
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_pfm(path: &Path, r: &Raster, order: RowOrder) -> Result<()> {
    write_pfm_to(r, order, std::fs::File::create(path)?)
}

fn pfm_token<R: BufRead>(r: &mut R) -> Result<String> {
    let mut tok = Vec::new();
    loop {
        let mut b = [0u8; 1];
        if r.read(&mut b)? == 0 {
            break;
        }
        if b[0].is_ascii_whitespace() {
            if tok.is_empty() {
                continue;
            }
            break;
        }
        tok.push(b[0]);
        if tok.len() > 32 {
            return Err(FormatError::Header("PFM header token too long".into()).into());
        }
    }
    String::from_utf8(tok).map_err(|_| FormatError::Header("PFM header is not ASCII".into()).into())
}

pub fn read_pfm_from<R: Read>(source: R, order: RowOrder) -> Result<Raster> {
    let mut r = BufReader::new(source);
    let magic = pfm_token(&mut r)?;
    let channels = match magic.as_str() {
        "Pf" => 1,
        "PF" => 3,
        _ => {
            return Err(FormatError::BadMagic {
                expected: b"Pf".to_vec(),
                found: magic.into_bytes(),
            }
            .into())
        }
    };
    let parse = |s: String, what: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| FormatError::Header(format!("bad PFM {what} {s:?}")).into())
    };
    let w = parse(pfm_token(&mut r)?, "width")?;
    let h = parse(pfm_token(&mut r)?, "height")?;
    let scale = parse(pfm_token(&mut r)?, "scale")?;
    if !(w >= 1.0 && h >= 1.0 && w.fract() == 0.0 && h.fract() == 0.0) || scale == 0.0 || !scale.is_finite() {
        return Err(FormatError::Header(format!("bad PFM header {w} {h} {scale}")).into());
    }
    let (w, h) = (w as usize, h as usize);
    let row_len = w * channels;
    let expected = (4 * row_len * h) as u64;
    let mut bytes = Vec::with_capacity(expected as usize);
    r.take(expected + 1).read_to_end(&mut bytes)?;
    if (bytes.len() as u64) < expected {
        return Err(FormatError::Truncated {
            expected,
            actual: bytes.len() as u64,
        }
        .into());
    }
    if bytes.len() as u64 > expected {
        return Err(FormatError::TrailingBytes {
            extra: bytes.len() as u64 - expected,
        }
        .into());
    }
    let mut data = vec![0f64; row_len * h];
    for (row_idx, chunk) in bytes.chunks_exact(4 * row_len).enumerate() {
        let dst_row = match order {
            RowOrder::BottomUp => row_idx,
            RowOrder::TopDown => h - 1 - row_idx,
        };
        let dst = &mut data[dst_row * row_len..(dst_row + 1) * row_len];
        for (i, v) in dst.iter_mut().enumerate() {
            let b = &chunk[4 * i..4 * i + 4];
            *v = if scale < 0.0 {
                LittleEndian::read_f32(b)
            } else {
                BigEndian::read_f32(b)
            } as f64;
        }
    }
    Raster::from_vec(w, h, channels, data)
}

pub fn read_pfm(path: &Path, order: RowOrder) -> Result<Raster> {
    read_pfm_from(std::fs::File::open(path)?, order)
}

fn check_equirect(r: Raster) -> Result<EquirectRaster> {
    if r.width() != 2 * r.height() {
        return Err(FormatError::AspectRatio {
            width: r.width(),
            height: r.height(),
        }
        .into());
    }
    EquirectRaster::new(r)
}

/// Loads a 2:1 colour panorama.
pub fn read_equirect_png(path: &Path) -> Result<EquirectRaster> {
    check_equirect(read_png(path, RowOrder::TopDown)?)
}

/// Loads a 2:1 depth panorama.
pub fn read_equirect_pfm(path: &Path) -> Result<EquirectRaster> {
    check_equirect(read_pfm(path, RowOrder::TopDown)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize, c: usize) -> Raster {
        Raster::from_fn(w, h, c, |x, y, p| {
            for (k, v) in p.iter_mut().enumerate() {
                *v = ((x * 7 + y * 13 + k * 29) % 256) as f64 / 255.0;
            }
        })
        .unwrap()
    }

    #[test]
    fn png_round_trip_is_exact_on_grid_values() {
        for c in [1, 3] {
            for order in [RowOrder::TopDown, RowOrder::BottomUp] {
                let r = ramp(9, 5, c);
                let back = decode_png(&encode_png(&r, order, BitDepth::Eight).unwrap(), order).unwrap();
                assert_eq!(back, r);
                let back16 = decode_png(&encode_png(&r, order, BitDepth::Sixteen).unwrap(), order).unwrap();
                assert!(back16.max_abs_diff(&r) < 1e-15);
            }
        }
    }

    #[test]
    fn bottom_up_png_is_flipped_on_disk() {
        let mut r = Raster::zeros(2, 2, 1).unwrap();
        r.set(0, 1, 0, 1.0);
        let top = decode_png(
            &encode_png(&r, RowOrder::BottomUp, BitDepth::Eight).unwrap(),
            RowOrder::TopDown,
        )
        .unwrap();
        assert_eq!(top.get(0, 0, 0), 1.0);
    }

    #[test]
    fn pfm_round_trip_and_layout() {
        let r = Raster::from_fn(3, 2, 1, |x, y, p| p[0] = (x + 10 * y) as f64 + 0.25).unwrap();
        let mut buf = Vec::new();
        write_pfm_to(&r, RowOrder::TopDown, &mut buf).unwrap();
        assert!(buf.starts_with(b"Pf\n3 2\n-1.0\n"));
        let body = &buf[12..];
        // bottom row (y = 1) first
        assert_eq!(f32::from_le_bytes(body[..4].try_into().unwrap()), 10.25);
        assert_eq!(read_pfm_from(&buf[..], RowOrder::TopDown).unwrap(), r);
        let mut buf2 = Vec::new();
        write_pfm_to(&r, RowOrder::BottomUp, &mut buf2).unwrap();
        assert_eq!(read_pfm_from(&buf2[..], RowOrder::BottomUp).unwrap(), r);
    }

    #[test]
    fn pfm_errors() {
        assert!(read_pfm_from(&b"P6\n1 1\n-1.0\n"[..], RowOrder::TopDown).is_err());
        let short = b"Pf\n2 2\n-1.0\n\0\0\0\0";
        assert!(matches!(
            read_pfm_from(&short[..], RowOrder::TopDown),
            Err(Error::Format(FormatError::Truncated {
                expected: 16,
                actual: 4
            }))
        ));
    }

    #[test]
    fn equirect_aspect_enforced() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.png");
        write_png(&p, &ramp(10, 4, 3), RowOrder::TopDown, BitDepth::Eight).unwrap();
        let e = read_equirect_png(&p).unwrap_err();
        assert!(e.to_string().contains("aspect must be 2:1"));
        let q = dir.path().join("ok.pfm");
        write_pfm(&q, &ramp(8, 4, 1), RowOrder::TopDown).unwrap();
        assert_eq!(read_equirect_pfm(&q).unwrap().width(), 8);
    }
}
