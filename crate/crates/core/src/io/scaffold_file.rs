//! Native `O2SC` scaffold stream.
//!
//! Layout, all little-endian:
//!
//! ```text
//! header  16 B   magic "O2SC" | version u16 | count u64 | flags u16
//! layout  opt.   face_size u32 | fov_deg f64 | n u8 | n face codes (u8)
//! payload 56 B per Gaussian: 14 x f32
//!                center xyz | quat wxyz | scale xyz | opacity | color rgb
//! ```
//!
//! Flag bit 0 marks the layout block. Values are stored as f32, so a scaffold
//! whose fields are already f32-representable reads back bit for bit.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::{Quaternion, Vector3};

use crate::error::{Error, FormatError, Result};
use crate::geometry::FaceId;
use crate::scaffold::{Gaussian, GaussianScaffold, SourceLayout};

pub const MAGIC: [u8; 4] = *b"O2SC";
pub const VERSION: u16 = 1;
pub const HEADER_BYTES: u64 = 16;
pub const RECORD_BYTES: u64 = 56;
pub const FLAG_LAYOUT: u16 = 1;

/// Allowed deviation of a stored quaternion's norm from 1; single precision
/// cannot hold a unit quaternion more tightly than this.
pub const QUAT_NORM_TOLERANCE: f64 = 1e-6;

fn layout_bytes(l: &SourceLayout) -> u64 {
    4 + 8 + 1 + l.faces.len() as u64
}

/// Total byte size `write_scaffold` produces for `s`.
pub fn encoded_len(s: &GaussianScaffold) -> u64 {
    HEADER_BYTES + s.source_layout.as_ref().map_or(0, layout_bytes) + RECORD_BYTES * s.len() as u64
}

fn validate(s: &GaussianScaffold) -> Result<()> {
    for (index, g) in s.gaussians.iter().enumerate() {
        g.check(QUAT_NORM_TOLERANCE)
            .map_err(|reason| FormatError::InvalidGaussian { index, reason })?;
    }
    if let Some(l) = &s.source_layout {
        if l.faces.len() > u8::MAX as usize || l.face_size > u32::MAX as usize {
            return Err(Error::invalid("source layout does not fit the native header"));
        }
    }
    Ok(())
}

/// Writes `s` and returns the number of bytes emitted.
pub fn write_scaffold<W: Write>(s: &GaussianScaffold, sink: W) -> Result<u64> {
    validate(s)?;
    let mut w = std::io::BufWriter::new(sink);
    w.write_all(&MAGIC)?;
    w.write_u16::<LittleEndian>(VERSION)?;
    w.write_u64::<LittleEndian>(s.len() as u64)?;
    w.write_u16::<LittleEndian>(if s.source_layout.is_some() { FLAG_LAYOUT } else { 0 })?;
    if let Some(l) = &s.source_layout {
        w.write_u32::<LittleEndian>(l.face_size as u32)?;
        w.write_f64::<LittleEndian>(l.fov_deg)?;
        w.write_u8(l.faces.len() as u8)?;
        for f in &l.faces {
            w.write_u8(f.index() as u8)?;
        }
    }
    for g in &s.gaussians {
        let q = &g.rotation;
        let rec = [
            g.center.x, g.center.y, g.center.z, q.w, q.i, q.j, q.k, g.scale.x, g.scale.y, g.scale.z, g.opacity,
            g.color.x, g.color.y, g.color.z,
        ];
        for v in rec {
            w.write_f32::<LittleEndian>(v as f32)?;
        }
    }
    w.flush()?;
    Ok(encoded_len(s))
}

/// Reads up to `buf.len()` bytes, returning how many arrived before EOF.
fn fill<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<usize> {
    let mut got = 0;
    while got < buf.len() {
        match r.read(&mut buf[got..]) {
            Ok(0) => break,
            Ok(n) => got += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(got)
}

fn read_exact_counted<R: Read>(r: &mut R, buf: &mut [u8], consumed: &mut u64, expected_total: u64) -> Result<()> {
    let got = fill(r, buf)?;
    *consumed += got as u64;
    if got < buf.len() {
        return Err(FormatError::Truncated {
            expected: expected_total,
            actual: *consumed,
        }
        .into());
    }
    Ok(())
}

pub fn read_scaffold<R: Read>(source: R) -> Result<GaussianScaffold> {
    let mut r = std::io::BufReader::new(source);
    let mut consumed = 0u64;
    let mut header = [0u8; HEADER_BYTES as usize];
    let got = fill(&mut r, &mut header)?;
    consumed += got as u64;
    if got < 4 || header[..4] != MAGIC {
        return Err(FormatError::BadMagic {
            expected: MAGIC.to_vec(),
            found: header[..got.min(4)].to_vec(),
        }
        .into());
    }
    if got < header.len() {
        return Err(FormatError::Truncated {
            expected: HEADER_BYTES,
            actual: consumed,
        }
        .into());
    }
    let mut h = &header[4..];
    let version = h.read_u16::<LittleEndian>()?;
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion(version).into());
    }
    let count = h.read_u64::<LittleEndian>()?;
    let flags = h.read_u16::<LittleEndian>()?;
    if flags & !FLAG_LAYOUT != 0 {
        return Err(FormatError::Header(format!("unknown flag bits {flags:#06x}")).into());
    }
    let payload = count
        .checked_mul(RECORD_BYTES)
        .ok_or_else(|| FormatError::Header(format!("gaussian count {count} overflows")))?;

    let source_layout = if flags & FLAG_LAYOUT != 0 {
        let mut fixed = [0u8; 13];
        read_exact_counted(&mut r, &mut fixed, &mut consumed, HEADER_BYTES + 13 + payload)?;
        let mut f = &fixed[..];
        let face_size = f.read_u32::<LittleEndian>()? as usize;
        let fov_deg = f.read_f64::<LittleEndian>()?;
        let n = f.read_u8()? as usize;
        let mut codes = vec![0u8; n];
        read_exact_counted(
            &mut r,
            &mut codes,
            &mut consumed,
            HEADER_BYTES + 13 + n as u64 + payload,
        )?;
        let faces = codes
            .iter()
            .map(|&c| {
                FaceId::from_index(c as usize).ok_or_else(|| FormatError::Header(format!("unknown face code {c}")))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Some(SourceLayout {
            face_size,
            fov_deg,
            faces,
        })
    } else {
        None
    };

    let expected_total = consumed + payload;
    let mut gaussians = Vec::with_capacity(count.min(1 << 24) as usize);
    let mut rec = [0u8; RECORD_BYTES as usize];
    for index in 0..count as usize {
        read_exact_counted(&mut r, &mut rec, &mut consumed, expected_total)?;
        let mut v = [0f64; 14];
        let mut cur = &rec[..];
        for slot in v.iter_mut() {
            *slot = cur.read_f32::<LittleEndian>()? as f64;
        }
        let g = Gaussian {
            center: Vector3::new(v[0], v[1], v[2]),
            rotation: Quaternion::new(v[3], v[4], v[5], v[6]),
            scale: Vector3::new(v[7], v[8], v[9]),
            opacity: v[10],
            color: Vector3::new(v[11], v[12], v[13]),
        };
        g.check(QUAT_NORM_TOLERANCE)
            .map_err(|reason| FormatError::InvalidGaussian { index, reason })?;
        gaussians.push(g);
    }
    let mut probe = [0u8; 4096];
    let extra = fill(&mut r, &mut probe)?;
    if extra > 0 {
        let mut total = extra as u64;
        loop {
            let n = fill(&mut r, &mut probe)?;
            if n == 0 {
                break;
            }
            total += n as u64;
        }
        return Err(FormatError::TrailingBytes { extra: total }.into());
    }
    Ok(GaussianScaffold {
        gaussians,
        source_layout,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(i: usize) -> Gaussian {
        let f = i as f32 as f64;
        Gaussian {
            center: Vector3::new(f, -0.5 * f, 0.25),
            rotation: Quaternion::identity(),
            scale: Vector3::new(0.5, 0.25, 0.125),
            opacity: 0.75,
            color: Vector3::new(0.5, 0.0, 1.0),
        }
    }

    #[test]
    fn sizes() {
        let mut buf = Vec::new();
        assert_eq!(write_scaffold(&GaussianScaffold::default(), &mut buf).unwrap(), 16);
        assert_eq!(buf.len(), 16);
        let one = GaussianScaffold::new(vec![g(1)], None);
        buf.clear();
        assert_eq!(write_scaffold(&one, &mut buf).unwrap(), 16 + 56);
        assert_eq!(buf.len(), 72);
        assert_eq!(&buf[..4], b"O2SC");
        assert_eq!(u64::from_le_bytes(buf[6..14].try_into().unwrap()), 1);
    }

    #[test]
    fn round_trip_with_layout() {
        let s = GaussianScaffold::new(
            (0..10).map(g).collect(),
            Some(SourceLayout {
                face_size: 2,
                fov_deg: 95.0,
                faces: FaceId::ALL.to_vec(),
            }),
        );
        let mut buf = Vec::new();
        let n = write_scaffold(&s, &mut buf).unwrap();
        assert_eq!(n as usize, buf.len());
        assert_eq!(read_scaffold(&buf[..]).unwrap(), s);
    }

    #[test]
    fn corruption_kinds() {
        let s = GaussianScaffold::new(vec![g(0), g(1)], None);
        let mut buf = Vec::new();
        write_scaffold(&s, &mut buf).unwrap();

        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(
            read_scaffold(&bad[..]),
            Err(Error::Format(FormatError::BadMagic { .. }))
        ));

        let cut = &buf[..buf.len() - 10];
        match read_scaffold(cut) {
            Err(Error::Format(FormatError::Truncated { expected, actual })) => {
                assert_eq!((expected, actual), (16 + 112, 16 + 112 - 10));
            }
            other => panic!("{other:?}"),
        }

        let mut v2 = buf.clone();
        v2[4] = 2;
        assert!(matches!(
            read_scaffold(&v2[..]),
            Err(Error::Format(FormatError::UnsupportedVersion(2)))
        ));

        let mut long = buf.clone();
        long.extend_from_slice(&[0; 3]);
        assert!(matches!(
            read_scaffold(&long[..]),
            Err(Error::Format(FormatError::TrailingBytes { extra: 3 }))
        ));

        // opacity of the second record
        let mut op = buf.clone();
        let at = 16 + 56 + 40;
        op[at..at + 4].copy_from_slice(&2.0f32.to_le_bytes());
        assert!(matches!(
            read_scaffold(&op[..]),
            Err(Error::Format(FormatError::InvalidGaussian { index: 1, .. }))
        ));

        let mut q = buf.clone();
        q[16 + 12..16 + 16].copy_from_slice(&0.5f32.to_le_bytes());
        assert!(matches!(
            read_scaffold(&q[..]),
            Err(Error::Format(FormatError::InvalidGaussian { index: 0, .. }))
        ));
    }

    #[test]
    fn writer_rejects_invalid() {
        let mut bad = g(0);
        bad.scale.x = 0.0;
        let s = GaussianScaffold::new(vec![bad], None);
        assert!(write_scaffold(&s, Vec::new()).is_err());
    }
}
