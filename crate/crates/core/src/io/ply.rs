//! Binary little-endian splat PLY, the layout common Gaussian-splat viewers read.
//!
//! Colour is stored as the zeroth-order SH coefficient, opacity as a logit and
//! scale as a natural log.

use std::io::{BufRead, BufReader, Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::{Quaternion, Vector3};

use crate::error::{FormatError, Result};
use crate::scaffold::{Gaussian, GaussianScaffold};

pub const SH_C0: f64 = 0.28209479177387814;
/// Opacities are clamped into `[OPACITY_EPS, 1 - OPACITY_EPS]` before the logit.
pub const OPACITY_EPS: f64 = 1e-6;

const PROPERTIES: [&str; 14] = [
    "x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2",
    "rot_3",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PlyExport {
    pub bytes: u64,
    /// Gaussians whose opacity had to be pulled off 0 or 1.
    pub clamped_opacities: usize,
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn export_splat_ply<W: Write>(s: &GaussianScaffold, sink: W) -> Result<PlyExport> {
    let mut w = std::io::BufWriter::new(sink);
    let mut header = format!("ply\nformat binary_little_endian 1.0\nelement vertex {}\n", s.len());
    for p in PROPERTIES {
        header.push_str(&format!("property float {p}\n"));
    }
    header.push_str("end_header\n");
    w.write_all(header.as_bytes())?;
    let mut clamped = 0;
    for g in &s.gaussians {
        let op = g.opacity.clamp(OPACITY_EPS, 1.0 - OPACITY_EPS);
        if op != g.opacity {
            clamped += 1;
        }
        let q = &g.rotation;
        let rec = [
            g.center.x,
            g.center.y,
            g.center.z,
            (g.color.x - 0.5) / SH_C0,
            (g.color.y - 0.5) / SH_C0,
            (g.color.z - 0.5) / SH_C0,
            logit(op),
            g.scale.x.ln(),
            g.scale.y.ln(),
            g.scale.z.ln(),
            q.w,
            q.i,
            q.j,
            q.k,
        ];
        for v in rec {
            w.write_f32::<LittleEndian>(v as f32)?;
        }
    }
    w.flush()?;
    if clamped > 0 {
        log::warn!(
            "{clamped} opacities clamped to [{OPACITY_EPS}, {}] for the logit",
            1.0 - OPACITY_EPS
        );
    }
    Ok(PlyExport {
        bytes: header.len() as u64 + 56 * s.len() as u64,
        clamped_opacities: clamped,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn read<R: Read>(self, r: &mut R) -> std::io::Result<f64> {
        Ok(match self {
            Self::I8 => r.read_i8()? as f64,
            Self::U8 => r.read_u8()? as f64,
            Self::I16 => r.read_i16::<LittleEndian>()? as f64,
            Self::U16 => r.read_u16::<LittleEndian>()? as f64,
            Self::I32 => r.read_i32::<LittleEndian>()? as f64,
            Self::U32 => r.read_u32::<LittleEndian>()? as f64,
            Self::F32 => r.read_f32::<LittleEndian>()? as f64,
            Self::F64 => r.read_f64::<LittleEndian>()?,
        })
    }
}

// Trained splat files often carry unnormalised rotations.
fn unit_or_raw(q: Quaternion<f64>) -> Quaternion<f64> {
    let n = q.norm();
    if n > 0.0 && n.is_finite() && (n - 1.0).abs() > super::scaffold_file::QUAT_NORM_TOLERANCE {
        q / n
    } else {
        q
    }
}

fn header_err(msg: impl Into<String>) -> crate::error::Error {
    FormatError::Header(msg.into()).into()
}

/// Reads a binary little-endian splat PLY. Properties beyond the fourteen
/// used here (normals, higher SH bands) are skipped.
pub fn import_splat_ply<R: Read>(source: R) -> Result<GaussianScaffold> {
    let mut r = BufReader::new(source);
    let mut line = String::new();
    let next_line = |r: &mut BufReader<R>, line: &mut String| -> Result<()> {
        line.clear();
        if r.read_line(line)? == 0 {
            return Err(header_err("unexpected end of header"));
        }
        Ok(())
    };
    next_line(&mut r, &mut line)?;
    if line.trim_end() != "ply" {
        return Err(FormatError::BadMagic {
            expected: b"ply".to_vec(),
            found: line.trim_end().as_bytes().iter().take(8).copied().collect(),
        }
        .into());
    }
    let mut count: Option<u64> = None;
    let mut in_vertex = false;
    let mut props: Vec<(String, Scalar)> = Vec::new();
    loop {
        next_line(&mut r, &mut line)?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["end_header"] => break,
            ["format", fmt, _] => {
                if *fmt != "binary_little_endian" {
                    return Err(header_err(format!("unsupported PLY format {fmt}")));
                }
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, n] => {
                if count.is_some() {
                    return Err(header_err(format!("element {name} after vertex is not supported")));
                }
                in_vertex = *name == "vertex";
                if !in_vertex {
                    return Err(header_err(format!("element {name} before vertex is not supported")));
                }
                count = Some(n.parse().map_err(|_| header_err(format!("bad vertex count {n}")))?);
            }
            ["property", "list", ..] => return Err(header_err("list properties are not supported")),
            ["property", ty, name] if in_vertex => {
                let s = Scalar::parse(ty).ok_or_else(|| header_err(format!("unknown property type {ty}")))?;
                props.push((name.to_string(), s));
            }
            _ => return Err(header_err(format!("unexpected header line {:?}", line.trim_end()))),
        }
    }
    let count = count.ok_or_else(|| header_err("no vertex element"))?;
    let slot: Vec<Option<usize>> = props
        .iter()
        .map(|(n, _)| PROPERTIES.iter().position(|p| p == n))
        .collect();
    for p in PROPERTIES {
        if !props.iter().any(|(n, _)| n == p) {
            return Err(header_err(format!("missing property {p}")));
        }
    }
    let stride: u64 = props
        .iter()
        .map(|(_, s)| match s {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        })
        .sum();

    let mut gaussians = Vec::with_capacity(count.min(1 << 24) as usize);
    let mut v = [0f64; 14];
    for index in 0..count as usize {
        for ((_, ty), slot) in props.iter().zip(&slot) {
            let x = ty.read(&mut r).map_err(|e| {
                if e.kind() == std::io::ErrorKind::UnexpectedEof {
                    FormatError::Truncated {
                        expected: count * stride,
                        actual: index as u64 * stride,
                    }
                    .into()
                } else {
                    crate::error::Error::from(e)
                }
            })?;
            if let Some(i) = slot {
                v[*i] = x;
            }
        }
        let g = Gaussian {
            center: Vector3::new(v[0], v[1], v[2]),
            color: Vector3::new(v[3], v[4], v[5]).map(|f| (0.5 + SH_C0 * f).clamp(0.0, 1.0)),
            opacity: sigmoid(v[6]),
            scale: Vector3::new(v[7].exp(), v[8].exp(), v[9].exp()),
            rotation: unit_or_raw(Quaternion::new(v[10], v[11], v[12], v[13])),
        };
        g.check(super::scaffold_file::QUAT_NORM_TOLERANCE)
            .map_err(|reason| FormatError::InvalidGaussian { index, reason })?;
        gaussians.push(g);
    }
    Ok(GaussianScaffold::new(gaussians, None))
}
