//! Tile-based software splatting of a [`GaussianScaffold`].
//!
//! Splats are projected with the local affine (EWA) approximation, sorted once
//! front to back by camera z, binned into square tiles and composited per
//! pixel. Output rasters use the camera image convention (row index grows
//! with camera `+y`).

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Vector2, Vector3};
use rayon::prelude::*;

use crate::camera::{CameraIntrinsics, CameraPose};
use crate::error::{Error, Result};
use crate::raster::Raster;
use crate::scaffold::{Gaussian, GaussianScaffold};

/// Splats with camera z at or below this are dropped.
pub const NEAR_CLIP: f64 = 0.05;
/// Screen-space low-pass added to every projected covariance, in px².
pub const BLUR: f64 = 0.3;
pub const MAX_ALPHA: f64 = 0.99;
/// A pixel stops accepting splats once its transmittance falls below this.
pub const MIN_TRANSMITTANCE: f64 = 1e-4;
/// Splat extent in standard deviations.
pub const EXTENT_SIGMA: f64 = 3.0;
pub const TILE: usize = 16;

/// A Gaussian in screen space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectedGaussian {
    pub mean: Vector2<f64>,
    pub cov: Matrix2<f64>,
    /// Camera-space depth of the centre.
    pub z: f64,
}

/// Perspective Jacobian of `(f x/z + cx, f y/z + cy)` at camera point `p`.
pub fn projection_jacobian(p: &Vector3<f64>, focal: f64) -> Matrix2x3<f64> {
    let iz = 1.0 / p.z;
    Matrix2x3::new(
        focal * iz,
        0.0,
        -focal * p.x * iz * iz,
        0.0,
        focal * iz,
        -focal * p.y * iz * iz,
    )
}

pub fn project_gaussian(g: &Gaussian, pose: &CameraPose, k: &CameraIntrinsics) -> Option<ProjectedGaussian> {
    project_with_cov(&g.center, &g.covariance(), pose, k)
}

fn project_with_cov(
    center: &Vector3<f64>,
    cov3: &Matrix3<f64>,
    pose: &CameraPose,
    k: &CameraIntrinsics,
) -> Option<ProjectedGaussian> {
    let p = pose.to_camera(center);
    if !(p.z > NEAR_CLIP) {
        return None;
    }
    let t = projection_jacobian(&p, k.focal) * pose.rotation;
    let cov = t * cov3 * t.transpose() + Matrix2::identity() * BLUR;
    Some(ProjectedGaussian {
        mean: k.project(&p),
        cov,
        z: p.z,
    })
}

/// Colour (premultiplied), coverage and expected depth of one view.
#[derive(Clone, Debug, PartialEq)]
pub struct RenderedView {
    pub color: Raster,
    pub alpha: Raster,
    /// Alpha-weighted mean depth; 0 where nothing was hit.
    pub depth: Raster,
}

impl RenderedView {
    pub fn width(&self) -> usize {
        self.alpha.width()
    }

    pub fn height(&self) -> usize {
        self.alpha.height()
    }
}

#[derive(Clone, Copy)]
struct Splat {
    mean: Vector2<f64>,
    // inverse covariance (a, b, c) of [[a, b], [b, c]]
    conic: (f64, f64, f64),
    z: f64,
    opacity: f64,
    color: [f64; 3],
    // pixel bounds, inclusive min, exclusive max
    x0: usize,
    x1: usize,
    y0: usize,
    y1: usize,
}

fn make_splat(g: &Gaussian, pose: &CameraPose, k: &CameraIntrinsics, w: usize, h: usize) -> Option<Splat> {
    let pg = project_gaussian(g, pose, k)?;
    let (a, b, c) = (pg.cov[(0, 0)], pg.cov[(0, 1)], pg.cov[(1, 1)]);
    let det = a * c - b * b;
    if !(det > 0.0) || !pg.mean.iter().all(|v| v.is_finite()) {
        return None;
    }
    let rx = EXTENT_SIGMA * a.sqrt();
    let ry = EXTENT_SIGMA * c.sqrt();
    // pixel i covers centre i + 0.5; keep centres inside [mean - r, mean + r]
    let lo = |m: f64, r: f64| (m - r - 0.5).ceil().max(0.0);
    let hi = |m: f64, r: f64, n: usize| ((m + r - 0.5).floor() + 1.0).min(n as f64);
    let (x0, x1) = (lo(pg.mean.x, rx), hi(pg.mean.x, rx, w));
    let (y0, y1) = (lo(pg.mean.y, ry), hi(pg.mean.y, ry, h));
    if !(x0 < x1 && y0 < y1) {
        return None;
    }
    Some(Splat {
        mean: pg.mean,
        conic: (c / det, -b / det, a / det),
        z: pg.z,
        opacity: g.opacity,
        color: [g.color.x, g.color.y, g.color.z],
        x0: x0 as usize,
        x1: x1 as usize,
        y0: y0 as usize,
        y1: y1 as usize,
    })
}

struct TileOut {
    tx: usize,
    ty: usize,
    color: Vec<[f64; 3]>,
    alpha: Vec<f64>,
    depth: Vec<f64>,
}

/// Renders `scaffold` from `pose` into a `width` x `height` image.
pub fn render(
    scaffold: &GaussianScaffold,
    pose: &CameraPose,
    k: &CameraIntrinsics,
    width: usize,
    height: usize,
) -> Result<RenderedView> {
    if width == 0 || height == 0 {
        return Err(Error::invalid(format!(
            "render size must be positive, got {width}x{height}"
        )));
    }
    k.validate()?;

    let mut splats: Vec<(usize, Splat)> = scaffold
        .gaussians
        .par_iter()
        .enumerate()
        .filter_map(|(i, g)| make_splat(g, pose, k, width, height).map(|s| (i, s)))
        .collect();
    splats.sort_by(|a, b| a.1.z.total_cmp(&b.1.z).then(a.0.cmp(&b.0)));

    let tiles_x = width.div_ceil(TILE);
    let tiles_y = height.div_ceil(TILE);
    let mut counts = vec![0usize; tiles_x * tiles_y + 1];
    for (_, s) in &splats {
        for ty in s.y0 / TILE..=(s.y1 - 1) / TILE {
            for tx in s.x0 / TILE..=(s.x1 - 1) / TILE {
                counts[ty * tiles_x + tx + 1] += 1;
            }
        }
    }
    for i in 1..counts.len() {
        counts[i] += counts[i - 1];
    }
    let mut cursor = counts.clone();
    let mut bins = vec![0u32; counts[tiles_x * tiles_y]];
    for (j, (_, s)) in splats.iter().enumerate() {
        for ty in s.y0 / TILE..=(s.y1 - 1) / TILE {
            for tx in s.x0 / TILE..=(s.x1 - 1) / TILE {
                let t = ty * tiles_x + tx;
                bins[cursor[t]] = j as u32;
                cursor[t] += 1;
            }
        }
    }

    let tiles: Vec<TileOut> = (0..tiles_x * tiles_y)
        .into_par_iter()
        .map(|t| {
            let list = &bins[counts[t]..counts[t + 1]];
            composite_tile(t % tiles_x, t / tiles_x, list, &splats, width, height)
        })
        .collect();

    let mut color = Raster::zeros(width, height, 3)?;
    let mut alpha = Raster::zeros(width, height, 1)?;
    let mut depth = Raster::zeros(width, height, 1)?;
    for tile in tiles {
        let (bx, by) = (tile.tx * TILE, tile.ty * TILE);
        let tw = TILE.min(width - bx);
        for (i, ((c, &a), &d)) in tile.color.iter().zip(&tile.alpha).zip(&tile.depth).enumerate() {
            let (x, y) = (bx + i % tw, by + i / tw);
            color.pixel_mut(x, y).copy_from_slice(c);
            alpha.set(x, y, 0, a);
            depth.set(x, y, 0, d);
        }
    }
    Ok(RenderedView { color, alpha, depth })
}

fn composite_tile(
    tx: usize,
    ty: usize,
    list: &[u32],
    splats: &[(usize, Splat)],
    width: usize,
    height: usize,
) -> TileOut {
    let (bx, by) = (tx * TILE, ty * TILE);
    let tw = TILE.min(width - bx);
    let th = TILE.min(height - by);
    let mut out = TileOut {
        tx,
        ty,
        color: vec![[0.0; 3]; tw * th],
        alpha: vec![0.0; tw * th],
        depth: vec![0.0; tw * th],
    };
    let mut trans = vec![1.0f64; tw * th];
    let mut zsum = vec![0.0f64; tw * th];
    let mut live = tw * th;
    for &j in list {
        if live == 0 {
            break;
        }
        let s = &splats[j as usize].1;
        let (a, b, c) = s.conic;
        for y in s.y0.max(by)..s.y1.min(by + th) {
            let dy = y as f64 + 0.5 - s.mean.y;
            for x in s.x0.max(bx)..s.x1.min(bx + tw) {
                let p = (y - by) * tw + (x - bx);
                let t = trans[p];
                if t < MIN_TRANSMITTANCE {
                    continue;
                }
                let dx = x as f64 + 0.5 - s.mean.x;
                let power = -0.5 * (a * dx * dx + 2.0 * b * dx * dy + c * dy * dy);
                let al = (s.opacity * power.exp()).clamp(0.0, MAX_ALPHA);
                let w = al * t;
                let px = &mut out.color[p];
                px[0] += w * s.color[0];
                px[1] += w * s.color[1];
                px[2] += w * s.color[2];
                zsum[p] += w * s.z;
                trans[p] = t * (1.0 - al);
                if trans[p] < MIN_TRANSMITTANCE {
                    live -= 1;
                }
            }
        }
    }
    for p in 0..tw * th {
        let a = 1.0 - trans[p];
        out.alpha[p] = a;
        out.depth[p] = if a > 0.0 { zsum[p] / a } else { 0.0 };
    }
    out
}
