//! Depth accuracy, trajectory consistency and memory-frame selection.

use nalgebra::{Matrix3, Vector3, SVD};
use serde::{Deserialize, Serialize};

use crate::camera::{geodesic_angle, CameraIntrinsics, CameraPose};
use crate::error::{Error, Result};
use crate::raster::Raster;

pub const DEFAULT_MIN_DEPTH: f64 = 0.1;
pub const DEFAULT_MAX_DEPTH: f64 = 10.0;

/// Pixels taking part in a depth evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthEvalMask {
    pub valid: Vec<bool>,
    pub width: usize,
    pub height: usize,
    pub min_depth: f64,
    pub max_depth: f64,
}

impl DepthEvalMask {
    /// Valid where the ground truth is finite and inside `[min_depth, max_depth]`.
    pub fn from_gt(gt: &Raster, min_depth: f64, max_depth: f64) -> Result<Self> {
        if gt.channels() != 1 {
            return Err(Error::invalid("ground-truth depth must have one channel"));
        }
        if !(min_depth.is_finite() && max_depth.is_finite() && 0.0 < min_depth && min_depth <= max_depth) {
            return Err(Error::invalid(format!(
                "depth range [{min_depth}, {max_depth}] must satisfy 0 < min <= max"
            )));
        }
        Ok(Self {
            valid: gt.data().iter().map(|&d| d >= min_depth && d <= max_depth).collect(),
            width: gt.width(),
            height: gt.height(),
            min_depth,
            max_depth,
        })
    }

    pub fn count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

fn masked_pairs<'a>(
    pred: &'a Raster,
    gt: &'a Raster,
    mask: &'a DepthEvalMask,
) -> Result<impl Iterator<Item = (f64, f64)> + Clone + 'a> {
    if !pred.same_shape(gt) || pred.channels() != 1 {
        return Err(Error::invalid(format!(
            "pred {}x{}x{} and gt {}x{}x{} must be equal single-channel shapes",
            pred.width(),
            pred.height(),
            pred.channels(),
            gt.width(),
            gt.height(),
            gt.channels()
        )));
    }
    if mask.width != gt.width() || mask.height != gt.height() {
        return Err(Error::invalid("mask shape differs from depth shape"));
    }
    if mask.count() == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(pred
        .data()
        .iter()
        .zip(gt.data())
        .zip(&mask.valid)
        .filter(|(_, &v)| v)
        .map(|((&p, &g), _)| (p, g)))
}

/// Mean of `|pred - gt| / gt` over the mask.
pub fn abs_rel(pred: &Raster, gt: &Raster, mask: &DepthEvalMask) -> Result<f64> {
    let it = masked_pairs(pred, gt, mask)?;
    let (mut sum, mut n) = (0.0, 0usize);
    for (p, g) in it {
        sum += (p - g).abs() / g;
        n += 1;
    }
    Ok(sum / n as f64)
}

/// Percentage of masked pixels with `max(pred/gt, gt/pred) < 1.25^n`.
pub fn delta_acc(pred: &Raster, gt: &Raster, mask: &DepthEvalMask, n: u32) -> Result<f64> {
    if !(1..=3).contains(&n) {
        return Err(Error::invalid(format!(
            "delta threshold index must be 1, 2 or 3, got {n}"
        )));
    }
    let thresh = 1.25f64.powi(n as i32);
    let it = masked_pairs(pred, gt, mask)?;
    let (mut hit, mut total) = (0usize, 0usize);
    for (p, g) in it {
        if (p / g).max(g / p) < thresh {
            hit += 1;
        }
        total += 1;
    }
    Ok(100.0 * hit as f64 / total as f64)
}

/// Scale-invariant log error `sqrt(mean g^2 - lambda (mean g)^2)`, with
/// `g = ln pred - ln gt`.
///
/// Evaluated as `sqrt(var(g) + (1 - lambda) mean(g)^2)` where the variance is
/// accumulated from log ratios against the first masked pixel. A uniform
/// rescale of `pred` cancels inside those ratios, so at `lambda = 1` the
/// result does not depend on the scale.
pub fn silog(pred: &Raster, gt: &Raster, mask: &DepthEvalMask, lambda: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::invalid(format!("lambda must be in [0, 1], got {lambda}")));
    }
    let it = masked_pairs(pred, gt, mask)?;
    for (p, g) in it.clone() {
        if !(p > 0.0 && g > 0.0) {
            return Err(Error::InvalidDepth(if p > 0.0 { g } else { p }));
        }
    }
    let (p0, g0) = it.clone().next().expect("mask is non-empty");
    let (mut sh, mut shh, mut sg, mut n) = (0.0, 0.0, 0.0, 0usize);
    for (p, g) in it {
        let h = (p / p0).ln() - (g / g0).ln();
        sh += h;
        shh += h * h;
        sg += p.ln() - g.ln();
        n += 1;
    }
    let nf = n as f64;
    let var = (shh / nf - (sh / nf) * (sh / nf)).max(0.0);
    let mean = sg / nf;
    Ok((var + (1.0 - lambda) * mean * mean).max(0.0).sqrt())
}

/// The five depth numbers reported together.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthReport {
    #[serde(rename = "AbsRel")]
    pub abs_rel: f64,
    #[serde(rename = "δ1")]
    pub delta1: f64,
    #[serde(rename = "δ2")]
    pub delta2: f64,
    #[serde(rename = "δ3")]
    pub delta3: f64,
    #[serde(rename = "SILog")]
    pub silog: f64,
}

pub fn depth_report(pred: &Raster, gt: &Raster, mask: &DepthEvalMask, lambda: f64) -> Result<DepthReport> {
    Ok(DepthReport {
        abs_rel: abs_rel(pred, gt, mask)?,
        delta1: delta_acc(pred, gt, mask, 1)?,
        delta2: delta_acc(pred, gt, mask, 2)?,
        delta3: delta_acc(pred, gt, mask, 3)?,
        silog: silog(pred, gt, mask, lambda)?,
    })
}

/// Peak signal-to-noise ratio in dB for signals in [0, 1], over the pixels
/// where `mask` is true (all pixels when `None`). Identical inputs give +inf.
pub fn psnr(a: &Raster, b: &Raster, mask: Option<&[bool]>) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::invalid("psnr inputs differ in shape"));
    }
    let c = a.channels();
    let n_px = a.width() * a.height();
    if let Some(m) = mask {
        if m.len() != n_px {
            return Err(Error::LengthMismatch {
                what: "psnr mask",
                left: m.len(),
                right: n_px,
            });
        }
    }
    let (mut se, mut n) = (0.0, 0usize);
    for i in 0..n_px {
        if mask.is_some_and(|m| !m[i]) {
            continue;
        }
        for k in 0..c {
            let d = a.data()[i * c + k] - b.data()[i * c + k];
            se += d * d;
        }
        n += c;
    }
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(-10.0 * (se / n as f64).log10())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryFrame {
    pub index: u64,
    pub pose: CameraPose,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub intrinsics: CameraIntrinsics,
    frames: Vec<TrajectoryFrame>,
}

impl Trajectory {
    pub fn new(intrinsics: CameraIntrinsics, frames: Vec<TrajectoryFrame>) -> Result<Self> {
        intrinsics.validate()?;
        for w in frames.windows(2) {
            if w[1].index <= w[0].index {
                return Err(Error::invalid(format!(
                    "frame indices must increase strictly ({} then {})",
                    w[0].index, w[1].index
                )));
            }
        }
        Ok(Self { intrinsics, frames })
    }

    /// Frames indexed 0, 1, 2, ... in pose order.
    pub fn from_poses(intrinsics: CameraIntrinsics, poses: impl IntoIterator<Item = CameraPose>) -> Result<Self> {
        let frames = poses
            .into_iter()
            .enumerate()
            .map(|(i, pose)| TrajectoryFrame { index: i as u64, pose })
            .collect();
        Self::new(intrinsics, frames)
    }

    pub fn frames(&self) -> &[TrajectoryFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn poses(&self) -> impl Iterator<Item = &CameraPose> {
        self.frames.iter().map(|f| &f.pose)
    }
}

fn paired<'a>(
    est: &'a Trajectory,
    gt: &'a Trajectory,
) -> Result<impl Iterator<Item = (&'a CameraPose, &'a CameraPose)>> {
    if est.len() != gt.len() {
        return Err(Error::LengthMismatch {
            what: "trajectory",
            left: est.len(),
            right: gt.len(),
        });
    }
    if est.is_empty() {
        return Err(Error::invalid("trajectories are empty"));
    }
    Ok(est.poses().zip(gt.poses()))
}

/// Mean geodesic angle between paired rotations, radians.
pub fn rot_err(est: &Trajectory, gt: &Trajectory) -> Result<f64> {
    let n = est.len() as f64;
    Ok(paired(est, gt)?
        .map(|(a, b)| geodesic_angle(&a.rotation, &b.rotation))
        .sum::<f64>()
        / n)
}

/// Mean L2 distance between paired translations.
pub fn trans_err(est: &Trajectory, gt: &Trajectory) -> Result<f64> {
    let n = est.len() as f64;
    Ok(paired(est, gt)?
        .map(|(a, b)| (a.translation - b.translation).norm())
        .sum::<f64>()
        / n)
}

/// Mean Frobenius norm of the difference of paired `[R | T]` matrices.
pub fn cam_mc(est: &Trajectory, gt: &Trajectory) -> Result<f64> {
    let n = est.len() as f64;
    Ok(paired(est, gt)?
        .map(|(a, b)| {
            let (ma, mb) = (a.matrix3x4(), b.matrix3x4());
            let mut s = 0.0;
            for r in 0..3 {
                for c in 0..4 {
                    let d = ma[r][c] - mb[r][c];
                    s += d * d;
                }
            }
            s.sqrt()
        })
        .sum::<f64>()
        / n)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryReport {
    #[serde(rename = "RotErr")]
    pub rot_err: f64,
    #[serde(rename = "TransErr")]
    pub trans_err: f64,
    #[serde(rename = "CamMC")]
    pub cam_mc: f64,
}

pub fn trajectory_report(est: &Trajectory, gt: &Trajectory) -> Result<TrajectoryReport> {
    Ok(TrajectoryReport {
        rot_err: rot_err(est, gt)?,
        trans_err: trans_err(est, gt)?,
        cam_mc: cam_mc(est, gt)?,
    })
}

/// Keeps the frames whose position in the sequence is a multiple of `k`.
pub fn subsample_every(traj: &Trajectory, k: usize) -> Result<Trajectory> {
    if k == 0 {
        return Err(Error::invalid("subsampling step must be >= 1"));
    }
    Ok(Trajectory {
        intrinsics: traj.intrinsics,
        frames: traj.frames.iter().step_by(k).copied().collect(),
    })
}

/// Pose distance used for memory lookup: translation gap plus `beta` times
/// the rotation angle.
pub fn pose_distance(a: &CameraPose, b: &CameraPose, beta: f64) -> f64 {
    (a.translation - b.translation).norm() + beta * geodesic_angle(&a.rotation, &b.rotation)
}

/// The bank entry nearest to `target`; ties go to the lowest frame id.
pub fn select_memory_frame(bank: &[(u64, CameraPose)], target: &CameraPose, beta: f64) -> Result<u64> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::invalid(format!("beta must be >= 0, got {beta}")));
    }
    bank.iter()
        .map(|(id, p)| (pose_distance(p, target, beta), *id))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, id)| id)
        .ok_or_else(|| Error::invalid("memory bank is empty"))
}

/// Similarity transform `x -> s R x + t` on world points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sim3 {
    pub scale: f64,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Sim3 {
    pub fn apply(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.scale * self.rotation * x + self.translation
    }

    /// Re-expresses a world-to-camera pose in the transformed world frame.
    pub fn transform_pose(&self, pose: &CameraPose) -> CameraPose {
        let rotation = pose.rotation * self.rotation.transpose();
        let center = self.apply(&pose.center());
        CameraPose {
            rotation,
            translation: -(rotation * center),
        }
    }
}

/// Least-squares similarity mapping `src` points onto `dst` (Umeyama).
pub fn umeyama(src: &[Vector3<f64>], dst: &[Vector3<f64>]) -> Result<Sim3> {
    if src.len() != dst.len() {
        return Err(Error::LengthMismatch {
            what: "point set",
            left: src.len(),
            right: dst.len(),
        });
    }
    if src.len() < 3 {
        return Err(Error::invalid("similarity alignment needs at least 3 frames"));
    }
    let n = src.len() as f64;
    let ms = src.iter().sum::<Vector3<f64>>() / n;
    let md = dst.iter().sum::<Vector3<f64>>() / n;
    let mut cov = Matrix3::zeros();
    let mut var = 0.0;
    for (s, d) in src.iter().zip(dst) {
        let (a, b) = (s - ms, d - md);
        cov += b * a.transpose();
        var += a.norm_squared();
    }
    cov /= n;
    var /= n;
    if !(var > 0.0) {
        return Err(Error::invalid(
            "similarity alignment needs non-coincident camera centres",
        ));
    }
    let svd = SVD::new(cov, true, true);
    let (u, vt) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let mut d = Matrix3::identity();
    if (u.determinant() * vt.determinant()) < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let rotation = u * d * vt;
    let scale = (Matrix3::from_diagonal(&svd.singular_values) * d).trace() / var;
    Ok(Sim3 {
        scale,
        rotation,
        translation: md - scale * rotation * ms,
    })
}

/// Aligns `est` onto `gt` by the similarity that best maps estimated camera
/// centres onto ground-truth ones.
pub fn align_sim3(est: &Trajectory, gt: &Trajectory) -> Result<Trajectory> {
    if est.len() != gt.len() {
        return Err(Error::LengthMismatch {
            what: "trajectory",
            left: est.len(),
            right: gt.len(),
        });
    }
    let src: Vec<_> = est.poses().map(CameraPose::center).collect();
    let dst: Vec<_> = gt.poses().map(CameraPose::center).collect();
    let sim = umeyama(&src, &dst)?;
    Ok(Trajectory {
        intrinsics: est.intrinsics,
        frames: est
            .frames
            .iter()
            .map(|f| TrajectoryFrame {
                index: f.index,
                pose: sim.transform_pose(&f.pose),
            })
            .collect(),
    })
}
