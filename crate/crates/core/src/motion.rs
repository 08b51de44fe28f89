//! Camera paths used for evaluation renders: straight moves, an orbit and a
//! lemniscate.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};

use crate::camera::{CameraIntrinsics, CameraPose};
use crate::error::{Error, Result};
use crate::metrics::Trajectory;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Motion {
    Forward,
    Backward,
    Left,
    Right,
    /// Circle of radius `extent` in the horizontal plane, facing the origin.
    Orbit,
    /// Bernoulli lemniscate of half-width `extent` in the horizontal plane,
    /// facing `+z`.
    Lemniscate,
}

impl Motion {
    pub const ALL: [Motion; 6] = [
        Motion::Forward,
        Motion::Backward,
        Motion::Left,
        Motion::Right,
        Motion::Orbit,
        Motion::Lemniscate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Motion::Forward => "forward",
            Motion::Backward => "backward",
            Motion::Left => "left",
            Motion::Right => "right",
            Motion::Orbit => "orbit",
            Motion::Lemniscate => "lemniscate",
        }
    }
}

impl fmt::Display for Motion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Motion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Motion::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown motion {s:?}")))
    }
}

fn facing_z(center: Vector3<f64>) -> CameraPose {
    CameraPose {
        rotation: Matrix3::identity(),
        translation: -center,
    }
}

/// `frames` poses along `motion`; straight moves cover `extent` metres from
/// the origin, closed curves are sampled over one period without repeating
/// the start.
pub fn make_trajectory(motion: Motion, frames: usize, extent: f64, intrinsics: CameraIntrinsics) -> Result<Trajectory> {
    if frames == 0 {
        return Err(Error::invalid("trajectory needs at least one frame"));
    }
    if !(extent > 0.0 && extent.is_finite()) {
        return Err(Error::invalid(format!("extent must be > 0, got {extent}")));
    }
    let line = |i: usize| {
        if frames == 1 {
            0.0
        } else {
            extent * i as f64 / (frames - 1) as f64
        }
    };
    let phase = |i: usize| TAU * i as f64 / frames as f64;
    let poses = (0..frames)
        .map(|i| -> Result<CameraPose> {
            Ok(match motion {
                Motion::Forward => facing_z(Vector3::new(0.0, 0.0, line(i))),
                Motion::Backward => facing_z(Vector3::new(0.0, 0.0, -line(i))),
                Motion::Left => facing_z(Vector3::new(-line(i), 0.0, 0.0)),
                Motion::Right => facing_z(Vector3::new(line(i), 0.0, 0.0)),
                Motion::Orbit => {
                    let a = phase(i);
                    CameraPose::look_at(Vector3::new(extent * a.sin(), 0.0, -extent * a.cos()), Vector3::zeros())?
                }
                Motion::Lemniscate => {
                    let t = phase(i);
                    let d = 1.0 + t.sin() * t.sin();
                    facing_z(Vector3::new(extent * t.cos() / d, 0.0, extent * t.sin() * t.cos() / d))
                }
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Trajectory::from_poses(intrinsics, poses)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::from_fov(64, 48, 90.0).unwrap()
    }

    #[test]
    fn straight_moves() {
        let t = make_trajectory(Motion::Forward, 5, 1.0, k()).unwrap();
        assert_eq!(t.len(), 5);
        assert_eq!(t.frames()[0].pose, CameraPose::identity());
        assert!((t.frames()[4].pose.center() - Vector3::new(0.0, 0.0, 1.0)).norm() < 1e-15);
        let r = make_trajectory(Motion::Right, 3, 0.5, k()).unwrap();
        assert_eq!(r.frames()[2].pose.center(), Vector3::new(0.5, 0.0, 0.0));
    }

    #[test]
    fn orbit_faces_origin_at_fixed_radius() {
        let t = make_trajectory(Motion::Orbit, 12, 1.5, k()).unwrap();
        for p in t.poses() {
            assert!((p.center().norm() - 1.5).abs() < 1e-12);
            let o = p.to_camera(&Vector3::zeros());
            assert!(o.x.abs() < 1e-12 && o.y.abs() < 1e-12 && o.z > 0.0);
        }
        assert!((t.frames()[0].pose.rotation - Matrix3::identity()).norm() < 1e-12);
    }

    #[test]
    fn lemniscate_satisfies_bernoulli_equation() {
        let a = 0.8;
        let t = make_trajectory(Motion::Lemniscate, 17, a, k()).unwrap();
        for p in t.poses() {
            let c = p.center();
            let r2 = c.x * c.x + c.z * c.z;
            assert!((r2 * r2 - a * a * (c.x * c.x - c.z * c.z)).abs() < 1e-12);
        }
    }

    #[test]
    fn names_round_trip() {
        for m in Motion::ALL {
            assert_eq!(m.name().parse::<Motion>().unwrap(), m);
        }
        assert!("spiral".parse::<Motion>().is_err());
        assert!(make_trajectory(Motion::Orbit, 0, 1.0, k()).is_err());
    }
}
