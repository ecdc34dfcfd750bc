//! Closed-form 2-D embeddings of semantic labels.
//!
//! Face mode follows the 68-point landmark layout (jaw 0–16, nose 27–35,
//! eyes 36–47) and returns a `(pitch, yaw)` proxy in degrees:
//!
//! * yaw: `atan2(d_L − d_R, d_L + d_R)`, where `d_L`/`d_R` are the distances
//!   from the nose tip (30) to the outer eye corner (36 or 45) that lies
//!   further left/right in the image;
//! * pitch: `atan2(n_upper − n_lower, n_upper + n_lower)`, where `n_upper` is
//!   the distance from the nose tip to the line through the outer eye
//!   corners and `n_lower` the distance from the nose tip to the chin (8).
//!
//! Pose mode uses the 25-point body layout (1 = neck, 8 = mid-hip) and
//! returns `(torso tilt in degrees, hip-centre x normalised to the keypoint
//! bounding box)`.

use super::predicates::orient;
use super::Point;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "lowercase"))]
pub enum EmbedMode {
    Face,
    Pose,
}

const NOSE_TIP: usize = 30;
const CHIN: usize = 8;
const EYE_OUTER_A: usize = 36;
const EYE_OUTER_B: usize = 45;
const FACE_POINTS: usize = 68;

const NECK: usize = 1;
const MID_HIP: usize = 8;
const POSE_POINTS: usize = MID_HIP + 1;

fn dist(a: Point, b: Point) -> f64 {
    libm::hypot(a.0 - b.0, a.1 - b.1)
}

fn degrees(rad: f64) -> f64 {
    rad * (180.0 / core::f64::consts::PI)
}

pub fn landmarks_to_coord(landmarks: &[Point], mode: EmbedMode) -> Result<Point> {
    if landmarks.iter().any(|p| !(p.0.is_finite() && p.1.is_finite())) {
        return Err(Error::NonFinite { context: "landmarks" });
    }
    match mode {
        EmbedMode::Face => face(landmarks),
        EmbedMode::Pose => pose(landmarks),
    }
}

fn face(l: &[Point]) -> Result<Point> {
    if l.len() < FACE_POINTS {
        return Err(Error::InsufficientLandmarks { needed: FACE_POINTS, found: l.len() });
    }
    let nose = l[NOSE_TIP];
    let (mut left, mut right) = (l[EYE_OUTER_A], l[EYE_OUTER_B]);
    if right.0 < left.0 {
        core::mem::swap(&mut left, &mut right);
    }
    let (d_l, d_r) = (dist(nose, left), dist(nose, right));
    let yaw = degrees(libm::atan2(d_l - d_r, d_l + d_r));

    let eye_span = dist(left, right);
    let n_upper = if eye_span > 0.0 { (orient(left, right, nose) / eye_span).abs() } else { dist(nose, left) };
    let n_lower = dist(nose, l[CHIN]);
    let pitch = degrees(libm::atan2(n_upper - n_lower, n_upper + n_lower));
    Ok((pitch, yaw))
}

fn pose(l: &[Point]) -> Result<Point> {
    if l.len() < POSE_POINTS {
        return Err(Error::InsufficientLandmarks { needed: POSE_POINTS, found: l.len() });
    }
    let (neck, hip) = (l[NECK], l[MID_HIP]);
    // image y grows downward; an upright torso has tilt 0
    let tilt = degrees(libm::atan2(neck.0 - hip.0, hip.1 - neck.1));
    let (lo, hi) = l.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.0), hi.max(p.0)));
    let hip_x = if hi > lo { (hip.0 - lo) / (hi - lo) } else { 0.5 };
    Ok((tilt, hip_x))
}
