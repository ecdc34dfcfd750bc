//! Pose-aware reference selection.
//!
//! Each reference frame is embedded as a 2-D point (for faces, a pitch/yaw
//! proxy computed from landmarks). The points are Delaunay-triangulated into
//! an [`AppearanceMap`]; a query embedding is located in the mesh and the
//! vertices of its triangle, followed by those of edge-adjacent triangles in
//! breadth-first order, form the reference set.

mod delaunay;
mod landmarks;
mod map;
pub(crate) mod predicates;

pub use delaunay::build_map;
pub use landmarks::{landmarks_to_coord, EmbedMode};
pub use map::{AppearanceMap, EmbeddedFrame, Location, ReferenceSet};

pub type Point = (f64, f64);
