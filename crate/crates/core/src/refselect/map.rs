use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::predicates::{contains_closed, dist2, orient, segment_dist2};
use super::Point;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EmbeddedFrame {
    pub frame_id: u64,
    pub coord: Point,
}

impl EmbeddedFrame {
    pub fn new(frame_id: u64, x: f64, y: f64) -> Self {
        EmbeddedFrame { frame_id, coord: (x, y) }
    }
}

/// Delaunay mesh over embedded frames.
///
/// Triangles are counter-clockwise index triples into `points`, rotated so
/// the smallest index comes first and sorted. `adjacency[t][k]` is the
/// triangle across the edge opposite vertex `k`, or `-1` on the hull.
#[derive(Debug, Clone, PartialEq)]
pub struct AppearanceMap {
    points: Vec<EmbeddedFrame>,
    triangles: Vec<[usize; 3]>,
    adjacency: Vec<[i64; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Triangle(usize),
    Outside,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ReferenceSet {
    pub frame_ids: Vec<u64>,
}

fn canonical(t: [usize; 3]) -> [usize; 3] {
    let k = (0..3).min_by_key(|&k| t[k]).unwrap();
    [t[k], t[(k + 1) % 3], t[(k + 2) % 3]]
}

pub(crate) fn edge(t: &[usize; 3], k: usize) -> (usize, usize) {
    (t[(k + 1) % 3], t[(k + 2) % 3])
}

impl AppearanceMap {
    /// Canonicalises triangle order and derives adjacency. Fails when a
    /// triangle is not strictly counter-clockwise, an edge is shared by more
    /// than two triangles, or the outer boundary is not convex.
    pub fn from_parts(points: Vec<EmbeddedFrame>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let bad = |msg: alloc::string::String| Err(Error::InvalidArgument(msg));
        if points.iter().any(|p| !(p.coord.0.is_finite() && p.coord.1.is_finite())) {
            return Err(Error::NonFinite { context: "appearance map points" });
        }
        let mut tris: Vec<[usize; 3]> = triangles.into_iter().map(canonical).collect();
        tris.sort_unstable();
        tris.dedup();
        for t in &tris {
            if t.iter().any(|&v| v >= points.len()) {
                return bad(alloc::format!("triangle {t:?} references a missing point"));
            }
            let [a, b, c] = t.map(|v| points[v].coord);
            if orient(a, b, c) <= 0.0 {
                return bad(alloc::format!("triangle {t:?} is not counter-clockwise"));
            }
        }
        let mut by_edge: BTreeMap<(usize, usize), (usize, usize)> = BTreeMap::new();
        for (ti, t) in tris.iter().enumerate() {
            for k in 0..3 {
                if by_edge.insert(edge(t, k), (ti, k)).is_some() {
                    return bad(alloc::format!("edge {:?} used twice in the same direction", edge(t, k)));
                }
            }
        }
        let mut adjacency = vec![[-1i64; 3]; tris.len()];
        for (t, adj) in tris.iter().zip(adjacency.iter_mut()) {
            for (k, slot) in adj.iter_mut().enumerate() {
                let (u, v) = edge(t, k);
                if let Some(&(other, _)) = by_edge.get(&(v, u)) {
                    *slot = other as i64;
                }
            }
        }
        let map = AppearanceMap { points, triangles: tris, adjacency };
        map.check_convex_boundary()?;
        Ok(map)
    }

    fn check_convex_boundary(&self) -> Result<()> {
        // boundary edges run counter-clockwise around the mesh; a convex
        // boundary never turns clockwise
        let mut next: BTreeMap<usize, usize> = BTreeMap::new();
        for (ti, t) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                if self.adjacency[ti][k] < 0 {
                    let (u, v) = edge(t, k);
                    next.insert(u, v);
                }
            }
        }
        for (&u, &v) in &next {
            if let Some(&w) = next.get(&v) {
                if orient(self.coord(u), self.coord(v), self.coord(w)) < 0.0 {
                    return Err(Error::InvalidArgument(alloc::format!(
                        "mesh boundary is not convex at point {v}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn points(&self) -> &[EmbeddedFrame] {
        &self.points
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn adjacency(&self) -> &[[i64; 3]] {
        &self.adjacency
    }

    pub fn coord(&self, v: usize) -> Point {
        self.points[v].coord
    }

    fn corners(&self, t: usize) -> [Point; 3] {
        self.triangles[t].map(|v| self.coord(v))
    }

    fn neighbor(&self, t: usize, k: usize) -> Option<usize> {
        usize::try_from(self.adjacency[t][k]).ok()
    }

    /// Lowest-index triangle whose closed region contains `q`, by exhaustive
    /// scan.
    pub fn locate_exhaustive(&self, q: Point) -> Location {
        (0..self.triangles.len())
            .find(|&t| {
                let [a, b, c] = self.corners(t);
                contains_closed(a, b, c, q)
            })
            .map_or(Location::Outside, Location::Triangle)
    }

    /// Straight visibility walk from triangle 0. Queries on a shared edge or
    /// vertex resolve to the lowest-index containing triangle. Walk cycles
    /// fall back to the exhaustive scan.
    pub fn locate(&self, q: Point) -> Location {
        if self.triangles.is_empty() {
            return Location::Outside;
        }
        let mut t = 0;
        for _ in 0..=self.triangles.len() {
            let [a, b, c] = self.corners(t);
            let o = [orient(b, c, q), orient(c, a, q), orient(a, b, q)];
            match (0..3).find(|&k| o[k] < 0.0) {
                Some(k) => match self.neighbor(t, k) {
                    Some(n) => t = n,
                    None => return Location::Outside,
                },
                None if o.contains(&0.0) => return self.locate_exhaustive(q),
                None => return Location::Triangle(t),
            }
        }
        self.locate_exhaustive(q)
    }

    /// Vertices of the containing triangle, then of edge-adjacent triangles
    /// layer by layer, each layer ordered by distance to `q`. Queries outside
    /// the hull start from the triangle on the nearest hull edge.
    pub fn select_references(&self, q: Point, want: usize) -> ReferenceSet {
        let Some((start, first)) = self.seed_layer(q) else {
            return ReferenceSet::default();
        };
        let mut seen_tri = vec![false; self.triangles.len()];
        let mut seen_vtx = vec![false; self.points.len()];
        seen_tri[start] = true;
        let mut order: Vec<usize> = Vec::new();
        for v in first {
            seen_vtx[v] = true;
            order.push(v);
        }
        let mut frontier = vec![start];
        while order.len() < want {
            let mut next: Vec<usize> = frontier
                .iter()
                .flat_map(|&t| (0..3).filter_map(move |k| self.neighbor(t, k)))
                .filter(|&n| !seen_tri[n])
                .collect();
            next.sort_unstable();
            next.dedup();
            if next.is_empty() {
                break;
            }
            let mut layer = Vec::new();
            for &t in &next {
                seen_tri[t] = true;
                for v in self.triangles[t] {
                    if !seen_vtx[v] {
                        seen_vtx[v] = true;
                        layer.push(v);
                    }
                }
            }
            self.sort_by_distance(&mut layer, q);
            order.extend(layer);
            frontier = next;
        }
        order.truncate(want);
        ReferenceSet { frame_ids: order.into_iter().map(|v| self.points[v].frame_id).collect() }
    }

    fn sort_by_distance(&self, vs: &mut [usize], q: Point) {
        vs.sort_by(|&a, &b| {
            dist2(self.coord(a), q).total_cmp(&dist2(self.coord(b), q)).then(a.cmp(&b))
        });
    }

    fn seed_layer(&self, q: Point) -> Option<(usize, Vec<usize>)> {
        if let Location::Triangle(t) = self.locate(q) {
            let mut vs = self.triangles[t].to_vec();
            self.sort_by_distance(&mut vs, q);
            return Some((t, vs));
        }
        let mut best: Option<(f64, usize, usize)> = None;
        for t in 0..self.triangles.len() {
            for k in 0..3 {
                if self.adjacency[t][k] >= 0 {
                    continue;
                }
                let (u, v) = edge(&self.triangles[t], k);
                let d = segment_dist2(self.coord(u), self.coord(v), q);
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, t, k));
                }
            }
        }
        let (_, t, k) = best?;
        let (u, v) = edge(&self.triangles[t], k);
        let mut vs = vec![u, v];
        self.sort_by_distance(&mut vs, q);
        vs.push(self.triangles[t][k]);
        Some((t, vs))
    }
}
