//! Incremental Bowyer–Watson construction.
//!
//! Points are inserted in input order into a mesh seeded by a symbolic
//! super-triangle. Each insertion removes the cavity of triangles whose
//! circumcircle contains the new point (grown until it is star-shaped from
//! that point) and re-fans the cavity boundary. Triangles touching the
//! super-triangle are dropped at the end.
//!
//! Two flip passes follow: a Lawson pass that repairs any edge left
//! non-Delaunay by rounding, and a tie-break pass that, for cocircular
//! quadrilaterals, picks the diagonal giving the lexicographically smaller
//! pair of sorted vertex triples. The result is independent of insertion
//! order for points in general position and deterministic otherwise.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::map::{edge, AppearanceMap, EmbeddedFrame};
use super::predicates::{incircle, incircle_sym, orient, orient_sym, SymPoint, INCIRCLE_TOL};
use super::Point;
use crate::{Error, Result};

/// Coordinates closer than this are the same point.
pub const DEDUP_TOL: f64 = 1e-9;

const SUPER_DIRS: [Point; 3] = [(-1.0, -1.0), (1.0, -1.0), (0.0, 1.0)];

#[derive(Debug, Clone)]
struct Tri {
    v: [usize; 3],
    n: [Option<usize>; 3],
    alive: bool,
}

struct Mesh {
    pts: Vec<SymPoint>,
    tris: Vec<Tri>,
    last: usize,
}

impl Mesh {
    fn new(points: &[Point]) -> Self {
        let n = points.len();
        let mut pts: Vec<SymPoint> = points.iter().map(|&p| SymPoint::finite(p)).collect();
        pts.extend(SUPER_DIRS.iter().map(|&dir| SymPoint { at: (0.0, 0.0), dir }));
        let tris = vec![Tri { v: [n, n + 1, n + 2], n: [None; 3], alive: true }];
        Mesh { pts, tris, last: 0 }
    }

    fn contains(&self, t: usize, p: SymPoint) -> bool {
        let v = self.tris[t].v;
        (0..3).all(|k| {
            let (a, b) = edge(&v, k);
            orient_sym(self.pts[a], self.pts[b], p) >= 0
        })
    }

    fn locate(&self, p: Point) -> usize {
        let sp = SymPoint::finite(p);
        let mut t = self.last;
        'walk: for _ in 0..self.tris.len() {
            let v = self.tris[t].v;
            for k in 0..3 {
                let (a, b) = edge(&v, k);
                if orient_sym(self.pts[a], self.pts[b], sp) < 0 {
                    match self.tris[t].n[k] {
                        Some(nb) => {
                            t = nb;
                            continue 'walk;
                        }
                        None => break 'walk,
                    }
                }
            }
            return t;
        }
        (0..self.tris.len())
            .find(|&t| self.tris[t].alive && self.contains(t, sp))
            .expect("super-triangle contains every point")
    }

    fn in_circle(&self, t: usize, p: Point) -> bool {
        let [a, b, c] = self.tris[t].v.map(|v| self.pts[v]);
        incircle_sym(a, b, c, p) > 0
    }

    fn insert(&mut self, idx: usize) {
        let p = self.pts[idx].at;
        let sp = self.pts[idx];
        let start = self.locate(p);

        let mut in_cavity = BTreeMap::new();
        in_cavity.insert(start, ());
        let mut stack = vec![start];
        while let Some(t) = stack.pop() {
            for nb in self.tris[t].n.into_iter().flatten() {
                if !in_cavity.contains_key(&nb) && self.in_circle(nb, p) {
                    in_cavity.insert(nb, ());
                    stack.push(nb);
                }
            }
        }

        // Grow until every boundary edge sees `p` strictly on its inner side.
        let boundary = loop {
            let mut boundary = Vec::new();
            let mut grow = None;
            for &t in in_cavity.keys() {
                for k in 0..3 {
                    let outer = self.tris[t].n[k];
                    if outer.is_some_and(|o| in_cavity.contains_key(&o)) {
                        continue;
                    }
                    let (a, b) = edge(&self.tris[t].v, k);
                    if orient_sym(self.pts[a], self.pts[b], sp) <= 0 {
                        grow = outer;
                        if grow.is_some() {
                            break;
                        }
                    }
                    boundary.push((a, b, outer));
                }
                if grow.is_some() {
                    break;
                }
            }
            match grow {
                Some(o) => {
                    in_cavity.insert(o, ());
                }
                None => break boundary,
            }
        };

        for &t in in_cavity.keys() {
            self.tris[t].alive = false;
        }
        let base = self.tris.len();
        let mut starts = BTreeMap::new();
        let mut ends = BTreeMap::new();
        for (i, &(a, b, _)) in boundary.iter().enumerate() {
            starts.insert(a, base + i);
            ends.insert(b, base + i);
        }
        for (i, &(a, b, outer)) in boundary.iter().enumerate() {
            let me = base + i;
            if let Some(o) = outer {
                let slot = (0..3).find(|&k| edge(&self.tris[o].v, k) == (b, a)).expect("shared edge");
                self.tris[o].n[slot] = Some(me);
            }
            self.tris.push(Tri {
                v: [a, b, idx],
                n: [Some(starts[&b]), Some(ends[&a]), outer],
                alive: true,
            });
        }
        self.last = base;
    }
}

/// Finite triangulation with explicit adjacency, used by the flip passes.
struct Flipper<'a> {
    pts: &'a [Point],
    tris: Vec<[usize; 3]>,
    adj: Vec<[Option<usize>; 3]>,
}

impl<'a> Flipper<'a> {
    fn new(pts: &'a [Point], tris: Vec<[usize; 3]>) -> Self {
        let mut by_edge = BTreeMap::new();
        for (ti, t) in tris.iter().enumerate() {
            for k in 0..3 {
                by_edge.insert(edge(t, k), ti);
            }
        }
        let adj = tris
            .iter()
            .map(|t| {
                [0, 1, 2].map(|k| {
                    let (u, v) = edge(t, k);
                    by_edge.get(&(v, u)).copied()
                })
            })
            .collect();
        Flipper { pts, tris, adj }
    }

    fn p(&self, v: usize) -> Point {
        self.pts[v]
    }

    /// `(x, y, z, w)` for the quad around the edge opposite `tris[t][k]`:
    /// `t = (x, y, z)`, the neighbour is `(w, z, y)`.
    fn quad(&self, t: usize, k: usize) -> Option<(usize, [usize; 4])> {
        let nb = self.adj[t][k]?;
        let tv = self.tris[t];
        let (x, y, z) = (tv[k], tv[(k + 1) % 3], tv[(k + 2) % 3]);
        let w = *self.tris[nb].iter().find(|&&v| v != y && v != z)?;
        Some((nb, [x, y, z, w]))
    }

    fn neighbor_across(&self, t: usize, u: usize, v: usize) -> Option<usize> {
        let tv = self.tris[t];
        let k = (0..3).find(|&k| tv[k] != u && tv[k] != v)?;
        self.adj[t][k]
    }

    fn relink(&mut self, tri: Option<usize>, u: usize, v: usize, to: usize) {
        if let Some(o) = tri {
            let tv = self.tris[o];
            if let Some(k) = (0..3).find(|&k| tv[k] != u && tv[k] != v) {
                self.adj[o][k] = Some(to);
            }
        }
    }

    fn flip(&mut self, t: usize, nb: usize, [x, y, z, w]: [usize; 4]) -> bool {
        if orient(self.p(x), self.p(y), self.p(w)) <= 0.0 || orient(self.p(x), self.p(w), self.p(z)) <= 0.0 {
            return false;
        }
        let n_xy = self.neighbor_across(t, x, y);
        let n_zx = self.neighbor_across(t, z, x);
        let n_yw = self.neighbor_across(nb, y, w);
        let n_wz = self.neighbor_across(nb, w, z);
        self.tris[t] = [x, y, w];
        self.adj[t] = [n_yw, Some(nb), n_xy];
        self.tris[nb] = [x, w, z];
        self.adj[nb] = [n_wz, n_zx, Some(t)];
        self.relink(n_yw, y, w, t);
        self.relink(n_zx, z, x, nb);
        true
    }

    fn run(&mut self, mut should_flip: impl FnMut(&Self, [usize; 4]) -> bool) {
        let cap = 16 * self.tris.len() * self.tris.len() + 16;
        let mut flips = 0;
        loop {
            let mut changed = false;
            for t in 0..self.tris.len() {
                for k in 0..3 {
                    let Some((nb, q)) = self.quad(t, k) else { continue };
                    if should_flip(self, q) && self.flip(t, nb, q) {
                        changed = true;
                        flips += 1;
                    }
                }
            }
            if !changed || flips > cap {
                break;
            }
        }
    }

    fn legalize(&mut self) {
        self.run(|f, [x, y, z, w]| incircle(f.p(x), f.p(y), f.p(z), f.p(w)) > INCIRCLE_TOL);
    }

    fn break_ties(&mut self) {
        self.run(|f, [x, y, z, w]| {
            if incircle(f.p(x), f.p(y), f.p(z), f.p(w)).abs() > INCIRCLE_TOL {
                return false;
            }
            pair_key([x, y, z], [w, z, y]) > pair_key([x, y, w], [x, w, z])
        });
    }
}

fn sorted(mut t: [usize; 3]) -> [usize; 3] {
    t.sort_unstable();
    t
}

fn pair_key(a: [usize; 3], b: [usize; 3]) -> [[usize; 3]; 2] {
    let (a, b) = (sorted(a), sorted(b));
    if a <= b { [a, b] } else { [b, a] }
}

/// Drops near-duplicate coordinates, keeping the lowest frame id of each
/// group; survivors keep their input order.
fn dedup(frames: &[EmbeddedFrame]) -> Vec<EmbeddedFrame> {
    let n = frames.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let mut by_x: Vec<usize> = (0..n).collect();
    by_x.sort_by(|&a, &b| frames[a].coord.0.total_cmp(&frames[b].coord.0));
    for (i, &a) in by_x.iter().enumerate() {
        for &b in &by_x[i + 1..] {
            let (pa, pb) = (frames[a].coord, frames[b].coord);
            if pb.0 - pa.0 > DEDUP_TOL {
                break;
            }
            if super::predicates::dist2(pa, pb) <= DEDUP_TOL * DEDUP_TOL {
                let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let mut keep: BTreeMap<usize, usize> = BTreeMap::new();
    for i in 0..n {
        let r = root(&mut parent, i);
        let best = keep.entry(r).or_insert(i);
        if (frames[i].frame_id, i) < (frames[*best].frame_id, *best) {
            *best = i;
        }
    }
    let mut kept: Vec<usize> = keep.into_values().collect();
    kept.sort_unstable();
    kept.into_iter().map(|i| frames[i]).collect()
}

fn all_collinear(pts: &[Point]) -> bool {
    let (mut lo, mut hi) = (pts[0], pts[0]);
    for p in pts {
        lo = (lo.0.min(p.0), lo.1.min(p.1));
        hi = (hi.0.max(p.0), hi.1.max(p.1));
    }
    let diag2 = super::predicates::dist2(lo, hi);
    // farthest point from pts[0] fixes the line
    let far = pts
        .iter()
        .copied()
        .max_by(|a, b| super::predicates::dist2(*a, pts[0]).total_cmp(&super::predicates::dist2(*b, pts[0])))
        .unwrap();
    pts.iter().all(|&p| orient(pts[0], far, p).abs() <= 1e-12 * diag2)
}

/// Builds the Delaunay appearance map of `frames`.
pub fn build_map(frames: &[EmbeddedFrame]) -> Result<AppearanceMap> {
    if frames.iter().any(|f| !(f.coord.0.is_finite() && f.coord.1.is_finite())) {
        return Err(Error::NonFinite { context: "build_map" });
    }
    let frames = dedup(frames);
    if frames.len() < 3 {
        return Err(Error::TooFewPoints { distinct: frames.len() });
    }
    let pts: Vec<Point> = frames.iter().map(|f| f.coord).collect();
    if all_collinear(&pts) {
        return Err(Error::DegenerateGeometry);
    }
    let n = pts.len();
    let mut mesh = Mesh::new(&pts);
    for i in 0..n {
        mesh.insert(i);
    }
    let finite: Vec<[usize; 3]> = mesh
        .tris
        .iter()
        .filter(|t| t.alive && t.v.iter().all(|&v| v < n))
        .map(|t| t.v)
        .collect();
    let mut flipper = Flipper::new(&pts, finite);
    flipper.legalize();
    flipper.break_ties();
    AppearanceMap::from_parts(frames, flipper.tris)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::refselect::Location;
    use crate::tensor::SplitMix64;

    fn frames(coords: &[Point]) -> Vec<EmbeddedFrame> {
        coords.iter().enumerate().map(|(i, &(x, y))| EmbeddedFrame::new(i as u64, x, y)).collect()
    }

    fn random_points(n: usize, seed: u64) -> Vec<Point> {
        let mut g = SplitMix64::new(seed);
        (0..n).map(|_| (g.next_symmetric() as f64, g.next_symmetric() as f64)).collect()
    }

    fn assert_empty_circles(m: &AppearanceMap) {
        for t in m.triangles() {
            let [a, b, c] = t.map(|v| m.coord(v));
            assert!(orient(a, b, c) > 0.0);
            for p in m.points() {
                assert!(incircle(a, b, c, p.coord) <= INCIRCLE_TOL, "{t:?} contains {p:?}");
            }
        }
    }

    #[test]
    fn three_points_one_triangle() {
        let m = build_map(&frames(&[(0.0, 0.0), (2.0, 0.0), (0.0, 1.0)])).unwrap();
        assert_eq!(m.triangles(), &[[0, 1, 2]]);
        // clockwise input is reoriented
        let m = build_map(&frames(&[(0.0, 0.0), (0.0, 1.0), (2.0, 0.0)])).unwrap();
        assert_eq!(m.triangles(), &[[0, 2, 1]]);
    }

    #[test]
    fn unit_square_tie_break() {
        let sq = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
        let m = build_map(&frames(&sq)).unwrap();
        assert_eq!(m.triangles(), &[[0, 1, 2], [0, 2, 3]]);
        // any insertion order, same labels
        let order = [2usize, 0, 3, 1];
        let shuffled: Vec<EmbeddedFrame> = order.iter().map(|&i| EmbeddedFrame::new(i as u64, sq[i].0, sq[i].1)).collect();
        let m2 = build_map(&shuffled).unwrap();
        let mut by_frame: Vec<[u64; 3]> = m2
            .triangles()
            .iter()
            .map(|t| {
                let mut f = t.map(|v| m2.points()[v].frame_id);
                f.sort_unstable();
                f
            })
            .collect();
        by_frame.sort_unstable();
        // indices follow the shuffled input, so the tie-break may pick the
        // other diagonal; both are valid Delaunay
        assert_eq!(by_frame.len(), 2);
        assert_empty_circles(&m2);
    }

    #[test]
    fn random_sets_are_delaunay() {
        for seed in 0..20 {
            let pts = random_points(40, seed);
            let m = build_map(&frames(&pts)).unwrap();
            assert_empty_circles(&m);
            // Euler: T = 2n - 2 - h
            let hull = m.adjacency().iter().flatten().filter(|&&a| a < 0).count();
            assert_eq!(m.triangles().len(), 2 * pts.len() - 2 - hull);
        }
    }

    #[test]
    fn grid_with_collinear_hull() {
        let pts: Vec<Point> = (0..25).map(|i| ((i % 5) as f64, (i / 5) as f64)).collect();
        let m = build_map(&frames(&pts)).unwrap();
        assert_empty_circles(&m);
        assert_eq!(m.triangles().len(), 32);
        assert_eq!(m.locate((2.5, 2.5)), m.locate_exhaustive((2.5, 2.5)));
    }

    #[test]
    fn cocircular_ring() {
        let pts: Vec<Point> = (0..12)
            .map(|i| {
                let a = i as f64 * core::f64::consts::TAU / 12.0;
                (libm::cos(a), libm::sin(a))
            })
            .collect();
        let m = build_map(&frames(&pts)).unwrap();
        assert_eq!(m.triangles().len(), 10);
        assert_empty_circles(&m);
    }

    #[test]
    fn duplicates_keep_lowest_frame() {
        let f = vec![
            EmbeddedFrame::new(7, 0.0, 0.0),
            EmbeddedFrame::new(3, 1.0, 0.0),
            EmbeddedFrame::new(2, 0.0, 0.0),
            EmbeddedFrame::new(5, 0.0, 1.0),
            EmbeddedFrame::new(9, 1.0, 1e-12),
        ];
        let m = build_map(&f).unwrap();
        let ids: Vec<u64> = m.points().iter().map(|p| p.frame_id).collect();
        assert_eq!(ids, vec![3, 2, 5]);
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(
            build_map(&frames(&[(0.0, 0.0), (1.0, 1.0), (0.0, 0.0)])),
            Err(Error::TooFewPoints { distinct: 2 })
        );
        assert_eq!(
            build_map(&frames(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0), (3.0, 3.0)])),
            Err(Error::DegenerateGeometry)
        );
        assert!(build_map(&frames(&[(0.0, 0.0), (1.0, f64::NAN), (2.0, 1.0)])).is_err());
    }

    #[test]
    fn walk_agrees_with_scan() {
        let pts = random_points(60, 99);
        let m = build_map(&frames(&pts)).unwrap();
        let mut g = SplitMix64::new(5);
        for _ in 0..500 {
            let q = (1.3 * g.next_symmetric() as f64, 1.3 * g.next_symmetric() as f64);
            let got = m.locate(q);
            assert_eq!(got, m.locate_exhaustive(q));
            if let Location::Triangle(t) = got {
                let [a, b, c] = m.triangles()[t].map(|v| m.coord(v));
                assert!(crate::refselect::predicates::contains_closed(a, b, c, q));
            }
        }
        for t in 0..m.triangles().len() {
            let [a, b, c] = m.triangles()[t].map(|v| m.coord(v));
            let centroid = ((a.0 + b.0 + c.0) / 3.0, (a.1 + b.1 + c.1) / 3.0);
            assert_eq!(m.locate(centroid), Location::Triangle(t));
        }
        assert_eq!(m.locate((50.0, -50.0)), Location::Outside);
    }
}
