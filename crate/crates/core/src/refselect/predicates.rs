//! Orientation and incircle tests in `f64`.
//!
//! The super-triangle used during construction is symbolic: its corners sit
//! at `M·d` for fixed directions `d` and `M → ∞`. Predicates involving them
//! are evaluated as polynomials in `M` and take the sign of the leading
//! non-zero coefficient, which is what any sufficiently large finite
//! super-triangle would produce.

use super::Point;

/// Tolerance on the incircle determinant used for cocircularity.
pub const INCIRCLE_TOL: f64 = 1e-9;

/// Twice the signed area of `(a, b, c)`; positive when counter-clockwise.
#[inline]
pub fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

/// Positive when `d` lies inside the circumcircle of the counter-clockwise
/// triangle `(a, b, c)`.
pub fn incircle(a: Point, b: Point, c: Point, d: Point) -> f64 {
    let (adx, ady) = (a.0 - d.0, a.1 - d.1);
    let (bdx, bdy) = (b.0 - d.0, b.1 - d.1);
    let (cdx, cdy) = (c.0 - d.0, c.1 - d.1);
    let alift = adx * adx + ady * ady;
    let blift = bdx * bdx + bdy * bdy;
    let clift = cdx * cdx + cdy * cdy;
    adx * (bdy * clift - blift * cdy) - ady * (bdx * clift - blift * cdx) + alift * (bdx * cdy - bdy * cdx)
}

/// Closed containment by orientation signs of a counter-clockwise triangle.
pub fn contains_closed(a: Point, b: Point, c: Point, q: Point) -> bool {
    orient(a, b, q) >= 0.0 && orient(b, c, q) >= 0.0 && orient(c, a, q) >= 0.0
}

pub fn dist2(a: Point, b: Point) -> f64 {
    (a.0 - b.0) * (a.0 - b.0) + (a.1 - b.1) * (a.1 - b.1)
}

pub fn segment_dist2(a: Point, b: Point, q: Point) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return dist2(a, q);
    }
    let t = (((q.0 - a.0) * dx + (q.1 - a.1) * dy) / len2).clamp(0.0, 1.0);
    dist2((a.0 + t * dx, a.1 + t * dy), q)
}

/// A point `at + M·dir`. Input points have `dir = (0, 0)`.
#[derive(Debug, Clone, Copy)]
pub struct SymPoint {
    pub at: Point,
    pub dir: Point,
}

impl SymPoint {
    pub fn finite(at: Point) -> Self {
        SymPoint { at, dir: (0.0, 0.0) }
    }
}

/// Polynomial in `M` with coefficients by ascending degree (at most 4).
#[derive(Clone, Copy)]
struct Poly([f64; 5]);

impl Poly {
    fn linear(c0: f64, c1: f64) -> Self {
        Poly([c0, c1, 0.0, 0.0, 0.0])
    }

    fn add(self, o: Poly) -> Poly {
        let mut r = self.0;
        r.iter_mut().zip(o.0).for_each(|(a, b)| *a += b);
        Poly(r)
    }

    fn sub(self, o: Poly) -> Poly {
        let mut r = self.0;
        r.iter_mut().zip(o.0).for_each(|(a, b)| *a -= b);
        Poly(r)
    }

    fn mul(self, o: Poly) -> Poly {
        let mut r = [0.0; 5];
        for (i, &a) in self.0.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in o.0.iter().enumerate() {
                if b != 0.0 {
                    debug_assert!(i + j < 5, "degree overflow");
                    r[i + j] += a * b;
                }
            }
        }
        Poly(r)
    }

    /// Sign of the leading non-zero coefficient; `0` when identically zero.
    fn sign(self) -> i8 {
        for &c in self.0.iter().rev() {
            if c > 0.0 {
                return 1;
            }
            if c < 0.0 {
                return -1;
            }
        }
        0
    }
}

fn coords_rel(a: SymPoint, origin: SymPoint) -> (Poly, Poly) {
    (
        Poly::linear(a.at.0 - origin.at.0, a.dir.0 - origin.dir.0),
        Poly::linear(a.at.1 - origin.at.1, a.dir.1 - origin.dir.1),
    )
}

/// Sign of [`orient`] in the limit `M → ∞`.
pub fn orient_sym(a: SymPoint, b: SymPoint, c: SymPoint) -> i8 {
    let (bx, by) = coords_rel(b, a);
    let (cx, cy) = coords_rel(c, a);
    bx.mul(cy).sub(by.mul(cx)).sign()
}

/// Sign of [`incircle`] in the limit `M → ∞`, for a finite query `d`.
pub fn incircle_sym(a: SymPoint, b: SymPoint, c: SymPoint, d: Point) -> i8 {
    let d = SymPoint::finite(d);
    let row = |p: SymPoint| {
        let (x, y) = coords_rel(p, d);
        (x, y, x.mul(x).add(y.mul(y)))
    };
    let (ax, ay, al) = row(a);
    let (bx, by, bl) = row(b);
    let (cx, cy, cl) = row(c);
    let det = ax
        .mul(by.mul(cl).sub(bl.mul(cy)))
        .sub(ay.mul(bx.mul(cl).sub(bl.mul(cx))))
        .add(al.mul(bx.mul(cy).sub(by.mul(cx))));
    det.sign()
}
