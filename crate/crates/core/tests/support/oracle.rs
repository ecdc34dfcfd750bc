//! Straight-line `f64` reference implementations used as test oracles.
//!
//! Nothing here calls into the library: indexing, the random generator,
//! softmax and normalisation are all spelled out with plain loops.
#![allow(dead_code, clippy::too_many_arguments)]

pub struct Refs {
    pub m: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    /// `[m][c][h][w]` row-major
    pub data: Vec<f64>,
}

impl Refs {
    pub fn at(&self, im: usize, ic: usize, ih: usize, iw: usize) -> f64 {
        self.data[((im * self.c + ic) * self.h + ih) * self.w + iw]
    }

    /// Row `im·h·w + ih·w + iw`, column `ic`.
    pub fn pixel_rows(&self) -> Vec<Vec<f64>> {
        let mut rows = Vec::new();
        for im in 0..self.m {
            for ih in 0..self.h {
                for iw in 0..self.w {
                    rows.push((0..self.c).map(|ic| self.at(im, ic, ih, iw)).collect());
                }
            }
        }
        rows
    }
}

/// SplitMix64 uniform on [-1, 1) using the top 24 bits.
pub fn splitmix_uniform(seed: u64, n: usize) -> Vec<f64> {
    let mut state = seed;
    (0..n)
        .map(|_| {
            state = state.wrapping_add(0x9E3779B97F4A7C15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
            z ^= z >> 31;
            let top = (z >> 40) as f64;
            top / 16777216.0 * 2.0 - 1.0
        })
        .collect()
}

fn softmax(row: &[f64]) -> Vec<f64> {
    let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = row.iter().map(|v| (v - mx).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

fn unit(row: &[f64], eps: f64) -> Vec<f64> {
    let n = row.iter().map(|v| v * v).sum::<f64>().sqrt().max(eps);
    row.iter().map(|v| v / n).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `attn[r][i] = softmax_i(x[r] · b[i])`
fn attention(x: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    x.iter().map(|row| softmax(&b.iter().map(|bi| dot(row, bi)).collect::<Vec<_>>())).collect()
}

/// `out[i] = unit(Σ_r attn[r][i] · x[r])`
fn pool(attn: &[Vec<f64>], x: &[Vec<f64>], p: usize, eps: f64) -> Vec<Vec<f64>> {
    let c = x[0].len();
    (0..p)
        .map(|i| {
            let mut acc = vec![0.0; c];
            for (r, row) in x.iter().enumerate() {
                for ch in 0..c {
                    acc[ch] += attn[r][i] * row[ch];
                }
            }
            unit(&acc, eps)
        })
        .collect()
}

pub struct CompactOracle {
    pub x_basis: Vec<f64>,
    pub b_l: Vec<Vec<f64>>,
    pub b_a: Vec<Vec<f64>>,
    pub a_b: Vec<Vec<f64>>,
    pub a_in: Vec<Vec<f64>>,
}

/// `x_in` is `[c][h][w]`; returns `X_basis` as `[c][h][w]`.
pub fn compact(
    x_in: &[f64],
    x_a: &Refs,
    x_l: &Refs,
    p: usize,
    s: usize,
    lambda: f64,
    eps: f64,
    seed: u64,
) -> CompactOracle {
    let c = x_l.c;
    let xl = x_l.pixel_rows();
    let xa = x_a.pixel_rows();
    let init = splitmix_uniform(seed, p * c);
    let mut basis: Vec<Vec<f64>> = (0..p).map(|i| unit(&init[i * c..(i + 1) * c], eps)).collect();
    for _ in 0..s {
        let a = attention(&xl, &basis);
        let fresh = pool(&a, &xl, p, eps);
        basis = (0..p)
            .map(|i| {
                let mixed: Vec<f64> = (0..c).map(|ch| (1.0 - lambda) * basis[i][ch] + lambda * fresh[i][ch]).collect();
                unit(&mixed, eps)
            })
            .collect();
    }
    let a_b = attention(&xl, &basis);
    let b_a = pool(&a_b, &xa, p, eps);

    let hw = x_in.len() / c;
    let xin: Vec<Vec<f64>> = (0..hw).map(|pix| (0..c).map(|ch| x_in[ch * hw + pix]).collect()).collect();
    let a_in = attention(&xin, &basis);
    let mut x_basis = vec![0.0; c * hw];
    for pix in 0..hw {
        for ch in 0..c {
            x_basis[ch * hw + pix] = (0..p).map(|i| a_in[pix][i] * b_a[i][ch]).sum();
        }
    }
    CompactOracle { x_basis, b_l: basis, b_a, a_b, a_in }
}

/// Quadratic loop over every (input pixel, reference pixel) pair.
pub fn pixelwise(x_in: &[f64], x_a: &Refs, x_l: &Refs) -> Vec<f64> {
    let c = x_l.c;
    let hw = x_in.len() / c;
    let mut out = vec![0.0; c * hw];
    for pix in 0..hw {
        let q: Vec<f64> = (0..c).map(|ch| x_in[ch * hw + pix]).collect();
        let mut logits = Vec::new();
        let mut values = Vec::new();
        for im in 0..x_l.m {
            for ih in 0..x_l.h {
                for iw in 0..x_l.w {
                    logits.push((0..c).map(|ch| q[ch] * x_l.at(im, ch, ih, iw)).sum::<f64>());
                    values.push((0..c).map(|ch| x_a.at(im, ch, ih, iw)).collect::<Vec<f64>>());
                }
            }
        }
        let wts = softmax(&logits);
        for ch in 0..c {
            out[ch * hw + pix] = wts.iter().zip(&values).map(|(w, v)| w * v[ch]).sum();
        }
    }
    out
}

/// Brute-force empty-circumcircle check: returns the first violating
/// (triangle, point) pair.
pub fn delaunay_violation(points: &[(f64, f64)], triangles: &[[usize; 3]], tol: f64) -> Option<(usize, usize)> {
    for (ti, t) in triangles.iter().enumerate() {
        let [a, b, c] = t.map(|v| points[v]);
        let area = (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
        if area <= 0.0 {
            return Some((ti, usize::MAX));
        }
        for (pi, d) in points.iter().enumerate() {
            let m = [
                [a.0 - d.0, a.1 - d.1, (a.0 - d.0).powi(2) + (a.1 - d.1).powi(2)],
                [b.0 - d.0, b.1 - d.1, (b.0 - d.0).powi(2) + (b.1 - d.1).powi(2)],
                [c.0 - d.0, c.1 - d.1, (c.0 - d.0).powi(2) + (c.1 - d.1).powi(2)],
            ];
            let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
            if det > tol {
                return Some((ti, pi));
            }
        }
    }
    None
}

/// Lowest-index triangle containing `q` by sign-of-area tests, if any.
pub fn containing_triangle(points: &[(f64, f64)], triangles: &[[usize; 3]], q: (f64, f64)) -> Option<usize> {
    let area = |a: (f64, f64), b: (f64, f64), c: (f64, f64)| (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
    triangles.iter().position(|t| {
        let [a, b, c] = t.map(|v| points[v]);
        area(a, b, q) >= 0.0 && area(b, c, q) >= 0.0 && area(c, a, q) >= 0.0
    })
}
