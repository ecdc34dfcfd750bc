//! Dense row-major `f32` arrays.
//!
//! Values are stored as `f32`; every reduction (dot products, exponent sums,
//! norms) accumulates in `f64` and rounds once on store.

use alloc::vec;
use alloc::vec::Vec;

use crate::meter::{NoMeter, OpMeter};
use crate::{Error, Result};

/// Seed for the reproducible random fill.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(transparent))]
pub struct Seed(pub u64);

impl Seed {
    /// Derives an independent seed for a numbered sub-stream.
    pub fn derive(self, stream: u64) -> Seed {
        let mut g = SplitMix64::new(self.0 ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03));
        Seed(g.next_u64())
    }
}

/// SplitMix64: `state += 0x9E3779B97F4A7C15`, then two xor-shift-multiply
/// rounds.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform on `[-1, 1)`: the high 24 bits become `k / 2^24 ∈ [0, 1)`, which
    /// is mapped to `2u - 1`. Both steps are exact in `f32`.
    pub fn next_symmetric(&mut self) -> f32 {
        let k = (self.next_u64() >> 40) as f32;
        let u = k * (1.0 / 16_777_216.0);
        2.0 * u - 1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    dims: Vec<usize>,
    data: Vec<f32>,
}

fn check_finite(data: &[f32], context: &'static str) -> Result<()> {
    if data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { context })
    }
}

impl FeatureTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::InvalidArgument(alloc::format!(
                "tensor extents must be non-empty and positive, got {dims:?}"
            )));
        }
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(Error::shape("FeatureTensor::new", &dims, &[data.len()]));
        }
        check_finite(&data, "FeatureTensor::new")?;
        Ok(FeatureTensor { dims, data })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        let n = dims.iter().product();
        Self::new(dims.to_vec(), vec![0.0; n])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Pure relabeling of the row-major layout.
    pub fn reshape(&self, new_dims: &[usize]) -> Result<FeatureTensor> {
        let n: usize = new_dims.iter().product();
        if n != self.data.len() {
            return Err(Error::shape("reshape", &self.dims, new_dims));
        }
        FeatureTensor::new(new_dims.to_vec(), self.data.clone())
    }

    pub fn max_abs_diff(&self, other: &FeatureTensor) -> Option<f32> {
        (self.dims == other.dims).then(|| max_abs_diff(&self.data, &other.data))
    }
}

pub(crate) fn max_abs_diff(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f32::max)
}

/// Row-major 2-D array. Zero extents are allowed so that empty inputs can be
/// rejected by the operations that care.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::shape("Matrix::new", &[rows, cols], &[data.len()]));
        }
        check_finite(&data, "Matrix::new")?;
        Ok(Matrix { rows, cols, data })
    }

    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f32>) -> Self {
        debug_assert_eq!(rows * cols, data.len());
        Matrix { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[&[f32]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::shape("Matrix::from_rows", &[cols], &[bad.len()]));
        }
        Matrix::new(rows.len(), cols, rows.iter().flat_map(|r| r.iter().copied()).collect())
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> [usize; 2] {
        [self.rows, self.cols]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f32]> {
        // chunks_exact(0) panics; a matrix with no columns has no row data.
        let width = self.cols.max(1);
        self.data.chunks_exact(width).take(if self.cols == 0 { 0 } else { self.rows })
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> Option<f32> {
        (self.dims() == other.dims()).then(|| max_abs_diff(&self.data, &other.data))
    }

    pub fn to_tensor(&self) -> Result<FeatureTensor> {
        FeatureTensor::new(vec![self.rows, self.cols], self.data.clone())
    }
}

/// `a · b`.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    matmul_with(a, b, &mut NoMeter)
}

pub fn matmul_with<M: OpMeter>(a: &Matrix, b: &Matrix, meter: &mut M) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(Error::shape("matmul", &a.dims(), &b.dims()));
    }
    let (n, k, m) = (a.rows, a.cols, b.cols);
    let mut out = Vec::with_capacity(n * m);
    let mut acc = vec![0f64; m];
    for i in 0..n {
        acc.iter_mut().for_each(|v| *v = 0.0);
        for (kk, &av) in a.data[i * k..(i + 1) * k].iter().enumerate() {
            let av = av as f64;
            let brow = &b.data[kk * m..(kk + 1) * m];
            for (slot, &bv) in acc.iter_mut().zip(brow) {
                meter.mul_add();
                *slot += av * bv as f64;
            }
        }
        out.extend(acc.iter().map(|&v| v as f32));
    }
    Ok(Matrix::from_raw(n, m, out))
}

/// `f64` dot product over four interleaved partial sums, so the reduction
/// is not one serial dependency chain.
fn dot<M: OpMeter>(x: &[f32], y: &[f32], meter: &mut M) -> f64 {
    let mut lanes = [0f64; 4];
    let (xc, yc) = (x.chunks_exact(4), y.chunks_exact(4));
    let (xr, yr) = (xc.remainder(), yc.remainder());
    for (xs, ys) in xc.zip(yc) {
        for k in 0..4 {
            meter.mul_add();
            lanes[k] += xs[k] as f64 * ys[k] as f64;
        }
    }
    let mut tail = 0f64;
    for (&a, &b) in xr.iter().zip(yr) {
        meter.mul_add();
        tail += a as f64 * b as f64;
    }
    (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]) + tail
}

/// `a · bᵀ`, computed as row-by-row dot products.
pub fn matmul_nt(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    matmul_nt_with(a, b, &mut NoMeter)
}

pub fn matmul_nt_with<M: OpMeter>(a: &Matrix, b: &Matrix, meter: &mut M) -> Result<Matrix> {
    if a.cols != b.cols {
        return Err(Error::shape("matmul_nt", &a.dims(), &b.dims()));
    }
    let mut out = Vec::with_capacity(a.rows * b.rows);
    for i in 0..a.rows {
        let arow = &a.data[i * a.cols..(i + 1) * a.cols];
        for j in 0..b.rows {
            let brow = &b.data[j * b.cols..(j + 1) * b.cols];
            out.push(dot(arow, brow, meter) as f32);
        }
    }
    Ok(Matrix::from_raw(a.rows, b.rows, out))
}

/// `aᵀ · b`, accumulated as a sum of outer products of matching rows.
pub fn matmul_tn(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    matmul_tn_with(a, b, &mut NoMeter)
}

pub fn matmul_tn_with<M: OpMeter>(a: &Matrix, b: &Matrix, meter: &mut M) -> Result<Matrix> {
    if a.rows != b.rows {
        return Err(Error::shape("matmul_tn", &a.dims(), &b.dims()));
    }
    let (p, c) = (a.cols, b.cols);
    let mut acc = vec![0f64; p * c];
    for r in 0..a.rows {
        let arow = &a.data[r * p..(r + 1) * p];
        let brow = &b.data[r * c..(r + 1) * c];
        for (i, &av) in arow.iter().enumerate() {
            let av = av as f64;
            for (slot, &bv) in acc[i * c..(i + 1) * c].iter_mut().zip(brow) {
                meter.mul_add();
                *slot += av * bv as f64;
            }
        }
    }
    Ok(Matrix::from_raw(p, c, acc.into_iter().map(|v| v as f32).collect()))
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(a: &Matrix) -> Result<Matrix> {
    softmax_rows_with(a, &mut NoMeter)
}

pub fn softmax_rows_with<M: OpMeter>(a: &Matrix, meter: &mut M) -> Result<Matrix> {
    if a.rows == 0 || a.cols == 0 {
        return Err(Error::shape("softmax_rows", &a.dims(), &[1, 1]));
    }
    let mut out = Vec::with_capacity(a.data.len());
    let mut buf = vec![0f64; a.cols];
    for row in a.iter_rows() {
        let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
        let mut sum = 0f64;
        for (slot, &v) in buf.iter_mut().zip(row) {
            meter.exp();
            *slot = libm::exp(v as f64 - max);
            sum += *slot;
        }
        out.extend(buf.iter().map(|&e| (e / sum) as f32));
    }
    Ok(Matrix::from_raw(a.rows, a.cols, out))
}

/// Divides every row by `max(‖row‖₂, eps)`.
pub fn l2_normalize_rows(a: &Matrix, eps: f64) -> Matrix {
    let mut out = Vec::with_capacity(a.data.len());
    for row in a.iter_rows() {
        let norm = libm::sqrt(row.iter().map(|&v| v as f64 * v as f64).sum::<f64>());
        let denom = norm.max(eps);
        out.extend(row.iter().map(|&v| (v as f64 / denom) as f32));
    }
    Matrix::from_raw(a.rows, a.cols, out)
}

pub fn random_fill(dims: &[usize], seed: Seed) -> Result<FeatureTensor> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::InvalidArgument(alloc::format!(
            "random_fill needs non-empty positive extents, got {dims:?}"
        )));
    }
    let n: usize = dims.iter().product();
    let mut g = SplitMix64::new(seed.0);
    let data = (0..n).map(|_| g.next_symmetric()).collect();
    Ok(FeatureTensor { dims: dims.to_vec(), data })
}

pub fn random_matrix(rows: usize, cols: usize, seed: Seed) -> Result<Matrix> {
    let t = random_fill(&[rows, cols], seed)?;
    Ok(Matrix::from_raw(rows, cols, t.data))
}

pub fn reshape(t: &FeatureTensor, new_dims: &[usize]) -> Result<FeatureTensor> {
    t.reshape(new_dims)
}

fn split_refs(x: &FeatureTensor) -> Result<[usize; 4]> {
    match *x.dims() {
        [m, c, h, w] => Ok([m, c, h, w]),
        [c, h, w] => Ok([1, c, h, w]),
        ref d => Err(Error::shape("flatten_refs (expected m×c×h×w)", d, &[0, 0, 0, 0])),
    }
}

/// `m×c×h×w → (m·h·w)×c`: pixel `(i_m, i_h, i_w)` becomes row
/// `i_m·h·w + i_h·w + i_w`. A `c×h×w` tensor is treated as `m = 1`.
pub fn flatten_refs(x: &FeatureTensor) -> Result<Matrix> {
    let [m, c, h, w] = split_refs(x)?;
    let hw = h * w;
    let src = x.data();
    let mut out = vec![0f32; m * hw * c];
    for im in 0..m {
        for ic in 0..c {
            let plane = &src[(im * c + ic) * hw..(im * c + ic + 1) * hw];
            for (pix, &v) in plane.iter().enumerate() {
                out[(im * hw + pix) * c + ic] = v;
            }
        }
    }
    Ok(Matrix::from_raw(m * hw, c, out))
}

/// Inverse of [`flatten_refs`].
pub fn unflatten_refs(x: &Matrix, m: usize, h: usize, w: usize) -> Result<FeatureTensor> {
    let hw = h * w;
    if m * hw != x.rows() || m == 0 || hw == 0 || x.cols() == 0 {
        return Err(Error::shape("unflatten_refs", &x.dims(), &[m, h, w]));
    }
    let c = x.cols();
    let mut out = vec![0f32; x.data.len()];
    for im in 0..m {
        for pix in 0..hw {
            let row = x.row(im * hw + pix);
            for (ic, &v) in row.iter().enumerate() {
                out[(im * c + ic) * hw + pix] = v;
            }
        }
    }
    let dims = if m == 1 { vec![c, h, w] } else { vec![m, c, h, w] };
    FeatureTensor::new(dims, out)
}
