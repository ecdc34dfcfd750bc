//! Compact basis attention and the pixel-wise baseline.
//!
//! Reference label features `X_l` (flattened to `hmw × c`) are summarised by
//! `p` basis rows through `s` alternating steps:
//!
//! ```text
//! A_b   = softmax_rows(X_l · B_lᵀ)          hmw × p
//! B_new = norm(A_bᵀ · X_l)                  p × c
//! B_l   = rownorm((1 - λ)·B_l + λ·B_new)
//! ```
//!
//! After the last step `A_b` is recomputed from the final `B_l` and reused to
//! pool the appearance features, `B_a = norm(A_bᵀ · X_a)`. The input label
//! features then attend over the bases:
//!
//! ```text
//! A_in    = softmax_rows(X_in · B_lᵀ)       hw × p
//! X_basis = A_in · B_a                      hw × c, reshaped to c × h × w
//! ```
//!
//! Softmax runs along the basis axis, so every pixel spreads unit mass over
//! the `p` bases.

use alloc::vec::Vec;

use crate::meter::{NoMeter, OpMeter};
use crate::tensor::{
    flatten_refs, l2_normalize_rows, matmul_nt_with, matmul_tn_with, matmul_with, random_matrix,
    softmax_rows_with, unflatten_refs, FeatureTensor, Matrix, Seed,
};
use crate::{Error, Result};

/// Constraint applied to freshly pooled bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum NormKind {
    /// Unit L2 norm per basis row.
    #[default]
    L2,
    /// Divide each basis row by the attention mass it received, which turns
    /// it into a weighted mean of pixels. Rows are not unit-norm.
    ColumnSum,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default))]
pub struct AttentionConfig {
    pub p: usize,
    pub s: usize,
    pub lambda: f64,
    pub eps: f64,
    pub seed: Seed,
    pub norm: NormKind,
}

impl Default for AttentionConfig {
    fn default() -> Self {
        AttentionConfig { p: 128, s: 3, lambda: 0.9, eps: 1e-12, seed: Seed(42), norm: NormKind::L2 }
    }
}

impl AttentionConfig {
    /// Defaults for full-body pose sequences, which use twice as many bases.
    pub fn pose() -> Self {
        AttentionConfig { p: 256, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(alloc::format!("attention config: {msg}")));
        if self.p == 0 {
            return bad("p must be >= 1");
        }
        if self.s == 0 {
            return bad("s must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad("lambda must lie in [0, 1]");
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return bad("eps must be positive");
        }
        Ok(())
    }
}

/// `p × c` basis rows.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSet {
    pub mat: Matrix,
}

/// Row-stochastic map from pixels to bases.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap {
    pub mat: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompactAttentionOutput {
    pub x_basis: FeatureTensor,
    pub b_l: BasisSet,
    pub b_a: BasisSet,
    pub a_b: AttentionMap,
    pub a_in: AttentionMap,
}

fn constrain(pooled: Matrix, map: &Matrix, norm: NormKind, eps: f64) -> Matrix {
    match norm {
        NormKind::L2 => l2_normalize_rows(&pooled, eps),
        NormKind::ColumnSum => {
            let (p, c) = (pooled.rows(), pooled.cols());
            let mut mass = alloc::vec![0f64; p];
            for row in map.iter_rows() {
                for (acc, &v) in mass.iter_mut().zip(row) {
                    *acc += v as f64;
                }
            }
            let data: Vec<f32> = pooled
                .data()
                .iter()
                .enumerate()
                .map(|(i, &v)| (v as f64 / mass[i / c].max(eps)) as f32)
                .collect();
            Matrix::from_raw(p, c, data)
        }
    }
}

fn check_cols(context: &'static str, a: &Matrix, b: &Matrix) -> Result<()> {
    if a.cols() != b.cols() {
        return Err(Error::shape(context, &a.dims(), &b.dims()));
    }
    Ok(())
}

/// One attention/update step with L2 normalisation. The returned map is
/// the one computed from the *input* basis.
pub fn basis_em_step(x_l: &Matrix, b_l: &BasisSet, lambda: f64, eps: f64) -> Result<(BasisSet, AttentionMap)> {
    basis_em_step_with(x_l, b_l, lambda, eps, NormKind::L2, &mut NoMeter)
}

pub fn basis_em_step_with<M: OpMeter>(
    x_l: &Matrix,
    b_l: &BasisSet,
    lambda: f64,
    eps: f64,
    norm: NormKind,
    meter: &mut M,
) -> Result<(BasisSet, AttentionMap)> {
    check_cols("basis_em_step", x_l, &b_l.mat)?;
    let a_b = softmax_rows_with(&matmul_nt_with(x_l, &b_l.mat, meter)?, meter)?;
    let b_new = constrain(matmul_tn_with(&a_b, x_l, meter)?, &a_b, norm, eps);
    let blended: Vec<f32> = b_l
        .mat
        .data()
        .iter()
        .zip(b_new.data())
        .map(|(&old, &new)| ((1.0 - lambda) * old as f64 + lambda * new as f64) as f32)
        .collect();
    let blended = Matrix::from_raw(b_new.rows(), b_new.cols(), blended);
    let mat = match norm {
        NormKind::L2 => l2_normalize_rows(&blended, eps),
        NormKind::ColumnSum => blended,
    };
    Ok((BasisSet { mat }, AttentionMap { mat: a_b }))
}

/// Random unit-row initial basis.
pub fn initial_basis(p: usize, c: usize, seed: Seed, eps: f64) -> Result<BasisSet> {
    Ok(BasisSet { mat: l2_normalize_rows(&random_matrix(p, c, seed)?, eps) })
}

/// Runs `cfg.s` steps from a seeded basis. The returned map is recomputed
/// from the final basis.
pub fn extract_bases(x_l: &Matrix, cfg: &AttentionConfig) -> Result<(BasisSet, AttentionMap)> {
    extract_bases_with(x_l, cfg, &mut NoMeter)
}

pub fn extract_bases_with<M: OpMeter>(
    x_l: &Matrix,
    cfg: &AttentionConfig,
    meter: &mut M,
) -> Result<(BasisSet, AttentionMap)> {
    cfg.validate()?;
    if x_l.rows() == 0 || x_l.cols() == 0 {
        return Err(Error::shape("extract_bases", &x_l.dims(), &[1, 1]));
    }
    let mut basis = initial_basis(cfg.p, x_l.cols(), cfg.seed, cfg.eps)?;
    for _ in 0..cfg.s {
        basis = basis_em_step_with(x_l, &basis, cfg.lambda, cfg.eps, cfg.norm, meter)?.0;
    }
    let a_b = softmax_rows_with(&matmul_nt_with(x_l, &basis.mat, meter)?, meter)?;
    Ok((basis, AttentionMap { mat: a_b }))
}

/// Pools appearance features with the shared label attention map.
pub fn appearance_basis(x_a: &Matrix, a_b: &AttentionMap, eps: f64) -> Result<BasisSet> {
    appearance_basis_with(x_a, a_b, eps, NormKind::L2, &mut NoMeter)
}

pub fn appearance_basis_with<M: OpMeter>(
    x_a: &Matrix,
    a_b: &AttentionMap,
    eps: f64,
    norm: NormKind,
    meter: &mut M,
) -> Result<BasisSet> {
    if a_b.mat.rows() != x_a.rows() {
        return Err(Error::shape("appearance_basis", &a_b.mat.dims(), &x_a.dims()));
    }
    let pooled = matmul_tn_with(&a_b.mat, x_a, meter)?;
    Ok(BasisSet { mat: constrain(pooled, &a_b.mat, norm, eps) })
}

/// Attends `hw × c` input features over the label bases and mixes the
/// appearance bases. Returns `X_basis` (`hw × c`) and `A_in`.
pub fn aggregate_flat_with<M: OpMeter>(
    x_in: &Matrix,
    b_l: &BasisSet,
    b_a: &BasisSet,
    meter: &mut M,
) -> Result<(Matrix, AttentionMap)> {
    check_cols("aggregate (x_in vs b_l)", x_in, &b_l.mat)?;
    check_cols("aggregate (b_l vs b_a)", &b_l.mat, &b_a.mat)?;
    if b_l.mat.rows() != b_a.mat.rows() {
        return Err(Error::shape("aggregate (basis counts)", &b_l.mat.dims(), &b_a.mat.dims()));
    }
    let a_in = softmax_rows_with(&matmul_nt_with(x_in, &b_l.mat, meter)?, meter)?;
    let out = matmul_with(&a_in, &b_a.mat, meter)?;
    Ok((out, AttentionMap { mat: a_in }))
}

fn split_input(x_in: &FeatureTensor) -> Result<[usize; 3]> {
    match *x_in.dims() {
        [c, h, w] => Ok([c, h, w]),
        ref d => Err(Error::shape("input features (expected c×h×w)", d, &[0, 0, 0])),
    }
}

/// `c×h×w` input features to `c×h×w` context features.
pub fn aggregate(x_in: &FeatureTensor, b_l: &BasisSet, b_a: &BasisSet) -> Result<(FeatureTensor, AttentionMap)> {
    aggregate_with(x_in, b_l, b_a, &mut NoMeter)
}

pub fn aggregate_with<M: OpMeter>(
    x_in: &FeatureTensor,
    b_l: &BasisSet,
    b_a: &BasisSet,
    meter: &mut M,
) -> Result<(FeatureTensor, AttentionMap)> {
    let [_, h, w] = split_input(x_in)?;
    let (out, a_in) = aggregate_flat_with(&flatten_refs(x_in)?, b_l, b_a, meter)?;
    Ok((unflatten_refs(&out, 1, h, w)?, a_in))
}

fn check_refs(x_in: &FeatureTensor, x_a: &FeatureTensor, x_l: &FeatureTensor) -> Result<()> {
    let [c, _, _] = split_input(x_in)?;
    if x_a.dims() != x_l.dims() {
        return Err(Error::shape("reference features (x_a vs x_l)", x_a.dims(), x_l.dims()));
    }
    let ref_c = match *x_a.dims() {
        [_, c, _, _] | [c, _, _] => c,
        ref d => return Err(Error::shape("reference features (expected m×c×h×w)", d, &[0, 0, 0, 0])),
    };
    if ref_c != c {
        return Err(Error::shape("channel count (x_in vs references)", x_in.dims(), x_a.dims()));
    }
    Ok(())
}

pub fn compact_attention(
    x_in: &FeatureTensor,
    x_a: &FeatureTensor,
    x_l: &FeatureTensor,
    cfg: &AttentionConfig,
) -> Result<CompactAttentionOutput> {
    compact_attention_with(x_in, x_a, x_l, cfg, &mut NoMeter)
}

pub fn compact_attention_with<M: OpMeter>(
    x_in: &FeatureTensor,
    x_a: &FeatureTensor,
    x_l: &FeatureTensor,
    cfg: &AttentionConfig,
    meter: &mut M,
) -> Result<CompactAttentionOutput> {
    check_refs(x_in, x_a, x_l)?;
    let xl = flatten_refs(x_l)?;
    let xa = flatten_refs(x_a)?;
    let (b_l, a_b) = extract_bases_with(&xl, cfg, meter)?;
    let b_a = appearance_basis_with(&xa, &a_b, cfg.eps, cfg.norm, meter)?;
    let (x_basis, a_in) = aggregate_with(x_in, &b_l, &b_a, meter)?;
    Ok(CompactAttentionOutput { x_basis, b_l, b_a, a_b, a_in })
}

/// Every input pixel attends over every reference pixel:
/// `softmax_rows(X_in · X_lᵀ) · X_a`.
pub fn pixelwise_attention(x_in: &FeatureTensor, x_a: &FeatureTensor, x_l: &FeatureTensor) -> Result<FeatureTensor> {
    pixelwise_attention_with(x_in, x_a, x_l, &mut NoMeter)
}

pub fn pixelwise_attention_with<M: OpMeter>(
    x_in: &FeatureTensor,
    x_a: &FeatureTensor,
    x_l: &FeatureTensor,
    meter: &mut M,
) -> Result<FeatureTensor> {
    check_refs(x_in, x_a, x_l)?;
    let [_, h, w] = split_input(x_in)?;
    let logits = matmul_nt_with(&flatten_refs(x_in)?, &flatten_refs(x_l)?, meter)?;
    let attn = softmax_rows_with(&logits, meter)?;
    let out = matmul_with(&attn, &flatten_refs(x_a)?, meter)?;
    unflatten_refs(&out, 1, h, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::random_fill;
    use alloc::vec;

    fn unit(v: &[f32]) -> Vec<f32> {
        let n = v.iter().map(|x| x * x).sum::<f32>().sqrt();
        v.iter().map(|x| x / n).collect()
    }

    #[test]
    fn fixed_point_single_basis() {
        let u = unit(&[1.0, 2.0, -2.0]);
        let x = Matrix::from_rows(&[&u, &u, &u, &u]).unwrap();
        let b = BasisSet { mat: Matrix::from_rows(&[&u]).unwrap() };
        for lambda in [0.0, 0.3, 1.0] {
            let (nb, map) = basis_em_step(&x, &b, lambda, 1e-12).unwrap();
            assert!(nb.mat.max_abs_diff(&b.mat).unwrap() <= 1e-6);
            assert!(map.mat.data().iter().all(|&v| v == 1.0));
        }
    }

    #[test]
    fn lambda_zero_keeps_basis() {
        let x = random_fill(&[6, 4], Seed(1)).unwrap();
        let x = Matrix::new(6, 4, x.into_data()).unwrap();
        let b = initial_basis(3, 4, Seed(2), 1e-12).unwrap();
        let (nb, _) = basis_em_step(&x, &b, 0.0, 1e-12).unwrap();
        assert!(nb.mat.max_abs_diff(&b.mat).unwrap() <= 1e-6);

        // not yet unit rows: returns the renormalised input
        let raw = BasisSet { mat: Matrix::from_rows(&[&[3.0, 0.0, 0.0, 4.0]]).unwrap() };
        let (nb, _) = basis_em_step(&x, &raw, 0.0, 1e-12).unwrap();
        assert_eq!(nb.mat.data(), &[0.6, 0.0, 0.0, 0.8]);
    }

    #[test]
    fn shape_errors() {
        let x = Matrix::zeros(4, 3);
        let b = BasisSet { mat: Matrix::zeros(2, 4) };
        assert!(matches!(basis_em_step(&x, &b, 0.5, 1e-12), Err(Error::Shape { .. })));
        let map = AttentionMap { mat: Matrix::zeros(5, 2) };
        assert!(appearance_basis(&x, &map, 1e-12).is_err());

        let x_in = random_fill(&[3, 2, 2], Seed(0)).unwrap();
        let x_a = random_fill(&[2, 4, 2, 2], Seed(1)).unwrap();
        assert!(matches!(
            compact_attention(&x_in, &x_a, &x_a, &AttentionConfig { p: 2, ..Default::default() }),
            Err(Error::Shape { .. })
        ));
        assert!(pixelwise_attention(&x_in, &x_a, &x_a).is_err());
        let x_l = random_fill(&[1, 4, 2, 2], Seed(1)).unwrap();
        assert!(pixelwise_attention(&x_in, &x_a, &x_l).is_err());
    }

    #[test]
    fn appearance_with_single_basis_is_normalised_column_sum() {
        let x = random_fill(&[5, 3], Seed(4)).unwrap();
        let x = Matrix::new(5, 3, x.into_data()).unwrap();
        let map = AttentionMap { mat: Matrix::new(5, 1, vec![1.0; 5]).unwrap() };
        let b = appearance_basis(&x, &map, 1e-12).unwrap();
        let mut sums = [0f64; 3];
        for row in x.iter_rows() {
            for (s, &v) in sums.iter_mut().zip(row) {
                *s += v as f64;
            }
        }
        let n = sums.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (got, s) in b.mat.data().iter().zip(sums) {
            assert!((*got as f64 - s / n).abs() <= 1e-6);
        }
    }

    #[test]
    fn appearance_on_label_features_equals_next_pooled_basis() {
        let x = random_fill(&[12, 5], Seed(8)).unwrap();
        let x = Matrix::new(12, 5, x.into_data()).unwrap();
        let cfg = AttentionConfig { p: 3, ..Default::default() };
        let (b_l, a_b) = extract_bases(&x, &cfg).unwrap();
        let b_a = appearance_basis(&x, &a_b, cfg.eps).unwrap();
        // λ = 1 returns the un-blended pooled basis for the current B_l
        let (b_new, _) = basis_em_step(&x, &b_l, 1.0, cfg.eps).unwrap();
        assert!(b_a.mat.max_abs_diff(&b_new.mat).unwrap() <= 1e-6);
    }

    #[test]
    fn aggregate_single_basis_and_saturation() {
        let x_in = random_fill(&[3, 2, 2], Seed(3)).unwrap();
        let b_l = BasisSet { mat: Matrix::from_rows(&[&[1.0, 0.0, 0.0]]).unwrap() };
        let b_a = BasisSet { mat: Matrix::from_rows(&[&[0.2, -0.4, 0.5]]).unwrap() };
        let (out, a_in) = aggregate(&x_in, &b_l, &b_a).unwrap();
        assert_eq!(out.dims(), &[3, 2, 2]);
        assert!(a_in.mat.data().iter().all(|&v| v == 1.0));
        for pix in 0..4 {
            for ch in 0..3 {
                assert_eq!(out.data()[ch * 4 + pix], b_a.mat.get(0, ch));
            }
        }

        let b_l = BasisSet { mat: Matrix::identity(3) };
        let b_a = BasisSet { mat: Matrix::new(3, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]).unwrap() };
        let x_in = FeatureTensor::new(vec![3, 1, 1], vec![0.0, 60.0, 0.0]).unwrap();
        let (out, _) = aggregate(&x_in, &b_l, &b_a).unwrap();
        for (g, w) in out.data().iter().zip([4.0, 5.0, 6.0]) {
            assert!((g - w).abs() <= 1e-5);
        }
    }

    #[test]
    fn single_pixel_single_reference() {
        let x_in = random_fill(&[4, 1, 1], Seed(1)).unwrap();
        let x_a = random_fill(&[1, 4, 1, 1], Seed(2)).unwrap();
        let x_l = random_fill(&[1, 4, 1, 1], Seed(3)).unwrap();
        let pix = pixelwise_attention(&x_in, &x_a, &x_l).unwrap();
        assert_eq!(pix.data(), x_a.data());

        let cfg = AttentionConfig { p: 1, ..Default::default() };
        let out = compact_attention(&x_in, &x_a, &x_l, &cfg).unwrap();
        let n = x_a.data().iter().map(|v| v * v).sum::<f32>().sqrt();
        for (g, v) in out.x_basis.data().iter().zip(x_a.data()) {
            assert!((g - v / n).abs() <= 1e-6);
        }
    }

    #[test]
    fn pixelwise_saturation() {
        // orthogonal label pixels; the input is a scaled copy of pixel 1
        let x_l = FeatureTensor::new(vec![1, 3, 1, 3], vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let x_a = random_fill(&[1, 3, 1, 3], Seed(5)).unwrap();
        let x_in = FeatureTensor::new(vec![3, 1, 1], vec![0.0, 80.0, 0.0]).unwrap();
        let out = pixelwise_attention(&x_in, &x_a, &x_l).unwrap();
        for ch in 0..3 {
            assert!((out.data()[ch] - x_a.data()[ch * 3 + 1]).abs() <= 1e-6);
        }
    }

    #[test]
    fn config_validation() {
        assert!(AttentionConfig::default().validate().is_ok());
        assert_eq!(AttentionConfig::pose().p, 256);
        assert!(AttentionConfig { p: 0, ..Default::default() }.validate().is_err());
        assert!(AttentionConfig { s: 0, ..Default::default() }.validate().is_err());
        assert!(AttentionConfig { lambda: 1.5, ..Default::default() }.validate().is_err());
        assert!(AttentionConfig { eps: 0.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn column_sum_basis_is_weighted_mean() {
        let x = random_fill(&[7, 3], Seed(2)).unwrap();
        let x = Matrix::new(7, 3, x.into_data()).unwrap();
        let map = AttentionMap { mat: Matrix::new(7, 1, vec![1.0; 7]).unwrap() };
        let b = appearance_basis_with(&x, &map, 1e-12, NormKind::ColumnSum, &mut NoMeter).unwrap();
        for ch in 0..3 {
            let mean = x.iter_rows().map(|r| r[ch] as f64).sum::<f64>() / 7.0;
            assert!((b.mat.get(0, ch) as f64 - mean).abs() <= 1e-6);
        }
        let cfg = AttentionConfig { p: 2, norm: NormKind::ColumnSum, ..Default::default() };
        let x_in = random_fill(&[3, 2, 2], Seed(0)).unwrap();
        let refs = random_fill(&[2, 3, 2, 2], Seed(1)).unwrap();
        let out = compact_attention(&x_in, &refs, &refs, &cfg).unwrap();
        assert!(out.x_basis.data().iter().all(|v| v.is_finite()));
    }
}
