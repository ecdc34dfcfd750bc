//! Wall-clock sweep over the reference count `m`.
//!
//! For every `m` the harness builds one set of seeded inputs and times, on
//! the calling thread:
//!
//! * the full compact attention (basis extraction plus aggregation),
//! * the aggregation stage on its own (bases precomputed),
//! * pixel-wise attention.
//!
//! Each measurement runs one discarded warm-up call, then `repeats` samples;
//! the reported figure is the median sample. Short calls are batched inside
//! a sample so that every sample spans at least [`MIN_SAMPLE`].

use std::hint::black_box;
use std::io::Write;
use std::time::{Duration, Instant};

use compact_attn_core::attention::{aggregate, compact_attention, extract_bases, appearance_basis_with, pixelwise_attention};
use compact_attn_core::flops::{flop_estimate, Extents, Method};
use compact_attn_core::tensor::{flatten_refs, random_fill};
use compact_attn_core::{AttentionConfig, Error as CoreError, FeatureTensor, NoMeter, Seed};

use crate::Result;

pub const MIN_SAMPLE: Duration = Duration::from_millis(10);

/// The aggregation stage is short and its cost does not depend on `m`, so
/// host noise dominates its samples; it takes this many times more samples.
pub const AGGREGATION_SAMPLE_FACTOR: usize = 3;

pub const CSV_HEADER: &str = "method,m,c,h,w,p,s,median_seconds,flops_estimate";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchCase {
    pub m: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub p: usize,
    pub s: usize,
    pub repeats: usize,
    pub seed: Seed,
}

impl Default for BenchCase {
    fn default() -> Self {
        BenchCase { m: 2, c: 64, h: 16, w: 16, p: 32, s: 3, repeats: 5, seed: Seed(42) }
    }
}

impl BenchCase {
    pub fn validate(&self) -> compact_attn_core::Result<()> {
        if self.repeats < 3 {
            return Err(CoreError::InvalidArgument(format!("repeats must be >= 3, got {}", self.repeats)));
        }
        let ext = [self.m, self.c, self.h, self.w, self.p, self.s];
        if ext.contains(&0) {
            return Err(CoreError::InvalidArgument(format!("all extents must be >= 1, got {ext:?}")));
        }
        Ok(())
    }

    pub fn extents(&self) -> Extents {
        let e = |v: usize| v as u64;
        Extents { m: e(self.m), c: e(self.c), h: e(self.h), w: e(self.w), p: e(self.p), s: e(self.s) }
    }

    fn attention_config(&self) -> AttentionConfig {
        AttentionConfig { p: self.p, s: self.s, seed: self.seed, ..AttentionConfig::default() }
    }
}

/// Median and spread of the timing samples of one measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timing {
    pub median_seconds: f64,
    /// Interquartile range divided by the median.
    pub relative_spread: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub method: Method,
    pub extents: Extents,
    pub timing: Timing,
    pub flops_estimate: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    /// One row per method per `m`, compact first.
    pub rows: Vec<BenchRow>,
    /// Aggregation-stage timing per `m`, in sweep order.
    pub aggregation: Vec<(usize, Timing)>,
}

impl BenchResult {
    pub fn row(&self, method: Method, m: usize) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.method == method && r.extents.m == m as u64)
    }

    pub fn aggregation_at(&self, m: usize) -> Option<&Timing> {
        self.aggregation.iter().find(|(mm, _)| *mm == m).map(|(_, t)| t)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.rows {
            let e = r.extents;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{:.9},{}",
                r.method.name(),
                e.m,
                e.c,
                e.h,
                e.w,
                e.p,
                e.s,
                r.timing.median_seconds,
                r.flops_estimate
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Times `f`: one warm-up call, then `repeats` samples of a batch sized so
/// that a sample lasts at least [`MIN_SAMPLE`].
pub fn time_median<T>(repeats: usize, mut f: impl FnMut() -> T) -> Timing {
    let start = Instant::now();
    black_box(f());
    let once = start.elapsed();
    let batch = if once >= MIN_SAMPLE {
        1
    } else {
        (MIN_SAMPLE.as_secs_f64() / once.as_secs_f64().max(1e-9)).ceil() as usize
    };
    let mut samples: Vec<f64> = (0..repeats.max(1))
        .map(|_| {
            let start = Instant::now();
            for _ in 0..batch {
                black_box(f());
            }
            start.elapsed().as_secs_f64() / batch as f64
        })
        .collect();
    samples.sort_by(f64::total_cmp);
    let median = quantile(&samples, 0.5);
    let iqr = quantile(&samples, 0.75) - quantile(&samples, 0.25);
    Timing {
        median_seconds: median,
        relative_spread: if median > 0.0 { iqr / median } else { 0.0 },
        samples: samples.len(),
    }
}

/// Seeded inputs for one case: `x_in` (`c×h×w`), `x_a` and `x_l`
/// (`m×c×h×w`). The streams do not depend on `m` beyond the tensor size.
pub fn case_inputs(case: &BenchCase) -> compact_attn_core::Result<[FeatureTensor; 3]> {
    let (m, c, h, w) = (case.m, case.c, case.h, case.w);
    Ok([
        random_fill(&[c, h, w], case.seed.derive(0))?,
        random_fill(&[m, c, h, w], case.seed.derive(1))?,
        random_fill(&[m, c, h, w], case.seed.derive(2))?,
    ])
}

pub fn run_case(case: &BenchCase) -> Result<(BenchRow, BenchRow, Timing)> {
    case.validate()?;
    let cfg = case.attention_config();
    let [x_in, x_a, x_l] = case_inputs(case)?;

    let compact = time_median(case.repeats, || compact_attention(&x_in, &x_a, &x_l, &cfg));
    let pixel = time_median(case.repeats, || pixelwise_attention(&x_in, &x_a, &x_l));

    let (b_l, a_b) = extract_bases(&flatten_refs(&x_l)?, &cfg)?;
    let b_a = appearance_basis_with(&flatten_refs(&x_a)?, &a_b, cfg.eps, cfg.norm, &mut NoMeter)?;
    // surface kernel errors once instead of timing a failing call
    compact_attention(&x_in, &x_a, &x_l, &cfg)?;
    pixelwise_attention(&x_in, &x_a, &x_l)?;
    aggregate(&x_in, &b_l, &b_a)?;
    let agg = time_median(case.repeats * AGGREGATION_SAMPLE_FACTOR, || aggregate(&x_in, &b_l, &b_a));

    let e = case.extents();
    let row = |method, timing| BenchRow { method, extents: e, timing, flops_estimate: flop_estimate(method, e).total() };
    Ok((row(Method::Compact, compact), row(Method::Pixelwise, pixel), agg))
}

/// Runs [`run_case`] for each `m` in `m_values` with the other fields of
/// `base`.
pub fn run_sweep(base: &BenchCase, m_values: &[usize]) -> Result<BenchResult> {
    let mut rows = Vec::with_capacity(2 * m_values.len());
    let mut aggregation = Vec::with_capacity(m_values.len());
    for &m in m_values {
        let (compact, pixel, agg) = run_case(&BenchCase { m, ..*base })?;
        rows.push(compact);
        rows.push(pixel);
        aggregation.push((m, agg));
    }
    Ok(BenchResult { rows, aggregation })
}
