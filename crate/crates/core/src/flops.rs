//! Closed-form operation counts.
//!
//! Counted units are matrix-product multiply-adds and softmax exponentials;
//! normalisation passes and reshapes are not counted. With
//! `n = m·h·w` reference pixels and `q = h·w` input pixels:
//!
//! ```text
//! pixel-wise   2·q·n·c                      multiply-adds
//!            + q·n                          exponentials
//!
//! compact      (2·s + 2)·n·p·c              extraction (s steps of two
//!                                           products, the final map, B_a)
//!            + 2·q·p·c                      aggregation
//!            + (s + 1)·n·p + q·p            exponentials
//! ```

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Compact,
    Pixelwise,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Compact => "compact",
            Method::Pixelwise => "pixelwise",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Extents {
    pub m: u64,
    pub c: u64,
    pub h: u64,
    pub w: u64,
    pub p: u64,
    pub s: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FlopEstimate {
    /// Multiply-adds in the basis extraction stage (zero for pixel-wise).
    pub extraction: u64,
    /// Multiply-adds in the input-side attention stage.
    pub aggregation: u64,
    pub exps: u64,
}

impl FlopEstimate {
    pub fn mul_adds(&self) -> u64 {
        self.extraction + self.aggregation
    }

    pub fn total(&self) -> u64 {
        self.mul_adds() + self.exps
    }
}

pub fn flop_estimate(method: Method, e: Extents) -> FlopEstimate {
    let hw = e.h * e.w;
    let hmw = e.m * hw;
    match method {
        Method::Pixelwise => FlopEstimate { extraction: 0, aggregation: 2 * hw * hmw * e.c, exps: hw * hmw },
        Method::Compact => FlopEstimate {
            extraction: (2 * e.s + 2) * hmw * e.p * e.c,
            aggregation: 2 * hw * e.p * e.c,
            exps: (e.s + 1) * hmw * e.p + hw * e.p,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: Extents = Extents { m: 2, c: 16, h: 8, w: 8, p: 4, s: 3 };

    #[test]
    fn pixelwise_hand_value() {
        assert_eq!(flop_estimate(Method::Pixelwise, BASE).total(), 270_336);
    }

    #[test]
    fn compact_aggregation_unit_case() {
        let e = Extents { m: 1, c: 1, h: 1, w: 1, p: 1, s: 1 };
        assert_eq!(flop_estimate(Method::Compact, e).aggregation, 2);
    }

    #[test]
    fn increasing_in_each_extent() {
        let bump: [fn(&mut Extents); 6] = [
            |e| e.m += 1,
            |e| e.c += 1,
            |e| e.h += 1,
            |e| e.w += 1,
            |e| e.p += 1,
            |e| e.s += 1,
        ];
        for (i, f) in bump.iter().enumerate() {
            let mut e = BASE;
            f(&mut e);
            assert!(flop_estimate(Method::Compact, e).total() > flop_estimate(Method::Compact, BASE).total());
            // pixel-wise does not depend on p or s
            if i < 4 {
                assert!(flop_estimate(Method::Pixelwise, e).total() > flop_estimate(Method::Pixelwise, BASE).total());
            }
        }
    }

    #[test]
    fn ratio_grows_with_m() {
        let mut last = 0.0;
        for m in [1, 2, 4, 8, 16, 32] {
            let e = Extents { m, c: 64, h: 16, w: 16, p: 32, s: 3 };
            let r = flop_estimate(Method::Pixelwise, e).total() as f64 / flop_estimate(Method::Compact, e).total() as f64;
            assert!(r > last);
            last = r;
        }
    }
}
