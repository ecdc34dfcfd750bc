//! Operation counting hooks.
//!
//! Kernels take a `&mut impl OpMeter` and report every multiply-add and every
//! softmax exponential as it executes. [`NoMeter`] compiles to nothing.

pub trait OpMeter {
    fn mul_add(&mut self);
    fn exp(&mut self);
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NoMeter;

impl OpMeter for NoMeter {
    #[inline(always)]
    fn mul_add(&mut self) {}
    #[inline(always)]
    fn exp(&mut self) {}
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCount {
    pub mul_adds: u64,
    pub exps: u64,
}

impl OpCount {
    pub fn total(&self) -> u64 {
        self.mul_adds + self.exps
    }
}

impl OpMeter for OpCount {
    #[inline]
    fn mul_add(&mut self) {
        self.mul_adds += 1;
    }
    #[inline]
    fn exp(&mut self) {
        self.exps += 1;
    }
}
