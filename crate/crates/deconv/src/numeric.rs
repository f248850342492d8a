//! Shared numeric machinery: compensated summation, log-space binomial
//! sums, adaptive quadrature, and deterministic RNG substreams.

pub mod logbinom;
pub mod quad;
pub mod streams;

/// Neumaier-compensated accumulator.
///
/// Keeps a running correction term so that long sums of mixed-magnitude
/// terms lose far less precision than naive accumulation. Summation
/// order is fixed by the caller, which keeps results reproducible.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    correction: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.correction += (self.sum - t) + x;
        } else {
            self.correction += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.correction
    }
}
