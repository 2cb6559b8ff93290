use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar the numerical kernels are written against: `f32` or `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
}

impl<T> Scalar for T where
    T: Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
}

/// Converts an `f64` literal into the working scalar.
#[inline]
pub fn lit<S: Scalar>(x: f64) -> S {
    S::from_f64(x).expect("f64 literal representable in scalar")
}

#[inline]
pub fn from_usize<S: Scalar>(k: usize) -> S {
    S::from_usize(k).expect("index representable in scalar")
}

#[inline]
pub fn to_f64<S: Scalar>(x: S) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Neumaier (improved Kahan) compensated accumulator.
#[derive(Debug, Clone, Copy)]
pub struct CompensatedSum<S> {
    sum: S,
    comp: S,
}

impl<S: Scalar> Default for CompensatedSum<S> {
    fn default() -> Self {
        Self { sum: S::zero(), comp: S::zero() }
    }
}

impl<S: Scalar> CompensatedSum<S> {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: S) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp = self.comp + ((self.sum - t) + x);
        } else {
            self.comp = self.comp + ((x - t) + self.sum);
        }
        self.sum = t;
    }

    pub fn value(&self) -> S {
        self.sum + self.comp
    }
}

impl<S: Scalar> FromIterator<S> for CompensatedSum<S> {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Table of `ln k!` for `k = 0..=max`, accumulated with compensation.
#[derive(Debug, Clone)]
pub struct LogFactorials<S> {
    table: Vec<S>,
}

impl<S: Scalar> LogFactorials<S> {
    pub fn new(max: usize) -> Self {
        let mut table = Vec::with_capacity(max + 1);
        let mut acc = CompensatedSum::new();
        table.push(S::zero());
        for k in 1..=max {
            acc.add(from_usize::<S>(k).ln());
            table.push(acc.value());
        }
        Self { table }
    }

    #[inline]
    pub fn ln_factorial(&self, k: usize) -> S {
        self.table[k]
    }

    /// `ln C(n, k)`; `-inf` when `k > n`.
    #[inline]
    pub fn ln_binomial(&self, n: usize, k: usize) -> S {
        if k > n {
            return S::neg_infinity();
        }
        self.table[n] - self.table[k] - self.table[n - k]
    }

    pub fn max(&self) -> usize {
        self.table.len() - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_factorials_match_direct_products() {
        let lf = LogFactorials::<f64>::new(20);
        let mut f = 1.0f64;
        for k in 1..=20 {
            f *= k as f64;
            assert!((lf.ln_factorial(k) - f.ln()).abs() < 1e-13 * f.ln().max(1.0));
        }
        assert!((lf.ln_binomial(10, 3) - 120f64.ln()).abs() < 1e-13);
        assert_eq!(lf.ln_binomial(3, 5), f64::NEG_INFINITY);
    }

    #[test]
    fn compensated_sum_recovers_cancelled_mass() {
        let xs = [1.0f64, 1e100, 1.0, -1e100];
        let s: CompensatedSum<f64> = xs.iter().copied().collect();
        assert_eq!(s.value(), 2.0);
    }
}
