//! Truncated complex power series `c_0 + c_1 z + … + c_M z^M`.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, Error, Result};

/// Default floor on `|c_0|` for [`series_log`].
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TruncatedSeries {
    coeffs: Vec<Complex64>,
}

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

impl TruncatedSeries {
    /// Series of order `coeffs.len() - 1`; `coeffs` must be nonempty.
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        assert!(!coeffs.is_empty(), "a series has at least the constant term");
        TruncatedSeries { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn zero(order: usize) -> Self {
        Self::new(vec![zero(); order + 1])
    }

    /// `z` truncated at `order >= 1`.
    pub fn variable(order: usize) -> Self {
        let mut s = Self::zero(order.max(1));
        s.coeffs[1] = Complex64::new(1.0, 0.0);
        s
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeff(&self, j: usize) -> Complex64 {
        self.coeffs.get(j).copied().unwrap_or_else(zero)
    }

    pub fn truncate(&self, order: usize) -> Self {
        let mut c = self.coeffs.clone();
        c.resize(order + 1, zero());
        Self::new(c)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    /// Coefficients of `f(a z)`.
    pub fn rescale_argument(&self, a: Complex64) -> Self {
        let mut p = Complex64::new(1.0, 0.0);
        Self::new(
            self.coeffs
                .iter()
                .map(|&c| {
                    let v = c * p;
                    p *= a;
                    v
                })
                .collect(),
        )
    }

    /// Complex conjugate of every coefficient.
    pub fn conj(&self) -> Self {
        Self::new(self.coeffs.iter().map(|c| c.conj()).collect())
    }
}

fn common_order(a: &TruncatedSeries, b: &TruncatedSeries) -> usize {
    let m = a.order().min(b.order());
    if a.order() != b.order() {
        log::warn!(
            "series orders differ ({} vs {}); truncating to {m}",
            a.order(),
            b.order()
        );
    }
    m
}

impl Add for &TruncatedSeries {
    type Output = TruncatedSeries;
    fn add(self, rhs: &TruncatedSeries) -> TruncatedSeries {
        let m = common_order(self, rhs);
        TruncatedSeries::new((0..=m).map(|j| self.coeffs[j] + rhs.coeffs[j]).collect())
    }
}

impl Sub for &TruncatedSeries {
    type Output = TruncatedSeries;
    fn sub(self, rhs: &TruncatedSeries) -> TruncatedSeries {
        let m = common_order(self, rhs);
        TruncatedSeries::new((0..=m).map(|j| self.coeffs[j] - rhs.coeffs[j]).collect())
    }
}

impl Mul for &TruncatedSeries {
    type Output = TruncatedSeries;
    fn mul(self, rhs: &TruncatedSeries) -> TruncatedSeries {
        let m = common_order(self, rhs);
        mul_to(self, rhs, m)
    }
}

fn mul_to(a: &TruncatedSeries, b: &TruncatedSeries, m: usize) -> TruncatedSeries {
    let mut out = vec![zero(); m + 1];
    for (i, &ai) in a.coeffs.iter().enumerate().take(m + 1) {
        if ai == zero() {
            continue;
        }
        for (j, &bj) in b.coeffs.iter().enumerate().take(m + 1 - i) {
            out[i + j] += ai * bj;
        }
    }
    TruncatedSeries::new(out)
}

/// `log s` with the principal branch for the constant term.
pub fn series_log(s: &TruncatedSeries, floor: f64) -> Result<TruncatedSeries> {
    let c0 = s.coeffs[0];
    if c0.norm() < floor {
        return Err(Error::DegenerateConstant(c0.norm()));
    }
    let m = s.order();
    let g: Vec<Complex64> = s.coeffs.iter().map(|&c| c / c0).collect();
    let mut f = vec![zero(); m + 1];
    f[0] = c0.ln();
    for n in 1..=m {
        let mut acc = g[n] * n as f64;
        for k in 1..n {
            acc -= f[k] * g[n - k] * k as f64;
        }
        f[n] = acc / n as f64;
    }
    Ok(TruncatedSeries::new(f))
}

pub fn series_exp(s: &TruncatedSeries) -> TruncatedSeries {
    let m = s.order();
    let mut e = vec![zero(); m + 1];
    e[0] = s.coeffs[0].exp();
    for n in 1..=m {
        let mut acc = zero();
        for k in 1..=n {
            acc += s.coeffs[k] * e[n - k] * k as f64;
        }
        e[n] = acc / n as f64;
    }
    TruncatedSeries::new(e)
}

/// `outer ∘ inner` through the smaller of the two orders.
pub fn series_compose(outer: &TruncatedSeries, inner: &TruncatedSeries) -> Result<TruncatedSeries> {
    if inner.coeffs[0] != zero() {
        return invalid("inner series must have zero constant term");
    }
    let m = common_order(outer, inner);
    let mut acc = TruncatedSeries::zero(m);
    for j in (0..=m).rev() {
        acc = mul_to(&acc, inner, m);
        acc.coeffs[0] += outer.coeffs[j];
    }
    Ok(acc)
}

/// Horner evaluation.
pub fn series_eval(s: &TruncatedSeries, z: Complex64) -> Complex64 {
    s.coeffs.iter().rev().fold(zero(), |acc, &c| acc * z + c)
}
