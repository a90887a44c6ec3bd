//! Special functions, gamma-distribution moments and entropies, and the
//! l1/l2 sparsity measure.
//!
//! `digamma` and `ln_gamma` shift the argument upward with the recurrence
//! until it reaches 8 and then sum the asymptotic series. The leading
//! Stirling term of `ln_gamma` is carried in double-double arithmetic, which
//! keeps the result within rounding of the true value even where
//! `ln Γ(x)` is in the millions.

use crate::error::{check_positive, Error, Result};
use crate::matrix::Matrix;

/// Threshold above which the asymptotic series is used directly.
const ASYMPTOTIC_START: f64 = 8.0;

/// B_{2k} / (2k) for k = 1..=7.
const DIGAMMA_SERIES: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
];

/// B_{2k} / (2k (2k - 1)) for k = 1..=8.
const STIRLING_SERIES: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
];

const HALF_LN_2PI: Dd = Dd {
    hi: 0.918_938_533_204_672_8,
    lo: -3.878_294_158_067_241_4e-17,
};
const LN2: Dd = Dd {
    hi: core::f64::consts::LN_2,
    lo: 2.319_046_813_846_299_6e-17,
};

/// Digamma function ψ(x) = d/dx ln Γ(x) for x > 0.
pub fn digamma(x: f64) -> Result<f64> {
    check_positive("digamma argument", x)?;
    Ok(digamma_unchecked(x))
}

pub(crate) fn digamma_unchecked(mut x: f64) -> f64 {
    let mut shift = 0.0;
    while x < ASYMPTOTIC_START {
        shift += 1.0 / x;
        x += 1.0;
    }
    let inv2 = 1.0 / (x * x);
    let mut series = 0.0;
    for &c in DIGAMMA_SERIES.iter().rev() {
        series = series * inv2 + c;
    }
    libm::log(x) - 0.5 / x - series * inv2 - shift
}

/// Natural logarithm of the gamma function for x > 0.
pub fn ln_gamma(x: f64) -> Result<f64> {
    check_positive("ln_gamma argument", x)?;
    Ok(ln_gamma_unchecked(x))
}

pub(crate) fn ln_gamma_unchecked(x: f64) -> f64 {
    if x >= ASYMPTOTIC_START {
        return stirling(x).to_f64();
    }
    let mut y = x;
    let mut product = Dd::from_f64(1.0);
    while y < ASYMPTOTIC_START {
        product = product.mul_f64(y);
        y += 1.0;
    }
    let ln_product = ln_dd(product.hi).add(Dd::from_f64(product.lo / product.hi));
    stirling(y).add(ln_product.neg()).to_f64()
}

/// Stirling series for ln Γ(y), y ≥ 8.
fn stirling(y: f64) -> Dd {
    let inv = 1.0 / y;
    let inv2 = inv * inv;
    let mut series = 0.0;
    for &c in STIRLING_SERIES.iter().rev() {
        series = series * inv2 + c;
    }
    series *= inv;
    if y > 1e15 {
        // Beyond this the split in `two_prod` loses range and the
        // result's ulp dwarfs any extra precision anyway.
        let ln_y = libm::log(y);
        return Dd::from_f64((y - 0.5) * ln_y - y + HALF_LN_2PI.hi + series);
    }
    ln_dd(y)
        .mul_f64(y - 0.5)
        .add(Dd::from_f64(-y))
        .add(HALF_LN_2PI)
        .add(Dd::from_f64(series))
}

/// ⟨ln x⟩ of a gamma distribution with the given shape and scale.
pub fn gamma_log_mean(shape: f64, scale: f64) -> Result<f64> {
    check_positive("gamma shape", shape)?;
    check_positive("gamma scale", scale)?;
    Ok(digamma_unchecked(shape) + libm::log(scale))
}

/// Differential entropy of a gamma distribution (shape `a`, scale `b`):
/// -(a-1)ψ(a) + ln b + a + ln Γ(a).
pub fn gamma_entropy(a: f64, b: f64) -> Result<f64> {
    check_positive("gamma shape", a)?;
    check_positive("gamma scale", b)?;
    Ok(gamma_entropy_unchecked(a, b))
}

pub(crate) fn gamma_entropy_unchecked(a: f64, b: f64) -> f64 {
    -(a - 1.0) * digamma_unchecked(a) + libm::log(b) + a + ln_gamma_unchecked(a)
}

/// ⟨ln 𝒢(x | a, b)⟩ under a distribution with mean `mean` and log-mean
/// `log_mean`: -⟨x⟩/b + (a-1)⟨ln x⟩ - a ln b - ln Γ(a).
pub(crate) fn gamma_expected_log_density(a: f64, b: f64, mean: f64, log_mean: f64) -> f64 {
    -mean / b + (a - 1.0) * log_mean - a * libm::log(b) - ln_gamma_unchecked(a)
}

/// Hoyer's sparsity of a vector:
/// (√n − ‖v‖₁/‖v‖₂) / (√n − 1), which is 1 for a single nonzero and 0 when
/// all magnitudes are equal.
pub fn hoyer_sparsity(v: &[f64]) -> Result<f64> {
    let n = v.len();
    if n < 2 {
        return Err(Error::InvalidDimension(
            "sparsity needs at least two elements",
        ));
    }
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    let l2 = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
    if l2 == 0.0 {
        return Err(Error::ZeroInput("sparsity"));
    }
    let sqrt_n = libm::sqrt(n as f64);
    let s = (sqrt_n - l1 / l2) / (sqrt_n - 1.0);
    Ok(s.clamp(0.0, 1.0))
}

/// Hoyer's sparsity of a matrix vectorized by appending its columns.
pub fn matrix_hoyer_sparsity(m: &Matrix) -> Result<f64> {
    hoyer_sparsity(&m.column_major())
}

/// Double-double value `hi + lo` with |lo| ≤ ulp(hi)/2.
#[derive(Clone, Copy, Debug)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    fn add(self, other: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, other.hi);
        let (hi, lo) = quick_two_sum(s, e + self.lo + other.lo);
        Dd { hi, lo }
    }

    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    fn mul_f64(self, x: f64) -> Dd {
        let (p, e) = two_prod(self.hi, x);
        let (hi, lo) = quick_two_sum(p, e + self.lo * x);
        Dd { hi, lo }
    }
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn split(a: f64) -> (f64, f64) {
    let c = 134_217_729.0 * a;
    let hi = c - (c - a);
    (hi, a - hi)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    (p, ((ah * bh - p) + ah * bl + al * bh) + al * bl)
}

/// ln y in double-double for normal y > 0, via y = m·2^k and
/// ln m = 2 atanh((m-1)/(m+1)).
fn ln_dd(y: f64) -> Dd {
    let bits = y.to_bits();
    let mut k = ((bits >> 52) & 0x7ff) as i64 - 1023;
    let mut m = f64::from_bits((bits & 0x000f_ffff_ffff_ffff) | (1023u64 << 52));
    if m > core::f64::consts::SQRT_2 {
        m *= 0.5;
        k += 1;
    }
    let num = m - 1.0;
    let (den_hi, den_lo) = two_sum(m, 1.0);
    let s_hi = num / den_hi;
    let (p, e) = two_prod(s_hi, den_hi);
    let s_lo = (((num - p) - e) - s_hi * den_lo) / den_hi;
    let s2 = s_hi * s_hi;
    let mut c = 0.0;
    let mut odd = 41.0;
    while odd > 1.0 {
        c = (c + 1.0 / odd) * s2;
        odd -= 2.0;
    }
    let (hi, lo) = two_sum(2.0 * s_hi, 2.0 * s_hi * c + 2.0 * s_lo * (1.0 + c));
    LN2.mul_f64(k as f64).add(Dd { hi, lo })
}
