//! Special functions over real scalars.
//!
//! `erf`, `erfc` and `Γ` are backed by the `libm` port of the FreeBSD/musl
//! routines (about one ulp). The incomplete Gamma functions use the usual
//! split between the power series (`x < s + 1`) and the Legendre continued
//! fraction evaluated with the modified Lentz method.

use std::f64::consts::{PI, SQRT_2};

use thiserror::Error;

/// An argument outside the domain of a special function.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{func}: argument out of domain ({detail})")]
pub struct DomainError {
    pub func: &'static str,
    pub detail: String,
}

impl DomainError {
    fn new(func: &'static str, detail: impl Into<String>) -> Self {
        Self {
            func,
            detail: detail.into(),
        }
    }
}

const MAX_ITER: usize = 10_000;
const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;

/// Error function.
#[inline]
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// Complementary error function, `1 - erf(x)` without cancellation.
#[inline]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// `erf(hi) - erf(lo)` evaluated through `erfc` when both ends sit in the
/// same tail, where the direct difference would cancel.
pub fn erf_diff(lo: f64, hi: f64) -> f64 {
    if lo >= 0.0 && hi >= 0.0 {
        erfc(lo) - erfc(hi)
    } else if lo <= 0.0 && hi <= 0.0 {
        erfc(-hi) - erfc(-lo)
    } else {
        erf(hi) - erf(lo)
    }
}

/// Scaled complementary error function `exp(x²)·erfc(x)`.
pub fn erfcx(x: f64) -> f64 {
    if x < 25.0 {
        return (x * x).exp() * erfc(x);
    }
    // Asymptotic series; at x >= 25 the first five terms are exact to
    // machine precision.
    let inv2 = 1.0 / (2.0 * x * x);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..6 {
        term *= -((2 * k - 1) as f64) * inv2;
        sum += term;
    }
    sum / (x * PI.sqrt())
}

/// `ln(erfc(x))`, finite for every finite `x`.
pub fn ln_erfc(x: f64) -> f64 {
    if x < 25.0 {
        erfc(x).ln()
    } else {
        -x * x + erfcx(x).ln()
    }
}

/// Gaussian Q function, the standard normal upper tail `P(Z > x)`.
#[inline]
pub fn gaussian_q(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// Standard normal CDF `Φ(x) = Q(-x)`.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    gaussian_q(-x)
}

/// Gamma function for positive arguments.
pub fn gamma_fn(t: f64) -> Result<f64, DomainError> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(DomainError::new("gamma", format!("t = {t}, need t > 0")));
    }
    Ok(libm::tgamma(t))
}

/// `ln Γ(t)` for positive arguments.
pub fn ln_gamma(t: f64) -> Result<f64, DomainError> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(DomainError::new("ln_gamma", format!("t = {t}, need t > 0")));
    }
    Ok(libm::lgamma_r(t).0)
}

fn check_inc_args(func: &'static str, s: f64, x: f64) -> Result<(), DomainError> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(DomainError::new(func, format!("s = {s}, need s > 0")));
    }
    if !(x >= 0.0) || x.is_nan() {
        return Err(DomainError::new(func, format!("x = {x}, need x >= 0")));
    }
    Ok(())
}

/// `Σ_k x^k / (s (s+1) ... (s+k))`; `γ(s,x) = x^s e^{-x}` times this sum.
fn lower_series(s: f64, x: f64) -> f64 {
    let mut denom = s;
    let mut term = 1.0 / s;
    let mut sum = term;
    for _ in 0..MAX_ITER {
        denom += 1.0;
        term *= x / denom;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum
}

/// Continued fraction for `Γ(s,x) e^{x} x^{-s}`, valid for `x >= s + 1`.
fn upper_continued_fraction(s: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - s;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// `x^s e^{-x}` computed in the log domain.
fn prefactor(s: f64, x: f64) -> f64 {
    (s * x.ln() - x).exp()
}

/// Lower incomplete Gamma function `γ(s, x) = ∫_0^x t^{s-1} e^{-t} dt`.
pub fn lower_inc_gamma(s: f64, x: f64) -> Result<f64, DomainError> {
    check_inc_args("lower_inc_gamma", s, x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x < s + 1.0 {
        Ok(prefactor(s, x) * lower_series(s, x))
    } else {
        let upper = prefactor(s, x) * upper_continued_fraction(s, x);
        Ok(gamma_fn(s)? - upper)
    }
}

/// Upper incomplete Gamma function `Γ(s, x) = ∫_x^∞ t^{s-1} e^{-t} dt`.
pub fn upper_inc_gamma(s: f64, x: f64) -> Result<f64, DomainError> {
    check_inc_args("upper_inc_gamma", s, x)?;
    if x == 0.0 {
        return gamma_fn(s);
    }
    if x < s + 1.0 {
        Ok(gamma_fn(s)? - prefactor(s, x) * lower_series(s, x))
    } else {
        Ok(prefactor(s, x) * upper_continued_fraction(s, x))
    }
}

/// Kernel `I(m, t)` of the truncated Gaussian moments.
///
/// Equals `2 ∫_t^∞ u^m e^{-u²} du`:
/// `(-1)^m γ((m+1)/2, t²) + Γ((m+1)/2)` for `t <= 0`, otherwise
/// `Γ((m+1)/2, t²)`.
pub fn i_kernel(m: u32, t: f64) -> Result<f64, DomainError> {
    if !t.is_finite() {
        return Err(DomainError::new("i_kernel", format!("t = {t} not finite")));
    }
    let s = (m as f64 + 1.0) / 2.0;
    let t2 = t * t;
    if t <= 0.0 {
        let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
        Ok(sign * lower_inc_gamma(s, t2)? + gamma_fn(s)?)
    } else {
        upper_inc_gamma(s, t2)
    }
}

/// Binomial coefficient for the small orders used by the moment sums.
pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}
