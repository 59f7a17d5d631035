//! Closed-form statistics of the co-phased SNR.
//!
//! The reflected sum `Y = Σ β_n λ_{g_n} λ_{h_n}` is replaced by a Gaussian
//! truncated to `[0, ∞)` (`Ỹ`), and `R̃ = λ_u + Ỹ` is the amplitude whose
//! square, scaled by `γ̄`, approximates the optimal SNR.
//!
//! Two formula sets are available through [`FormulaMode`]:
//!
//! * `AsPrinted` transcribes the published constants literally, including
//!   `Δ = (1 - 1/(2σ²)) 2σ² a`, the `(erf(d) + 1)` upper-limit form, the
//!   `−μ_Y/(2σ_Y²)` kernel argument and the `ξ_u + μ_u²` direct-link term.
//! * `Rederived` (default) evaluates the exact density of `λ_u + Ỹ`: the
//!   convolution runs over `[0, x]`, the exponent constant is `σ²/ξ_u`,
//!   the kernel argument is `−μ_Y/√(2σ_Y²)` and `E[λ_u²] = 2ξ_u`.

use std::f64::consts::{LN_2, PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::channel::LinkGains;
use crate::error::{Error, Result};
use crate::snr::{quantization_step_half, ReflectionConfig};
use crate::specfun::{binomial, erf, erf_diff, gamma_fn, gaussian_q, i_kernel, ln_erfc};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormulaMode {
    AsPrinted,
    #[default]
    Rederived,
}

impl std::str::FromStr for FormulaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "as-printed" => Ok(FormulaMode::AsPrinted),
            "rederived" => Ok(FormulaMode::Rederived),
            other => Err(Error::invalid("mode", format!("unknown formula mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for FormulaMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FormulaMode::AsPrinted => "as-printed",
            FormulaMode::Rederived => "rederived",
        })
    }
}

/// Moments and derived constants shared by every closed form.
///
/// `sigma2_y == 0` is the degenerate case of a deterministic `Ỹ = μ_Y`
/// (direct-only links when `μ_Y = 0`); the Gaussian constants are then
/// unused and set to zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CltMoments {
    pub mu_y: f64,
    pub sigma2_y: f64,
    pub psi: f64,
    pub mu_u: f64,
    pub xi_u: f64,
    pub a: f64,
    pub rho: f64,
    /// `Δ` with the published constants.
    pub delta: f64,
    pub lambda_c: f64,
}

impl CltMoments {
    pub fn from_parts(mu_y: f64, sigma2_y: f64, xi_u: f64) -> Result<Self> {
        if !(xi_u > 0.0 && xi_u.is_finite()) {
            return Err(Error::invalid("xi_u", "must be positive"));
        }
        if !(mu_y >= 0.0 && mu_y.is_finite()) {
            return Err(Error::invalid("mu_y", "must be non-negative"));
        }
        if !(sigma2_y >= 0.0 && sigma2_y.is_finite()) {
            return Err(Error::invalid("sigma2_y", "must be non-negative"));
        }
        let mu_u = (PI * xi_u / 2.0).sqrt();
        if sigma2_y == 0.0 {
            return Ok(Self {
                mu_y,
                sigma2_y,
                psi: 1.0,
                mu_u,
                xi_u,
                a: 0.0,
                rho: 0.0,
                delta: 0.0,
                lambda_c: 0.0,
            });
        }
        let psi = 1.0 / gaussian_q(-mu_y / sigma2_y.sqrt());
        let a = 1.0 / (2.0 * xi_u) + 1.0 / (2.0 * sigma2_y);
        let rho = psi / (2.0 * a * xi_u * (2.0 * PI * sigma2_y).sqrt());
        let delta = (1.0 - 1.0 / (2.0 * sigma2_y)) * 2.0 * sigma2_y * a;
        let lambda_c = 2.0 * sigma2_y * rho * (PI * a).sqrt();
        Ok(Self {
            mu_y,
            sigma2_y,
            psi,
            mu_u,
            xi_u,
            a,
            rho,
            delta,
            lambda_c,
        })
    }

    /// Direct links only: `Ỹ ≡ 0`, `R̃ = λ_u`.
    pub fn direct_only(xi_u: f64) -> Result<Self> {
        Self::from_parts(0.0, 0.0, xi_u)
    }

    pub fn is_degenerate(&self) -> bool {
        self.sigma2_y == 0.0
    }

    /// `Σ β_n² ξ_{g_n} ξ_{h_n}`.
    pub fn sum_beta2_xi(&self) -> f64 {
        4.0 * self.sigma2_y / (16.0 - PI * PI)
    }
}

/// CLT moments of the reflected sum for the given link gains.
pub fn clt_moments(gains: &LinkGains, cfg: &ReflectionConfig) -> Result<CltMoments> {
    cfg.validate()?;
    if cfg.num_elements() == 0 {
        return Err(Error::invalid(
            "reflection config",
            "CLT moments need N >= 1; use CltMoments::direct_only for N = 0",
        ));
    }
    let root = (gains.xi_g * gains.xi_h).sqrt();
    let prod = gains.xi_g * gains.xi_h;
    let mu_y = cfg.beta.iter().map(|b| PI * b * root / 2.0).sum();
    let sigma2_y = cfg.beta.iter().map(|b| b * b * prod * (16.0 - PI * PI) / 4.0).sum();
    CltMoments::from_parts(mu_y, sigma2_y, gains.xi_u)
}

/// Density of the truncated Gaussian `Ỹ`.
pub fn pdf_y(y: f64, m: &CltMoments) -> f64 {
    if y < 0.0 || m.is_degenerate() {
        return 0.0;
    }
    let s2 = m.sigma2_y;
    m.psi / (2.0 * PI * s2).sqrt() * (-(y - m.mu_y).powi(2) / (2.0 * s2)).exp()
}

fn rayleigh_pdf(x: f64, xi: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x / xi * (-x * x / (2.0 * xi)).exp()
    }
}

fn rayleigh_cdf(x: f64, xi: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -(-x * x / (2.0 * xi)).exp_m1()
    }
}

/// Scaled offset `d = (x - μ_Y) / (2σ_Y² √a)`.
fn scaled_offset(x: f64, m: &CltMoments) -> f64 {
    (x - m.mu_y) / (2.0 * m.sigma2_y * m.a.sqrt())
}

/// Density of `R̃ = λ_u + Ỹ`.
pub fn pdf_r(x: f64, m: &CltMoments, mode: FormulaMode) -> f64 {
    if m.is_degenerate() {
        return rayleigh_pdf(x - m.mu_y, m.xi_u);
    }
    match mode {
        FormulaMode::Rederived => pdf_r_rederived(x, m),
        FormulaMode::AsPrinted => pdf_r_as_printed(x, m),
    }
}

fn pdf_r_rederived(x: f64, m: &CltMoments) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let (mu, s2, xi) = (m.mu_y, m.sigma2_y, m.xi_u);
    let d = scaled_offset(x, m);
    let boundary = (-(x - mu).powi(2) / (2.0 * s2)).exp() - (-x * x / (2.0 * xi) - mu * mu / (2.0 * s2)).exp();
    let gauss = (-(x - mu).powi(2) / (2.0 * (s2 + xi))).exp();
    let window = erf_diff(-d, m.a.sqrt() * x - d);
    let f = m.rho * boundary + m.rho * PI.sqrt() * d * gauss * window;
    f.max(0.0)
}

fn pdf_r_as_printed(x: f64, m: &CltMoments) -> f64 {
    let d = scaled_offset(x, m);
    // exp(-Δd²)(erf(d) + 1) in the log domain
    let core = (-m.delta * d * d + ln_erfc(-d)).exp();
    let tail = (-((x - m.mu_y) / (2.0 * m.sigma2_y)).powi(2)).exp();
    PI.sqrt() * m.rho * d * core + m.rho * tail
}

/// CDF of `R̃`.
///
/// `AsPrinted` returns the literal closed form, which can leave `[0, 1]`
/// and is NaN where `√(Δ + 1)` is undefined (`Δ < -1`).
pub fn cdf_r(x: f64, m: &CltMoments, mode: FormulaMode) -> f64 {
    if m.is_degenerate() {
        return rayleigh_cdf(x - m.mu_y, m.xi_u);
    }
    match mode {
        FormulaMode::Rederived => cdf_r_rederived(x, m),
        FormulaMode::AsPrinted => cdf_r_as_printed(x, m),
    }
}

fn cdf_r_rederived(x: f64, m: &CltMoments) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let (mu, s2, xi, a) = (m.mu_y, m.sigma2_y, m.xi_u, m.a);
    let sigma = s2.sqrt();
    // ∫_0^x f_Ỹ(y) dy
    let z0 = -mu / sigma;
    let z1 = (x - mu) / sigma;
    let mass = m.psi * 0.5 * erf_diff(z0 / SQRT_2, z1 / SQRT_2);
    // ∫_0^x f_Ỹ(y) exp(-(x - y)²/(2ξ)) dy
    let y0 = (mu / s2 + x / xi) / (2.0 * a);
    let ra = a.sqrt();
    let overlap = m.psi / (2.0 * (1.0 + s2 / xi).sqrt())
        * (-(x - mu).powi(2) / (2.0 * (s2 + xi))).exp()
        * erf_diff(-ra * y0, ra * (x - y0));
    (mass - overlap).clamp(0.0, 1.0)
}

fn cdf_r_as_printed(x: f64, m: &CltMoments) -> f64 {
    let (s2, delta, lam) = (m.sigma2_y, m.delta, m.lambda_c);
    let d = scaled_offset(x, m);
    let root = (delta + 1.0).sqrt();
    let i_a = lam * (-delta * d).exp() * erf(d + 1.0) / (2.0 * delta)
        + lam * (1.0 - erf(d * root)) / (2.0 * delta * root);
    let i_b = (PI * s2 / 2.0).sqrt() * m.rho * (1.0 - erf((2.0 * s2.sqrt() * m.a).sqrt() * d));
    1.0 - (i_a + i_b)
}

/// `E[λ_u^n] = (2ξ_u)^{n/2} Γ(n/2 + 1)`.
pub fn moment_lambda_u(n: u32, xi_u: f64) -> Result<f64> {
    if !(xi_u > 0.0) {
        return Err(Error::invalid("xi_u", "must be positive"));
    }
    Ok((2.0 * xi_u).powf(n as f64 / 2.0) * gamma_fn(n as f64 / 2.0 + 1.0)?)
}

/// `E[Ỹ^n]` for `n <= 4` through the incomplete-Gamma kernel.
pub fn moment_y_trunc(n: u32, m: &CltMoments, mode: FormulaMode) -> Result<f64> {
    if n > 4 {
        return Err(Error::invalid("n", format!("moment order {n} outside 0..=4")));
    }
    if m.is_degenerate() {
        return Ok(m.mu_y.powi(n as i32));
    }
    let two_s2 = 2.0 * m.sigma2_y;
    let t0 = match mode {
        FormulaMode::Rederived => -m.mu_y / two_s2.sqrt(),
        FormulaMode::AsPrinted => -m.mu_y / two_s2,
    };
    let mut sum = 0.0;
    for i in 0..=n {
        sum += binomial(n, i) * two_s2.powf((n - i) as f64 / 2.0) * m.mu_y.powi(i as i32) * i_kernel(n - i, t0)?;
    }
    Ok(m.psi / (2.0 * PI.sqrt()) * sum)
}

/// `E[R̃²]` as used by the upper bound.
pub fn second_moment_r(m: &CltMoments, mode: FormulaMode) -> f64 {
    let direct = match mode {
        FormulaMode::AsPrinted => m.xi_u + m.mu_u * m.mu_u,
        FormulaMode::Rederived => 2.0 * m.xi_u,
    };
    direct + m.sigma2_y + 2.0 * m.mu_u * m.mu_y + m.mu_y * m.mu_y
}

/// `E[R̃⁴] = Σ_k C(4,k) E[λ_u^{4-k}] E[Ỹ^k]`.
pub fn fourth_moment_r(m: &CltMoments, mode: FormulaMode) -> Result<f64> {
    let mut sum = 0.0;
    for k in 0..=4 {
        sum += binomial(4, k) * moment_lambda_u(4 - k, m.xi_u)? * moment_y_trunc(k, m, mode)?;
    }
    Ok(sum)
}

fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / LN_2
}

/// `γ̄` together with the amplitude statistics it scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrDistribution {
    pub moments: CltMoments,
    pub gbar: f64,
    pub mode: FormulaMode,
}

impl SnrDistribution {
    pub fn new(moments: CltMoments, gbar: f64, mode: FormulaMode) -> Result<Self> {
        if !(gbar > 0.0 && gbar.is_finite()) {
            return Err(Error::invalid("gbar", "average SNR must be positive"));
        }
        Ok(Self { moments, gbar, mode })
    }

    pub fn with_gbar(&self, gbar: f64) -> Result<Self> {
        Self::new(self.moments, gbar, self.mode)
    }

    pub fn pdf(&self, y: f64) -> Result<f64> {
        pdf_snr(y, self)
    }

    pub fn cdf(&self, y: f64) -> Result<f64> {
        cdf_snr(y, self)
    }

    /// `E[γ̃*]`.
    pub fn mean_snr(&self) -> f64 {
        self.gbar * second_moment_r(&self.moments, self.mode)
    }
}

/// Density of `γ̃* = γ̄ R̃²`.
pub fn pdf_snr(y: f64, d: &SnrDistribution) -> Result<f64> {
    if !(y >= 0.0) {
        return Err(Error::invalid("y", format!("SNR must be non-negative, got {y}")));
    }
    if y == 0.0 && d.mode == FormulaMode::Rederived {
        // f_R̃ vanishes quadratically at the origin
        return Ok(0.0);
    }
    let x = (y / d.gbar).sqrt();
    Ok(pdf_r(x, &d.moments, d.mode) / (2.0 * (d.gbar * y).sqrt()))
}

/// `P(γ̃* <= y) = F_R̃(√(y/γ̄))`.
pub fn cdf_snr(y: f64, d: &SnrDistribution) -> Result<f64> {
    if !(y >= 0.0) {
        return Err(Error::invalid("y", format!("SNR must be non-negative, got {y}")));
    }
    Ok(cdf_r((y / d.gbar).sqrt(), &d.moments, d.mode))
}

/// Outage probability `P(γ* <= γ_th)`; zero for negative thresholds.
pub fn outage(gamma_th: f64, d: &SnrDistribution) -> f64 {
    if gamma_th < 0.0 {
        return 0.0;
    }
    cdf_r((gamma_th / d.gbar).sqrt(), &d.moments, d.mode)
}

/// Jensen upper bound `log₂(1 + E[γ̃*])`.
pub fn rate_upper(d: &SnrDistribution) -> f64 {
    log2_1p(d.mean_snr())
}

/// Lower bound `log₂(1 + 1/E[1/γ̃*])` with the second-order expansion
/// `E[1/γ] ≈ 1/E[γ] + Var(γ)/E[γ]³`, i.e. `γ̄ E[R̃²]³ / E[R̃⁴]`.
pub fn rate_lower(d: &SnrDistribution) -> Result<f64> {
    let m2 = second_moment_r(&d.moments, d.mode);
    let m4 = fourth_moment_r(&d.moments, d.mode)?;
    Ok(log2_1p(d.gbar * m2 * m2 * m2 / m4))
}

/// Upper bound on the rate under uniform phase errors on `[-τ, τ)`,
/// `τ = π / 2^B`.
pub fn rate_upper_quantized(d: &SnrDistribution, bits: u32) -> Result<f64> {
    if bits == 0 {
        return Err(Error::invalid("bits", "must be at least 1"));
    }
    let tau = quantization_step_half(bits);
    Ok(log2_1p(d.gbar * quantized_second_moment(&d.moments, d.mode, tau)))
}

/// `E[|λ_u + Σ β λ_g λ_h e^{jε}|²]` for `ε ~ U[-τ, τ)`; `τ = 0` gives the
/// continuous-phase value.
pub fn quantized_second_moment(m: &CltMoments, mode: FormulaMode, tau: f64) -> f64 {
    let sinc = if tau == 0.0 { 1.0 } else { tau.sin() / tau };
    let direct = match mode {
        FormulaMode::AsPrinted => m.xi_u,
        FormulaMode::Rederived => 2.0 * m.xi_u,
    };
    let coherent = m.mu_y * sinc;
    let spread = 4.0 * m.sigma2_y / (16.0 - PI * PI) * (4.0 - PI * PI * sinc * sinc / 4.0);
    direct + coherent * (2.0 * m.mu_u + coherent) + spread
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad;
    use proptest::prelude::*;

    fn moments(mu: f64, s2: f64, xi: f64) -> CltMoments {
        CltMoments::from_parts(mu, s2, xi).unwrap()
    }

    fn single_element() -> CltMoments {
        let gains = LinkGains::from_rayleigh_params(1.0, 1.0, 1.0).unwrap();
        clt_moments(&gains, &ReflectionConfig::uniform(1, 1.0, None).unwrap()).unwrap()
    }

    /// ∫_0^x f_λu(u) f_Ỹ(x − u) du by quadrature.
    fn convolution_oracle(x: f64, m: &CltMoments) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        quad::integrate(|u| rayleigh_pdf(u, m.xi_u) * pdf_y(x - u, m), 0.0, x, 1e-13)
    }

    #[test]
    fn single_element_moments() {
        let m = single_element();
        assert!((m.mu_y - PI / 2.0).abs() < 1e-15);
        assert!((m.sigma2_y - (16.0 - PI * PI) / 4.0).abs() < 1e-15);
        assert!((1.0..=2.0).contains(&m.psi));
        assert!(m.a > 0.0);
    }

    #[test]
    fn moments_scale_linearly_in_n() {
        let gains = LinkGains::from_rayleigh_params(0.3, 0.4, 0.9).unwrap();
        let one = clt_moments(&gains, &ReflectionConfig::uniform(1, 0.9, None).unwrap()).unwrap();
        let hundred = clt_moments(&gains, &ReflectionConfig::uniform(100, 0.9, None).unwrap()).unwrap();
        assert!((hundred.mu_y / one.mu_y - 100.0).abs() < 1e-12);
        assert!((hundred.sigma2_y / one.sigma2_y - 100.0).abs() < 1e-12);
    }

    #[test]
    fn clt_needs_elements() {
        let gains = LinkGains::from_rayleigh_params(0.3, 0.4, 0.9).unwrap();
        assert!(clt_moments(&gains, &ReflectionConfig::uniform(0, 0.9, None).unwrap()).is_err());
        assert!(CltMoments::from_parts(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn pdf_y_properties() {
        let m = moments(0.8, 1.3, 0.5);
        assert_eq!(pdf_y(-0.1, &m), 0.0);
        let peak = m.psi / (2.0 * PI * m.sigma2_y).sqrt();
        assert!((pdf_y(m.mu_y, &m) - peak).abs() < 1e-15);
        let total = quad::integrate(|y| pdf_y(y, &m), 0.0, m.mu_y + 12.0 * m.sigma2_y.sqrt(), 1e-13);
        assert!((total - 1.0).abs() < 1e-9, "{total}");
    }

    #[test]
    fn pdf_r_matches_convolution() {
        for &(mu, s2, xi) in &[(1.57, 1.53, 0.5), (0.2, 0.5, 2.0), (12.0, 3.0, 0.05), (0.05, 0.01, 0.3)] {
            let m = moments(mu, s2, xi);
            let hi = mu + 10.0 * s2.sqrt() + 8.0 * xi.sqrt();
            for k in 0..50 {
                let x = hi * (k as f64 + 0.5) / 50.0;
                let closed = pdf_r(x, &m, FormulaMode::Rederived);
                let oracle = convolution_oracle(x, &m);
                assert!((closed - oracle).abs() <= 1e-8, "mu={mu} x={x}: {closed} vs {oracle}");
            }
        }
    }

    #[test]
    fn pdf_r_integrates_to_one() {
        let m = moments(1.57, 1.53, 0.5);
        let total = quad::integrate_to_inf(|x| pdf_r(x, &m, FormulaMode::Rederived), 0.0, 1e-12);
        assert!((total - 1.0).abs() < 1e-6);
        assert_eq!(pdf_r(-1.0, &m, FormulaMode::Rederived), 0.0);
        assert!(pdf_r(1e3, &m, FormulaMode::Rederived) < 1e-300);
    }

    #[test]
    fn negligible_direct_link_reduces_to_pdf_y() {
        let m = moments(2.0, 0.4, 1e-12);
        for k in 1..40 {
            let x = k as f64 * 0.1;
            assert!((pdf_r(x, &m, FormulaMode::Rederived) - pdf_y(x, &m)).abs() < 1e-5, "x={x}");
        }
    }

    #[test]
    fn cdf_r_matches_integrated_pdf() {
        for &(mu, s2, xi) in &[(1.57, 1.53, 0.5), (0.2, 0.5, 2.0), (12.0, 3.0, 0.05)] {
            let m = moments(mu, s2, xi);
            let hi = mu + 10.0 * s2.sqrt() + 8.0 * xi.sqrt();
            for k in 0..50 {
                let x = hi * (k as f64 + 0.5) / 50.0;
                let q = quad::integrate(|t| pdf_r(t, &m, FormulaMode::Rederived), 0.0, x, 1e-12);
                let c = cdf_r(x, &m, FormulaMode::Rederived);
                assert!((c - q).abs() <= 1e-6, "x={x}: {c} vs {q}");
            }
            assert!((cdf_r(1e6, &m, FormulaMode::Rederived) - 1.0).abs() < 1e-15);
            assert_eq!(cdf_r(-1e10, &m, FormulaMode::Rederived), 0.0);
        }
    }

    #[test]
    fn cdf_r_monotone() {
        let m = moments(3.0, 0.8, 0.4);
        let mut prev = 0.0;
        for k in 0..1000 {
            let c = cdf_r(k as f64 * 0.01, &m, FormulaMode::Rederived);
            assert!(c >= prev);
            prev = c;
        }
    }

    #[test]
    fn degenerate_is_rayleigh() {
        let m = CltMoments::direct_only(0.7).unwrap();
        let x = 1.1;
        assert!((cdf_r(x, &m, FormulaMode::Rederived) - (1.0 - (-x * x / 1.4f64).exp())).abs() < 1e-15);
        let d = SnrDistribution::new(m, 2.0, FormulaMode::Rederived).unwrap();
        assert!((rate_upper(&d) - log2_1p(2.0 * 1.4)).abs() < 1e-15);
    }

    #[test]
    fn as_printed_transcription() {
        let m = moments(1.0, 2.0, 0.5);
        let x = 1.7;
        let d = (x - 1.0) / (2.0 * 2.0 * m.a.sqrt());
        let expect = PI.sqrt() * m.rho * d * (-m.delta * d * d).exp() * (erf(d) + 1.0)
            + m.rho * (-((x - 1.0) / 4.0f64).powi(2)).exp();
        assert!((pdf_r(x, &m, FormulaMode::AsPrinted) - expect).abs() < 1e-14);
        let root = (m.delta + 1.0).sqrt();
        let ia = m.lambda_c * (-m.delta * d).exp() * erf(d + 1.0) / (2.0 * m.delta)
            + m.lambda_c * (1.0 - erf(d * root)) / (2.0 * m.delta * root);
        let ib = (PI * 2.0 / 2.0).sqrt() * m.rho * (1.0 - erf((2.0 * 2f64.sqrt() * m.a).sqrt() * d));
        assert!((cdf_r(x, &m, FormulaMode::AsPrinted) - (1.0 - ia - ib)).abs() < 1e-14);
        assert!((m.lambda_c - 2.0 * 2.0 * m.rho * (PI * m.a).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn snr_transforms() {
        let m = moments(1.57, 1.53, 0.5);
        let d = SnrDistribution::new(m, 0.1, FormulaMode::Rederived).unwrap();
        assert_eq!(cdf_snr(0.0, &d).unwrap(), cdf_r(0.0, &m, FormulaMode::Rederived));
        assert!(cdf_snr(-1.0, &d).is_err());
        assert!(pdf_snr(-1.0, &d).is_err());
        let total = quad::integrate_to_inf(|y| pdf_snr(y, &d).unwrap(), 0.0, 1e-11);
        assert!((total - 1.0).abs() < 1e-6, "{total}");
        assert!(SnrDistribution::new(m, 0.0, FormulaMode::Rederived).is_err());
    }

    #[test]
    fn outage_limits() {
        let d = SnrDistribution::new(moments(1.57, 1.53, 0.5), 1.0, FormulaMode::Rederived).unwrap();
        assert_eq!(outage(0.0, &d), 0.0);
        assert!((outage(1e12, &d) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn lambda_moments() {
        assert_eq!(moment_lambda_u(0, 0.3).unwrap(), 1.0);
        assert!((moment_lambda_u(2, 1.0).unwrap() - 2.0).abs() < 1e-15);
        for n in 0..=4 {
            let xi = 0.7;
            let q = quad::integrate_to_inf(|x| x.powi(n as i32) * rayleigh_pdf(x, xi), 0.0, 1e-14);
            let c = moment_lambda_u(n, xi).unwrap();
            assert!((c - q).abs() <= 1e-10 * q, "n={n}");
        }
    }

    #[test]
    fn truncated_moments() {
        for &(mu, s2) in &[(1.57, 1.53), (0.1, 2.0), (5.0, 0.2), (0.0, 1.0)] {
            let m = moments(mu, s2, 0.5);
            assert!((moment_y_trunc(0, &m, FormulaMode::Rederived).unwrap() - 1.0).abs() < 1e-9);
            let hi = mu + 14.0 * s2.sqrt();
            for n in 1..=4 {
                let q = quad::integrate(|y| y.powi(n as i32) * pdf_y(y, &m), 0.0, hi, 1e-14);
                let c = moment_y_trunc(n, &m, FormulaMode::Rederived).unwrap();
                assert!((c - q).abs() <= 1e-8 * q, "mu={mu} n={n}: {c} vs {q}");
            }
        }
        let m = moments(50.0, 1.0, 0.5);
        assert!((moment_y_trunc(1, &m, FormulaMode::Rederived).unwrap() - 50.0).abs() < 1e-9);
        assert!(moment_y_trunc(5, &m, FormulaMode::Rederived).is_err());
    }

    #[test]
    fn truncated_variance_matches_oracle() {
        let m = moments(0.4, 0.9, 0.5);
        let m1 = moment_y_trunc(1, &m, FormulaMode::Rederived).unwrap();
        let m2 = moment_y_trunc(2, &m, FormulaMode::Rederived).unwrap();
        let var = quad::integrate(|y| (y - m1).powi(2) * pdf_y(y, &m), 0.0, 15.0, 1e-14);
        assert!((m2 - m1 * m1 - var).abs() < 1e-10);
    }

    #[test]
    fn rate_limits() {
        let m = moments(1.57, 1.53, 0.5);
        let d = SnrDistribution::new(m, 1e-14, FormulaMode::Rederived).unwrap();
        assert!(rate_upper(&d) < 1e-12);
        assert!(rate_lower(&d).unwrap() < 1e-12);
        // vanishing variance and direct link: the two bounds meet
        let m = moments(10.0, 1e-8, 1e-10);
        let d = SnrDistribution::new(m, 3.0, FormulaMode::Rederived).unwrap();
        assert!((rate_upper(&d) - rate_lower(&d).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn quantized_bound_limits() {
        let m = moments(3.0, 1.2, 0.4);
        let printed_limit = m.xi_u + 2.0 * m.mu_u * m.mu_y + m.mu_y * m.mu_y + m.sigma2_y;
        let q = quantized_second_moment(&m, FormulaMode::AsPrinted, 1e-9);
        assert!((q - printed_limit).abs() < 1e-12);
        let q = quantized_second_moment(&m, FormulaMode::Rederived, 0.0);
        assert!((q - second_moment_r(&m, FormulaMode::Rederived)).abs() < 1e-12);
        let d = SnrDistribution::new(m, 1.0, FormulaMode::Rederived).unwrap();
        assert!(rate_upper_quantized(&d, 0).is_err());
    }

    proptest! {
        #[test]
        fn lower_never_exceeds_upper(mu in 0.0f64..50.0, s2 in 1e-4f64..20.0, xi in 1e-4f64..10.0, gbar_db in -30.0f64..30.0) {
            let m = moments(mu, s2, xi);
            let d = SnrDistribution::new(m, 10f64.powf(gbar_db / 10.0), FormulaMode::Rederived).unwrap();
            prop_assert!(rate_lower(&d).unwrap() <= rate_upper(&d) * (1.0 + 1e-12));
        }

        #[test]
        fn quantized_bound_monotone_in_bits(n in 1usize..300, beta in 0.05f64..=1.0, xi_gh in 1e-6f64..4.0, xi in 1e-4f64..10.0, gbar_db in -30.0f64..30.0) {
            let gains = LinkGains::from_rayleigh_params(xi, xi_gh, 1.0).unwrap();
            let m = clt_moments(&gains, &ReflectionConfig::uniform(n, beta, None).unwrap()).unwrap();
            for mode in [FormulaMode::AsPrinted, FormulaMode::Rederived] {
                let d = SnrDistribution::new(m, 10f64.powf(gbar_db / 10.0), mode).unwrap();
                let limit = log2_1p(d.gbar * quantized_second_moment(&m, mode, 0.0));
                let mut prev = 0.0;
                for bits in 1..=10 {
                    let r = rate_upper_quantized(&d, bits).unwrap();
                    prop_assert!(r >= prev);
                    prop_assert!(r <= limit * (1.0 + 1e-12));
                    prev = r;
                }
            }
        }

        #[test]
        fn outage_monotone(mu in 0.01f64..20.0, s2 in 1e-3f64..5.0, xi in 1e-3f64..5.0, th in 1e-3f64..10.0) {
            let m = moments(mu, s2, xi);
            let lo = SnrDistribution::new(m, 0.5, FormulaMode::Rederived).unwrap();
            let hi = SnrDistribution::new(m, 2.0, FormulaMode::Rederived).unwrap();
            prop_assert!(outage(th, &hi) <= outage(th, &lo) + 1e-14);
            prop_assert!(outage(th, &lo) <= outage(2.0 * th, &lo) + 1e-14);
        }
    }
}
