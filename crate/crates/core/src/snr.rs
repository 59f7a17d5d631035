//! Per-realization SNR: co-phased (optimal), quantized and direct-only.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};

/// IRS reflection amplitudes and the optional phase resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectionConfig {
    pub beta: Vec<f64>,
    pub quantization_bits: Option<u32>,
}

impl ReflectionConfig {
    pub fn new(beta: Vec<f64>, quantization_bits: Option<u32>) -> Result<Self> {
        let cfg = Self {
            beta,
            quantization_bits,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `n` elements sharing the amplitude `beta`.
    pub fn uniform(n: usize, beta: f64, quantization_bits: Option<u32>) -> Result<Self> {
        Self::new(vec![beta; n], quantization_bits)
    }

    pub fn num_elements(&self) -> usize {
        self.beta.len()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(i) = self.beta.iter().position(|b| !(0.0..=1.0).contains(b)) {
            return Err(Error::invalid(format!("beta[{i}]"), "must lie in [0, 1]"));
        }
        if self.quantization_bits == Some(0) {
            return Err(Error::invalid("quantization_bits", "must be at least 1"));
        }
        Ok(())
    }

    fn check_len(&self, real: &ChannelRealization) -> Result<()> {
        if real.num_elements() != self.beta.len() {
            return Err(Error::LengthMismatch {
                what: "channel realization",
                got: real.num_elements(),
                expected: self.beta.len(),
            });
        }
        Ok(())
    }
}

/// SNRs of one realization, all linear.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrSample {
    pub gamma_opt: f64,
    pub gamma_quant: Option<f64>,
    pub gamma_direct: f64,
    pub gbar: f64,
}

/// Wraps an angle into `[-π, π)`.
pub fn wrap_phase(theta: f64) -> f64 {
    let w = (theta + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid may round up to exactly 2π
    if w >= PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Co-phasing shifts `θ_n* = θ_u - (θ_{g_n} + θ_{h_n})`, wrapped.
pub fn optimal_phases(real: &ChannelRealization) -> Vec<f64> {
    real.theta_g
        .iter()
        .zip(&real.theta_h)
        .map(|(g, h)| wrap_phase(real.theta_u - (g + h)))
        .collect()
}

/// SNR for arbitrary IRS phase shifts (full complex sum).
pub fn snr_with_phases(real: &ChannelRealization, beta: &[f64], phases: &[f64], gbar: f64) -> Result<f64> {
    if phases.len() != real.num_elements() || beta.len() != real.num_elements() {
        return Err(Error::LengthMismatch {
            what: "phase vector",
            got: phases.len(),
            expected: real.num_elements(),
        });
    }
    let (mut re, mut im) = (real.lambda_u * real.theta_u.cos(), real.lambda_u * real.theta_u.sin());
    for i in 0..phases.len() {
        let amp = beta[i] * real.lambda_g[i] * real.lambda_h[i];
        let phi = phases[i] + real.theta_g[i] + real.theta_h[i];
        re += amp * phi.cos();
        im += amp * phi.sin();
    }
    Ok(gbar * (re * re + im * im))
}

/// `γ* = γ̄ (λ_u + Σ β_n λ_{g_n} λ_{h_n})²`.
pub fn snr_optimal(real: &ChannelRealization, cfg: &ReflectionConfig, gbar: f64) -> Result<f64> {
    cfg.check_len(real)?;
    let r = real.lambda_u + real.cascaded_sum(&cfg.beta);
    Ok(gbar * r * r)
}

/// SNR with the direct links only.
pub fn snr_direct(real: &ChannelRealization, gbar: f64) -> f64 {
    gbar * real.lambda_u * real.lambda_u
}

/// Maximum quantization error `τ = π / 2^B`.
pub fn quantization_step_half(bits: u32) -> f64 {
    PI / 2f64.powi(bits as i32)
}

/// Nearest point of the grid `π q / 2^{B-1}`, `q ∈ {0, ±1, …, ±2^{B-1}}`.
///
/// Returns the quantized phase wrapped into `[-π, π)` and the error
/// `ε = θ - π q / 2^{B-1}` (taken before wrapping, so `|ε| <= π / 2^B`).
/// Exact midpoints go to the candidate with the smaller `|q|`.
pub fn quantize_phase(theta: f64, bits: u32) -> (f64, f64) {
    assert!(bits >= 1, "quantize_phase needs at least one bit");
    let half_levels = 2f64.powi(bits as i32 - 1);
    let step = PI / half_levels;
    let r = theta / step;
    let q = (r.signum() * (r.abs() - 0.5).ceil()).clamp(-half_levels, half_levels);
    let grid = q * step;
    (wrap_phase(grid), theta - grid)
}

/// In-phase/quadrature parts of the reflected sum under phase errors `eps`.
pub fn error_sums(real: &ChannelRealization, beta: &[f64], eps: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let mut y_r = 0.0;
    let mut y_i = 0.0;
    for (((b, g), h), e) in beta.iter().zip(&real.lambda_g).zip(&real.lambda_h).zip(eps) {
        let amp = b * g * h;
        y_r += amp * e.cos();
        y_i += amp * e.sin();
    }
    (y_r, y_i)
}

/// `γ̂* = γ̄ ((λ_u + Y_R)² + Y_I²)` with the errors of the actual quantizer.
pub fn snr_quantized(real: &ChannelRealization, cfg: &ReflectionConfig, gbar: f64) -> Result<f64> {
    cfg.check_len(real)?;
    let bits = cfg
        .quantization_bits
        .ok_or_else(|| Error::invalid("quantization_bits", "required for quantized SNR"))?;
    let eps = optimal_phases(real).into_iter().map(|t| quantize_phase(t, bits).1);
    let (y_r, y_i) = error_sums(real, &cfg.beta, eps);
    let a = real.lambda_u + y_r;
    Ok(gbar * (a * a + y_i * y_i))
}

/// All SNR figures of one realization.
pub fn evaluate(real: &ChannelRealization, cfg: &ReflectionConfig, gbar: f64) -> Result<SnrSample> {
    let gamma_quant = match cfg.quantization_bits {
        Some(_) => Some(snr_quantized(real, cfg, gbar)?),
        None => None,
    };
    Ok(SnrSample {
        gamma_opt: snr_optimal(real, cfg, gbar)?,
        gamma_quant,
        gamma_direct: snr_direct(real, gbar),
        gbar,
    })
}
