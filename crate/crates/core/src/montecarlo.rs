//! Monte-Carlo trial engine.
//!
//! Every trial draws its envelopes and phases from its own substream, so
//! the per-trial records do not depend on how the trials are scheduled.
//! Records are stored in trial order and reduced sequentially.

use std::f64::consts::LN_2;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{cdf_r, SnrDistribution};
use crate::channel::{sample_phase, sample_rayleigh, LinkGains, RealizationSampler};
use crate::error::{Error, Result};
use crate::snr::{quantization_step_half, quantize_phase, wrap_phase, ReflectionConfig};
use crate::db_to_linear;

const CHUNK: usize = 4096;
const HISTOGRAM_QUANTILE: f64 = 0.9999;

/// How phase errors are produced for the quantized SNR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuantErrorModel {
    /// Quantize the co-phasing shifts with the actual B-bit quantizer.
    #[default]
    Quantizer,
    /// Draw `ε ~ U[-π/2^B, π/2^B)` independently per element.
    Uniform,
}

impl std::str::FromStr for QuantErrorModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quantizer" => Ok(QuantErrorModel::Quantizer),
            "uniform" => Ok(QuantErrorModel::Uniform),
            other => Err(Error::invalid("error_model", format!("unknown error model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub trials: u64,
    pub seed: u64,
    pub gbar_db_grid: Vec<f64>,
    pub gamma_th_db: f64,
    pub quantization_bits: Option<u32>,
    pub histogram_bins: usize,
    #[serde(default)]
    pub error_model: QuantErrorModel,
}

impl SimConfig {
    pub fn new(trials: u64, seed: u64, gbar_db_grid: Vec<f64>) -> Self {
        Self {
            trials,
            seed,
            gbar_db_grid,
            gamma_th_db: 0.0,
            quantization_bits: None,
            histogram_bins: 100,
            error_model: QuantErrorModel::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("trials", "must be at least 1"));
        }
        if self.histogram_bins < 10 {
            return Err(Error::invalid("histogram_bins", "must be at least 10"));
        }
        if self.gbar_db_grid.is_empty() {
            return Err(Error::invalid("gbar_db_grid", "must not be empty"));
        }
        if let Some(i) = self.gbar_db_grid.iter().position(|g| !g.is_finite()) {
            return Err(Error::invalid(format!("gbar_db_grid[{i}]"), "must be finite"));
        }
        if !self.gamma_th_db.is_finite() {
            return Err(Error::invalid("gamma_th_db", "must be finite"));
        }
        if self.quantization_bits == Some(0) {
            return Err(Error::invalid("quantization_bits", "must be at least 1"));
        }
        Ok(())
    }
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

/// Binomial proportion with a normal-approximation 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub p: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Proportion {
    pub fn from_counts(hits: u64, trials: u64) -> Self {
        let n = trials as f64;
        let p = hits as f64 / n;
        let se = (p * (1.0 - p) / n).sqrt();
        Self {
            p,
            se,
            ci_low: (p - 1.96 * se).max(0.0),
            ci_high: (p + 1.96 * se).min(1.0),
        }
    }
}

/// Bin edges and probability mass; the last bin absorbs the overflow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub mass: Vec<f64>,
}

/// Empirical CDF of `γ̄ R²` backed by the sorted samples of `R²`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    sorted_r2: Arc<[f64]>,
    scale: f64,
}

impl Ecdf {
    pub fn len(&self) -> usize {
        self.sorted_r2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted_r2.is_empty()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Sorted amplitude-squared samples (unscaled).
    pub fn sorted_amplitude2(&self) -> &[f64] {
        &self.sorted_r2
    }

    /// Sorted SNR samples.
    pub fn samples(&self) -> impl Iterator<Item = f64> + '_ {
        self.sorted_r2.iter().map(move |v| v * self.scale)
    }

    /// Fraction of samples `<= y`.
    pub fn cdf(&self, y: f64) -> f64 {
        self.count_le(y) as f64 / self.len() as f64
    }

    /// Smallest sample with ECDF `>= p`.
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.len();
        let k = ((p.clamp(0.0, 1.0) * n as f64).ceil() as usize).clamp(1, n);
        self.sorted_r2[k - 1] * self.scale
    }

    fn count_le(&self, y: f64) -> usize {
        self.sorted_r2.partition_point(|v| v * self.scale <= y)
    }
}

/// Mean SNR, rate and outage of one SNR variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean_snr: Estimate,
    pub rate: Estimate,
    pub outage: Proportion,
}

/// Statistics of the co-phased SNR at one `γ̄`, plus the quantized and
/// direct-only variants of the same trials.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalStats {
    pub gbar_db: f64,
    pub gbar: f64,
    pub trials: u64,
    pub mean_snr: Estimate,
    pub rate_mean: Estimate,
    pub outage_rate: Proportion,
    pub histogram: Histogram,
    pub ecdf: Ecdf,
    pub quantized: Option<Summary>,
    pub direct: Summary,
}

impl EmpiricalStats {
    pub fn summary(&self) -> Summary {
        Summary {
            mean_snr: self.mean_snr,
            rate: self.rate_mean,
            outage: self.outage_rate,
        }
    }
}

/// Sample mean and variance with standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleMoments {
    pub mean: f64,
    pub var: f64,
    pub se_mean: f64,
    pub se_var: f64,
}

impl SampleMoments {
    pub fn from_samples(xs: impl Iterator<Item = f64> + Clone) -> Self {
        let (mut n, mut sum) = (0usize, 0.0);
        for x in xs.clone() {
            n += 1;
            sum += x;
        }
        let nf = n as f64;
        let mean = sum / nf;
        let (mut m2, mut m4) = (0.0, 0.0);
        for x in xs {
            let d = x - mean;
            let d2 = d * d;
            m2 += d2;
            m4 += d2 * d2;
        }
        let var = if n > 1 { m2 / (nf - 1.0) } else { 0.0 };
        let mu4 = m4 / nf;
        let pop_var = m2 / nf;
        Self {
            mean,
            var,
            se_mean: (var / nf).sqrt(),
            se_var: ((mu4 - pop_var * pop_var).max(0.0) / nf).sqrt(),
        }
    }
}

/// Output of [`run_trials`]: one [`EmpiricalStats`] per grid point and the
/// sample moments of the reflected sum `Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub stats: Vec<EmpiricalStats>,
    pub cascaded: SampleMoments,
    pub lambda_u: SampleMoments,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Record {
    lambda_u: f64,
    y: f64,
    quant_r2: f64,
}

fn trial_record(
    sampler: &RealizationSampler,
    gains: &LinkGains,
    beta: &[f64],
    quant: Option<(u32, QuantErrorModel)>,
    trial: u64,
) -> Record {
    let Some((bits, model)) = quant else {
        let (lambda_u, y) = sampler.envelope_sum(trial, beta);
        return Record {
            lambda_u,
            y,
            quant_r2: f64::NAN,
        };
    };
    let tau = quantization_step_half(bits);
    let mut env = sampler.envelope_rng(trial);
    let mut ph = sampler.phase_rng(trial);
    let lambda_u = sample_rayleigh(&mut env, gains.xi_u);
    let theta_u = match model {
        QuantErrorModel::Quantizer => sample_phase(&mut ph),
        QuantErrorModel::Uniform => 0.0,
    };
    let (mut y, mut y_r, mut y_i) = (0.0, 0.0, 0.0);
    for &b in beta {
        let h = sample_rayleigh(&mut env, gains.xi_h);
        let g = sample_rayleigh(&mut env, gains.xi_g);
        let amp = b * g * h;
        let eps = match model {
            QuantErrorModel::Quantizer => {
                let th = sample_phase(&mut ph);
                let tg = sample_phase(&mut ph);
                quantize_phase(wrap_phase(theta_u - (tg + th)), bits).1
            }
            QuantErrorModel::Uniform => -tau + 2.0 * tau * ph.random::<f64>(),
        };
        y += amp;
        y_r += amp * eps.cos();
        y_i += amp * eps.sin();
    }
    let re = lambda_u + y_r;
    let quant_r2 = re * re + y_i * y_i;
    debug_assert!(quant_r2 <= (lambda_u + y).powi(2) * (1.0 + 1e-12) + 1e-300);
    Record { lambda_u, y, quant_r2 }
}

fn alloc_records(trials: u64) -> Result<Vec<Record>> {
    let n = usize::try_from(trials).map_err(|_| Error::Resource(format!("{trials} trials exceed the address space")))?;
    let mut v: Vec<Record> = Vec::new();
    v.try_reserve_exact(n)
        .map_err(|e| Error::Resource(format!("cannot allocate {n} trial records: {e}")))?;
    v.resize(n, Record::default());
    Ok(v)
}

fn try_vec(n: usize, what: &str) -> Result<Vec<f64>> {
    let mut v = Vec::new();
    v.try_reserve_exact(n)
        .map_err(|e| Error::Resource(format!("cannot allocate {n} {what}: {e}")))?;
    Ok(v)
}

fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / LN_2
}

fn summarize(r2: &[f64], gbar: f64, gamma_th: f64) -> Summary {
    let n = r2.len() as f64;
    let snr = SampleMoments::from_samples(r2.iter().map(|v| gbar * v));
    let rate = SampleMoments::from_samples(r2.iter().map(|v| log2_1p(gbar * v)));
    let hits = r2.iter().filter(|v| *v * gbar <= gamma_th).count() as u64;
    Summary {
        mean_snr: Estimate {
            mean: snr.mean,
            se: (snr.var / n).sqrt(),
        },
        rate: Estimate {
            mean: rate.mean,
            se: (rate.var / n).sqrt(),
        },
        outage: Proportion::from_counts(hits, r2.len() as u64),
    }
}

fn histogram(ecdf: &Ecdf, bins: usize) -> Histogram {
    let mut top = ecdf.quantile(HISTOGRAM_QUANTILE);
    if !(top > 0.0) {
        top = 1.0;
    }
    let edges: Vec<f64> = (0..=bins).map(|k| top * k as f64 / bins as f64).collect();
    let n = ecdf.len();
    let mut mass = Vec::with_capacity(bins);
    let mut below = 0;
    for (k, &edge) in edges.iter().enumerate().skip(1) {
        let upto = if k == bins {
            n
        } else {
            ecdf.sorted_r2.partition_point(|v| v * ecdf.scale < edge)
        };
        mass.push((upto - below) as f64 / n as f64);
        below = upto;
    }
    Histogram { edges, mass }
}

/// Runs `sim.trials` independent realizations and reduces them at every
/// `γ̄` of the grid.
///
/// The quantized variant is produced when `sim.quantization_bits` (or,
/// failing that, `cfg.quantization_bits`) is set.
pub fn run_trials(gains: &LinkGains, cfg: &ReflectionConfig, sim: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    sim.validate()?;
    let bits = match (sim.quantization_bits, cfg.quantization_bits) {
        (Some(a), Some(b)) if a != b => {
            return Err(Error::invalid(
                "quantization_bits",
                format!("simulation asks for {a} bits but the reflection config has {b}"),
            ))
        }
        (a, b) => a.or(b),
    };
    let quant = bits.map(|b| (b, sim.error_model));
    let sampler = RealizationSampler::new(gains, sim.seed);

    let mut records = alloc_records(sim.trials)?;
    records.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
        let base = (c * CHUNK) as u64;
        for (i, rec) in chunk.iter_mut().enumerate() {
            *rec = trial_record(&sampler, gains, &cfg.beta, quant, base + i as u64);
        }
    });

    let n = records.len();
    let cascaded = SampleMoments::from_samples(records.iter().map(|r| r.y));
    let lambda_u = SampleMoments::from_samples(records.iter().map(|r| r.lambda_u));
    let mut r2 = try_vec(n, "amplitude samples")?;
    r2.extend(records.iter().map(|r| (r.lambda_u + r.y).powi(2)));
    let mut direct = try_vec(n, "direct samples")?;
    direct.extend(records.iter().map(|r| r.lambda_u * r.lambda_u));
    let quant_r2 = match quant {
        Some(_) => {
            let mut q = try_vec(n, "quantized samples")?;
            q.extend(records.iter().map(|r| r.quant_r2));
            Some(q)
        }
        None => None,
    };
    drop(records);

    let gamma_th = db_to_linear(sim.gamma_th_db);
    let mut per_gbar = Vec::with_capacity(sim.gbar_db_grid.len());
    let mut opt_summaries = Vec::with_capacity(sim.gbar_db_grid.len());
    for &db in &sim.gbar_db_grid {
        opt_summaries.push(summarize(&r2, db_to_linear(db), gamma_th));
    }
    let mut sorted = r2;
    sorted.par_sort_unstable_by(f64::total_cmp);
    let sorted: Arc<[f64]> = sorted.into();
    for (&db, opt) in sim.gbar_db_grid.iter().zip(opt_summaries) {
        let gbar = db_to_linear(db);
        let ecdf = Ecdf {
            sorted_r2: Arc::clone(&sorted),
            scale: gbar,
        };
        per_gbar.push(EmpiricalStats {
            gbar_db: db,
            gbar,
            trials: sim.trials,
            mean_snr: opt.mean_snr,
            rate_mean: opt.rate,
            outage_rate: opt.outage,
            histogram: histogram(&ecdf, sim.histogram_bins),
            ecdf,
            quantized: quant_r2.as_deref().map(|q| summarize(q, gbar, gamma_th)),
            direct: summarize(&direct, gbar, gamma_th),
        });
    }
    Ok(SimResult {
        stats: per_gbar,
        cascaded,
        lambda_u,
    })
}

/// Kolmogorov-Smirnov distance between an ECDF and a continuous CDF.
pub fn ks_distance_with(ecdf: &Ecdf, cdf: impl Fn(f64) -> f64) -> f64 {
    let n = ecdf.len();
    if n == 0 {
        return 1.0;
    }
    let nf = n as f64;
    let v = &ecdf.sorted_r2;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < n {
        // step over ties so the ECDF jump is taken once
        let mut j = i + 1;
        while j < n && v[j] == v[i] {
            j += 1;
        }
        let f = cdf(v[i] * ecdf.scale);
        d = d.max(f - i as f64 / nf).max(j as f64 / nf - f);
        i = j;
    }
    d.clamp(0.0, 1.0)
}

/// Sup distance between the empirical CDF of `γ*` and `cdf_snr`.
pub fn ks_distance(stats: &EmpiricalStats, d: &SnrDistribution) -> f64 {
    let scale = stats.ecdf.scale;
    let (m, mode) = (d.moments, d.mode);
    let ecdf = Ecdf {
        sorted_r2: Arc::clone(&stats.ecdf.sorted_r2),
        scale: 1.0,
    };
    // F_γ(γ̄_mc r²) = F_R(√(γ̄_mc r² / γ̄_d))
    let ratio = scale / d.gbar;
    ks_distance_with(&ecdf, |r2| cdf_r((r2 * ratio).sqrt(), &m, mode))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{clt_moments, outage, CltMoments, FormulaMode};
    use crate::snr::{evaluate, snr_quantized};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gains() -> LinkGains {
        LinkGains::from_rayleigh_params(0.8, 0.3, 0.02).unwrap()
    }

    fn sim(trials: u64) -> SimConfig {
        SimConfig::new(trials, 11, vec![-10.0, 0.0, 10.0])
    }

    #[test]
    fn single_trial_direct_only() {
        let g = gains();
        let cfg = ReflectionConfig::uniform(0, 0.9, None).unwrap();
        let s = SimConfig::new(1, 5, vec![3.0]);
        let out = run_trials(&g, &cfg, &s).unwrap();
        let lam = RealizationSampler::new(&g, 5).sample(0, 0).lambda_u;
        let gbar = db_to_linear(3.0);
        assert_eq!(out.stats[0].rate_mean.mean, log2_1p(gbar * lam * lam));
        assert_eq!(out.stats[0].direct.rate.mean, out.stats[0].rate_mean.mean);
    }

    #[test]
    fn records_match_snr_core() {
        let g = gains();
        let cfg = ReflectionConfig::uniform(7, 0.9, Some(2)).unwrap();
        let sampler = RealizationSampler::new(&g, 3);
        for t in 0..200 {
            let rec = trial_record(&sampler, &g, &cfg.beta, Some((2, QuantErrorModel::Quantizer)), t);
            let real = sampler.sample(t, 7);
            let s = evaluate(&real, &cfg, 1.0).unwrap();
            assert!((rec.lambda_u + rec.y).powi(2) - s.gamma_opt <= 1e-12 * s.gamma_opt);
            assert!((rec.quant_r2 - snr_quantized(&real, &cfg, 1.0).unwrap()).abs() <= 1e-12 * s.gamma_opt);
            assert_eq!(rec.lambda_u.powi(2), s.gamma_direct);
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let g = gains();
        let cfg = ReflectionConfig::uniform(2, 0.9, None).unwrap();
        let mut s = sim(10);
        s.trials = 0;
        assert!(run_trials(&g, &cfg, &s).is_err());
        let mut s = sim(10);
        s.histogram_bins = 9;
        assert!(run_trials(&g, &cfg, &s).is_err());
        let mut s = sim(10);
        s.quantization_bits = Some(3);
        let cfg2 = ReflectionConfig::uniform(2, 0.9, Some(2)).unwrap();
        assert!(run_trials(&g, &cfg2, &s).is_err());
    }

    #[test]
    fn huge_trial_count_is_a_typed_error() {
        let g = gains();
        let cfg = ReflectionConfig::uniform(2, 0.9, None).unwrap();
        let s = sim(u64::MAX / 2);
        assert!(matches!(run_trials(&g, &cfg, &s), Err(Error::Resource(_))));
    }

    #[test]
    fn histogram_and_ecdf_invariants() {
        let g = gains();
        let cfg = ReflectionConfig::uniform(16, 0.9, Some(1)).unwrap();
        let out = run_trials(&g, &cfg, &sim(20_000)).unwrap();
        for st in &out.stats {
            let total: f64 = st.histogram.mass.iter().sum();
            assert!((total - 1.0).abs() <= 1e-12, "{total}");
            assert_eq!(st.histogram.edges.len(), st.histogram.mass.len() + 1);
            assert!((0.0..=1.0).contains(&st.outage_rate.p));
            let mut prev = 0.0;
            for k in 0..=50 {
                let c = st.ecdf.cdf(st.ecdf.quantile(1.0) * k as f64 / 50.0);
                assert!(c >= prev);
                prev = c;
            }
            assert_eq!(st.ecdf.cdf(f64::INFINITY), 1.0);
            let q = st.quantized.unwrap();
            assert!(q.mean_snr.mean <= st.mean_snr.mean);
            assert!(st.direct.mean_snr.mean <= st.mean_snr.mean);
        }
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let g = gains();
        let cfg = ReflectionConfig::uniform(9, 0.9, Some(2)).unwrap();
        let s = sim(30_000);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_trials(&g, &cfg, &s).unwrap())
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a, b);
        assert_eq!(a, run(1));
    }

    #[test]
    fn moments_and_outage_agree_with_closed_forms() {
        let g = gains();
        let cfg = ReflectionConfig::uniform(32, 0.9, None).unwrap();
        let n = 200_000;
        let out = run_trials(&g, &cfg, &sim(n)).unwrap();
        let m = clt_moments(&g, &cfg).unwrap();
        assert!((out.cascaded.mean - m.mu_y).abs() < 4.0 * out.cascaded.se_mean);
        assert!((out.cascaded.var - m.sigma2_y).abs() < 4.0 * out.cascaded.se_var);
        assert!((out.lambda_u.mean - m.mu_u).abs() < 4.0 * out.lambda_u.se_mean);
        for st in &out.stats {
            let d = SnrDistribution::new(m, st.gbar, FormulaMode::Rederived).unwrap();
            assert!((st.mean_snr.mean - d.mean_snr()).abs() < 4.0 * st.mean_snr.se);
            let p = outage(1.0, &d);
            let tol = 4.0 * (p * (1.0 - p) / n as f64).sqrt() + 0.1 * p;
            assert!((st.outage_rate.p - p).abs() <= tol, "{} vs {p}", st.outage_rate.p);
        }
    }

    #[test]
    fn ks_self_test_against_exact_sampler() {
        // λ_u + truncated Gaussian has the rederived CDF exactly
        let m = CltMoments::from_parts(1.2, 0.6, 0.4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 100_000;
        let mut v: Vec<f64> = (0..n)
            .map(|_| {
                let lam = sample_rayleigh(&mut rng, m.xi_u);
                let y = loop {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    let y = m.mu_y + m.sigma2_y.sqrt() * z;
                    if y >= 0.0 {
                        break y;
                    }
                };
                (lam + y).powi(2)
            })
            .collect();
        v.sort_unstable_by(f64::total_cmp);
        let ecdf = Ecdf {
            sorted_r2: v.into(),
            scale: 2.0,
        };
        let d = SnrDistribution::new(m, 2.0, FormulaMode::Rederived).unwrap();
        let ks = ks_distance_with(&ecdf, |y| d.cdf(y).unwrap());
        assert!(ks < 1.63 / (n as f64).sqrt(), "{ks}");
    }

    #[test]
    fn ks_degenerate_and_bounds() {
        let ecdf = Ecdf {
            sorted_r2: vec![1.0; 5].into(),
            scale: 1.0,
        };
        let ks = ks_distance_with(&ecdf, |y| (y / 2.0).min(1.0));
        assert!((ks - 0.5).abs() < 1e-15);
        let ks = ks_distance_with(&ecdf, |_| 0.5);
        assert!((0.0..=1.0).contains(&ks));
        let empty = Ecdf {
            sorted_r2: Vec::new().into(),
            scale: 1.0,
        };
        assert_eq!(ks_distance_with(&empty, |_| 0.3), 1.0);
    }

    #[test]
    fn uniform_error_model_matches_its_closed_form() {
        let g = gains();
        let cfg = ReflectionConfig::uniform(24, 0.9, Some(1)).unwrap();
        let mut s = sim(100_000);
        s.error_model = QuantErrorModel::Uniform;
        let out = run_trials(&g, &cfg, &s).unwrap();
        let m = clt_moments(&g, &cfg).unwrap();
        let want = crate::analytic::quantized_second_moment(&m, FormulaMode::Rederived, quantization_step_half(1));
        let st = &out.stats[1];
        let q = st.quantized.unwrap().mean_snr;
        assert!((q.mean / st.gbar - want).abs() < 4.0 * q.se / st.gbar, "{} vs {want}", q.mean / st.gbar);
    }
}
