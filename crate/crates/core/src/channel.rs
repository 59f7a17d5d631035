//! Geometry, large-scale fading and Rayleigh small-scale sampling.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::DomainError;
use crate::streams::{domain, Substreams};

pub const DEFAULT_AREA_M: f64 = 1000.0;
pub const DEFAULT_IRS_DEST_DIST_M: f64 = 250.0;
pub const DEFAULT_KAPPA: f64 = 2.8;
pub const DEFAULT_D0_M: f64 = 1.0;
pub const DEFAULT_SHADOW_SIGMA_DB: f64 = 8.0;
/// Link-budget normalization applied to every large-scale gain.
///
/// Raw `(d0/d)^κ` gains over a kilometre-scale area sit around -70 dB,
/// which would put every average transmit SNR in [-20, 20] dB in deep
/// outage. With [`DEFAULT_SEED`] this offset makes the M = 64 direct-only
/// links need 18 dB of average SNR for 1% outage at a 0 dB threshold.
pub const DEFAULT_GAIN_OFFSET_DB: f64 = 44.73;
/// Master seed of the reference topology.
pub const DEFAULT_SEED: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// AP/IRS/destination geometry plus the propagation constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub ap_positions: Vec<Point>,
    pub irs_position: Point,
    pub dest_position: Point,
    /// Path-loss exponent.
    pub kappa: f64,
    /// Reference distance in metres.
    pub d0: f64,
    pub shadow_sigma_db: f64,
    #[serde(default = "default_gain_offset")]
    pub gain_offset_db: f64,
}

fn default_gain_offset() -> f64 {
    DEFAULT_GAIN_OFFSET_DB
}

impl Topology {
    pub fn num_aps(&self) -> usize {
        self.ap_positions.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.ap_positions.is_empty() {
            return Err(Error::invalid("topology.ap_positions", "need at least one AP"));
        }
        if let Some(i) = self.ap_positions.iter().position(|p| !p.is_finite()) {
            return Err(Error::invalid(
                format!("topology.ap_positions[{i}]"),
                "non-finite coordinate",
            ));
        }
        if !self.irs_position.is_finite() || !self.dest_position.is_finite() {
            return Err(Error::invalid("topology", "non-finite IRS/destination coordinate"));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::invalid("topology.kappa", "must be positive"));
        }
        if !(self.d0 > 0.0 && self.d0.is_finite()) {
            return Err(Error::invalid("topology.d0", "must be positive"));
        }
        if !(self.shadow_sigma_db >= 0.0 && self.shadow_sigma_db.is_finite()) {
            return Err(Error::invalid("topology.shadow_sigma_db", "must be non-negative"));
        }
        if !self.gain_offset_db.is_finite() {
            return Err(Error::invalid("topology.gain_offset_db", "must be finite"));
        }
        if !(self.irs_position.distance(&self.dest_position) > 0.0) {
            return Err(Error::invalid("topology", "IRS and destination coincide"));
        }
        Ok(())
    }

    /// Keep only the first `m` APs.
    pub fn truncated(&self, m: usize) -> Result<Topology> {
        if m == 0 || m > self.ap_positions.len() {
            return Err(Error::invalid(
                "m",
                format!("need 1..={} APs, got {m}", self.ap_positions.len()),
            ));
        }
        let mut t = self.clone();
        t.ap_positions.truncate(m);
        Ok(t)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Topology> {
        let t: Topology = serde_json::from_str(text)?;
        t.validate()?;
        Ok(t)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Topology> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Topology::from_json(&text)
    }
}

/// Places `m` APs uniformly over `[0, area]²`, with the destination and the
/// IRS on the vertical centre line, `irs_dest_dist_m` apart and centred at
/// three quarters of the height.
///
/// AP `i` is drawn from its own stream, so the first `k` APs are the same
/// for every `m >= k`.
pub fn generate_topology(m: usize, seed: u64, area_m: f64, irs_dest_dist_m: f64) -> Result<Topology> {
    if m == 0 {
        return Err(Error::invalid("m", "need at least one AP"));
    }
    if !(area_m > 0.0 && area_m.is_finite()) {
        return Err(Error::invalid("area_m", "must be positive"));
    }
    if !(irs_dest_dist_m > 0.0 && irs_dest_dist_m.is_finite()) {
        return Err(Error::invalid("irs_dest_dist_m", "must be positive"));
    }
    let cx = area_m / 2.0;
    let cy = 0.75 * area_m;
    let dest = Point::new(cx, cy - irs_dest_dist_m / 2.0);
    let irs = Point::new(cx, cy + irs_dest_dist_m / 2.0);
    if dest.y < 0.0 || irs.y > area_m {
        return Err(Error::invalid(
            "irs_dest_dist_m",
            format!("{irs_dest_dist_m} m does not fit in a {area_m} m square"),
        ));
    }
    let streams = Substreams::new(seed, domain::TOPOLOGY);
    let ap_positions = (0..m as u64)
        .map(|i| {
            let mut rng = streams.stream(i);
            let x = area_m * rng.random::<f64>();
            let y = area_m * rng.random::<f64>();
            Point::new(x, y)
        })
        .collect();
    Ok(Topology {
        ap_positions,
        irs_position: irs,
        dest_position: dest,
        kappa: DEFAULT_KAPPA,
        d0: DEFAULT_D0_M,
        shadow_sigma_db: DEFAULT_SHADOW_SIGMA_DB,
        gain_offset_db: DEFAULT_GAIN_OFFSET_DB,
    })
}

/// Large-scale gain `(d0/d)^κ · 10^{φ/10}` for a shadowing draw `φ` in dB.
pub fn path_gain(dist_m: f64, kappa: f64, d0: f64, shadow_db: f64) -> Result<f64, DomainError> {
    if !(d0 > 0.0) || !(dist_m >= d0) || !dist_m.is_finite() {
        return Err(DomainError {
            func: "path_gain",
            detail: format!("need dist >= d0 > 0, got dist = {dist_m}, d0 = {d0}"),
        });
    }
    Ok((d0 / dist_m).powf(kappa) * 10f64.powf(shadow_db / 10.0))
}

/// Large-scale gains of every physical link and the aggregate Rayleigh
/// parameters of the combined channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkGains {
    /// Direct AP→destination gains, one per AP.
    pub zeta_u: Vec<f64>,
    /// AP→IRS gains, one per AP (shared by all IRS elements).
    pub zeta_h: Vec<f64>,
    /// IRS→destination gain (shared by all elements).
    pub zeta_g: f64,
    pub xi_u: f64,
    pub xi_h: f64,
    pub xi_g: f64,
}

impl LinkGains {
    pub fn new(zeta_u: Vec<f64>, zeta_h: Vec<f64>, zeta_g: f64) -> Result<LinkGains> {
        if zeta_u.is_empty() {
            return Err(Error::invalid("zeta_u", "need at least one AP"));
        }
        if zeta_u.len() != zeta_h.len() {
            return Err(Error::LengthMismatch {
                what: "zeta_h",
                got: zeta_h.len(),
                expected: zeta_u.len(),
            });
        }
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !zeta_u.iter().chain(&zeta_h).all(|&z| positive(z)) || !positive(zeta_g) {
            return Err(Error::invalid("link gains", "all gains must be positive and finite"));
        }
        let xi_u = zeta_u.iter().sum::<f64>() / 2.0;
        let xi_h = zeta_h.iter().sum::<f64>() / 2.0;
        Ok(LinkGains {
            zeta_u,
            zeta_h,
            zeta_g,
            xi_u,
            xi_h,
            xi_g: zeta_g / 2.0,
        })
    }

    /// Gains of a single virtual AP with the given aggregate Rayleigh
    /// parameters.
    pub fn from_rayleigh_params(xi_u: f64, xi_h: f64, xi_g: f64) -> Result<LinkGains> {
        LinkGains::new(vec![2.0 * xi_u], vec![2.0 * xi_h], 2.0 * xi_g)
    }
}

/// Draws one shadowing value (dB) per physical link and converts the
/// geometry into large-scale gains. Distances below `d0` are clamped to
/// `d0`.
pub fn build_link_gains(topo: &Topology, seed: u64) -> Result<LinkGains> {
    topo.validate()?;
    let streams = Substreams::new(seed, domain::SHADOWING);
    let shadow = |id: u64| -> f64 {
        let mut rng = streams.stream(id);
        let z: f64 = StandardNormal.sample(&mut rng);
        topo.shadow_sigma_db * z
    };
    let offset = 10f64.powf(topo.gain_offset_db / 10.0);
    let gain = |a: &Point, b: &Point, id: u64| -> Result<f64> {
        let d = a.distance(b).max(topo.d0);
        Ok(offset * path_gain(d, topo.kappa, topo.d0, shadow(id))?)
    };
    let mut zeta_u = Vec::with_capacity(topo.num_aps());
    let mut zeta_h = Vec::with_capacity(topo.num_aps());
    for (i, ap) in topo.ap_positions.iter().enumerate() {
        let i = i as u64;
        zeta_u.push(gain(ap, &topo.dest_position, 2 * i)?);
        zeta_h.push(gain(ap, &topo.irs_position, 2 * i + 1)?);
    }
    let zeta_g = gain(&topo.irs_position, &topo.dest_position, u64::MAX)?;
    LinkGains::new(zeta_u, zeta_h, zeta_g)
}

/// One draw of the aggregate small-scale channel.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChannelRealization {
    pub lambda_u: f64,
    pub theta_u: f64,
    pub lambda_h: Vec<f64>,
    pub theta_h: Vec<f64>,
    pub lambda_g: Vec<f64>,
    pub theta_g: Vec<f64>,
}

impl ChannelRealization {
    pub fn num_elements(&self) -> usize {
        self.lambda_h.len()
    }

    /// Y = Σ β_n λ_{g_n} λ_{h_n}.
    pub fn cascaded_sum(&self, beta: &[f64]) -> f64 {
        beta.iter()
            .zip(&self.lambda_g)
            .zip(&self.lambda_h)
            .map(|((b, g), h)| b * g * h)
            .sum()
    }
}

/// Rayleigh envelope with parameter `xi` from a uniform `u ∈ [0, 1)`
/// (inverse CDF on `1 - u ∈ (0, 1]`).
#[inline]
pub fn rayleigh_from_uniform(xi: f64, u: f64) -> f64 {
    (-2.0 * xi * (1.0 - u).ln()).sqrt()
}

#[inline]
pub fn sample_rayleigh<R: Rng + ?Sized>(rng: &mut R, xi: f64) -> f64 {
    rayleigh_from_uniform(xi, rng.random::<f64>())
}

#[inline]
pub fn sample_phase<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    -PI + 2.0 * PI * rng.random::<f64>()
}

/// Per-trial small-scale sampler.
///
/// Trial `t` reads envelopes from stream `2t` and phases from stream
/// `2t + 1` of the trial domain. Element `n` is drawn after elements
/// `0..n`, so a realization with fewer elements is a prefix of one with
/// more.
#[derive(Debug, Clone)]
pub struct RealizationSampler {
    xi_u: f64,
    xi_h: f64,
    xi_g: f64,
    streams: Substreams,
}

impl RealizationSampler {
    pub fn new(gains: &LinkGains, seed: u64) -> Self {
        Self {
            xi_u: gains.xi_u,
            xi_h: gains.xi_h,
            xi_g: gains.xi_g,
            streams: Substreams::new(seed, domain::TRIALS),
        }
    }

    pub fn envelope_rng(&self, trial: u64) -> ChaCha8Rng {
        self.streams.stream(2 * trial)
    }

    pub fn phase_rng(&self, trial: u64) -> ChaCha8Rng {
        self.streams.stream(2 * trial + 1)
    }

    /// Draws λ_u and the cascaded sum Y without materialising the
    /// per-element vectors. Consumes the envelope stream exactly like
    /// [`RealizationSampler::fill`].
    pub fn envelope_sum(&self, trial: u64, beta: &[f64]) -> (f64, f64) {
        let mut rng = self.envelope_rng(trial);
        let lambda_u = sample_rayleigh(&mut rng, self.xi_u);
        let mut y = 0.0;
        for &b in beta {
            let h = sample_rayleigh(&mut rng, self.xi_h);
            let g = sample_rayleigh(&mut rng, self.xi_g);
            y += b * g * h;
        }
        (lambda_u, y)
    }

    /// Fills `out` with trial `trial` for `n` elements, reusing its
    /// allocations.
    pub fn fill(&self, trial: u64, n: usize, out: &mut ChannelRealization) {
        out.lambda_h.resize(n, 0.0);
        out.lambda_g.resize(n, 0.0);
        out.theta_h.resize(n, 0.0);
        out.theta_g.resize(n, 0.0);
        let mut rng = self.envelope_rng(trial);
        out.lambda_u = sample_rayleigh(&mut rng, self.xi_u);
        for i in 0..n {
            out.lambda_h[i] = sample_rayleigh(&mut rng, self.xi_h);
            out.lambda_g[i] = sample_rayleigh(&mut rng, self.xi_g);
        }
        let mut rng = self.phase_rng(trial);
        out.theta_u = sample_phase(&mut rng);
        for i in 0..n {
            out.theta_h[i] = sample_phase(&mut rng);
            out.theta_g[i] = sample_phase(&mut rng);
        }
    }

    pub fn sample(&self, trial: u64, n: usize) -> ChannelRealization {
        let mut r = ChannelRealization::default();
        self.fill(trial, n, &mut r);
        r
    }
}

/// One realization with `n` IRS elements, deterministic in `seed`.
pub fn sample_realization(gains: &LinkGains, n: usize, seed: u64) -> ChannelRealization {
    RealizationSampler::new(gains, seed).sample(0, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn topology_is_deterministic() {
        let a = generate_topology(1, 7, 1000.0, 250.0).unwrap();
        let b = generate_topology(1, 7, 1000.0, 250.0).unwrap();
        assert_eq!(a, b);
        let c = generate_topology(1, 8, 1000.0, 250.0).unwrap();
        assert_ne!(a.ap_positions, c.ap_positions);
    }

    #[test]
    fn topology_layout() {
        let t = generate_topology(64, 3, 1000.0, 250.0).unwrap();
        assert_eq!(t.num_aps(), 64);
        assert!(t
            .ap_positions
            .iter()
            .all(|p| (0.0..=1000.0).contains(&p.x) && (0.0..=1000.0).contains(&p.y)));
        assert_eq!(t.dest_position, Point::new(500.0, 625.0));
        assert_eq!(t.irs_position, Point::new(500.0, 875.0));
        assert!((t.irs_position.distance(&t.dest_position) - 250.0).abs() < 1e-12);
    }

    #[test]
    fn topology_prefix_property() {
        let small = generate_topology(16, 9, 1000.0, 250.0).unwrap();
        let big = generate_topology(64, 9, 1000.0, 250.0).unwrap();
        assert_eq!(small.ap_positions[..], big.ap_positions[..16]);
        assert_eq!(big.truncated(16).unwrap(), small);
    }

    #[test]
    fn topology_errors() {
        assert!(generate_topology(0, 1, 1000.0, 250.0).is_err());
        assert!(generate_topology(4, 1, 0.0, 250.0).is_err());
        assert!(generate_topology(4, 1, 100.0, 250.0).is_err());
        let mut t = generate_topology(4, 1, 1000.0, 250.0).unwrap();
        t.kappa = 0.0;
        assert!(t.validate().is_err());
    }

    #[test]
    fn ap_coordinates_are_uniform() {
        let t = generate_topology(100_000, 21, 1000.0, 250.0).unwrap();
        let mean = t.ap_positions.iter().map(|p| p.x).sum::<f64>() / 1e5;
        let tol = 3.0 * (1000.0 / 12f64.sqrt()) / 1e5f64.sqrt();
        assert!((mean - 500.0).abs() <= tol, "mean = {mean}");
    }

    #[test]
    fn path_gain_values() {
        assert_eq!(path_gain(1.0, 2.8, 1.0, 0.0).unwrap(), 1.0);
        assert!((path_gain(10.0, 2.0, 1.0, 0.0).unwrap() - 0.01).abs() < 1e-15);
        let g = path_gain(100.0, 2.8, 1.0, 0.0).unwrap();
        let log_oracle = 10f64.powf(-2.8 * 100f64.log10());
        assert!((g - log_oracle).abs() / log_oracle < 1e-12);
        assert!((g - 2.511_886_431_509_58e-6).abs() < 1e-18);
        assert!((path_gain(10.0, 2.0, 1.0, 10.0).unwrap() - 0.1).abs() < 1e-15);
        assert!(path_gain(0.5, 2.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn link_gain_aggregates() {
        let g = LinkGains::new(vec![1.0], vec![1.0], 1.0).unwrap();
        assert_eq!(g.xi_u, 0.5);
        let g = LinkGains::new(vec![0.5, 0.5], vec![0.2, 0.4], 0.1).unwrap();
        assert_eq!(g.xi_u, 0.5);
        assert!((g.xi_h - 0.3).abs() < 1e-15);
        assert_eq!(g.xi_g, 0.05);
        assert!(LinkGains::new(vec![1.0], vec![], 1.0).is_err());
        assert!(LinkGains::new(vec![-1.0], vec![1.0], 1.0).is_err());
    }

    #[test]
    fn zero_shadowing_at_reference_distance() {
        let topo = Topology {
            ap_positions: vec![Point::new(0.0, 0.0)],
            irs_position: Point::new(1.0, 1.0),
            dest_position: Point::new(0.0, 1.0),
            kappa: 2.8,
            d0: 1.0,
            shadow_sigma_db: 0.0,
            gain_offset_db: 0.0,
        };
        let g = build_link_gains(&topo, 1).unwrap();
        assert_eq!(g.zeta_u, vec![1.0]);
        assert_eq!(g.xi_u, 0.5);
    }

    #[test]
    fn shadowing_has_configured_spread() {
        let mut topo = generate_topology(100_000, 4, 1000.0, 250.0).unwrap();
        topo.gain_offset_db = 0.0;
        let g = build_link_gains(&topo, 77).unwrap();
        let phis: Vec<f64> = topo
            .ap_positions
            .iter()
            .zip(&g.zeta_u)
            .map(|(p, z)| {
                let d = p.distance(&topo.dest_position).max(topo.d0);
                10.0 * z.log10() + 10.0 * topo.kappa * d.log10()
            })
            .collect();
        let n = phis.len() as f64;
        let mean = phis.iter().sum::<f64>() / n;
        let sd = (phis.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((sd - 8.0).abs() <= 0.1, "sd = {sd}");
        assert!(mean.abs() < 0.1);
    }

    #[test]
    fn gains_identical_under_seed_and_prefix() {
        let topo = generate_topology(32, 5, 1000.0, 250.0).unwrap();
        let a = build_link_gains(&topo, 6).unwrap();
        let b = build_link_gains(&topo, 6).unwrap();
        assert_eq!(a, b);
        let small = build_link_gains(&topo.truncated(8).unwrap(), 6).unwrap();
        assert_eq!(small.zeta_u[..], a.zeta_u[..8]);
        assert_eq!(small.zeta_g, a.zeta_g);
    }

    #[test]
    fn topology_json_roundtrip() {
        let t = generate_topology(5, 2, 1000.0, 250.0).unwrap();
        let back = Topology::from_json(&t.to_json().unwrap()).unwrap();
        assert_eq!(t, back);
        assert!(Topology::from_json(r#"{"ap_positions":[]}"#).is_err());
    }

    #[test]
    fn rayleigh_moments() {
        let gains = LinkGains::from_rayleigh_params(1.0, 1.0, 1.0).unwrap();
        let sampler = RealizationSampler::new(&gains, 12);
        let trials = 1_000_000u64;
        let (mut s1, mut s2) = (0.0, 0.0);
        for t in 0..trials {
            let mut rng = sampler.envelope_rng(t);
            let l = sample_rayleigh(&mut rng, 1.0);
            s1 += l;
            s2 += l * l;
        }
        let n = trials as f64;
        let mean = s1 / n;
        let var = s2 / n - mean * mean;
        let expected = (PI / 2.0).sqrt();
        assert!((mean - expected).abs() <= 3.0 * var.sqrt() / n.sqrt(), "mean = {mean}");
        // Var(λ²) = 4ξ² for ξ = 1
        assert!((s2 / n - 2.0).abs() <= 3.0 * 2.0 / n.sqrt(), "m2 = {}", s2 / n);
    }

    #[test]
    fn rayleigh_ks_against_cdf() {
        let xi = 0.7;
        let sampler = RealizationSampler::new(&LinkGains::from_rayleigh_params(xi, 1.0, 1.0).unwrap(), 31);
        let mut xs: Vec<f64> = (0..1_000_000u64)
            .map(|t| sample_rayleigh(&mut sampler.envelope_rng(t), xi))
            .collect();
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = 1.0 - (-x * x / (2.0 * xi)).exp();
                ((i as f64 + 1.0) / n - f).abs().max((f - i as f64 / n).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks <= 0.002, "ks = {ks}");
    }

    #[test]
    fn realization_invariants() {
        let gains = LinkGains::from_rayleigh_params(0.3, 0.8, 1.2).unwrap();
        let r = sample_realization(&gains, 16, 99);
        assert_eq!(r, sample_realization(&gains, 16, 99));
        assert!(r.lambda_u >= 0.0);
        assert!(r.lambda_h.iter().chain(&r.lambda_g).all(|&l| l >= 0.0));
        assert!(std::iter::once(&r.theta_u)
            .chain(&r.theta_h)
            .chain(&r.theta_g)
            .all(|&t| (-PI..PI).contains(&t)));
        let empty = sample_realization(&gains, 0, 99);
        assert_eq!(empty.num_elements(), 0);
        assert_eq!(empty.lambda_u, r.lambda_u);
        // fewer elements: prefix of the larger draw
        let short = sample_realization(&gains, 4, 99);
        assert_eq!(short.lambda_h[..], r.lambda_h[..4]);
        assert_eq!(short.theta_g[..], r.theta_g[..4]);
    }

    #[test]
    fn envelope_sum_matches_fill() {
        let gains = LinkGains::from_rayleigh_params(0.3, 0.8, 1.2).unwrap();
        let sampler = RealizationSampler::new(&gains, 5);
        let beta = vec![0.9; 12];
        for t in 0..50 {
            let r = sampler.sample(t, 12);
            let (lu, y) = sampler.envelope_sum(t, &beta);
            assert_eq!(lu, r.lambda_u);
            assert_eq!(y, r.cascaded_sum(&beta));
        }
    }
}
