//! Experiment specs, result series and their comparison.
//!
//! An [`ExperimentSpec`] names a set of `(M, N, B)` cases evaluated on a
//! common topology. Running it yields one [`ResultSeries`] per case, which
//! is written as a CSV file next to a JSON manifest.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{
    clt_moments, outage, rate_lower, rate_upper, rate_upper_quantized, CltMoments, FormulaMode, SnrDistribution,
};
use crate::channel::{
    build_link_gains, generate_topology, LinkGains, Topology, DEFAULT_AREA_M, DEFAULT_GAIN_OFFSET_DB,
    DEFAULT_IRS_DEST_DIST_M, DEFAULT_SEED,
};
use crate::error::{Error, Result};
use crate::montecarlo::{ks_distance, run_trials, QuantErrorModel, SimConfig, SimResult};
use crate::snr::ReflectionConfig;
use crate::db_to_linear;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const BUILTIN_NAMES: [&str; 4] = ["fig2", "fig3", "fig4", "fig5"];

/// Outage agreement is only checked where the MC estimate reaches this level.
pub const OUTAGE_FLOOR: f64 = 1e-4;
pub const OUTAGE_REL_TOL: f64 = 0.10;
pub const SE_MULTIPLIER: f64 = 3.0;
pub const KS_TOL: f64 = 0.01;
pub const RATIO_TOL: f64 = 0.01;

pub fn version() -> &'static str {
    option_env!("IRSLAB_GIT_DESCRIBE").unwrap_or(concat!("v", env!("CARGO_PKG_VERSION")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// PDF and CDF of the SNR at a single `γ̄`.
    Distribution,
    Outage,
    Rate,
    /// Rate ratio with and without phase quantization.
    Quantization,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputKind {
    Analytic,
    Montecarlo,
    Both,
}

impl OutputKind {
    pub fn analytic(self) -> bool {
        matches!(self, OutputKind::Analytic | OutputKind::Both)
    }

    pub fn montecarlo(self) -> bool {
        matches!(self, OutputKind::Montecarlo | OutputKind::Both)
    }
}

/// `M` APs, `N` IRS elements (`0` for direct links only), optional bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Case {
    pub m: usize,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bits: Option<u32>,
}

impl Case {
    pub fn new(m: usize, n: usize, bits: Option<u32>) -> Self {
        Self { m, n, bits }
    }

    pub fn label(&self) -> String {
        match self.bits {
            Some(b) => format!("M{}_N{}_B{}", self.m, self.n, b),
            None => format!("M{}_N{}", self.m, self.n),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologyParams {
    pub area_m: f64,
    pub irs_dest_dist_m: f64,
    pub gain_offset_db: f64,
}

impl Default for TopologyParams {
    fn default() -> Self {
        Self {
            area_m: DEFAULT_AREA_M,
            irs_dest_dist_m: DEFAULT_IRS_DEST_DIST_M,
            gain_offset_db: DEFAULT_GAIN_OFFSET_DB,
        }
    }
}

fn default_grid() -> Vec<f64> {
    (-20..=20).map(f64::from).collect()
}

fn default_trials() -> u64 {
    1_000_000
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_outputs() -> Vec<OutputKind> {
    vec![OutputKind::Both]
}

fn default_beta() -> f64 {
    0.9
}

fn default_bins() -> usize {
    100
}

fn default_grid_points() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub kind: ExperimentKind,
    pub cases: Vec<Case>,
    #[serde(default = "default_grid")]
    pub gbar_db_grid: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// One entry for all cases, or one per case.
    #[serde(default = "default_outputs")]
    pub outputs: Vec<OutputKind>,
    #[serde(default)]
    pub gamma_th_db: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub mode: FormulaMode,
    #[serde(default)]
    pub error_model: QuantErrorModel,
    #[serde(default)]
    pub topology: TopologyParams,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
    /// Linear SNR points of a distribution experiment; chosen from the
    /// closed-form moments when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_grid: Option<Vec<f64>>,
    #[serde(default = "default_grid_points")]
    pub snr_grid_points: usize,
}

impl ExperimentSpec {
    pub fn new(name: impl Into<String>, kind: ExperimentKind, cases: Vec<Case>) -> Self {
        Self {
            name: name.into(),
            kind,
            cases,
            gbar_db_grid: default_grid(),
            trials: default_trials(),
            seed: default_seed(),
            outputs: default_outputs(),
            gamma_th_db: 0.0,
            beta: default_beta(),
            mode: FormulaMode::default(),
            error_model: QuantErrorModel::default(),
            topology: TopologyParams::default(),
            histogram_bins: default_bins(),
            snr_grid: None,
            snr_grid_points: default_grid_points(),
        }
    }

    pub fn builtin(name: &str) -> Option<ExperimentSpec> {
        let c = |m, n| Case::new(m, n, None);
        let spec = match name {
            "fig2" => {
                let mut s = ExperimentSpec::new(
                    name,
                    ExperimentKind::Distribution,
                    vec![c(64, 32), c(64, 64), c(144, 64), c(64, 128)],
                );
                s.gbar_db_grid = vec![-10.0];
                s
            }
            "fig3" => ExperimentSpec::new(
                name,
                ExperimentKind::Outage,
                vec![c(36, 16), c(36, 32), c(16, 64), c(36, 64), c(64, 64), c(36, 128), c(64, 0)],
            ),
            "fig4" => ExperimentSpec::new(
                name,
                ExperimentKind::Rate,
                vec![c(64, 0), c(64, 16), c(64, 32), c(64, 64), c(64, 128), c(64, 256)],
            ),
            "fig5" => {
                let mut cases = Vec::new();
                for (m, n) in [(36, 32), (64, 32), (36, 64), (64, 64)] {
                    for b in 1..=4 {
                        cases.push(Case::new(m, n, Some(b)));
                    }
                }
                let mut s = ExperimentSpec::new(name, ExperimentKind::Quantization, cases);
                s.error_model = QuantErrorModel::Uniform;
                s
            }
            _ => return None,
        };
        Some(spec)
    }

    pub fn from_json(text: &str) -> Result<ExperimentSpec> {
        let spec: ExperimentSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<ExperimentSpec> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || !self.name.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_' || ch == '-') {
            return Err(Error::invalid("name", "must be a non-empty identifier of [A-Za-z0-9_-]"));
        }
        if self.cases.is_empty() {
            return Err(Error::invalid("cases", "must not be empty"));
        }
        for (i, case) in self.cases.iter().enumerate() {
            if case.m == 0 {
                return Err(Error::invalid(format!("cases[{i}].m"), "need at least one AP"));
            }
            if case.bits == Some(0) {
                return Err(Error::invalid(format!("cases[{i}].bits"), "must be at least 1"));
            }
            if self.kind == ExperimentKind::Quantization {
                if case.bits.is_none() {
                    return Err(Error::invalid(format!("cases[{i}].bits"), "required for quantization experiments"));
                }
                if case.n == 0 {
                    return Err(Error::invalid(format!("cases[{i}].n"), "quantization needs IRS elements"));
                }
            }
            if self.kind == ExperimentKind::Distribution && case.n == 0 {
                return Err(Error::invalid(format!("cases[{i}].n"), "distribution experiments need IRS elements"));
            }
        }
        if self.gbar_db_grid.is_empty() {
            return Err(Error::invalid("gbar_db_grid", "must not be empty"));
        }
        for (i, w) in self.gbar_db_grid.windows(2).enumerate() {
            if !(w[0] < w[1]) {
                return Err(Error::invalid(format!("gbar_db_grid[{}]", i + 1), "grid must be strictly ascending"));
            }
        }
        if let Some(i) = self.gbar_db_grid.iter().position(|g| !g.is_finite()) {
            return Err(Error::invalid(format!("gbar_db_grid[{i}]"), "must be finite"));
        }
        if self.kind == ExperimentKind::Distribution && self.gbar_db_grid.len() != 1 {
            return Err(Error::invalid("gbar_db_grid", "distribution experiments take exactly one value"));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials", "must be at least 1"));
        }
        if self.outputs.len() != 1 && self.outputs.len() != self.cases.len() {
            return Err(Error::invalid(
                "outputs",
                format!("need 1 or {} entries, got {}", self.cases.len(), self.outputs.len()),
            ));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::invalid("beta", "must lie in [0, 1]"));
        }
        if !self.gamma_th_db.is_finite() {
            return Err(Error::invalid("gamma_th_db", "must be finite"));
        }
        if self.histogram_bins < 10 {
            return Err(Error::invalid("histogram_bins", "must be at least 10"));
        }
        let t = &self.topology;
        if !(t.area_m > 0.0 && t.area_m.is_finite()) {
            return Err(Error::invalid("topology.area_m", "must be positive"));
        }
        if !(t.irs_dest_dist_m > 0.0 && t.irs_dest_dist_m <= t.area_m / 2.0) {
            return Err(Error::invalid("topology.irs_dest_dist_m", "must lie in (0, area_m / 2]"));
        }
        if !t.gain_offset_db.is_finite() {
            return Err(Error::invalid("topology.gain_offset_db", "must be finite"));
        }
        if let Some(grid) = &self.snr_grid {
            if grid.is_empty() {
                return Err(Error::invalid("snr_grid", "must not be empty"));
            }
            if let Some(i) = grid.iter().position(|v| !(*v >= 0.0 && v.is_finite())) {
                return Err(Error::invalid(format!("snr_grid[{i}]"), "must be finite and non-negative"));
            }
        } else if self.snr_grid_points < 2 {
            return Err(Error::invalid("snr_grid_points", "must be at least 2"));
        }
        Ok(())
    }

    pub fn output_for(&self, case_index: usize) -> OutputKind {
        if self.outputs.len() == 1 {
            self.outputs[0]
        } else {
            self.outputs[case_index]
        }
    }

    /// Shared topology covering the largest `M` across the cases.
    pub fn topology(&self) -> Result<Topology> {
        let m_max = self.cases.iter().map(|c| c.m).max().unwrap_or(1);
        let t = &self.topology;
        let mut topo = generate_topology(m_max, self.seed, t.area_m, t.irs_dest_dist_m)?;
        topo.gain_offset_db = t.gain_offset_db;
        Ok(topo)
    }

    pub fn link_gains(&self, topo: &Topology, m: usize) -> Result<LinkGains> {
        build_link_gains(&topo.truncated(m)?, self.seed)
    }
}

/// Closed-form moments for a case; `N = 0` is the direct-only channel.
pub fn case_moments(gains: &LinkGains, cfg: &ReflectionConfig) -> Result<CltMoments> {
    if cfg.num_elements() == 0 {
        CltMoments::direct_only(gains.xi_u)
    } else {
        clt_moments(gains, cfg)
    }
}

/// `γ̄` in dB at which the closed-form outage equals `target`.
pub fn required_gbar_db(target: f64, m: &CltMoments, mode: FormulaMode, gamma_th_db: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::invalid("target", "outage target must lie in (0, 1)"));
    }
    let gamma_th = db_to_linear(gamma_th_db);
    let out = |db: f64| -> Result<f64> { Ok(outage(gamma_th, &SnrDistribution::new(*m, db_to_linear(db), mode)?)) };
    let (mut lo, mut hi) = (-200.0, 200.0);
    if out(lo)? < target || out(hi)? > target {
        return Err(Error::invalid("target", "outage target not bracketed by [-200, 200] dB"));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if out(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-10 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub file: String,
    pub case_index: usize,
    pub case: Case,
    pub output: OutputKind,
    pub x_name: String,
    pub columns: Vec<String>,
    pub trials: u64,
    pub moments: CltMoments,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gbar_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
}

/// Data of one case: an `x` axis and named columns of equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultSeries {
    pub meta: SeriesMeta,
    pub x: Vec<f64>,
    pub columns: Vec<Column>,
}

impl ResultSeries {
    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.values.as_slice())
            .ok_or_else(|| Error::MissingColumn {
                column: name.to_string(),
                context: self.meta.file.clone(),
            })
    }

    pub fn column_mut(&mut self, name: &str) -> Option<&mut Vec<f64>> {
        self.columns.iter_mut().find(|c| c.name == name).map(|c| &mut c.values)
    }

    pub fn validate(&self) -> Result<()> {
        for c in &self.columns {
            if c.values.len() != self.x.len() {
                return Err(Error::LengthMismatch {
                    what: "result column",
                    got: c.values.len(),
                    expected: self.x.len(),
                });
            }
        }
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        self.validate()?;
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
        let mut header = vec![self.meta.x_name.as_str()];
        header.extend(self.columns.iter().map(|c| c.name.as_str()));
        w.write_record(&header)?;
        for (i, x) in self.x.iter().enumerate() {
            let mut row = vec![x.to_string()];
            row.extend(self.columns.iter().map(|c| c.values[i].to_string()));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn read_csv(path: &Path, meta: SeriesMeta) -> Result<ResultSeries> {
        let mut r = csv::Reader::from_path(path).map_err(|e| csv_io(path, e))?;
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let context = path.display().to_string();
        if header.first() != Some(&meta.x_name) {
            return Err(Error::MissingColumn {
                column: meta.x_name.clone(),
                context,
            });
        }
        for name in &meta.columns {
            if !header.contains(name) {
                return Err(Error::MissingColumn {
                    column: name.clone(),
                    context,
                });
            }
        }
        let mut data: Vec<Vec<f64>> = vec![Vec::new(); header.len()];
        for (row, record) in r.records().enumerate() {
            let record = record?;
            for (j, field) in record.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::invalid(
                        format!("{context}: row {} column `{}`", row + 1, header[j]),
                        format!("not a number: `{field}`"),
                    )
                })?;
                data[j].push(v);
            }
        }
        let mut data = data.into_iter();
        let x = data.next().unwrap_or_default();
        let columns = header
            .into_iter()
            .skip(1)
            .zip(data)
            .map(|(name, values)| Column { name, values })
            .collect();
        let series = ResultSeries { meta, x, columns };
        series.validate()?;
        Ok(series)
    }
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Csv(csv::Error::from(std::io::Error::other(format!("{other:?}")))),
        }
    } else {
        Error::Csv(e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub seed: u64,
    pub mode: FormulaMode,
    pub spec: ExperimentSpec,
    pub series: Vec<SeriesMeta>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub manifest: Manifest,
    pub series: Vec<ResultSeries>,
}

impl ExperimentOutput {
    /// Writes one CSV per case and the manifest into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        for s in &self.series {
            let path = dir.join(&s.meta.file);
            s.write_csv(&path)?;
            written.push(path);
        }
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        written.push(path);
        Ok(written)
    }

    pub fn read(dir: &Path) -> Result<ExperimentOutput> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        let series = manifest
            .series
            .iter()
            .map(|m| ResultSeries::read_csv(&dir.join(&m.file), m.clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok(ExperimentOutput { manifest, series })
    }
}

/// Linear SNR points covering the bulk of `γ̄ R̃²`.
fn auto_snr_grid(m: &CltMoments, gbar: f64, points: usize) -> Vec<f64> {
    let amp = m.mu_y + m.mu_u + 6.0 * (m.sigma2_y.sqrt() + m.xi_u.sqrt());
    let top = gbar * amp * amp;
    (0..points).map(|k| top * k as f64 / (points - 1) as f64).collect()
}

fn run_case(spec: &ExperimentSpec, topo: &Topology, index: usize) -> Result<ResultSeries> {
    let case = spec.cases[index];
    let output = spec.output_for(index);
    let gains = spec.link_gains(topo, case.m)?;
    let cfg = ReflectionConfig::uniform(case.n, spec.beta, case.bits)?;
    let moments = case_moments(&gains, &cfg)?;
    let mode = spec.mode;
    let sim = output
        .montecarlo()
        .then(|| {
            let mut s = SimConfig::new(spec.trials, spec.seed, spec.gbar_db_grid.clone());
            s.gamma_th_db = spec.gamma_th_db;
            s.histogram_bins = spec.histogram_bins;
            s.error_model = spec.error_model;
            run_trials(&gains, &cfg, &s)
        })
        .transpose()?;
    let dist = |db: f64| SnrDistribution::new(moments, db_to_linear(db), mode);
    let grid = &spec.gbar_db_grid;
    let mut columns = Vec::new();
    let mut push = |name: &str, values: Vec<f64>| {
        columns.push(Column {
            name: name.to_string(),
            values,
        })
    };
    let mut ks = None;
    let (x_name, x, gbar_db) = match spec.kind {
        ExperimentKind::Distribution => {
            let db = grid[0];
            let d = dist(db)?;
            let x = spec
                .snr_grid
                .clone()
                .unwrap_or_else(|| auto_snr_grid(&moments, d.gbar, spec.snr_grid_points));
            if output.analytic() {
                push("pdf_analytic", x.iter().map(|&y| d.pdf(y)).collect::<Result<_>>()?);
                push("cdf_analytic", x.iter().map(|&y| d.cdf(y)).collect::<Result<_>>()?);
            }
            if let Some(sim) = &sim {
                let st = &sim.stats[0];
                let h = &st.histogram;
                let density = |y: f64| {
                    let k = h.edges.partition_point(|e| *e <= y);
                    if k == 0 || k > h.mass.len() {
                        0.0
                    } else {
                        h.mass[k - 1] / (h.edges[k] - h.edges[k - 1])
                    }
                };
                push("pdf_mc", x.iter().map(|&y| density(y)).collect());
                push("cdf_mc", x.iter().map(|&y| st.ecdf.cdf(y)).collect());
                ks = Some(ks_distance(st, &d));
            }
            ("snr", x, Some(db))
        }
        ExperimentKind::Outage => {
            let gamma_th = db_to_linear(spec.gamma_th_db);
            if output.analytic() {
                push(
                    "outage_analytic",
                    grid.iter().map(|&db| Ok(outage(gamma_th, &dist(db)?))).collect::<Result<_>>()?,
                );
            }
            if let Some(sim) = &sim {
                push("outage_mc", sim.stats.iter().map(|s| s.outage_rate.p).collect());
                push("outage_mc_se", sim.stats.iter().map(|s| s.outage_rate.se).collect());
            }
            ("gbar_db", grid.clone(), None)
        }
        ExperimentKind::Rate => {
            if output.analytic() {
                push("rate_ub", grid.iter().map(|&db| Ok(rate_upper(&dist(db)?))).collect::<Result<_>>()?);
                push("rate_lb", grid.iter().map(|&db| rate_lower(&dist(db)?)).collect::<Result<_>>()?);
            }
            if let Some(sim) = &sim {
                push("rate_mc", sim.stats.iter().map(|s| s.rate_mean.mean).collect());
                push("rate_mc_se", sim.stats.iter().map(|s| s.rate_mean.se).collect());
            }
            ("gbar_db", grid.clone(), None)
        }
        ExperimentKind::Quantization => {
            let bits = case.bits.expect("validated");
            if output.analytic() {
                let ub: Vec<f64> = grid.iter().map(|&db| Ok(rate_upper(&dist(db)?))).collect::<Result<_>>()?;
                let ubq: Vec<f64> = grid
                    .iter()
                    .map(|&db| rate_upper_quantized(&dist(db)?, bits))
                    .collect::<Result<_>>()?;
                let ratio = ub.iter().zip(&ubq).map(|(a, b)| b / a).collect();
                push("rate_ub", ub);
                push("rate_ub_quantized", ubq);
                push("rate_ratio_quantized", ratio);
            }
            if let Some(sim) = &sim {
                let (r, rq) = quantized_rates(sim);
                let ratio = r.iter().zip(&rq).map(|(a, b)| b / a).collect();
                push("rate_mc", r);
                push("rate_mc_quantized", rq);
                push("rate_ratio_quantized_mc", ratio);
            }
            ("gbar_db", grid.clone(), None)
        }
    };
    let meta = SeriesMeta {
        file: format!("{}_case{}_{}.csv", spec.name, index + 1, case.label()),
        case_index: index,
        case,
        output,
        x_name: x_name.to_string(),
        columns: columns.iter().map(|c| c.name.clone()).collect(),
        trials: if output.montecarlo() { spec.trials } else { 0 },
        moments,
        gbar_db,
        ks_distance: ks,
    };
    let series = ResultSeries { meta, x, columns };
    series.validate()?;
    Ok(series)
}

fn quantized_rates(sim: &SimResult) -> (Vec<f64>, Vec<f64>) {
    sim.stats
        .iter()
        .map(|s| {
            let q = s.quantized.expect("quantization bits set");
            (s.rate_mean.mean, q.rate.mean)
        })
        .unzip()
}

/// Evaluates every case of `spec`; cases run concurrently when `parallel`.
pub fn run_experiment(spec: &ExperimentSpec, parallel: bool) -> Result<ExperimentOutput> {
    spec.validate()?;
    let topo = spec.topology()?;
    let series: Vec<ResultSeries> = if parallel {
        (0..spec.cases.len())
            .into_par_iter()
            .map(|i| run_case(spec, &topo, i))
            .collect::<Result<_>>()?
    } else {
        (0..spec.cases.len())
            .map(|i| run_case(spec, &topo, i))
            .collect::<Result<_>>()?
    };
    Ok(ExperimentOutput {
        manifest: Manifest {
            version: version().to_string(),
            seed: spec.seed,
            mode: spec.mode,
            spec: spec.clone(),
            series: series.iter().map(|s| s.meta.clone()).collect(),
        },
        series,
    })
}

/// Runs `spec` and writes its files into `dir`.
pub fn run_and_write(spec: &ExperimentSpec, dir: &Path, parallel: bool) -> Result<ExperimentOutput> {
    let out = run_experiment(spec, parallel)?;
    out.write(dir)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub criterion: String,
    pub case: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    pub delta: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub checks: Vec<Check>,
    /// Informational lines, e.g. dB gaps between outage curves.
    pub notes: Vec<String>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// `criterion: passed/total` in first-seen order.
    pub fn summary(&self) -> Vec<(String, usize, usize)> {
        let mut out: Vec<(String, usize, usize)> = Vec::new();
        for c in &self.checks {
            match out.iter_mut().find(|(name, _, _)| *name == c.criterion) {
                Some(entry) => {
                    entry.1 += c.passed as usize;
                    entry.2 += 1;
                }
                None => out.push((c.criterion.clone(), c.passed as usize, 1)),
            }
        }
        out
    }
}

/// `γ̄` (dB) where a decreasing outage curve crosses `target`, by
/// log-linear interpolation.
fn crossing_db(x: &[f64], p: &[f64], target: f64) -> Option<f64> {
    for i in 1..x.len() {
        if p[i - 1] > target && p[i] <= target {
            if p[i] <= 0.0 {
                return Some(x[i]);
            }
            let (a, b) = (p[i - 1].ln(), p[i].ln());
            return Some(x[i - 1] + (x[i] - x[i - 1]) * (a - target.ln()) / (a - b));
        }
    }
    None
}

/// Checks the MC columns of every series against the closed forms.
pub fn compare(kind: ExperimentKind, series: &[ResultSeries]) -> Result<Report> {
    let mut checks = Vec::new();
    let mut notes = Vec::new();
    let mut check = |criterion: &str, case: &str, x: Option<f64>, delta: f64, tolerance: f64| {
        checks.push(Check {
            criterion: criterion.to_string(),
            case: case.to_string(),
            x,
            delta,
            tolerance,
            passed: delta <= tolerance,
        })
    };
    for s in series {
        let label = s.meta.case.label();
        match kind {
            ExperimentKind::Distribution => {
                let ana = s.column("cdf_analytic")?;
                let mc = s.column("cdf_mc")?;
                let ks = s.meta.ks_distance.ok_or_else(|| Error::MissingColumn {
                    column: "ks_distance".into(),
                    context: MANIFEST_FILE.into(),
                })?;
                check("ks-distance", &label, None, ks, KS_TOL);
                let worst = ana.iter().zip(mc).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                check("cdf-grid", &label, None, worst, KS_TOL);
            }
            ExperimentKind::Outage => {
                let ana = s.column("outage_analytic")?;
                let mc = s.column("outage_mc")?;
                let se = s.column("outage_mc_se")?;
                for i in 0..s.x.len() {
                    if mc[i] >= OUTAGE_FLOOR {
                        let tol = (SE_MULTIPLIER * se[i]).max(OUTAGE_REL_TOL * mc[i]);
                        check("outage-agreement", &label, Some(s.x[i]), (ana[i] - mc[i]).abs(), tol);
                    }
                }
                match crossing_db(&s.x, ana, 1e-2) {
                    Some(db) => notes.push(format!("{label}: analytic outage reaches 1e-2 at {db:.2} dB")),
                    None => notes.push(format!("{label}: analytic outage does not cross 1e-2 on the grid")),
                }
            }
            ExperimentKind::Rate => {
                let ub = s.column("rate_ub")?;
                let lb = s.column("rate_lb")?;
                let mc = s.column("rate_mc")?;
                let se = s.column("rate_mc_se")?;
                for i in 0..s.x.len() {
                    let slack = SE_MULTIPLIER * se[i];
                    check("rate-lower-bound", &label, Some(s.x[i]), lb[i] - mc[i], slack);
                    check("rate-upper-bound", &label, Some(s.x[i]), mc[i] - ub[i], slack);
                }
            }
            ExperimentKind::Quantization => {
                let ana = s.column("rate_ratio_quantized")?;
                let mc = s.column("rate_ratio_quantized_mc")?;
                for i in 0..s.x.len() {
                    check("quantized-ratio", &label, Some(s.x[i]), (ana[i] - mc[i]).abs(), RATIO_TOL);
                }
            }
        }
    }
    if kind == ExperimentKind::Outage {
        let gaps: Vec<(String, f64)> = series
            .iter()
            .filter_map(|s| {
                let ana = s.column("outage_analytic").ok()?;
                Some((s.meta.case.label(), crossing_db(&s.x, ana, 1e-2)?))
            })
            .collect();
        if let Some((base, base_db)) = series
            .iter()
            .find(|s| s.meta.case.n == 0)
            .and_then(|s| gaps.iter().find(|(l, _)| *l == s.meta.case.label()).cloned())
        {
            for (label, db) in gaps.iter().filter(|(l, _)| *l != base) {
                notes.push(format!("{label}: {:.2} dB below {base} at 1e-2 outage", base_db - db));
            }
        }
    }
    Ok(Report { checks, notes })
}

/// Reads a result directory and compares it.
pub fn compare_dir(dir: &Path) -> Result<Report> {
    let out = ExperimentOutput::read(dir)?;
    compare(out.manifest.spec.kind, &out.series)
}
