//! Monte Carlo driver: experiment files, per-trial metrics, CSV output and
//! plot-ready aggregates.
//!
//! A trial is a pure function of `(config, sweep value, trial index)`. Its
//! seed is a stable hash of those three values, so trials can run in any
//! order on any number of threads and still produce byte-identical files.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::comm::{comm_receive, zf_benchmark};
use crate::error::{Error, Result};
use crate::sensing::{
    align_permutation, als_fit, check_identifiability, extract_angles, permute_columns,
    remove_sensing_ambiguity, AlsConfig, Violation,
};
use crate::signal::{
    add_noise, comm_forward, sample_scene, sensing_forward, AngleSpec, CommLink, Qam,
    TransmitFrame,
};
use crate::tensor::{frob_sqr, khatri_rao, CMat};

/// Column order of the per-trial CSV.
pub const CSV_HEADER: [&str; 13] = [
    "sweep_var",
    "sweep_value",
    "trial",
    "seed",
    "converged",
    "als_iters",
    "nmse_ar",
    "nmse_at",
    "nmse_gamma",
    "angle_rmse_deg",
    "nmse_h",
    "ser_krf",
    "ser_zf",
];

/// Numeric columns that get aggregated, in CSV order.
pub const METRICS: [&str; 8] = [
    "als_iters",
    "nmse_ar",
    "nmse_at",
    "nmse_gamma",
    "angle_rmse_deg",
    "nmse_h",
    "ser_krf",
    "ser_zf",
];

/// Quantity varied along the sweep axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    #[serde(rename = "es_n0")]
    EsN0,
    N,
    P,
    #[serde(rename = "m_u")]
    MU,
}

impl SweepVar {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepVar::EsN0 => "es_n0",
            SweepVar::N => "n",
            SweepVar::P => "p",
            SweepVar::MU => "m_u",
        }
    }

    /// Short label used in plot file names.
    pub fn label(self) -> &'static str {
        match self {
            SweepVar::EsN0 => "esn0",
            SweepVar::N => "n",
            SweepVar::P => "p",
            SweepVar::MU => "mu",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [SweepVar::EsN0, SweepVar::N, SweepVar::P, SweepVar::MU]
            .into_iter()
            .find(|v| v.as_str() == s)
    }
}

impl fmt::Display for SweepVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    pub m_t: usize,
    pub m_r: usize,
    pub m_u: usize,
    pub p: usize,
    pub n: usize,
    pub k: usize,
    pub l: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub variable: SweepVar,
    /// Values of `n`, `p` or `m_u`; must stay empty for an `es_n0` sweep,
    /// which takes its points from `es_n0_grid`.
    #[serde(default)]
    pub values: Vec<usize>,
}

impl Default for Sweep {
    fn default() -> Self {
        Self {
            variable: SweepVar::EsN0,
            values: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensingSetup {
    pub aoa: AngleSpec,
    pub aod: AngleSpec,
    /// Standard deviation of the reflection coefficients.
    #[serde(default = "one")]
    pub gamma_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommSetup {
    pub aoa: Vec<f64>,
    pub aod: Vec<f64>,
    /// Path gains as `[re, im]` pairs.
    pub gains: Vec<[f64; 2]>,
}

fn one() -> f64 {
    1.0
}

fn default_grid_step() -> f64 {
    crate::sensing::DEFAULT_ANGLE_STEP
}

/// Everything one sweep needs. Loaded from TOML; unknown keys are errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub trials: usize,
    pub base_seed: u64,
    /// QAM order.
    pub constellation: usize,
    /// `Es/N0` points in dB, ascending.
    pub es_n0_grid: Vec<f64>,
    pub outputs: PathBuf,
    #[serde(default)]
    pub noiseless: bool,
    #[serde(default)]
    pub sweep: Sweep,
    /// Grid step of the angle search, degrees.
    #[serde(default = "default_grid_step")]
    pub angle_grid_deg: f64,
    pub dims: Dims,
    pub sensing: SensingSetup,
    pub comm: CommSetup,
    #[serde(default)]
    pub als: AlsConfig,
}

impl ExperimentConfig {
    /// Parses and validates a TOML document.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    /// Sweep points in run order.
    pub fn sweep_values(&self) -> Vec<f64> {
        match self.sweep.variable {
            SweepVar::EsN0 => self.es_n0_grid.clone(),
            _ => self.sweep.values.iter().map(|&v| v as f64).collect(),
        }
    }

    /// Dimensions in force at one sweep point.
    pub fn dims_at(&self, value: f64) -> Dims {
        let mut d = self.dims;
        let v = value as usize;
        match self.sweep.variable {
            SweepVar::EsN0 => {}
            SweepVar::N => d.n = v,
            SweepVar::P => d.p = v,
            SweepVar::MU => d.m_u = v,
        }
        d
    }

    /// `Es/N0` in dB at one sweep point; infinite when noiseless.
    pub fn es_n0_at(&self, value: f64) -> f64 {
        if self.noiseless {
            f64::INFINITY
        } else if self.sweep.variable == SweepVar::EsN0 {
            value
        } else {
            self.es_n0_grid[0]
        }
    }

    /// Checks every structural requirement, including identifiability at
    /// each sweep point, before any computation.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.es_n0_grid.is_empty() {
            return Err(Error::Config("es_n0_grid is empty".into()));
        }
        if self.es_n0_grid.iter().any(|v| v.is_nan()) || !self.es_n0_grid.is_sorted() {
            return Err(Error::Config("es_n0_grid must be sorted ascending".into()));
        }
        match self.sweep.variable {
            SweepVar::EsN0 if !self.sweep.values.is_empty() => {
                return Err(Error::Config(
                    "an es_n0 sweep takes its points from es_n0_grid; sweep.values must be empty"
                        .into(),
                ));
            }
            SweepVar::EsN0 => {}
            _ => {
                if self.sweep.values.is_empty() || !self.sweep.values.is_sorted() {
                    return Err(Error::Config("sweep.values must be non-empty and sorted".into()));
                }
                if self.es_n0_grid.len() != 1 {
                    return Err(Error::Config(format!(
                        "sweeping {} needs exactly one es_n0_grid point, got {}",
                        self.sweep.variable,
                        self.es_n0_grid.len()
                    )));
                }
            }
        }
        for value in self.sweep_values() {
            check_dims(&self.dims_at(value))?;
        }
        Qam::new(self.constellation)?;
        self.als.validate()?;
        if !(self.angle_grid_deg > 0.0) {
            return Err(Error::Config("angle_grid_deg must be positive".into()));
        }
        if !(self.sensing.gamma_std > 0.0) {
            return Err(Error::Config("sensing.gamma_std must be positive".into()));
        }
        let l = self.dims.l;
        if l == 0 || self.comm.aoa.len() != l || self.comm.aod.len() != l || self.comm.gains.len() != l
        {
            return Err(Error::Config(format!(
                "dims.l = {l} but comm has {} AoAs, {} AoDs and {} gains",
                self.comm.aoa.len(),
                self.comm.aod.len(),
                self.comm.gains.len()
            )));
        }
        for &a in self.comm.aoa.iter().chain(&self.comm.aod) {
            if !(a > -90.0 && a < 90.0) {
                return Err(Error::InvalidAngle(a));
            }
        }
        for spec in [&self.sensing.aoa, &self.sensing.aod] {
            match spec {
                AngleSpec::Fixed(v) if v.len() != self.dims.k => {
                    return Err(Error::Config(format!(
                        "{} fixed sensing angles for k = {}",
                        v.len(),
                        self.dims.k
                    )));
                }
                AngleSpec::Fixed(v) => {
                    if let Some(&a) = v.iter().find(|a| !(**a > -90.0 && **a < 90.0)) {
                        return Err(Error::InvalidAngle(a));
                    }
                }
                AngleSpec::Sector([lo, hi]) => {
                    if !(-90.0 < *lo && lo <= hi && *hi < 90.0) {
                        return Err(Error::Config(format!("angle sector [{lo}, {hi}] invalid")));
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_dims(d: &Dims) -> Result<()> {
    if [d.m_t, d.m_r, d.m_u, d.p, d.n, d.k].contains(&0) {
        return Err(Error::Config(format!("all dimensions must be positive: {d:?}")));
    }
    let mut v = check_identifiability(d.m_r, d.m_t, d.p, d.n, d.k).err().unwrap_or_default();
    if d.n < d.m_t {
        v.push(Violation::CodeTooShort { n: d.n, m_t: d.m_t });
    }
    if !v.is_empty() {
        return Err(Error::Identifiability(v));
    }
    if d.m_u < d.m_t {
        return Err(Error::Config(format!(
            "the ZF benchmark needs M_u >= M_t (got {} < {})",
            d.m_u, d.m_t
        )));
    }
    if d.k > 8 {
        return Err(Error::TooManyColumns(d.k));
    }
    Ok(())
}

/// One row of the per-trial CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub sweep_var: SweepVar,
    pub sweep_value: f64,
    pub trial: usize,
    pub seed: u64,
    pub converged: bool,
    pub als_iters: usize,
    pub nmse_ar: f64,
    pub nmse_at: f64,
    pub nmse_gamma: f64,
    pub angle_rmse_deg: f64,
    pub nmse_h: f64,
    pub ser_krf: f64,
    pub ser_zf: f64,
    /// Largest single-angle error; kept in memory, not written to the CSV.
    pub angle_max_err_deg: f64,
}

impl MetricsRecord {
    fn metric(&self, name: &str) -> f64 {
        match name {
            "als_iters" => self.als_iters as f64,
            "nmse_ar" => self.nmse_ar,
            "nmse_at" => self.nmse_at,
            "nmse_gamma" => self.nmse_gamma,
            "angle_rmse_deg" => self.angle_rmse_deg,
            "nmse_h" => self.nmse_h,
            "ser_krf" => self.ser_krf,
            "ser_zf" => self.ser_zf,
            _ => f64::NAN,
        }
    }

    fn csv_fields(&self) -> Vec<String> {
        let f = |x: f64| format!("{x:.16e}");
        vec![
            self.sweep_var.to_string(),
            f(self.sweep_value),
            self.trial.to_string(),
            self.seed.to_string(),
            self.converged.to_string(),
            self.als_iters.to_string(),
            f(self.nmse_ar),
            f(self.nmse_at),
            f(self.nmse_gamma),
            f(self.angle_rmse_deg),
            f(self.nmse_h),
            f(self.ser_krf),
            f(self.ser_zf),
        ]
    }
}

/// `||x_hat - x_true||^2 / ||x_true||^2`.
pub fn nmse(x_hat: &CMat, x_true: &CMat) -> Result<f64> {
    if x_hat.shape() != x_true.shape() {
        return Err(Error::Shape(format!(
            "NMSE of {:?} against {:?}",
            x_hat.shape(),
            x_true.shape()
        )));
    }
    let reference = frob_sqr(x_true);
    if reference == 0.0 {
        return Err(Error::ZeroInput("NMSE reference".into()));
    }
    Ok(frob_sqr(&(x_hat - x_true)) / reference)
}

/// Fraction of entries that differ by more than `1e-9`. Zero for empty input.
pub fn ser(s_hat: &CMat, s_true: &CMat) -> Result<f64> {
    if s_hat.shape() != s_true.shape() {
        return Err(Error::Shape(format!(
            "SER of {:?} against {:?}",
            s_hat.shape(),
            s_true.shape()
        )));
    }
    if s_true.is_empty() {
        return Ok(0.0);
    }
    let wrong = s_hat.iter().zip(s_true.iter()).filter(|(a, b)| (*a - *b).norm() > 1e-9).count();
    Ok(wrong as f64 / s_true.len() as f64)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable seed of one trial.
pub fn trial_seed(base_seed: u64, sweep_value: f64, trial: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(base_seed) ^ sweep_value.to_bits()) ^ trial as u64)
}

/// Independent stream `stream` derived from a trial seed.
fn sub_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream))
}

/// Angle errors after sorting both sets, so that no column matching is needed.
fn angle_errors(est: &[f64], truth: &[f64]) -> Vec<f64> {
    let mut t = truth.to_vec();
    t.sort_by(f64::total_cmp);
    let mut e = est.to_vec();
    e.sort_by(f64::total_cmp);
    e.iter().zip(&t).map(|(a, b)| a - b).collect()
}

/// Symbols that carry data: every row but the known reference row.
fn payload(s: &CMat) -> CMat {
    if s.nrows() > 1 {
        s.rows(1, s.nrows() - 1).into_owned()
    } else {
        s.clone()
    }
}

/// Runs one Monte Carlo realization.
pub fn run_trial(cfg: &ExperimentConfig, sweep_value: f64, trial: usize) -> Result<MetricsRecord> {
    let d = cfg.dims_at(sweep_value);
    let es_n0 = cfg.es_n0_at(sweep_value);
    let seed = trial_seed(cfg.base_seed, sweep_value, trial);
    let qam = Qam::new(cfg.constellation)?;

    let scene = sample_scene(
        d.k,
        d.n,
        cfg.sensing.gamma_std,
        &cfg.sensing.aoa,
        &cfg.sensing.aod,
        d.m_r,
        d.m_t,
        sub_seed(seed, 1),
    )?;
    let frame = TransmitFrame::random(d.p, d.n, d.m_t, qam, sub_seed(seed, 2))?;
    let gains = cfg.comm.gains.iter().map(|g| Complex64::new(g[0], g[1])).collect();
    let link = CommLink::new(cfg.comm.aoa.clone(), cfg.comm.aod.clone(), gains, d.m_u, d.m_t)?;

    let y_sense = add_noise(&sensing_forward(&scene, &frame)?, es_n0, sub_seed(seed, 3));
    let y_ue = add_noise(&comm_forward(&link, &frame)?, es_n0, sub_seed(seed, 4));

    let mut record = MetricsRecord {
        sweep_var: cfg.sweep.variable,
        sweep_value,
        trial,
        seed,
        converged: false,
        als_iters: 0,
        nmse_ar: f64::NAN,
        nmse_at: f64::NAN,
        nmse_gamma: f64::NAN,
        angle_rmse_deg: f64::NAN,
        nmse_h: f64::NAN,
        ser_krf: f64::NAN,
        ser_zf: f64::NAN,
        angle_max_err_deg: f64::NAN,
    };

    let als_cfg = AlsConfig {
        init_seed: cfg.als.init_seed ^ sub_seed(seed, 5),
        ..cfg.als.clone()
    };
    match als_fit(&y_sense, &frame.c, &frame.s_pilot, d.k, &als_cfg) {
        Ok(est) => {
            record.converged = est.converged;
            record.als_iters = est.iters;
            let est = remove_sensing_ambiguity(&est)?;
            let (a_r, a_t) = (scene.a_r(), scene.a_t());
            // align on the joint signature, which separates columns better
            // than either steering matrix alone
            let perm = align_permutation(
                &khatri_rao(&est.a_t_hat, &est.a_r_hat)?,
                &khatri_rao(&a_t, &a_r)?,
            )?;
            record.nmse_ar = nmse(&permute_columns(&est.a_r_hat, &perm), &a_r)?;
            record.nmse_at = nmse(&permute_columns(&est.a_t_hat, &perm), &a_t)?;
            record.nmse_gamma = nmse(&permute_columns(&est.gamma_hat, &perm), &scene.gamma)?;
            let theta = extract_angles(&est.a_r_hat, cfg.angle_grid_deg);
            let phi = extract_angles(&est.a_t_hat, cfg.angle_grid_deg);
            let errs: Vec<f64> = angle_errors(&theta, &scene.theta)
                .into_iter()
                .chain(angle_errors(&phi, &scene.phi))
                .collect();
            record.angle_rmse_deg =
                (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt();
            record.angle_max_err_deg = errs.iter().map(|e| e.abs()).fold(0.0, f64::max);
        }
        // a fit that blows up is a result, not a reason to drop the trial
        Err(Error::Diverged { iteration }) => record.als_iters = iteration,
        Err(Error::SvdNoConvergence { .. }) => {}
        Err(e) => return Err(e),
    }

    let reference: Vec<Complex64> = frame.s_data.row(0).iter().copied().collect();
    let est = comm_receive(&y_ue, &frame.c, &reference, &frame.constellation)?;
    record.nmse_h = nmse(&est.h_hat, &link.h)?;
    record.ser_krf = ser(&payload(&est.s_hat), &payload(&frame.s_data))?;
    let s_zf = zf_benchmark(&y_ue, &link.h, &frame.c, &frame.constellation)?;
    record.ser_zf = ser(&payload(&s_zf), &payload(&frame.s_data))?;
    Ok(record)
}

/// All trials of a sweep, ordered by sweep point then trial index.
pub fn run_records(cfg: &ExperimentConfig) -> Result<Vec<MetricsRecord>> {
    cfg.validate()?;
    let jobs: Vec<(f64, usize)> = cfg
        .sweep_values()
        .into_iter()
        .flat_map(|v| (0..cfg.trials).map(move |t| (v, t)))
        .collect();
    // collect() keeps the job order, whatever the scheduling
    jobs.par_iter().map(|&(v, t)| run_trial(cfg, v, t)).collect()
}

/// Median and mean of one metric at one sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub median: f64,
    pub mean: f64,
}

/// Aggregates over the finite values only; NaN when there are none.
pub fn aggregate(values: &[f64]) -> Aggregate {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return Aggregate {
            median: f64::NAN,
            mean: f64::NAN,
        };
    }
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    let median = if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    };
    Aggregate {
        median,
        mean: v.iter().sum::<f64>() / v.len() as f64,
    }
}

/// Summary of one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub sweep_var: SweepVar,
    pub sweep_value: f64,
    pub trials: usize,
    pub converged: usize,
    /// One entry per name in [`METRICS`].
    pub metrics: Vec<Aggregate>,
}

impl SummaryRow {
    pub fn get(&self, metric: &str) -> Option<Aggregate> {
        METRICS.iter().position(|m| *m == metric).map(|i| self.metrics[i])
    }
}

/// Groups records by sweep value (ascending) and aggregates every metric.
pub fn summarize(records: &[MetricsRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<u64, Vec<&MetricsRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(order_key(r.sweep_value)).or_default().push(r);
    }
    groups
        .into_values()
        .map(|rows| SummaryRow {
            sweep_var: rows[0].sweep_var,
            sweep_value: rows[0].sweep_value,
            trials: rows.len(),
            converged: rows.iter().filter(|r| r.converged).count(),
            metrics: METRICS
                .iter()
                .map(|m| aggregate(&rows.iter().map(|r| r.metric(m)).collect::<Vec<_>>()))
                .collect(),
        })
        .collect()
}

/// Maps an `f64` to a `u64` with the same ordering (NaN aside).
fn order_key(x: f64) -> u64 {
    let b = x.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

pub fn write_trials_csv(records: &[MetricsRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record(r.csv_fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv(rows: &[SummaryRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![
        "sweep_var".to_string(),
        "sweep_value".into(),
        "trials".into(),
        "converged".into(),
    ];
    for m in METRICS {
        header.push(format!("median_{m}"));
        header.push(format!("mean_{m}"));
    }
    w.write_record(&header)?;
    for row in rows {
        let mut fields = vec![
            row.sweep_var.to_string(),
            format!("{:.16e}", row.sweep_value),
            row.trials.to_string(),
            row.converged.to_string(),
        ];
        for a in &row.metrics {
            fields.push(format!("{:.16e}", a.median));
            fields.push(format!("{:.16e}", a.mean));
        }
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

/// What [`run_sweep`] produced.
#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub records: Vec<MetricsRecord>,
    pub summary: Vec<SummaryRow>,
    pub trials_csv: PathBuf,
    pub summary_csv: PathBuf,
}

/// Runs every trial and writes `trials.csv` and `summary.csv` into
/// `cfg.outputs`.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepOutput> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.outputs)?;
    let records = run_records(cfg)?;
    let summary = summarize(&records);
    let trials_csv = cfg.outputs.join("trials.csv");
    let summary_csv = cfg.outputs.join("summary.csv");
    write_trials_csv(&records, &trials_csv)?;
    write_summary_csv(&summary, &summary_csv)?;
    Ok(SweepOutput {
        records,
        summary,
        trials_csv,
        summary_csv,
    })
}

/// Reads a per-trial CSV back into records. The in-memory-only maximum
/// angle error comes back as NaN.
pub fn read_trials_csv(path: &Path) -> Result<Vec<MetricsRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::MalformedCsv(format!("unexpected header {header:?}")));
    }
    let mut out = Vec::new();
    for (line, row) in r.records().enumerate() {
        let row = row.map_err(|e| Error::MalformedCsv(e.to_string()))?;
        let bad = |col: &str| Error::MalformedCsv(format!("data row {}: bad {col}", line + 1));
        let float = |i: usize| row[i].trim().parse::<f64>().map_err(|_| bad(CSV_HEADER[i]));
        let int = |i: usize| row[i].trim().parse::<u64>().map_err(|_| bad(CSV_HEADER[i]));
        if row.len() != CSV_HEADER.len() {
            return Err(Error::MalformedCsv(format!("data row {} has {} fields", line + 1, row.len())));
        }
        out.push(MetricsRecord {
            sweep_var: SweepVar::parse(&row[0]).ok_or_else(|| bad("sweep_var"))?,
            sweep_value: float(1)?,
            trial: int(2)? as usize,
            seed: int(3)?,
            converged: row[4].trim().parse().map_err(|_| bad("converged"))?,
            als_iters: int(5)? as usize,
            nmse_ar: float(6)?,
            nmse_at: float(7)?,
            nmse_gamma: float(8)?,
            angle_rmse_deg: float(9)?,
            nmse_h: float(10)?,
            ser_krf: float(11)?,
            ser_zf: float(12)?,
            angle_max_err_deg: f64::NAN,
        });
    }
    Ok(out)
}

/// Writes `<metric>_vs_<sweep>.dat` next to the CSV for every metric: a
/// `#` header line, then `sweep_value mean` per sweep point. Points with no
/// finite value are skipped, so an empty column yields a header-only file.
pub fn emit_plot_data(csv_path: &Path) -> Result<Vec<PathBuf>> {
    let records = read_trials_csv(csv_path)?;
    let dir = csv_path.parent().unwrap_or(Path::new("."));
    let label = records.first().map_or("sweep", |r| r.sweep_var.label());
    let summary = summarize(&records);
    let mut written = Vec::new();
    for (i, metric) in METRICS.iter().enumerate() {
        let mut text = format!("# {label} mean_{metric}\n");
        for row in &summary {
            let mean = row.metrics[i].mean;
            if mean.is_finite() {
                text.push_str(&format!("{:.16e} {:.16e}\n", row.sweep_value, mean));
            }
        }
        let path = dir.join(format!("{metric}_vs_{label}.dat"));
        fs::write(&path, text)?;
        written.push(path);
    }
    Ok(written)
}
