//! Alternating-least-squares PARATUCK-2 receiver for the sensing BS.
//!
//! The sensing tensor has frontal slices
//! `Y..n = A_R D_n(Gamma) A_T^T D_n(C) S^T` with the pilots `S` and the code
//! `C` known. Each iteration solves three linear LS problems in turn:
//!
//! 1. `A_R` from the flat mode-1 unfolding `Y(1) = A_R F`;
//! 2. `A_T` from the stacked system `y = M vec(A_T^T)`, where block `n` of `M`
//!    is `S D_n(C) (x) A_R D_n(Gamma)`;
//! 3. each row of `Gamma` from `vec(Y..n) = (G..n <> A_R) Gamma_n^T` with
//!    `G..n = S D_n(C) A_T`.
//!
//! Every step is an exact minimizer of the same cost over one block, so the
//! reconstruction error cannot increase between iterations. The cost of an
//! iteration is dominated by the pseudoinverses of `F` (`K x NP`) and of `M`
//! (`NPM_r x M_tK`).
//!
//! The fit is unique only up to column permutation and per-column scaling
//! of the three factors. [`remove_sensing_ambiguity`] fixes the scaling using
//! the unit first entry of ULA steering vectors; permutation does not affect
//! the angle sets and is only resolved ([`align_permutation`]) for metrics.

use std::fmt;

use itertools::Itertools;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{complex_gaussian, paratuck_synthesize, steering_vector};
use crate::tensor::{khatri_rao, kronecker, pinv, unvectorize, vectorize, CMat, Tensor3};

/// One failed inequality of the identifiability conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    /// `N P >= K` (flat mode-1 LS for `A_R`).
    SlotsTimesPilots { np: usize, k: usize },
    /// `N P M_r >= M_t K` (stacked LS for `A_T`).
    StackedRows { npm_r: usize, m_t_k: usize },
    /// `P M_r >= K` (per-slot LS for `Gamma`).
    SlotRows { pm_r: usize, k: usize },
    /// `N >= M_t` (code projection at the UE).
    CodeTooShort { n: usize, m_t: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::SlotsTimesPilots { np, k } => write!(f, "NP >= K fails ({np} < {k})"),
            Violation::StackedRows { npm_r, m_t_k } => {
                write!(f, "NPM_r >= M_t*K fails ({npm_r} < {m_t_k})")
            }
            Violation::SlotRows { pm_r, k } => write!(f, "PM_r >= K fails ({pm_r} < {k})"),
            Violation::CodeTooShort { n, m_t } => write!(f, "N >= M_t fails ({n} < {m_t})"),
        }
    }
}

/// Accepts iff `NP >= K`, `NPM_r >= M_t K` and `PM_r >= K`; otherwise lists
/// every violated inequality.
pub fn check_identifiability(
    m_r: usize,
    m_t: usize,
    p: usize,
    n: usize,
    k: usize,
) -> std::result::Result<(), Vec<Violation>> {
    let mut v = Vec::new();
    if n * p < k {
        v.push(Violation::SlotsTimesPilots { np: n * p, k });
    }
    if n * p * m_r < m_t * k {
        v.push(Violation::StackedRows {
            npm_r: n * p * m_r,
            m_t_k: m_t * k,
        });
    }
    if p * m_r < k {
        v.push(Violation::SlotRows { pm_r: p * m_r, k });
    }
    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}

/// Largest target count the sensing receiver supports: `min(NP, NPM_r / M_t)`
/// further capped by `PM_r`.
pub fn max_targets(m_r: usize, m_t: usize, p: usize, n: usize) -> usize {
    (n * p).min(n * p * m_r / m_t).min(p * m_r)
}

/// Scales the columns of `m` by row `n` of `d`, i.e. `m D_n(d)`.
fn scale_cols(m: &CMat, d: &CMat, n: usize) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * d[(n, j)])
}

fn check_factor_shapes(gamma: &CMat, a_t: &CMat, c: &CMat, s: &CMat) -> Result<()> {
    let k = gamma.ncols();
    if a_t.ncols() != k || c.nrows() != gamma.nrows() || c.ncols() != a_t.nrows() || s.ncols() != a_t.nrows()
    {
        return Err(Error::Shape(format!(
            "Gamma {:?}, A_T {:?}, C {:?}, S {:?}",
            gamma.shape(),
            a_t.shape(),
            c.shape(),
            s.shape()
        )));
    }
    Ok(())
}

/// `F = [F..0 ... F..N-1]` with `F..n = D_n(Gamma) A_T^T D_n(C) S^T`, size `K x NP`.
pub fn build_f(gamma: &CMat, a_t: &CMat, c: &CMat, s_pilot: &CMat) -> Result<CMat> {
    check_factor_shapes(gamma, a_t, c, s_pilot)?;
    let (n, k, p) = (gamma.nrows(), gamma.ncols(), s_pilot.nrows());
    let mut f = CMat::zeros(k, n * p);
    for slot in 0..n {
        // (S D_n(C) A_T D_n(Gamma))^T
        let g = scale_cols(s_pilot, c, slot) * a_t;
        let block = scale_cols(&g, gamma, slot).transpose();
        f.columns_mut(slot * p, p).copy_from(&block);
    }
    Ok(f)
}

/// `A_R = Y(1) F^+`.
pub fn estimate_a_r(y1: &CMat, f: &CMat, rcond: f64) -> Result<CMat> {
    if y1.ncols() != f.ncols() {
        return Err(Error::Shape(format!(
            "Y(1) has {} columns, F has {}",
            y1.ncols(),
            f.ncols()
        )));
    }
    Ok(y1 * pinv(f, rcond)?)
}

/// Stacked system matrix `M` whose block `n` is `S D_n(C) (x) A_R D_n(Gamma)`.
pub fn stacked_system(a_r: &CMat, gamma: &CMat, c: &CMat, s_pilot: &CMat) -> CMat {
    let (n, p, m_r) = (c.nrows(), s_pilot.nrows(), a_r.nrows());
    let cols = c.ncols() * a_r.ncols();
    let mut m = CMat::zeros(n * p * m_r, cols);
    for slot in 0..n {
        let block = kronecker(&scale_cols(s_pilot, c, slot), &scale_cols(a_r, gamma, slot));
        m.rows_mut(slot * p * m_r, p * m_r).copy_from(&block);
    }
    m
}

/// `vec(A_T^T) = M^+ y`, reshaped back to `M_t x K`.
pub fn estimate_a_t(
    y: &Tensor3,
    a_r: &CMat,
    gamma: &CMat,
    c: &CMat,
    s_pilot: &CMat,
    rcond: f64,
) -> Result<CMat> {
    let (m_r, p, n) = y.dims();
    let (k, m_t) = (a_r.ncols(), c.ncols());
    if n * p * m_r < m_t * k {
        return Err(Error::Identifiability(vec![Violation::StackedRows {
            npm_r: n * p * m_r,
            m_t_k: m_t * k,
        }]));
    }
    if a_r.nrows() != m_r || gamma.shape() != (n, k) || c.nrows() != n || s_pilot.shape() != (p, m_t) {
        return Err(Error::Shape(format!(
            "tensor {:?} with A_R {:?}, Gamma {:?}, C {:?}, S {:?}",
            y.dims(),
            a_r.shape(),
            gamma.shape(),
            c.shape(),
            s_pilot.shape()
        )));
    }
    let m = stacked_system(a_r, gamma, c, s_pilot);
    let rhs = vectorize(&y.unfold3_tall());
    let x = pinv(&m, rcond)? * rhs;
    Ok(unvectorize(&x, k, m_t)?.transpose())
}

/// Row `n` of `Gamma` from `vec(Y..n) = (G..n <> A_R) Gamma_n^T`.
pub fn estimate_gamma(
    y: &Tensor3,
    a_r: &CMat,
    a_t: &CMat,
    c: &CMat,
    s_pilot: &CMat,
    rcond: f64,
) -> Result<CMat> {
    let (m_r, p, n) = y.dims();
    let k = a_r.ncols();
    if p * m_r < k {
        return Err(Error::Identifiability(vec![Violation::SlotRows { pm_r: p * m_r, k }]));
    }
    if a_r.nrows() != m_r || a_t.ncols() != k || c.shape() != (n, a_t.nrows()) || s_pilot.shape() != (p, a_t.nrows())
    {
        return Err(Error::Shape(format!(
            "tensor {:?} with A_R {:?}, A_T {:?}, C {:?}, S {:?}",
            y.dims(),
            a_r.shape(),
            a_t.shape(),
            c.shape(),
            s_pilot.shape()
        )));
    }
    let tall = y.unfold3_tall();
    let mut gamma = CMat::zeros(n, k);
    for slot in 0..n {
        let g = scale_cols(s_pilot, c, slot) * a_t;
        let basis = khatri_rao(&g, a_r)?;
        let row = pinv(&basis, rcond)? * tall.column(slot);
        gamma.set_row(slot, &row.transpose());
    }
    Ok(gamma)
}

/// Stopping rule and initialization of [`als_fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlsConfig {
    pub max_iters: usize,
    /// Threshold on the change of the normalized reconstruction error.
    pub tol: f64,
    /// Relative singular-value cutoff for every pseudoinverse.
    pub rcond: f64,
    pub init_seed: u64,
    /// Independent random initializations; the best final fit is kept.
    pub n_restarts: usize,
    /// Try an extrapolated point along the last update direction before
    /// each sweep, kept only when it lowers the error.
    pub line_search: bool,
}

impl Default for AlsConfig {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            tol: 1e-6,
            rcond: crate::tensor::DEFAULT_RCOND,
            init_seed: 0,
            n_restarts: 1,
            line_search: true,
        }
    }
}

impl AlsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || !(self.tol > 0.0) || self.n_restarts == 0 || !(self.rcond >= 0.0) {
            return Err(Error::Config(format!(
                "ALS needs max_iters >= 1, tol > 0, n_restarts >= 1, rcond >= 0 (got {}, {}, {}, {})",
                self.max_iters, self.tol, self.n_restarts, self.rcond
            )));
        }
        Ok(())
    }
}

/// The three sensing factors.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingFactors {
    /// `M_r x K` receive steering matrix.
    pub a_r: CMat,
    /// `M_t x K` transmit steering matrix.
    pub a_t: CMat,
    /// `N x K` reflection coefficients.
    pub gamma: CMat,
}

impl SensingFactors {
    /// Standard complex Gaussian factors.
    pub fn random(m_r: usize, m_t: usize, n: usize, k: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a_r = complex_gaussian(m_r, k, 1.0, &mut rng);
        let gamma = complex_gaussian(n, k, 1.0, &mut rng);
        let a_t = complex_gaussian(m_t, k, 1.0, &mut rng);
        Self { a_r, a_t, gamma }
    }

    pub fn synthesize(&self, c: &CMat, s_pilot: &CMat) -> Result<Tensor3> {
        paratuck_synthesize(&self.a_r, &self.gamma, &self.a_t, c, s_pilot)
    }

    /// `self + step (self - old)` factor by factor.
    fn extrapolate(&self, old: &SensingFactors, step: f64) -> SensingFactors {
        let go = |x: &CMat, o: &CMat| x + (x - o) * Complex64::new(step, 0.0);
        SensingFactors {
            a_r: go(&self.a_r, &old.a_r),
            a_t: go(&self.a_t, &old.a_t),
            gamma: go(&self.gamma, &old.gamma),
        }
    }

    fn is_finite(&self) -> bool {
        [&self.a_r, &self.a_t, &self.gamma]
            .iter()
            .all(|m| m.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }
}

/// Output of the sensing receiver.
#[derive(Debug, Clone)]
pub struct SensingEstimate {
    pub a_r_hat: CMat,
    pub a_t_hat: CMat,
    pub gamma_hat: CMat,
    /// Normalized squared reconstruction error after each iteration.
    pub nmse_trace: Vec<f64>,
    pub converged: bool,
    pub iters: usize,
    /// Angles of arrival extracted from `a_r_hat`, ascending, degrees.
    pub theta_hat: Vec<f64>,
    /// Angles of departure extracted from `a_t_hat`, ascending, degrees.
    pub phi_hat: Vec<f64>,
}

impl SensingEstimate {
    pub fn final_error(&self) -> f64 {
        self.nmse_trace.last().copied().unwrap_or(f64::INFINITY)
    }

    pub fn factors(&self) -> SensingFactors {
        SensingFactors {
            a_r: self.a_r_hat.clone(),
            a_t: self.a_t_hat.clone(),
            gamma: self.gamma_hat.clone(),
        }
    }
}

/// Grid step, in degrees, used for the angles reported by [`als_fit`].
pub const DEFAULT_ANGLE_STEP: f64 = 0.1;

/// Fits the sensing tensor from random starts, keeping the restart with the
/// smallest final reconstruction error.
pub fn als_fit(
    y: &Tensor3,
    c: &CMat,
    s_pilot: &CMat,
    k: usize,
    cfg: &AlsConfig,
) -> Result<SensingEstimate> {
    cfg.validate()?;
    let (m_r, p, n) = y.dims();
    let m_t = c.ncols();
    check_identifiability(m_r, m_t, p, n, k).map_err(Error::Identifiability)?;

    let mut best: Option<SensingEstimate> = None;
    let mut first_err = None;
    for r in 0..cfg.n_restarts as u64 {
        let seed = cfg.init_seed.wrapping_add(r.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let init = SensingFactors::random(m_r, m_t, n, k, seed);
        match als_fit_from(y, c, s_pilot, init, cfg) {
            Ok(est) => {
                if best.as_ref().is_none_or(|b| est.final_error() < b.final_error()) {
                    best = Some(est);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.expect("at least one restart ran"))
}

/// Runs the ALS iterations from a given starting point. The update order is
/// `A_R -> A_T -> Gamma`, each step using the freshest factors.
pub fn als_fit_from(
    y: &Tensor3,
    c: &CMat,
    s_pilot: &CMat,
    init: SensingFactors,
    cfg: &AlsConfig,
) -> Result<SensingEstimate> {
    cfg.validate()?;
    let (m_r, p, n) = y.dims();
    if init.a_r.nrows() != m_r || init.gamma.nrows() != n || s_pilot.nrows() != p {
        return Err(Error::Shape(format!(
            "initial factors A_R {:?}, Gamma {:?} for tensor {:?}",
            init.a_r.shape(),
            init.gamma.shape(),
            y.dims()
        )));
    }
    check_factor_shapes(&init.gamma, &init.a_t, c, s_pilot)?;

    let energy = y.norm_sqr();
    if energy == 0.0 {
        return Err(Error::ZeroInput("sensing tensor".into()));
    }
    let y1 = y.unfold1_flat();
    let error_of = |f: &SensingFactors| -> Result<f64> {
        Ok(y.dist_sqr(&f.synthesize(c, s_pilot)?)? / energy)
    };

    let mut fac = init;
    let mut prev = error_of(&fac)?;
    let mut trace = Vec::with_capacity(cfg.max_iters.min(1024));
    let mut converged = false;
    let mut last: Option<SensingFactors> = None;

    for it in 1..=cfg.max_iters {
        if let Some(old) = last.take().filter(|_| cfg.line_search) {
            let cand = fac.extrapolate(&old, (it as f64).cbrt());
            if cand.is_finite() {
                let e = error_of(&cand)?;
                if e < prev {
                    fac = cand;
                }
            }
        }
        if cfg.line_search {
            last = Some(fac.clone());
        }
        let f = build_f(&fac.gamma, &fac.a_t, c, s_pilot)?;
        fac.a_r = estimate_a_r(&y1, &f, cfg.rcond)?;
        fac.a_t = estimate_a_t(y, &fac.a_r, &fac.gamma, c, s_pilot, cfg.rcond)?;
        fac.gamma = estimate_gamma(y, &fac.a_r, &fac.a_t, c, s_pilot, cfg.rcond)?;

        let err = if fac.is_finite() { error_of(&fac)? } else { f64::NAN };
        if !err.is_finite() {
            return Err(Error::Diverged { iteration: it });
        }
        trace.push(err);
        if (err - prev).abs() < cfg.tol {
            converged = true;
            break;
        }
        prev = err;
    }

    let theta_hat = extract_angles(&fac.a_r, DEFAULT_ANGLE_STEP);
    let phi_hat = extract_angles(&fac.a_t, DEFAULT_ANGLE_STEP);
    Ok(SensingEstimate {
        iters: trace.len(),
        a_r_hat: fac.a_r,
        a_t_hat: fac.a_t,
        gamma_hat: fac.gamma,
        nmse_trace: trace,
        converged,
        theta_hat,
        phi_hat,
    })
}

/// Fixes the per-column scaling: divides each column of `A_R` and of `A_T`
/// by its first entry and moves both factors into `Gamma`.
///
/// The slot scalars `z_n` of the PARATUCK ambiguity cannot appear here: a
/// nonunit `z_n` would have to be absorbed by row `n` of the known code.
pub fn remove_sensing_ambiguity(est: &SensingEstimate) -> Result<SensingEstimate> {
    let mut out = est.clone();
    let k = est.a_r_hat.ncols();
    for col in 0..k {
        let lr = est.a_r_hat[(0, col)];
        let lt = est.a_t_hat[(0, col)];
        for (name, l) in [("A_R", lr), ("A_T", lt)] {
            if l.norm() == 0.0 || !l.re.is_finite() || !l.im.is_finite() {
                return Err(Error::Degenerate(format!(
                    "first row of {name} has a zero entry in column {col}"
                )));
            }
        }
        for z in out.a_r_hat.column_mut(col).iter_mut() {
            *z /= lr;
        }
        for z in out.a_t_hat.column_mut(col).iter_mut() {
            *z /= lt;
        }
        let scale: Complex64 = lr * lt;
        for z in out.gamma_hat.column_mut(col).iter_mut() {
            *z *= scale;
        }
    }
    Ok(out)
}

fn normalized_corr(a: nalgebra::DVectorView<'_, Complex64>, b: nalgebra::DVectorView<'_, Complex64>) -> f64 {
    let den = a.norm() * b.norm();
    if den == 0.0 {
        0.0
    } else {
        a.dotc(&b).norm() / den
    }
}

/// Permutation `perm` such that column `perm[k]` of `est_cols` best matches
/// column `k` of `true_cols`, maximizing the summed normalized correlation
/// over all `K!` candidates.
pub fn align_permutation(est_cols: &CMat, true_cols: &CMat) -> Result<Vec<usize>> {
    let k = true_cols.ncols();
    if est_cols.ncols() != k || est_cols.nrows() != true_cols.nrows() {
        return Err(Error::Shape(format!(
            "cannot align {:?} with {:?}",
            est_cols.shape(),
            true_cols.shape()
        )));
    }
    if k > 8 {
        return Err(Error::TooManyColumns(k));
    }
    let corr = CMat::from_fn(k, k, |e, t| {
        Complex64::new(normalized_corr(est_cols.column(e), true_cols.column(t)), 0.0)
    });
    let mut best = (0..k).collect::<Vec<_>>();
    let mut best_score = f64::NEG_INFINITY;
    for perm in (0..k).permutations(k) {
        let score: f64 = perm.iter().enumerate().map(|(t, &e)| corr[(e, t)].re).sum();
        if score > best_score + 1e-15 {
            best_score = score;
            best = perm;
        }
    }
    Ok(best)
}

/// Column `k` of the result is column `perm[k]` of `m`.
pub fn permute_columns(m: &CMat, perm: &[usize]) -> CMat {
    CMat::from_fn(m.nrows(), perm.len(), |i, k| m[(i, perm[k])])
}

fn steering_match(col: nalgebra::DVectorView<'_, Complex64>, angle: f64) -> f64 {
    let a = steering_vector(angle, col.len()).expect("search stays inside (-90, 90)");
    normalized_corr(a.column(0), col)
}

const ANGLE_LIMIT: f64 = 89.9;

/// One angle per column: grid search of the normalized correlation with the
/// ULA response over `[-89.9, 89.9]`, refined by golden-section search in
/// the winning cell. Sorted ascending.
pub fn extract_angles(a_hat: &CMat, grid_step: f64) -> Vec<f64> {
    let step = if grid_step > 0.0 { grid_step } else { DEFAULT_ANGLE_STEP };
    let cells = (2.0 * ANGLE_LIMIT / step).round() as usize;
    let mut out: Vec<f64> = a_hat
        .column_iter()
        .map(|col| {
            let mut best = (-ANGLE_LIMIT, f64::NEG_INFINITY);
            for i in 0..=cells {
                let th = (-ANGLE_LIMIT + i as f64 * step).min(ANGLE_LIMIT);
                let score = steering_match(col, th);
                if score > best.1 {
                    best = (th, score);
                }
            }
            let lo = (best.0 - step).max(-ANGLE_LIMIT);
            let hi = (best.0 + step).min(ANGLE_LIMIT);
            let refined = golden_max(|th| steering_match(col, th), lo, hi, 1e-9);
            if steering_match(col, refined) >= best.1 {
                refined
            } else {
                best.0
            }
        })
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}
