//! Physical signal model: array responses, codes, constellations, and the
//! synthesis of the sensing (PARATUCK-2) and UE (PARAFAC) tensors.
//!
//! Arrays are half-wavelength uniform linear arrays, so every steering vector
//! starts with a unit entry. Transmit symbols come from a unit-average-energy
//! square QAM grid and the noise level is set per tensor entry as
//! `N0 = 10^(-EsN0/10)` with `Es = 1`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{CMat, Tensor3};

/// `exp(j pi i sin(angle))` for `i = 0..m`, angle in degrees.
pub fn steering_vector(angle_deg: f64, m: usize) -> Result<CMat> {
    if !(angle_deg > -90.0 && angle_deg < 90.0) {
        return Err(Error::InvalidAngle(angle_deg));
    }
    let phase = PI * angle_deg.to_radians().sin();
    Ok(CMat::from_fn(m, 1, |i, _| Complex64::from_polar(1.0, phase * i as f64)))
}

/// `[a(angle_0) ... a(angle_K-1)]`, size `m x K`.
pub fn steering_matrix(angles_deg: &[f64], m: usize) -> Result<CMat> {
    if angles_deg.is_empty() {
        return Err(Error::Shape("steering matrix needs at least one angle".into()));
    }
    let mut out = CMat::zeros(m, angles_deg.len());
    for (k, &a) in angles_deg.iter().enumerate() {
        out.columns_mut(k, 1).copy_from(&steering_vector(a, m)?);
    }
    Ok(out)
}

/// Column-orthonormal KRST code: the first `m_t` columns of the `n`-point
/// DFT matrix scaled by `1/sqrt(n)`, so that `C^T C* = I`.
pub fn krst_code(n: usize, m_t: usize) -> Result<CMat> {
    if n < m_t {
        return Err(Error::Identifiability(vec![
            crate::sensing::Violation::CodeTooShort { n, m_t },
        ]));
    }
    let scale = 1.0 / (n as f64).sqrt();
    Ok(CMat::from_fn(n, m_t, |r, col| {
        Complex64::from_polar(scale, -2.0 * PI * (r * col) as f64 / n as f64)
    }))
}

/// Square QAM constellation normalized to unit average energy.
///
/// Index `i` maps to in-phase level `i % side` and quadrature level
/// `i / side`. Hard decisions pick the closest point; exact ties go to the
/// lowest index.
#[derive(Debug, Clone, PartialEq)]
pub struct Qam {
    order: usize,
    points: Vec<Complex64>,
}

impl Qam {
    pub fn new(order: usize) -> Result<Self> {
        let side = (order as f64).sqrt().round() as usize;
        if order < 4 || side * side != order || !side.is_power_of_two() {
            return Err(Error::InvalidQamOrder(order));
        }
        // levels +-1, +-3, ... have mean energy 2 (M - 1) / 3
        let norm = (2.0 * (order as f64 - 1.0) / 3.0).sqrt();
        let level = |k: usize| (2.0 * k as f64 - (side as f64 - 1.0)) / norm;
        let points = (0..order)
            .map(|i| Complex64::new(level(i % side), level(i / side)))
            .collect();
        Ok(Self { order, points })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn modulate(&self, indices: &[usize]) -> Result<Vec<Complex64>> {
        indices
            .iter()
            .map(|&i| {
                self.points.get(i).copied().ok_or(Error::InvalidSymbolIndex {
                    index: i,
                    order: self.order,
                })
            })
            .collect()
    }

    /// Index of the nearest constellation point.
    pub fn decide(&self, z: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }

    pub fn demodulate(&self, symbols: &[Complex64]) -> Vec<usize> {
        symbols.iter().map(|&z| self.decide(z)).collect()
    }

    /// Snaps every entry of `m` onto the grid.
    pub fn slice(&self, m: &CMat) -> CMat {
        m.map(|z| self.points[self.decide(z)])
    }

    /// A `rows x cols` matrix of uniformly drawn symbols.
    pub fn random_matrix(&self, rows: usize, cols: usize, rng: &mut impl Rng) -> CMat {
        CMat::from_fn(rows, cols, |_, _| self.points[rng.random_range(0..self.order)])
    }
}

/// How a set of angles is chosen for each realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum AngleSpec {
    /// Fixed list of angles in degrees.
    Fixed(Vec<f64>),
    /// Independent uniform draws in `[lo, hi]` degrees.
    Sector([f64; 2]),
}

impl AngleSpec {
    pub fn draw(&self, count: usize, rng: &mut impl Rng) -> Result<Vec<f64>> {
        match self {
            AngleSpec::Fixed(v) => {
                if v.len() != count {
                    return Err(Error::Shape(format!(
                        "{} fixed angles given, {count} required",
                        v.len()
                    )));
                }
                Ok(v.clone())
            }
            AngleSpec::Sector([lo, hi]) => {
                if !(-90.0 < *lo && lo <= hi && *hi < 90.0) {
                    return Err(Error::Config(format!("angle sector [{lo}, {hi}] invalid")));
                }
                Ok((0..count).map(|_| rng.random_range(*lo..=*hi)).collect())
            }
        }
    }
}

/// Targets seen by the sensing receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingScene {
    /// Angles of arrival at the sensing BS, degrees.
    pub theta: Vec<f64>,
    /// Angles of departure at the transmit BS, degrees.
    pub phi: Vec<f64>,
    /// `N x K` reflection coefficients.
    pub gamma: CMat,
    pub m_r: usize,
    pub m_t: usize,
}

impl SensingScene {
    pub fn new(theta: Vec<f64>, phi: Vec<f64>, gamma: CMat, m_r: usize, m_t: usize) -> Result<Self> {
        let k = theta.len();
        if k == 0 || phi.len() != k || gamma.ncols() != k || gamma.nrows() == 0 {
            return Err(Error::Shape(format!(
                "scene with {} AoAs, {} AoDs and a {}x{} reflection matrix",
                k,
                phi.len(),
                gamma.nrows(),
                gamma.ncols()
            )));
        }
        for &a in theta.iter().chain(&phi) {
            if !(a > -90.0 && a < 90.0) {
                return Err(Error::InvalidAngle(a));
            }
        }
        Ok(Self {
            theta,
            phi,
            gamma,
            m_r,
            m_t,
        })
    }

    pub fn k(&self) -> usize {
        self.theta.len()
    }

    pub fn n(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn a_r(&self) -> CMat {
        steering_matrix(&self.theta, self.m_r).expect("angles validated at construction")
    }

    pub fn a_t(&self) -> CMat {
        steering_matrix(&self.phi, self.m_t).expect("angles validated at construction")
    }
}

/// Draws a scene with i.i.d. `CN(0, sigma^2)` reflection coefficients.
#[allow(clippy::too_many_arguments)]
pub fn sample_scene(
    k: usize,
    n: usize,
    sigma: f64,
    aoa: &AngleSpec,
    aod: &AngleSpec,
    m_r: usize,
    m_t: usize,
    seed: u64,
) -> Result<SensingScene> {
    if k == 0 || n == 0 || !(sigma > 0.0) {
        return Err(Error::Config(format!(
            "scene needs k >= 1, n >= 1, sigma > 0 (got {k}, {n}, {sigma})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta = aoa.draw(k, &mut rng)?;
    let phi = aod.draw(k, &mut rng)?;
    let gamma = complex_gaussian(n, k, sigma * sigma, &mut rng);
    SensingScene::new(theta, phi, gamma, m_r, m_t)
}

/// Downlink between the transmit BS and the UE.
#[derive(Debug, Clone, PartialEq)]
pub struct CommLink {
    /// Angles of arrival at the UE, degrees.
    pub theta_ue: Vec<f64>,
    /// Angles of departure at the BS, degrees.
    pub phi_ue: Vec<f64>,
    /// Path gains, the diagonal of `G`.
    pub gains: Vec<Complex64>,
    pub m_u: usize,
    pub m_t: usize,
    /// `A_R(theta_ue) G A_T(phi_ue)^T`, size `m_u x m_t`.
    pub h: CMat,
}

impl CommLink {
    pub fn new(
        theta_ue: Vec<f64>,
        phi_ue: Vec<f64>,
        gains: Vec<Complex64>,
        m_u: usize,
        m_t: usize,
    ) -> Result<Self> {
        let l = gains.len();
        if l == 0 || theta_ue.len() != l || phi_ue.len() != l {
            return Err(Error::Shape(format!(
                "link with {} AoAs, {} AoDs and {l} gains",
                theta_ue.len(),
                phi_ue.len()
            )));
        }
        let a_r = steering_matrix(&theta_ue, m_u)?;
        let a_t = steering_matrix(&phi_ue, m_t)?;
        let g = CMat::from_diagonal(&nalgebra::DVector::from_vec(gains.clone()));
        let h = a_r * g * a_t.transpose();
        Ok(Self {
            theta_ue,
            phi_ue,
            gains,
            m_u,
            m_t,
            h,
        })
    }
}

/// Everything the transmit BS sends over the `N` slots.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitFrame {
    /// `P x M_t` pilots seen by the sensing receiver.
    pub s_pilot: CMat,
    /// `P x M_t` data symbols for the UE; row 0 is known to the UE.
    pub s_data: CMat,
    /// `N x M_t` KRST code.
    pub c: CMat,
    pub constellation: Qam,
}

impl TransmitFrame {
    /// Random pilots and data on `qam`, DFT-based code.
    pub fn random(p: usize, n: usize, m_t: usize, qam: Qam, seed: u64) -> Result<Self> {
        let c = krst_code(n, m_t)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s_pilot = qam.random_matrix(p, m_t, &mut rng);
        let s_data = qam.random_matrix(p, m_t, &mut rng);
        Ok(Self {
            s_pilot,
            s_data,
            c,
            constellation: qam,
        })
    }

    pub fn p(&self) -> usize {
        self.s_pilot.nrows()
    }

    pub fn n(&self) -> usize {
        self.c.nrows()
    }

    pub fn m_t(&self) -> usize {
        self.c.ncols()
    }
}

/// Slices `A_R D_n(Gamma) A_T^T D_n(C) S^T` for `n = 0..N`.
pub fn paratuck_synthesize(
    a_r: &CMat,
    gamma: &CMat,
    a_t: &CMat,
    c: &CMat,
    s: &CMat,
) -> Result<Tensor3> {
    let k = a_r.ncols();
    let m_t = a_t.nrows();
    if gamma.ncols() != k
        || a_t.ncols() != k
        || c.nrows() != gamma.nrows()
        || c.ncols() != m_t
        || s.ncols() != m_t
    {
        return Err(Error::Shape(format!(
            "PARATUCK factors A_R {:?}, Gamma {:?}, A_T {:?}, C {:?}, S {:?}",
            a_r.shape(),
            gamma.shape(),
            a_t.shape(),
            c.shape(),
            s.shape()
        )));
    }
    let s_t = s.transpose();
    let slices: Vec<CMat> = (0..c.nrows())
        .map(|n| {
            // scale columns of A_R by gamma row n and rows of S^T by code row n
            let left = CMat::from_fn(a_r.nrows(), k, |i, j| a_r[(i, j)] * gamma[(n, j)]);
            let right = CMat::from_fn(m_t, s_t.ncols(), |i, j| c[(n, i)] * s_t[(i, j)]);
            left * a_t.transpose() * right
        })
        .collect();
    Tensor3::from_slices(&slices)
}

/// Slices `H D_n(C) S^T` for `n = 0..N`.
pub fn parafac_synthesize(h: &CMat, c: &CMat, s: &CMat) -> Result<Tensor3> {
    let m_t = h.ncols();
    if c.ncols() != m_t || s.ncols() != m_t {
        return Err(Error::Shape(format!(
            "PARAFAC factors H {:?}, C {:?}, S {:?}",
            h.shape(),
            c.shape(),
            s.shape()
        )));
    }
    let s_t = s.transpose();
    let slices: Vec<CMat> = (0..c.nrows())
        .map(|n| h * CMat::from_fn(m_t, s_t.ncols(), |i, j| c[(n, i)] * s_t[(i, j)]))
        .collect();
    Tensor3::from_slices(&slices)
}

/// Noiseless tensor received by the sensing BS (`M_r x P x N`).
pub fn sensing_forward(scene: &SensingScene, frame: &TransmitFrame) -> Result<Tensor3> {
    if scene.m_t != frame.m_t() || scene.n() != frame.n() {
        return Err(Error::Shape(format!(
            "scene has M_t = {}, N = {}; frame has M_t = {}, N = {}",
            scene.m_t,
            scene.n(),
            frame.m_t(),
            frame.n()
        )));
    }
    paratuck_synthesize(&scene.a_r(), &scene.gamma, &scene.a_t(), &frame.c, &frame.s_pilot)
}

/// Noiseless tensor received by the UE (`M_u x P x N`).
pub fn comm_forward(link: &CommLink, frame: &TransmitFrame) -> Result<Tensor3> {
    if link.m_t != frame.m_t() {
        return Err(Error::Shape(format!(
            "link has M_t = {}, frame has M_t = {}",
            link.m_t,
            frame.m_t()
        )));
    }
    parafac_synthesize(&link.h, &frame.c, &frame.s_data)
}

/// Per-entry noise variance for a given `Es/N0` in dB with `Es = 1`.
pub fn noise_variance(es_n0_db: f64) -> f64 {
    10f64.powf(-es_n0_db / 10.0)
}

/// Adds i.i.d. `CN(0, N0)` noise. `f64::INFINITY` means noiseless.
pub fn add_noise(t: &Tensor3, es_n0_db: f64, seed: u64) -> Tensor3 {
    let mut out = t.clone();
    if es_n0_db == f64::INFINITY {
        return out;
    }
    let std = (noise_variance(es_n0_db) / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for z in out.as_mut_slice() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *z += Complex64::new(re, im) * std;
    }
    out
}

/// `rows x cols` matrix of i.i.d. circular complex Gaussians with the given variance.
pub fn complex_gaussian(rows: usize, cols: usize, variance: f64, rng: &mut impl Rng) -> CMat {
    let std = (variance / 2.0).sqrt();
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * std, im * std)
    })
}
