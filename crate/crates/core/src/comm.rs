//! Closed-form semi-blind receiver at the UE.
//!
//! The UE tensor follows a PARAFAC model whose tall mode-3 unfolding is
//! `Y = (S <> H) C^T`. With a column-orthonormal code, right-multiplying by
//! `C*` isolates `Q = S <> H`; each column `q_m = s_m (x) h_m` reshapes into
//! the rank-one `M_u x P` matrix `h_m s_m^T`, so `S` and `H` follow from one
//! leading singular triplet per column. The remaining per-column scalar is
//! fixed with the known first row of `S`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::signal::Qam;
use crate::tensor::{best_rank_one, unvectorize, CMat, Tensor3};

/// Orthonormality slack accepted for the code matrix.
pub const CODE_TOLERANCE: f64 = 1e-9;

/// Output of the semi-blind receiver.
#[derive(Debug, Clone)]
pub struct CommEstimate {
    /// Hard decisions, `P x M_t`.
    pub s_hat: CMat,
    /// Disambiguated soft estimates, `P x M_t`.
    pub s_soft: CMat,
    /// Channel estimate, `M_u x M_t`.
    pub h_hat: CMat,
    /// Known first row of `S`.
    pub scaling_reference: Vec<Complex64>,
}

/// Largest entry of `|C^T C* - I|`.
pub fn orthonormality_deviation(c: &CMat) -> f64 {
    let gram = c.transpose() * c.map(|z| z.conj());
    let eye = CMat::identity(c.ncols(), c.ncols());
    (gram - eye).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn check_code(n: usize, c: &CMat) -> Result<()> {
    let m_t = c.ncols();
    if n < m_t {
        return Err(Error::Identifiability(vec![
            crate::sensing::Violation::CodeTooShort { n, m_t },
        ]));
    }
    if c.nrows() != n {
        return Err(Error::Shape(format!("code has {} rows, tensor has {n} slots", c.nrows())));
    }
    let deviation = orthonormality_deviation(c);
    if !(deviation <= CODE_TOLERANCE) {
        return Err(Error::NonOrthonormalCode { deviation });
    }
    Ok(())
}

/// `Q = Y_{PM_u x N} C*`, which equals `S <> H` in the noiseless case.
pub fn estimate_q(y: &Tensor3, c: &CMat) -> Result<CMat> {
    check_code(y.dims().2, c)?;
    Ok(y.unfold3_tall() * c.map(|z| z.conj()))
}

/// Solves `min ||Q - S <> H||_F` column by column with rank-one
/// approximations. The singular value is split evenly between the factors.
pub fn krf_factorize(q: &CMat, m_u: usize, p: usize) -> Result<(CMat, CMat)> {
    if q.nrows() != p * m_u {
        return Err(Error::Shape(format!(
            "Q has {} rows, expected P*M_u = {}",
            q.nrows(),
            p * m_u
        )));
    }
    let m_t = q.ncols();
    let mut s = CMat::zeros(p, m_t);
    let mut h = CMat::zeros(m_u, m_t);
    for m in 0..m_t {
        // q_m = s_m (x) h_m  <=>  unvec(q_m) = h_m s_m^T
        let x = unvectorize(&q.columns(m, 1).into_owned(), m_u, p)?;
        let r = best_rank_one(&x).map_err(|e| match e {
            Error::ZeroInput(_) => Error::ZeroInput(format!("column {m} of Q")),
            other => other,
        })?;
        let root = r.sigma.sqrt();
        h.columns_mut(m, 1).copy_from(&(r.u * Complex64::new(root, 0.0)));
        s.columns_mut(m, 1)
            .copy_from(&(r.v.map(|z| z.conj()) * Complex64::new(root, 0.0)));
    }
    Ok((s, h))
}

/// Rescales each column pair so that row 0 of `s` equals `reference_row`,
/// leaving `s <> h` unchanged.
pub fn remove_scaling(s: &CMat, h: &CMat, reference_row: &[Complex64]) -> Result<(CMat, CMat)> {
    let m_t = s.ncols();
    if h.ncols() != m_t || reference_row.len() != m_t || s.nrows() == 0 {
        return Err(Error::Shape(format!(
            "S {:?}, H {:?}, reference of length {}",
            s.shape(),
            h.shape(),
            reference_row.len()
        )));
    }
    let mut s = s.clone();
    let mut h = h.clone();
    for (m, &reference) in reference_row.iter().enumerate() {
        let pivot = s[(0, m)];
        if pivot.norm() == 0.0 || reference.norm() == 0.0 {
            return Err(Error::Degenerate(format!("zero pivot in column {m}")));
        }
        let lambda = reference / pivot;
        for z in s.column_mut(m).iter_mut() {
            *z *= lambda;
        }
        for z in h.column_mut(m).iter_mut() {
            *z /= lambda;
        }
        // the reference entry is known exactly
        s[(0, m)] = reference;
    }
    Ok((s, h))
}

/// Nearest-point hard decision on every entry.
pub fn detect_symbols(s_soft: &CMat, constellation: &Qam) -> CMat {
    constellation.slice(s_soft)
}

/// Full semi-blind chain: code projection, Khatri-Rao factorization,
/// scaling removal and detection.
pub fn comm_receive(
    y: &Tensor3,
    c: &CMat,
    reference_row: &[Complex64],
    constellation: &Qam,
) -> Result<CommEstimate> {
    let (m_u, p, _) = y.dims();
    let q = estimate_q(y, c)?;
    let (s, h) = krf_factorize(&q, m_u, p)?;
    let (s_soft, h_hat) = remove_scaling(&s, &h, reference_row)?;
    Ok(CommEstimate {
        s_hat: detect_symbols(&s_soft, constellation),
        s_soft,
        h_hat,
        scaling_reference: reference_row.to_vec(),
    })
}

/// Perfect-channel benchmark: least-squares symbol estimate given the true
/// `H` and the known code, then hard detection.
///
/// With a column-orthonormal code the LS problem
/// `min_S ||Y - (S <> H) C^T||` decouples per transmit antenna into
/// `s_m = X_m^T h_m* / ||h_m||^2` with `X_m = unvec(Y c_m*)`.
pub fn zf_benchmark(y: &Tensor3, h_true: &CMat, c: &CMat, constellation: &Qam) -> Result<CMat> {
    let (m_u, p, _) = y.dims();
    let m_t = h_true.ncols();
    if h_true.nrows() != m_u || c.ncols() != m_t {
        return Err(Error::Shape(format!(
            "H {:?} and C {:?} for a tensor of dims {:?}",
            h_true.shape(),
            c.shape(),
            y.dims()
        )));
    }
    if m_u < m_t {
        return Err(Error::Degenerate(format!(
            "ZF benchmark needs M_u >= M_t (got {m_u} < {m_t})"
        )));
    }
    let q = estimate_q(y, c)?;
    let mut s = CMat::zeros(p, m_t);
    for m in 0..m_t {
        let h_m = h_true.column(m);
        let energy = h_m.norm_squared();
        if energy == 0.0 {
            return Err(Error::Degenerate(format!("true channel column {m} is zero")));
        }
        let x = unvectorize(&q.columns(m, 1).into_owned(), m_u, p)?;
        let col = x.transpose() * h_m.map(|z| z.conj()) / Complex64::new(energy, 0.0);
        s.columns_mut(m, 1).copy_from(&col);
    }
    Ok(detect_symbols(&s, constellation))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{add_noise, complex_gaussian, krst_code, parafac_synthesize};
    use crate::tensor::{khatri_rao, kronecker};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(seed: u64, m_u: usize, m_t: usize, p: usize, n: usize) -> (CMat, CMat, CMat, Tensor3, Qam) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let qam = Qam::new(4).unwrap();
        let h = complex_gaussian(m_u, m_t, 1.0, &mut rng);
        let s = qam.random_matrix(p, m_t, &mut rng);
        let c = krst_code(n, m_t).unwrap();
        let y = parafac_synthesize(&h, &c, &s).unwrap();
        (h, s, c, y, qam)
    }

    fn first_row(s: &CMat) -> Vec<Complex64> {
        s.row(0).iter().copied().collect()
    }

    #[test]
    fn q_equals_khatri_rao_noiseless() {
        let (h, s, c, y, _) = setup(1, 2, 2, 8, 3);
        let q = estimate_q(&y, &c).unwrap();
        assert!((q - khatri_rao(&s, &h).unwrap()).norm() < 1e-12);

        let (h, s, c, y, _) = setup(2, 3, 1, 5, 2);
        let q = estimate_q(&y, &c).unwrap();
        assert_eq!(q.ncols(), 1);
        assert!((q - kronecker(&s, &h)).norm() < 1e-12);
    }

    #[test]
    fn q_gates() {
        let (_, _, c, y, _) = setup(3, 2, 2, 4, 3);
        let mut bad = c.clone();
        bad[(0, 0)] += Complex64::new(0.1, 0.0);
        assert!(matches!(estimate_q(&y, &bad), Err(Error::NonOrthonormalCode { .. })));

        let short = Tensor3::zeros(2, 4, 1);
        let c1 = CMat::from_element(1, 2, Complex64::new(1.0, 0.0));
        assert!(matches!(estimate_q(&short, &c1), Err(Error::Identifiability(_))));
    }

    #[test]
    fn krf_exact_factorization() {
        let (h, s, _, _, _) = setup(4, 2, 3, 6, 3);
        let q = khatri_rao(&s, &h).unwrap();
        let (s_hat, h_hat) = krf_factorize(&q, 2, 6).unwrap();
        assert!((khatri_rao(&s_hat, &h_hat).unwrap() - &q).norm() < 1e-10);
    }

    #[test]
    fn krf_single_column_bilinear_ambiguity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = complex_gaussian(4, 1, 1.0, &mut rng);
        let b = complex_gaussian(3, 1, 1.0, &mut rng);
        let (s_hat, h_hat) = krf_factorize(&kronecker(&a, &b), 3, 4).unwrap();
        // s_hat = lambda a, h_hat = b / lambda
        let lambda = s_hat[0] / a[0];
        assert!((s_hat - &a * lambda).norm() < 1e-10);
        assert!((h_hat - &b / lambda).norm() < 1e-10);
        assert!(krf_factorize(&CMat::zeros(12, 1), 3, 4).is_err());
        assert!(krf_factorize(&CMat::zeros(11, 1), 3, 4).is_err());
    }

    #[test]
    fn krf_residual_is_second_singular_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let q = complex_gaussian(12, 2, 1.0, &mut rng);
        let (s, h) = krf_factorize(&q, 3, 4).unwrap();
        let approx = khatri_rao(&s, &h).unwrap();
        for m in 0..2 {
            let x = unvectorize(&q.columns(m, 1).into_owned(), 3, 4).unwrap();
            let sv = x.singular_values();
            let tail: f64 = sv.iter().skip(1).map(|v| v * v).sum::<f64>();
            let resid = (q.column(m) - approx.column(m)).norm_squared();
            assert!((resid - tail).abs() < 1e-10);
        }
    }

    #[test]
    fn noisy_krf_residual_small() {
        for seed in 0..100 {
            let (_, _, c, y, _) = setup(1000 + seed, 2, 2, 8, 3);
            let noisy = add_noise(&y, 30.0, seed);
            let q = estimate_q(&noisy, &c).unwrap();
            let (s, h) = krf_factorize(&q, 2, 8).unwrap();
            let resid = (&q - khatri_rao(&s, &h).unwrap()).norm();
            assert!(resid < q.norm() / 10.0, "seed {seed}");
        }
    }

    #[test]
    fn scaling_removal() {
        let (h, s, _, _, _) = setup(7, 2, 2, 5, 2);
        let (s2, h2) = remove_scaling(&s, &h, &first_row(&s)).unwrap();
        assert!((&s2 - &s).norm() < 1e-15);
        assert!((&h2 - &h).norm() < 1e-15);

        let lambda = Complex64::from_polar(2.0, std::f64::consts::PI / 3.0);
        let mut sa = s.clone();
        let mut ha = h.clone();
        for z in sa.column_mut(1).iter_mut() {
            *z *= lambda;
        }
        for z in ha.column_mut(1).iter_mut() {
            *z /= lambda;
        }
        let (s3, h3) = remove_scaling(&sa, &ha, &first_row(&s)).unwrap();
        assert!((&s3 - &s).norm() < 1e-14);
        assert!((&h3 - &h).norm() < 1e-14);
        let kr_before = khatri_rao(&sa, &ha).unwrap();
        let kr_after = khatri_rao(&s3, &h3).unwrap();
        assert!((kr_before - kr_after).norm() < 1e-12);

        let mut zero = s.clone();
        zero[(0, 0)] = Complex64::new(0.0, 0.0);
        assert!(matches!(remove_scaling(&zero, &h, &first_row(&s)), Err(Error::Degenerate(_))));
    }

    #[test]
    fn noiseless_pipeline_recovers_everything() {
        let (h, s, c, y, qam) = setup(8, 2, 2, 8, 3);
        let est = comm_receive(&y, &c, &first_row(&s), &qam).unwrap();
        assert!((&est.s_soft - &s).norm() < 1e-10);
        assert!((&est.h_hat - &h).norm() < 1e-10);
        assert_eq!(est.s_hat, s);
    }

    #[test]
    fn detection_properties() {
        let qam = Qam::new(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = qam.random_matrix(4, 3, &mut rng);
        assert_eq!(detect_symbols(&s, &qam), s);
        let noisy = &s + complex_gaussian(4, 3, 0.5, &mut rng);
        let once = detect_symbols(&noisy, &qam);
        assert_eq!(detect_symbols(&once, &qam), once);

        let qpsk = Qam::new(4).unwrap();
        let mid = CMat::from_element(1, 1, Complex64::new(0.0, 0.0));
        assert_eq!(detect_symbols(&mid, &qpsk)[0], qpsk.points()[0]);
    }

    #[test]
    fn zf_noiseless_and_gates() {
        let (h, s, c, y, qam) = setup(10, 2, 2, 8, 3);
        assert_eq!(zf_benchmark(&y, &h, &c, &qam).unwrap(), s);

        // rank-one channel still separates the streams through the code
        let rank_one = crate::signal::CommLink::new(
            vec![78.0],
            vec![25.0],
            vec![Complex64::new(1.0, 0.0)],
            2,
            2,
        )
        .unwrap();
        let y1 = parafac_synthesize(&rank_one.h, &c, &s).unwrap();
        assert_eq!(zf_benchmark(&y1, &rank_one.h, &c, &qam).unwrap(), s);

        let (h1, _, c1, y1, qam) = setup(11, 1, 2, 4, 3);
        assert!(matches!(zf_benchmark(&y1, &h1, &c1, &qam), Err(Error::Degenerate(_))));

        let mut hz = h.clone();
        hz.column_mut(0).fill(Complex64::new(0.0, 0.0));
        assert!(matches!(zf_benchmark(&y, &hz, &c, &qam), Err(Error::Degenerate(_))));
    }
}
