//! Dense complex matrices and third-order tensors.
//!
//! Matrices are plain [`nalgebra::DMatrix`] values over `Complex<f64>`.
//! [`Tensor3`] stores an `I x P x N` array with the first index fastest, so a
//! frontal slice (fixed third index) is a contiguous column-major `I x P`
//! block. The two unfoldings the receivers consume are defined by index maps:
//!
//! * flat mode-1: `Y(1) = [Y..0  Y..1  ...  Y..N-1]`, size `I x NP`;
//! * tall mode-3: column `n` is `vec(Y..n)`, size `PI x N`.
//!
//! `vec` is column stacking throughout, which is the convention under which
//! `vec(A X B) = (B^T (x) A) vec(X)` and `vec(a b^T) = b (x) a` hold.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Complex double-precision dense matrix.
pub type CMat = DMatrix<Complex64>;

/// Default relative singular-value cutoff used by [`pinv`].
pub const DEFAULT_RCOND: f64 = 1e-12;

/// Dense complex third-order tensor indexed `(i, p, n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dim1: usize,
    dim2: usize,
    dim3: usize,
    data: Vec<Complex64>,
}

impl Tensor3 {
    pub fn zeros(dim1: usize, dim2: usize, dim3: usize) -> Self {
        Self {
            dim1,
            dim2,
            dim3,
            data: vec![Complex64::new(0.0, 0.0); dim1 * dim2 * dim3],
        }
    }

    pub fn from_fn(
        dim1: usize,
        dim2: usize,
        dim3: usize,
        mut f: impl FnMut(usize, usize, usize) -> Complex64,
    ) -> Self {
        let mut data = Vec::with_capacity(dim1 * dim2 * dim3);
        for n in 0..dim3 {
            for p in 0..dim2 {
                for i in 0..dim1 {
                    data.push(f(i, p, n));
                }
            }
        }
        Self {
            dim1,
            dim2,
            dim3,
            data,
        }
    }

    /// Stacks equally sized frontal slices along the third mode.
    pub fn from_slices(slices: &[CMat]) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| Error::Shape("at least one frontal slice is required".into()))?;
        let (dim1, dim2) = first.shape();
        let mut data = Vec::with_capacity(dim1 * dim2 * slices.len());
        for (n, s) in slices.iter().enumerate() {
            if s.shape() != (dim1, dim2) {
                return Err(Error::Shape(format!(
                    "slice {n} is {}x{}, expected {dim1}x{dim2}",
                    s.nrows(),
                    s.ncols()
                )));
            }
            data.extend_from_slice(s.as_slice());
        }
        Ok(Self {
            dim1,
            dim2,
            dim3: slices.len(),
            data,
        })
    }

    /// Inverse of [`Tensor3::unfold1_flat`]: splits `dim1 x (dim3 * dim2)`
    /// into `dim3` consecutive blocks of `dim2` columns.
    pub fn from_unfold1_flat(m: &CMat, dim2: usize) -> Result<Self> {
        if dim2 == 0 || m.ncols() % dim2 != 0 {
            return Err(Error::Shape(format!(
                "{} columns do not split into blocks of {dim2}",
                m.ncols()
            )));
        }
        // column-major storage already lays the blocks out slice after slice
        Ok(Self {
            dim1: m.nrows(),
            dim2,
            dim3: m.ncols() / dim2,
            data: m.as_slice().to_vec(),
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.dim1, self.dim2, self.dim3)
    }

    #[inline]
    fn offset(&self, i: usize, p: usize, n: usize) -> usize {
        i + self.dim1 * (p + self.dim2 * n)
    }

    #[inline]
    pub fn get(&self, i: usize, p: usize, n: usize) -> Complex64 {
        self.data[self.offset(i, p, n)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, p: usize, n: usize, value: Complex64) {
        let o = self.offset(i, p, n);
        self.data[o] = value;
    }

    /// Raw entries, first index fastest.
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// The `dim1 x dim2` matrix obtained by fixing the third index.
    pub fn frontal_slice(&self, n: usize) -> Result<CMat> {
        if n >= self.dim3 {
            return Err(Error::Index {
                index: n,
                len: self.dim3,
            });
        }
        let block = self.dim1 * self.dim2;
        Ok(CMat::from_column_slice(
            self.dim1,
            self.dim2,
            &self.data[n * block..(n + 1) * block],
        ))
    }

    /// `[Y..0 Y..1 ... Y..N-1]`, size `dim1 x (dim3 * dim2)`.
    pub fn unfold1_flat(&self) -> CMat {
        CMat::from_column_slice(self.dim1, self.dim2 * self.dim3, &self.data)
    }

    /// Column `n` is `vec(Y..n)`, size `(dim2 * dim1) x dim3`.
    pub fn unfold3_tall(&self) -> CMat {
        CMat::from_column_slice(self.dim1 * self.dim2, self.dim3, &self.data)
    }

    /// Squared Frobenius norm.
    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Squared Frobenius norm of `self - other`.
    pub fn dist_sqr(&self, other: &Tensor3) -> Result<f64> {
        if self.dims() != other.dims() {
            return Err(Error::Shape(format!(
                "tensor dims {:?} vs {:?}",
                self.dims(),
                other.dims()
            )));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Column-stacking vectorization, returned as a column matrix.
pub fn vectorize(m: &CMat) -> CMat {
    CMat::from_column_slice(m.len(), 1, m.as_slice())
}

/// Inverse of [`vectorize`].
pub fn unvectorize(v: &CMat, rows: usize, cols: usize) -> Result<CMat> {
    if v.len() != rows * cols {
        return Err(Error::Shape(format!(
            "cannot reshape {} entries into {rows}x{cols}",
            v.len()
        )));
    }
    Ok(CMat::from_column_slice(rows, cols, v.as_slice()))
}

/// `D_n(m)`: square diagonal matrix holding row `n` of `m`.
pub fn row_diag(m: &CMat, n: usize) -> Result<CMat> {
    if n >= m.nrows() {
        return Err(Error::Index {
            index: n,
            len: m.nrows(),
        });
    }
    Ok(CMat::from_diagonal(&m.row(n).transpose()))
}

/// Standard block Kronecker product.
pub fn kronecker(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Column-wise Kronecker product: column `m` is `a[:, m] (x) b[:, m]`.
pub fn khatri_rao(a: &CMat, b: &CMat) -> Result<CMat> {
    if a.ncols() != b.ncols() {
        return Err(Error::Shape(format!(
            "Khatri-Rao needs equal column counts, got {} and {}",
            a.ncols(),
            b.ncols()
        )));
    }
    let (ra, rb) = (a.nrows(), b.nrows());
    Ok(CMat::from_fn(ra * rb, a.ncols(), |row, col| {
        a[(row / rb, col)] * b[(row % rb, col)]
    }))
}

/// Thin SVD `m = U diag(s) V^H`, singular values descending.
struct Svd {
    u: CMat,
    s: Vec<f64>,
    v: CMat,
}

const JACOBI_MAX_SWEEPS: usize = 80;

/// One-sided (Hestenes) Jacobi SVD.
///
/// Chosen over the bidiagonal QR SVD because its backward error stays at
/// `eps * ||m||` even when the singular values span many decades, which the
/// pseudoinverse needs. The receivers only factor tall, thin matrices, for
/// which a handful of sweeps over the column pairs suffices.
fn svd_of(m: &CMat) -> Result<Svd> {
    if !m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Degenerate("non-finite matrix entry".into()));
    }
    if m.nrows() < m.ncols() {
        let t = svd_of(&m.adjoint())?;
        return Ok(Svd {
            u: t.v,
            s: t.s,
            v: t.u,
        });
    }
    let (rows, n) = m.shape();
    let mut a = m.clone();
    let mut v = CMat::identity(n, n);
    // rounding in a length-`rows` inner product
    let tol = rows as f64 * f64::EPSILON;
    // columns this small are rounding noise; rotating them never settles
    let floor = (f64::EPSILON * m.norm()).powi(2);
    let mut converged = n < 2;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if converged {
            break;
        }
        converged = true;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dotc(&a.column(q));
                let g = gamma.norm();
                if g == 0.0 || alpha.min(beta) <= floor || g <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                converged = false;
                // rotate column q so that the pair's inner product is real,
                // then apply a real Jacobi rotation
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut a, &mut v] {
                    for k in 0..mat.nrows() {
                        let x = mat[(k, p)];
                        let y = mat[(k, q)] * phase.conj();
                        mat[(k, p)] = x * c - y * s;
                        mat[(k, q)] = x * s + y * c;
                    }
                }
            }
        }
    }
    if !converged {
        return Err(Error::SvdNoConvergence { rows, cols: n });
    }
    let mut order: Vec<(usize, f64)> = (0..n).map(|j| (j, a.column(j).norm())).collect();
    order.sort_by(|x, y| y.1.total_cmp(&x.1));
    let mut u = CMat::zeros(rows, n);
    let mut v_sorted = CMat::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    for (dst, &(src, sigma)) in order.iter().enumerate() {
        if sigma > 0.0 {
            u.set_column(dst, &a.column(src).unscale(sigma));
        }
        v_sorted.set_column(dst, &v.column(src));
        s.push(sigma);
    }
    Ok(Svd { u, s, v: v_sorted })
}

/// Moore-Penrose pseudoinverse through the SVD. Singular values below
/// `rcond * sigma_max` are treated as zero.
pub fn pinv(m: &CMat, rcond: f64) -> Result<CMat> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Ok(CMat::zeros(cols, rows));
    }
    let svd = svd_of(m)?;
    let sigma_max = svd.s.first().copied().unwrap_or(0.0);
    let cutoff = rcond * sigma_max;

    // pinv = V diag(1/s) U^H, keeping only the retained triplets
    let mut out = CMat::zeros(cols, rows);
    for (k, &s) in svd.s.iter().enumerate() {
        if s <= cutoff || s == 0.0 {
            continue;
        }
        out += (svd.v.column(k) * svd.u.column(k).adjoint()).unscale(s);
    }
    Ok(out)
}

/// Leading singular triplet of a matrix.
#[derive(Debug, Clone)]
pub struct RankOne {
    /// Unit-norm left vector; its first significant entry is real and nonnegative.
    pub u: CMat,
    /// Unit-norm right vector.
    pub v: CMat,
    pub sigma: f64,
}

impl RankOne {
    /// `sigma * u * v^H`.
    pub fn matrix(&self) -> CMat {
        (&self.u * self.v.adjoint()).scale(self.sigma)
    }
}

/// Best Frobenius-norm rank-one approximation `sigma * u * v^H`.
pub fn best_rank_one(m: &CMat) -> Result<RankOne> {
    if m.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
        return Err(Error::ZeroInput("rank-one approximation of a zero matrix".into()));
    }
    let svd = svd_of(m)?;
    let sigma = svd.s[0];
    let mut u = svd.u.columns(0, 1).into_owned();
    let mut v = svd.v.columns(0, 1).into_owned();

    // fix the free unit phase: first significant entry of u real and >= 0
    let peak = u.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if let Some(pivot) = u.iter().find(|z| z.norm() > 1e-12 * peak).copied() {
        let rot = pivot.conj() / pivot.norm();
        u *= rot;
        v *= rot;
    }
    Ok(RankOne { u, v, sigma })
}

/// Squared Frobenius norm of a matrix.
pub fn frob_sqr(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}
