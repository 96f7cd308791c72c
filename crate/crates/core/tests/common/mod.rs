//! Reference implementations written straight from the definitions, with
//! explicit loops, for checking the library against.

#![allow(dead_code)]

use std::f64::consts::PI;

use isac_tensor::CMat;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform entries in the unit square, shifted to zero mean.
pub fn rand_mat(rows: usize, cols: usize, r: &mut impl Rng) -> CMat {
    CMat::from_fn(rows, cols, |_, _| c(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5))
}

/// `exp(j pi i sin(theta))` entry by entry.
pub fn ula(angles_deg: &[f64], m: usize) -> CMat {
    CMat::from_fn(m, angles_deg.len(), |i, k| {
        let ph = PI * (i as f64) * angles_deg[k].to_radians().sin();
        c(ph.cos(), ph.sin())
    })
}

/// `y[i][p][n] = sum_k sum_m A_R[i,k] G[n,k] A_T[m,k] C[n,m] S[p,m]`.
pub fn paratuck_oracle(a_r: &CMat, g: &CMat, a_t: &CMat, code: &CMat, s: &CMat) -> Vec<Vec<Vec<Complex64>>> {
    let (m_r, k) = a_r.shape();
    let (n, m_t) = code.shape();
    let p = s.nrows();
    let mut y = vec![vec![vec![c(0.0, 0.0); n]; p]; m_r];
    for i in 0..m_r {
        for pp in 0..p {
            for nn in 0..n {
                let mut acc = c(0.0, 0.0);
                for kk in 0..k {
                    for m in 0..m_t {
                        acc += a_r[(i, kk)] * g[(nn, kk)] * a_t[(m, kk)] * code[(nn, m)] * s[(pp, m)];
                    }
                }
                y[i][pp][nn] = acc;
            }
        }
    }
    y
}

/// `y[i][p][n] = sum_m H[i,m] C[n,m] S[p,m]`.
pub fn parafac_oracle(h: &CMat, code: &CMat, s: &CMat) -> Vec<Vec<Vec<Complex64>>> {
    let (m_u, m_t) = h.shape();
    let n = code.nrows();
    let p = s.nrows();
    let mut y = vec![vec![vec![c(0.0, 0.0); n]; p]; m_u];
    for i in 0..m_u {
        for pp in 0..p {
            for nn in 0..n {
                for m in 0..m_t {
                    y[i][pp][nn] += h[(i, m)] * code[(nn, m)] * s[(pp, m)];
                }
            }
        }
    }
    y
}

/// Relative squared Frobenius distance between a tensor and a nested oracle.
pub fn rel_err(t: &isac_tensor::Tensor3, oracle: &[Vec<Vec<Complex64>>]) -> f64 {
    let (d1, d2, d3) = t.dims();
    assert_eq!((oracle.len(), oracle[0].len(), oracle[0][0].len()), (d1, d2, d3));
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..d1 {
        for p in 0..d2 {
            for n in 0..d3 {
                num += (t.get(i, p, n) - oracle[i][p][n]).norm_sqr();
                den += oracle[i][p][n].norm_sqr();
            }
        }
    }
    (num / den).sqrt()
}

/// `[a_0 (x) b_0, a_1 (x) b_1, ...]`, entry `(i * rows(b) + j, m) = a[i,m] b[j,m]`.
pub fn khatri_rao_oracle(a: &CMat, b: &CMat) -> CMat {
    let mut out = CMat::zeros(a.nrows() * b.nrows(), a.ncols());
    for m in 0..a.ncols() {
        for i in 0..a.nrows() {
            for j in 0..b.nrows() {
                out[(i * b.nrows() + j, m)] = a[(i, m)] * b[(j, m)];
            }
        }
    }
    out
}

pub fn frob2(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

pub fn nmse_oracle(x_hat: &CMat, x: &CMat) -> f64 {
    let mut num = 0.0;
    for (a, b) in x_hat.iter().zip(x.iter()) {
        num += (a - b).norm_sqr();
    }
    num / frob2(x)
}

/// Columns reordered so that column `k` is column `perm[k]` of `m`.
pub fn reorder(m: &CMat, perm: &[usize]) -> CMat {
    CMat::from_fn(m.nrows(), perm.len(), |i, k| m[(i, perm[k])])
}

/// Every permutation of `0..k`.
pub fn all_perms(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in all_perms(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

/// Modified Gram-Schmidt on the columns of `m`.
pub fn orthonormalize(m: &CMat) -> CMat {
    let mut q = m.clone();
    for j in 0..q.ncols() {
        for i in 0..j {
            let proj: Complex64 = (0..q.nrows()).map(|r| q[(r, i)].conj() * q[(r, j)]).sum();
            for r in 0..q.nrows() {
                let v = q[(r, i)];
                q[(r, j)] -= proj * v;
            }
        }
        let norm = (0..q.nrows()).map(|r| q[(r, j)].norm_sqr()).sum::<f64>().sqrt();
        for r in 0..q.nrows() {
            q[(r, j)] /= norm;
        }
    }
    q
}

/// `U diag(sigma) V^H` with random orthonormal `U`, `V`.
pub fn with_singular_values(rows: usize, cols: usize, sigma: &[f64], r: &mut impl Rng) -> CMat {
    let k = sigma.len();
    let u = orthonormalize(&rand_mat(rows, k, r));
    let v = orthonormalize(&rand_mat(cols, k, r));
    let mut out = CMat::zeros(rows, cols);
    for (t, &s) in sigma.iter().enumerate() {
        for i in 0..rows {
            for j in 0..cols {
                out[(i, j)] += u[(i, t)] * s * v[(j, t)].conj();
            }
        }
    }
    out
}
