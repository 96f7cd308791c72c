//! Unfoldings, Khatri-Rao products, pseudoinverse and rank-one fits.

use isac_tensor::tensor::{best_rank_one, khatri_rao, kronecker, pinv, DEFAULT_RCOND};
use isac_tensor::{CMat, Tensor3};
use num_complex::Complex64;

fn main() -> isac_tensor::Result<()> {
    let t = Tensor3::from_fn(2, 3, 4, |i, p, n| Complex64::new((i + 10 * p) as f64, n as f64));
    println!("tensor dims {:?}", t.dims());
    println!("flat mode-1 unfolding is {:?}", t.unfold1_flat().shape());
    println!("tall mode-3 unfolding is {:?}", t.unfold3_tall().shape());
    let back = Tensor3::from_unfold1_flat(&t.unfold1_flat(), 3)?;
    println!("round trip exact: {}", back == t);

    let a = CMat::from_fn(3, 2, |i, j| Complex64::new(1.0 + i as f64, j as f64));
    let b = CMat::from_fn(2, 2, |i, j| Complex64::new(j as f64 - 1.0, i as f64));
    let kr = khatri_rao(&a, &b)?;
    let first = kronecker(&a.columns(0, 1).into_owned(), &b.columns(0, 1).into_owned());
    println!("Khatri-Rao column 0 equals the Kronecker of column 0: {}", kr.column(0) == first.column(0));

    let x = CMat::from_fn(4, 3, |i, j| Complex64::new((i * j) as f64 + 1.0, i as f64 - j as f64));
    let xp = pinv(&x, DEFAULT_RCOND)?;
    let penrose = (&x * &xp * &x - &x).norm();
    println!("||X X+ X - X|| = {penrose:.2e}");

    let r = best_rank_one(&x)?;
    println!("leading singular value {:.6}", r.sigma);
    println!("rank-one residual {:.6}", (&x - r.matrix()).norm());
    Ok(())
}
