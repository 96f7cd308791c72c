//! Synthesizes the sensing and UE tensors for the default scenario and
//! checks their noise level.

use isac_tensor::signal::{
    add_noise, comm_forward, noise_variance, sample_scene, sensing_forward, AngleSpec, CommLink,
    Qam, TransmitFrame,
};
use num_complex::Complex64;

fn main() -> isac_tensor::Result<()> {
    let scene = sample_scene(
        2,
        3,
        1.0,
        &AngleSpec::Fixed(vec![15.0, 27.0]),
        &AngleSpec::Fixed(vec![-37.0, 65.0]),
        2,
        2,
        7,
    )?;
    let frame = TransmitFrame::random(8, 3, 2, Qam::new(4)?, 8)?;
    let link = CommLink::new(vec![78.0], vec![25.0], vec![Complex64::new(1.0, 0.0)], 2, 2)?;

    let y_s = sensing_forward(&scene, &frame)?;
    let y_u = comm_forward(&link, &frame)?;
    println!("sensing tensor {:?}, energy per entry {:.3}", y_s.dims(), y_s.norm_sqr() / y_s.as_slice().len() as f64);
    println!("UE tensor      {:?}, energy per entry {:.3}", y_u.dims(), y_u.norm_sqr() / y_u.as_slice().len() as f64);
    println!("rank of the UE channel: one path, |H| = {:.3}", link.h.norm());

    for db in [0.0, 10.0, 20.0] {
        let noisy = add_noise(&y_s, db, 99);
        let measured = noisy.dist_sqr(&y_s)? / y_s.as_slice().len() as f64;
        println!("Es/N0 {db:>4} dB: N0 = {:.4}, measured {:.4}", noise_variance(db), measured);
    }
    Ok(())
}
