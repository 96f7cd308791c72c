//! ALS estimation of the target angles from the sensing tensor, noiseless
//! and at 20 dB.

use isac_tensor::sensing::{als_fit, remove_sensing_ambiguity, AlsConfig};
use isac_tensor::signal::{add_noise, sample_scene, sensing_forward, AngleSpec, Qam, TransmitFrame};

fn main() -> isac_tensor::Result<()> {
    let scene = sample_scene(
        2,
        3,
        1.0,
        &AngleSpec::Fixed(vec![15.0, 27.0]),
        &AngleSpec::Fixed(vec![-37.0, 65.0]),
        2,
        2,
        3,
    )?;
    let frame = TransmitFrame::random(8, 3, 2, Qam::new(4)?, 4)?;
    let clean = sensing_forward(&scene, &frame)?;

    let runs = [
        ("noiseless, default stopping rule", f64::INFINITY, AlsConfig::default()),
        (
            "noiseless, tol 1e-13, 3 starts",
            f64::INFINITY,
            AlsConfig { tol: 1e-13, n_restarts: 3, ..Default::default() },
        ),
        ("20 dB, default stopping rule", 20.0, AlsConfig::default()),
    ];
    println!("true AoA {:?}  AoD {:?}", scene.theta, scene.phi);
    for (name, db, cfg) in runs {
        let y = add_noise(&clean, db, 5);
        let est = remove_sensing_ambiguity(&als_fit(&y, &frame.c, &frame.s_pilot, 2, &cfg)?)?;
        println!("{name}:");
        println!("  {} iterations, converged {}, final error {:.3e}", est.iters, est.converged, est.final_error());
        println!("  AoA {:.3?}  AoD {:.3?}", est.theta_hat, est.phi_hat);
    }
    Ok(())
}
