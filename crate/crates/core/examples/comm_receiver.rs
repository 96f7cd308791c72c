//! Semi-blind UE receiver against the perfect-channel ZF benchmark.

use isac_tensor::comm::{comm_receive, zf_benchmark};
use isac_tensor::harness::{nmse, ser};
use isac_tensor::signal::{add_noise, comm_forward, CommLink, Qam, TransmitFrame};
use num_complex::Complex64;

fn main() -> isac_tensor::Result<()> {
    let link = CommLink::new(vec![78.0], vec![25.0], vec![Complex64::new(1.0, 0.0)], 2, 2)?;
    println!("{:>6} {:>10} {:>10} {:>10}", "dB", "SER KRF", "SER ZF", "NMSE H");
    for db in [0.0, 5.0, 10.0, 20.0, 30.0] {
        let (mut e_krf, mut e_zf, mut e_h) = (0.0, 0.0, 0.0);
        let trials = 200;
        for t in 0..trials {
            let frame = TransmitFrame::random(8, 3, 2, Qam::new(4)?, t)?;
            let y = add_noise(&comm_forward(&link, &frame)?, db, 10_000 + t);
            let reference: Vec<Complex64> = frame.s_data.row(0).iter().copied().collect();
            let est = comm_receive(&y, &frame.c, &reference, &frame.constellation)?;
            let zf = zf_benchmark(&y, &link.h, &frame.c, &frame.constellation)?;
            // row 0 is the known reference, so only rows 1.. carry data
            let data = frame.s_data.rows(1, 7);
            e_krf += ser(&est.s_hat.rows(1, 7).into_owned(), &data.into_owned())?;
            e_zf += ser(&zf.rows(1, 7).into_owned(), &data.into_owned())?;
            e_h += nmse(&est.h_hat, &link.h)?;
        }
        let n = trials as f64;
        println!("{db:>6} {:>10.4} {:>10.4} {:>10.2e}", e_krf / n, e_zf / n, e_h / n);
    }
    Ok(())
}
