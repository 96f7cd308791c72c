//! A short SNR sweep of the default scenario written to a temporary
//! directory, followed by the plot files.
//!
//! `cargo run --release --example snr_sweep -- [trials]`

use isac_tensor::harness::{emit_plot_data, run_sweep, ExperimentConfig};

fn main() -> isac_tensor::Result<()> {
    let mut cfg = ExperimentConfig::from_toml_str(include_str!("../configs/paper.toml"))?;
    cfg.trials = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(50);
    cfg.outputs = std::env::temp_dir().join("isac_snr_sweep");

    let out = run_sweep(&cfg)?;
    println!("{:>6} {:>9} {:>12} {:>12} {:>10} {:>10}", "dB", "conv", "angle rmse", "NMSE A_R", "SER KRF", "SER ZF");
    for row in &out.summary {
        let mean = |m| row.get(m).map_or(f64::NAN, |a| a.mean);
        println!(
            "{:>6} {:>5}/{:<3} {:>12.3} {:>12.2e} {:>10.4} {:>10.4}",
            row.sweep_value,
            row.converged,
            row.trials,
            row.get("angle_rmse_deg").map_or(f64::NAN, |a| a.median),
            mean("nmse_ar"),
            mean("ser_krf"),
            mean("ser_zf"),
        );
    }
    println!("(angle rmse is the median, the rest are means)");
    for path in emit_plot_data(&out.trials_csv)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
