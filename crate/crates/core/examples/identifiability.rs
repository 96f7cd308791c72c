//! Which dimension tuples the receivers accept, and why the rest fail.

use isac_tensor::harness::ExperimentConfig;
use isac_tensor::sensing::{check_identifiability, max_targets};

fn main() {
    let (m_r, m_t) = (2, 2);
    for (p, n) in [(8, 3), (2, 1), (1, 2)] {
        println!("M_r = {m_r}, M_t = {m_t}, P = {p}, N = {n}: up to {} targets", max_targets(m_r, m_t, p, n));
    }
    for k in [2, 4, 17] {
        match check_identifiability(m_r, m_t, 8, 1, k) {
            Ok(()) => println!("K = {k} with P = 8, N = 1: accepted"),
            Err(v) => {
                let why: Vec<String> = v.iter().map(ToString::to_string).collect();
                println!("K = {k} with P = 8, N = 1: rejected, {}", why.join("; "));
            }
        }
    }

    let text = include_str!("../configs/paper.toml").replace("n = 3", "n = 1");
    match ExperimentConfig::from_toml_str(&text) {
        Ok(_) => println!("config with N = 1 accepted"),
        Err(e) => println!("config with N = 1: {e}"),
    }
}
