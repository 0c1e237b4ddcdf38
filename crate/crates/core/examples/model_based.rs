//! Success rate and tracking of the model-based controllers (Oracle, Base,
//! MBC) across randomization levels.
//!
//! `cargo run --release -p resloco --example model_based -- 10`

use std::time::Instant;

use resloco::{run_episode, Config, EpisodeOptions, Variant};

fn main() {
    let trials: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(10);
    let cfg = Config::default();
    for variant in [Variant::Oracle, Variant::Base, Variant::Mbc] {
        for beta in [0.0, 0.1, 0.3, 0.5, 0.7, 1.0] {
            let start = Instant::now();
            let mut ok = 0;
            let mut dcm = 0.0;
            let mut falls = Vec::new();
            for seed in 0..trials {
                let opts = EpisodeOptions::eval(variant, beta, 1000 + seed, cfg.control.eval_duration);
                let m = run_episode(&cfg, &opts).expect("episode").metrics;
                ok += m.success as u32;
                dcm += m.dcm_cm;
                if let Some(t) = m.fall_time {
                    falls.push(format!("{t:.2}"));
                }
            }
            println!(
                "{variant:>6} beta={beta:.1} success={:5.1}% dcm={:.2} cm falls=[{}] ({:.1} s)",
                100.0 * ok as f64 / trials as f64,
                dcm / trials as f64,
                falls.join(","),
                start.elapsed().as_secs_f64()
            );
        }
    }
}
