//! Compares every analytic gradient with central finite differences and
//! prints the worst relative error per loss.
//!
//! `cargo run --release -p resloco-learn --example gradient_report -- 100`

use resloco_learn::gradcheck::{check, total_gradient_linearity, TARGETS};

fn main() {
    let points = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(20);
    for (i, t) in TARGETS.iter().enumerate() {
        let r = check(*t, points, i as u64, 1e-4);
        println!(
            "{:<12} {:>6} entries, {} outside 1e-4, worst {:.2e}",
            format!("{t:?}"),
            r.entries,
            r.failures,
            r.worst
        );
    }
    println!("‖∇L_total − (ω_rl∇L_rl + ω_sup∇L_sup)‖∞ = {:.2e}", total_gradient_linearity(points, 99));
}
