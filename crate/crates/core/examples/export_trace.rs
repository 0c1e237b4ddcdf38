//! Runs one Oracle episode with the Base and Oracle torques both recorded
//! and writes selected channels as CSV.
//!
//! `cargo run --release -p resloco --example export_trace -- 0.5 torque:l_hip,dcm > trace.csv`

use resloco::harness::{export_traces, run_episode_eval};
use resloco::{Config, Variant};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let beta: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(0.5);
    let channels = args.next().unwrap_or_else(|| "torque:l_hip,dcm".into());
    let names: Vec<&str> = channels.split(',').collect();
    let cfg = Config::default();
    let out = run_episode_eval(&cfg, Variant::Oracle, beta, 0, None, true)?;
    let report = export_traces(&out.trace, &names, &cfg.model, std::io::stdout())?;
    eprintln!(
        "{} rows, columns {:?}, DCM reference ODE residual {:.1e}",
        report.rows, report.columns, report.ode_residual
    );
    Ok(())
}
