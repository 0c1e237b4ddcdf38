//! Compares variants at one randomization level with matched seeds and
//! prints the mean ± std table. Learned variants need checkpoints.
//!
//! `cargo run --release -p resloco --example compare_variants -- 1.0 [artifacts/bor/policy.ckpt ...]`

use std::path::Path;

use resloco::harness::{compare_variants, Policies};
use resloco::{Config, Variant};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let mut cfg = Config::default();
    cfg.experiment.beta = args.next().and_then(|a| a.parse().ok()).unwrap_or(1.0);
    let mut policies = Policies::default();
    let mut variants = vec![Variant::Oracle, Variant::Base, Variant::Mbc];
    for path in args {
        variants.push(policies.load(&cfg, Path::new(&path))?);
    }
    let table = compare_variants(&cfg, &variants, &policies, None)?;
    print!("{}", table.to_text());
    Ok(())
}
