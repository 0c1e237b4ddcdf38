//! Success and tracking of MBC (and BOR, given a checkpoint) over the
//! configured randomization levels, as CSV on stdout.
//!
//! `cargo run --release -p resloco --example beta_sweep -- [artifacts/bor/policy.ckpt]`

use std::path::Path;

use resloco::harness::{beta_sweep, Policies};
use resloco::{Config, Variant};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = Config::default();
    let mut policies = Policies::default();
    let mut variants = vec![Variant::Mbc];
    if let Some(path) = std::env::args().nth(1) {
        variants.push(policies.load(&cfg, Path::new(&path))?);
    }
    let sweep = beta_sweep(&cfg, &variants, &policies, None)?;
    eprint!("{}", sweep.to_text());
    sweep.write_csv(std::io::stdout())?;
    Ok(())
}
