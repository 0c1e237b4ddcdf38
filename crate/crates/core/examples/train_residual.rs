//! Trains a residual policy and prints the learning curve.
//!
//! `cargo run --release --example train_residual -- [variant] [episodes] [beta] [run_dir] [next|same]`

use std::time::Instant;

use resloco::{train, Config, Progress, TrainOptions, Variant};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let variant = args.first().and_then(|s| Variant::parse(s)).unwrap_or(Variant::Bor);
    let mut cfg = Config::default();
    cfg.train.episodes = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    cfg.train.eval_interval = 50;
    if args.get(4).is_some_and(|s| s == "same") {
        cfg.train.pairing = resloco_learn::SupervisionPairing::Same;
    }
    let beta = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let opts = TrainOptions {
        variant,
        seed: 7,
        beta,
        run_dir: args.get(3).map(Into::into),
        resume: true,
    };
    let start = Instant::now();
    let out = train(&cfg, &opts, |p| match p {
        Progress::Update(u) => println!(
            "update {:4} ep {:5} return {:9.1} len {:6.1} sup {:.4} rl {:+.4} kl {:.4} std {:.3}",
            u.update, u.episode, u.mean_return, u.mean_length, u.stats.loss_sup, u.stats.loss_rl, u.stats.approx_kl, u.stats.entropy
        ),
        Progress::Eval(e) => println!(
            "eval ep {:5}: success {:5.1}%  dcm {:.2} cm  foot {:.2} cm  return {:.0}  [{:.0} s]",
            e.episode,
            e.success,
            e.dcm_cm,
            e.foot_cm,
            e.ret,
            start.elapsed().as_secs_f64()
        ),
    })?;
    println!("{variant}: {} episodes, {} steps in {:.0} s", out.episodes, out.steps, start.elapsed().as_secs_f64());
    Ok(())
}
