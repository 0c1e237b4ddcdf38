//! Prints the randomized model, terrain and actuation draws of a few
//! episodes at a given level.
//!
//! `cargo run --release -p resloco --example randomization_draws -- 1.0 3`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use resloco::episode::episode_draws;
use resloco::randomization::sample_actuation;
use resloco::Config;

fn main() {
    let mut args = std::env::args().skip(1);
    let beta: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(1.0);
    let n: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(3);
    let cfg = Config::default();
    let dr = cfg.randomization.at_beta(beta);
    for seed in 0..n {
        let (model, terrain, draws) = episode_draws(&cfg, beta, seed, cfg.control.eval_duration);
        let mass: f64 = model.links.iter().map(|l| l.mass).sum();
        let heights = terrain.profile.iter().map(|p| p[1].abs()).fold(0.0, f64::max);
        println!("seed {seed}: total mass {mass:.2} kg, floor friction {:.3}, max terrain height {:.1} mm", draws.friction, 1e3 * heights);
        println!("  mass scales {:.3?}", draws.model.mass_scale);
        println!("  commands {:.3?} m/s", draws.commands);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<String> = (0..4)
            .map(|_| {
                let d = sample_actuation(&dr, &mut rng);
                format!("(α {:.3}, delay {:.2} ms)", d.alpha, 1e3 * d.delay())
            })
            .collect();
        println!("  first actuation draws {}", a.join(" "));
    }
}
