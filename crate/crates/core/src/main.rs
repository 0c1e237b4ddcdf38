//! Command-line front end for simulation, training and evaluation.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use resloco::harness::{self, Policies};
use resloco::{train, Config, CoreError, Progress, TrainOptions, Variant};

#[derive(Parser)]
#[command(name = "resloco", version, about = "Supervised residual learning for a planar torque-controlled biped")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration (TOML); built-in defaults when omitted.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Seed: episode seed for simulate/eval/export, run seed for train,
    /// first trial seed for compare/sweep.
    #[arg(long)]
    seed: Option<u64>,
    /// Randomization level in [0, 1] (simulate defaults to 0, everything
    /// else to the configured experiment level).
    #[arg(long)]
    beta: Option<f64>,
    /// Output file or directory.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one model-based episode and write its per-tick trace.
    Simulate {
        /// oracle, base or mbc.
        #[arg(long, default_value = "oracle", value_parser = parse_variant)]
        variant: Variant,
        /// Simulated time [s]; defaults to the evaluation duration.
        #[arg(long)]
        duration: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Train a learned variant into a run directory.
    Train {
        /// resrl, il, or or bor.
        #[arg(long, default_value = "bor", value_parser = parse_variant)]
        variant: Variant,
        /// Override the episode budget.
        #[arg(long)]
        episodes: Option<usize>,
        /// Continue from the run directory's latest checkpoint.
        #[arg(long)]
        resume: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate one variant over the configured trials.
    Eval {
        #[arg(long, value_parser = parse_variant)]
        variant: Variant,
        /// Policy checkpoint for learned variants.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Compare variants at one randomization level.
    Compare {
        /// Comma-separated variants; defaults to the configured list.
        #[arg(long, value_delimiter = ',', value_parser = parse_variant)]
        variants: Vec<Variant>,
        /// Policy checkpoints (repeatable); each records its variant.
        #[arg(long)]
        checkpoint: Vec<PathBuf>,
        /// Also write every episode's per-tick trace.
        #[arg(long)]
        traces: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate variants over the configured randomization levels.
    Sweep {
        #[arg(long, value_delimiter = ',', default_value = "mbc,bor", value_parser = parse_variant)]
        variants: Vec<Variant>,
        #[arg(long)]
        checkpoint: Vec<PathBuf>,
        #[arg(long)]
        traces: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Export selected channels of one episode as CSV.
    Export {
        #[arg(long, default_value = "oracle", value_parser = parse_variant)]
        variant: Variant,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Comma-separated channel groups (command, state, torque, dcm, feet,
        /// footsteps, errors, reward, torque:<joint>); all when omitted.
        #[arg(long, value_delimiter = ',')]
        channels: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    Variant::parse(s).ok_or_else(|| {
        let names: Vec<&str> = Variant::ALL.iter().map(|v| v.name()).collect();
        format!("unknown variant {s:?}; expected one of {}", names.join(", "))
    })
}

fn load_config(c: &Common) -> Result<Config, CoreError> {
    let mut cfg = match &c.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(b) = c.beta {
        cfg.experiment.beta = b;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn policies(cfg: &Config, paths: &[PathBuf]) -> Result<Policies, CoreError> {
    let mut p = Policies::default();
    for path in paths {
        p.load(cfg, path)?;
    }
    Ok(p)
}

fn create(path: &Path) -> Result<BufWriter<File>, CoreError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn run(cli: Cli) -> Result<(), CoreError> {
    match cli.command {
        Command::Simulate { variant, duration, common } => {
            if variant.is_learned() {
                return Err(CoreError::Config("simulate runs model-based variants; use eval for learned ones".into()));
            }
            let cfg = load_config(&common)?;
            let beta = common.beta.unwrap_or(0.0);
            let mut o = resloco::EpisodeOptions::eval(variant, beta, common.seed.unwrap_or(0), duration.unwrap_or(cfg.control.eval_duration));
            o.record_trace = true;
            let out = resloco::run_episode(&cfg, &o)?;
            let m = &out.metrics;
            println!(
                "{variant} beta={beta} seed={}: success={} dcm={:.3} cm foot={:.3} cm return={:.1} ticks={}",
                o.seed, m.success, m.dcm_cm, m.foot_cm, m.ret, m.ticks
            );
            if let Some(dir) = &common.out {
                fs::create_dir_all(dir)?;
                harness::export_traces(&out.trace, &[], &cfg.model, create(&dir.join("trace.csv"))?)?;
                serde_json::to_writer_pretty(create(&dir.join("draws.json"))?, &out.draws)?;
                serde_json::to_writer_pretty(create(&dir.join("metrics.json"))?, m)?;
                println!("wrote {}", dir.display());
            }
        }
        Command::Train {
            variant,
            episodes,
            resume,
            common,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(n) = episodes {
                cfg.train.episodes = n;
            }
            let seed = common.seed.unwrap_or(0);
            let dir = common.out.unwrap_or_else(|| PathBuf::from(format!("runs/{variant}-s{seed}")));
            let opts = TrainOptions {
                variant,
                seed,
                beta: common.beta.unwrap_or(cfg.experiment.beta),
                run_dir: Some(dir.clone()),
                resume,
            };
            let out = train(&cfg, &opts, |p| match p {
                Progress::Update(u) => println!(
                    "update {:5} episode {:6} steps {:8} return {:10.1} sup {:8.4} rl {:+8.4} kl {:.4}",
                    u.update, u.episode, u.steps, u.mean_return, u.stats.loss_sup, u.stats.loss_rl, u.stats.approx_kl
                ),
                Progress::Eval(e) => println!(
                    "eval episode {:6}: success {:5.1}% dcm {:.2} cm foot {:.2} cm return {:.1}",
                    e.episode, e.success, e.dcm_cm, e.foot_cm, e.ret
                ),
            })?;
            println!(
                "{variant}: {} episodes, {} steps{}; run directory {}",
                out.episodes,
                out.steps,
                if out.stopped_early { " (early stop)" } else { "" },
                dir.display()
            );
        }
        Command::Eval {
            variant,
            checkpoint,
            common,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(s) = common.seed {
                cfg.experiment.seed = s;
            }
            let p = policies(&cfg, checkpoint.as_slice())?;
            let beta = common.beta.unwrap_or(cfg.experiment.beta);
            let traces = common.out.as_ref().map(|d| d.join("traces"));
            let cell = harness::evaluate_cell(&cfg, variant, beta, &p, traces.as_deref())?;
            for (seed, m) in cell.seeds.iter().zip(&cell.episodes) {
                println!(
                    "seed {seed}: success={} dcm={:.3} cm foot={:.3} cm return={:.1}",
                    m.success, m.dcm_cm, m.foot_cm, m.ret
                );
            }
            let s = &cell.summary;
            println!(
                "{variant} beta={beta}: success {:.1}% dcm {:.2} ± {:.2} cm foot {:.2} ± {:.2} cm return {:.1} ± {:.1}",
                s.success, s.dcm_cm, s.dcm_std, s.foot_cm, s.foot_std, s.ret, s.ret_std
            );
            if let Some(dir) = &common.out {
                let mut w = csv::Writer::from_writer(create(&dir.join("episodes.csv"))?);
                for (seed, m) in cell.seeds.iter().zip(&cell.episodes) {
                    w.write_record([
                        seed.to_string(),
                        m.success.to_string(),
                        m.dcm_cm.to_string(),
                        m.foot_cm.to_string(),
                        m.ret.to_string(),
                        m.ticks.to_string(),
                    ])?;
                }
                w.flush()?;
            }
        }
        Command::Compare {
            variants,
            checkpoint,
            traces,
            common,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(s) = common.seed {
                cfg.experiment.seed = s;
            }
            let variants = if variants.is_empty() { cfg.experiment.variants.clone() } else { variants };
            let p = policies(&cfg, &checkpoint)?;
            let trace_dir = common.out.as_ref().filter(|_| traces).map(|d| d.join("traces"));
            let table = harness::compare_variants(&cfg, &variants, &p, trace_dir.as_deref())?;
            print!("{}", table.to_text());
            if let Some(dir) = &common.out {
                table.write_csv(create(&dir.join("comparison.csv"))?)?;
                fs::write(dir.join("comparison.txt"), table.to_text())?;
            }
        }
        Command::Sweep {
            variants,
            checkpoint,
            traces,
            common,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(s) = common.seed {
                cfg.experiment.seed = s;
            }
            let p = policies(&cfg, &checkpoint)?;
            let trace_dir = common.out.as_ref().filter(|_| traces).map(|d| d.join("traces"));
            let sweep = harness::beta_sweep(&cfg, &variants, &p, trace_dir.as_deref())?;
            print!("{}", sweep.to_text());
            match &common.out {
                Some(dir) => {
                    sweep.write_csv(create(&dir.join("sweep.csv"))?)?;
                    fs::write(dir.join("sweep.txt"), sweep.to_text())?;
                }
                None => sweep.write_csv(std::io::stdout())?,
            }
        }
        Command::Export {
            variant,
            checkpoint,
            channels,
            common,
        } => {
            let cfg = load_config(&common)?;
            let p = policies(&cfg, checkpoint.as_slice())?;
            let beta = common.beta.unwrap_or(cfg.experiment.beta);
            let seed = common.seed.unwrap_or(cfg.experiment.seed);
            let out = harness::run_episode_eval(&cfg, variant, beta, seed, p.get(variant), true)?;
            let names: Vec<&str> = channels.iter().map(String::as_str).collect();
            let report = match &common.out {
                Some(path) => harness::export_traces(&out.trace, &names, &cfg.model, create(path)?)?,
                None => harness::export_traces(&out.trace, &names, &cfg.model, std::io::stdout())?,
            };
            eprintln!(
                "{} rows, {} columns, DCM reference ODE residual {:.2e}",
                report.rows,
                report.columns.len(),
                report.ode_residual
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
