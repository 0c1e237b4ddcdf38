//! Evaluation protocol: single episodes, variant comparisons, β sweeps
//! and per-tick trace export.
//!
//! Every aggregate is computed from per-episode metrics, which in turn are
//! reproducible from the per-tick trace (see [`metrics_from_trace`]).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use resloco_learn::PolicyNet;
use resloco_sim::{RobotModel, NJ};

use crate::config::Config;
use crate::episode::{run_episode, Agent, EpisodeMetrics, EpisodeOptions, EpisodeOutcome, TraceRow, Variant};
use crate::train::load_policy;
use crate::CoreError;

/// Trained actors by variant.
#[derive(Debug, Clone, Default)]
pub struct Policies {
    pub actors: BTreeMap<Variant, PolicyNet>,
}

impl Policies {
    pub fn insert(&mut self, variant: Variant, actor: PolicyNet) {
        self.actors.insert(variant, actor);
    }

    /// Loads a checkpoint; the variant it was trained as is recorded in it.
    pub fn load(&mut self, cfg: &Config, path: &Path) -> Result<Variant, CoreError> {
        let (variant, actor) = load_policy(cfg, path)?;
        self.actors.insert(variant, actor);
        Ok(variant)
    }

    pub fn get(&self, variant: Variant) -> Option<&PolicyNet> {
        self.actors.get(&variant)
    }
}

/// Seeds of the evaluation trials.
pub fn trial_seeds(cfg: &Config) -> Vec<u64> {
    (0..cfg.experiment.trials as u64).map(|k| cfg.experiment.seed + k).collect()
}

/// One evaluation episode of `control.eval_duration` seconds.
pub fn run_episode_eval(
    cfg: &Config,
    variant: Variant,
    beta: f64,
    seed: u64,
    policy: Option<&PolicyNet>,
    record_trace: bool,
) -> Result<EpisodeOutcome, CoreError> {
    let mut o = EpisodeOptions::eval(variant, beta, seed, cfg.control.eval_duration);
    if variant.is_learned() {
        let actor = policy.ok_or_else(|| CoreError::Config(format!("variant {variant} needs a checkpoint")))?;
        o.agent = Some(Agent {
            actor,
            critic: None,
            stochastic: false,
        });
    }
    o.record_trace = record_trace;
    run_episode(cfg, &o)
}

/// Mean and sample standard deviation.
pub fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Aggregate of one (variant, β) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub variant: Variant,
    pub beta: f64,
    pub trials: usize,
    /// Percent of trials without a fall.
    pub success: f64,
    pub dcm_cm: f64,
    pub dcm_std: f64,
    pub foot_cm: f64,
    pub foot_std: f64,
    pub ret: f64,
    pub ret_std: f64,
}

impl CellSummary {
    pub fn from_metrics(variant: Variant, beta: f64, m: &[EpisodeMetrics]) -> Self {
        let col = |f: fn(&EpisodeMetrics) -> f64| m.iter().map(f).collect::<Vec<_>>();
        let (dcm_cm, dcm_std) = mean_std(&col(|x| x.dcm_cm));
        let (foot_cm, foot_std) = mean_std(&col(|x| x.foot_cm));
        let (ret, ret_std) = mean_std(&col(|x| x.ret));
        Self {
            variant,
            beta,
            trials: m.len(),
            success: 100.0 * m.iter().filter(|x| x.success).count() as f64 / m.len().max(1) as f64,
            dcm_cm,
            dcm_std,
            foot_cm,
            foot_std,
            ret,
            ret_std,
        }
    }
}

/// Per-episode results of one cell, kept for auditing.
#[derive(Debug, Clone)]
pub struct Cell {
    pub summary: CellSummary,
    pub seeds: Vec<u64>,
    pub episodes: Vec<EpisodeMetrics>,
}

/// Runs every trial of a cell. With `trace_dir`, each episode's per-tick
/// trace is written as `<variant>_b<β>_s<seed>.csv`.
pub fn evaluate_cell(
    cfg: &Config,
    variant: Variant,
    beta: f64,
    policies: &Policies,
    trace_dir: Option<&Path>,
) -> Result<Cell, CoreError> {
    let seeds = trial_seeds(cfg);
    let mut episodes = Vec::with_capacity(seeds.len());
    for &seed in &seeds {
        let out = run_episode_eval(cfg, variant, beta, seed, policies.get(variant), trace_dir.is_some())?;
        if let Some(dir) = trace_dir {
            std::fs::create_dir_all(dir)?;
            let f = std::fs::File::create(dir.join(trace_file_name(variant, beta, seed)))?;
            export_traces(&out.trace, &[], &cfg.model, std::io::BufWriter::new(f))?;
        }
        episodes.push(out.metrics);
    }
    Ok(Cell {
        summary: CellSummary::from_metrics(variant, beta, &episodes),
        seeds,
        episodes,
    })
}

pub fn trace_file_name(variant: Variant, beta: f64, seed: u64) -> String {
    format!("{variant}_b{beta:.2}_s{seed}.csv")
}

/// Variant comparison at one randomization level.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub beta: f64,
    pub cells: Vec<Cell>,
}

impl Comparison {
    pub fn rows(&self) -> Vec<&CellSummary> {
        self.cells.iter().map(|c| &c.summary).collect()
    }

    pub fn get(&self, v: Variant) -> Option<&CellSummary> {
        self.cells.iter().map(|c| &c.summary).find(|s| s.variant == v)
    }

    pub fn write_csv(&self, w: impl Write) -> Result<(), CoreError> {
        let mut w = csv::Writer::from_writer(w);
        for s in self.rows() {
            w.serialize(s)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Fixed-width table with mean ± std columns.
    pub fn to_text(&self) -> String {
        let mut s = format!("beta = {}, {} trials per variant\n", self.beta, self.cells.first().map_or(0, |c| c.summary.trials));
        let _ = writeln!(
            s,
            "{:<8} {:>9} {:>16} {:>16} {:>20}",
            "variant", "Success", "DCM [cm]", "Foot [cm]", "Return"
        );
        for r in self.rows() {
            let _ = writeln!(
                s,
                "{:<8} {:>8.1}% {:>7.2} ± {:<6.2} {:>7.2} ± {:<6.2} {:>9.1} ± {:<8.1}",
                r.variant.name(),
                r.success,
                r.dcm_cm,
                r.dcm_std,
                r.foot_cm,
                r.foot_std,
                r.ret,
                r.ret_std
            );
        }
        s
    }
}

/// Evaluates `variants` at β = `experiment.beta`. Learned variants without
/// a policy are a configuration error.
pub fn compare_variants(
    cfg: &Config,
    variants: &[Variant],
    policies: &Policies,
    trace_dir: Option<&Path>,
) -> Result<Comparison, CoreError> {
    check_policies(variants, policies)?;
    let beta = cfg.experiment.beta;
    let cells = variants
        .iter()
        .map(|&v| evaluate_cell(cfg, v, beta, policies, trace_dir))
        .collect::<Result<_, _>>()?;
    Ok(Comparison { beta, cells })
}

fn check_policies(variants: &[Variant], policies: &Policies) -> Result<(), CoreError> {
    let missing: Vec<&str> = variants
        .iter()
        .filter(|v| v.is_learned() && policies.get(**v).is_none())
        .map(|v| v.name())
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(CoreError::Config(format!("missing checkpoint for {}", missing.join(", "))))
    }
}

/// Trend checks over a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepDiagnostic {
    pub variant: Variant,
    /// Success never increases with β.
    pub non_increasing: bool,
    /// Success at the lowest minus the highest swept β [points].
    pub drop: f64,
    pub min_success: f64,
}

#[derive(Debug, Clone)]
pub struct Sweep {
    pub betas: Vec<f64>,
    pub variants: Vec<Variant>,
    /// `cells[i][j]` is β `i`, variant `j`.
    pub cells: Vec<Vec<Cell>>,
}

impl Sweep {
    pub fn summary(&self, beta_index: usize, v: Variant) -> Option<&CellSummary> {
        let j = self.variants.iter().position(|&x| x == v)?;
        Some(&self.cells[beta_index][j].summary)
    }

    pub fn success(&self, v: Variant) -> Vec<f64> {
        (0..self.betas.len()).filter_map(|i| self.summary(i, v).map(|s| s.success)).collect()
    }

    pub fn diagnostics(&self) -> Vec<SweepDiagnostic> {
        self.variants
            .iter()
            .map(|&v| {
                let s = self.success(v);
                SweepDiagnostic {
                    variant: v,
                    non_increasing: s.windows(2).all(|w| w[1] <= w[0]),
                    drop: s.first().copied().unwrap_or(f64::NAN) - s.last().copied().unwrap_or(f64::NAN),
                    min_success: s.iter().copied().fold(f64::INFINITY, f64::min),
                }
            })
            .collect()
    }

    /// One row per β; success, DCM and foot columns per variant.
    pub fn write_csv(&self, w: impl Write) -> Result<(), CoreError> {
        let mut w = csv::Writer::from_writer(w);
        let mut header = vec!["beta".to_string()];
        for metric in ["success", "dcm_cm", "foot_cm"] {
            header.extend(self.variants.iter().map(|v| format!("{metric}_{v}")));
        }
        w.write_record(&header)?;
        for (i, beta) in self.betas.iter().enumerate() {
            let mut row = vec![beta.to_string()];
            for metric in 0..3 {
                for j in 0..self.variants.len() {
                    let s = &self.cells[i][j].summary;
                    row.push([s.success, s.dcm_cm, s.foot_cm][metric].to_string());
                }
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = write!(s, "{:<6}", "beta");
        for metric in ["Success", "DCM", "Foot"] {
            for v in &self.variants {
                let _ = write!(s, " {:>12}", format!("{metric} {v}"));
            }
        }
        s.push('\n');
        for (i, beta) in self.betas.iter().enumerate() {
            let _ = write!(s, "{beta:<6.2}");
            for metric in 0..3 {
                for j in 0..self.variants.len() {
                    let c = &self.cells[i][j].summary;
                    let _ = write!(s, " {:>12.2}", [c.success, c.dcm_cm, c.foot_cm][metric]);
                }
            }
            s.push('\n');
        }
        for d in self.diagnostics() {
            let _ = writeln!(
                s,
                "{}: success {} over beta, drop {:.1} points, minimum {:.1}%",
                d.variant,
                if d.non_increasing { "non-increasing" } else { "not monotone" },
                d.drop,
                d.min_success
            );
        }
        s
    }
}

/// Evaluates `variants` at every β of `experiment.betas`.
pub fn beta_sweep(
    cfg: &Config,
    variants: &[Variant],
    policies: &Policies,
    trace_dir: Option<&Path>,
) -> Result<Sweep, CoreError> {
    check_policies(variants, policies)?;
    let betas = cfg.experiment.betas.clone();
    let cells = betas
        .iter()
        .map(|&b| {
            variants
                .iter()
                .map(|&v| evaluate_cell(cfg, v, b, policies, trace_dir))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    Ok(Sweep {
        betas,
        variants: variants.to_vec(),
        cells,
    })
}

pub const JOINT_NAMES: [&str; NJ] = ["l_hip", "l_knee", "l_ankle", "r_hip", "r_knee", "r_ankle"];

/// Channel groups accepted by [`export_traces`]; `torque:<joint>` selects
/// one joint.
pub const CHANNELS: [&str; 9] = ["command", "state", "torque", "dcm", "feet", "footsteps", "errors", "reward", "torque:<joint>"];

/// What an export wrote.
#[derive(Debug, Clone, PartialEq)]
pub struct ExportReport {
    pub rows: usize,
    pub columns: Vec<String>,
    /// Largest |ξ̇_ref − (ξ_ref − v_ref)/b| over the trace.
    pub ode_residual: f64,
}

type Column = (String, Box<dyn Fn(&TraceRow) -> f64>);

fn channel_columns(name: &str, model: &RobotModel) -> Result<Vec<Column>, CoreError> {
    let col = |n: String, f: Box<dyn Fn(&TraceRow) -> f64>| (n, f);
    let torque = |j: usize| -> Vec<Column> {
        let n = JOINT_NAMES[j];
        vec![
            col(format!("tau_base_{n}"), Box::new(move |r| r.tau_base[j])),
            col(format!("tau_residual_{n}"), Box::new(move |r| r.tau_residual[j])),
            col(format!("tau_{n}"), Box::new(move |r| r.tau[j])),
            col(format!("tau_oracle_{n}"), Box::new(move |r| r.tau_oracle[j])),
        ]
    };
    let xz = |prefix: &str, f: fn(&TraceRow) -> [f64; 2]| -> Vec<Column> {
        vec![
            col(format!("{prefix}_x"), Box::new(move |r| f(r)[0])),
            col(format!("{prefix}_z"), Box::new(move |r| f(r)[1])),
        ]
    };
    let cols = match name {
        "command" => vec![col("command".into(), Box::new(|r| r.command))],
        "state" => {
            let mut v: Vec<Column> = (0..9).map(|i| col(format!("q{i}"), Box::new(move |r: &TraceRow| r.q[i]))).collect();
            v.extend((0..9).map(|i| col(format!("qd{i}"), Box::new(move |r: &TraceRow| r.qd[i])) as Column));
            v
        }
        "torque" => (0..NJ).flat_map(torque).collect(),
        "dcm" => [
            xz("xi", |r| r.xi),
            xz("xi_ref", |r| r.xi_ref),
            xz("xi_dot_ref", |r| r.xi_dot_ref),
            xz("vrp_ref", |r| r.vrp_ref),
        ]
        .into_iter()
        .flatten()
        .collect(),
        "feet" => {
            let mut v = Vec::new();
            for (s, side) in ["l", "r"].into_iter().enumerate() {
                for (k, c) in ["x", "z", "pitch"].into_iter().enumerate() {
                    v.push(col(format!("foot_{side}_{c}"), Box::new(move |r: &TraceRow| r.feet[s][k])));
                    v.push(col(format!("foot_ref_{side}_{c}"), Box::new(move |r: &TraceRow| r.feet_ref[s][k])));
                }
            }
            v
        }
        "footsteps" => {
            // Sole segment of each reference foot, for footprint plots.
            let (heel, toe) = (model.foot.heel[0], model.foot.toe[0]);
            let mut v = vec![col("support".into(), Box::new(|r: &TraceRow| r.support as f64))];
            for (s, side) in ["l", "r"].into_iter().enumerate() {
                v.push(col(format!("sole_{side}_heel_x"), Box::new(move |r: &TraceRow| r.feet_ref[s][0] + heel)));
                v.push(col(format!("sole_{side}_toe_x"), Box::new(move |r: &TraceRow| r.feet_ref[s][0] + toe)));
            }
            v
        }
        "errors" => {
            let mut v = xz("e_xi", |r| r.e_xi);
            v.push(col("e_foot_x".into(), Box::new(|r| r.e_foot[0])));
            v.push(col("e_foot_z".into(), Box::new(|r| r.e_foot[1])));
            v.push(col("e_foot_pitch".into(), Box::new(|r| r.e_foot[2])));
            v.extend(xz("vrp_cmd", |r| r.vrp_cmd));
            v.push(col("qp_status".into(), Box::new(|r| status_code(r) as f64)));
            v
        }
        "reward" => vec![
            col("r_dcm".into(), Box::new(|r| r.reward.dcm)),
            col("r_foot".into(), Box::new(|r| r.reward.foot)),
            col("r_torso".into(), Box::new(|r| r.reward.torso)),
            col("r_torque".into(), Box::new(|r| r.reward.torque)),
            col("r_smooth".into(), Box::new(|r| r.reward.smooth)),
            col("r_termination".into(), Box::new(|r| r.reward.termination)),
            col("terminated".into(), Box::new(|r| r.terminated as u8 as f64)),
        ],
        other => match other.strip_prefix("torque:").and_then(|j| JOINT_NAMES.iter().position(|n| *n == j)) {
            Some(j) => torque(j),
            None => {
                return Err(CoreError::UnknownChannel {
                    name: other.to_string(),
                    available: format!("{} (joints: {})", CHANNELS.join(", "), JOINT_NAMES.join(", ")),
                })
            }
        },
    };
    Ok(cols)
}

fn status_code(r: &TraceRow) -> u8 {
    use resloco_control::TickStatus::*;
    match r.status {
        Optimal => 0,
        Approximate => 1,
        Reused => 2,
        GravityCompensation => 3,
        Flight => 4,
    }
}

/// Writes one CSV row per tick: `t` followed by the requested channels
/// (all groups when `channels` is empty). Values use shortest round-trip
/// formatting, so anything computed from the trace can be recomputed
/// exactly from the file.
pub fn export_traces(trace: &[TraceRow], channels: &[&str], model: &RobotModel, w: impl Write) -> Result<ExportReport, CoreError> {
    let all = ["command", "state", "torque", "dcm", "feet", "footsteps", "errors", "reward"];
    let names: &[&str] = if channels.is_empty() { &all } else { channels };
    let mut cols: Vec<Column> = vec![("t".into(), Box::new(|r: &TraceRow| r.t))];
    for n in names {
        cols.extend(channel_columns(n, model)?);
    }
    let b = model.time_constant();
    let ode_residual = trace
        .iter()
        .map(|r| (0..2).map(|i| (r.xi_dot_ref[i] - (r.xi_ref[i] - r.vrp_ref[i]) / b).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    let mut out = csv::Writer::from_writer(w);
    out.write_record(cols.iter().map(|c| c.0.as_str()))?;
    for r in trace {
        out.write_record(cols.iter().map(|c| c.1(r).to_string()))?;
    }
    out.flush()?;
    Ok(ExportReport {
        rows: trace.len(),
        columns: cols.into_iter().map(|c| c.0).collect(),
        ode_residual,
    })
}

/// Metrics recomputed from an exported trace (needs the `errors` and
/// `reward` groups).
pub fn metrics_from_trace(path: &Path) -> Result<EpisodeMetrics, CoreError> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let idx = |n: &str| {
        header
            .iter()
            .position(|h| h == n)
            .ok_or_else(|| CoreError::Config(format!("{}: missing column {n}", path.display())))
    };
    let names = [
        "t", "e_xi_x", "e_xi_z", "e_foot_x", "e_foot_z", "r_dcm", "r_foot", "r_torso", "r_torque", "r_smooth", "r_termination",
        "terminated",
    ];
    let cols = names.iter().map(|n| idx(n)).collect::<Result<Vec<_>, _>>()?;
    let [t, ex, ez, fx, fz, rd, rf, rt, rq, rs, rterm, term] = cols[..] else {
        unreachable!()
    };
    let (mut dcm, mut foot, mut ret, mut measured, mut ticks) = (0.0, 0.0, 0.0, 0usize, 0usize);
    let mut fall_time = None;
    for rec in r.records() {
        let rec = rec?;
        let v = |i: usize| -> Result<f64, CoreError> {
            rec[i].parse::<f64>().map_err(|e| CoreError::Config(format!("{}: {e}", path.display())))
        };
        ticks += 1;
        ret += crate::policy::RewardBreakdown {
            dcm: v(rd)?,
            foot: v(rf)?,
            torso: v(rt)?,
            torque: v(rq)?,
            smooth: v(rs)?,
            termination: v(rterm)?,
        }
        .without_torque();
        let e = [v(ex)?, v(ez)?];
        if e.iter().all(|x| x.is_finite()) {
            dcm += e[0].hypot(e[1]);
            foot += v(fx)?.hypot(v(fz)?);
            measured += 1;
        }
        if v(term)? != 0.0 {
            fall_time = Some(v(t)?);
        }
    }
    let valid = measured.max(1) as f64;
    Ok(EpisodeMetrics {
        success: fall_time.is_none(),
        dcm_cm: 100.0 * dcm / valid,
        foot_cm: 100.0 * foot / valid,
        ret,
        fall_time,
        ticks,
        fallbacks: 0,
    })
}
