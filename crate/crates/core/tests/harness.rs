use resloco::harness::{
    beta_sweep, compare_variants, evaluate_cell, export_traces, mean_std, metrics_from_trace, run_episode_eval, trace_file_name,
    Policies,
};
use resloco::{Config, CoreError, Variant};

fn short_config() -> Config {
    let mut cfg = Config::default();
    cfg.control.eval_duration = 0.6;
    cfg.experiment.trials = 3;
    cfg.experiment.seed = 40;
    cfg
}

#[test]
fn hip_torque_channel_has_four_columns_and_a_row_per_tick() {
    let cfg = short_config();
    let out = run_episode_eval(&cfg, Variant::Oracle, 0.5, 3, None, true).unwrap();
    let mut buf = Vec::new();
    let report = export_traces(&out.trace, &["torque:l_hip"], &cfg.model, &mut buf).unwrap();
    assert_eq!(report.columns, ["t", "tau_base_l_hip", "tau_residual_l_hip", "tau_l_hip", "tau_oracle_l_hip"]);
    assert_eq!(report.rows, out.metrics.ticks);
    assert_eq!(report.rows, 120);
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), report.rows + 1);
    assert!(report.ode_residual < 1e-9, "{}", report.ode_residual);
}

#[test]
fn dcm_reference_satisfies_its_ode_while_walking() {
    let mut cfg = short_config();
    cfg.control.eval_duration = 3.0;
    let out = run_episode_eval(&cfg, Variant::Oracle, 0.0, 11, None, true).unwrap();
    let report = export_traces(&out.trace, &["dcm", "footsteps"], &cfg.model, std::io::sink()).unwrap();
    assert!(out.trace.iter().any(|r| r.support != 0), "never stepped");
    assert!(report.ode_residual < 1e-9, "{}", report.ode_residual);
}

#[test]
fn unknown_channel_lists_the_alternatives() {
    let cfg = short_config();
    let out = run_episode_eval(&cfg, Variant::Base, 0.0, 0, None, true).unwrap();
    for bad in ["torques", "torque:l_elbow"] {
        match export_traces(&out.trace, &[bad], &cfg.model, std::io::sink()) {
            Err(CoreError::UnknownChannel { name, available }) => {
                assert_eq!(name, bad);
                assert!(available.contains("torque:<joint>") && available.contains("r_ankle"));
            }
            other => panic!("expected an unknown-channel error, got {other:?}"),
        }
    }
}

#[test]
fn summaries_recompute_from_written_traces() {
    let cfg = short_config();
    let dir = tempfile::tempdir().unwrap();
    // β = 1 so that some Base trials fall and terminal rows are covered.
    let cell = evaluate_cell(&cfg, Variant::Base, 1.0, &Policies::default(), Some(dir.path())).unwrap();
    for (seed, m) in cell.seeds.iter().zip(&cell.episodes) {
        let back = metrics_from_trace(&dir.path().join(trace_file_name(Variant::Base, 1.0, *seed))).unwrap();
        assert_eq!(back.success, m.success);
        assert_eq!(back.fall_time, m.fall_time);
        assert_eq!(back.ticks, m.ticks);
        assert_eq!(back.dcm_cm, m.dcm_cm);
        assert_eq!(back.foot_cm, m.foot_cm);
        assert_eq!(back.ret, m.ret);
    }
    let s = &cell.summary;
    let (dcm, dcm_std) = mean_std(&cell.episodes.iter().map(|m| m.dcm_cm).collect::<Vec<_>>());
    assert_eq!((s.dcm_cm, s.dcm_std), (dcm, dcm_std));
    let wins = cell.episodes.iter().filter(|m| m.success).count();
    assert_eq!(s.success, 100.0 * wins as f64 / cell.episodes.len() as f64);
}

#[test]
fn sample_standard_deviation() {
    let (m, s) = mean_std(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
    assert_eq!(m, 5.0);
    assert!((s - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
    assert_eq!(mean_std(&[3.0]), (3.0, 0.0));
}

#[test]
fn comparison_table_lists_each_variant() {
    let mut cfg = short_config();
    cfg.experiment.beta = 0.3;
    let table = compare_variants(&cfg, &[Variant::Oracle, Variant::Base], &Policies::default(), None).unwrap();
    let text = table.to_text();
    assert!(text.contains("oracle") && text.contains("base") && text.contains("±"));
    let mut buf = Vec::new();
    table.write_csv(&mut buf).unwrap();
    let mut r = csv::Reader::from_reader(buf.as_slice());
    assert_eq!(r.records().count(), 2);
    assert!(compare_variants(&cfg, &[Variant::Bor], &Policies::default(), None).is_err());
}

#[test]
fn sweep_reports_one_row_per_level() {
    let mut cfg = short_config();
    cfg.experiment.betas = vec![0.0, 0.5];
    cfg.experiment.trials = 2;
    let sweep = beta_sweep(&cfg, &[Variant::Mbc], &Policies::default(), None).unwrap();
    let mut buf = Vec::new();
    sweep.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("beta,success_mbc,dcm_cm_mbc,foot_cm_mbc"));
    assert_eq!(lines.count(), 2);
    let d = &sweep.diagnostics()[0];
    assert_eq!(d.drop, sweep.success(Variant::Mbc)[0] - sweep.success(Variant::Mbc)[1]);
}
