mod common;

use std::fs;
use std::path::Path;

use boussq_core::checkpoint::FormTag;
use boussq_core::diagnostics::{sobolev_norm, DiagnosticsRecord};
use boussq_core::harness::store::{self, RecordRow};
use boussq_core::harness::{
    classify_sequence, exit_code, load_summary, make_initial_data, run, DataKind, DataParams, ExperimentSpec,
    Scenario, SequenceClass, ILL_PREPARED_FLOOR,
};
use boussq_core::wave_ops::Which;
use boussq_core::{Boussinesq, Checkpoint, Error, FrameTable};
use common::*;
use serde_json::json;

#[test]
fn initial_data_satisfies_its_constraints() {
    let g = grid_4pi(16);
    let params = DataParams::default();
    for kind in [DataKind::RandomBandlimited, DataKind::WellPrepared, DataKind::IllPrepared] {
        let u = make_initial_data(kind, 7, &g, 2.0, &params).unwrap();
        assert!(u.max_divergence() < 1e-14);
        assert!(u.conjugate_symmetry_defect() < 1e-15);
        assert_eq!(u.at(0), [num_complex::Complex64::new(0.0, 0.0); 4]);
        assert!((sobolev_norm(&u, 6.0) - 1.0).abs() < 1e-12);
        for idx in 0..g.total() {
            if g.mode(idx).iter().any(|m| 4 * m.abs() > 16) {
                assert!(u.at(idx).iter().all(|z| z.norm() == 0.0));
            }
        }
        let again = make_initial_data(kind, 7, &g, 2.0, &params).unwrap();
        assert_eq!(u.comps, again.comps);
        let other = make_initial_data(kind, 8, &g, 2.0, &params).unwrap();
        assert!(u.sub(&other).norm_sq() > 0.0);
    }
    let frames = FrameTable::new(&g, 2.0).unwrap();
    let well = make_initial_data(DataKind::WellPrepared, 3, &g, 2.0, &params).unwrap();
    assert!(frames.project(&well, Which::Mu).sub(&well).norm_sq().sqrt() < 1e-14);
    let ill = make_initial_data(DataKind::IllPrepared, 3, &g, 2.0, &params).unwrap();
    assert!(sobolev_norm(&ill.sub(&frames.project(&ill, Which::Mu)), 3.0) >= ILL_PREPARED_FLOOR);
}

#[test]
fn scenario_names_round_trip() {
    for sc in Scenario::ALL {
        assert_eq!(sc.name().parse::<Scenario>().unwrap(), sc);
        assert_eq!(serde_json::to_value(sc).unwrap(), json!(sc.name()));
    }
    assert!(matches!("continuity-n".parse::<Scenario>(), Err(Error::Config(_))));
}

#[test]
fn json_overrides_and_unknown_keys() {
    let spec = ExperimentSpec::for_scenario(Scenario::ConvergePrepared);
    let merged = spec.merge_json(&json!({ "grid": 16, "mu": [1.5], "dt": 0.01 })).unwrap();
    assert_eq!(merged.grid, 16);
    assert_eq!(merged.mu, vec![1.5]);
    assert_eq!(merged.dt, Some(0.01));
    assert_eq!(merged.n_list, spec.n_list);
    assert!(matches!(spec.merge_json(&json!({ "grdi": 16 })), Err(Error::Config(_))));
    assert!(matches!(spec.merge_json(&json!([1, 2])), Err(Error::Config(_))));
}

#[test]
fn invalid_specs_exit_with_status_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut cases = Vec::new();
    let mut s = ExperimentSpec::for_scenario(Scenario::ContinuityN);
    s.dt = None;
    cases.push(s);
    let mut s = ExperimentSpec::for_scenario(Scenario::ConvergePrepared);
    s.grid = 9;
    cases.push(s);
    let mut s = ExperimentSpec::for_scenario(Scenario::NonconvergeHs);
    s.t0 = 2.0 * s.t_final;
    cases.push(s);
    let mut s = ExperimentSpec::for_scenario(Scenario::Dispersion);
    s.mu.retain(|m| *m != 1.0);
    cases.push(s);
    let mut s = ExperimentSpec::for_scenario(Scenario::NonconvergeMu1);
    s.mu = vec![2.0];
    cases.push(s);
    for mut spec in cases {
        spec.out = dir.path().join("never");
        let outcome = run(&spec);
        assert!(matches!(outcome, Err(Error::Config(_))), "{:?}", spec.scenario);
        assert_eq!(exit_code(&outcome), 2);
        assert!(!spec.out.exists());
    }
}

fn small_spec(out: &Path) -> ExperimentSpec {
    let mut spec = ExperimentSpec::for_scenario(Scenario::ConvergePrepared);
    spec.mu = vec![2.0];
    spec.n_list = vec![5.0, 10.0, 20.0];
    spec.grid = 8;
    spec.t_final = 0.05;
    spec.samples = 20;
    spec.out = out.to_path_buf();
    spec
}

#[test]
fn runs_write_artifacts_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let sa = run(&small_spec(&a)).unwrap();
    let sb = run(&small_spec(&b)).unwrap();
    assert_eq!(sa.config_hash, sb.config_hash);
    assert_eq!(sa.config_hash.len(), 16);
    let csv_a = fs::read(a.join("records.csv")).unwrap();
    assert_eq!(csv_a, fs::read(b.join("records.csv")).unwrap());
    let rows: Vec<RecordRow> = store::read_rows(&a.join("records.csv")).unwrap();
    assert_eq!(rows.len(), 3 * 21 * 5);
    assert!(rows.iter().any(|r| r.norm_name == "diff:Hs:3:qg"));
    let loaded = load_summary(&a).unwrap();
    assert_eq!(loaded.clauses, sa.clauses);
    assert_eq!(loaded.config, sa.config);
    assert_eq!(fs::read_dir(a.join("runs")).unwrap().count(), 3);
    assert_eq!(fs::read_dir(a.join("checkpoints")).unwrap().count(), 3);
    assert!(sa.clause("rate-slope:mu=2").is_some());
    // Output location does not enter the hash.
    let mut moved = small_spec(&a);
    moved.jobs = 3;
    assert_eq!(boussq_core::harness::spec_hash(&moved).unwrap(), sa.config_hash);
}

#[test]
fn interrupted_runs_resume_to_identical_records() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    let spec = small_spec(&out);
    run(&spec).unwrap();
    let reference = fs::read(out.join("records.csv")).unwrap();

    // Rewind every run to its sample-16 checkpoint and drop the finished outputs.
    for entry in fs::read_dir(out.join("checkpoints")).unwrap() {
        let path = entry.unwrap().path();
        let cp = Checkpoint::load(&path).unwrap();
        assert_eq!(cp.form, FormTag::Boussinesq);
        assert_eq!(cp.sample_index, 20);
        let solver = Boussinesq::new(cp.config.clone()).unwrap();
        let u0 = make_initial_data(DataKind::WellPrepared, spec.seed, &solver.grid, cp.config.mu, &spec.data_params())
            .unwrap();
        let mut mid = None;
        solver
            .solve(&u0, |k, t, u| {
                if k == 16 {
                    mid = Some((t, u.clone()));
                }
                Ok(())
            })
            .unwrap();
        let (t, u) = mid.unwrap();
        Checkpoint::from_state(&cp.config, 16, t, &u, &cp.records[..17]).save(&path).unwrap();
    }
    fs::remove_file(out.join("records.csv")).unwrap();
    fs::remove_dir_all(out.join("runs")).unwrap();
    run(&spec).unwrap();
    assert_eq!(fs::read(out.join("records.csv")).unwrap(), reference);
}

#[test]
fn checkpoint_bytes_round_trip() {
    let g = grid_2pi(8);
    let u = rough(&g, 1);
    let cfg = boussq_core::SimConfig { grid: [8; 3], ..Default::default() };
    let recs = vec![DiagnosticsRecord::new("x", 0.25, "abc").with("L2", 1.0 / 3.0)];
    let cp = Checkpoint::from_state(&cfg, 3, 0.25, &u, &recs);
    let back = Checkpoint::from_bytes(&cp.to_bytes().unwrap()).unwrap();
    assert_eq!(back.config, cfg);
    assert_eq!(back.sample_index, 3);
    assert_eq!(back.time, 0.25);
    assert_eq!(back.records, recs);
    assert_eq!(back.state(&g).unwrap().comps, u.comps);
    let mut bad = cp.to_bytes().unwrap();
    bad[0] = b'X';
    assert!(Checkpoint::from_bytes(&bad).is_err());
    let short = &cp.to_bytes().unwrap()[..40];
    assert!(Checkpoint::from_bytes(short).is_err());
}

#[test]
fn sequence_classification() {
    let mu: Vec<f64> = (1..=6).map(|k| 1.0 + 0.5f64.powi(k)).collect();
    let flat_c = vec![1.0; 6];
    let fast_n: Vec<f64> = (1..=6).map(|k| (k * k) as f64).collect();
    let slow_n: Vec<f64> = mu.iter().map(|m| (m - 1.0).powf(-0.5)).collect();
    assert_eq!(classify_sequence(&fast_n, &mu, &flat_c), SequenceClass::Fast);
    // With a constant blowing up like |mu - 1|^{-1/2}, N = C k^2 has N |mu - 1| ~ k^2 2^{-k/2},
    // which peaks near k = 6 and satisfies the slow rule only over longer sequences.
    let c_of = |m: &f64| 0.3 * (m - 1.0).powf(-0.5);
    let growing_c: Vec<f64> = mu.iter().map(c_of).collect();
    let both_n: Vec<f64> = growing_c.iter().zip(&fast_n).map(|(c, k2)| c * k2).collect();
    assert_eq!(classify_sequence(&both_n, &mu, &growing_c), SequenceClass::Fast);
    let mu16: Vec<f64> = (1..=16).map(|k| 1.0 + 0.5f64.powi(k)).collect();
    let c16: Vec<f64> = mu16.iter().map(c_of).collect();
    let n16: Vec<f64> = c16.iter().enumerate().map(|(i, c)| c * ((i + 1) * (i + 1)) as f64).collect();
    assert_eq!(classify_sequence(&n16, &mu16, &c16), SequenceClass::Both);
    assert_eq!(classify_sequence(&slow_n, &mu, &growing_c), SequenceClass::Slow);
    let constant_n = vec![10.0; 6];
    let shrinking_c: Vec<f64> = (1..=6).map(|k| 1.0 / k as f64).collect();
    assert_eq!(classify_sequence(&constant_n, &vec![2.0; 6], &flat_c), SequenceClass::Unclassified);
    assert_eq!(classify_sequence(&constant_n, &vec![2.0; 6], &shrinking_c), SequenceClass::Fast);
}
