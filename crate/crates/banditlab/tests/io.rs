use banditlab::io::{
    apply_seed_override, read_gains, read_results, read_round_log, result_rows, write_gains, write_results,
    RoundLogWriter,
};
use banditlab_core::adversaries::gen_stochastic;
use banditlab_core::harness::{run_episode, ExperimentConfig};
use serde_json::json;

fn ftpl_config() -> ExperimentConfig {
    serde_json::from_value(json!({
        "algorithm": "ftpl_gr",
        "distribution": {"kind": "gumbel"},
        "adversary": {"type": "stochastic", "means": [0.1, 0.6, 0.4]},
        "N": 3, "T": 200,
        "eta_rule": {"rule": "fixed", "eta": 4.0},
        "gr_cap": 8
    }))
    .unwrap()
}

#[test]
fn round_log_round_trip() {
    let (_, logs) = run_episode(&ftpl_config(), 4).unwrap();
    let mut w = RoundLogWriter::new(Vec::new());
    for l in &logs {
        w.write(l).unwrap();
    }
    let mut buf = Vec::new();
    {
        let mut w2 = RoundLogWriter::new(&mut buf);
        for l in &logs {
            w2.write(l).unwrap();
        }
        w2.finish().unwrap();
    }
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("t,arm,gain,p_estimate,estimator_value,gr_iterations\n"));
    let back = read_round_log(buf.as_slice()).unwrap();
    assert_eq!(back.len(), logs.len());
    for (a, b) in back.iter().zip(&logs) {
        assert_eq!((a.t, a.arm, a.gain, a.p_estimate, a.estimator_value, a.gr_iterations), (b.t, b.arm, b.gain, b.p_estimate, b.estimator_value, b.gr_iterations));
    }
}

#[test]
fn gain_table_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let g = gen_stochastic(4, 30, &[0.1, 0.5, 0.9, 0.3], 77).unwrap();
    let (csv, header) = (dir.path().join("g.csv"), dir.path().join("g.json"));
    write_gains(&g, &csv, &header).unwrap();
    let h: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&header).unwrap()).unwrap();
    assert_eq!(h, json!({"generator_id": "stochastic", "seed": 77, "N": 4, "T": 30}));
    assert_eq!(read_gains(&csv, &header).unwrap(), g);
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 31);
}

#[test]
fn gain_table_rejects_out_of_range_entries() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, header) = (dir.path().join("g.csv"), dir.path().join("g.json"));
    std::fs::write(&csv, "arm0,arm1\n0,-1\n0.5,0\n").unwrap();
    std::fs::write(&header, r#"{"generator_id":"file","seed":null,"N":2,"T":2}"#).unwrap();
    assert!(read_gains(&csv, &header).is_err());
}

#[test]
fn results_table_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ftpl_config();
    let eps: Vec<_> = (0..3).map(|s| run_episode(&cfg, s).unwrap().0).collect();
    let rows = result_rows(&cfg, &eps, &[]);
    let path = dir.path().join("results.csv");
    write_results(&path, &rows).unwrap();
    let header = std::fs::read_to_string(&path).unwrap().lines().next().unwrap().to_owned();
    assert_eq!(header, "config_hash,seed,T,N,dist,eta,regret,over_est,under_est,div_est,algorithm,adversary");
    assert_eq!(read_results(&path).unwrap(), rows);
    assert!(rows.iter().all(|r| r.eta == Some(4.0) && r.over_est.is_none()));
}

#[test]
fn master_seed_override() {
    let mut cfg = ftpl_config();
    apply_seed_override(&mut cfg, None).unwrap();
    assert_eq!(cfg.master_seed, 0);
    apply_seed_override(&mut cfg, Some(" 991 ")).unwrap();
    assert_eq!(cfg.master_seed, 991);
    assert!(apply_seed_override(&mut cfg, Some("-3")).is_err());
    let base = ftpl_config();
    assert_ne!(run_episode(&cfg, 0).unwrap().1, run_episode(&base, 0).unwrap().1);
    assert_eq!(cfg.fingerprint(), base.fingerprint());
}
