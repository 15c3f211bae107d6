use std::io::Write;

use manet_lb::experiment::{
    csv_string, format_sig9, run_batch, summarize, sweep, write_csv, Execution, SweepParam, CSV_HEADER,
};
use manet_lb::{run_experiment, ConfigError, ScenarioConfig};
use proptest::prelude::*;

fn short() -> ScenarioConfig {
    ScenarioConfig { name: "short".into(), sim_time_s: 12.0, stream_start_s: 2.0, ..ScenarioConfig::default() }
}

#[test]
fn one_row_per_seed_in_seed_order() {
    let seeds = [9, 3, 5];
    let rows = run_experiment(&short(), &seeds);
    assert_eq!(rows.iter().map(|r| r.seed).collect::<Vec<_>>(), seeds);
    assert!(rows.iter().all(|r| r.ok));
}

#[test]
fn sweep_is_value_major_product() {
    let values = [0.0, 0.3, 0.6, 0.9, 1.0, 1.1];
    let seeds: Vec<u64> = (1..=10).collect();
    let mut cfg = short();
    cfg.sim_time_s = 3.0;
    cfg.stream_start_s = 1.0;
    let rows = sweep(&cfg, SweepParam::Lambda, &values, &seeds).unwrap();
    assert_eq!(rows.len(), 60);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r.lambda, values[i / 10]);
        assert_eq!(r.seed, seeds[i % 10]);
    }
}

#[test]
fn node_sweep_rejects_fractional_counts_before_running() {
    let err = sweep(&short(), SweepParam::Nodes, &[5.0, 3.5], &[1]).unwrap_err();
    assert!(err.to_string().contains("3.5"));
}

#[test]
fn csv_round_trip_recovers_numeric_fields() {
    let rows = run_experiment(&ScenarioConfig { streams: 2, ..short() }, &[1, 2]);
    let text = csv_string(&rows);
    assert!(text.ends_with('\n'));
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(reader.headers().unwrap().iter().collect::<Vec<_>>(), CSV_HEADER);
    for (rec, row) in reader.records().zip(&rows) {
        let rec = rec.unwrap();
        assert_eq!(rec.len(), CSV_HEADER.len());
        let pdr: f64 = rec[10].parse().unwrap();
        assert_eq!(format_sig9(pdr), rec[10]);
        let orig = row.overall_pdr.unwrap();
        assert!((pdr - orig).abs() <= orig.abs() * 5e-9);
        assert_eq!(rec[8].parse::<u64>().unwrap(), row.sent);
        assert_eq!(rec[9].parse::<u64>().unwrap(), row.received);
        assert_eq!(rec[17].parse::<u64>().unwrap(), row.drops.total());
        assert_eq!(rec[3].parse::<f64>().unwrap(), row.lambda);
    }
}

proptest! {
    #[test]
    fn sig9_parse_is_stable(x in -1e9f64..1e9) {
        let s = format_sig9(x);
        let back: f64 = s.parse().unwrap();
        prop_assert_eq!(format_sig9(back), s);
        prop_assert!((back - x).abs() <= x.abs() * 5e-9 + f64::MIN_POSITIVE);
    }
}

#[test]
fn files_are_byte_identical_across_executions() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    write_csv(&run_experiment(&short(), &[1, 2, 3]), &a).unwrap();
    let seq: Vec<_> = run_batch(&short(), &[1, 2, 3], Execution::Sequential).into_iter().map(|r| r.row).collect();
    write_csv(&seq, &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn unwritable_path_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(write_csv(&[], &dir.path().join("missing/dir/x.csv")).is_err());
}

#[test]
fn summary_groups_by_configuration() {
    let mut rows = run_experiment(&ScenarioConfig { balancing: false, ..short() }, &[1, 2, 3]);
    rows.extend(run_experiment(&ScenarioConfig { balancing: true, ..short() }, &[1, 2, 3]));
    let s = summarize(&rows);
    assert_eq!(s.len(), 2);
    assert!(s.iter().all(|g| g.runs == 3 && g.failed == 0));
    for g in &s {
        let (lo, hi, m) = (g.ci_lo.unwrap(), g.ci_hi.unwrap(), g.mean_pdr.unwrap());
        assert!(lo <= m && m <= hi);
    }
}

#[test]
fn scenario_files_load_with_defaults_and_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dense.toml");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "protocol = \"golsr\"\nnodes = 20\n\n[golsr]\ntc_interval_ms = 2000").unwrap();
    let cfg = ScenarioConfig::load(&path).unwrap();
    assert_eq!(cfg.name, "dense");
    assert_eq!(cfg.nodes, 20);
    assert_eq!(cfg.golsr.tc_interval_ms, 2000);
    assert_eq!(cfg.lambda, 0.9);

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "sim_time_s = 10.0\nnodes = 1\n").unwrap();
    match ScenarioConfig::load(&bad).unwrap_err() {
        ConfigError::Invalid { key, line, .. } => {
            assert_eq!(key, "nodes");
            assert_eq!(line, Some(2));
        }
        e => panic!("unexpected {e}"),
    }
    let unknown = dir.path().join("unknown.toml");
    std::fs::write(&unknown, "\n\nlambada = 0.5\n").unwrap();
    let msg = ScenarioConfig::load(&unknown).unwrap_err().to_string();
    assert!(msg.contains("line 3"), "{msg}");
    assert!(ScenarioConfig::load(&dir.path().join("nope.toml")).is_err());
}

#[test]
fn shipped_reference_scenario_equals_defaults() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/reference.toml");
    let cfg = ScenarioConfig::load(&path).unwrap();
    assert_eq!(cfg, ScenarioConfig { name: "reference".into(), ..ScenarioConfig::default() });
}
