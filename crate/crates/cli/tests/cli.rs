use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_manet-lb"))
}

fn scenario(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("quick.toml");
    std::fs::write(&path, format!("sim_time_s = 6.0\nstream_start_s = 1.0\n{body}")).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn csv_lines(out: &Output) -> Vec<String> {
    String::from_utf8(out.stdout.clone()).unwrap().lines().map(str::to_owned).collect()
}

#[test]
fn run_writes_one_row_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(dir.path(), "");
    let out = run(&["run", "--config", cfg.to_str().unwrap(), "--seeds", "1-3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let lines = csv_lines(&out);
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("scenario,protocol,balanced,lambda"));
    assert!(lines[1].starts_with("quick,batman,true,0.9,15,1,1,ok,"));
}

#[test]
fn out_file_is_reproducible_and_protocol_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(dir.path(), "");
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = run(&[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "4",
            "--protocol",
            "golsr",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().contains(",golsr,"));
}

#[test]
fn sweeps_cover_every_value_seed_pair() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(dir.path(), "");
    let cfg = cfg.to_str().unwrap();
    let o = run(&["sweep-lambda", "--config", cfg, "--seeds", "1,2", "--values", "0,0.9,1.1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(csv_lines(&o).len(), 1 + 6);
    let o = run(&["sweep-nodes", "--config", cfg, "--seeds", "1", "--values", "5,10"]);
    assert_eq!(o.status.code(), Some(0));
    let lines = csv_lines(&o);
    assert!(lines[1].contains(",5,1,1,ok,") && lines[2].contains(",10,1,1,ok,"));
    let o = run(&["sweep-streams", "--config", cfg, "--seeds", "1", "--values", "1,2,3"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(csv_lines(&o).len(), 4);
}

#[test]
fn compare_pairs_plain_and_balanced() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(dir.path(), "");
    let o = run(&["compare", "--config", cfg.to_str().unwrap(), "--seeds", "1-2"]);
    assert_eq!(o.status.code(), Some(0));
    let lines = csv_lines(&o);
    assert_eq!(lines.len(), 5);
    assert!(lines[1].contains(",false,") && lines[3].contains(",true,"));
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("plain") && stderr.contains("balanced"));
}

#[test]
fn trace_files_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(dir.path(), "");
    let traces = dir.path().join("traces");
    let o = run(&["run", "--config", cfg.to_str().unwrap(), "--seeds", "1-2", "--trace-pdr", traces.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let mut files: Vec<_> = std::fs::read_dir(&traces).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    assert_eq!(files.len(), 2);
    let text = std::fs::read_to_string(&files[0]).unwrap();
    assert!(text.starts_with("window_end_s,sent,received,current_pdr\n"));
    assert_eq!(text.lines().count(), 1 + 6);
}

#[test]
fn empty_seed_list_is_header_only() {
    let o = run(&["run", "--seeds", ""]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(csv_lines(&o).len(), 1);
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = scenario(dir.path(), "nodes = 1\n");
    let o = run(&["run", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nodes"));

    let unknown = scenario(dir.path(), "warp = 9\n");
    assert_eq!(run(&["run", "--config", unknown.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(run(&["run", "--config", "/nonexistent.toml"]).status.code(), Some(1));
    assert_eq!(run(&["sweep-nodes", "--values", "3.5", "--seed", "1"]).status.code(), Some(1));
    assert_eq!(run(&["run", "--seeds", "x"]).status.code(), Some(1));
    assert_eq!(run(&["run", "--protocol", "aodv"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn unwritable_output_is_a_run_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(dir.path(), "");
    let out = dir.path().join("no/such/dir/out.csv");
    let o = run(&["run", "--config", cfg.to_str().unwrap(), "--seed", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
