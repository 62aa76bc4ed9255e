use std::path::Path;
use std::process::{Command, Output};

fn maass(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maass"))
        .args(args)
        .env_remove("MAASS_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn records(path: &Path) -> Vec<serde_json::Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn group_info_reports_signature() {
    let o = maass(&["group-info", "--family", "gamma222", "--params", "5,0"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("{0,{2,2,2},1}"), "{s}");
    assert!(s.contains("teichmuller dimension 2"), "{s}");
    assert!(s.contains("arithmetic  level 5"), "{s}");
}

#[test]
fn usage_errors_exit_two_and_name_the_flag() {
    let o = maass(&["scan", "--family", "gamma222", "--params", "5,0", "--r", "1:2", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--bogus"));
    let o = maass(&["refine", "--family", "gamma9", "--params", "5,0", "--r-near", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--family"));
}

#[test]
fn domain_errors_exit_one_with_the_error_name() {
    let o = maass(&["group-info", "--family", "gamma222", "--params", "-1,0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error: DomainError:"), "{}", stderr(&o));
    let o = maass(&["--eps", "0.5", "group-info", "--family", "gamma222", "--params", "5,0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("ConfigError"));
}

#[test]
fn refine_writes_a_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.jsonl");
    let o = maass(&[
        "refine", "--family", "gamma222", "--params", "5,0", "--character", "-1,1,-1", "--r-near", "5.436", "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let recs = records(&out);
    assert_eq!(recs.len(), 1);
    let r = recs[0]["R"].as_f64().unwrap();
    assert!((r - 5.436180461).abs() < 1e-5, "{r}");
    assert_eq!(recs[0]["parity"], "even");
    let line = std::fs::read_to_string(&out).unwrap();
    let order = ["\"family\"", "\"params\"", "\"character\"", "\"R\"", "\"lambda\"", "\"coeffs\"", "\"provenance\""];
    let pos: Vec<usize> = order.iter().map(|k| line.find(k).unwrap()).collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]), "{pos:?}");
    assert!(recs[0]["provenance"]["tool_version"].is_string());
}

#[test]
fn config_precedence_flag_over_file_over_default() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# test\neps = 1e-8\n").unwrap();
    let out = dir.path().join("r.jsonl");
    let base = [
        "refine", "--family", "gamma222", "--params", "5,0", "--character", "-1,1,-1", "--r-near", "5.436", "-o",
        out.to_str().unwrap(),
    ];
    let run = |extra: &[&str]| {
        let mut args: Vec<&str> = extra.to_vec();
        args.extend_from_slice(&base);
        let o = maass(&args);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        records(&out)[0]["eps"].as_f64().unwrap()
    };
    assert_eq!(run(&[]), 1e-6);
    assert_eq!(run(&["--config", cfg.to_str().unwrap()]), 1e-8);
    assert_eq!(run(&["--config", cfg.to_str().unwrap(), "--eps", "1e-7"]), 1e-7);
}

#[test]
fn track_then_export_plot() {
    let dir = tempfile::tempdir().unwrap();
    let start = dir.path().join("start.jsonl");
    let o = maass(&[
        "refine", "--family", "gamma222", "--params", "5,0", "--character", "-1,1,-1", "--r-near", "5.436", "-o",
        start.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let curve = dir.path().join("curve.jsonl");
    let o = maass(&[
        "track", "-i", start.to_str().unwrap(), "--direction", "0,1", "--transverse", "0", "--max-steps", "3",
        "--step-initial", "0.002", "--step-max", "0.004", "-o", curve.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let lines = std::fs::read_to_string(&curve).unwrap();
    let trailer: serde_json::Value = serde_json::from_str(lines.lines().last().unwrap()).unwrap();
    assert_eq!(trailer["termination"], "max_steps");
    let n = trailer["points"].as_u64().unwrap() as usize;
    assert_eq!(n, 4);
    let csv = dir.path().join("curve.csv");
    let o = maass(&["export-plot", "-i", curve.to_str().unwrap(), "-o", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "a,b,R");
    assert_eq!(rows.len() - 1, n);
}

#[test]
fn scan_finds_four_forms_in_eleven_to_twelve() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("scan.jsonl");
    let o = maass(&["scan", "--family", "gamma222", "--params", "5,0", "--r", "11:12", "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(records(&out).len(), 4);
}
