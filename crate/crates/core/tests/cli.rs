use std::path::Path;
use std::process::{Command, Output};

use starris::bcd::{run_scheme, Scheme};
use starris::experiment::{write_convergence, CSV_HEADER};
use starris::scenario::{ChannelSet, SystemConfig};

const SMALL: &str = "N = 6\nM = 2\nU_A = 1\nU_B = 1\n[solver]\nmax_bcd_iters = 20\nstarts = 1\nseed = 3\n";

fn starris(args: &[&str], config: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_starris"));
    cmd.args(args);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.output().unwrap()
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("small.toml");
    std::fs::write(&path, SMALL).unwrap();
    path
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn invalid_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out_csv = dir.path().join("x.csv");
    let out_csv = out_csv.to_str().unwrap();

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "N = 2\nQ = 1\n").unwrap();
    let out = starris(&["convergence", "--out", out_csv], Some(&bad));
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("Q >= 2"), "{}", stderr(&out));

    let unknown = dir.path().join("unknown.toml");
    std::fs::write(&unknown, "N = 8\nbogus = 1\n").unwrap();
    let out = starris(&["convergence", "--out", out_csv], Some(&unknown));
    assert_eq!(out.status.code(), Some(2));
    let msg = stderr(&out);
    assert!(msg.contains("line 2") && msg.contains("bogus"), "{msg}");

    let out = starris(&["convergence", "--out", out_csv], Some(&dir.path().join("missing.toml")));
    assert_eq!(out.status.code(), Some(2));

    let cfg = small_config(dir.path());
    let out = starris(&["sweep", "--param", "pmax", "--values", "0.1,0.05", "--out", out_csv], Some(&cfg));
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(!Path::new(out_csv).exists());
}

#[test]
fn unwritable_output_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let target = blocker.join("trace.csv");
    let out = starris(&["convergence", "--out", target.to_str().unwrap()], Some(&cfg));
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn sweep_writes_one_row_per_job() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let csv = dir.path().join("pmax.csv");
    let out = starris(
        &["sweep", "--param", "pmax", "--values", "0.01,0.05,0.1", "--trials", "20", "--out", csv.to_str().unwrap()],
        Some(&cfg),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3 * 20 * 5);
    assert!(rows.iter().all(|r| r.len() == 7 && r[2] == "pmax" && r[6] == "0.0"));
    // ordered by value, then scheme tag, then seed
    assert_eq!(rows[0][..4], ["fstar", "0", "pmax", "0.01"]);
    assert_eq!(rows[19][..2], ["fstar", "19"]);
    assert_eq!(rows[20][..2], ["proposed", "0"]);
    assert_eq!(rows.last().unwrap()[..4], ["rsv", "19", "pmax", "0.1"]);
}

#[test]
fn convergence_is_reproducible_and_nondecreasing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let out = starris(&["convergence", "--seed", "2", "--out", path.to_str().unwrap()], Some(&cfg));
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    let text = String::from_utf8(bytes).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("iteration,sum_rate"));
    let rates: Vec<f64> = lines
        .enumerate()
        .map(|(i, l)| {
            let (it, rate) = l.split_once(',').unwrap();
            assert_eq!(it.parse::<usize>().unwrap(), i + 1);
            rate.parse().unwrap()
        })
        .collect();
    assert!(!rates.is_empty());
    assert!(rates.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn simulate_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out_dir = dir.path().join("sim");
    let out = starris(
        &["simulate", "--seed", "1", "--schemes", "proposed,rsv", "--out", out_dir.to_str().unwrap()],
        Some(&cfg),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    for tag in ["proposed", "rsv"] {
        let text = std::fs::read_to_string(out_dir.join(format!("{tag}.json"))).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["scheme"], tag);
        assert_eq!(v["power"].as_array().unwrap().len(), 2);
        assert!(v.get("block_timings").is_none());
        let trace = v["trace"].as_array().unwrap();
        assert_eq!(trace.last().unwrap(), &v["sum_rate"]);
    }
    let summary = std::fs::read_to_string(out_dir.join("results.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
}

#[test]
fn zero_channel_trace_is_a_single_zero_row() {
    let cfg = SystemConfig {
        elements: 6,
        ..SystemConfig::desk()
    };
    let rep = run_scheme(Scheme::Proposed, &cfg, &ChannelSet::zeros(&cfg), 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("zero.csv");
    write_convergence(&path, &rep.trace).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), "iteration,sum_rate\n1,0.0\n");
}
