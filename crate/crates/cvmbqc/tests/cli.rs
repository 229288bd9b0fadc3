use std::path::Path;
use std::process::{Command, Output};

use cvmbqc_core::gates::BasisTable;

fn cvmbqc(args: &[&str], cache_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cvmbqc"));
    cmd.args(args).env_remove("CVMBQC_CACHE_DIR");
    if let Some(d) = cache_dir {
        cmd.env("CVMBQC_CACHE_DIR", d);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn noise_curve_is_byte_stable() {
    let args = ["noise-curve", "--lattice", "QRL,DBSL", "--gate", "I,F", "--db-min", "0", "--db-max", "3", "--db-step", "1"];
    let a = cvmbqc(&args, None);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let b = cvmbqc(&args, None);
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("lattice,gate,squeezing_db,quadrature,noise_variance_db"));
    // 3 nonzero points: 2 reference rows each, 2 lattices x 2 gates x 2 quadratures
    assert_eq!(lines.count(), 3 * 2 + 3 * 8);
}

#[test]
fn error_curve_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("err.csv");
    let o = cvmbqc(
        &["error-curve", "--lattice", "QRL", "--gate", "FFCZ", "--db-max", "1", "--db-step", "0.5", "--out", out.to_str().unwrap()],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "lattice,gate,squeezing_db,perr");
    assert_eq!(lines[1], "QRL,FFCZ,0.0,1.000000000e0");
    assert!(lines.iter().any(|l| l.starts_with("ZERO_NOISE,FFCZ,1.0,")));
    assert_eq!(lines.len(), 1 + 3 + 3);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(cvmbqc(&["noise-curve", "--db-step", "0"], None).status.code(), Some(2));
    assert_eq!(cvmbqc(&["noise-curve", "--lattice", "HEX"], None).status.code(), Some(2));
    assert_eq!(cvmbqc(&["frobnicate"], None).status.code(), Some(2));
    assert_eq!(cvmbqc(&["error-curve", "--lattice", "BSL", "--gate", "SWAP"], None).status.code(), Some(2));
}

#[test]
fn cache_miss_exits_3_and_names_the_command() {
    let dir = tempfile::tempdir().unwrap();
    let o = cvmbqc(&["error-curve", "--lattice", "MBSL", "--gate", "FFCZ", "--db-min", "10", "--db-max", "11"], Some(dir.path()));
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("cvmbqc optimize --lattice MBSL --db 10"), "{err}");
    assert_eq!(cvmbqc(&["verify"], Some(dir.path())).status.code(), Some(3));
}

#[test]
fn optimize_is_idempotent_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("table.json");
    let args =
        ["optimize", "--lattice", "QRL", "--db", "9,10", "--restarts", "2", "--seed", "4", "--out", out.to_str().unwrap()];
    let o = cvmbqc(&args, None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let first = std::fs::read(&out).unwrap();
    assert!(cvmbqc(&args, None).status.success());
    assert_eq!(std::fs::read(&out).unwrap(), first);
    let table: BasisTable = serde_json::from_slice(&first).unwrap();
    assert_eq!(table.rows.len(), 2);
    // without a destination the command refuses
    assert_eq!(cvmbqc(&["optimize", "--lattice", "QRL", "--db", "9"], None).status.code(), Some(2));
}

#[test]
fn verify_passes_and_catches_corruption() {
    let o = cvmbqc(&["verify"], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["pass"], true);

    let dir = tempfile::tempdir().unwrap();
    let mut table = cvmbqc::cache::bundled().unwrap();
    table.rows[0].angles[0] += 0.05;
    cvmbqc::cache::save(&table, &dir.path().join(cvmbqc::cache::CACHE_FILE)).unwrap();
    let o = cvmbqc(&["verify"], Some(dir.path()));
    assert_eq!(o.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["pass"], false);
}

#[test]
fn dump_graph_prints_a_plan() {
    let o = cvmbqc(&["dump-graph", "--lattice", "BSL", "--gate", "P1", "--db", "12", "--parity", "1"], None);
    assert!(o.status.success());
    let plan: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(plan["steps"].as_array().unwrap().len(), 2);
    assert_eq!(plan["parity"], 1);
    assert_eq!(cvmbqc(&["dump-graph", "--lattice", "BSL", "--parity", "2"], None).status.code(), Some(2));
}
