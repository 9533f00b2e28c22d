use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_ncauth");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

const SINGLE_EDGE: &str = r#"{"nodes": [{"id": "s", "role": "source"}, {"id": "d", "role": "destination"}],
 "edges": [{"from": "s", "to": "d"}]}"#;

#[test]
fn describe_butterfly() {
    let o = run(&["describe", "builtin:butterfly"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("c=1, N=2, strategies=6"), "{out}");
    assert!(out.contains("C            coding relay"));
}

#[test]
fn describe_single_edge() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "sd.json", SINGLE_EDGE);
    let o = run(&["describe", &f]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("c=0, N=0, strategies=1"));
}

#[test]
fn malformed_input_exits_2_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "bad.json",
        r#"{"nodes": [{"id": "s", "role": "source"}, {"id": "d"}], "edges": []}"#,
    );
    let o = run(&["describe", &f]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nodes[1].role"), "{}", stderr(&o));

    let f = write(dir.path(), "syntax.json", "{\n  \"nodes\": [\n");
    let o = run(&["describe", &f]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line "), "{}", stderr(&o));

    let o = run(&["describe", "builtin:butterfly", "--attack", "A-D=0.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn optimize_examples() {
    let o = run(&["optimize", "builtin:butterfly", "--attack", "A-C=0.5"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("strategy: (C: XAF, D: F)"), "{}", stdout(&o));

    let o = run(&["optimize", "builtin:butterfly"]);
    assert!(stdout(&o).contains("strategy: (C: XF, D: F)"));

    let o = run(&[
        "optimize",
        "builtin:butterfly",
        "--attack",
        "A-C=0.3,B-C=0.3,C-D=0.3",
        "--objective",
        "energy-throughput",
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("strategy: (C: AXF,"), "{}", stdout(&o));
}

#[test]
fn optimize_capacity_exit_4() {
    let o = run(&["optimize", "builtin:butterfly", "--max-relays", "1"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn sweep_reports_single_link_switch() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let o = run(&[
        "sweep",
        "builtin:butterfly",
        "--links",
        "A-C",
        "--grid",
        "0:1:0.01",
        "--objective",
        "energy",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let err = stderr(&o);
    let line = err.lines().find(|l| l.starts_with("switch at p=")).expect("a switch line");
    let p: f64 = line["switch at p=".len()..].split(':').next().unwrap().parse().unwrap();
    assert!((0.20..=0.28).contains(&p), "{line}");
    let csv = fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 102);
    assert_eq!(csv.lines().next().unwrap(), "p,C,D,F_E_joules,P_th");
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("sweep.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "sweep");
    assert_eq!(manifest["parameters"]["grid"], "0:1:0.01");
}

#[test]
fn sweep_single_point_and_uniform() {
    let o = run(&["sweep", "builtin:butterfly", "--links", "A-C", "--grid", "0:0:1"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 2);

    let o = run(&["sweep", "builtin:butterfly", "--links", "A-C,B-C,C-D", "--grid", "0:1:0.01"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 102);

    let o = run(&["sweep", "builtin:butterfly", "--links", "A-C", "--grid", "0:1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn csv_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let net = write(
        dir.path(),
        "chain.json",
        r#"{"nodes": [{"id": "s", "role": "source"}, {"id": "t", "role": "source"},
                      {"id": "x", "role": "relay"}, {"id": "y", "role": "relay"}, {"id": "d", "role": "destination"}],
            "edges": [{"from": "s", "to": "x"}, {"from": "t", "to": "x"}, {"from": "x", "to": "y"},
                      {"from": "y", "to": "d"}, {"from": "s", "to": "d"}]}"#,
    );
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}.csv"));
        let o = run(&[
            "sweep",
            &net,
            "--links",
            "s-x",
            "--grid",
            "0:1:0.25",
            "--objective",
            "energy-throughput",
            "--trials",
            "20000",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        outputs.push(fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn simulate_agrees_and_flags_exact_rows() {
    let o = run(&[
        "simulate",
        "builtin:butterfly",
        "--strategy",
        "C=XAF,D=F",
        "--attack",
        "A-C=0.3",
        "--trials",
        "200000",
        "--fail-z",
        "4",
    ]);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("exact"));
    assert!(out.lines().any(|l| l.starts_with("P_th") && l.contains("not gated")));

    let o = run(&["simulate", "builtin:butterfly", "--strategy", "C=AXF,D=AF", "--trials", "10000"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.lines().filter(|l| l.starts_with("f_") || l.starts_with("P_")).all(|l| l.contains("exact")), "{out}");
    assert!(out.contains("AXF closed form credits partially valid combinations"));
}

#[test]
fn simulate_fail_z_exits_3() {
    // a threshold below any attainable |z| on an attacked link
    let o = run(&[
        "simulate",
        "builtin:butterfly",
        "--strategy",
        "C=XF,D=F",
        "--attack",
        "A-C=0.3333333",
        "--trials",
        "1000",
        "--fail-z",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stdout(&o));
}

#[test]
fn simulate_rejects_bad_labels() {
    let o = run(&["simulate", "builtin:butterfly", "--strategy", "C=XAF,D=AXF"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn export_then_describe_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("net.json");
    let o = run(&["export", "builtin:butterfly", "--attack", "A-C=0.4", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let a = stdout(&run(&["describe", "builtin:butterfly", "--attack", "A-C=0.4"]));
    let b = stdout(&run(&["describe", out.to_str().unwrap()]));
    let body = |s: &str| s.lines().skip(1).map(str::to_owned).collect::<Vec<_>>();
    assert_eq!(body(&a), body(&b));
    assert!(b.contains("A -> C  p=0.4"));
}
