use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bittp"))
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

const TOY: &str = "PROBLEM NAME:\ttoy
DIMENSION:\t3
NUMBER OF ITEMS:\t0
CAPACITY OF KNAPSACK:\t10
MIN SPEED:\t0.1
MAX SPEED:\t1
RENTING RATIO:\t0
EDGE_WEIGHT_TYPE:\tEXPLICIT
EDGE_WEIGHT_SECTION
0 5 5
5 0 5
5 5 0
ITEMS SECTION\t(INDEX, PROFIT, WEIGHT, ASSIGNED NODE NUMBER):
";

#[test]
fn solve_writes_front_report_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("front.json");
    let o = run(bin()
        .args(["solve", "--segments", "3", "--seed", "7", "--sweeps", "800", "--reads", "8", "--exact-bounds"])
        .arg("--instance")
        .arg(data("synthetic-6-5-1000.ttp"))
        .arg("--out")
        .arg(&out)
        .args(["--format", "csv"]));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let front: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(!front["points"].as_array().unwrap().is_empty());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("front.report.json")).unwrap()).unwrap();
    assert_eq!(report["variables"]["padded"], 6 * (6 + 1));
    assert_eq!(report["bands"].as_array().unwrap().len(), 3);
    let csv = std::fs::read_to_string(dir.path().join("front.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("band_index,f,g,iterations"));
    assert_eq!(lines.count(), 3);
}

#[test]
fn same_seed_gives_identical_front_bytes() {
    let go = || {
        run(bin()
            .args(["solve", "--segments", "2", "--seed", "3", "--sweeps", "500", "--reads", "4"])
            .arg("--instance")
            .arg(data("synthetic-5-4-42.json")))
    };
    let (a, b) = (go(), go());
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn itemless_instance_has_one_point() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("toy.ttp");
    std::fs::write(&path, TOY).unwrap();
    let o = run(bin().args(["solve", "--segments", "4", "--sweeps", "500"]).arg("--instance").arg(&path));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    assert_eq!(v["points"], serde_json::json!([{"f": 15.0, "g": 0.0}]));

    let o = run(bin().arg("oracle").arg("--instance").arg(&path));
    assert!(o.status.success());
    assert_eq!(json(&o)["points"], serde_json::json!([{"f": 15.0, "g": 0.0}]));
}

#[test]
fn exit_codes() {
    let o = run(bin().args(["solve", "--instance", "/nonexistent/x.ttp"]));
    assert_eq!(o.status.code(), Some(2));
    let o = run(bin().args(["solve", "--mode", "sideways"]).arg("--instance").arg(data("synthetic-6-5-1000.ttp")));
    assert_eq!(o.status.code(), Some(3));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"S": 0}"#).unwrap();
    let o = run(bin().arg("solve").arg("--config").arg(&cfg).arg("--instance").arg(data("synthetic-6-5-1000.ttp")));
    assert_eq!(o.status.code(), Some(3));
    let o = run(bin().arg("oracle").arg("--instance").arg(data("synthetic-30-58-11.ttp")));
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn compare_matches_library_values() {
    use bittp::pareto::{hypervolumes, ObjectivePoint};
    let dir = tempfile::tempdir().unwrap();
    let a = [(1.0, -5.0), (2.0, -8.0), (4.0, -9.0)];
    let b = [(1.5, -4.0), (3.0, -8.5)];
    let c = [(1.0, -5.0), (2.0, -8.0), (4.0, -9.0), (1.2, -7.0)];
    let mut paths = Vec::new();
    for (name, pts) in [("a", &a[..]), ("b", &b[..]), ("c", &c[..])] {
        let doc = serde_json::json!({"points": pts.iter().map(|&(f, g)| serde_json::json!({"f": f, "g": g})).collect::<Vec<_>>()});
        let p = dir.path().join(format!("{name}.json"));
        std::fs::write(&p, doc.to_string()).unwrap();
        paths.push(p);
    }
    let o = run(bin().arg("compare").args(&paths));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    let got: Vec<f64> = v["fronts"].as_array().unwrap().iter().map(|r| r["hv"].as_f64().unwrap()).collect();
    let sets: Vec<Vec<ObjectivePoint>> = [&a[..], &b[..], &c[..]]
        .iter()
        .map(|s| s.iter().map(|&(f, g)| ObjectivePoint::new(f, g)).collect())
        .collect();
    let refs: Vec<&[ObjectivePoint]> = sets.iter().map(Vec::as_slice).collect();
    assert_eq!(got, hypervolumes(&refs).0);
    // c is a superset of a
    assert!(got[2] >= got[0]);

    let o = run(bin().arg("compare").arg(&paths[0]).arg(&paths[0]));
    let v = json(&o);
    assert_eq!(v["fronts"][0]["hv"], v["fronts"][1]["hv"]);

    std::fs::write(dir.path().join("bad.json"), "{").unwrap();
    let o = run(bin().arg("compare").arg(dir.path().join("bad.json")));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_prints_summary() {
    let o = run(bin().arg("validate").arg("--instance").arg(data("synthetic-12-22-3.ttp")));
    assert!(o.status.success());
    let v = json(&o);
    assert_eq!(v["cities"], 12);
    assert_eq!(v["items"], 22);
    assert_eq!(v["ceil_2d_consistent"], true);
}
