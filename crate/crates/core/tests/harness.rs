use std::path::Path;

use vpgen_core::asymptotics::metrics_file_name;
use vpgen_core::harness::{config_from_str, execute, load_config_as, report, ExperimentKind};

const COLD: &str = r#"{"shape": {"type": "cold_monokinetic", "mass": 1.0,
    "profile": {"type": "uniform_ball", "radius": 1.0},
    "velocity": {"type": "zero"}}, "gamma": 1.0}"#;

const SHELL: &str = r#"{"shape": {"type": "shell_sum",
    "shells": [{"radius": 1.0, "velocity": 0.0, "mass": 1.0}]}, "gamma": 1.0}"#;

fn config(kind: &str, datum: &str, extra: &str) -> String {
    format!(
        r#"{{"kind": "{kind}", "datum": {datum}, "widths": [0.5, 0.25, 0.125, 0.0625],
            "n0": 400, "T": 0.2, "sample_every": 5 {extra}}}"#
    )
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn sweep_writes_its_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let c = config_from_str(&config("sweep", COLD, r#", "track_tangent": true"#)).unwrap();
    let manifest = execute(&c, dir.path()).unwrap();
    assert_eq!(manifest.config_sha256, c.sha256().unwrap());
    assert!(manifest.failures.is_empty(), "{:?}", manifest.failures);
    for s in &c.widths {
        assert!(dir.path().join(metrics_file_name(*s)).exists());
    }
    let summary = read(&dir.path().join("summary.csv"));
    let names: Vec<&str> = summary
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(names, ["f", "P", "u", "u'", "rho", "Z", "tangent"]);
    let saved = read(&dir.path().join("config.json"));
    assert_eq!(config_from_str(&saved).unwrap(), c);
    assert!(read(&dir.path().join("manifest.json")).contains(&manifest.config_sha256));
}

#[test]
fn reruns_are_bitwise_identical() {
    let c = config_from_str(&config("sweep", COLD, "")).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    execute(&c, a.path()).unwrap();
    execute(&c, b.path()).unwrap();
    for s in &c.widths {
        let name = metrics_file_name(*s);
        assert_eq!(read(&a.path().join(&name)), read(&b.path().join(&name)));
    }
    assert_eq!(
        read(&a.path().join("summary.csv")),
        read(&b.path().join("summary.csv"))
    );
}

#[test]
fn report_rebuilds_the_summary() {
    let dir = tempfile::tempdir().unwrap();
    let c = config_from_str(&config("sweep", COLD, "")).unwrap();
    execute(&c, dir.path()).unwrap();
    let original = read(&dir.path().join("summary.csv"));
    let rows = report(dir.path()).unwrap();
    assert!(rows[0].slope.is_none(), "f needs particle data");
    let rebuilt = read(&dir.path().join("summary.csv"));
    // every row except f is reproduced from the metrics files
    for (a, b) in original.lines().zip(rebuilt.lines()).skip(2) {
        assert_eq!(a, b);
    }
}

#[test]
fn single_run_writes_metrics_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let c = config_from_str(&config("run", COLD, "")).unwrap();
    execute(&c, dir.path()).unwrap();
    assert!(dir.path().join(metrics_file_name(0.5)).exists());
    assert!(!dir.path().join(metrics_file_name(0.25)).exists());
    assert!(read(&dir.path().join("field.csv")).starts_with("r,M,rho,u,uprime"));
}

#[test]
fn limit_compares_every_width() {
    let dir = tempfile::tempdir().unwrap();
    let c = config_from_str(&config("limit", SHELL, "")).unwrap();
    let manifest = execute(&c, dir.path()).unwrap();
    assert!(manifest.failures.is_empty(), "{:?}", manifest.failures);
    let limit = read(&dir.path().join("limit.csv"));
    assert_eq!(limit.lines().count(), 1 + 4 * c.widths.len());
    assert!(read(&dir.path().join("oracle.csv")).starts_with("t,label,r,vr"));
}

#[test]
fn stability_writes_reports_and_fit() {
    let dir = tempfile::tempdir().unwrap();
    let text = config(
        "stability",
        COLD,
        r#", "stability": {"delta": 1e-3, "mode": "data"}"#,
    )
    .replace("[0.5, 0.25, 0.125, 0.0625]", "[0.5, 0.25]");
    let c = config_from_str(&text).unwrap();
    execute(&c, dir.path()).unwrap();
    let csv = read(&dir.path().join("stability.csv"));
    assert!(csv.starts_with("s,delta,dZ,drho,dforce,amplification"));
    assert_eq!(csv.lines().count(), 1 + 2 * 2);
    let fit: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("stability_fit.json"))).unwrap();
    assert!(fit.get("gronwall").is_some());
    assert_eq!(fit["linear_response"].as_array().unwrap().len(), 2);
}

#[test]
fn poisson_check_agrees_across_paths() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        r#"{{"kind": "poisson-check", "datum": {COLD}, "widths": [1.0],
            "poisson": {{"particles": 20000, "spacing": 0.1, "radii": [0.0, 0.5, 1.5]}}}}"#
    );
    let c = config_from_str(&text).unwrap();
    let manifest = execute(&c, dir.path()).unwrap();
    assert!(manifest.failures.is_empty(), "{:?}", manifest.failures);
    let json: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("poisson_check.json"))).unwrap();
    assert!(json["max_disagreement"].as_f64().unwrap() < 1e-2);
    let mut rdr = csv::Reader::from_path(dir.path().join("poisson_check.csv")).unwrap();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let v: Vec<f64> = (0..4).map(|k| rec[k].parse().unwrap()).collect();
        assert!((v[1] - v[2]).abs() < 2e-2, "{v:?}");
    }
}

#[test]
fn scale_check_writes_a_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let c = config_from_str(
        r#"{"kind": "scale-check", "scale_check": {"scale": {"family": "power-of-log", "p": 2.0}, "p": 2.0, "variant": 1}}"#,
    )
    .unwrap();
    execute(&c, dir.path()).unwrap();
    assert!(read(&dir.path().join("scale_check.csv")).starts_with("ell,c,value"));
}

#[test]
fn subcommand_sets_the_kind() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    let text = config("sweep", COLD, "").replace(r#""kind": "sweep", "#, "");
    std::fs::write(&path, text).unwrap();
    let c = load_config_as(&path, ExperimentKind::Limit).unwrap();
    assert_eq!(c.kind, ExperimentKind::Limit);
}
