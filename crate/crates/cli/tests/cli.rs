use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_deltaloop"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn list_names_every_experiment() {
    let out = bin().arg("list").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["theorem1-fit", "sandwich", "persistent-current", "gauge-check", "est2"] {
        assert!(text.contains(name), "{name}");
    }
}

#[test]
fn effective_spectrum_run_passes_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "eff.toml", "experiment = \"effective-spectrum\"\nn = 5\n");
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}"));
        let status = bin().args(["run"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
        assert_eq!(status.code(), Some(0));
        outputs.push((std::fs::read(out.join("spectrum.json")).unwrap(), std::fs::read(out.join("report.json")).unwrap()));
        assert!(out.join("run.log").exists());
    }
    assert_eq!(outputs[0], outputs[1]);
    let json: serde_json::Value = serde_json::from_slice(&outputs[0].0).unwrap();
    let v: Vec<f64> = json["eigenvalues"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    for (a, b) in v.iter().zip([-0.25, 0.75, 0.75, 3.75, 3.75]) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn est2_run_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "est2.toml", "experiment = \"est2\"\nbeta = 20\na = 1\n");
    let out = dir.path().join("o");
    let status = bin().arg("run").arg(&cfg).arg("--out").arg(&out).arg("--workers").arg("2").status().unwrap();
    assert_eq!(status.code(), Some(0));
    let csv = std::fs::read_to_string(out.join("est2.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", "experiment = \"est2\"\nbeta = 20\nunknown_key = 3\n");
    assert_eq!(bin().arg("validate").arg(&bad).status().unwrap().code(), Some(2));
    assert_eq!(bin().arg("run").arg(&bad).arg("--out").arg(dir.path().join("x")).status().unwrap().code(), Some(2));
    let good = write(dir.path(), "good.toml", "experiment = \"est2\"\nbeta = 20\na = 1\n");
    assert_eq!(bin().arg("validate").arg(&good).status().unwrap().code(), Some(0));
}

#[test]
fn failing_claim_exits_one() {
    // no pair satisfies βa > 8/3, so the bound claim has nothing to certify
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "weak.toml", "experiment = \"est2\"\nbeta = 3\na = 0.1\n");
    let status = bin().arg("run").arg(&cfg).arg("--out").arg(dir.path().join("o")).status().unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn curve_file_is_resolved_relative_to_config() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "loop.curve", "kind = circle\nradius = 2\n");
    let cfg = write(dir.path(), "eff.toml", "experiment = \"effective-spectrum\"\ncurve_file = \"loop.curve\"\nn = 3\noutput = \"res\"\n");
    let status = bin().arg("run").arg(&cfg).current_dir("/").status().unwrap();
    assert_eq!(status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("res/report.json")).unwrap()).unwrap();
    assert_eq!(report["claims"][0]["claim"], "closed_form");
    assert_eq!(report["claims"][0]["status"], "pass");
}
