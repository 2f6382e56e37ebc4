use isotherm::harness::{bundled, RunManifest};
use std::path::Path;
use std::process::{Command, Output};

fn isotherm(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isotherm"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn hopf_cases_pass_and_manifest_checksums_verify() {
    let out = tempfile::tempdir().unwrap();
    let result = isotherm(&["analyze", "--config", "hopf-cases"], out.path());
    assert_eq!(result.status.code(), Some(0), "{}", String::from_utf8_lossy(&result.stderr));
    let dir = out.path().join("hopf-cases");
    let manifest = RunManifest::load(&dir).unwrap();
    assert_eq!(manifest.exit_code, 0);
    assert_eq!(manifest.config_hash, bundled("hopf-cases").unwrap().hash().unwrap());
    assert!(manifest.files.iter().any(|f| f.path == "checks.csv"));
    assert!(manifest.verify_files(&dir).unwrap().is_empty());

    assert!(read(&dir.join("checks.csv")).starts_with("check,value,condition,outcome\n"));
    assert!(read(&dir.join("long.csv")).starts_with("experiment,quantity,t,value\n"));

    // Tampering is detected.
    std::fs::write(dir.join("checks.csv"), "check,value,condition,outcome\n").unwrap();
    assert_eq!(manifest.verify_files(&dir).unwrap(), vec!["checks.csv".to_string()]);
}

#[test]
fn reruns_write_identical_tables() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for out in [&a, &b] {
        let result = isotherm(&["simulate", "--config", "varadhan-disk", "--resolution", "0.0078125"], out.path());
        assert_eq!(result.status.code(), Some(0), "{}", String::from_utf8_lossy(&result.stderr));
    }
    let dir = |root: &Path| root.join("varadhan-disk");
    let mut compared = 0;
    for entry in std::fs::read_dir(dir(a.path())).unwrap() {
        let name = entry.unwrap().file_name();
        if name.to_string_lossy().ends_with(".csv") || name == "config.json" {
            assert_eq!(read(&dir(a.path()).join(&name)), read(&dir(b.path()).join(&name)), "{name:?}");
            compared += 1;
        }
    }
    assert!(compared >= 3);
}

#[test]
fn invalid_configs_exit_with_an_error() {
    let out = tempfile::tempdir().unwrap();
    let json = bundled("varadhan-disk").unwrap().to_json().unwrap();
    let bad = json.replacen("\"shell\": 1.0", "\"shell\": -1.0", 1);
    assert_ne!(bad, json);
    let path = out.path().join("bad.json");
    std::fs::write(&path, bad).unwrap();
    let result = isotherm(&["analyze", "--config", path.to_str().unwrap()], out.path());
    assert_eq!(result.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&result.stderr).is_empty());

    let result = isotherm(&["analyze", "--config", "no-such-experiment"], out.path());
    assert_eq!(result.status.code(), Some(1));

    let result = isotherm(&["discriminate", "--config", "hopf-cases"], out.path());
    assert_eq!(result.status.code(), Some(1));
}

#[test]
fn simulate_writes_probe_values() {
    let out = tempfile::tempdir().unwrap();
    let result = isotherm(&["simulate", "--config", "varadhan-disk", "--resolution", "0.0078125"], out.path());
    assert_eq!(result.status.code(), Some(0), "{}", String::from_utf8_lossy(&result.stderr));
    let dir = out.path().join("varadhan-disk");
    let probes = read(&dir.join("probes.csv"));
    assert!(probes.starts_with("t,probe,x,y,z,u\n"));
    let long = read(&dir.join("long.csv"));
    assert_eq!(long.lines().count(), probes.lines().count());
    for row in long.lines().skip(1) {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 4, "{row}");
        assert_eq!(fields[0], "varadhan-disk");
        let u: f64 = fields[3].parse().unwrap();
        assert!((0.0..=1.0).contains(&u));
    }
}
