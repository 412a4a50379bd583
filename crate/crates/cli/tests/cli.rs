use std::path::{Path, PathBuf};
use std::process::Command;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn spdelab(args: &[&str], cfg: &Path, out: &Path) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_spdelab"));
    cmd.args(args).arg("--config").arg(cfg).arg("--out").arg(out);
    cmd.env_remove("SEED");
    cmd
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn validate_default_passes_with_headers() {
    let tmp = tempfile::tempdir().unwrap();
    let status = spdelab(&["validate"], &configs().join("default.toml"), tmp.path())
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(0));
    let report = json(&tmp.path().join("report.json"));
    assert_eq!(report["pass"], true);
    let hash = report["config_sha256"].as_str().unwrap().to_string();
    assert_eq!(hash.len(), 64);
    let text = std::fs::read_to_string(tmp.path().join("assumptions.csv")).unwrap();
    let header: Vec<&str> = text.lines().take_while(|l| l.starts_with('#')).collect();
    assert_eq!(header.len(), 4);
    assert!(header[0].contains("spdelab"));
    assert!(header[1].ends_with(&hash));
    assert_eq!(header[2], "# seed: 20240601");
    assert!(header[3].starts_with("# timestamp:"));
}

#[test]
fn broken_configs_exit_with_the_named_condition() {
    for (file, label, name) in [
        ("broken_singular_q.toml", "(A2)(i)", "QQ*-singular"),
        ("broken_b_zero_row.toml", "(A2)(ii)", "BB*-singular"),
        ("broken_a5.toml", "(A5)", "dissipativity"),
    ] {
        let tmp = tempfile::tempdir().unwrap();
        let status = spdelab(&["validate"], &configs().join(file), tmp.path())
            .output()
            .unwrap()
            .status;
        assert_eq!(status.code(), Some(2), "{file}");
        let err = json(&tmp.path().join("error.json"));
        assert_eq!(err["condition"], label, "{file}");
        assert_eq!(err["condition_name"], name, "{file}");
        assert_eq!(err["exit_code"], 2);
        assert!(!tmp.path().join("report.json").exists());
    }
}

#[test]
fn unknown_keys_are_configuration_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "[model]\nmodes = 3\n").unwrap();
    let out = tmp.path().join("out");
    let status = spdelab(&["validate"], &cfg, &out).output().unwrap().status;
    assert_eq!(status.code(), Some(2));
    assert_eq!(json(&out.join("error.json"))["error"], "config");
}

#[test]
fn shift_harnack_rejects_a_delayed_model() {
    let tmp = tempfile::tempdir().unwrap();
    let status = spdelab(&["shift-harnack"], &configs().join("default.toml"), tmp.path())
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(2));
}

#[test]
fn seed_flag_beats_environment_beats_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("default.toml");
    let seed_of = |dir: &str, env: Option<&str>, flag: Option<&str>| {
        let out = tmp.path().join(dir);
        let mut cmd = spdelab(&["validate"], &cfg, &out);
        if let Some(v) = env {
            cmd.env("SEED", v);
        }
        if let Some(v) = flag {
            cmd.args(["--seed", v]);
        }
        assert_eq!(cmd.output().unwrap().status.code(), Some(0));
        json(&out.join("report.json"))["seed"].as_u64().unwrap()
    };
    assert_eq!(seed_of("a", None, None), 20_240_601);
    assert_eq!(seed_of("b", Some("11"), None), 11);
    assert_eq!(seed_of("c", Some("11"), Some("5")), 5);
}

#[test]
fn simulate_writes_paths_and_order() {
    let tmp = tempfile::tempdir().unwrap();
    let status = spdelab(&["simulate"], &configs().join("default.toml"), tmp.path())
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(0));
    let paths = std::fs::read_to_string(tmp.path().join("paths.csv")).unwrap();
    let columns = paths.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(columns, "path,t,x1,x2,x3,x4,y1,y2,y3,y4");
    let report = json(&tmp.path().join("report.json"));
    let slope = report["result"]["order"]["slope"].as_f64().unwrap();
    assert!((0.7..=1.3).contains(&slope), "{slope}");
}
