use std::path::Path;
use std::process::{Command, Output};

fn varreg(args: &[&str], out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_varreg"));
    cmd.args(args);
    if let Some(dir) = out {
        cmd.arg("--out").arg(dir);
    }
    cmd.output().unwrap()
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    for kind in ["solve", "bregman", "debias", "convergence"] {
        let a = tmp.path().join(format!("{kind}-a"));
        let b = tmp.path().join(format!("{kind}-b"));
        assert_eq!(varreg(&[kind], Some(&a)).status.code(), Some(0), "{kind}");
        assert_eq!(varreg(&[kind], Some(&b)).status.code(), Some(0), "{kind}");
        let mut names: Vec<String> = std::fs::read_dir(&a)
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        names.sort();
        assert!(names.iter().any(|n| n.ends_with(".csv")));
        for n in &names {
            assert_eq!(read(&a, n), read(&b, n), "{kind}/{n}");
        }
    }
}

#[test]
fn config_file_round_trips_through_preset() {
    let tmp = tempfile::tempdir().unwrap();
    let preset = varreg(&["preset", "solve"], None);
    let cfg = tmp.path().join("solve.toml");
    std::fs::write(&cfg, &preset.stdout).unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(varreg(&["solve", "--config", cfg.to_str().unwrap()], Some(&a))
        .status
        .success());
    assert!(varreg(&["solve"], Some(&b)).status.success());
    assert_eq!(read(&a, "solution.csv"), read(&b, "solution.csv"));
    assert_eq!(read(&a, "config.toml"), preset.stdout);
}

#[test]
fn bad_input_exits_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = varreg(&["solve", "--alpha", "-1"], Some(tmp.path()));
    assert_eq!(out.status.code(), Some(2));
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(
        &cfg,
        "experiment = \"solve\"\nalpah = 1.0\n[operator]\nkind = \"identity\"\nn = 2\n",
    )
    .unwrap();
    let out = varreg(&["solve", "--config", cfg.to_str().unwrap()], Some(tmp.path()));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpah"));
}
