use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_rotpend");

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// Shipped config file and the subcommand it drives.
const SHIPPED: [(&str, &str); 8] = [
    ("simulate.toml", "simulate"),
    ("inner.toml", "inner"),
    ("inner_lemma.toml", "inner"),
    ("melnikov_grid.toml", "melnikov-grid"),
    ("scattering_sweep.toml", "scattering-sweep"),
    ("diffuse.toml", "diffuse"),
    ("stdmap.toml", "stdmap"),
    ("basin.toml", "basin"),
];

fn run(command: &str, config: &Path, out: &Path) -> Output {
    Command::new(BIN)
        .arg(command)
        .arg(config)
        .env("ROTPEND_OUTPUT_DIR", out)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("experiment.toml");
    fs::write(&path, text).unwrap();
    path
}

const MODEL: &str = r#"
output_dir = "unused"
[model]
eps = 1e-3
rho_bar = 0.06
omega_star = 1.265
a00 = 0.0
a10 = 1.0
a01 = 1.0
"#;

/// Artifacts of a run; the echoed config differs only by output directory.
fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_name() != "config.resolved")
        .map(|e| {
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

#[test]
fn every_shipped_config_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    for (file, command) in SHIPPED {
        let out = tmp.path().join(file);
        let res = run(command, &configs_dir().join(file), &out);
        assert!(res.status.success(), "{file}: {}", String::from_utf8_lossy(&res.stderr));
        assert!(out.join("config.resolved").exists(), "{file}");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    for (file, command) in [
        ("scattering_sweep.toml", "scattering-sweep"),
        ("inner_lemma.toml", "inner"),
    ] {
        let (a, b) = (
            tmp.path().join(format!("{file}.a")),
            tmp.path().join(format!("{file}.b")),
        );
        assert!(run(command, &configs_dir().join(file), &a).status.success());
        assert!(run(command, &configs_dir().join(file), &b).status.success());
        assert_eq!(files(&a), files(&b), "{file}");
    }
}

#[test]
fn unknown_key_is_a_config_error_naming_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &MODEL.replace("a01 = 1.0", "a01 = 1.0\nmystery = 2"));
    let res = run("simulate", &cfg, &tmp.path().join("out"));
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("mystery"));
}

#[test]
fn missing_block_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), MODEL);
    let res = run("diffuse", &cfg, &tmp.path().join("out"));
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("diffuse"));
}

#[test]
fn numerical_failure_has_its_own_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{MODEL}\n[diffuse]\nrho_bar_fraction = 10.0\n"));
    let res = run("diffuse", &cfg, &tmp.path().join("out"));
    assert_eq!(res.status.code(), Some(3), "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn unreadable_config_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let res = run("simulate", &tmp.path().join("absent.toml"), &tmp.path().join("out"));
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn melnikov_grid_header_and_diffuse_report() {
    let tmp = tempfile::tempdir().unwrap();
    let grid = tmp.path().join("grid");
    assert!(run("melnikov-grid", &configs_dir().join("melnikov_grid.toml"), &grid)
        .status
        .success());
    let csv = fs::read_to_string(grid.join("melnikov_grid.csv")).unwrap();
    assert_eq!(
        csv.lines().next(),
        Some("I,theta_bar,L_star,dL_dI,dL_dtheta,tau_star,nondeg")
    );
    assert_eq!(csv.lines().count(), 1 + 40 * 40);

    let diff = tmp.path().join("diffuse");
    assert!(run("diffuse", &configs_dir().join("diffuse.toml"), &diff)
        .status
        .success());
    let report = fs::read_to_string(diff.join("report.json")).unwrap();
    assert!(report.contains("\"crossed_omega_star\": true"), "{report}");
    let traj = fs::read_to_string(diff.join("orbit.csv")).unwrap();
    assert_eq!(traj.lines().next(), Some("t,p,q,I,theta,s,segment_id"));
}
