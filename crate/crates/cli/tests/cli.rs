use std::path::Path;
use std::process::{Command, Output};

fn kyorbit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kyorbit"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env("KYORBIT_THREADS", "2")
        .output()
        .expect("spawn kyorbit")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn linear_period_map_is_constant_with_warning() {
    let dir = tempfile::tempdir().unwrap();
    let out =
        kyorbit(dir.path(), &["periodmap", "--builtin", "linear", "--param", "alpha=-1", "--amax", "4", "--m", "16"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stderr(&out).contains("warning"));
    let csv = std::fs::read_to_string(dir.path().join("periodmap.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("a,T,dT,classification"));
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 17);
    for row in rows {
        let cols: Vec<_> = row.split(',').collect();
        let t: f64 = cols[1].parse().unwrap();
        assert!((t - 2.0 * std::f64::consts::PI).abs() < 1e-9, "{row}");
        assert_eq!(cols[3], "locally_constant");
    }
}

#[test]
fn soft_spring_has_one_stable_orbit() {
    let dir = tempfile::tempdir().unwrap();
    let out = kyorbit(dir.path(), &["orbits", "--builtin", "tanh_soft", "--param", "alpha=-2", "--resolution", "64"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("orbits.json")).unwrap()).unwrap();
    let records = json.as_array().unwrap();
    assert_eq!(records.len(), 1);
    assert_eq!(records[0]["n"], 1);
    assert_eq!(records[0]["morse_index"], 0);
    assert_eq!(records[0]["feedback"], "negative");
    assert!((records[0]["period"].as_f64().unwrap() - 4.0).abs() < 1e-8);
    let csv = std::fs::read_to_string(dir.path().join("orbit_n1_1.csv")).unwrap();
    assert!(csv.starts_with("t,x\n"));
    assert_eq!(csv.lines().count(), 1 + 65);
}

#[test]
fn asymmetric_expression_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = kyorbit(dir.path(), &["orbits", "--expr", "xi+eta"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("[nonlinearity]"), "{}", stderr(&out));
    assert!(stderr(&out).contains("symmetry"));
}

#[test]
fn degenerate_linear_map_refuses_orbits() {
    let dir = tempfile::tempdir().unwrap();
    let out = kyorbit(dir.path(), &["orbits", "--builtin", "linear", "--param", "alpha=-1.5707963267948966"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("locally constant"), "{}", stderr(&out));
}

#[test]
fn bad_grid_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = kyorbit(dir.path(), &["periodmap", "--builtin", "tanh_soft", "--param", "alpha=-2", "--m", "4"]);
    assert_eq!(out.status.code(), Some(3));
    let out = kyorbit(dir.path(), &["nonsense"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn outputs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["orbits", "--builtin", "cubic_hard", "--param", "alpha=1", "--nmax", "2", "--resolution", "128"];
    for dir in [&a, &b] {
        let out = kyorbit(dir.path(), &args);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        let out = kyorbit(dir.path(), &["periodmap", "--builtin", "cubic_hard", "--param", "alpha=1", "--svg"]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    }
    for name in ["orbits.json", "orbit_n1_1.csv", "orbit_n2_1.csv", "periodmap.csv", "periodmap.svg"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name} differs between runs");
    }
}

#[test]
fn verify_passes_for_hard_spring() {
    let dir = tempfile::tempdir().unwrap();
    let out = kyorbit(dir.path(), &["verify", "--builtin", "cubic_hard", "--param", "alpha=1", "--nmax", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.matches("PASS").count(), 2);
    assert!(dir.path().join("verify.json").exists());
}

#[test]
fn simulation_settles_on_the_soft_orbit() {
    let dir = tempfile::tempdir().unwrap();
    let out = kyorbit(dir.path(), &["simulate", "--builtin", "tanh_soft", "--param", "alpha=-2", "--tmax", "60"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let stdout = String::from_utf8_lossy(&out.stdout);
    let amp: f64 =
        stdout.lines().find_map(|l| l.strip_prefix("trailing amplitude (20 time units): ")).unwrap().parse().unwrap();
    assert!((amp - 1.1053331).abs() < 1e-4, "{amp}");
}

#[test]
fn config_file_drives_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "[nonlinearity]\nbuiltin = \"tanh_soft\"\n[nonlinearity.params]\nalpha = -2.0\n[grid]\na_max = 6.0\nm = 24\n[output]\nformats = [\"json\"]\n",
    )
    .unwrap();
    let out = kyorbit(dir.path(), &["orbits", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(dir.path().join("orbits.json").exists());
    assert!(!dir.path().join("orbit_n1_1.csv").exists());
}
