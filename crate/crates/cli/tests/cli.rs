use std::path::Path;
use std::process::{Command, Output};

fn bsa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bsa"))
        .args(args)
        .env_remove("BSA_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const FAST_SIM1: &str = "schema_version = 1\nexperiment = \"sim1-bsa\"\nstarts = 2\n";

#[test]
fn negative_mass_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.toml",
        "schema_version = 1\nexperiment = \"sim1-bsa\"\n[params]\nm1 = -5.0\n",
    );
    let out = bsa(&["run", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("m1"), "{err}");
    assert!(!dir.path().join("o").join("summary.json").exists());
}

#[test]
fn unknown_key_and_bad_version_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(
        dir.path(),
        "a.toml",
        "schema_version = 1\nexperiment = \"sim1-bsa\"\nmass = 3\n",
    );
    assert_eq!(bsa(&["run", "--config", &a]).status.code(), Some(2));
    let b = write(dir.path(), "b.toml", "schema_version = 9\nexperiment = \"sim1-bsa\"\n");
    assert_eq!(bsa(&["run", "--config", &b]).status.code(), Some(2));
    assert_eq!(
        bsa(&["run", "--config", dir.path().join("missing.toml").to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn unknown_solver_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", FAST_SIM1);
    let out = bsa(&[
        "run",
        "--config",
        &cfg,
        "--solver",
        "snopt",
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exhausted_iterations_exit_with_solver_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        &format!("{FAST_SIM1}[solver_options]\nmax_iter = 2\n"),
    );
    let o = dir.path().join("o");
    let out = bsa(&["run", "--config", &cfg, "--out", o.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(o.join("summary.json").exists() || o.join("error.txt").exists());
}

fn summary_without_clock(dir: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join("summary.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v.as_object_mut().unwrap().remove("wall_clock_s");
    v
}

#[test]
fn run_writes_artifacts_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "schema_version = 1\nexperiment = \"sim1-bsa\"\n");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for o in [&a, &b] {
        let out = bsa(&["run", "--config", &cfg, "--out", o.to_str().unwrap(), "--threads", "1"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in [
        "summary.json",
        "solution.json",
        "trajectory.csv",
        "power.csv",
        "collocation.csv",
        "keyframes.csv",
        "energy.svg",
        "power.svg",
        "velocity.svg",
        "sketch.svg",
    ] {
        assert!(a.join(f).is_file(), "missing {f}");
    }
    assert_eq!(summary_without_clock(&a), summary_without_clock(&b));
    assert_eq!(
        std::fs::read(a.join("trajectory.csv")).unwrap(),
        std::fs::read(b.join("trajectory.csv")).unwrap()
    );

    let traj = std::fs::read_to_string(a.join("trajectory.csv")).unwrap();
    let header: Vec<&str> = traj.lines().next().unwrap().split(',').collect();
    for col in [
        "t",
        "mode",
        "q1",
        "q2",
        "v_tcp",
        "E_kin",
        "E_pot",
        "E_spring_1",
        "E_spring_2",
    ] {
        assert!(header.contains(&col), "trajectory.csv lacks {col}");
    }
    let power = std::fs::read_to_string(a.join("power.csv")).unwrap();
    assert_eq!(
        power.lines().next().unwrap(),
        "t,P_out_1,P_out_2,Es_dot_1,Es_dot_2,P_in_1,P_in_2"
    );
    let rows = traj.lines().skip(1).filter(|l| !l.is_empty()).count();
    assert!(rows > 100);
    assert!(traj.lines().skip(1).all(|l| l.split(',').count() == header.len()));

    let v = summary_without_clock(&a);
    assert_eq!(v["status"], "optimal");
    assert!(v["final_v_tcp"].as_f64().unwrap() > 2.7);
    assert_eq!(v["config_hash"].as_str().unwrap().len(), 64);

    let show = bsa(&["show", a.to_str().unwrap()]);
    assert!(show.status.success());
    let text = String::from_utf8_lossy(&show.stdout);
    assert!(text.contains("sim1-bsa") && text.contains("Optimal"), "{text}");
}

#[test]
fn show_rejects_missing_and_malformed_summaries() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(bsa(&["show", dir.path().to_str().unwrap()]).status.code(), Some(1));
    write(dir.path(), "summary.json", "{\"experiment\": 3}");
    assert_eq!(bsa(&["show", dir.path().to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn verify_passes() {
    let out = bsa(&["verify"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{text}");
    assert!(text.lines().count() >= 8);
    assert!(text.lines().all(|l| l.starts_with("PASS")), "{text}");
}

#[test]
fn singleton_sweep_matches_a_single_run() {
    let dir = tempfile::tempdir().unwrap();
    let sweep_cfg = write(
        dir.path(),
        "sweep.toml",
        "schema_version = 1\nexperiment = \"sweep\"\n[ocp]\nhorizons = [0.2]\n",
    );
    let run_cfg = write(
        dir.path(),
        "run.toml",
        "schema_version = 1\nexperiment = \"sim2-bsa\"\nhorizon = 0.2\n",
    );
    let (s, r) = (dir.path().join("s"), dir.path().join("r"));
    let out = bsa(&["sweep", "--config", &sweep_cfg, "--out", s.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = bsa(&["run", "--config", &run_cfg, "--out", r.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let sub = s.join("tf_0.200");
    assert_eq!(
        std::fs::read(sub.join("solution.json")).unwrap(),
        std::fs::read(r.join("solution.json")).unwrap()
    );
    assert_eq!(
        std::fs::read(sub.join("trajectory.csv")).unwrap(),
        std::fs::read(r.join("trajectory.csv")).unwrap()
    );
    let csv = std::fs::read_to_string(s.join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t_f,t,s,E_kin,E_pot,E_spring_1,E_spring_2,v_tcp,P_in_1,P_in_2"
    );
    assert!(lines.all(|l| l.starts_with("0.200,") && l.split(',').count() == 10));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(s.join("summary.json")).unwrap()).unwrap();
    assert_eq!(v["runs"].as_array().unwrap().len(), 1);
    assert!(bsa(&["show", s.to_str().unwrap()]).status.success());
}
