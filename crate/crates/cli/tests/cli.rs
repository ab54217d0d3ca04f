use std::path::PathBuf;
use std::process::Command;

use twoball_cli::{run, EXIT_INVALID, EXIT_OK};

fn twoball(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_twoball"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().expect("exited"),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn in_process(args: &[&str]) -> (i32, String, String) {
    let (mut o, mut e) = (Vec::new(), Vec::new());
    let mut full = vec!["twoball"];
    full.extend_from_slice(args);
    let code = run(full, &mut o, &mut e);
    (code, String::from_utf8(o).unwrap(), String::from_utf8(e).unwrap())
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("twoball-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn ons_on_the_square_splits() {
    let (code, out, _) = twoball(&["ons", "--polygon", "square"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("Split"), "{out}");
    assert!(out.contains("K1:") && out.contains("K2:"), "{out}");
    assert!(!out.contains("-0.000000"), "{out}");
}

#[test]
fn ons_elsewhere_does_not_split() {
    for p in ["eq-triangle", "right-isoceles"] {
        let (code, out, _) = in_process(&["ons", "--polygon", p]);
        assert_eq!(code, EXIT_OK, "{p}");
        assert!(out.contains("NoSplit"), "{p}: {out}");
    }
}

#[test]
fn lift_check_reports_full_match() {
    let (code, out, err) = twoball(&["lift-check", "--polygon", "eq-triangle", "--events", "5000"]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.contains("where-lemma matches: 100%"), "{out}");
}

#[test]
fn oversized_radius_is_a_validation_error() {
    let (code, out, err) = twoball(&["simulate", "--polygon", "square", "--radius", "0.4"]);
    assert_eq!(code, EXIT_INVALID);
    assert!(out.is_empty());
    assert!(err.contains("too large"), "{err}");
}

#[test]
fn missing_polygon_and_bad_flags_exit_one() {
    assert_eq!(in_process(&["simulate"]).0, EXIT_INVALID);
    assert_eq!(in_process(&["simulate", "--polygon", "hexagon"]).0, EXIT_INVALID);
    assert_eq!(in_process(&["frobnicate"]).0, EXIT_INVALID);
    assert_eq!(in_process(&["simulate", "--polygon", "square", "--time", "-1"]).0, EXIT_INVALID);
    assert_eq!(in_process(&["lyapunov", "--polygon", "square", "--delta0", "1e-3"]).0, EXIT_INVALID);
    assert_eq!(in_process(&["--help"]).0, EXIT_OK);
}

#[test]
fn config_file_is_read_and_flags_win() {
    let cfg = scratch("run.cfg");
    std::fs::write(&cfg, "# square run\npolygon = square\nradius = 0.4\nevents = 5\n").unwrap();
    let path = cfg.to_str().unwrap();
    let (code, _, err) = in_process(&["simulate", "--config", path]);
    assert_eq!(code, EXIT_INVALID, "file radius 0.4 applies: {err}");
    let (code, out, err) = in_process(&["simulate", "--config", path, "--radius", "0.1"]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert_eq!(out.lines().count(), 1 + 5, "header plus the file's event budget");
}

#[test]
fn unknown_config_key_names_line_and_suggestion() {
    let cfg = scratch("typo.cfg");
    std::fs::write(&cfg, "polygon = square\nradus = 0.1\n").unwrap();
    let (code, _, err) = in_process(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, EXIT_INVALID);
    assert!(err.contains(":2:") && err.contains("did you mean 'radius'"), "{err}");
}

#[test]
fn simulate_csv_is_byte_identical_across_runs() {
    let (a, b) = (scratch("a.csv"), scratch("b.csv"));
    for p in [&a, &b] {
        let (code, _, err) = twoball(&[
            "simulate", "--polygon", "right-isoceles", "--seed", "7", "--events", "2000", "--out",
            p.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_OK, "{err}");
    }
    let (x, y) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(x.len() > 1000);
    assert_eq!(x, y);
}

#[test]
fn simulate_time_budget_and_json() {
    let (code, out, _) = in_process(&["simulate", "--polygon", "square", "--time", "2.5", "--format", "json"]);
    assert_eq!(code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let events = v["events"].as_array().unwrap();
    assert!(!events.is_empty());
    let last_t = events.last().unwrap()["state"]["t"].as_f64().unwrap();
    assert!(last_t <= 2.5);
}

#[test]
fn sequence_and_suff_run() {
    let (code, out, _) = in_process(&["sequence", "--polygon", "square", "--events", "200"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("long: ") && out.contains("short: "), "{out}");
    let rows = scratch("suff.csv");
    let (code, out, err) = in_process(&[
        "suff", "--polygon", "eq-triangle", "--segments", "40", "--out", rows.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK, "{out}{err}");
    assert!(std::fs::read_to_string(&rows).unwrap().lines().count() > 40);
}

#[test]
fn lyapunov_and_ergodicity_run() {
    let (code, out, _) = in_process(&["lyapunov", "--polygon", "square", "--events", "5000"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("one-ball control"), "{out}");
    let csv = scratch("erg.csv");
    let (code, out, err) = in_process(&[
        "ergodicity", "--polygon", "square", "--events", "5000", "--seeds", "5", "--out", csv.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.contains("TV trend"), "{out}");
    assert!(scratch("erg_running.csv").exists());
    assert_eq!(in_process(&["ergodicity", "--polygon", "square", "--seeds", "1"]).0, EXIT_INVALID);
}
