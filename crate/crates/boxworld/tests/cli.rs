//! End-to-end checks of the command-line interface: exit codes, canonical
//! JSON output and stdin/stdout pipelines.

use std::io::Write;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn boxworld(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_boxworld"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn boxworld_with_stdin(args: &[&str], stdin: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_boxworld"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary spawns");
    child
        .stdin
        .as_mut()
        .expect("stdin piped")
        .write_all(stdin.as_bytes())
        .expect("stdin writes");
    child.wait_with_output().expect("binary runs")
}

fn stdout_json(output: &Output) -> Value {
    serde_json::from_slice(&output.stdout).expect("stdout is JSON")
}

fn write_temp(dir: &tempfile::TempDir, name: &str, content: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, content).expect("temp file writes");
    path.to_string_lossy().into_owned()
}

#[test]
fn pr_box_fixture_pipes_into_chsh() {
    let fixture = boxworld(&["fixtures", "pr-box"]);
    assert_eq!(fixture.status.code(), Some(0));
    let chsh = boxworld_with_stdin(&["chsh", "-"], &String::from_utf8_lossy(&fixture.stdout));
    assert_eq!(chsh.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&chsh.stdout).trim(), "\"4\"");
}

#[test]
fn pr_box_fixture_validates_and_corruption_is_flagged() {
    let fixture = boxworld(&["fixtures", "pr-box"]);
    let text = String::from_utf8_lossy(&fixture.stdout).into_owned();

    let valid = boxworld_with_stdin(&["validate-state", "-"], &text);
    assert_eq!(valid.status.code(), Some(0));
    assert_eq!(stdout_json(&valid)["valid"], Value::Bool(true));

    // Break normalisation: the first entry becomes 3/4.
    let corrupted = text.replacen("1/2", "3/4", 1);
    let invalid = boxworld_with_stdin(&["validate-state", "-"], &corrupted);
    assert_eq!(invalid.status.code(), Some(1));
    assert_eq!(stdout_json(&invalid)["valid"], Value::Bool(false));

    // Malformed JSON is a usage error, not a negative verdict.
    let garbled = boxworld_with_stdin(&["validate-state", "-"], "{not json");
    assert_eq!(garbled.status.code(), Some(2));
}

#[test]
fn counterexample_fixture_is_valid_but_lp_infeasible() {
    let fixture = boxworld(&["fixtures", "counterexample"]);
    let text = String::from_utf8_lossy(&fixture.stdout).into_owned();

    let valid = boxworld_with_stdin(&["validate-measurement", "-"], &text);
    assert_eq!(valid.status.code(), Some(0));

    let lp = boxworld_with_stdin(&["decompose", "-", "--method", "lp"], &text);
    assert_eq!(lp.status.code(), Some(1));
    let report = stdout_json(&lp);
    assert_eq!(report["infeasible"], Value::Bool(true));
    // Functional entries plus the offset.
    assert_eq!(report["certificate"].as_array().unwrap().len(), 65);

    let greedy = boxworld_with_stdin(&["decompose", "-", "--method", "greedy"], &text);
    assert_eq!(greedy.status.code(), Some(2)); // three subsystems: guard error
}

#[test]
fn greedy_decomposes_a_basic_measurement_file() {
    // The two-outcome wiring measurement: subsystem 0 at fiducial 0, then
    // subsystem 1 at the observed outcome, announcing the second outcome.
    let dir = tempfile::tempdir().unwrap();
    let measurement = serde_json::json!({
        "signature": [[2, 2], [2, 2]],
        "effects": [
            ["1","0","0","0", "0","0","1","0", "0","0","0","0", "0","0","0","0"],
            ["0","1","0","0", "0","0","0","1", "0","0","0","0", "0","0","0","0"],
        ],
    });
    let path = write_temp(&dir, "basic.json", &measurement.to_string());

    let out = boxworld(&["decompose", &path, "--method", "greedy"]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    assert_eq!(report["weights"], serde_json::json!(["1"]));
    assert_eq!(report["arrays"].as_array().unwrap().len(), 1);

    let lp = boxworld(&["decompose", &path, "--method", "lp"]);
    assert_eq!(lp.status.code(), Some(0));
}

#[test]
fn vertices_command_reports_24_and_16() {
    let nosig = boxworld(&["vertices", "--signature", "[[2,2],[2,2]]"]);
    assert_eq!(nosig.status.code(), Some(0));
    let v = stdout_json(&nosig);
    assert_eq!(v["vertices"].as_array().unwrap().len(), 24);
    let classes = v["classes"].as_array().unwrap();
    let nonlocal = classes.iter().filter(|c| *c == "nonlocal").count();
    assert_eq!(nonlocal, 8);

    let local = boxworld(&["vertices", "--signature", "[[2,2],[2,2]]", "--local"]);
    let v = stdout_json(&local);
    assert_eq!(v["vertices"].as_array().unwrap().len(), 16);
}

#[test]
fn is_local_flags_the_pr_box_with_a_certificate() {
    let fixture = boxworld(&["fixtures", "pr-box"]);
    let text = String::from_utf8_lossy(&fixture.stdout).into_owned();
    let out = boxworld_with_stdin(&["is-local", "-"], &text);
    assert_eq!(out.status.code(), Some(1));
    let v = stdout_json(&out);
    assert_eq!(v["local"], Value::Bool(false));
    assert!(v["certificate"]["functional"].as_array().unwrap().len() == 16);
}

#[test]
fn collapse_conditions_the_pr_box() {
    let fixture = boxworld(&["fixtures", "pr-box"]);
    let text = String::from_utf8_lossy(&fixture.stdout).into_owned();
    let out = boxworld_with_stdin(
        &[
            "collapse",
            "-",
            "--subsystems",
            "1",
            "--settings",
            "1",
            "--outcomes",
            "0",
        ],
        &text,
    );
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    // Deterministic a = x on the remaining subsystem.
    assert_eq!(v["entries"], serde_json::json!(["1", "0", "0", "1"]));
}

#[test]
fn simulate_is_reproducible_and_reports_exact_expectations() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = boxworld(&["fixtures", "counterexample"]);
    let measurement = write_temp(&dir, "m.json", &String::from_utf8_lossy(&fixture.stdout));
    // Maximally mixed tripartite state.
    let state = write_temp(
        &dir,
        "p.json",
        &serde_json::json!({
            "signature": [[2,2],[2,2],[2,2]],
            "entries": vec!["1/8"; 64],
        })
        .to_string(),
    );
    let args = [
        "simulate",
        "--state",
        &state,
        "--measurement",
        &measurement,
        "--samples",
        "2000",
        "--seed",
        "7",
    ];
    let first = boxworld(&args);
    assert_eq!(first.status.code(), Some(0));
    let second = boxworld(&args);
    assert_eq!(first.stdout, second.stdout, "same seed, same bytes");
    let v = stdout_json(&first);
    assert_eq!(v["expected_success_rate"], "1/8");
    assert_eq!(v["expected"].as_array().unwrap().len(), 8);
}

#[test]
fn swap_reports_separability_for_pr_pair() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = boxworld(&["fixtures", "pr-box"]);
    let pr = write_temp(&dir, "pr.json", &String::from_utf8_lossy(&fixture.stdout));
    // Bob: both fiducials 0, outcomes announced jointly.
    let bob = serde_json::json!({
        "signature": [[2, 2], [2, 2]],
        "effects": [
            ["1","0","0","0", "0","0","0","0", "0","0","0","0", "0","0","0","0"],
            ["0","1","0","0", "0","0","0","0", "0","0","0","0", "0","0","0","0"],
            ["0","0","1","0", "0","0","0","0", "0","0","0","0", "0","0","0","0"],
            ["0","0","0","1", "0","0","0","0", "0","0","0","0", "0","0","0","0"],
        ],
    });
    let bob = write_temp(&dir, "bob.json", &bob.to_string());

    let out = boxworld(&["swap", "--ab", &pr, "--bc", &pr, "--bob", &bob]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["all_separable"], Value::Bool(true));
    assert_eq!(v["outcomes"].as_array().unwrap().len(), 4);
}

#[test]
fn validate_transformation_checks_the_identity_and_sign_flips() {
    let dir = tempfile::tempdir().unwrap();
    let identity = serde_json::json!({
        "input_signature": [[2, 2]],
        "output_signature": [[2, 2]],
        "entries": [
            "1","0","0","0",
            "0","1","0","0",
            "0","0","1","0",
            "0","0","0","1",
        ],
    });
    let path = write_temp(&dir, "id.json", &identity.to_string());
    let ok = boxworld(&["validate-transformation", &path, "--signature", "[[2,2]]"]);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(stdout_json(&ok)["valid"], Value::Bool(true));

    let flipped = serde_json::json!({
        "input_signature": [[2, 2]],
        "output_signature": [[2, 2]],
        "entries": [
            "-1","0","0","0",
            "0","1","0","0",
            "0","0","1","0",
            "0","0","0","1",
        ],
    });
    let path = write_temp(&dir, "flip.json", &flipped.to_string());
    let bad = boxworld(&["validate-transformation", &path]);
    assert_eq!(bad.status.code(), Some(1));
    assert_eq!(stdout_json(&bad)["valid"], Value::Bool(false));

    let mismatched = boxworld(&["validate-transformation", &path, "--signature", "[[3,3]]"]);
    assert_eq!(mismatched.status.code(), Some(2));
}

#[test]
fn guard_errors_exit_2() {
    // Vertex enumeration over a deliberately huge signature trips the
    // desk-scale guard.
    let out = boxworld(&[
        "vertices",
        "--signature",
        "[[2,2],[2,2],[2,2],[2,2],[2,2],[2,2]]",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let v = stdout_json(&out);
    assert!(v["error"].as_str().unwrap().contains("guard"));
}

#[test]
fn usage_errors_exit_2() {
    let out = boxworld(&["decompose"]);
    assert_eq!(out.status.code(), Some(2));
    let out = boxworld(&["no-such-verb"]);
    assert_eq!(out.status.code(), Some(2));
}
