mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qnpk::io::{parse_fond, parse_policy, parse_qnp_with, ParseOptions};

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name).display().to_string()
}

fn qnpk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qnpk")).args(args).env_remove("QNPK_NODE_BUDGET").output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn translate_clear_reports_two_atoms_two_actions() {
    let o = qnpk(&["translate", &fixture("clear.qnp")]);
    assert_eq!(code(&o), 0);
    assert!(stderr(&o).contains("atoms=2 actions=2"), "{}", stderr(&o));
    let fond = parse_fond(&stdout(&o)).unwrap();
    assert_eq!((fond.atoms.len(), fond.actions.len()), (2, 2));
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&qnpk(&["validate", &fixture("gripper.qnp")])), 0);
    assert_eq!(code(&qnpk(&["validate", &fixture("coin.fond")])), 0);

    let unguarded = write(dir.path(), "bad.qnp", "qnp bad\nbools\nnums X\naction a\npre\neff X--\ninit\ngoal X=0\n");
    let o = qnpk(&["validate", unguarded.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains(": a"), "{}", stderr(&o));

    let broken = write(dir.path(), "syntax.qnp", "qnp s\nbools p\nfrobnicate\n");
    let o = qnpk(&["validate", broken.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("syntax.qnp:3"), "{}", stderr(&o));

    assert_eq!(code(&qnpk(&["validate", dir.path().join("missing.qnp").to_str().unwrap()])), 2);
    assert_eq!(code(&qnpk(&["validate", &fixture("clear.pol")])), 2);
    assert_eq!(code(&qnpk(&["no-such-command"])), 2);
    assert_eq!(code(&qnpk(&["--help"])), 0);
}

#[test]
fn solve_qnp_routes() {
    let o = qnpk(&["solve-qnp", &fixture("loopbug.qnp"), "--via", "oracle"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert_eq!(code(&qnpk(&["solve-qnp", &fixture("loopbug.qnp")])), 3);

    let o = qnpk(&["solve-qnp", &fixture("clear.qnp")]);
    assert_eq!(code(&o), 0);
    let (q, reference) = qnpk::fixtures::qnp("clear");
    assert_eq!(parse_policy(&stdout(&o), &q).unwrap(), reference);

    let o = qnpk(&["solve-qnp", &fixture("nest.qnp"), "--via", "oracle"]);
    assert_eq!(code(&o), 0);
    let (q, reference) = qnpk::fixtures::qnp("nest");
    assert_eq!(parse_policy(&stdout(&o), &q).unwrap(), reference);

    let o = qnpk(&["solve-qnp", &fixture("gripper.qnp"), "--via", "oracle", "--oracle-cap", "2"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));

    let o = qnpk(&["--node-budget", "5", "solve-qnp", &fixture("gripper.qnp")]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn verify_and_sieve_trace() {
    let o = qnpk(&["verify", &fixture("nest.qnp"), &fixture("nest.pol"), "--sieve-trace"]);
    assert_eq!(code(&o), 0);
    let err = stderr(&o);
    let (x, y) = (err.find("var X").unwrap(), err.find("var Y").unwrap());
    assert!(x < y, "{err}");
    assert!(err.contains("accept"));

    let o = qnpk(&["verify", &fixture("loopbug.qnp"), &fixture("loopbug.pol")]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("non-terminating"), "{}", stderr(&o));

    let dir = tempfile::tempdir().unwrap();
    let pol = write(dir.path(), "coin.pol", "policy coin\n=> flip\n");
    assert_eq!(code(&qnpk(&["verify", &fixture("coin.fond"), pol.to_str().unwrap()])), 0);
    let idle = write(dir.path(), "idle.pol", "policy coin\n");
    assert_eq!(code(&qnpk(&["verify", &fixture("coin.fond"), idle.to_str().unwrap()])), 3);
}

#[test]
fn json_output_is_one_object() {
    let o = qnpk(&["--json", "verify", &fixture("gripper.qnp"), &fixture("gripper.pol"), "--sieve-trace", "--exhaustive"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["verdict"], "accept");
    assert_eq!(v["exit"], 0);
    assert_eq!(v["sieve_order"][0], "b");

    let o = qnpk(&["--json", "translate", &fixture("gripper.qnp")]);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["atoms"], 33);
    assert_eq!(v["stacked"], serde_json::json!(["c", "g"]));
    assert!(parse_fond(v["fond"].as_str().unwrap()).is_ok());

    let o = qnpk(&["--json", "validate", "nowhere.qnp"]);
    assert_eq!(code(&o), 2);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert!(v["error"].as_str().unwrap().contains("nowhere.qnp"));
}

#[test]
fn reduce_then_translate_generated_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("coin.qnp");
    let o = qnpk(&["reduce", &fixture("coin.fond"), "-o", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(parse_qnp_with(&text, &ParseOptions::generated()).is_ok());

    assert_eq!(code(&qnpk(&["validate", out.to_str().unwrap()])), 2);
    assert_eq!(code(&qnpk(&["--generated", "validate", out.to_str().unwrap()])), 0);
    let o = qnpk(&["--generated", "solve-qnp", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let o = qnpk(&["reduce", &fixture("coin.fond"), "--unfair", "flip:2", "--solutions", "strong"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = qnpk(&["reduce", &fixture("coin.fond"), "--unfair", "flip"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn solve_fond_modes() {
    let o = qnpk(&["solve", &fixture("coin.fond")]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("=> flip"));
    assert_eq!(code(&qnpk(&["solve", &fixture("coin.fond"), "--strong"])), 3);
}

#[test]
fn pddl_export_reimports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gripper.fond");
    let o = qnpk(&["translate", &fixture("gripper.qnp"), "--pddl", "-o", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let fond = parse_fond(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let domain = std::fs::read_to_string(dir.path().join("gripper-domain.pddl")).unwrap();
    let problem = std::fs::read_to_string(dir.path().join("gripper-problem.pddl")).unwrap();
    let back = parse_fond(&common::pddl_to_fond(&domain, &problem)).unwrap();
    assert_eq!(back, common::untagged(&fond));
}

#[test]
fn simulate_reports_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.tsv");
    let args = ["simulate", &fixture("nest.qnp"), &fixture("nest.pol"), "--runs", "20", "--seed", "9", "--trace", trace.to_str().unwrap()];
    let o = qnpk(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("goal=20"));
    let tsv = std::fs::read_to_string(&trace).unwrap();
    assert!(tsv.lines().count() >= 2);
    assert_eq!(tsv.lines().next().unwrap().split('\t').count(), tsv.lines().nth(1).unwrap().split('\t').count());

    let o = qnpk(&["simulate", &fixture("loopbug.qnp"), &fixture("loopbug.pol"), "--adversary", "zero-jump", "--runs", "3", "--max-steps", "500"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("step-cap=3"), "{}", stderr(&o));

    let o = qnpk(&["simulate", &fixture("nest.qnp"), &fixture("nest.pol"), "--epsilon", "20"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn controller_policies_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let layout = qnpk::qnp2fond::analyze_variables(&qnpk::fixtures::qnp("nest").0, &Default::default()).unwrap();
    let tr = qnpk::qnp2fond::translate(&qnpk::fixtures::qnp("nest").0, &layout).unwrap();
    let sol = qnpk::solver::solve_strong_cyclic(&tr.fond).unwrap();
    let pol = write(dir.path(), "nest-full.pol", &qnpk::io::emit_policy(&sol, &tr.fond));
    let o = qnpk(&["simulate", &fixture("nest.qnp"), pol.to_str().unwrap(), "--controller", "--runs", "10"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn outputs_are_reproducible() {
    for args in [
        vec!["translate", &*fixture("on.qnp")],
        vec!["solve-qnp", &*fixture("gripper.qnp")],
        vec!["--json", "simulate", &*fixture("gripper.qnp"), &*fixture("gripper.pol"), "--runs", "10"],
    ] {
        let (a, b) = (qnpk(&args), qnpk(&args));
        assert_eq!(a.stdout, b.stdout, "{args:?}");
        assert_eq!(a.stderr, b.stderr, "{args:?}");
    }
}
