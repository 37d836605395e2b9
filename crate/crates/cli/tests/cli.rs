use std::path::PathBuf;
use std::process::{Command, Output};

fn corpus(case: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/corpus")
        .join(case)
        .join("program.rlp")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_digestrace"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn running_example_is_race_free_with_lockset_and_flags() {
    let p = corpus("prog1");
    let o = run(&["analyze", p.to_str().unwrap(), "--digests", "lockset,threadflag"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("no races"));
}

#[test]
fn unsynchronized_program_exits_one() {
    let p = corpus("unsync");
    let o = run(&["analyze", p.to_str().unwrap(), "--digests", "lockset,tid"]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("race on g: line 6 (W, main) and line 9 (W, t1)"), "{out}");
    assert!(out.contains("1 race(s) flagged"));
}

#[test]
fn json_report_is_versioned() {
    let p = corpus("unsync");
    let o = run(&["analyze", p.to_str().unwrap(), "--format", "json", "--predicate", "generic"]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["version"], 1);
    assert_eq!(v["modes"][0], "generic");
    assert_eq!(v["digests"].as_array().unwrap().len(), 5);
}

#[test]
fn solution_dump_lists_access_records() {
    let p = corpus("prog1");
    let o = run(&["analyze", p.to_str().unwrap(), "--digests", "lockset", "--dump-solution"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let digests: Vec<&str> = v["accesses"]["g"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["digest"].as_str().unwrap())
        .collect();
    assert_eq!(digests, ["<{}>", "<{m0}>", "<{m0}>"]);
}

#[test]
fn oracle_confirms_and_refutes() {
    let o = run(&["oracle", corpus("unsync").to_str().unwrap(), "--compatible"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("compatible on g: line 6 and line 9"));
    let o = run(&["oracle", corpus("prog1").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn truncated_oracle_without_races_is_an_error() {
    let o = run(&["oracle", corpus("prog1").to_str().unwrap(), "--depth", "3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bounds"));
}

#[test]
fn ablation_table_has_a_row_per_subset() {
    let o = run(&["ablate", corpus("prog1").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 33);
}

#[test]
fn conformance_suite_passes_on_the_corpus() {
    let dir = corpus("prog1");
    let dir = dir.parent().unwrap().parent().unwrap();
    let o = run(&["conform", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("all suites passed"));
}

#[test]
fn print_lowered_shows_atomicity_mutex() {
    let o = run(&["print", corpus("unsync").to_str().unwrap(), "--lowered"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("init m_g"));
}

#[test]
fn errors_exit_two() {
    let p = corpus("prog1");
    let p = p.to_str().unwrap();
    assert_eq!(run(&["analyze", "/nonexistent.rlp"]).status.code(), Some(2));
    assert_eq!(run(&["analyze", p, "--digests", "nope"]).status.code(), Some(2));
    assert_eq!(run(&["analyze", p, "--digests", "join"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));

    let bad = std::env::temp_dir().join(format!("digestrace-bad-{}.rlp", std::process::id()));
    std::fs::write(&bad, "main:\n  lock nowhere\n").unwrap();
    let o = run(&["analyze", bad.to_str().unwrap()]);
    std::fs::remove_file(&bad).ok();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nowhere"));
}

#[test]
fn divergence_cap_is_reported() {
    let p = corpus("join_chain");
    let o = run(&["analyze", p.to_str().unwrap(), "--cap", "3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("exceeded 3"));
}
