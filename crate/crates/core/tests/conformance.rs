use std::path::{Path, PathBuf};

use digestrace_core::conformance::{
    load_corpus, prepare, prepare_all, run_full_suite, run_mutation_suite, subset_names,
    valid_subsets, CorpusCase, Provenance,
};
use digestrace_core::ConformanceError;

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

struct Scratch(PathBuf);

impl Scratch {
    fn new(tag: &str) -> Self {
        let dir = std::env::temp_dir().join(format!("digestrace-{tag}-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        Scratch(dir)
    }

    fn case(&self, name: &str, program: &str, expected: &str) -> PathBuf {
        let d = self.0.join(name);
        std::fs::create_dir_all(&d).unwrap();
        std::fs::write(d.join("program.rlp"), program).unwrap();
        std::fs::write(d.join("expected.json"), expected).unwrap();
        d
    }
}

impl Drop for Scratch {
    fn drop(&mut self) {
        std::fs::remove_dir_all(&self.0).ok();
    }
}

fn load(dir: &Path) -> CorpusCase {
    CorpusCase::load(dir).unwrap()
}

#[test]
fn corpus_loads_sorted_with_worked_examples() {
    let cases = load_corpus(&corpus_dir()).unwrap();
    assert!(cases.len() >= 20);
    let names: Vec<&str> = cases.iter().map(|c| c.name.as_str()).collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
    for ex in ["prog1", "unsync", "once_fig"] {
        let c = cases.iter().find(|c| c.name == ex).unwrap();
        assert_eq!(c.expected.provenance, Provenance::Example);
    }
}

#[test]
fn expectations_match_the_oracle() {
    let cases = prepare_all(load_corpus(&corpus_dir()).unwrap()).unwrap();
    for c in &cases {
        let want = c.case.expected.racy.iter().copied().collect();
        assert_eq!(c.racy_lines(), want, "{}", c.case.name);
        assert_eq!(c.compatible_lines(), want, "{}", c.case.name);
    }
}

#[test]
fn full_suite_passes() {
    let report = run_full_suite(&corpus_dir()).unwrap();
    assert!(report.passed, "{:?}", report.failures());
    assert!(report.mutants.iter().all(|m| m.killed()));
}

#[test]
fn every_mutant_is_killed_by_some_case() {
    let cases = prepare_all(load_corpus(&corpus_dir()).unwrap()).unwrap();
    let outcomes = run_mutation_suite(&cases);
    assert_eq!(outcomes.len(), 5);
    for m in outcomes {
        assert!(!m.killed_by.is_empty(), "{} survived", m.name);
    }
}

#[test]
fn tight_bounds_are_inconclusive() {
    let s = Scratch::new("bounds");
    let d = s.case(
        "tiny",
        "global g\nmain:\n  create t\n  g = 1\nt:\n  g = 2\n",
        r#"{"description": "cut short", "provenance": "derived", "racy": [[4, 6]],
            "bounds": {"depth": 3, "width": 4}}"#,
    );
    match prepare(load(&d)) {
        Err(ConformanceError::InconclusiveBounds { case, depth: 3, width: 4 }) => assert_eq!(case, "tiny"),
        other => panic!("{:?}", other.map(|_| ())),
    }
}

#[test]
fn malformed_expectations_are_rejected() {
    let s = Scratch::new("malformed");
    let d = s.case(
        "bad",
        "global g\nmain:\n  g = 1\n",
        r#"{"description": "x", "provenance": "derived", "racy": [], "extra": 1}"#,
    );
    let err = CorpusCase::load(&d).unwrap_err();
    assert!(matches!(err, ConformanceError::Expectation { ref case, .. } if case == "bad"), "{err}");
    let d = s.case("bad_program", "main:\n  lock nowhere\n", r#"{"description": "x", "provenance": "derived", "racy": []}"#);
    assert!(matches!(CorpusCase::load(&d), Err(ConformanceError::Program { .. })));
}

#[test]
fn wrong_expectation_fails_the_suite() {
    let s = Scratch::new("wrong");
    s.case(
        "claims_race",
        "global g\nmain:\n  g = 1\n",
        r#"{"description": "single thread", "provenance": "trivial", "racy": [[3, 3]]}"#,
    );
    let report = run_full_suite(&s.0).unwrap();
    assert!(!report.passed);
    assert!(report.failures().iter().any(|f| f.contains("claims_race")));
}

#[test]
fn subsets_respect_the_join_dependency() {
    let subsets = valid_subsets();
    assert_eq!(subsets.len(), 24);
    for m in subsets {
        let names = subset_names(m);
        if names.iter().any(|n| n == "join") {
            assert!(names.iter().any(|n| n == "tid"));
        }
    }
}
