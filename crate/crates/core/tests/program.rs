use std::path::PathBuf;

use digestrace_core::program::{
    access_sites, parse_program, print_program, program_to_dot, AccessKind, Action, Program,
};
use digestrace_core::ProgramError;

fn corpus() -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus");
    let mut out: Vec<(String, String)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            let src = std::fs::read_to_string(e.path().join("program.rlp")).unwrap();
            (e.file_name().into_string().unwrap(), src)
        })
        .collect();
    out.sort();
    out
}

fn parse(src: &str) -> Program {
    parse_program(src).unwrap()
}

#[test]
fn corpus_round_trips_through_the_printer() {
    for (name, src) in corpus() {
        let p = parse(&src);
        let printed = print_program(&p);
        let again = parse_program(&printed).unwrap_or_else(|e| panic!("{name}: {e}\n{printed}"));
        assert_eq!(again, p, "{name}");
        assert_eq!(print_program(&again), printed, "{name}");
    }
}

#[test]
fn lowering_brackets_every_access() {
    for (name, src) in corpus() {
        let p = parse(&src);
        let low = p.lower().unwrap();
        assert!(low.instrumented);
        assert_eq!(access_sites(&low).len(), access_sites(&p).len(), "{name}");
        for proto in &low.prototypes {
            for e in &proto.edges {
                let Some((g, _)) = e.action.access() else { continue };
                let m_g = low.atomicity_mutex(g);
                assert!(
                    proto.edges.iter().any(|x| x.target == e.source && x.action == Action::Lock(m_g)),
                    "{name}: access at {} not locked",
                    e.source
                );
                assert!(
                    proto.edges.iter().any(|x| x.source == e.target && x.action == Action::Unlock(m_g)),
                    "{name}: access at {} not unlocked",
                    e.source
                );
            }
        }
    }
}

#[test]
fn lowering_initializes_in_main_and_exits_at_sinks() {
    let src = "global g, h\nonce o\nmain:\n  create t\n  g = 1\nt:\n  h = 2\n";
    let low = parse(src).lower().unwrap();
    let main = low.main_prototype();
    let prologue: Vec<String> = main.edges.iter().take(3).map(|e| low.render_action(&e.action)).collect();
    assert_eq!(prologue, ["init m_g", "init m_h", "inito o"]);
    for proto in &low.prototypes {
        let exits = proto.edges.iter().filter(|e| e.action == Action::ThreadExit).count();
        assert_eq!(exits, 1, "{}", proto.label);
    }
    assert_eq!(low.lower().unwrap_err(), ProgramError::AlreadyInstrumented);
}

#[test]
fn access_sites_carry_lines_and_kinds() {
    let p = parse("global g\nmain:\n  x = g\n  g = x\n");
    let sites: Vec<(u32, AccessKind)> = access_sites(&p).iter().map(|s| (s.line, s.kind)).collect();
    assert_eq!(sites, [(3, AccessKind::Read), (4, AccessKind::Write)]);
}

#[test]
fn syntax_errors_are_located() {
    let err = parse_program("global g\nmain:\n  g = = 1\n").unwrap_err();
    assert!(matches!(err, ProgramError::Syntax { line: 3, .. }), "{err}");
    assert!(err.to_string().starts_with("3:"));
}

#[test]
fn validation_errors() {
    for (src, line) in [
        ("main:\n  lock nowhere\n", 2),
        ("global g\nmain:\n  create nobody\n", 3),
        ("mutex m_x\nmain:\n  skip\n", 1),
        ("t:\n  skip\n", 0),
    ] {
        match parse_program(src) {
            Err(ProgramError::Validation { line: l, .. }) | Err(ProgramError::Syntax { line: l, .. }) => {
                assert_eq!(l, line, "{src}")
            }
            other => panic!("{src}: {other:?}"),
        }
    }
}

#[test]
fn dot_output_has_a_cluster_per_thread() {
    let p = parse("global g\nmain:\n  create t\nt:\n  g = 1\n");
    let dot = program_to_dot(&p);
    assert!(dot.starts_with("digraph program {"));
    assert_eq!(dot.matches("subgraph cluster_").count(), 2);
    assert!(dot.contains("label=\"g = 1\""));
}
