use std::collections::BTreeSet;
use std::path::PathBuf;

use digestrace_core::oracle::{
    compatible_pairs, enumerate_traces, find_racy_pairs, Bounds, Exploration, Semantics,
};
use digestrace_core::program::{parse_program, Program};

fn lowered_src(src: &str) -> Program {
    parse_program(src).unwrap().lower().unwrap()
}

fn lowered(case: &str) -> Program {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus").join(case).join("program.rlp");
    lowered_src(&std::fs::read_to_string(path).unwrap())
}

fn explore(p: &Program) -> Exploration {
    enumerate_traces(&Semantics::new(p), Bounds::default())
}

fn racy_lines(p: &Program) -> BTreeSet<(u32, u32)> {
    let sem = Semantics::new(p);
    let ex = enumerate_traces(&sem, Bounds::default());
    find_racy_pairs(&sem, &ex.traces).iter().map(|r| r.pair.lines()).collect()
}

#[test]
fn single_thread_traces_are_prefixes() {
    // init m_g, lock m_g, write, unlock m_g, exit: six prefixes.
    let p = lowered_src("global g\nmain:\n  g = 1\n");
    let ex = explore(&p);
    assert_eq!(ex.traces.len(), 6);
    assert!(!ex.truncated);
    assert_eq!(ex.rejected, 0);
}

#[test]
fn corpus_trace_counts() {
    for (case, traces, states) in [
        ("prog1", 32, 43),
        ("unsync", 20, 27),
        ("once_fig", 55, 94),
        ("two_children", 23, 57),
        ("exit_early", 21, 20),
    ] {
        let ex = explore(&lowered(case));
        assert_eq!((ex.traces.len(), ex.states), (traces, states), "{case}");
        assert_eq!(ex.rejected, 0, "{case}");
    }
}

#[test]
fn every_enumerated_trace_is_well_formed() {
    for case in ["prog1", "once_fig", "join_chain", "create_loop"] {
        let p = lowered(case);
        let sem = Semantics::new(&p);
        for t in enumerate_traces(&sem, Bounds::default()).traces {
            sem.check_trace(&t).unwrap_or_else(|e| panic!("{case}: {e}"));
        }
    }
}

#[test]
fn races_on_small_programs() {
    assert_eq!(racy_lines(&lowered("unsync")), BTreeSet::from([(6, 9)]));
    assert!(racy_lines(&lowered("prog1")).is_empty());
    assert!(racy_lines(&lowered("read_read")).is_empty());
    assert!(racy_lines(&lowered("once_fig")).is_empty());
    assert_eq!(racy_lines(&lowered("two_children")), BTreeSet::from([(8, 11)]));
}

#[test]
fn unsync_has_one_compatible_pair() {
    let p = lowered("unsync");
    let sem = Semantics::new(&p);
    let ex = enumerate_traces(&sem, Bounds::default());
    let pairs: Vec<(u32, u32)> = compatible_pairs(&sem, &ex.traces).iter().map(|c| c.pair.lines()).collect();
    assert_eq!(pairs, [(6, 9)]);
}

#[test]
fn tight_bounds_truncate() {
    let p = lowered("prog1");
    let ex = enumerate_traces(&Semantics::new(&p), Bounds { depth: 3, width: 4 });
    assert!(ex.truncated);
    let ex = enumerate_traces(&Semantics::new(&p), Bounds { depth: 40, width: 1 });
    assert!(ex.truncated);
}

#[test]
fn enumeration_is_deterministic() {
    let p = lowered("join_after_loop");
    let a = explore(&p);
    let b = explore(&p);
    assert_eq!(a.traces, b.traces);
    assert_eq!(a.states, b.states);
}
