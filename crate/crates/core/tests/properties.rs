//! Randomized checks over small generated programs, with the trace
//! enumeration as ground truth.

use std::path::PathBuf;

use proptest::prelude::*;

use digestrace_core::conformance::{
    agreement_misses, prepare, run_equivalence_suite, run_law_suite, run_soundness_suite,
    shipped_digests, CorpusCase, Expectation, PreparedCase, Provenance,
};
use digestrace_core::detector::{ablate, analyze_program, AnalysisConfig};
use digestrace_core::digest::PredicateMode;
use digestrace_core::digests::DIGEST_NAMES;
use digestrace_core::program::{parse_program, print_program};
use digestrace_core::ConformanceError;

#[derive(Debug, Clone)]
enum Stmt {
    Write(&'static str),
    Read(&'static str),
    Skip,
    Locked(&'static str, Vec<Stmt>),
    Once(Vec<Stmt>),
}

#[derive(Debug, Clone)]
struct Gen {
    main: Vec<Stmt>,
    threads: Vec<Vec<Stmt>>,
    /// Position of each create in main, and whether a join follows it.
    creates: Vec<(usize, Option<usize>)>,
    init_mutexes: bool,
}

fn stmt() -> impl Strategy<Value = Stmt> {
    let leaf = prop_oneof![
        4 => prop_oneof![Just("g"), Just("h")].prop_map(Stmt::Write),
        2 => prop_oneof![Just("g"), Just("h")].prop_map(Stmt::Read),
        1 => Just(Stmt::Skip),
    ];
    leaf.prop_recursive(2, 6, 3, |inner| {
        prop_oneof![
            (prop_oneof![Just("a"), Just("b")], prop::collection::vec(inner.clone(), 1..3))
                .prop_map(|(m, body)| Stmt::Locked(m, body)),
            prop::collection::vec(inner, 1..3).prop_map(Stmt::Once),
        ]
    })
}

fn body() -> impl Strategy<Value = Vec<Stmt>> {
    prop::collection::vec(stmt(), 1..4)
}

fn program() -> impl Strategy<Value = Gen> {
    (body(), prop::collection::vec(body(), 1..3), prop::bool::weighted(0.8))
        .prop_flat_map(|(main, threads, init_mutexes)| {
            let n = main.len();
            let creates = prop::collection::vec(
                (0..=n).prop_flat_map(move |at| (Just(at), prop::option::of(at..=n))),
                threads.len(),
            );
            (Just(main), Just(threads), creates, Just(init_mutexes))
        })
        .prop_map(|(main, threads, creates, init_mutexes)| Gen {
            main,
            threads,
            creates,
            init_mutexes,
        })
}

fn emit(out: &mut String, stmts: &[Stmt], depth: usize, local: &mut u32) {
    let pad = "  ".repeat(depth);
    for s in stmts {
        match s {
            Stmt::Write(g) => out.push_str(&format!("{pad}{g} = 1\n")),
            Stmt::Read(g) => {
                *local += 1;
                out.push_str(&format!("{pad}x{local} = {g}\n"));
            }
            Stmt::Skip => out.push_str(&format!("{pad}skip\n")),
            Stmt::Locked(m, body) => {
                out.push_str(&format!("{pad}lock {m}\n"));
                emit(out, body, depth, local);
                out.push_str(&format!("{pad}unlock {m}\n"));
            }
            Stmt::Once(body) => {
                out.push_str(&format!("{pad}once o {{\n"));
                emit(out, body, depth + 1, local);
                out.push_str(&format!("{pad}}}\n"));
            }
        }
    }
}

fn render(g: &Gen) -> String {
    let mut out = String::from("global g, h\nmutex a, b\nonce o\n\nmain:\n");
    if g.init_mutexes {
        out.push_str("  init a\n  init b\n");
    }
    let mut local = 0;
    for i in 0..=g.main.len() {
        for (t, &(at, join)) in g.creates.iter().enumerate() {
            if at == i {
                out.push_str(&format!("  create t{t} as c{t}\n"));
            }
            if join == Some(i) {
                // A join placed at the create position goes right after it.
                out.push_str(&format!("  join c{t}\n"));
            }
        }
        if let Some(s) = g.main.get(i) {
            emit(&mut out, std::slice::from_ref(s), 1, &mut local);
        }
    }
    for (t, body) in g.threads.iter().enumerate() {
        out.push_str(&format!("\nt{t}:\n"));
        emit(&mut out, body, 1, &mut local);
    }
    out
}

/// Ground truth for a generated program, or `None` when the enumeration
/// hits its bounds.
fn prepared(src: &str) -> Option<PreparedCase> {
    let program = parse_program(src).unwrap_or_else(|e| panic!("{e}\n{src}"));
    let lowered = program.lower().unwrap();
    let case = CorpusCase {
        name: "generated".into(),
        dir: PathBuf::new(),
        source: src.to_string(),
        program,
        lowered,
        expected: Expectation {
            description: String::new(),
            provenance: Provenance::Derived,
            bounds: None,
            racy: Vec::new(),
            race_free_with: Vec::new(),
            flagged_with: Vec::new(),
        },
    };
    match prepare(case) {
        Ok(p) => Some(p),
        Err(ConformanceError::InconclusiveBounds { .. }) => None,
        Err(e) => panic!("{e}"),
    }
}

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 96,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn printing_round_trips(g in program()) {
        let p = parse_program(&render(&g)).unwrap();
        let again = parse_program(&print_program(&p)).unwrap();
        prop_assert_eq!(again, p);
    }

    #[test]
    fn analysis_is_deterministic(g in program()) {
        let p = parse_program(&render(&g)).unwrap();
        let config = AnalysisConfig::new(&DIGEST_NAMES, PredicateMode::Generic);
        let a = analyze_program(&p, &config).unwrap().to_json();
        let b = analyze_program(&p, &config).unwrap().to_json();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn enabling_predicates_never_adds_flags(g in program()) {
        let p = parse_program(&render(&g)).unwrap();
        for mode in [PredicateMode::Bespoke, PredicateMode::Generic] {
            let table = ablate(&p, mode).unwrap();
            prop_assert!(table.check_monotone().is_ok(), "{:?}", mode);
        }
    }

    #[test]
    fn every_oracle_race_is_flagged(g in program()) {
        let src = render(&g);
        let Some(c) = prepared(&src) else { return Ok(()) };
        let racy = c.racy_lines();
        for mode in [PredicateMode::Bespoke, PredicateMode::Generic] {
            let flagged = analyze_program(&c.case.program, &AnalysisConfig::new(&DIGEST_NAMES, mode))
                .unwrap()
                .line_pairs();
            prop_assert!(flagged.is_superset(&racy), "{:?}: {:?} vs {:?}\n{}", mode, flagged, racy, src);
        }
        let mut with_racy = c;
        with_racy.case.expected.racy = racy.into_iter().collect();
        let entries = run_soundness_suite(std::slice::from_ref(&with_racy)).unwrap();
        prop_assert!(entries[0].passed(), "{:?}\n{}", entries[0].first_miss(), src);
    }

    #[test]
    fn racy_and_compatible_pairs_coincide(g in program()) {
        let src = render(&g);
        let Some(c) = prepared(&src) else { return Ok(()) };
        let e = &run_equivalence_suite(std::slice::from_ref(&c))[0];
        prop_assert!(e.equal, "racy {:?} compatible {:?}\n{}", e.racy, e.compatible, src);
    }

    #[test]
    fn solver_reaches_every_oracle_digest(g in program()) {
        let src = render(&g);
        let Some(c) = prepared(&src) else { return Ok(()) };
        prop_assert_eq!(agreement_misses(&c).unwrap(), 0, "{}", src);
    }

    #[test]
    fn shipped_digests_obey_the_laws(g in program()) {
        let src = render(&g);
        let Some(c) = prepared(&src) else { return Ok(()) };
        for e in run_law_suite(std::slice::from_ref(&c), &shipped_digests()) {
            prop_assert!(e.passed(), "{} {:?}\n{}", e.admissibility.digest, e, src);
        }
    }
}

