use std::fmt::Write as _;

use super::{Action, Program};

/// Canonical DSL text. For programs straight out of the parser,
/// `parse_program(&print_program(p)) == p`.
///
/// Lowered programs print the reserved `m_` mutexes and `inito`, which the
/// parser refuses; their text is for reading only.
pub fn print_program(program: &Program) -> String {
    let mut out = String::new();
    if program.instrumented {
        out.push_str("# lowered form (not re-parseable)\n");
    }
    let user_mutexes: Vec<&str> = program
        .mutexes
        .iter()
        .filter(|m| program.instrumented || m.atomicity_for.is_none())
        .map(|m| m.name.as_str())
        .collect();
    for (kw, names) in [
        ("global", program.globals.iter().map(String::as_str).collect()),
        ("mutex", user_mutexes),
        ("once", program.onces.iter().map(String::as_str).collect::<Vec<_>>()),
    ] {
        if !names.is_empty() {
            let _ = writeln!(out, "{kw} {}", names.join(", "));
        }
    }
    for proto in &program.prototypes {
        let _ = writeln!(out, "\n{}:", proto.label);
        for e in &proto.edges {
            let action = match e.action {
                // A local-to-local assignment is a skip; print it as such.
                Action::Skip => "skip".to_string(),
                ref a => program.render_action(a),
            };
            let _ = writeln!(out, "  .{}: {} -> .{}", e.source, action, e.target);
        }
    }
    out
}

/// Graphviz rendering, one cluster per prototype.
pub fn program_to_dot(program: &Program) -> String {
    let mut out = String::from("digraph program {\n  node [shape=circle, fontsize=10];\n");
    for (i, proto) in program.prototypes.iter().enumerate() {
        let _ = writeln!(out, "  subgraph cluster_{i} {{\n    label=\"{}\";", proto.label);
        let _ = writeln!(out, "    {} [shape=doublecircle];", proto.start);
        for e in &proto.edges {
            let _ = writeln!(
                out,
                "    {} -> {} [label=\"{}\"];",
                e.source,
                e.target,
                program.render_action(&e.action).replace('"', "\\\"")
            );
        }
        out.push_str("  }\n");
    }
    out.push_str("}\n");
    out
}
