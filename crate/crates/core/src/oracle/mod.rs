//! Bounded concrete semantics: local traces, exhaustive enumeration, and the
//! two race characterizations (unordered accesses, bidirectional
//! compatibility) used as ground truth.

mod explore;
mod race;
mod semantics;
mod trace;

use std::fmt::Write as _;

pub use explore::{enumerate_traces, Bounds, Exploration, Step, Trace};
pub use race::{
    bidirectionally_compatible, compatible_pairs, find_racy_pairs, Compatibility, RacePair,
};
pub use semantics::Semantics;
pub use trace::{ConfigRef, DepLabel, EventRef, InstanceId, Lane, LocalTrace};

use crate::program::Program;

/// DOT rendering of a local trace: one cluster per swimlane, dependencies
/// colored by label.
pub fn trace_to_dot(program: &Program, sem: &Semantics<'_>, t: &LocalTrace) -> String {
    let name = |id: &InstanceId, i: u32| format!("\"{id}:{i}\"");
    let mut out = String::from("digraph trace {\n  rankdir=LR;\n  node [shape=point];\n");
    for (lane_no, (id, lane)) in t.lanes.iter().enumerate() {
        let ego = if *id == t.ego { " (ego)" } else { "" };
        let _ = writeln!(
            out,
            "  subgraph cluster_{lane_no} {{\n    label=\"{id} [{}]{ego}\";",
            program.prototype(lane.proto).label
        );
        let _ = writeln!(out, "    {};", name(id, 0));
        for (i, &e) in lane.events.iter().enumerate() {
            let i = i as u32;
            let _ = writeln!(
                out,
                "    {} -> {} [label=\"{}\"];",
                name(id, i),
                name(id, i + 1),
                program.render_action(sem.index.action(e))
            );
        }
        out.push_str("  }\n");
    }
    for (to, (from, label)) in &t.deps {
        let (color, text) = match label {
            DepLabel::Create => ("blue", "create".to_string()),
            DepLabel::Mutex(m) => ("red", program.mutex_name(*m).to_string()),
            DepLabel::Once(o) => ("darkgreen", program.once_name(*o).to_string()),
            DepLabel::Join => ("purple", "join".to_string()),
        };
        let _ = writeln!(
            out,
            "  {} -> {} [color={color}, style=dashed, label=\"{text}\"];",
            name(&from.instance, from.index),
            name(&to.instance, to.index)
        );
    }
    out.push_str("}\n");
    out
}
