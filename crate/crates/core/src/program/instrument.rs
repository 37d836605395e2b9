use serde::Serialize;

use super::{AccessKind, Action, Edge, GlobalId, NodeId, ProtoId, Program};
use crate::ProgramError;

/// Wraps every global access `g` in `lock(m_g); access; unlock(m_g)` and
/// prepends to `main` the initialization of every atomicity mutex and once
/// variable.
pub fn instrument_atomicity(program: &Program) -> Result<Program, ProgramError> {
    if program.instrumented {
        return Err(ProgramError::AlreadyInstrumented);
    }
    let mut out = program.clone();
    let mut next = out.node_count() as u32;
    let mut fresh = || {
        next += 1;
        NodeId(next - 1)
    };

    for proto in &mut out.prototypes {
        let mut edges = Vec::with_capacity(proto.edges.len());
        for e in &proto.edges {
            match e.action.access() {
                Some((g, _)) => {
                    let m = program.atomicity_mutex(g);
                    let (a, b) = (fresh(), fresh());
                    edges.push(Edge::new(e.source, Action::Lock(m), a, e.line));
                    edges.push(Edge::new(a, e.action, b, e.line));
                    edges.push(Edge::new(b, Action::Unlock(m), e.target, e.line));
                }
                None => edges.push(*e),
            }
        }
        proto.edges = edges;
    }

    let prologue: Vec<Action> = (0..program.globals.len())
        .map(|g| Action::Init(program.atomicity_mutex(GlobalId(g as u32))))
        .chain((0..program.onces.len()).map(|o| Action::InitO(super::OnceId(o as u32))))
        .collect();
    let main = &mut out.prototypes[program.main.index()];
    let mut start = main.start;
    for action in prologue.into_iter().rev() {
        let s = fresh();
        main.edges.push(Edge::new(s, action, start, 0));
        start = s;
    }
    main.start = start;

    out.instrumented = true;
    out.canonicalize();
    Ok(out)
}

/// Ends every thread with an explicit `exit`: each sink not entered solely by
/// `exit` edges gets one.
pub fn close_threads(program: &Program) -> Program {
    let mut out = program.clone();
    let mut next = out.node_count() as u32;
    for proto in &mut out.prototypes {
        let mut nodes: Vec<NodeId> = std::iter::once(proto.start)
            .chain(proto.edges.iter().flat_map(|e| [e.source, e.target]))
            .collect();
        nodes.sort();
        nodes.dedup();
        let mut added = Vec::new();
        for n in nodes {
            if proto.edges.iter().any(|e| e.source == n) {
                continue;
            }
            let mut incoming = proto.edges.iter().filter(|e| e.target == n).peekable();
            let exited = incoming.peek().is_some()
                && incoming.all(|e| e.action == Action::ThreadExit);
            if !exited {
                added.push(Edge::new(n, Action::ThreadExit, NodeId(next), 0));
                next += 1;
            }
        }
        proto.edges.extend(added);
    }
    out.canonicalize();
    out
}

/// A global access in the source program, identified by the node the access
/// edge leaves from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct AccessSite {
    pub node: NodeId,
    pub global: GlobalId,
    pub kind: AccessKind,
    pub proto: ProtoId,
    pub line: u32,
}

/// An unordered pair of accesses to the same global, stored with `a <= b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct SitePair {
    pub global: GlobalId,
    pub a: AccessSite,
    pub b: AccessSite,
}

impl SitePair {
    pub fn new(x: AccessSite, y: AccessSite) -> Self {
        debug_assert_eq!(x.global, y.global);
        let (a, b) = if x <= y { (x, y) } else { (y, x) };
        SitePair {
            global: a.global,
            a,
            b,
        }
    }

    pub fn has_write(&self) -> bool {
        self.a.kind.is_write() || self.b.kind.is_write()
    }

    pub fn lines(&self) -> (u32, u32) {
        (self.a.line, self.b.line)
    }
}

pub fn access_sites(program: &Program) -> Vec<AccessSite> {
    let mut sites = Vec::new();
    for (p, proto) in program.prototypes.iter().enumerate() {
        for e in &proto.edges {
            if let Some((global, kind)) = e.action.access() {
                sites.push(AccessSite {
                    node: e.source,
                    global,
                    kind,
                    proto: ProtoId(p as u32),
                    line: e.line,
                });
            }
        }
    }
    sites
}
