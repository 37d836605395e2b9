//! The analyzed language: control-flow graphs of thread prototypes whose edges
//! carry concurrency actions.
//!
//! Programs are produced by [`parse_program`] and are immutable afterwards.
//! Analyses run on the lowered form returned by [`Program::lower`], in which
//! every global access is wrapped by its atomicity mutex and every thread ends
//! in an explicit exit action.

mod index;
mod instrument;
mod parse;
mod print;

use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

pub use index::{CfgIndex, EdgeId, EdgeRef};
pub use instrument::{access_sites, close_threads, instrument_atomicity, AccessSite, SitePair};
pub use parse::parse_program;
pub use print::{print_program, program_to_dot};

/// Prefix reserved for atomicity mutexes.
pub const RESERVED_MUTEX_PREFIX: &str = "m_";

macro_rules! id_type {
    ($(#[$m:meta])* $name:ident) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub struct $name(pub u32);

        impl $name {
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }
    };
}

id_type!(
    /// A program point. Unique across all prototypes.
    NodeId
);
id_type!(MutexId);
id_type!(GlobalId);
id_type!(OnceId);
id_type!(ProtoId);
id_type!(LocalId);
id_type!(
    /// Static identity of a `create` edge; `join` refers back to it.
    CreateId
);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AccessKind {
    #[serde(rename = "R")]
    Read,
    #[serde(rename = "W")]
    Write,
}

impl AccessKind {
    pub fn is_write(self) -> bool {
        self == AccessKind::Write
    }
}

impl fmt::Display for AccessKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AccessKind::Read => "R",
            AccessKind::Write => "W",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ActionClass {
    Local,
    Observable,
    Observing,
    Creating,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Action {
    Init(MutexId),
    Lock(MutexId),
    Unlock(MutexId),
    Create { proto: ProtoId, site: CreateId },
    Join(CreateId),
    ReadGlobal { global: GlobalId, local: LocalId },
    WriteGlobal { global: GlobalId, local: LocalId },
    InitO(OnceId),
    StartO(OnceId),
    EndO(OnceId),
    PosRan(OnceId),
    NegRan(OnceId),
    Skip,
    ThreadExit,
}

impl Action {
    pub fn class(&self) -> ActionClass {
        match self {
            Action::Init(_)
            | Action::Unlock(_)
            | Action::EndO(_)
            | Action::InitO(_)
            | Action::ThreadExit => ActionClass::Observable,
            Action::Lock(_) | Action::StartO(_) | Action::Join(_) => ActionClass::Observing,
            Action::Create { .. } => ActionClass::Creating,
            _ => ActionClass::Local,
        }
    }

    pub fn is_observing(&self) -> bool {
        self.class() == ActionClass::Observing
    }

    pub fn is_observable(&self) -> bool {
        self.class() == ActionClass::Observable
    }

    /// The global touched by this action together with the access kind.
    pub fn access(&self) -> Option<(GlobalId, AccessKind)> {
        match *self {
            Action::ReadGlobal { global, .. } => Some((global, AccessKind::Read)),
            Action::WriteGlobal { global, .. } => Some((global, AccessKind::Write)),
            _ => None,
        }
    }

    pub fn mutex(&self) -> Option<MutexId> {
        match *self {
            Action::Init(m) | Action::Lock(m) | Action::Unlock(m) => Some(m),
            _ => None,
        }
    }

    pub fn once(&self) -> Option<OnceId> {
        match *self {
            Action::InitO(o)
            | Action::StartO(o)
            | Action::EndO(o)
            | Action::PosRan(o)
            | Action::NegRan(o) => Some(o),
            _ => None,
        }
    }
}

/// `(source, action, target)`. The source line is carried along for reports
/// but is not part of the edge's identity.
#[derive(Debug, Clone, Copy)]
pub struct Edge {
    pub source: NodeId,
    pub action: Action,
    pub target: NodeId,
    pub line: u32,
}

impl Edge {
    pub fn new(source: NodeId, action: Action, target: NodeId, line: u32) -> Self {
        Edge {
            source,
            action,
            target,
            line,
        }
    }
}

impl PartialEq for Edge {
    fn eq(&self, other: &Self) -> bool {
        (self.source, self.action, self.target) == (other.source, other.action, other.target)
    }
}

impl Eq for Edge {}

impl Hash for Edge {
    fn hash<H: Hasher>(&self, state: &mut H) {
        (self.source, self.action, self.target).hash(state);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThreadPrototype {
    pub label: String,
    pub start: NodeId,
    pub edges: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MutexDecl {
    pub name: String,
    /// Set for the atomicity mutex `m_g` of global `g`.
    pub atomicity_for: Option<GlobalId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CreateDecl {
    pub name: String,
    /// Prototype containing the `create` edge.
    pub owner: ProtoId,
    /// Prototype the new thread runs.
    pub target: ProtoId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub prototypes: Vec<ThreadPrototype>,
    pub globals: Vec<String>,
    pub mutexes: Vec<MutexDecl>,
    pub onces: Vec<String>,
    pub locals: Vec<String>,
    pub creates: Vec<CreateDecl>,
    pub main: ProtoId,
    pub instrumented: bool,
}

impl Program {
    pub fn prototype(&self, id: ProtoId) -> &ThreadPrototype {
        &self.prototypes[id.index()]
    }

    pub fn main_prototype(&self) -> &ThreadPrototype {
        self.prototype(self.main)
    }

    pub fn proto_by_label(&self, label: &str) -> Option<ProtoId> {
        self.prototypes
            .iter()
            .position(|p| p.label == label)
            .map(|i| ProtoId(i as u32))
    }

    pub fn global_by_name(&self, name: &str) -> Option<GlobalId> {
        self.globals
            .iter()
            .position(|g| g == name)
            .map(|i| GlobalId(i as u32))
    }

    pub fn mutex_by_name(&self, name: &str) -> Option<MutexId> {
        self.mutexes
            .iter()
            .position(|m| m.name == name)
            .map(|i| MutexId(i as u32))
    }

    pub fn once_by_name(&self, name: &str) -> Option<OnceId> {
        self.onces
            .iter()
            .position(|o| o == name)
            .map(|i| OnceId(i as u32))
    }

    pub fn mutex_name(&self, m: MutexId) -> &str {
        &self.mutexes[m.index()].name
    }

    pub fn global_name(&self, g: GlobalId) -> &str {
        &self.globals[g.index()]
    }

    pub fn once_name(&self, o: OnceId) -> &str {
        &self.onces[o.index()]
    }

    pub fn create_name(&self, c: CreateId) -> &str {
        &self.creates[c.index()].name
    }

    pub fn create_decl(&self, c: CreateId) -> &CreateDecl {
        &self.creates[c.index()]
    }

    /// The atomicity mutex `m_g` of a global.
    pub fn atomicity_mutex(&self, g: GlobalId) -> MutexId {
        let idx = self
            .mutexes
            .iter()
            .position(|m| m.atomicity_for == Some(g))
            .expect("every global has an atomicity mutex");
        MutexId(idx as u32)
    }

    pub fn is_atomicity_mutex(&self, m: MutexId) -> bool {
        self.mutexes[m.index()].atomicity_for.is_some()
    }

    pub fn node_count(&self) -> usize {
        self.prototypes
            .iter()
            .flat_map(|p| {
                std::iter::once(p.start.index())
                    .chain(p.edges.iter().flat_map(|e| [e.source.index(), e.target.index()]))
            })
            .max()
            .map_or(0, |m| m + 1)
    }

    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.prototypes.iter().flat_map(|p| p.edges.iter())
    }

    /// Instrumentation followed by thread closing: the form every analysis expects.
    pub fn lower(&self) -> Result<Program, crate::ProgramError> {
        Ok(close_threads(&instrument_atomicity(self)?))
    }

    /// Human-readable rendering of an action, in the DSL's surface syntax.
    pub fn render_action(&self, action: &Action) -> String {
        match *action {
            Action::Init(m) => format!("init {}", self.mutex_name(m)),
            Action::Lock(m) => format!("lock {}", self.mutex_name(m)),
            Action::Unlock(m) => format!("unlock {}", self.mutex_name(m)),
            Action::Create { proto, site } => format!(
                "create {} as {}",
                self.prototype(proto).label,
                self.create_name(site)
            ),
            Action::Join(c) => format!("join {}", self.create_name(c)),
            Action::ReadGlobal { global, local } => format!(
                "{} = {}",
                self.locals[local.index()],
                self.global_name(global)
            ),
            Action::WriteGlobal { global, local } => format!(
                "{} = {}",
                self.global_name(global),
                self.locals[local.index()]
            ),
            Action::InitO(o) => format!("inito {}", self.once_name(o)),
            Action::StartO(o) => format!("starto {}", self.once_name(o)),
            Action::EndO(o) => format!("endo {}", self.once_name(o)),
            Action::PosRan(o) => format!("pos ran({})", self.once_name(o)),
            Action::NegRan(o) => format!("neg ran({})", self.once_name(o)),
            Action::Skip => "skip".to_string(),
            Action::ThreadExit => "exit".to_string(),
        }
    }

    /// Renumbers nodes breadth-first from each start node (prototypes in
    /// declaration order), orders edges by source, and renumbers locals and
    /// create ids by first use. Two programs with the same graphs compare
    /// equal after this.
    pub(crate) fn canonicalize(&mut self) {
        use std::collections::{HashMap, VecDeque};

        let mut next = 0u32;
        let mut node_map: HashMap<NodeId, NodeId> = HashMap::new();
        for proto in &mut self.prototypes {
            let mut out: HashMap<NodeId, Vec<usize>> = HashMap::new();
            for (i, e) in proto.edges.iter().enumerate() {
                out.entry(e.source).or_default().push(i);
            }
            let mut order: Vec<usize> = Vec::with_capacity(proto.edges.len());
            let mut queue = VecDeque::new();
            node_map.insert(proto.start, NodeId(next));
            next += 1;
            queue.push_back(proto.start);
            while let Some(u) = queue.pop_front() {
                for &i in out.get(&u).map(Vec::as_slice).unwrap_or(&[]) {
                    order.push(i);
                    let t = proto.edges[i].target;
                    if let std::collections::hash_map::Entry::Vacant(slot) = node_map.entry(t) {
                        slot.insert(NodeId(next));
                        next += 1;
                        queue.push_back(t);
                    }
                }
            }
            // Edges whose source is unreachable keep their relative order at the end;
            // validation rejects such programs before they escape the parser.
            let mut seen = vec![false; proto.edges.len()];
            for &i in &order {
                seen[i] = true;
            }
            for (i, s) in seen.iter().enumerate() {
                if !s {
                    order.push(i);
                    for n in [proto.edges[i].source, proto.edges[i].target] {
                        node_map.entry(n).or_insert_with(|| {
                            next += 1;
                            NodeId(next - 1)
                        });
                    }
                }
            }
            let edges: Vec<Edge> = order
                .into_iter()
                .map(|i| {
                    let e = proto.edges[i];
                    Edge::new(node_map[&e.source], e.action, node_map[&e.target], e.line)
                })
                .collect();
            proto.start = node_map[&proto.start];
            proto.edges = edges;
        }

        let mut local_map: HashMap<LocalId, LocalId> = HashMap::new();
        let mut locals = Vec::new();
        let mut create_map: HashMap<CreateId, CreateId> = HashMap::new();
        let mut creates = Vec::new();
        for proto in &self.prototypes {
            for e in &proto.edges {
                match e.action {
                    Action::ReadGlobal { local, .. } | Action::WriteGlobal { local, .. } => {
                        local_map.entry(local).or_insert_with(|| {
                            locals.push(self.locals[local.index()].clone());
                            LocalId(locals.len() as u32 - 1)
                        });
                    }
                    Action::Create { site, .. } => {
                        create_map.entry(site).or_insert_with(|| {
                            creates.push(self.creates[site.index()].clone());
                            CreateId(creates.len() as u32 - 1)
                        });
                    }
                    _ => {}
                }
            }
        }
        for (i, c) in self.creates.iter().enumerate() {
            create_map.entry(CreateId(i as u32)).or_insert_with(|| {
                creates.push(c.clone());
                CreateId(creates.len() as u32 - 1)
            });
        }
        for proto in &mut self.prototypes {
            for e in &mut proto.edges {
                e.action = match e.action {
                    Action::ReadGlobal { global, local } => Action::ReadGlobal {
                        global,
                        local: local_map[&local],
                    },
                    Action::WriteGlobal { global, local } => Action::WriteGlobal {
                        global,
                        local: local_map[&local],
                    },
                    Action::Create { proto, site } => Action::Create {
                        proto,
                        site: create_map[&site],
                    },
                    Action::Join(c) => Action::Join(create_map[&c]),
                    other => other,
                };
            }
        }
        self.locals = locals;
        self.creates = creates;
    }
}
