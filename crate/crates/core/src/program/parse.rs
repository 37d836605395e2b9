//! Line-oriented DSL reader.
//!
//! ```text
//! global g
//! mutex a
//!
//! main:
//!   init a
//!   g = 0
//!   create t1 as c1
//!   lock a
//!   g = 5
//!   unlock a
//!
//! t1:
//!   lock a
//!   g = 12
//!   unlock a
//! ```
//!
//! `.L:` names the current program point, `goto .A .B` branches
//! nondeterministically, and any simple statement may end in `-> .L` to jump
//! to a label. `once o { ... }` expands to the `starto`/`ran`/`endo` protocol.
//! Code after `exit` is only reachable through a label.

use std::collections::HashMap;

use super::{
    Action, CreateDecl, CreateId, Edge, GlobalId, LocalId, MutexDecl, MutexId, NodeId, OnceId,
    ProtoId, Program, ThreadPrototype, RESERVED_MUTEX_PREFIX,
};
use crate::ProgramError;

const UNRESOLVED: ProtoId = ProtoId(u32::MAX);

struct Label {
    node: NodeId,
    defined: bool,
    line: u32,
}

struct OpenOnce {
    once: OnceId,
    join: NodeId,
    line: u32,
}

struct ProtoBuilder {
    label: String,
    line: u32,
    start: NodeId,
    edges: Vec<Edge>,
    labels: HashMap<String, Label>,
    current: Option<NodeId>,
    open: Vec<OpenOnce>,
}

struct PendingCreate {
    name: String,
    defined_at: Option<(ProtoId, String, u32)>,
    first_line: u32,
}

#[derive(Default)]
struct Parser {
    globals: Vec<String>,
    mutexes: Vec<String>,
    onces: Vec<String>,
    locals: Vec<String>,
    local_ids: HashMap<String, LocalId>,
    creates: Vec<PendingCreate>,
    create_ids: HashMap<String, CreateId>,
    protos: Vec<ProtoBuilder>,
    next_node: u32,
    auto_create: u32,
}

/// Parses DSL source into a validated, canonically numbered program.
pub fn parse_program(text: &str) -> Result<Program, ProgramError> {
    let mut parser = Parser::default();
    for (i, raw) in text.lines().enumerate() {
        parser.line(i as u32 + 1, raw)?;
    }
    parser.finish()
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn is_value(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn strip_comment(line: &str) -> &str {
    let cut = [line.find('#'), line.find("//")]
        .into_iter()
        .flatten()
        .min()
        .unwrap_or(line.len());
    &line[..cut]
}

impl Parser {
    fn fresh(&mut self) -> NodeId {
        self.next_node += 1;
        NodeId(self.next_node - 1)
    }

    fn line(&mut self, line: u32, raw: &str) -> Result<(), ProgramError> {
        let body = strip_comment(raw);
        let trimmed = body.trim();
        if trimmed.is_empty() {
            return Ok(());
        }
        let column = (body.len() - body.trim_start().len()) as u32 + 1;
        let err = |msg: &str| ProgramError::syntax(line, column, msg);

        let mut words = trimmed.split_whitespace();
        match words.next() {
            Some(kw @ ("global" | "mutex" | "once")) if !trimmed.ends_with('{') => {
                let rest = trimmed[kw.len()..].trim();
                if rest.is_empty() {
                    return Err(err("declaration lists no names"));
                }
                for name in rest.split(',').map(str::trim) {
                    if !is_ident(name) {
                        return Err(err(&format!("invalid identifier `{name}`")));
                    }
                    self.declare(kw, name, line)?;
                }
                return Ok(());
            }
            _ => {}
        }

        if let Some(label) = trimmed.strip_suffix(':') {
            if is_ident(label) {
                return self.open_prototype(label, line);
            }
        }

        if self.protos.is_empty() {
            return Err(err("statement outside of a thread prototype"));
        }

        let mut stmt = trimmed;
        if let Some(rest) = stmt.strip_prefix('.') {
            let colon = rest
                .find(':')
                .ok_or_else(|| err("label must be written `.name:`"))?;
            let name = &rest[..colon];
            if !is_ident(name) {
                return Err(err(&format!("invalid label `.{name}`")));
            }
            self.define_label(name, line)?;
            stmt = rest[colon + 1..].trim();
            if stmt.is_empty() {
                return Ok(());
            }
        }

        if stmt == "}" {
            return self.close_once(line, column);
        }

        let mut words = stmt.split_whitespace();
        match (words.next(), words.next(), words.next(), words.next()) {
            (Some("once"), Some(o), Some("{"), None) => return self.open_once(o, line, column),
            (Some("goto"), ..) => {
                let targets: Vec<&str> = stmt.split_whitespace().skip(1).collect();
                if targets.is_empty() {
                    return Err(err("goto needs at least one target"));
                }
                let source = self.require_current(line, column)?;
                for t in targets {
                    let name = t
                        .strip_prefix('.')
                        .filter(|n| is_ident(n))
                        .ok_or_else(|| err(&format!("invalid goto target `{t}`")))?;
                    let target = self.reference_label(name, line);
                    self.push_edge(source, Action::Skip, target, line);
                }
                self.proto().current = None;
                return Ok(());
            }
            _ => {}
        }

        let (stmt, jump) = match stmt.split_once("->") {
            Some((s, t)) => {
                let t = t.trim();
                let name = t
                    .strip_prefix('.')
                    .filter(|n| is_ident(n))
                    .ok_or_else(|| err(&format!("invalid jump target `{t}`")))?;
                (s.trim(), Some(name))
            }
            None => (stmt, None),
        };
        let action = self.action(stmt, line, column)?;
        let source = self.require_current(line, column)?;
        let target = match jump {
            Some(name) => self.reference_label(name, line),
            None => self.fresh(),
        };
        self.push_edge(source, action, target, line);
        // Nothing falls through an exit.
        let ends_block = jump.is_some() || action == Action::ThreadExit;
        self.proto().current = if ends_block { None } else { Some(target) };
        Ok(())
    }

    fn declare(&mut self, kind: &str, name: &str, line: u32) -> Result<(), ProgramError> {
        let table = match kind {
            "global" => &mut self.globals,
            "mutex" => {
                if name.starts_with(RESERVED_MUTEX_PREFIX) {
                    return Err(ProgramError::validation(
                        line,
                        format!("mutex name `{name}` uses the reserved `m_` prefix"),
                    ));
                }
                &mut self.mutexes
            }
            _ => &mut self.onces,
        };
        if table.iter().any(|n| n == name) {
            return Err(ProgramError::validation(
                line,
                format!("{kind} `{name}` declared twice"),
            ));
        }
        table.push(name.to_string());
        Ok(())
    }

    fn open_prototype(&mut self, label: &str, line: u32) -> Result<(), ProgramError> {
        self.finish_prototype()?;
        if self.protos.iter().any(|p| p.label == label) {
            return Err(ProgramError::validation(
                line,
                format!("prototype `{label}` defined twice"),
            ));
        }
        let start = self.fresh();
        self.protos.push(ProtoBuilder {
            label: label.to_string(),
            line,
            start,
            edges: Vec::new(),
            labels: HashMap::new(),
            current: Some(start),
            open: Vec::new(),
        });
        Ok(())
    }

    fn finish_prototype(&mut self) -> Result<(), ProgramError> {
        if let Some(p) = self.protos.last() {
            if let Some(open) = p.open.last() {
                return Err(ProgramError::syntax(open.line, 1, "unclosed `once` block"));
            }
        }
        Ok(())
    }

    fn proto(&mut self) -> &mut ProtoBuilder {
        self.protos.last_mut().expect("inside a prototype")
    }

    fn require_current(&mut self, line: u32, column: u32) -> Result<NodeId, ProgramError> {
        self.proto().current.ok_or_else(|| {
            ProgramError::syntax(line, column, "unreachable statement: add a label")
        })
    }

    fn push_edge(&mut self, source: NodeId, action: Action, target: NodeId, line: u32) {
        self.proto()
            .edges
            .push(Edge::new(source, action, target, line));
    }

    fn reference_label(&mut self, name: &str, line: u32) -> NodeId {
        if let Some(l) = self.proto().labels.get(name) {
            return l.node;
        }
        let node = self.fresh();
        self.proto().labels.insert(
            name.to_string(),
            Label {
                node,
                defined: false,
                line,
            },
        );
        node
    }

    fn define_label(&mut self, name: &str, line: u32) -> Result<(), ProgramError> {
        let current = self.proto().current;
        let existing = self
            .proto()
            .labels
            .get(name)
            .map(|l| (l.node, l.defined, l.line));
        match (current, existing) {
            (None, Some((node, _, _))) => {
                let p = self.proto();
                p.labels.get_mut(name).expect("present").defined = true;
                p.current = Some(node);
            }
            (None, None) => {
                let node = self.fresh();
                let p = self.proto();
                p.labels.insert(
                    name.to_string(),
                    Label {
                        node,
                        defined: true,
                        line,
                    },
                );
                p.current = Some(node);
            }
            (Some(_), Some((_, true, first))) => {
                return Err(ProgramError::validation(
                    line,
                    format!("duplicate node label `.{name}` (first defined on line {first})"),
                ));
            }
            (Some(cur), Some((node, false, _))) => {
                self.merge(cur, node);
                self.proto().labels.get_mut(name).expect("present").defined = true;
            }
            (Some(cur), None) => {
                self.proto().labels.insert(
                    name.to_string(),
                    Label {
                        node: cur,
                        defined: true,
                        line,
                    },
                );
            }
        }
        Ok(())
    }

    /// Identifies `gone` with `keep` everywhere in the current prototype.
    fn merge(&mut self, keep: NodeId, gone: NodeId) {
        let p = self.proto();
        let swap = |n: &mut NodeId| {
            if *n == gone {
                *n = keep;
            }
        };
        for e in &mut p.edges {
            swap(&mut e.source);
            swap(&mut e.target);
        }
        for l in p.labels.values_mut() {
            swap(&mut l.node);
        }
        for o in &mut p.open {
            swap(&mut o.join);
        }
        if let Some(c) = p.current.as_mut() {
            swap(c);
        }
        swap(&mut p.start);
    }

    fn open_once(&mut self, name: &str, line: u32, column: u32) -> Result<(), ProgramError> {
        let once = self.once_ref(name, line)?;
        let source = self.require_current(line, column)?;
        let test = self.fresh();
        let join = self.fresh();
        let body = self.fresh();
        self.push_edge(source, Action::StartO(once), test, line);
        self.push_edge(test, Action::PosRan(once), join, line);
        self.push_edge(test, Action::NegRan(once), body, line);
        let p = self.proto();
        p.open.push(OpenOnce { once, join, line });
        p.current = Some(body);
        Ok(())
    }

    fn close_once(&mut self, line: u32, column: u32) -> Result<(), ProgramError> {
        let open = self
            .proto()
            .open
            .pop()
            .ok_or_else(|| ProgramError::syntax(line, column, "`}` without matching `once`"))?;
        let join = match self.proto().current {
            Some(cur) => {
                self.merge(open.join, cur);
                open.join
            }
            None => open.join,
        };
        let after = self.fresh();
        self.push_edge(join, Action::EndO(open.once), after, line);
        self.proto().current = Some(after);
        Ok(())
    }

    fn mutex_ref(&self, name: &str, line: u32) -> Result<MutexId, ProgramError> {
        if name.starts_with(RESERVED_MUTEX_PREFIX) {
            return Err(ProgramError::validation(
                line,
                format!("mutex `{name}` is reserved for atomicity instrumentation"),
            ));
        }
        self.mutexes
            .iter()
            .position(|m| m == name)
            .map(|i| MutexId(i as u32))
            .ok_or_else(|| ProgramError::validation(line, format!("undeclared mutex `{name}`")))
    }

    fn once_ref(&self, name: &str, line: u32) -> Result<OnceId, ProgramError> {
        self.onces
            .iter()
            .position(|m| m == name)
            .map(|i| OnceId(i as u32))
            .ok_or_else(|| {
                ProgramError::validation(line, format!("undeclared once variable `{name}`"))
            })
    }

    fn global_ref(&self, name: &str) -> Option<GlobalId> {
        self.globals
            .iter()
            .position(|g| g == name)
            .map(|i| GlobalId(i as u32))
    }

    fn local_ref(&mut self, name: &str) -> LocalId {
        if let Some(&id) = self.local_ids.get(name) {
            return id;
        }
        let id = LocalId(self.locals.len() as u32);
        self.locals.push(name.to_string());
        self.local_ids.insert(name.to_string(), id);
        id
    }

    fn create_ref(&mut self, name: &str, line: u32) -> CreateId {
        if let Some(&id) = self.create_ids.get(name) {
            return id;
        }
        let id = CreateId(self.creates.len() as u32);
        self.creates.push(PendingCreate {
            name: name.to_string(),
            defined_at: None,
            first_line: line,
        });
        self.create_ids.insert(name.to_string(), id);
        id
    }

    fn action(&mut self, stmt: &str, line: u32, column: u32) -> Result<Action, ProgramError> {
        let err = |msg: String| ProgramError::syntax(line, column, msg);

        if let Some((lhs, rhs)) = stmt.split_once('=') {
            let (lhs, rhs) = (lhs.trim(), rhs.trim());
            if !is_value(lhs) || !is_value(rhs) {
                return Err(err(format!("malformed assignment `{stmt}`")));
            }
            return match (self.global_ref(lhs), self.global_ref(rhs)) {
                (Some(_), Some(_)) => Err(err(
                    "assignment between two globals is not a single access".into(),
                )),
                (Some(global), None) => Ok(Action::WriteGlobal {
                    global,
                    local: self.local_ref(rhs),
                }),
                (None, Some(global)) => Ok(Action::ReadGlobal {
                    global,
                    local: self.local_ref(lhs),
                }),
                (None, None) => Ok(Action::Skip),
            };
        }

        let words: Vec<&str> = stmt.split_whitespace().collect();
        let ran_arg = |w: &str| -> Option<String> {
            w.strip_prefix("ran(")
                .and_then(|r| r.strip_suffix(')'))
                .map(|s| s.trim().to_string())
        };
        match words.as_slice() {
            ["skip"] => Ok(Action::Skip),
            ["exit"] => Ok(Action::ThreadExit),
            ["init", m] => Ok(Action::Init(self.mutex_ref(m, line)?)),
            ["lock", m] => Ok(Action::Lock(self.mutex_ref(m, line)?)),
            ["unlock", m] => Ok(Action::Unlock(self.mutex_ref(m, line)?)),
            ["inito", _] => Err(ProgramError::validation(
                line,
                "`inito` is inserted by instrumentation and may not be written",
            )),
            ["starto", o] => Ok(Action::StartO(self.once_ref(o, line)?)),
            ["endo", o] => Ok(Action::EndO(self.once_ref(o, line)?)),
            ["pos", r] | ["neg", r] => {
                let o = ran_arg(r).ok_or_else(|| err(format!("expected `ran(o)`, got `{r}`")))?;
                let o = self.once_ref(&o, line)?;
                Ok(if words[0] == "pos" {
                    Action::PosRan(o)
                } else {
                    Action::NegRan(o)
                })
            }
            ["create", p] | ["create", p, "as", _] => {
                if !is_ident(p) {
                    return Err(err(format!("invalid prototype name `{p}`")));
                }
                let name = match words.get(3) {
                    Some(n) if is_ident(n) => n.to_string(),
                    Some(n) => return Err(err(format!("invalid create id `{n}`"))),
                    None => loop {
                        self.auto_create += 1;
                        let candidate = format!("_c{}", self.auto_create);
                        if !self.create_ids.contains_key(&candidate) {
                            break candidate;
                        }
                    },
                };
                let site = self.create_ref(&name, line);
                let owner = ProtoId(self.protos.len() as u32 - 1);
                if let Some((_, _, first)) = self.creates[site.index()].defined_at {
                    return Err(ProgramError::validation(
                        line,
                        format!("create id `{name}` already used on line {first}"),
                    ));
                }
                self.creates[site.index()].defined_at = Some((owner, p.to_string(), line));
                Ok(Action::Create {
                    proto: UNRESOLVED,
                    site,
                })
            }
            ["join", c] => {
                if !is_ident(c) {
                    return Err(err(format!("invalid create id `{c}`")));
                }
                Ok(Action::Join(self.create_ref(c, line)))
            }
            _ => Err(err(format!("unknown statement `{stmt}`"))),
        }
    }

    fn finish(mut self) -> Result<Program, ProgramError> {
        self.finish_prototype()?;

        let prototypes: Vec<(String, u32)> =
            self.protos.iter().map(|p| (p.label.clone(), p.line)).collect();
        let resolve = |label: &str| {
            prototypes
                .iter()
                .position(|(l, _)| l == label)
                .map(|i| ProtoId(i as u32))
        };
        let main = resolve("main")
            .ok_or_else(|| ProgramError::validation(0, "program has no `main` prototype"))?;

        let mut creates = Vec::with_capacity(self.creates.len());
        for c in &self.creates {
            let (owner, target_label, line) = c.defined_at.clone().ok_or_else(|| {
                ProgramError::validation(
                    c.first_line,
                    format!("join of unknown create id `{}`", c.name),
                )
            })?;
            let target = resolve(&target_label).ok_or_else(|| {
                ProgramError::validation(line, format!("unknown prototype `{target_label}`"))
            })?;
            creates.push(CreateDecl {
                name: c.name.clone(),
                owner,
                target,
            });
        }

        let mut protos = Vec::with_capacity(self.protos.len());
        for (p, b) in self.protos.into_iter().enumerate() {
            let mut edges = b.edges;
            for e in &mut edges {
                match e.action {
                    Action::Create { site, .. } => {
                        e.action = Action::Create {
                            proto: creates[site.index()].target,
                            site,
                        };
                    }
                    Action::Join(c) if creates[c.index()].owner.index() != p => {
                        return Err(ProgramError::validation(
                            e.line,
                            format!(
                                "join `{}` must be in the prototype that performs the create",
                                creates[c.index()].name
                            ),
                        ));
                    }
                    _ => {}
                }
            }
            validate_graph(&b.label, b.start, &edges, b.line)?;
            protos.push(ThreadPrototype {
                label: b.label,
                start: b.start,
                edges,
            });
        }

        let mut mutexes: Vec<MutexDecl> = self
            .mutexes
            .into_iter()
            .map(|name| MutexDecl {
                name,
                atomicity_for: None,
            })
            .collect();
        for (i, g) in self.globals.iter().enumerate() {
            mutexes.push(MutexDecl {
                name: format!("{RESERVED_MUTEX_PREFIX}{g}"),
                atomicity_for: Some(GlobalId(i as u32)),
            });
        }

        let mut program = Program {
            prototypes: protos,
            globals: self.globals,
            mutexes,
            onces: self.onces,
            locals: self.locals,
            creates,
            main,
            instrumented: false,
        };
        program.canonicalize();
        Ok(program)
    }
}

fn validate_graph(
    label: &str,
    start: NodeId,
    edges: &[Edge],
    line: u32,
) -> Result<(), ProgramError> {
    if let Some(e) = edges.iter().find(|e| e.target == start) {
        return Err(ProgramError::validation(
            e.line,
            format!("start node of `{label}` has an incoming edge"),
        ));
    }
    for e in edges {
        if let Action::PosRan(o) | Action::NegRan(o) = e.action {
            let mut incoming = edges.iter().filter(|x| x.target == e.source).peekable();
            let guarded =
                incoming.peek().is_some() && incoming.all(|x| x.action == Action::StartO(o));
            if !guarded {
                return Err(ProgramError::validation(
                    e.line,
                    "a `ran` test must directly follow `starto` of the same variable",
                ));
            }
        }
    }
    let mut reached = std::collections::HashSet::from([start]);
    let mut changed = true;
    while changed {
        changed = false;
        for e in edges {
            if reached.contains(&e.source) && reached.insert(e.target) {
                changed = true;
            }
        }
    }
    if let Some(e) = edges.iter().find(|e| !reached.contains(&e.source)) {
        return Err(ProgramError::validation(
            if e.line == 0 { line } else { e.line },
            format!("unreachable statement in `{label}`"),
        ));
    }
    Ok(())
}
