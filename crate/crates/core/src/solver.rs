//! Digest-refined constraint system over the reachability domain, solved by
//! a FIFO worklist. Unknowns materialize on demand.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use serde::Serialize;
use serde_json::{json, Value};

use crate::digest::{Digest, Elem};
use crate::program::{access_sites, AccessSite, Action, CfgIndex, EdgeId, GlobalId, NodeId, ProtoId, Program};
use crate::{ProgramError, SolverError};

pub const DEFAULT_ITERATION_CAP: usize = 1_000_000;

/// Identity of an observable action: partners of observing actions are
/// looked up by it. Exits are keyed by the prototype that exits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum ObsKey {
    Init(crate::program::MutexId),
    Unlock(crate::program::MutexId),
    InitO(crate::program::OnceId),
    EndO(crate::program::OnceId),
    Exit(ProtoId),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Unknown {
    Point(NodeId, Elem),
    Observable(ObsKey, Elem),
    Accesses(GlobalId),
}

/// One entry of an access accumulator.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct AccessRecord {
    pub site: AccessSite,
    pub digest: Elem,
}

/// The constraint system of a lowered program under a digest.
pub struct ConstraintSystem<'a> {
    pub program: &'a Program,
    pub digest: &'a dyn Digest,
    index: CfgIndex,
    /// Observing edges waiting on each observable key.
    consumers: HashMap<ObsKey, Vec<EdgeId>>,
    /// For an `unlock(m_g)` edge, the access sites it closes.
    closes: HashMap<EdgeId, Vec<AccessSite>>,
}

/// Builds the constraint system. The program must be lowered.
pub fn build_system<'a>(
    program: &'a Program,
    digest: &'a dyn Digest,
) -> Result<ConstraintSystem<'a>, SolverError> {
    if !program.instrumented {
        return Err(ProgramError::NotInstrumented.into());
    }
    let index = CfgIndex::new(program);
    let mut consumers: HashMap<ObsKey, Vec<EdgeId>> = HashMap::new();
    let mut closes: HashMap<EdgeId, Vec<AccessSite>> = HashMap::new();
    let sites: HashMap<NodeId, AccessSite> =
        access_sites(program).into_iter().map(|s| (s.node, s)).collect();
    for r in index.edges() {
        for key in partners(program, &r.edge.action) {
            consumers.entry(key).or_default().push(r.id);
        }
        if let Action::Unlock(m) = r.edge.action {
            for &inc in index.incoming(r.edge.source) {
                let e = index.edge(inc);
                if let Some((g, _)) = e.action.access() {
                    if program.atomicity_mutex(g) == m {
                        closes.entry(r.id).or_default().push(sites[&e.source]);
                    }
                }
            }
        }
    }
    Ok(ConstraintSystem {
        program,
        digest,
        index,
        consumers,
        closes,
    })
}

fn partners(program: &Program, action: &Action) -> Vec<ObsKey> {
    match *action {
        Action::Lock(m) => vec![ObsKey::Init(m), ObsKey::Unlock(m)],
        Action::StartO(o) => vec![ObsKey::InitO(o), ObsKey::EndO(o)],
        Action::Join(c) => vec![ObsKey::Exit(program.create_decl(c).target)],
        _ => Vec::new(),
    }
}

fn observable_key(action: &Action, proto: ProtoId) -> Option<ObsKey> {
    match *action {
        Action::Init(m) => Some(ObsKey::Init(m)),
        Action::Unlock(m) => Some(ObsKey::Unlock(m)),
        Action::InitO(o) => Some(ObsKey::InitO(o)),
        Action::EndO(o) => Some(ObsKey::EndO(o)),
        Action::ThreadExit => Some(ObsKey::Exit(proto)),
        _ => None,
    }
}

/// Least solution: the reached unknowns and the access accumulators.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Solution {
    pub points: BTreeMap<NodeId, BTreeSet<Elem>>,
    pub observables: BTreeMap<ObsKey, BTreeSet<Elem>>,
    pub accesses: BTreeMap<GlobalId, BTreeSet<AccessRecord>>,
    pub evaluations: usize,
}

impl Solution {
    pub fn is_reached(&self, u: &Unknown) -> bool {
        match u {
            Unknown::Point(n, e) => self.points.get(n).is_some_and(|s| s.contains(e)),
            Unknown::Observable(k, e) => self.observables.get(k).is_some_and(|s| s.contains(e)),
            Unknown::Accesses(g) => self.accesses.contains_key(g),
        }
    }

    pub fn records(&self, g: GlobalId) -> impl Iterator<Item = &AccessRecord> {
        self.accesses.get(&g).into_iter().flatten()
    }

    /// JSON dump keyed by rendered unknowns.
    pub fn to_json(&self, program: &Program) -> Value {
        let points: serde_json::Map<String, Value> = self
            .points
            .iter()
            .map(|(n, s)| (n.to_string(), json!(s.iter().map(Elem::to_string).collect::<Vec<_>>())))
            .collect();
        let observables: serde_json::Map<String, Value> = self
            .observables
            .iter()
            .map(|(k, s)| {
                let key = match *k {
                    ObsKey::Init(m) => format!("init {}", program.mutex_name(m)),
                    ObsKey::Unlock(m) => format!("unlock {}", program.mutex_name(m)),
                    ObsKey::InitO(o) => format!("inito {}", program.once_name(o)),
                    ObsKey::EndO(o) => format!("endo {}", program.once_name(o)),
                    ObsKey::Exit(p) => format!("exit {}", program.prototype(p).label),
                };
                (key, json!(s.iter().map(Elem::to_string).collect::<Vec<_>>()))
            })
            .collect();
        let accesses: serde_json::Map<String, Value> = self
            .accesses
            .iter()
            .map(|(g, recs)| {
                let recs: Vec<Value> = recs
                    .iter()
                    .map(|r| {
                        json!({
                            "node": r.site.node.to_string(),
                            "line": r.site.line,
                            "kind": r.site.kind,
                            "digest": r.digest.to_string(),
                        })
                    })
                    .collect();
                (program.global_name(*g).to_string(), Value::Array(recs))
            })
            .collect();
        json!({ "points": points, "observables": observables, "accesses": accesses })
    }
}

struct Worklist<'s, 'a> {
    cs: &'s ConstraintSystem<'a>,
    cap: usize,
    sol: Solution,
    reached: HashSet<(NodeId, Elem)>,
    at: HashMap<NodeId, Vec<Elem>>,
    obs: HashMap<ObsKey, Vec<Elem>>,
    queue: VecDeque<Unknown>,
}

impl Worklist<'_, '_> {
    fn tick(&mut self) -> Result<(), SolverError> {
        self.sol.evaluations += 1;
        if self.sol.evaluations > self.cap {
            return Err(SolverError::Divergence { cap: self.cap });
        }
        Ok(())
    }

    fn reach(&mut self, node: NodeId, e: Elem) {
        if self.reached.insert((node, e.clone())) {
            self.at.entry(node).or_default().push(e.clone());
            self.sol.points.entry(node).or_default().insert(e.clone());
            self.queue.push_back(Unknown::Point(node, e));
        }
    }

    fn observe(&mut self, key: ObsKey, e: Elem) {
        if self.sol.observables.entry(key).or_default().insert(e.clone()) {
            self.obs.entry(key).or_default().push(e.clone());
            self.queue.push_back(Unknown::Observable(key, e));
        }
    }

    fn point(&mut self, node: NodeId, a: Elem) -> Result<(), SolverError> {
        let cs = self.cs;
        let proto = cs.index.proto_of(node).expect("node belongs to a prototype");
        for &id in cs.index.outgoing(node) {
            let edge = *cs.index.edge(id);
            let action = edge.action;
            if action.is_observing() {
                for key in partners(cs.program, &action) {
                    let partners = self.obs.get(&key).cloned().unwrap_or_default();
                    for a1 in partners {
                        self.tick()?;
                        if let Some(next) = cs.digest.step_observing(&action, &a, &a1) {
                            self.reach(edge.target, next);
                        }
                    }
                }
                continue;
            }
            self.tick()?;
            if let Action::Create { proto: child, .. } = action {
                if let Some(c) = cs.digest.new_thread(&a, &action) {
                    self.reach(cs.program.prototype(child).start, c);
                }
            }
            let Some(next) = cs.digest.step_local(&action, &a) else {
                continue;
            };
            if let Some(key) = observable_key(&action, proto) {
                self.observe(key, next.clone());
            }
            if let Some(sites) = cs.closes.get(&id) {
                for site in sites {
                    self.sol.accesses.entry(site.global).or_default().insert(AccessRecord {
                        site: *site,
                        digest: next.clone(),
                    });
                }
            }
            self.reach(edge.target, next);
        }
        Ok(())
    }

    fn observable(&mut self, key: ObsKey, a1: Elem) -> Result<(), SolverError> {
        let cs = self.cs;
        let Some(edges) = cs.consumers.get(&key) else {
            return Ok(());
        };
        for &id in edges {
            let edge = *cs.index.edge(id);
            let waiting = self.at.get(&edge.source).cloned().unwrap_or_default();
            for a0 in waiting {
                self.tick()?;
                if let Some(next) = cs.digest.step_observing(&edge.action, &a0, &a1) {
                    self.reach(edge.target, next);
                }
            }
        }
        Ok(())
    }
}

/// Computes the least solution, failing once more than `cap` right-hand
/// sides have been evaluated.
pub fn solve(cs: &ConstraintSystem<'_>, cap: usize) -> Result<Solution, SolverError> {
    let mut w = Worklist {
        cs,
        cap,
        sol: Solution::default(),
        reached: HashSet::new(),
        at: HashMap::new(),
        obs: HashMap::new(),
        queue: VecDeque::new(),
    };
    let start = cs.program.main_prototype().start;
    for a in cs.digest.init() {
        w.reach(start, a);
    }
    while let Some(u) = w.queue.pop_front() {
        match u {
            Unknown::Point(n, a) => w.point(n, a)?,
            Unknown::Observable(k, a) => w.observable(k, a)?,
            Unknown::Accesses(_) => {}
        }
    }
    Ok(w.sol)
}

/// `build_system` followed by `solve` with the default cap. The program must
/// already be lowered.
pub fn analyze(program: &Program, digest: &dyn Digest) -> Result<Solution, SolverError> {
    solve(&build_system(program, digest)?, DEFAULT_ITERATION_CAP)
}
