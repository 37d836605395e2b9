use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Arc;

use super::semantics::Semantics;
use super::trace::{InstanceId, LocalTrace};
use crate::program::{Action, EdgeId};

pub type Trace = Arc<LocalTrace>;

/// Exploration limits: total events per execution and live thread instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Bounds {
    pub depth: usize,
    pub width: usize,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            depth: 40,
            width: 4,
        }
    }
}

/// One concrete transition, kept for checking digest laws.
#[derive(Debug, Clone)]
pub enum Step {
    Local {
        edge: EdgeId,
        before: Trace,
        after: Trace,
    },
    Observing {
        edge: EdgeId,
        before: Trace,
        observed: Trace,
        after: Trace,
    },
    Spawn {
        edge: EdgeId,
        parent: Trace,
        child: Trace,
    },
}

/// Everything the bounded enumeration found.
#[derive(Debug, Clone, Default)]
pub struct Exploration {
    /// Every local trace of every thread in every reachable state, in
    /// discovery order.
    pub traces: Vec<Trace>,
    pub steps: Vec<Step>,
    pub states: usize,
    /// Some execution was cut off by a bound.
    pub truncated: bool,
    /// A transition the scheduler considered enabled was rejected by the
    /// trace semantics. Always zero for a consistent semantics.
    pub rejected: usize,
}

#[derive(Clone, PartialEq, Eq, Hash)]
enum Resource {
    Uninit,
    Free(usize),
    Held,
}

#[derive(Clone)]
struct Thread {
    trace: usize,
    exited: bool,
}

#[derive(Clone)]
struct State {
    threads: BTreeMap<InstanceId, Thread>,
    mutexes: Vec<Resource>,
    onces: Vec<Resource>,
    events: usize,
}

type StepKey = (u8, EdgeId, usize, usize, usize);

struct Explorer<'a, 'p> {
    sem: &'a Semantics<'p>,
    bounds: Bounds,
    interned: HashMap<Arc<LocalTrace>, usize>,
    by_id: Vec<Trace>,
    visited: HashSet<Vec<usize>>,
    steps_seen: HashSet<StepKey>,
    step_keys: Vec<StepKey>,
    out: Exploration,
}

/// Exhaustively enumerates executions of a lowered program within `bounds`.
///
/// Global states are identified by the interned local traces of their
/// threads and resources, so interleavings that only reorder independent
/// events collapse into one state.
pub fn enumerate_traces(sem: &Semantics<'_>, bounds: Bounds) -> Exploration {
    let mut ex = Explorer {
        sem,
        bounds,
        interned: HashMap::new(),
        by_id: Vec::new(),
        visited: HashSet::new(),
        steps_seen: HashSet::new(),
        step_keys: Vec::new(),
        out: Exploration::default(),
    };
    let init = ex.intern(sem.initial());
    let state = State {
        threads: BTreeMap::from([(
            InstanceId::main(),
            Thread {
                trace: init,
                exited: false,
            },
        )]),
        mutexes: vec![Resource::Uninit; sem.program.mutexes.len()],
        onces: vec![Resource::Uninit; sem.program.onces.len()],
        events: 0,
    };
    ex.visit(state);
    ex.out.traces = ex.by_id;
    ex.out
}

impl Explorer<'_, '_> {
    fn intern(&mut self, t: LocalTrace) -> usize {
        if let Some(&id) = self.interned.get(&t) {
            return id;
        }
        let id = self.by_id.len();
        let arc = Arc::new(t);
        self.by_id.push(arc.clone());
        self.interned.insert(arc, id);
        id
    }

    fn key(&self, s: &State) -> Vec<usize> {
        let mut key = Vec::with_capacity(s.threads.len() * 2 + s.mutexes.len() + s.onces.len());
        for th in s.threads.values() {
            key.push(th.trace);
            key.push(th.exited as usize);
        }
        for r in s.mutexes.iter().chain(&s.onces) {
            key.push(match r {
                Resource::Uninit => usize::MAX,
                Resource::Held => usize::MAX - 1,
                Resource::Free(t) => *t,
            });
        }
        key
    }

    fn record(&mut self, kind: u8, edge: EdgeId, a: usize, b: Option<usize>, c: usize) {
        let key = (kind, edge, a, b.unwrap_or(usize::MAX), c);
        if !self.steps_seen.insert(key) {
            return;
        }
        self.step_keys.push(key);
        let (a, b, c) = (&self.by_id[a], b.map(|b| &self.by_id[b]), &self.by_id[c]);
        let step = match kind {
            0 => Step::Local {
                edge,
                before: a.clone(),
                after: c.clone(),
            },
            1 => Step::Observing {
                edge,
                before: a.clone(),
                observed: b.expect("observed trace").clone(),
                after: c.clone(),
            },
            _ => Step::Spawn {
                edge,
                parent: a.clone(),
                child: c.clone(),
            },
        };
        self.out.steps.push(step);
    }

    fn visit(&mut self, state: State) {
        if !self.visited.insert(self.key(&state)) {
            return;
        }
        self.out.states += 1;
        let mark = (self.by_id.len(), self.out.steps.len(), self.out.truncated);
        let successors = self.successors(&state);
        if state.events >= self.bounds.depth {
            // Undo what the cut-off successors added; only their existence matters.
            self.rollback(mark);
            self.out.truncated |= !successors.is_empty();
            return;
        }
        for next in successors {
            self.visit(next);
        }
    }

    fn successors(&mut self, s: &State) -> Vec<State> {
        let sem = self.sem;
        let mut out = Vec::new();
        let ids: Vec<InstanceId> = s.threads.keys().cloned().collect();
        for id in ids {
            let th = &s.threads[&id];
            if th.exited {
                continue;
            }
            let tid0 = th.trace;
            let trace = self.by_id[tid0].clone();
            let node = trace.ego_node(&sem.index);
            for &edge in sem.index.outgoing(node) {
                let action = *sem.index.action(edge);
                match action {
                    Action::Lock(_) | Action::StartO(_) | Action::Join(_) => {
                        let observed = match action {
                            Action::Lock(a) => match &s.mutexes[a.index()] {
                                Resource::Free(t) => Some(*t),
                                _ => None,
                            },
                            Action::StartO(o) => match &s.onces[o.index()] {
                                Resource::Free(t) => Some(*t),
                                _ => None,
                            },
                            Action::Join(c) => trace
                                .joinee(&sem.index, c)
                                .and_then(|j| s.threads.get(&j))
                                .filter(|j| j.exited)
                                .map(|j| j.trace),
                            _ => unreachable!(),
                        };
                        let Some(observed) = observed else { continue };
                        // Relocking a held mutex or re-entering an active once deadlocks.
                        let stuck = match action {
                            Action::Lock(a) => trace.held_by_ego(&sem.index).contains(&a),
                            Action::StartO(o) => trace.active_onces(&sem.index).contains(&o),
                            _ => false,
                        };
                        if stuck {
                            continue;
                        }
                        let Some(after) =
                            sem.trace_step_observing(edge, &trace, &self.by_id[observed].clone())
                        else {
                            self.out.rejected += 1;
                            continue;
                        };
                        let after = self.intern(after);
                        self.record(1, edge, tid0, Some(observed), after);
                        let mut next = s.clone();
                        match action {
                            Action::Lock(a) => next.mutexes[a.index()] = Resource::Held,
                            Action::StartO(o) => next.onces[o.index()] = Resource::Held,
                            _ => {}
                        }
                        self.advance(&mut next, &id, after);
                        out.push(next);
                    }
                    Action::Create { .. } => {
                        if s.threads.len() >= self.bounds.width {
                            self.out.truncated = true;
                            continue;
                        }
                        let (Some(child), Some(after)) =
                            (sem.spawn(edge, &trace), sem.trace_step_local(edge, &trace))
                        else {
                            self.out.rejected += 1;
                            continue;
                        };
                        let child_ego = child.ego.clone();
                        let child = self.intern(child);
                        let after = self.intern(after);
                        self.record(2, edge, tid0, None, child);
                        self.record(0, edge, tid0, None, after);
                        let mut next = s.clone();
                        next.threads.insert(
                            child_ego,
                            Thread {
                                trace: child,
                                exited: false,
                            },
                        );
                        self.advance(&mut next, &id, after);
                        out.push(next);
                    }
                    _ => {
                        let enabled = match action {
                            Action::Init(a) => s.mutexes[a.index()] == Resource::Uninit,
                            Action::InitO(o) => s.onces[o.index()] == Resource::Uninit,
                            _ => true,
                        };
                        if !enabled {
                            continue;
                        }
                        // Guards failing here (unlock without holding, a false
                        // `ran` test) are ordinary blocking, not rejections.
                        let Some(after) = sem.trace_step_local(edge, &trace) else {
                            continue;
                        };
                        let tid = self.intern(after);
                        self.record(0, edge, tid0, None, tid);
                        let mut next = s.clone();
                        match action {
                            Action::Init(a) | Action::Unlock(a) => {
                                next.mutexes[a.index()] = Resource::Free(tid)
                            }
                            Action::InitO(o) | Action::EndO(o) => {
                                next.onces[o.index()] = Resource::Free(tid)
                            }
                            _ => {}
                        }
                        if action == Action::ThreadExit {
                            next.threads.get_mut(&id).expect("thread").exited = true;
                        }
                        self.advance(&mut next, &id, tid);
                        out.push(next);
                    }
                }
            }
        }
        out
    }

    fn rollback(&mut self, (traces, steps, truncated): (usize, usize, bool)) {
        for t in self.by_id.drain(traces..) {
            self.interned.remove(&t);
        }
        self.out.steps.truncate(steps);
        for key in self.step_keys.drain(steps..) {
            self.steps_seen.remove(&key);
        }
        self.out.truncated = truncated;
    }

    fn advance(&self, s: &mut State, id: &InstanceId, trace: usize) {
        s.threads.get_mut(id).expect("thread").trace = trace;
        s.events += 1;
    }
}
