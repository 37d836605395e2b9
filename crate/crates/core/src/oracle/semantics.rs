use std::collections::HashSet;

use super::trace::{ConfigRef, DepLabel, Lane, LocalTrace};
use crate::program::{Action, CfgIndex, EdgeId, Program};

/// Executable concrete semantics of one (lowered) program.
#[derive(Debug, Clone)]
pub struct Semantics<'p> {
    pub program: &'p Program,
    pub index: CfgIndex,
}

impl<'p> Semantics<'p> {
    pub fn new(program: &'p Program) -> Self {
        Semantics {
            program,
            index: CfgIndex::new(program),
        }
    }

    pub fn initial(&self) -> LocalTrace {
        LocalTrace::initial(self.program)
    }

    /// Prolongs `t` with a non-observing action of its ego. `None` when the
    /// ego is elsewhere or a guard fails.
    pub fn trace_step_local(&self, edge: EdgeId, t: &LocalTrace) -> Option<LocalTrace> {
        let e = self.index.edge(edge);
        if e.action.is_observing() || t.ego_node(&self.index) != e.source {
            return None;
        }
        let ok = match e.action {
            Action::PosRan(o) => self.has_event(t, |a| a == Action::EndO(o)),
            Action::NegRan(o) => !self.has_event(t, |a| a == Action::EndO(o)),
            Action::Unlock(a) => t.held_by_ego(&self.index).contains(&a),
            Action::EndO(o) => t.active_onces(&self.index).contains(&o),
            Action::Init(a) => !self.has_event(t, |x| x.mutex() == Some(a)),
            Action::InitO(o) => !self.has_event(t, |x| x.once() == Some(o)),
            _ => true,
        };
        if !ok {
            return None;
        }
        let mut out = t.clone();
        out.lanes.get_mut(&t.ego).expect("ego lane").events.push(edge);
        Some(out)
    }

    /// Prolongs `t0` with an observing action whose partner is the last event
    /// of `t1`, merging the two histories. `None` when they are incompatible.
    pub fn trace_step_observing(
        &self,
        edge: EdgeId,
        t0: &LocalTrace,
        t1: &LocalTrace,
    ) -> Option<LocalTrace> {
        let e = self.index.edge(edge);
        if t0.ego_node(&self.index) != e.source {
            return None;
        }
        let partner = *self.index.action(t1.ego_lane().events.last().copied()?);
        let label = match (e.action, partner) {
            (Action::Lock(a), Action::Unlock(b) | Action::Init(b)) if a == b => {
                if t0.held_by_ego(&self.index).contains(&a) {
                    return None;
                }
                DepLabel::Mutex(a)
            }
            (Action::StartO(o), Action::EndO(p) | Action::InitO(p)) if o == p => {
                if t0.active_onces(&self.index).contains(&o) {
                    return None;
                }
                DepLabel::Once(o)
            }
            (Action::Join(c), Action::ThreadExit) => {
                if t0.joinee(&self.index, c).as_ref() != Some(&t1.ego) {
                    return None;
                }
                DepLabel::Join
            }
            _ => return None,
        };

        let mut merged = t0.clone();
        for (id, lane) in &t1.lanes {
            match merged.lanes.get_mut(id) {
                None => {
                    merged.lanes.insert(id.clone(), lane.clone());
                }
                Some(mine) => {
                    if mine.proto != lane.proto || !prefix_related(mine, lane) {
                        return None;
                    }
                    if *id == t0.ego && lane.len() > mine.len() {
                        return None;
                    }
                    if lane.len() > mine.len() {
                        *mine = lane.clone();
                    }
                }
            }
        }
        // A release is acquired at most once; both sides may have used the same one.
        let mut acquired: HashSet<&(ConfigRef, DepLabel)> =
            t0.deps.values().filter(|d| d.1 != DepLabel::Create && d.1 != DepLabel::Join).collect();
        for (to, from) in &t1.deps {
            match merged.deps.get(to) {
                Some(existing) if existing != from => return None,
                Some(_) => {}
                None => {
                    if from.1 != DepLabel::Create && from.1 != DepLabel::Join && !acquired.insert(from)
                    {
                        return None;
                    }
                    merged.deps.insert(to.clone(), from.clone());
                }
            }
        }

        let release = ConfigRef {
            instance: t1.ego.clone(),
            index: t1.ego_lane().len() as u32,
        };
        if label != DepLabel::Join {
            if merged
                .deps
                .values()
                .any(|(from, l)| *from == release && *l == label)
            {
                return None;
            }
            // Every earlier event on this resource must lie in the observed past.
            let on_resource = |a: Action| match label {
                DepLabel::Mutex(m) => a.mutex() == Some(m),
                DepLabel::Once(o) => {
                    matches!(a, Action::InitO(x) | Action::StartO(x) | Action::EndO(x) if x == o)
                }
                _ => false,
            };
            for (ev, edge) in t0.events() {
                if on_resource(*self.index.action(edge)) && !t1.contains_event(&ev) {
                    return None;
                }
            }
        }

        let lane = merged.lanes.get_mut(&t0.ego).expect("ego lane");
        lane.events.push(edge);
        let target = ConfigRef {
            instance: t0.ego.clone(),
            index: lane.len() as u32,
        };
        merged.deps.insert(target, (release, label));
        Some(merged)
    }

    /// The local trace of the thread created by the ego of `t` through the
    /// create edge `edge`.
    pub fn spawn(&self, edge: EdgeId, t: &LocalTrace) -> Option<LocalTrace> {
        let e = self.index.edge(edge);
        let Action::Create { proto, site } = e.action else {
            return None;
        };
        if t.ego_node(&self.index) != e.source {
            return None;
        }
        let child = t.ego.child(site, t.creates_at(&self.index, site));
        let mut out = t.clone();
        let lane = out.lanes.get_mut(&t.ego).expect("ego lane");
        lane.events.push(edge);
        let from = ConfigRef {
            instance: t.ego.clone(),
            index: lane.len() as u32,
        };
        out.lanes.insert(
            child.clone(),
            Lane {
                proto,
                start: self.program.prototype(proto).start,
                events: Vec::new(),
            },
        );
        out.deps.insert(
            ConfigRef {
                instance: child.clone(),
                index: 0,
            },
            (from, DepLabel::Create),
        );
        out.ego = child;
        Some(out)
    }

    fn has_event(&self, t: &LocalTrace, pred: impl Fn(Action) -> bool) -> bool {
        t.lanes
            .values()
            .flat_map(|l| l.events.iter())
            .any(|&e| pred(*self.index.action(e)))
    }

    /// Structural well-formedness: acyclic, with the ego's last configuration
    /// as the unique maximum, and per-resource chains that alternate
    /// correctly. Returns a description of the first violation.
    pub fn check_trace(&self, t: &LocalTrace) -> Result<(), String> {
        let top = ConfigRef {
            instance: t.ego.clone(),
            index: t.ego_lane().len() as u32,
        };
        let front = t.frontier(&top, None);
        for (id, lane) in &t.lanes {
            if front.get(id).copied() != Some(lane.len() as u32) {
                return Err(format!("lane {id} is not below the ego's last configuration"));
            }
        }
        for (to, (from, _)) in &t.deps {
            if to.instance == from.instance && from.index >= to.index {
                return Err(format!("dependency runs backwards within lane {}", to.instance));
            }
            let back = t.frontier(from, None);
            if back.get(&to.instance).is_some_and(|&f| f >= to.index) {
                return Err(format!("cycle through dependency into {}", to.instance));
            }
        }
        for m in 0..self.program.mutexes.len() {
            let m = crate::program::MutexId(m as u32);
            let mut successors = std::collections::BTreeMap::new();
            for (from, label) in t.deps.values() {
                if *label == DepLabel::Mutex(m) && successors.insert(from.clone(), ()).is_some() {
                    return Err(format!("release of {} observed twice", self.program.mutex_name(m)));
                }
            }
        }
        Ok(())
    }
}

fn prefix_related(a: &Lane, b: &Lane) -> bool {
    let n = a.len().min(b.len());
    a.start == b.start && a.events[..n] == b.events[..n]
}
