use std::collections::BTreeSet;

use crate::digest::{Digest, Elem, MhpVerdict};
use crate::oracle::{LocalTrace, Semantics};
use crate::program::{Action, GlobalId, MutexId};

/// The set of mutexes the thread holds.
#[derive(Debug, Clone, Copy, Default)]
pub struct Lockset;

pub(crate) fn set(e: &Elem) -> &BTreeSet<MutexId> {
    match e {
        Elem::Lockset(s) => s,
        other => panic!("not a lockset: {other}"),
    }
}

impl Digest for Lockset {
    fn name(&self) -> &str {
        "lockset"
    }

    fn init(&self) -> Vec<Elem> {
        vec![Elem::Lockset(BTreeSet::new())]
    }

    fn new_thread(&self, _parent: &Elem, _create: &Action) -> Option<Elem> {
        Some(Elem::Lockset(BTreeSet::new()))
    }

    fn step_local(&self, action: &Action, a: &Elem) -> Option<Elem> {
        let s = set(a);
        match *action {
            Action::Unlock(m) => {
                let mut s = s.clone();
                s.remove(&m).then_some(Elem::Lockset(s))
            }
            _ => Some(a.clone()),
        }
    }

    fn step_observing(&self, action: &Action, a0: &Elem, _a1: &Elem) -> Option<Elem> {
        let s = set(a0);
        match *action {
            Action::Lock(m) => {
                let mut s = s.clone();
                s.insert(m).then_some(Elem::Lockset(s))
            }
            _ => Some(a0.clone()),
        }
    }

    fn mhp(&self, _g: GlobalId, a: &Elem, b: &Elem) -> MhpVerdict {
        MhpVerdict::from_excluded(!set(a).is_disjoint(set(b)))
    }

    fn abstract_trace(&self, sem: &Semantics<'_>, t: &LocalTrace) -> Elem {
        Elem::Lockset(t.held_by_ego(&sem.index).into_iter().collect())
    }
}
