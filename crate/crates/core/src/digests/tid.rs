use std::collections::BTreeSet;

use crate::digest::{Digest, Elem, MhpVerdict, TidElem};
use crate::oracle::{InstanceId, LocalTrace, Semantics};
use crate::program::{Action, CreateId, GlobalId};

pub const DEFAULT_TID_CAP: usize = 8;

/// History-based thread ids. A thread is unique when every create edge on its
/// path was taken for the first time by its parent and no edge repeats;
/// paths longer than `cap` collapse onto their prefix and lose uniqueness.
#[derive(Debug, Clone, Copy)]
pub struct ThreadId {
    pub cap: usize,
}

impl Default for ThreadId {
    fn default() -> Self {
        ThreadId {
            cap: DEFAULT_TID_CAP,
        }
    }
}

pub(crate) fn tid(e: &Elem) -> &TidElem {
    match e {
        Elem::Tid(t) => t,
        Elem::Join(j) => &j.tid,
        other => panic!("not a thread id: {other}"),
    }
}

impl ThreadId {
    pub(crate) fn root() -> TidElem {
        TidElem {
            path: Vec::new(),
            unique: true,
            created: BTreeSet::new(),
        }
    }

    pub(crate) fn child(&self, parent: &TidElem, site: CreateId) -> TidElem {
        let (path, unique) = if parent.path.len() < self.cap {
            let mut path = parent.path.clone();
            path.push(site);
            let unique =
                parent.unique && !parent.created.contains(&site) && !parent.path.contains(&site);
            (path, unique)
        } else {
            (parent.path.clone(), false)
        };
        TidElem {
            path,
            unique,
            created: BTreeSet::new(),
        }
    }

    /// The thread id the transfer functions assign to a concrete instance.
    pub(crate) fn of_instance(&self, id: &InstanceId) -> (Vec<CreateId>, bool) {
        let sites: Vec<CreateId> = id.0.iter().map(|(c, _)| *c).collect();
        let first_each = id.0.iter().all(|(_, k)| *k == 0);
        let distinct = sites.iter().collect::<BTreeSet<_>>().len() == sites.len();
        let unique = first_each && distinct && sites.len() <= self.cap;
        (sites.into_iter().take(self.cap).collect(), unique)
    }

    pub(crate) fn abstract_tid(&self, sem: &Semantics<'_>, t: &LocalTrace) -> TidElem {
        let (path, unique) = self.of_instance(&t.ego);
        let created = t
            .ego_lane()
            .events
            .iter()
            .filter_map(|&e| match *sem.index.action(e) {
                Action::Create { site, .. } => Some(site),
                _ => None,
            })
            .collect();
        TidElem {
            path,
            unique,
            created,
        }
    }
}

/// `a` may already be running alongside `b`. False only when `b` is a unique
/// descendant of the unique thread `a` through a create edge `a` has not taken.
pub(crate) fn may_run(a: &TidElem, b: &TidElem) -> bool {
    if !(a.unique && b.unique) || b.path.len() <= a.path.len() || !b.path.starts_with(&a.path) {
        return true;
    }
    a.created.contains(&b.path[a.path.len()])
}

pub(crate) fn tid_mhp(a: &TidElem, b: &TidElem) -> MhpVerdict {
    let same = a.path == b.path && a.unique && b.unique;
    MhpVerdict::from_excluded(same || !may_run(a, b) || !may_run(b, a))
}

impl Digest for ThreadId {
    fn name(&self) -> &str {
        "tid"
    }

    fn init(&self) -> Vec<Elem> {
        vec![Elem::Tid(Self::root())]
    }

    fn new_thread(&self, parent: &Elem, create: &Action) -> Option<Elem> {
        let Action::Create { site, .. } = *create else {
            return None;
        };
        Some(Elem::Tid(self.child(tid(parent), site)))
    }

    fn step_local(&self, action: &Action, a: &Elem) -> Option<Elem> {
        match *action {
            Action::Create { site, .. } => {
                let mut t = tid(a).clone();
                t.created.insert(site);
                Some(Elem::Tid(t))
            }
            _ => Some(a.clone()),
        }
    }

    fn step_observing(&self, _action: &Action, a0: &Elem, _a1: &Elem) -> Option<Elem> {
        Some(a0.clone())
    }

    fn mhp(&self, _g: GlobalId, a: &Elem, b: &Elem) -> MhpVerdict {
        tid_mhp(tid(a), tid(b))
    }

    fn abstract_trace(&self, sem: &Semantics<'_>, t: &LocalTrace) -> Elem {
        Elem::Tid(self.abstract_tid(sem, t))
    }
}
