use std::collections::BTreeSet;

use super::tid::{tid, ThreadId};
use crate::digest::{Digest, Elem, JoinElem, MhpVerdict};
use crate::oracle::{InstanceId, LocalTrace, Semantics};
use crate::program::{Action, CreateId, GlobalId};

/// Must-joined threads: ids of unique threads whose termination the thread
/// has observed, directly or through threads it joined. Carries its own copy
/// of the thread id so that a join can check it observes the right thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Join {
    pub tids: ThreadId,
}

fn join(e: &Elem) -> &JoinElem {
    match e {
        Elem::Join(j) => j,
        other => panic!("not a join digest: {other}"),
    }
}

impl Join {
    fn joined_by(
        &self,
        sem: &Semantics<'_>,
        t: &LocalTrace,
        who: &InstanceId,
        out: &mut BTreeSet<Vec<CreateId>>,
    ) {
        let Some(lane) = t.lanes.get(who) else { return };
        let mut creates: Vec<CreateId> = Vec::new();
        for &e in &lane.events {
            match *sem.index.action(e) {
                Action::Create { site, .. } => creates.push(site),
                Action::Join(c) => {
                    let k = creates.iter().filter(|&&s| s == c).count() as u32;
                    if k == 0 {
                        continue;
                    }
                    let joinee = who.child(c, k - 1);
                    let (path, unique) = self.tids.of_instance(&joinee);
                    if unique {
                        out.insert(path);
                    }
                    self.joined_by(sem, t, &joinee, out);
                }
                _ => {}
            }
        }
    }
}

impl Digest for Join {
    fn name(&self) -> &str {
        "join"
    }

    fn init(&self) -> Vec<Elem> {
        vec![Elem::Join(JoinElem {
            tid: ThreadId::root(),
            joined: BTreeSet::new(),
        })]
    }

    fn new_thread(&self, parent: &Elem, create: &Action) -> Option<Elem> {
        let Action::Create { site, .. } = *create else {
            return None;
        };
        Some(Elem::Join(JoinElem {
            tid: self.tids.child(tid(parent), site),
            joined: BTreeSet::new(),
        }))
    }

    fn step_local(&self, action: &Action, a: &Elem) -> Option<Elem> {
        match *action {
            Action::Create { site, .. } => {
                let mut j = join(a).clone();
                j.tid.created.insert(site);
                Some(Elem::Join(j))
            }
            _ => Some(a.clone()),
        }
    }

    fn step_observing(&self, action: &Action, a0: &Elem, a1: &Elem) -> Option<Elem> {
        let Action::Join(c) = *action else {
            return Some(a0.clone());
        };
        let (j0, j1) = (join(a0), join(a1));
        let expected = self.tids.child(&j0.tid, c);
        if !j0.tid.created.contains(&c) || j1.tid.path != expected.path {
            return None;
        }
        let mut out = j0.clone();
        out.joined.extend(j1.joined.iter().cloned());
        if j1.tid.unique {
            out.joined.insert(j1.tid.path.clone());
        }
        Some(Elem::Join(out))
    }

    fn mhp(&self, _g: GlobalId, a: &Elem, b: &Elem) -> MhpVerdict {
        let (a, b) = (join(a), join(b));
        let joined = |x: &JoinElem, y: &JoinElem| y.tid.unique && x.joined.contains(&y.tid.path);
        MhpVerdict::from_excluded(joined(a, b) || joined(b, a))
    }

    fn abstract_trace(&self, sem: &Semantics<'_>, t: &LocalTrace) -> Elem {
        let mut joined = BTreeSet::new();
        self.joined_by(sem, t, &t.ego, &mut joined);
        Elem::Join(JoinElem {
            tid: self.tids.abstract_tid(sem, t),
            joined,
        })
    }
}
