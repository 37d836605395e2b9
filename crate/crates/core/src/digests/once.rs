use std::collections::BTreeSet;

use crate::digest::{Digest, Elem, MhpVerdict, OnceElem};
use crate::oracle::{ConfigRef, DepLabel, LocalTrace, Semantics};
use crate::program::{Action, GlobalId};

/// Once-control variables the thread is inside of (active) and those whose
/// initializer it knows to have finished (completed).
#[derive(Debug, Clone, Copy, Default)]
pub struct Once;

pub(crate) fn once(e: &Elem) -> &OnceElem {
    match e {
        Elem::Once(o) => o,
        other => panic!("not a once digest: {other}"),
    }
}

impl Digest for Once {
    fn name(&self) -> &str {
        "once"
    }

    fn init(&self) -> Vec<Elem> {
        vec![Elem::Once(OnceElem {
            active: BTreeSet::new(),
            completed: BTreeSet::new(),
        })]
    }

    fn new_thread(&self, parent: &Elem, _create: &Action) -> Option<Elem> {
        Some(Elem::Once(OnceElem {
            active: BTreeSet::new(),
            completed: once(parent).completed.clone(),
        }))
    }

    fn step_local(&self, action: &Action, a: &Elem) -> Option<Elem> {
        let x = once(a);
        match *action {
            Action::EndO(o) => {
                let mut x = x.clone();
                x.active.remove(&o);
                x.completed.insert(o);
                Some(Elem::Once(x))
            }
            Action::PosRan(o) => x.completed.contains(&o).then(|| a.clone()),
            Action::NegRan(o) => (!x.completed.contains(&o)).then(|| a.clone()),
            _ => Some(a.clone()),
        }
    }

    fn step_observing(&self, action: &Action, a0: &Elem, a1: &Elem) -> Option<Elem> {
        let Action::StartO(o) = *action else {
            return Some(a0.clone());
        };
        let (x0, x1) = (once(a0), once(a1));
        if x0.active.contains(&o) {
            return None;
        }
        let mut out = x0.clone();
        out.active.insert(o);
        out.completed.extend(x1.completed.iter().copied());
        Some(Elem::Once(out))
    }

    fn mhp(&self, _g: GlobalId, a: &Elem, b: &Elem) -> MhpVerdict {
        let (a, b) = (once(a), once(b));
        let blocks = |x: &OnceElem, y: &OnceElem| {
            x.active
                .iter()
                .any(|o| y.active.contains(o) || y.completed.contains(o))
        };
        MhpVerdict::from_excluded(blocks(a, b) || blocks(b, a))
    }

    fn abstract_trace(&self, sem: &Semantics<'_>, t: &LocalTrace) -> Elem {
        // Completion is only learned along program order, creation, and the
        // once order itself.
        let top = ConfigRef {
            instance: t.ego.clone(),
            index: t.ego_lane().len() as u32,
        };
        let front = t.frontier_by(&top, |l| matches!(l, DepLabel::Create | DepLabel::Once(_)));
        let mut completed = BTreeSet::new();
        for (ev, edge) in t.events() {
            if let Action::EndO(o) = *sem.index.action(edge) {
                if front.get(&ev.instance).is_some_and(|&f| ev.index < f) {
                    completed.insert(o);
                }
            }
        }
        Elem::Once(OnceElem {
            active: t.active_onces(&sem.index).into_iter().collect(),
            completed,
        })
    }
}
