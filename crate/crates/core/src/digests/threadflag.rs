use crate::digest::{Digest, Elem, MhpVerdict, ThreadFlag as Flag};
use crate::oracle::{LocalTrace, Semantics};
use crate::program::{Action, GlobalId};

/// Whether the program is still single-threaded, and whether the thread is `main`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ThreadFlag;

pub(crate) fn flag(e: &Elem) -> Flag {
    match e {
        Elem::Flag(f) => *f,
        other => panic!("not a thread flag: {other}"),
    }
}

impl Digest for ThreadFlag {
    fn name(&self) -> &str {
        "threadflag"
    }

    fn init(&self) -> Vec<Elem> {
        vec![Elem::Flag(Flag::StMain)]
    }

    fn new_thread(&self, _parent: &Elem, _create: &Action) -> Option<Elem> {
        Some(Elem::Flag(Flag::Mt))
    }

    fn step_local(&self, action: &Action, a: &Elem) -> Option<Elem> {
        Some(match (action, flag(a)) {
            (Action::Create { .. }, Flag::Mt) => Elem::Flag(Flag::Mt),
            (Action::Create { .. }, _) => Elem::Flag(Flag::MtMain),
            _ => a.clone(),
        })
    }

    fn step_observing(&self, action: &Action, a0: &Elem, a1: &Elem) -> Option<Elem> {
        // While single-threaded, main can only observe itself.
        if matches!(action, Action::Lock(_)) && flag(a0) == Flag::StMain && flag(a1) != Flag::StMain
        {
            return None;
        }
        Some(a0.clone())
    }

    fn mhp(&self, _g: GlobalId, a: &Elem, b: &Elem) -> MhpVerdict {
        let (a, b) = (flag(a), flag(b));
        MhpVerdict::from_excluded(
            a == Flag::StMain || b == Flag::StMain || (a == Flag::MtMain && b == Flag::MtMain),
        )
    }

    fn abstract_trace(&self, sem: &Semantics<'_>, t: &LocalTrace) -> Elem {
        let created = t
            .ego_lane()
            .events
            .iter()
            .any(|&e| matches!(sem.index.action(e), Action::Create { .. }));
        Elem::Flag(match (t.ego.is_main(), created) {
            (true, false) => Flag::StMain,
            (true, true) => Flag::MtMain,
            (false, _) => Flag::Mt,
        })
    }
}
