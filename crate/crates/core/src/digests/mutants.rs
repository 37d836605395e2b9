//! Deliberately broken digests. Each one must be rejected by the law or
//! soundness suites; they exist to show the suites have teeth.

use super::lockset::set;
use super::threadflag::flag;
use super::{Join, Lockset, Once, ThreadFlag, ThreadId};
use crate::digest::{Digest, Elem, MhpVerdict, ThreadFlag as Flag};
use crate::oracle::{LocalTrace, Semantics};
use crate::program::{Action, GlobalId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MutantKind {
    /// Locking is impossible when the two locksets intersect.
    LocksetDisjointLock,
    /// Two non-main threads never run in parallel.
    ThreadFlagMtExcluded,
    /// Every created thread is considered unique.
    TidAlwaysUnique,
    /// Joined threads count as finished even when not unique.
    JoinIgnoresUnique,
    /// Two accesses that both follow completion of the same once are excluded.
    OnceCompletedExcluded,
}

impl MutantKind {
    pub const ALL: [MutantKind; 5] = [
        MutantKind::LocksetDisjointLock,
        MutantKind::ThreadFlagMtExcluded,
        MutantKind::TidAlwaysUnique,
        MutantKind::JoinIgnoresUnique,
        MutantKind::OnceCompletedExcluded,
    ];

    /// Registry name of the digest this mutates.
    pub fn target(self) -> &'static str {
        match self {
            MutantKind::LocksetDisjointLock => "lockset",
            MutantKind::ThreadFlagMtExcluded => "threadflag",
            MutantKind::TidAlwaysUnique => "tid",
            MutantKind::JoinIgnoresUnique => "join",
            MutantKind::OnceCompletedExcluded => "once",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Mutant {
    pub kind: MutantKind,
}

impl Mutant {
    pub fn new(kind: MutantKind) -> Self {
        Mutant { kind }
    }

    fn base(&self) -> &'static dyn Digest {
        match self.kind {
            MutantKind::LocksetDisjointLock => &Lockset,
            MutantKind::ThreadFlagMtExcluded => &ThreadFlag,
            MutantKind::TidAlwaysUnique => &TID,
            MutantKind::JoinIgnoresUnique => &JOIN,
            MutantKind::OnceCompletedExcluded => &Once,
        }
    }
}

static TID: ThreadId = ThreadId {
    cap: super::tid::DEFAULT_TID_CAP,
};
static JOIN: Join = Join {
    tids: ThreadId {
        cap: super::tid::DEFAULT_TID_CAP,
    },
};

impl Digest for Mutant {
    fn name(&self) -> &str {
        match self.kind {
            MutantKind::LocksetDisjointLock => "lockset~disjoint-lock",
            MutantKind::ThreadFlagMtExcluded => "threadflag~mt-excluded",
            MutantKind::TidAlwaysUnique => "tid~always-unique",
            MutantKind::JoinIgnoresUnique => "join~ignores-unique",
            MutantKind::OnceCompletedExcluded => "once~completed-excluded",
        }
    }

    fn init(&self) -> Vec<Elem> {
        self.base().init()
    }

    fn new_thread(&self, parent: &Elem, create: &Action) -> Option<Elem> {
        let mut child = self.base().new_thread(parent, create)?;
        if self.kind == MutantKind::TidAlwaysUnique {
            if let Elem::Tid(t) = &mut child {
                t.unique = true;
            }
        }
        Some(child)
    }

    fn step_local(&self, action: &Action, a: &Elem) -> Option<Elem> {
        self.base().step_local(action, a)
    }

    fn step_observing(&self, action: &Action, a0: &Elem, a1: &Elem) -> Option<Elem> {
        match (self.kind, action) {
            (MutantKind::LocksetDisjointLock, Action::Lock(_))
                if !set(a0).is_disjoint(set(a1)) =>
            {
                None
            }
            (MutantKind::JoinIgnoresUnique, Action::Join(_)) => {
                let mut out = self.base().step_observing(action, a0, a1)?;
                if let (Elem::Join(j), Elem::Join(j1)) = (&mut out, a1) {
                    j.joined.insert(j1.tid.path.clone());
                }
                Some(out)
            }
            _ => self.base().step_observing(action, a0, a1),
        }
    }

    fn mhp(&self, g: GlobalId, a: &Elem, b: &Elem) -> MhpVerdict {
        match self.kind {
            MutantKind::ThreadFlagMtExcluded if flag(a) == Flag::Mt && flag(b) == Flag::Mt => {
                MhpVerdict::False
            }
            MutantKind::JoinIgnoresUnique => match (a, b) {
                (Elem::Join(x), Elem::Join(y)) => MhpVerdict::from_excluded(
                    x.joined.contains(&y.tid.path) || y.joined.contains(&x.tid.path),
                ),
                _ => MhpVerdict::Top,
            },
            MutantKind::OnceCompletedExcluded => match (a, b) {
                (Elem::Once(x), Elem::Once(y))
                    if !x.completed.is_disjoint(&y.completed) =>
                {
                    MhpVerdict::False
                }
                _ => self.base().mhp(g, a, b),
            },
            _ => self.base().mhp(g, a, b),
        }
    }

    fn abstract_trace(&self, sem: &Semantics<'_>, t: &LocalTrace) -> Elem {
        self.base().abstract_trace(sem, t)
    }
}
