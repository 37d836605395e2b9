//! Digests: finite abstractions of a thread's computational history that
//! refine the constraint system and decide may-happen-in-parallel.

mod laws;
mod product;

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::oracle::{LocalTrace, Semantics};
use crate::program::{Action, CreateId, GlobalId, MutexId, OnceId};

pub use laws::{
    check_access_stability, check_admissibility, check_mhp_soundness, AbstractionCache, Law,
    LawReport, LawViolation,
};
pub use product::{PredicateMode, ProductDigest};

/// Answer of a may-happen-in-parallel query. There is deliberately no `true`:
/// a digest can rule parallelism out but never establish it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum MhpVerdict {
    #[serde(rename = "false")]
    False,
    #[serde(rename = "top")]
    Top,
}

impl MhpVerdict {
    pub fn meet(self, other: MhpVerdict) -> MhpVerdict {
        self.min(other)
    }

    pub fn from_excluded(excluded: bool) -> MhpVerdict {
        if excluded {
            MhpVerdict::False
        } else {
            MhpVerdict::Top
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum ThreadFlag {
    #[serde(rename = "ST_main")]
    StMain,
    #[serde(rename = "MT_main")]
    MtMain,
    #[serde(rename = "MT")]
    Mt,
}

/// History-based thread id: the create edges from `main`, capped in length.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct TidElem {
    pub path: Vec<CreateId>,
    pub unique: bool,
    /// Create edges the thread has taken so far.
    pub created: BTreeSet<CreateId>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct JoinElem {
    pub tid: TidElem,
    /// Thread ids of unique threads that have certainly terminated.
    pub joined: BTreeSet<Vec<CreateId>>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct OnceElem {
    pub active: BTreeSet<OnceId>,
    pub completed: BTreeSet<OnceId>,
}

/// Digest element. Product digests use `Tuple`, one entry per component.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Elem {
    Lockset(BTreeSet<MutexId>),
    Flag(ThreadFlag),
    Tid(TidElem),
    Join(JoinElem),
    Once(OnceElem),
    Tuple(Vec<Elem>),
}

fn write_set<T: fmt::Display>(f: &mut fmt::Formatter<'_>, items: impl Iterator<Item = T>) -> fmt::Result {
    f.write_str("{")?;
    for (i, x) in items.enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{x}")?;
    }
    f.write_str("}")
}

fn write_path(f: &mut fmt::Formatter<'_>, path: &[CreateId]) -> fmt::Result {
    f.write_str("[")?;
    for (i, c) in path.iter().enumerate() {
        if i > 0 {
            f.write_str(".")?;
        }
        write!(f, "c{}", c.0)?;
    }
    f.write_str("]")
}

impl fmt::Display for Elem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Elem::Lockset(s) => write_set(f, s.iter().map(|m| format!("m{}", m.0))),
            Elem::Flag(ThreadFlag::StMain) => f.write_str("ST_main"),
            Elem::Flag(ThreadFlag::MtMain) => f.write_str("MT_main"),
            Elem::Flag(ThreadFlag::Mt) => f.write_str("MT"),
            Elem::Tid(t) => {
                write_path(f, &t.path)?;
                f.write_str(if t.unique { "!" } else { "?" })?;
                write_set(f, t.created.iter().map(|c| format!("c{}", c.0)))
            }
            Elem::Join(j) => {
                write_path(f, &j.tid.path)?;
                f.write_str(if j.tid.unique { "!" } else { "?" })?;
                f.write_str("J")?;
                f.write_str("{")?;
                for (i, p) in j.joined.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write_path(f, p)?;
                }
                f.write_str("}")
            }
            Elem::Once(o) => {
                f.write_str("(")?;
                write_set(f, o.active.iter().map(|x| format!("o{}", x.0)))?;
                f.write_str(",")?;
                write_set(f, o.completed.iter().map(|x| format!("o{}", x.0)))?;
                f.write_str(")")
            }
            Elem::Tuple(items) => {
                f.write_str("<")?;
                for (i, x) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{x}")?;
                }
                f.write_str(">")
            }
        }
    }
}

/// A digest: an abstraction of thread histories with deterministic transfer
/// functions (`None` is the empty set of successors) and an MHP predicate.
pub trait Digest: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    /// Digests of `main` at program start.
    fn init(&self) -> Vec<Elem>;

    /// Digest of a thread created by a thread with digest `parent` through
    /// `create`.
    fn new_thread(&self, parent: &Elem, create: &Action) -> Option<Elem>;

    /// Non-observing actions (local, observable, creating on the creator's side).
    fn step_local(&self, action: &Action, a: &Elem) -> Option<Elem>;

    /// Observing actions; `a1` is the digest of the observed history.
    fn step_observing(&self, action: &Action, a0: &Elem, a1: &Elem) -> Option<Elem>;

    /// The digest's own predicate.
    fn mhp(&self, g: GlobalId, a: &Elem, b: &Elem) -> MhpVerdict;

    /// The abstraction map on concrete traces, for law checking only.
    fn abstract_trace(&self, sem: &Semantics<'_>, t: &LocalTrace) -> Elem;
}

/// Predicate derived from the transfer function of `lock(m_g)`: two accesses
/// are excluded when neither digest could have observed the other's release.
pub fn generic_mhp(d: &dyn Digest, m_g: MutexId, a: &Elem, b: &Elem) -> MhpVerdict {
    let lock = Action::Lock(m_g);
    MhpVerdict::from_excluded(
        d.step_observing(&lock, a, b).is_none() || d.step_observing(&lock, b, a).is_none(),
    )
}
