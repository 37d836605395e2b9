use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use serde::Serialize;

use super::{generic_mhp, Digest, Elem, MhpVerdict, PredicateMode};
use crate::oracle::{Compatibility, Exploration, LocalTrace, Semantics, Step, Trace};
use crate::program::{Action, EdgeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Law {
    /// The initial trace abstracts to an initial digest.
    Init,
    /// Each concrete step is matched by the abstract transfer function.
    Simulation,
    /// Each spawned thread's trace abstracts to the digest for new threads.
    NewThread,
    /// `lock(m_g); access; unlock(m_g)` leaves the digest unchanged.
    AccessStability,
    /// Accesses that can execute in both orders are never excluded.
    MhpSoundness,
}

#[derive(Debug, Clone, Serialize)]
pub struct LawViolation {
    pub law: Law,
    pub edge: Option<u32>,
    pub detail: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct LawReport {
    pub digest: String,
    pub checked: usize,
    pub violations: Vec<LawViolation>,
}

impl LawReport {
    fn new(d: &dyn Digest) -> Self {
        LawReport {
            digest: d.name().to_string(),
            ..Default::default()
        }
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    fn fail(&mut self, law: Law, edge: Option<EdgeId>, detail: String) {
        self.violations.push(LawViolation {
            law,
            edge: edge.map(|e| e.0),
            detail,
        });
    }
}

/// Memoized abstraction map for one digest. Traces from one exploration are
/// interned, so pointer identity is trace identity.
pub struct AbstractionCache<'d> {
    digest: &'d dyn Digest,
    memo: HashMap<*const LocalTrace, Elem>,
}

impl<'d> AbstractionCache<'d> {
    pub fn new(digest: &'d dyn Digest) -> Self {
        AbstractionCache {
            digest,
            memo: HashMap::new(),
        }
    }

    pub fn get(&mut self, sem: &Semantics<'_>, t: &Trace) -> Elem {
        self.memo
            .entry(Arc::as_ptr(t))
            .or_insert_with(|| self.digest.abstract_trace(sem, t))
            .clone()
    }
}

fn show(x: &Option<Elem>) -> String {
    x.as_ref().map_or("none".to_string(), Elem::to_string)
}

/// Checks the init, simulation and new-thread laws on every concrete step the
/// oracle observed. Determinism holds by construction (transfer functions
/// return at most one digest).
pub fn check_admissibility(d: &dyn Digest, sem: &Semantics<'_>, ex: &Exploration) -> LawReport {
    let mut report = LawReport::new(d);
    let mut alpha = AbstractionCache::new(d);
    let init = Arc::new(sem.initial());
    let a0 = d.abstract_trace(sem, &init);
    report.checked += 1;
    if !d.init().contains(&a0) {
        report.fail(Law::Init, None, format!("initial trace abstracts to {a0}"));
    }
    for step in &ex.steps {
        report.checked += 1;
        match step {
            Step::Local {
                edge,
                before,
                after,
            } => {
                let action = sem.index.action(*edge);
                let got = d.step_local(action, &alpha.get(sem, before));
                let want = alpha.get(sem, after);
                if got.as_ref() != Some(&want) {
                    report.fail(
                        Law::Simulation,
                        Some(*edge),
                        format!(
                            "{}: from {} expected {want}, transfer gives {}",
                            sem.program.render_action(action),
                            alpha.get(sem, before),
                            show(&got)
                        ),
                    );
                }
            }
            Step::Observing {
                edge,
                before,
                observed,
                after,
            } => {
                let action = sem.index.action(*edge);
                let (x, y) = (alpha.get(sem, before), alpha.get(sem, observed));
                let got = d.step_observing(action, &x, &y);
                let want = alpha.get(sem, after);
                if got.as_ref() != Some(&want) {
                    report.fail(
                        Law::Simulation,
                        Some(*edge),
                        format!(
                            "{}: from {x} observing {y} expected {want}, transfer gives {}",
                            sem.program.render_action(action),
                            show(&got)
                        ),
                    );
                }
            }
            Step::Spawn {
                edge,
                parent,
                child,
            } => {
                let action = sem.index.action(*edge);
                let p = alpha.get(sem, parent);
                let got = d.new_thread(&p, action);
                let want = alpha.get(sem, child);
                if got.as_ref() != Some(&want) {
                    report.fail(
                        Law::NewThread,
                        Some(*edge),
                        format!(
                            "child of {p} expected {want}, new-thread gives {}",
                            show(&got)
                        ),
                    );
                }
            }
        }
    }
    report
}

/// For every access sequence and every pair of realized digests (one before
/// the sequence, one for a release of its atomicity mutex), the sequence must
/// return the starting digest or nothing.
pub fn check_access_stability(d: &dyn Digest, sem: &Semantics<'_>, ex: &Exploration) -> LawReport {
    let mut report = LawReport::new(d);
    let mut alpha = AbstractionCache::new(d);
    let idx = &sem.index;
    for access in idx.edges() {
        if access.edge.action.access().is_none() {
            continue;
        }
        let v1 = access.edge.source;
        for &lock in idx.incoming(v1) {
            let Action::Lock(m_g) = *idx.action(lock) else { continue };
            let v0 = idx.edge(lock).source;
            let starts: BTreeSet<Elem> = ex
                .traces
                .iter()
                .filter(|t| t.ego_node(idx) == v0)
                .map(|t| alpha.get(sem, t))
                .collect();
            let releases: BTreeSet<Elem> = ex
                .traces
                .iter()
                .filter(|t| {
                    t.ego_lane().events.last().is_some_and(|&e| {
                        matches!(*idx.action(e), Action::Unlock(m) | Action::Init(m) if m == m_g)
                    })
                })
                .map(|t| alpha.get(sem, t))
                .collect();
            for &unlock in idx.outgoing(access.edge.target) {
                if !matches!(idx.action(unlock), Action::Unlock(_)) {
                    continue;
                }
                for a0 in &starts {
                    for a1 in &releases {
                        report.checked += 1;
                        let out = d
                            .step_observing(idx.action(lock), a0, a1)
                            .and_then(|x| d.step_local(&access.edge.action, &x))
                            .and_then(|x| d.step_local(idx.action(unlock), &x));
                        if out.as_ref().is_some_and(|x| x != a0) {
                            report.fail(
                                Law::AccessStability,
                                Some(access.id),
                                format!(
                                    "{} from {a0} observing {a1} ends in {}",
                                    sem.program.render_action(&access.edge.action),
                                    show(&out)
                                ),
                            );
                        }
                    }
                }
            }
        }
    }
    report
}

/// Every pair the oracle found bidirectionally compatible must be answered
/// top on the digests of its witness traces.
pub fn check_mhp_soundness(
    d: &dyn Digest,
    mode: PredicateMode,
    sem: &Semantics<'_>,
    witnesses: &[Compatibility],
) -> LawReport {
    let mut report = LawReport::new(d);
    let mut alpha = AbstractionCache::new(d);
    for w in witnesses {
        report.checked += 1;
        let (a, b) = (alpha.get(sem, &w.t_a), alpha.get(sem, &w.t_b));
        let g = w.pair.global;
        let verdict = match mode {
            PredicateMode::Bespoke => d.mhp(g, &a, &b),
            PredicateMode::Generic => generic_mhp(d, sem.program.atomicity_mutex(g), &a, &b),
            PredicateMode::Disabled => MhpVerdict::Top,
        };
        if verdict == MhpVerdict::False {
            report.fail(
                Law::MhpSoundness,
                None,
                format!(
                    "lines {} and {} can run in parallel but {a} vs {b} is excluded",
                    w.pair.a.line, w.pair.b.line
                ),
            );
        }
    }
    report
}
