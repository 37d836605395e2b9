use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use super::explore::Trace;
use super::semantics::Semantics;
use super::trace::{ConfigRef, DepLabel, LocalTrace};
use crate::program::{access_sites, AccessSite, Action, EdgeId, NodeId, SitePair};

/// A pair of accesses that occur unordered in some trace once the atomicity
/// mutex is disregarded.
#[derive(Debug, Clone)]
pub struct RacePair {
    pub pair: SitePair,
    pub witness: Trace,
}

/// `t_a`, `t_b` sit before the two access sequences; `t_l` ends in the
/// release of the atomicity mutex both of them observe.
#[derive(Debug, Clone)]
pub struct Compatibility {
    pub pair: SitePair,
    pub t_a: Trace,
    pub t_b: Trace,
    pub t_l: Trace,
}

fn site_map(sem: &Semantics<'_>) -> HashMap<NodeId, AccessSite> {
    access_sites(sem.program)
        .into_iter()
        .map(|s| (s.node, s))
        .collect()
}

/// All racy site pairs (with at least one write) found in `traces`.
///
/// Accesses to `g` are totally ordered through `m_g`, so whichever of two
/// racing accesses comes second sees the first in its past: it suffices to
/// inspect traces whose ego has just performed an access.
pub fn find_racy_pairs(sem: &Semantics<'_>, traces: &[Trace]) -> Vec<RacePair> {
    let sites = site_map(sem);
    let found: Vec<(SitePair, usize)> = traces
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, t)| racy_in(sem, &sites, t).into_iter().map(move |p| (p, i)))
        .collect();
    let mut best: BTreeMap<SitePair, usize> = BTreeMap::new();
    for (p, i) in found {
        let slot = best.entry(p).or_insert(i);
        *slot = (*slot).min(i);
    }
    best.into_iter()
        .map(|(pair, i)| RacePair {
            pair,
            witness: traces[i].clone(),
        })
        .collect()
}

fn racy_in(
    sem: &Semantics<'_>,
    sites: &HashMap<NodeId, AccessSite>,
    t: &LocalTrace,
) -> Vec<SitePair> {
    let Some(last) = t.last_event() else {
        return Vec::new();
    };
    let last_edge = sem.index.edge(t.event_edge(&last));
    let Some((g, kind)) = last_edge.action.access() else {
        return Vec::new();
    };
    let m_g = sem.program.atomicity_mutex(g);
    let front = t.frontier(
        &ConfigRef {
            instance: last.instance.clone(),
            index: last.index + 1,
        },
        Some(DepLabel::Mutex(m_g)),
    );
    let mine = sites[&last_edge.source];
    let mut out = Vec::new();
    for (ev, edge) in t.events() {
        if ev == last {
            continue;
        }
        let e = sem.index.edge(edge);
        let Some((h, other_kind)) = e.action.access() else {
            continue;
        };
        if h != g || !(kind.is_write() || other_kind.is_write()) {
            continue;
        }
        let ordered = front.get(&ev.instance).is_some_and(|&f| ev.index < f);
        if !ordered {
            out.push(SitePair::new(mine, sites[&e.source]));
        }
    }
    out
}

/// The three edges `lock(m_g); access; unlock(m_g)` around an access edge.
#[derive(Debug, Clone, Copy)]
struct Sequence {
    lock: EdgeId,
    access: EdgeId,
    unlock: EdgeId,
    entry: NodeId,
}

fn sequences(sem: &Semantics<'_>, site: &AccessSite) -> Vec<Sequence> {
    let idx = &sem.index;
    let mut out = Vec::new();
    for &access in idx.outgoing(site.node) {
        if idx.action(access).access().is_none() {
            continue;
        }
        for &lock in idx.incoming(site.node) {
            if !matches!(idx.action(lock), Action::Lock(_)) {
                continue;
            }
            for &unlock in idx.outgoing(idx.edge(access).target) {
                if matches!(idx.action(unlock), Action::Unlock(_)) {
                    out.push(Sequence {
                        lock,
                        access,
                        unlock,
                        entry: idx.edge(lock).source,
                    });
                }
            }
        }
    }
    out
}

fn run(sem: &Semantics<'_>, seq: &Sequence, t: &LocalTrace, tl: &LocalTrace) -> Option<LocalTrace> {
    let t = sem.trace_step_observing(seq.lock, t, tl)?;
    let t = sem.trace_step_local(seq.access, &t)?;
    sem.trace_step_local(seq.unlock, &t)
}

/// Searches for traces `t_a`, `t_b`, `t_l` such that both orders of the two
/// access sequences can be executed on top of `t_l`.
pub fn bidirectionally_compatible(
    sem: &Semantics<'_>,
    traces: &[Trace],
    a: &AccessSite,
    b: &AccessSite,
) -> Option<Compatibility> {
    if a.global != b.global {
        return None;
    }
    let m_g = sem.program.atomicity_mutex(a.global);
    let releases: Vec<&Trace> = traces
        .iter()
        .filter(|t| {
            t.ego_lane().events.last().is_some_and(|&e| {
                matches!(*sem.index.action(e), Action::Unlock(m) | Action::Init(m) if m == m_g)
            })
        })
        .collect();
    let at = |node: NodeId| -> Vec<&Trace> {
        traces
            .iter()
            .filter(|t| t.ego_node(&sem.index) == node)
            .collect()
    };
    for sa in sequences(sem, a) {
        for sb in sequences(sem, b) {
            let (tas, tbs) = (at(sa.entry), at(sb.entry));
            let hit = tas.par_iter().find_map_first(|ta| {
                for tl in &releases {
                    let Some(x) = run(sem, &sa, ta, tl) else { continue };
                    for tb in &tbs {
                        if run(sem, &sb, tb, &x).is_none() {
                            continue;
                        }
                        let Some(y) = run(sem, &sb, tb, tl) else { continue };
                        if run(sem, &sa, ta, &y).is_some() {
                            return Some(((*ta).clone(), (*tb).clone(), (*tl).clone()));
                        }
                    }
                }
                None
            });
            if let Some((t_a, t_b, t_l)) = hit {
                return Some(Compatibility {
                    pair: SitePair::new(*a, *b),
                    t_a,
                    t_b,
                    t_l,
                });
            }
        }
    }
    None
}

/// Every site pair with at least one write that is bidirectionally compatible.
pub fn compatible_pairs(sem: &Semantics<'_>, traces: &[Trace]) -> Vec<Compatibility> {
    let sites = access_sites(sem.program);
    let mut out = Vec::new();
    for (i, a) in sites.iter().enumerate() {
        for b in &sites[i..] {
            if a.global == b.global && (a.kind.is_write() || b.kind.is_write()) {
                if let Some(c) = bidirectionally_compatible(sem, traces, a, b) {
                    out.push(c);
                }
            }
        }
    }
    out.sort_by_key(|c| c.pair);
    out
}
