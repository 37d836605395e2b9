use std::collections::BTreeMap;
use std::fmt;

use crate::program::{Action, CfgIndex, CreateId, EdgeId, MutexId, NodeId, OnceId, ProtoId, Program};

/// Concrete thread identity: the creation history from `main`. Each step is a
/// create edge together with how many times the parent had already taken it,
/// so two threads spawned by the same edge in a loop stay distinct.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct InstanceId(pub Vec<(CreateId, u32)>);

impl InstanceId {
    pub fn main() -> Self {
        InstanceId(Vec::new())
    }

    pub fn child(&self, site: CreateId, occurrence: u32) -> Self {
        let mut path = self.0.clone();
        path.push((site, occurrence));
        InstanceId(path)
    }

    pub fn is_main(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for InstanceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("main")?;
        for (c, k) in &self.0 {
            write!(f, "/c{}#{}", c.0, k)?;
        }
        Ok(())
    }
}

/// One thread's swimlane: configuration `i` is the state after the first `i`
/// events.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lane {
    pub proto: ProtoId,
    pub start: NodeId,
    pub events: Vec<EdgeId>,
}

impl Lane {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConfigRef {
    pub instance: InstanceId,
    pub index: u32,
}

/// Event `index` of a lane: the step from configuration `index` to `index + 1`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventRef {
    pub instance: InstanceId,
    pub index: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DepLabel {
    Create,
    Mutex(MutexId),
    Once(OnceId),
    Join,
}

/// A partially ordered execution as seen by one thread (the ego).
///
/// Cross-lane dependencies are stored by target configuration: a
/// configuration has at most one incoming dependency (a thread's first
/// configuration from its creator, the result of an observing event from the
/// observed configuration).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LocalTrace {
    pub lanes: BTreeMap<InstanceId, Lane>,
    pub deps: BTreeMap<ConfigRef, (ConfigRef, DepLabel)>,
    pub ego: InstanceId,
}

impl LocalTrace {
    /// The trace of `main` before it has done anything.
    pub fn initial(program: &Program) -> Self {
        let main = program.main_prototype();
        LocalTrace {
            lanes: BTreeMap::from([(
                InstanceId::main(),
                Lane {
                    proto: program.main,
                    start: main.start,
                    events: Vec::new(),
                },
            )]),
            deps: BTreeMap::new(),
            ego: InstanceId::main(),
        }
    }

    pub fn ego_lane(&self) -> &Lane {
        &self.lanes[&self.ego]
    }

    pub fn event_count(&self) -> usize {
        self.lanes.values().map(Lane::len).sum()
    }

    pub fn lane_node(&self, index: &CfgIndex, instance: &InstanceId) -> NodeId {
        let lane = &self.lanes[instance];
        lane.events
            .last()
            .map_or(lane.start, |&e| index.edge(e).target)
    }

    /// The node the ego thread is currently at.
    pub fn ego_node(&self, index: &CfgIndex) -> NodeId {
        self.lane_node(index, &self.ego)
    }

    /// The ego's most recent event, if any.
    pub fn last_event(&self) -> Option<EventRef> {
        let n = self.ego_lane().len();
        (n > 0).then(|| EventRef {
            instance: self.ego.clone(),
            index: n as u32 - 1,
        })
    }

    pub fn event_edge(&self, e: &EventRef) -> EdgeId {
        self.lanes[&e.instance].events[e.index as usize]
    }

    pub fn contains_event(&self, e: &EventRef) -> bool {
        self.lanes
            .get(&e.instance)
            .is_some_and(|l| (e.index as usize) < l.len())
    }

    pub fn events(&self) -> impl Iterator<Item = (EventRef, EdgeId)> + '_ {
        self.lanes.iter().flat_map(|(id, lane)| {
            lane.events.iter().enumerate().map(move |(i, &e)| {
                (
                    EventRef {
                        instance: id.clone(),
                        index: i as u32,
                    },
                    e,
                )
            })
        })
    }

    /// Mutexes the ego currently holds.
    pub fn held_by_ego(&self, index: &CfgIndex) -> Vec<MutexId> {
        let mut held: Vec<MutexId> = Vec::new();
        for &e in &self.ego_lane().events {
            match *index.action(e) {
                Action::Lock(a) => held.push(a),
                Action::Unlock(a) => {
                    if let Some(p) = held.iter().position(|&m| m == a) {
                        held.remove(p);
                    }
                }
                _ => {}
            }
        }
        held.sort();
        held
    }

    /// Once variables whose `starto` the ego has executed without the matching `endo`.
    pub fn active_onces(&self, index: &CfgIndex) -> Vec<OnceId> {
        let mut active: Vec<OnceId> = Vec::new();
        for &e in &self.ego_lane().events {
            match *index.action(e) {
                Action::StartO(o) => active.push(o),
                Action::EndO(o) => active.retain(|&x| x != o),
                _ => {}
            }
        }
        active.sort();
        active.dedup();
        active
    }

    /// Number of times the ego has taken create edge `site`.
    pub fn creates_at(&self, index: &CfgIndex, site: CreateId) -> u32 {
        self.ego_lane()
            .events
            .iter()
            .filter(|&&e| matches!(*index.action(e), Action::Create { site: s, .. } if s == site))
            .count() as u32
    }

    /// The thread a `join` at `site` would wait for: the one most recently
    /// created by the ego through that edge.
    pub fn joinee(&self, index: &CfgIndex, site: CreateId) -> Option<InstanceId> {
        let k = self.creates_at(index, site);
        (k > 0).then(|| self.ego.child(site, k - 1))
    }

    /// For every lane, the largest configuration index that lies below `from`
    /// in the order generated by program order and all dependencies except
    /// those labelled `skip`.
    pub fn frontier(&self, from: &ConfigRef, skip: Option<DepLabel>) -> BTreeMap<InstanceId, u32> {
        self.frontier_by(from, |l| Some(*l) != skip)
    }

    /// Like [`LocalTrace::frontier`], following only dependencies accepted by `keep`.
    pub fn frontier_by(
        &self,
        from: &ConfigRef,
        keep: impl Fn(&DepLabel) -> bool,
    ) -> BTreeMap<InstanceId, u32> {
        let mut front: BTreeMap<InstanceId, u32> = BTreeMap::new();
        front.insert(from.instance.clone(), from.index);
        let mut changed = true;
        while changed {
            changed = false;
            for (to, (src, label)) in &self.deps {
                if !keep(label) {
                    continue;
                }
                if front.get(&to.instance).is_some_and(|&f| to.index <= f) {
                    match front.get_mut(&src.instance) {
                        Some(f) if *f >= src.index => {}
                        Some(f) => {
                            *f = src.index;
                            changed = true;
                        }
                        None => {
                            front.insert(src.instance.clone(), src.index);
                            changed = true;
                        }
                    }
                }
            }
        }
        front
    }

    /// `a` happens before `b` (both events of this trace), optionally ignoring
    /// the order contributed by one dependency label.
    pub fn happens_before(&self, a: &EventRef, b: &EventRef, skip: Option<DepLabel>) -> bool {
        if a == b {
            return false;
        }
        let front = self.frontier(
            &ConfigRef {
                instance: b.instance.clone(),
                index: b.index + 1,
            },
            skip,
        );
        front.get(&a.instance).is_some_and(|&f| a.index < f)
    }
}
