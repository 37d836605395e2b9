use std::sync::Arc;

use serde::Serialize;

use super::{generic_mhp, Digest, Elem, MhpVerdict};
use crate::oracle::{LocalTrace, Semantics};
use crate::program::{Action, GlobalId, MutexId};
use crate::ConfigError;

/// How one component takes part in the race check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PredicateMode {
    Bespoke,
    Generic,
    /// Always answers top; the component still refines the analysis.
    Disabled,
}

/// Component-wise product. Elements are `Elem::Tuple`s; a step is defined
/// only if it is defined in every component.
#[derive(Debug, Clone)]
pub struct ProductDigest {
    components: Vec<Arc<dyn Digest>>,
    name: String,
}

impl ProductDigest {
    pub fn new(components: Vec<Arc<dyn Digest>>) -> Self {
        let name = components
            .iter()
            .map(|c| c.name().to_string())
            .collect::<Vec<_>>()
            .join("+");
        ProductDigest { components, name }
    }

    pub fn components(&self) -> &[Arc<dyn Digest>] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    fn parts<'a>(&self, e: &'a Elem) -> &'a [Elem] {
        match e {
            Elem::Tuple(items) if items.len() == self.components.len() => items,
            _ => panic!("element {e} does not belong to digest {}", self.name),
        }
    }

    /// Meet of the per-component verdicts under the given modes.
    pub fn product_mhp(
        &self,
        modes: &[PredicateMode],
        g: GlobalId,
        m_g: MutexId,
        a: &Elem,
        b: &Elem,
    ) -> Result<MhpVerdict, ConfigError> {
        let (Elem::Tuple(xs), Elem::Tuple(ys)) = (a, b) else {
            return Err(ConfigError::ArityMismatch { left: 1, right: 1 });
        };
        for n in [xs.len(), ys.len(), modes.len()] {
            if n != self.components.len() {
                return Err(ConfigError::ArityMismatch {
                    left: self.components.len(),
                    right: n,
                });
            }
        }
        let mut verdict = MhpVerdict::Top;
        for (((c, mode), x), y) in self.components.iter().zip(modes).zip(xs).zip(ys) {
            let v = match mode {
                PredicateMode::Bespoke => c.mhp(g, x, y),
                PredicateMode::Generic => generic_mhp(c.as_ref(), m_g, x, y),
                PredicateMode::Disabled => MhpVerdict::Top,
            };
            verdict = verdict.meet(v);
            if verdict == MhpVerdict::False {
                break;
            }
        }
        Ok(verdict)
    }
}

impl Digest for ProductDigest {
    fn name(&self) -> &str {
        &self.name
    }

    fn init(&self) -> Vec<Elem> {
        let mut out: Vec<Vec<Elem>> = vec![Vec::new()];
        for c in &self.components {
            let choices = c.init();
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    choices.iter().map(move |x| {
                        let mut v = prefix.clone();
                        v.push(x.clone());
                        v
                    })
                })
                .collect();
        }
        out.into_iter().map(Elem::Tuple).collect()
    }

    fn new_thread(&self, parent: &Elem, create: &Action) -> Option<Elem> {
        self.components
            .iter()
            .zip(self.parts(parent))
            .map(|(c, x)| c.new_thread(x, create))
            .collect::<Option<Vec<_>>>()
            .map(Elem::Tuple)
    }

    fn step_local(&self, action: &Action, a: &Elem) -> Option<Elem> {
        self.components
            .iter()
            .zip(self.parts(a))
            .map(|(c, x)| c.step_local(action, x))
            .collect::<Option<Vec<_>>>()
            .map(Elem::Tuple)
    }

    fn step_observing(&self, action: &Action, a0: &Elem, a1: &Elem) -> Option<Elem> {
        self.components
            .iter()
            .zip(self.parts(a0))
            .zip(self.parts(a1))
            .map(|((c, x), y)| c.step_observing(action, x, y))
            .collect::<Option<Vec<_>>>()
            .map(Elem::Tuple)
    }

    fn mhp(&self, g: GlobalId, a: &Elem, b: &Elem) -> MhpVerdict {
        self.components
            .iter()
            .zip(self.parts(a))
            .zip(self.parts(b))
            .fold(MhpVerdict::Top, |v, ((c, x), y)| v.meet(c.mhp(g, x, y)))
    }

    fn abstract_trace(&self, sem: &Semantics<'_>, t: &LocalTrace) -> Elem {
        Elem::Tuple(
            self.components
                .iter()
                .map(|c| c.abstract_trace(sem, t))
                .collect(),
        )
    }
}
