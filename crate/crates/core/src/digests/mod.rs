//! The shipped digests and their registry.

mod join;
mod lockset;
pub mod mutants;
mod once;
mod threadflag;
mod tid;

use std::sync::Arc;

use crate::digest::{Digest, ProductDigest};
use crate::ConfigError;

pub use join::Join;
pub use lockset::Lockset;
pub use mutants::{Mutant, MutantKind};
pub use once::Once;
pub use threadflag::ThreadFlag;
pub use tid::{ThreadId, DEFAULT_TID_CAP};

/// Registry names in canonical order.
pub const DIGEST_NAMES: [&str; 5] = ["lockset", "threadflag", "tid", "join", "once"];

pub fn digest_by_name(name: &str) -> Result<Arc<dyn Digest>, ConfigError> {
    Ok(match name {
        "lockset" => Arc::new(Lockset),
        "threadflag" => Arc::new(ThreadFlag),
        "tid" => Arc::new(ThreadId::default()),
        "join" => Arc::new(Join::default()),
        "once" => Arc::new(Once),
        other => return Err(ConfigError::UnknownDigest(other.to_string())),
    })
}

/// Product of the named digests, deduplicated and in canonical order.
pub fn product_by_names<S: AsRef<str>>(names: &[S]) -> Result<ProductDigest, ConfigError> {
    let mut picked: Vec<&str> = Vec::new();
    for n in names {
        let n = n.as_ref().trim();
        let canonical = DIGEST_NAMES
            .iter()
            .find(|&&c| c == n)
            .ok_or_else(|| ConfigError::UnknownDigest(n.to_string()))?;
        if !picked.contains(canonical) {
            picked.push(canonical);
        }
    }
    if picked.contains(&"join") && !picked.contains(&"tid") {
        return Err(ConfigError::JoinWithoutTid);
    }
    picked.sort_by_key(|n| DIGEST_NAMES.iter().position(|c| c == n));
    let components = picked
        .into_iter()
        .map(digest_by_name)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ProductDigest::new(components))
}
