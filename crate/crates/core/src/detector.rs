//! Pairwise race check over the access accumulators, reports, and ablation.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::digest::{generic_mhp, MhpVerdict, PredicateMode, ProductDigest};
use crate::digests::product_by_names;
use crate::program::{AccessKind, AccessSite, GlobalId, Program, SitePair};
use crate::solver::{build_system, solve, AccessRecord, Solution, DEFAULT_ITERATION_CAP};
use crate::{AnalysisError, ConfigError};

/// Version of the JSON report layout. Bump on any incompatible change.
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SiteInfo {
    pub node: String,
    pub line: u32,
    pub kind: AccessKind,
    pub thread: String,
}

impl SiteInfo {
    fn new(program: &Program, s: &AccessSite) -> Self {
        SiteInfo {
            node: s.node.to_string(),
            line: s.line,
            kind: s.kind,
            thread: program.prototype(s.proto).label.clone(),
        }
    }
}

/// What one component said about the record pair that caused a flag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComponentVerdict {
    pub digest: String,
    pub mode: PredicateMode,
    pub bespoke: MhpVerdict,
    pub generic: MhpVerdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlaggedPair {
    #[serde(skip)]
    pub pair: SitePair,
    pub global: String,
    pub a: SiteInfo,
    pub b: SiteInfo,
    /// Per component, on the first record pair that could not be excluded.
    pub components: Vec<ComponentVerdict>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub flagged: usize,
    pub racy_globals: usize,
    pub access_records: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RaceReport {
    pub version: u32,
    pub digests: Vec<String>,
    pub modes: Vec<PredicateMode>,
    /// Sorted by global, then by the two sites.
    pub races: Vec<FlaggedPair>,
    pub summary: Summary,
}

impl RaceReport {
    pub fn is_race_free(&self) -> bool {
        self.races.is_empty()
    }

    pub fn pairs(&self) -> BTreeSet<SitePair> {
        self.races.iter().map(|r| r.pair).collect()
    }

    /// Pairs as (first line, second line).
    pub fn line_pairs(&self) -> BTreeSet<(u32, u32)> {
        self.races.iter().map(|r| r.pair.lines()).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let modes: BTreeSet<_> = self.modes.iter().collect();
        let mode = match modes.len() {
            1 => format!("{:?}", modes.into_iter().next().unwrap()).to_lowercase(),
            _ => "mixed".to_string(),
        };
        let _ = writeln!(out, "digests: {} ({mode})", self.digests.join("+"));
        for r in &self.races {
            let _ = writeln!(
                out,
                "race on {}: line {} ({}, {}) and line {} ({}, {})",
                r.global, r.a.line, r.a.kind, r.a.thread, r.b.line, r.b.kind, r.b.thread
            );
        }
        if self.races.is_empty() {
            out.push_str("no races\n");
        } else {
            let _ = writeln!(out, "{} race(s) flagged", self.races.len());
        }
        out
    }
}

fn flag_global(
    program: &Program,
    product: &ProductDigest,
    modes: &[PredicateMode],
    g: GlobalId,
    records: &[&AccessRecord],
) -> Result<Vec<FlaggedPair>, ConfigError> {
    let m_g = program.atomicity_mutex(g);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    // Ordered pairs with i <= j: a record may race with itself.
    for (i, x) in records.iter().enumerate() {
        for y in &records[i..] {
            let pair = SitePair::new(x.site, y.site);
            if !pair.has_write() || seen.contains(&pair) {
                continue;
            }
            if product.product_mhp(modes, g, m_g, &x.digest, &y.digest)? == MhpVerdict::False {
                continue;
            }
            seen.insert(pair);
            out.push(FlaggedPair {
                pair,
                global: program.global_name(g).to_string(),
                a: SiteInfo::new(program, &pair.a),
                b: SiteInfo::new(program, &pair.b),
                components: component_verdicts(product, modes, g, m_g, x, y),
            });
        }
    }
    out.sort_by_key(|f| f.pair);
    Ok(out)
}

fn component_verdicts(
    product: &ProductDigest,
    modes: &[PredicateMode],
    g: GlobalId,
    m_g: crate::program::MutexId,
    x: &AccessRecord,
    y: &AccessRecord,
) -> Vec<ComponentVerdict> {
    let (crate::digest::Elem::Tuple(xs), crate::digest::Elem::Tuple(ys)) = (&x.digest, &y.digest)
    else {
        return Vec::new();
    };
    product
        .components()
        .iter()
        .zip(modes)
        .zip(xs.iter().zip(ys))
        .map(|((c, &mode), (a, b))| ComponentVerdict {
            digest: c.name().to_string(),
            mode,
            bespoke: c.mhp(g, a, b),
            generic: generic_mhp(c.as_ref(), m_g, a, b),
        })
        .collect()
}

/// Flags every pair of access records to the same global where one is a
/// write and the product predicate cannot exclude parallelism.
pub fn detect(
    program: &Program,
    solution: &Solution,
    product: &ProductDigest,
    modes: &[PredicateMode],
) -> Result<RaceReport, ConfigError> {
    if modes.len() != product.len() {
        return Err(ConfigError::ArityMismatch {
            left: product.len(),
            right: modes.len(),
        });
    }
    let per_global = solution
        .accesses
        .par_iter()
        .map(|(&g, recs)| {
            let recs: Vec<&AccessRecord> = recs.iter().collect();
            flag_global(program, product, modes, g, &recs)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let races: Vec<FlaggedPair> = per_global.into_iter().flatten().collect();
    let racy_globals = races.iter().map(|r| r.pair.global).collect::<BTreeSet<_>>().len();
    Ok(RaceReport {
        version: REPORT_VERSION,
        digests: product.components().iter().map(|c| c.name().to_string()).collect(),
        modes: modes.to_vec(),
        summary: Summary {
            flagged: races.len(),
            racy_globals,
            access_records: solution.accesses.values().map(|s| s.len()).sum(),
            evaluations: solution.evaluations,
        },
        races,
    })
}

/// Options for an end-to-end run on an unlowered program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalysisConfig {
    pub digests: Vec<String>,
    pub predicate: PredicateMode,
    pub iteration_cap: usize,
}

impl AnalysisConfig {
    pub fn new<S: AsRef<str>>(digests: &[S], predicate: PredicateMode) -> Self {
        AnalysisConfig {
            digests: digests.iter().map(|s| s.as_ref().to_string()).collect(),
            predicate,
            iteration_cap: DEFAULT_ITERATION_CAP,
        }
    }
}

/// Lowers, solves and checks.
pub fn analyze_program(program: &Program, config: &AnalysisConfig) -> Result<RaceReport, AnalysisError> {
    let lowered = program.lower()?;
    let product = product_by_names(&config.digests)?;
    let solution = solve(&build_system(&lowered, &product)?, config.iteration_cap)?;
    let modes = vec![config.predicate; product.len()];
    Ok(detect(&lowered, &solution, &product, &modes)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AblationRow {
    /// Bit i set when component i's predicate is enabled.
    pub mask: u32,
    pub enabled: Vec<String>,
    pub flagged: usize,
    #[serde(skip)]
    pub pairs: BTreeSet<SitePair>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AblationTable {
    pub digests: Vec<String>,
    pub predicate: PredicateMode,
    pub rows: Vec<AblationRow>,
}

/// A violation of ablation monotonicity: enabling one more predicate
/// flagged a pair the smaller set did not.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonotonicityViolation {
    pub smaller: u32,
    pub larger: u32,
}

impl AblationTable {
    pub fn row(&self, mask: u32) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.mask == mask)
    }

    /// Checks each one-step extension of every subset for set inclusion.
    pub fn check_monotone(&self) -> Result<(), MonotonicityViolation> {
        for small in &self.rows {
            for bit in 0..self.digests.len() {
                let larger = small.mask | (1 << bit);
                if larger == small.mask {
                    continue;
                }
                if let Some(big) = self.row(larger) {
                    if !big.pairs.is_subset(&small.pairs) {
                        return Err(MonotonicityViolation {
                            smaller: small.mask,
                            larger,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let width = self.digests.iter().map(|d| d.len()).max().unwrap_or(0).max(7);
        for d in &self.digests {
            let _ = write!(out, "{d:>width$} ");
        }
        out.push_str(" flagged\n");
        for r in &self.rows {
            for i in 0..self.digests.len() {
                let on = if r.mask & (1 << i) != 0 { "x" } else { "-" };
                let _ = write!(out, "{on:>width$} ");
            }
            let _ = writeln!(out, " {:>7}", r.flagged);
        }
        out
    }
}

/// Solves once with every shipped digest refining the analysis, then runs the
/// check for each subset of enabled predicates; the rest answer top.
pub fn ablate(program: &Program, predicate: PredicateMode) -> Result<AblationTable, AnalysisError> {
    let lowered = program.lower()?;
    let product = product_by_names(&crate::digests::DIGEST_NAMES)?;
    let solution = solve(&build_system(&lowered, &product)?, DEFAULT_ITERATION_CAP)?;
    let names: Vec<String> = product.components().iter().map(|c| c.name().to_string()).collect();
    let n = names.len() as u32;
    let rows = (0..1u32 << n)
        .into_par_iter()
        .map(|mask| {
            let modes: Vec<PredicateMode> = (0..n)
                .map(|i| {
                    if mask & (1 << i) != 0 {
                        predicate
                    } else {
                        PredicateMode::Disabled
                    }
                })
                .collect();
            let report = detect(&lowered, &solution, &product, &modes)?;
            Ok(AblationRow {
                mask,
                enabled: (0..n)
                    .filter(|i| mask & (1 << i) != 0)
                    .map(|i| names[i as usize].clone())
                    .collect(),
                flagged: report.races.len(),
                pairs: report.pairs(),
            })
        })
        .collect::<Result<Vec<_>, ConfigError>>()?;
    Ok(AblationTable {
        digests: names,
        predicate,
        rows,
    })
}
