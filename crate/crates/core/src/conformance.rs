//! Corpus loading and the suites that tie analyzer, digests and oracle
//! together: soundness, digest laws, the race equivalence, and mutants.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{ablate, detect};
use crate::digest::{
    check_access_stability, check_admissibility, check_mhp_soundness, Digest, LawReport,
    PredicateMode,
};
use crate::digests::{digest_by_name, product_by_names, Mutant, MutantKind, DIGEST_NAMES};
use crate::oracle::{
    compatible_pairs, enumerate_traces, find_racy_pairs, Bounds, Compatibility, Exploration,
    RacePair, Semantics,
};
use crate::program::{access_sites, parse_program, Action, NodeId, Program};
use crate::solver::{analyze, AccessRecord};
use crate::ConformanceError;

pub const SUITE_VERSION: u32 = 1;

/// Where a case's expectations come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    /// Worked example with hand-checked expectations.
    Example,
    /// Constructed case; expectations computed by the oracle and frozen.
    Derived,
    /// Expectations are immediate from the program text.
    Trivial,
}

/// Contents of `expected.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    pub description: String,
    pub provenance: Provenance,
    #[serde(default)]
    pub bounds: Option<Bounds>,
    /// Racy site pairs by source line, smaller line first.
    pub racy: Vec<(u32, u32)>,
    /// Digest sets (bespoke predicates) that prove the program race free.
    #[serde(default)]
    pub race_free_with: Vec<Vec<String>>,
    /// Digest sets that still flag at least one pair.
    #[serde(default)]
    pub flagged_with: Vec<Vec<String>>,
}

#[derive(Debug, Clone)]
pub struct CorpusCase {
    pub name: String,
    pub dir: PathBuf,
    pub source: String,
    pub program: Program,
    pub lowered: Program,
    pub expected: Expectation,
}

impl CorpusCase {
    pub fn bounds(&self) -> Bounds {
        self.expected.bounds.unwrap_or_default()
    }

    pub fn load(dir: &Path) -> Result<CorpusCase, ConformanceError> {
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let source = fs::read_to_string(dir.join("program.rlp"))?;
        let program_err = |source| ConformanceError::Program {
            case: name.clone(),
            source,
        };
        let program = parse_program(&source).map_err(program_err)?;
        let lowered = program.lower().map_err(program_err)?;
        let raw = fs::read_to_string(dir.join("expected.json"))?;
        let expected = serde_json::from_str(&raw).map_err(|source| ConformanceError::Expectation {
            case: name.clone(),
            source,
        })?;
        Ok(CorpusCase {
            name,
            dir: dir.to_path_buf(),
            source,
            program,
            lowered,
            expected,
        })
    }
}

/// Every subdirectory holding a `program.rlp`, sorted by name.
pub fn load_corpus(dir: &Path) -> Result<Vec<CorpusCase>, ConformanceError> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("program.rlp").is_file())
        .collect();
    dirs.sort();
    dirs.iter().map(|d| CorpusCase::load(d)).collect()
}

/// Ground truth for one case, computed once and shared by the suites.
pub struct OracleRun {
    pub exploration: Exploration,
    pub racy: Vec<RacePair>,
    pub compatible: Vec<Compatibility>,
}

pub struct PreparedCase {
    pub case: CorpusCase,
    pub oracle: OracleRun,
}

impl PreparedCase {
    pub fn semantics(&self) -> Semantics<'_> {
        Semantics::new(&self.case.lowered)
    }

    pub fn racy_lines(&self) -> BTreeSet<(u32, u32)> {
        self.oracle.racy.iter().map(|r| r.pair.lines()).collect()
    }

    pub fn compatible_lines(&self) -> BTreeSet<(u32, u32)> {
        self.oracle.compatible.iter().map(|c| c.pair.lines()).collect()
    }
}

/// Runs the oracle on a case; truncated enumerations are inconclusive.
pub fn prepare(case: CorpusCase) -> Result<PreparedCase, ConformanceError> {
    let sem = Semantics::new(&case.lowered);
    let bounds = case.bounds();
    let exploration = enumerate_traces(&sem, bounds);
    if exploration.truncated {
        return Err(ConformanceError::InconclusiveBounds {
            case: case.name.clone(),
            depth: bounds.depth,
            width: bounds.width,
        });
    }
    let racy = find_racy_pairs(&sem, &exploration.traces);
    let compatible = compatible_pairs(&sem, &exploration.traces);
    drop(sem);
    Ok(PreparedCase {
        oracle: OracleRun {
            exploration,
            racy,
            compatible,
        },
        case,
    })
}

pub fn prepare_all(cases: Vec<CorpusCase>) -> Result<Vec<PreparedCase>, ConformanceError> {
    cases.into_par_iter().map(prepare).collect()
}

/// The registry names selected by `mask`, in canonical order.
pub fn subset_names(mask: u32) -> Vec<String> {
    DIGEST_NAMES
        .iter()
        .enumerate()
        .filter(|(i, _)| mask & (1 << i) != 0)
        .map(|(_, n)| n.to_string())
        .collect()
}

/// Subsets usable as a product on their own (join needs tid).
pub fn valid_subsets() -> Vec<u32> {
    (0..1u32 << DIGEST_NAMES.len())
        .filter(|&m| product_by_names(&subset_names(m)).is_ok())
        .collect()
}

type Lines = Vec<(u32, u32)>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EquivalenceEntry {
    pub case: String,
    pub racy: Lines,
    pub compatible: Lines,
    pub equal: bool,
    /// Whether the oracle matches the frozen expectation.
    pub expected: bool,
}

/// Racy pairs and bidirectionally compatible write pairs must coincide.
pub fn run_equivalence_suite(cases: &[PreparedCase]) -> Vec<EquivalenceEntry> {
    cases
        .iter()
        .map(|c| {
            let racy = c.racy_lines();
            let compatible = c.compatible_lines();
            let frozen: BTreeSet<(u32, u32)> = c.case.expected.racy.iter().copied().collect();
            EquivalenceEntry {
                case: c.case.name.clone(),
                equal: racy == compatible,
                expected: racy == frozen,
                racy: racy.into_iter().collect(),
                compatible: compatible.into_iter().collect(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SubsetResult {
    pub digests: Vec<String>,
    pub mode: PredicateMode,
    pub flagged: Lines,
    /// Oracle-racy pairs the analysis failed to flag.
    pub missed: Lines,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AblationResult {
    pub mode: PredicateMode,
    /// Flag count per mask of enabled predicates.
    pub counts: Vec<(u32, usize)>,
    pub missed: Vec<(u32, Lines)>,
    pub monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SoundnessEntry {
    pub case: String,
    pub products: Vec<SubsetResult>,
    pub ablations: Vec<AblationResult>,
    /// Oracle traces whose digest is missing from the solution, and oracle
    /// accesses missing from the accumulators.
    pub agreement_misses: usize,
    /// Expectations from `race_free_with` / `flagged_with` that did not hold.
    pub unmet: Vec<String>,
}

impl SoundnessEntry {
    pub fn passed(&self) -> bool {
        self.agreement_misses == 0
            && self.unmet.is_empty()
            && self.products.iter().all(|r| r.missed.is_empty())
            && self.ablations.iter().all(|a| a.monotone && a.missed.is_empty())
    }

    /// (subset, missed pair) of the first false negative.
    pub fn first_miss(&self) -> Option<(String, (u32, u32))> {
        self.products
            .iter()
            .find_map(|r| r.missed.first().map(|&p| (r.digests.join("+"), p)))
    }
}

fn soundness_of(c: &PreparedCase) -> Result<SoundnessEntry, ConformanceError> {
    let name = &c.case.name;
    let solver_err = |source| ConformanceError::Solver {
        case: name.clone(),
        source,
    };
    let racy = c.racy_lines();
    let missed = |flagged: &BTreeSet<(u32, u32)>| -> Lines {
        racy.difference(flagged).copied().collect()
    };
    let lowered = &c.case.lowered;
    let mut products = Vec::new();
    for mask in valid_subsets() {
        let names = subset_names(mask);
        let product = product_by_names(&names).expect("valid subset");
        let solution = analyze(lowered, &product).map_err(solver_err)?;
        for mode in [PredicateMode::Bespoke, PredicateMode::Generic] {
            let report = detect(lowered, &solution, &product, &vec![mode; product.len()])
                .expect("arity matches");
            let flagged = report.line_pairs();
            products.push(SubsetResult {
                digests: names.clone(),
                mode,
                missed: missed(&flagged),
                flagged: flagged.into_iter().collect(),
            });
        }
    }
    let mut ablations = Vec::new();
    for mode in [PredicateMode::Bespoke, PredicateMode::Generic] {
        let table = ablate(&c.case.program, mode).map_err(|e| match e {
            crate::AnalysisError::Solver(source) => solver_err(source),
            crate::AnalysisError::Program(source) => ConformanceError::Program {
                case: name.clone(),
                source,
            },
            crate::AnalysisError::Config(_) => unreachable!("shipped digests form a valid product"),
        })?;
        ablations.push(AblationResult {
            mode,
            counts: table.rows.iter().map(|r| (r.mask, r.flagged)).collect(),
            missed: table
                .rows
                .iter()
                .map(|r| (r.mask, missed(&r.pairs.iter().map(|p| p.lines()).collect())))
                .filter(|(_, m)| !m.is_empty())
                .collect(),
            monotone: table.check_monotone().is_ok(),
        });
    }
    let mut unmet = Vec::new();
    let flagged_under = |names: &Vec<String>| {
        products
            .iter()
            .find(|r| r.mode == PredicateMode::Bespoke && &r.digests == names)
            .map(|r| !r.flagged.is_empty())
    };
    for names in &c.case.expected.race_free_with {
        let mut names = names.clone();
        names.sort_by_key(|n| DIGEST_NAMES.iter().position(|d| d == n));
        if flagged_under(&names) != Some(false) {
            unmet.push(format!("race free with {}", names.join("+")));
        }
    }
    for names in &c.case.expected.flagged_with {
        let mut names = names.clone();
        names.sort_by_key(|n| DIGEST_NAMES.iter().position(|d| d == n));
        if flagged_under(&names) != Some(true) {
            unmet.push(format!("flagged with {}", names.join("+")));
        }
    }
    Ok(SoundnessEntry {
        case: name.clone(),
        products,
        ablations,
        agreement_misses: agreement_misses(c).map_err(solver_err)?,
        unmet,
    })
}

/// Counts oracle facts the full-product solution does not account for.
pub fn agreement_misses(c: &PreparedCase) -> Result<usize, crate::SolverError> {
    let sem = c.semantics();
    let product = product_by_names(&DIGEST_NAMES).expect("shipped digests");
    let solution = analyze(&c.case.lowered, &product)?;
    let sites: HashMap<NodeId, _> = access_sites(&c.case.lowered)
        .into_iter()
        .map(|s| (s.node, s))
        .collect();
    let mut misses = 0;
    for t in &c.oracle.exploration.traces {
        let a = product.abstract_trace(&sem, t);
        let u = t.ego_node(&sem.index);
        if !solution.points.get(&u).is_some_and(|s| s.contains(&a)) {
            misses += 1;
        }
        // An access is recorded when its atomicity section closes.
        let events = &t.ego_lane().events;
        if let [.., access, unlock] = events[..] {
            let (Some((g, _)), Action::Unlock(m)) =
                (sem.index.action(access).access(), *sem.index.action(unlock))
            else {
                continue;
            };
            if c.case.lowered.atomicity_mutex(g) != m {
                continue;
            }
            let record = AccessRecord {
                site: sites[&sem.index.edge(access).source],
                digest: a,
            };
            if !solution.records(g).any(|r| *r == record) {
                misses += 1;
            }
        }
    }
    Ok(misses)
}

/// Flagged pairs must include every oracle-racy pair, for every digest
/// subset (as a product and as an ablation) and both predicate modes.
pub fn run_soundness_suite(cases: &[PreparedCase]) -> Result<Vec<SoundnessEntry>, ConformanceError> {
    cases.par_iter().map(soundness_of).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct LawEntry {
    pub case: String,
    pub admissibility: LawReport,
    pub stability: LawReport,
    pub mhp: LawReport,
}

impl LawEntry {
    pub fn passed(&self) -> bool {
        self.admissibility.passed() && self.stability.passed() && self.mhp.passed()
    }
}

fn laws_of(d: &dyn Digest, c: &PreparedCase) -> LawEntry {
    let sem = c.semantics();
    let ex = &c.oracle.exploration;
    LawEntry {
        case: c.case.name.clone(),
        admissibility: check_admissibility(d, &sem, ex),
        stability: check_access_stability(d, &sem, ex),
        mhp: check_mhp_soundness(d, PredicateMode::Bespoke, &sem, &c.oracle.compatible),
    }
}

/// Admissibility, access stability and predicate soundness of each digest on
/// each case.
pub fn run_law_suite(cases: &[PreparedCase], digests: &[Arc<dyn Digest>]) -> Vec<LawEntry> {
    digests
        .iter()
        .flat_map(|d| cases.iter().map(move |c| (d, c)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(d, c)| laws_of(d.as_ref(), c))
        .collect()
}

pub fn shipped_digests() -> Vec<Arc<dyn Digest>> {
    DIGEST_NAMES
        .iter()
        .map(|n| digest_by_name(n).expect("registered"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MutantOutcome {
    pub mutant: MutantKind,
    pub name: String,
    /// Cases on which some law failed.
    pub killed_by: Vec<String>,
}

impl MutantOutcome {
    pub fn killed(&self) -> bool {
        !self.killed_by.is_empty()
    }
}

/// Each registered mutant must fail some law on some case.
pub fn run_mutation_suite(cases: &[PreparedCase]) -> Vec<MutantOutcome> {
    MutantKind::ALL
        .par_iter()
        .map(|&kind| {
            let m = Mutant::new(kind);
            let killed_by = cases
                .iter()
                .filter(|c| !laws_of(&m, c).passed())
                .map(|c| c.case.name.clone())
                .collect();
            MutantOutcome {
                mutant: kind,
                name: m.name().to_string(),
                killed_by,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct LawSummary {
    pub digest: String,
    pub case: String,
    pub checked: usize,
    pub violations: usize,
}

/// Everything the suites established, in deterministic order.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub version: u32,
    pub cases: Vec<String>,
    pub equivalence: Vec<EquivalenceEntry>,
    pub soundness: Vec<SoundnessEntry>,
    pub laws: Vec<LawSummary>,
    pub mutants: Vec<MutantOutcome>,
    pub passed: bool,
}

impl SuiteReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One line per failed check.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        for e in &self.equivalence {
            if !e.equal {
                out.push(format!("{}: racy {:?} but compatible {:?}", e.case, e.racy, e.compatible));
            }
            if !e.expected {
                out.push(format!("{}: oracle racy pairs {:?} differ from expectation", e.case, e.racy));
            }
        }
        for s in &self.soundness {
            if let Some((subset, pair)) = s.first_miss() {
                out.push(format!("{}: {subset} misses racy pair {pair:?}", s.case));
            }
            for a in &s.ablations {
                if !a.monotone {
                    out.push(format!("{}: ablation ({:?}) not monotone", s.case, a.mode));
                }
                if let Some((mask, m)) = a.missed.first() {
                    out.push(format!("{}: ablation mask {mask:#07b} misses {m:?}", s.case));
                }
            }
            if s.agreement_misses > 0 {
                out.push(format!("{}: {} oracle facts missing from the solution", s.case, s.agreement_misses));
            }
            for u in &s.unmet {
                out.push(format!("{}: expected {u}", s.case));
            }
        }
        for l in &self.laws {
            if l.violations > 0 {
                out.push(format!("{}: digest {} violates {} law instance(s)", l.case, l.digest, l.violations));
            }
        }
        for m in &self.mutants {
            if !m.killed() {
                out.push(format!("mutant {} survives", m.name));
            }
        }
        out
    }
}

/// Loads, prepares and runs every suite over a corpus directory.
pub fn run_full_suite(dir: &Path) -> Result<SuiteReport, ConformanceError> {
    let cases = prepare_all(load_corpus(dir)?)?;
    run_suites(&cases)
}

pub fn run_suites(cases: &[PreparedCase]) -> Result<SuiteReport, ConformanceError> {
    let equivalence = run_equivalence_suite(cases);
    let soundness = run_soundness_suite(cases)?;
    let laws: Vec<LawSummary> = run_law_suite(cases, &shipped_digests())
        .into_iter()
        .map(|e| LawSummary {
            digest: e.admissibility.digest.clone(),
            case: e.case.clone(),
            checked: e.admissibility.checked + e.stability.checked + e.mhp.checked,
            violations: e.admissibility.violations.len()
                + e.stability.violations.len()
                + e.mhp.violations.len(),
        })
        .collect();
    let mutants = run_mutation_suite(cases);
    let mut report = SuiteReport {
        version: SUITE_VERSION,
        cases: cases.iter().map(|c| c.case.name.clone()).collect(),
        equivalence,
        soundness,
        laws,
        mutants,
        passed: false,
    };
    report.passed = report.failures().is_empty();
    Ok(report)
}
