use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use digestrace_core::conformance::run_full_suite;
use digestrace_core::detector::{ablate, analyze_program, AnalysisConfig};
use digestrace_core::digest::PredicateMode;
use digestrace_core::digests::{product_by_names, DIGEST_NAMES};
use digestrace_core::oracle::{compatible_pairs, enumerate_traces, find_racy_pairs, Bounds, Semantics};
use digestrace_core::program::{parse_program, print_program, program_to_dot, Program};
use digestrace_core::solver::{build_system, solve, DEFAULT_ITERATION_CAP};

/// Static data race detection for a small threaded language.
#[derive(Parser)]
#[command(name = "digestrace", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Predicate {
    Bespoke,
    Generic,
}

impl From<Predicate> for PredicateMode {
    fn from(p: Predicate) -> Self {
        match p {
            Predicate::Bespoke => PredicateMode::Bespoke,
            Predicate::Generic => PredicateMode::Generic,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a program and report possible races.
    Analyze {
        file: PathBuf,
        /// Comma-separated digests.
        #[arg(long, value_delimiter = ',', default_values_t = DIGEST_NAMES.map(String::from))]
        digests: Vec<String>,
        #[arg(long, value_enum, default_value_t = Predicate::Bespoke)]
        predicate: Predicate,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Limit on constraint evaluations.
        #[arg(long, default_value_t = DEFAULT_ITERATION_CAP)]
        cap: usize,
        /// Print the solver's solution as JSON instead of the report.
        #[arg(long)]
        dump_solution: bool,
    },
    /// Enumerate executions up to a bound and report the true races.
    Oracle {
        file: PathBuf,
        #[arg(long, default_value_t = Bounds::default().depth)]
        depth: usize,
        #[arg(long, default_value_t = Bounds::default().width)]
        width: usize,
        /// Also list bidirectionally compatible access pairs.
        #[arg(long)]
        compatible: bool,
    },
    /// Run the conformance suites over a corpus directory.
    Conform {
        dir: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Flag counts for every subset of enabled predicates.
    Ablate {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Predicate::Bespoke)]
        predicate: Predicate,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Print a program, optionally lowered or as a DOT graph.
    Print {
        file: PathBuf,
        #[arg(long)]
        lowered: bool,
        #[arg(long)]
        dot: bool,
    },
}

fn load(path: &Path) -> Result<Program> {
    let src = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_program(&src).with_context(|| format!("parsing {}", path.display()))
}

fn exit(races: bool) -> ExitCode {
    ExitCode::from(u8::from(races))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Analyze {
            file,
            digests,
            predicate,
            format,
            cap,
            dump_solution,
        } => {
            let program = load(&file)?;
            if dump_solution {
                let lowered = program.lower()?;
                let product = product_by_names(&digests)?;
                let solution = solve(&build_system(&lowered, &product)?, cap)?;
                println!("{}", serde_json::to_string_pretty(&solution.to_json(&lowered))?);
                return Ok(ExitCode::SUCCESS);
            }
            let mut config = AnalysisConfig::new(&digests, predicate.into());
            config.iteration_cap = cap;
            let report = analyze_program(&program, &config)?;
            match format {
                Format::Text => print!("{}", report.to_text()),
                Format::Json => println!("{}", report.to_json()),
            }
            Ok(exit(!report.is_race_free()))
        }
        Command::Oracle {
            file,
            depth,
            width,
            compatible,
        } => {
            let lowered = load(&file)?.lower()?;
            let sem = Semantics::new(&lowered);
            let ex = enumerate_traces(&sem, Bounds { depth, width });
            println!("{} traces, {} states", ex.traces.len(), ex.states);
            let racy = find_racy_pairs(&sem, &ex.traces);
            for r in &racy {
                let (a, b) = r.pair.lines();
                println!("race on {}: line {a} and line {b}", lowered.global_name(r.pair.global));
            }
            if compatible {
                for c in compatible_pairs(&sem, &ex.traces) {
                    let (a, b) = c.pair.lines();
                    println!("compatible on {}: line {a} and line {b}", lowered.global_name(c.pair.global));
                }
            }
            if racy.is_empty() && ex.truncated {
                bail!("no race found, but enumeration hit the bounds (depth {depth}, width {width})");
            }
            if ex.truncated {
                eprintln!("warning: enumeration hit the bounds; more races may exist");
            }
            Ok(exit(!racy.is_empty()))
        }
        Command::Conform { dir, format } => {
            let report = run_full_suite(&dir)?;
            match format {
                Format::Json => println!("{}", report.to_json()),
                Format::Text => {
                    for f in report.failures() {
                        println!("FAIL {f}");
                    }
                    for m in &report.mutants {
                        println!("mutant {} killed by {} case(s)", m.name, m.killed_by.len());
                    }
                    println!(
                        "{} cases: {}",
                        report.cases.len(),
                        if report.passed { "all suites passed" } else { "failures" }
                    );
                }
            }
            Ok(exit(!report.passed))
        }
        Command::Ablate {
            file,
            predicate,
            format,
        } => {
            let table = ablate(&load(&file)?, predicate.into())?;
            match format {
                Format::Text => print!("{}", table.to_text()),
                Format::Json => println!("{}", serde_json::to_string_pretty(&table)?),
            }
            if let Err(v) = table.check_monotone() {
                eprintln!("warning: enabling predicates {:#b} -> {:#b} added flags", v.smaller, v.larger);
            }
            let all = table.rows.last().map_or(0, |r| r.flagged);
            Ok(exit(all > 0))
        }
        Command::Print { file, lowered, dot } => {
            let mut program = load(&file)?;
            if lowered {
                program = program.lower()?;
            }
            if dot {
                print!("{}", program_to_dot(&program));
            } else {
                print!("{}", print_program(&program));
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
