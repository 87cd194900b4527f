use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand};

use nr_pdcch::budget::{check_horizon, CellGroupCa, UeCapability};
use nr_pdcch::config::{load_cell, load_scenario, ConfigError};
use nr_pdcch::dci::vectors::{parse_vectors, regenerate_line, run_vector, VectorOutcome};
use nr_pdcch::dci::CodecSuite;
use nr_pdcch::mapping::{mapping_table, MAPPING_CSV_HEADER};
use nr_pdcch::model::validate_cell;
use nr_pdcch::search_space::{enumerate_candidates, CANDIDATE_CSV_HEADER};
use nr_pdcch::sim::{run_with_policy, GreedyFirstFit, SimError};

#[derive(Parser)]
#[command(
    name = "nr-pdcch",
    version,
    about = "NR PDCCH configuration linter, mapper and simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a cell configuration and check monitoring budgets over a slot horizon.
    Lint {
        config: PathBuf,
        #[arg(long, default_value_t = 1024)]
        horizon: u64,
        /// RNTI used to hash UE-specific candidates.
        #[arg(long, default_value = "1", value_parser = parse_u16)]
        rnti: u16,
        #[arg(long, default_value_t = 4)]
        n_cells_cap: u32,
        /// Serving cells per numerology, e.g. `2,1,0,0`.
        #[arg(long, value_parser = parse_ca)]
        ca: Option<[u32; 4]>,
        /// Print only violations, not the per-slot budget reports.
        #[arg(long)]
        violations_only: bool,
    },
    /// Print the CCE → REG → RE mapping of one CORESET as CSV.
    DumpMapping {
        config: PathBuf,
        #[arg(long)]
        coreset: u8,
    },
    /// Print the PDCCH candidates of one UE over a slot range as CSV.
    Candidates {
        config: PathBuf,
        #[arg(long, value_parser = parse_u16)]
        rnti: u16,
        /// Half-open `A..B` or inclusive `A..=B`.
        #[arg(long, value_parser = parse_slots)]
        slots: (u64, u64),
    },
    /// Run a scenario and print statistics as JSON.
    Simulate {
        scenario: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check codec output against a hex test-vector file.
    Vectors {
        file: PathBuf,
        /// Print the file with every expected field recomputed instead of checking.
        #[arg(long)]
        regenerate: bool,
    },
}

/// Errors that map to exit status 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(e: impl std::fmt::Display) -> anyhow::Error {
    UsageError(e.to_string()).into()
}

fn parse_u16(s: &str) -> Result<u16, String> {
    let v = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(h) => u16::from_str_radix(h, 16),
        None => s.parse(),
    };
    v.map_err(|e| format!("{s:?}: {e}"))
}

fn parse_slots(s: &str) -> Result<(u64, u64), String> {
    let (a, b, inclusive) = if let Some((a, b)) = s.split_once("..=") {
        (a, b, true)
    } else if let Some((a, b)) = s.split_once("..") {
        (a, b, false)
    } else {
        return Err(format!("{s:?}: expected A..B"));
    };
    let a: u64 = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
    let mut b: u64 = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
    if inclusive {
        b += 1;
    }
    if b <= a {
        return Err(format!("{s:?}: empty slot range"));
    }
    Ok((a, b))
}

fn parse_ca(s: &str) -> Result<[u32; 4], String> {
    let v: Vec<u32> = s
        .split(',')
        .map(|x| x.trim().parse::<u32>())
        .collect::<Result<_, _>>()
        .map_err(|e| format!("{s:?}: {e}"))?;
    v.try_into().map_err(|_| format!("{s:?}: expected four counts"))
}

fn cell_from(path: &Path) -> Result<nr_pdcch::CellConfig> {
    load_cell(path).map_err(config_error)
}

fn config_error(e: ConfigError) -> anyhow::Error {
    usage(e)
}

struct LintArgs {
    horizon: u64,
    rnti: u16,
    n_cells_cap: u32,
    ca: Option<[u32; 4]>,
    violations_only: bool,
}

/// Violations first (`{"code", "subject", "detail"}`), then one budget report
/// per slot and BWP (`{"slot", "bwp", "mapped_ss", ...}`).
fn lint(config: &Path, args: LintArgs) -> Result<bool> {
    let LintArgs {
        horizon,
        rnti,
        n_cells_cap,
        ca,
        violations_only,
    } = args;
    let cell = cell_from(config)?;
    let cap = UeCapability::new(n_cells_cap).map_err(usage)?;
    let ca = ca.map(CellGroupCa::new).transpose().map_err(usage)?;
    let mut violations = validate_cell(&cell);
    let mut dropped = None;
    let mut slots = Vec::new();
    if violations.is_empty() {
        let report = check_horizon(&cell, cap, ca.as_ref(), rnti, horizon)?;
        dropped = Some((report.slots_with_drops, report.dropped_sets));
        violations.extend(report.violations);
        slots = report.slots;
    }
    let mut out = io::stdout().lock();
    for v in &violations {
        writeln!(out, "{}", serde_json::to_string(v)?)?;
    }
    if !violations_only {
        for s in &slots {
            writeln!(out, "{}", serde_json::to_string(s)?)?;
        }
    }
    match dropped {
        Some((slots, sets)) => eprintln!(
            "{} violation(s); horizon {horizon}: {sets} USS set drop(s) in {slots} slot(s)",
            violations.len()
        ),
        None => eprintln!("{} violation(s); horizon check skipped", violations.len()),
    }
    Ok(violations.is_empty())
}

fn dump_mapping(config: &Path, coreset: u8) -> Result<bool> {
    let cell = cell_from(config)?;
    let c = cell
        .coreset(coreset)
        .ok_or_else(|| usage(format!("no CORESET {coreset} in {}", config.display())))?;
    let rows = mapping_table(c)?;
    let mut out = io::stdout().lock();
    writeln!(out, "{MAPPING_CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.to_csv())?;
    }
    Ok(true)
}

fn candidates(config: &Path, rnti: u16, (a, b): (u64, u64)) -> Result<bool> {
    let cell = cell_from(config)?;
    let violations = validate_cell(&cell);
    if let Some(v) = violations.first() {
        eprintln!("configuration invalid: {v}");
        return Ok(false);
    }
    let mut out = io::stdout().lock();
    writeln!(out, "{CANDIDATE_CSV_HEADER}")?;
    for slot in a..b {
        for c in enumerate_candidates(&cell, rnti, slot)? {
            writeln!(out, "{}", c.to_csv())?;
        }
    }
    Ok(true)
}

fn simulate(path: &Path, seed: Option<u64>) -> Result<bool> {
    let scenario = load_scenario(path).map_err(config_error)?;
    match run_with_policy(&scenario, seed.unwrap_or(scenario.seed), &GreedyFirstFit) {
        Ok(stats) => {
            println!("{}", stats.to_json());
            Ok(true)
        }
        Err(SimError::InvalidCell(vs)) => {
            for v in &vs {
                eprintln!("{v}");
            }
            Ok(false)
        }
        Err(e @ SimError::Scenario(_)) => Err(usage(e)),
        Err(e) => {
            eprintln!("simulation failed: {e}");
            Ok(false)
        }
    }
}

fn vectors(path: &Path, regenerate: bool) -> Result<bool> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(usage)?;
    let cases = parse_vectors(&text).map_err(usage)?;
    let suite = CodecSuite::default();
    let mut out = io::stdout().lock();
    if regenerate {
        let mut by_line = cases.iter().peekable();
        for (i, line) in text.lines().enumerate() {
            match by_line.peek() {
                Some(v) if v.line == i + 1 => {
                    let fresh = regenerate_line(v, &suite).map_err(|e| anyhow!("line {}: {e}", v.line))?;
                    writeln!(out, "{fresh}")?;
                    by_line.next();
                }
                _ => writeln!(out, "{line}")?,
            }
        }
        return Ok(true);
    }
    let mut failures = 0usize;
    for v in &cases {
        match run_vector(v, &suite) {
            VectorOutcome::Pass => writeln!(out, "line {}: PASS", v.line)?,
            VectorOutcome::Mismatch { first_diff } => {
                failures += 1;
                writeln!(out, "line {}: FAIL (first differing bit {first_diff})", v.line)?;
            }
            VectorOutcome::Error(e) => {
                failures += 1;
                writeln!(out, "line {}: FAIL ({e})", v.line)?;
            }
        }
    }
    eprintln!("{} vector(s), {failures} failure(s)", cases.len());
    Ok(failures == 0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Lint {
            config,
            horizon,
            rnti,
            n_cells_cap,
            ca,
            violations_only,
        } => lint(
            &config,
            LintArgs {
                horizon,
                rnti,
                n_cells_cap,
                ca,
                violations_only,
            },
        ),
        Command::DumpMapping { config, coreset } => dump_mapping(&config, coreset),
        Command::Candidates { config, rnti, slots } => candidates(&config, rnti, slots),
        Command::Simulate { scenario, seed } => simulate(&scenario, seed),
        Command::Vectors { file, regenerate } => vectors(&file, regenerate),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
