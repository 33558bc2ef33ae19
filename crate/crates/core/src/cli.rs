//! The `akb` command line.
//!
//! Exit codes: 0 success, 1 parse error or missing input, 2 validation error,
//! 3 script mismatch, 4 exploration depth exhausted, 5 lemma counterexamples.

use std::ffi::OsString;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::ast::{validate, Net};
use crate::blp::harness::{lemma_harness, HarnessConfig};
use crate::blp::scenarios::{builtin_names, builtin_source};
use crate::engine::{explore, run, EngineError, Parallelism, Scheduler};
use crate::lattice::Lattice;
use crate::parser::{parse_scenario, parse_scenario_file, ParseError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_SCRIPT: i32 = 3;
pub const EXIT_DEPTH: i32 = 4;
pub const EXIT_COUNTEREXAMPLE: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "akb", version, about = "Run, explore and check aspect-guarded tuple-space nets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    JsonLines,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LatticeChoice {
    Chain3,
    Diamond,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Execute one run under a seeded random or scripted scheduler.
    Run {
        /// Scenario file, builtin name, or `-` for stdin.
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated interaction labels such as `D:read@B,D:out@C`; replaces the random scheduler.
        #[arg(long, conflicts_with = "script_file")]
        script: Option<String>,
        /// File with one interaction label per line.
        #[arg(long)]
        script_file: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        max_steps: usize,
        /// Write the trace here instead of stdout.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Breadth-first reachability with a grant/deny summary.
    Explore {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
        depth: u64,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[arg(long)]
        sequential: bool,
    },
    /// Compare the BLP aspects against the security oracle on random nets.
    Lemmas {
        #[arg(long, default_value_t = 1000)]
        instances: usize,
        #[arg(long, value_enum, default_value_t = LatticeChoice::Chain3)]
        lattice: LatticeChoice,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 32)]
        max_depth: usize,
        /// Write the full report here (JSON with `--format json-lines`).
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[arg(long)]
        sequential: bool,
    },
    /// Parse and validate only.
    Check {
        #[arg(long)]
        scenario: String,
    },
    /// List the builtin scenarios.
    Builtins,
}

/// Failure carrying its exit code.
struct Exit(i32, String);

impl From<io::Error> for Exit {
    fn from(e: io::Error) -> Self {
        Exit(EXIT_PARSE, e.to_string())
    }
}

fn parse_exit(e: ParseError) -> Exit {
    let code = match e {
        ParseError::UnknownLevelName { .. } => EXIT_INVALID,
        _ => EXIT_PARSE,
    };
    Exit(code, e.to_string())
}

fn engine_exit(e: EngineError) -> Exit {
    match e {
        EngineError::ScriptMismatch { .. } => Exit(EXIT_SCRIPT, e.to_string()),
        _ => Exit(EXIT_PARSE, e.to_string()),
    }
}

fn search_path() -> Vec<PathBuf> {
    std::env::var_os("AKB_SCENARIO_PATH")
        .map(|v| std::env::split_paths(&v).collect())
        .unwrap_or_default()
}

/// Resolution order: `-`, an existing file, a builtin name, then each
/// `AKB_SCENARIO_PATH` directory (with and without `.akb`).
pub fn load_scenario(spec: &str) -> Result<Net, (i32, String)> {
    load(spec).map_err(|Exit(c, m)| (c, m))
}

fn load(spec: &str) -> Result<Net, Exit> {
    if spec == "-" {
        let mut text = String::new();
        io::stdin().read_to_string(&mut text)?;
        return parse_scenario(&text).map_err(parse_exit);
    }
    let direct = Path::new(spec);
    if direct.is_file() {
        return from_file(direct);
    }
    if let Some(src) = builtin_source(spec) {
        return parse_scenario(src).map_err(parse_exit);
    }
    for dir in search_path() {
        for cand in [dir.join(spec), dir.join(format!("{spec}.akb"))] {
            if cand.is_file() {
                return from_file(&cand);
            }
        }
    }
    Err(Exit(EXIT_PARSE, format!("no scenario file or builtin named `{spec}`")))
}

fn from_file(path: &Path) -> Result<Net, Exit> {
    let text = std::fs::read_to_string(path).map_err(|e| Exit(EXIT_PARSE, format!("{}: {e}", path.display())))?;
    parse_scenario_file(&text, path).map_err(parse_exit)
}

fn load_valid(spec: &str) -> Result<Net, Exit> {
    let net = load(spec)?;
    let diags = validate(&net);
    if diags.is_empty() {
        Ok(net)
    } else {
        let msg = diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n");
        Err(Exit(EXIT_INVALID, msg))
    }
}

fn parallelism(sequential: bool) -> Parallelism {
    if sequential {
        Parallelism::Sequential
    } else {
        Parallelism::default()
    }
}

fn emit(out: &mut dyn Write, path: Option<&Path>, body: &str) -> Result<(), Exit> {
    match path {
        Some(p) => std::fs::write(p, body).map_err(|e| Exit(EXIT_PARSE, format!("{}: {e}", p.display()))),
        None => Ok(out.write_all(body.as_bytes())?),
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<i32, Exit> {
    match cli.command {
        Command::Run {
            scenario,
            seed,
            script,
            script_file,
            max_steps,
            trace,
            format,
        } => {
            let net = load_valid(&scenario)?;
            let labels = match (script, script_file) {
                (Some(s), _) => Some(s.split(',').map(|l| l.trim().to_string()).filter(|l| !l.is_empty()).collect()),
                (None, Some(f)) => Some(
                    std::fs::read_to_string(&f)
                        .map_err(|e| Exit(EXIT_PARSE, format!("{}: {e}", f.display())))?
                        .lines()
                        .map(str::trim)
                        .filter(|l| !l.is_empty() && !l.starts_with("//"))
                        .map(String::from)
                        .collect(),
                ),
                (None, None) => None,
            };
            let sched = match labels {
                Some(l) => Scheduler::FixedScript(l),
                None => Scheduler::SeededRandom(seed),
            };
            let t = run(&net, &sched, max_steps).map_err(engine_exit)?;
            let body = match format {
                Format::Text => t.to_text(),
                Format::JsonLines => t.to_json_lines(),
            };
            emit(out, trace.as_deref(), &body)?;
            Ok(EXIT_OK)
        }
        Command::Explore {
            scenario,
            depth,
            format,
            sequential,
        } => {
            let net = load_valid(&scenario)?;
            let ex = explore(&net, depth as usize, parallelism(sequential)).map_err(engine_exit)?;
            match format {
                Format::JsonLines => writeln!(out, "{}", serde_json::to_string(&ex).expect("serializable"))?,
                Format::Text => {
                    writeln!(out, "states     {}", ex.states)?;
                    writeln!(out, "edges      {}", ex.edges)?;
                    writeln!(out, "terminals  {}", ex.terminals)?;
                    writeln!(out, "depth      {}", ex.depth)?;
                    writeln!(out, "complete   {}", ex.complete)?;
                    for (label, d) in &ex.decisions {
                        writeln!(out, "  {label:<32} granted {:>4}  denied {:>4}", d.granted, d.denied)?;
                    }
                }
            }
            if ex.complete {
                Ok(EXIT_OK)
            } else {
                writeln!(out, "depth bound reached with unexplored successors")?;
                Ok(EXIT_DEPTH)
            }
        }
        Command::Lemmas {
            instances,
            lattice,
            seed,
            max_depth,
            report,
            format,
            sequential,
        } => {
            let lat = match lattice {
                LatticeChoice::Chain3 => Lattice::chain3(),
                LatticeChoice::Diamond => Lattice::diamond(),
            };
            let mut cfg = HarnessConfig::new(lat, instances);
            cfg.seed = seed;
            cfg.max_depth = max_depth;
            cfg.parallelism = parallelism(sequential);
            let r = lemma_harness(&cfg);
            let text = r.to_text();
            if let Some(p) = &report {
                let body = match format {
                    Format::Text => text.clone(),
                    Format::JsonLines => serde_json::to_string(&r).expect("serializable") + "\n",
                };
                emit(out, Some(p), &body)?;
            }
            out.write_all(text.as_bytes())?;
            Ok(if r.failures() == 0 { EXIT_OK } else { EXIT_COUNTEREXAMPLE })
        }
        Command::Check { scenario } => {
            load_valid(&scenario)?;
            writeln!(out, "OK")?;
            Ok(EXIT_OK)
        }
        Command::Builtins => {
            for n in builtin_names() {
                writeln!(out, "{n}")?;
            }
            Ok(EXIT_OK)
        }
    }
}

/// Runs the command line against the given streams and returns the exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    match dispatch(cli, out) {
        Ok(code) => code,
        Err(Exit(code, msg)) => {
            let _ = writeln!(err, "error: {msg}");
            code
        }
    }
}
