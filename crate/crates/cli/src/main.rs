//! `aspectra`: flatten models, compile aspects, run critical pair analysis,
//! render reports and cross-check them with the weaving oracle.
//!
//! Exit codes: 0 success, 1 internal error, 2 invalid input, 3 finding
//! (a conflict under `--fail-on-conflict`, or an oracle discrepancy).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aspectra_core::aspects::{compile_all, parse_concerns, CompiledAspect};
use aspectra_core::oracle::{classify_on_graph, cross_check, OracleVerdict};
use aspectra_core::report::{self, analyze, incremental_update, parse_rule_name, JoinpointTree, ReportDocument};
use aspectra_core::statechart::{validate, StateMachine};
use aspectra_core::{flatten, CriticalPair, InteractionMatrix, Rule, DEFAULT_MAX_OVERLAPS};
use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

#[derive(Parser)]
#[command(name = "aspectra", version, about = "Aspect interaction analysis for state-machine models")]
struct Cli {
    #[command(flatten)]
    run: RunArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Output format; each command accepts a subset.
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    jobs: Option<u32>,
    /// Overlap cap per rule pair and interaction category.
    #[arg(long, global = true, env = "ASPECTRA_MAX_OVERLAPS", value_parser = clap::value_parser!(u64).range(1..))]
    max_overlaps: Option<u64>,
    /// Seed for randomized harnesses; analysis itself is deterministic.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the primary output here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
    Table,
    Dot,
}

#[derive(Subcommand)]
enum Command {
    /// Validate and flatten a statechart model into a graph.
    Flatten { model: PathBuf },
    /// Compile aspects into transformation rules.
    Compile {
        aspects: PathBuf,
        /// Print per-aspect rule counts.
        #[arg(long)]
        stats: bool,
    },
    /// Run critical pair analysis over aspects (or compiled rules).
    Analyze {
        input: PathBuf,
        /// Previous report over the aspects in INPUT; enables incremental mode.
        #[arg(long, requires = "added")]
        baseline: Option<PathBuf>,
        /// Aspects to add to the baseline analysis.
        #[arg(long, requires = "baseline")]
        added: Option<PathBuf>,
        /// Exit with 3 when any conflict is found.
        #[arg(long)]
        fail_on_conflict: bool,
    },
    /// Weave aspect pairs in both orders on a model and classify them.
    Oracle {
        model: PathBuf,
        aspects: PathBuf,
        /// Ordered pair `A,B` to classify.
        #[arg(long, conflicts_with = "all", value_parser = parse_pair)]
        pair: Option<(String, String)>,
        /// Classify every unordered pair.
        #[arg(long)]
        all: bool,
        /// Cross-check a report: every pair it finds silent must weave independently.
        #[arg(long)]
        against: Option<PathBuf>,
    },
    /// Re-render a saved report.
    Export {
        report: PathBuf,
        /// Emit the flat list of critical pairs instead of the report.
        #[arg(long)]
        verdicts: bool,
    },
}

fn parse_pair(s: &str) -> Result<(String, String), String> {
    match s.split_once(',') {
        Some((a, b)) if !a.is_empty() && !b.is_empty() => Ok((a.trim().to_string(), b.trim().to_string())),
        _ => Err(format!("expected `A,B`, got `{s}`")),
    }
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Internal(_) => 1,
        }
    }
}

fn input(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

/// Resolved run settings; `jobs` and `max_overlaps` are at least 1.
struct RunConfig {
    max_overlaps: usize,
    format: Option<OutputFormat>,
    out: Option<PathBuf>,
}

impl RunConfig {
    fn format_or(&self, default: OutputFormat, allowed: &[OutputFormat]) -> Result<OutputFormat, CliError> {
        let f = self.format.unwrap_or(default);
        if allowed.contains(&f) {
            Ok(f)
        } else {
            Err(input(format!(
                "format `{}` is not available for this command",
                f.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default()
            )))
        }
    }

    fn emit(&self, bytes: &[u8]) -> Result<(), CliError> {
        match &self.out {
            Some(path) => fs::write(path, bytes).map_err(|e| input(format!("{}: {e}", path.display()))),
            None => std::io::stdout()
                .write_all(bytes)
                .map_err(|e| CliError::Internal(e.to_string())),
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<StateMachine, CliError> {
    let sm: StateMachine = serde_json::from_str(&read(path)?).map_err(|e| input(format!("{}: {e}", path.display())))?;
    let diagnostics = validate(&sm);
    if diagnostics.is_empty() {
        return Ok(sm);
    }
    let lines: Vec<String> = diagnostics.iter().map(|d| format!("{}: {d}", path.display())).collect();
    Err(input(lines.join("\n")))
}

fn load_aspects(path: &Path) -> Result<Vec<CompiledAspect>, CliError> {
    let text = read(path)?;
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let concerns = parse_concerns(&text).map_err(|e| input(format!("{}: {e}", path.display())))?;
    compile_all(&concerns).map_err(|e| input(format!("{}: {e}", path.display())))
}

/// Aspects or, failing that, a compiled rule list grouped by the aspect
/// prefix of each rule name (in order of first appearance).
fn load_aspects_or_rules(path: &Path) -> Result<Vec<CompiledAspect>, CliError> {
    let text = read(path)?;
    let Ok(rules) = serde_json::from_str::<Vec<Rule>>(&text) else {
        return load_aspects(path);
    };
    let mut grouped: Vec<CompiledAspect> = Vec::new();
    for rule in rules {
        let (aspect, _) = parse_rule_name(rule.name()).map_err(input)?;
        let aspect = aspect.to_string();
        match grouped.iter_mut().find(|c| c.aspect == aspect) {
            Some(c) => c.rules.push(rule),
            None => grouped.push(CompiledAspect { aspect, rules: vec![rule] }),
        }
    }
    Ok(grouped)
}

fn load_report(path: &Path) -> Result<ReportDocument, CliError> {
    ReportDocument::from_json(&read(path)?).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn json_line<T: serde::Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn render_report(cfg: &RunConfig, matrix: &InteractionMatrix) -> Result<(), CliError> {
    use OutputFormat::*;
    let format = match cfg.format_or(Json, &[Json, Csv, Table, Dot])? {
        Json => report::Format::Document,
        Csv => report::Format::Csv,
        Table => report::Format::Table,
        Dot => report::Format::Dot,
    };
    cfg.emit(&report::render(matrix, &JoinpointTree::from_matrix(matrix), format))
}

fn cmd_flatten(cfg: &RunConfig, model: &Path) -> Result<u8, CliError> {
    let sm = load_model(model)?;
    let graph = flatten(&sm).map_err(input)?;
    match cfg.format_or(OutputFormat::Json, &[OutputFormat::Json, OutputFormat::Dot])? {
        OutputFormat::Dot => cfg.emit(graph.to_dot(&sm.name).as_bytes())?,
        _ => cfg.emit(&json_line(&graph)?)?,
    }
    Ok(0)
}

fn cmd_compile(cfg: &RunConfig, aspects: &Path, stats: bool) -> Result<u8, CliError> {
    let compiled = load_aspects(aspects)?;
    if stats {
        let mut line: Vec<String> = compiled.iter().map(|c| format!("{}:{}", c.aspect, c.rules.len())).collect();
        line.push(format!("total:{}", compiled.iter().map(|c| c.rules.len()).sum::<usize>()));
        println!("{}", line.join(" "));
        if cfg.out.is_none() {
            return Ok(0);
        }
    }
    let rules: Vec<&Rule> = compiled.iter().flat_map(|c| &c.rules).collect();
    match cfg.format_or(OutputFormat::Json, &[OutputFormat::Json, OutputFormat::Dot])? {
        OutputFormat::Dot => cfg.emit(rules.iter().map(|r| r.to_dot()).collect::<String>().as_bytes())?,
        _ => cfg.emit(&json_line(&rules)?)?,
    }
    Ok(0)
}

fn cmd_analyze(
    cfg: &RunConfig,
    path: &Path,
    baseline: Option<&Path>,
    added: Option<&Path>,
    fail_on_conflict: bool,
) -> Result<u8, CliError> {
    let compiled = load_aspects_or_rules(path)?;
    let (matrix, analyzed) = match (baseline, added) {
        (Some(baseline), Some(added)) => {
            let mut matrix = load_report(baseline)?.to_matrix().map_err(input)?;
            let mut known = compiled;
            let mut analyzed = 0;
            for aspect in load_aspects_or_rules(added)? {
                let (next, stats) = incremental_update(&matrix, &known, &aspect, cfg.max_overlaps).map_err(input)?;
                matrix = next;
                analyzed += stats.rule_pairs;
                known.push(aspect);
            }
            (matrix, analyzed)
        }
        _ => {
            let (matrix, stats) = analyze(&compiled, cfg.max_overlaps).map_err(input)?;
            (matrix, stats.rule_pairs)
        }
    };
    eprintln!("analyzed rule pairs: {analyzed}");
    if !matrix.undecided_pairs.is_empty() {
        eprintln!("undecided rule pairs (overlap cap reached): {}", matrix.undecided_pairs.len());
    }
    render_report(cfg, &matrix)?;
    Ok(if fail_on_conflict && matrix.has_conflicts() { 3 } else { 0 })
}

fn cmd_oracle(
    cfg: &RunConfig,
    model: &Path,
    aspects: &Path,
    pair: Option<&(String, String)>,
    all: bool,
    against: Option<&Path>,
) -> Result<u8, CliError> {
    let sm = load_model(model)?;
    let compiled = load_aspects(aspects)?;
    let host = flatten(&sm).map_err(input)?;
    let find = |name: &str| {
        compiled
            .iter()
            .find(|c| c.aspect == name)
            .ok_or_else(|| input(format!("unknown aspect `{name}`")))
    };
    let format = cfg.format_or(OutputFormat::Table, &[OutputFormat::Table, OutputFormat::Json])?;

    let verdicts: Vec<OracleVerdict> = if let Some((a, b)) = pair {
        if a == b {
            return Err(input(format!("`{a},{b}` is a self-pair; the diagonal is not analyzed")));
        }
        vec![classify_on_graph(&host, find(a)?, find(b)?)]
    } else if all {
        use rayon::prelude::*;
        let pairs: Vec<(&CompiledAspect, &CompiledAspect)> = compiled
            .iter()
            .enumerate()
            .flat_map(|(i, a)| compiled[i + 1..].iter().map(move |b| (a, b)))
            .collect();
        pairs.par_iter().map(|(a, b)| classify_on_graph(&host, a, b)).collect()
    } else {
        Vec::new()
    };
    if pair.is_none() && !all && against.is_none() {
        return Err(input("oracle needs --pair A,B, --all or --against REPORT"));
    }

    let mut out = Vec::new();
    match format {
        OutputFormat::Json if against.is_none() => out = json_line(&verdicts)?,
        _ => {
            for v in &verdicts {
                out.extend(format!("{},{}: {}\n", v.first, v.second, v.classification.as_str()).into_bytes());
            }
        }
    }

    let mut code = 0;
    if let Some(report_path) = against {
        let doc = load_report(report_path)?;
        let names: Vec<String> = compiled.iter().map(|c| c.aspect.clone()).collect();
        if doc.aspects != names {
            return Err(input(format!(
                "report covers {:?} but the aspects file defines {names:?}",
                doc.aspects
            )));
        }
        let matrix = doc.to_matrix().map_err(input)?;
        let found = cross_check(&sm, &compiled, &matrix).map_err(input)?;
        if format == OutputFormat::Json {
            out.extend(json_line(&serde_json::json!({"verdicts": verdicts, "discrepancies": found}))?);
        } else {
            for d in &found {
                out.extend(format!("discrepancy {},{}: oracle {}, report: {}\n", d.aspect_a, d.aspect_b, d.oracle.as_str(), d.cpa_summary).into_bytes());
            }
        }
        if !found.is_empty() {
            code = 3;
        }
    }
    cfg.emit(&out)?;
    Ok(code)
}

fn cmd_export(cfg: &RunConfig, path: &Path, verdicts: bool) -> Result<u8, CliError> {
    let doc = load_report(path)?;
    if verdicts {
        cfg.format_or(OutputFormat::Json, &[OutputFormat::Json])?;
        let pairs: Vec<&CriticalPair> = doc
            .conflict_matrix
            .iter()
            .chain(&doc.dependency_matrix)
            .flat_map(|e| &e.pairs)
            .collect();
        cfg.emit(&json_line(&pairs)?)?;
        return Ok(0);
    }
    render_report(cfg, &doc.to_matrix().map_err(input)?)?;
    Ok(0)
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let cfg = RunConfig {
        max_overlaps: cli
            .run
            .max_overlaps
            .map_or(DEFAULT_MAX_OVERLAPS, |n| usize::try_from(n).unwrap_or(usize::MAX)),
        format: cli.run.format,
        out: cli.run.out,
    };
    match &cli.command {
        Command::Flatten { model } => cmd_flatten(&cfg, model),
        Command::Compile { aspects, stats } => cmd_compile(&cfg, aspects, *stats),
        Command::Analyze {
            input,
            baseline,
            added,
            fail_on_conflict,
        } => cmd_analyze(&cfg, input, baseline.as_deref(), added.as_deref(), *fail_on_conflict),
        Command::Oracle {
            model,
            aspects,
            pair,
            all,
            against,
        } => cmd_oracle(&cfg, model, aspects, pair.as_ref(), *all, against.as_deref()),
        Command::Export { report, verdicts } => cmd_export(&cfg, report, *verdicts),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.run.jobs {
        pool = pool.num_threads(jobs as usize);
    }
    let pool = match pool.build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| run(cli)) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
