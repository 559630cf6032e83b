//! Aspect-level aggregation of rule verdicts, the joinpoint tree, and
//! report rendering.
//!
//! Cell `(A, B)` collects the critical pairs whose first rule belongs to
//! `A` and second rule to `B`: conflicts mean "A applied first disables
//! B", dependencies mean "A enables B". Pairs inside one aspect are
//! dropped.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::aspects::CompiledAspect;
use crate::cpa::{analyze_pairs, CriticalPair, VerdictMap};
use crate::graph::{canonical_form, dot_quote, Graph};
use crate::transform::Rule;
use crate::ENGINE_VERSION;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("rule name `{0}` does not have the form <aspect>-R<k>")]
    UnparseableRuleName(String),
    #[error("rule `{0}` belongs to no known aspect")]
    UnknownAspect(String),
    #[error("aspect name `{0}` is used more than once")]
    DuplicateAspectName(String),
    #[error("unknown format `{0}` (expected table, csv, document or dot)")]
    UnknownFormat(String),
    #[error("baseline covers aspects {baseline:?}, but {given:?} were supplied")]
    BaselineMismatch { baseline: Vec<String>, given: Vec<String> },
    #[error("malformed csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed report document: {0}")]
    Document(#[from] serde_json::Error),
}

/// Splits `A1-R3` into `("A1", 3)`.
pub fn parse_rule_name(name: &str) -> Result<(&str, usize), ReportError> {
    name.rsplit_once("-R")
        .and_then(|(a, k)| {
            let k: usize = k.parse().ok().filter(|k| *k >= 1)?;
            (!a.is_empty()).then_some((a, k))
        })
        .ok_or_else(|| ReportError::UnparseableRuleName(name.to_string()))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub conflict_pairs: Vec<CriticalPair>,
    pub dependency_pairs: Vec<CriticalPair>,
    pub undecided: bool,
}

impl Cell {
    fn is_empty(&self) -> bool {
        self.conflict_pairs.is_empty() && self.dependency_pairs.is_empty() && !self.undecided
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InteractionMatrix {
    pub aspects: Vec<String>,
    /// Non-empty cells only.
    pub cells: BTreeMap<(String, String), Cell>,
    /// Inter-aspect ordered rule pairs behind this matrix.
    pub rule_pair_count: usize,
    /// Rule pairs whose analysis hit the overlap cap.
    pub undecided_pairs: BTreeSet<(String, String)>,
}

/// One CSV row: counts for an ordered aspect pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub first: String,
    pub second: String,
    pub conflicts: usize,
    pub dependencies: usize,
    pub undecided: bool,
}

impl InteractionMatrix {
    pub fn cell(&self, first: &str, second: &str) -> Option<&Cell> {
        self.cells.get(&(first.to_string(), second.to_string()))
    }

    /// Conflict in either application order.
    pub fn in_conflict(&self, a: &str, b: &str) -> bool {
        let c = |x, y| self.cell(x, y).is_some_and(|c| !c.conflict_pairs.is_empty());
        c(a, b) || c(b, a)
    }

    /// `dependent` needs something `enabler` does.
    pub fn depends_on(&self, dependent: &str, enabler: &str) -> bool {
        self.cell(enabler, dependent).is_some_and(|c| !c.dependency_pairs.is_empty())
    }

    pub fn has_conflicts(&self) -> bool {
        self.cells.values().any(|c| !c.conflict_pairs.is_empty())
    }

    pub fn summary_rows(&self) -> Vec<SummaryRow> {
        let mut rows = Vec::new();
        for a in &self.aspects {
            for b in self.aspects.iter().filter(|b| *b != a) {
                let cell = self.cell(a, b);
                rows.push(SummaryRow {
                    first: a.clone(),
                    second: b.clone(),
                    conflicts: cell.map_or(0, |c| c.conflict_pairs.len()),
                    dependencies: cell.map_or(0, |c| c.dependency_pairs.len()),
                    undecided: cell.is_some_and(|c| c.undecided),
                });
            }
        }
        rows
    }

    fn absorb(&mut self, verdicts: &VerdictMap) -> Result<(), ReportError> {
        for ((r1, r2), v) in verdicts {
            let (a, _) = parse_rule_name(r1)?;
            let (b, _) = parse_rule_name(r2)?;
            for (name, aspect) in [(r1, a), (r2, b)] {
                if !self.aspects.iter().any(|x| x == aspect) {
                    return Err(ReportError::UnknownAspect(name.clone()));
                }
            }
            if a == b {
                continue;
            }
            self.rule_pair_count += 1;
            if v.undecided {
                self.undecided_pairs.insert((r1.clone(), r2.clone()));
            }
            let cell = self.cells.entry((a.to_string(), b.to_string())).or_default();
            cell.conflict_pairs.extend(v.conflicts.iter().cloned());
            cell.dependency_pairs.extend(v.dependencies.iter().cloned());
            cell.undecided |= v.undecided;
        }
        self.cells.retain(|_, c| !c.is_empty());
        Ok(())
    }
}

fn aspect_names(compiled: &[CompiledAspect]) -> Result<Vec<String>, ReportError> {
    let mut seen = BTreeSet::new();
    compiled
        .iter()
        .map(|c| {
            if seen.insert(c.aspect.as_str()) {
                Ok(c.aspect.clone())
            } else {
                Err(ReportError::DuplicateAspectName(c.aspect.clone()))
            }
        })
        .collect()
}

/// Folds rule-level verdicts into aspect cells.
pub fn aggregate(compiled: &[CompiledAspect], verdicts: &VerdictMap) -> Result<InteractionMatrix, ReportError> {
    let mut m = InteractionMatrix {
        aspects: aspect_names(compiled)?,
        ..InteractionMatrix::default()
    };
    m.absorb(verdicts)?;
    Ok(m)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct AnalysisStats {
    /// Ordered rule pairs handed to the analyzer.
    pub rule_pairs: usize,
}

/// Analyzes every ordered pair of rules from distinct aspects.
pub fn analyze_aspects(compiled: &[CompiledAspect], cap: usize) -> Result<(VerdictMap, AnalysisStats), ReportError> {
    aspect_names(compiled)?;
    let mut pairs: Vec<(&Rule, &Rule)> = Vec::new();
    for (i, a) in compiled.iter().enumerate() {
        for (j, b) in compiled.iter().enumerate() {
            if i != j {
                pairs.extend(a.rules.iter().flat_map(|r| b.rules.iter().map(move |s| (r, s))));
            }
        }
    }
    Ok(run(&pairs, cap))
}

fn run(pairs: &[(&Rule, &Rule)], cap: usize) -> (VerdictMap, AnalysisStats) {
    let counter = AtomicUsize::new(0);
    let verdicts = analyze_pairs(pairs, cap, &counter);
    let stats = AnalysisStats {
        rule_pairs: counter.load(Ordering::Relaxed),
    };
    (verdicts, stats)
}

/// Full analysis: [`analyze_aspects`] followed by [`aggregate`].
pub fn analyze(compiled: &[CompiledAspect], cap: usize) -> Result<(InteractionMatrix, AnalysisStats), ReportError> {
    let (verdicts, stats) = analyze_aspects(compiled, cap)?;
    Ok((aggregate(compiled, &verdicts)?, stats))
}

/// Extends `matrix` (built from `compiled`) with `added`, analyzing only
/// rule pairs that involve the new aspect.
pub fn incremental_update(
    matrix: &InteractionMatrix,
    compiled: &[CompiledAspect],
    added: &CompiledAspect,
    cap: usize,
) -> Result<(InteractionMatrix, AnalysisStats), ReportError> {
    if matrix.aspects.contains(&added.aspect) {
        return Err(ReportError::DuplicateAspectName(added.aspect.clone()));
    }
    let given = aspect_names(compiled)?;
    if given != matrix.aspects {
        return Err(ReportError::BaselineMismatch {
            baseline: matrix.aspects.clone(),
            given,
        });
    }
    let mut pairs: Vec<(&Rule, &Rule)> = Vec::new();
    for old in compiled {
        for r in &old.rules {
            for s in &added.rules {
                pairs.push((r, s));
                pairs.push((s, r));
            }
        }
    }
    let (verdicts, stats) = run(&pairs, cap);
    let mut next = matrix.clone();
    next.aspects.push(added.aspect.clone());
    next.absorb(&verdicts)?;
    Ok((next, stats))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinpointNode {
    pub overlap: Graph,
    /// Aspect name to the rules that meet at this overlap.
    pub aspects: BTreeMap<String, BTreeSet<String>>,
}

/// Critical pairs grouped by the shape of their overlap; keys are SHA-256
/// digests of the overlap's canonical form.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JoinpointTree {
    pub nodes: BTreeMap<String, JoinpointNode>,
}

impl JoinpointTree {
    fn add(&mut self, pair: &CriticalPair) -> Result<(), ReportError> {
        let (a, _) = parse_rule_name(&pair.first)?;
        let (b, _) = parse_rule_name(&pair.second)?;
        if a == b {
            return Ok(());
        }
        let key = Sha256::digest(canonical_form(&pair.overlap))
            .iter()
            .fold(String::with_capacity(64), |mut s, byte| {
                let _ = write!(s, "{byte:02x}");
                s
            });
        let node = self.nodes.entry(key).or_insert_with(|| JoinpointNode {
            overlap: pair.overlap.clone(),
            aspects: BTreeMap::new(),
        });
        node.aspects.entry(a.to_string()).or_default().insert(pair.first.clone());
        node.aspects.entry(b.to_string()).or_default().insert(pair.second.clone());
        Ok(())
    }

    pub fn from_matrix(matrix: &InteractionMatrix) -> Self {
        let mut tree = JoinpointTree::default();
        for cell in matrix.cells.values() {
            for p in cell.conflict_pairs.iter().chain(&cell.dependency_pairs) {
                tree.add(p).expect("matrix rule names are parsed");
            }
        }
        tree
    }
}

pub fn joinpoint_tree(verdicts: &VerdictMap) -> Result<JoinpointTree, ReportError> {
    let mut tree = JoinpointTree::default();
    for v in verdicts.values() {
        for p in v.conflicts.iter().chain(&v.dependencies) {
            tree.add(p)?;
        }
    }
    Ok(tree)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixEntry {
    pub first: String,
    pub second: String,
    pub pairs: Vec<CriticalPair>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Meta {
    pub rule_pair_count: usize,
    pub undecided_pairs: Vec<(String, String)>,
    pub engine_version: String,
}

/// The serialized report; also the baseline format for incremental runs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub aspects: Vec<String>,
    pub conflict_matrix: Vec<MatrixEntry>,
    pub dependency_matrix: Vec<MatrixEntry>,
    pub joinpoint_tree: JoinpointTree,
    pub meta: Meta,
}

impl ReportDocument {
    pub fn new(matrix: &InteractionMatrix, tree: &JoinpointTree) -> Self {
        let entries = |pick: fn(&Cell) -> &Vec<CriticalPair>| {
            matrix
                .cells
                .iter()
                .filter(|(_, c)| !pick(c).is_empty())
                .map(|((a, b), c)| MatrixEntry {
                    first: a.clone(),
                    second: b.clone(),
                    pairs: pick(c).clone(),
                })
                .collect()
        };
        ReportDocument {
            aspects: matrix.aspects.clone(),
            conflict_matrix: entries(|c| &c.conflict_pairs),
            dependency_matrix: entries(|c| &c.dependency_pairs),
            joinpoint_tree: tree.clone(),
            meta: Meta {
                rule_pair_count: matrix.rule_pair_count,
                undecided_pairs: matrix.undecided_pairs.iter().cloned().collect(),
                engine_version: ENGINE_VERSION.to_string(),
            },
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_matrix(&self) -> Result<InteractionMatrix, ReportError> {
        let mut m = InteractionMatrix {
            aspects: self.aspects.clone(),
            rule_pair_count: self.meta.rule_pair_count,
            undecided_pairs: self.meta.undecided_pairs.iter().cloned().collect(),
            ..InteractionMatrix::default()
        };
        let key = |e: &MatrixEntry| (e.first.clone(), e.second.clone());
        for e in &self.conflict_matrix {
            m.cells.entry(key(e)).or_default().conflict_pairs = e.pairs.clone();
        }
        for e in &self.dependency_matrix {
            m.cells.entry(key(e)).or_default().dependency_pairs = e.pairs.clone();
        }
        for (r1, r2) in &self.meta.undecided_pairs {
            let (a, _) = parse_rule_name(r1)?;
            let (b, _) = parse_rule_name(r2)?;
            m.cells.entry((a.to_string(), b.to_string())).or_default().undecided = true;
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Table,
    Csv,
    Document,
    Dot,
}

impl FromStr for Format {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(Format::Table),
            "csv" => Ok(Format::Csv),
            "document" | "json" => Ok(Format::Document),
            "dot" => Ok(Format::Dot),
            other => Err(ReportError::UnknownFormat(other.to_string())),
        }
    }
}

pub fn render(matrix: &InteractionMatrix, tree: &JoinpointTree, format: Format) -> Vec<u8> {
    match format {
        Format::Table => render_table(matrix).into_bytes(),
        Format::Csv => render_csv(matrix),
        Format::Document => ReportDocument::new(matrix, tree).to_json().into_bytes(),
        Format::Dot => render_dot(matrix).into_bytes(),
    }
}

/// Glyph for row `x`, column `y`.
pub fn glyph(matrix: &InteractionMatrix, x: &str, y: &str) -> &'static str {
    if x == y {
        return ".";
    }
    match (matrix.in_conflict(x, y), matrix.depends_on(x, y)) {
        (true, true) => "CD",
        (true, false) => "C",
        (false, true) => "D",
        (false, false) => {
            let undecided = |a, b| matrix.cell(a, b).is_some_and(|c| c.undecided);
            if undecided(x, y) || undecided(y, x) {
                "?"
            } else {
                "."
            }
        }
    }
}

fn render_table(m: &InteractionMatrix) -> String {
    let width = m.aspects.iter().map(String::len).chain([6]).max().unwrap_or(6) + 2;
    let mut out = format!("{:<width$}", "aspect");
    for a in &m.aspects {
        let _ = write!(out, "{a:<width$}");
    }
    out.truncate(out.trim_end().len());
    out.push('\n');
    if m.aspects.is_empty() {
        return out;
    }
    for x in &m.aspects {
        let mut row = format!("{x:<width$}");
        for y in &m.aspects {
            let _ = write!(row, "{:<width$}", glyph(m, x, y));
        }
        out.push_str(row.trim_end());
        out.push('\n');
    }
    out.push_str("\nC conflict in either order, D row depends on column, ? undecided, . none\n");
    out
}

fn render_csv(m: &InteractionMatrix) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(["first", "second", "conflicts", "dependencies", "undecided"])
        .expect("in-memory write");
    for row in m.summary_rows() {
        w.serialize(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory write")
}

pub fn parse_csv(text: &str) -> Result<Vec<SummaryRow>, ReportError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

fn render_dot(m: &InteractionMatrix) -> String {
    let mut out = String::from("digraph interactions {\n  node [shape=box];\n");
    for a in &m.aspects {
        let _ = writeln!(out, "  {};", dot_quote(a));
    }
    for ((a, b), c) in &m.cells {
        if !c.conflict_pairs.is_empty() {
            let _ = writeln!(
                out,
                "  {} -> {} [color=red, label={}];",
                dot_quote(a),
                dot_quote(b),
                dot_quote(&format!("disables ({})", c.conflict_pairs.len()))
            );
        }
        if !c.dependency_pairs.is_empty() {
            let _ = writeln!(
                out,
                "  {} -> {} [color=blue, label={}];",
                dot_quote(a),
                dot_quote(b),
                dot_quote(&format!("enables ({})", c.dependency_pairs.len()))
            );
        }
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpa::PairVerdict;

    #[test]
    fn rule_names_parse() {
        assert_eq!(parse_rule_name("A1-R3").unwrap(), ("A1", 3));
        assert_eq!(parse_rule_name("CW-S-A5-R12").unwrap(), ("CW-S-A5", 12));
        assert!(parse_rule_name("A1").is_err());
        assert!(parse_rule_name("A1-R0").is_err());
        assert!(parse_rule_name("-R1").is_err());
    }

    fn compiled(names: &[&str]) -> Vec<CompiledAspect> {
        names
            .iter()
            .map(|n| CompiledAspect {
                aspect: n.to_string(),
                rules: vec![],
            })
            .collect()
    }

    #[test]
    fn intra_aspect_verdicts_are_dropped() {
        let mut verdicts = VerdictMap::new();
        verdicts.insert(
            ("A-R1".into(), "A-R2".into()),
            PairVerdict {
                first: "A-R1".into(),
                second: "A-R2".into(),
                conflicts: vec![],
                dependencies: vec![],
                undecided: true,
            },
        );
        let m = aggregate(&compiled(&["A", "B"]), &verdicts).unwrap();
        assert!(m.cells.is_empty());
        assert_eq!(m.rule_pair_count, 0);
        let err = aggregate(&compiled(&["B"]), &verdicts).unwrap_err();
        assert!(matches!(err, ReportError::UnknownAspect(_)));
    }

    #[test]
    fn empty_matrix_renders_header_only() {
        let m = InteractionMatrix::default();
        let t = String::from_utf8(render(&m, &JoinpointTree::default(), Format::Table)).unwrap();
        assert_eq!(t, "aspect\n");
        assert!("xml".parse::<Format>().is_err());
    }

    #[test]
    fn undecided_cells_show_question_mark() {
        let mut m = aggregate(&compiled(&["A", "B"]), &VerdictMap::new()).unwrap();
        m.cells.insert(
            ("A".into(), "B".into()),
            Cell {
                undecided: true,
                ..Cell::default()
            },
        );
        assert_eq!(glyph(&m, "A", "B"), "?");
        assert_eq!(glyph(&m, "B", "A"), "?");
        assert_eq!(glyph(&m, "A", "A"), ".");
        let rows = parse_csv(&String::from_utf8(render_csv(&m)).unwrap()).unwrap();
        assert_eq!(rows, m.summary_rows());
    }
}
