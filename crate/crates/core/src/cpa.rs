//! Critical pair analysis.
//!
//! For rules `p1`, `p2` every critical pair is a jointly covered overlap
//! of two rule sides on which applying `p1` disables `p2` (conflict) or
//! enables it (dependency):
//!
//! * delete-use: `lhs1` over `lhs2`; `p1` deletes an element `p2` uses.
//! * produce-forbid: `rhs1` over a NAC of `p2`; `p1` creates an element
//!   the NAC forbids. The overlap is the graph after `p1`.
//! * produce-use: `rhs1` over `lhs2`; `p1` creates an element `p2` uses.
//!   The overlap is the graph after `p1`.
//! * delete-forbid: `lhs1` over a NAC of `p2`; `p1` deletes an element the
//!   NAC requires.
//!
//! Post-graph overlaps are checked by undoing `p1` on them; candidates
//! where the undo leaves dangling edges are discarded.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{enumerate_overlaps_where, overlap_fingerprint, ElemRef, Graph, Morphism, Overlap, OverlapCapExceeded};
use crate::transform::{apply_traced, check_match, Rule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionKind {
    ConflictDeleteUse,
    ConflictProduceForbid,
    DependencyProduceUse,
    DependencyDeleteForbid,
}

impl InteractionKind {
    pub fn is_conflict(self) -> bool {
        matches!(self, InteractionKind::ConflictDeleteUse | InteractionKind::ConflictProduceForbid)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            InteractionKind::ConflictDeleteUse => "conflict_delete_use",
            InteractionKind::ConflictProduceForbid => "conflict_produce_forbid",
            InteractionKind::DependencyProduceUse => "dependency_produce_use",
            InteractionKind::DependencyDeleteForbid => "dependency_delete_forbid",
        }
    }
}

/// Which graph of a rule an embedding starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Lhs,
    Rhs,
    Nac(usize),
}

impl Side {
    fn graph(self, rule: &Rule) -> Option<&Graph> {
        match self {
            Side::Lhs => Some(rule.lhs()),
            Side::Rhs => Some(rule.rhs()),
            Side::Nac(i) => rule.nacs().get(i),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Embedding {
    pub side: Side,
    pub map: Morphism,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticalPair {
    pub first: String,
    pub second: String,
    pub kind: InteractionKind,
    pub overlap: Graph,
    /// Overlap elements realizing the interference.
    pub witness: Vec<ElemRef>,
    /// Embeddings from a side of `first` and a side of `second`.
    pub embeddings: [Embedding; 2],
}

impl CriticalPair {
    fn fingerprint(&self) -> Vec<u8> {
        let mut key = format!("{}|{:?}|{:?}|", self.kind.as_str(), self.embeddings[0].side, self.embeddings[1].side).into_bytes();
        key.extend(overlap_fingerprint(
            &self.overlap,
            &[&self.embeddings[0].map, &self.embeddings[1].map],
            &self.witness,
        ));
        key
    }

    /// Re-checks the stored pair against its rules: both embeddings are
    /// valid and jointly cover the overlap, and the witness satisfies the
    /// condition of `kind`.
    pub fn verify(&self, p1: &Rule, p2: &Rule) -> bool {
        let [e1, e2] = &self.embeddings;
        let expected = match self.kind {
            InteractionKind::ConflictDeleteUse => (Side::Lhs, matches!(e2.side, Side::Lhs)),
            InteractionKind::ConflictProduceForbid => (Side::Rhs, matches!(e2.side, Side::Nac(_))),
            InteractionKind::DependencyProduceUse => (Side::Rhs, matches!(e2.side, Side::Lhs)),
            InteractionKind::DependencyDeleteForbid => (Side::Lhs, matches!(e2.side, Side::Nac(_))),
        };
        if e1.side != expected.0 || !expected.1 || p1.name() != self.first || p2.name() != self.second {
            return false;
        }
        let (Some(s1), Some(s2)) = (e1.side.graph(p1), e2.side.graph(p2)) else {
            return false;
        };
        if !self.overlap.is_well_formed() || !e1.map.is_valid(s1, &self.overlap) || !e2.map.is_valid(s2, &self.overlap) {
            return false;
        }
        let (i1, i2) = (e1.map.image(), e2.map.image());
        if !self.overlap.elements().iter().all(|x| i1.contains(x) || i2.contains(x)) {
            return false;
        }
        let expected = witness(self.kind, p1, p2, e2.side, &e1.map, &e2.map);
        !self.witness.is_empty() && self.witness.iter().all(|w| expected.contains(w))
    }
}

/// Overlap elements that realize an interference of `kind`.
fn witness(kind: InteractionKind, p1: &Rule, p2: &Rule, side2: Side, m1: &Morphism, m2: &Morphism) -> BTreeSet<ElemRef> {
    let delta = p1.delta();
    let acting = if matches!(kind, InteractionKind::ConflictDeleteUse | InteractionKind::DependencyDeleteForbid) {
        delta.deleted
    } else {
        delta.created
    };
    let acted: BTreeSet<ElemRef> = acting.iter().filter_map(|x| m1.map(x)).collect();
    let touched: BTreeSet<ElemRef> = match side2 {
        Side::Nac(i) => p2.nac_only(i).iter().filter_map(|x| m2.map(x)).collect(),
        _ => m2.image(),
    };
    acted.intersection(&touched).cloned().collect()
}

/// Per-pair result; `undecided` marks a category cut short by the cap.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairVerdict {
    pub first: String,
    pub second: String,
    pub conflicts: Vec<CriticalPair>,
    pub dependencies: Vec<CriticalPair>,
    #[serde(default)]
    pub undecided: bool,
}

impl PairVerdict {
    pub fn is_silent(&self) -> bool {
        self.conflicts.is_empty() && self.dependencies.is_empty() && !self.undecided
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CpaError {
    #[error("rule name `{0}` is used more than once")]
    DuplicateRuleName(String),
}

/// Undoes `rule` on a post-graph at `comatch`; `None` when removing a
/// created vertex would leave edges dangling.
fn invert(rule: &Rule, post: &Graph, comatch: &Morphism) -> Option<(Graph, Morphism)> {
    let mut pre = post.clone();
    for e in rule.rhs().edges().filter(|e| rule.lhs().edge(&e.id).is_none()) {
        pre.remove_edge(&comatch.emap[&e.id]).ok()?;
    }
    for v in rule.rhs().vertices().filter(|v| rule.lhs().vertex(&v.id).is_none()) {
        pre.remove_vertex(&comatch.vmap[&v.id]).ok()?;
    }
    let mut m = Morphism::new();
    for v in rule.lhs().vertices() {
        let img = if rule.rhs().vertex(&v.id).is_some() {
            comatch.vmap[&v.id].clone()
        } else {
            let id = pre.fresh_vertex_id();
            let mut w = v.clone();
            w.id = id.clone();
            pre.add_vertex(w).expect("fresh id");
            id
        };
        m.vmap.insert(v.id.clone(), img);
    }
    for e in rule.lhs().edges() {
        let img = if rule.rhs().edge(&e.id).is_some() {
            comatch.emap[&e.id].clone()
        } else {
            let id = pre.fresh_edge_id();
            let mut f = e.clone();
            f.id = id.clone();
            f.src = m.vmap[&e.src].clone();
            f.tgt = m.vmap[&e.tgt].clone();
            pre.add_edge(f).expect("endpoints mapped");
            id
        };
        m.emap.insert(e.id.clone(), img);
    }
    Some((pre, m))
}

fn restrict(m: &Morphism, to: &Graph) -> Morphism {
    Morphism {
        vmap: m.vmap.iter().filter(|(k, _)| to.vertex(k).is_some()).map(|(k, v)| (k.clone(), v.clone())).collect(),
        emap: m.emap.iter().filter(|(k, _)| to.edge(k).is_some()).map(|(k, v)| (k.clone(), v.clone())).collect(),
    }
}

fn lands_in(m: &Morphism, g: &Graph) -> bool {
    m.image().iter().all(|x| g.contains(x))
}

struct Finder<'a> {
    p1: &'a Rule,
    p2: &'a Rule,
    cap: usize,
}

impl Finder<'_> {
    fn collect(
        &self,
        kind: InteractionKind,
        side2: Side,
        g1: &Graph,
        g2: &Graph,
        admissible: impl Fn(&Overlap) -> bool,
    ) -> Result<Vec<CriticalPair>, OverlapCapExceeded> {
        let side1 = if matches!(kind, InteractionKind::ConflictDeleteUse | InteractionKind::DependencyDeleteForbid) {
            Side::Lhs
        } else {
            Side::Rhs
        };
        let found = enumerate_overlaps_where(g1, g2, self.cap, |ov| {
            !witness(kind, self.p1, self.p2, side2, &ov.left, &ov.right).is_empty() && admissible(ov)
        })?;
        Ok(found
            .into_iter()
            .map(|ov| CriticalPair {
                first: self.p1.name().to_string(),
                second: self.p2.name().to_string(),
                kind,
                witness: witness(kind, self.p1, self.p2, side2, &ov.left, &ov.right).into_iter().collect(),
                overlap: ov.graph,
                embeddings: [
                    Embedding { side: side1, map: ov.left },
                    Embedding { side: side2, map: ov.right },
                ],
            })
            .collect())
    }

    fn delete_use(&self) -> Result<Vec<CriticalPair>, OverlapCapExceeded> {
        let (p1, p2) = (self.p1, self.p2);
        self.collect(InteractionKind::ConflictDeleteUse, Side::Lhs, p1.lhs(), p2.lhs(), |ov| {
            check_match(p1, &ov.graph, &ov.left).is_ok() && check_match(p2, &ov.graph, &ov.right).is_ok()
        })
    }

    fn produce_forbid(&self) -> Result<Vec<CriticalPair>, OverlapCapExceeded> {
        let (p1, p2) = (self.p1, self.p2);
        let mut out = Vec::new();
        for (i, nac) in p2.nacs().iter().enumerate() {
            out.extend(self.collect(InteractionKind::ConflictProduceForbid, Side::Nac(i), p1.rhs(), nac, |ov| {
                let Some((pre, m1)) = invert(p1, &ov.graph, &ov.left) else { return false };
                let m2 = restrict(&ov.right, p2.lhs());
                check_match(p1, &pre, &m1).is_ok() && lands_in(&m2, &pre) && check_match(p2, &pre, &m2).is_ok()
            })?);
        }
        Ok(out)
    }

    fn produce_use(&self) -> Result<Vec<CriticalPair>, OverlapCapExceeded> {
        let (p1, p2) = (self.p1, self.p2);
        self.collect(InteractionKind::DependencyProduceUse, Side::Lhs, p1.rhs(), p2.lhs(), |ov| {
            let Some((pre, m1)) = invert(p1, &ov.graph, &ov.left) else { return false };
            check_match(p1, &pre, &m1).is_ok() && check_match(p2, &ov.graph, &ov.right).is_ok()
        })
    }

    fn delete_forbid(&self) -> Result<Vec<CriticalPair>, OverlapCapExceeded> {
        let (p1, p2) = (self.p1, self.p2);
        let mut out = Vec::new();
        for (i, nac) in p2.nacs().iter().enumerate() {
            out.extend(self.collect(InteractionKind::DependencyDeleteForbid, Side::Nac(i), p1.lhs(), nac, |ov| {
                let Ok((post, _)) = apply_traced(p1, &ov.graph, &ov.left) else { return false };
                let m2 = restrict(&ov.right, p2.lhs());
                lands_in(&m2, &post) && check_match(p2, &post, &m2).is_ok()
            })?);
        }
        Ok(out)
    }
}

fn dedup(pairs: Vec<CriticalPair>) -> Vec<CriticalPair> {
    let mut seen = HashSet::new();
    pairs.into_iter().filter(|p| seen.insert(p.fingerprint())).collect()
}

/// Critical pairs where applying `p1` disables `p2`.
pub fn conflicts(p1: &Rule, p2: &Rule, cap: usize) -> Result<Vec<CriticalPair>, OverlapCapExceeded> {
    let f = Finder { p1, p2, cap };
    let mut out = f.delete_use()?;
    out.extend(f.produce_forbid()?);
    Ok(dedup(out))
}

/// Critical pairs where applying `p1` enables `p2`.
pub fn dependencies(p1: &Rule, p2: &Rule, cap: usize) -> Result<Vec<CriticalPair>, OverlapCapExceeded> {
    let f = Finder { p1, p2, cap };
    let mut out = f.produce_use()?;
    out.extend(f.delete_forbid()?);
    Ok(dedup(out))
}

/// Both directions of interference from `p1` towards `p2`. A category that
/// exceeds the cap contributes nothing and marks the verdict undecided.
pub fn analyze_pair(p1: &Rule, p2: &Rule, cap: usize) -> PairVerdict {
    let c = conflicts(p1, p2, cap);
    let d = dependencies(p1, p2, cap);
    PairVerdict {
        first: p1.name().to_string(),
        second: p2.name().to_string(),
        undecided: c.is_err() || d.is_err(),
        conflicts: c.unwrap_or_default(),
        dependencies: d.unwrap_or_default(),
    }
}

pub type VerdictMap = BTreeMap<(String, String), PairVerdict>;

/// Analyzes the given ordered pairs in parallel; `counter` is bumped once
/// per analyzed pair.
pub fn analyze_pairs(pairs: &[(&Rule, &Rule)], cap: usize, counter: &AtomicUsize) -> VerdictMap {
    pairs
        .par_iter()
        .map(|(p1, p2)| {
            counter.fetch_add(1, Ordering::Relaxed);
            ((p1.name().to_string(), p2.name().to_string()), analyze_pair(p1, p2, cap))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// Verdicts for every ordered pair of distinct rules.
pub fn analyze_rules(rules: &[Rule], cap: usize) -> Result<VerdictMap, CpaError> {
    let mut names = BTreeSet::new();
    for r in rules {
        if !names.insert(r.name()) {
            return Err(CpaError::DuplicateRuleName(r.name().to_string()));
        }
    }
    let pairs: Vec<(&Rule, &Rule)> = rules
        .iter()
        .enumerate()
        .flat_map(|(i, a)| rules.iter().enumerate().filter(move |(j, _)| *j != i).map(move |(_, b)| (a, b)))
        .collect();
    Ok(analyze_pairs(&pairs, cap, &AtomicUsize::new(0)))
}
