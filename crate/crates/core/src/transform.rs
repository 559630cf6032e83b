//! Graph-transformation rules with negative application conditions, DPO
//! rule application and single-pass weaving of rule sets.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{self, dot_quote, extends_to, ElemRef, Graph, Morphism};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuleError {
    #[error("rule name must not be empty")]
    EmptyName,
    #[error("rule `{rule}`: NAC {nac} does not contain the left-hand side")]
    NacMissesLhs { rule: String, nac: usize },
    #[error("rule `{rule}`: preserved element `{elem}` differs between lhs and rhs")]
    PreservedMismatch { rule: String, elem: ElemRef },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ApplyError {
    #[error("match is not a valid embedding of `{0}`'s left-hand side")]
    NotAnEmbedding(String),
    #[error("match of `{rule}` violates NAC {nac}")]
    NacViolated { rule: String, nac: usize },
    #[error("match of `{rule}` would leave edge `{edge}` dangling")]
    Dangling { rule: String, edge: String },
}

/// A production `lhs -> rhs` with negative application conditions.
///
/// Elements are corresponded by id: an id present in both `lhs` and `rhs`
/// is preserved, ids only in `lhs` are deleted and ids only in `rhs` are
/// created. Each NAC is a supergraph of `lhs` with identical ids on the
/// shared part.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RuleDoc", into = "RuleDoc")]
pub struct Rule {
    name: String,
    lhs: Graph,
    rhs: Graph,
    nacs: Vec<Graph>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuleDoc {
    pub name: String,
    pub lhs: Graph,
    pub rhs: Graph,
    #[serde(default)]
    pub nacs: Vec<Graph>,
}

impl TryFrom<RuleDoc> for Rule {
    type Error = RuleError;

    fn try_from(d: RuleDoc) -> Result<Self, Self::Error> {
        Rule::new(d.name, d.lhs, d.rhs, d.nacs)
    }
}

impl From<Rule> for RuleDoc {
    fn from(r: Rule) -> Self {
        RuleDoc {
            name: r.name,
            lhs: r.lhs,
            rhs: r.rhs,
            nacs: r.nacs,
        }
    }
}

/// How a rule treats each element id of its two sides.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleDelta {
    pub deleted: BTreeSet<ElemRef>,
    pub created: BTreeSet<ElemRef>,
    pub preserved: BTreeSet<ElemRef>,
}

impl Rule {
    pub fn new(name: impl Into<String>, lhs: Graph, rhs: Graph, nacs: Vec<Graph>) -> Result<Self, RuleError> {
        let name = name.into();
        if name.is_empty() {
            return Err(RuleError::EmptyName);
        }
        for (i, nac) in nacs.iter().enumerate() {
            if !lhs.is_id_subgraph_of(nac) {
                return Err(RuleError::NacMissesLhs { rule: name, nac: i });
            }
        }
        for v in lhs.vertices() {
            if let Some(w) = rhs.vertex(&v.id) {
                if v != w {
                    return Err(RuleError::PreservedMismatch {
                        rule: name,
                        elem: ElemRef::Vertex(v.id.clone()),
                    });
                }
            }
        }
        for e in lhs.edges() {
            if let Some(f) = rhs.edge(&e.id) {
                if e != f {
                    return Err(RuleError::PreservedMismatch {
                        rule: name,
                        elem: ElemRef::Edge(e.id.clone()),
                    });
                }
            }
        }
        Ok(Rule { name, lhs, rhs, nacs })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn lhs(&self) -> &Graph {
        &self.lhs
    }

    pub fn rhs(&self) -> &Graph {
        &self.rhs
    }

    pub fn nacs(&self) -> &[Graph] {
        &self.nacs
    }

    pub fn delta(&self) -> RuleDelta {
        let left = self.lhs.elements();
        let right = self.rhs.elements();
        RuleDelta {
            deleted: left.difference(&right).cloned().collect(),
            created: right.difference(&left).cloned().collect(),
            preserved: left.intersection(&right).cloned().collect(),
        }
    }

    /// Elements of NAC `i` that are not part of the left-hand side.
    pub fn nac_only(&self, i: usize) -> BTreeSet<ElemRef> {
        let lhs = self.lhs.elements();
        self.nacs[i].elements().difference(&lhs).cloned().collect()
    }

    /// Renders both sides next to each other; NAC-only elements are drawn
    /// dashed and marked with an `X`.
    pub fn to_dot(&self) -> String {
        let mut out = format!("digraph {} {{\n  rankdir=LR;\n", dot_quote(&self.name));
        out.push_str("  subgraph cluster_lhs {\n  label=\"LHS\";\n");
        self.lhs.write_dot_body(&mut out, "L.", "");
        for (i, nac) in self.nacs.iter().enumerate() {
            let only = self.nac_only(i);
            for r in &only {
                match r {
                    ElemRef::Vertex(id) => {
                        let v = nac.vertex(id).expect("nac vertex");
                        out.push_str(&format!(
                            "  {} [label={}, style=dashed];\n",
                            dot_quote(&format!("L.N{i}.{id}")),
                            dot_quote(&format!("X {}", v.name().unwrap_or(id)))
                        ));
                    }
                    ElemRef::Edge(id) => {
                        let e = nac.edge(id).expect("nac edge");
                        let end = |v: &str| {
                            if self.lhs.vertex(v).is_some() {
                                format!("L.{v}")
                            } else {
                                format!("L.N{i}.{v}")
                            }
                        };
                        out.push_str(&format!(
                            "  {} -> {} [label={}, style=dashed];\n",
                            dot_quote(&end(&e.src)),
                            dot_quote(&end(&e.tgt)),
                            dot_quote(&format!("X {}", e.label))
                        ));
                    }
                }
            }
        }
        out.push_str("  }\n  subgraph cluster_rhs {\n  label=\"RHS\";\n");
        self.rhs.write_dot_body(&mut out, "R.", "");
        out.push_str("  }\n}\n");
        out
    }
}

/// An admissible embedding of a rule's left-hand side into a host.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Match {
    pub rule: String,
    pub embedding: Morphism,
}

/// Checks a candidate embedding against the structure, NAC and dangling
/// conditions of `rule` in `host`.
pub fn check_match(rule: &Rule, host: &Graph, embedding: &Morphism) -> Result<(), ApplyError> {
    if !embedding.is_valid(&rule.lhs, host) {
        return Err(ApplyError::NotAnEmbedding(rule.name.clone()));
    }
    if let Some(nac) = violated_nac(rule, host, embedding) {
        return Err(ApplyError::NacViolated {
            rule: rule.name.clone(),
            nac,
        });
    }
    if let Some(edge) = dangling_edge(rule, host, embedding) {
        return Err(ApplyError::Dangling {
            rule: rule.name.clone(),
            edge,
        });
    }
    Ok(())
}

/// Index of the first NAC the embedding extends to, if any.
pub fn violated_nac(rule: &Rule, host: &Graph, embedding: &Morphism) -> Option<usize> {
    rule.nacs
        .iter()
        .position(|nac| extends_to(nac, host, embedding))
}

/// A host edge that would be left dangling by deleting the images of the
/// rule's deleted vertices.
pub fn dangling_edge(rule: &Rule, host: &Graph, embedding: &Morphism) -> Option<String> {
    let deleted_vertices: BTreeSet<&str> = rule
        .lhs
        .vertices()
        .filter(|v| rule.rhs.vertex(&v.id).is_none())
        .filter_map(|v| embedding.vmap.get(&v.id).map(String::as_str))
        .collect();
    if deleted_vertices.is_empty() {
        return None;
    }
    let deleted_edges: BTreeSet<&str> = rule
        .lhs
        .edges()
        .filter(|e| rule.rhs.edge(&e.id).is_none())
        .filter_map(|e| embedding.emap.get(&e.id).map(String::as_str))
        .collect();
    host.edges()
        .find(|e| {
            (deleted_vertices.contains(e.src.as_str()) || deleted_vertices.contains(e.tgt.as_str()))
                && !deleted_edges.contains(e.id.as_str())
        })
        .map(|e| e.id.clone())
}

/// All admissible matches of `rule` in `host`, in monomorphism order.
pub fn find_matches(rule: &Rule, host: &Graph) -> Vec<Match> {
    graph::find_monomorphisms(&rule.lhs, host)
        .into_iter()
        .filter(|m| violated_nac(rule, host, m).is_none() && dangling_edge(rule, host, m).is_none())
        .map(|embedding| Match {
            rule: rule.name.clone(),
            embedding,
        })
        .collect()
}

/// Applies `rule` at `m`, returning the derived graph.
pub fn apply(rule: &Rule, host: &Graph, m: &Match) -> Result<Graph, ApplyError> {
    apply_traced(rule, host, &m.embedding).map(|(g, _)| g)
}

/// Applies `rule` at `embedding`; also returns the comatch from the
/// rule's right-hand side into the result.
pub fn apply_traced(rule: &Rule, host: &Graph, embedding: &Morphism) -> Result<(Graph, Morphism), ApplyError> {
    check_match(rule, host, embedding)?;
    let mut out = host.clone();
    for e in rule.lhs.edges() {
        if rule.rhs.edge(&e.id).is_none() {
            out.remove_edge(&embedding.emap[&e.id]).expect("image present");
        }
    }
    for v in rule.lhs.vertices() {
        if rule.rhs.vertex(&v.id).is_none() {
            out.remove_vertex(&embedding.vmap[&v.id])
                .expect("dangling condition checked");
        }
    }
    let mut comatch = Morphism::new();
    for v in rule.rhs.vertices() {
        let img = match embedding.vmap.get(&v.id).filter(|_| rule.lhs.vertex(&v.id).is_some()) {
            Some(img) => img.clone(),
            None => {
                let id = out.fresh_vertex_id();
                let mut w = v.clone();
                w.id = id.clone();
                out.add_vertex(w).expect("fresh id");
                id
            }
        };
        comatch.vmap.insert(v.id.clone(), img);
    }
    for e in rule.rhs.edges() {
        let img = if rule.lhs.edge(&e.id).is_some() {
            embedding.emap[&e.id].clone()
        } else {
            let id = out.fresh_edge_id();
            out.add_edge(graph::Edge::new(
                &id,
                &comatch.vmap[&e.src],
                &comatch.vmap[&e.tgt],
                &e.label,
            ))
            .expect("endpoints mapped");
            id
        };
        comatch.emap.insert(e.id.clone(), img);
    }
    Ok((out, comatch))
}

/// One entry of the weave log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeaveEvent {
    Applied { rule: String, embedding: Morphism },
    Skipped { rule: String, embedding: Morphism, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Weave {
    pub graph: Graph,
    pub log: Vec<WeaveEvent>,
}

impl Weave {
    pub fn applied(&self) -> usize {
        self.log
            .iter()
            .filter(|e| matches!(e, WeaveEvent::Applied { .. }))
            .count()
    }
}

/// Single-pass weaving: all matches of all rules are computed against the
/// original host, then applied one after another in rule order and match
/// order. A match invalidated by an earlier application is skipped.
pub fn weave(rules: &[Rule], host: &Graph) -> Weave {
    let matches: Vec<(&Rule, Match)> = rules
        .iter()
        .flat_map(|r| find_matches(r, host).into_iter().map(move |m| (r, m)))
        .collect();
    let mut graph = host.clone();
    let mut log = Vec::with_capacity(matches.len());
    for (rule, m) in matches {
        match apply_traced(rule, &graph, &m.embedding) {
            Ok((next, _)) => {
                graph = next;
                log.push(WeaveEvent::Applied {
                    rule: m.rule,
                    embedding: m.embedding,
                });
            }
            Err(err) => log.push(WeaveEvent::Skipped {
                rule: m.rule,
                embedding: m.embedding,
                reason: err.to_string(),
            }),
        }
    }
    Weave { graph, log }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, Vertex, VertexKind};

    fn v(id: &str) -> Vertex {
        Vertex::named(id, VertexKind::State, id)
    }

    fn g(vs: &[&str], es: &[(&str, &str, &str, &str)]) -> Graph {
        let mut g = Graph::new();
        for id in vs {
            g.add_vertex(v(id)).unwrap();
        }
        for (id, s, t, l) in es {
            g.add_edge(Edge::new(*id, *s, *t, *l)).unwrap();
        }
        g
    }

    #[test]
    fn identity_rule_delta() {
        let side = g(&["a", "b"], &[("e", "a", "b", "x")]);
        let r = Rule::new("id", side.clone(), side.clone(), vec![]).unwrap();
        let d = r.delta();
        assert!(d.deleted.is_empty() && d.created.is_empty());
        assert_eq!(d.preserved.len(), 3);
        let m = &find_matches(&r, &side)[0];
        assert!(graph::is_isomorphic(&apply(&r, &side, m).unwrap(), &side).is_some());
    }

    #[test]
    fn nac_must_contain_lhs() {
        let lhs = g(&["a"], &[]);
        let bad_nac = g(&["b"], &[]);
        assert!(matches!(
            Rule::new("r", lhs.clone(), lhs, vec![bad_nac]),
            Err(RuleError::NacMissesLhs { .. })
        ));
    }

    #[test]
    fn preserved_elements_cannot_change() {
        let lhs = g(&["a"], &[]);
        let mut rhs = Graph::new();
        rhs.add_vertex(Vertex::named("a", VertexKind::State, "other")).unwrap();
        assert!(matches!(
            Rule::new("r", lhs, rhs, vec![]),
            Err(RuleError::PreservedMismatch { .. })
        ));
    }

    #[test]
    fn dangling_condition_blocks_vertex_deletion() {
        let lhs = g(&["a", "b"], &[("e", "a", "b", "x")]);
        let rhs = g(&["a"], &[]);
        let r = Rule::new("del", lhs, rhs, vec![]).unwrap();
        let host = g(&["a", "b", "c"], &[("1", "a", "b", "x"), ("2", "c", "b", "y")]);
        assert!(find_matches(&r, &host).is_empty());
        let mut cleaned = host.clone();
        cleaned.remove_edge("2").unwrap();
        let ms = find_matches(&r, &cleaned);
        assert_eq!(ms.len(), 1);
        let out = apply(&r, &cleaned, &ms[0]).unwrap();
        assert!(out.vertex("b").is_none());
        assert!(out.is_well_formed());
        // the rejected embedding is refused by apply as well
        let stale = Match {
            rule: "del".into(),
            embedding: ms[0].embedding.clone(),
        };
        assert!(matches!(apply(&r, &host, &stale), Err(ApplyError::Dangling { .. })));
    }

    #[test]
    fn created_ids_are_fresh() {
        let lhs = g(&["a"], &[]);
        let rhs = g(&["a", "n"], &[("c", "a", "n", "new")]);
        let r = Rule::new("grow", lhs, rhs, vec![]).unwrap();
        let host = g(&["a", "_v0"], &[("_e1", "a", "_v0", "old")]);
        let m = &find_matches(&r, &host)[0];
        let (out, co) = apply_traced(&r, &host, &m.embedding).unwrap();
        assert_eq!(out.vertex_count(), 3);
        assert!(host.vertex(&co.vmap["n"]).is_none());
        assert!(host.edge(&co.emap["c"]).is_none());
        assert!(co.is_valid(r.rhs(), &out));
    }

    #[test]
    fn weave_uses_matches_of_the_original_host() {
        // r1 creates the x-edge r2 needs; single pass never rematches
        let r1 = Rule::new(
            "r1",
            g(&["a", "b"], &[]),
            g(&["a", "b"], &[("c", "a", "b", "x")]),
            vec![],
        )
        .unwrap();
        let needs = g(&["a", "b"], &[("p", "a", "b", "x")]);
        let r2 = Rule::new("r2", needs.clone(), g(&["a", "b"], &[("p", "a", "b", "x"), ("q", "b", "a", "y")]), vec![])
            .unwrap();
        let host = g(&["a", "b"], &[]);
        assert!(find_matches(&r2, &host).is_empty());
        let w = weave(&[r1.clone(), r2], &host);
        assert_eq!(w.applied(), 1);
        assert_eq!(w.graph.edge_count(), 1);
        assert!(graph::is_isomorphic(&weave(&[], &host).graph, &host).is_some());
    }

    #[test]
    fn weave_skips_invalidated_matches() {
        // r creates an a->b edge unless one exists; two matches collapse to one
        let lhs = g(&["a", "b"], &[]);
        let nac = g(&["a", "b"], &[("n", "a", "b", "x")]);
        let rhs = g(&["a", "b"], &[("c", "a", "b", "x")]);
        let r = Rule::new("once", lhs, rhs, vec![nac]).unwrap();
        let mut host = g(&["a", "b"], &[]);
        host.add_vertex(Vertex::named("a2", VertexKind::State, "a")).unwrap();
        host.add_vertex(Vertex::named("b2", VertexKind::State, "b")).unwrap();
        let w = weave(std::slice::from_ref(&r), &host);
        assert_eq!(find_matches(&r, &host).len(), 4);
        assert_eq!(w.applied(), 4);
        let w2 = weave(&[r.clone(), r], &host);
        assert_eq!(w2.applied(), 4);
        assert_eq!(w2.log.len(), 8);
    }

    #[test]
    fn rule_dot_marks_nac_elements() {
        let lhs = g(&["b", "c"], &[]);
        let nac = g(&["b", "c"], &[("n", "b", "c", "e4")]);
        let r = Rule::new("fig", lhs.clone(), lhs, vec![nac]).unwrap();
        let dot = r.to_dot();
        assert!(dot.contains("label=\"X e4\", style=dashed"));
    }
}
