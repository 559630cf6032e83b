//! State-machine models and their flattening into graphs.
//!
//! Non-orthogonal composites disappear: entering one enters its initial
//! substate, leaving one is possible from every substate. Orthogonal
//! composites become one `config` vertex per combination of region
//! substates, named `top|...|bottom`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Edge, Graph, Vertex, VertexKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateMachine {
    pub name: String,
    #[serde(default)]
    pub states: Vec<State>,
    #[serde(default)]
    pub transitions: Vec<Transition>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    #[default]
    Simple,
    Composite,
    Initial,
    Final,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct State {
    pub id: String,
    #[serde(default)]
    pub kind: StateKind,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub orthogonal: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub regions: Vec<Region>,
}

impl State {
    pub fn simple(id: impl Into<String>) -> Self {
        State {
            id: id.into(),
            kind: StateKind::Simple,
            orthogonal: false,
            regions: Vec::new(),
        }
    }

    pub fn of_kind(id: impl Into<String>, kind: StateKind) -> Self {
        State {
            kind,
            ..State::simple(id)
        }
    }

    pub fn composite(id: impl Into<String>, orthogonal: bool, regions: Vec<Region>) -> Self {
        State {
            id: id.into(),
            kind: StateKind::Composite,
            orthogonal,
            regions,
        }
    }

    fn is_leaf(&self) -> bool {
        self.kind != StateKind::Composite
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub initial: String,
    pub states: Vec<State>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransitionKind {
    #[default]
    Simple,
    Fork,
    /// Joins are written as several `join` transitions sharing target and
    /// event, one per source.
    Join,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transition {
    pub source: String,
    pub targets: Vec<String>,
    pub event: String,
    #[serde(default)]
    pub kind: TransitionKind,
}

impl Transition {
    pub fn simple(source: impl Into<String>, target: impl Into<String>, event: impl Into<String>) -> Self {
        Transition {
            source: source.into(),
            targets: vec![target.into()],
            event: event.into(),
            kind: TransitionKind::Simple,
        }
    }
}

/// A validation finding attached to a model element.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub element: String,
    pub reason: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.element, self.reason)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FlattenError {
    #[error("invalid model: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
    #[error("join transition on event `{0}` is not supported")]
    JoinUnsupported(String),
    #[error("state `{0}` is not an orthogonal composite")]
    NotOrthogonal(String),
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FlattenOptions {
    /// Drop config vertices that cannot be reached from the initial vertex.
    pub prune_unreachable_configs: bool,
}

#[derive(Clone, Copy)]
struct Loc<'a> {
    state: &'a State,
    /// Enclosing composite and region index.
    parent: Option<(&'a State, usize)>,
}

fn index(sm: &StateMachine) -> (BTreeMap<&str, Loc<'_>>, Vec<Diagnostic>) {
    fn walk<'a>(
        states: &'a [State],
        parent: Option<(&'a State, usize)>,
        idx: &mut BTreeMap<&'a str, Loc<'a>>,
        diags: &mut Vec<Diagnostic>,
    ) {
        for s in states {
            if idx.insert(&s.id, Loc { state: s, parent }).is_some() {
                diags.push(diag(&s.id, "duplicate state id"));
            }
            for (r, region) in s.regions.iter().enumerate() {
                walk(&region.states, Some((s, r)), idx, diags);
            }
        }
    }
    let mut idx = BTreeMap::new();
    let mut diags = Vec::new();
    walk(&sm.states, None, &mut idx, &mut diags);
    (idx, diags)
}

fn diag(element: &str, reason: impl Into<String>) -> Diagnostic {
    Diagnostic {
        element: element.to_string(),
        reason: reason.into(),
    }
}

/// Checks every structural invariant of the model; empty when valid.
pub fn validate(sm: &StateMachine) -> Vec<Diagnostic> {
    let (idx, mut diags) = index(sm);

    let initials = sm.states.iter().filter(|s| s.kind == StateKind::Initial).count();
    if initials != 1 {
        diags.push(diag(
            &sm.name,
            format!("expected exactly one top-level initial state, found {initials}"),
        ));
    }

    for loc in idx.values() {
        let s = loc.state;
        if s.id.is_empty() || s.id.contains('|') {
            diags.push(diag(&s.id, "state ids must be non-empty and must not contain `|`"));
        }
        match s.kind {
            StateKind::Composite => {
                if s.orthogonal && s.regions.len() < 2 {
                    diags.push(diag(&s.id, "orthogonal composite needs at least two regions"));
                }
                if !s.orthogonal && s.regions.len() != 1 {
                    diags.push(diag(&s.id, "non-orthogonal composite needs exactly one region"));
                }
                for (r, region) in s.regions.iter().enumerate() {
                    if !region.states.iter().any(|c| c.id == region.initial) {
                        diags.push(diag(
                            &s.id,
                            format!("initial `{}` of region {r} is not a state of that region", region.initial),
                        ));
                    }
                    for c in &region.states {
                        if c.kind == StateKind::Initial {
                            diags.push(diag(&c.id, "regions declare their initial state via `initial`"));
                        }
                        if s.orthogonal && c.kind == StateKind::Composite {
                            diags.push(diag(&c.id, "composite states inside orthogonal regions are not supported"));
                        }
                    }
                }
            }
            _ => {
                if s.orthogonal || !s.regions.is_empty() {
                    diags.push(diag(&s.id, "only composite states may have regions"));
                }
            }
        }
    }

    let orth_parent = |id: &str| -> Option<(&str, usize)> {
        idx.get(id)
            .and_then(|l| l.parent)
            .filter(|(p, _)| p.orthogonal)
            .map(|(p, r)| (p.id.as_str(), r))
    };

    let mut joins: BTreeMap<(&[String], &str), Vec<&str>> = BTreeMap::new();
    for (i, t) in sm.transitions.iter().enumerate() {
        let label = format!("transition {i} ({})", t.event);
        for end in std::iter::once(&t.source).chain(&t.targets) {
            if !idx.contains_key(end.as_str()) {
                diags.push(diag(&label, format!("undeclared state `{end}`")));
            }
        }
        for tgt in &t.targets {
            if idx.get(tgt.as_str()).is_some_and(|l| l.state.kind == StateKind::Initial) {
                diags.push(diag(&label, format!("initial state `{tgt}` cannot be a target")));
            }
        }
        match t.kind {
            TransitionKind::Simple | TransitionKind::Join if t.targets.len() != 1 => {
                diags.push(diag(&label, "expected exactly one target"));
            }
            TransitionKind::Fork => {
                if t.targets.len() < 2 {
                    diags.push(diag(&label, "fork needs at least two targets"));
                }
                if let Some(reason) = distinct_regions(t.targets.iter().map(String::as_str), &orth_parent) {
                    diags.push(diag(&label, format!("fork targets {reason}")));
                }
            }
            _ => {}
        }
        if t.kind == TransitionKind::Join {
            joins.entry((&t.targets, &t.event)).or_default().push(&t.source);
        }
    }
    for ((_, event), sources) in joins {
        let label = format!("join ({event})");
        if sources.len() < 2 {
            diags.push(diag(&label, "join needs at least two sources"));
        }
        if let Some(reason) = distinct_regions(sources.into_iter(), &orth_parent) {
            diags.push(diag(&label, format!("join sources {reason}")));
        }
    }
    diags
}

fn distinct_regions<'a>(
    members: impl Iterator<Item = &'a str>,
    orth_parent: &dyn Fn(&str) -> Option<(&'a str, usize)>,
) -> Option<String> {
    let mut owner = None;
    let mut seen = BTreeSet::new();
    for m in members {
        let Some((p, r)) = orth_parent(m) else {
            return Some("must be substates of an orthogonal composite".into());
        };
        if owner.is_some_and(|o| o != p) {
            return Some("must lie in one orthogonal composite".into());
        }
        owner = Some(p);
        if !seen.insert(r) {
            return Some("must lie in distinct regions".into());
        }
    }
    None
}

/// All combinations of region substates of an orthogonal composite, in
/// lexicographic order of the per-region state ids.
pub fn configurations(composite: &State) -> Result<Vec<String>, FlattenError> {
    if composite.kind != StateKind::Composite || !composite.orthogonal {
        return Err(FlattenError::NotOrthogonal(composite.id.clone()));
    }
    Ok(config_tuples(composite).into_iter().map(|c| c.join("|")).collect())
}

fn config_tuples(composite: &State) -> Vec<Vec<&str>> {
    let mut out: Vec<Vec<&str>> = vec![Vec::new()];
    for region in &composite.regions {
        let mut ids: Vec<&str> = region.states.iter().map(|s| s.id.as_str()).collect();
        ids.sort_unstable();
        out = out
            .into_iter()
            .flat_map(|prefix| {
                ids.iter().map(move |id| {
                    let mut next = prefix.clone();
                    next.push(id);
                    next
                })
            })
            .collect();
    }
    out
}

pub fn flatten(sm: &StateMachine) -> Result<Graph, FlattenError> {
    flatten_with(sm, FlattenOptions::default())
}

pub fn flatten_with(sm: &StateMachine, options: FlattenOptions) -> Result<Graph, FlattenError> {
    let diags = validate(sm);
    if !diags.is_empty() {
        return Err(FlattenError::Invalid(diags));
    }
    if let Some(t) = sm.transitions.iter().find(|t| t.kind == TransitionKind::Join) {
        return Err(FlattenError::JoinUnsupported(t.event.clone()));
    }
    let (idx, _) = index(sm);
    let f = Flattener { idx };

    let mut g = Graph::new();
    for loc in f.idx.values() {
        let s = loc.state;
        if s.is_leaf() && f.orth_parent(&s.id).is_none() {
            let kind = match s.kind {
                StateKind::Initial => VertexKind::Initial,
                StateKind::Final => VertexKind::Final,
                _ => VertexKind::State,
            };
            g.add_vertex(Vertex::named(&s.id, kind, &s.id)).expect("unique state ids");
        }
        if s.kind == StateKind::Composite && s.orthogonal {
            for c in config_tuples(s) {
                let name = c.join("|");
                g.add_vertex(Vertex::named(&name, VertexKind::Config, &name))
                    .expect("config names are unique");
            }
        }
    }

    for (i, t) in sm.transitions.iter().enumerate() {
        let pairs = f.transition_edges(t);
        let single = pairs.len() == 1;
        for (k, (src, tgt)) in pairs.into_iter().enumerate() {
            let id = if single { format!("t{i}") } else { format!("t{i}.{k}") };
            g.add_edge(Edge::new(id, src, tgt, &t.event)).expect("endpoints are flattened vertices");
        }
    }

    if options.prune_unreachable_configs {
        prune_configs(&mut g);
    }
    Ok(g)
}

struct Flattener<'a> {
    idx: BTreeMap<&'a str, Loc<'a>>,
}

impl<'a> Flattener<'a> {
    fn orth_parent(&self, id: &str) -> Option<(&'a State, usize)> {
        self.idx[id].parent.filter(|(p, _)| p.orthogonal)
    }

    fn config_name(parts: &[&str]) -> String {
        parts.join("|")
    }

    fn initials(composite: &'a State) -> Vec<&'a str> {
        composite.regions.iter().map(|r| r.initial.as_str()).collect()
    }

    fn entry(&self, id: &str) -> String {
        let s = self.idx[id].state;
        if s.kind == StateKind::Composite {
            return if s.orthogonal {
                Self::config_name(&Self::initials(s))
            } else {
                self.entry(&s.regions[0].initial)
            };
        }
        match self.orth_parent(id) {
            Some((p, r)) => {
                let mut parts = Self::initials(p);
                parts[r] = &s.id;
                Self::config_name(&parts)
            }
            None => s.id.clone(),
        }
    }

    fn exits(&self, id: &str) -> Vec<String> {
        let s = self.idx[id].state;
        if s.kind == StateKind::Composite {
            return if s.orthogonal {
                config_tuples(s).iter().map(|c| Self::config_name(c)).collect()
            } else {
                s.regions[0].states.iter().flat_map(|c| self.exits(&c.id)).collect()
            };
        }
        match self.orth_parent(id) {
            Some((p, r)) => config_tuples(p)
                .into_iter()
                .filter(|c| c[r] == s.id)
                .map(|c| Self::config_name(&c))
                .collect(),
            None => vec![s.id.clone()],
        }
    }

    fn transition_edges(&self, t: &Transition) -> Vec<(String, String)> {
        match t.kind {
            TransitionKind::Fork => {
                let (p, _) = self.orth_parent(&t.targets[0]).expect("validated fork");
                let mut parts = Self::initials(p);
                for tgt in &t.targets {
                    let (_, r) = self.orth_parent(tgt).expect("validated fork");
                    parts[r] = tgt;
                }
                let target = Self::config_name(&parts);
                self.exits(&t.source)
                    .into_iter()
                    .map(|x| (x, target.clone()))
                    .collect()
            }
            _ => {
                let tgt = &t.targets[0];
                match (self.orth_parent(&t.source), self.orth_parent(tgt)) {
                    (Some((ps, rs)), Some((pt, rt))) if ps.id == pt.id => config_tuples(ps)
                        .into_iter()
                        .filter(|c| c[rs] == t.source)
                        .map(|c| {
                            let mut next = c.clone();
                            next[rt] = tgt;
                            (Self::config_name(&c), Self::config_name(&next))
                        })
                        .collect(),
                    _ => {
                        let target = self.entry(tgt);
                        self.exits(&t.source)
                            .into_iter()
                            .map(|x| (x, target.clone()))
                            .collect()
                    }
                }
            }
        }
    }
}

fn prune_configs(g: &mut Graph) {
    let mut reached = BTreeSet::new();
    let mut queue: VecDeque<String> = g
        .vertices()
        .filter(|v| v.kind == VertexKind::Initial)
        .map(|v| v.id.clone())
        .collect();
    while let Some(v) = queue.pop_front() {
        if !reached.insert(v.clone()) {
            continue;
        }
        queue.extend(g.edges().filter(|e| e.src == v).map(|e| e.tgt.clone()));
    }
    let doomed: Vec<String> = g
        .vertices()
        .filter(|v| v.kind == VertexKind::Config && !reached.contains(&v.id))
        .map(|v| v.id.clone())
        .collect();
    for v in doomed {
        let edges: Vec<String> = g.incident_edges(&v).map(|e| e.id.clone()).collect();
        for e in edges {
            g.remove_edge(&e).expect("listed edge");
        }
        g.remove_vertex(&v).expect("isolated now");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn orth(id: &str, regions: &[(&str, &[&str])]) -> State {
        State::composite(
            id,
            true,
            regions
                .iter()
                .map(|(init, states)| Region {
                    initial: init.to_string(),
                    states: states.iter().map(|s| State::simple(*s)).collect(),
                })
                .collect(),
        )
    }

    #[test]
    fn singleton_regions_give_one_config() {
        assert_eq!(configurations(&orth("o", &[("a", &["a"]), ("b", &["b"])])).unwrap(), ["a|b"]);
    }

    #[test]
    fn config_count_is_region_product() {
        let o = orth("o", &[("x", &["x", "y", "z"]), ("p", &["p", "q"])]);
        let cs = configurations(&o).unwrap();
        assert_eq!(cs, ["x|p", "x|q", "y|p", "y|q", "z|p", "z|q"]);
        assert!(configurations(&State::simple("s")).is_err());
    }

    fn machine(states: Vec<State>, transitions: Vec<Transition>) -> StateMachine {
        let mut all = vec![State::of_kind("init", StateKind::Initial)];
        all.extend(states);
        StateMachine {
            name: "m".into(),
            states: all,
            transitions,
        }
    }

    #[test]
    fn fork_targets_in_one_region_are_rejected() {
        let sm = machine(
            vec![State::simple("s"), orth("o", &[("a", &["a", "b"]), ("c", &["c"])])],
            vec![Transition {
                source: "s".into(),
                targets: vec!["a".into(), "b".into()],
                event: "f".into(),
                kind: TransitionKind::Fork,
            }],
        );
        let d = validate(&sm);
        assert_eq!(d.len(), 1);
        assert!(d[0].reason.contains("fork targets must lie in distinct regions"));
    }

    #[test]
    fn undeclared_target_is_reported() {
        let sm = machine(vec![State::simple("s")], vec![Transition::simple("s", "ghost", "go")]);
        let d = validate(&sm);
        assert_eq!(d.len(), 1);
        assert!(d[0].reason.contains("ghost"));
        assert!(matches!(flatten(&sm), Err(FlattenError::Invalid(_))));
    }

    #[test]
    fn structural_diagnostics() {
        let mut bad = orth("o", &[("a", &["a"])]);
        bad.regions[0].initial = "nope".into();
        let sm = StateMachine {
            name: "m".into(),
            states: vec![bad, State::of_kind("x|y", StateKind::Simple)],
            transitions: vec![],
        };
        let reasons: Vec<String> = validate(&sm).into_iter().map(|d| d.reason).collect();
        assert!(reasons.iter().any(|r| r.contains("top-level initial")));
        assert!(reasons.iter().any(|r| r.contains("at least two regions")));
        assert!(reasons.iter().any(|r| r.contains("initial `nope`")));
        assert!(reasons.iter().any(|r| r.contains("must not contain `|`")));
    }

    #[test]
    fn joins_are_rejected_by_flatten() {
        let sm = machine(
            vec![State::simple("s"), orth("o", &[("a", &["a"]), ("b", &["b"])])],
            vec![
                Transition {
                    source: "a".into(),
                    targets: vec!["s".into()],
                    event: "j".into(),
                    kind: TransitionKind::Join,
                },
                Transition {
                    source: "b".into(),
                    targets: vec!["s".into()],
                    event: "j".into(),
                    kind: TransitionKind::Join,
                },
            ],
        );
        assert!(validate(&sm).is_empty());
        assert_eq!(flatten(&sm), Err(FlattenError::JoinUnsupported("j".into())));
    }

    #[test]
    fn flat_machine_maps_one_to_one() {
        let sm = machine(
            vec![State::simple("a"), State::of_kind("z", StateKind::Final)],
            vec![Transition::simple("init", "a", ""), Transition::simple("a", "z", "stop")],
        );
        let g = flatten(&sm).unwrap();
        assert_eq!(g.vertex_count(), 3);
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.vertex("z").unwrap().kind, VertexKind::Final);
        assert_eq!(g.vertex("init").unwrap().kind, VertexKind::Initial);
    }

    #[test]
    fn region_internal_transition_fans_out() {
        let sm = machine(
            vec![orth("o", &[("a", &["a", "b"]), ("p", &["p", "q", "r"])])],
            vec![Transition::simple("init", "o", ""), Transition::simple("a", "b", "step")],
        );
        let g = flatten(&sm).unwrap();
        assert_eq!(g.vertex_count(), 1 + 6);
        let steps: Vec<(String, String)> = g
            .edges()
            .filter(|e| e.label == "step")
            .map(|e| (e.src.clone(), e.tgt.clone()))
            .collect();
        assert_eq!(
            steps,
            [
                ("a|p".to_string(), "b|p".to_string()),
                ("a|q".to_string(), "b|q".to_string()),
                ("a|r".to_string(), "b|r".to_string())
            ]
        );
        let pruned = flatten_with(&sm, FlattenOptions { prune_unreachable_configs: true }).unwrap();
        let left: Vec<&str> = pruned
            .vertices()
            .filter(|v| v.kind == VertexKind::Config)
            .map(|v| v.id.as_str())
            .collect();
        assert_eq!(left, ["a|p", "b|p"]);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let json = r#"{"name":"m","states":[{"id":"s","kind":"history"}],"transitions":[]}"#;
        assert!(serde_json::from_str::<StateMachine>(json).is_err());
        let json = r#"{"name":"m","states":[],"transitions":[{"source":"a","targets":["b"],"event":"e","guard":"x"}]}"#;
        assert!(serde_json::from_str::<StateMachine>(json).is_err());
    }
}
