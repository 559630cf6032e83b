//! Aspects (pointcut plus advice) and their compilation into rule sets.
//!
//! A pointcut names states by the vertex names they flatten to. A reference
//! into an orthogonal composite restates the composite's region structure
//! and pins one or more member substates; it expands into one rule variant
//! per configuration containing every pinned member. An xor group of `k`
//! alternative transitions expands into `k` variants, each forbidding the
//! other alternatives through NACs. Variants in which the chosen
//! alternative is itself an instance of another alternative ("from both")
//! are dropped.
//!
//! Compiled rule ids: `s:<name>` for matched vertices, `p:<tid>` for
//! matched transitions, `n:<tid>` for NAC-only transitions, `n:<id>` for
//! created states and `c<k>` for created transitions.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Edge, Graph, Vertex, VertexKind};
use crate::transform::{Rule, RuleError};

pub const DEFAULT_MAX_VARIANTS: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Concern {
    pub name: String,
    #[serde(default)]
    pub aspects: Vec<Aspect>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Aspect {
    pub name: String,
    pub pointcut: Pattern,
    #[serde(default)]
    pub advice: Advice,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pattern {
    #[serde(default)]
    pub states: Vec<StateRef>,
    #[serde(default)]
    pub transitions: Vec<EdgePattern>,
    /// Indices into `transitions`.
    #[serde(default)]
    pub xor_groups: Vec<Vec<usize>>,
    /// State reference ids and transition ids passed to the advice.
    #[serde(default)]
    pub exposed: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateRef {
    /// A state matched by name.
    Plain(String),
    Detailed(RefSpec),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefSpec {
    pub id: String,
    #[serde(default)]
    pub kind: RefKind,
    /// Region structure of the orthogonal composite this reference points
    /// into; the reference then matches configuration vertices.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub composite: Option<CompositeDecl>,
    /// Substates every matched configuration must contain.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub members: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RefKind {
    #[default]
    State,
    Initial,
    Final,
}

impl RefKind {
    fn vertex_kind(self) -> VertexKind {
        match self {
            RefKind::State => VertexKind::State,
            RefKind::Initial => VertexKind::Initial,
            RefKind::Final => VertexKind::Final,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompositeDecl {
    pub name: String,
    pub regions: Vec<RegionDecl>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionDecl {
    pub initial: String,
    pub states: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgePattern {
    /// Defaults to `t<index>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub source: String,
    pub target: String,
    pub event: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Advice {
    #[serde(default)]
    pub create_states: Vec<NewState>,
    #[serde(default)]
    pub create_transitions: Vec<NewTransition>,
    #[serde(default)]
    pub delete: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NewState {
    Plain(String),
    Detailed {
        id: String,
        #[serde(default)]
        kind: RefKind,
    },
}

impl NewState {
    fn id(&self) -> &str {
        match self {
            NewState::Plain(id) | NewState::Detailed { id, .. } => id,
        }
    }

    fn kind(&self) -> RefKind {
        match self {
            NewState::Plain(_) => RefKind::State,
            NewState::Detailed { kind, .. } => *kind,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NewTransitionKind {
    #[default]
    Simple,
    Fork,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewTransition {
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    /// Fork targets: member substates of one declared composite.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub targets: Vec<String>,
    pub event: String,
    #[serde(default)]
    pub kind: NewTransitionKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompiledAspect {
    pub aspect: String,
    pub rules: Vec<Rule>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CompileError {
    #[error("aspect `{aspect}`: unresolved reference `{reference}`")]
    UnknownReference { aspect: String, reference: String },
    #[error("aspect `{aspect}`: `{reference}` is declared twice")]
    DuplicateReference { aspect: String, reference: String },
    #[error("aspect `{aspect}`: advice uses `{reference}`, which is not exposed")]
    NotExposed { aspect: String, reference: String },
    #[error("aspect `{aspect}`: xor group {group}: {reason}")]
    BadXorGroup { aspect: String, group: usize, reason: String },
    #[error("aspect `{aspect}`: composite reference `{reference}`: {reason}")]
    BadComposite { aspect: String, reference: String, reason: String },
    #[error("aspect `{aspect}`: created state `{name}` clashes with a pointcut name")]
    CreatedNameClash { aspect: String, name: String },
    #[error("aspect `{aspect}`: {reason}")]
    BadAdvice { aspect: String, reason: String },
    #[error("aspect `{aspect}` expands to {variants} variants, above the bound of {limit}")]
    ExpansionOverflow { aspect: String, variants: usize, limit: usize },
    #[error("aspect `{aspect}` yields no rules")]
    NoVariants { aspect: String },
    #[error("aspect `{aspect}`: {source}")]
    Rule { aspect: String, source: RuleError },
    #[error("aspect name `{0}` is used more than once")]
    DuplicateAspectName(String),
}

#[derive(Debug, Clone, Copy)]
pub struct CompileOptions {
    pub max_variants: usize,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions {
            max_variants: DEFAULT_MAX_VARIANTS,
        }
    }
}

pub fn compile(aspect: &Aspect) -> Result<CompiledAspect, CompileError> {
    compile_with(aspect, &CompileOptions::default())
}

pub fn compile_all(concerns: &[Concern]) -> Result<Vec<CompiledAspect>, CompileError> {
    let mut seen = BTreeSet::new();
    for a in concerns.iter().flat_map(|c| &c.aspects) {
        if !seen.insert(a.name.as_str()) {
            return Err(CompileError::DuplicateAspectName(a.name.clone()));
        }
    }
    concerns.iter().flat_map(|c| &c.aspects).map(compile).collect()
}

/// Accepts a concern, a list of concerns, a single aspect or a list of
/// aspects; bare aspects are grouped into one concern named `default`.
pub fn parse_concerns(json: &str) -> Result<Vec<Concern>, serde_json::Error> {
    let doc: serde_json::Value = serde_json::from_str(json)?;
    let first = doc.as_array().and_then(|a| a.first()).unwrap_or(&doc);
    let bare_aspects = first.get("pointcut").is_some();
    Ok(match (doc.is_array(), bare_aspects) {
        (true, false) => serde_json::from_value(doc)?,
        (true, true) => vec![default_concern(serde_json::from_value(doc)?)],
        (false, false) => vec![serde_json::from_value(doc)?],
        (false, true) => vec![default_concern(vec![serde_json::from_value(doc)?])],
    })
}

fn default_concern(aspects: Vec<Aspect>) -> Concern {
    Concern {
        name: "default".into(),
        aspects,
    }
}

struct RefInfo<'a> {
    kind: VertexKind,
    /// Vertex names this reference may match, in expansion order.
    options: Vec<String>,
    composite: Option<&'a CompositeDecl>,
}

fn vid(name: &str) -> String {
    format!("s:{name}")
}

pub fn compile_with(aspect: &Aspect, options: &CompileOptions) -> Result<CompiledAspect, CompileError> {
    Compiler::new(aspect)?.run(options)
}

struct Compiler<'a> {
    aspect: &'a Aspect,
    order: Vec<&'a str>,
    refs: BTreeMap<&'a str, RefInfo<'a>>,
    tids: Vec<String>,
    /// Per xor group, the transition indices in alternative order.
    groups: &'a [Vec<usize>],
    in_xor: BTreeSet<usize>,
    /// References that belong to the LHS only when a chosen alternative
    /// uses them.
    alternative_bound: BTreeSet<&'a str>,
    exposed: BTreeSet<&'a str>,
    created: BTreeMap<&'a str, RefKind>,
    /// (composite reference, resolved config) for every fork, by advice index.
    forks: BTreeMap<usize, (&'a str, Vec<String>)>,
}

impl<'a> Compiler<'a> {
    fn err_ref(&self, reference: &str) -> CompileError {
        CompileError::UnknownReference {
            aspect: self.aspect.name.clone(),
            reference: reference.to_string(),
        }
    }

    fn bad_advice(&self, reason: impl Into<String>) -> CompileError {
        CompileError::BadAdvice {
            aspect: self.aspect.name.clone(),
            reason: reason.into(),
        }
    }

    fn new(aspect: &'a Aspect) -> Result<Self, CompileError> {
        let name = &aspect.name;
        let pc = &aspect.pointcut;
        let mut order = Vec::new();
        let mut refs = BTreeMap::new();
        for sr in &pc.states {
            let (id, info) = resolve_ref(name, sr)?;
            if refs.insert(id, info).is_some() {
                return Err(CompileError::DuplicateReference {
                    aspect: name.clone(),
                    reference: id.to_string(),
                });
            }
            order.push(id);
        }

        let mut tids = Vec::new();
        for (i, t) in pc.transitions.iter().enumerate() {
            let tid = t.id.clone().unwrap_or_else(|| format!("t{i}"));
            if tids.contains(&tid) || refs.contains_key(tid.as_str()) {
                return Err(CompileError::DuplicateReference {
                    aspect: name.clone(),
                    reference: tid,
                });
            }
            for end in [&t.source, &t.target] {
                if !refs.contains_key(end.as_str()) {
                    return Err(CompileError::UnknownReference {
                        aspect: name.clone(),
                        reference: end.clone(),
                    });
                }
            }
            tids.push(tid);
        }

        let mut in_xor = BTreeSet::new();
        for (g, group) in pc.xor_groups.iter().enumerate() {
            let bad = |reason: &str| CompileError::BadXorGroup {
                aspect: name.clone(),
                group: g,
                reason: reason.to_string(),
            };
            if group.len() < 2 {
                return Err(bad("needs at least two alternatives"));
            }
            for &i in group {
                if i >= pc.transitions.len() {
                    return Err(bad("index out of range"));
                }
                if !in_xor.insert(i) {
                    return Err(bad("transition already belongs to an xor group"));
                }
            }
        }

        let mut exposed = BTreeSet::new();
        for e in &pc.exposed {
            if !refs.contains_key(e.as_str()) && !tids.contains(e) {
                return Err(CompileError::UnknownReference {
                    aspect: name.clone(),
                    reference: e.clone(),
                });
            }
            exposed.insert(e.as_str());
        }

        let mut created = BTreeMap::new();
        let taken: BTreeSet<&str> = refs
            .iter()
            .flat_map(|(id, info)| std::iter::once(*id).chain(info.options.iter().map(String::as_str)))
            .collect();
        for s in &aspect.advice.create_states {
            if taken.contains(s.id()) || created.insert(s.id(), s.kind()).is_some() {
                return Err(CompileError::CreatedNameClash {
                    aspect: name.clone(),
                    name: s.id().to_string(),
                });
            }
        }

        let mut c = Compiler {
            aspect,
            order,
            refs,
            tids,
            groups: &pc.xor_groups,
            in_xor,
            alternative_bound: BTreeSet::new(),
            exposed,
            created,
            forks: BTreeMap::new(),
        };
        c.check_advice()?;
        c.alternative_bound = c.find_alternative_bound();
        Ok(c)
    }

    fn check_endpoint(&self, end: &str) -> Result<(), CompileError> {
        if self.created.contains_key(end) {
            return Ok(());
        }
        if !self.refs.contains_key(end) {
            return Err(self.err_ref(end));
        }
        if !self.exposed.contains(end) {
            return Err(CompileError::NotExposed {
                aspect: self.aspect.name.clone(),
                reference: end.to_string(),
            });
        }
        Ok(())
    }

    fn check_advice(&mut self) -> Result<(), CompileError> {
        let advice = &self.aspect.advice;
        for d in &advice.delete {
            if !self.exposed.contains(d.as_str()) {
                return Err(if self.refs.contains_key(d.as_str()) || self.tids.contains(d) {
                    CompileError::NotExposed {
                        aspect: self.aspect.name.clone(),
                        reference: d.clone(),
                    }
                } else {
                    self.err_ref(d)
                });
            }
            if let Some(i) = self.tids.iter().position(|t| t == d) {
                if self.in_xor.contains(&i) {
                    return Err(self.bad_advice(format!("cannot delete xor alternative `{d}`")));
                }
            }
        }
        for (k, t) in advice.create_transitions.iter().enumerate() {
            self.check_endpoint(&t.source)?;
            match t.kind {
                NewTransitionKind::Simple => {
                    let target = t
                        .target
                        .as_deref()
                        .filter(|_| t.targets.is_empty())
                        .ok_or_else(|| self.bad_advice(format!("transition `{}` needs exactly one `target`", t.event)))?;
                    self.check_endpoint(target)?;
                }
                NewTransitionKind::Fork => {
                    if t.target.is_some() || t.targets.len() < 2 {
                        return Err(self.bad_advice(format!("fork `{}` needs at least two `targets`", t.event)));
                    }
                    let fork = self.resolve_fork(&t.targets)?;
                    self.forks.insert(k, fork);
                }
            }
        }
        Ok(())
    }

    /// Finds an exposed composite reference whose declaration places every
    /// target in a distinct region; the config completes the remaining
    /// regions with their initial states.
    fn resolve_fork(&self, targets: &[String]) -> Result<(&'a str, Vec<String>), CompileError> {
        for &id in &self.order {
            let Some(decl) = self.refs[id].composite else { continue };
            if !self.exposed.contains(id) {
                continue;
            }
            let mut parts: Vec<String> = decl.regions.iter().map(|r| r.initial.clone()).collect();
            let mut used = BTreeSet::new();
            let placed = targets.iter().all(|t| {
                match decl.regions.iter().position(|r| r.states.contains(t)) {
                    Some(r) if used.insert(r) => {
                        parts[r] = t.clone();
                        true
                    }
                    _ => false,
                }
            });
            if placed {
                return Ok((id, parts));
            }
        }
        Err(self.bad_advice(format!(
            "fork targets {targets:?} do not lie in distinct regions of an exposed composite reference"
        )))
    }

    fn find_alternative_bound(&self) -> BTreeSet<&'a str> {
        let pc = &self.aspect.pointcut;
        let advice = &self.aspect.advice;
        let mut pinned: BTreeSet<&str> = BTreeSet::new();
        let mut in_alternative: BTreeSet<&str> = BTreeSet::new();
        for (i, t) in pc.transitions.iter().enumerate() {
            let set = if self.in_xor.contains(&i) { &mut in_alternative } else { &mut pinned };
            set.insert(&t.source);
            set.insert(&t.target);
        }
        for t in &advice.create_transitions {
            pinned.insert(&t.source);
            pinned.extend(t.target.as_deref());
        }
        pinned.extend(self.forks.values().map(|(id, _)| *id));
        pinned.extend(advice.delete.iter().map(String::as_str));
        self.order
            .iter()
            .copied()
            .filter(|r| in_alternative.contains(r) && !pinned.contains(r))
            .collect()
    }

    fn run(&self, options: &CompileOptions) -> Result<CompiledAspect, CompileError> {
        let choices = cartesian(&self.groups.iter().map(Vec::len).collect::<Vec<_>>());
        let mut plans = Vec::new();
        let mut bound = 0usize;
        for choice in &choices {
            let excluded: BTreeSet<usize> = self
                .groups
                .iter()
                .zip(choice)
                .flat_map(|(g, &c)| g.iter().enumerate().filter(move |(j, _)| *j != c).map(|(_, &t)| t))
                .collect();
            let active: Vec<&str> = self
                .order
                .iter()
                .copied()
                .filter(|r| !self.alternative_bound.contains(r) || self.used_by_active(r, &excluded))
                .collect();
            let sizes: Vec<usize> = active.iter().map(|r| self.refs[r].options.len()).collect();
            bound = bound.saturating_add(sizes.iter().fold(1usize, |p, &n| p.saturating_mul(n)));
            plans.push((choice.clone(), excluded, active, sizes));
        }
        if bound > options.max_variants {
            return Err(CompileError::ExpansionOverflow {
                aspect: self.aspect.name.clone(),
                variants: bound,
                limit: options.max_variants,
            });
        }

        let mut rules = Vec::new();
        for (choice, excluded, active, sizes) in &plans {
            for pick in cartesian(sizes) {
                let assign: BTreeMap<&str, &str> = active
                    .iter()
                    .zip(&pick)
                    .map(|(r, &i)| (*r, self.refs[r].options[i].as_str()))
                    .collect();
                if self.chosen_is_also_excluded(choice, &assign) {
                    continue;
                }
                let name = format!("{}-R{}", self.aspect.name, rules.len() + 1);
                rules.push(self.build(name, excluded, &assign)?);
            }
        }
        if rules.is_empty() {
            return Err(CompileError::NoVariants {
                aspect: self.aspect.name.clone(),
            });
        }
        Ok(CompiledAspect {
            aspect: self.aspect.name.clone(),
            rules,
        })
    }

    fn used_by_active(&self, r: &str, excluded: &BTreeSet<usize>) -> bool {
        self.aspect
            .pointcut
            .transitions
            .iter()
            .enumerate()
            .any(|(i, t)| !excluded.contains(&i) && (t.source == r || t.target == r))
    }

    /// Concrete (source, target) names an alternative may take, given the
    /// references already fixed by `assign`.
    fn instances(&self, t: &EdgePattern, assign: &BTreeMap<&str, &str>) -> Vec<(String, String)> {
        let ends = |r: &str| -> Vec<String> {
            match assign.get(r) {
                Some(n) => vec![n.to_string()],
                None => self.refs[r].options.clone(),
            }
        };
        let targets = ends(&t.target);
        ends(&t.source)
            .into_iter()
            .flat_map(|s| targets.iter().map(move |t| (s.clone(), t.clone())))
            .collect()
    }

    fn chosen_is_also_excluded(&self, choice: &[usize], assign: &BTreeMap<&str, &str>) -> bool {
        let pc = &self.aspect.pointcut;
        self.groups.iter().zip(choice).any(|(group, &c)| {
            let chosen = &pc.transitions[group[c]];
            let concrete = (assign[chosen.source.as_str()].to_string(), assign[chosen.target.as_str()].to_string());
            group.iter().enumerate().any(|(j, &ti)| {
                let alt = &pc.transitions[ti];
                j != c && alt.event == chosen.event && self.instances(alt, assign).contains(&concrete)
            })
        })
    }

    fn ref_vertex(&self, g: &mut Graph, r: &str, name: &str) -> Result<(), CompileError> {
        let kind = self.refs[r].kind;
        match g.vertex(&vid(name)) {
            Some(v) if v.kind != kind => Err(CompileError::BadComposite {
                aspect: self.aspect.name.clone(),
                reference: r.to_string(),
                reason: format!("`{name}` is matched with two different kinds"),
            }),
            Some(_) => Ok(()),
            None => {
                g.add_vertex(Vertex::named(vid(name), kind, name)).expect("absent id");
                Ok(())
            }
        }
    }

    fn build(&self, name: String, excluded: &BTreeSet<usize>, assign: &BTreeMap<&str, &str>) -> Result<Rule, CompileError> {
        let pc = &self.aspect.pointcut;
        let advice = &self.aspect.advice;

        let mut lhs = Graph::new();
        for (r, n) in assign {
            self.ref_vertex(&mut lhs, r, n)?;
        }
        for (i, t) in pc.transitions.iter().enumerate() {
            if excluded.contains(&i) {
                continue;
            }
            lhs.add_edge(Edge::new(
                format!("p:{}", self.tids[i]),
                vid(assign[t.source.as_str()]),
                vid(assign[t.target.as_str()]),
                &t.event,
            ))
            .expect("pattern endpoints are in the lhs");
        }
        let fork_configs: BTreeMap<usize, String> = self.forks.iter().map(|(k, (_, parts))| (*k, parts.join("|"))).collect();
        for config in fork_configs.values() {
            if lhs.vertex(&vid(config)).is_none() {
                lhs.add_vertex(Vertex::named(vid(config), VertexKind::Config, config)).expect("absent id");
            }
        }

        let mut nacs = Vec::new();
        let mut forbidden = BTreeSet::new();
        for (i, t) in pc.transitions.iter().enumerate() {
            if !excluded.contains(&i) {
                continue;
            }
            for (s, g) in self.instances(t, assign) {
                if !forbidden.insert((s.clone(), g.clone(), t.event.clone())) {
                    continue;
                }
                let mut nac = lhs.clone();
                self.ref_vertex(&mut nac, &t.source, &s)?;
                self.ref_vertex(&mut nac, &t.target, &g)?;
                nac.add_edge(Edge::new(format!("n:{}", self.tids[i]), vid(&s), vid(&g), &t.event))
                    .expect("endpoints added");
                nacs.push(nac);
            }
        }

        let mut rhs = lhs.clone();
        for d in &advice.delete {
            if let Some(i) = self.tids.iter().position(|t| t == d) {
                rhs.remove_edge(&format!("p:{}", self.tids[i])).expect("pattern edge present");
                continue;
            }
            let v = vid(assign[d.as_str()]);
            let incident: Vec<String> = rhs.incident_edges(&v).map(|e| e.id.clone()).collect();
            for e in incident {
                rhs.remove_edge(&e).expect("listed edge");
            }
            rhs.remove_vertex(&v).map_err(|_| self.bad_advice(format!("cannot delete `{d}`")))?;
        }
        for s in &advice.create_states {
            rhs.add_vertex(Vertex::named(format!("n:{}", s.id()), s.kind().vertex_kind(), s.id()))
                .expect("created ids are fresh");
        }
        let endpoint = |end: &str| -> String {
            if self.created.contains_key(end) {
                format!("n:{end}")
            } else {
                vid(assign[end])
            }
        };
        for (k, t) in advice.create_transitions.iter().enumerate() {
            let src = endpoint(&t.source);
            let tgt = match fork_configs.get(&k) {
                Some(config) => vid(config),
                None => endpoint(t.target.as_deref().expect("checked simple target")),
            };
            rhs.add_edge(Edge::new(format!("c{}", k + 1), src, tgt, &t.event))
                .map_err(|_| self.bad_advice(format!("transition `{}` attaches to a deleted state", t.event)))?;
        }

        Rule::new(name, lhs, rhs, nacs).map_err(|source| CompileError::Rule {
            aspect: self.aspect.name.clone(),
            source,
        })
    }
}

fn resolve_ref<'a>(aspect: &str, sr: &'a StateRef) -> Result<(&'a str, RefInfo<'a>), CompileError> {
    let spec = match sr {
        StateRef::Plain(id) => {
            return Ok((
                id,
                RefInfo {
                    kind: VertexKind::State,
                    options: vec![id.clone()],
                    composite: None,
                },
            ))
        }
        StateRef::Detailed(spec) => spec,
    };
    let bad = |reason: String| CompileError::BadComposite {
        aspect: aspect.to_string(),
        reference: spec.id.clone(),
        reason,
    };
    let Some(decl) = &spec.composite else {
        if !spec.members.is_empty() {
            return Err(bad("members require a composite declaration".into()));
        }
        return Ok((
            &spec.id,
            RefInfo {
                kind: spec.kind.vertex_kind(),
                options: vec![spec.id.clone()],
                composite: None,
            },
        ));
    };
    if decl.regions.len() < 2 {
        return Err(bad("an orthogonal composite needs at least two regions".into()));
    }
    let mut all = BTreeSet::new();
    for (r, region) in decl.regions.iter().enumerate() {
        if !region.states.contains(&region.initial) {
            return Err(bad(format!("initial `{}` is not in region {r}", region.initial)));
        }
        for s in &region.states {
            if s.contains('|') || !all.insert(s.as_str()) {
                return Err(bad(format!("region state `{s}` is repeated or contains `|`")));
            }
        }
    }
    let mut member_region = BTreeMap::new();
    for m in &spec.members {
        let r = decl
            .regions
            .iter()
            .position(|r| r.states.contains(m))
            .ok_or_else(|| bad(format!("member `{m}` is not a region state")))?;
        if member_region.insert(r, m.as_str()).is_some() {
            return Err(bad("members must lie in distinct regions".into()));
        }
    }
    let sizes: Vec<usize> = decl.regions.iter().map(|r| r.states.len()).collect();
    let sorted: Vec<Vec<&str>> = decl
        .regions
        .iter()
        .map(|r| {
            let mut s: Vec<&str> = r.states.iter().map(String::as_str).collect();
            s.sort_unstable();
            s
        })
        .collect();
    let options = cartesian(&sizes)
        .into_iter()
        .map(|pick| pick.iter().enumerate().map(|(r, &i)| sorted[r][i]).collect::<Vec<_>>())
        .filter(|parts| member_region.iter().all(|(r, m)| parts[*r] == *m))
        .map(|parts| parts.join("|"))
        .collect();
    Ok((
        &spec.id,
        RefInfo {
            kind: VertexKind::Config,
            options,
            composite: Some(decl),
        },
    ))
}

/// Every index vector below `sizes`, last position varying fastest.
fn cartesian(sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &n in sizes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..n).map(move |i| {
                    let mut next = prefix.clone();
                    next.push(i);
                    next
                })
            })
            .collect();
    }
    out
}
