//! Typed, attributed, directed multigraphs and the structure-preserving
//! maps between them.

mod canon;
mod matching;
mod overlap;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use canon::canonical_form;
pub use matching::{extends_to, find_monomorphisms, is_isomorphic};
pub use overlap::{enumerate_overlaps, enumerate_overlaps_where, Overlap, OverlapCapExceeded};
pub(crate) use overlap::annotated_form as overlap_fingerprint;

/// Attribute holding the display name of a vertex.
pub const NAME_ATTR: &str = "name";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("duplicate vertex id `{0}`")]
    DuplicateVertex(String),
    #[error("duplicate edge id `{0}`")]
    DuplicateEdge(String),
    #[error("edge `{edge}` refers to missing vertex `{vertex}`")]
    DanglingEdge { edge: String, vertex: String },
    #[error("config vertex `{0}` must have a name containing `|`")]
    BadConfigName(String),
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("unknown edge `{0}`")]
    UnknownEdge(String),
    #[error("vertex `{0}` still has incident edges")]
    IncidentEdges(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VertexKind {
    State,
    Initial,
    Final,
    Config,
}

impl VertexKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VertexKind::State => "state",
            VertexKind::Initial => "initial",
            VertexKind::Final => "final",
            VertexKind::Config => "config",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vertex {
    pub id: String,
    pub kind: VertexKind,
    #[serde(default)]
    pub attrs: BTreeMap<String, String>,
}

impl Vertex {
    pub fn new(id: impl Into<String>, kind: VertexKind) -> Self {
        Vertex {
            id: id.into(),
            kind,
            attrs: BTreeMap::new(),
        }
    }

    /// A vertex carrying a `name` attribute.
    pub fn named(id: impl Into<String>, kind: VertexKind, name: impl Into<String>) -> Self {
        Vertex::new(id, kind).with_attr(NAME_ATTR, name)
    }

    pub fn with_attr(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.attrs.insert(key.into(), value.into());
        self
    }

    pub fn name(&self) -> Option<&str> {
        self.attrs.get(NAME_ATTR).map(String::as_str)
    }

    /// Two vertices may be matched or glued onto each other.
    pub fn compatible(&self, other: &Vertex) -> bool {
        self.kind == other.kind && self.attrs == other.attrs
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub id: String,
    pub src: String,
    pub tgt: String,
    pub label: String,
}

impl Edge {
    pub fn new(
        id: impl Into<String>,
        src: impl Into<String>,
        tgt: impl Into<String>,
        label: impl Into<String>,
    ) -> Self {
        Edge {
            id: id.into(),
            src: src.into(),
            tgt: tgt.into(),
            label: label.into(),
        }
    }
}

/// Reference to a vertex or an edge of some graph.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElemRef {
    Vertex(String),
    Edge(String),
}

impl ElemRef {
    pub fn id(&self) -> &str {
        match self {
            ElemRef::Vertex(id) | ElemRef::Edge(id) => id,
        }
    }
}

impl fmt::Display for ElemRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ElemRef::Vertex(id) => write!(f, "v:{id}"),
            ElemRef::Edge(id) => write!(f, "e:{id}"),
        }
    }
}

/// A directed labeled multigraph with typed, attributed vertices.
///
/// Edges never dangle: every mutation keeps both endpoints of every edge
/// present. Ids handed out by [`Graph::fresh_vertex_id`] and
/// [`Graph::fresh_edge_id`] are never reissued by the same graph value.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(try_from = "GraphDoc", into = "GraphDoc")]
pub struct Graph {
    vertices: BTreeMap<String, Vertex>,
    edges: BTreeMap<String, Edge>,
    next_fresh: u64,
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices && self.edges == other.edges
    }
}

impl Eq for Graph {}

/// Exchange form of [`Graph`].
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GraphDoc {
    #[serde(default)]
    pub vertices: Vec<Vertex>,
    #[serde(default)]
    pub edges: Vec<Edge>,
}

impl TryFrom<GraphDoc> for Graph {
    type Error = GraphError;

    fn try_from(doc: GraphDoc) -> Result<Self, Self::Error> {
        let mut g = Graph::new();
        for v in doc.vertices {
            g.add_vertex(v)?;
        }
        for e in doc.edges {
            g.add_edge(e)?;
        }
        Ok(g)
    }
}

impl From<Graph> for GraphDoc {
    fn from(g: Graph) -> Self {
        GraphDoc {
            vertices: g.vertices.into_values().collect(),
            edges: g.edges.into_values().collect(),
        }
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    pub fn add_vertex(&mut self, v: Vertex) -> Result<(), GraphError> {
        if self.vertices.contains_key(&v.id) {
            return Err(GraphError::DuplicateVertex(v.id));
        }
        if v.kind == VertexKind::Config && !v.name().is_some_and(|n| n.contains('|')) {
            return Err(GraphError::BadConfigName(v.id));
        }
        self.vertices.insert(v.id.clone(), v);
        Ok(())
    }

    pub fn add_edge(&mut self, e: Edge) -> Result<(), GraphError> {
        if self.edges.contains_key(&e.id) {
            return Err(GraphError::DuplicateEdge(e.id));
        }
        for end in [&e.src, &e.tgt] {
            if !self.vertices.contains_key(end) {
                return Err(GraphError::DanglingEdge {
                    edge: e.id.clone(),
                    vertex: end.clone(),
                });
            }
        }
        self.edges.insert(e.id.clone(), e);
        Ok(())
    }

    pub fn remove_edge(&mut self, id: &str) -> Result<Edge, GraphError> {
        self.edges
            .remove(id)
            .ok_or_else(|| GraphError::UnknownEdge(id.to_string()))
    }

    /// Removes an isolated vertex. Fails while incident edges remain.
    pub fn remove_vertex(&mut self, id: &str) -> Result<Vertex, GraphError> {
        if !self.vertices.contains_key(id) {
            return Err(GraphError::UnknownVertex(id.to_string()));
        }
        if self.edges.values().any(|e| e.src == id || e.tgt == id) {
            return Err(GraphError::IncidentEdges(id.to_string()));
        }
        Ok(self.vertices.remove(id).expect("checked above"))
    }

    pub fn vertex(&self, id: &str) -> Option<&Vertex> {
        self.vertices.get(id)
    }

    pub fn edge(&self, id: &str) -> Option<&Edge> {
        self.edges.get(id)
    }

    pub fn contains(&self, r: &ElemRef) -> bool {
        match r {
            ElemRef::Vertex(id) => self.vertices.contains_key(id),
            ElemRef::Edge(id) => self.edges.contains_key(id),
        }
    }

    /// Vertices in id order.
    pub fn vertices(&self) -> impl Iterator<Item = &Vertex> + '_ {
        self.vertices.values()
    }

    /// Edges in id order.
    pub fn edges(&self) -> impl Iterator<Item = &Edge> + '_ {
        self.edges.values()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// All element references, vertices first.
    pub fn elements(&self) -> BTreeSet<ElemRef> {
        self.vertices
            .keys()
            .map(|id| ElemRef::Vertex(id.clone()))
            .chain(self.edges.keys().map(|id| ElemRef::Edge(id.clone())))
            .collect()
    }

    pub fn incident_edges<'a>(&'a self, vertex: &'a str) -> impl Iterator<Item = &'a Edge> + 'a {
        self.edges
            .values()
            .filter(move |e| e.src == vertex || e.tgt == vertex)
    }

    /// First vertex (in id order) whose `name` attribute equals `name`.
    pub fn vertex_named(&self, name: &str) -> Option<&Vertex> {
        self.vertices.values().find(|v| v.name() == Some(name))
    }

    pub fn vertices_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Vertex> + 'a {
        self.vertices.values().filter(move |v| v.name() == Some(name))
    }

    /// Edges whose endpoints carry the given names and whose label matches.
    pub fn edges_between_named(&self, src: &str, tgt: &str, label: &str) -> Vec<&Edge> {
        self.edges
            .values()
            .filter(|e| {
                e.label == label
                    && self.vertices[&e.src].name() == Some(src)
                    && self.vertices[&e.tgt].name() == Some(tgt)
            })
            .collect()
    }

    pub fn fresh_vertex_id(&mut self) -> String {
        loop {
            let id = format!("_v{}", self.next_fresh);
            self.next_fresh += 1;
            if !self.vertices.contains_key(&id) {
                return id;
            }
        }
    }

    pub fn fresh_edge_id(&mut self) -> String {
        loop {
            let id = format!("_e{}", self.next_fresh);
            self.next_fresh += 1;
            if !self.edges.contains_key(&id) {
                return id;
            }
        }
    }

    /// Re-checks the structural invariants. Always true for graphs built
    /// through the public API; useful on deserialized or derived values.
    pub fn is_well_formed(&self) -> bool {
        self.edges.values().all(|e| {
            self.vertices.contains_key(&e.src) && self.vertices.contains_key(&e.tgt)
        }) && self.vertices.iter().all(|(id, v)| {
            *id == v.id && (v.kind != VertexKind::Config || v.name().is_some_and(|n| n.contains('|')))
        }) && self.edges.iter().all(|(id, e)| *id == e.id)
    }

    /// `self` is a subgraph of `other` with identical ids.
    pub fn is_id_subgraph_of(&self, other: &Graph) -> bool {
        self.vertices
            .iter()
            .all(|(id, v)| other.vertices.get(id) == Some(v))
            && self.edges.iter().all(|(id, e)| other.edges.get(id) == Some(e))
    }

    /// Graphviz rendering: one node per vertex labeled by its name, shaped
    /// by kind, and one labeled arc per edge.
    pub fn to_dot(&self, title: &str) -> String {
        let mut out = format!("digraph {} {{\n", dot_quote(title));
        self.write_dot_body(&mut out, "", "");
        out.push_str("}\n");
        out
    }

    pub(crate) fn write_dot_body(&self, out: &mut String, prefix: &str, extra: &str) {
        for v in self.vertices.values() {
            let shape = match v.kind {
                VertexKind::Final => "doublecircle",
                VertexKind::Initial => "point",
                VertexKind::Config => "box",
                VertexKind::State => "ellipse",
            };
            let label = v.name().unwrap_or(&v.id);
            out.push_str(&format!(
                "  {} [label={}, shape={shape}{extra}];\n",
                dot_quote(&format!("{prefix}{}", v.id)),
                dot_quote(label)
            ));
        }
        for e in self.edges.values() {
            out.push_str(&format!(
                "  {} -> {} [label={}{extra}];\n",
                dot_quote(&format!("{prefix}{}", e.src)),
                dot_quote(&format!("{prefix}{}", e.tgt)),
                dot_quote(&e.label)
            ));
        }
    }
}

pub(crate) fn dot_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Injective partial or total map between the elements of two graphs.
///
/// Ordering compares vertex images in source-id order, then edge images,
/// which is the deterministic order used for all match enumerations.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Morphism {
    pub vmap: BTreeMap<String, String>,
    pub emap: BTreeMap<String, String>,
}

impl Morphism {
    pub fn new() -> Self {
        Morphism::default()
    }

    pub fn identity(g: &Graph) -> Self {
        Morphism {
            vmap: g.vertices.keys().map(|k| (k.clone(), k.clone())).collect(),
            emap: g.edges.keys().map(|k| (k.clone(), k.clone())).collect(),
        }
    }

    pub fn map(&self, r: &ElemRef) -> Option<ElemRef> {
        match r {
            ElemRef::Vertex(id) => self.vmap.get(id).cloned().map(ElemRef::Vertex),
            ElemRef::Edge(id) => self.emap.get(id).cloned().map(ElemRef::Edge),
        }
    }

    pub fn image(&self) -> BTreeSet<ElemRef> {
        self.vmap
            .values()
            .cloned()
            .map(ElemRef::Vertex)
            .chain(self.emap.values().cloned().map(ElemRef::Edge))
            .collect()
    }

    /// `other ∘ self`: elements without an image under both maps are dropped.
    pub fn then(&self, other: &Morphism) -> Morphism {
        Morphism {
            vmap: self
                .vmap
                .iter()
                .filter_map(|(k, v)| other.vmap.get(v).map(|w| (k.clone(), w.clone())))
                .collect(),
            emap: self
                .emap
                .iter()
                .filter_map(|(k, v)| other.emap.get(v).map(|w| (k.clone(), w.clone())))
                .collect(),
        }
    }

    pub fn is_injective(&self) -> bool {
        let vs: BTreeSet<_> = self.vmap.values().collect();
        let es: BTreeSet<_> = self.emap.values().collect();
        vs.len() == self.vmap.len() && es.len() == self.emap.len()
    }

    /// Total, injective and structure-preserving from `source` into `target`.
    pub fn is_valid(&self, source: &Graph, target: &Graph) -> bool {
        if self.vmap.len() != source.vertex_count() || self.emap.len() != source.edge_count() {
            return false;
        }
        if !self.is_injective() {
            return false;
        }
        let vertices_ok = source.vertices().all(|v| {
            self.vmap
                .get(&v.id)
                .and_then(|img| target.vertex(img))
                .is_some_and(|w| v.compatible(w))
        });
        vertices_ok
            && source.edges().all(|e| {
                self.emap
                    .get(&e.id)
                    .and_then(|img| target.edge(img))
                    .is_some_and(|f| {
                        f.label == e.label
                            && self.vmap.get(&e.src) == Some(&f.src)
                            && self.vmap.get(&e.tgt) == Some(&f.tgt)
                    })
            })
    }

    /// Bijective and structure-preserving in both directions.
    pub fn is_isomorphism(&self, source: &Graph, target: &Graph) -> bool {
        source.vertex_count() == target.vertex_count()
            && source.edge_count() == target.edge_count()
            && self.is_valid(source, target)
    }
}
