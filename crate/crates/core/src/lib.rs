//! Detection of syntactic interference between aspects defined over
//! state-machine models.
//!
//! Aspects (pointcut + advice) are compiled into graph-transformation rules,
//! and critical pair analysis over those rules reports which aspects may
//! conflict with or depend on each other, independently of any base model.
//! A brute-force oracle weaves aspect pairs in both orders over a concrete
//! base model and serves as an independent cross-check.
//!
//! Pipeline: [`statechart`] flattens models into [`graph::Graph`]s,
//! [`aspects`] compiles aspects into [`transform::Rule`]s, [`cpa`] computes
//! critical pairs, [`report`] aggregates them per aspect and [`oracle`]
//! validates the result against actual weaving.

pub mod aspects;
pub mod cpa;
pub mod graph;
pub mod oracle;
pub mod report;
pub mod statechart;
pub mod transform;

pub use aspects::{compile, compile_all, Aspect, CompiledAspect, Concern};
pub use cpa::{analyze_rules, conflicts, dependencies, CriticalPair, PairVerdict};
pub use graph::{Edge, Graph, Morphism, Vertex, VertexKind};
pub use report::InteractionMatrix;
pub use statechart::{flatten, StateMachine};
pub use transform::{apply, find_matches, weave, Rule};

/// Default bound on the number of overlaps explored per rule pair.
pub const DEFAULT_MAX_OVERLAPS: usize = 100_000;

/// Version string recorded in report metadata.
pub const ENGINE_VERSION: &str = concat!("aspectra ", env!("CARGO_PKG_VERSION"));
