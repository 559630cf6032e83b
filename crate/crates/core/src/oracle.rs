//! Brute-force interaction oracle: weave two aspects into a concrete base
//! in both orders and compare the results up to isomorphism.
//!
//! With `m1`, `m2` the single-aspect results and `m12`, `m21` the
//! two-aspect results (first named aspect woven first in `m12`), the pair
//! is independent when `m12 ≅ m21`. Otherwise the first holding clause of
//! `m12 ≅ m2`, `m21 ≅ m1`, `m12 ≅ m1`, `m21 ≅ m2` decides the
//! classification; all clauses are kept as evidence.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aspects::CompiledAspect;
use crate::graph::{is_isomorphic, Graph};
use crate::report::InteractionMatrix;
use crate::statechart::{flatten, FlattenError, StateMachine};
use crate::transform::weave;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeaveOutcome {
    pub m1: Graph,
    pub m2: Graph,
    pub m12: Graph,
    pub m21: Graph,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Independent,
    A1DependsOnA2,
    A2DependsOnA1,
    A1DisablesA2,
    A2DisablesA1,
    DivergentUnclassified,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::Independent => "independent",
            Classification::A1DependsOnA2 => "a1_depends_on_a2",
            Classification::A2DependsOnA1 => "a2_depends_on_a1",
            Classification::A1DisablesA2 => "a1_disables_a2",
            Classification::A2DisablesA1 => "a2_disables_a1",
            Classification::DivergentUnclassified => "divergent_unclassified",
        }
    }

    /// The classification of the same pair named in the other order.
    pub fn mirror(self) -> Self {
        match self {
            Classification::A1DependsOnA2 => Classification::A2DependsOnA1,
            Classification::A2DependsOnA1 => Classification::A1DependsOnA2,
            Classification::A1DisablesA2 => Classification::A2DisablesA1,
            Classification::A2DisablesA1 => Classification::A1DisablesA2,
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub m12_iso_m21: bool,
    pub m12_iso_m2: bool,
    pub m21_iso_m1: bool,
    pub m12_iso_m1: bool,
    pub m21_iso_m2: bool,
}

impl Evidence {
    pub fn mirror(self) -> Self {
        Evidence {
            m12_iso_m21: self.m12_iso_m21,
            m12_iso_m2: self.m21_iso_m1,
            m21_iso_m1: self.m12_iso_m2,
            m12_iso_m1: self.m21_iso_m2,
            m21_iso_m2: self.m12_iso_m1,
        }
    }

    pub fn classify(self) -> Classification {
        if self.m12_iso_m21 {
            Classification::Independent
        } else if self.m12_iso_m2 {
            Classification::A1DependsOnA2
        } else if self.m21_iso_m1 {
            Classification::A2DependsOnA1
        } else if self.m12_iso_m1 {
            Classification::A1DisablesA2
        } else if self.m21_iso_m2 {
            Classification::A2DisablesA1
        } else {
            Classification::DivergentUnclassified
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleVerdict {
    pub first: String,
    pub second: String,
    pub classification: Classification,
    pub evidence: Evidence,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub aspect_a: String,
    pub aspect_b: String,
    pub oracle: Classification,
    pub cpa_summary: String,
}

pub fn weave_graph(host: &Graph, aspect: &CompiledAspect) -> Graph {
    weave(&aspect.rules, host).graph
}

pub fn weave_aspect(base: &StateMachine, aspect: &CompiledAspect) -> Result<Graph, FlattenError> {
    Ok(weave_graph(&flatten(base)?, aspect))
}

pub fn outcome(host: &Graph, a1: &CompiledAspect, a2: &CompiledAspect) -> WeaveOutcome {
    let m1 = weave_graph(host, a1);
    let m2 = weave_graph(host, a2);
    let m12 = weave_graph(&m1, a2);
    let m21 = weave_graph(&m2, a1);
    WeaveOutcome { m1, m2, m12, m21 }
}

impl WeaveOutcome {
    pub fn evidence(&self) -> Evidence {
        let iso = |a: &Graph, b: &Graph| is_isomorphic(a, b).is_some();
        Evidence {
            m12_iso_m21: iso(&self.m12, &self.m21),
            m12_iso_m2: iso(&self.m12, &self.m2),
            m21_iso_m1: iso(&self.m21, &self.m1),
            m12_iso_m1: iso(&self.m12, &self.m1),
            m21_iso_m2: iso(&self.m21, &self.m2),
        }
    }
}

/// Classifies a pair on an already flattened base.
pub fn classify_on_graph(host: &Graph, a1: &CompiledAspect, a2: &CompiledAspect) -> OracleVerdict {
    let evidence = outcome(host, a1, a2).evidence();
    OracleVerdict {
        first: a1.aspect.clone(),
        second: a2.aspect.clone(),
        classification: evidence.classify(),
        evidence,
    }
}

pub fn classify_pair(base: &StateMachine, a1: &CompiledAspect, a2: &CompiledAspect) -> Result<OracleVerdict, FlattenError> {
    Ok(classify_on_graph(&flatten(base)?, a1, a2))
}

/// Every aspect pair with no interaction in the matrix (either order) must
/// weave independently on `base`; each pair that does not is reported.
pub fn cross_check(
    base: &StateMachine,
    compiled: &[CompiledAspect],
    matrix: &InteractionMatrix,
) -> Result<Vec<Discrepancy>, FlattenError> {
    let host = flatten(base)?;
    let silent = |a: &str, b: &str| matrix.cell(a, b).is_none() && matrix.cell(b, a).is_none();
    let pairs: Vec<(&CompiledAspect, &CompiledAspect)> = compiled
        .iter()
        .enumerate()
        .flat_map(|(i, a)| compiled[i + 1..].iter().map(move |b| (a, b)))
        .filter(|(a, b)| silent(&a.aspect, &b.aspect))
        .collect();
    Ok(pairs
        .par_iter()
        .map(|(a, b)| classify_on_graph(&host, a, b))
        .collect::<Vec<_>>()
        .into_iter()
        .filter(|v| v.classification != Classification::Independent)
        .map(|v| Discrepancy {
            aspect_a: v.first,
            aspect_b: v.second,
            oracle: v.classification,
            cpa_summary: "no critical pairs in either order".into(),
        })
        .collect())
}
