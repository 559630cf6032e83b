use std::collections::{BTreeMap, HashSet};

use thiserror::Error;

use super::{canonical_form, Edge, Graph, Morphism, Vertex};

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("overlap enumeration exceeded the cap of {cap}")]
pub struct OverlapCapExceeded {
    pub cap: usize,
}

/// A gluing of two graphs: `graph` is covered jointly by the injective
/// embeddings `left` (from the first graph) and `right` (from the second).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Overlap {
    pub graph: Graph,
    pub left: Morphism,
    pub right: Morphism,
}

impl Overlap {
    /// Canonical form of the overlap annotated with both embeddings.
    pub fn fingerprint(&self) -> Vec<u8> {
        annotated_form(&self.graph, &[&self.left, &self.right], &[])
    }

    /// Elements of the overlap in the image of both embeddings.
    pub fn shared(&self) -> Vec<super::ElemRef> {
        let right = self.right.image();
        self.left.image().into_iter().filter(|r| right.contains(r)).collect()
    }
}

/// Canonical form of `g` with every element tagged by its preimages under
/// `maps` and by membership in `marked`.
pub(crate) fn annotated_form(g: &Graph, maps: &[&Morphism], marked: &[super::ElemRef]) -> Vec<u8> {
    let mut tagged = Graph::new();
    let mut vtags: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    let mut etags: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for (k, m) in maps.iter().enumerate() {
        for (src, img) in &m.vmap {
            vtags.entry(img).or_default().push(format!("{k}={src}"));
        }
        for (src, img) in &m.emap {
            etags.entry(img).or_default().push(format!("{k}={src}"));
        }
    }
    for r in marked {
        match r {
            super::ElemRef::Vertex(id) => vtags.entry(id).or_default().push("*".into()),
            super::ElemRef::Edge(id) => etags.entry(id).or_default().push("*".into()),
        }
    }
    for v in g.vertices() {
        let mut w = v.clone();
        if let Some(t) = vtags.get(v.id.as_str()) {
            w.attrs.insert("\u{0}pre".into(), t.join(","));
        }
        tagged.add_vertex(w).expect("copy of a valid graph");
    }
    for e in g.edges() {
        let mut f = e.clone();
        if let Some(t) = etags.get(e.id.as_str()) {
            f.label = format!("{}\u{0}{}", e.label, t.join(","));
        }
        tagged.add_edge(f).expect("copy of a valid graph");
    }
    canonical_form(&tagged)
}

/// Every jointly surjective gluing of `g1` and `g2`.
pub fn enumerate_overlaps(g1: &Graph, g2: &Graph, cap: usize) -> Result<Vec<Overlap>, OverlapCapExceeded> {
    enumerate_overlaps_where(g1, g2, cap, |_| true)
}

/// Like [`enumerate_overlaps`], keeping only overlaps accepted by `keep`;
/// only kept overlaps count against `cap`.
///
/// Vertex identifications are enumerated first (each vertex of `g1` is
/// either left alone or glued to a compatible, not yet used vertex of
/// `g2`, in id order); edges are then identified exactly when their
/// endpoints are identified and their labels agree.
pub fn enumerate_overlaps_where<F>(
    g1: &Graph,
    g2: &Graph,
    cap: usize,
    mut keep: F,
) -> Result<Vec<Overlap>, OverlapCapExceeded>
where
    F: FnMut(&Overlap) -> bool,
{
    let left: Vec<&Vertex> = g1.vertices().collect();
    let right: Vec<&Vertex> = g2.vertices().collect();
    let compatible: Vec<Vec<usize>> = left
        .iter()
        .map(|a| {
            right
                .iter()
                .enumerate()
                .filter(|(_, b)| a.compatible(b))
                .map(|(j, _)| j)
                .collect()
        })
        .collect();

    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut glue: Vec<Option<usize>> = vec![None; left.len()];
    let mut used = vec![false; right.len()];
    let mut ctx = Ctx {
        g1,
        g2,
        left: &left,
        right: &right,
        compatible: &compatible,
        cap,
        out: &mut out,
        seen: &mut seen,
        keep: &mut keep,
    };
    ctx.walk(0, &mut glue, &mut used)?;
    Ok(out)
}

struct Ctx<'a, F> {
    g1: &'a Graph,
    g2: &'a Graph,
    left: &'a [&'a Vertex],
    right: &'a [&'a Vertex],
    compatible: &'a [Vec<usize>],
    cap: usize,
    out: &'a mut Vec<Overlap>,
    seen: &'a mut HashSet<Vec<u8>>,
    keep: &'a mut F,
}

impl<F: FnMut(&Overlap) -> bool> Ctx<'_, F> {
    fn walk(&mut self, i: usize, glue: &mut [Option<usize>], used: &mut [bool]) -> Result<(), OverlapCapExceeded> {
        if i == self.left.len() {
            let ov = build(self.g1, self.g2, self.left, self.right, glue);
            if (self.keep)(&ov) && self.seen.insert(ov.fingerprint()) {
                if self.out.len() == self.cap {
                    return Err(OverlapCapExceeded { cap: self.cap });
                }
                self.out.push(ov);
            }
            return Ok(());
        }
        self.walk(i + 1, glue, used)?;
        for &j in &self.compatible[i] {
            if used[j] {
                continue;
            }
            used[j] = true;
            glue[i] = Some(j);
            self.walk(i + 1, glue, used)?;
            glue[i] = None;
            used[j] = false;
        }
        Ok(())
    }
}

fn build(g1: &Graph, g2: &Graph, left: &[&Vertex], right: &[&Vertex], glue: &[Option<usize>]) -> Overlap {
    let mut graph = Graph::new();
    let mut lmap = Morphism::new();
    let mut rmap = Morphism::new();
    let mut right_to_left: BTreeMap<&str, &str> = BTreeMap::new();

    for (i, v) in left.iter().enumerate() {
        let id = format!("1:{}", v.id);
        let mut w = (*v).clone();
        w.id = id.clone();
        graph.add_vertex(w).expect("fresh overlap id");
        lmap.vmap.insert(v.id.clone(), id.clone());
        if let Some(j) = glue[i] {
            rmap.vmap.insert(right[j].id.clone(), id);
            right_to_left.insert(&right[j].id, &v.id);
        }
    }
    for v in right {
        if rmap.vmap.contains_key(&v.id) {
            continue;
        }
        let id = format!("2:{}", v.id);
        let mut w = (*v).clone();
        w.id = id.clone();
        graph.add_vertex(w).expect("fresh overlap id");
        rmap.vmap.insert(v.id.clone(), id);
    }

    for e in g1.edges() {
        let id = format!("1:{}", e.id);
        graph
            .add_edge(Edge::new(&id, &lmap.vmap[&e.src], &lmap.vmap[&e.tgt], &e.label))
            .expect("endpoints present");
        lmap.emap.insert(e.id.clone(), id);
    }
    let mut glued_left_edges: HashSet<&str> = HashSet::new();
    for f in g2.edges() {
        let partner = match (right_to_left.get(f.src.as_str()), right_to_left.get(f.tgt.as_str())) {
            (Some(s), Some(t)) => g1.edges().find(|e| {
                e.src == *s && e.tgt == *t && e.label == f.label && !glued_left_edges.contains(e.id.as_str())
            }),
            _ => None,
        };
        match partner {
            Some(e) => {
                glued_left_edges.insert(&e.id);
                rmap.emap.insert(f.id.clone(), lmap.emap[&e.id].clone());
            }
            None => {
                let id = format!("2:{}", f.id);
                graph
                    .add_edge(Edge::new(&id, &rmap.vmap[&f.src], &rmap.vmap[&f.tgt], &f.label))
                    .expect("endpoints present");
                rmap.emap.insert(f.id.clone(), id);
            }
        }
    }
    Overlap {
        graph,
        left: lmap,
        right: rmap,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::VertexKind;

    fn single(name: &str) -> Graph {
        let mut g = Graph::new();
        g.add_vertex(Vertex::named("v", VertexKind::State, name)).unwrap();
        g
    }

    #[test]
    fn identical_vertices_glue_two_ways() {
        let ovs = enumerate_overlaps(&single("a"), &single("a"), 10).unwrap();
        let sizes: Vec<usize> = ovs.iter().map(|o| o.graph.vertex_count()).collect();
        assert_eq!(sizes, [2, 1]);
    }

    #[test]
    fn incompatible_vertices_stay_apart() {
        let ovs = enumerate_overlaps(&single("a"), &single("b"), 10).unwrap();
        assert_eq!(ovs.len(), 1);
        assert_eq!(ovs[0].graph.vertex_count(), 2);
    }

    #[test]
    fn cap_is_enforced() {
        let err = enumerate_overlaps(&single("a"), &single("a"), 1).unwrap_err();
        assert_eq!(err, OverlapCapExceeded { cap: 1 });
    }

    #[test]
    fn edges_glue_with_their_endpoints() {
        let mut g = Graph::new();
        g.add_vertex(Vertex::named("x", VertexKind::State, "p")).unwrap();
        g.add_vertex(Vertex::named("y", VertexKind::State, "q")).unwrap();
        g.add_edge(Edge::new("e", "x", "y", "go")).unwrap();
        let ovs = enumerate_overlaps(&g, &g, 100).unwrap();
        // names force x~x and y~y: 4 vertex gluings, the full one also glues e
        assert_eq!(ovs.len(), 4);
        let full = ovs.iter().find(|o| o.graph.vertex_count() == 2).unwrap();
        assert_eq!(full.graph.edge_count(), 1);
        for o in &ovs {
            assert!(o.left.is_valid(&g, &o.graph));
            assert!(o.right.is_valid(&g, &o.graph));
        }
    }
}
