use std::collections::{BTreeMap, HashMap};

use super::{Graph, Morphism, Vertex};

/// All injective, structure-preserving embeddings of `pattern` into `host`,
/// sorted by the host ids assigned to pattern vertices (in pattern-id
/// order), then by the edge assignment.
pub fn find_monomorphisms(pattern: &Graph, host: &Graph) -> Vec<Morphism> {
    let mut found = Search::new(pattern, host, &Morphism::new(), false).run(None);
    found.sort();
    found
}

/// Whether the partial embedding `seed` (defined on a subgraph of
/// `pattern`) extends to a total embedding of `pattern` into `host`.
pub fn extends_to(pattern: &Graph, host: &Graph, seed: &Morphism) -> bool {
    !Search::new(pattern, host, seed, false).run(Some(1)).is_empty()
}

/// A bijective structure-preserving map from `g` onto `h`, if one exists.
pub fn is_isomorphic(g: &Graph, h: &Graph) -> Option<Morphism> {
    if g.vertex_count() != h.vertex_count() || g.edge_count() != h.edge_count() {
        return None;
    }
    fn profile(x: &Graph) -> (Vec<(super::VertexKind, &BTreeMap<String, String>)>, Vec<&str>) {
        let mut vs: Vec<_> = x.vertices().map(|v| (v.kind, &v.attrs)).collect();
        vs.sort();
        let mut ls: Vec<_> = x.edges().map(|e| e.label.as_str()).collect();
        ls.sort_unstable();
        (vs, ls)
    }
    if profile(g) != profile(h) {
        return None;
    }
    Search::new(g, h, &Morphism::new(), true)
        .run(Some(1))
        .into_iter()
        .next()
}

type LabelCounts<'a> = BTreeMap<&'a str, usize>;

struct Search<'a> {
    pattern_vertices: Vec<&'a Vertex>,
    host_vertices: Vec<&'a Vertex>,
    candidates: Vec<Vec<usize>>,
    /// Pattern label multisets per ordered vertex pair.
    pattern_adj: HashMap<(usize, usize), LabelCounts<'a>>,
    host_adj: HashMap<(usize, usize), LabelCounts<'a>>,
    /// For each pattern vertex, the vertices it shares an edge with.
    neighbours: Vec<Vec<usize>>,
    /// Host edge ids per ordered (src, tgt) pair, in id order.
    host_edges: HashMap<(usize, usize), Vec<(&'a str, &'a str)>>,
    /// Pattern edges as (id, src, tgt, label).
    pattern_edges: Vec<(&'a str, usize, usize, &'a str)>,
    edge_seed: &'a BTreeMap<String, String>,
    order: Vec<usize>,
    exact: bool,
}

impl<'a> Search<'a> {
    fn new(pattern: &'a Graph, host: &'a Graph, seed: &'a Morphism, exact: bool) -> Self {
        let pattern_vertices: Vec<&Vertex> = pattern.vertices().collect();
        let host_vertices: Vec<&Vertex> = host.vertices().collect();
        let p_index: HashMap<&str, usize> = pattern_vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (v.id.as_str(), i))
            .collect();
        let h_index: HashMap<&str, usize> = host_vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (v.id.as_str(), i))
            .collect();

        let mut pattern_adj: HashMap<(usize, usize), LabelCounts> = HashMap::new();
        let mut neighbours = vec![Vec::new(); pattern_vertices.len()];
        let mut pattern_edges = Vec::new();
        let mut p_deg = vec![(0usize, 0usize); pattern_vertices.len()];
        for e in pattern.edges() {
            let (s, t) = (p_index[e.src.as_str()], p_index[e.tgt.as_str()]);
            *pattern_adj.entry((s, t)).or_default().entry(&e.label).or_default() += 1;
            neighbours[s].push(t);
            neighbours[t].push(s);
            pattern_edges.push((e.id.as_str(), s, t, e.label.as_str()));
            p_deg[s].0 += 1;
            p_deg[t].1 += 1;
        }
        for n in &mut neighbours {
            n.sort_unstable();
            n.dedup();
        }

        let mut host_adj: HashMap<(usize, usize), LabelCounts> = HashMap::new();
        let mut host_edges: HashMap<(usize, usize), Vec<(&str, &str)>> = HashMap::new();
        let mut h_deg = vec![(0usize, 0usize); host_vertices.len()];
        for e in host.edges() {
            let (s, t) = (h_index[e.src.as_str()], h_index[e.tgt.as_str()]);
            *host_adj.entry((s, t)).or_default().entry(&e.label).or_default() += 1;
            host_edges
                .entry((s, t))
                .or_default()
                .push((e.id.as_str(), e.label.as_str()));
            h_deg[s].0 += 1;
            h_deg[t].1 += 1;
        }

        let candidates: Vec<Vec<usize>> = pattern_vertices
            .iter()
            .enumerate()
            .map(|(i, pv)| {
                let fits = |h: usize| {
                    let hv = host_vertices[h];
                    pv.compatible(hv)
                        && if exact {
                            p_deg[i] == h_deg[h]
                        } else {
                            p_deg[i].0 <= h_deg[h].0 && p_deg[i].1 <= h_deg[h].1
                        }
                };
                match seed.vmap.get(&pv.id) {
                    Some(img) => h_index
                        .get(img.as_str())
                        .copied()
                        .filter(|&h| fits(h))
                        .into_iter()
                        .collect(),
                    None => (0..host_vertices.len()).filter(|&h| fits(h)).collect(),
                }
            })
            .collect();

        let order = search_order(&pattern_vertices, &candidates, &neighbours, seed);

        Search {
            pattern_vertices,
            host_vertices,
            candidates,
            pattern_adj,
            host_adj,
            neighbours,
            host_edges,
            pattern_edges,
            edge_seed: &seed.emap,
            order,
            exact,
        }
    }

    fn run(&self, limit: Option<usize>) -> Vec<Morphism> {
        let mut out = Vec::new();
        if self.candidates.iter().any(Vec::is_empty) {
            return out;
        }
        let mut assign = vec![usize::MAX; self.pattern_vertices.len()];
        let mut used = vec![false; self.host_vertices.len()];
        self.place(0, &mut assign, &mut used, &mut out, limit);
        out
    }

    fn done(out: &[Morphism], limit: Option<usize>) -> bool {
        limit.is_some_and(|l| out.len() >= l)
    }

    fn place(
        &self,
        depth: usize,
        assign: &mut [usize],
        used: &mut [bool],
        out: &mut Vec<Morphism>,
        limit: Option<usize>,
    ) {
        if depth == self.order.len() {
            self.assign_edges(assign, out, limit);
            return;
        }
        let p = self.order[depth];
        for &h in &self.candidates[p] {
            if used[h] {
                continue;
            }
            assign[p] = h;
            if self.adjacency_ok(p, assign) {
                used[h] = true;
                self.place(depth + 1, assign, used, out, limit);
                used[h] = false;
            }
            assign[p] = usize::MAX;
            if Self::done(out, limit) {
                return;
            }
        }
    }

    fn adjacency_ok(&self, p: usize, assign: &[usize]) -> bool {
        let empty = LabelCounts::new();
        let check = |a: usize, b: usize| {
            let need = self.pattern_adj.get(&(a, b)).unwrap_or(&empty);
            let have = self
                .host_adj
                .get(&(assign[a], assign[b]))
                .unwrap_or(&empty);
            if self.exact {
                need == have
            } else {
                need.iter().all(|(l, n)| have.get(l).is_some_and(|m| m >= n))
            }
        };
        if !check(p, p) {
            return false;
        }
        let others = if self.exact {
            // exact mode must also rule out host edges between images of
            // pattern vertices that share no edge
            (0..assign.len()).filter(|&q| q != p && assign[q] != usize::MAX).collect::<Vec<_>>()
        } else {
            self.neighbours[p]
                .iter()
                .copied()
                .filter(|&q| q != p && assign[q] != usize::MAX)
                .collect()
        };
        others.into_iter().all(|q| check(p, q) && check(q, p))
    }

    fn assign_edges(&self, assign: &[usize], out: &mut Vec<Morphism>, limit: Option<usize>) {
        let mut chosen: Vec<&str> = Vec::with_capacity(self.pattern_edges.len());
        self.edge_step(0, assign, &mut chosen, out, limit);
    }

    fn edge_step<'s>(
        &'s self,
        k: usize,
        assign: &[usize],
        chosen: &mut Vec<&'s str>,
        out: &mut Vec<Morphism>,
        limit: Option<usize>,
    ) {
        if Self::done(out, limit) {
            return;
        }
        if k == self.pattern_edges.len() {
            out.push(self.morphism(assign, chosen));
            return;
        }
        let (pid, s, t, label) = self.pattern_edges[k];
        let Some(bucket) = self.host_edges.get(&(assign[s], assign[t])) else {
            return;
        };
        let fixed = self.edge_seed.get(pid).map(String::as_str);
        for &(hid, hlabel) in bucket {
            if hlabel != label || chosen.contains(&hid) || fixed.is_some_and(|f| f != hid) {
                continue;
            }
            chosen.push(hid);
            self.edge_step(k + 1, assign, chosen, out, limit);
            chosen.pop();
            if Self::done(out, limit) {
                return;
            }
        }
    }

    fn morphism(&self, assign: &[usize], chosen: &[&str]) -> Morphism {
        Morphism {
            vmap: self
                .pattern_vertices
                .iter()
                .zip(assign)
                .map(|(p, &h)| (p.id.clone(), self.host_vertices[h].id.clone()))
                .collect(),
            emap: self
                .pattern_edges
                .iter()
                .zip(chosen)
                .map(|(p, h)| (p.0.to_string(), h.to_string()))
                .collect(),
        }
    }
}

/// Seeded vertices first, then repeatedly the vertex most connected to the
/// already ordered ones, preferring fewer candidates.
fn search_order(
    vertices: &[&Vertex],
    candidates: &[Vec<usize>],
    neighbours: &[Vec<usize>],
    seed: &Morphism,
) -> Vec<usize> {
    let n = vertices.len();
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for (i, v) in vertices.iter().enumerate() {
        if seed.vmap.contains_key(&v.id) {
            placed[i] = true;
            order.push(i);
        }
    }
    while order.len() < n {
        let next = (0..n)
            .filter(|&i| !placed[i])
            .max_by_key(|&i| {
                let links = neighbours[i].iter().filter(|&&j| placed[j]).count();
                (links, std::cmp::Reverse(candidates[i].len()), std::cmp::Reverse(i))
            })
            .expect("unplaced vertex remains");
        placed[next] = true;
        order.push(next);
    }
    order
}
