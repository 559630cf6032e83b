use std::collections::HashMap;

use super::Graph;

/// Isomorphism-invariant byte encoding: equal for two graphs exactly when
/// they are isomorphic.
///
/// Vertex colors start from (kind, attrs) and are refined by labeled
/// in/out neighbourhoods; ties are broken by individualizing each member of
/// the first non-trivial cell in turn. The smallest leaf encoding wins.
pub fn canonical_form(g: &Graph) -> Vec<u8> {
    let data = Indexed::new(g);
    let mut initial_keys: Vec<_> = data.vertex_keys.iter().map(|k| k.as_slice()).collect();
    initial_keys.sort_unstable();
    initial_keys.dedup();
    let colors: Vec<usize> = data
        .vertex_keys
        .iter()
        .map(|k| initial_keys.binary_search(&k.as_slice()).expect("key present"))
        .collect();
    let colors = data.refine(colors);
    let mut best: Option<Vec<u8>> = None;
    data.descend(colors, &mut best);
    best.unwrap_or_default()
}

struct Indexed {
    /// Serialized (kind, attrs) per vertex.
    vertex_keys: Vec<Vec<u8>>,
    /// (src, tgt, label id); labels are ranked by string order.
    edges: Vec<(usize, usize, usize)>,
    labels: Vec<String>,
    out_adj: Vec<Vec<(usize, usize)>>,
    in_adj: Vec<Vec<(usize, usize)>>,
}

impl Indexed {
    fn new(g: &Graph) -> Self {
        let index: HashMap<&str, usize> = g
            .vertices()
            .enumerate()
            .map(|(i, v)| (v.id.as_str(), i))
            .collect();
        let vertex_keys = g
            .vertices()
            .map(|v| {
                let mut key = Vec::new();
                push_str(&mut key, v.kind.as_str());
                key.extend((v.attrs.len() as u32).to_be_bytes());
                for (k, val) in &v.attrs {
                    push_str(&mut key, k);
                    push_str(&mut key, val);
                }
                key
            })
            .collect();
        let mut labels: Vec<String> = g.edges().map(|e| e.label.clone()).collect();
        labels.sort();
        labels.dedup();
        let n = g.vertex_count();
        let mut out_adj = vec![Vec::new(); n];
        let mut in_adj = vec![Vec::new(); n];
        let edges = g
            .edges()
            .map(|e| {
                let (s, t) = (index[e.src.as_str()], index[e.tgt.as_str()]);
                let l = labels.binary_search(&e.label).expect("label present");
                out_adj[s].push((l, t));
                in_adj[t].push((l, s));
                (s, t, l)
            })
            .collect();
        Indexed {
            vertex_keys,
            edges,
            labels,
            out_adj,
            in_adj,
        }
    }

    /// Equitable refinement; new colors are ranks of signatures that start
    /// with the old color, so refinement never reorders existing cells.
    fn refine(&self, mut colors: Vec<usize>) -> Vec<usize> {
        let mut cells = count_cells(&colors);
        loop {
            let sigs: Vec<(usize, Vec<(usize, usize)>, Vec<(usize, usize)>)> = (0..colors.len())
                .map(|v| {
                    let mut out: Vec<_> = self.out_adj[v].iter().map(|&(l, t)| (l, colors[t])).collect();
                    let mut inc: Vec<_> = self.in_adj[v].iter().map(|&(l, s)| (l, colors[s])).collect();
                    out.sort_unstable();
                    inc.sort_unstable();
                    (colors[v], out, inc)
                })
                .collect();
            let mut sorted: Vec<_> = sigs.iter().collect();
            sorted.sort();
            sorted.dedup();
            colors = sigs
                .iter()
                .map(|s| sorted.binary_search(&s).expect("signature present"))
                .collect();
            let now = count_cells(&colors);
            if now == cells {
                return colors;
            }
            cells = now;
        }
    }

    fn descend(&self, colors: Vec<usize>, best: &mut Option<Vec<u8>>) {
        let n = colors.len();
        let mut sizes = vec![0usize; n];
        for &c in &colors {
            sizes[c] += 1;
        }
        let Some(target) = (0..n).find(|&c| sizes[c] > 1) else {
            let leaf = self.encode(&colors);
            if best.as_ref().is_none_or(|b| leaf < *b) {
                *best = Some(leaf);
            }
            return;
        };
        let members: Vec<usize> = (0..n).filter(|&v| colors[v] == target).collect();
        for v in members {
            let keys: Vec<(usize, bool)> = (0..n).map(|u| (colors[u], u != v)).collect();
            let mut sorted = keys.clone();
            sorted.sort_unstable();
            sorted.dedup();
            let split = keys
                .iter()
                .map(|k| sorted.binary_search(k).expect("key present"))
                .collect();
            self.descend(self.refine(split), best);
        }
    }

    /// `colors` is a permutation here: vertex v sits at position colors[v].
    fn encode(&self, colors: &[usize]) -> Vec<u8> {
        let n = colors.len();
        let mut by_pos = vec![0usize; n];
        for (v, &c) in colors.iter().enumerate() {
            by_pos[c] = v;
        }
        let mut out = Vec::new();
        out.extend((n as u32).to_be_bytes());
        for &v in &by_pos {
            out.extend_from_slice(&self.vertex_keys[v]);
        }
        let mut edges: Vec<(usize, usize, &str)> = self
            .edges
            .iter()
            .map(|&(s, t, l)| (colors[s], colors[t], self.labels[l].as_str()))
            .collect();
        edges.sort_unstable();
        out.extend((edges.len() as u32).to_be_bytes());
        for (s, t, l) in edges {
            out.extend((s as u32).to_be_bytes());
            out.extend((t as u32).to_be_bytes());
            push_str(&mut out, l);
        }
        out
    }
}

fn count_cells(colors: &[usize]) -> usize {
    let mut seen = colors.to_vec();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

fn push_str(out: &mut Vec<u8>, s: &str) {
    out.extend((s.len() as u32).to_be_bytes());
    out.extend_from_slice(s.as_bytes());
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, Vertex, VertexKind};

    fn graph(vertices: &[(&str, &str)], edges: &[(&str, &str, &str)]) -> Graph {
        let mut g = Graph::new();
        for (id, name) in vertices {
            g.add_vertex(Vertex::named(*id, VertexKind::State, *name)).unwrap();
        }
        for (i, (s, t, l)) in edges.iter().enumerate() {
            g.add_edge(Edge::new(format!("e{i}"), *s, *t, *l)).unwrap();
        }
        g
    }

    #[test]
    fn permuted_ids_give_equal_forms() {
        let a = graph(&[("1", "x"), ("2", "y"), ("3", "x")], &[("1", "2", "go"), ("2", "3", "go")]);
        let b = graph(&[("c", "x"), ("a", "y"), ("b", "x")], &[("b", "a", "go"), ("a", "c", "go")]);
        assert_eq!(canonical_form(&a), canonical_form(&b));
    }

    #[test]
    fn label_change_is_visible() {
        let a = graph(&[("1", "x"), ("2", "y")], &[("1", "2", "go")]);
        let b = graph(&[("1", "x"), ("2", "y")], &[("1", "2", "stop")]);
        assert_ne!(canonical_form(&a), canonical_form(&b));
    }

    #[test]
    fn regular_graphs_are_distinguished() {
        // two directed 3-cycles vs one directed 6-cycle: refinement alone
        // cannot split these, individualization must
        let names: Vec<(String, String)> = (0..6).map(|i| (i.to_string(), "s".to_string())).collect();
        let vs: Vec<(&str, &str)> = names.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        let two = graph(&vs, &[("0", "1", ""), ("1", "2", ""), ("2", "0", ""), ("3", "4", ""), ("4", "5", ""), ("5", "3", "")]);
        let six = graph(&vs, &[("0", "1", ""), ("1", "2", ""), ("2", "3", ""), ("3", "4", ""), ("4", "5", ""), ("5", "0", "")]);
        assert_ne!(canonical_form(&two), canonical_form(&six));
        let six_shuffled = graph(&vs, &[("3", "0", ""), ("0", "5", ""), ("5", "1", ""), ("1", "4", ""), ("4", "2", ""), ("2", "3", "")]);
        assert_eq!(canonical_form(&six), canonical_form(&six_shuffled));
    }

    #[test]
    fn empty_graph() {
        assert_eq!(canonical_form(&Graph::new()), canonical_form(&Graph::new()));
    }
}
