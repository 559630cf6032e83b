//! Fixtures, random generators and brute-force reference implementations
//! shared by the integration targets.
#![allow(dead_code)]

use std::collections::BTreeMap;

use aspectra_core::aspects::{parse_concerns, Aspect};
use aspectra_core::graph::{Edge, Graph, Vertex, VertexKind};
use aspectra_core::statechart::{Region, State, StateKind, StateMachine, Transition};
use aspectra_core::{compile, CompiledAspect, Rule};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn fixture(name: &str) -> String {
    let path = format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

pub fn model(name: &str) -> StateMachine {
    serde_json::from_str(&fixture(name)).unwrap()
}

pub fn compiled_fixture(name: &str) -> Vec<CompiledAspect> {
    aspectra_core::compile_all(&parse_concerns(&fixture(name)).unwrap()).unwrap()
}

pub fn rule_named<'a>(compiled: &'a [CompiledAspect], name: &str) -> &'a Rule {
    compiled
        .iter()
        .flat_map(|c| &c.rules)
        .find(|r| r.name() == name)
        .unwrap_or_else(|| panic!("no rule {name}"))
}

// ---------------------------------------------------------------- graphs

/// Random graph over `n` vertices whose names come from `names` and edge
/// labels from `labels`.
pub fn random_graph(rng: &mut impl Rng, n: usize, edges: usize, names: &[&str], labels: &[&str]) -> Graph {
    let mut g = Graph::new();
    for i in 0..n {
        let name = names[rng.gen_range(0..names.len())];
        g.add_vertex(Vertex::named(format!("v{i}"), VertexKind::State, name)).unwrap();
    }
    if n > 0 {
        for k in 0..edges {
            let s = rng.gen_range(0..n);
            let t = rng.gen_range(0..n);
            let l = labels[rng.gen_range(0..labels.len())];
            g.add_edge(Edge::new(format!("e{k}"), format!("v{s}"), format!("v{t}"), l)).unwrap();
        }
    }
    g
}

/// Copy of `g` with vertex and edge ids renamed by a random permutation.
pub fn shuffled(rng: &mut impl Rng, g: &Graph) -> Graph {
    let mut vids: Vec<&Vertex> = g.vertices().collect();
    vids.shuffle(rng);
    let rename: BTreeMap<&str, String> = vids.iter().enumerate().map(|(i, v)| (v.id.as_str(), format!("w{i}"))).collect();
    let mut out = Graph::new();
    for v in &vids {
        let mut w = (*v).clone();
        w.id = rename[v.id.as_str()].clone();
        out.add_vertex(w).unwrap();
    }
    let mut es: Vec<&Edge> = g.edges().collect();
    es.shuffle(rng);
    for (i, e) in es.iter().enumerate() {
        out.add_edge(Edge::new(format!("f{i}"), &rename[e.src.as_str()], &rename[e.tgt.as_str()], &e.label))
            .unwrap();
    }
    out
}

fn vertex_list(g: &Graph) -> Vec<&Vertex> {
    g.vertices().collect()
}

/// Number of injective, structure-preserving maps of `p` into `h`,
/// counted by trying every injective vertex assignment and then every
/// injective edge assignment.
pub fn brute_force_embeddings(p: &Graph, h: &Graph) -> usize {
    let pv = vertex_list(p);
    let hv = vertex_list(h);
    let mut total = 0;
    let mut assign = Vec::new();
    let mut used = vec![false; hv.len()];
    vertex_assignments(&pv, &hv, &mut assign, &mut used, &mut |assign| {
        let map: BTreeMap<&str, &str> = pv.iter().zip(assign).map(|(a, &j)| (a.id.as_str(), hv[j].id.as_str())).collect();
        let pe: Vec<&Edge> = p.edges().collect();
        let he: Vec<&Edge> = h.edges().collect();
        total += edge_assignments(&pe, &he, &map, &mut vec![false; he.len()], 0);
    });
    total
}

fn vertex_assignments(
    pv: &[&Vertex],
    hv: &[&Vertex],
    assign: &mut Vec<usize>,
    used: &mut Vec<bool>,
    visit: &mut dyn FnMut(&[usize]),
) {
    if assign.len() == pv.len() {
        visit(assign);
        return;
    }
    let a = pv[assign.len()];
    for j in 0..hv.len() {
        if used[j] || hv[j].kind != a.kind || hv[j].attrs != a.attrs {
            continue;
        }
        used[j] = true;
        assign.push(j);
        vertex_assignments(pv, hv, assign, used, visit);
        assign.pop();
        used[j] = false;
    }
}

fn edge_assignments(pe: &[&Edge], he: &[&Edge], map: &BTreeMap<&str, &str>, used: &mut Vec<bool>, i: usize) -> usize {
    if i == pe.len() {
        return 1;
    }
    let e = pe[i];
    let mut n = 0;
    for j in 0..he.len() {
        let f = he[j];
        if !used[j] && f.label == e.label && f.src == map[e.src.as_str()] && f.tgt == map[e.tgt.as_str()] {
            used[j] = true;
            n += edge_assignments(pe, he, map, used, i + 1);
            used[j] = false;
        }
    }
    n
}

/// Isomorphism by exhaustive vertex bijections: equal sizes and a vertex
/// bijection under which the labeled edge multisets coincide.
pub fn brute_force_isomorphic(g: &Graph, h: &Graph) -> bool {
    if g.vertex_count() != h.vertex_count() || g.edge_count() != h.edge_count() {
        return false;
    }
    let gv = vertex_list(g);
    let hv = vertex_list(h);
    let mut target: Vec<(&str, &str, &str)> = h.edges().map(|e| (e.src.as_str(), e.tgt.as_str(), e.label.as_str())).collect();
    target.sort_unstable();
    let mut found = false;
    vertex_assignments(&gv, &hv, &mut Vec::new(), &mut vec![false; hv.len()], &mut |assign| {
        if found {
            return;
        }
        let map: BTreeMap<&str, &str> = gv.iter().zip(assign).map(|(a, &j)| (a.id.as_str(), hv[j].id.as_str())).collect();
        let mut image: Vec<(&str, &str, &str)> = g.edges().map(|e| (map[e.src.as_str()], map[e.tgt.as_str()], e.label.as_str())).collect();
        image.sort_unstable();
        found = image == target;
    });
    found
}

// ---------------------------------------------------------------- rules

/// Random rule over the given vocabulary: a connected-ish lhs of 1..=3
/// vertices, some of which (and some edges) are deleted, plus created
/// vertices and edges, and optionally one NAC forbidding an extra edge.
pub fn random_rule(rng: &mut impl Rng, name: &str, names: &[&str], labels: &[&str], deleting: bool) -> Rule {
    loop {
        let n = rng.gen_range(1..=3);
        let edges = rng.gen_range(0..=2);
        let lhs = random_graph(rng, n, edges, names, labels);
        let mut rhs = lhs.clone();
        if deleting {
            let es: Vec<String> = rhs.edges().map(|e| e.id.clone()).collect();
            for e in es {
                if rng.gen_bool(0.3) {
                    rhs.remove_edge(&e).unwrap();
                }
            }
            let vs: Vec<String> = rhs.vertices().map(|v| v.id.clone()).collect();
            for v in vs {
                if rng.gen_bool(0.2) {
                    let inc: Vec<String> = rhs.incident_edges(&v).map(|e| e.id.clone()).collect();
                    for e in inc {
                        rhs.remove_edge(&e).unwrap();
                    }
                    rhs.remove_vertex(&v).unwrap();
                }
            }
        }
        let created = rng.gen_range(0..=1);
        for i in 0..created {
            let nm = names[rng.gen_range(0..names.len())];
            rhs.add_vertex(Vertex::named(format!("c{i}"), VertexKind::State, nm)).unwrap();
        }
        let rv: Vec<String> = rhs.vertices().map(|v| v.id.clone()).collect();
        if !rv.is_empty() {
            for k in 0..rng.gen_range(0..=2) {
                let s = rv.choose(rng).unwrap();
                let t = rv.choose(rng).unwrap();
                rhs.add_edge(Edge::new(format!("ce{k}"), s, t, *labels.choose(rng).unwrap())).unwrap();
            }
        }
        let mut nacs = Vec::new();
        if rng.gen_bool(0.4) {
            let mut nac = lhs.clone();
            let lv: Vec<String> = lhs.vertices().map(|v| v.id.clone()).collect();
            let s = lv.choose(rng).unwrap().clone();
            let t = if rng.gen_bool(0.5) {
                lv.choose(rng).unwrap().clone()
            } else {
                nac.add_vertex(Vertex::named("x0", VertexKind::State, *names.choose(rng).unwrap())).unwrap();
                "x0".to_string()
            };
            nac.add_edge(Edge::new("xe", s, t, *labels.choose(rng).unwrap())).unwrap();
            nacs.push(nac);
        }
        if let Ok(r) = Rule::new(name, lhs, rhs, nacs) {
            return r;
        }
    }
}

// ---------------------------------------------------------------- models

const STATE_POOL: [&str; 10] = ["s0", "s1", "s2", "s3", "s4", "s5", "s6", "s7", "s8", "s9"];
const CREATED_POOL: [&str; 3] = ["n0", "n1", "n2"];
const EVENTS: [&str; 4] = ["a", "b", "c", "d"];

/// Random valid statechart with at most ten states (pseudo-states and
/// composites included); about a quarter contain an orthogonal composite.
pub fn random_statechart(rng: &mut impl Rng) -> StateMachine {
    let with_composite = rng.gen_bool(0.25);
    let simple = if with_composite { rng.gen_range(2..=4) } else { rng.gen_range(2..=9) };
    let mut names: Vec<&str> = STATE_POOL.to_vec();
    names.shuffle(rng);
    let names: Vec<String> = names[..simple].iter().map(|s| s.to_string()).collect();
    let mut states = vec![State::of_kind("init", StateKind::Initial)];
    states.extend(names.iter().map(State::simple));
    let mut targets: Vec<String> = names.clone();
    if with_composite {
        states.push(State::composite(
            "O",
            true,
            vec![
                Region {
                    initial: "o_a".into(),
                    states: vec![State::simple("o_a"), State::simple("o_b")],
                },
                Region {
                    initial: "o_c".into(),
                    states: vec![State::simple("o_c"), State::simple("o_d")],
                },
            ],
        ));
        targets.extend(["O", "o_b", "o_d"].map(String::from));
    }
    let mut transitions = vec![Transition::simple("init", &names[0], "start")];
    for _ in 0..rng.gen_range(simple..=2 * simple) {
        let s = targets.choose(rng).unwrap();
        let t = targets.choose(rng).unwrap();
        transitions.push(Transition::simple(s, t, *EVENTS.choose(rng).unwrap()));
    }
    StateMachine {
        name: "random".into(),
        states,
        transitions,
    }
}

/// Random purely additive aspect over the shared name pools.
pub fn random_additive_aspect(rng: &mut impl Rng, name: &str) -> CompiledAspect {
    loop {
        // a narrow pool keeps joinpoints shared between the two aspects
        let pool: Vec<&str> = STATE_POOL[..4].iter().chain(&CREATED_POOL[..2]).copied().collect();
        let a = *pool.choose(rng).unwrap();
        let b = *pool.choose(rng).unwrap();
        let mut states = vec![serde_json::json!(a)];
        if b != a {
            states.push(serde_json::json!(b));
        }
        let mut transitions = Vec::new();
        let mut xor_groups = Vec::new();
        match rng.gen_range(0..4) {
            0 => {}
            1 | 2 => transitions.push(serde_json::json!({"source": a, "target": b, "event": EVENTS.choose(rng).unwrap()})),
            _ => {
                let mut evs = EVENTS.to_vec();
                evs.shuffle(rng);
                transitions.push(serde_json::json!({"source": a, "target": b, "event": evs[0]}));
                transitions.push(serde_json::json!({"source": a, "target": b, "event": evs[1]}));
                xor_groups.push(vec![0, 1]);
            }
        }
        let exposed: Vec<&str> = if a == b { vec![a] } else { vec![a, b] };
        let advice = if rng.gen_bool(0.5) {
            let created = *CREATED_POOL[..2].choose(rng).unwrap();
            serde_json::json!({
                "create_states": [created],
                "create_transitions": [{"source": a, "target": created, "event": EVENTS.choose(rng).unwrap()}]
            })
        } else {
            serde_json::json!({
                "create_transitions": [{"source": a, "target": b, "event": EVENTS.choose(rng).unwrap()}]
            })
        };
        let doc = serde_json::json!({
            "name": name,
            "pointcut": {"states": states, "transitions": transitions, "xor_groups": xor_groups, "exposed": exposed},
            "advice": advice
        });
        let aspect: Aspect = serde_json::from_value(doc).unwrap();
        if let Ok(c) = compile(&aspect) {
            return c;
        }
    }
}

const FEATURE_STATES: [&str; 12] = [
    "idle", "dial_tone", "dialing", "ringing", "busy", "connected", "wait_onhook", "on_hold", "forwarding", "callback", "conference", "voicemail",
];
const FEATURE_EVENTS: [&str; 6] = ["offhook", "onhook", "flash", "digit", "timeout", "answer"];

/// Synthetic feature aspect number `i`; each compiles to two rules. Even
/// indices use an xor pair of transitions, odd indices a member reference
/// into a two-region hold composite.
pub fn synthetic_aspect(rng: &mut impl Rng, i: usize) -> Aspect {
    let name = format!("F{i:02}");
    // joinpoints come from the six core call states so features overlap
    let core = &FEATURE_STATES[..6];
    let a = *core.choose(rng).unwrap();
    let mut b = *core.choose(rng).unwrap();
    while b == a {
        b = *core.choose(rng).unwrap();
    }
    let created = if i % 5 == 0 {
        let pick = FEATURE_STATES.iter().filter(|s| **s != a && **s != b);
        pick.copied().collect::<Vec<_>>().choose(rng).unwrap().to_string()
    } else {
        format!("f{i:02}_state")
    };
    let ev = *FEATURE_EVENTS.choose(rng).unwrap();
    let doc = if i % 2 == 0 {
        let mut evs = FEATURE_EVENTS.to_vec();
        evs.shuffle(rng);
        serde_json::json!({
            "name": name,
            "pointcut": {
                "states": [a, b],
                "transitions": [
                    {"source": a, "target": b, "event": evs[0]},
                    {"source": a, "target": b, "event": evs[1]}
                ],
                "xor_groups": [[0, 1]],
                "exposed": [a, b]
            },
            "advice": {
                "create_states": [created],
                "create_transitions": [
                    {"source": a, "target": created, "event": ev},
                    {"source": a, "target": b, "event": ev}
                ]
            }
        })
    } else {
        let member = if rng.gen_bool(0.5) { "line_held" } else { "line_muted" };
        serde_json::json!({
            "name": name,
            "pointcut": {
                "states": [a, {"id": "hold", "members": [member], "composite": {"name": "Hold", "regions": [
                    {"initial": "line_held", "states": ["line_held", "line_muted"]},
                    {"initial": "music_on", "states": ["music_on", "music_off"]}
                ]}}],
                "exposed": [a, "hold"]
            },
            "advice": {"create_transitions": [{"source": a, "target": "hold", "event": ev}]}
        })
    };
    serde_json::from_value(doc).unwrap()
}
