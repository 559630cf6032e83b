//! Randomized invariants of the engine. Structure is drawn from a seeded
//! ChaCha stream so every failing case is reproducible from its seed.

mod common;

use std::collections::BTreeSet;

use aspectra_core::cpa::{conflicts, dependencies};
use aspectra_core::graph::{
    canonical_form, enumerate_overlaps, find_monomorphisms, is_isomorphic, ElemRef, Graph, Vertex, VertexKind,
};
use aspectra_core::statechart::{flatten, validate};
use aspectra_core::transform::{apply_traced, check_match};
use aspectra_core::{apply, find_matches, weave, DEFAULT_MAX_OVERLAPS};
use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NAMES: [&str; 3] = ["p", "q", "r"];
const LABELS: [&str; 2] = ["x", "y"];

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn falling(n: usize, k: usize) -> usize {
    (0..k).map(|i| n - i).product()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn monomorphism_count_matches_brute_force(seed: u64, pn in 1usize..=3, hn in 1usize..=6) {
        let mut r = rng(seed);
        let pe = r.gen_range(0..=3);
        let he = r.gen_range(0..=8);
        let p = random_graph(&mut r, pn, pe, &NAMES[..2], &LABELS);
        let h = random_graph(&mut r, hn, he, &NAMES[..2], &LABELS);
        let found = find_monomorphisms(&p, &h);
        prop_assert_eq!(found.len(), brute_force_embeddings(&p, &h));
        for m in &found {
            prop_assert!(m.is_valid(&p, &h) && m.is_injective());
        }
    }

    #[test]
    fn canonical_form_decides_isomorphism(seed: u64, n in 1usize..=8) {
        let mut r = rng(seed);
        let e = r.gen_range(0..=2 * n);
        let g = random_graph(&mut r, n, e, &NAMES, &LABELS);
        let copy = shuffled(&mut r, &g);
        prop_assert_eq!(canonical_form(&g), canonical_form(&copy));
        let other = random_graph(&mut r, n, e, &NAMES, &LABELS);
        let same_form = canonical_form(&g) == canonical_form(&other);
        prop_assert_eq!(same_form, brute_force_isomorphic(&g, &other));
        prop_assert_eq!(is_isomorphic(&g, &other).is_some(), same_form);
    }

    #[test]
    fn overlaps_are_jointly_surjective_gluings(seed: u64, n1 in 1usize..=3, n2 in 1usize..=3) {
        let mut r = rng(seed);
        let e1 = r.gen_range(0..=2);
        let e2 = r.gen_range(0..=2);
        let g1 = random_graph(&mut r, n1, e1, &NAMES[..2], &LABELS);
        let g2 = random_graph(&mut r, n2, e2, &NAMES[..2], &LABELS);
        let overlaps = enumerate_overlaps(&g1, &g2, DEFAULT_MAX_OVERLAPS).unwrap();
        let mut seen = BTreeSet::new();
        for o in &overlaps {
            prop_assert!(o.left.is_valid(&g1, &o.graph) && o.left.is_injective());
            prop_assert!(o.right.is_valid(&g2, &o.graph) && o.right.is_injective());
            let covered: BTreeSet<ElemRef> = o.left.image().union(&o.right.image()).cloned().collect();
            prop_assert_eq!(covered, o.graph.elements());
            prop_assert!(seen.insert(o.fingerprint()));
        }
        if overlaps.len() > 1 {
            prop_assert!(enumerate_overlaps(&g1, &g2, overlaps.len() - 1).is_err());
        }
    }

    #[test]
    fn edgeless_overlap_count_is_closed_form(n1 in 0usize..=4, n2 in 0usize..=4) {
        let make = |n: usize| {
            let mut g = Graph::new();
            for i in 0..n {
                g.add_vertex(Vertex::named(format!("v{i}"), VertexKind::State, "p")).unwrap();
            }
            g
        };
        let expected: usize = (0..=n1.min(n2)).map(|k| binomial(n1, k) * falling(n2, k)).sum();
        prop_assert_eq!(enumerate_overlaps(&make(n1), &make(n2), DEFAULT_MAX_OVERLAPS).unwrap().len(), expected);
    }

    #[test]
    fn rewriting_never_leaves_dangling_edges(seed: u64, n in 1usize..=6) {
        let mut r = rng(seed);
        let e = r.gen_range(0..=2 * n);
        let host = random_graph(&mut r, n, e, &NAMES, &LABELS);
        let rule = random_rule(&mut r, "P-R1", &NAMES, &LABELS, true);
        for m in find_matches(&rule, &host) {
            let out = apply(&rule, &host, &m).unwrap();
            prop_assert!(out.is_well_formed());
        }
        prop_assert!(weave(std::slice::from_ref(&rule), &host).graph.is_well_formed());
    }

    #[test]
    fn parallel_independent_steps_commute(seed: u64, n in 2usize..=6) {
        let mut r = rng(seed);
        let e = r.gen_range(1..=2 * n);
        let host = random_graph(&mut r, n, e, &NAMES, &LABELS);
        let p1 = random_rule(&mut r, "P-R1", &NAMES, &LABELS, true);
        let p2 = random_rule(&mut r, "Q-R1", &NAMES, &LABELS, true);
        for m1 in find_matches(&p1, &host) {
            for m2 in find_matches(&p2, &host) {
                let (h1, _) = apply_traced(&p1, &host, &m1.embedding).unwrap();
                let (h2, _) = apply_traced(&p2, &host, &m2.embedding).unwrap();
                // surviving host elements keep their ids, so each match can
                // be checked unchanged against the other step's result
                let m2_survives = m2.embedding.is_valid(p2.lhs(), &h1) && check_match(&p2, &h1, &m2.embedding).is_ok();
                let m1_survives = m1.embedding.is_valid(p1.lhs(), &h2) && check_match(&p1, &h2, &m1.embedding).is_ok();
                if m1_survives && m2_survives {
                    let (h12, _) = apply_traced(&p2, &h1, &m2.embedding).unwrap();
                    let (h21, _) = apply_traced(&p1, &h2, &m1.embedding).unwrap();
                    prop_assert!(is_isomorphic(&h12, &h21).is_some());
                }
            }
        }
    }

    #[test]
    fn weaving_is_deterministic_up_to_renaming(seed: u64, n in 1usize..=6) {
        let mut r = rng(seed);
        let e = r.gen_range(0..=2 * n);
        let host = random_graph(&mut r, n, e, &NAMES, &LABELS);
        let rules = vec![
            random_rule(&mut r, "P-R1", &NAMES, &LABELS, false),
            random_rule(&mut r, "P-R2", &NAMES, &LABELS, false),
        ];
        let once = weave(&rules, &host);
        let again = weave(&rules, &host);
        prop_assert_eq!(&once.graph, &again.graph);
        let renamed = weave(&rules, &shuffled(&mut r, &host));
        prop_assert!(is_isomorphic(&once.graph, &renamed.graph).is_some());
    }

    #[test]
    fn critical_pairs_reverify(seed: u64) {
        let mut r = rng(seed);
        let p1 = random_rule(&mut r, "P-R1", &NAMES[..2], &LABELS, true);
        let p2 = random_rule(&mut r, "Q-R1", &NAMES[..2], &LABELS, true);
        let mut found = conflicts(&p1, &p2, DEFAULT_MAX_OVERLAPS).unwrap();
        found.extend(dependencies(&p1, &p2, DEFAULT_MAX_OVERLAPS).unwrap());
        let mut forms = BTreeSet::new();
        for pair in &found {
            prop_assert!(pair.verify(&p1, &p2));
            prop_assert!(pair.overlap.is_well_formed());
            let key = (pair.kind, format!("{:?}", pair.embeddings), canonical_form(&pair.overlap));
            prop_assert!(forms.insert(key));
        }
    }

    #[test]
    fn random_statecharts_flatten_cleanly(seed: u64) {
        let mut r = rng(seed);
        let sm = random_statechart(&mut r);
        prop_assert!(validate(&sm).is_empty());
        let g = flatten(&sm).unwrap();
        prop_assert!(g.is_well_formed());
        for v in g.vertices() {
            prop_assert_eq!(v.id.contains('|'), v.kind == VertexKind::Config);
        }
        prop_assert_eq!(flatten(&sm).unwrap(), g);
    }
}
