//! Test support shared by the integration suites: a possible-worlds oracle
//! that reads weighted programs directly (no factor graph involved) and a
//! generator of random compiled scene programs.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng as _;
use xil::memory::KnowledgeBase;
use xil::perception::{Edge, SceneGraph, Vertex};
use xil::reasoner::{compile_kb, compile_visual, Atom, Penalties, WeightedProgram};
use xil::worldsim::RegionRef;

pub const ORACLE_LIMIT: usize = 22;

/// Marginals by summing over every world of the program's atoms.
///
/// Semantics: evidence atoms are true; an atom with rules is true with
/// the noisy-or of the weights of its rules whose bodies hold (facts always
/// hold); an atom without rules is a fair coin; a constraint whose body
/// holds multiplies the world weight by `1 - w`.
pub fn oracle_marginals(program: &WeightedProgram) -> BTreeMap<String, f64> {
    let evidence: &BTreeSet<Atom> = &program.evidence;
    let free: Vec<Atom> = program.atoms().into_iter().filter(|a| !evidence.contains(a)).collect();
    assert!(free.len() <= ORACLE_LIMIT, "oracle limited to {ORACLE_LIMIT} atoms, got {}", free.len());
    let index: BTreeMap<&Atom, usize> = free.iter().enumerate().map(|(i, a)| (a, i)).collect();
    let mut heads: BTreeMap<&Atom, Vec<usize>> = BTreeMap::new();
    for (i, r) in program.rules.iter().enumerate() {
        if let Some(h) = &r.head {
            heads.entry(h).or_default().push(i);
        }
    }
    let mut total = 0.0;
    let mut on = vec![0.0; free.len()];
    for world in 0u64..(1 << free.len()) {
        let truth = |a: &Atom| evidence.contains(a) || index.get(a).is_some_and(|&i| world >> i & 1 == 1);
        let holds = |i: usize| program.rules[i].body.iter().all(|l| truth(&l.atom) != l.negated);
        let mut w = 1.0;
        for a in program.atoms() {
            let p_true = match heads.get(&a) {
                Some(rules) => 1.0 - rules.iter().filter(|&&i| holds(i)).map(|&i| 1.0 - program.rules[i].weight).product::<f64>(),
                None => 0.5,
            };
            w *= if truth(&a) { p_true } else { 1.0 - p_true };
            if w == 0.0 {
                break;
            }
        }
        for (i, r) in program.rules.iter().enumerate() {
            if r.head.is_none() && holds(i) {
                w *= 1.0 - r.weight;
            }
        }
        if w == 0.0 {
            continue;
        }
        total += w;
        for (i, m) in on.iter_mut().enumerate() {
            if world >> i & 1 == 1 {
                *m += w;
            }
        }
    }
    free.iter().zip(on).map(|(a, m)| (a.to_string(), m / total)).collect()
}

const WHOLES: [&str; 4] = ["dumpTruck", "fireTruck", "missileTruck", "containerTruck"];
const PARTS: [&str; 4] = ["dumper", "ladder", "rocketLauncher", "quadCabin"];

/// A random scene graph (target plus 1..=3 part candidates) with a random
/// knowledge base of at most six whole-part rules, compiled.
pub fn random_instance(rng: &mut impl rand::Rng) -> (SceneGraph, KnowledgeBase, WeightedProgram) {
    let belief = |rng: &mut dyn rand::RngCore| 0.02 + 0.96 * rng.random::<f64>();
    let n_wholes = rng.random_range(2..=3);
    let n_parts = rng.random_range(1..=3);
    let wholes = &WHOLES[..n_wholes];
    let parts = &PARTS[..n_parts];
    let mut vertices = vec![Vertex {
        id: "o".into(),
        region: RegionRef::exact("o"),
        beliefs: wholes.iter().map(|w| (w.to_string(), belief(rng))).collect(),
        searched_for: Vec::new(),
    }];
    let mut edges = Vec::new();
    for k in 0..rng.random_range(1..=3) {
        let searched: Vec<String> = parts.iter().filter(|_| rng.random_bool(0.6)).map(|p| p.to_string()).collect();
        let searched = if searched.is_empty() { vec![parts[k % n_parts].to_string()] } else { searched };
        vertices.push(Vertex {
            id: format!("p{k}"),
            region: RegionRef::exact(format!("p{k}")),
            beliefs: searched.iter().map(|p| (p.clone(), belief(rng))).collect(),
            searched_for: searched,
        });
        edges.push(Edge {
            from: 0,
            to: k + 1,
            beliefs: [("have".to_string(), belief(rng))].into(),
        });
    }
    let sg = SceneGraph { vertices, edges, target: 0 };
    let mut kb = KnowledgeBase::new();
    for _ in 0..rng.random_range(0..=6) {
        let w = wholes[rng.random_range(0..n_wholes)];
        let p = parts[rng.random_range(0..n_parts)];
        kb.add_whole_part(w, p, None).expect("whole-part rule");
    }
    let mut program = compile_visual(&sg).expect("visual program");
    program.extend(compile_kb(&kb, &sg, Penalties::default()).expect("knowledge program"));
    (sg, kb, program)
}

pub fn max_abs_diff(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> f64 {
    a.iter()
        .filter_map(|(k, x)| b.get(k).map(|y| (x - y).abs()))
        .fold(0.0, f64::max)
}
