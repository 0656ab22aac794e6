//! Sufficient reasons for an answer and their rendering as part-based
//! explanations.
//!
//! A reason is a subset-minimal set of evidence variables that, with every
//! other evidence factor removed, still makes the answer the strict argmax
//! among the candidate concepts. Evidence on the probed object itself is
//! avoided when possible: the search first looks for a reason among the
//! remaining evidence and only then falls back to the full set.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dialogue::Move;
use crate::error::{Error, Result};
use crate::perception::SceneGraph;
use crate::reasoner::{run_bp, Atom, BpSettings, FactorGraph, Marginals};
use crate::worldsim::RegionRef;

/// Exhaustive subset search is used up to this many candidate variables.
pub const EXHAUSTIVE_LIMIT: usize = 12;

/// Required lead of the answer over every other candidate.
pub const MARGIN: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SufficientReason {
    /// Evidence variable names, strongest first.
    pub evidence: Vec<String>,
    pub answer: String,
    pub object: String,
    /// Marginal of the answer under the reason alone.
    pub strength: f64,
}

/// Inference used while searching, so tests can swap in enumeration.
pub type Infer<'a> = dyn Fn(&FactorGraph) -> Result<Marginals> + 'a;

pub fn bp_inference(settings: BpSettings) -> impl Fn(&FactorGraph) -> Result<Marginals> {
    move |g| Ok(run_bp(g, &settings).marginals)
}

/// Whether `answer` leads every other candidate on `object` by [`MARGIN`].
pub fn preserves(m: &Marginals, answer: &str, candidates: &[&str], object: &str) -> Option<f64> {
    let get = |c: &str| m.get(&Atom::new(c, &[object]).to_string()).copied().unwrap_or(0.5);
    let pa = get(answer);
    candidates
        .iter()
        .filter(|&&c| c != answer)
        .all(|&c| pa > get(c) + MARGIN)
        .then_some(pa)
}

/// Evidence relevant to the answer: evidence variables attached to the
/// components holding the candidate memberships of `object`, with an
/// informative likelihood. Sorted by decreasing `|p - 0.5|`, then name.
pub fn candidate_evidence(graph: &FactorGraph, candidates: &[&str], object: &str) -> Vec<(String, f64)> {
    let cand_vars: BTreeSet<usize> = candidates
        .iter()
        .filter_map(|c| graph.var(&Atom::new(*c, &[object]).to_string()))
        .collect();
    let comps = graph.components();
    let relevant: BTreeSet<usize> = comps
        .into_iter()
        .filter(|c| c.iter().any(|v| cand_vars.contains(v)))
        .flatten()
        .collect();
    let mut out: Vec<(String, f64)> = graph
        .evidence_links()
        .into_iter()
        .filter(|(_, m)| relevant.contains(m))
        .filter_map(|(ev, _)| Some((graph.variables[ev].name.clone(), graph.likelihood(ev)?)))
        .filter(|(_, p)| (p - 0.5).abs() > 1e-12)
        .collect();
    out.sort_by(|a, b| (b.1 - 0.5).abs().total_cmp(&(a.1 - 0.5).abs()).then_with(|| a.0.cmp(&b.0)));
    out
}

struct Search<'a> {
    graph: FactorGraph,
    names: Vec<String>,
    answer: &'a str,
    candidates: &'a [&'a str],
    object: &'a str,
    infer: &'a Infer<'a>,
    memo: BTreeMap<Vec<usize>, Option<f64>>,
}

impl Search<'_> {
    /// Answer marginal if evidence `set` (indices into `names`) alone keeps
    /// the answer on top.
    fn check(&mut self, set: &[usize]) -> Result<Option<f64>> {
        let mut key = set.to_vec();
        key.sort_unstable();
        if let Some(r) = self.memo.get(&key) {
            return Ok(*r);
        }
        let keep: BTreeSet<usize> = key
            .iter()
            .map(|&i| self.graph.var(&self.names[i]).expect("evidence variable"))
            .collect();
        let m = (self.infer)(&self.graph.restrict_evidence(&keep))?;
        let r = preserves(&m, self.answer, self.candidates, self.object);
        self.memo.insert(key, r);
        Ok(r)
    }

    /// Minimal preserving subset of `pool` (indices in strength order).
    fn minimal(&mut self, pool: &[usize]) -> Result<Option<(Vec<usize>, f64)>> {
        if pool.is_empty() || self.check(pool)?.is_none() {
            return Ok(None);
        }
        if pool.len() <= EXHAUSTIVE_LIMIT {
            // by size, then strongest-first lexicographic order: the first
            // hit has minimum cardinality and is therefore subset-minimal
            for k in 1..=pool.len() {
                let mut idx: Vec<usize> = (0..k).collect();
                loop {
                    let set: Vec<usize> = idx.iter().map(|&i| pool[i]).collect();
                    if let Some(p) = self.check(&set)? {
                        return Ok(Some((set, p)));
                    }
                    if !next_combination(&mut idx, pool.len()) {
                        break;
                    }
                }
            }
            unreachable!("the full pool preserves the answer");
        }
        let mut set = Vec::new();
        for &e in pool {
            set.push(e);
            if self.check(&set)?.is_some() {
                break;
            }
        }
        // preservation is not monotone, so a removal can enable another
        let mut shrunk = true;
        while shrunk && set.len() > 1 {
            shrunk = false;
            for i in (0..set.len()).rev() {
                let mut fewer = set.clone();
                fewer.remove(i);
                if self.check(&fewer)?.is_some() {
                    set = fewer;
                    shrunk = true;
                    break;
                }
            }
        }
        let p = self.check(&set)?.expect("greedy set preserves the answer");
        Ok(Some((set, p)))
    }
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    for i in (0..k).rev() {
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Sufficient reason for `answer(object)` among `candidates`, or `None`
/// when no non-empty evidence subset keeps the answer strictly on top.
pub fn sufficient_reason(
    graph: &FactorGraph,
    answer: &str,
    candidates: &[&str],
    object: &str,
    infer: &Infer<'_>,
) -> Result<Option<SufficientReason>> {
    let answer_var = Atom::new(answer, &[object]).to_string();
    if graph.var(&answer_var).is_none() {
        return Err(Error::Lookup(format!("no variable {answer_var}")));
    }
    let evidence = candidate_evidence(graph, candidates, object);
    let names: Vec<String> = evidence.iter().map(|(n, _)| n.clone()).collect();
    let on_object = |n: &str| {
        n.parse::<Atom>()
            .ok()
            .and_then(|a| a.evidence_target())
            .is_some_and(|a| a.args == [object])
    };
    let mut search = Search {
        graph: graph.clone(),
        names: names.clone(),
        answer,
        candidates,
        object,
        infer,
        memo: BTreeMap::new(),
    };
    let all: Vec<usize> = (0..names.len()).collect();
    let elsewhere: Vec<usize> = all.iter().copied().filter(|&i| !on_object(&names[i])).collect();
    let found = match search.minimal(&elsewhere)? {
        Some(r) => Some(r),
        None => search.minimal(&all)?,
    };
    Ok(found.map(|(mut set, strength)| {
        set.sort_unstable();
        SufficientReason {
            evidence: set.into_iter().map(|i| names[i].clone()).collect(),
            answer: answer.to_string(),
            object: object.to_string(),
            strength,
        }
    }))
}

fn citable<'r>(reason: &'r SufficientReason, graph: &FactorGraph, parts: &BTreeSet<String>) -> Vec<(&'r str, Atom)> {
    reason
        .evidence
        .iter()
        .filter_map(|name| {
            let atom = name.parse::<Atom>().ok()?.evidence_target()?;
            let [subject] = atom.args.as_slice() else {
                return None;
            };
            if subject == &reason.object || !parts.contains(&atom.pred) {
                return None;
            }
            let p = graph.likelihood(graph.var(name)?)?;
            (p > 0.5).then_some((name.as_str(), atom))
        })
        .collect()
}

/// The part evidence a rendered explanation would cite: the strongest
/// positive unary evidence in the reason whose concept is one of `parts`
/// and whose subject is not the probed object.
pub fn cited_evidence<'r>(reason: &'r SufficientReason, graph: &FactorGraph, parts: &BTreeSet<String>) -> Option<(&'r str, Atom)> {
    citable(reason, graph, parts).into_iter().next()
}

/// Explanation move and its region references for the cited evidence.
/// No citation renders as "I cannot explain".
pub fn render_explanation(cited: Option<(&str, Atom)>, sg: &SceneGraph) -> Result<(Move, BTreeMap<String, RegionRef>)> {
    let Some((_, atom)) = cited else {
        return Ok((Move::CannotExplain, BTreeMap::new()));
    };
    let vertex = &atom.args[0];
    let v = sg
        .vertex(vertex)
        .ok_or_else(|| Error::Structural(format!("cited vertex {vertex} is not in the scene graph")))?;
    Ok((
        Move::Explain {
            part: atom.pred.clone(),
            region: vertex.clone(),
        },
        [(vertex.clone(), v.region.clone())].into(),
    ))
}
