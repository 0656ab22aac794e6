//! Probabilistic logic reasoning: program translation, factor graphs,
//! belief propagation and an exact enumeration oracle.

mod bp;
mod compile;
mod exact;
mod graph;
mod program;

pub use bp::{run_bp, BpResult, BpSettings, Marginals};
pub use compile::{compile_kb, compile_visual, Penalties};
pub use exact::{exact_marginals, MAX_EXACT_VARS};
pub use graph::{build_factor_graph, Factor, FactorGraph, FactorRole, GateOp, Payload, VarKind, Variable, CLAMP};
pub use program::{Atom, BodyLit, Partition, WeightedProgram, WeightedRule, CONS_PREFIX, EVIDENCE_PREFIX};

use crate::error::{Error, Result};

/// Highest-marginal candidate for `object`, ties broken by the smallest id.
/// Candidates without a marginal count as 0.5.
pub fn answer_probe<'a>(marginals: &Marginals, candidates: &[&'a str], object: &str) -> Result<(&'a str, f64)> {
    let mut sorted: Vec<&'a str> = candidates.to_vec();
    sorted.sort_unstable();
    let mut best: Option<(&'a str, f64)> = None;
    for c in sorted {
        let p = marginals.get(&Atom::new(c, &[object]).to_string()).copied().unwrap_or(0.5);
        if best.is_none_or(|(_, q)| p > q) {
            best = Some((c, p));
        }
    }
    best.ok_or_else(|| Error::Contract("no candidate concepts".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_and_ties() {
        let m: Marginals = [("dumpTruck(o)".to_string(), 0.7), ("missileTruck(o)".to_string(), 0.2)].into();
        assert_eq!(answer_probe(&m, &["missileTruck", "dumpTruck"], "o").unwrap(), ("dumpTruck", 0.7));
        let m: Marginals = [("b(o)".to_string(), 0.5), ("a(o)".to_string(), 0.5)].into();
        assert_eq!(answer_probe(&m, &["b", "a"], "o").unwrap().0, "a");
        assert!(answer_probe(&m, &[], "o").is_err());
    }
}
