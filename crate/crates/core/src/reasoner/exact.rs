//! Exact marginals by enumerating assignments, one component at a time.

use crate::error::{Error, Result};

use super::bp::Marginals;
use super::graph::FactorGraph;

/// Largest component (in unobserved variables) that will be enumerated.
pub const MAX_EXACT_VARS: usize = 25;

pub fn exact_marginals(graph: &FactorGraph) -> Result<Marginals> {
    let components = graph.components();
    if let Some(big) = components.iter().find(|c| c.len() > MAX_EXACT_VARS) {
        return Err(Error::Refused(format!(
            "component of {} variables exceeds the enumeration limit of {MAX_EXACT_VARS}",
            big.len()
        )));
    }
    let adj = graph.adjacency();
    let mut out = Marginals::new();
    let mut local = vec![usize::MAX; graph.variables.len()];
    for comp in components {
        for (i, &v) in comp.iter().enumerate() {
            local[v] = i;
        }
        let mut factors: Vec<usize> = comp.iter().flat_map(|&v| adj[v].iter().copied()).collect();
        factors.sort_unstable();
        factors.dedup();
        // per factor: (factor id, for each scope entry: Ok(local bit) or Err(fixed value))
        let plans: Vec<(usize, Vec<std::result::Result<usize, bool>>)> = factors
            .iter()
            .map(|&f| {
                let plan = graph.factors[f]
                    .scope
                    .iter()
                    .map(|&v| match graph.variables[v].observed {
                        Some(b) => Err(b),
                        None => Ok(local[v]),
                    })
                    .collect();
                (f, plan)
            })
            .collect();
        let n = comp.len();
        let mut z = 0.0;
        let mut acc = vec![0.0; n];
        for world in 0u64..(1u64 << n) {
            let mut w = 1.0;
            for (f, plan) in &plans {
                let mut bits = 0u32;
                for (k, p) in plan.iter().enumerate() {
                    let on = match p {
                        Ok(i) => (world >> i) & 1 == 1,
                        Err(b) => *b,
                    };
                    bits |= (on as u32) << k;
                }
                w *= graph.factors[*f].value(bits);
                if w == 0.0 {
                    break;
                }
            }
            if w == 0.0 {
                continue;
            }
            z += w;
            for (i, a) in acc.iter_mut().enumerate() {
                if (world >> i) & 1 == 1 {
                    *a += w;
                }
            }
        }
        if z <= 0.0 {
            return Err(Error::Structural("factor graph has zero partition function".into()));
        }
        for (i, &v) in comp.iter().enumerate() {
            out.insert(graph.variables[v].name.clone(), acc[i] / z);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reasoner::graph::{build_factor_graph, Variable, VarKind};

    #[test]
    fn one_uniform_variable() {
        let g = FactorGraph {
            variables: vec![Variable {
                name: "a".into(),
                kind: VarKind::Membership,
                observed: None,
            }],
            factors: vec![],
        };
        assert_eq!(exact_marginals(&g).unwrap()["a"], 0.5);
    }

    #[test]
    fn empty_graph() {
        assert!(exact_marginals(&FactorGraph::default()).unwrap().is_empty());
    }

    #[test]
    fn deductive_worked_example() {
        let g = build_factor_graph(
            &"0.5 :: a(o).\n0.8 :: ev_a(o) <- a(o).\n0.2 :: ev_a(o) <- not a(o).\nevidence ev_a(o).\n\
              0.99 :: <- a(o), not b(o).\n"
                .parse()
                .unwrap(),
        )
        .unwrap();
        let m = exact_marginals(&g).unwrap();
        // worlds over (A, B): TT 0.8, TF 0.008, FT 0.2, FF 0.2
        assert!((m["a(o)"] - 0.808 / 1.208).abs() < 1e-9);
    }

    #[test]
    fn refuses_large_components() {
        let mut text = String::new();
        for i in 0..26 {
            text.push_str(&format!("0.9 :: <- a{i}(o), not a{}(o).\n", i + 1));
        }
        let g = build_factor_graph(&text.parse().unwrap()).unwrap();
        assert!(matches!(exact_marginals(&g), Err(Error::Refused(_))));
    }
}
