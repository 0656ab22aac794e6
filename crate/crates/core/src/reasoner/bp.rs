//! Sum-product belief propagation with exact messages for AND/OR gates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::graph::{FactorGraph, GateOp, Payload};

pub type Marginals = BTreeMap<String, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BpSettings {
    pub max_iters: usize,
    pub damping: f64,
    pub tolerance: f64,
    /// Also damp on forests, where undamped flooding is exact.
    pub damp_acyclic: bool,
}

impl Default for BpSettings {
    fn default() -> Self {
        BpSettings {
            max_iters: 200,
            damping: 0.5,
            tolerance: 1e-6,
            damp_acyclic: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BpResult {
    /// P(var = true) for every unobserved variable.
    pub marginals: Marginals,
    pub converged: bool,
    pub iterations: usize,
}

type Msg = [f64; 2];

fn normalize(m: Msg) -> Msg {
    let z = m[0] + m[1];
    if z > 0.0 && z.is_finite() {
        [m[0] / z, m[1] / z]
    } else {
        [0.5, 0.5]
    }
}

fn flip(m: Msg, neg: bool) -> Msg {
    if neg {
        [m[1], m[0]]
    } else {
        m
    }
}

/// Messages from a gate to each scope position, given the incoming
/// variable-to-factor messages (same order as the scope, output last).
fn gate_messages(op: GateOp, negated: &[bool], incoming: &[Msg]) -> Vec<Msg> {
    // AND(l) = not OR(not l): run OR on flipped literals and output
    let and = op == GateOp::And;
    let n = negated.len();
    let ins: Vec<Msg> = (0..n).map(|i| flip(incoming[i], negated[i] ^ and)).collect();
    let out = flip(incoming[n], and);
    let sums: Vec<f64> = ins.iter().map(|m| m[0] + m[1]).collect();
    let falses: Vec<f64> = ins.iter().map(|m| m[0]).collect();
    let excl = |xs: &[f64]| -> Vec<f64> {
        let mut pre = vec![1.0; n + 1];
        for i in 0..n {
            pre[i + 1] = pre[i] * xs[i];
        }
        let mut suf = vec![1.0; n + 1];
        for i in (0..n).rev() {
            suf[i] = suf[i + 1] * xs[i];
        }
        (0..n).map(|i| pre[i] * suf[i + 1]).chain([pre[n]]).collect()
    };
    let s = excl(&sums);
    let f = excl(&falses);
    let mut msgs = Vec::with_capacity(n + 1);
    for j in 0..n {
        let t = out[1] * s[j];
        let fl = out[0] * f[j] + out[1] * (s[j] - f[j]);
        msgs.push(normalize(flip([fl, t], negated[j] ^ and)));
    }
    let y = [f[n], s[n] - f[n]];
    msgs.push(normalize(flip(y, and)));
    msgs
}

fn table_messages(table: &[f64], incoming: &[Msg]) -> Vec<Msg> {
    let n = incoming.len();
    let mut out = vec![[0.0; 2]; n];
    for (bits, &val) in table.iter().enumerate() {
        if val == 0.0 {
            continue;
        }
        for j in 0..n {
            let mut w = val;
            for (i, m) in incoming.iter().enumerate() {
                if i != j {
                    w *= m[(bits >> i) & 1];
                }
            }
            out[j][(bits >> j) & 1] += w;
        }
    }
    out.into_iter().map(normalize).collect()
}

/// Runs synchronous flooding until the largest message change drops
/// below the tolerance. Damping applies only to loopy graphs unless
/// `damp_acyclic` is set.
pub fn run_bp(graph: &FactorGraph, settings: &BpSettings) -> BpResult {
    let adj = graph.adjacency();
    let nf = graph.factors.len();
    // f2v[f][k]: message from factor f to its k-th scope variable
    let mut f2v: Vec<Vec<Msg>> = graph.factors.iter().map(|f| vec![[0.5, 0.5]; f.scope.len()]).collect();
    let slot: Vec<Vec<(usize, usize)>> = adj
        .iter()
        .enumerate()
        .map(|(v, fs)| {
            fs.iter()
                .map(|&f| (f, graph.factors[f].scope.iter().position(|&w| w == v).unwrap()))
                .collect()
        })
        .collect();
    let damping = if graph.is_acyclic() && !settings.damp_acyclic {
        0.0
    } else {
        settings.damping
    };

    let var_to_factor = |f2v: &Vec<Vec<Msg>>, v: usize, except: (usize, usize)| -> Msg {
        if let Some(obs) = graph.variables[v].observed {
            return if obs { [0.0, 1.0] } else { [1.0, 0.0] };
        }
        let mut m = [1.0, 1.0];
        for &(f, k) in &slot[v] {
            if (f, k) != except {
                let x = f2v[f][k];
                m = normalize([m[0] * x[0], m[1] * x[1]]);
            }
        }
        m
    };

    let mut converged = graph.factors.is_empty();
    let mut iterations = 0;
    while !converged && iterations < settings.max_iters {
        iterations += 1;
        let mut residual: f64 = 0.0;
        let mut next = f2v.clone();
        for f in 0..nf {
            let fac = &graph.factors[f];
            let incoming: Vec<Msg> = fac
                .scope
                .iter()
                .enumerate()
                .map(|(k, &v)| var_to_factor(&f2v, v, (f, k)))
                .collect();
            let msgs = match &fac.payload {
                Payload::Table(t) => table_messages(t, &incoming),
                Payload::Gate { op, negated } => gate_messages(*op, negated, &incoming),
            };
            for (k, m) in msgs.into_iter().enumerate() {
                let old = f2v[f][k];
                let new = normalize([
                    (1.0 - damping) * m[0] + damping * old[0],
                    (1.0 - damping) * m[1] + damping * old[1],
                ]);
                residual = residual.max((new[1] - old[1]).abs());
                next[f][k] = new;
            }
        }
        f2v = next;
        converged = residual < settings.tolerance;
    }

    let marginals = graph
        .variables
        .iter()
        .enumerate()
        .filter(|(_, var)| var.observed.is_none())
        .map(|(v, var)| {
            let m = var_to_factor(&f2v, v, (usize::MAX, usize::MAX));
            (var.name.clone(), m[1])
        })
        .collect();
    BpResult {
        marginals,
        converged,
        iterations,
    }
}
