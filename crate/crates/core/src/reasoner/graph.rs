//! Factor-graph form of a weighted program.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::program::{Atom, BodyLit, WeightedProgram, WeightedRule};

/// Lower clamp for probabilistic weights; the upper clamp is `1 - CLAMP`.
pub const CLAMP: f64 = 1e-6;

fn clamp(w: f64) -> f64 {
    w.clamp(CLAMP, 1.0 - CLAMP)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    Membership,
    Evidence,
    Aux,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    /// Clamped value of an observed variable.
    pub observed: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorRole {
    Prior,
    /// Pairwise likelihood between a membership atom and its evidence atom.
    Evidence,
    /// Deductive or abductive penalty.
    Rule,
    /// Deterministic aggregation.
    Aggregation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateOp {
    And,
    Or,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    /// Values indexed by assignment; bit `i` is the value of `scope[i]`.
    Table(Vec<f64>),
    /// `scope[last] = op(scope[i] xor negated[i])` over the other entries.
    Gate { op: GateOp, negated: Vec<bool> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub role: FactorRole,
    pub scope: Vec<usize>,
    pub payload: Payload,
}

impl Factor {
    /// Value under an assignment of the scope (bit `i` = `scope[i]`).
    pub fn value(&self, bits: u32) -> f64 {
        match &self.payload {
            Payload::Table(t) => t[bits as usize],
            Payload::Gate { op, negated } => {
                let n = negated.len();
                let lit = |i: usize| ((bits >> i) & 1 == 1) ^ negated[i];
                let y = match op {
                    GateOp::Or => (0..n).any(lit),
                    GateOp::And => (0..n).all(lit),
                };
                if y == ((bits >> n) & 1 == 1) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FactorGraph {
    pub variables: Vec<Variable>,
    pub factors: Vec<Factor>,
}

impl FactorGraph {
    pub fn var(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// Factor ids adjacent to each variable.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.variables.len()];
        for (f, fac) in self.factors.iter().enumerate() {
            for &v in &fac.scope {
                adj[v].push(f);
            }
        }
        adj
    }

    /// Evidence factor of an evidence variable.
    pub fn evidence_factor(&self, ev: usize) -> Option<usize> {
        self.factors
            .iter()
            .position(|f| f.role == FactorRole::Evidence && f.scope.contains(&ev))
    }

    /// Unobserved variables grouped into connected components (observed
    /// variables do not connect anything since they are clamped).
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut uf = UnionFind::new(self.variables.len());
        for f in &self.factors {
            let free: Vec<usize> = f.scope.iter().copied().filter(|&v| self.variables[v].observed.is_none()).collect();
            for w in free.windows(2) {
                uf.union(w[0], w[1]);
            }
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for v in 0..self.variables.len() {
            if self.variables[v].observed.is_none() {
                groups.entry(uf.find(v)).or_default().push(v);
            }
        }
        groups.into_values().collect()
    }

    /// Whether the unobserved part of the graph is a forest.
    pub fn is_acyclic(&self) -> bool {
        let nv = self.variables.len();
        let mut uf = UnionFind::new(nv + self.factors.len());
        for (f, fac) in self.factors.iter().enumerate() {
            for &v in &fac.scope {
                if self.variables[v].observed.is_some() {
                    continue;
                }
                if !uf.union(v, nv + f) {
                    return false;
                }
            }
        }
        true
    }

    /// Subgraph over `vars` (plus observed variables the kept factors
    /// touch), keeping factors whose unobserved scope lies inside `vars`.
    pub fn subgraph(&self, vars: &[usize]) -> FactorGraph {
        let keep: BTreeSet<usize> = vars.iter().copied().collect();
        let factors: Vec<&Factor> = self
            .factors
            .iter()
            .filter(|f| {
                let mut free = f.scope.iter().filter(|&&v| self.variables[v].observed.is_none()).peekable();
                free.peek().is_some() && free.all(|v| keep.contains(v))
            })
            .collect();
        let mut used: BTreeSet<usize> = keep;
        for f in &factors {
            used.extend(f.scope.iter().copied());
        }
        let remap: BTreeMap<usize, usize> = used.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        FactorGraph {
            variables: used.iter().map(|&v| self.variables[v].clone()).collect(),
            factors: factors
                .into_iter()
                .map(|f| Factor {
                    scope: f.scope.iter().map(|v| remap[v]).collect(),
                    ..f.clone()
                })
                .collect(),
        }
    }

    /// Copy with every evidence factor dropped except those of `keep`.
    pub fn restrict_evidence(&self, keep: &BTreeSet<usize>) -> FactorGraph {
        FactorGraph {
            variables: self.variables.clone(),
            factors: self
                .factors
                .iter()
                .filter(|f| {
                    f.role != FactorRole::Evidence
                        || f.scope.iter().any(|v| keep.contains(v) && self.variables[*v].kind == VarKind::Evidence)
                })
                .cloned()
                .collect(),
        }
    }

    /// Evidence variables and the membership variable each reports on.
    pub fn evidence_links(&self) -> Vec<(usize, usize)> {
        self.factors
            .iter()
            .filter(|f| f.role == FactorRole::Evidence)
            .filter_map(|f| {
                let ev = f.scope.iter().copied().find(|&v| self.variables[v].kind == VarKind::Evidence)?;
                let m = f.scope.iter().copied().find(|&v| v != ev)?;
                Some((ev, m))
            })
            .collect()
    }

    /// P(ev | member = true) of an evidence factor.
    pub fn likelihood(&self, ev: usize) -> Option<f64> {
        let f = &self.factors[self.evidence_factor(ev)?];
        let (Payload::Table(t), [a, b]) = (&f.payload, f.scope.as_slice()) else {
            return None;
        };
        let ev_bit = if *a == ev { 0 } else if *b == ev { 1 } else { return None };
        let m_bit = 1 - ev_bit;
        let idx = |m: usize, e: usize| (m << m_bit) | (e << ev_bit);
        let (t_true, f_true) = (t[idx(1, 1)], t[idx(0, 1)]);
        Some(t_true / (t_true + f_true))
    }
}

impl fmt::Display for FactorGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.variables.iter().enumerate() {
            let obs = match v.observed {
                Some(b) => format!(" = {b}"),
                None => String::new(),
            };
            writeln!(f, "v{i} {:?} {}{obs}", v.kind, v.name)?;
        }
        for fac in &self.factors {
            let scope: Vec<String> = fac.scope.iter().map(|v| format!("v{v}")).collect();
            match &fac.payload {
                Payload::Table(t) => {
                    let vals: Vec<String> = t.iter().map(|x| format!("{x}")).collect();
                    writeln!(f, "{:?} [{}] table {}", fac.role, scope.join(" "), vals.join(" "))?
                }
                Payload::Gate { op, negated } => {
                    let ins: Vec<String> = scope[..negated.len()]
                        .iter()
                        .zip(negated)
                        .map(|(s, n)| if *n { format!("!{s}") } else { s.clone() })
                        .collect();
                    writeln!(f, "{:?} {} = {:?}({})", fac.role, scope[negated.len()], op, ins.join(" "))?
                }
            }
        }
        Ok(())
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    /// False when `a` and `b` were already joined.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra] = rb;
        true
    }
}

/// Largest rule table; longer constraint bodies go through an AND gate,
/// and rule tables are only merged while their union stays this small.
pub const MAX_TABLE_ARITY: usize = 12;

struct Builder {
    graph: FactorGraph,
    index: BTreeMap<Atom, usize>,
    gates: usize,
}

impl Builder {
    fn var(&mut self, atom: &Atom, kind: VarKind) -> usize {
        if let Some(&i) = self.index.get(atom) {
            return i;
        }
        let i = self.graph.variables.len();
        self.graph.variables.push(Variable {
            name: atom.to_string(),
            kind,
            observed: None,
        });
        self.index.insert(atom.clone(), i);
        i
    }

    fn aux(&mut self, prefix: &str) -> usize {
        let name = format!("_{prefix}{}", self.gates);
        self.gates += 1;
        self.graph.variables.push(Variable {
            name,
            kind: VarKind::Aux,
            observed: None,
        });
        self.graph.variables.len() - 1
    }

    fn gate(&mut self, op: GateOp, inputs: &[(usize, bool)], output: usize) {
        let mut scope: Vec<usize> = inputs.iter().map(|(v, _)| *v).collect();
        scope.push(output);
        self.graph.factors.push(Factor {
            role: FactorRole::Aggregation,
            scope,
            payload: Payload::Gate {
                op,
                negated: inputs.iter().map(|(_, n)| *n).collect(),
            },
        });
    }

    fn lits(&mut self, body: &[BodyLit]) -> Vec<(usize, bool)> {
        body.iter().map(|l| (self.var(&l.atom, VarKind::Membership), l.negated)).collect()
    }
}

/// Canonical body: sorted unique literals, `None` if it is contradictory.
fn normalize(body: &[BodyLit]) -> Option<Vec<BodyLit>> {
    let set: BTreeSet<&BodyLit> = body.iter().collect();
    let out: Vec<BodyLit> = set.into_iter().cloned().collect();
    for w in out.windows(2) {
        if w[0].atom == w[1].atom {
            return None;
        }
    }
    Some(out)
}

/// Compiles a program. Every atom becomes a boolean variable; undefined
/// atoms are free with a uniform prior; evidence atoms are observed true.
pub fn build_factor_graph(program: &WeightedProgram) -> Result<FactorGraph> {
    program.validate()?;
    let mut b = Builder {
        graph: FactorGraph::default(),
        index: BTreeMap::new(),
        gates: 0,
    };
    let mut defs: BTreeMap<&Atom, Vec<&WeightedRule>> = BTreeMap::new();
    for r in &program.rules {
        if let Some(h) = &r.head {
            defs.entry(h).or_default().push(r);
        }
    }
    // declare variables in a stable order
    for atom in program.atoms() {
        let kind = if program.evidence.contains(&atom) {
            VarKind::Evidence
        } else if defs.get(&atom).is_some_and(|rs| rs.iter().all(|r| r.weight == 1.0 && !r.body.is_empty())) {
            VarKind::Aux
        } else {
            VarKind::Membership
        };
        let v = b.var(&atom, kind);
        if kind == VarKind::Evidence {
            b.graph.variables[v].observed = Some(true);
        }
    }

    for (head, rules) in &defs {
        let h = b.index[*head];
        let deterministic = rules.iter().all(|r| r.weight == 1.0 && !r.body.is_empty() && r.body.iter().all(|l| !l.negated));
        if deterministic {
            // head = OR over rule bodies, each an AND
            let mut inputs = Vec::new();
            for r in rules {
                let lits = b.lits(&r.body);
                if let [single] = lits.as_slice() {
                    inputs.push(*single);
                } else if rules.len() == 1 {
                    b.gate(GateOp::And, &lits, h);
                    continue;
                } else {
                    let a = b.aux("and");
                    b.gate(GateOp::And, &lits, a);
                    inputs.push((a, false));
                }
            }
            if !inputs.is_empty() {
                b.gate(GateOp::Or, &inputs, h);
            }
            continue;
        }
        // noisy-or table over body atoms and the head
        let mut scope: Vec<usize> = Vec::new();
        for r in rules {
            for l in &r.body {
                let v = b.var(&l.atom, VarKind::Membership);
                if !scope.contains(&v) {
                    scope.push(v);
                }
            }
        }
        if scope.contains(&h) {
            return Err(Error::Structural(format!("{head} depends on itself")));
        }
        if scope.len() + 1 > MAX_TABLE_ARITY {
            return Err(Error::Structural(format!(
                "probabilistic definition of {head} spans {} atoms",
                scope.len() + 1
            )));
        }
        let n = scope.len();
        let mut table = vec![0.0; 1 << (n + 1)];
        for bits in 0..(1u32 << n) {
            let value = |atom: &Atom| {
                let v = b.index[atom];
                let i = scope.iter().position(|&s| s == v).unwrap();
                (bits >> i) & 1 == 1
            };
            let mut p_false = 1.0;
            for r in rules {
                if r.body.iter().all(|l| value(&l.atom) != l.negated) {
                    p_false *= 1.0 - clamp(r.weight);
                }
            }
            let p_true = clamp(1.0 - p_false);
            table[bits as usize] = 1.0 - p_true;
            table[(bits | (1 << n)) as usize] = p_true;
        }
        scope.push(h);
        let role = if b.graph.variables[h].kind == VarKind::Evidence {
            FactorRole::Evidence
        } else {
            FactorRole::Prior
        };
        b.graph.factors.push(Factor {
            role,
            scope,
            payload: Payload::Table(table),
        });
    }

    for r in program.rules.iter().filter(|r| r.is_constraint()) {
        let Some(body) = normalize(&r.body) else {
            continue;
        };
        let penalty = 1.0 - clamp(r.weight);
        let lits = b.lits(&body);
        if lits.len() <= MAX_TABLE_ARITY {
            let n = lits.len();
            let table = (0..(1u32 << n))
                .map(|bits| {
                    let holds = lits.iter().enumerate().all(|(i, (_, neg))| ((bits >> i) & 1 == 1) != *neg);
                    if holds {
                        penalty
                    } else {
                        1.0
                    }
                })
                .collect();
            b.graph.factors.push(Factor {
                role: FactorRole::Rule,
                scope: lits.iter().map(|(v, _)| *v).collect(),
                payload: Payload::Table(table),
            });
        } else {
            let viol = b.aux("viol");
            b.gate(GateOp::And, &lits, viol);
            b.graph.factors.push(Factor {
                role: FactorRole::Rule,
                scope: vec![viol],
                payload: Payload::Table(vec![1.0, penalty]),
            });
        }
    }
    merge_rule_factors(&mut b.graph);
    Ok(b.graph)
}

/// Multiplies rule factors, and the aggregation gates they touch, into one
/// table over the union of their scopes while the union has at most
/// [`MAX_TABLE_ARITY`] variables. The distribution is unchanged; loops
/// running only through merged factors disappear.
fn merge_rule_factors(g: &mut FactorGraph) {
    let mergeable = |a: &Factor, b: &Factor| {
        let roles = [a.role, b.role];
        roles.contains(&FactorRole::Rule) && roles.iter().all(|r| matches!(r, FactorRole::Rule | FactorRole::Aggregation))
    };
    loop {
        let mut pair = None;
        'search: for i in 0..g.factors.len() {
            for j in i + 1..g.factors.len() {
                let (fi, fj) = (&g.factors[i], &g.factors[j]);
                if !mergeable(fi, fj) {
                    continue;
                }
                let extra = fj.scope.iter().filter(|v| !fi.scope.contains(v)).count();
                if extra < fj.scope.len() && fi.scope.len() + extra <= MAX_TABLE_ARITY {
                    pair = Some((i, j));
                    break 'search;
                }
            }
        }
        let Some((i, j)) = pair else { break };
        let other = g.factors.remove(j);
        let base = &g.factors[i];
        let mut scope = base.scope.clone();
        scope.extend(other.scope.iter().filter(|v| !base.scope.contains(v)));
        let project = |sub: &[usize], bits: u32| {
            sub.iter().enumerate().fold(0u32, |acc, (k, v)| {
                acc | (((bits >> scope.iter().position(|w| w == v).unwrap()) & 1) << k)
            })
        };
        let table: Vec<f64> = (0..1u32 << scope.len())
            .map(|bits| base.value(project(&base.scope, bits)) * other.value(project(&other.scope, bits)))
            .collect();
        g.factors[i] = Factor {
            role: FactorRole::Rule,
            scope,
            payload: Payload::Table(table),
        };
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prog(text: &str) -> WeightedProgram {
        text.parse().unwrap()
    }

    #[test]
    fn evidence_only_graph() {
        let g = build_factor_graph(&prog(
            "0.5 :: a(o).\n0.8 :: ev_a(o) <- a(o).\n0.2 :: ev_a(o) <- not a(o).\nevidence ev_a(o).\n",
        ))
        .unwrap();
        assert_eq!(g.variables.len(), 2);
        let ev = g.var("ev_a(o)").unwrap();
        assert_eq!(g.variables[ev].observed, Some(true));
        assert_eq!(g.variables[ev].kind, VarKind::Evidence);
        assert!((g.likelihood(ev).unwrap() - 0.8).abs() < 1e-12);
        assert_eq!(g.evidence_links(), vec![(ev, g.var("a(o)").unwrap())]);
        assert!(g.is_acyclic());
    }

    #[test]
    fn or_of_ands() {
        let g = build_factor_graph(&prog("1 :: c(o) <- h(o,p), d(p).\n1 :: c(o) <- h(o,q), d(q).\n")).unwrap();
        let gates = g.factors.iter().filter(|f| f.role == FactorRole::Aggregation).count();
        assert_eq!(gates, 3);
        assert_eq!(g.variables[g.var("c(o)").unwrap()].kind, VarKind::Aux);
    }

    #[test]
    fn single_conjunction_needs_one_gate() {
        let g = build_factor_graph(&prog("1 :: c(o) <- h(o,p), d(p).\n")).unwrap();
        assert_eq!(g.factors.len(), 1);
        assert_eq!(g.factor_arity_max(), 3);
    }

    #[test]
    fn same_scope_constraints_merge() {
        let g = build_factor_graph(&prog("0.99 :: <- a(o), not c(o).\n0.99 :: <- c(o), not a(o).\n")).unwrap();
        assert_eq!(g.factors.len(), 1);
        assert!(g.is_acyclic());
    }

    #[test]
    fn wide_constraint_uses_gate() {
        let body: Vec<String> = (0..=MAX_TABLE_ARITY).map(|i| format!("not a{i}(o)")).collect();
        let g = build_factor_graph(&prog(&format!("0.99 :: <- c(o), {}.\n", body.join(", ")))).unwrap();
        assert!(g.factors.iter().any(|f| f.role == FactorRole::Aggregation));
        assert!(g.factors.iter().filter(|f| matches!(f.payload, Payload::Table(_))).all(|f| f.scope.len() <= MAX_TABLE_ARITY));
    }

    #[test]
    fn overlapping_rules_and_gates_merge_into_one_table() {
        let g = build_factor_graph(&prog(
            "1 :: c(o) <- h(o,p), d(p).\n0.99 :: <- a(o), not c(o).\n0.99 :: <- b(o), not c(o).\n0.99 :: <- c(o), not a(o), not b(o).\n",
        ))
        .unwrap();
        assert_eq!(g.factors.len(), 1);
        assert_eq!(g.factor_arity_max(), 5);
        assert!(g.is_acyclic());
    }

    #[test]
    fn contradictory_body_is_dropped() {
        let g = build_factor_graph(&prog("0.99 :: <- a(o), not a(o).\n")).unwrap();
        assert!(g.factors.is_empty());
    }

    #[test]
    fn gate_values() {
        let f = Factor {
            role: FactorRole::Aggregation,
            scope: vec![0, 1, 2],
            payload: Payload::Gate {
                op: GateOp::Or,
                negated: vec![false, true],
            },
        };
        // y = x0 or not x1
        for bits in 0..8u32 {
            let (x0, x1, y) = (bits & 1 == 1, bits & 2 == 2, bits & 4 == 4);
            assert_eq!(f.value(bits), if y == (x0 || !x1) { 1.0 } else { 0.0 });
        }
    }

    impl FactorGraph {
        fn factor_arity_max(&self) -> usize {
            self.factors.iter().map(|f| f.scope.len()).max().unwrap_or(0)
        }
    }
}
