//! Scene graph and knowledge base to weighted program.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::logic::{ground_generic, Literal, Predicate, Term};
use crate::memory::KnowledgeBase;
use crate::perception::SceneGraph;

use super::program::{Atom, BodyLit, Partition, WeightedProgram, WeightedRule, CONS_PREFIX};

/// Constraint weights for knowledge-base entries.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Penalties {
    /// Deductive violation weight U_d.
    pub deductive: f64,
    /// Abductive violation weight U_a.
    pub abductive: f64,
}

impl Default for Penalties {
    fn default() -> Self {
        Penalties {
            deductive: 0.99,
            abductive: 0.99,
        }
    }
}

fn evidence_fragment(prog: &mut WeightedProgram, atom: Atom, p: f64) {
    let ev = atom.evidence();
    prog.rules.push(WeightedRule::fact(0.5, atom.clone(), Partition::Visual));
    prog.rules.push(WeightedRule {
        weight: p,
        head: Some(ev.clone()),
        body: vec![BodyLit::pos(atom.clone())],
        partition: Partition::Visual,
    });
    prog.rules.push(WeightedRule {
        weight: 1.0 - p,
        head: Some(ev.clone()),
        body: vec![BodyLit::neg(atom)],
        partition: Partition::Visual,
    });
    prog.evidence.insert(ev);
}

/// Pi_V: three rules per (concept, vertex) and (relation, edge) belief.
pub fn compile_visual(sg: &SceneGraph) -> Result<WeightedProgram> {
    let mut prog = WeightedProgram::new();
    let check = |p: f64, what: &dyn Fn() -> String| {
        if (0.0..=1.0).contains(&p) {
            Ok(())
        } else {
            Err(Error::Structural(format!("belief {p} for {} is outside [0,1]", what())))
        }
    };
    for v in &sg.vertices {
        for (c, &p) in &v.beliefs {
            let atom = Atom::new(c.as_str(), &[&v.id]);
            check(p, &|| atom.to_string())?;
            evidence_fragment(&mut prog, atom, p);
        }
    }
    for e in &sg.edges {
        for (c, &p) in &e.beliefs {
            let atom = Atom::new(c.as_str(), &[&sg.vertices[e.from].id, &sg.vertices[e.to].id]);
            check(p, &|| atom.to_string())?;
            evidence_fragment(&mut prog, atom, p);
        }
    }
    Ok(prog)
}

fn ground_atom(l: &Literal) -> Result<BodyLit> {
    let pred = match &l.predicate {
        Predicate::Concept(c) => c.clone(),
        other => return Err(Error::Structural(format!("cannot compile predicate {other}"))),
    };
    let args = l
        .args
        .iter()
        .map(|t| match t {
            Term::Constant(c) => Ok(c.clone()),
            other => Err(Error::Structural(format!("non-ground term {other} after grounding"))),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BodyLit {
        atom: Atom { pred, args },
        negated: l.negated,
    })
}

fn bind(l: &Literal, object: &str) -> Literal {
    Literal {
        args: l
            .args
            .iter()
            .map(|t| match t {
                Term::Variable(_) => Term::constant(object),
                t => t.clone(),
            })
            .collect(),
        ..l.clone()
    }
}

/// Name of the aggregate for a consequent shape: the non-`have` concepts.
fn cons_name(consequent: &[Literal]) -> String {
    let preds: Vec<String> = consequent
        .iter()
        .filter_map(|l| l.concept_id())
        .filter(|c| *c != crate::logic::HAVE)
        .map(|c| if c.is_empty() { "_".into() } else { c.to_string() })
        .collect();
    format!("{CONS_PREFIX}{}", preds.join("_"))
}

/// Pi_K: deductive and abductive constraints for every KB entry, grounded
/// on the target object with the part proposals found for the entry's part.
pub fn compile_kb(kb: &KnowledgeBase, sg: &SceneGraph, penalties: Penalties) -> Result<WeightedProgram> {
    let mut prog = WeightedProgram::new();
    if kb.is_empty() {
        return Ok(prog);
    }
    let o = sg.target().id.clone();
    // cons atom -> (has candidates, antecedents of the entries sharing it)
    let mut classes: BTreeMap<Atom, (bool, Vec<Vec<BodyLit>>)> = BTreeMap::new();
    for rule in kb.rules() {
        let candidates: Vec<&str> = match rule.whole_part() {
            Some((_, part)) => sg.candidates_for(part).map(|v| v.id.as_str()).collect(),
            None => sg.proposals().map(|v| v.id.as_str()).collect(),
        };
        let cons = Atom::new(cons_name(&rule.consequent), &[&o]);
        let ante: Vec<BodyLit> = rule
            .antecedent
            .iter()
            .map(|l| ground_atom(&bind(l, &o)))
            .collect::<Result<_>>()?;
        let groundings = ground_generic(rule, &o, &candidates)?;
        let entry = classes.entry(cons.clone()).or_insert((false, Vec::new()));
        if groundings.is_empty() {
            prog.rules.push(WeightedRule {
                weight: penalties.deductive,
                head: None,
                body: ante.clone(),
                partition: Partition::Knowledge,
            });
            entry.1.push(ante);
            continue;
        }
        if !entry.0 {
            for g in &groundings {
                prog.rules.push(WeightedRule {
                    weight: 1.0,
                    head: Some(cons.clone()),
                    body: g.consequent.iter().map(ground_atom).collect::<Result<_>>()?,
                    partition: Partition::Knowledge,
                });
            }
            entry.0 = true;
        }
        let mut body = ante.clone();
        body.push(BodyLit::neg(cons.clone()));
        prog.rules.push(WeightedRule {
            weight: penalties.deductive,
            head: None,
            body,
            partition: Partition::Knowledge,
        });
        entry.1.push(ante);
    }
    let mut aux = 0;
    for (cons, (grounded, antes)) in classes {
        if !grounded {
            continue;
        }
        let mut body = vec![BodyLit::pos(cons.clone())];
        for ante in antes {
            if let [single] = ante.as_slice() {
                body.push(BodyLit {
                    atom: single.atom.clone(),
                    negated: !single.negated,
                });
            } else {
                let a = Atom::new(format!("ante{aux}"), &[&o]);
                aux += 1;
                prog.rules.push(WeightedRule {
                    weight: 1.0,
                    head: Some(a.clone()),
                    body: ante,
                    partition: Partition::Knowledge,
                });
                body.push(BodyLit::neg(a));
            }
        }
        body.dedup();
        prog.rules.push(WeightedRule {
            weight: penalties.abductive,
            head: None,
            body,
            partition: Partition::Knowledge,
        });
    }
    Ok(prog)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::Vertex;
    use crate::worldsim::RegionRef;

    fn vertex(id: &str, beliefs: &[(&str, f64)], searched: &[&str]) -> Vertex {
        Vertex {
            id: id.into(),
            region: RegionRef::exact(id),
            beliefs: beliefs.iter().map(|(c, p)| (c.to_string(), *p)).collect(),
            searched_for: searched.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn three_rule_fragment() {
        let sg = SceneGraph {
            vertices: vec![vertex("o", &[("dumpTruck", 0.8)], &[])],
            edges: vec![],
            target: 0,
        };
        let p = compile_visual(&sg).unwrap();
        let text = p.to_string();
        assert_eq!(
            text,
            "% visual\n0.5 :: dumpTruck(o).\n0.8 :: ev_dumpTruck(o) <- dumpTruck(o).\n\
             0.19999999999999996 :: ev_dumpTruck(o) <- not dumpTruck(o).\nevidence ev_dumpTruck(o).\n"
        );
        let w: Vec<f64> = p.rules.iter().map(|r| r.weight).collect();
        assert_eq!(w[0], 0.5);
        assert_eq!(w[1], 0.8);
        assert!((w[2] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn rule_count() {
        let b = [("a", 0.1), ("b", 0.5), ("c", 0.9)];
        let sg = SceneGraph {
            vertices: vec![vertex("o", &b, &[]), vertex("p", &b, &[])],
            edges: vec![],
            target: 0,
        };
        assert_eq!(compile_visual(&sg).unwrap().rules.len(), 18);
    }

    fn sg_with(parts: &[(&str, &[&str])]) -> SceneGraph {
        let mut vertices = vec![vertex("o", &[], &[])];
        for (id, searched) in parts {
            vertices.push(vertex(id, &[], searched));
        }
        SceneGraph {
            vertices,
            edges: vec![],
            target: 0,
        }
    }

    #[test]
    fn single_entry_constraints() {
        let mut kb = KnowledgeBase::new();
        kb.add_whole_part("dumpTruck", "dumper", None).unwrap();
        let p = compile_kb(&kb, &sg_with(&[("p", &["dumper"])]), Penalties::default()).unwrap();
        assert_eq!(
            p.to_string(),
            "% knowledge\n1 :: cons_dumper(o) <- have(o,p), dumper(p).\n\
             0.99 :: <- dumpTruck(o), not cons_dumper(o).\n\
             0.99 :: <- cons_dumper(o), not dumpTruck(o).\n"
        );
    }

    #[test]
    fn empty_kb_is_empty_program() {
        let p = compile_kb(&KnowledgeBase::new(), &sg_with(&[]), Penalties::default()).unwrap();
        assert!(p.is_empty());
    }

    #[test]
    fn shared_consequent_single_abductive() {
        let mut kb = KnowledgeBase::new();
        kb.add_whole_part("dumpTruck", "dumper", None).unwrap();
        kb.add_whole_part("containerTruck", "dumper", None).unwrap();
        let p = compile_kb(&kb, &sg_with(&[("p", &["dumper"]), ("q", &["dumper"])]), Penalties::default()).unwrap();
        let abductive: Vec<_> = p
            .rules
            .iter()
            .filter(|r| r.is_constraint() && r.body[0].atom.pred == "cons_dumper")
            .collect();
        assert_eq!(abductive.len(), 1);
        assert_eq!(
            abductive[0].to_string(),
            "0.99 :: <- cons_dumper(o), not dumpTruck(o), not containerTruck(o)."
        );
        // OR over two candidates, defined once
        assert_eq!(p.rules.iter().filter(|r| r.head.is_some()).count(), 2);
        assert_eq!(p.rules.iter().filter(|r| r.is_constraint()).count(), 3);
    }

    #[test]
    fn no_candidates() {
        let mut kb = KnowledgeBase::new();
        kb.add_whole_part("fireTruck", "ladder", None).unwrap();
        let p = compile_kb(&kb, &sg_with(&[("p", &["dumper"])]), Penalties::default()).unwrap();
        assert_eq!(p.to_string(), "% knowledge\n0.99 :: <- fireTruck(o).\n");
    }
}
