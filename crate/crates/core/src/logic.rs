//! Formal semantic units exchanged in dialogue and stored in the knowledge base.
//!
//! A [`Prop`] is an antecedent/consequent pair of flat literal conjunctions,
//! optionally under the generic quantifier. Generic whole-part rules use a
//! skolem term `f(x)` as the witness for "the part of x"; grounding replaces
//! that term with concrete part candidates from a scene.
//!
//! Canonical text form (used in transcripts, memory dumps and golden tests):
//!
//! ```text
//! dumpTruck(o)
//! ~dumper(p)
//! G x. dumpTruck(x) => have(x,f1(x)) & dumper(f1(x))
//! ?lambda P. P(o) & |-type(P,truck)
//! ?why_agt. dumpTruck(o)
//! ```

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The binary relation linking a whole to its parts.
pub const HAVE: &str = "have";
/// The supertype of every fine-grained whole type.
pub const TRUCK: &str = "truck";
/// Reserved subtype predicate, resolved structurally against the vocabulary.
pub const SUBTYPE: &str = "|-type";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConceptKind {
    WholeType,
    PartType,
    Relation,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Concept {
    pub id: String,
    pub arity: u8,
    pub kind: ConceptKind,
}

impl Concept {
    pub fn whole(id: impl Into<String>) -> Self {
        Concept {
            id: id.into(),
            arity: 1,
            kind: ConceptKind::WholeType,
        }
    }

    pub fn part(id: impl Into<String>) -> Self {
        Concept {
            id: id.into(),
            arity: 1,
            kind: ConceptKind::PartType,
        }
    }

    pub fn relation(id: impl Into<String>) -> Self {
        Concept {
            id: id.into(),
            arity: 2,
            kind: ConceptKind::Relation,
        }
    }

    pub fn have() -> Self {
        Self::relation(HAVE)
    }

    pub fn is_type(&self) -> bool {
        self.arity == 1 && self.kind != ConceptKind::Relation
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SkolemId(pub u32);

impl fmt::Display for SkolemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f{}", self.0)
    }
}

/// Source of fresh skolem function ids.
#[derive(Debug, Clone, Default)]
pub struct SkolemSupply {
    next: u32,
}

impl SkolemSupply {
    pub fn new() -> Self {
        SkolemSupply { next: 1 }
    }

    pub fn starting_at(next: u32) -> Self {
        SkolemSupply { next: next.max(1) }
    }

    pub fn fresh(&mut self) -> SkolemId {
        if self.next == 0 {
            self.next = 1;
        }
        let id = SkolemId(self.next);
        self.next += 1;
        id
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    Constant(String),
    Variable(String),
    /// Nests one level only: the argument is a constant or a variable.
    Skolem { function: SkolemId, argument: Box<Term> },
}

impl Term {
    pub fn constant(name: impl Into<String>) -> Self {
        Term::Constant(name.into())
    }

    pub fn variable(name: impl Into<String>) -> Self {
        Term::Variable(name.into())
    }

    pub fn skolem(function: SkolemId, argument: Term) -> Self {
        Term::Skolem {
            function,
            argument: Box::new(argument),
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Constant(_) => true,
            Term::Variable(_) => false,
            Term::Skolem { argument, .. } => argument.is_ground(),
        }
    }

    fn collect_variables<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Term::Constant(_) => {}
            Term::Variable(v) => out.push(v),
            Term::Skolem { argument, .. } => argument.collect_variables(out),
        }
    }

    fn validate(&self) -> Result<()> {
        if let Term::Skolem { argument, .. } = self {
            if matches!(**argument, Term::Skolem { .. }) {
                return Err(Error::Structural("nested skolem term".into()));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Constant(c) | Term::Variable(c) => f.write_str(c),
            Term::Skolem { function, argument } => write!(f, "{function}({argument})"),
        }
    }
}

/// Predicate position of a literal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    Concept(String),
    /// Predicate variable bound by a wh-question (the `P` in `?lambda P. P(o)`).
    Variable(String),
    /// `|-type(P, super)`: P is a subtype of `super` in the domain ontology.
    Subtype,
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::Concept(c) | Predicate::Variable(c) => f.write_str(c),
            Predicate::Subtype => f.write_str(SUBTYPE),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal {
    pub predicate: Predicate,
    pub args: Vec<Term>,
    pub negated: bool,
}

impl Literal {
    /// Builds a literal over a registered concept, checking arity.
    pub fn new(concept: &Concept, args: Vec<Term>, negated: bool) -> Result<Self> {
        if args.len() != concept.arity as usize {
            return Err(Error::Structural(format!(
                "concept {} has arity {} but got {} argument(s)",
                concept.id,
                concept.arity,
                args.len()
            )));
        }
        let lit = Literal {
            predicate: Predicate::Concept(concept.id.clone()),
            args,
            negated,
        };
        lit.args.iter().try_for_each(Term::validate)?;
        Ok(lit)
    }

    pub fn concept_id(&self) -> Option<&str> {
        match &self.predicate {
            Predicate::Concept(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_ground(&self) -> bool {
        !matches!(self.predicate, Predicate::Variable(_)) && self.args.iter().all(Term::is_ground)
    }

    fn substitute(&self, map: &dyn Fn(&Term) -> Option<Term>) -> Literal {
        Literal {
            predicate: self.predicate.clone(),
            args: self
                .args
                .iter()
                .map(|t| map(t).unwrap_or_else(|| t.clone()))
                .collect(),
            negated: self.negated,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            f.write_str("~")?;
        }
        write!(f, "{}(", self.predicate)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantifier {
    None,
    /// Generic quantification over the single bound variable.
    Generic,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Prop {
    pub quantifier: Quantifier,
    /// Bound variable for generic props.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<String>,
    pub antecedent: Vec<Literal>,
    pub consequent: Vec<Literal>,
}

impl Prop {
    pub fn is_generic(&self) -> bool {
        self.quantifier == Quantifier::Generic
    }

    pub fn literals(&self) -> impl Iterator<Item = &Literal> {
        self.antecedent.iter().chain(self.consequent.iter())
    }

    pub fn validate(&self) -> Result<()> {
        if self.consequent.is_empty() {
            return Err(Error::Structural("empty consequent".into()));
        }
        match self.quantifier {
            Quantifier::None => {
                if !self.literals().all(Literal::is_ground) {
                    return Err(Error::Structural(format!("unquantified prop is not ground: {self}")));
                }
            }
            Quantifier::Generic => {
                if self.antecedent.is_empty() {
                    return Err(Error::Structural("generic prop needs an antecedent".into()));
                }
                let mut ante_vars = Vec::new();
                let mut cons_vars = Vec::new();
                self.antecedent
                    .iter()
                    .flat_map(|l| &l.args)
                    .for_each(|t| t.collect_variables(&mut ante_vars));
                self.consequent
                    .iter()
                    .flat_map(|l| &l.args)
                    .for_each(|t| t.collect_variables(&mut cons_vars));
                if !ante_vars.iter().any(|v| cons_vars.contains(v)) {
                    return Err(Error::Structural(
                        "generic antecedent shares no variable with consequent".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Renames skolem functions to `f1, f2, ...` in order of first occurrence,
    /// so alpha-equivalent props compare (and print) identically.
    pub fn canonical(&self) -> Prop {
        let mut renaming: BTreeMap<SkolemId, SkolemId> = BTreeMap::new();
        let mut order = Vec::new();
        for lit in self.literals() {
            for t in &lit.args {
                if let Term::Skolem { function, .. } = t {
                    if !order.contains(function) {
                        order.push(*function);
                    }
                }
            }
        }
        for (i, f) in order.into_iter().enumerate() {
            renaming.insert(f, SkolemId(i as u32 + 1));
        }
        self.rename_skolems(&|f| renaming.get(&f).copied().unwrap_or(f))
    }

    pub fn alpha_eq(&self, other: &Prop) -> bool {
        self.canonical() == other.canonical()
    }

    pub fn rename_skolems(&self, rename: &dyn Fn(SkolemId) -> SkolemId) -> Prop {
        let map = |t: &Term| -> Option<Term> {
            match t {
                Term::Skolem { function, argument } => Some(Term::Skolem {
                    function: rename(*function),
                    argument: argument.clone(),
                }),
                _ => None,
            }
        };
        Prop {
            quantifier: self.quantifier,
            bound: self.bound.clone(),
            antecedent: self.antecedent.iter().map(|l| l.substitute(&map)).collect(),
            consequent: self.consequent.iter().map(|l| l.substitute(&map)).collect(),
        }
    }

    pub fn skolems(&self) -> Vec<SkolemId> {
        let mut out = Vec::new();
        for lit in self.literals() {
            for t in &lit.args {
                if let Term::Skolem { function, .. } = t {
                    if !out.contains(function) {
                        out.push(*function);
                    }
                }
            }
        }
        out
    }

    /// For a whole-part generic, the (whole, part) concept ids it relates.
    pub fn whole_part(&self) -> Option<(&str, &str)> {
        if !self.is_generic() || self.antecedent.len() != 1 {
            return None;
        }
        let whole = self.antecedent[0].concept_id()?;
        let part = self
            .consequent
            .iter()
            .find(|l| l.args.len() == 1 && matches!(l.args[0], Term::Skolem { .. }))?
            .concept_id()?;
        Some((whole, part))
    }
}

impl fmt::Display for Prop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_generic() {
            write!(f, "G {}. ", self.bound.as_deref().unwrap_or("x"))?;
        }
        let conj = |f: &mut fmt::Formatter<'_>, lits: &[Literal]| -> fmt::Result {
            for (i, l) in lits.iter().enumerate() {
                if i > 0 {
                    f.write_str(" & ")?;
                }
                write!(f, "{l}")?;
            }
            Ok(())
        };
        if !self.antecedent.is_empty() {
            conj(f, &self.antecedent)?;
            f.write_str(" => ")?;
        }
        conj(f, &self.consequent)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ques {
    /// `?lambda v. body`; `v` occurs free in the body.
    Wh { variable: String, body: Prop },
    /// `?why_dp. body` queries the source of participant `dp`'s belief.
    Why { addressee: String, body: Prop },
}

impl Ques {
    /// "What kind of truck is o?": `?lambda P. P(o) & |-type(P,truck)`.
    pub fn type_question(object: &str) -> Ques {
        let p = "P".to_string();
        Ques::Wh {
            variable: p.clone(),
            body: Prop {
                quantifier: Quantifier::None,
                bound: None,
                antecedent: vec![],
                consequent: vec![
                    Literal {
                        predicate: Predicate::Variable(p.clone()),
                        args: vec![Term::constant(object)],
                        negated: false,
                    },
                    Literal {
                        predicate: Predicate::Subtype,
                        args: vec![Term::variable(p), Term::constant(TRUCK)],
                        negated: false,
                    },
                ],
            },
        }
    }

    pub fn why(addressee: &str, body: Prop) -> Result<Ques> {
        if !body.literals().all(Literal::is_ground) {
            return Err(Error::Structural("why-question body must be ground".into()));
        }
        Ok(Ques::Why {
            addressee: addressee.to_string(),
            body,
        })
    }

    /// Candidate answers for a wh-question: concepts that satisfy the
    /// `|-type` restriction, i.e. every registered whole type when the
    /// supertype is `truck`. Resolution is structural, not inferential.
    pub fn answer_candidates<'a>(&self, vocabulary: impl IntoIterator<Item = &'a Concept>) -> Vec<&'a Concept> {
        let Ques::Wh { body, .. } = self else {
            return Vec::new();
        };
        let restricted = body
            .consequent
            .iter()
            .any(|l| l.predicate == Predicate::Subtype && l.args.get(1) == Some(&Term::constant(TRUCK)));
        let mut out: Vec<&Concept> = vocabulary
            .into_iter()
            .filter(|c| c.arity == 1 && (!restricted || c.kind == ConceptKind::WholeType))
            .collect();
        out.sort_by(|a, b| a.id.cmp(&b.id));
        out
    }
}

impl fmt::Display for Ques {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ques::Wh { variable, body } => write!(f, "?lambda {variable}. {body}"),
            Ques::Why { addressee, body } => write!(f, "?why_{addressee}. {body}"),
        }
    }
}

/// `concept(objects...)` as a ground factual prop.
pub fn make_fact(concept: &Concept, objects: &[&str], negated: bool) -> Result<Prop> {
    let lit = Literal::new(concept, objects.iter().map(|o| Term::constant(*o)).collect(), negated)?;
    Ok(Prop {
        quantifier: Quantifier::None,
        bound: None,
        antecedent: vec![],
        consequent: vec![lit],
    })
}

/// `G x. whole(x) => have(x,f(x)) & part(f(x))` with a fresh skolem `f`.
pub fn make_generic(whole: &Concept, part: &Concept, supply: &mut SkolemSupply) -> Result<Prop> {
    if !whole.is_type() || !part.is_type() {
        return Err(Error::Contract(format!(
            "generic rules relate unary type concepts, got {} and {}",
            whole.id, part.id
        )));
    }
    let x = Term::variable("x");
    let fx = Term::skolem(supply.fresh(), x.clone());
    let prop = Prop {
        quantifier: Quantifier::Generic,
        bound: Some("x".into()),
        antecedent: vec![Literal::new(whole, vec![x.clone()], false)?],
        consequent: vec![
            Literal::new(&Concept::have(), vec![x, fx.clone()], false)?,
            Literal::new(part, vec![fx], false)?,
        ],
    };
    prop.validate()?;
    Ok(prop)
}

/// One ground instance of a generic rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grounding {
    pub antecedent: Vec<Literal>,
    pub consequent: Vec<Literal>,
}

/// Grounds a generic rule for `whole`, substituting each part candidate for
/// the skolem term in turn (existential reading of `f(x)`).
pub fn ground_generic(rule: &Prop, whole: &str, part_candidates: &[&str]) -> Result<Vec<Grounding>> {
    if !rule.is_generic() {
        return Err(Error::Contract(format!("not a generic rule: {rule}")));
    }
    let bound = rule.bound.clone().unwrap_or_else(|| "x".into());
    Ok(part_candidates
        .iter()
        .map(|cand| {
            let map = |t: &Term| -> Option<Term> {
                match t {
                    Term::Variable(v) if *v == bound => Some(Term::constant(whole)),
                    Term::Skolem { .. } => Some(Term::constant(*cand)),
                    _ => None,
                }
            };
            Grounding {
                antecedent: rule.antecedent.iter().map(|l| l.substitute(&map)).collect(),
                consequent: rule.consequent.iter().map(|l| l.substitute(&map)).collect(),
            }
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Text parsing

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        Cursor { src, pos: 0 }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn eat(&mut self, token: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, token: &str) -> Result<()> {
        if self.eat(token) {
            Ok(())
        } else {
            Err(Error::parse(self.pos, format!("expected `{token}`")))
        }
    }

    fn ident(&mut self) -> Result<&'a str> {
        self.skip_ws();
        let rest = self.rest();
        let len = rest
            .char_indices()
            .find(|(_, c)| !(c.is_alphanumeric() || *c == '_' || *c == '-' || *c == '|'))
            .map(|(i, _)| i)
            .unwrap_or(rest.len());
        if len == 0 {
            return Err(Error::parse(self.pos, "expected identifier"));
        }
        self.pos += len;
        Ok(&rest[..len])
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos == self.src.len()
    }
}

fn parse_skolem_id(name: &str) -> Option<SkolemId> {
    name.strip_prefix('f')
        .filter(|d| !d.is_empty() && d.chars().all(|c| c.is_ascii_digit()))
        .and_then(|d| d.parse().ok())
        .map(SkolemId)
}

fn parse_term(cur: &mut Cursor<'_>, variables: &[String]) -> Result<Term> {
    let start = cur.pos;
    let name = cur.ident()?;
    if cur.eat("(") {
        let function = parse_skolem_id(name)
            .ok_or_else(|| Error::parse(start, format!("`{name}` is not a skolem function")))?;
        let arg = parse_term(cur, variables)?;
        cur.expect(")")?;
        let t = Term::skolem(function, arg);
        t.validate()?;
        return Ok(t);
    }
    Ok(if variables.iter().any(|v| v == name) {
        Term::variable(name)
    } else {
        Term::constant(name)
    })
}

fn parse_literal(cur: &mut Cursor<'_>, variables: &[String], pred_vars: &[String]) -> Result<Literal> {
    let negated = cur.eat("~");
    let name = cur.ident()?;
    let predicate = if name == SUBTYPE {
        Predicate::Subtype
    } else if pred_vars.iter().any(|v| v == name) {
        Predicate::Variable(name.to_string())
    } else {
        Predicate::Concept(name.to_string())
    };
    cur.expect("(")?;
    let mut args = vec![parse_term(cur, variables)?];
    while cur.eat(",") {
        args.push(parse_term(cur, variables)?);
    }
    cur.expect(")")?;
    Ok(Literal {
        predicate,
        args,
        negated,
    })
}

fn parse_conj(cur: &mut Cursor<'_>, variables: &[String], pred_vars: &[String]) -> Result<Vec<Literal>> {
    let mut lits = vec![parse_literal(cur, variables, pred_vars)?];
    while cur.eat("&") {
        lits.push(parse_literal(cur, variables, pred_vars)?);
    }
    Ok(lits)
}

fn parse_prop_body(cur: &mut Cursor<'_>, pred_vars: &[String]) -> Result<Prop> {
    let mut bound = None;
    let mut quantifier = Quantifier::None;
    cur.skip_ws();
    if cur.rest().starts_with("G ") {
        cur.pos += 2;
        bound = Some(cur.ident()?.to_string());
        cur.expect(".")?;
        quantifier = Quantifier::Generic;
    }
    // a wh-bound predicate variable may also appear in term position
    let variables: Vec<String> = bound.iter().chain(pred_vars).cloned().collect();
    let first = parse_conj(cur, &variables, pred_vars)?;
    let (antecedent, consequent) = if cur.eat("=>") {
        (first, parse_conj(cur, &variables, pred_vars)?)
    } else {
        (Vec::new(), first)
    };
    Ok(Prop {
        quantifier,
        bound,
        antecedent,
        consequent,
    })
}

impl std::str::FromStr for Prop {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut cur = Cursor::new(s);
        let prop = parse_prop_body(&mut cur, &[])?;
        if !cur.at_end() {
            return Err(Error::parse(cur.pos, "trailing input"));
        }
        prop.validate()?;
        Ok(prop)
    }
}

impl std::str::FromStr for Ques {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut cur = Cursor::new(s);
        let ques = if cur.eat("?lambda") {
            let variable = cur.ident()?.to_string();
            cur.expect(".")?;
            let body = parse_prop_body(&mut cur, std::slice::from_ref(&variable))?;
            Ques::Wh { variable, body }
        } else if cur.eat("?why_") {
            let addressee = cur.ident()?.to_string();
            cur.expect(".")?;
            let body = parse_prop_body(&mut cur, &[])?;
            Ques::why(&addressee, body)?
        } else {
            return Err(Error::parse(cur.pos, "expected `?lambda` or `?why_`"));
        };
        if !cur.at_end() {
            return Err(Error::parse(cur.pos, "trailing input"));
        }
        Ok(ques)
    }
}
