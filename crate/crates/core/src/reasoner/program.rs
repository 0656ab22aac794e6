//! Probability-weighted normal logic programs and their text form.
//!
//! ```text
//! % visual
//! 0.5 :: dumpTruck(t0).
//! 0.8 :: ev_dumpTruck(t0) <- dumpTruck(t0).
//! 0.2 :: ev_dumpTruck(t0) <- not dumpTruck(t0).
//! evidence ev_dumpTruck(t0).
//! % knowledge
//! 0.99 :: <- dumpTruck(t0), not cons_dumper(t0).
//! 1 :: cons_dumper(t0) <- have(t0,r2), dumper(r2).
//! ```

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A ground atom `pred(arg, ...)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Atom {
    pub pred: String,
    pub args: Vec<String>,
}

impl Atom {
    pub fn new(pred: impl Into<String>, args: &[&str]) -> Self {
        Atom {
            pred: pred.into(),
            args: args.iter().map(|a| a.to_string()).collect(),
        }
    }

    /// Evidence atom `ev_γ(args)` tied to this membership atom.
    pub fn evidence(&self) -> Atom {
        Atom {
            pred: format!("{EVIDENCE_PREFIX}{}", self.pred),
            args: self.args.clone(),
        }
    }

    /// The membership atom an evidence atom reports on.
    pub fn evidence_target(&self) -> Option<Atom> {
        self.pred.strip_prefix(EVIDENCE_PREFIX).map(|p| Atom {
            pred: p.to_string(),
            args: self.args.clone(),
        })
    }
}

pub const EVIDENCE_PREFIX: &str = "ev_";
pub const CONS_PREFIX: &str = "cons_";

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.pred, self.args.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BodyLit {
    pub atom: Atom,
    /// Default negation.
    pub negated: bool,
}

impl BodyLit {
    pub fn pos(atom: Atom) -> Self {
        BodyLit { atom, negated: false }
    }

    pub fn neg(atom: Atom) -> Self {
        BodyLit { atom, negated: true }
    }
}

impl fmt::Display for BodyLit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            f.write_str("not ")?;
        }
        write!(f, "{}", self.atom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    Visual,
    Knowledge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedRule {
    pub weight: f64,
    /// `None` for an integrity constraint.
    pub head: Option<Atom>,
    pub body: Vec<BodyLit>,
    pub partition: Partition,
}

impl WeightedRule {
    pub fn fact(weight: f64, head: Atom, partition: Partition) -> Self {
        WeightedRule {
            weight,
            head: Some(head),
            body: Vec::new(),
            partition,
        }
    }

    pub fn is_constraint(&self) -> bool {
        self.head.is_none()
    }
}

fn fmt_weight(w: f64) -> String {
    // shortest representation that round-trips
    let s = format!("{w}");
    if s.contains('e') {
        format!("{w:e}")
    } else {
        s
    }
}

impl fmt::Display for WeightedRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ::", fmt_weight(self.weight))?;
        if let Some(h) = &self.head {
            write!(f, " {h}")?;
        }
        if !self.body.is_empty() {
            f.write_str(" <- ")?;
            for (i, l) in self.body.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{l}")?;
            }
        }
        f.write_str(".")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WeightedProgram {
    pub rules: Vec<WeightedRule>,
    /// Atoms observed true.
    pub evidence: BTreeSet<Atom>,
}

impl WeightedProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty() && self.evidence.is_empty()
    }

    pub fn extend(&mut self, other: WeightedProgram) {
        self.rules.extend(other.rules);
        self.evidence.extend(other.evidence);
    }

    pub fn partition(&self, p: Partition) -> impl Iterator<Item = &WeightedRule> {
        self.rules.iter().filter(move |r| r.partition == p)
    }

    pub fn validate(&self) -> Result<()> {
        for r in &self.rules {
            if !(0.0..=1.0).contains(&r.weight) || r.weight.is_nan() {
                return Err(Error::Structural(format!("weight out of [0,1]: {r}")));
            }
            if r.head.is_none() && r.body.is_empty() {
                return Err(Error::Structural("constraint with empty body".into()));
            }
        }
        Ok(())
    }

    /// Every atom mentioned anywhere, sorted.
    pub fn atoms(&self) -> BTreeSet<Atom> {
        let mut out: BTreeSet<Atom> = self.evidence.clone();
        for r in &self.rules {
            out.extend(r.head.iter().cloned());
            out.extend(r.body.iter().map(|l| l.atom.clone()));
        }
        out
    }
}

impl fmt::Display for WeightedProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (p, name) in [(Partition::Visual, "visual"), (Partition::Knowledge, "knowledge")] {
            let rules: Vec<_> = self.partition(p).collect();
            let evidence: Vec<_> = if p == Partition::Visual {
                self.evidence.iter().collect()
            } else {
                Vec::new()
            };
            if rules.is_empty() && evidence.is_empty() {
                continue;
            }
            writeln!(f, "% {name}")?;
            for r in rules {
                writeln!(f, "{r}")?;
            }
            for e in evidence {
                writeln!(f, "evidence {e}.")?;
            }
        }
        Ok(())
    }
}

struct Cursor<'a> {
    line: &'a str,
    pos: usize,
    offset: usize,
}

impl<'a> Cursor<'a> {
    fn ws(&mut self) {
        while self.line[self.pos..].starts_with(' ') {
            self.pos += 1;
        }
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.ws();
        if self.line[self.pos..].starts_with(tok) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn err(&self, msg: &str) -> Error {
        Error::parse(self.offset + self.pos, msg)
    }

    fn ident(&mut self) -> Result<&'a str> {
        self.ws();
        let rest = &self.line[self.pos..];
        let n = rest
            .find(|c: char| !(c.is_alphanumeric() || c == '_' || c == '-'))
            .unwrap_or(rest.len());
        if n == 0 {
            return Err(self.err("expected identifier"));
        }
        self.pos += n;
        Ok(&rest[..n])
    }

    fn atom(&mut self) -> Result<Atom> {
        let pred = self.ident()?.to_string();
        if !self.eat("(") {
            return Err(self.err("expected `(`"));
        }
        let mut args = vec![self.ident()?.to_string()];
        while self.eat(",") {
            args.push(self.ident()?.to_string());
        }
        if !self.eat(")") {
            return Err(self.err("expected `)`"));
        }
        Ok(Atom { pred, args })
    }

    fn body_lit(&mut self) -> Result<BodyLit> {
        let negated = self.eat("not ");
        Ok(BodyLit {
            atom: self.atom()?,
            negated,
        })
    }
}

impl std::str::FromStr for Atom {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut cur = Cursor {
            line: text,
            pos: 0,
            offset: 0,
        };
        let a = cur.atom()?;
        if cur.pos != text.len() {
            return Err(cur.err("trailing input after atom"));
        }
        Ok(a)
    }
}

impl std::str::FromStr for WeightedProgram {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut prog = WeightedProgram::new();
        let mut partition = Partition::Visual;
        let mut offset = 0;
        for raw in text.split_inclusive('\n') {
            let line_offset = offset;
            offset += raw.len();
            let line = raw.trim_end();
            let trimmed = line.trim_start();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(comment) = trimmed.strip_prefix('%') {
                match comment.trim() {
                    "visual" => partition = Partition::Visual,
                    "knowledge" => partition = Partition::Knowledge,
                    _ => {}
                }
                continue;
            }
            let mut cur = Cursor {
                line,
                pos: line.len() - trimmed.len(),
                offset: line_offset,
            };
            if cur.eat("evidence ") {
                let a = cur.atom()?;
                if !cur.eat(".") {
                    return Err(cur.err("expected `.`"));
                }
                prog.evidence.insert(a);
            } else {
                cur.ws();
                let start = cur.pos;
                let end = line[start..].find("::").map(|i| start + i).ok_or_else(|| cur.err("expected `w ::`"))?;
                let weight: f64 = line[start..end]
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(line_offset + start, "bad weight"))?;
                cur.pos = end + 2;
                cur.ws();
                let head = if line[cur.pos..].starts_with("<-") {
                    None
                } else {
                    Some(cur.atom()?)
                };
                let mut body = Vec::new();
                if cur.eat("<-") {
                    body.push(cur.body_lit()?);
                    while cur.eat(",") {
                        body.push(cur.body_lit()?);
                    }
                }
                if !cur.eat(".") {
                    return Err(cur.err("expected `.`"));
                }
                prog.rules.push(WeightedRule {
                    weight,
                    head,
                    body,
                    partition,
                });
            }
            cur.ws();
            if cur.pos != line.len() {
                return Err(cur.err("trailing input"));
            }
        }
        prog.validate()?;
        Ok(prog)
    }
}
