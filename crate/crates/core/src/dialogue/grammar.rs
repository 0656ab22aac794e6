//! Parser and generator for the controlled teaching language.
//!
//! ```text
//! Utterance   := Probe | Answer | Correction | WhyQ | CannotExpl | Explain
//!              | PartNeg | PartAck | Generic
//! Probe       := "What kind of truck is " Deictic "?"
//! Answer      := Deictic " is a " NounSg "."
//! Correction  := Deictic " is not a " NounSg ". " Deictic " is a " NounSg "."
//! WhyQ        := "Why did you think " Deictic " is a " NounSg "?"
//! CannotExpl  := "I cannot explain."
//! Explain     := "Because I thought " Deictic " is a " NounSg "."
//! PartNeg     := Deictic " is not a " NounSg "."
//! PartAck     := "It's true that " Deictic " is a " NounSg ". But "
//!                NounPl " have " NounPl ", too."
//! Generic     := GenClause ((" and " | " while ") GenClause)* "."
//! GenClause   := NounPl " have " NounPl
//! Deictic     := "this_" Ident
//! ```
//!
//! The first letter of each sentence is capitalised on output and matched
//! case-insensitively on input.

use crate::error::{Error, Result};
use crate::logic::ConceptKind;
use crate::memory::{Lexicon, WordForms};
use crate::worldsim::DomainConfig;

use super::{Connective, Move};

/// Singular/plural table consulted for words missing from the lexicon.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Morphology {
    forms: Vec<WordForms>,
}

impl Morphology {
    pub fn new(forms: impl IntoIterator<Item = WordForms>) -> Self {
        Morphology {
            forms: forms.into_iter().collect(),
        }
    }

    /// Forms of a word given in the singular.
    pub fn from_singular(&self, sg: &str) -> WordForms {
        self.forms
            .iter()
            .find(|f| f.singular == sg)
            .cloned()
            .unwrap_or_else(|| WordForms::new(sg, pluralize(sg)))
    }

    /// Forms of a word given in the plural.
    pub fn from_plural(&self, pl: &str) -> WordForms {
        self.forms
            .iter()
            .find(|f| f.plural == pl)
            .cloned()
            .unwrap_or_else(|| WordForms::new(singularize(pl), pl))
    }
}

fn sibilant(w: &str) -> bool {
    ["s", "x", "z", "ch", "sh"].iter().any(|e| w.ends_with(e))
}

fn consonant_y(w: &str) -> bool {
    let b = w.as_bytes();
    b.len() >= 2 && b[b.len() - 1] == b'y' && !b"aeiou".contains(&b[b.len() - 2])
}

/// Regular English plural.
fn pluralize(sg: &str) -> String {
    if sibilant(sg) {
        format!("{sg}es")
    } else if consonant_y(sg) {
        format!("{}ies", &sg[..sg.len() - 1])
    } else {
        format!("{sg}s")
    }
}

/// Inverse of [`pluralize`] where it is unambiguous.
fn singularize(pl: &str) -> String {
    if let Some(stem) = pl.strip_suffix("ies") {
        if !stem.is_empty() {
            return format!("{stem}y");
        }
    }
    if let Some(stem) = pl.strip_suffix("es") {
        // "buses" is rarer than "horses", so a lone -s stem keeps its e
        if ["ss", "x", "z", "ch", "sh"].iter().any(|e| stem.ends_with(e)) {
            return stem.to_string();
        }
    }
    pl.strip_suffix('s').unwrap_or(pl).to_string()
}

/// A content word that the lexicon did not know.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neologism {
    pub forms: WordForms,
    pub kind: ConceptKind,
}

impl Neologism {
    pub fn concept_id(&self) -> String {
        self.forms.concept_id()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub mv: Move,
    pub neologisms: Vec<Neologism>,
}

#[derive(Clone, Copy, PartialEq)]
enum Number {
    Sg,
    Pl,
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    lexicon: &'a Lexicon,
    morphology: &'a Morphology,
    neologisms: Vec<Neologism>,
}

impl<'a> Parser<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.pos, msg)
    }

    /// Matches a literal; the first character may differ in case when the
    /// literal starts a sentence.
    fn lit(&mut self, s: &str) -> Result<()> {
        if self.try_lit(s) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{s}`")))
        }
    }

    fn try_lit(&mut self, s: &str) -> bool {
        let rest = self.rest();
        let ok = rest.starts_with(s) || {
            let mut a = rest.chars();
            let mut b = s.chars();
            match (a.next(), b.next()) {
                (Some(x), Some(y)) => {
                    x.eq_ignore_ascii_case(&y) && rest.len() >= s.len() && rest[x.len_utf8()..].starts_with(b.as_str())
                }
                _ => false,
            }
        };
        if ok {
            self.pos += s.len();
        }
        ok
    }

    fn deictic(&mut self) -> Result<String> {
        self.lit("this_")?;
        let rest = self.rest();
        let n = rest.find(|c: char| !c.is_ascii_alphanumeric()).unwrap_or(rest.len());
        if n == 0 {
            return Err(self.err("expected a deictic tag"));
        }
        self.pos += n;
        Ok(rest[..n].to_string())
    }

    /// Noun phrase up to the next occurrence of one of `stops`.
    fn noun(&mut self, number: Number, kind: ConceptKind, stops: &[&str]) -> Result<String> {
        let rest = self.rest();
        let end = stops
            .iter()
            .filter_map(|s| rest.find(s))
            .min()
            .ok_or_else(|| self.err(format!("expected one of {stops:?}")))?;
        let phrase = &rest[..end];
        let valid = !phrase.is_empty()
            && !phrase.starts_with(' ')
            && !phrase.ends_with(' ')
            && !phrase.contains("  ")
            && phrase.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == ' ' || c == '-');
        if !valid {
            return Err(self.err(format!("`{phrase}` is not a noun phrase")));
        }
        let start = self.pos;
        self.pos += end;
        if let Some(c) = self.lexicon.lookup(phrase) {
            if let Some(f) = self.lexicon.forms(c) {
                let (wrong, got) = match number {
                    Number::Sg => (&f.plural, "plural"),
                    Number::Pl => (&f.singular, "singular"),
                };
                if wrong == phrase && f.singular != f.plural {
                    return Err(Error::parse(start, format!("`{phrase}` is {got} here")));
                }
            }
            return Ok(c.to_string());
        }
        let forms = match number {
            Number::Sg => self.morphology.from_singular(phrase),
            Number::Pl => self.morphology.from_plural(phrase),
        };
        let neo = Neologism { forms, kind };
        let id = neo.concept_id();
        if let Some(prev) = self.neologisms.iter().find(|n| n.concept_id() == id) {
            if prev.forms != neo.forms || prev.kind != neo.kind {
                return Err(Error::parse(start, format!("inconsistent use of new word `{phrase}`")));
            }
        } else {
            self.neologisms.push(neo);
        }
        Ok(id)
    }

    fn end(&self) -> Result<()> {
        if self.pos == self.src.len() {
            Ok(())
        } else {
            Err(self.err("trailing input"))
        }
    }

    fn utterance(&mut self) -> Result<Move> {
        use ConceptKind::{PartType as Part, WholeType as Whole};
        if self.try_lit("I cannot explain.") {
            return Ok(Move::CannotExplain);
        }
        if self.try_lit("What kind of truck is ") {
            let object = self.deictic()?;
            self.lit("?")?;
            return Ok(Move::Probe { object });
        }
        if self.try_lit("Why did you think ") {
            let object = self.deictic()?;
            self.lit(" is a ")?;
            let concept = self.noun(Number::Sg, Whole, &["?"])?;
            self.lit("?")?;
            return Ok(Move::WhyQ { concept, object });
        }
        if self.try_lit("Because I thought ") {
            let region = self.deictic()?;
            self.lit(" is a ")?;
            let part = self.noun(Number::Sg, Part, &["."])?;
            self.lit(".")?;
            return Ok(Move::Explain { part, region });
        }
        if self.try_lit("It's true that ") {
            let region = self.deictic()?;
            self.lit(" is a ")?;
            let part = self.noun(Number::Sg, Part, &[". But "])?;
            self.lit(". But ")?;
            let other = self.noun(Number::Pl, Whole, &[" have "])?;
            self.lit(" have ")?;
            let start = self.pos;
            let again = self.noun(Number::Pl, Part, &[", too."])?;
            if again != part {
                return Err(Error::parse(start, "acknowledged part must be repeated"));
            }
            self.lit(", too.")?;
            return Ok(Move::PartAck { part, region, other });
        }
        if self.rest().len() >= 5 && self.rest()[..5].eq_ignore_ascii_case("this_") {
            let object = self.deictic()?;
            if self.try_lit(" is a ") {
                let concept = self.noun(Number::Sg, Whole, &["."])?;
                self.lit(".")?;
                return Ok(Move::Answer { concept, object });
            }
            self.lit(" is not a ")?;
            // kind is decided by whether a second sentence follows
            let save = (self.pos, self.neologisms.len());
            let wrong = self.noun(Number::Sg, Whole, &["."])?;
            self.lit(".")?;
            if self.pos == self.src.len() {
                self.pos = save.0;
                self.neologisms.truncate(save.1);
                let part = self.noun(Number::Sg, Part, &["."])?;
                self.lit(".")?;
                return Ok(Move::PartNegation { part, region: object });
            }
            self.lit(" ")?;
            let again = self.deictic()?;
            if again != object {
                return Err(self.err("correction must refer to the same object"));
            }
            self.lit(" is a ")?;
            let truth = self.noun(Number::Sg, Whole, &["."])?;
            self.lit(".")?;
            return Ok(Move::Correction { wrong, truth, object });
        }
        let mut pairs = Vec::new();
        let mut connectives = Vec::new();
        loop {
            let first = pairs.is_empty();
            let whole = self.noun(Number::Pl, Whole, &[" have "]).map_err(|e| {
                if first && self.pos == 0 {
                    self.err("not a sentence of the teaching language")
                } else {
                    e
                }
            })?;
            self.lit(" have ")?;
            let part = self.noun(Number::Pl, Part, &[" and ", " while ", "."])?;
            pairs.push((whole, part));
            if self.try_lit(" and ") {
                connectives.push(Connective::And);
            } else if self.try_lit(" while ") {
                connectives.push(Connective::While);
            } else {
                self.lit(".")?;
                break;
            }
        }
        Ok(Move::GenericTeach { pairs, connectives })
    }
}

/// Parses one utterance. Words the lexicon does not know are returned as
/// neologisms (with the concept id used for them in the move) instead of
/// failing; their kind comes from grammatical position.
pub fn parse(text: &str, lexicon: &Lexicon, morphology: &Morphology) -> Result<Parsed> {
    // sentence-initial capital; literals already match it case-insensitively
    let mut src = text.to_string();
    if let Some(first) = src.get_mut(0..1) {
        first.make_ascii_lowercase();
    }
    let mut p = Parser {
        src: &src,
        pos: 0,
        lexicon,
        morphology,
        neologisms: Vec::new(),
    };
    let mv = p.utterance()?;
    p.end()?;
    Ok(Parsed {
        mv,
        neologisms: p.neologisms,
    })
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Template realisation of a move.
pub fn generate(mv: &Move, lexicon: &Lexicon) -> Result<String> {
    let forms = |c: &str| {
        lexicon
            .forms(c)
            .ok_or_else(|| Error::Generation(format!("no word for concept `{c}`")))
    };
    let sg = |c: &str| forms(c).map(|f| f.singular.clone());
    let pl = |c: &str| forms(c).map(|f| f.plural.clone());
    Ok(match mv {
        Move::Probe { object } => format!("What kind of truck is this_{object}?"),
        Move::Answer { concept, object } => format!("This_{object} is a {}.", sg(concept)?),
        Move::Correction { wrong, truth, object } => {
            format!("This_{object} is not a {}. This_{object} is a {}.", sg(wrong)?, sg(truth)?)
        }
        Move::WhyQ { concept, object } => format!("Why did you think this_{object} is a {}?", sg(concept)?),
        Move::Explain { part, region } => format!("Because I thought this_{region} is a {}.", sg(part)?),
        Move::CannotExplain => "I cannot explain.".to_string(),
        Move::PartNegation { part, region } => format!("This_{region} is not a {}.", sg(part)?),
        Move::PartAck { part, region, other } => format!(
            "It's true that this_{region} is a {}. But {} have {}, too.",
            sg(part)?,
            pl(other)?,
            pl(part)?
        ),
        Move::GenericTeach { pairs, connectives } => {
            if pairs.is_empty() || connectives.len() + 1 != pairs.len() {
                return Err(Error::Generation("malformed generic teaching".into()));
            }
            let mut out = String::new();
            for (i, (w, p)) in pairs.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                    out.push_str(connectives[i - 1].as_str());
                    out.push(' ');
                }
                out.push_str(&format!("{} have {}", pl(w)?, pl(p)?));
            }
            out.push('.');
            capitalize(&out)
        }
    })
}

/// Every move shape instantiated with the domain's vocabulary and a few
/// deictic tags, for round-trip checks.
pub fn template_corpus(cfg: &DomainConfig) -> Vec<Move> {
    let wholes: Vec<String> = cfg.types.iter().map(|t| t.id.clone()).collect();
    let parts: Vec<String> = cfg.taught_parts();
    let mut out = vec![Move::CannotExplain];
    for tag in ["o", "p", "p1", "r3"] {
        out.push(Move::Probe { object: tag.into() });
        for w in &wholes {
            out.push(Move::Answer {
                concept: w.clone(),
                object: tag.into(),
            });
            out.push(Move::WhyQ {
                concept: w.clone(),
                object: tag.into(),
            });
            for t in &wholes {
                out.push(Move::Correction {
                    wrong: w.clone(),
                    truth: t.clone(),
                    object: tag.into(),
                });
            }
        }
        for p in &parts {
            out.push(Move::Explain {
                part: p.clone(),
                region: tag.into(),
            });
            out.push(Move::PartNegation {
                part: p.clone(),
                region: tag.into(),
            });
            for w in &wholes {
                out.push(Move::PartAck {
                    part: p.clone(),
                    region: tag.into(),
                    other: w.clone(),
                });
            }
        }
    }
    for w in &wholes {
        for p in &parts {
            for (w2, p2) in wholes.iter().zip(parts.iter().cycle()) {
                for c in [Connective::And, Connective::While] {
                    out.push(Move::GenericTeach {
                        pairs: vec![(w.clone(), p.clone()), (w2.clone(), p2.clone())],
                        connectives: vec![c],
                    });
                }
            }
            out.push(Move::GenericTeach {
                pairs: vec![(w.clone(), p.clone())],
                connectives: vec![],
            });
        }
    }
    out
}
