//! Long-term memory: visual exemplar base, symbolic knowledge base, lexicon.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logic::{make_generic, Concept, ConceptKind, Prop, SkolemId, SkolemSupply};

pub type FeatureVec = Vec<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Positive,
    Negative,
}

/// Positive and negative exemplar multisets for one concept.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExemplarSets {
    pub positives: Vec<FeatureVec>,
    pub negatives: Vec<FeatureVec>,
}

impl ExemplarSets {
    pub fn len(&self) -> usize {
        self.positives.len() + self.negatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// The same vector was labelled both ways for one concept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelConflict {
    pub concept: String,
    pub latest: Label,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExemplarBase {
    sets: BTreeMap<String, ExemplarSets>,
    conflicts: Vec<LabelConflict>,
}

impl ExemplarBase {
    pub fn new() -> Self {
        Self::default()
    }

    /// Creates empty sets for `concept` if absent.
    pub fn register(&mut self, concept: &str) {
        self.sets.entry(concept.to_string()).or_default();
    }

    pub fn get(&self, concept: &str) -> Option<&ExemplarSets> {
        self.sets.get(concept)
    }

    pub fn concepts(&self) -> impl Iterator<Item = &str> {
        self.sets.keys().map(String::as_str)
    }

    pub fn conflicts(&self) -> &[LabelConflict] {
        &self.conflicts
    }

    /// Appends `vector` to the positive or negative multiset of `concept`.
    ///
    /// A vector already present under the opposite label is kept; the clash
    /// is recorded and the returned flag is `true`.
    pub fn add_exemplar(&mut self, concept: &str, vector: FeatureVec, label: Label) -> Result<bool> {
        let sets = self
            .sets
            .get_mut(concept)
            .ok_or_else(|| Error::Lookup(format!("concept {concept} has no exemplar sets")))?;
        let opposite = match label {
            Label::Positive => &sets.negatives,
            Label::Negative => &sets.positives,
        };
        let conflict = opposite.contains(&vector);
        match label {
            Label::Positive => sets.positives.push(vector),
            Label::Negative => sets.negatives.push(vector),
        }
        if conflict {
            self.conflicts.push(LabelConflict {
                concept: concept.to_string(),
                latest: label,
            });
        }
        Ok(conflict)
    }

    pub fn counts(&self) -> BTreeMap<String, (usize, usize)> {
        self.sets
            .iter()
            .map(|(k, s)| (k.clone(), (s.positives.len(), s.negatives.len())))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KbEntry {
    pub rule: Prop,
    /// Teaching episode that introduced the rule; diagnostics only.
    pub episode: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeBase {
    entries: Vec<KbEntry>,
    next_skolem: u32,
}

impl KnowledgeBase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[KbEntry] {
        &self.entries
    }

    pub fn rules(&self) -> impl Iterator<Item = &Prop> {
        self.entries.iter().map(|e| &e.rule)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Idempotent insertion: returns `false` when an alpha-equivalent rule
    /// is already stored. New rules get a skolem id fresh within this KB.
    pub fn add_rule(&mut self, prop: &Prop, episode: Option<usize>) -> Result<bool> {
        if !prop.is_generic() {
            return Err(Error::Contract(format!("only generic rules enter the KB: {prop}")));
        }
        prop.validate()?;
        if self.entries.iter().any(|e| e.rule.alpha_eq(prop)) {
            return Ok(false);
        }
        let mut supply = SkolemSupply::starting_at(self.next_skolem.max(1));
        let renaming: BTreeMap<SkolemId, SkolemId> = prop.skolems().into_iter().map(|f| (f, supply.fresh())).collect();
        self.next_skolem = supply.fresh().0;
        let rule = prop.rename_skolems(&|f| renaming[&f]);
        self.entries.push(KbEntry { rule, episode });
        Ok(true)
    }

    /// Convenience for whole-part rules.
    pub fn add_whole_part(&mut self, whole: &str, part: &str, episode: Option<usize>) -> Result<bool> {
        let rule = make_generic(&Concept::whole(whole), &Concept::part(part), &mut SkolemSupply::new())?;
        self.add_rule(&rule, episode)
    }

    /// (whole, part) pairs of all whole-part rules.
    pub fn whole_part_pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().filter_map(|e| e.rule.whole_part())
    }

    pub fn parts_of(&self, whole: &str) -> BTreeSet<String> {
        self.whole_part_pairs()
            .filter(|(w, _)| *w == whole)
            .map(|(_, p)| p.to_string())
            .collect()
    }

    /// Part concepts linked by some rule to any of `wholes`.
    pub fn relevant_parts<'a>(&self, wholes: impl IntoIterator<Item = &'a str>) -> BTreeSet<String> {
        let wholes: BTreeSet<&str> = wholes.into_iter().collect();
        self.whole_part_pairs()
            .filter(|(w, _)| wholes.contains(w))
            .map(|(_, p)| p.to_string())
            .collect()
    }

    /// Splits the parts linked to `a` or `b` into (only a, only b, shared).
    pub fn distinguishing_parts(&self, a: &str, b: &str) -> (BTreeSet<String>, BTreeSet<String>, BTreeSet<String>) {
        let pa = self.parts_of(a);
        let pb = self.parts_of(b);
        let shared = pa.intersection(&pb).cloned().collect();
        let only_a = pa.difference(&pb).cloned().collect();
        let only_b = pb.difference(&pa).cloned().collect();
        (only_a, only_b, shared)
    }
}

/// Singular and plural surface forms of a content word.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WordForms {
    pub singular: String,
    pub plural: String,
}

impl WordForms {
    pub fn new(singular: impl Into<String>, plural: impl Into<String>) -> Self {
        WordForms {
            singular: singular.into(),
            plural: plural.into(),
        }
    }

    /// `"rocket launcher"` -> `"rocketLauncher"`.
    pub fn concept_id(&self) -> String {
        let mut out = String::new();
        for (i, w) in self.singular.split_whitespace().enumerate() {
            let mut cs = w.chars();
            if let Some(c) = cs.next() {
                if i == 0 {
                    out.extend(c.to_lowercase());
                } else {
                    out.extend(c.to_uppercase());
                }
                out.push_str(cs.as_str());
            }
        }
        out
    }
}

/// Word <-> concept map. Canonical entries are bijective; aliases are extra
/// surface forms accepted on input but never produced.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    entries: BTreeMap<String, WordForms>,
    aliases: BTreeMap<String, String>,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, concept: &str, forms: WordForms) -> Result<()> {
        if let Some(existing) = self.lookup(&forms.singular).or_else(|| self.lookup(&forms.plural)) {
            if existing != concept {
                return Err(Error::Structural(format!(
                    "word `{}` already denotes {existing}",
                    forms.singular
                )));
            }
        }
        self.entries.insert(concept.to_string(), forms);
        Ok(())
    }

    pub fn add_alias(&mut self, surface: &str, concept: &str) {
        self.aliases.insert(surface.to_string(), concept.to_string());
    }

    pub fn forms(&self, concept: &str) -> Option<&WordForms> {
        self.entries.get(concept)
    }

    /// Concept denoted by a singular, plural, or alias surface form.
    pub fn lookup(&self, surface: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(_, f)| f.singular == surface || f.plural == surface)
            .map(|(c, _)| c.as_str())
            .or_else(|| self.aliases.get(surface).map(String::as_str))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &WordForms)> {
        self.entries.iter().map(|(c, f)| (c.as_str(), f))
    }

    pub fn aliases(&self) -> impl Iterator<Item = (&str, &str)> {
        self.aliases.iter().map(|(s, c)| (s.as_str(), c.as_str()))
    }
}

/// Everything the learner keeps between episodes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Memory {
    pub concepts: BTreeMap<String, Concept>,
    pub lexicon: Lexicon,
    pub xb: ExemplarBase,
    pub kb: KnowledgeBase,
}

impl Memory {
    pub fn new() -> Self {
        let mut m = Memory::default();
        m.concepts.insert(crate::logic::HAVE.into(), Concept::have());
        m
    }

    pub fn concept(&self, id: &str) -> Option<&Concept> {
        self.concepts.get(id)
    }

    /// Registered fine-grained whole types, sorted by id.
    pub fn whole_types(&self) -> Vec<&Concept> {
        self.concepts.values().filter(|c| c.kind == ConceptKind::WholeType).collect()
    }

    pub fn unary_concepts(&self) -> Vec<&Concept> {
        self.concepts.values().filter(|c| c.arity == 1).collect()
    }

    /// Registers a concept for `forms` unless one of its surface forms is
    /// already known, in which case the existing concept is returned.
    /// The flag reports whether a new concept was created.
    pub fn register_neologism(&mut self, forms: &WordForms, kind: ConceptKind) -> Result<(Concept, bool)> {
        if let Some(id) = self
            .lexicon
            .lookup(&forms.singular)
            .or_else(|| self.lexicon.lookup(&forms.plural))
        {
            let c = self
                .concepts
                .get(id)
                .cloned()
                .ok_or_else(|| Error::Lookup(format!("lexicon entry {id} without concept")))?;
            return Ok((c, false));
        }
        let id = forms.concept_id();
        let concept = match kind {
            ConceptKind::WholeType => Concept::whole(&id),
            ConceptKind::PartType => Concept::part(&id),
            ConceptKind::Relation => Concept::relation(&id),
        };
        if self.concepts.contains_key(&id) {
            return Err(Error::Structural(format!("concept id {id} already taken")));
        }
        self.lexicon.insert(&id, forms.clone())?;
        self.concepts.insert(id.clone(), concept.clone());
        self.xb.register(&id);
        Ok((concept, true))
    }

    /// Memory as a line-oriented text document.
    pub fn dump(&self) -> String {
        let mut out = String::from("xil-memory 1\n");
        for c in self.concepts.values() {
            let kind = match c.kind {
                ConceptKind::WholeType => "whole",
                ConceptKind::PartType => "part",
                ConceptKind::Relation => "relation",
            };
            let _ = writeln!(out, "concept {} {} {}", c.id, kind, c.arity);
        }
        for (c, f) in self.lexicon.entries() {
            let _ = writeln!(out, "word {c} | {} | {}", f.singular, f.plural);
        }
        for (s, c) in self.lexicon.aliases() {
            let _ = writeln!(out, "alias {c} | {s}");
        }
        for (c, sets) in &self.xb.sets {
            let _ = writeln!(out, "exemplars {c}");
            for (tag, vs) in [("pos", &sets.positives), ("neg", &sets.negatives)] {
                for v in vs {
                    let _ = write!(out, "{tag} {c}");
                    for x in v {
                        let _ = write!(out, " {x}");
                    }
                    out.push('\n');
                }
            }
        }
        for e in self.kb.entries() {
            let ep = e.episode.map(|i| i.to_string()).unwrap_or_else(|| "-".into());
            let _ = writeln!(out, "rule {ep} | {}", e.rule);
        }
        out
    }

    pub fn load(text: &str) -> Result<Memory> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, "xil-memory 1")) => {}
            _ => return Err(Error::parse(0, "missing `xil-memory 1` header")),
        }
        let mut m = Memory::default();
        let mut offset = text.lines().next().map(|l| l.len() + 1).unwrap_or(0);
        for (_, line) in lines {
            let at = offset;
            offset += line.len() + 1;
            let bad = |msg: &str| Error::parse(at, format!("{msg}: `{line}`"));
            let (tag, rest) = line.split_once(' ').unwrap_or((line, ""));
            match tag {
                "" => {}
                "concept" => {
                    let f: Vec<&str> = rest.split_whitespace().collect();
                    let [id, kind, arity] = f[..] else {
                        return Err(bad("bad concept line"));
                    };
                    let kind = match kind {
                        "whole" => ConceptKind::WholeType,
                        "part" => ConceptKind::PartType,
                        "relation" => ConceptKind::Relation,
                        _ => return Err(bad("unknown concept kind")),
                    };
                    let arity: u8 = arity.parse().map_err(|_| bad("bad arity"))?;
                    m.concepts.insert(
                        id.to_string(),
                        Concept {
                            id: id.to_string(),
                            arity,
                            kind,
                        },
                    );
                }
                "word" => {
                    let f: Vec<&str> = rest.split(" | ").collect();
                    let [c, sg, pl] = f[..] else {
                        return Err(bad("bad word line"));
                    };
                    m.lexicon.insert(c, WordForms::new(sg, pl))?;
                }
                "alias" => {
                    let (c, s) = rest.split_once(" | ").ok_or_else(|| bad("bad alias line"))?;
                    m.lexicon.add_alias(s, c);
                }
                "exemplars" => m.xb.register(rest.trim()),
                "pos" | "neg" => {
                    let mut f = rest.split_whitespace();
                    let c = f.next().ok_or_else(|| bad("missing concept"))?;
                    let v: Vec<f64> = f
                        .map(|x| x.parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| bad("bad number"))?;
                    let sets = m.xb.sets.get_mut(c).ok_or_else(|| bad("exemplars before header"))?;
                    if tag == "pos" {
                        sets.positives.push(v);
                    } else {
                        sets.negatives.push(v);
                    }
                }
                "rule" => {
                    let (ep, prop) = rest.split_once(" | ").ok_or_else(|| bad("bad rule line"))?;
                    let episode = if ep == "-" {
                        None
                    } else {
                        Some(ep.parse().map_err(|_| bad("bad episode"))?)
                    };
                    let rule: Prop = prop.parse()?;
                    let next = rule.skolems().iter().map(|f| f.0 + 1).max().unwrap_or(1);
                    m.kb.next_skolem = m.kb.next_skolem.max(next);
                    m.kb.entries.push(KbEntry { rule, episode });
                }
                _ => return Err(bad("unknown record")),
            }
        }
        Ok(m)
    }

    pub fn summary(&self) -> MemorySummary {
        MemorySummary {
            exemplar_counts: self.xb.counts(),
            rules: self.kb.rules().map(|r| r.to_string()).collect(),
            concepts: self.concepts.keys().cloned().collect(),
        }
    }
}

/// Compact view for the console.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemorySummary {
    pub exemplar_counts: BTreeMap<String, (usize, usize)>,
    pub rules: Vec<String>,
    pub concepts: Vec<String>,
}
