//! Controlled-language dialogue: moves, grammar, the episode state machine,
//! the simulated teacher, and transcripts.

mod grammar;
mod machine;
mod teacher;
mod transcript;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use grammar::{generate, parse, template_corpus, Morphology, Neologism, Parsed};
pub use machine::{advance, DialogueState, Phase, Strategy};
pub use teacher::Teacher;
pub use teacher::PROBE_TAG;
pub use transcript::{read_jsonl, replay, write_jsonl, ReplayReport, TranscriptRecord};

use crate::error::{Error, Result};
use crate::worldsim::RegionRef;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Connective {
    And,
    While,
}

impl Connective {
    pub fn as_str(self) -> &'static str {
        match self {
            Connective::And => "and",
            Connective::While => "while",
        }
    }
}

/// Semantic content of an utterance. Deictic arguments are tags (the `o`
/// in `this_o`) bound to region references carried next to the move.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Move {
    Probe {
        object: String,
    },
    Answer {
        concept: String,
        object: String,
    },
    Correction {
        wrong: String,
        truth: String,
        object: String,
    },
    WhyQ {
        concept: String,
        object: String,
    },
    Explain {
        part: String,
        region: String,
    },
    CannotExplain,
    PartNegation {
        part: String,
        region: String,
    },
    /// "It's true that this_p is a P. But Ws have Ps, too."
    PartAck {
        part: String,
        region: String,
        other: String,
    },
    /// One (whole, part) pair per clause; `connectives[i]` joins clause i
    /// and i + 1.
    GenericTeach {
        pairs: Vec<(String, String)>,
        connectives: Vec<Connective>,
    },
}

impl Move {
    /// Deictic tags the move refers to.
    pub fn tags(&self) -> Vec<&str> {
        match self {
            Move::Probe { object }
            | Move::Answer { object, .. }
            | Move::Correction { object, .. }
            | Move::WhyQ { object, .. } => vec![object],
            Move::Explain { region, .. } | Move::PartNegation { region, .. } | Move::PartAck { region, .. } => {
                vec![region]
            }
            Move::CannotExplain | Move::GenericTeach { .. } => vec![],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Move::Probe { .. } => "probe",
            Move::Answer { .. } => "answer",
            Move::Correction { .. } => "correction",
            Move::WhyQ { .. } => "why_q",
            Move::Explain { .. } => "explain",
            Move::CannotExplain => "cannot_explain",
            Move::PartNegation { .. } => "part_negation",
            Move::PartAck { .. } => "part_ack",
            Move::GenericTeach { .. } => "generic_teach",
        }
    }

    /// Generic teaching joining `pairs` with "and" inside each group and
    /// "while" between the first group and the rest.
    pub fn generic(first: Vec<(String, String)>, second: Vec<(String, String)>) -> Move {
        let mut connectives = Vec::new();
        for i in 1..first.len() + second.len() {
            connectives.push(if i == first.len() { Connective::While } else { Connective::And });
        }
        let mut pairs = first;
        pairs.extend(second);
        Move::GenericTeach { pairs, connectives }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    Teacher,
    Learner,
}

/// A move with its surface text and out-of-band region references.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub speaker: Speaker,
    pub surface: String,
    #[serde(rename = "move")]
    pub mv: Move,
    pub refs: BTreeMap<String, RegionRef>,
}

impl Utterance {
    pub fn new(speaker: Speaker, mv: Move, refs: BTreeMap<String, RegionRef>, lexicon: &crate::memory::Lexicon) -> Result<Self> {
        let u = Utterance {
            speaker,
            surface: generate(&mv, lexicon)?,
            mv,
            refs,
        };
        u.check_refs()?;
        Ok(u)
    }

    /// Every deictic tag has exactly one reference, and nothing else does.
    pub fn check_refs(&self) -> Result<()> {
        let mut tags = self.mv.tags();
        tags.sort_unstable();
        tags.dedup();
        let keys: Vec<&str> = self.refs.keys().map(String::as_str).collect();
        if tags != keys {
            return Err(Error::Conformance(format!(
                "{} move refers to {:?} but carries refs for {:?}",
                self.mv.name(),
                tags,
                keys
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generic_connectives() {
        let p = |a: &str, b: &str| (a.to_string(), b.to_string());
        match Move::generic(vec![p("a", "x")], vec![p("b", "y"), p("b", "z")]) {
            Move::GenericTeach { pairs, connectives } => {
                assert_eq!(pairs.len(), 3);
                assert_eq!(connectives, vec![Connective::While, Connective::And]);
            }
            _ => unreachable!(),
        }
        match Move::generic(vec![], vec![p("b", "y")]) {
            Move::GenericTeach { connectives, .. } => assert!(connectives.is_empty()),
            _ => unreachable!(),
        }
    }

    #[test]
    fn move_json_shape() {
        let m = Move::Answer {
            concept: "dumpTruck".into(),
            object: "o".into(),
        };
        let j = serde_json::to_string(&m).unwrap();
        assert_eq!(j, r#"{"kind":"answer","concept":"dumpTruck","object":"o"}"#);
        assert_eq!(serde_json::from_str::<Move>(&j).unwrap(), m);
    }
}
