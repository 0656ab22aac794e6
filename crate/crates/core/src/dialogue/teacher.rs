//! Simulated teacher that follows the flowchart with ground-truth access.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::memory::{KnowledgeBase, Lexicon};
use crate::worldsim::{ground_truth, DomainConfig, RegionRef, TrueScene, TRUCK_ID};

use super::{DialogueState, Move, Phase, Speaker, Strategy, Utterance};

/// Deictic tag the teacher uses for the probed truck.
pub const PROBE_TAG: &str = "o";

#[derive(Debug, Clone)]
pub struct Teacher {
    config: DomainConfig,
    ontology: KnowledgeBase,
    lexicon: Lexicon,
}

impl Teacher {
    pub fn new(config: DomainConfig) -> Result<Self> {
        config.validate()?;
        let mut lexicon = Lexicon::new();
        for (c, f) in &config.words {
            lexicon.insert(c, f.clone())?;
        }
        for (a, c) in &config.aliases {
            lexicon.add_alias(a, c);
        }
        Ok(Teacher {
            ontology: config.ontology_kb(),
            config,
            lexicon,
        })
    }

    pub fn config(&self) -> &DomainConfig {
        &self.config
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn ontology(&self) -> &KnowledgeBase {
        &self.ontology
    }

    fn say(&self, mv: Move, refs: BTreeMap<String, RegionRef>) -> Result<Utterance> {
        Utterance::new(Speaker::Teacher, mv, refs, &self.lexicon)
    }

    fn probe_refs() -> BTreeMap<String, RegionRef> {
        [(PROBE_TAG.to_string(), RegionRef::exact(TRUCK_ID))].into()
    }

    pub fn probe(&self) -> Result<Utterance> {
        self.say(
            Move::Probe {
                object: PROBE_TAG.into(),
            },
            Self::probe_refs(),
        )
    }

    /// Rules telling the answered type from the true one: first the
    /// answered type's own parts, then the true type's.
    pub fn distinguishing(&self, answered: &str, truth: &str) -> Move {
        let (only_a, only_t, _) = self.ontology.distinguishing_parts(answered, truth);
        let pairs = |w: &str, ps: std::collections::BTreeSet<String>| ps.into_iter().map(|p| (w.to_string(), p)).collect();
        Move::generic(pairs(answered, only_a), pairs(truth, only_t))
    }

    /// Teacher turns answering the learner's latest utterance. An empty
    /// reply to an answer means it was accepted.
    pub fn respond(&self, state: &DialogueState, learner: &Utterance, scene: &TrueScene) -> Result<Vec<Utterance>> {
        let truth = scene.truck().whole.clone();
        match (&state.phase, &learner.mv) {
            (Phase::AnswerJudged, Move::Answer { concept, .. }) => {
                if *concept == truth {
                    return Ok(Vec::new());
                }
                let mut out = vec![self.say(
                    Move::Correction {
                        wrong: concept.clone(),
                        truth: truth.clone(),
                        object: PROBE_TAG.into(),
                    },
                    Self::probe_refs(),
                )?];
                if state.strategy != Strategy::VisOnly {
                    out.push(self.say(
                        Move::WhyQ {
                            concept: concept.clone(),
                            object: PROBE_TAG.into(),
                        },
                        Self::probe_refs(),
                    )?);
                }
                Ok(out)
            }
            (Phase::ExplanationJudged, Move::CannotExplain) => {
                let answered = state.answered.as_deref().unwrap_or_default();
                Ok(vec![self.say(self.distinguishing(answered, &truth), BTreeMap::new())?])
            }
            (Phase::ExplanationJudged, Move::Explain { part, region }) => {
                let r = learner
                    .refs
                    .get(region)
                    .ok_or_else(|| Error::Conformance(format!("explanation tag `{region}` has no reference")))?;
                let gt = ground_truth(scene, r, self.config.search.fidelity_floor)?;
                let refs: BTreeMap<String, RegionRef> = [(region.clone(), r.clone())].into();
                let holds = gt.label.as_deref() == Some(part.as_str()) && gt.whole.as_deref() == Some(TRUCK_ID);
                if !holds {
                    return Ok(vec![self.say(
                        Move::PartNegation {
                            part: part.clone(),
                            region: region.clone(),
                        },
                        refs,
                    )?]);
                }
                let answered = state.answered.as_deref().unwrap_or_default();
                Ok(vec![
                    self.say(
                        Move::PartAck {
                            part: part.clone(),
                            region: region.clone(),
                            other: truth.clone(),
                        },
                        refs,
                    )?,
                    self.say(self.distinguishing(answered, &truth), BTreeMap::new())?,
                ])
            }
            _ => Err(Error::Conformance(format!(
                "teacher has no reply to {} in {:?}",
                learner.mv.name(),
                state.phase
            ))),
        }
    }
}
