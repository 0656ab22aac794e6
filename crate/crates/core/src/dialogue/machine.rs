//! Episode protocol as a transition function over dialogue phases.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Move, Speaker};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    VisOnly,
    VisGenr,
    VisGenrExpl,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::VisOnly, Strategy::VisGenr, Strategy::VisGenrExpl];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::VisOnly => "vis_only",
            Strategy::VisGenr => "vis_genr",
            Strategy::VisGenrExpl => "vis_genr_expl",
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '+'], "_").as_str() {
            "vis_only" | "visonly" => Ok(Strategy::VisOnly),
            "vis_genr" | "visgenr" => Ok(Strategy::VisGenr),
            "vis_genr_expl" | "visgenrexpl" => Ok(Strategy::VisGenrExpl),
            _ => Err(Error::Config(format!("unknown strategy `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    AwaitProbe,
    AwaitAnswer,
    AnswerJudged,
    AwaitWhy,
    AwaitExplanation,
    ExplanationJudged,
    Terminated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueState {
    pub phase: Phase,
    pub strategy: Strategy,
    pub probe: Option<String>,
    pub answered: Option<String>,
    pub truth: Option<String>,
    /// (part, region tag) cited by the learner's explanation.
    pub cited: Option<(String, String)>,
    pub cannot_explain: bool,
    pub acknowledged: bool,
}

impl DialogueState {
    pub fn new(strategy: Strategy) -> Self {
        DialogueState {
            phase: Phase::AwaitProbe,
            strategy,
            probe: None,
            answered: None,
            truth: None,
            cited: None,
            cannot_explain: false,
            acknowledged: false,
        }
    }

    pub fn is_terminated(&self) -> bool {
        self.phase == Phase::Terminated
    }

    /// The teacher accepts the answer without reply.
    pub fn accept(&self) -> Result<DialogueState> {
        if self.phase != Phase::AnswerJudged {
            return Err(Error::Conformance(format!("cannot accept an answer in {:?}", self.phase)));
        }
        Ok(DialogueState {
            phase: Phase::Terminated,
            ..self.clone()
        })
    }

    /// Whether the transcript may legally stop in this state: terminated,
    /// or an answer awaiting silent acceptance.
    pub fn may_end(&self) -> bool {
        matches!(self.phase, Phase::Terminated | Phase::AnswerJudged)
    }
}

fn violation(state: &DialogueState, speaker: Speaker, mv: &Move) -> Error {
    Error::Conformance(format!(
        "{speaker:?} {} is not allowed in {:?} under {}",
        mv.name(),
        state.phase,
        state.strategy
    ))
}

/// Transition function of the episode flowchart.
pub fn advance(state: &DialogueState, speaker: Speaker, mv: &Move) -> Result<DialogueState> {
    use Phase::*;
    use Speaker::{Learner, Teacher};
    let mut next = state.clone();
    let bad = || Err(violation(state, speaker, mv));
    match (state.phase, speaker, mv) {
        (AwaitProbe, Teacher, Move::Probe { object }) => {
            next.probe = Some(object.clone());
            next.phase = AwaitAnswer;
        }
        (AwaitAnswer, Learner, Move::Answer { concept, object }) if Some(object) == state.probe.as_ref() => {
            next.answered = Some(concept.clone());
            next.phase = AnswerJudged;
        }
        (AnswerJudged, Teacher, Move::Correction { wrong, truth, object })
            if Some(wrong) == state.answered.as_ref() && Some(object) == state.probe.as_ref() && wrong != truth =>
        {
            next.truth = Some(truth.clone());
            next.phase = if state.strategy == Strategy::VisOnly {
                Terminated
            } else {
                AwaitWhy
            };
        }
        (AwaitWhy, Teacher, Move::WhyQ { concept, object })
            if Some(concept) == state.answered.as_ref() && Some(object) == state.probe.as_ref() =>
        {
            next.phase = AwaitExplanation;
        }
        (AwaitExplanation, Learner, Move::CannotExplain) => {
            next.cannot_explain = true;
            next.phase = ExplanationJudged;
        }
        (AwaitExplanation, Learner, Move::Explain { part, region }) if state.strategy == Strategy::VisGenrExpl => {
            next.cited = Some((part.clone(), region.clone()));
            next.phase = ExplanationJudged;
        }
        (ExplanationJudged, Teacher, Move::PartNegation { part, region })
            if !state.acknowledged && state.cited.as_ref() == Some(&(part.clone(), region.clone())) =>
        {
            next.phase = Terminated;
        }
        (ExplanationJudged, Teacher, Move::PartAck { part, region, other })
            if !state.acknowledged
                && state.cited.as_ref() == Some(&(part.clone(), region.clone()))
                && Some(other) == state.truth.as_ref() =>
        {
            next.acknowledged = true;
        }
        (ExplanationJudged, Teacher, Move::GenericTeach { .. }) if state.cannot_explain || state.acknowledged => {
            next.phase = Terminated;
        }
        _ => return bad(),
    }
    Ok(next)
}
