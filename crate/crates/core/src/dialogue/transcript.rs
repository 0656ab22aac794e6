//! Line-delimited transcript records and the conformance replayer.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::memory::Lexicon;
use crate::worldsim::RegionRef;

use super::{advance, generate, parse, DialogueState, Morphology, Move, Speaker, Strategy, Utterance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub episode: usize,
    pub turn: usize,
    pub speaker: Speaker,
    pub surface: String,
    #[serde(rename = "move")]
    pub mv: Move,
    pub refs: BTreeMap<String, RegionRef>,
    pub strategy: Strategy,
    pub seed: u64,
    /// Diagnostics such as `bp_not_converged`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl TranscriptRecord {
    pub fn new(strategy: Strategy, seed: u64, episode: usize, turn: usize, u: &Utterance) -> Self {
        TranscriptRecord {
            episode,
            turn,
            speaker: u.speaker,
            surface: u.surface.clone(),
            mv: u.mv.clone(),
            refs: u.refs.clone(),
            strategy,
            seed,
            flags: Vec::new(),
        }
    }

    pub fn utterance(&self) -> Utterance {
        Utterance {
            speaker: self.speaker,
            surface: self.surface.clone(),
            mv: self.mv.clone(),
            refs: self.refs.clone(),
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("transcript records serialise")
    }
}

pub fn write_jsonl<W: Write>(mut out: W, records: &[TranscriptRecord]) -> Result<()> {
    for r in records {
        writeln!(out, "{}", r.to_line())?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<TranscriptRecord>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r = serde_json::from_str(&line).map_err(|e| Error::Parse {
            position: i + 1,
            message: format!("transcript line {}: {e}", i + 1),
        })?;
        out.push(r);
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ReplayReport {
    pub episodes: usize,
    pub turns: usize,
    /// Episodes in which the learner gave the wrong answer.
    pub mistakes: usize,
}

/// Re-parses and re-generates every utterance and drives the episode state
/// machine over each (strategy, seed, episode) group. Words first met in a
/// teacher utterance are learned the way the agent learns them.
pub fn replay(records: &[TranscriptRecord], lexicon: &Lexicon, morphology: &Morphology) -> Result<ReplayReport> {
    let mut report = ReplayReport::default();
    let mut lexicons: BTreeMap<(Strategy, u64), Lexicon> = BTreeMap::new();
    let mut i = 0;
    while i < records.len() {
        let key = (records[i].strategy, records[i].seed, records[i].episode);
        let end = records[i..]
            .iter()
            .position(|r| (r.strategy, r.seed, r.episode) != key)
            .map_or(records.len(), |n| i + n);
        let lex = lexicons.entry((key.0, key.1)).or_insert_with(|| lexicon.clone());
        let wrong = replay_episode(&records[i..end], lex, morphology).map_err(|e| {
            Error::Conformance(format!("{} seed {} episode {}: {e}", key.0, key.1, key.2))
        })?;
        report.episodes += 1;
        report.turns += end - i;
        report.mistakes += usize::from(wrong);
        i = end;
    }
    Ok(report)
}

fn replay_episode(records: &[TranscriptRecord], lexicon: &mut Lexicon, morphology: &Morphology) -> Result<bool> {
    let mut state = DialogueState::new(records[0].strategy);
    for (n, r) in records.iter().enumerate() {
        if r.turn != n {
            return Err(Error::Conformance(format!("turn {} out of order", r.turn)));
        }
        let parsed = parse(&r.surface, lexicon, morphology)?;
        for neo in &parsed.neologisms {
            lexicon.insert(&neo.concept_id(), neo.forms.clone())?;
        }
        if parsed.mv != r.mv {
            return Err(Error::Conformance(format!("turn {n}: surface `{}` does not mean the recorded move", r.surface)));
        }
        if generate(&r.mv, lexicon)? != r.surface {
            return Err(Error::Conformance(format!("turn {n}: `{}` does not round-trip", r.surface)));
        }
        r.utterance().check_refs()?;
        state = advance(&state, r.speaker, &r.mv)?;
    }
    if !state.may_end() {
        return Err(Error::Conformance(format!("episode stops in {:?}", state.phase)));
    }
    Ok(state.truth.is_some())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worldsim::{DomainConfig, TRUCK_ID};

    fn lexicon() -> Lexicon {
        let mut l = Lexicon::new();
        for (c, f) in &DomainConfig::double_5way().words {
            l.insert(c, f.clone()).unwrap();
        }
        l
    }

    fn rec(turn: usize, speaker: Speaker, mv: Move, tags: &[&str]) -> TranscriptRecord {
        let refs = tags.iter().map(|t| (t.to_string(), RegionRef::exact(TRUCK_ID))).collect();
        let u = Utterance::new(speaker, mv, refs, &lexicon()).unwrap();
        TranscriptRecord::new(Strategy::VisOnly, 3, 0, turn, &u)
    }

    fn vis_only_episode() -> Vec<TranscriptRecord> {
        vec![
            rec(0, Speaker::Teacher, Move::Probe { object: "o".into() }, &["o"]),
            rec(
                1,
                Speaker::Learner,
                Move::Answer {
                    concept: "dumpTruck".into(),
                    object: "o".into(),
                },
                &["o"],
            ),
            rec(
                2,
                Speaker::Teacher,
                Move::Correction {
                    wrong: "dumpTruck".into(),
                    truth: "fireTruck".into(),
                    object: "o".into(),
                },
                &["o"],
            ),
        ]
    }

    #[test]
    fn jsonl_round_trip_and_replay() {
        let recs = vis_only_episode();
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &recs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().next().unwrap().starts_with(r#"{"episode":0,"turn":0,"speaker":"teacher""#));
        let back = read_jsonl(&buf[..]).unwrap();
        assert_eq!(back, recs);
        let rep = replay(&back, &lexicon(), &Morphology::default()).unwrap();
        assert_eq!(
            rep,
            ReplayReport {
                episodes: 1,
                turns: 3,
                mistakes: 1
            }
        );
    }

    #[test]
    fn tampered_surface_is_rejected() {
        let mut recs = vis_only_episode();
        recs[1].surface = "This_o is a fire truck.".into();
        assert!(matches!(replay(&recs, &lexicon(), &Morphology::default()), Err(Error::Conformance(_))));
    }

    #[test]
    fn truncated_episode_is_rejected() {
        let recs = vis_only_episode();
        assert!(replay(&recs[..1], &lexicon(), &Morphology::default()).is_err());
        assert!(replay(&recs[..2], &lexicon(), &Morphology::default()).is_ok());
    }

    #[test]
    fn missing_ref_is_rejected() {
        let mut recs = vis_only_episode();
        recs[2].refs.clear();
        assert!(replay(&recs, &lexicon(), &Morphology::default()).is_err());
    }
}
