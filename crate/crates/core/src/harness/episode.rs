//! One interaction episode between the learner and the simulated teacher.

use serde::{Deserialize, Serialize};

use crate::agent::Agent;
use crate::dialogue::{advance, DialogueState, Move, Speaker, Teacher, TranscriptRecord, Utterance};
use crate::error::{Error, Result};
use crate::rng;
use crate::worldsim::{sample_scene, TrueScene};

/// Scene shown in `episode` of the run seeded with `seed`; the same for
/// every strategy.
pub fn episode_scene(teacher: &Teacher, seed: u64, episode: usize) -> TrueScene {
    sample_scene(teacher.config(), rng::derive(seed, "episode", episode as u64))
}

pub fn search_seed(seed: u64, episode: usize) -> u64 {
    rng::derive(seed, "search", episode as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub correct: bool,
    pub answer: String,
    pub truth: String,
    pub transcript: Vec<TranscriptRecord>,
    /// Audit entries this episode appended.
    pub mutations: usize,
}

struct Turns<'a> {
    state: DialogueState,
    records: Vec<TranscriptRecord>,
    seed: u64,
    episode: usize,
    flags: &'a [String],
}

impl Turns<'_> {
    fn push(&mut self, u: &Utterance) -> Result<usize> {
        self.state = advance(&self.state, u.speaker, &u.mv)?;
        let turn = self.records.len();
        let mut r = TranscriptRecord::new(self.state.strategy, self.seed, self.episode, turn, u);
        if u.speaker == Speaker::Learner && matches!(u.mv, Move::Answer { .. }) {
            r.flags = self.flags.to_vec();
        }
        self.records.push(r);
        Ok(turn)
    }
}

/// Plays one episode to termination, applying all learning.
pub fn run_episode(agent: &mut Agent, teacher: &Teacher, scene: &TrueScene, seed: u64, episode: usize) -> Result<EpisodeRecord> {
    let before = agent.audit.len();
    agent.begin_episode(episode);
    let probe = teacher.probe()?;
    agent.hear(&probe, 0)?;
    let answer = agent.handle_probe(&probe, scene, search_seed(seed, episode))?;
    let flags: Vec<String> = match agent.last_inference() {
        Some(l) if !l.converged => vec!["bp_not_converged".into()],
        _ => Vec::new(),
    };
    let mut turns = Turns {
        state: DialogueState::new(agent.config.strategy),
        records: Vec::new(),
        seed,
        episode,
        flags: &flags,
    };
    turns.push(&probe)?;
    turns.push(&answer)?;
    let mut pending = teacher.respond(&turns.state, &answer, scene)?;
    if pending.is_empty() {
        turns.state = turns.state.accept()?;
    }
    while !pending.is_empty() {
        let mut learner_reply = None;
        for u in pending.drain(..) {
            let turn = turns.push(&u)?;
            agent.learn_from_feedback(&u, turn, scene)?;
            if matches!(u.mv, Move::WhyQ { .. }) {
                learner_reply = Some(agent.handle_why(&u)?);
            }
        }
        if let Some(reply) = learner_reply {
            turns.push(&reply)?;
            pending = teacher.respond(&turns.state, &reply, scene)?;
        }
    }
    if !turns.state.is_terminated() {
        return Err(Error::Conformance(format!("episode {episode} ended in {:?}", turns.state.phase)));
    }
    agent.close_episode(scene)?;
    let Move::Answer { concept, .. } = &answer.mv else {
        unreachable!("handle_probe answers")
    };
    let truth = scene.truck().whole.clone();
    Ok(EpisodeRecord {
        episode,
        correct: *concept == truth,
        answer: concept.clone(),
        truth,
        transcript: turns.records,
        mutations: agent.audit.len() - before,
    })
}
