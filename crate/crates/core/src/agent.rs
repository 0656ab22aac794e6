//! The learner: answers probes, explains wrong answers, and learns from
//! the teacher's feedback.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dialogue::{parse, Morphology, Move, Speaker, Strategy, Utterance};
use crate::error::{Error, Result};
use crate::explain::{bp_inference, cited_evidence, render_explanation, sufficient_reason, SufficientReason};
use crate::logic::{make_generic, Concept, ConceptKind, SkolemSupply};
use crate::memory::{KnowledgeBase, Label, Memory};
use crate::perception::{build_scene_graph, SceneGraph, SearchSettings};
use crate::reasoner::{
    answer_probe, build_factor_graph, compile_kb, compile_visual, run_bp, BpSettings, FactorGraph, Marginals, Penalties,
};
use crate::worldsim::{DomainConfig, RegionRef, TrueScene};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub strategy: Strategy,
    /// Correct answers below this probability still trigger learning.
    pub tau: f64,
    pub penalties: Penalties,
    pub bp: BpSettings,
    /// Proposals kept per searched part.
    pub per_part: usize,
}

impl AgentConfig {
    pub fn new(strategy: Strategy) -> Self {
        AgentConfig {
            strategy,
            tau: 0.75,
            penalties: Penalties::default(),
            bp: BpSettings::default(),
            per_part: 1,
        }
    }
}

/// What caused a memory mutation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Cause {
    /// A teacher move, identified by its turn within the episode.
    TeacherMove { turn: usize, mv: String },
    /// A correct answer given with probability below the threshold.
    Unconfident { probability_milli: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Change {
    Exemplar { concept: String, label: Label, conflict: bool },
    Rule { whole: String, part: String, added: bool },
    Word { concept: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub episode: usize,
    pub cause: Cause,
    pub change: Change,
}

/// Inference state kept between the answer and a why-question.
#[derive(Debug, Clone)]
pub struct Inference {
    pub object_tag: String,
    pub object: RegionRef,
    pub scene_graph: SceneGraph,
    pub graph: FactorGraph,
    pub marginals: Marginals,
    pub answer: String,
    pub probability: f64,
    pub converged: bool,
    pub reason: Option<SufficientReason>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: AgentConfig,
    pub domain: DomainConfig,
    pub memory: String,
}

#[derive(Debug, Clone)]
pub struct Agent {
    pub config: AgentConfig,
    pub domain: DomainConfig,
    pub memory: Memory,
    pub morphology: Morphology,
    pub audit: Vec<AuditEntry>,
    episode: usize,
    corrected: bool,
    last: Option<Inference>,
}

impl Agent {
    pub fn new(config: AgentConfig, domain: DomainConfig, memory: Memory) -> Self {
        let morphology = Morphology::new(domain.words.values().cloned());
        Agent {
            config,
            domain,
            memory,
            morphology,
            audit: Vec::new(),
            episode: 0,
            corrected: false,
            last: None,
        }
    }

    pub fn episode(&self) -> usize {
        self.episode
    }

    pub fn last_inference(&self) -> Option<&Inference> {
        self.last.as_ref()
    }

    /// Starts episode `episode`, dropping cached inference.
    pub fn begin_episode(&mut self, episode: usize) {
        self.episode = episode;
        self.corrected = false;
        self.last = None;
    }

    /// Understands a teacher utterance through the grammar, learning any
    /// new words, and returns its move.
    pub fn hear(&mut self, u: &Utterance, turn: usize) -> Result<Move> {
        let parsed = parse(&u.surface, &self.memory.lexicon, &self.morphology)?;
        for neo in &parsed.neologisms {
            let (c, added) = self.memory.register_neologism(&neo.forms, neo.kind)?;
            if added {
                self.log(Cause::TeacherMove { turn, mv: parsed.mv.name().into() }, Change::Word { concept: c.id });
            }
        }
        Ok(parsed.mv)
    }

    fn log(&mut self, cause: Cause, change: Change) {
        self.audit.push(AuditEntry {
            episode: self.episode,
            cause,
            change,
        });
    }

    fn kb_in_use(&self) -> KnowledgeBase {
        match self.config.strategy {
            Strategy::VisOnly => KnowledgeBase::new(),
            _ => self.memory.kb.clone(),
        }
    }

    /// Classifies the probed object.
    pub fn handle_probe(&mut self, probe: &Utterance, scene: &TrueScene, search_seed: u64) -> Result<Utterance> {
        let Move::Probe { object } = &probe.mv else {
            return Err(Error::Contract(format!("expected a probe, got {}", probe.mv.name())));
        };
        let target = probe
            .refs
            .get(object)
            .ok_or_else(|| Error::Contract(format!("probe tag `{object}` has no reference")))?
            .clone();
        let kb = self.kb_in_use();
        let search = SearchSettings {
            noise: self.domain.search.clone(),
            per_part: self.config.per_part,
            seed: search_seed,
        };
        let sg = build_scene_graph(scene, &target, &self.memory, &kb, &search)?;
        let mut program = compile_visual(&sg)?;
        program.extend(compile_kb(&kb, &sg, self.config.penalties)?);
        let graph = build_factor_graph(&program)?;
        let bp = run_bp(&graph, &self.config.bp);
        let wholes: Vec<&str> = self.memory.whole_types().iter().map(|c| c.id.as_str()).collect();
        let (answer, probability) = answer_probe(&bp.marginals, &wholes, &sg.target().id)?;
        let answer = answer.to_string();
        let reply = Utterance::new(
            Speaker::Learner,
            Move::Answer {
                concept: answer.clone(),
                object: object.clone(),
            },
            [(object.clone(), target.clone())].into(),
            &self.memory.lexicon,
        )?;
        self.last = Some(Inference {
            object_tag: object.clone(),
            object: target,
            scene_graph: sg,
            graph,
            marginals: bp.marginals,
            answer,
            probability,
            converged: bp.converged,
            reason: None,
        });
        Ok(reply)
    }

    /// Answers "why did you think ...".
    pub fn handle_why(&mut self, why: &Utterance) -> Result<Utterance> {
        let Move::WhyQ { concept, object } = &why.mv else {
            return Err(Error::Contract(format!("expected a why-question, got {}", why.mv.name())));
        };
        let last = self
            .last
            .as_mut()
            .filter(|l| l.answer == *concept && l.object_tag == *object)
            .ok_or_else(|| Error::Conformance(format!("no answer {concept}({object}) to explain")))?;
        let (mv, refs) = match self.config.strategy {
            Strategy::VisGenrExpl => {
                let wholes: Vec<&str> = self.memory.concepts.values().filter(|c| c.kind == ConceptKind::WholeType).map(|c| c.id.as_str()).collect();
                let infer = bp_inference(self.config.bp);
                let target = last.scene_graph.target().id.clone();
                last.reason = sufficient_reason(&last.graph, &last.answer, &wholes, &target, &infer)?;
                let parts: BTreeSet<String> = self
                    .memory
                    .concepts
                    .values()
                    .filter(|c| c.kind == ConceptKind::PartType)
                    .map(|c| c.id.clone())
                    .collect();
                render_explanation(last.reason.as_ref().and_then(|r| cited_evidence(r, &last.graph, &parts)), &last.scene_graph)?
            }
            _ => (Move::CannotExplain, BTreeMap::new()),
        };
        Utterance::new(Speaker::Learner, mv, refs, &self.memory.lexicon)
    }

    /// Applies one teacher feedback utterance heard at `turn`.
    pub fn learn_from_feedback(&mut self, u: &Utterance, turn: usize, scene: &TrueScene) -> Result<()> {
        let mv = self.hear(u, turn)?;
        let cause = Cause::TeacherMove {
            turn,
            mv: mv.name().into(),
        };
        let feature = |tag: &str| -> Result<Vec<f64>> {
            let r = u
                .refs
                .get(tag)
                .ok_or_else(|| Error::Contract(format!("feedback tag `{tag}` has no reference")))?;
            scene.feature_of(r)
        };
        match &mv {
            Move::Correction { wrong, truth, object } => {
                self.corrected = true;
                let f = feature(object)?;
                self.add_exemplar(cause.clone(), wrong, f.clone(), Label::Negative)?;
                self.add_exemplar(cause, truth, f, Label::Positive)?;
            }
            Move::PartNegation { part, region } => {
                let f = feature(region)?;
                self.add_exemplar(cause, part, f, Label::Negative)?;
            }
            Move::GenericTeach { pairs, .. } => {
                for (whole, part) in pairs {
                    self.learn_rule(cause.clone(), whole, part)?;
                }
            }
            Move::PartAck { .. } | Move::WhyQ { .. } | Move::Probe { .. } => {}
            other => return Err(Error::Contract(format!("{} is not teacher feedback", other.name()))),
        }
        Ok(())
    }

    fn learn_rule(&mut self, cause: Cause, whole: &str, part: &str) -> Result<()> {
        let rule = make_generic(&Concept::whole(whole), &Concept::part(part), &mut SkolemSupply::new())?;
        let added = self.memory.kb.add_rule(&rule, Some(self.episode))?;
        self.log(
            cause,
            Change::Rule {
                whole: whole.to_string(),
                part: part.to_string(),
                added,
            },
        );
        Ok(())
    }

    fn add_exemplar(&mut self, cause: Cause, concept: &str, f: Vec<f64>, label: Label) -> Result<()> {
        let conflict = self.memory.xb.add_exemplar(concept, f, label)?;
        self.log(
            cause,
            Change::Exemplar {
                concept: concept.to_string(),
                label,
                conflict,
            },
        );
        Ok(())
    }

    /// Ends the episode. A correct answer given without confidence adds the
    /// object to its type's positives, and each recognised part proposal
    /// the KB relates to that type to the part's positives.
    pub fn close_episode(&mut self, scene: &TrueScene) -> Result<()> {
        let Some(last) = self.last.clone() else {
            return Ok(());
        };
        if self.corrected || last.probability >= self.config.tau {
            return Ok(());
        }
        let cause = Cause::Unconfident {
            probability_milli: (last.probability * 1000.0).round() as u32,
        };
        self.add_exemplar(cause.clone(), &last.answer, scene.feature_of(&last.object)?, Label::Positive)?;
        let parts = self.kb_in_use().parts_of(&last.answer);
        for part in parts {
            let recognised: Vec<RegionRef> = last
                .scene_graph
                .candidates_for(&part)
                .filter(|v| v.beliefs.get(&part).is_some_and(|&p| p > 0.5))
                .map(|v| v.region.clone())
                .collect();
            for r in recognised {
                self.add_exemplar(cause.clone(), &part, scene.feature_of(&r)?, Label::Positive)?;
            }
        }
        Ok(())
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.config.clone(),
            domain: self.domain.clone(),
            memory: self.memory.dump(),
        }
    }

    pub fn restore(cp: &Checkpoint) -> Result<Agent> {
        Ok(Agent::new(cp.config.clone(), cp.domain.clone(), Memory::load(&cp.memory)?))
    }
}

/// Memory the learner starts with: every whole type of the domain with
/// empty exemplar sets, and every taught part with the exemplars in `parts`.
pub fn initial_memory(domain: &DomainConfig, parts: &crate::memory::ExemplarBase) -> Result<Memory> {
    let mut m = Memory::new();
    for t in domain.type_ids() {
        m.register_neologism(&domain.words[t], ConceptKind::WholeType)?;
    }
    for p in domain.taught_parts() {
        m.register_neologism(&domain.words[&p], ConceptKind::PartType)?;
        if let Some(sets) = parts.get(&p) {
            for v in &sets.positives {
                m.xb.add_exemplar(&p, v.clone(), Label::Positive)?;
            }
            for v in &sets.negatives {
                m.xb.add_exemplar(&p, v.clone(), Label::Negative)?;
            }
        }
    }
    for (alias, c) in &domain.aliases {
        m.lexicon.add_alias(alias, c);
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dialogue::{Teacher, PROBE_TAG};
    use crate::memory::ExemplarBase;
    use crate::worldsim::{sample_scene, RegionRole, TRUCK_ID};

    fn agent(strategy: Strategy, cfg: &DomainConfig) -> Agent {
        let m = initial_memory(cfg, &ExemplarBase::new()).unwrap();
        Agent::new(AgentConfig::new(strategy), cfg.clone(), m)
    }

    fn scene_of(cfg: &DomainConfig, whole: &str) -> TrueScene {
        (0..).map(|s| sample_scene(cfg, s)).find(|s| s.truck().whole == whole).unwrap()
    }

    #[test]
    fn uninformative_scene_answers_first_type() {
        let cfg = DomainConfig::single_4way();
        let t = Teacher::new(cfg.clone()).unwrap();
        let mut a = agent(Strategy::VisOnly, &cfg);
        let scene = sample_scene(&cfg, 1);
        let ans = a.handle_probe(&t.probe().unwrap(), &scene, 0).unwrap();
        assert_eq!(ans.surface, "This_o is a base truck.");
        assert!((a.last_inference().unwrap().probability - 0.5).abs() < 1e-9);
    }

    #[test]
    fn correction_updates_both_types() {
        let cfg = DomainConfig::single_4way();
        let t = Teacher::new(cfg.clone()).unwrap();
        let mut a = agent(Strategy::VisOnly, &cfg);
        let scene = scene_of(&cfg, "missileTruck");
        let corr = Utterance::new(
            Speaker::Teacher,
            Move::Correction {
                wrong: "dumpTruck".into(),
                truth: "missileTruck".into(),
                object: PROBE_TAG.into(),
            },
            [(PROBE_TAG.to_string(), RegionRef::exact(TRUCK_ID))].into(),
            t.lexicon(),
        )
        .unwrap();
        a.learn_from_feedback(&corr, 2, &scene).unwrap();
        let counts = a.memory.xb.counts();
        assert_eq!(counts["dumpTruck"], (0, 1));
        assert_eq!(counts["missileTruck"], (1, 0));
        assert_eq!(a.audit.len(), 2);
    }

    #[test]
    fn part_negation_stores_proposal_vector() {
        let cfg = DomainConfig::double_5way();
        let t = Teacher::new(cfg.clone()).unwrap();
        let mut a = agent(Strategy::VisGenrExpl, &cfg);
        let scene = scene_of(&cfg, "containerTruck");
        let cabin = scene.truck().region_with(RegionRole::Cabin).id.clone();
        let r = RegionRef {
            region: cabin,
            fidelity: 0.7,
            proposed: true,
        };
        let neg = Utterance::new(
            Speaker::Teacher,
            Move::PartNegation {
                part: "dumper".into(),
                region: "p".into(),
            },
            [("p".to_string(), r.clone())].into(),
            t.lexicon(),
        )
        .unwrap();
        a.learn_from_feedback(&neg, 5, &scene).unwrap();
        assert_eq!(a.memory.xb.get("dumper").unwrap().negatives, vec![scene.feature_of(&r).unwrap()]);
    }

    #[test]
    fn generic_teaching_is_idempotent() {
        let cfg = DomainConfig::double_5way();
        let t = Teacher::new(cfg.clone()).unwrap();
        let mut a = agent(Strategy::VisGenr, &cfg);
        let scene = scene_of(&cfg, "containerTruck");
        let g = Utterance::new(Speaker::Teacher, t.distinguishing("dumpTruck", "containerTruck"), BTreeMap::new(), t.lexicon()).unwrap();
        a.learn_from_feedback(&g, 4, &scene).unwrap();
        let n = a.memory.kb.len();
        assert_eq!(n, 2);
        a.learn_from_feedback(&g, 4, &scene).unwrap();
        assert_eq!(a.memory.kb.len(), n);
    }

    #[test]
    fn new_words_are_registered() {
        let cfg = DomainConfig::single_4way();
        let mut a = agent(Strategy::VisGenr, &cfg);
        let scene = sample_scene(&cfg, 0);
        // quad cabins are not taught in this domain, so the learner has no word for them
        let u = Utterance {
            speaker: Speaker::Teacher,
            surface: "Fire trucks have quad cabins.".into(),
            mv: Move::generic(vec![("fireTruck".into(), "quadCabin".into())], vec![]),
            refs: BTreeMap::new(),
        };
        a.learn_from_feedback(&u, 4, &scene).unwrap();
        assert!(a.memory.concept("quadCabin").is_some());
        assert!(a.audit.iter().any(|e| e.change == Change::Word { concept: "quadCabin".into() }));
    }

    #[test]
    fn vis_genr_cannot_explain() {
        let cfg = DomainConfig::single_4way();
        let t = Teacher::new(cfg.clone()).unwrap();
        let mut a = agent(Strategy::VisGenr, &cfg);
        let scene = sample_scene(&cfg, 3);
        let ans = a.handle_probe(&t.probe().unwrap(), &scene, 0).unwrap();
        let Move::Answer { concept, .. } = ans.mv else { unreachable!() };
        let why = Utterance::new(
            Speaker::Teacher,
            Move::WhyQ {
                concept,
                object: PROBE_TAG.into(),
            },
            [(PROBE_TAG.to_string(), RegionRef::exact(TRUCK_ID))].into(),
            t.lexicon(),
        )
        .unwrap();
        assert_eq!(a.handle_why(&why).unwrap().mv, Move::CannotExplain);
    }

    #[test]
    fn unconfident_correct_answer_is_learned() {
        let cfg = DomainConfig::single_4way();
        let t = Teacher::new(cfg.clone()).unwrap();
        let mut a = agent(Strategy::VisOnly, &cfg);
        let scene = scene_of(&cfg, "baseTruck");
        a.begin_episode(0);
        a.handle_probe(&t.probe().unwrap(), &scene, 0).unwrap();
        a.close_episode(&scene).unwrap();
        assert_eq!(a.memory.xb.counts()["baseTruck"], (1, 0));
        assert!(matches!(a.audit[0].cause, Cause::Unconfident { probability_milli: 500 }));
    }

    #[test]
    fn checkpoint_round_trip() {
        let cfg = DomainConfig::double_5way();
        let a = agent(Strategy::VisGenrExpl, &cfg);
        let cp = a.checkpoint();
        let json = serde_json::to_string(&cp).unwrap();
        let b = Agent::restore(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(b.memory, a.memory);
        assert_eq!(b.config, a.config);
    }
}
