//! Live teaching sessions: a human plays the teacher over a line-delimited
//! JSON protocol. Every move goes through the grammar and the episode
//! state machine, exactly as the simulated teacher's do.
//!
//! Requests carry an `op`:
//!
//! ```text
//! {"op":"create","domain":"single_4way","strategy":"vis_genr_expl","seed":7,"quality":"lq"}
//! {"op":"start","session":"s1"}
//! {"op":"say","session":"s1","text":"What kind of truck is this_o?"}
//! {"op":"accept","session":"s1"}
//! {"op":"memory","session":"s1"}
//! {"op":"transcript","session":"s1"}
//! {"op":"close","session":"s1"}
//! ```
//!
//! Replies are `{"ok":true,...}` or `{"ok":false,"error":{...}}`.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::agent::{initial_memory, Agent, AgentConfig};
use crate::dialogue::{
    advance, parse, DialogueState, Move, Morphology, Phase, Speaker, Strategy, Teacher, TranscriptRecord, Utterance, PROBE_TAG,
};
use crate::error::{Error, Result};
use crate::memory::MemorySummary;
use crate::rng;
use crate::worldsim::{DomainConfig, DomainName, RegionDistractors, RegionRef, RegionRole, TrueScene, WholeDistractors, TRUCK_ID};

use super::calibrate::{calibrate_initial_xb, Quality};
use super::episode::{episode_scene, search_seed};

/// Scene as the console draws it: regions with ids, roles and true labels
/// (the human teacher needs ground truth), no feature vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSchematic {
    pub id: String,
    pub truck: TruckSchematic,
    pub background: Vec<RegionSchematic>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruckSchematic {
    pub id: String,
    pub whole: String,
    pub distractors: WholeDistractors,
    pub regions: Vec<RegionSchematic>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSchematic {
    pub id: String,
    pub role: RegionRole,
    pub label: Option<String>,
    pub distractors: RegionDistractors,
}

impl SceneSchematic {
    pub fn of(scene: &TrueScene) -> Self {
        let region = |r: &crate::worldsim::TrueRegion| RegionSchematic {
            id: r.id.clone(),
            role: r.role,
            label: r.label.clone(),
            distractors: r.distractors.clone(),
        };
        let t = scene.truck();
        SceneSchematic {
            id: scene.id.clone(),
            truck: TruckSchematic {
                id: t.id.clone(),
                whole: t.whole.clone(),
                distractors: t.distractors.clone(),
                regions: t.regions.iter().map(region).collect(),
            },
            background: scene.background.iter().map(region).collect(),
        }
    }
}

/// One learner taught by one human.
#[derive(Debug)]
pub struct Session {
    pub agent: Agent,
    pub teacher_lexicon: crate::memory::Lexicon,
    morphology: Morphology,
    teacher: Teacher,
    seed: u64,
    pub episode: Option<usize>,
    pub scene: Option<TrueScene>,
    pub state: DialogueState,
    pub transcript: Vec<TranscriptRecord>,
    next_episode: usize,
}

impl Session {
    pub fn new(domain: DomainConfig, strategy: Strategy, seed: u64, quality: Quality) -> Result<Self> {
        let teacher = Teacher::new(domain.clone())?;
        let xb = calibrate_initial_xb(quality, &domain, rng::derive(seed, "initial-xb", 0))?;
        let agent = Agent::new(AgentConfig::new(strategy), domain.clone(), initial_memory(&domain, &xb)?);
        Ok(Session {
            agent,
            teacher_lexicon: teacher.lexicon().clone(),
            morphology: Morphology::new(domain.words.values().cloned()),
            teacher,
            seed,
            episode: None,
            scene: None,
            state: DialogueState::new(strategy),
            transcript: Vec::new(),
            next_episode: 0,
        })
    }

    /// Starts the next episode on the scene a simulated run would show.
    pub fn start(&mut self) -> Result<SceneSchematic> {
        if self.episode.is_some() && !self.state.is_terminated() {
            return Err(Error::Conformance(format!("episode still open in {:?}", self.state.phase)));
        }
        let e = self.next_episode;
        self.next_episode += 1;
        let scene = episode_scene(&self.teacher, self.seed, e);
        let schematic = SceneSchematic::of(&scene);
        self.agent.begin_episode(e);
        self.episode = Some(e);
        self.scene = Some(scene);
        self.state = DialogueState::new(self.agent.config.strategy);
        Ok(schematic)
    }

    fn scene(&self) -> Result<&TrueScene> {
        self.scene.as_ref().ok_or_else(|| Error::Conformance("no episode started".into()))
    }

    /// Binds a deictic tag: the probe tag names the truck, a tag the learner
    /// used refers to the learner's mask, a region id names that region.
    fn resolve(&self, tag: &str) -> Result<RegionRef> {
        if let Some(r) = self.transcript.iter().rev().filter(|r| r.speaker == Speaker::Learner).find_map(|r| r.refs.get(tag)) {
            return Ok(r.clone());
        }
        if tag == PROBE_TAG {
            return Ok(RegionRef::exact(TRUCK_ID));
        }
        if self.scene()?.region(tag).is_some() {
            return Ok(RegionRef::exact(tag));
        }
        Err(Error::Lookup(format!("tag `{tag}` refers to nothing in the scene")))
    }

    fn record(&mut self, u: &Utterance) {
        let e = self.episode.unwrap_or_default();
        let turn = self.transcript.iter().filter(|r| r.episode == e).count();
        self.transcript
            .push(TranscriptRecord::new(self.agent.config.strategy, self.seed, e, turn, u));
    }

    /// A teacher utterance, given as text with optional explicit refs.
    /// Returns the learner's reply, if any. On error nothing changes.
    pub fn say(&mut self, text: &str, refs: Option<BTreeMap<String, RegionRef>>) -> Result<Option<Utterance>> {
        let scene = self.scene()?.clone();
        let parsed = parse(text, &self.teacher_lexicon, &self.morphology)?;
        let refs = match refs {
            Some(r) => r,
            None => parsed
                .mv
                .tags()
                .into_iter()
                .map(|t| Ok((t.to_string(), self.resolve(t)?)))
                .collect::<Result<_>>()?,
        };
        let u = Utterance {
            speaker: Speaker::Teacher,
            surface: text.to_string(),
            mv: parsed.mv,
            refs,
        };
        u.check_refs()?;
        let next = advance(&self.state, Speaker::Teacher, &u.mv)?;
        let e = self.episode.unwrap_or_default();
        let turn = self.transcript.iter().filter(|r| r.episode == e).count();
        let reply = match &u.mv {
            Move::Probe { .. } => {
                self.agent.hear(&u, turn)?;
                Some(self.agent.handle_probe(&u, &scene, search_seed(self.seed, e))?)
            }
            Move::WhyQ { .. } => {
                self.agent.learn_from_feedback(&u, turn, &scene)?;
                Some(self.agent.handle_why(&u)?)
            }
            _ => {
                self.agent.learn_from_feedback(&u, turn, &scene)?;
                None
            }
        };
        self.state = next;
        self.record(&u);
        if let Some(r) = &reply {
            self.state = advance(&self.state, Speaker::Learner, &r.mv)?;
            self.record(r);
        }
        if self.state.is_terminated() {
            self.agent.close_episode(&scene)?;
        }
        Ok(reply)
    }

    /// Silent acceptance of the learner's answer.
    pub fn accept(&mut self) -> Result<()> {
        self.state = self.state.accept()?;
        let scene = self.scene()?.clone();
        self.agent.close_episode(&scene)
    }

    pub fn memory(&self) -> MemorySummary {
        self.agent.memory.summary()
    }

    /// Teacher moves legal now, as move kinds.
    pub fn legal_moves(&self) -> Vec<&'static str> {
        match self.state.phase {
            Phase::AwaitProbe => vec!["probe"],
            Phase::AnswerJudged => vec!["accept", "correction"],
            Phase::AwaitWhy => vec!["why_q"],
            Phase::ExplanationJudged if self.state.cannot_explain || self.state.acknowledged => vec!["generic_teach"],
            Phase::ExplanationJudged => vec!["part_negation", "part_ack"],
            _ if self.episode.is_none() || self.state.is_terminated() => vec!["start"],
            _ => vec![],
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
enum Request {
    Create {
        domain: DomainName,
        strategy: Strategy,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_quality")]
        quality: Quality,
    },
    Start {
        session: String,
    },
    Say {
        session: String,
        text: String,
        #[serde(default)]
        refs: Option<BTreeMap<String, RegionRef>>,
    },
    Accept {
        session: String,
    },
    Memory {
        session: String,
    },
    Transcript {
        session: String,
    },
    Close {
        session: String,
    },
}

fn default_quality() -> Quality {
    Quality::Lq
}

fn error_reply(e: &Error) -> Value {
    let kind = match e {
        Error::Parse { .. } => "parse",
        Error::Conformance(_) => "conformance",
        Error::Lookup(_) => "lookup",
        Error::Config(_) => "config",
        _ => "internal",
    };
    let mut err = json!({"kind": kind, "message": e.to_string()});
    if let Error::Parse { position, .. } = e {
        err["position"] = json!(position);
    }
    json!({"ok": false, "error": err})
}

/// Sessions keyed by id, each behind its own lock.
#[derive(Debug, Default)]
pub struct SessionService {
    sessions: Mutex<BTreeMap<String, Arc<Mutex<Session>>>>,
    counter: Mutex<u64>,
}

impl SessionService {
    pub fn new() -> Self {
        Self::default()
    }

    fn get(&self, id: &str) -> Result<Arc<Mutex<Session>>> {
        self.sessions
            .lock()
            .expect("session table")
            .get(id)
            .cloned()
            .ok_or_else(|| Error::Lookup(format!("no session `{id}`")))
    }

    fn status(s: &Session) -> Value {
        json!({
            "episode": s.episode,
            "phase": s.state.phase,
            "legal": s.legal_moves(),
        })
    }

    /// Handles one request line and returns the reply line.
    pub fn handle(&self, line: &str) -> String {
        let reply = match serde_json::from_str::<Request>(line) {
            Err(e) => json!({"ok": false, "error": {"kind": "malformed", "message": e.to_string()}}),
            Ok(req) => self.dispatch(req).unwrap_or_else(|e| error_reply(&e)),
        };
        reply.to_string()
    }

    fn dispatch(&self, req: Request) -> Result<Value> {
        let with = |id: &str, f: &mut dyn FnMut(&mut Session) -> Result<Value>| -> Result<Value> {
            let s = self.get(id)?;
            let mut s = s.lock().expect("session lock");
            let mut v = f(&mut s)?;
            v["ok"] = json!(true);
            v["status"] = Self::status(&s);
            Ok(v)
        };
        match req {
            Request::Create {
                domain,
                strategy,
                seed,
                quality,
            } => {
                let s = Session::new(DomainConfig::named(domain), strategy, seed, quality)?;
                let id = {
                    let mut c = self.counter.lock().expect("counter");
                    *c += 1;
                    format!("s{c}")
                };
                let status = Self::status(&s);
                self.sessions.lock().expect("session table").insert(id.clone(), Arc::new(Mutex::new(s)));
                Ok(json!({"ok": true, "session": id, "status": status}))
            }
            Request::Start { session } => with(&session, &mut |s| {
                let scene = s.start()?;
                let prompt = s.teacher.probe()?.surface;
                Ok(json!({"scene": scene, "prompt": prompt}))
            }),
            Request::Say { session, text, refs } => with(&session, &mut |s| {
                let reply = s.say(&text, refs.clone())?;
                Ok(json!({"learner": reply}))
            }),
            Request::Accept { session } => with(&session, &mut |s| {
                s.accept()?;
                Ok(json!({}))
            }),
            Request::Memory { session } => with(&session, &mut |s| Ok(json!({"memory": s.memory()}))),
            Request::Transcript { session } => with(&session, &mut |s| Ok(json!({"transcript": s.transcript}))),
            Request::Close { session } => {
                self.sessions
                    .lock()
                    .expect("session table")
                    .remove(&session)
                    .ok_or_else(|| Error::Lookup(format!("no session `{session}`")))?;
                Ok(json!({"ok": true}))
            }
        }
    }
}

fn serve_connection(service: &SessionService, stream: TcpStream) -> std::io::Result<()> {
    let mut out = stream.try_clone()?;
    for line in BufReader::new(stream).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        writeln!(out, "{}", service.handle(&line))?;
    }
    Ok(())
}

/// Accepts connections forever, one thread per connection.
pub fn serve(bind: &str) -> Result<()> {
    let listener = TcpListener::bind(bind)?;
    serve_on(listener, None)
}

/// Serves on an open listener; stops after `max_connections` if given.
pub fn serve_on(listener: TcpListener, max_connections: Option<usize>) -> Result<()> {
    let service = Arc::new(SessionService::new());
    let mut handles = Vec::new();
    for (n, stream) in listener.incoming().enumerate() {
        let stream = stream?;
        let svc = Arc::clone(&service);
        handles.push(std::thread::spawn(move || {
            let _ = serve_connection(&svc, stream);
        }));
        if max_connections.is_some_and(|m| n + 1 >= m) {
            break;
        }
    }
    for h in handles {
        let _ = h.join();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn value(s: &str) -> Value {
        serde_json::from_str(s).unwrap()
    }

    fn create(svc: &SessionService) -> String {
        let r = value(&svc.handle(r#"{"op":"create","domain":"single_4way","strategy":"vis_genr_expl","seed":7}"#));
        assert_eq!(r["ok"], true, "{r}");
        r["session"].as_str().unwrap().to_string()
    }

    #[test]
    fn lifecycle() {
        let svc = SessionService::new();
        let id = create(&svc);
        let r = value(&svc.handle(&format!(r#"{{"op":"start","session":"{id}"}}"#)));
        assert_eq!(r["prompt"], "What kind of truck is this_o?");
        assert_eq!(r["status"]["legal"], json!(["probe"]));
        let r = value(&svc.handle(&format!(r#"{{"op":"say","session":"{id}","text":"What kind of truck is this_o?"}}"#)));
        assert_eq!(r["ok"], true, "{r}");
        assert_eq!(r["learner"]["move"]["kind"], "answer");
        assert_eq!(r["status"]["phase"], "AnswerJudged");
    }

    #[test]
    fn parse_errors_leave_state_alone() {
        let svc = SessionService::new();
        let id = create(&svc);
        svc.handle(&format!(r#"{{"op":"start","session":"{id}"}}"#));
        let r = value(&svc.handle(&format!(r#"{{"op":"say","session":"{id}","text":"What sort of truck is this_o?"}}"#)));
        assert_eq!(r["ok"], false);
        assert_eq!(r["error"]["kind"], "parse");
        assert!(r["error"]["position"].as_u64().is_some());
        let r = value(&svc.handle(&format!(r#"{{"op":"transcript","session":"{id}"}}"#)));
        assert_eq!(r["transcript"], json!([]));
        assert_eq!(r["status"]["phase"], "AwaitProbe");
    }

    #[test]
    fn illegal_moves_are_rejected() {
        let svc = SessionService::new();
        let id = create(&svc);
        svc.handle(&format!(r#"{{"op":"start","session":"{id}"}}"#));
        let r = value(&svc.handle(&format!(
            r#"{{"op":"say","session":"{id}","text":"Why did you think this_o is a dump truck?"}}"#
        )));
        assert_eq!(r["error"]["kind"], "conformance");
        let r = value(&svc.handle("{not json"));
        assert_eq!(r["error"]["kind"], "malformed");
        let r = value(&svc.handle(r#"{"op":"memory","session":"nope"}"#));
        assert_eq!(r["error"]["kind"], "lookup");
    }

    #[test]
    fn why_is_refused_under_vis_only() {
        let mut s = Session::new(DomainConfig::single_4way(), Strategy::VisOnly, 1, Quality::Lq).unwrap();
        s.start().unwrap();
        let ans = s.say("What kind of truck is this_o?", None).unwrap().unwrap();
        let Move::Answer { concept, .. } = ans.mv else { unreachable!() };
        let word = &s.teacher_lexicon.forms(&concept).unwrap().singular.clone();
        assert!(s.say(&format!("Why did you think this_o is a {word}?"), None).is_err());
        assert_eq!(s.state.phase, Phase::AnswerJudged);
    }

    #[test]
    fn serves_over_tcp() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let server = std::thread::spawn(move || serve_on(listener, Some(1)).unwrap());
        let stream = TcpStream::connect(addr).unwrap();
        let mut w = stream.try_clone().unwrap();
        let mut lines = BufReader::new(stream).lines();
        writeln!(w, r#"{{"op":"create","domain":"double_5way","strategy":"vis_only","seed":3,"quality":"mq"}}"#).unwrap();
        let r = value(&lines.next().unwrap().unwrap());
        assert_eq!(r["session"], "s1");
        drop(w);
        drop(lines);
        server.join().unwrap();
    }
}
