//! The console's three contracts: a live session driven move by move
//! behaves like the simulated run, the scene export carries the ids the
//! protocol refers to, and the transcripts it writes replay.

use xil::dialogue::{replay, Morphology, Phase, Strategy, Teacher, TranscriptRecord};
use xil::harness::{
    episode_scene, run_single, ExperimentConfig, Quality, SceneSchematic, Session, SessionService,
};
use xil::worldsim::{DomainConfig, DomainName};

const EPISODES: usize = 25;

/// Plays the simulated teacher's moves through a session.
fn drive(domain: DomainName, strategy: Strategy, seed: u64) -> Session {
    let cfg = DomainConfig::named(domain);
    let teacher = Teacher::new(cfg.clone()).unwrap();
    let mut s = Session::new(cfg, strategy, seed, Quality::Lq).unwrap();
    for e in 0..EPISODES {
        let schematic = s.start().unwrap();
        let scene = episode_scene(&teacher, seed, e);
        assert_eq!(schematic, SceneSchematic::of(&scene));
        let probe = teacher.probe().unwrap();
        assert!(s.legal_moves().contains(&probe.mv.name()));
        let mut reply = s.say(&probe.surface, Some(probe.refs.clone())).unwrap().expect("an answer");
        loop {
            let pending = teacher.respond(&s.state, &reply, &scene).unwrap();
            if pending.is_empty() {
                assert!(s.legal_moves().contains(&"accept"), "{:?}", s.state.phase);
                s.accept().unwrap();
                break;
            }
            let mut next = None;
            for u in pending {
                assert!(s.legal_moves().contains(&u.mv.name()), "{} in {:?}", u.mv.name(), s.state.phase);
                next = s.say(&u.surface, Some(u.refs.clone())).unwrap().or(next);
            }
            match next {
                Some(r) => reply = r,
                None => break,
            }
        }
        assert!(s.state.is_terminated(), "episode {e} open in {:?}", s.state.phase);
    }
    s
}

fn strip(records: &[TranscriptRecord]) -> Vec<TranscriptRecord> {
    records.iter().cloned().map(|mut r| {
        r.flags.clear();
        r
    }).collect()
}

#[test]
fn session_matches_simulated_run() {
    for (domain, strategy, seed) in [
        (DomainName::Single4way, Strategy::VisGenrExpl, 3),
        (DomainName::Single4way, Strategy::VisOnly, 4),
        (DomainName::Double5way, Strategy::VisGenr, 5),
        (DomainName::Double5way, Strategy::VisGenrExpl, 6),
    ] {
        let mut cfg = ExperimentConfig::new(domain, Quality::Lq);
        cfg.episodes = EPISODES;
        let run = run_single(&cfg, strategy, seed).unwrap();
        let s = drive(domain, strategy, seed);
        assert_eq!(strip(&s.transcript), strip(&run.transcript), "{domain:?} {strategy}");
        assert_eq!(s.agent.audit, run.audit);
        assert_eq!(s.agent.memory.kb.len(), run.final_kb_rules);
    }
}

#[test]
fn session_transcripts_replay() {
    let s = drive(DomainName::Double5way, Strategy::VisGenrExpl, 11);
    let cfg = DomainConfig::double_5way();
    let teacher = Teacher::new(cfg.clone()).unwrap();
    let report = replay(&s.transcript, teacher.lexicon(), &Morphology::new(cfg.words.values().cloned())).unwrap();
    assert_eq!(report.episodes, EPISODES);
    assert_eq!(report.turns, s.transcript.len());
}

#[test]
fn scene_export_round_trips_and_names_every_region() {
    let cfg = DomainConfig::double_5way();
    let teacher = Teacher::new(cfg).unwrap();
    for e in 0..20 {
        let scene = episode_scene(&teacher, 9, e);
        let schematic = SceneSchematic::of(&scene);
        let json = serde_json::to_string(&schematic).unwrap();
        assert_eq!(serde_json::from_str::<SceneSchematic>(&json).unwrap(), schematic);
        let exported: Vec<&str> = schematic
            .truck
            .regions
            .iter()
            .chain(&schematic.background)
            .map(|r| r.id.as_str())
            .collect();
        for id in &exported {
            assert!(scene.region(id).is_some(), "{id} not in scene");
        }
        assert_eq!(exported.len(), scene.truck().regions.len() + scene.background.len());
        assert_eq!(schematic.truck.whole, scene.truck().whole);
    }
}

#[test]
fn protocol_drives_an_episode() {
    let svc = SessionService::new();
    let reply: serde_json::Value = serde_json::from_str(&svc.handle(
        r#"{"op":"create","domain":"single_4way","strategy":"vis_genr_expl","seed":2}"#,
    ))
    .unwrap();
    let id = reply["session"].as_str().unwrap().to_string();
    let start: serde_json::Value = serde_json::from_str(&svc.handle(&format!(r#"{{"op":"start","session":"{id}"}}"#))).unwrap();
    assert_eq!(start["ok"], true);
    assert!(start["scene"]["truck"]["regions"].as_array().is_some_and(|r| !r.is_empty()));
    let said: serde_json::Value = serde_json::from_str(&svc.handle(&format!(
        r#"{{"op":"say","session":"{id}","text":"What kind of truck is this_o?"}}"#
    )))
    .unwrap();
    assert_eq!(said["ok"], true, "{said}");
    assert_eq!(said["status"]["phase"], serde_json::to_value(Phase::AnswerJudged).unwrap());
    let accepted: serde_json::Value = serde_json::from_str(&svc.handle(&format!(r#"{{"op":"accept","session":"{id}"}}"#))).unwrap();
    assert_eq!(accepted["ok"], true);
    let transcript: serde_json::Value = serde_json::from_str(&svc.handle(&format!(r#"{{"op":"transcript","session":"{id}"}}"#))).unwrap();
    assert_eq!(transcript["transcript"].as_array().map(Vec::len), Some(2));
}
