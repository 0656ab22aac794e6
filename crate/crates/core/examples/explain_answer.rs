//! Finds a why-question in a run and shows the sufficient reason behind
//! the learner's explanation.

use xil::agent::{initial_memory, Agent, AgentConfig};
use xil::dialogue::{Strategy, Teacher};
use xil::harness::{calibrate_initial_xb, episode_scene, run_episode, Quality};
use xil::worldsim::DomainConfig;

fn main() -> xil::Result<()> {
    let cfg = DomainConfig::double_5way();
    let teacher = Teacher::new(cfg.clone())?;
    let seed = 4;
    let xb = calibrate_initial_xb(Quality::Mq, &cfg, seed)?;
    let mut agent = Agent::new(AgentConfig::new(Strategy::VisGenrExpl), cfg.clone(), initial_memory(&cfg, &xb)?);
    for e in 0..120 {
        let scene = episode_scene(&teacher, seed, e);
        let rec = run_episode(&mut agent, &teacher, &scene, seed, e)?;
        if !rec.transcript.iter().any(|r| r.mv.name() == "explain") {
            continue;
        }
        let last = agent.last_inference().expect("answered");
        let reason = last.reason.as_ref().expect("explained");
        println!("episode {e}: answered {} with probability {:.3}", last.answer, last.probability);
        println!("sufficient reason (answer keeps {:.3} on its own):", reason.strength);
        for ev in &reason.evidence {
            let p = last.graph.var(ev).and_then(|v| last.graph.likelihood(v)).unwrap_or(0.5);
            println!("  {ev} = {p:.2}");
        }
        for r in &rec.transcript {
            println!("  {:?}: {}", r.speaker, r.surface);
        }
        return Ok(());
    }
    println!("no explanation in 120 episodes");
    Ok(())
}
