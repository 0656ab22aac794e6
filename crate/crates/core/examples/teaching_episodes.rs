//! A learner with explanations is taught for a few episodes by the
//! simulated teacher; every transcript is printed.

use xil::agent::{initial_memory, Agent, AgentConfig};
use xil::dialogue::{Strategy, Teacher};
use xil::harness::{calibrate_initial_xb, episode_scene, run_episode, Quality};
use xil::worldsim::DomainConfig;

fn main() -> xil::Result<()> {
    let cfg = DomainConfig::double_5way();
    let teacher = Teacher::new(cfg.clone())?;
    let seed = 2;
    let xb = calibrate_initial_xb(Quality::Lq, &cfg, seed)?;
    let mut agent = Agent::new(AgentConfig::new(Strategy::VisGenrExpl), cfg.clone(), initial_memory(&cfg, &xb)?);
    for e in 0..6 {
        let scene = episode_scene(&teacher, seed, e);
        let rec = run_episode(&mut agent, &teacher, &scene, seed, e)?;
        println!("episode {e}: {} ({} memory changes)", if rec.correct { "correct" } else { "mistake" }, rec.mutations);
        for r in &rec.transcript {
            println!("  {:?}: {}", r.speaker, r.surface);
        }
    }
    println!("\nknowledge base:");
    for rule in agent.memory.kb.rules() {
        println!("  {rule}");
    }
    Ok(())
}
