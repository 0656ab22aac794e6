//! Checkpoints a learner mid-run, restores it, and shows that the restored
//! learner continues exactly like the original.

use xil::agent::{initial_memory, Agent, AgentConfig};
use xil::dialogue::{Strategy, Teacher};
use xil::harness::{calibrate_initial_xb, episode_scene, run_episode, Quality};
use xil::worldsim::DomainConfig;

fn main() -> xil::Result<()> {
    let cfg = DomainConfig::single_4way();
    let teacher = Teacher::new(cfg.clone())?;
    let seed = 8;
    let xb = calibrate_initial_xb(Quality::Lq, &cfg, seed)?;
    let mut a = Agent::new(AgentConfig::new(Strategy::VisGenr), cfg.clone(), initial_memory(&cfg, &xb)?);
    for e in 0..10 {
        run_episode(&mut a, &teacher, &episode_scene(&teacher, seed, e), seed, e)?;
    }
    let json = serde_json::to_string(&a.checkpoint())?;
    println!("checkpoint: {} bytes", json.len());
    let mut b = Agent::restore(&serde_json::from_str(&json)?)?;
    for e in 10..20 {
        let scene = episode_scene(&teacher, seed, e);
        let ra = run_episode(&mut a, &teacher, &scene, seed, e)?;
        let rb = run_episode(&mut b, &teacher, &scene, seed, e)?;
        assert_eq!(ra.transcript, rb.transcript);
    }
    assert_eq!(a.memory.dump(), b.memory.dump());
    println!("original and restored learners agree over 10 more episodes");
    Ok(())
}
