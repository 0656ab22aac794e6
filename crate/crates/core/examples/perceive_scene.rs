//! Samples a scene, runs part search for the parts the ontology mentions,
//! and prints the scene graph and the visual program compiled from it.

use xil::agent::initial_memory;
use xil::harness::{calibrate_initial_xb, Quality};
use xil::perception::{build_scene_graph, SearchSettings};
use xil::reasoner::compile_visual;
use xil::worldsim::{sample_scene, DomainConfig, RegionRef, TRUCK_ID};

fn main() -> xil::Result<()> {
    let cfg = DomainConfig::double_5way();
    let scene = sample_scene(&cfg, 11);
    println!("scene {} holds a {}", scene.id, scene.truck().whole);
    for r in scene.regions() {
        println!("  {:<4} {:?} {}", r.id, r.role, r.label.as_deref().unwrap_or("-"));
    }

    let xb = calibrate_initial_xb(Quality::Mq, &cfg, 3)?;
    let memory = initial_memory(&cfg, &xb)?;
    let search = SearchSettings {
        noise: cfg.search.clone(),
        per_part: 1,
        seed: 5,
    };
    let sg = build_scene_graph(&scene, &RegionRef::exact(TRUCK_ID), &memory, &cfg.ontology_kb(), &search)?;
    for v in sg.proposals() {
        let best = v.beliefs.iter().max_by(|a, b| a.1.total_cmp(b.1)).map(|(c, p)| format!("{c} {p:.2}"));
        println!(
            "proposal {} for {:?}: fidelity {:.2}, strongest belief {}",
            v.id,
            v.searched_for,
            v.region.fidelity,
            best.unwrap_or_default()
        );
    }
    println!("\n{}", compile_visual(&sg)?);
    Ok(())
}
