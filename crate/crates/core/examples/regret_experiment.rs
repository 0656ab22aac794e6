//! A reduced cumulative-regret experiment; writes regret.csv and summaries
//! into a temporary directory.

use xil::harness::{run_experiment, ExperimentConfig, Quality};
use xil::worldsim::DomainName;

fn main() -> xil::Result<()> {
    let out = std::env::temp_dir().join("xil-regret-example");
    let cfg = ExperimentConfig {
        seeds: 6,
        episodes: 40,
        out: Some(out.clone()),
        ..ExperimentConfig::new(DomainName::Single4way, Quality::Lq)
    };
    let res = run_experiment(&cfg)?;
    print!("{}", res.summary.to_text());
    for c in &res.curves {
        let marks: Vec<String> = [9, 19, 29, 39].iter().map(|&e| format!("{:.1}", c.mean[e])).collect();
        println!("{:<14} mean regret at 10/20/30/40: {}", c.strategy.to_string(), marks.join(" "));
    }
    println!("outputs in {}", out.display());
    Ok(())
}
