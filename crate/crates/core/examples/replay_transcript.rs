//! Records a run's transcript as JSON lines and checks it with the
//! replayer: grammar round trip, references and the dialogue protocol.

use xil::dialogue::{read_jsonl, replay, write_jsonl, Morphology, Strategy, Teacher};
use xil::harness::{run_single, ExperimentConfig, Quality};
use xil::worldsim::DomainName;

fn main() -> xil::Result<()> {
    let cfg = ExperimentConfig {
        episodes: 15,
        ..ExperimentConfig::new(DomainName::Double5way, Quality::Lq)
    };
    let run = run_single(&cfg, Strategy::VisGenrExpl, cfg.seed(0))?;
    let mut buf = Vec::new();
    write_jsonl(&mut buf, &run.transcript)?;
    println!("{}", String::from_utf8_lossy(&buf).lines().nth(1).unwrap_or_default());

    let records = read_jsonl(buf.as_slice())?;
    let teacher = Teacher::new(cfg.domain.clone())?;
    let morphology = Morphology::new(cfg.domain.words.values().cloned());
    let report = replay(&records, teacher.lexicon(), &morphology)?;
    println!("replayed {} episodes, {} turns, {} mistakes", report.episodes, report.turns, report.mistakes);

    let mut broken = records.clone();
    broken[1].surface = "This_o is a truck truck.".into();
    println!("tampered transcript: {}", replay(&broken, teacher.lexicon(), &morphology).unwrap_err());
    Ok(())
}
