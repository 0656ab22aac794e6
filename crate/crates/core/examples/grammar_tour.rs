//! Parses and regenerates every kind of utterance in the controlled
//! grammar, including a generic that introduces a new word.

use xil::dialogue::{generate, parse, Morphology, Teacher};
use xil::worldsim::DomainConfig;

fn main() -> xil::Result<()> {
    let cfg = DomainConfig::single_4way();
    let teacher = Teacher::new(cfg.clone())?;
    let mut lexicon = teacher.lexicon().clone();
    let morphology = Morphology::new(cfg.words.values().cloned());
    let surfaces = [
        "What kind of truck is this_o?",
        "This_o is a dump truck.",
        "This_o is not a dump truck. This_o is a fire truck.",
        "Why did you think this_o is a dump truck?",
        "Because I thought this_r3 is a dumper.",
        "I cannot explain.",
        "This_r3 is not a dumper.",
        "Fire trucks have ladders while dump trucks have dumpers.",
        "Tow trucks have winches.",
    ];
    for s in surfaces {
        let parsed = parse(s, &lexicon, &morphology)?;
        for n in &parsed.neologisms {
            println!("  new word: {} / {}", n.forms.singular, n.forms.plural);
            lexicon.insert(&n.forms.concept_id(), n.forms.clone())?;
        }
        let back = generate(&parsed.mv, &lexicon)?;
        println!("{:<16} {s}", parsed.mv.name());
        assert_eq!(back, s);
    }
    match parse("What sort of truck is this_o?", &lexicon, &morphology) {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
