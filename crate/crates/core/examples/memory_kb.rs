//! Exemplar base and knowledge base: idempotent rule teaching,
//! distinguishing parts, and the memory dump format.

use xil::logic::{make_generic, Concept, SkolemSupply};
use xil::memory::{Label, Memory};

fn main() -> xil::Result<()> {
    let mut m = Memory::new();
    let dump = make_generic(&Concept::whole("dumpTruck"), &Concept::part("dumper"), &mut SkolemSupply::new())?;
    println!("rule: {dump}");
    println!("first add: {}", m.kb.add_rule(&dump, Some(0))?);
    println!("again:     {}", m.kb.add_rule(&dump, Some(1))?);
    m.kb.add_whole_part("dumpTruck", "quadCabin", Some(2))?;
    m.kb.add_whole_part("containerTruck", "dumper", Some(2))?;
    m.kb.add_whole_part("containerTruck", "hemttCabin", Some(3))?;
    let (only_dump, only_container, shared) = m.kb.distinguishing_parts("dumpTruck", "containerTruck");
    println!("dump only {only_dump:?}, container only {only_container:?}, shared {shared:?}");

    m.xb.register("dumper");
    m.xb.add_exemplar("dumper", vec![0.9, 0.1, 0.0], Label::Positive)?;
    m.xb.add_exemplar("dumper", vec![0.1, 0.9, 0.0], Label::Negative)?;
    println!("exemplar counts {:?}", m.xb.counts());

    let text = m.dump();
    let back = Memory::load(&text)?;
    assert_eq!(back.dump(), text);
    println!("\n{text}");
    Ok(())
}
