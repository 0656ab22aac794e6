//! Marginals of a small weighted program by belief propagation and by
//! exact enumeration. The program is the abductive dump-truck example: a
//! seen dumper that belongs to the object raises belief in "dump truck".

use xil::reasoner::{build_factor_graph, exact_marginals, run_bp, BpSettings, WeightedProgram};

const PROGRAM: &str = "\
% visual
0.5 :: dumpTruck(o).
0.5 :: dumper(p).
0.5 :: have(o,p).
0.9 :: ev_dumper(p) <- dumper(p).
0.1 :: ev_dumper(p) <- not dumper(p).
0.99 :: ev_have(o,p) <- have(o,p).
0.01 :: ev_have(o,p) <- not have(o,p).
evidence ev_dumper(p).
evidence ev_have(o,p).
% knowledge
1 :: cons_dumper(o) <- have(o,p), dumper(p).
0.99 :: <- cons_dumper(o), not dumpTruck(o).
";

fn main() -> xil::Result<()> {
    let program: WeightedProgram = PROGRAM.parse()?;
    let graph = build_factor_graph(&program)?;
    let bp = run_bp(&graph, &BpSettings::default());
    let exact = exact_marginals(&graph)?;
    println!("{:<18} {:>8} {:>8}", "atom", "bp", "exact");
    for (name, p) in &exact {
        if name.contains("_viol") {
            continue;
        }
        println!("{name:<18} {:>8.4} {p:>8.4}", bp.marginals[name]);
    }
    println!("bp converged after {} iterations", bp.iterations);
    Ok(())
}
