//! The gadget pipeline and the provenance map of each stage.

use enpar::bailout::Pipeline;
use enpar::gain::{assemble_g2_full, build_g1};
use enpar::{parse_game, Caps};

fn main() {
    let caps = Caps::default();
    let g = parse_game(include_str!("data/gamble.game").as_bytes()).unwrap();
    let p = Pipeline::build(&g).unwrap();
    println!("G': {} states", p.g_prime.output.num_states());
    println!("G'': {} states", p.game().num_states());
    println!("G'' provenance: {}", p.g_doubleprime.provenance_json());
    let g1 = build_g1(&g, &caps).unwrap();
    println!("G1: {} states, blow-up f = {}", g1.game.num_states(), g1.f);
    let g2 = assemble_g2_full(&g, &caps).unwrap();
    println!("G2: {} states, {} trade-ins, U = {:?}", g2.game().num_states(), g2.trade_ins.len(), g2.collapsed.u);
}
