//! Almost-sure k-Bailout through the energy trade and negotiation gadgets.

use enpar::bailout::as_k_bailout;
use enpar::{parse_game, Caps};

fn main() {
    let g = parse_game(include_str!("data/gamble.game").as_bytes()).unwrap();
    for k in 0..3 {
        let sol = as_k_bailout(&g, k, &Caps::default()).unwrap();
        println!("k = {k} (used {}): {:?}", sol.k, sol.win);
    }
    let sol = as_k_bailout(&g, 0, &Caps::default()).unwrap();
    println!("G'' has {} states, bounds {:?}", sol.pipeline.game().num_states(), sol.bounds);
}
