//! Decide almost-sure EN(k) and Parity for every state and a few credits.

use enpar::solver::Decider;
use enpar::{parse_game, Caps};

fn main() {
    let g = parse_game(include_str!("data/gamble.game").as_bytes()).unwrap();
    let d = Decider::new(&g, &Caps::default()).unwrap();
    println!("W = {:?} after {} steps", d.w, d.trace.converged_at);
    if let Some(b) = &d.bounds {
        println!("L = {}, K = {}", b.l, b.k);
    }
    for s in g.ids() {
        let row: Vec<bool> = (0..4).map(|k| d.decide(s, k).unwrap()).collect();
        println!("state {s}: k = 0..3 -> {row:?}");
    }
}
