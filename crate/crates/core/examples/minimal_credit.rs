//! Minimal credits: stochastic (through the decider) and on a plain
//! two-player energy-parity game.

use enpar::solver::Decider;
use enpar::storage;
use enpar::{parse_game, Caps};

const TWO_PLAYER: &str = "game drain
state 0 owner=max prio=0
state 1 owner=min prio=0
state 2 owner=max prio=0
edge 0 1 reward=-1
edge 1 0 reward=-1
edge 1 2 reward=0
edge 0 2 reward=-3
edge 2 2 reward=0
";

fn main() {
    let caps = Caps::default();
    let g = parse_game(include_str!("data/gamble.game").as_bytes()).unwrap();
    let d = Decider::new(&g, &caps).unwrap();
    for s in g.ids() {
        println!("gamble state {s}: credit {:?}", d.minimal_credit(s).unwrap());
    }
    let h = parse_game(TWO_PLAYER.as_bytes()).unwrap();
    let table = storage::minimal_credit(&h, &caps).unwrap();
    for s in h.ids() {
        println!("drain state {s}: credit {:?}", table.get(s));
    }
}
