//! Almost-sure Gain with both certificates: a G3 witness for winners and a
//! Min strategy for losers.

use enpar::gain::{ssg_as_gain, synthesize_g3, verify_conp_gain, verify_g3};
use enpar::{parse_game, Caps, StateSet};

const SPLIT: &str = "game split
state 0 owner=min prio=0
state 1 owner=max prio=0
state 2 owner=max prio=0
edge 0 1 reward=0
edge 0 2 reward=0
edge 1 1 reward=1
edge 2 2 reward=-1
";

fn main() {
    let caps = Caps::default();
    for text in [include_str!("data/gamble.game"), SPLIT] {
        let g = parse_game(text.as_bytes()).unwrap();
        let sol = ssg_as_gain(&g, &caps).unwrap();
        println!("{}: Gain winners {:?}", g.name(), sol.win);
        let syn = synthesize_g3(&g, &caps).unwrap();
        let all: StateSet = g.ids().collect();
        println!("  G3 certificate: {:?}", verify_g3(&g, &syn.certificate, &all, &caps).unwrap());
        for s in g.ids().filter(|s| !sol.win.contains(s)) {
            println!("  state {s} refuted by tau*: {}", verify_conp_gain(&g, &sol.tau_star, s, &caps).unwrap());
        }
    }
}
