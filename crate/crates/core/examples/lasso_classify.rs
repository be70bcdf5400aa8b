//! Classify an ultimately periodic run against every objective.

use enpar::lasso::{classify_lasso, LassoRun};
use enpar::parse_game;

fn main() {
    let g = parse_game(include_str!("data/gamble.game").as_bytes()).unwrap();
    // 0 -> 2, then 2 -> 2 -> 0 -> 1 -> 0 -> 2 forever
    // edges are stored sorted by (src, dst, reward)
    let run = LassoRun { prefix: vec![1], cycle: vec![5, 4, 0, 3, 1] };
    let r = classify_lasso(&g, &run, 4, 4).unwrap();
    println!("mean payoff {}, parity {}", r.mean_payoff, r.parity);
    println!("liminf {:?}, limsup {:?}", r.liminf_class, r.limsup_class);
    println!("min credit {:?}, min storage {:?}", r.min_credit, r.min_storage);
    for k in 0..3 {
        println!("k = {k}: EN∩Parity {}, k-Bailout {}", r.energy_parity(k), r.k_bailout(k));
    }
}
