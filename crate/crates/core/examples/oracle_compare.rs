//! Compare the decider with the capped energy-parity oracle on random games.

use enpar::bailout::compute_bounds;
use enpar::generate::{generate, GenParams};
use enpar::oracle::CappedSolution;
use enpar::solver::Decider;
use enpar::Caps;

fn main() {
    let caps = Caps::default();
    let (mut queries, mut mismatches) = (0, 0);
    for seed in 0..30 {
        let g = generate(seed, &GenParams::default());
        let b = compute_bounds(&g).unwrap();
        let d = Decider::new(&g, &caps).unwrap();
        let oracle = CappedSolution::solve(&g, b.k + b.l + 1, &caps).unwrap();
        for s in g.ids() {
            for k in 0..=3 {
                queries += 1;
                mismatches += (d.decide(s, k).unwrap() != oracle.wins(s, k)) as usize;
            }
        }
    }
    println!("{queries} queries, {mismatches} mismatches");
}
