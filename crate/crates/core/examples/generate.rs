//! Seeded random games with custom parameters.

use enpar::generate::{generate, GenParams};
use enpar::{to_text, Owner};

fn main() {
    let p = GenParams { max_states: 5, density: 0.5, owners: vec![Owner::Max, Owner::Random], ..GenParams::default() };
    for seed in [1, 2] {
        print!("{}", to_text(&generate(seed, &p)));
    }
    assert_eq!(generate(3, &p), generate(3, &p));
}
