//! Build a three-mode witness strategy, validate it exactly and simulate it
//! against a uniform adversary.

use enpar::synthesis::{exact_validate, simulate, Adversary, SynthesisOptions, Synthesizer};
use enpar::{parse_game, Caps, StateId};

fn main() {
    let caps = Caps::default();
    let g = parse_game(include_str!("data/gamble.game").as_bytes()).unwrap();
    let syn = Synthesizer::new(&g, &caps).unwrap();
    let (s, k) = (StateId(0), 1);
    let ms = syn.strategy(s, k, SynthesisOptions { allow_start_only: false }).unwrap();
    println!("params {:?}", ms.params);
    println!("thresholds {:?}, energy cap {}", ms.thresholds, ms.energy_cap);
    let report = exact_validate(&g, s, k, &ms, ms.energy_cap, &caps).unwrap();
    println!("validation passed: {} ({} product states)", report.passed(), report.product_states);
    let stats = simulate(&g, &ms, &Adversary::Uniform, 10_000, 200, 7).unwrap();
    println!("violations {} of {}, start to gain {}", stats.violations, stats.trials, stats.start_to_gain);
}
