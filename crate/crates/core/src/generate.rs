//! Seeded random games for fuzzing and differential tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::game::{rat, Edge, Game, Owner, State};

#[derive(Clone, Debug, PartialEq)]
pub struct GenParams {
    pub max_states: usize,
    pub max_reward: i64,
    pub max_priority: u32,
    /// Probability of each potential edge, in `[0, 1]`.
    pub density: f64,
    pub owners: Vec<Owner>,
    /// Use exactly `max_states` states instead of drawing the count.
    pub exact_size: bool,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            max_states: 4,
            max_reward: 2,
            max_priority: 2,
            density: 0.4,
            owners: vec![Owner::Max, Owner::Min, Owner::Random],
            exact_size: false,
        }
    }
}

/// A random valid game, deterministic in `seed`. Every state gets at least
/// one edge; Random distributions use weights 1..=3.
pub fn generate(seed: u64, p: &GenParams) -> Game {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = if p.exact_size { p.max_states.max(1) } else { rng.gen_range(1..=p.max_states.max(1)) };
    let owners = if p.owners.is_empty() { vec![Owner::Max] } else { p.owners.clone() };
    let states: Vec<State> = (0..n)
        .map(|_| State { owner: owners[rng.gen_range(0..owners.len())], priority: rng.gen_range(0..=p.max_priority) })
        .collect();
    let mut edges = Vec::new();
    for s in 0..n {
        let mut targets: Vec<usize> = (0..n).filter(|_| rng.gen_bool(p.density.clamp(0.0, 1.0))).collect();
        if targets.is_empty() {
            targets.push(rng.gen_range(0..n));
        }
        let weights: Vec<i64> = targets.iter().map(|_| rng.gen_range(1..=3)).collect();
        let total: i64 = weights.iter().sum();
        for (t, w) in targets.into_iter().zip(weights) {
            let reward = rng.gen_range(-p.max_reward..=p.max_reward);
            edges.push(if states[s].owner == Owner::Random {
                Edge::random(s, t, reward, rat(w, total))
            } else {
                Edge::new(s, t, reward)
            });
        }
    }
    Game::new(format!("gen{seed}"), states, edges).expect("generated games are valid")
}
