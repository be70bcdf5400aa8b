#![allow(dead_code)]

use std::collections::BTreeMap;

use enpar::game::{Edge, Game, MdStrategy, Owner, State, StateId};
use enpar::generate::{generate, GenParams};
use enpar::lasso::LassoRun;
use proptest::prelude::*;

pub fn small(max_states: usize) -> GenParams {
    GenParams { max_states, ..GenParams::default() }
}

pub fn two_player(max_states: usize) -> GenParams {
    GenParams { max_states, owners: vec![Owner::Max, Owner::Min], ..GenParams::default() }
}

pub fn chains(max_states: usize) -> GenParams {
    GenParams { max_states, owners: vec![Owner::Random], ..GenParams::default() }
}

/// The seeded corpus: `n` games with at most four states, |reward| ≤ 2 and
/// priorities ≤ 2.
pub fn corpus(n: u64) -> Vec<Game> {
    (0..n).map(|seed| generate(seed, &small(4))).collect()
}

pub fn games(p: GenParams) -> impl Strategy<Value = Game> {
    any::<u64>().prop_map(move |seed| generate(seed, &p))
}

/// A single-owner path game `0 → 1 → … → n-1 → first` with the lasso run
/// that follows it. Edge `i` leaves state `i`.
pub fn lassos(max_edges: usize, max_reward: i64) -> impl Strategy<Value = (Game, LassoRun)> {
    (1..=max_edges)
        .prop_flat_map(move |n| (0..n, prop::collection::vec((-max_reward..=max_reward, 0u32..=3), n)))
        .prop_map(|(first, steps)| lasso_game(first, &steps))
}

pub fn lasso_game(first: usize, steps: &[(i64, u32)]) -> (Game, LassoRun) {
    let n = steps.len();
    let states = steps.iter().map(|&(_, p)| State { owner: Owner::Max, priority: p }).collect();
    let edges = (0..n).map(|i| Edge::new(i, if i + 1 < n { i + 1 } else { first }, steps[i].0)).collect();
    let g = Game::new("lasso", states, edges).unwrap();
    (g, LassoRun { prefix: (0..first).collect(), cycle: (first..n).collect() })
}

/// The unique run of a game without choices from `s`, cut into a lasso.
pub fn follow(mc: &Game, s: StateId) -> LassoRun {
    let mut seen = BTreeMap::new();
    let mut path = Vec::new();
    let mut cur = s;
    loop {
        if let Some(&i) = seen.get(&cur) {
            return LassoRun { prefix: path[..i].to_vec(), cycle: path[i..].to_vec() };
        }
        seen.insert(cur, path.len());
        let e = mc.out_range(cur).start;
        path.push(e);
        cur = mc.edge(e).dst;
    }
}

/// The Markov chain left after fixing both players.
pub fn play(g: &Game, sigma: &MdStrategy, tau: &MdStrategy) -> Game {
    let mut edges = Vec::new();
    for s in g.ids() {
        match g.owner(s) {
            Owner::Max => edges.push(g.edge(sigma.choice[&s]).clone()),
            Owner::Min => edges.push(g.edge(tau.choice[&s]).clone()),
            Owner::Random => edges.extend(g.out(s).iter().cloned()),
        }
    }
    Game::new(g.name(), g.states().to_vec(), edges).unwrap()
}
