//! Brute-force ground truth at desk scale: MD-strategy enumeration,
//! Markov chain analysis and capped-energy products.

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::game::{fix_strategy, set_of, Edge, Game, MdStrategy, Owner, State, StateId, StateSet};
use crate::graph::{self, RandomAs};

/// Number of MD strategies of `owner` that keep inside `region`
/// (states outside `region` are ignored).
pub fn md_count_in(g: &Game, owner: Owner, region: &StateSet) -> u128 {
    region
        .iter()
        .filter(|&&s| g.owner(s) == owner)
        .map(|&s| g.out(s).iter().filter(|e| region.contains(&e.dst)).count() as u128)
        .fold(1u128, |acc, d| acc.saturating_mul(d))
}

pub fn md_count(g: &Game, owner: Owner) -> u128 {
    md_count_in(g, owner, &g.all_states())
}

/// All MD strategies of `owner` on `region` whose choices stay in
/// `region`, in lexicographic order of edge indices.
pub fn enumerate_md_in(g: &Game, owner: Owner, region: &StateSet, caps: &Caps) -> Result<Vec<MdStrategy>> {
    caps.check_strategies(md_count_in(g, owner, region))?;
    let slots: Vec<(StateId, Vec<usize>)> = region
        .iter()
        .filter(|&&s| g.owner(s) == owner)
        .map(|&s| (s, g.out_range(s).filter(|&e| region.contains(&g.edge(e).dst)).collect()))
        .collect();
    if slots.iter().any(|(_, c)| c.is_empty()) {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut pick = vec![0usize; slots.len()];
    loop {
        let mut st = MdStrategy::empty(owner);
        for (i, (s, choices)) in slots.iter().enumerate() {
            st.choice.insert(*s, choices[pick[i]]);
        }
        out.push(st);
        // odometer, last slot fastest
        let mut i = slots.len();
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            pick[i] += 1;
            if pick[i] < slots[i].1.len() {
                break;
            }
            pick[i] = 0;
        }
    }
}

/// All MD strategies of `owner`, in deterministic order.
pub fn enumerate_md(g: &Game, owner: Owner, caps: &Caps) -> Result<Vec<MdStrategy>> {
    enumerate_md_in(g, owner, &g.all_states(), caps)
}

/// States of an MDP (Max frozen) from which Min makes Parity fail with
/// positive probability: the positive attractor of the end components
/// that Min can stay in forever with an odd minimal priority.
pub fn min_positive_region(mdp: &Game) -> StateSet {
    let n = mdp.num_states();
    let mut odd = vec![false; n];
    let top = mdp.max_priority();
    for d in (1..=top).step_by(2) {
        let within: Vec<bool> = (0..n).map(|v| mdp.priority(StateId(v)) >= d).collect();
        for ec in graph::end_components_in(mdp, &within, Owner::Min) {
            if ec.iter().any(|&s| mdp.priority(s) == d) {
                for s in ec {
                    odd[s.0] = true;
                }
            }
        }
    }
    let all = vec![true; n];
    set_of(&graph::attractor_in(mdp, &all, Owner::Min, RandomAs::Ally, &odd).0)
}

/// Almost-sure Parity for Max by enumerating MD Max strategies (which
/// suffice) and solving each induced MDP for Min.
pub fn md_as_parity(g: &Game, caps: &Caps) -> Result<StateSet> {
    let mut win = StateSet::new();
    for sigma in enumerate_md(g, Owner::Max, caps)? {
        let mdp = fix_strategy(g, &sigma)?;
        let lose = min_positive_region(&mdp);
        win.extend(g.ids().filter(|s| !lose.contains(s)));
    }
    Ok(win)
}

/// Verdict of a Markov chain from one state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChainVerdict {
    pub sure_energy: bool,
    pub as_parity: bool,
}

/// In a Markov chain every finite path has positive probability, so
/// almost-sure EN(k) needs every reachable path to stay at or above -k.
pub fn chain_analyze(mc: &Game, s: StateId, k: u64) -> Result<ChainVerdict> {
    if let Some(v) = mc.ids().find(|&v| mc.is_free(v)) {
        return Err(Error::Precondition(format!("state {v} still has a free choice")));
    }
    let n = mc.num_states();
    let mut reach = vec![false; n];
    reach[s.0] = true;
    let mut stack = vec![s];
    while let Some(v) = stack.pop() {
        for t in mc.successors(v) {
            if !reach[t.0] {
                reach[t.0] = true;
                stack.push(t);
            }
        }
    }
    let sure_energy = if graph::bad_cycle_in(mc, &reach, true) {
        false
    } else {
        // no negative cycle: minimal path cost by Bellman-Ford from s
        let mut dist: Vec<Option<i128>> = vec![None; n];
        dist[s.0] = Some(0);
        for _ in 0..n {
            for v in 0..n {
                let Some(d) = dist[v] else { continue };
                for e in mc.out(StateId(v)) {
                    let nd = d + e.reward as i128;
                    if dist[e.dst.0].is_none_or(|x| nd < x) {
                        dist[e.dst.0] = Some(nd);
                    }
                }
            }
        }
        dist.iter().flatten().all(|&d| d + k as i128 >= 0)
    };
    let as_parity = graph::bottom_sccs_in(mc, &reach)
        .iter()
        .all(|c| c.iter().map(|&v| mc.priority(v)).min().unwrap() % 2 == 0);
    Ok(ChainVerdict { sure_energy, as_parity })
}

/// The game with an energy component in `0..=cap` (saturating above) and
/// an absorbing losing state for energy below zero.
#[derive(Clone, Debug)]
pub struct CappedProduct {
    pub cap: u64,
    pub game: Game,
    pub dead: StateId,
    base_states: usize,
}

impl CappedProduct {
    pub fn build(g: &Game, cap: u64, caps: &Caps) -> Result<CappedProduct> {
        let width = cap as usize + 1;
        let n = g.num_states();
        caps.check_product("capped product", n * width + 1)?;
        let mut states = Vec::with_capacity(n * width + 1);
        for s in g.ids() {
            for _ in 0..width {
                states.push(g.state(s));
            }
        }
        let dead = n * width;
        states.push(State { owner: Owner::Max, priority: 1 });
        let mut edges = Vec::new();
        for s in g.ids() {
            for e in 0..=cap {
                let src = s.0 * width + e as usize;
                for ed in g.out(s) {
                    let v = e as i128 + ed.reward as i128;
                    let dst = if v < 0 { dead } else { ed.dst.0 * width + (v as u64).min(cap) as usize };
                    edges.push(Edge { src: StateId(src), dst: StateId(dst), reward: 0, prob: ed.prob.clone() });
                }
            }
        }
        edges.push(Edge::new(dead, dead, 0));
        // parallel edges (e.g. several ways into the dead state) merge
        edges.sort();
        let mut merged: Vec<Edge> = Vec::with_capacity(edges.len());
        for e in edges {
            if let Some(last) = merged.last_mut() {
                if last.src == e.src && last.dst == e.dst {
                    if let (Some(a), Some(b)) = (last.prob.as_mut(), e.prob.as_ref()) {
                        *a += b;
                    }
                    continue;
                }
            }
            merged.push(e);
        }
        let game = Game::new(format!("{}/capped{cap}", g.name()), states, merged)?;
        Ok(CappedProduct { cap, game, dead: StateId(dead), base_states: n })
    }

    pub fn vertex(&self, s: StateId, e: u64) -> StateId {
        StateId(s.0 * (self.cap as usize + 1) + e.min(self.cap) as usize)
    }

    /// Base state and energy of a product state (`None` for the dead state).
    pub fn decode(&self, v: StateId) -> Option<(StateId, u64)> {
        if v == self.dead {
            return None;
        }
        let w = self.cap as usize + 1;
        Some((StateId(v.0 / w), (v.0 % w) as u64))
    }

    pub fn base_states(&self) -> usize {
        self.base_states
    }
}

/// Almost-sure Parity on the capped product, solved once for every
/// (state, energy) pair by negotiation and Zielonka.
#[derive(Clone, Debug)]
pub struct CappedSolution {
    pub product: CappedProduct,
    pub win: StateSet,
    /// Zielonka strategy on the negotiated product, per product state.
    pub strategy: crate::parity::ParitySolution,
    pub negotiated: crate::gadgets::Transform,
}

impl CappedSolution {
    pub fn solve(g: &Game, cap: u64, caps: &Caps) -> Result<CappedSolution> {
        let product = CappedProduct::build(g, cap, caps)?;
        let negotiated = crate::gadgets::negotiation(&product.game)?;
        caps.check_product("negotiated capped product", negotiated.output.num_states())?;
        let strategy = crate::parity::zielonka(&negotiated.output)?;
        let win = product.game.ids().filter(|&v| strategy.winning(v)).collect();
        Ok(CappedSolution { product, win, strategy, negotiated })
    }

    pub fn wins(&self, s: StateId, k: u64) -> bool {
        self.win.contains(&self.product.vertex(s, k))
    }

    pub fn least_credit(&self, s: StateId) -> Option<u64> {
        (0..=self.product.cap).find(|&k| self.wins(s, k))
    }

    /// States winning with some credit up to the cap.
    pub fn union(&self) -> StateSet {
        (0..self.product.base_states()).map(StateId).filter(|&s| self.least_credit(s).is_some()).collect()
    }
}

/// Almost-sure EN(k) ∩ Parity from `s` in the capped product.
pub fn capped_as_energy_parity(g: &Game, s: StateId, k: u64, cap: u64, caps: &Caps) -> Result<bool> {
    if k > cap {
        return Err(Error::Precondition(format!("credit {k} exceeds the cap {cap}")));
    }
    Ok(CappedSolution::solve(g, cap, caps)?.wins(s, k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{Edge, State};

    fn st(owner: Owner) -> State {
        State { owner, priority: 0 }
    }

    #[test]
    fn enumeration_counts() {
        let g = Game::new(
            "",
            vec![st(Owner::Max), st(Owner::Min)],
            vec![Edge::new(0, 0, 0), Edge::new(0, 1, 0), Edge::new(1, 1, 0)],
        )
        .unwrap();
        assert_eq!(enumerate_md(&g, Owner::Max, &Caps::default()).unwrap().len(), 2);
        let min = enumerate_md(&g, Owner::Min, &Caps::default()).unwrap();
        assert_eq!(min.len(), 1);
        let none = Game::new("", vec![st(Owner::Max)], vec![Edge::new(0, 0, 0)]).unwrap();
        let empty = enumerate_md(&none, Owner::Min, &Caps::default()).unwrap();
        assert_eq!(empty, vec![MdStrategy::empty(Owner::Min)]);

        let mut edges = Vec::new();
        for s in 0..3 {
            edges.push(Edge::new(s, s, 0));
            edges.push(Edge::new(s, (s + 1) % 3, 0));
        }
        let g = Game::new("", vec![st(Owner::Min); 3], edges).unwrap();
        assert_eq!(enumerate_md(&g, Owner::Min, &Caps::default()).unwrap().len(), 8);
        let tight = Caps { max_strategies: 4, ..Caps::default() };
        assert!(enumerate_md(&g, Owner::Min, &tight).is_err());
    }

    fn loop_game(reward: i64, priority: u32) -> Game {
        Game::new("", vec![State { owner: Owner::Max, priority }], vec![Edge::new(0, 0, reward)]).unwrap()
    }

    #[test]
    fn chain_verdicts() {
        let v = chain_analyze(&loop_game(1, 0), StateId(0), 0).unwrap();
        assert_eq!(v, ChainVerdict { sure_energy: true, as_parity: true });
        let v = chain_analyze(&loop_game(-1, 0), StateId(0), 5).unwrap();
        assert!(!v.sure_energy);
        let v = chain_analyze(&loop_game(0, 1), StateId(0), 0).unwrap();
        assert!(v.sure_energy && !v.as_parity);
    }

    #[test]
    fn capped_examples() {
        let caps = Caps::default();
        assert!(capped_as_energy_parity(&loop_game(1, 0), StateId(0), 0, 1, &caps).unwrap());
        for (k, b) in [(0, 0), (3, 5), (9, 9)] {
            assert!(!capped_as_energy_parity(&loop_game(-1, 0), StateId(0), k, b, &caps).unwrap());
        }
        assert!(capped_as_energy_parity(&loop_game(1, 0), StateId(0), 2, 1, &caps).is_err());
    }

    #[test]
    fn negotiation_matches_enumeration() {
        use crate::generate::{generate, GenParams};
        let caps = Caps::default();
        for seed in 0..600 {
            let top = if seed < 400 { 2 } else { 4 };
            let params = GenParams { max_states: 5, max_priority: top, density: 0.45, ..GenParams::default() };
            let g = generate(seed, &params);
            let expect = md_as_parity(&g, &caps).unwrap();
            let t = crate::gadgets::negotiation(&g).unwrap();
            let sol = crate::parity::zielonka(&t.output).unwrap();
            let got: StateSet = g.ids().filter(|&s| sol.winning(s)).collect();
            assert_eq!(got, expect, "seed {seed}: {}", crate::format::to_text(&g));
        }
    }
}
