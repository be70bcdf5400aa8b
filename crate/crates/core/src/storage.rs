//! Storage-parity and energy-parity on two-player games through the
//! saturated-counter product.

use std::collections::BTreeMap;

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::game::{FdStrategy, Game, Owner, StateId, StateSet};
use crate::parity::{Arena, ArenaBuilder};

/// Product of a two-player game with a counter in `0..=l`; the counter
/// saturates at `l` and falling below zero leads to a losing sink.
#[derive(Clone, Debug)]
pub struct StorageProduct {
    pub l: u64,
    pub arena: Arena,
    /// Product vertex of `(state, counter)`, if built.
    index: Vec<u32>,
    /// Game edge behind every product edge (`usize::MAX` for the sink loop).
    pub edge_of: Vec<usize>,
    pub sink: usize,
    pub win: Vec<bool>,
    pub strategy: Vec<usize>,
    num_states: usize,
}

const ABSENT: u32 = u32::MAX;

/// Counter value after taking an edge with `reward` at counter `r`.
pub fn step(r: u64, reward: i64, l: u64) -> Option<u64> {
    let v = r as i128 + reward as i128;
    if v < 0 {
        None
    } else {
        Some((v as u64).min(l))
    }
}

impl StorageProduct {
    /// Builds the part of the product reachable from `starts`, or all of it
    /// when `starts` is `None`, and solves it.
    pub fn build(g: &Game, l: u64, starts: Option<&[(StateId, u64)]>, caps: &Caps) -> Result<StorageProduct> {
        if let Some(s) = g.ids().find(|&s| g.owner(s) == Owner::Random) {
            return Err(Error::Precondition(format!("state {s} is random; storage products need two players")));
        }
        let n = g.num_states();
        let width = l as usize + 1;
        let full = n.checked_mul(width).ok_or_else(|| Error::cap("storage product", u128::MAX, caps.max_product as u128))?;
        if starts.is_none() {
            caps.check_product("storage product", full + 1)?;
        }
        let mut index = vec![ABSENT; full];
        let mut order: Vec<(usize, u64)> = Vec::new();
        let push = |v: usize, r: u64, index: &mut Vec<u32>, order: &mut Vec<(usize, u64)>| -> Result<()> {
            let slot = v * width + r as usize;
            if index[slot] == ABSENT {
                index[slot] = order.len() as u32;
                order.push((v, r));
                caps.check_product("storage product", order.len() + 1)?;
            }
            Ok(())
        };
        match starts {
            None => {
                for v in 0..n {
                    for r in 0..=l {
                        push(v, r, &mut index, &mut order)?;
                    }
                }
            }
            Some(list) => {
                for &(s, r) in list {
                    push(s.0, r.min(l), &mut index, &mut order)?;
                }
                let mut i = 0;
                while i < order.len() {
                    let (v, r) = order[i];
                    for e in g.out(StateId(v)) {
                        if let Some(r2) = step(r, e.reward, l) {
                            push(e.dst.0, r2, &mut index, &mut order)?;
                        }
                    }
                    i += 1;
                }
            }
        }
        let mut b = ArenaBuilder::default();
        for &(v, _) in &order {
            let s = StateId(v);
            b.vertex(g.owner(s) == Owner::Max, g.priority(s));
        }
        let sink = b.vertex(false, 1);
        let mut edge_of = Vec::new();
        for (pv, &(v, r)) in order.iter().enumerate() {
            for ei in g.out_range(StateId(v)) {
                let e = g.edge(ei);
                let target = match step(r, e.reward, l) {
                    Some(r2) => index[e.dst.0 * width + r2 as usize] as usize,
                    None => sink,
                };
                b.edge(pv, target);
                edge_of.push(ei);
            }
        }
        b.edge(sink, sink);
        edge_of.push(usize::MAX);
        let (arena, slot) = b.build();
        let mut remapped = vec![0; edge_of.len()];
        for (i, &ei) in edge_of.iter().enumerate() {
            remapped[slot[i]] = ei;
        }
        let (win, strategy) = arena.zielonka();
        Ok(StorageProduct { l, arena, index, edge_of: remapped, sink, win, strategy, num_states: n })
    }

    pub fn vertex(&self, s: StateId, r: u64) -> Option<usize> {
        let v = self.index[s.0 * (self.l as usize + 1) + r.min(self.l) as usize];
        (v != ABSENT).then_some(v as usize)
    }

    pub fn wins(&self, s: StateId, r: u64) -> bool {
        self.vertex(s, r).is_some_and(|v| self.win[v])
    }

    /// Game edge chosen by the product strategy at `(s, r)`.
    pub fn choice(&self, s: StateId, r: u64) -> Option<usize> {
        self.vertex(s, r).map(|v| self.edge_of[self.strategy[v]])
    }

    /// Least winning counter value per state (requires the full product).
    pub fn least_credit(&self, s: StateId) -> Option<u64> {
        (0..=self.l).find(|&r| self.wins(s, r))
    }

    /// The product strategy read as a finite-memory strategy on the game,
    /// with memory = counter value.
    pub fn fd_strategy(&self, g: &Game, initial: u64) -> FdStrategy {
        let width = self.l as usize + 1;
        let n = self.num_states;
        let m = g.num_edges();
        let mut update = vec![0; width * m];
        let mut choice = vec![None; width * n];
        for r in 0..=self.l {
            for (ei, e) in g.edges().iter().enumerate() {
                update[r as usize * m + ei] = step(r, e.reward, self.l).unwrap_or(0) as usize;
            }
            for s in g.ids() {
                if g.owner(s) == Owner::Max {
                    let c = self.choice(s, r).unwrap_or(g.out_range(s).start);
                    choice[r as usize * n + s.0] = Some(c);
                }
            }
        }
        FdStrategy {
            owner: Owner::Max,
            memory: width,
            initial: initial.min(self.l) as usize,
            num_states: n,
            num_edges: m,
            update,
            choice,
        }
    }
}

#[derive(Clone, Debug)]
pub struct StorageOutcome {
    pub win: StateSet,
    pub strategy: FdStrategy,
}

/// Sure ES(k,l) ∩ Parity on a two-player game.
pub fn storage_parity(g: &Game, k: u64, l: u64, caps: &Caps) -> Result<StorageOutcome> {
    let starts: Vec<(StateId, u64)> = g.ids().map(|s| (s, k.min(l))).collect();
    let prod = StorageProduct::build(g, l, Some(&starts), caps)?;
    let win = g.ids().filter(|&s| prod.wins(s, k)).collect();
    Ok(StorageOutcome { win, strategy: prod.fd_strategy(g, k) })
}

/// The credit bound K: states × largest priority × largest absolute reward,
/// each factor clamped to at least one.
pub fn credit_bound(g: &Game) -> u64 {
    let n = g.num_states().max(1) as u64;
    let c = (g.max_priority() as u64).max(1);
    let r = g.max_abs_reward().max(1);
    n * c * r
}

/// Sure EN(k) ∩ Parity on a two-player game, via storage with l = K.
pub fn energy_parity(g: &Game, k: u64, caps: &Caps) -> Result<StorageOutcome> {
    let big_k = credit_bound(g);
    storage_parity(g, k.min(big_k), big_k, caps)
}

/// Least winning credit per state; `None` marks unwinnable states.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CreditTable(pub BTreeMap<StateId, Option<u64>>);

impl CreditTable {
    pub fn get(&self, s: StateId) -> Option<u64> {
        self.0.get(&s).copied().flatten()
    }
}

pub fn minimal_credit(g: &Game, caps: &Caps) -> Result<CreditTable> {
    let big_k = credit_bound(g);
    let prod = StorageProduct::build(g, big_k, None, caps)?;
    Ok(CreditTable(g.ids().map(|s| (s, prod.least_credit(s))).collect()))
}
