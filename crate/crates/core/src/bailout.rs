//! Almost-sure k-Bailout through energy trade, negotiation and a
//! storage-parity product with the bounds K and L.

use serde::Serialize;

use crate::caps::Caps;
use crate::error::Result;
use crate::gadgets::{energy_trade, negotiation, Transform};
use crate::game::{Game, StateId, StateSet};
use crate::storage::{credit_bound, storage_parity, StorageOutcome, StorageProduct};

/// Saturation bounds of a game: `l` for storage, `k` for credit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Bounds {
    pub l: u64,
    pub k: u64,
    /// Largest absolute reward (at least 1).
    pub r: u64,
    /// Largest priority (at least 1).
    pub c: u64,
    pub n_v: u64,
}

/// L = nV·R·c + 1, with R and c clamped to at least 1.
pub fn storage_bound(g: &Game) -> u64 {
    let n = g.num_states() as u64;
    let r = g.max_abs_reward().max(1);
    let c = (g.max_priority() as u64).max(1);
    n * r * c + 1
}

/// The pipeline G → G′ → G″ behind the Bailout solver.
#[derive(Clone, Debug)]
pub struct Pipeline {
    pub g_prime: Transform,
    pub g_doubleprime: Transform,
}

impl Pipeline {
    pub fn build(g: &Game) -> Result<Pipeline> {
        let g_prime = energy_trade(g)?;
        let g_doubleprime = negotiation(&g_prime.output)?;
        Ok(Pipeline { g_prime, g_doubleprime })
    }

    pub fn game(&self) -> &Game {
        &self.g_doubleprime.output
    }
}

pub fn compute_bounds(g: &Game) -> Result<Bounds> {
    let p = Pipeline::build(g)?;
    Ok(bounds_with(g, &p))
}

fn bounds_with(g: &Game, p: &Pipeline) -> Bounds {
    Bounds {
        l: storage_bound(g),
        k: credit_bound(p.game()),
        r: g.max_abs_reward().max(1),
        c: (g.max_priority() as u64).max(1),
        n_v: g.num_states() as u64,
    }
}

/// Result of an almost-sure k-Bailout solve.
#[derive(Clone, Debug)]
pub struct BailoutSolution {
    pub win: StateSet,
    pub bounds: Bounds,
    pub pipeline: Pipeline,
    /// Storage-parity outcome on G″ (its strategy lives on G″).
    pub storage: StorageOutcome,
    pub k: u64,
}

/// States of `g` winning a.s. k-Bailout: those winning ES(k, L) ∩ Parity
/// surely in G″. `k` is clamped to K.
pub fn as_k_bailout(g: &Game, k: u64, caps: &Caps) -> Result<BailoutSolution> {
    let pipeline = Pipeline::build(g)?;
    let bounds = bounds_with(g, &pipeline);
    let l = caps.l_override.unwrap_or(bounds.l);
    let k = k.min(bounds.k);
    let storage = storage_parity(pipeline.game(), k, l, caps)?;
    let win = g.ids().filter(|s| storage.win.contains(s)).collect();
    Ok(BailoutSolution { win, bounds, pipeline, storage, k })
}

/// States winning a.s. k-Bailout for some k (k = K suffices).
pub fn as_exists_bailout(g: &Game, caps: &Caps) -> Result<StateSet> {
    Ok(as_k_bailout(g, u64::MAX, caps)?.win)
}

/// States of `g` winning a.s. ES(k, k) ∩ Parity for some k, through the
/// negotiation gadget and storage bound L of `g`.
pub fn storage_union(g: &Game, caps: &Caps) -> Result<StateSet> {
    let t = negotiation(g)?;
    let l = caps.l_override.unwrap_or_else(|| storage_bound(g));
    let out = storage_parity(&t.output, l, l, caps)?;
    Ok(g.ids().filter(|s| out.win.contains(s)).collect())
}

/// The full storage product behind [`storage_union`], kept for strategy
/// and credit queries.
#[derive(Clone, Debug)]
pub struct StorageUnion {
    pub win: StateSet,
    pub negotiated: Transform,
    pub product: StorageProduct,
    pub l: u64,
}

impl StorageUnion {
    pub fn solve(g: &Game, caps: &Caps) -> Result<StorageUnion> {
        let negotiated = negotiation(g)?;
        let l = caps.l_override.unwrap_or_else(|| storage_bound(g));
        let product = StorageProduct::build(&negotiated.output, l, None, caps)?;
        let win = g.ids().filter(|&s| product.wins(s, l)).collect();
        Ok(StorageUnion { win, negotiated, product, l })
    }

    /// Least storage credit of a state of the input game.
    pub fn least_credit(&self, s: StateId) -> Option<u64> {
        self.product.least_credit(s)
    }

    /// Edge of the input game chosen at a Max state `s` with counter `r`.
    pub fn choice(&self, s: StateId, r: u64) -> Option<usize> {
        let e = self.product.choice(s, r)?;
        self.negotiated.edge_origin[e]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{rat, Edge, Owner, State};

    fn st(owner: Owner, priority: u32) -> State {
        State { owner, priority }
    }

    #[test]
    fn storage_bound_formula() {
        let mut edges = vec![Edge::new(0, 1, 3), Edge::new(1, 2, -1), Edge::new(2, 3, 0), Edge::new(3, 0, 1)];
        edges.push(Edge::new(3, 3, -2));
        let g = Game::new(
            "",
            vec![st(Owner::Max, 0), st(Owner::Min, 2), st(Owner::Max, 1), st(Owner::Max, 0)],
            edges,
        )
        .unwrap();
        let b = compute_bounds(&g).unwrap();
        assert_eq!((b.n_v, b.r, b.c, b.l), (4, 3, 2, 25));
    }

    #[test]
    fn clamps() {
        let g = Game::new("", vec![st(Owner::Max, 0); 2], vec![Edge::new(0, 1, 0), Edge::new(1, 0, 0)]).unwrap();
        let b = compute_bounds(&g).unwrap();
        assert_eq!((b.r, b.c, b.l), (1, 1, 3));
    }

    #[test]
    fn coin_into_odd_trap_loses() {
        let g = Game::new(
            "",
            vec![st(Owner::Random, 0), st(Owner::Max, 0), st(Owner::Max, 1)],
            vec![
                Edge::random(0, 1, 0, rat(1, 2)),
                Edge::random(0, 2, 0, rat(1, 2)),
                Edge::new(1, 1, 1),
                Edge::new(2, 2, -1),
            ],
        )
        .unwrap();
        let caps = Caps::default();
        for k in 0..4 {
            let win = as_k_bailout(&g, k, &caps).unwrap().win;
            assert!(!win.contains(&StateId(0)));
            assert!(win.contains(&StateId(1)));
        }
    }

    #[test]
    fn saturates_at_k() {
        let g = Game::new(
            "",
            vec![st(Owner::Max, 0), st(Owner::Max, 0)],
            vec![Edge::new(0, 1, -2), Edge::new(1, 1, 0)],
        )
        .unwrap();
        let caps = Caps::default();
        let k = compute_bounds(&g).unwrap().k;
        assert_eq!(as_exists_bailout(&g, &caps).unwrap(), as_k_bailout(&g, k + 7, &caps).unwrap().win);
        assert!(!as_k_bailout(&g, 1, &caps).unwrap().win.contains(&StateId(0)));
        assert!(as_k_bailout(&g, 2, &caps).unwrap().win.contains(&StateId(0)));
    }
}
