//! Attractors, traps, strongly connected and end components, and
//! almost-sure reachability.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{set_of, Game, MdStrategy, Owner, StateId, StateSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ComponentKind {
    Scc,
    Mec,
    Bscc,
    Leaf,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentSet {
    pub kind: ComponentKind,
    pub components: Vec<StateSet>,
}

impl ComponentSet {
    pub fn union(&self) -> StateSet {
        self.components.iter().flatten().copied().collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrapSet {
    pub states: StateSet,
    pub within: StateSet,
    pub maximal: bool,
}

/// How Random states behave in a forced attractor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RandomAs {
    /// Random needs all successors in the attractor (it plays against the attracting player).
    Adversary,
    /// One successor in the attractor suffices (reaching with positive probability).
    Ally,
}

/// Attractor of `targets` for `player`, restricted to the states in `within`
/// (edges leaving `within` are ignored). Returns the attractor mask and an
/// attractor strategy for the player's states outside `targets`.
pub fn attractor_in(
    g: &Game,
    within: &[bool],
    player: Owner,
    random: RandomAs,
    targets: &[bool],
) -> (Vec<bool>, Vec<Option<usize>>) {
    let n = g.num_states();
    let pred = g.predecessors();
    let mut attr = vec![false; n];
    let mut strat = vec![None; n];
    let mut missing: Vec<usize> = (0..n)
        .map(|v| g.out(StateId(v)).iter().filter(|e| within[e.dst.0]).count())
        .collect();
    let mut queue = Vec::new();
    for v in 0..n {
        if within[v] && targets[v] {
            attr[v] = true;
            queue.push(v);
        }
    }
    while let Some(t) = queue.pop() {
        for &ei in &pred[t] {
            let u = g.edge(ei).src.0;
            if !within[u] || attr[u] {
                continue;
            }
            let existential = match g.owner(StateId(u)) {
                Owner::Random => random == RandomAs::Ally,
                o => o == player,
            };
            if existential {
                attr[u] = true;
                if g.owner(StateId(u)) == player {
                    strat[u] = Some(ei);
                }
                queue.push(u);
            } else {
                missing[u] -= 1;
                if missing[u] == 0 {
                    attr[u] = true;
                    queue.push(u);
                }
            }
        }
    }
    (attr, strat)
}

/// Classical alternating attractor over the whole game.
pub fn attractor_forced(g: &Game, player: Owner, random: RandomAs, targets: &StateSet) -> StateSet {
    let all = vec![true; g.num_states()];
    set_of(&attractor_in(g, &all, player, random, &g.mask(targets)).0)
}

/// Almost-sure reachability for Max inside `within`, treating edges that
/// leave `within` as losing. Returns the region and an MD witness.
pub fn as_reach_in(g: &Game, within: &[bool], targets: &[bool]) -> (Vec<bool>, Vec<Option<usize>>) {
    let n = g.num_states();
    let pred = g.predecessors();
    let mut region: Vec<bool> = within.to_vec();
    loop {
        // Least fixed point of positive-progress steps that never risk leaving `region`.
        let mut z = vec![false; n];
        let mut strat = vec![None; n];
        let mut missing = vec![0usize; n];
        let mut leaks = vec![false; n];
        for v in 0..n {
            if !region[v] {
                continue;
            }
            for e in g.out(StateId(v)) {
                if region[e.dst.0] {
                    missing[v] += 1;
                } else {
                    leaks[v] = true;
                }
            }
        }
        let mut queue = Vec::new();
        for v in 0..n {
            if region[v] && targets[v] {
                z[v] = true;
                queue.push(v);
            }
        }
        while let Some(t) = queue.pop() {
            for &ei in &pred[t] {
                let u = g.edge(ei).src.0;
                if !region[u] || z[u] {
                    continue;
                }
                let join = match g.owner(StateId(u)) {
                    Owner::Max => {
                        strat[u] = Some(ei);
                        true
                    }
                    Owner::Random => !leaks[u],
                    Owner::Min => {
                        missing[u] -= 1;
                        !leaks[u] && missing[u] == 0
                    }
                };
                if join {
                    z[u] = true;
                    queue.push(u);
                }
            }
        }
        if z == region {
            for v in 0..n {
                if z[v] && targets[v] {
                    strat[v] = None;
                }
            }
            return (z, strat);
        }
        region = z;
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reach {
    pub states: StateSet,
    pub witness: MdStrategy,
}

/// States from which Max reaches `targets` with probability one.
pub fn as_reach(g: &Game, targets: &StateSet) -> Reach {
    let all = vec![true; g.num_states()];
    let (z, strat) = as_reach_in(g, &all, &g.mask(targets));
    let mut witness = MdStrategy::empty(Owner::Max);
    for v in g.ids() {
        if g.owner(v) != Owner::Max || !z[v.0] {
            continue;
        }
        let e = strat[v.0].unwrap_or_else(|| {
            g.out_range(v).find(|&i| z[g.edge(i).dst.0]).unwrap_or(g.out_range(v).start)
        });
        witness.choice.insert(v, e);
    }
    Reach { states: set_of(&z), witness }
}

/// Strongly connected components of the graph induced by `within` and the
/// edges accepted by `keep_edge`. Iterative Tarjan; components are listed
/// in reverse topological order.
pub fn sccs_in(g: &Game, within: &[bool], keep_edge: &dyn Fn(usize) -> bool) -> Vec<Vec<usize>> {
    let n = g.num_states();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    let mut counter = 0;
    for root in 0..n {
        if !within[root] || index[root] != usize::MAX {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, g.out_range(StateId(root)).start)];
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut next)) = call.last_mut() {
            let end = g.out_range(StateId(v)).end;
            if *next < end {
                let ei = *next;
                *next += 1;
                let w = g.edge(ei).dst.0;
                if !within[w] || !keep_edge(ei) {
                    continue;
                }
                if index[w] == usize::MAX {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, g.out_range(StateId(w)).start));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    out.push(comp);
                }
            }
        }
    }
    out
}

/// End components inside `within`: strongly connected sets closed under
/// every non-controller state, where controller states keep at least one
/// internal edge. The result lists the maximal ones.
pub fn end_components_in(g: &Game, within: &[bool], controller: Owner) -> Vec<StateSet> {
    let n = g.num_states();
    let mut result = Vec::new();
    let mut work: Vec<Vec<bool>> = vec![within.to_vec()];
    while let Some(cand) = work.pop() {
        for comp in sccs_in(g, &cand, &|_| true) {
            let mut inside = vec![false; n];
            for &v in &comp {
                inside[v] = true;
            }
            // Peel states that cannot stay inside.
            let mut changed = false;
            loop {
                let mut removed = false;
                for &v in &comp {
                    if !inside[v] {
                        continue;
                    }
                    let s = StateId(v);
                    let ok = if g.owner(s) == controller {
                        g.successors(s).any(|t| inside[t.0])
                    } else {
                        g.successors(s).all(|t| inside[t.0])
                    };
                    if !ok {
                        inside[v] = false;
                        removed = true;
                        changed = true;
                    }
                }
                if !removed {
                    break;
                }
            }
            if changed {
                if inside.iter().any(|&b| b) {
                    work.push(inside);
                }
                continue;
            }
            let nontrivial = comp.len() > 1 || g.successors(StateId(comp[0])).any(|t| t.0 == comp[0]);
            if nontrivial {
                result.push(comp.into_iter().map(StateId).collect());
            }
        }
    }
    result.sort();
    result
}

/// Maximal end components of an MDP (Min states must be frozen).
pub fn max_end_components(mdp: &Game) -> Result<ComponentSet> {
    if let Some(s) = mdp.ids().find(|&s| mdp.owner(s) == Owner::Min && mdp.is_free(s)) {
        return Err(Error::Precondition(format!("min state {s} is not frozen")));
    }
    let all = vec![true; mdp.num_states()];
    Ok(ComponentSet { kind: ComponentKind::Mec, components: end_components_in(mdp, &all, Owner::Max) })
}

/// Bottom strongly connected components of a Markov chain.
pub fn bsccs(mc: &Game) -> Result<ComponentSet> {
    if let Some(s) = mc.ids().find(|&s| mc.is_free(s)) {
        return Err(Error::Precondition(format!("state {s} still has a free choice")));
    }
    let all = vec![true; mc.num_states()];
    Ok(ComponentSet { kind: ComponentKind::Bscc, components: bottom_sccs_in(mc, &all) })
}

/// Bottom SCCs of the chain restricted to a closed set `within`.
pub fn bottom_sccs_in(mc: &Game, within: &[bool]) -> Vec<StateSet> {
    let mut out: Vec<StateSet> = Vec::new();
    for comp in sccs_in(mc, within, &|_| true) {
        let set: BTreeSet<usize> = comp.iter().copied().collect();
        let closed = comp
            .iter()
            .all(|&v| mc.successors(StateId(v)).all(|t| !within[t.0] || set.contains(&t.0)));
        if closed {
            out.push(comp.into_iter().map(StateId).collect());
        }
    }
    out.sort();
    out
}

/// Greatest subset of `within` in which Min and Random states have all
/// successors inside; when `legal` is set, Max states also need one.
pub fn trap_mask(g: &Game, within: &[bool], legal: bool) -> Vec<bool> {
    let n = g.num_states();
    let mut inside = within.to_vec();
    let pred = g.predecessors();
    let mut count: Vec<usize> = (0..n).map(|v| g.successors(StateId(v)).filter(|t| inside[t.0]).count()).collect();
    let mut queue = Vec::new();
    for v in 0..n {
        if !inside[v] {
            continue;
        }
        let s = StateId(v);
        let bad = match g.owner(s) {
            Owner::Max => legal && count[v] == 0,
            _ => count[v] < g.out_range(s).len(),
        };
        if bad {
            inside[v] = false;
            queue.push(v);
        }
    }
    while let Some(t) = queue.pop() {
        for &ei in &pred[t] {
            let u = g.edge(ei).src.0;
            if !inside[u] {
                continue;
            }
            count[u] -= 1;
            let bad = match g.owner(StateId(u)) {
                Owner::Max => legal && count[u] == 0,
                _ => true,
            };
            if bad {
                inside[u] = false;
                queue.push(u);
            }
        }
    }
    inside
}

pub fn maximal_trap(g: &Game, within: &StateSet) -> TrapSet {
    let states = set_of(&trap_mask(g, &g.mask(within), false));
    TrapSet { states, within: within.clone(), maximal: true }
}

/// Largest subset of `within` that forms a legal subgame for `restrict`.
pub fn legal_subgame(g: &Game, within: &StateSet) -> StateSet {
    set_of(&trap_mask(g, &g.mask(within), true))
}

/// Whether the graph restricted to `within` has a cycle of negative total
/// reward (`strict`) or of non-positive total reward (`!strict`).
/// Bellman-Ford from a virtual source; rewards are scaled so that a
/// zero cycle becomes negative in the second variant.
pub fn bad_cycle_in(g: &Game, within: &[bool], strict: bool) -> bool {
    let n = g.num_states();
    let verts: Vec<usize> = (0..n).filter(|&v| within[v]).collect();
    if verts.is_empty() {
        return false;
    }
    let scale = if strict { 1 } else { verts.len() as i128 + 1 };
    let weight = |r: i64| -> i128 { if strict { r as i128 } else { r as i128 * scale - 1 } };
    let mut dist = vec![0i128; n];
    for _ in 0..verts.len() {
        let mut changed = false;
        for &v in &verts {
            for e in g.out(StateId(v)) {
                if within[e.dst.0] {
                    let d = dist[v] + weight(e.reward);
                    if d < dist[e.dst.0] {
                        dist[e.dst.0] = d;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            return false;
        }
    }
    true
}
