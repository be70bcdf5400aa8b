//! Two-player parity arenas and Zielonka's recursive algorithm (min-even).

use crate::error::{Error, Result};
use crate::game::{Game, Owner, StateId};

/// Compact two-player arena: vertex `v` belongs to Max iff `max[v]`.
#[derive(Clone, Debug, Default)]
pub struct Arena {
    pub max: Vec<bool>,
    pub prio: Vec<u32>,
    first: Vec<usize>,
    dst: Vec<usize>,
    pfirst: Vec<usize>,
    psrc: Vec<usize>,
}

/// Incremental builder; vertices must be added in order and edges grouped by source.
#[derive(Default)]
pub struct ArenaBuilder {
    max: Vec<bool>,
    prio: Vec<u32>,
    edges: Vec<(usize, usize)>,
}

impl ArenaBuilder {
    pub fn vertex(&mut self, max: bool, prio: u32) -> usize {
        self.max.push(max);
        self.prio.push(prio);
        self.max.len() - 1
    }

    pub fn edge(&mut self, src: usize, dst: usize) {
        self.edges.push((src, dst));
    }

    pub fn len(&self) -> usize {
        self.max.len()
    }

    pub fn is_empty(&self) -> bool {
        self.max.is_empty()
    }

    /// Finalises the arena; returns it with the permutation mapping insertion
    /// order of edges to arena edge ids.
    pub fn build(mut self) -> (Arena, Vec<usize>) {
        let n = self.max.len();
        let mut order: Vec<usize> = (0..self.edges.len()).collect();
        order.sort_by_key(|&i| self.edges[i].0);
        let mut slot = vec![0; self.edges.len()];
        for (pos, &i) in order.iter().enumerate() {
            slot[i] = pos;
        }
        let edges: Vec<(usize, usize)> = order.iter().map(|&i| self.edges[i]).collect();
        self.edges = edges;
        let mut first = vec![0; n + 1];
        let mut pfirst = vec![0; n + 1];
        for &(s, d) in &self.edges {
            first[s + 1] += 1;
            pfirst[d + 1] += 1;
        }
        for i in 0..n {
            first[i + 1] += first[i];
            pfirst[i + 1] += pfirst[i];
        }
        let dst = self.edges.iter().map(|e| e.1).collect();
        let mut fill = pfirst.clone();
        let mut psrc = vec![0; self.edges.len()];
        for (i, &(_, d)) in self.edges.iter().enumerate() {
            psrc[fill[d]] = i;
            fill[d] += 1;
        }
        (Arena { max: self.max, prio: self.prio, first, dst, pfirst, psrc }, slot)
    }
}

impl Arena {
    /// Arena of a game without Random states; edge ids coincide with the game's.
    pub fn from_game(g: &Game) -> Result<Arena> {
        let mut b = ArenaBuilder::default();
        for s in g.ids() {
            let owner = g.owner(s);
            if owner == Owner::Random {
                return Err(Error::Precondition(format!("state {s} is random; a two-player game is required")));
            }
            b.vertex(owner == Owner::Max, g.priority(s));
        }
        for e in g.edges() {
            b.edge(e.src.0, e.dst.0);
        }
        Ok(b.build().0)
    }

    pub fn len(&self) -> usize {
        self.max.len()
    }

    pub fn is_empty(&self) -> bool {
        self.max.is_empty()
    }

    pub fn num_edges(&self) -> usize {
        self.dst.len()
    }

    pub fn out(&self, v: usize) -> std::ops::Range<usize> {
        self.first[v]..self.first[v + 1]
    }

    pub fn target(&self, e: usize) -> usize {
        self.dst[e]
    }

    /// Edge ids entering `v`.
    pub fn incoming(&self, v: usize) -> &[usize] {
        &self.psrc[self.pfirst[v]..self.pfirst[v + 1]]
    }

    pub fn source(&self, e: usize) -> usize {
        // edges are grouped by source
        self.first.partition_point(|&f| f <= e) - 1
    }

    /// Attractor of `targets` for the player `max_player` inside `sub`.
    fn attractor(&self, sub: &[bool], max_player: bool, targets: &[usize], strat: &mut [usize]) -> Vec<bool> {
        let n = self.len();
        let mut attr = vec![false; n];
        let mut missing: Vec<u32> = vec![0; n];
        let mut queue = Vec::with_capacity(targets.len());
        for &t in targets {
            if !attr[t] {
                attr[t] = true;
                queue.push(t);
            }
        }
        while let Some(t) = queue.pop() {
            for &e in self.incoming(t) {
                let u = self.source(e);
                if !sub[u] || attr[u] {
                    continue;
                }
                if self.max[u] == max_player {
                    attr[u] = true;
                    strat[u] = e;
                    queue.push(u);
                } else {
                    if missing[u] == 0 {
                        missing[u] = self.out(u).filter(|&f| sub[self.dst[f]]).count() as u32 + 1;
                    }
                    missing[u] -= 1;
                    if missing[u] == 1 {
                        attr[u] = true;
                        queue.push(u);
                    }
                }
            }
        }
        attr
    }

    fn any_edge_in(&self, v: usize, sub: &[bool]) -> usize {
        self.out(v).find(|&e| sub[self.dst[e]]).expect("subgame vertex has a successor")
    }

    fn solve(&self, sub: &mut Vec<bool>, states: Vec<usize>, strat: &mut [usize]) -> (Vec<usize>, Vec<usize>) {
        if states.is_empty() {
            return (Vec::new(), Vec::new());
        }
        let p = states.iter().map(|&v| self.prio[v]).min().unwrap();
        let alpha_max = p % 2 == 0;
        let top: Vec<usize> = states.iter().copied().filter(|&v| self.prio[v] == p).collect();
        let attr = self.attractor(sub, alpha_max, &top, strat);
        for &v in &top {
            if self.max[v] == alpha_max {
                strat[v] = self.any_edge_in(v, sub);
            }
        }
        let rest: Vec<usize> = states.iter().copied().filter(|&v| !attr[v]).collect();
        for &v in &states {
            if attr[v] {
                sub[v] = false;
            }
        }
        let (w_alpha, w_opp) = {
            let (wm, wn) = self.solve(sub, rest, strat);
            if alpha_max { (wm, wn) } else { (wn, wm) }
        };
        for &v in &states {
            sub[v] = true;
        }
        if w_opp.is_empty() {
            // alpha wins everywhere; opponent vertices still get some legal move
            for &v in &states {
                if self.max[v] != alpha_max && attr[v] {
                    strat[v] = self.any_edge_in(v, sub);
                }
            }
            let _ = w_alpha;
            return if alpha_max { (states, Vec::new()) } else { (Vec::new(), states) };
        }
        let battr = self.attractor(sub, !alpha_max, &w_opp, strat);
        for &v in &states {
            if battr[v] && self.max[v] == alpha_max {
                strat[v] = self.any_edge_in(v, sub);
            }
        }
        let rest: Vec<usize> = states.iter().copied().filter(|&v| !battr[v]).collect();
        for &v in &states {
            if battr[v] {
                sub[v] = false;
            }
        }
        let (wm, wn) = self.solve(sub, rest, strat);
        for &v in &states {
            sub[v] = true;
        }
        let mut opp: Vec<usize> = states.iter().copied().filter(|&v| battr[v]).collect();
        if alpha_max {
            opp.extend(wn);
            (wm, opp)
        } else {
            opp.extend(wm);
            (opp, wn)
        }
    }

    /// Solves the arena. Returns the Max winning mask and one edge per vertex;
    /// the edge is winning for the vertex owner on the owner's region.
    pub fn zielonka(&self) -> (Vec<bool>, Vec<usize>) {
        let n = self.len();
        let mut strat = vec![usize::MAX; n];
        let mut sub = vec![true; n];
        let (wm, _) = self.solve(&mut sub, (0..n).collect(), &mut strat);
        let mut win = vec![false; n];
        for v in wm {
            win[v] = true;
        }
        for v in 0..n {
            if strat[v] == usize::MAX {
                strat[v] = self.first[v];
            }
        }
        (win, strat)
    }
}

/// Result of solving a two-player game given as a [`Game`].
#[derive(Clone, Debug)]
pub struct ParitySolution {
    pub win_max: Vec<bool>,
    /// Chosen edge (game edge index) for every state.
    pub strategy: Vec<usize>,
}

pub fn zielonka(g: &Game) -> Result<ParitySolution> {
    let arena = Arena::from_game(g)?;
    let (win_max, strategy) = arena.zielonka();
    Ok(ParitySolution { win_max, strategy })
}

impl ParitySolution {
    pub fn max_strategy(&self, g: &Game) -> crate::game::MdStrategy {
        self.player_strategy(g, Owner::Max)
    }

    pub fn min_strategy(&self, g: &Game) -> crate::game::MdStrategy {
        self.player_strategy(g, Owner::Min)
    }

    fn player_strategy(&self, g: &Game, owner: Owner) -> crate::game::MdStrategy {
        crate::game::MdStrategy {
            owner,
            choice: g.ids().filter(|&s| g.owner(s) == owner).map(|s| (s, self.strategy[s.0])).collect(),
        }
    }

    pub fn winning(&self, s: StateId) -> bool {
        self.win_max[s.0]
    }
}
