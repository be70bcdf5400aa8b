//! Game arena: states, edges, strategies and structural operations on them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::Range;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Rational = num_rational::BigRational;

/// Dense, 0-based state index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateId(pub usize);

impl StateId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub type StateSet = BTreeSet<StateId>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Owner {
    #[serde(rename = "max")]
    Max,
    #[serde(rename = "min")]
    Min,
    #[serde(rename = "ran")]
    Random,
}

impl Owner {
    pub fn keyword(self) -> &'static str {
        match self {
            Owner::Max => "max",
            Owner::Min => "min",
            Owner::Random => "ran",
        }
    }

    /// The other player; Random has no opponent and maps to itself.
    pub fn opponent(self) -> Owner {
        match self {
            Owner::Max => Owner::Min,
            Owner::Min => Owner::Max,
            Owner::Random => Owner::Random,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct State {
    pub owner: Owner,
    pub priority: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub src: StateId,
    pub dst: StateId,
    pub reward: i64,
    pub prob: Option<Rational>,
}

impl Edge {
    pub fn new(src: usize, dst: usize, reward: i64) -> Edge {
        Edge { src: StateId(src), dst: StateId(dst), reward, prob: None }
    }

    pub fn random(src: usize, dst: usize, reward: i64, prob: Rational) -> Edge {
        Edge { src: StateId(src), dst: StateId(dst), reward, prob: Some(prob) }
    }
}

/// A validated simple stochastic game. Edges are kept in canonical
/// (lexicographic) order, so edge indices are stable for equal games.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Game {
    name: String,
    states: Vec<State>,
    edges: Vec<Edge>,
    first: Vec<usize>,
}

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

impl Game {
    pub fn new(name: impl Into<String>, states: Vec<State>, mut edges: Vec<Edge>) -> Result<Game> {
        let n = states.len();
        for e in &edges {
            for end in [e.src, e.dst] {
                if end.0 >= n {
                    return Err(Error::InvalidGame(format!(
                        "edge {} -> {} references unknown state {}",
                        e.src, e.dst, end
                    )));
                }
            }
            let random = states[e.src.0].owner == Owner::Random;
            match (&e.prob, random) {
                (None, true) => {
                    return Err(Error::InvalidGame(format!(
                        "edge {} -> {} leaves random state {} without a probability",
                        e.src, e.dst, e.src
                    )))
                }
                (Some(_), false) => {
                    return Err(Error::InvalidGame(format!(
                        "edge {} -> {} carries a probability but state {} is not random",
                        e.src, e.dst, e.src
                    )))
                }
                (Some(p), true) if !p.is_positive() || *p > Rational::one() => {
                    return Err(Error::InvalidGame(format!(
                        "edge {} -> {} has probability {} outside (0, 1]",
                        e.src, e.dst, p
                    )))
                }
                _ => {}
            }
        }
        edges.sort();
        let mut first = vec![0; n + 1];
        for e in &edges {
            first[e.src.0 + 1] += 1;
        }
        for i in 0..n {
            first[i + 1] += first[i];
        }
        let game = Game { name: name.into(), states, edges, first };
        for s in game.ids() {
            if game.out_range(s).is_empty() {
                return Err(Error::InvalidGame(format!("blocked state {s}: no outgoing edge")));
            }
            if game.owner(s) == Owner::Random {
                let sum: Rational = game.out(s).iter().map(|e| e.prob.clone().unwrap()).sum();
                if !sum.is_one() {
                    return Err(Error::InvalidGame(format!(
                        "state {s}: probabilities sum to {sum}"
                    )));
                }
            }
        }
        Ok(game)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Game {
        self.name = name.into();
        self
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn ids(&self) -> impl Iterator<Item = StateId> + Clone {
        (0..self.states.len()).map(StateId)
    }

    pub fn all_states(&self) -> StateSet {
        self.ids().collect()
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn state(&self, s: StateId) -> State {
        self.states[s.0]
    }

    pub fn owner(&self, s: StateId) -> Owner {
        self.states[s.0].owner
    }

    pub fn priority(&self, s: StateId) -> u32 {
        self.states[s.0].priority
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, i: usize) -> &Edge {
        &self.edges[i]
    }

    /// Indices of the outgoing edges of `s`.
    pub fn out_range(&self, s: StateId) -> Range<usize> {
        self.first[s.0]..self.first[s.0 + 1]
    }

    pub fn out(&self, s: StateId) -> &[Edge] {
        &self.edges[self.out_range(s)]
    }

    pub fn successors(&self, s: StateId) -> impl Iterator<Item = StateId> + '_ {
        self.out(s).iter().map(|e| e.dst)
    }

    pub fn max_priority(&self) -> u32 {
        self.states.iter().map(|s| s.priority).max().unwrap_or(0)
    }

    pub fn max_abs_reward(&self) -> u64 {
        self.edges.iter().map(|e| e.reward.unsigned_abs()).max().unwrap_or(0)
    }

    pub fn has_owner(&self, owner: Owner) -> bool {
        self.states.iter().any(|s| s.owner == owner)
    }

    /// A player state with more than one outgoing edge.
    pub fn is_free(&self, s: StateId) -> bool {
        self.owner(s) != Owner::Random && self.out_range(s).len() > 1
    }

    /// Locates an edge by its endpoints and reward.
    pub fn find_edge(&self, src: StateId, dst: StateId, reward: i64) -> Option<usize> {
        self.out_range(src).find(|&i| self.edges[i].dst == dst && self.edges[i].reward == reward)
    }

    /// Predecessor lists (edge indices) for every state.
    pub fn predecessors(&self) -> Vec<Vec<usize>> {
        let mut pred = vec![Vec::new(); self.num_states()];
        for (i, e) in self.edges.iter().enumerate() {
            pred[e.dst.0].push(i);
        }
        pred
    }

    pub fn mask(&self, set: &StateSet) -> Vec<bool> {
        let mut m = vec![false; self.num_states()];
        for s in set {
            m[s.0] = true;
        }
        m
    }
}

pub fn set_of(mask: &[bool]) -> StateSet {
    mask.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| StateId(i)).collect()
}

/// Memoryless deterministic strategy; `choice` maps states to edge indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MdStrategy {
    pub owner: Owner,
    pub choice: BTreeMap<StateId, usize>,
}

impl MdStrategy {
    pub fn empty(owner: Owner) -> MdStrategy {
        MdStrategy { owner, choice: BTreeMap::new() }
    }

    pub fn edge(&self, s: StateId) -> Option<usize> {
        self.choice.get(&s).copied()
    }

    /// Checks that the strategy is total on the owner's free choices and
    /// that every chosen edge leaves the state it is assigned to.
    pub fn validate(&self, g: &Game) -> Result<()> {
        for (&s, &e) in &self.choice {
            if s.0 >= g.num_states() || e >= g.num_edges() || g.edge(e).src != s {
                return Err(Error::Precondition(format!(
                    "strategy maps state {s} to edge {e}, which does not leave it"
                )));
            }
        }
        for s in g.ids() {
            if g.owner(s) == self.owner && !self.choice.contains_key(&s) {
                return Err(Error::Precondition(format!("strategy undefined at state {s}")));
            }
        }
        Ok(())
    }
}

/// Finite-memory deterministic strategy with dense tables:
/// `update[m * edges + e]` and `choice[m * states + s]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FdStrategy {
    pub owner: Owner,
    pub memory: usize,
    pub initial: usize,
    pub num_states: usize,
    pub num_edges: usize,
    pub update: Vec<usize>,
    pub choice: Vec<Option<usize>>,
}

impl FdStrategy {
    pub fn next_memory(&self, m: usize, e: usize) -> usize {
        self.update[m * self.num_edges + e]
    }

    pub fn choose(&self, m: usize, s: StateId) -> Option<usize> {
        self.choice[m * self.num_states + s.0]
    }

    /// Positional on the game's states memory slice `m`.
    pub fn slice(&self, m: usize) -> MdStrategy {
        let mut choice = BTreeMap::new();
        for s in 0..self.num_states {
            if let Some(e) = self.choice[m * self.num_states + s] {
                choice.insert(StateId(s), e);
            }
        }
        MdStrategy { owner: self.owner, choice }
    }
}

/// A subgame together with its provenance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Subgame {
    pub game: Game,
    /// Original id of each subgame state.
    pub origin: Vec<StateId>,
    index: Vec<Option<StateId>>,
}

impl Subgame {
    pub fn to_sub(&self, s: StateId) -> Option<StateId> {
        self.index.get(s.0).copied().flatten()
    }

    pub fn to_orig(&self, s: StateId) -> StateId {
        self.origin[s.0]
    }

    pub fn lift(&self, set: &StateSet) -> StateSet {
        set.iter().map(|&s| self.origin[s.0]).collect()
    }

    pub fn lower(&self, set: &StateSet) -> StateSet {
        set.iter().filter_map(|&s| self.to_sub(s)).collect()
    }

    /// Original edge index of a subgame edge.
    pub fn orig_edge(&self, parent: &Game, e: usize) -> usize {
        let edge = self.game.edge(e);
        let src = self.to_orig(edge.src);
        let dst = self.to_orig(edge.dst);
        parent
            .out_range(src)
            .find(|&i| {
                let pe = parent.edge(i);
                pe.dst == dst && pe.reward == edge.reward && pe.prob == edge.prob
            })
            .expect("subgame edge exists in parent")
    }
}

/// Restricts `g` to `keep`. Min and Random states must keep all their
/// successors; Max states lose the edges that leave `keep`.
pub fn restrict(g: &Game, keep: &StateSet) -> Result<Subgame> {
    let origin: Vec<StateId> = keep.iter().copied().collect();
    let mut index = vec![None; g.num_states()];
    for (i, &s) in origin.iter().enumerate() {
        if s.0 >= g.num_states() {
            return Err(Error::Precondition(format!("state {s} is not in the game")));
        }
        index[s.0] = Some(StateId(i));
    }
    let mut states = Vec::with_capacity(origin.len());
    let mut edges = Vec::new();
    for (i, &s) in origin.iter().enumerate() {
        let st = g.state(s);
        states.push(st);
        let mut kept = 0;
        for e in g.out(s) {
            match index[e.dst.0] {
                Some(d) => {
                    kept += 1;
                    edges.push(Edge { src: StateId(i), dst: d, reward: e.reward, prob: e.prob.clone() });
                }
                None if st.owner != Owner::Max => {
                    return Err(Error::Precondition(format!(
                        "state {s} ({}) has successor {} outside the kept set",
                        st.owner.keyword(),
                        e.dst
                    )));
                }
                None => {}
            }
        }
        if kept == 0 {
            return Err(Error::Precondition(format!("max state {s} has no kept successor")));
        }
    }
    let game = Game::new(g.name(), states, edges)?;
    Ok(Subgame { game, origin, index })
}

/// Freezes the owner's choices as given by `strat`.
pub fn fix_strategy(g: &Game, strat: &MdStrategy) -> Result<Game> {
    if strat.owner == Owner::Random {
        return Err(Error::Precondition("random states cannot be fixed".into()));
    }
    strat.validate(g)?;
    let mut edges = Vec::with_capacity(g.num_edges());
    for s in g.ids() {
        if g.owner(s) == strat.owner {
            edges.push(g.edge(strat.choice[&s]).clone());
        } else {
            edges.extend(g.out(s).iter().cloned());
        }
    }
    Game::new(g.name(), g.states().to_vec(), edges)
}

/// Multiplies every reward by `f`.
pub fn scale_rewards(g: &Game, f: u64) -> Game {
    assert!(f >= 1, "scale factor must be positive");
    let mut out = g.clone();
    for e in &mut out.edges {
        e.reward *= f as i64;
    }
    out
}

/// Sum of `p * reward` over the outgoing edges of a random state.
pub fn expected_reward(g: &Game, s: StateId) -> Rational {
    g.out(s)
        .iter()
        .map(|e| e.prob.clone().unwrap_or_else(Rational::one) * Rational::from_integer(e.reward.into()))
        .fold(Rational::zero(), |a, b| a + b)
}
