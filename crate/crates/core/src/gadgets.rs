//! Game transformations: energy trade, negotiation, normalization,
//! reward blow-up, collapse of zero-mean safe components and trade-ins.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::game::{fix_strategy, scale_rewards, Edge, Game, MdStrategy, Owner, Rational, State, StateId, StateSet};
use crate::graph;
use crate::lp::{leaf_gain_lp, BiasSolution};
use crate::oracle::enumerate_md;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TransformKind {
    EnergyTrade,
    Negotiation,
    Blowup,
    Normalize,
    Collapse,
    TradeIn,
    Prune,
}

impl TransformKind {
    pub fn label(self) -> &'static str {
        match self {
            TransformKind::EnergyTrade => "energy-trade",
            TransformKind::Negotiation => "negotiation",
            TransformKind::Blowup => "blowup",
            TransformKind::Normalize => "normalize",
            TransformKind::Collapse => "collapse",
            TransformKind::TradeIn => "trade-in",
            TransformKind::Prune => "prune",
        }
    }
}

/// A transformed game with provenance. `origin[v]` is the input state an
/// output state stands for (`None` for gadget states); `edge_origin[e]` is
/// the input edge an output edge carries the reward of, if any.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transform {
    pub kind: TransformKind,
    pub output: Game,
    pub origin: Vec<Option<StateId>>,
    pub edge_origin: Vec<Option<usize>>,
}

impl Transform {
    /// Output state of every input state that survives unchanged.
    pub fn forward(&self, input_len: usize) -> Vec<Option<StateId>> {
        let mut f = vec![None; input_len];
        for (v, o) in self.origin.iter().enumerate() {
            if let Some(s) = o {
                f[s.0] = Some(StateId(v));
            }
        }
        f
    }

    /// Output states that stand for input states in `set`.
    pub fn image(&self, set: &StateSet) -> StateSet {
        self.origin
            .iter()
            .enumerate()
            .filter(|(_, o)| o.is_some_and(|s| set.contains(&s)))
            .map(|(v, _)| StateId(v))
            .collect()
    }

    /// Input states whose output copy lies in `set`.
    pub fn preimage(&self, set: &StateSet) -> StateSet {
        set.iter().filter_map(|v| self.origin[v.0]).collect()
    }

    /// Provenance as JSON: output state → input state or null.
    pub fn provenance_json(&self) -> serde_json::Value {
        serde_json::json!({
            "kind": self.kind.label(),
            "origin": self.origin.iter().map(|o| o.map(|s| s.0)).collect::<Vec<_>>(),
            "edge_origin": self.edge_origin.iter().map(|o| *o).collect::<Vec<_>>(),
        })
    }
}

/// Builds a game from edges tagged with provenance, keeping each edge's tag
/// aligned with the canonical edge order.
struct Builder {
    states: Vec<State>,
    origin: Vec<Option<StateId>>,
    edges: Vec<(Edge, Option<usize>)>,
}

impl Builder {
    fn from_states(g: &Game) -> Builder {
        Builder { states: g.states().to_vec(), origin: g.ids().map(Some).collect(), edges: Vec::new() }
    }

    fn add(&mut self, owner: Owner, priority: u32, origin: Option<StateId>) -> usize {
        self.states.push(State { owner, priority });
        self.origin.push(origin);
        self.states.len() - 1
    }

    fn edge(&mut self, src: usize, dst: usize, reward: i64, prob: Option<Rational>, from: Option<usize>) {
        self.edges.push((Edge { src: StateId(src), dst: StateId(dst), reward, prob }, from));
    }

    /// Merges parallel edges with equal reward, summing probabilities.
    fn dedup(&mut self) {
        let mut merged: BTreeMap<(usize, usize, i64), (Option<Rational>, Option<usize>)> = BTreeMap::new();
        let mut order = Vec::new();
        for (e, from) in self.edges.drain(..) {
            let key = (e.src.0, e.dst.0, e.reward);
            match merged.get_mut(&key) {
                Some((p, f)) => {
                    if let (Some(a), Some(b)) = (p.as_mut(), e.prob.as_ref()) {
                        *a += b;
                    }
                    if f.is_none() {
                        *f = from;
                    }
                }
                None => {
                    order.push(key);
                    merged.insert(key, (e.prob, from));
                }
            }
        }
        for key in order {
            let (prob, from) = merged.remove(&key).unwrap();
            self.edges.push((Edge { src: StateId(key.0), dst: StateId(key.1), reward: key.2, prob }, from));
        }
    }

    fn finish(mut self, name: &str, kind: TransformKind) -> Result<Transform> {
        self.edges.sort_by(|a, b| a.0.cmp(&b.0));
        let edge_origin = self.edges.iter().map(|(_, f)| *f).collect();
        let edges = self.edges.into_iter().map(|(e, _)| e).collect();
        let output = Game::new(format!("{name}/{}", kind.label()), self.states, edges)?;
        Ok(Transform { kind, output, origin: self.origin, edge_origin })
    }
}

fn identity(g: &Game, kind: TransformKind) -> Transform {
    Transform {
        kind,
        output: g.clone(),
        origin: g.ids().map(Some).collect(),
        edge_origin: (0..g.num_edges()).map(Some).collect(),
    }
}

/// Replaces every positive edge `s -a-> t` by `s -> s'`, `s' -a-> t`,
/// `s' -> t'`, `t' -> t` where `s'` is a Max hub with the priority of `s`
/// and `t'` a Max state of priority 0.
pub fn energy_trade(g: &Game) -> Result<Transform> {
    let mut b = Builder::from_states(g);
    for (ei, e) in g.edges().iter().enumerate() {
        if e.reward <= 0 {
            b.edge(e.src.0, e.dst.0, e.reward, e.prob.clone(), Some(ei));
            continue;
        }
        let hub = b.add(Owner::Max, g.priority(e.src), None);
        let bonus = b.add(Owner::Max, 0, None);
        b.edge(e.src.0, hub, 0, e.prob.clone(), Some(ei));
        b.edge(hub, e.dst.0, e.reward, None, Some(ei));
        b.edge(hub, bonus, 0, None, Some(ei));
        b.edge(bonus, e.dst.0, 0, None, Some(ei));
    }
    b.finish(g.name(), TransformKind::EnergyTrade)
}

/// Replaces every Random state by a two-player gadget: the state becomes
/// Max and picks a level `j <= p/2` (p its priority), entering a Min state
/// of priority p that either yields the choice of successor to Max at
/// priority 2j+1 or keeps it itself at priority 2j. Successor edges keep
/// their rewards; internal edges have reward 0.
pub fn negotiation(g: &Game) -> Result<Transform> {
    let mut b = Builder::from_states(g);
    for s in g.ids() {
        if g.owner(s) == Owner::Random {
            b.states[s.0].owner = Owner::Max;
        }
    }
    for (ei, e) in g.edges().iter().enumerate() {
        if g.owner(e.src) != Owner::Random {
            b.edge(e.src.0, e.dst.0, e.reward, None, Some(ei));
        }
    }
    for s in g.ids().filter(|&s| g.owner(s) == Owner::Random) {
        let p = g.priority(s);
        for j in 0..=p / 2 {
            let c = b.add(Owner::Min, p, None);
            let a = b.add(Owner::Max, 2 * j + 1, None);
            let m = b.add(Owner::Min, 2 * j, None);
            b.edge(s.0, c, 0, None, None);
            b.edge(c, a, 0, None, None);
            b.edge(c, m, 0, None, None);
            for ei in g.out_range(s) {
                let e = g.edge(ei);
                b.edge(a, e.dst.0, e.reward, None, Some(ei));
                b.edge(m, e.dst.0, e.reward, None, Some(ei));
            }
        }
    }
    b.dedup();
    b.finish(g.name(), TransformKind::Negotiation)
}

/// Makes every Random state binary with a unique Max predecessor. Random
/// states with a single successor become Max states; wider distributions
/// are split into chains of binary states; a Max relay is inserted before
/// every Random state that lacks a unique Max predecessor. New states get
/// the largest priority of the game and internal edges reward 0.
pub fn normalize_random(g: &Game) -> Result<Transform> {
    let top = g.max_priority();
    let mut b = Builder::from_states(g);
    for s in g.ids() {
        if g.owner(s) == Owner::Random && g.out(s).len() == 1 {
            b.states[s.0].owner = Owner::Max;
        }
    }
    for (ei, e) in g.edges().iter().enumerate() {
        let s = e.src;
        if g.owner(s) == Owner::Random && g.out(s).len() > 2 {
            continue;
        }
        let prob = if b.states[s.0].owner == Owner::Random { e.prob.clone() } else { None };
        b.edge(s.0, e.dst.0, e.reward, prob, Some(ei));
    }
    for s in g.ids().filter(|&s| g.owner(s) == Owner::Random && g.out(s).len() > 2) {
        let range: Vec<usize> = g.out_range(s).collect();
        let mut cur = s.0;
        let mut rest = Rational::one();
        for (i, &ei) in range.iter().enumerate() {
            let e = g.edge(ei);
            let p = e.prob.clone().unwrap();
            if i + 2 == range.len() {
                let last = g.edge(range[i + 1]);
                let q = last.prob.clone().unwrap();
                b.edge(cur, e.dst.0, e.reward, Some(&p / &rest), Some(ei));
                b.edge(cur, last.dst.0, last.reward, Some(&q / &rest), Some(range[i + 1]));
                break;
            }
            let next = b.add(Owner::Random, top, None);
            let local = &p / &rest;
            b.edge(cur, e.dst.0, e.reward, Some(local.clone()), Some(ei));
            b.edge(cur, next, 0, Some(Rational::one() - local), None);
            rest -= p;
            cur = next;
        }
    }
    b.dedup();
    // relays
    let randoms: Vec<usize> = (0..b.states.len()).filter(|&v| b.states[v].owner == Owner::Random).collect();
    for v in randoms {
        let incoming: Vec<usize> = (0..b.edges.len()).filter(|&i| b.edges[i].0.dst.0 == v).collect();
        let unique_max = incoming.len() == 1 && b.states[b.edges[incoming[0]].0.src.0].owner == Owner::Max;
        if unique_max {
            continue;
        }
        let relay = b.add(Owner::Max, top, None);
        for i in incoming {
            b.edges[i].0.dst = StateId(relay);
        }
        b.edge(relay, v, 0, None, None);
    }
    b.dedup();
    b.finish(g.name(), TransformKind::Normalize)
}

/// Exact gains of all bottom components over all pairs of MD strategies.
pub fn leaf_gains(g: &Game, caps: &Caps) -> Result<Vec<Rational>> {
    let sigmas = enumerate_md(g, Owner::Max, caps)?;
    caps.check_strategies(sigmas.len() as u128 * crate::oracle::md_count(g, Owner::Min))?;
    let mut seen: BTreeMap<Vec<(usize, usize, i64)>, Rational> = BTreeMap::new();
    for sigma in &sigmas {
        let gs = fix_strategy(g, sigma)?;
        // edge indices change once sigma is fixed
        for tau in &enumerate_md(&gs, Owner::Min, caps)? {
            let mc = fix_strategy(&gs, tau)?;
            for comp in graph::bsccs(&mc)?.components {
                // a bottom component is determined by its edges in the chain
                let key: Vec<(usize, usize, i64)> =
                    comp.iter().flat_map(|&s| mc.out(s).iter().map(|e| (e.src.0, e.dst.0, e.reward))).collect();
                if !seen.contains_key(&key) {
                    let gain = leaf_gain_lp(&mc, &comp)?.gain.unwrap();
                    seen.insert(key, gain);
                }
            }
        }
    }
    Ok(seen.into_values().collect())
}

/// Smallest factor f with f·p > 2: ⌊2/p⌋ + 1.
pub fn blowup_factor(p_min: Option<&Rational>) -> u64 {
    match p_min {
        None => 3,
        Some(p) => {
            let two = Rational::from_integer(2.into());
            (two / p).floor().to_integer().to_u64().unwrap_or(u64::MAX - 1) + 1
        }
    }
}

/// Scales rewards so that every positive leaf-component gain exceeds 2.
pub fn blowup(g: &Game, caps: &Caps) -> Result<(Transform, u64)> {
    let gains = leaf_gains(g, caps)?;
    let p_min = gains.iter().filter(|x| x.is_positive()).min();
    let f = blowup_factor(p_min);
    let mut t = identity(g, TransformKind::Blowup);
    t.output = scale_rewards(g, f).with_name(format!("{}/blowup", g.name()));
    Ok((t, f))
}

/// Union, over MD Max strategies of `g1[tau]`, of the bottom components
/// with even minimal priority and no negative cycle that avoid `good`.
pub fn zero_safe_components(g1: &Game, tau: &MdStrategy, good: &StateSet, caps: &Caps) -> Result<StateSet> {
    let mdp = fix_strategy(g1, tau)?;
    let mut u = StateSet::new();
    for sigma in enumerate_md(&mdp, Owner::Max, caps)? {
        let mc = fix_strategy(&mdp, &sigma)?;
        for comp in graph::bsccs(&mc)?.components {
            if comp.iter().any(|s| good.contains(s)) || comp.is_subset(&u) {
                continue;
            }
            let even = comp.iter().map(|&s| mc.priority(s)).min().unwrap() % 2 == 0;
            if even && !graph::bad_cycle_in(&mc, &mc.mask(&comp), true) {
                u.extend(comp);
            }
        }
    }
    Ok(u)
}

/// Merges `u` into one Max state of priority 0 with a +3 self-loop
/// (appended last); edges entering `u` are redirected to it.
pub fn collapse(g: &Game, u: &StateSet) -> Result<Transform> {
    if u.is_empty() {
        return Ok(identity(g, TransformKind::Collapse));
    }
    let keep: Vec<StateId> = g.ids().filter(|s| !u.contains(s)).collect();
    let mut index = vec![usize::MAX; g.num_states()];
    for (i, s) in keep.iter().enumerate() {
        index[s.0] = i;
    }
    let ua = keep.len();
    let mut b = Builder { states: Vec::new(), origin: Vec::new(), edges: Vec::new() };
    for &s in &keep {
        b.add(g.owner(s), g.priority(s), Some(s));
    }
    b.add(Owner::Max, 0, None);
    for (ei, e) in g.edges().iter().enumerate() {
        if u.contains(&e.src) {
            continue;
        }
        let dst = if u.contains(&e.dst) { ua } else { index[e.dst.0] };
        b.edge(index[e.src.0], dst, e.reward, e.prob.clone(), Some(ei));
    }
    b.edge(ua, ua, 3, None, None);
    b.dedup();
    b.finish(g.name(), TransformKind::Collapse)
}

/// Collapses the zero-mean safe components of `g1[tau_star]` that avoid
/// `good` (the states of positive-mean-payoff parity components).
pub fn collapse_awesome_zero(g1: &Game, tau_star: &MdStrategy, good: &StateSet, caps: &Caps) -> Result<Transform> {
    let u = zero_safe_components(g1, tau_star, good, caps)?;
    collapse(g1, &u)
}

/// One rebalanced copy `s_tau` of a binary Random state `state`, entered
/// from its Max predecessor `relay`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct TradeIn {
    pub state: StateId,
    pub relay: StateId,
    /// Index of the minimizer strategy the biases were computed for.
    pub tau: usize,
    pub rewards: [i64; 2],
}

impl TradeIn {
    /// Expected reward sacrificed at `state`: old expectation minus new.
    pub fn sacrifice(&self, g: &Game) -> Rational {
        let out = g.out(self.state);
        out.iter()
            .zip(self.rewards)
            .map(|(e, r)| e.prob.clone().unwrap() * Rational::from_integer((e.reward - r).into()))
            .sum()
    }

    /// The trade-in must replace a binary Random state reached from its
    /// unique Max predecessor and give up at least one unit of expected reward.
    pub fn check(&self, g: &Game) -> Result<()> {
        let s = self.state;
        if s.0 >= g.num_states() || self.relay.0 >= g.num_states() {
            return Err(Error::InvalidGame(format!("trade-in refers to unknown state {s}")));
        }
        if g.owner(s) != Owner::Random || g.out(s).len() != 2 {
            return Err(Error::InvalidGame(format!("trade-in state {s} is not a binary random state")));
        }
        if g.owner(self.relay) != Owner::Max || !g.successors(self.relay).any(|t| t == s) {
            return Err(Error::InvalidGame(format!("state {} is no max predecessor of {s}", self.relay)));
        }
        if self.sacrifice(g) < Rational::one() {
            return Err(Error::InvalidGame(format!("trade-in at {s} sacrifices less than one unit")));
        }
        Ok(())
    }
}

/// Trade-in rewards ⌊1 + b_s − b_t⌋ for the binary Random states with
/// biases; other states, and Random states left without a predecessor or
/// with a single successor, get no trade-in.
pub fn trade_in(g_u: &Game, tau: usize, biases: &BiasSolution) -> Result<Vec<TradeIn>> {
    let pred = g_u.predecessors();
    let mut out = Vec::new();
    for s in g_u.ids().filter(|&s| g_u.owner(s) == Owner::Random) {
        let Some(bs) = biases.bias(s) else { continue };
        let edges = g_u.out(s);
        // collapsing can leave a Random state unreachable or with one successor
        if edges.len() < 2 || pred[s.0].is_empty() {
            continue;
        }
        if edges.len() != 2 || pred[s.0].len() != 1 {
            return Err(Error::Precondition(format!("random state {s} is not normalized")));
        }
        let relay = g_u.edge(pred[s.0][0]).src;
        let mut rewards = [0i64; 2];
        for (i, e) in edges.iter().enumerate() {
            let bt = biases
                .bias(e.dst)
                .ok_or_else(|| Error::Precondition(format!("bias of state {} missing", e.dst)))?;
            let val = (Rational::one() + bs - bt).floor().to_integer();
            rewards[i] = val.to_i64().ok_or_else(|| Error::Internal("trade-in reward overflow".into()))?;
        }
        out.push(TradeIn { state: s, relay, tau, rewards });
    }
    Ok(out)
}

/// The base game with one extra Random state per trade-in (appended in
/// the given order, with the priority of the state it copies).
pub fn assemble_g2(g_u: &Game, trade_ins: &[TradeIn]) -> Result<Transform> {
    let mut b = Builder::from_states(g_u);
    for (ei, e) in g_u.edges().iter().enumerate() {
        b.edge(e.src.0, e.dst.0, e.reward, e.prob.clone(), Some(ei));
    }
    for t in trade_ins {
        t.check(g_u)?;
        let v = b.add(Owner::Random, g_u.priority(t.state), None);
        let entry = g_u.out_range(t.relay).find(|&i| g_u.edge(i).dst == t.state).unwrap();
        b.edge(t.relay.0, v, g_u.edge(entry).reward, None, Some(entry));
        for (i, e) in g_u.out(t.state).iter().enumerate() {
            b.edge(v, e.dst.0, t.rewards[i], e.prob.clone(), None);
        }
    }
    b.dedup();
    b.finish(g_u.name(), TransformKind::TradeIn)
}

/// Keeps the selected trade-ins only; at most `bound` per Random state.
pub fn prune_to_candidate(
    g_u: &Game,
    trade_ins: &[TradeIn],
    keep: &BTreeSet<usize>,
    bound: usize,
) -> Result<(Transform, Vec<TradeIn>)> {
    let kept: Vec<TradeIn> = trade_ins.iter().enumerate().filter(|(i, _)| keep.contains(i)).map(|(_, t)| t.clone()).collect();
    let mut per_state: BTreeMap<StateId, usize> = BTreeMap::new();
    for t in &kept {
        *per_state.entry(t.state).or_default() += 1;
    }
    if let Some((s, c)) = per_state.iter().find(|(_, &c)| c > bound) {
        return Err(Error::Precondition(format!("{c} trade-ins kept at state {s}, more than {bound}")));
    }
    let mut t = assemble_g2(g_u, &kept)?;
    t.kind = TransformKind::Prune;
    Ok((t, kept))
}

/// Removes `drop` from a game (typically unused base states); Max states
/// must keep a successor.
pub fn prune_states(g: &Game, drop: &StateSet) -> Result<Transform> {
    let keep: StateSet = g.ids().filter(|s| !drop.contains(s)).collect();
    let sub = crate::game::restrict(g, &keep)?;
    let mut edge_origin = Vec::with_capacity(sub.game.num_edges());
    for e in 0..sub.game.num_edges() {
        edge_origin.push(Some(sub.orig_edge(g, e)));
    }
    Ok(Transform {
        kind: TransformKind::Prune,
        origin: sub.origin.iter().map(|&s| Some(s)).collect(),
        output: sub.game,
        edge_origin,
    })
}

/// Whether every Random state has two edges with probabilities strictly
/// between 0 and 1 and a unique predecessor edge, leaving a Max state.
pub fn is_normalized(g: &Game) -> bool {
    let pred = g.predecessors();
    g.ids().filter(|&s| g.owner(s) == Owner::Random).all(|s| {
        g.out(s).len() == 2
            && pred[s.0].len() == 1
            && g.owner(g.edge(pred[s.0][0]).src) == Owner::Max
            && g.out(s).iter().all(|e| e.prob.as_ref().is_some_and(|p| !p.is_zero() && !p.is_one()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::rat;

    fn st(owner: Owner, priority: u32) -> State {
        State { owner, priority }
    }

    #[test]
    fn energy_trade_single_edge() {
        let g = Game::new("", vec![st(Owner::Max, 1), st(Owner::Max, 2)], vec![Edge::new(0, 1, 2), Edge::new(1, 0, -1)])
            .unwrap();
        let t = energy_trade(&g).unwrap();
        assert_eq!(t.output.num_states(), 4);
        assert_eq!(t.output.num_edges(), 5);
        assert_eq!(t.output.priority(StateId(2)), 1);
        assert_eq!(t.output.priority(StateId(3)), 0);
        assert_eq!(t.origin, vec![Some(StateId(0)), Some(StateId(1)), None, None]);
        assert!(t.output.find_edge(StateId(1), StateId(0), -1).is_some());
    }

    #[test]
    fn energy_trade_no_positive_edges_is_identity() {
        let g = Game::new("", vec![st(Owner::Min, 1)], vec![Edge::new(0, 0, 0), Edge::new(0, 0, -1)]).unwrap();
        let t = energy_trade(&g).unwrap();
        assert_eq!(t.output.edges(), g.edges());
        assert_eq!(t.output.states(), g.states());
    }

    #[test]
    fn negotiation_preserves_rewards() {
        let g = Game::new(
            "",
            vec![st(Owner::Random, 2), st(Owner::Max, 0), st(Owner::Max, 1)],
            vec![
                Edge::random(0, 1, 5, rat(1, 2)),
                Edge::random(0, 2, -4, rat(1, 2)),
                Edge::new(1, 0, 0),
                Edge::new(2, 2, 0),
            ],
        )
        .unwrap();
        let t = negotiation(&g).unwrap();
        let out = &t.output;
        assert!(!out.has_owner(Owner::Random));
        assert_eq!(out.num_states(), 3 + 3 * 2);
        for (i, e) in out.edges().iter().enumerate() {
            match t.edge_origin[i] {
                Some(o) => assert_eq!(e.reward, g.edge(o).reward),
                None => assert_eq!(e.reward, 0),
            }
        }
    }

    #[test]
    fn normalize_splits_wide_distribution() {
        let g = Game::new(
            "",
            vec![st(Owner::Max, 0), st(Owner::Random, 1), st(Owner::Max, 0), st(Owner::Max, 0), st(Owner::Max, 0)],
            vec![
                Edge::new(0, 1, 0),
                Edge::random(1, 2, 0, rat(1, 2)),
                Edge::random(1, 3, 0, rat(1, 4)),
                Edge::random(1, 4, 0, rat(1, 4)),
                Edge::new(2, 0, 0),
                Edge::new(3, 0, 0),
                Edge::new(4, 0, 0),
            ],
        )
        .unwrap();
        let t = normalize_random(&g).unwrap();
        let out = &t.output;
        assert!(is_normalized(out));
        // products of branch probabilities reproduce the distribution
        assert_eq!(out.out(StateId(1))[0].prob, Some(rat(1, 2)));
        let mid = out.ids().find(|&s| out.owner(s) == Owner::Random && s.0 >= 5).unwrap();
        assert!(out.out(mid).iter().all(|e| e.prob == Some(rat(1, 2))));
    }

    #[test]
    fn normalize_shares_relay() {
        let g = Game::new(
            "",
            vec![st(Owner::Max, 0), st(Owner::Max, 0), st(Owner::Random, 0)],
            vec![
                Edge::new(0, 2, 1),
                Edge::new(1, 2, 2),
                Edge::random(2, 0, 0, rat(1, 3)),
                Edge::random(2, 1, 0, rat(2, 3)),
            ],
        )
        .unwrap();
        let t = normalize_random(&g).unwrap();
        assert_eq!(t.output.num_states(), 4);
        assert!(is_normalized(&t.output));
        assert!(t.output.find_edge(StateId(0), StateId(3), 1).is_some());
        assert!(t.output.find_edge(StateId(1), StateId(3), 2).is_some());
        assert_eq!(normalize_random(&t.output).unwrap().output, t.output.clone().with_name(format!("{}/normalize", t.output.name())));
    }

    #[test]
    fn blowup_factors() {
        assert_eq!(blowup_factor(Some(&rat(3, 1))), 1);
        assert_eq!(blowup_factor(Some(&rat(1, 2))), 5);
        assert_eq!(blowup_factor(Some(&rat(1, 1))), 3);
        assert_eq!(blowup_factor(None), 3);
        let g = Game::new("", vec![st(Owner::Max, 0)], vec![Edge::new(0, 0, 3)]).unwrap();
        assert_eq!(blowup(&g, &Caps::default()).unwrap().1, 1);
        let z = Game::new("", vec![st(Owner::Max, 0)], vec![Edge::new(0, 0, -1)]).unwrap();
        let (t, f) = blowup(&z, &Caps::default()).unwrap();
        assert_eq!(f, 3);
        assert_eq!(t.output.edge(0).reward, -3);
    }

    #[test]
    fn collapse_two_components() {
        // 0 max chooses between zero loops at 1 and {2,3}
        let g = Game::new(
            "",
            vec![st(Owner::Max, 1), st(Owner::Max, 0), st(Owner::Max, 0), st(Owner::Max, 2)],
            vec![
                Edge::new(0, 1, -1),
                Edge::new(0, 2, 0),
                Edge::new(1, 1, 0),
                Edge::new(2, 3, 1),
                Edge::new(3, 2, -1),
            ],
        )
        .unwrap();
        let u = zero_safe_components(&g, &MdStrategy::empty(Owner::Min), &StateSet::new(), &Caps::default()).unwrap();
        assert_eq!(u, [StateId(1), StateId(2), StateId(3)].into());
        let t = collapse(&g, &u).unwrap();
        let out = &t.output;
        assert_eq!(out.num_states(), 2);
        assert_eq!(out.out(StateId(0)).len(), 2);
        assert!(out.find_edge(StateId(0), StateId(1), -1).is_some());
        assert!(out.find_edge(StateId(0), StateId(1), 0).is_some());
        assert!(out.find_edge(StateId(1), StateId(1), 3).is_some());
    }

    #[test]
    fn trade_in_floor_rewards() {
        let g = Game::new(
            "",
            vec![st(Owner::Max, 0), st(Owner::Random, 0), st(Owner::Max, 0), st(Owner::Max, 0)],
            vec![
                Edge::new(0, 1, 0),
                Edge::random(1, 2, 4, rat(1, 2)),
                Edge::random(1, 3, 4, rat(1, 2)),
                Edge::new(2, 0, 0),
                Edge::new(3, 0, 0),
            ],
        )
        .unwrap();
        let mut biases = BiasSolution {
            gain: None,
            biases: BTreeMap::new(),
            feasible: true,
            size_bits: 0,
            size_bound: 0,
        };
        let mut set = |v: &[(usize, Rational)]| {
            biases.biases = v.iter().map(|(s, b)| (StateId(*s), b.clone())).collect();
            trade_in(&g, 0, &biases).unwrap()
        };
        let t = set(&[(0, rat(0, 1)), (1, rat(0, 1)), (2, rat(1, 2)), (3, rat(0, 1))]);
        assert_eq!(t[0].rewards, [0, 1]);
        let t = set(&[(0, rat(0, 1)), (1, rat(0, 1)), (2, rat(0, 1)), (3, rat(0, 1))]);
        assert_eq!(t[0].rewards, [1, 1]);
        assert_eq!(t[0].relay, StateId(0));
        let g2 = assemble_g2(&g, &t).unwrap();
        assert_eq!(g2.output.num_states(), 5);
        assert!(g2.output.find_edge(StateId(0), StateId(4), 0).is_some());
        let (g3, kept) = prune_to_candidate(&g, &t, &BTreeSet::new(), 8).unwrap();
        assert!(kept.is_empty());
        assert_eq!(g3.output.num_states(), 4);
        assert!(prune_to_candidate(&g, &[t[0].clone(), t[0].clone()], &[0, 1].into(), 1).is_err());
    }

    #[test]
    fn prune_blocked_relay() {
        let g = Game::new("", vec![st(Owner::Max, 0), st(Owner::Max, 0)], vec![Edge::new(0, 1, 0), Edge::new(1, 1, 0)])
            .unwrap();
        assert!(prune_states(&g, &[StateId(1)].into()).is_err());
        assert_eq!(prune_states(&g, &StateSet::new()).unwrap().output, g);
    }
}
