//! Three-mode (Start/Gain/Bailout) witness strategies for almost-sure
//! EN(k) ∩ Parity, their exact validation on the finite mode product, and
//! a seeded simulator.

use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bailout::Pipeline;
use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::format::parse_rational;
use crate::game::{rat, Edge, FdStrategy, Game, MdStrategy, Owner, Rational, State, StateId, StateSet, Subgame};
use crate::graph;
use crate::markov::{max_reach, Mdp};
use crate::oracle::CappedSolution;
use crate::solver::Decider;
use crate::storage::{step, StorageProduct};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mode {
    Start,
    Gain,
    Bailout,
}

fn ser_rational<S: Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

fn de_rational<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rational, D::Error> {
    let text = String::deserialize(d)?;
    parse_rational(&text).ok_or_else(|| serde::de::Error::custom(format!("bad rational `{text}`")))
}

/// Cost thresholds of the mode machine: Start→Gain when cost ≥
/// `start_to_gain`, Gain→Bailout when cost ≤ `gain_to_bailout`,
/// Bailout→Gain when cost ≥ `bailout_to_gain`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thresholds {
    pub start_to_gain: i64,
    pub gain_to_bailout: i64,
    pub bailout_to_gain: i64,
}

impl Thresholds {
    pub fn from_k_prime(k_prime: i64, k1: u64) -> Thresholds {
        Thresholds { start_to_gain: k_prime, gain_to_bailout: k_prime - k1 as i64 - 1, bailout_to_gain: k_prime }
    }
}

/// Mode after observing tracked cumulative cost `cost` in `mode`. At most
/// one switch happens per observation and Start is never re-entered.
pub fn next_mode(t: &Thresholds, mode: Mode, cost: i64) -> Mode {
    match mode {
        Mode::Start if cost >= t.start_to_gain => Mode::Gain,
        Mode::Gain if cost <= t.gain_to_bailout => Mode::Bailout,
        Mode::Bailout if cost >= t.bailout_to_gain => Mode::Gain,
        m => m,
    }
}

/// k′ = k1 + k2 − k + R, where R bounds the absolute reward of one step.
pub fn k_prime(k1: u64, k2: u64, k: u64, r: u64) -> i64 {
    k1 as i64 + k2 as i64 - k as i64 + r as i64
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthesisParams {
    pub k: u64,
    pub k1: u64,
    pub k2: u64,
    pub k_prime: i64,
    #[serde(serialize_with = "ser_rational", deserialize_with = "de_rational")]
    pub delta: Rational,
    pub khat: BTreeMap<StateId, u64>,
    /// Largest absolute reward of the subgame over W (at least 1).
    pub r: u64,
    /// Storage bound of the Start/Bailout counter.
    pub l: u64,
    /// Energy cap of the Gain-mode witness.
    pub b: u64,
}

/// A counter-memory strategy on the input game: `choice[m * states + s]`
/// for Max states, `update[m * edges + e]` for every edge (`None` where the
/// component strategy gives up).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterTable {
    pub cap: u64,
    pub num_states: usize,
    pub num_edges: usize,
    pub choice: Vec<Option<usize>>,
    pub update: Vec<Option<u64>>,
}

impl CounterTable {
    fn new(cap: u64, num_states: usize, num_edges: usize) -> CounterTable {
        let w = cap as usize + 1;
        CounterTable { cap, num_states, num_edges, choice: vec![None; w * num_states], update: vec![None; w * num_edges] }
    }

    pub fn choose(&self, m: u64, s: StateId) -> Option<usize> {
        self.choice.get(m as usize * self.num_states + s.0).copied().flatten()
    }

    pub fn next(&self, m: u64, e: usize) -> Option<u64> {
        self.update.get(m as usize * self.num_edges + e).copied().flatten()
    }
}

/// The Start/Gain/Bailout strategy. Tracked energy `k + cost` saturates at
/// `energy_cap` (k + k′ + B, so a Gain episode sees at least the cost
/// tracked by the k̂ estimate); without thresholds the strategy never
/// leaves Start.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeStrategy {
    pub start: StateId,
    pub params: SynthesisParams,
    pub thresholds: Option<Thresholds>,
    pub energy_cap: u64,
    /// σ₁ and the bailout strategies σ̃ (counter = storage of G″).
    pub storage: CounterTable,
    /// Gain strategies σ̂ (counter = capped energy).
    pub gain: CounterTable,
    pub start_counter: u64,
    pub bailout_counter: u64,
    pub gain_counter: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MemState {
    pub mode: Mode,
    pub counter: u64,
    pub energy: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Step {
    Next(MemState),
    /// Tracked energy would drop below zero.
    EnergyViolation,
    /// The component strategy has no continuation for this edge.
    TableMiss,
}

impl ModeStrategy {
    fn table(&self, mode: Mode) -> &CounterTable {
        match mode {
            Mode::Gain => &self.gain,
            _ => &self.storage,
        }
    }

    fn settle(&self, mem: MemState) -> MemState {
        let Some(t) = &self.thresholds else { return mem };
        let cost = mem.energy as i64 - self.params.k as i64;
        let mode = next_mode(t, mem.mode, cost);
        if mode == mem.mode {
            return mem;
        }
        let counter = if mode == Mode::Gain { self.gain_counter } else { self.bailout_counter };
        MemState { mode, counter, energy: mem.energy }
    }

    pub fn initial(&self) -> MemState {
        self.settle(MemState { mode: Mode::Start, counter: self.start_counter, energy: self.params.k.min(self.energy_cap) })
    }

    pub fn choose(&self, mem: &MemState, s: StateId) -> Option<usize> {
        self.table(mem.mode).choose(mem.counter, s)
    }

    pub fn advance(&self, g: &Game, mem: &MemState, e: usize) -> Step {
        let Some(counter) = self.table(mem.mode).next(mem.counter, e) else { return Step::TableMiss };
        let energy = mem.energy as i128 + g.edge(e).reward as i128;
        if energy < 0 {
            return Step::EnergyViolation;
        }
        let energy = (energy as u64).min(self.energy_cap);
        Step::Next(self.settle(MemState { mode: mem.mode, counter, energy }))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("mode strategies serialize")
    }

    pub fn from_json(text: &str) -> Result<ModeStrategy> {
        serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line(), col: e.column(), msg: e.to_string() })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SynthesisOptions {
    /// Return the Start strategy alone when it already validates.
    pub allow_start_only: bool,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions { allow_start_only: true }
    }
}

pub fn synthesize(g: &Game, s: StateId, k: u64, caps: &Caps) -> Result<ModeStrategy> {
    synthesize_with(g, s, k, caps, SynthesisOptions::default())
}

pub fn synthesize_with(g: &Game, s: StateId, k: u64, caps: &Caps, opts: SynthesisOptions) -> Result<ModeStrategy> {
    Synthesizer::new(g, caps)?.strategy(s, k, opts)
}

/// The parts of the construction shared by every query on one game: the
/// decider, the pulled-back storage strategy, the gain witness, k̂, k1, k2.
#[derive(Clone, Debug)]
pub struct Synthesizer {
    pub decider: Decider,
    game: Game,
    caps: Caps,
    parts: Option<Parts>,
}

#[derive(Clone, Debug)]
struct Parts {
    storage: CounterTable,
    gain: CounterTable,
    khat: BTreeMap<StateId, u64>,
    k1: u64,
    k2: u64,
    r: u64,
    l: u64,
    b: u64,
    big_k: u64,
}

impl Synthesizer {
    pub fn new(g: &Game, caps: &Caps) -> Result<Synthesizer> {
        let decider = Decider::new(g, caps)?;
        let parts = match (decider.subgame(), decider.pipeline(), decider.product(), decider.bounds) {
            (Some(sub), Some(pipe), Some(prod), Some(bounds)) => Some(build_parts(g, sub, pipe, prod, bounds.k, caps)?),
            _ => None,
        };
        Ok(Synthesizer { decider, game: g.clone(), caps: caps.clone(), parts })
    }

    pub fn strategy(&self, s: StateId, k: u64, opts: SynthesisOptions) -> Result<ModeStrategy> {
        if !self.decider.decide(s, k)? {
            return Err(Error::Precondition(format!("state {s} does not win with credit {k}")));
        }
        let p = self.parts.as_ref().ok_or_else(|| Error::Internal("winning state without a subgame".into()))?;
        let kp = k_prime(p.k1, p.k2, k, p.r);
        let params =
            SynthesisParams { k, k1: p.k1, k2: p.k2, k_prime: kp, delta: rat(1, 2), khat: p.khat.clone(), r: p.r, l: p.l, b: p.b };
        let three = ModeStrategy {
            start: s,
            params,
            thresholds: Some(Thresholds::from_k_prime(kp, p.k1)),
            energy_cap: (k as i64 + kp).max(1) as u64 + p.b,
            storage: p.storage.clone(),
            gain: p.gain.clone(),
            start_counter: k.min(p.big_k).min(p.l),
            bailout_counter: p.k2.min(p.l),
            gain_counter: p.b,
        };
        if opts.allow_start_only {
            let cap = three.energy_cap.max(p.l);
            let alone = ModeStrategy { thresholds: None, energy_cap: cap, ..three.clone() };
            if exact_validate(&self.game, s, k, &alone, cap, &self.caps)?.passed() {
                return Ok(alone);
            }
        }
        Ok(three)
    }
}

fn build_parts(g: &Game, sub: &Subgame, pipe: &Pipeline, prod: &StorageProduct, big_k: u64, caps: &Caps) -> Result<Parts> {
    let h = &sub.game;
    let l = prod.l;
    let storage = storage_table(g, sub, pipe, prod)?;
    let mut k2 = 0;
    for v in h.ids() {
        let c = prod
            .least_credit(v)
            .ok_or_else(|| Error::Internal(format!("state {} of W has no bailout credit", sub.to_orig(v))))?;
        k2 = k2.max(c);
    }
    let (cs, b) = gain_solution(h, l, caps)?;
    let (gain, gain_fd) = gain_table(g, sub, &cs)?;
    let delta = rat(1, 2);
    let mut khat = BTreeMap::new();
    for v in h.ids() {
        khat.insert(sub.to_orig(v), estimate_khat(h, v, &delta, &gain_fd, b, caps)?);
    }
    let k1 = khat.values().copied().max().unwrap_or(0);
    let r = h.max_abs_reward().max(1);
    Ok(Parts { storage, gain, khat, k1, k2, r, l, b, big_k })
}

/// Pulls the storage-parity strategy on G″ back to the input game. Moves
/// inside gadgets are replayed on the fly: a Random state's level is the
/// G″ choice, and the realized successor is routed through the Max branch
/// when the G″ strategy would have picked it there.
fn storage_table(g: &Game, sub: &Subgame, pipe: &Pipeline, prod: &StorageProduct) -> Result<CounterTable> {
    let h = &sub.game;
    let l = prod.l;
    let mut t = CounterTable::new(l, g.num_states(), g.num_edges());
    let to_h = |e2: usize| -> Option<usize> {
        let e1 = pipe.g_doubleprime.edge_origin[e2]?;
        pipe.g_prime.edge_origin[e1]
    };
    let h_edges: Vec<usize> = (0..h.num_edges()).map(|e| sub.orig_edge(g, e)).collect();
    for r in 0..=l {
        for v in h.ids() {
            if h.owner(v) == Owner::Max {
                if let Some(he) = prod.choice(v, r).and_then(to_h) {
                    t.choice[r as usize * t.num_states + sub.to_orig(v).0] = Some(h_edges[he]);
                }
            }
            for he in h.out_range(v) {
                t.update[r as usize * t.num_edges + h_edges[he]] = replay(h, pipe, prod, v, r, he);
            }
        }
    }
    Ok(t)
}

/// Counter after the G″ walk that realizes edge `he` of the subgame from
/// `(v, r)`; `None` when the strategy would not take it or runs dry.
fn replay(h: &Game, pipe: &Pipeline, prod: &StorageProduct, v: StateId, r: u64, he: usize) -> Option<u64> {
    let gp = &pipe.g_prime.output;
    let gpp = pipe.game();
    let l = prod.l;
    let e1 = gp.out_range(v).find(|&i| pipe.g_prime.edge_origin[i] == Some(he))?;
    let target = (gp.edge(e1).dst, gp.edge(e1).reward);
    let hits = |e2: usize| (gpp.edge(e2).dst, gpp.edge(e2).reward) == target;
    let first = match h.owner(v) {
        Owner::Max => prod.choice(v, r).filter(|&e2| hits(e2))?,
        Owner::Min => gpp.out_range(v).find(|&e2| hits(e2))?,
        Owner::Random => {
            let c = gpp.edge(prod.choice(v, r)?).dst;
            let mut via_max = None;
            let mut via_min = None;
            for e2 in gpp.out_range(c) {
                let x = gpp.edge(e2).dst;
                if gpp.owner(x) == Owner::Max {
                    via_max = prod.choice(x, r).filter(|&e3| hits(e3));
                } else {
                    via_min = gpp.out_range(x).find(|&e3| hits(e3));
                }
            }
            via_max.or(via_min)?
        }
    };
    let mut r = step(r, gpp.edge(first).reward, l)?;
    let mut x = gpp.edge(first).dst;
    let mut fuel = gpp.num_states();
    while x.0 >= h.num_states() {
        let e2 = prod.choice(x, r)?;
        r = step(r, gpp.edge(e2).reward, l)?;
        x = gpp.edge(e2).dst;
        fuel = fuel.checked_sub(1)?;
    }
    Some(r)
}

/// Capped energy-parity solution on the subgame in which every state wins
/// from full energy; the cap starts at `l` and doubles.
fn gain_solution(h: &Game, l: u64, caps: &Caps) -> Result<(CappedSolution, u64)> {
    let mut b = l.max(1);
    loop {
        let cs = CappedSolution::solve(h, b, caps)?;
        if h.ids().all(|v| cs.wins(v, b)) {
            return Ok((cs, b));
        }
        b = b.checked_mul(2).ok_or_else(|| Error::cap("gain energy cap", u128::MAX, u64::MAX as u128))?;
    }
}

/// The capped solution's strategy as a counter table on the input game
/// and as an FD strategy on the subgame.
fn gain_table(g: &Game, sub: &Subgame, cs: &CappedSolution) -> Result<(CounterTable, FdStrategy)> {
    let h = &sub.game;
    let b = cs.product.cap;
    let w = b as usize + 1;
    let mut t = CounterTable::new(b, g.num_states(), g.num_edges());
    let mut fd = FdStrategy {
        owner: Owner::Max,
        memory: w,
        initial: b as usize,
        num_states: h.num_states(),
        num_edges: h.num_edges(),
        update: vec![0; w * h.num_edges()],
        choice: vec![None; w * h.num_states()],
    };
    let h_edges: Vec<usize> = (0..h.num_edges()).map(|e| sub.orig_edge(g, e)).collect();
    let neg = &cs.negotiated;
    for e in 0..=b {
        for v in h.ids() {
            for he in h.out_range(v) {
                let next = step(e, h.edge(he).reward, b);
                t.update[e as usize * t.num_edges + h_edges[he]] = next;
                fd.update[e as usize * h.num_edges() + he] = next.unwrap_or(0) as usize;
            }
            if h.owner(v) != Owner::Max {
                continue;
            }
            let pv = cs.product.vertex(v, e);
            let pe = neg.edge_origin[cs.strategy.strategy[pv.0]]
                .ok_or_else(|| Error::Internal("negotiated strategy edge without origin".into()))?;
            let target = cs.product.decode(cs.product.game.edge(pe).dst);
            let he = h
                .out_range(v)
                .find(|&he| {
                    let edge = h.edge(he);
                    match (target, step(e, edge.reward, b)) {
                        (Some((x, e2)), Some(n)) => x == edge.dst && n == e2,
                        (None, None) => true,
                        _ => false,
                    }
                })
                .ok_or_else(|| Error::Internal(format!("capped strategy edge at ({v}, {e}) has no game edge")))?;
            t.choice[e as usize * t.num_states + sub.to_orig(v).0] = Some(h_edges[he]);
            fd.choice[e as usize * h.num_states() + v.0] = Some(he);
        }
    }
    Ok((t, fd))
}

/// Smallest k̂ ≤ `cap` such that, under `sigma_hat` from `s` and against
/// every minimizer, cumulative cost never drops below −k̂ with probability
/// at least `delta`. Cost is tracked saturating above at `cap`, which only
/// makes drops more likely, so the estimate is conservative.
pub fn estimate_khat(g_sub: &Game, s: StateId, delta: &Rational, sigma_hat: &FdStrategy, cap: u64, caps: &Caps) -> Result<u64> {
    if delta.is_zero() {
        return Ok(0);
    }
    let top = i64::try_from(cap).map_err(|_| Error::Precondition("k-hat cap too large".into()))?;
    let mut index: HashMap<(usize, usize, i64), usize> = HashMap::new();
    let mut order = vec![(s.0, sigma_hat.initial, 0i64)];
    index.insert(order[0], 0);
    let mut mdp = Mdp::default();
    let mut i = 0;
    while i < order.len() {
        let (v, m, x) = order[i];
        mdp.add_state();
        let succ = |e: usize, index: &mut HashMap<_, _>, order: &mut Vec<_>| -> Result<usize> {
            let edge = g_sub.edge(e);
            let x2 = x.saturating_add(edge.reward).clamp(-top - 1, top);
            let key = (edge.dst.0, sigma_hat.next_memory(m, e), x2);
            if let Some(&j) = index.get(&key) {
                return Ok(j);
            }
            index.insert(key, order.len());
            order.push(key);
            caps.check_product("k-hat product", order.len())?;
            Ok(order.len() - 1)
        };
        let sv = StateId(v);
        let acts: Vec<Vec<(usize, Rational)>> = match g_sub.owner(sv) {
            Owner::Max => {
                let e = sigma_hat
                    .choose(m, sv)
                    .ok_or_else(|| Error::Precondition(format!("gain strategy undefined at ({sv}, {m})")))?;
                vec![vec![(succ(e, &mut index, &mut order)?, Rational::one())]]
            }
            Owner::Min => {
                let mut a = Vec::new();
                for e in g_sub.out_range(sv) {
                    a.push(vec![(succ(e, &mut index, &mut order)?, Rational::one())]);
                }
                a
            }
            Owner::Random => {
                let mut dist = Vec::new();
                for e in g_sub.out_range(sv) {
                    dist.push((succ(e, &mut index, &mut order)?, g_sub.edge(e).prob.clone().unwrap()));
                }
                vec![dist]
            }
        };
        mdp.actions[i] = acts;
        i += 1;
    }
    let bound = Rational::one() - delta;
    let fails = |k: u64| -> Result<bool> {
        let targets: Vec<bool> = order.iter().map(|&(_, _, x)| x < -(k as i64)).collect();
        Ok(max_reach(&mdp, &targets)?.value[0] > bound)
    };
    if fails(cap)? {
        return Err(Error::Infeasible(format!("no k-hat up to {cap} reaches probability {delta}")));
    }
    let (mut lo, mut hi) = (0u64, cap);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if fails(mid)? {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub product_states: usize,
    /// (a) no reachable step drops the tracked energy below zero.
    pub energy_safe: bool,
    /// (b) every end component Min can keep has an even minimum or only
    /// strictly positive cycles.
    pub parity_ok: bool,
    pub divergent_components: usize,
    /// (c) every Gain episode ends in Bailout with probability ≤ 1 − δ.
    pub switching_ok: bool,
    #[serde(serialize_with = "ser_rational")]
    pub max_switch_probability: Rational,
    /// Least tracked energy on entering Bailout (`None` if unreachable).
    pub bailout_entry_min_energy: Option<u64>,
    pub issues: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.energy_safe && self.parity_ok && self.switching_ok
    }
}

/// The mode product reachable from `(s, initial memory)`: game, memory of
/// each vertex (`None` for the failure sink) and the issues met on the way.
struct ModeProduct {
    game: Game,
    mem: Vec<Option<MemState>>,
    /// Base state of every vertex but the sink.
    base: Vec<StateId>,
    /// `(source, game edge, target)` in exploration order; the target is
    /// `usize::MAX` where the strategy fails.
    raw: Vec<(usize, Option<usize>, usize)>,
    issues: Vec<String>,
}

fn mode_product(g: &Game, s: StateId, ms: &ModeStrategy, caps: &Caps) -> Result<ModeProduct> {
    let mut index: HashMap<(usize, MemState), usize> = HashMap::new();
    let mut order: Vec<(usize, MemState)> = vec![(s.0, ms.initial())];
    index.insert(order[0], 0);
    let mut edges: Vec<(usize, Option<usize>, usize)> = Vec::new();
    let mut issues = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let (v, mem) = order[i];
        let sv = StateId(v);
        let chosen: Vec<usize> = if g.owner(sv) == Owner::Max {
            match ms.choose(&mem, sv) {
                Some(e) if g.edge(e).src == sv => vec![e],
                _ => {
                    issues.push(format!("no choice at state {sv} in {:?} with counter {}", mem.mode, mem.counter));
                    edges.push((i, None, 0));
                    i += 1;
                    continue;
                }
            }
        } else {
            g.out_range(sv).collect()
        };
        for e in chosen {
            match ms.advance(g, &mem, e) {
                Step::Next(m2) => {
                    let key = (g.edge(e).dst.0, m2);
                    let j = match index.get(&key) {
                        Some(&j) => j,
                        None => {
                            index.insert(key, order.len());
                            order.push(key);
                            caps.check_product("mode product", order.len() + 1)?;
                            order.len() - 1
                        }
                    };
                    edges.push((i, Some(e), j));
                }
                Step::EnergyViolation => {
                    issues.push(format!("energy drops below zero on edge {e} from state {sv} at energy {}", mem.energy));
                    edges.push((i, Some(e), usize::MAX));
                }
                Step::TableMiss => {
                    issues.push(format!("{:?} strategy gives up on edge {e} from state {sv}", mem.mode));
                    edges.push((i, Some(e), usize::MAX));
                }
            }
        }
        i += 1;
    }
    let sink_needed = !issues.is_empty();
    let n = order.len();
    let mut states: Vec<State> = order.iter().map(|&(v, _)| g.state(StateId(v))).collect();
    let mut mem: Vec<Option<MemState>> = order.iter().map(|&(_, m)| Some(m)).collect();
    if sink_needed {
        states.push(State { owner: Owner::Max, priority: 1 });
        mem.push(None);
    }
    let mut out = Vec::with_capacity(edges.len() + 1);
    let raw = edges.clone();
    for (src, e, dst) in edges {
        let dst = if dst == usize::MAX || e.is_none() { n } else { dst };
        let (reward, prob) = match e {
            Some(e) => (g.edge(e).reward, g.edge(e).prob.clone()),
            None => (0, None),
        };
        out.push(Edge { src: StateId(src), dst: StateId(dst), reward, prob });
    }
    if sink_needed {
        out.push(Edge::new(n, n, 0));
    }
    let game = Game::new(format!("{}/modes", g.name()), states, out)?;
    let base = order.iter().map(|&(v, _)| StateId(v)).collect();
    Ok(ModeProduct { game, mem, base, raw, issues })
}

/// Exact checks (a)-(c) on the product of `g` with the strategy memory.
/// `bound` must cover the tracked energy cap.
pub fn exact_validate(g: &Game, s: StateId, k: u64, ms: &ModeStrategy, bound: u64, caps: &Caps) -> Result<ValidationReport> {
    if s.0 >= g.num_states() || ms.start != s || ms.params.k != k {
        return Err(Error::Precondition(format!("the strategy was built for state {} and credit {}", ms.start, ms.params.k)));
    }
    if ms.storage.num_states != g.num_states() || ms.storage.num_edges != g.num_edges() {
        return Err(Error::Precondition("the strategy tables do not fit the game".into()));
    }
    if bound < ms.energy_cap {
        return Err(Error::Precondition(format!("bound {bound} is below the tracked energy cap {}", ms.energy_cap)));
    }
    let p = mode_product(g, s, ms, caps)?;
    let pg = &p.game;
    let n = pg.num_states();
    let energy_safe = p.issues.is_empty();
    let mut issues = p.issues.clone();

    let mut parity_ok = true;
    let mut divergent = 0;
    for d in (1..=pg.max_priority()).step_by(2) {
        let within: Vec<bool> = (0..n).map(|v| pg.priority(StateId(v)) >= d).collect();
        for ec in graph::end_components_in(pg, &within, Owner::Min) {
            if !ec.iter().any(|&v| pg.priority(v) == d) {
                continue;
            }
            let sink = ec.iter().any(|v| p.mem[v.0].is_none());
            if !sink && !graph::bad_cycle_in(pg, &pg.mask(&ec), false) {
                divergent += 1;
            } else {
                parity_ok = false;
                let v = ec.iter().next().unwrap();
                issues.push(format!("Min can stay in an odd component (priority {d}) around product state {v}"));
            }
        }
    }

    let is = |v: usize, m: Mode| p.mem[v].is_some_and(|x| x.mode == m);
    let gain: Vec<usize> = (0..n).filter(|&v| is(v, Mode::Gain)).collect();
    let mut entries: StateSet = StateSet::new();
    let mut bailout_entry_min_energy: Option<u64> = None;
    if is(0, Mode::Gain) {
        entries.insert(StateId(0));
    }
    for e in pg.edges() {
        let (a, b) = (e.src.0, e.dst.0);
        if is(b, Mode::Gain) && !is(a, Mode::Gain) {
            entries.insert(e.dst);
        }
        if is(b, Mode::Bailout) && !is(a, Mode::Bailout) {
            let en = p.mem[b].unwrap().energy;
            bailout_entry_min_energy = Some(bailout_entry_min_energy.map_or(en, |x| x.min(en)));
        }
    }
    let mut max_switch = Rational::zero();
    if !entries.is_empty() {
        let mut slot = vec![usize::MAX; n];
        for (i, &v) in gain.iter().enumerate() {
            slot[v] = i;
        }
        let target = gain.len();
        let mut mdp = Mdp { actions: vec![Vec::new(); gain.len() + 1] };
        for (i, &v) in gain.iter().enumerate() {
            let sv = StateId(v);
            let to = |w: StateId| if slot[w.0] == usize::MAX { target } else { slot[w.0] };
            mdp.actions[i] = match pg.owner(sv) {
                Owner::Random => {
                    let mut dist: BTreeMap<usize, Rational> = BTreeMap::new();
                    for e in pg.out(sv) {
                        *dist.entry(to(e.dst)).or_insert_with(Rational::zero) += e.prob.clone().unwrap();
                    }
                    vec![dist.into_iter().collect()]
                }
                _ => pg.out(sv).iter().map(|e| vec![(to(e.dst), Rational::one())]).collect(),
            };
        }
        let mut targets = vec![false; gain.len() + 1];
        targets[target] = true;
        let value = max_reach(&mdp, &targets)?.value;
        for v in &entries {
            if value[slot[v.0]] > max_switch {
                max_switch = value[slot[v.0]].clone();
            }
        }
    }
    let switching_ok = max_switch <= Rational::one() - &ms.params.delta;
    if !switching_ok {
        issues.push(format!("a Gain episode ends in Bailout with probability {max_switch}"));
    }
    Ok(ValidationReport {
        product_states: n,
        energy_safe,
        parity_ok,
        divergent_components: divergent,
        switching_ok,
        max_switch_probability: max_switch,
        bailout_entry_min_energy,
        issues,
    })
}

/// How the simulator resolves Min's choices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Adversary {
    Uniform,
    Md(MdStrategy),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimStats {
    pub trials: u64,
    pub horizon: u64,
    pub energy_safe: u64,
    pub violations: u64,
    /// Trials stopped because the strategy had no move.
    pub strategy_failures: u64,
    pub safe_fraction: f64,
    /// Minimal priority over the second half of each completed trial.
    pub tail_min_priority: BTreeMap<u32, u64>,
    pub start_to_gain: u64,
    pub gain_to_bailout: u64,
    pub bailout_to_gain: u64,
}

/// Monte Carlo runs of `ms` on `g`; trial `i` uses ChaCha8 seeded with
/// `seed` on stream `i`. The strategy is compiled into its reachable
/// product first; the true (unsaturated) energy is tracked separately.
pub fn simulate(g: &Game, ms: &ModeStrategy, adversary: &Adversary, horizon: u64, trials: u64, seed: u64) -> Result<SimStats> {
    if horizon == 0 || trials == 0 {
        return Err(Error::Precondition("horizon and trials must be positive".into()));
    }
    if ms.start.0 >= g.num_states() || ms.storage.num_edges != g.num_edges() {
        return Err(Error::Precondition("the strategy does not fit the game".into()));
    }
    let p = mode_product(g, ms.start, ms, &Caps::default())?;
    let n = p.base.len();
    let mut first = vec![0usize; n + 1];
    for &(src, _, _) in &p.raw {
        first[src + 1] += 1;
    }
    for i in 0..n {
        first[i + 1] += first[i];
    }
    let owner: Vec<Owner> = p.base.iter().map(|&v| g.owner(v)).collect();
    let prio: Vec<u32> = p.base.iter().map(|&v| g.priority(v)).collect();
    let mode: Vec<Mode> = p.mem[..n].iter().map(|m| m.unwrap().mode).collect();
    let mut moves: Vec<Move> = Vec::with_capacity(p.raw.len());
    let mut acc = 0.0;
    for (i, &(src, e, dst)) in p.raw.iter().enumerate() {
        if i == first[src] {
            acc = 0.0;
        }
        let fail = dst == usize::MAX || e.is_none();
        acc += e.and_then(|e| g.edge(e).prob.as_ref()).map_or(0.0, rat_to_f64);
        let switch = if fail {
            0
        } else {
            match (mode[src], mode[dst]) {
                (Mode::Start, Mode::Gain) => 1,
                (Mode::Gain, Mode::Bailout) => 2,
                (Mode::Bailout, Mode::Gain) => 3,
                _ => 0,
            }
        };
        moves.push(Move {
            dst: if fail { u32::MAX } else { dst as u32 },
            reward: e.map_or(0, |e| g.edge(e).reward),
            threshold: (acc * 4294967296.0).round() as u64,
            edge: e.unwrap_or(usize::MAX),
            switch,
        });
    }
    let mut st = SimStats {
        trials,
        horizon,
        energy_safe: 0,
        violations: 0,
        strategy_failures: 0,
        safe_fraction: 0.0,
        tail_min_priority: BTreeMap::new(),
        start_to_gain: 0,
        gain_to_bailout: 0,
        bailout_to_gain: 0,
    };
    let tail_from = horizon / 2;
    let mut switches = [0u64; 4];
    let k = i64::try_from(ms.params.k).map_err(|_| Error::Precondition("credit too large to simulate".into()))?;
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial);
        let mut x = 0usize;
        let mut energy = k;
        let mut tail_min = u32::MAX;
        let mut ok = true;
        for t in 0..horizon {
            let out = &moves[first[x]..first[x + 1]];
            let mv = match owner[x] {
                Owner::Max => &out[0],
                Owner::Min => match adversary {
                    Adversary::Uniform => &out[((rng.next_u32() as u64 * out.len() as u64) >> 32) as usize],
                    Adversary::Md(tau) => {
                        let want = tau.edge(p.base[x]);
                        out.iter().find(|m| Some(m.edge) == want).unwrap_or(&out[0])
                    }
                },
                Owner::Random => {
                    let u = rng.next_u32() as u64;
                    out.iter().find(|m| u < m.threshold).unwrap_or(&out[out.len() - 1])
                }
            };
            energy = energy.saturating_add(mv.reward);
            if energy < 0 {
                st.violations += 1;
                ok = false;
                break;
            }
            if mv.dst == u32::MAX {
                st.strategy_failures += 1;
                ok = false;
                break;
            }
            switches[mv.switch as usize] += 1;
            x = mv.dst as usize;
            if t >= tail_from {
                tail_min = tail_min.min(prio[x]);
            }
        }
        if ok {
            st.energy_safe += 1;
            *st.tail_min_priority.entry(tail_min).or_insert(0) += 1;
        }
    }
    st.start_to_gain = switches[1];
    st.gain_to_bailout = switches[2];
    st.bailout_to_gain = switches[3];
    st.safe_fraction = st.energy_safe as f64 / trials as f64;
    Ok(st)
}

/// One compiled product edge; `threshold` is the cumulative probability
/// scaled to 2^32 and `switch` codes the mode change it causes.
struct Move {
    dst: u32,
    reward: i64,
    threshold: u64,
    edge: usize,
    switch: u8,
}

fn rat_to_f64(p: &Rational) -> f64 {
    use num_traits::ToPrimitive;
    p.numer().to_f64().unwrap_or(0.0) / p.denom().to_f64().unwrap_or(1.0)
}
