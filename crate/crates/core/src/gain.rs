//! Almost-sure Gain (bounded-below cumulative reward and Parity): the MDP
//! solver, the SSG solver over MD minimizer strategies, and the G₁ → G₂ →
//! G₃ certificate machinery with both certificate checkers.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Signed;
use serde::{Deserialize, Serialize};

use crate::bailout::{storage_union, StorageUnion};
use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::gadgets::{self, assemble_g2, collapse, normalize_random, prune_to_candidate, Transform, TradeIn};
use crate::game::{fix_strategy, restrict, set_of, FdStrategy, Game, MdStrategy, Owner, StateId, StateSet};
use crate::graph::{self, ComponentKind, ComponentSet, RandomAs};
use crate::lp::{leaf_gain_lp, tau_bias_program};
use crate::oracle::{enumerate_md, enumerate_md_in};
use crate::storage::CreditTable;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WitnessKind {
    MdpReach,
    Enumeration,
    G3Certificate,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GainWitness {
    pub kind: WitnessKind,
    /// Reach strategy towards A ∪ B (MDPs) or none.
    pub strategy: Option<MdStrategy>,
    pub certificate: Option<G3Certificate>,
    pub tau_star: Option<MdStrategy>,
}

/// Per end component: the flags behind the awesome predicate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AwesomeFlags {
    pub even_min_priority: bool,
    pub positive_leaf: bool,
    pub safe_leaf: bool,
}

impl AwesomeFlags {
    pub fn awesome(&self) -> bool {
        (self.even_min_priority && self.positive_leaf) || self.safe_leaf
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AwesomeReport {
    pub components: ComponentSet,
    pub flags: Vec<AwesomeFlags>,
}

/// Classifies the maximal end components of an MDP.
pub fn awesome_report(mdp: &Game, caps: &Caps) -> Result<AwesomeReport> {
    let mecs = graph::max_end_components(mdp)?;
    let mut flags = Vec::new();
    for c in &mecs.components {
        let sub = restrict(mdp, c)?;
        let mut positive = false;
        let mut safe = false;
        for sigma in enumerate_md(&sub.game, Owner::Max, caps)? {
            let mc = fix_strategy(&sub.game, &sigma)?;
            for leaf in graph::bsccs(&mc)?.components {
                if leaf_gain_lp(&mc, &leaf)?.gain.unwrap().is_positive() {
                    positive = true;
                }
                // a safe leaf spans the whole component
                if leaf.len() == sub.game.num_states()
                    && min_priority(&mc, &leaf) % 2 == 0
                    && !graph::bad_cycle_in(&mc, &mc.mask(&leaf), true)
                {
                    safe = true;
                }
            }
        }
        flags.push(AwesomeFlags { even_min_priority: min_priority(mdp, c) % 2 == 0, positive_leaf: positive, safe_leaf: safe });
    }
    Ok(AwesomeReport { components: ComponentSet { kind: ComponentKind::Mec, components: mecs.components }, flags })
}

fn min_priority(g: &Game, set: &StateSet) -> u32 {
    set.iter().map(|&s| g.priority(s)).min().unwrap_or(u32::MAX)
}

/// Almost-sure Gain on an MDP.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MdpGain {
    pub win: StateSet,
    /// States winning storage-parity for some credit.
    pub a: StateSet,
    /// States of end components with an even dominating priority where
    /// Max can reach a positive mean payoff.
    pub b: StateSet,
    pub witness: GainWitness,
}

/// Whether Max can achieve a positive mean payoff inside the end component `ec`.
fn positive_component(mdp: &Game, ec: &StateSet, caps: &Caps) -> Result<bool> {
    let rewards = ec.iter().flat_map(|&s| mdp.out(s).iter().filter(|e| ec.contains(&e.dst)).map(|e| e.reward));
    let (mut pos, mut neg) = (false, false);
    for r in rewards {
        pos |= r > 0;
        neg |= r < 0;
    }
    if !pos {
        return Ok(false);
    }
    if !neg {
        return Ok(true);
    }
    let sub = restrict(mdp, ec)?;
    for sigma in enumerate_md(&sub.game, Owner::Max, caps)? {
        let mc = fix_strategy(&sub.game, &sigma)?;
        for leaf in graph::bsccs(&mc)?.components {
            if leaf_gain_lp(&mc, &leaf)?.gain.unwrap().is_positive() {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// AS{Gain} = AS{◇(A ∪ B)} on an MDP (Min states must be frozen).
pub fn mdp_as_gain(mdp: &Game, caps: &Caps) -> Result<MdpGain> {
    if let Some(s) = mdp.ids().find(|&s| mdp.owner(s) == Owner::Min && mdp.is_free(s)) {
        return Err(Error::Precondition(format!("min state {s} is not frozen")));
    }
    let a = storage_union(mdp, caps)?;
    let n = mdp.num_states();
    let mut b = StateSet::new();
    for d in (0..=mdp.max_priority()).step_by(2) {
        let within: Vec<bool> = (0..n).map(|v| mdp.priority(StateId(v)) >= d).collect();
        for ec in graph::end_components_in(mdp, &within, Owner::Max) {
            if ec.is_subset(&b) || !ec.iter().any(|&s| mdp.priority(s) == d) {
                continue;
            }
            if positive_component(mdp, &ec, caps)? {
                b.extend(ec);
            }
        }
    }
    let targets: StateSet = a.union(&b).copied().collect();
    let reach = graph::as_reach(mdp, &targets);
    let witness =
        GainWitness { kind: WitnessKind::MdpReach, strategy: Some(reach.witness.clone()), certificate: None, tau_star: None };
    Ok(MdpGain { win: reach.states, a, b, witness })
}

/// Almost-sure Gain on an SSG by intersecting over MD minimizer strategies.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SsgGain {
    pub win: StateSet,
    pub tau_star: MdStrategy,
    /// Whether `tau_star` alone attains the intersection.
    pub tau_star_exact: bool,
    pub per_tau: Vec<(MdStrategy, StateSet)>,
}

pub fn ssg_as_gain(g: &Game, caps: &Caps) -> Result<SsgGain> {
    let mut per_tau = Vec::new();
    let mut win = g.all_states();
    for tau in enumerate_md(g, Owner::Min, caps)? {
        let w = mdp_as_gain(&fix_strategy(g, &tau)?, caps)?.win;
        win = win.intersection(&w).copied().collect();
        per_tau.push((tau, w));
    }
    let exact = per_tau.iter().position(|(_, w)| *w == win);
    let star = exact.unwrap_or_else(|| (0..per_tau.len()).min_by_key(|&i| per_tau[i].1.len()).unwrap());
    Ok(SsgGain { win, tau_star: per_tau[star].0.clone(), tau_star_exact: exact.is_some(), per_tau })
}

/// Certificate of non-membership: `s` loses Gain in `g[tau]`.
pub fn verify_conp_gain(g: &Game, tau: &MdStrategy, s: StateId, caps: &Caps) -> Result<bool> {
    if s.0 >= g.num_states() {
        return Err(Error::Precondition(format!("state {s} is not in the game")));
    }
    Ok(!mdp_as_gain(&fix_strategy(g, tau)?, caps)?.win.contains(&s))
}

/// Moves an MD strategy between games along a state map, matching edges by
/// mapped target and reward.
pub fn remap_strategy(
    from: &Game,
    to: &Game,
    strat: &MdStrategy,
    map: &dyn Fn(StateId) -> Option<StateId>,
) -> Result<MdStrategy> {
    let mut out = MdStrategy::empty(strat.owner);
    for (&s, &e) in &strat.choice {
        let Some(s2) = map(s) else { continue };
        if to.owner(s2) != strat.owner {
            continue;
        }
        let edge = from.edge(e);
        let d2 = map(edge.dst).ok_or_else(|| Error::Precondition(format!("target {} has no image", edge.dst)))?;
        let range = to.out_range(s2);
        let pick = range
            .clone()
            .find(|&i| to.edge(i).dst == d2 && to.edge(i).reward == edge.reward)
            .or_else(|| range.clone().find(|&i| to.edge(i).dst == d2))
            .ok_or_else(|| Error::Precondition(format!("no image of edge {s} -> {}", edge.dst)))?;
        out.choice.insert(s2, pick);
    }
    Ok(out)
}

/// G₁: normalized Random states and blown-up rewards. Normalization keeps
/// the input state ids.
#[derive(Clone, Debug)]
pub struct G1 {
    pub normalized: Transform,
    pub f: u64,
    pub game: Game,
}

pub fn build_g1(g: &Game, caps: &Caps) -> Result<G1> {
    let normalized = normalize_random(g)?;
    let (blown, f) = gadgets::blowup(&normalized.output, caps)?;
    Ok(G1 { normalized, f, game: blown.output.with_name(format!("{}/g1", g.name())) })
}

/// The collapsed game G_U with the maps between G₁ and G_U states.
#[derive(Clone, Debug)]
pub struct Collapsed {
    pub u: StateSet,
    pub transform: Transform,
    forward: Vec<Option<StateId>>,
}

impl Collapsed {
    pub fn new(g1: &Game, u: StateSet) -> Result<Collapsed> {
        let transform = collapse(g1, &u)?;
        let forward = transform.forward(g1.num_states());
        Ok(Collapsed { u, transform, forward })
    }

    pub fn game(&self) -> &Game {
        &self.transform.output
    }

    /// G_U state standing for a G₁ state (`u_a` for collapsed states).
    pub fn image(&self, s: StateId) -> StateId {
        if self.u.contains(&s) {
            StateId(self.game().num_states() - 1)
        } else {
            self.forward[s.0].expect("uncollapsed states survive")
        }
    }

    pub fn strategy(&self, g1: &Game, tau: &MdStrategy) -> Result<MdStrategy> {
        remap_strategy(g1, self.game(), tau, &|s| Some(self.image(s)))
    }
}

/// The collapse set of `g1` for a minimizer strategy: zero-mean safe
/// components of `g1[tau]` outside the positive parity components.
pub fn collapse_set(g1: &Game, tau: &MdStrategy, caps: &Caps) -> Result<StateSet> {
    let good = mdp_as_gain(&fix_strategy(g1, tau)?, caps)?.b;
    gadgets::zero_safe_components(g1, tau, &good, caps)
}

/// Trade-ins of one minimizer strategy of G_U: biases of the first MD Max
/// strategy on the gain region of `g_u[tau]` whose bias program is feasible.
pub fn tau_trade_ins(g_u: &Game, tau: &MdStrategy, index: usize, caps: &Caps) -> Result<(Option<MdStrategy>, Vec<TradeIn>)> {
    let mdp = fix_strategy(g_u, tau)?;
    let region = mdp_as_gain(&mdp, caps)?.win;
    if region.is_empty() {
        return Ok((None, Vec::new()));
    }
    for sigma in enumerate_md_in(g_u, Owner::Max, &region, caps)? {
        let (sol, _) = tau_bias_program(g_u, &sigma, tau, &region)?;
        if sol.feasible {
            return Ok((Some(sigma), gadgets::trade_in(g_u, index, &sol)?));
        }
    }
    Ok((None, Vec::new()))
}

/// G₂ with its ingredients. Trade-in `i` is state `base + i` of the game.
#[derive(Clone, Debug)]
pub struct G2 {
    pub g1: G1,
    pub tau_star: MdStrategy,
    pub collapsed: Collapsed,
    pub taus: Vec<MdStrategy>,
    pub sigmas: Vec<Option<MdStrategy>>,
    pub trade_ins: Vec<TradeIn>,
    pub transform: Transform,
}

impl G2 {
    pub fn game(&self) -> &Game {
        &self.transform.output
    }

    pub fn base(&self) -> usize {
        self.collapsed.game().num_states()
    }

    pub fn bound(&self) -> usize {
        2 * self.g1.game.num_states()
    }
}

pub fn assemble_g2_full(g: &Game, caps: &Caps) -> Result<G2> {
    let g1 = build_g1(g, caps)?;
    let ssg = ssg_as_gain(&g1.game, caps)?;
    let u = collapse_set(&g1.game, &ssg.tau_star, caps)?;
    let collapsed = Collapsed::new(&g1.game, u)?;
    let taus = enumerate_md(collapsed.game(), Owner::Min, caps)?;
    let mut sigmas = Vec::new();
    let mut trade_ins: Vec<TradeIn> = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, tau) in taus.iter().enumerate() {
        let (sigma, ts) = tau_trade_ins(collapsed.game(), tau, i, caps)?;
        sigmas.push(sigma);
        for t in ts {
            if seen.insert((t.state, t.rewards)) {
                trade_ins.push(t);
            }
        }
    }
    let transform = assemble_g2(collapsed.game(), &trade_ins)?;
    Ok(G2 { g1, tau_star: ssg.tau_star, collapsed, taus, sigmas, trade_ins, transform })
}

/// A G₃ certificate: the collapse set on G₁ and the kept trade-ins on G_U.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct G3Certificate {
    pub u: Vec<usize>,
    pub trade_ins: Vec<TradeIn>,
}

/// Checks a G₃ certificate for the queried states of `g`: rebuilds G₃ from
/// G₁, checks the trade-in bound and sacrifices, and solves storage-parity
/// for some credit. `true` means the certificate proves a.s. Gain.
pub fn verify_g3(g: &Game, cert: &G3Certificate, query: &StateSet, caps: &Caps) -> Result<BTreeMap<StateId, bool>> {
    if query.is_empty() {
        return Ok(BTreeMap::new());
    }
    let g1 = build_g1(g, caps)?;
    verify_g3_on(&g1.game, cert, query, caps)
}

pub fn verify_g3_on(g1: &Game, cert: &G3Certificate, query: &StateSet, caps: &Caps) -> Result<BTreeMap<StateId, bool>> {
    if let Some(s) = query.iter().find(|s| s.0 >= g1.num_states()) {
        return Err(Error::Precondition(format!("state {s} is not in the game")));
    }
    if let Some(&s) = cert.u.iter().find(|&&s| s >= g1.num_states()) {
        return Err(Error::Precondition(format!("collapse state {s} is not in the game")));
    }
    let bound = 2 * g1.num_states();
    let mut count: BTreeMap<StateId, usize> = BTreeMap::new();
    for t in &cert.trade_ins {
        *count.entry(t.state).or_default() += 1;
    }
    if let Some((s, c)) = count.into_iter().find(|&(_, c)| c > bound) {
        return Err(Error::Precondition(format!("{c} trade-ins at state {s}, more than {bound}")));
    }
    let collapsed = Collapsed::new(g1, cert.u.iter().map(|&s| StateId(s)).collect())?;
    let g3 = assemble_g2(collapsed.game(), &cert.trade_ins)?;
    let win = storage_union(&g3.output, caps)?;
    Ok(query.iter().map(|&s| (s, win.contains(&collapsed.image(s)))).collect())
}

/// Reads the product strategy at each Max state's least winning counter.
pub fn derive_sigma_min(h: &Game, credits: &CreditTable, sigma: &FdStrategy) -> Result<MdStrategy> {
    let mut out = MdStrategy::empty(Owner::Max);
    for p in h.ids().filter(|&p| h.owner(p) == Owner::Max) {
        let k = credits.get(p).ok_or_else(|| Error::Precondition(format!("state {p} is not winning")))?;
        let m = (k as usize).min(sigma.memory - 1);
        let e = sigma.choose(m, p).ok_or_else(|| Error::Internal(format!("no choice at ({p}, {k})")))?;
        out.choice.insert(p, e);
    }
    Ok(out)
}

/// σ_min of a storage-parity solution, as edges of the solved game.
pub fn sigma_min_of(h: &Game, su: &StorageUnion) -> Result<MdStrategy> {
    let mut out = MdStrategy::empty(Owner::Max);
    for p in h.ids().filter(|&p| h.owner(p) == Owner::Max) {
        let k = su.least_credit(p).ok_or_else(|| Error::Precondition(format!("state {p} is not winning")))?;
        let e = su.choice(p, k).ok_or_else(|| Error::Internal(format!("no choice at ({p}, {k})")))?;
        out.choice.insert(p, e);
    }
    Ok(out)
}

/// One level of the divide-and-conquer decomposition (states of the
/// decomposed game).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DncNode {
    pub states: StateSet,
    pub odd: Option<u32>,
    pub trap: StateSet,
    /// Attractor of the trap without the trap itself.
    pub band: StateSet,
    /// Edges chosen by σ_min and the attractor strategy at this level.
    pub choices: BTreeSet<usize>,
    pub children: Vec<DncNode>,
    /// Set when a subgame had to shrink to its winning part.
    pub shrunk: bool,
}

impl DncNode {
    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(DncNode::depth).max().unwrap_or(0)
    }

    pub fn all_choices(&self) -> BTreeSet<usize> {
        let mut out = self.choices.clone();
        for c in &self.children {
            out.extend(c.all_choices());
        }
        out
    }
}

/// Decomposes a game in which Max wins storage-parity everywhere.
pub fn decompose_dnc(h: &Game, caps: &Caps) -> Result<DncNode> {
    let su = StorageUnion::solve(h, caps)?;
    if let Some(s) = h.ids().find(|s| !su.win.contains(s)) {
        return Err(Error::Precondition(format!("max loses storage-parity from state {s}")));
    }
    dnc(h, &h.all_states(), caps, h.num_states() + 1)
}

fn dnc(h: &Game, keep: &StateSet, caps: &Caps, fuel: usize) -> Result<DncNode> {
    if fuel == 0 {
        return Err(Error::Internal("decomposition deeper than the number of states".into()));
    }
    let mut keep = graph::legal_subgame(h, keep);
    let mut shrunk = false;
    let (sub, su) = loop {
        if keep.is_empty() {
            return Ok(DncNode {
                states: keep,
                odd: None,
                trap: StateSet::new(),
                band: StateSet::new(),
                choices: BTreeSet::new(),
                children: Vec::new(),
                shrunk,
            });
        }
        let sub = restrict(h, &keep)?;
        let su = StorageUnion::solve(&sub.game, caps)?;
        if su.win.len() == sub.game.num_states() {
            break (sub, su);
        }
        shrunk = true;
        keep = graph::legal_subgame(h, &sub.lift(&su.win));
    };
    let g = &sub.game;
    let n = g.num_states();
    let mut choices: BTreeSet<usize> = BTreeSet::new();
    for (_, &e) in &sigma_min_of(g, &su)?.choice {
        choices.insert(sub.orig_edge(h, e));
    }
    let lowest = g.ids().map(|s| g.priority(s)).min().unwrap();
    let odd = g.ids().map(|s| g.priority(s)).filter(|p| p % 2 == 1).min();
    let mut children = Vec::new();
    let trap: StateSet = match odd {
        Some(o) if o == lowest => {
            let so: Vec<bool> = (0..n).map(|v| g.priority(StateId(v)) == o).collect();
            let all = vec![true; n];
            let attr = graph::attractor_in(g, &all, Owner::Min, RandomAs::Ally, &so).0;
            let mut cand: Vec<bool> = attr.iter().map(|&a| !a).collect();
            loop {
                let t = set_of(&graph::trap_mask(g, &cand, true));
                if t.is_empty() {
                    return Err(Error::Internal("empty winning trap".into()));
                }
                let inner = restrict(g, &t)?;
                let w = inner.lift(&storage_union(&inner.game, caps)?);
                if w == t {
                    break t;
                }
                cand = g.mask(&w);
            }
        }
        Some(o) => g.ids().filter(|&s| g.priority(s) < o).collect(),
        None => g.ids().filter(|&s| g.priority(s) == lowest).collect(),
    };
    let (reach, witness) = graph::as_reach_in(g, &vec![true; n], &g.mask(&trap));
    for (v, e) in witness.iter().enumerate() {
        if let (Some(e), false) = (e, trap.contains(&StateId(v))) {
            choices.insert(sub.orig_edge(h, *e));
        }
    }
    if odd.is_some_and(|o| o == lowest) {
        children.push(dnc(h, &sub.lift(&trap), caps, fuel - 1)?);
    }
    let rest: StateSet = (0..n).filter(|&v| !reach[v]).map(StateId).collect();
    if !rest.is_empty() {
        children.push(dnc(h, &sub.lift(&rest), caps, fuel - 1)?);
    }
    let band = set_of(&reach).difference(&trap).map(|&s| sub.to_orig(s)).collect();
    Ok(DncNode { states: sub.lift(&g.all_states()), odd, trap: sub.lift(&trap), band, choices, children, shrunk })
}

/// Which selection produced a G₃.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum G3Source {
    Decomposition,
    ProductStrategy,
    Everything,
}

#[derive(Clone, Debug)]
pub struct G3Synthesis {
    pub certificate: G3Certificate,
    pub source: G3Source,
    pub g2: G2,
    /// States of the input game winning Gain.
    pub win: StateSet,
}

/// Trade-ins (indices) entered by a set of G₂ edges.
fn used_trade_ins(g2: &G2, edges: impl IntoIterator<Item = usize>) -> BTreeSet<usize> {
    let base = g2.base();
    edges.into_iter().map(|e| g2.game().edge(e).dst.0).filter(|&d| d >= base).map(|d| d - base).collect()
}

fn within_bound(g2: &G2, keep: &BTreeSet<usize>) -> bool {
    let mut count: BTreeMap<StateId, usize> = BTreeMap::new();
    for &i in keep {
        *count.entry(g2.trade_ins[i].state).or_default() += 1;
    }
    count.values().all(|&c| c <= g2.bound())
}

/// Builds G₂ and selects a concise G₃ that verifies on every winning state.
pub fn synthesize_g3(g: &Game, caps: &Caps) -> Result<G3Synthesis> {
    let g2 = assemble_g2_full(g, caps)?;
    let g1 = &g2.g1.game;
    let win: StateSet = ssg_as_gain(g, caps)?.win;
    let query: StateSet = win.clone();
    let u: Vec<usize> = g2.collapsed.u.iter().map(|s| s.0).collect();
    let check = |keep: &BTreeSet<usize>| -> Result<Option<G3Certificate>> {
        if !within_bound(&g2, keep) {
            return Ok(None);
        }
        let (_, kept) = prune_to_candidate(g2.collapsed.game(), &g2.trade_ins, keep, g2.bound())?;
        let cert = G3Certificate { u: u.clone(), trade_ins: kept };
        let verdict = verify_g3_on(g1, &cert, &query, caps)?;
        Ok(verdict.values().all(|&b| b).then_some(cert))
    };
    let base = g2.base();
    let image: StateSet = g2.game().ids().filter(|s| s.0 < base).collect();
    let su = StorageUnion::solve(g2.game(), caps)?;
    let winning: StateSet = su.win.clone();
    // decomposition of the winning part
    let legal = graph::legal_subgame(g2.game(), &winning);
    if !legal.is_empty() {
        let sub = restrict(g2.game(), &legal)?;
        if let Ok(tree) = decompose_dnc(&sub.game, caps) {
            let edges = tree.all_choices().into_iter().map(|e| sub.orig_edge(g2.game(), e));
            let keep = used_trade_ins(&g2, edges);
            if let Some(cert) = check(&keep)? {
                return Ok(G3Synthesis { certificate: cert, source: G3Source::Decomposition, g2: g2.clone(), win });
            }
        }
    }
    // every choice of the product strategy
    let mut edges = Vec::new();
    for p in image.iter().filter(|&&p| g2.game().owner(p) == Owner::Max) {
        for r in 0..=su.l {
            if let Some(e) = su.choice(*p, r) {
                edges.push(e);
            }
        }
    }
    let keep = used_trade_ins(&g2, edges);
    if let Some(cert) = check(&keep)? {
        return Ok(G3Synthesis { certificate: cert, source: G3Source::ProductStrategy, g2: g2.clone(), win });
    }
    let keep: BTreeSet<usize> = (0..g2.trade_ins.len()).collect();
    if let Some(cert) = check(&keep)? {
        return Ok(G3Synthesis { certificate: cert, source: G3Source::Everything, g2: g2.clone(), win });
    }
    Err(Error::Internal("no G3 candidate verifies on the winning states".into()))
}
