//! Exact Markov chain and MDP numerics: sparse linear solves, reachability
//! probabilities, stationary distributions and maximal reachability.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::game::{Game, Owner, Rational, StateId, StateSet};

/// A finite MDP whose single controller picks actions; every action is a
/// distribution over successors.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Mdp {
    pub actions: Vec<Vec<Vec<(usize, Rational)>>>,
}

impl Mdp {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn add_state(&mut self) -> usize {
        self.actions.push(Vec::new());
        self.actions.len() - 1
    }

    fn predecessors(&self) -> Vec<Vec<(usize, usize)>> {
        let mut pred = vec![Vec::new(); self.len()];
        for (v, acts) in self.actions.iter().enumerate() {
            for (a, dist) in acts.iter().enumerate() {
                for &(w, _) in dist {
                    pred[w].push((v, a));
                }
            }
        }
        pred
    }

    /// The controller is Min or Max of `g`; Random states become their
    /// distribution, the other player's states must have out-degree one.
    pub fn from_game(g: &Game, controller: Owner) -> Result<Mdp> {
        let mut actions = Vec::with_capacity(g.num_states());
        for s in g.ids() {
            let owner = g.owner(s);
            if owner == Owner::Random {
                actions.push(vec![g.out(s).iter().map(|e| (e.dst.0, e.prob.clone().unwrap())).collect()]);
            } else if owner == controller {
                actions.push(g.out(s).iter().map(|e| vec![(e.dst.0, Rational::one())]).collect());
            } else if g.out(s).len() == 1 {
                actions.push(vec![vec![(g.out(s)[0].dst.0, Rational::one())]]);
            } else {
                return Err(Error::Precondition(format!("state {s} of the frozen player has a free choice")));
            }
        }
        Ok(Mdp { actions })
    }
}

/// Solves `x = P x + b` over the unknowns `0..n` where `rows[v]` lists the
/// coefficients of P (unknowns only). Sparse Gaussian elimination in index
/// order; the system must be nonsingular.
pub fn solve_fixed_point(mut rows: Vec<BTreeMap<usize, Rational>>, mut b: Vec<Rational>) -> Result<Vec<Rational>> {
    let n = rows.len();
    let mut users: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (v, row) in rows.iter().enumerate() {
        for &w in row.keys() {
            if w != v {
                users[w].push(v);
            }
        }
    }
    for v in 0..n {
        let self_coef = rows[v].remove(&v).unwrap_or_else(Rational::zero);
        let denom = Rational::one() - self_coef;
        if denom.is_zero() {
            return Err(Error::Internal("singular linear system".into()));
        }
        if !denom.is_one() {
            for c in rows[v].values_mut() {
                *c /= &denom;
            }
            b[v] /= &denom;
        }
        let row_v = std::mem::take(&mut rows[v]);
        let b_v = b[v].clone();
        let mut us = std::mem::take(&mut users[v]);
        us.sort_unstable();
        us.dedup();
        for u in us {
            if u <= v {
                continue;
            }
            let Some(f) = rows[u].remove(&v) else { continue };
            for (&w, c) in &row_v {
                let entry = rows[u].entry(w).or_insert_with(Rational::zero);
                *entry += &f * c;
                if w != u {
                    users[w].push(u);
                }
            }
            b[u] += &f * &b_v;
        }
        rows[v] = row_v;
    }
    // back substitution: row v only mentions unknowns > v now
    let mut x = vec![Rational::zero(); n];
    for v in (0..n).rev() {
        let mut val = b[v].clone();
        for (&w, c) in &rows[v] {
            debug_assert!(w > v);
            val += c * &x[w];
        }
        x[v] = val;
    }
    Ok(x)
}

/// States that reach `targets` with positive probability for some choice.
fn positive_reach(mdp: &Mdp, targets: &[bool], pred: &[Vec<(usize, usize)>]) -> Vec<bool> {
    let mut seen = targets.to_vec();
    let mut stack: Vec<usize> = (0..mdp.len()).filter(|&v| targets[v]).collect();
    while let Some(w) = stack.pop() {
        for &(v, _) in &pred[w] {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen
}

/// States from which some policy reaches `targets` with probability one.
fn sure_reach(mdp: &Mdp, targets: &[bool], pred: &[Vec<(usize, usize)>]) -> Vec<bool> {
    let n = mdp.len();
    let mut region = vec![true; n];
    loop {
        // actions that stay inside `region`
        let safe: Vec<Vec<bool>> = mdp
            .actions
            .iter()
            .map(|acts| acts.iter().map(|d| d.iter().all(|&(w, _)| region[w])).collect())
            .collect();
        let mut z: Vec<bool> = (0..n).map(|v| region[v] && targets[v]).collect();
        let mut stack: Vec<usize> = (0..n).filter(|&v| z[v]).collect();
        while let Some(w) = stack.pop() {
            for &(v, a) in &pred[w] {
                if !z[v] && region[v] && safe[v][a] {
                    z[v] = true;
                    stack.push(v);
                }
            }
        }
        if z == region {
            return z;
        }
        region = z;
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaxReach {
    pub value: Vec<Rational>,
    pub policy: Vec<usize>,
}

/// Exact value of a fixed policy for reaching `targets`.
pub fn policy_reach(mdp: &Mdp, policy: &[usize], targets: &[bool]) -> Result<Vec<Rational>> {
    let n = mdp.len();
    let single = Mdp {
        actions: (0..n)
            .map(|v| if mdp.actions[v].is_empty() { Vec::new() } else { vec![mdp.actions[v][policy[v]].clone()] })
            .collect(),
    };
    let pred = single.predecessors();
    let pos = positive_reach(&single, targets, &pred);
    let one = sure_reach(&single, targets, &pred);
    let unknown: Vec<usize> = (0..n).filter(|&v| pos[v] && !one[v]).collect();
    let mut slot = vec![usize::MAX; n];
    for (i, &v) in unknown.iter().enumerate() {
        slot[v] = i;
    }
    let mut rows = Vec::with_capacity(unknown.len());
    let mut b = Vec::with_capacity(unknown.len());
    for &v in &unknown {
        let mut row = BTreeMap::new();
        let mut c = Rational::zero();
        for (w, p) in &single.actions[v][0] {
            if one[*w] {
                c += p;
            } else if slot[*w] != usize::MAX {
                *row.entry(slot[*w]).or_insert_with(Rational::zero) += p;
            }
        }
        rows.push(row);
        b.push(c);
    }
    let x = solve_fixed_point(rows, b)?;
    Ok((0..n)
        .map(|v| {
            if one[v] {
                Rational::one()
            } else if slot[v] != usize::MAX {
                x[slot[v]].clone()
            } else {
                Rational::zero()
            }
        })
        .collect())
}

/// Maximal probability of reaching `targets`, by policy iteration with
/// exact evaluation. States without actions are absorbing.
pub fn max_reach(mdp: &Mdp, targets: &[bool]) -> Result<MaxReach> {
    let n = mdp.len();
    let pred = mdp.predecessors();
    let pos = positive_reach(mdp, targets, &pred);
    let one = sure_reach(mdp, targets, &pred);
    // initial policy: positive-reachability attractor choices (almost-sure ones where possible)
    let mut policy = vec![0usize; n];
    let mut stack: Vec<usize> = (0..n).filter(|&v| one[v]).collect();
    // inside the almost-sure region use the sure-reach attractor
    let mut layer: Vec<bool> = targets.to_vec();
    let mut frontier: Vec<usize> = (0..n).filter(|&v| targets[v]).collect();
    while let Some(w) = frontier.pop() {
        for &(v, a) in &pred[w] {
            if one[v] && !layer[v] && mdp.actions[v][a].iter().all(|&(u, _)| one[u]) {
                layer[v] = true;
                policy[v] = a;
                frontier.push(v);
            }
        }
    }
    let mut reached: Vec<bool> = (0..n).map(|v| one[v]).collect();
    while let Some(w) = stack.pop() {
        for &(v, a) in &pred[w] {
            if !reached[v] && pos[v] {
                reached[v] = true;
                policy[v] = a;
                stack.push(v);
            }
        }
    }
    for _ in 0..10_000 {
        let value = policy_reach(mdp, &policy, targets)?;
        let mut changed = false;
        for v in 0..n {
            if one[v] || !pos[v] || mdp.actions[v].is_empty() {
                continue;
            }
            let eval = |a: usize| -> Rational { mdp.actions[v][a].iter().map(|(w, p)| p * &value[*w]).sum() };
            let current = eval(policy[v]);
            let mut best = (policy[v], current);
            for a in 0..mdp.actions[v].len() {
                let val = eval(a);
                if val > best.1 {
                    best = (a, val);
                }
            }
            if best.0 != policy[v] {
                policy[v] = best.0;
                changed = true;
            }
        }
        if !changed {
            return Ok(MaxReach { value, policy });
        }
    }
    Err(Error::Internal("policy iteration did not converge".into()))
}

/// Reachability probabilities in a Markov chain.
pub fn reach_probabilities(mc: &Game, targets: &StateSet) -> Result<Vec<Rational>> {
    let mdp = Mdp::from_game(mc, Owner::Max)?;
    if mdp.actions.iter().any(|a| a.len() > 1) {
        return Err(Error::Precondition("a Markov chain is required".into()));
    }
    policy_reach(&mdp, &vec![0; mc.num_states()], &mc.mask(targets))
}

/// Dense exact Gaussian elimination for `A x = b`; `None` when singular.
pub fn solve_dense(mut a: Vec<Vec<Rational>>, mut b: Vec<Rational>) -> Option<Vec<Rational>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, piv);
        b.swap(col, piv);
        let p = a[col][col].clone();
        for j in col..n {
            a[col][j] /= &p;
        }
        b[col] /= &p;
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for j in col..n {
                    let delta = &f * &a[col][j];
                    a[r][j] -= delta;
                }
                let delta = &f * &b[col];
                b[r] -= delta;
            }
        }
    }
    Some(b)
}

/// Stationary distribution of a bottom component, by solving πP = π, Σπ = 1.
pub fn stationary_distribution(mc: &Game, component: &StateSet) -> Result<BTreeMap<StateId, Rational>> {
    let states: Vec<StateId> = component.iter().copied().collect();
    let pos: BTreeMap<StateId, usize> = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let n = states.len();
    if n == 0 {
        return Err(Error::Precondition("empty component".into()));
    }
    // rows: (P^T - I) π = 0, last row replaced by Σπ = 1
    let mut a = vec![vec![Rational::zero(); n]; n];
    for (i, &s) in states.iter().enumerate() {
        if mc.is_free(s) {
            return Err(Error::Precondition(format!("state {s} has a free choice")));
        }
        a[i][i] -= Rational::one();
        for e in mc.out(s) {
            let j = *pos
                .get(&e.dst)
                .ok_or_else(|| Error::Precondition(format!("component is not closed at state {s}")))?;
            a[j][i] += e.prob.clone().unwrap_or_else(Rational::one);
        }
    }
    let mut b = vec![Rational::zero(); n];
    a[n - 1] = vec![Rational::one(); n];
    b[n - 1] = Rational::one();
    let pi = solve_dense(a, b).ok_or_else(|| Error::Precondition("component is not irreducible".into()))?;
    Ok(states.into_iter().zip(pi).collect())
}

/// Long-run average reward of a bottom component: Σ π(s) · E[reward at s].
pub fn stationary_mean_payoff(mc: &Game, component: &StateSet) -> Result<Rational> {
    let pi = stationary_distribution(mc, component)?;
    Ok(pi.iter().map(|(&s, p)| p * crate::game::expected_reward(mc, s)).sum())
}
