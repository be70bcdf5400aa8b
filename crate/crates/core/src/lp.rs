//! Exact rational linear programming (two-phase simplex, Bland's rule) and
//! the gain-bias programs built on it.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::game::{Game, MdStrategy, Owner, Rational, StateId, StateSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Lt,
    Eq,
    Ge,
    Gt,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Lt => "<",
            Relation::Eq => "=",
            Relation::Ge => ">=",
            Relation::Gt => ">",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    /// Free variables range over all rationals; others are nonnegative.
    pub free: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constraint {
    pub terms: Vec<(usize, Rational)>,
    pub relation: Relation,
    pub rhs: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearProgram {
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub sense: Sense,
    pub objective: Vec<(usize, Rational)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LpOutcome {
    Optimal { values: Vec<Rational>, objective: Rational },
    Infeasible,
    Unbounded,
}

impl LinearProgram {
    pub fn new(sense: Sense) -> LinearProgram {
        LinearProgram { variables: Vec::new(), constraints: Vec::new(), sense, objective: Vec::new() }
    }

    pub fn var(&mut self, name: impl Into<String>, free: bool) -> usize {
        self.variables.push(Variable { name: name.into(), free });
        self.variables.len() - 1
    }

    pub fn constrain(&mut self, terms: Vec<(usize, Rational)>, relation: Relation, rhs: Rational) {
        self.constraints.push(Constraint { terms, relation, rhs });
    }

    /// Plain-text listing of variables, constraints and objective.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let lin = |terms: &[(usize, Rational)]| {
            if terms.is_empty() {
                return "0".to_string();
            }
            terms
                .iter()
                .map(|(v, c)| format!("{} {}", c, self.variables[*v].name))
                .collect::<Vec<_>>()
                .join(" + ")
        };
        for v in &self.variables {
            let _ = writeln!(out, "var {} {}", v.name, if v.free { "free" } else { ">= 0" });
        }
        for c in &self.constraints {
            let _ = writeln!(out, "constraint {} {} {}", lin(&c.terms), c.relation.symbol(), c.rhs);
        }
        let sense = match self.sense {
            Sense::Maximize => "maximize",
            Sense::Minimize => "minimize",
        };
        let _ = writeln!(out, "objective {} {}", sense, lin(&self.objective));
        out
    }

    /// Checks a candidate point against every constraint exactly.
    pub fn satisfied_by(&self, values: &[Rational]) -> bool {
        self.variables.iter().zip(values).all(|(v, x)| v.free || !x.is_negative())
            && self.constraints.iter().all(|c| {
                let lhs: Rational = c.terms.iter().map(|(v, k)| k * &values[*v]).sum();
                match c.relation {
                    Relation::Le => lhs <= c.rhs,
                    Relation::Lt => lhs < c.rhs,
                    Relation::Eq => lhs == c.rhs,
                    Relation::Ge => lhs >= c.rhs,
                    Relation::Gt => lhs > c.rhs,
                }
            })
    }

    fn denominators_lcm(&self) -> BigInt {
        let mut d = BigInt::one();
        for c in &self.constraints {
            for (_, k) in &c.terms {
                d = d.lcm(k.denom());
            }
            d = d.lcm(c.rhs.denom());
        }
        d
    }
}

/// Dense simplex tableau over nonnegative columns. Row `m` is the objective
/// (reduced costs, to be maximised); the last column is the right-hand side.
struct Tableau {
    rows: Vec<Vec<Rational>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c].clone();
        for x in self.rows[r].iter_mut() {
            *x /= &p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for (x, y) in row.iter_mut().zip(&pivot_row) {
                if !y.is_zero() {
                    *x -= &f * y;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Maximises the objective row over the allowed columns with Bland's rule.
    /// Returns false when unbounded.
    fn optimize(&mut self, allowed: &dyn Fn(usize) -> bool) -> bool {
        let m = self.basis.len();
        loop {
            let obj = &self.rows[m];
            // the objective row stores -c_j (standard form); a negative entry improves
            let Some(enter) = (0..self.cols).find(|&j| allowed(j) && obj[j].is_negative()) else {
                return true;
            };
            let mut leave: Option<(usize, Rational)> = None;
            for i in 0..m {
                let a = &self.rows[i][enter];
                if a.is_positive() {
                    let ratio = &self.rows[i][self.cols] / a;
                    let better = match &leave {
                        None => true,
                        Some((li, lr)) => ratio < *lr || (ratio == *lr && self.basis[i] < self.basis[*li]),
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            match leave {
                None => return false,
                Some((r, _)) => self.pivot(r, enter),
            }
        }
    }
}

/// Solves a program whose constraints are all non-strict.
fn solve_nonstrict(lp: &LinearProgram) -> LpOutcome {
    // columns: split variables, then slack/surplus, then artificials
    let mut col_of: Vec<(usize, Option<usize>)> = Vec::new();
    let mut ncols = 0;
    for v in &lp.variables {
        if v.free {
            col_of.push((ncols, Some(ncols + 1)));
            ncols += 2;
        } else {
            col_of.push((ncols, None));
            ncols += 1;
        }
    }
    let n_struct = ncols;
    let m = lp.constraints.len();
    // normalised rows: coefficients over structural columns, relation, rhs >= 0
    let mut rows: Vec<(Vec<Rational>, Relation, Rational)> = Vec::with_capacity(m);
    for c in &lp.constraints {
        let mut coef = vec![Rational::zero(); n_struct];
        for (v, k) in &c.terms {
            let (p, q) = col_of[*v];
            coef[p] += k;
            if let Some(q) = q {
                coef[q] -= k;
            }
        }
        let mut rel = c.relation;
        let mut rhs = c.rhs.clone();
        if rhs.is_negative() {
            for x in coef.iter_mut() {
                *x = -x.clone();
            }
            rhs = -rhs;
            rel = match rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                other => other,
            };
        }
        rows.push((coef, rel, rhs));
    }
    let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let total = n_struct + n_slack + n_art;
    let mut t = Tableau { rows: Vec::with_capacity(m + 1), basis: vec![0; m], cols: total };
    let mut slack = n_struct;
    let mut art = n_struct + n_slack;
    let art_start = art;
    for (i, (coef, rel, rhs)) in rows.into_iter().enumerate() {
        let mut row = coef;
        row.resize(total + 1, Rational::zero());
        row[total] = rhs;
        match rel {
            Relation::Le => {
                row[slack] = Rational::one();
                t.basis[i] = slack;
                slack += 1;
            }
            Relation::Ge => {
                row[slack] = -Rational::one();
                slack += 1;
                row[art] = Rational::one();
                t.basis[i] = art;
                art += 1;
            }
            _ => {
                row[art] = Rational::one();
                t.basis[i] = art;
                art += 1;
            }
        }
        t.rows.push(row);
    }
    // phase one: maximise -sum(artificials)
    let mut obj = vec![Rational::zero(); total + 1];
    for j in art_start..total {
        obj[j] = Rational::one();
    }
    for i in 0..m {
        if t.basis[i] >= art_start {
            for j in 0..=total {
                obj[j] -= &t.rows[i][j];
            }
        }
    }
    t.rows.push(obj);
    t.optimize(&|_| true);
    if !t.rows[m][total].is_zero() {
        return LpOutcome::Infeasible;
    }
    // drive artificials out of the basis
    let mut i = 0;
    while i < t.basis.len() {
        if t.basis[i] >= art_start {
            if let Some(j) = (0..art_start).find(|&j| !t.rows[i][j].is_zero()) {
                t.pivot(i, j);
            } else {
                t.rows.remove(i);
                t.basis.remove(i);
                continue;
            }
        }
        i += 1;
    }
    let m = t.basis.len();
    // phase two objective row: -c for maximisation
    let mut obj = vec![Rational::zero(); total + 1];
    let sign = match lp.sense {
        Sense::Maximize => Rational::one(),
        Sense::Minimize => -Rational::one(),
    };
    for (v, k) in &lp.objective {
        let (p, q) = col_of[*v];
        obj[p] -= &sign * k;
        if let Some(q) = q {
            obj[q] += &sign * k;
        }
    }
    for i in 0..m {
        let b = t.basis[i];
        if !obj[b].is_zero() {
            let f = obj[b].clone();
            for j in 0..=total {
                obj[j] -= &f * &t.rows[i][j];
            }
        }
    }
    t.rows[m] = obj;
    t.rows.truncate(m + 1);
    if !t.optimize(&|j| j < art_start) {
        return LpOutcome::Unbounded;
    }
    let mut col_val = vec![Rational::zero(); total];
    for i in 0..m {
        col_val[t.basis[i]] = t.rows[i][total].clone();
    }
    let values: Vec<Rational> = col_of
        .iter()
        .map(|&(p, q)| match q {
            Some(q) => &col_val[p] - &col_val[q],
            None => col_val[p].clone(),
        })
        .collect();
    let objective = lp.objective.iter().map(|(v, k)| k * &values[*v]).sum();
    LpOutcome::Optimal { values, objective }
}

/// Solves `lp` exactly. Strict inequalities are tightened by a uniform
/// slack ε = min(1/(2·D), t*) where D is the lcm of the constraint
/// denominators times (m+1) and t* the largest uniform slack the program
/// admits (capped at 1); the program is infeasible when t* is not positive.
pub fn solve_lp(lp: &LinearProgram) -> LpOutcome {
    let strict = lp.constraints.iter().any(|c| matches!(c.relation, Relation::Lt | Relation::Gt));
    if !strict {
        return solve_nonstrict(lp);
    }
    let mut probe = lp.clone();
    probe.sense = Sense::Maximize;
    let t = probe.var("__slack", false);
    probe.objective = vec![(t, Rational::one())];
    for c in probe.constraints.iter_mut() {
        match c.relation {
            Relation::Lt => {
                c.terms.push((t, Rational::one()));
                c.relation = Relation::Le;
            }
            Relation::Gt => {
                c.terms.push((t, -Rational::one()));
                c.relation = Relation::Ge;
            }
            _ => {}
        }
    }
    probe.constrain(vec![(t, Rational::one())], Relation::Le, Rational::one());
    let best = match solve_nonstrict(&probe) {
        LpOutcome::Optimal { objective, .. } if objective.is_positive() => objective,
        _ => return LpOutcome::Infeasible,
    };
    let d = lp.denominators_lcm() * BigInt::from(lp.variables.len() + 1);
    let uniform = Rational::new(BigInt::one(), d * 2);
    let eps = if uniform < best { uniform } else { best };
    let mut tight = lp.clone();
    for c in tight.constraints.iter_mut() {
        match c.relation {
            Relation::Lt => {
                c.rhs -= &eps;
                c.relation = Relation::Le;
            }
            Relation::Gt => {
                c.rhs += &eps;
                c.relation = Relation::Ge;
            }
            _ => {}
        }
    }
    solve_nonstrict(&tight)
}

/// Gain and biases of a recurrent component, or of a trade-in program.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BiasSolution {
    pub gain: Option<Rational>,
    pub biases: BTreeMap<StateId, Rational>,
    pub feasible: bool,
    /// Total bit size of the returned values.
    pub size_bits: u64,
    /// The bound 4m²(m+1)(S+1) the size is checked against.
    pub size_bound: u64,
}

impl BiasSolution {
    pub fn within_size_bound(&self) -> bool {
        self.size_bits <= self.size_bound
    }

    pub fn bias(&self, s: StateId) -> Option<&Rational> {
        self.biases.get(&s)
    }
}

fn bits(r: &Rational) -> u64 {
    r.numer().bits() + r.denom().bits()
}

fn size_bound(m: usize, s: u64) -> u64 {
    let m = m as u64;
    4 * m * m * (m + 1) * (s + 1)
}

fn game_size_bits(g: &Game, states: &StateSet) -> u64 {
    let mut s = 0;
    for &u in states {
        for e in g.out(u) {
            s += 64 - e.reward.unsigned_abs().leading_zeros() as u64 + 1;
            if let Some(p) = &e.prob {
                s += bits(p);
            }
        }
    }
    s.max(1)
}

/// Exact gain of a bottom component of a Markov chain through the
/// gain-bias equations.
pub fn leaf_gain_lp(mc: &Game, component: &StateSet) -> Result<BiasSolution> {
    if component.is_empty() {
        return Err(Error::Precondition("empty component".into()));
    }
    if let Some(s) = component.iter().find(|&&s| mc.is_free(s)) {
        return Err(Error::Precondition(format!("state {s} has a free choice; a Markov chain is required")));
    }
    let within = mc.mask(component);
    let bottoms = crate::graph::bottom_sccs_in(mc, &within);
    let closed = component.iter().all(|&s| mc.successors(s).all(|t| component.contains(&t)));
    if !closed || bottoms.len() != 1 || bottoms[0] != *component {
        return Err(Error::Precondition("component is not a bottom strongly connected component".into()));
    }
    let mut lp = LinearProgram::new(Sense::Maximize);
    let g = lp.var("g", true);
    let var: BTreeMap<StateId, usize> = component.iter().map(|&s| (s, lp.var(format!("b{}", s), true))).collect();
    for &u in component {
        let mut terms: BTreeMap<usize, Rational> = BTreeMap::new();
        *terms.entry(var[&u]).or_insert_with(Rational::zero) += Rational::one();
        *terms.entry(g).or_insert_with(Rational::zero) += Rational::one();
        let mut rhs = Rational::zero();
        for e in mc.out(u) {
            let p = e.prob.clone().unwrap_or_else(Rational::one);
            *terms.entry(var[&e.dst]).or_insert_with(Rational::zero) -= &p;
            rhs += &p * Rational::from_integer(e.reward.into());
        }
        lp.constrain(terms.into_iter().filter(|(_, k)| !k.is_zero()).collect(), Relation::Eq, rhs);
    }
    let first = *component.iter().next().unwrap();
    lp.constrain(vec![(var[&first], Rational::one())], Relation::Eq, Rational::zero());
    lp.objective = vec![(g, Rational::one())];
    match solve_lp(&lp) {
        LpOutcome::Optimal { values, .. } => {
            debug_assert!(lp.satisfied_by(&values));
            let size_bits = values.iter().map(bits).sum();
            Ok(BiasSolution {
                gain: Some(values[g].clone()),
                biases: var.iter().map(|(&s, &v)| (s, values[v].clone())).collect(),
                feasible: true,
                size_bits,
                size_bound: size_bound(component.len() + 1, game_size_bits(mc, component)),
            })
        }
        other => Err(Error::Internal(format!("gain-bias equations of a bottom component unsolved: {other:?}"))),
    }
}

/// Nonnegative biases with `b_u < E[b_next + reward] - 2` at every state of
/// `region`, following `sigma` and `tau` at player states; minimises Σb.
pub fn tau_bias_program(
    g: &Game,
    sigma: &MdStrategy,
    tau: &MdStrategy,
    region: &StateSet,
) -> Result<(BiasSolution, LinearProgram)> {
    let mut lp = LinearProgram::new(Sense::Minimize);
    let mut var: BTreeMap<StateId, usize> = BTreeMap::new();
    let mut rows = Vec::new();
    for &u in region {
        let edges: Vec<usize> = match g.owner(u) {
            Owner::Random => g.out_range(u).collect(),
            Owner::Max => vec![sigma.edge(u).ok_or_else(|| Error::Precondition(format!("sigma undefined at {u}")))?],
            Owner::Min => vec![tau.edge(u).ok_or_else(|| Error::Precondition(format!("tau undefined at {u}")))?],
        };
        for &e in &edges {
            if !region.contains(&g.edge(e).dst) {
                return Err(Error::Precondition(format!("region is not closed at state {u}")));
            }
        }
        rows.push((u, edges));
    }
    for &u in region {
        var.insert(u, lp.var(format!("b{}", u), false));
    }
    for (u, edges) in &rows {
        let mut terms: BTreeMap<usize, Rational> = BTreeMap::new();
        *terms.entry(var[u]).or_insert_with(Rational::zero) += Rational::one();
        let mut rhs = Rational::from_integer(BigInt::from(-2));
        for &ei in edges {
            let e = g.edge(ei);
            let p = e.prob.clone().unwrap_or_else(Rational::one);
            *terms.entry(var[&e.dst]).or_insert_with(Rational::zero) -= &p;
            rhs += &p * Rational::from_integer(e.reward.into());
        }
        lp.constrain(terms.into_iter().filter(|(_, k)| !k.is_zero()).collect(), Relation::Lt, rhs);
    }
    lp.objective = var.values().map(|&v| (v, Rational::one())).collect();
    let bound = size_bound(region.len() + 1, game_size_bits(g, region));
    let sol = match solve_lp(&lp) {
        LpOutcome::Optimal { values, .. } => {
            if !lp.satisfied_by(&values) {
                return Err(Error::Internal("bias solution fails substitution".into()));
            }
            BiasSolution {
                gain: None,
                biases: var.iter().map(|(&s, &v)| (s, values[v].clone())).collect(),
                feasible: true,
                size_bits: values.iter().map(bits).sum(),
                size_bound: bound,
            }
        }
        LpOutcome::Infeasible => {
            BiasSolution { gain: None, biases: BTreeMap::new(), feasible: false, size_bits: 0, size_bound: bound }
        }
        LpOutcome::Unbounded => return Err(Error::Internal("bias program unbounded below zero".into())),
    };
    Ok((sol, lp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{rat, Edge, State};

    fn r(n: i64) -> Rational {
        Rational::from_integer(n.into())
    }

    #[test]
    fn bounded_maximum() {
        let mut lp = LinearProgram::new(Sense::Maximize);
        let g = lp.var("g", true);
        lp.constrain(vec![(g, r(1))], Relation::Le, r(3));
        lp.objective = vec![(g, r(1))];
        match solve_lp(&lp) {
            LpOutcome::Optimal { values, .. } => assert_eq!(values[g], r(3)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn infeasible_pair() {
        let mut lp = LinearProgram::new(Sense::Maximize);
        let g = lp.var("g", true);
        lp.constrain(vec![(g, r(1))], Relation::Le, r(0));
        lp.constrain(vec![(g, r(1))], Relation::Ge, r(1));
        lp.objective = vec![(g, r(1))];
        assert_eq!(solve_lp(&lp), LpOutcome::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        let mut lp = LinearProgram::new(Sense::Maximize);
        let x = lp.var("x", false);
        lp.constrain(vec![(x, r(1))], Relation::Ge, r(2));
        lp.objective = vec![(x, r(1))];
        assert_eq!(solve_lp(&lp), LpOutcome::Unbounded);
    }

    #[test]
    fn strict_inequalities() {
        // maximise x with x < 1: the optimum of the tightened program is below 1
        let mut lp = LinearProgram::new(Sense::Maximize);
        let x = lp.var("x", false);
        lp.constrain(vec![(x, r(1))], Relation::Lt, r(1));
        lp.objective = vec![(x, r(1))];
        match solve_lp(&lp) {
            LpOutcome::Optimal { values, .. } => {
                assert!(values[x] < r(1) && values[x] > r(0));
                assert!(lp.satisfied_by(&values));
            }
            other => panic!("{other:?}"),
        }
        let mut lp = LinearProgram::new(Sense::Maximize);
        let x = lp.var("x", false);
        lp.constrain(vec![(x, r(1))], Relation::Lt, r(0));
        assert_eq!(solve_lp(&lp), LpOutcome::Infeasible);
    }

    fn max_states(n: usize) -> Vec<State> {
        vec![State { owner: Owner::Max, priority: 0 }; n]
    }

    #[test]
    fn cycle_gain() {
        let g = Game::new("", max_states(2), vec![Edge::new(0, 1, 3), Edge::new(1, 0, 3)]).unwrap();
        let sol = leaf_gain_lp(&g, &g.all_states()).unwrap();
        assert_eq!(sol.gain, Some(r(3)));
        assert!(sol.within_size_bound());
        let g = Game::new("", max_states(2), vec![Edge::new(0, 1, 2), Edge::new(1, 0, -1)]).unwrap();
        assert_eq!(leaf_gain_lp(&g, &g.all_states()).unwrap().gain, Some(rat(1, 2)));
    }

    #[test]
    fn loop_and_coin_gains() {
        let g = Game::new("", max_states(1), vec![Edge::new(0, 0, 3)]).unwrap();
        assert_eq!(leaf_gain_lp(&g, &g.all_states()).unwrap().gain, Some(r(3)));
        let coin = Game::new(
            "",
            vec![State { owner: Owner::Random, priority: 0 }],
            vec![Edge::random(0, 0, 1, rat(1, 2)), Edge::random(0, 0, -1, rat(1, 2))],
        )
        .unwrap();
        assert_eq!(leaf_gain_lp(&coin, &coin.all_states()).unwrap().gain, Some(r(0)));
    }

    #[test]
    fn leaf_gain_rejects_transient_sets() {
        let g = Game::new("", max_states(2), vec![Edge::new(0, 1, 0), Edge::new(1, 1, 0)]).unwrap();
        assert!(leaf_gain_lp(&g, &g.all_states()).is_err());
    }

    #[test]
    fn bias_program_examples() {
        let none = MdStrategy::empty(Owner::Min);
        let g = Game::new("", max_states(1), vec![Edge::new(0, 0, 3)]).unwrap();
        let sigma = MdStrategy { owner: Owner::Max, choice: [(StateId(0), 0)].into() };
        let (sol, _) = tau_bias_program(&g, &sigma, &none, &g.all_states()).unwrap();
        assert!(sol.feasible);
        assert_eq!(sol.biases[&StateId(0)], r(0));

        let g = Game::new("", max_states(1), vec![Edge::new(0, 0, 2)]).unwrap();
        let (sol, _) = tau_bias_program(&g, &sigma, &none, &g.all_states()).unwrap();
        assert!(!sol.feasible);

        // entry 0 --(-1)--> 1 with a +3 loop at 1
        let g = Game::new("", max_states(2), vec![Edge::new(0, 1, -1), Edge::new(1, 1, 3)]).unwrap();
        let sigma = MdStrategy { owner: Owner::Max, choice: [(StateId(0), 0), (StateId(1), 1)].into() };
        let (sol, lp) = tau_bias_program(&g, &sigma, &none, &g.all_states()).unwrap();
        assert!(sol.feasible);
        assert_eq!(sol.biases[&StateId(0)], r(0));
        // b1 > b0 + 3 is forced; the minimiser sits just above it
        let b1 = sol.biases[&StateId(1)].clone();
        assert!(b1 > r(3) && b1 < r(4), "{b1}");
        assert!(lp.dump().contains("constraint"));
    }
}
