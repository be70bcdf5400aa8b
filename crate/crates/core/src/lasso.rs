//! Exact classification of ultimately periodic runs.

use num_traits::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{Game, Rational};

/// A run `prefix · cycle^ω`, given as edge indices of a game.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LassoRun {
    pub prefix: Vec<usize>,
    pub cycle: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LimClass {
    NegInf,
    Finite,
    PosInf,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObjectiveReport {
    /// `en_k[k]`: every prefix has cost at least `-k`.
    pub en_k: Vec<bool>,
    /// `storage_l[l]`: every infix has cost at least `-l`.
    pub storage_l: Vec<bool>,
    pub liminf_class: LimClass,
    pub limsup_class: LimClass,
    pub parity: bool,
    pub mean_payoff: Rational,
    /// Least sufficient initial credit, if any.
    pub min_credit: Option<u64>,
    /// Least sufficient storage bound, if any.
    pub min_storage: Option<u64>,
}

impl ObjectiveReport {
    pub fn storage(&self, k: usize, l: usize) -> bool {
        self.en_k[k] && self.storage_l[l]
    }

    /// Storage and credit, with parity or an unbounded supremum.
    pub fn bailout_limsup(&self, k: usize, l: usize) -> bool {
        self.storage(k, l) && (self.parity || self.limsup_class == LimClass::PosInf)
    }

    /// Storage and credit, with parity or an unbounded infimum.
    pub fn bailout_liminf(&self, k: usize, l: usize) -> bool {
        self.storage(k, l) && (self.parity || self.liminf_class == LimClass::PosInf)
    }

    /// Some-storage parity at credit `k`, or credit `k` with unbounded supremum.
    pub fn k_bailout(&self, k: usize) -> bool {
        let credit = self.en_k[k];
        (credit && self.min_storage.is_some() && self.parity)
            || (credit && self.limsup_class == LimClass::PosInf)
    }

    pub fn energy_parity(&self, k: usize) -> bool {
        self.en_k[k] && self.parity
    }
}

impl LassoRun {
    /// Checks that consecutive edges connect and that the cycle closes.
    pub fn check(&self, g: &Game) -> Result<()> {
        if self.cycle.is_empty() {
            return Err(Error::Precondition("lasso cycle is empty".into()));
        }
        let seq: Vec<usize> = self.prefix.iter().chain(self.cycle.iter()).copied().collect();
        if let Some(&bad) = seq.iter().find(|&&e| e >= g.num_edges()) {
            return Err(Error::Precondition(format!("edge {bad} is not in the game")));
        }
        for w in seq.windows(2) {
            if g.edge(w[0]).dst != g.edge(w[1]).src {
                return Err(Error::Precondition(format!(
                    "path inconsistency: edge ends in {} but the next starts in {}",
                    g.edge(w[0]).dst,
                    g.edge(w[1]).src
                )));
            }
        }
        let last = *self.cycle.last().unwrap();
        if g.edge(last).dst != g.edge(self.cycle[0]).src {
            return Err(Error::Precondition("lasso cycle does not close".into()));
        }
        Ok(())
    }
}

fn unrolled_extreme(costs: &[i64], cycle: &[i64], round: usize, pick: fn(i64, i64) -> i64) -> i64 {
    let mut sum: i64 = costs.iter().sum::<i64>() + cycle.iter().sum::<i64>() * round as i64;
    let mut best = sum;
    for c in cycle {
        sum += c;
        best = pick(best, sum);
    }
    best
}

pub fn classify_lasso(g: &Game, run: &LassoRun, k_max: usize, l_max: usize) -> Result<ObjectiveReport> {
    run.check(g)?;
    let prefix: Vec<i64> = run.prefix.iter().map(|&e| g.edge(e).reward).collect();
    let cycle: Vec<i64> = run.cycle.iter().map(|&e| g.edge(e).reward).collect();
    let total: i64 = cycle.iter().sum();

    let (min_credit, min_storage) = if total < 0 {
        (None, None)
    } else {
        // With a nonnegative cycle, prefix + one period covers every prefix
        // minimum and prefix + two periods every infix drop.
        let window: Vec<i64> = prefix.iter().chain(cycle.iter()).chain(cycle.iter()).copied().collect();
        let mut sum = 0i64;
        let mut lowest = 0i64;
        let mut highest = 0i64;
        let mut drop = 0i64;
        for (i, c) in window.iter().enumerate() {
            sum += c;
            if i < prefix.len() + cycle.len() {
                lowest = lowest.min(sum);
            }
            drop = drop.max(highest - sum);
            highest = highest.max(sum);
        }
        (Some((-lowest) as u64), Some(drop as u64))
    };

    let class = |grow: i64| match grow {
        d if d > 0 => LimClass::PosInf,
        d if d < 0 => LimClass::NegInf,
        _ => LimClass::Finite,
    };
    let inf_growth = unrolled_extreme(&prefix, &cycle, 2, i64::min) - unrolled_extreme(&prefix, &cycle, 1, i64::min);
    let sup_growth = unrolled_extreme(&prefix, &cycle, 2, i64::max) - unrolled_extreme(&prefix, &cycle, 1, i64::max);

    let parity = run.cycle.iter().map(|&e| g.priority(g.edge(e).src)).min().unwrap() % 2 == 0;
    let mean = Rational::new(total.into(), (cycle.len() as i64).into());
    debug_assert!(total != 0 || mean.is_zero());
    Ok(ObjectiveReport {
        en_k: (0..=k_max).map(|k| min_credit.is_some_and(|c| c <= k as u64)).collect(),
        storage_l: (0..=l_max).map(|l| min_storage.is_some_and(|c| c <= l as u64)).collect(),
        liminf_class: class(inf_growth),
        limsup_class: class(sup_growth),
        parity,
        mean_payoff: mean,
        min_credit,
        min_storage,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{Edge, Owner, State};

    fn loop_game(reward: i64, prio: u32) -> Game {
        Game::new("", vec![State { owner: Owner::Max, priority: prio }], vec![Edge::new(0, 0, reward)]).unwrap()
    }

    #[test]
    fn positive_loop() {
        let g = loop_game(1, 0);
        let r = classify_lasso(&g, &LassoRun { prefix: vec![], cycle: vec![0] }, 3, 3).unwrap();
        assert!(r.en_k[0]);
        assert_eq!(r.liminf_class, LimClass::PosInf);
        assert!(r.parity);
    }

    #[test]
    fn negative_loop() {
        let g = loop_game(-1, 0);
        let r = classify_lasso(&g, &LassoRun { prefix: vec![], cycle: vec![0] }, 5, 5).unwrap();
        assert!(r.en_k.iter().all(|b| !b));
        assert_eq!(r.liminf_class, LimClass::NegInf);
    }

    #[test]
    fn up_down_cycle() {
        let g = Game::new(
            "",
            vec![State { owner: Owner::Max, priority: 2 }, State { owner: Owner::Max, priority: 1 }],
            vec![Edge::new(0, 1, 1), Edge::new(1, 0, -1)],
        )
        .unwrap();
        let r = classify_lasso(&g, &LassoRun { prefix: vec![], cycle: vec![0, 1] }, 2, 2).unwrap();
        assert!(!r.storage_l[0]);
        assert!(r.storage_l[1]);
        assert!(!r.parity);
        assert!(r.mean_payoff.is_zero());
        assert_eq!(r.liminf_class, LimClass::Finite);
    }

    #[test]
    fn inconsistent_path_is_rejected() {
        let g = Game::new(
            "",
            vec![State { owner: Owner::Max, priority: 0 }; 2],
            vec![Edge::new(0, 0, 0), Edge::new(1, 1, 0)],
        )
        .unwrap();
        assert!(classify_lasso(&g, &LassoRun { prefix: vec![0], cycle: vec![1] }, 0, 0).is_err());
    }
}
