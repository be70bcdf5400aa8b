//! The decision procedure for almost-sure EN(k) ∩ Parity: the greatest
//! fixed point W of Gain and Bailout, then k-Bailout inside W.

use serde::Serialize;

use crate::bailout::{as_exists_bailout, storage_bound, Bounds, Pipeline};
use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::gain::ssg_as_gain;
use crate::game::{restrict, Game, StateId, StateSet, Subgame};
use crate::graph::legal_subgame;
use crate::storage::{credit_bound, StorageProduct};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FixedPointTrace {
    /// W₀ = V, W₁, … up to the fixed point (included once).
    pub iterations: Vec<StateSet>,
    pub converged_at: usize,
}

/// One step of the fixed point: Gain ∩ Bailout on the largest legal
/// subgame inside `w`.
pub fn step_w(g: &Game, w: &StateSet, caps: &Caps) -> Result<StateSet> {
    let keep = legal_subgame(g, w);
    if keep.is_empty() {
        return Ok(StateSet::new());
    }
    let sub = restrict(g, &keep)?;
    let gain = ssg_as_gain(&sub.game, caps)?.win;
    let bail = as_exists_bailout(&sub.game, caps)?;
    Ok(sub.lift(&gain.intersection(&bail).copied().collect()))
}

pub fn compute_w(g: &Game, caps: &Caps) -> Result<(StateSet, FixedPointTrace)> {
    let mut iterations = vec![g.all_states()];
    loop {
        let prev = iterations.last().unwrap();
        let next = step_w(g, prev, caps)?;
        if next == *prev {
            break;
        }
        if !next.is_subset(prev) || iterations.len() > g.num_states() {
            return Err(Error::Internal("fixed point iteration is not shrinking".into()));
        }
        iterations.push(next);
    }
    let converged_at = iterations.len() - 1;
    Ok((iterations[converged_at].clone(), FixedPointTrace { iterations, converged_at }))
}

/// W together with the k-Bailout product on the subgame over W, answering
/// decisions for every credit.
#[derive(Clone, Debug)]
pub struct Decider {
    pub w: StateSet,
    pub trace: FixedPointTrace,
    pub bounds: Option<Bounds>,
    sub: Option<Subgame>,
    pipeline: Option<Pipeline>,
    product: Option<StorageProduct>,
    num_states: usize,
}

impl Decider {
    pub fn new(g: &Game, caps: &Caps) -> Result<Decider> {
        let (w, trace) = compute_w(g, caps)?;
        let mut d = Decider { w, trace, bounds: None, sub: None, pipeline: None, product: None, num_states: g.num_states() };
        if !d.w.is_empty() {
            let sub = restrict(g, &d.w)?;
            let pipeline = Pipeline::build(&sub.game)?;
            let l = caps.l_override.unwrap_or_else(|| storage_bound(&sub.game));
            d.bounds = Some(Bounds {
                l,
                k: credit_bound(pipeline.game()),
                r: sub.game.max_abs_reward().max(1),
                c: (sub.game.max_priority() as u64).max(1),
                n_v: sub.game.num_states() as u64,
            });
            d.product = Some(StorageProduct::build(pipeline.game(), l, None, caps)?);
            d.sub = Some(sub);
            d.pipeline = Some(pipeline);
        }
        Ok(d)
    }

    fn check(&self, s: StateId) -> Result<()> {
        if s.0 >= self.num_states {
            return Err(Error::Precondition(format!("state {s} is not in the game")));
        }
        Ok(())
    }

    /// s ∈ AS{k-Bailout} in the subgame over W, with k clamped to K.
    pub fn decide(&self, s: StateId, k: u64) -> Result<bool> {
        self.check(s)?;
        let (Some(sub), Some(prod), Some(b)) = (&self.sub, &self.product, &self.bounds) else {
            return Ok(false);
        };
        let Some(t) = sub.to_sub(s) else { return Ok(false) };
        Ok(prod.wins(t, k.min(b.k)))
    }

    pub fn exists_credit(&self, s: StateId) -> Result<bool> {
        self.check(s)?;
        Ok(self.w.contains(&s))
    }

    /// Least k with `decide(s, k)`, by binary search over [0, K].
    pub fn minimal_credit(&self, s: StateId) -> Result<Option<u64>> {
        if !self.exists_credit(s)? {
            return Ok(None);
        }
        let hi = self.bounds.as_ref().map_or(0, |b| b.k);
        if !self.decide(s, hi)? {
            return Err(Error::Internal(format!("state {s} is in W but loses with credit K")));
        }
        let (mut lo, mut hi) = (0u64, hi);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if self.decide(s, mid)? {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        Ok(Some(lo))
    }

    /// The subgame over W (absent when W is empty).
    pub fn subgame(&self) -> Option<&Subgame> {
        self.sub.as_ref()
    }

    /// G′ and G″ of the subgame over W.
    pub fn pipeline(&self) -> Option<&Pipeline> {
        self.pipeline.as_ref()
    }

    /// The storage product on G″ with counters up to L.
    pub fn product(&self) -> Option<&StorageProduct> {
        self.product.as_ref()
    }
}

pub fn decide(g: &Game, s: StateId, k: u64, caps: &Caps) -> Result<bool> {
    Decider::new(g, caps)?.decide(s, k)
}

pub fn exists_credit(g: &Game, s: StateId, caps: &Caps) -> Result<bool> {
    Decider::new(g, caps)?.exists_credit(s)
}

pub fn minimal_credit_as(g: &Game, s: StateId, caps: &Caps) -> Result<Option<u64>> {
    Decider::new(g, caps)?.minimal_credit(s)
}
