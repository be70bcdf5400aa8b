mod common;

use common::*;
use enpar::bailout::Pipeline;
use enpar::gadgets::{blowup, energy_trade, is_normalized, negotiation, normalize_random};
use enpar::gain::{assemble_g2_full, ssg_as_gain};
use enpar::game::{rat, Rational};
use enpar::generate::generate;
use enpar::oracle::md_as_parity;
use enpar::parity::zielonka;
use enpar::Caps;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn pipeline_provenance_composes_to_identity(g in games(small(5))) {
        let p = Pipeline::build(&g).unwrap();
        let through = |v: usize| p.g_doubleprime.origin[v].and_then(|u| p.g_prime.origin[u.0]);
        for s in g.ids() {
            prop_assert_eq!(through(s.0), Some(s));
            prop_assert_eq!(p.game().priority(s), g.priority(s));
        }
        // rewards of carried edges survive both stages
        for (e, o) in p.g_doubleprime.edge_origin.iter().enumerate() {
            if let Some(o) = o {
                prop_assert_eq!(p.game().edge(e).reward, p.g_prime.output.edge(*o).reward);
            }
        }
    }

    #[test]
    fn energy_trade_keeps_non_positive_edges(g in games(small(5))) {
        let t = energy_trade(&g).unwrap();
        for s in g.ids() {
            prop_assert_eq!(t.output.state(s), g.state(s));
        }
        for (i, e) in g.edges().iter().enumerate().filter(|(_, e)| e.reward <= 0) {
            let j = t.edge_origin.iter().position(|&o| o == Some(i)).unwrap();
            prop_assert_eq!(t.output.edge(j), e);
        }
    }

    #[test]
    fn normalization_is_normalized(g in games(small(5))) {
        prop_assert!(is_normalized(&normalize_random(&g).unwrap().output));
    }
}

#[test]
fn negotiation_preserves_almost_sure_parity() {
    let caps = Caps::default();
    for seed in 0..300 {
        let g = generate(seed, &small(5));
        let oracle = md_as_parity(&g, &caps).unwrap();
        let t = negotiation(&g).unwrap();
        let sol = zielonka(&t.output).unwrap();
        for s in g.ids() {
            assert_eq!(oracle.contains(&s), sol.winning(s), "seed {seed} state {s}");
        }
    }
}

#[test]
fn trade_ins_sacrifice_at_least_one() {
    let caps = Caps::default();
    let mut seen = 0;
    for seed in 0..200 {
        let g = generate(seed, &small(4));
        let g2 = assemble_g2_full(&g, &caps).unwrap();
        let gu = g2.collapsed.game();
        for t in &g2.trade_ins {
            let out = gu.out(t.state);
            let old: Rational = out.iter().map(|e| e.prob.clone().unwrap() * rat(e.reward, 1)).sum();
            let new: Rational = out.iter().zip(t.rewards).map(|(e, r)| e.prob.clone().unwrap() * rat(r, 1)).sum();
            assert!(new <= old.clone() - rat(1, 1), "seed {seed} {t:?}");
            assert_eq!(t.sacrifice(gu), old - new);
            seen += 1;
        }
    }
    assert!(seen > 0, "the corpus produces trade-ins");
}

#[test]
fn blowup_leaves_gain_unchanged() {
    let caps = Caps::default();
    for seed in 0..200 {
        let g = generate(seed, &small(4));
        let (t, f) = blowup(&g, &caps).unwrap();
        assert!(f >= 1);
        assert_eq!(ssg_as_gain(&g, &caps).unwrap().win, ssg_as_gain(&t.output, &caps).unwrap().win, "seed {seed}");
    }
}
