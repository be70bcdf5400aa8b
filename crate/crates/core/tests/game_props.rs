mod common;

use common::*;
use enpar::game::{scale_rewards, Owner};
use enpar::lasso::classify_lasso;
use enpar::oracle::enumerate_md;
use enpar::parity::zielonka;
use enpar::{parse_game, to_json, to_text, Caps};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn text_and_json_round_trip(g in games(small(6))) {
        prop_assert_eq!(&parse_game(to_text(&g).as_bytes()).unwrap(), &g);
        let j = serde_json::to_string(&to_json(&g)).unwrap();
        prop_assert_eq!(&parse_game(j.as_bytes()).unwrap(), &g);
    }

    #[test]
    fn energy_parity_lassos_are_bailout((g, run) in lassos(6, 3)) {
        let r = classify_lasso(&g, &run, 6, 6).unwrap();
        for k in 0..=6 {
            if r.energy_parity(k) {
                prop_assert!(r.k_bailout(k), "k = {}", k);
            }
            for l in 0..=6 {
                if r.storage(k, l) && r.parity {
                    prop_assert!(r.k_bailout(k));
                }
            }
        }
    }

    #[test]
    fn limsup_and_liminf_bailout_agree((g, run) in lassos(6, 3)) {
        let r = classify_lasso(&g, &run, 6, 6).unwrap();
        for k in 0..=6 {
            for l in 0..=6 {
                prop_assert_eq!(r.bailout_limsup(k, l), r.bailout_liminf(k, l));
            }
        }
    }

    #[test]
    fn thresholds_scale_with_rewards((g, run) in lassos(5, 3), f in 1u64..4) {
        let r = classify_lasso(&g, &run, 4, 4).unwrap();
        let scaled = classify_lasso(&scale_rewards(&g, f), &run, 4 * f as usize, 4 * f as usize).unwrap();
        prop_assert_eq!(r.parity, scaled.parity);
        for k in 0..=4 {
            prop_assert_eq!(r.en_k[k], scaled.en_k[f as usize * k]);
            prop_assert_eq!(r.storage_l[k], scaled.storage_l[f as usize * k]);
        }
    }
}

#[test]
fn zielonka_strategies_realize_their_regions() {
    let caps = Caps::default();
    for seed in 0..150 {
        let g = enpar::generate::generate(seed, &two_player(6));
        let sol = zielonka(&g).unwrap();
        let (sigma, tau) = (sol.max_strategy(&g), sol.min_strategy(&g));
        let mc = play(&g, &sigma, &tau);
        for s in g.ids() {
            let r = classify_lasso(&mc, &follow(&mc, s), 0, 0).unwrap();
            assert_eq!(r.parity, sol.winning(s), "seed {seed} state {s}");
        }
        // the winner's strategy wins against every opponent reply
        for reply in enumerate_md(&g, Owner::Min, &caps).unwrap() {
            let mc = play(&g, &sigma, &reply);
            for s in g.ids().filter(|&s| sol.winning(s)) {
                assert!(classify_lasso(&mc, &follow(&mc, s), 0, 0).unwrap().parity, "seed {seed} state {s}");
            }
        }
    }
}
