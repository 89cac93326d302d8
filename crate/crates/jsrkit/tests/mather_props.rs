mod common;

use common::invariants::{self, build, mather_set, rho_hat};
use common::*;
use jsrkit::cocycle::scaled_product;
use jsrkit::symbolic::lyndon_words;
use jsrkit::Word;
use proptest::prelude::*;

#[test]
fn survivors_nest_and_shift() {
    invariants::survivors_nest_and_shift().unwrap();
}

#[test]
fn survivor_traces_stay_above_floor() {
    invariants::survivor_traces_stay_above_floor().unwrap();
}

proptest! {
    #![proptest_config(config(500, 20))]

    #[test]
    fn tightening_tol_shrinks_survivors(set in mather_set(), depth in 1usize..=6, t in 1e-3f64..0.3, f in 0.05f64..1.0) {
        let loose = build(&set, depth, t);
        let tight = build(&set, depth, t * f);
        match (loose, tight) {
            (_, None) => {}
            (None, Some(_)) => prop_assert!(false, "tight tol survived where loose did not"),
            (Some(l), Some(s)) => {
                for n in 1..=depth {
                    for x in s.at(n) {
                        prop_assert!(l.contains(&x.word));
                    }
                }
            }
        }
    }

    #[test]
    fn maximising_orbits_lie_in_survivors(set in mather_set(), depth in 1usize..=6, tol in 1e-4f64..0.1) {
        let rho = rho_hat(&set);
        let witnesses: Vec<Word> = lyndon_words(set.len(), 4)
            .into_iter()
            .filter(|w| {
                let r = scaled_product(&set, w).unwrap().log_spectral_radius().unwrap() / w.len() as f64;
                r >= rho.ln() - 1e-12
            })
            .collect();
        prop_assume!(!witnesses.is_empty());
        let a = build(&set, depth, tol).expect("a maximising orbit keeps every level non-empty");
        for w in &witnesses {
            for r in w.rotations() {
                for n in 1..=depth {
                    let window = Word::new(set.len(), r.cycle_to(n).symbols().to_vec()).unwrap();
                    prop_assert!(a.contains(&window), "{:?} window {:?}", w.symbols(), window.symbols());
                }
            }
        }
    }
}
