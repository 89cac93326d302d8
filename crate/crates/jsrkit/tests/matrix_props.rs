mod common;

use common::*;
use jsrkit::cocycle::scaled_product;
use jsrkit::symbolic::{enumerate_words, strongly_connected_components, WordGraph};
use jsrkit::Matrix;
use proptest::prelude::*;

#[test]
fn cocycle_relation() {
    invariants::cocycle_relation().unwrap();
}

#[test]
fn exterior_square_multiplicative() {
    invariants::exterior_square_multiplicative().unwrap();
}

proptest! {
    #![proptest_config(config(500, 2))]

    #[test]
    fn gelfand_and_norm_bounds(d in 1usize..=4, seed in any::<u64>()) {
        let a = random(d, seed);
        let rho = a.spectral_radius().unwrap();
        let op = a.operator_norm();
        prop_assert!(rho <= op * (1.0 + 1e-12) + 1e-15);
        for n in [1u32, 2, 4, 8, 16] {
            let an = a.power(n);
            prop_assert!(an.operator_norm().powf(1.0 / n as f64) >= rho - 1e-8);
        }
    }

    #[test]
    fn operator_norm_submultiplicative(a in complex_matrix(3), b in complex_matrix(3)) {
        prop_assert!(a.mul(&b).operator_norm() <= a.operator_norm() * b.operator_norm() * (1.0 + 1e-12) + 1e-14);
    }

    #[test]
    fn scaled_product_agrees_with_direct((set, w) in set_and_word(1..=4, 3, 1..=8)) {
        let p = scaled_product(&set, &w).unwrap();
        let mut direct = Matrix::identity(set.dim());
        for &s in w.symbols() {
            direct = set.get(s as usize).unwrap().mul(&direct);
        }
        let m = direct.max_entry_norm();
        let via = p.log_with(Matrix::max_entry_norm);
        if m == 0.0 {
            prop_assert!(via == f64::NEG_INFINITY || p.is_zero());
        } else {
            prop_assert!((via - m.ln()).abs() <= 1e-9);
        }
    }

    #[test]
    fn word_enumeration(l in 1usize..=3, n in 0usize..=7) {
        let words: Vec<_> = enumerate_words(l, n, 1 << 20).unwrap().collect();
        prop_assert_eq!(words.len() as u128, (l as u128).pow(n as u32));
        prop_assert!(words.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn scc_partition(l in 1usize..=3, n in 1usize..=4, mask in any::<u64>()) {
        let all: Vec<_> = enumerate_words(l, n, 1 << 20).unwrap().collect();
        let kept: Vec<_> = all.into_iter().enumerate().filter(|(k, _)| mask >> (k % 64) & 1 == 1).map(|x| x.1).collect();
        prop_assume!(!kept.is_empty());
        let g = WordGraph::from_words(n, kept).unwrap();
        let comps = strongly_connected_components(&g);
        let mut seen = std::collections::HashSet::new();
        for c in &comps {
            for w in c {
                prop_assert!(seen.insert(w.clone()), "component overlap");
            }
        }
        // a node lies on a cycle iff it reaches itself
        for (i, w) in g.nodes().iter().enumerate() {
            let on_cycle = reaches(&g, i, i);
            prop_assert_eq!(on_cycle, seen.contains(w), "node {}", w);
        }
    }
}

fn reaches(g: &WordGraph, from: usize, to: usize) -> bool {
    let mut stack: Vec<usize> = g
        .edges()
        .iter()
        .filter(|e| e.0 == from)
        .map(|e| e.1)
        .collect();
    let mut seen = vec![false; g.nodes().len()];
    while let Some(v) = stack.pop() {
        if v == to {
            return true;
        }
        if std::mem::replace(&mut seen[v], true) {
            continue;
        }
        stack.extend(g.edges().iter().filter(|e| e.0 == v).map(|e| e.1));
    }
    false
}

fn random(d: usize, seed: u64) -> Matrix {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..d)
        .map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect())
        .collect();
    Matrix::from_parts(&rows, None).unwrap()
}
