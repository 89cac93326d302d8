#![allow(dead_code)]

pub mod invariants;

use jsrkit::{Matrix, MatrixSet, Word};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, RngSeed};

pub fn config(cases: u32, seed: u64) -> Config {
    Config {
        cases,
        failure_persistence: None,
        rng_algorithm: RngAlgorithm::ChaCha,
        rng_seed: RngSeed::Fixed(seed),
        ..Config::default()
    }
}

pub fn real_matrix(d: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-2.0f64..2.0, d * d).prop_map(move |v| {
        let rows: Vec<Vec<f64>> = v.chunks(d).map(<[f64]>::to_vec).collect();
        Matrix::from_parts(&rows, None).unwrap()
    })
}

pub fn complex_matrix(d: usize) -> impl Strategy<Value = Matrix> {
    (
        prop::collection::vec(-2.0f64..2.0, d * d),
        prop::collection::vec(-1.0f64..1.0, d * d),
    )
        .prop_map(move |(re, im)| {
            let re: Vec<Vec<f64>> = re.chunks(d).map(<[f64]>::to_vec).collect();
            let im: Vec<Vec<f64>> = im.chunks(d).map(<[f64]>::to_vec).collect();
            Matrix::from_parts(&re, Some(&im)).unwrap()
        })
}

/// d in dims, between 1 and max_len real members.
pub fn real_set(
    dims: std::ops::RangeInclusive<usize>,
    max_len: usize,
) -> impl Strategy<Value = MatrixSet> {
    dims.prop_flat_map(move |d| prop::collection::vec(real_matrix(d), 1..=max_len))
        .prop_map(|m| MatrixSet::new(m).unwrap())
}

pub fn any_set(
    dims: std::ops::RangeInclusive<usize>,
    max_len: usize,
) -> impl Strategy<Value = MatrixSet> {
    prop_oneof![
        real_set(dims.clone(), max_len),
        dims.prop_flat_map(move |d| prop::collection::vec(complex_matrix(d), 1..=max_len))
            .prop_map(|m| MatrixSet::new(m).unwrap()),
    ]
}

pub fn word(alphabet: usize, len: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Word> {
    prop::collection::vec(1..=alphabet as u16, len)
        .prop_map(move |s| Word::new(alphabet, s).unwrap())
}

/// A set together with a word over its alphabet.
pub fn set_and_word(
    dims: std::ops::RangeInclusive<usize>,
    max_len: usize,
    len: std::ops::RangeInclusive<usize>,
) -> impl Strategy<Value = (MatrixSet, Word)> {
    any_set(dims, max_len).prop_flat_map(move |s| {
        let l = s.len();
        (Just(s), word(l, len.clone()))
    })
}
