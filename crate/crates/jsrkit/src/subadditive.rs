//! Fekete limits and inf-sup / sup-inf sandwiches for subadditive
//! observables on the full shift.
//!
//! An observable assigns f_n(w) to each length-n word (so it is locally
//! constant at every level). Subadditive means
//! f_{n+m}(w) <= f_n(w[m..]) + f_m(w[..m]).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::MatrixNorm;
use crate::cocycle::scaled_product;
use crate::error::{Error, Result};
use crate::matrix::MatrixSet;
use crate::symbolic::{lyndon_words, word_count, PeriodicOrbit, Word, WordIter, DEFAULT_WORD_CAP};

const SLACK: f64 = 1e-9;

pub trait Observable: Sync {
    /// f_n on the cylinder of w, n = |w|. May be -inf.
    fn eval(&self, w: &Word) -> f64;

    fn declared_subadditive(&self) -> bool {
        true
    }

    /// inf over k <= reps of f_{kp}(w^k) / (kp).
    fn periodic_average(&self, w: &Word, reps: usize) -> f64 {
        (1..=reps.max(1))
            .map(|k| self.eval(&w.repeat(k)) / (k * w.len()) as f64)
            .fold(f64::INFINITY, f64::min)
    }
}

/// f_n(w) = log nu(L(w)).
pub struct MatrixObservable<'a> {
    pub set: &'a MatrixSet,
    pub norm: MatrixNorm,
}

impl<'a> MatrixObservable<'a> {
    pub fn new(set: &'a MatrixSet, norm: MatrixNorm) -> Result<Self> {
        norm.check(set)?;
        Ok(Self { set, norm })
    }
}

impl Observable for MatrixObservable<'_> {
    fn eval(&self, w: &Word) -> f64 {
        let p = scaled_product(self.set, w).expect("word over the set's alphabet");
        p.log_with(|m| self.norm.eval(m).expect("norm validated at construction"))
    }

    // for products the infimum over all repetitions is log rho(L(w)) / p
    fn periodic_average(&self, w: &Word, _reps: usize) -> f64 {
        let p = scaled_product(self.set, w).expect("word over the set's alphabet");
        p.log_spectral_radius().unwrap_or(f64::NAN) / w.len() as f64
    }
}

/// Wraps a closure as an observable.
pub struct FnObservable<F> {
    pub f: F,
    pub subadditive: bool,
}

impl<F: Fn(&Word) -> f64 + Sync> FnObservable<F> {
    pub fn new(f: F) -> Self {
        Self {
            f,
            subadditive: true,
        }
    }
}

impl<F: Fn(&Word) -> f64 + Sync> Observable for FnObservable<F> {
    fn eval(&self, w: &Word) -> f64 {
        (self.f)(w)
    }

    fn declared_subadditive(&self) -> bool {
        self.subadditive
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeketeLimit {
    /// min_n a_n / n
    pub estimate: f64,
    pub argmin: usize,
    /// running minima of a_n / n, non-increasing
    pub running_min: Vec<f64>,
}

/// inf a_n / n over the supplied prefix a_1..a_N after verifying
/// a_{n+m} <= a_n + a_m + 1e-9 on every split.
pub fn fekete_limit(a: &[f64]) -> Result<FeketeLimit> {
    if a.is_empty() {
        return Err(Error::Domain("empty sequence".into()));
    }
    if let Some(k) = a.iter().position(|x| x.is_nan() || *x == f64::INFINITY) {
        return Err(Error::Domain(format!(
            "a_{} is not a real number or -inf",
            k + 1
        )));
    }
    let n_max = a.len();
    for n in 1..n_max {
        for m in 1..=n_max - n {
            if a[n + m - 1] > a[n - 1] + a[m - 1] + SLACK {
                return Err(Error::SubadditivityViolation { n, m });
            }
        }
    }
    let mut running_min = Vec::with_capacity(n_max);
    let mut best = f64::INFINITY;
    let mut argmin = 1;
    for (k, &x) in a.iter().enumerate() {
        let r = x / (k + 1) as f64;
        if r < best {
            best = r;
            argmin = k + 1;
        }
        running_min.push(best);
    }
    Ok(FeketeLimit {
        estimate: best,
        argmin,
        running_min,
    })
}

/// Random-split check of the subadditivity inequality.
pub fn spot_check(
    obs: &dyn Observable,
    alphabet: usize,
    max_len: usize,
    samples: usize,
    seed: u64,
) -> Result<()> {
    if max_len < 2 {
        return Ok(());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let len = rng.gen_range(2..=max_len);
        let symbols: Vec<u16> = (0..len)
            .map(|_| rng.gen_range(1..=alphabet as u16))
            .collect();
        let w = Word::new(alphabet, symbols)?;
        let m = rng.gen_range(1..len);
        let whole = obs.eval(&w);
        let rhs = obs.eval(&w.skip(m)) + obs.eval(&w.prefix(m));
        if whole > rhs + SLACK {
            return Err(Error::SubadditivityViolation { n: len - m, m });
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sandwich {
    pub lower: f64,
    pub upper: f64,
    pub lower_witness: PeriodicOrbit,
    pub upper_depth: usize,
    /// (1/n) max_{|w| = n} f_n(w) for n = 1..=N
    pub per_depth: Vec<f64>,
}

/// The sup-inf side over periodic words of period <= P against the inf-sup
/// side over exhaustive words of length <= N.
pub fn beta_sandwich(
    obs: &dyn Observable,
    alphabet: usize,
    depth: usize,
    max_period: usize,
) -> Result<Sandwich> {
    if !obs.declared_subadditive() {
        return Err(Error::Domain(
            "observable is not declared subadditive".into(),
        ));
    }
    if depth == 0 || max_period == 0 {
        return Err(Error::Domain("depth and period must be at least 1".into()));
    }
    let total: u128 = (1..=depth).map(|n| word_count(alphabet, n)).sum::<u128>()
        + (1..=max_period)
            .map(|p| word_count(alphabet, p))
            .sum::<u128>();
    if total > DEFAULT_WORD_CAP {
        return Err(Error::Resource {
            requested: total,
            cap: DEFAULT_WORD_CAP,
        });
    }
    let per_depth: Vec<f64> = (1..=depth)
        .map(|n| level_max(obs, alphabet, n) / n as f64)
        .collect();
    let (upper_depth, upper) =
        per_depth
            .iter()
            .enumerate()
            .fold(
                (1, f64::INFINITY),
                |acc, (k, &v)| if v < acc.1 { (k + 1, v) } else { acc },
            );

    // Repeating up to a multiple of the upper-bound depth keeps the finite
    // periodic average below the upper side by subadditivity.
    let words = lyndon_words(alphabet, max_period);
    let avgs: Vec<f64> = words
        .par_iter()
        .map(|w| {
            let p = w.len();
            let reps = depth.div_ceil(p).max(upper_depth / gcd(p, upper_depth));
            obs.periodic_average(w, reps)
        })
        .collect();
    let mut best = (f64::NEG_INFINITY, 0);
    for (k, &v) in avgs.iter().enumerate() {
        if v > best.0 + 1e-12 || (best.0 == f64::NEG_INFINITY && v > best.0) {
            best = (v, k);
        }
    }
    let lower = best.0;
    if lower > upper + SLACK {
        return Err(Error::Inconsistent(format!(
            "sandwich inverted: lower {lower} > upper {upper}; the observable is not subadditive"
        )));
    }
    Ok(Sandwich {
        lower,
        upper,
        lower_witness: PeriodicOrbit::new(&words[best.1])?,
        upper_depth,
        per_depth,
    })
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn level_max(obs: &dyn Observable, alphabet: usize, n: usize) -> f64 {
    let total = word_count(alphabet, n) as u64;
    let chunk = 4096u64;
    let blocks: Vec<u64> = (0..total.div_ceil(chunk)).collect();
    blocks
        .par_iter()
        .map(|&b| {
            WordIter::range(alphabet, n, b * chunk, ((b + 1) * chunk).min(total))
                .map(|w| obs.eval(&w))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .reduce(|| f64::NEG_INFINITY, f64::max)
}

/// Words w of length n with f_m(w[..m]) >= m lambda - tol for every m <= n,
/// after checking that max_{|w| = m} f_m(w) is within tol of m lambda.
pub fn subordination_survivors(
    obs: &dyn Observable,
    alphabet: usize,
    lambda: f64,
    depth: usize,
    tol: f64,
) -> Result<Vec<Word>> {
    if depth == 0 {
        return Err(Error::Domain("depth must be at least 1".into()));
    }
    let total: u128 = (1..=depth).map(|n| word_count(alphabet, n)).sum();
    if total > DEFAULT_WORD_CAP {
        return Err(Error::Resource {
            requested: total,
            cap: DEFAULT_WORD_CAP,
        });
    }
    for m in 1..=depth {
        let sup = level_max(obs, alphabet, m);
        if (sup - m as f64 * lambda).abs() > tol {
            return Err(Error::Domain(format!(
                "sup of f_{m} is {sup}, not {m} * lambda = {} within {tol}",
                m as f64 * lambda
            )));
        }
    }
    let mut level = vec![Word::empty(alphabet)];
    for m in 1..=depth {
        let floor = m as f64 * lambda - tol;
        level = level
            .par_iter()
            .flat_map_iter(|w| (1..=alphabet as u16).map(move |s| w.pushed(s)))
            .filter(|w| obs.eval(w) >= floor)
            .collect();
        level.sort();
    }
    Ok(level)
}
