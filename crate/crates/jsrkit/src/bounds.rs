//! Upper bounds from depth-n product norms, lower bounds from periodic
//! products, and an iterative-deepening branch and bound that combines them.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cocycle::{scaled_product, ScaledProduct};
use crate::error::{Error, Result};
use crate::matrix::{Matrix, MatrixSet};
use crate::norms::NormModel;
use crate::symbolic::{lyndon_words, word_count, PeriodicOrbit, Word, WordIter, DEFAULT_WORD_CAP};

/// Relative tolerance under which two growth rates count as tied.
const TIE: f64 = 1e-12;

/// Submultiplicative matrix norms usable for upper bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatrixNorm {
    /// Largest singular value.
    Operator,
    /// d * max_ij |a_ij|. The bare max-entry norm is not submultiplicative;
    /// the factor d makes it so while staying within d of the operator norm.
    MaxEntry,
    /// Norm induced by a vector norm model.
    Induced { model: NormModel },
}

impl MatrixNorm {
    pub fn id(&self) -> String {
        match self {
            MatrixNorm::Operator => "operator".into(),
            MatrixNorm::MaxEntry => "max_entry".into(),
            MatrixNorm::Induced { model } => format!("induced:{}", model.id()),
        }
    }

    pub fn check(&self, set: &MatrixSet) -> Result<()> {
        if let MatrixNorm::Induced { model } = self {
            model.validate(set.dim())?;
            if model.is_polyhedral() && !set.is_real() {
                return Err(Error::Domain(format!(
                    "{} norms need a real matrix set",
                    model.id()
                )));
            }
        }
        Ok(())
    }

    pub fn eval(&self, a: &Matrix) -> Result<f64> {
        match self {
            MatrixNorm::Operator => Ok(a.operator_norm()),
            MatrixNorm::MaxEntry => Ok(a.rows() as f64 * a.max_entry_norm()),
            MatrixNorm::Induced { model } => model.induced(a),
        }
    }

    // Only called after `check`, where evaluation cannot fail.
    fn log_of(&self, p: &ScaledProduct) -> f64 {
        p.log_with(|m| self.eval(m).unwrap_or(f64::INFINITY))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JsrBounds {
    pub lower: f64,
    pub upper: f64,
    pub lower_witness: PeriodicOrbit,
    pub upper_depth: usize,
    pub norm_used: String,
    pub depth_reached: usize,
    pub nodes: u64,
    pub budget_exhausted: bool,
}

impl JsrBounds {
    pub fn gap(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64, slack: f64) -> bool {
        self.lower - slack <= x && x <= self.upper + slack
    }

    pub fn scaled(&self, c: f64) -> JsrBounds {
        JsrBounds {
            lower: self.lower * c,
            upper: self.upper * c,
            ..self.clone()
        }
    }
}

/// sup over words of length n of ||L(w)||^{1/n}, by exhaustive search.
pub fn upper_bound_at_depth(
    set: &MatrixSet,
    n: usize,
    norm: &MatrixNorm,
    cap: u128,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("depth must be at least 1".into()));
    }
    norm.check(set)?;
    let total = word_count(set.len(), n);
    if total > cap {
        return Err(Error::Resource {
            requested: total,
            cap,
        });
    }
    let (_, blocks) = split_blocks(set.len(), n);
    let best = blocks
        .into_par_iter()
        .map(|prefix| -> Result<f64> {
            let p = scaled_product(set, &prefix)?;
            let mut dfs = Dfs::exhaustive(set, norm, n);
            let mut w = prefix.symbols().to_vec();
            dfs.visit(&p, &mut w);
            Ok(dfs.best_norm_log)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(exp_root(best, n))
}

/// max over primitive periodic words of period <= P of rho(L(w))^{1/|w|},
/// ties going to the shorter period and then the lexicographically least word.
pub fn lower_bound_periodic(
    set: &MatrixSet,
    max_period: usize,
    cap: u128,
) -> Result<(f64, PeriodicOrbit)> {
    if max_period == 0 {
        return Err(Error::Domain("maximum period must be at least 1".into()));
    }
    let total: u128 = (1..=max_period).map(|p| word_count(set.len(), p)).sum();
    if total > cap {
        return Err(Error::Resource {
            requested: total,
            cap,
        });
    }
    let words = lyndon_words(set.len(), max_period);
    let values = periodic_log_rates(set, &words)?;
    let mut best: Option<(f64, &Word)> = None;
    for (v, w) in values.iter().zip(&words) {
        match best {
            Some((b, _)) if !(strictly_greater(*v, b)) => {}
            _ => best = Some((*v, w)),
        }
    }
    let (v, w) = best.expect("at least one Lyndon word");
    Ok((v.exp(), PeriodicOrbit::new(w)?))
}

/// log rho(L(w)) / |w| for each word, in parallel.
pub fn periodic_log_rates(set: &MatrixSet, words: &[Word]) -> Result<Vec<f64>> {
    words
        .par_iter()
        .map(|w| Ok(scaled_product(set, w)?.log_spectral_radius()? / w.len() as f64))
        .collect()
}

fn strictly_greater(a: f64, b: f64) -> bool {
    if b == f64::NEG_INFINITY {
        return a > b;
    }
    a > b + TIE
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateConfig {
    pub gap: f64,
    pub max_depth: usize,
    pub max_nodes: u64,
    pub norm: MatrixNorm,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            gap: 1e-6,
            max_depth: 24,
            max_nodes: 1 << 22,
            norm: MatrixNorm::Operator,
        }
    }
}

impl EstimateConfig {
    pub fn with_gap(gap: f64) -> Self {
        Self {
            gap,
            ..Self::default()
        }
    }
}

/// Iterative deepening over depths 1, 2, ... with pruning: a prefix of length
/// k at depth n is dropped when even the best continuation cannot reach
/// lower^n. Pruning compares against the lower bound as it stood at the start
/// of the depth, which keeps the search independent of thread interleaving.
pub fn estimate(set: &MatrixSet, config: &EstimateConfig) -> Result<JsrBounds> {
    if !(config.gap > 0.0) {
        return Err(Error::Domain("target gap must be positive".into()));
    }
    config.norm.check(set)?;
    let norm = &config.norm;
    let log_m = set
        .matrices()
        .iter()
        .map(|a| norm.eval(a).map(f64::ln))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);

    // sup_log[j] bounds log sup over length-j words of ||L||
    let mut sup_log = vec![0.0f64];
    let mut lower: Option<Candidate> = None;
    let mut upper_log_rate = f64::INFINITY;
    let mut upper_depth = 0usize;
    let mut nodes = 0u64;
    let mut depth_reached = 0usize;
    let mut done = false;

    for n in 1..=config.max_depth.max(1) {
        if n > 1 && nodes >= config.max_nodes {
            break;
        }
        let snapshot = lower.as_ref().map_or(f64::NEG_INFINITY, |c| c.log_rate);
        let (_, blocks) = split_blocks(set.len(), n);
        let results: Vec<BlockResult> = blocks
            .into_par_iter()
            .map(|prefix| -> Result<BlockResult> {
                let p = scaled_product(set, &prefix)?;
                let mut dfs = Dfs {
                    mats: set.matrices(),
                    norm,
                    n,
                    prune: Some(Prune {
                        lower_log_rate: snapshot,
                        sup_log: &sup_log,
                        log_m,
                    }),
                    nodes: 0,
                    best_norm_log: f64::NEG_INFINITY,
                    best_leaf: None,
                };
                let mut w = prefix.symbols().to_vec();
                if !p.is_zero() {
                    dfs.visit(&p, &mut w);
                }
                Ok(BlockResult {
                    norm_log: dfs.best_norm_log,
                    nodes: dfs.nodes + 1,
                    leaf: dfs.best_leaf,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let mut level_log = f64::NEG_INFINITY;
        for r in results {
            nodes += r.nodes;
            level_log = level_log.max(r.norm_log);
            if let Some(c) = r.leaf {
                lower = Some(match lower {
                    Some(b) if !c.beats(&b) => b,
                    _ => c,
                });
            }
        }
        // words cut by pruning have norm below lower_snapshot^n
        let mut s = level_log.max(n as f64 * snapshot);
        s = s.min(n as f64 * log_m);
        for a in 1..n {
            s = s.min(sup_log[a] + sup_log[n - a]);
        }
        sup_log.push(s);
        depth_reached = n;
        let rate = s / n as f64;
        if rate < upper_log_rate {
            upper_log_rate = rate;
            upper_depth = n;
        }
        let lo = lower.as_ref().map_or(0.0, |c| c.log_rate.exp());
        if upper_log_rate.exp() - lo <= config.gap {
            done = true;
            break;
        }
    }

    let (lower_val, witness) = match lower {
        Some(c) => (c.log_rate.exp(), PeriodicOrbit::new(&c.word)?),
        None => (0.0, PeriodicOrbit::new(&Word::new(set.len(), vec![1])?)?),
    };
    Ok(JsrBounds {
        lower: lower_val,
        upper: upper_log_rate.exp(),
        lower_witness: witness,
        upper_depth,
        norm_used: norm.id(),
        depth_reached,
        nodes,
        budget_exhausted: !done,
    })
}

#[derive(Clone, Debug)]
struct Candidate {
    log_rate: f64,
    word: Word,
}

impl Candidate {
    fn beats(&self, other: &Candidate) -> bool {
        if strictly_greater(self.log_rate, other.log_rate) {
            return true;
        }
        if strictly_greater(other.log_rate, self.log_rate) {
            return false;
        }
        if self.log_rate == f64::NEG_INFINITY && other.log_rate == f64::NEG_INFINITY {
            return false;
        }
        let a = PeriodicOrbit::new(&self.word).expect("non-empty");
        let b = PeriodicOrbit::new(&other.word).expect("non-empty");
        (a.period(), a.word()).cmp(&(b.period(), b.word())) == Ordering::Less
    }
}

struct BlockResult {
    norm_log: f64,
    nodes: u64,
    leaf: Option<Candidate>,
}

struct Prune<'a> {
    lower_log_rate: f64,
    sup_log: &'a [f64],
    log_m: f64,
}

struct Dfs<'a> {
    mats: &'a [Matrix],
    norm: &'a MatrixNorm,
    n: usize,
    prune: Option<Prune<'a>>,
    nodes: u64,
    best_norm_log: f64,
    best_leaf: Option<Candidate>,
}

impl<'a> Dfs<'a> {
    fn exhaustive(set: &'a MatrixSet, norm: &'a MatrixNorm, n: usize) -> Self {
        Dfs {
            mats: set.matrices(),
            norm,
            n,
            prune: None,
            nodes: 0,
            best_norm_log: f64::NEG_INFINITY,
            best_leaf: None,
        }
    }

    fn visit(&mut self, p: &ScaledProduct, word: &mut Vec<u16>) {
        let k = word.len();
        if k == self.n {
            self.leaf(p, word);
            return;
        }
        for (i, a) in self.mats.iter().enumerate() {
            let q = p.left_mul(a);
            self.nodes += 1;
            if q.is_zero() {
                continue;
            }
            if let Some(pr) = &self.prune {
                let rest = self.n - k - 1;
                if pr.lower_log_rate > f64::NEG_INFINITY {
                    let tail = if rest == 0 {
                        0.0
                    } else {
                        pr.sup_log[rest].min(rest as f64 * pr.log_m)
                    };
                    if self.norm.log_of(&q) + tail < self.n as f64 * pr.lower_log_rate {
                        continue;
                    }
                }
            }
            word.push(i as u16 + 1);
            self.visit(&q, word);
            word.pop();
        }
    }

    fn leaf(&mut self, p: &ScaledProduct, word: &[u16]) {
        let ln = self.norm.log_of(p);
        self.best_norm_log = self.best_norm_log.max(ln);
        if self.prune.is_none() {
            return;
        }
        let rho = p.log_spectral_radius().unwrap_or(f64::NEG_INFINITY) / self.n as f64;
        let cand = Candidate {
            log_rate: rho,
            word: Word::new(self.mats.len(), word.to_vec()).expect("in range"),
        };
        self.best_leaf = Some(match self.best_leaf.take() {
            Some(b) if !cand.beats(&b) => b,
            _ => cand,
        });
    }
}

/// Words of a short fixed length used as independent parallel work units.
fn split_blocks(alphabet: usize, n: usize) -> (usize, Vec<Word>) {
    let mut b = 0;
    while b < n && word_count(alphabet, b) < 64 {
        b += 1;
    }
    let total = word_count(alphabet, b) as u64;
    (b, WordIter::range(alphabet, b, 0, total).collect())
}

fn exp_root(log: f64, n: usize) -> f64 {
    (log / n as f64).exp()
}

/// Convenience: depth-1..=max exact upper bounds under the operator norm.
pub fn upper_bounds_up_to(
    set: &MatrixSet,
    max_depth: usize,
    norm: &MatrixNorm,
) -> Result<Vec<f64>> {
    let total: u128 = (1..=max_depth).map(|n| word_count(set.len(), n)).sum();
    if total > DEFAULT_WORD_CAP {
        return Err(Error::Resource {
            requested: total,
            cap: DEFAULT_WORD_CAP,
        });
    }
    (1..=max_depth)
        .map(|n| upper_bound_at_depth(set, n, norm, DEFAULT_WORD_CAP))
        .collect()
}
