//! Optimal symbol ratios of periodic maximisers and the continuity
//! experiment over one-parameter families.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::periodic_log_rates;
use crate::error::{Error, Result};
use crate::mather::{find_extremal_prefix, MatherApprox};
use crate::matrix::{Matrix, MatrixSet};
use crate::norms::kozyakin_extremal_witness;
use crate::symbolic::{lyndon_words, word_count, PeriodicOrbit, Word, DEFAULT_WORD_CAP};

pub const DEFAULT_SLACK: f64 = 1e-6;

/// The two-generator family {[[1,1],[0,1]], alpha [[1,0],[1,1]]}.
pub fn hmst_family(alpha: f64) -> Result<MatrixSet> {
    MatrixSet::new(vec![
        Matrix::real(&[&[1.0, 1.0], &[0.0, 1.0]]),
        Matrix::real(&[&[1.0, 0.0], &[1.0, 1.0]]).scale_real(alpha),
    ])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioWitness {
    pub orbit: PeriodicOrbit,
    /// rho(L(w))^{1/p}
    pub rate: f64,
    pub frequency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioEstimate {
    pub symbol: u16,
    pub max_period: usize,
    pub value: f64,
    pub spread: f64,
    /// Near-optimal witnesses, best first.
    pub witnesses: Vec<RatioWitness>,
    pub unique: bool,
}

impl RatioEstimate {
    pub fn best(&self) -> &RatioWitness {
        &self.witnesses[0]
    }
}

fn check_symbol(set: &MatrixSet, i: u16) -> Result<()> {
    if i == 0 || i as usize > set.len() {
        return Err(Error::IndexOutOfRange {
            symbol: i as usize,
            alphabet: set.len(),
        });
    }
    Ok(())
}

/// Frequency of symbol i in the best periodic word of period <= P and its
/// spread across all words within relative slack of the best rate.
pub fn optimal_periodic_ratio(
    set: &MatrixSet,
    i: u16,
    max_period: usize,
    slack: f64,
) -> Result<RatioEstimate> {
    check_symbol(set, i)?;
    if max_period == 0 {
        return Err(Error::Domain("maximum period must be at least 1".into()));
    }
    let total: u128 = (1..=max_period).map(|p| word_count(set.len(), p)).sum();
    if total > DEFAULT_WORD_CAP {
        return Err(Error::Resource {
            requested: total,
            cap: DEFAULT_WORD_CAP,
        });
    }
    let words = lyndon_words(set.len(), max_period);
    let logs = periodic_log_rates(set, &words)?;
    let best = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let cut = if best == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        best + (1.0 - slack).ln()
    };
    let mut chosen: Vec<(f64, &Word)> = logs
        .iter()
        .cloned()
        .zip(&words)
        .filter(|(l, _)| *l >= cut)
        .collect();
    // best first: within 1e-12 of the top, shorter period and then lexicographic
    // order (Lyndon enumeration order) decide
    let head = chosen
        .iter()
        .position(|(l, _)| *l >= best - 1e-12 || best == f64::NEG_INFINITY)
        .unwrap_or(0);
    let first = chosen.remove(head);
    chosen.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| (a.1.len(), a.1).cmp(&(b.1.len(), b.1)))
    });
    chosen.insert(0, first);
    let witnesses = chosen
        .into_iter()
        .map(|(l, w)| {
            Ok(RatioWitness {
                orbit: PeriodicOrbit::new(w)?,
                rate: l.exp(),
                frequency: w.frequency(i),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (lo, hi) = range(witnesses.iter().map(|w| w.frequency)).expect("non-empty");
    let spread = hi - lo;
    Ok(RatioEstimate {
        symbol: i,
        max_period,
        value: witnesses[0].frequency,
        spread,
        unique: spread <= 2.0 / max_period as f64,
        witnesses,
    })
}

fn range(xs: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    xs.fold(None, |acc, x| match acc {
        None => Some((x, x)),
        Some((lo, hi)) => Some((lo.min(x), hi.max(x))),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyRange {
    pub min: f64,
    pub max: f64,
}

impl FrequencyRange {
    fn of(xs: impl Iterator<Item = f64>) -> Option<Self> {
        range(xs).map(|(min, max)| Self { min, max })
    }

    pub fn contains(&self, x: f64, slack: f64) -> bool {
        self.min - slack <= x && x <= self.max + slack
    }

    pub fn width(&self) -> f64 {
        self.max - self.min
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub symbol: u16,
    pub periodic: FrequencyRange,
    pub survivors: FrequencyRange,
    pub prefixes: Option<FrequencyRange>,
    pub kozyakin: Option<FrequencyRange>,
    /// 2 / n at the approximation depth n.
    pub tolerance: f64,
    /// All available ranges meet once widened by the tolerance.
    pub overlap: bool,
    /// Every available range is narrower than the tolerance.
    pub unique: bool,
}

impl EquivalenceReport {
    pub fn ranges(&self) -> Vec<FrequencyRange> {
        [
            Some(self.periodic),
            Some(self.survivors),
            self.prefixes,
            self.kozyakin,
        ]
        .into_iter()
        .flatten()
        .collect()
    }
}

const KOZYAKIN_SAMPLE: usize = 256;

/// Frequency of symbol i over four computable stand-ins for the maximising
/// measures: periodic witnesses, depth-n survivors, greedy extremal prefixes
/// and survivors that admit a Kozyakin direction.
pub fn ratio_equivalence_check(
    set: &MatrixSet,
    i: u16,
    approx: &MatherApprox,
    max_period: usize,
) -> Result<EquivalenceReport> {
    check_symbol(set, i)?;
    let n = approx.max_depth();
    let est = optimal_periodic_ratio(set, i, max_period, DEFAULT_SLACK)?;
    let periodic =
        FrequencyRange::of(est.witnesses.iter().map(|w| w.frequency)).expect("witnesses");
    let words = approx.words_at(n);
    let survivors =
        FrequencyRange::of(words.iter().map(|w| w.frequency(i))).expect("survivors non-empty");

    let mut prefix_freqs = Vec::new();
    for len in [n, 2 * n, 4 * n] {
        match find_extremal_prefix(set, &approx.norm, approx.rho_hat, len, approx.tol) {
            Ok(w) => prefix_freqs.push(w.frequency(i)),
            Err(Error::Inconsistent(_)) | Err(Error::Resource { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    let prefixes = FrequencyRange::of(prefix_freqs.into_iter());

    let step = (words.len() / KOZYAKIN_SAMPLE).max(1);
    let mut koz = Vec::new();
    for w in words.iter().step_by(step) {
        if kozyakin_extremal_witness(set, &approx.norm, approx.rho_hat, w, approx.tol)?.is_some() {
            koz.push(w.frequency(i));
        }
    }
    let kozyakin = FrequencyRange::of(koz.into_iter());

    let tolerance = 2.0 / n as f64;
    let mut report = EquivalenceReport {
        symbol: i,
        periodic,
        survivors,
        prefixes,
        kozyakin,
        tolerance,
        overlap: false,
        unique: false,
    };
    let rs = report.ranges();
    let top_min = rs.iter().map(|r| r.min).fold(f64::NEG_INFINITY, f64::max);
    let low_max = rs.iter().map(|r| r.max).fold(f64::INFINITY, f64::min);
    report.overlap = top_min - low_max <= tolerance;
    report.unique = rs.iter().all(|r| r.width() <= tolerance);
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub alpha: f64,
    pub gamma: f64,
    pub spread: f64,
    pub unique: bool,
    pub witness: PeriodicOrbit,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioCurve {
    pub symbol: u16,
    pub max_period: usize,
    pub rows: Vec<RatioRow>,
    /// Largest |gamma_{k+1} - gamma_k| over adjacent rows that are both
    /// flagged unique.
    pub max_adjacent_jump: Option<f64>,
}

impl RatioCurve {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Inconsistent(format!("csv output failed: {e}"));
        w.write_record(["alpha", "gamma", "spread", "unique", "witness"])
            .map_err(io)?;
        for r in &self.rows {
            w.write_record([
                r.alpha.to_string(),
                r.gamma.to_string(),
                r.spread.to_string(),
                r.unique.to_string(),
                r.witness.word().to_string(),
            ])
            .map_err(io)?;
        }
        w.flush()
            .map_err(|e| Error::Inconsistent(format!("csv output failed: {e}")))?;
        Ok(())
    }
}

pub fn ratio_curve<F>(family: F, alphas: &[f64], i: u16, max_period: usize) -> Result<RatioCurve>
where
    F: Fn(f64) -> Result<MatrixSet> + Sync,
{
    ratio_curve_with(family, alphas, i, max_period, DEFAULT_SLACK)
}

pub fn ratio_curve_with<F>(
    family: F,
    alphas: &[f64],
    i: u16,
    max_period: usize,
    slack: f64,
) -> Result<RatioCurve>
where
    F: Fn(f64) -> Result<MatrixSet> + Sync,
{
    let rows = alphas
        .par_iter()
        .map(|&alpha| {
            let set = family(alpha)?;
            let est = optimal_periodic_ratio(&set, i, max_period, slack)?;
            let best = est.best();
            Ok(RatioRow {
                alpha,
                gamma: est.value,
                spread: est.spread,
                unique: est.unique,
                witness: best.orbit.clone(),
                rate: best.rate,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_adjacent_jump = rows
        .windows(2)
        .filter(|p| p[0].unique && p[1].unique)
        .map(|p| (p[1].gamma - p[0].gamma).abs())
        .reduce(f64::max);
    Ok(RatioCurve {
        symbol: i,
        max_period,
        rows,
        max_adjacent_jump,
    })
}

/// Inclusive arithmetic grid start, start + step, ..., stopping at `end`
/// (with a little slack for accumulated rounding).
pub fn alpha_grid(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || end < start {
        return Err(Error::Domain(format!("bad grid {start}:{end}:{step}")));
    }
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    // snap to 12 decimals so 0.1:1.0:0.1 gives 0.3 rather than 0.30000000000000004
    Ok((0..count)
        .map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12)
        .collect())
}
