//! Finite-depth outer approximation of the Mather set.
//!
//! Survivors at depth n are words whose normalised trace
//! log(nu(L(w, m)) / rho^m) stays above log(1 - tol) for every m <= n.
//! Two further filters are applied on top of that prefix condition:
//! a survivor must be extendable to the left by `lookback` symbols while
//! still surviving, and the family is closed downward under both prefix and
//! shift. The lookback filter removes words that only look extremal because
//! they start the orbit; words inside an extremal orbit are unaffected.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::cocycle::{scaled_product, ScaledProduct};
use crate::error::{Error, Result};
use crate::matrix::MatrixSet;
use crate::norms::{check_extremal, NormModel};
use crate::symbolic::{
    cylinder_metric, lyndon_words, strongly_connected_components, PeriodicOrbit, Word, WordGraph,
    DEFAULT_WORD_CAP,
};

pub const DEFAULT_TOL: f64 = 5e-3;
pub const DEFAULT_LOOKBACK: usize = 2;
pub const DEFAULT_CYCLE_CAP: usize = 12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatherConfig {
    pub max_depth: usize,
    pub tol: f64,
    pub lookback: usize,
    /// Largest raw level allowed before giving up with a resource error.
    pub word_cap: u128,
}

impl MatherConfig {
    pub fn new(max_depth: usize, tol: f64) -> Self {
        Self {
            max_depth,
            tol,
            lookback: DEFAULT_LOOKBACK,
            word_cap: DEFAULT_WORD_CAP,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Survivor {
    pub word: Word,
    /// log(nu(L(w, m)) / rho^m) for m = 1..=|w|
    pub log_trace: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatherApprox {
    pub norm: NormModel,
    pub rho_hat: f64,
    pub tol: f64,
    pub lookback: usize,
    pub depths: Vec<usize>,
    /// survivors[n - 1] holds the depth-n survivors in lexicographic order.
    pub survivors: Vec<Vec<Survivor>>,
    pub graph: WordGraph,
}

impl MatherApprox {
    pub fn max_depth(&self) -> usize {
        self.depths.last().copied().unwrap_or(0)
    }

    pub fn alphabet(&self) -> usize {
        self.survivors[0][0].word.alphabet()
    }

    pub fn at(&self, n: usize) -> &[Survivor] {
        &self.survivors[n - 1]
    }

    pub fn words_at(&self, n: usize) -> Vec<Word> {
        self.at(n).iter().map(|s| s.word.clone()).collect()
    }

    pub fn contains(&self, w: &Word) -> bool {
        let n = w.len();
        n >= 1 && n <= self.max_depth() && self.at(n).binary_search_by(|s| s.word.cmp(w)).is_ok()
    }

    /// True when some depth-n word fails to survive, i.e. the approximation
    /// is strictly smaller than the full shift at its resolution.
    pub fn is_proper(&self) -> bool {
        let n = self.max_depth();
        (self.at(n).len() as u128) < crate::symbolic::word_count(self.alphabet(), n)
    }

    pub fn min_trace(&self) -> f64 {
        self.survivors
            .iter()
            .flatten()
            .flat_map(|s| s.log_trace.iter().copied())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn to_dot(&self) -> String {
        self.graph.to_dot()
    }
}

/// Survivor sets with default lookback and word cap.
pub fn build_mather_approx(
    set: &MatrixSet,
    nu: &NormModel,
    rho_hat: f64,
    max_depth: usize,
    tol: f64,
) -> Result<MatherApprox> {
    build_mather_approx_with(set, nu, rho_hat, &MatherConfig::new(max_depth, tol))
}

pub fn build_mather_approx_with(
    set: &MatrixSet,
    nu: &NormModel,
    rho_hat: f64,
    config: &MatherConfig,
) -> Result<MatherApprox> {
    if config.max_depth == 0 {
        return Err(Error::Domain("max_depth must be at least 1".into()));
    }
    if !(rho_hat > 0.0 && rho_hat.is_finite()) {
        return Err(Error::Domain(format!(
            "rho_hat must be positive, got {rho_hat}"
        )));
    }
    if !(0.0..1.0).contains(&config.tol) {
        return Err(Error::Domain(format!(
            "tol must lie in [0, 1), got {}",
            config.tol
        )));
    }
    let chk = check_extremal(nu, set, rho_hat, config.tol)?;
    if !chk.extremal {
        return Err(Error::Domain(format!(
            "norm {} is not extremal at rho_hat {rho_hat}: violation {:.3e}",
            nu.id(),
            chk.max_violation
        )));
    }
    let raw = raw_levels(
        set,
        nu,
        rho_hat,
        config.max_depth + config.lookback,
        config.tol,
        config.word_cap,
    )?;
    let k = config.lookback;

    let mut survivors: Vec<Vec<Survivor>> = Vec::with_capacity(config.max_depth);
    let mut prev: HashSet<Vec<u16>> = HashSet::new();
    for n in 1..=config.max_depth {
        let extendable: HashSet<&[u16]> = raw[n + k - 1].keys().map(|w| &w[k..]).collect();
        let mut level: Vec<Survivor> = raw[n - 1]
            .iter()
            .filter(|(w, _)| extendable.contains(&w[..]))
            .filter(|(w, _)| n == 1 || (prev.contains(&w[..n - 1]) && prev.contains(&w[1..])))
            .map(|(w, t)| Survivor {
                word: Word::new(set.len(), w.clone()).expect("valid symbols"),
                log_trace: t.clone(),
            })
            .collect();
        if level.is_empty() {
            return Err(Error::Inconsistent(format!(
                "no survivors at depth {n}: rho_hat {rho_hat} too high or tol {} too tight",
                config.tol
            )));
        }
        level.sort_by(|a, b| a.word.cmp(&b.word));
        prev = level.iter().map(|s| s.word.symbols().to_vec()).collect();
        survivors.push(level);
    }
    let graph = WordGraph::from_words(
        config.max_depth,
        survivors[config.max_depth - 1]
            .iter()
            .map(|s| s.word.clone()),
    )?;
    Ok(MatherApprox {
        norm: nu.clone(),
        rho_hat,
        tol: config.tol,
        lookback: k,
        depths: (1..=config.max_depth).collect(),
        survivors,
        graph,
    })
}

// raw[n - 1]: words of length n passing the prefix trace condition
fn raw_levels(
    set: &MatrixSet,
    nu: &NormModel,
    rho: f64,
    depth: usize,
    tol: f64,
    cap: u128,
) -> Result<Vec<HashMap<Vec<u16>, Vec<f64>>>> {
    let floor = (1.0 - tol).ln();
    let lr = rho.ln();
    let mut frontier: Vec<(Vec<u16>, ScaledProduct, Vec<f64>)> =
        vec![(Vec::new(), ScaledProduct::identity(set.dim()), Vec::new())];
    let mut out = Vec::with_capacity(depth);
    for n in 1..=depth {
        let mut next = Vec::with_capacity(frontier.len() * set.len());
        for (w, p, t) in &frontier {
            for s in 1..=set.len() {
                let q = p.left_mul(set.get(s)?);
                let v = nu.induced(q.product())?;
                let l = if v == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    v.ln() + q.log_scale() - n as f64 * lr
                };
                if l >= floor {
                    let mut w2 = w.clone();
                    w2.push(s as u16);
                    let mut t2 = t.clone();
                    t2.push(l);
                    next.push((w2, q, t2));
                }
            }
        }
        if next.len() as u128 > cap {
            return Err(Error::Resource {
                requested: next.len() as u128,
                cap,
            });
        }
        out.push(
            next.iter()
                .map(|(w, _, t)| (w.clone(), t.clone()))
                .collect(),
        );
        frontier = next;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleRatio {
    pub cycle: PeriodicOrbit,
    /// rho(L(c))^{1/|c|} / rho_hat
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceReport {
    pub cycles: Vec<CycleRatio>,
    pub max_ratio: Option<f64>,
    pub pass: bool,
}

pub fn recurrent_ratio_check(approx: &MatherApprox, set: &MatrixSet) -> Result<RecurrenceReport> {
    recurrent_ratio_check_with(approx, set, DEFAULT_CYCLE_CAP)
}

/// Simple cycles of the survivor graph are the primitive periodic words all
/// of whose cyclic windows survive; they are enumerated via Lyndon words up
/// to `cap` in length.
pub fn recurrent_ratio_check_with(
    approx: &MatherApprox,
    set: &MatrixSet,
    cap: usize,
) -> Result<RecurrenceReport> {
    let n = approx.max_depth();
    let nodes: HashSet<&[u16]> = approx.graph.nodes().iter().map(|w| w.symbols()).collect();
    let mut cycles = Vec::new();
    for c in lyndon_words(set.len(), cap) {
        let p = c.len();
        let long = c.cycle_to(n + p - 1);
        if (0..p).all(|k| nodes.contains(&long.symbols()[k..k + n])) {
            let lr = scaled_product(set, &c)?.log_spectral_radius()? / p as f64;
            let ratio = (lr - approx.rho_hat.ln()).exp();
            cycles.push(CycleRatio {
                cycle: PeriodicOrbit::new(&c)?,
                ratio,
            });
        }
    }
    let max_ratio = cycles.iter().map(|c| c.ratio).reduce(f64::max);
    let pass = max_ratio.is_some_and(|m| m >= 1.0 - 10.0 * approx.tol);
    Ok(RecurrenceReport {
        cycles,
        max_ratio,
        pass,
    })
}

/// Running Cesàro averages of the cylinder distance from each length-n
/// window of `w` (n = max depth) to the nearest survivor.
pub fn mean_distance_to_core(approx: &MatherApprox, w: &Word) -> Result<Vec<f64>> {
    let n = approx.max_depth();
    if w.len() < n {
        return Err(Error::Domain(format!(
            "word of length {} is shorter than depth {n}",
            w.len()
        )));
    }
    let core = approx.at(n);
    let mut out = Vec::with_capacity(w.len() - n + 1);
    let mut total = 0.0;
    for k in 0..=w.len() - n {
        let win = w.window(k, n);
        let mut best = f64::INFINITY;
        for s in core {
            best = best.min(cylinder_metric(&win, &s.word)?);
            if best == 0.0 {
                break;
            }
        }
        total += best;
        out.push(total / (k + 1) as f64);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinimalSetDiagnostic {
    UniqueScc,
    MultipleScc(usize),
    /// The survivor graph has no cycle at all.
    NoCycles,
}

pub fn minimal_set_diagnostic(approx: &MatherApprox) -> MinimalSetDiagnostic {
    match strongly_connected_components(&approx.graph).len() {
        0 => MinimalSetDiagnostic::NoCycles,
        1 => MinimalSetDiagnostic::UniqueScc,
        k => MinimalSetDiagnostic::MultipleScc(k),
    }
}

const RECURRENCE_WINDOW: usize = 4;
const PREFIX_NODE_CAP: u64 = 1 << 22;

/// One length-n word whose every prefix keeps nu(L(w, m)) >= (1 - eps) rho^m.
/// Extensions whose trailing window already occurred earlier in the word are
/// tried first, then lexicographic order.
pub fn find_extremal_prefix(
    set: &MatrixSet,
    nu: &NormModel,
    rho_hat: f64,
    n: usize,
    eps: f64,
) -> Result<Word> {
    nu.validate(set.dim())?;
    if !(rho_hat > 0.0) {
        return Err(Error::Domain(format!(
            "rho_hat must be positive, got {rho_hat}"
        )));
    }
    let floor = (1.0 - eps).ln();
    let lr = rho_hat.ln();
    let l = set.len();
    // stack of (prefix, product, remaining candidate symbols)
    let mut stack: Vec<(Vec<u16>, ScaledProduct, Vec<u16>)> = Vec::new();
    let root = ScaledProduct::identity(set.dim());
    stack.push((Vec::new(), root, ordered_candidates(&[], l)));
    let mut nodes = 0u64;
    while let Some(top) = stack.last_mut() {
        if top.0.len() == n {
            return Word::new(l, top.0.clone());
        }
        let Some(s) = top.2.pop() else {
            stack.pop();
            continue;
        };
        nodes += 1;
        if nodes > PREFIX_NODE_CAP {
            return Err(Error::Resource {
                requested: nodes as u128,
                cap: PREFIX_NODE_CAP as u128,
            });
        }
        let q = top.1.left_mul(set.get(s as usize)?);
        let m = top.0.len() + 1;
        let v = nu.induced(q.product())?;
        if v > 0.0 && v.ln() + q.log_scale() - m as f64 * lr >= floor {
            let mut w = top.0.clone();
            w.push(s);
            let cands = ordered_candidates(&w, l);
            stack.push((w, q, cands));
        }
    }
    Err(Error::Inconsistent(format!(
        "no extremal prefix of length {n} at rho_hat {rho_hat}, eps {eps}"
    )))
}

// returned in reverse so that pop() yields the preferred symbol first
fn ordered_candidates(w: &[u16], l: usize) -> Vec<u16> {
    let mut revisit = Vec::new();
    let mut other = Vec::new();
    for s in 1..=l as u16 {
        let mut ext = w.to_vec();
        ext.push(s);
        let k = RECURRENCE_WINDOW.min(ext.len() - 1);
        let tail = &ext[ext.len() - k..];
        let seen = k > 0 && ext[..ext.len() - 1].windows(k).any(|x| x == tail);
        if seen {
            revisit.push(s);
        } else {
            other.push(s);
        }
    }
    revisit.extend(other);
    revisit.reverse();
    revisit
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::norms::{barabanov_iterate, BarabanovConfig};

    fn diag_pair() -> MatrixSet {
        MatrixSet::new(vec![Matrix::diag(&[3.0, 1.0]), Matrix::diag(&[1.0, 3.0])]).unwrap()
    }

    fn golden() -> MatrixSet {
        MatrixSet::new(vec![
            Matrix::real(&[&[1.0, 1.0], &[0.0, 1.0]]),
            Matrix::real(&[&[1.0, 0.0], &[1.0, 1.0]]),
        ])
        .unwrap()
    }

    fn rotations() -> MatrixSet {
        MatrixSet::new(vec![
            Matrix::rotation(std::f64::consts::FRAC_PI_2),
            Matrix::rotation(0.7),
        ])
        .unwrap()
    }

    fn words(a: &MatherApprox, n: usize) -> Vec<String> {
        a.words_at(n).iter().map(|w| w.to_string()).collect()
    }

    fn golden_approx(depth: usize) -> MatherApprox {
        let s = golden();
        let cert = barabanov_iterate(&s, &BarabanovConfig::default(), None).unwrap();
        build_mather_approx(&s, &cert.norm, cert.rho_hat, depth, 5e-3).unwrap()
    }

    #[test]
    fn diag_survivors() {
        let a =
            build_mather_approx(&diag_pair(), &NormModel::MaxEntryInduced, 3.0, 3, 1e-9).unwrap();
        assert_eq!(words(&a, 3), vec!["111", "222"]);
        let a =
            build_mather_approx(&diag_pair(), &NormModel::MaxEntryInduced, 3.0, 8, 1e-9).unwrap();
        assert_eq!(words(&a, 8), vec!["11111111", "22222222"]);
        assert_eq!(
            minimal_set_diagnostic(&a),
            MinimalSetDiagnostic::MultipleScc(2)
        );
        assert!(a.is_proper());
    }

    #[test]
    fn isometries_keep_everything() {
        let a = build_mather_approx(&rotations(), &NormModel::Euclidean, 1.0, 6, 1e-9).unwrap();
        for n in 1..=6 {
            assert_eq!(a.at(n).len(), 1 << n);
        }
        assert_eq!(minimal_set_diagnostic(&a), MinimalSetDiagnostic::UniqueScc);
        assert!(!a.is_proper());
        let r = recurrent_ratio_check(&a, &rotations()).unwrap();
        assert!(r.pass);
        assert!(r.cycles.iter().all(|c| (c.ratio - 1.0).abs() < 1e-9));
    }

    #[test]
    fn golden_survivors_avoid_triples() {
        let a = golden_approx(12);
        for s in a.at(12) {
            let t = s.word.to_string();
            assert!(!t.contains("111") && !t.contains("222"), "{t}");
        }
        assert_eq!(minimal_set_diagnostic(&a), MinimalSetDiagnostic::UniqueScc);
        let r = recurrent_ratio_check(&a, &golden()).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.cycles.iter().any(|c| c.cycle.word().to_string() == "12"));
        assert!(a.min_trace() >= (1.0 - 5e-3f64).ln());
    }

    #[test]
    fn nesting_and_shift() {
        for a in [
            golden_approx(10),
            build_mather_approx(&rotations(), &NormModel::Euclidean, 1.0, 5, 1e-9).unwrap(),
            build_mather_approx(&diag_pair(), &NormModel::MaxEntryInduced, 3.0, 6, 1e-9).unwrap(),
        ] {
            for n in 2..=a.max_depth() {
                for s in a.at(n) {
                    assert!(a.contains(&s.word.prefix(n - 1)));
                    assert!(a.contains(&s.word.shift().unwrap()));
                }
            }
        }
    }

    #[test]
    fn diag_recurrence() {
        let a =
            build_mather_approx(&diag_pair(), &NormModel::MaxEntryInduced, 3.0, 6, 1e-9).unwrap();
        let r = recurrent_ratio_check(&a, &diag_pair()).unwrap();
        let names: Vec<String> = r.cycles.iter().map(|c| c.cycle.to_string()).collect();
        assert_eq!(names, vec!["(1)", "(2)"]);
        assert!(r.cycles.iter().all(|c| (c.ratio - 1.0).abs() < 1e-12));
    }

    #[test]
    fn distance_to_core() {
        let a =
            build_mather_approx(&diag_pair(), &NormModel::MaxEntryInduced, 3.0, 3, 1e-9).unwrap();
        let w = Word::constant(2, 1, 4)
            .unwrap()
            .concat(&Word::constant(2, 2, 60).unwrap());
        let avg = mean_distance_to_core(&a, &w).unwrap();
        assert!(avg[59] <= 0.1);
        assert!(avg[5..].windows(2).all(|p| p[1] <= p[0]));
        let ones = mean_distance_to_core(&a, &Word::constant(2, 1, 64).unwrap()).unwrap();
        assert!(ones.iter().all(|&x| x == 0.0));
        let alt = mean_distance_to_core(&a, &Word::parse(2, "12").unwrap().repeat(32)).unwrap();
        assert!(alt.iter().all(|&x| x >= 0.2));
        assert!(mean_distance_to_core(&a, &Word::parse(2, "12").unwrap()).is_err());
    }

    #[test]
    fn extremal_prefixes() {
        let w =
            find_extremal_prefix(&diag_pair(), &NormModel::MaxEntryInduced, 3.0, 20, 1e-9).unwrap();
        assert_eq!(w, Word::constant(2, 1, 20).unwrap());
        let w = find_extremal_prefix(&rotations(), &NormModel::Euclidean, 1.0, 20, 1e-9).unwrap();
        assert_eq!(w, Word::constant(2, 1, 20).unwrap());
        let s = golden();
        let cert = barabanov_iterate(&s, &BarabanovConfig::default(), None).unwrap();
        let w = find_extremal_prefix(&s, &cert.norm, cert.rho_hat, 32, 5e-3).unwrap();
        let f = w.frequency(1);
        assert!((0.4..=0.6).contains(&f), "{w} {f}");
    }

    #[test]
    fn build_errors() {
        let s = diag_pair();
        assert!(matches!(
            build_mather_approx(&s, &NormModel::MaxEntryInduced, 2.0, 3, 1e-9),
            Err(Error::Domain(_))
        ));
        // extremal but rho_hat above the generators' reach along every orbit
        let id = MatrixSet::new(vec![Matrix::diag(&[1.0, 0.5])]).unwrap();
        assert!(matches!(
            build_mather_approx(&id, &NormModel::Euclidean, 2.0, 2, 1e-3),
            Err(Error::Inconsistent(_))
        ));
    }

    #[test]
    fn tighter_tol_shrinks() {
        let s = golden();
        let cert = barabanov_iterate(&s, &BarabanovConfig::default(), None).unwrap();
        let loose = build_mather_approx(&s, &cert.norm, cert.rho_hat, 8, 2e-2).unwrap();
        let tight = build_mather_approx(&s, &cert.norm, cert.rho_hat, 8, 5e-3).unwrap();
        for n in 1..=8 {
            for w in tight.words_at(n) {
                assert!(loose.contains(&w));
            }
        }
    }
}
