//! Stability classes of discrete linear inclusions and Monte Carlo Lyapunov
//! exponents under Markov switching.

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{estimate, lower_bound_periodic, EstimateConfig, JsrBounds};
use crate::cocycle::ScaledProduct;
use crate::error::{Error, Result};
use crate::mather::{build_mather_approx, DEFAULT_TOL};
use crate::matrix::MatrixSet;
use crate::norms::{barabanov_iterate, check_extremal, BarabanovConfig, NormModel};
use crate::symbolic::{Word, DEFAULT_WORD_CAP};

/// Below this max-entry size a product counts as absorbed into zero.
pub const ZERO_THRESHOLD: f64 = 1e-300;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkovChainSpec {
    pub transition: Vec<Vec<f64>>,
    pub initial: Vec<f64>,
    pub rng_seed: u64,
}

impl MarkovChainSpec {
    pub fn new(transition: Vec<Vec<f64>>, initial: Vec<f64>, rng_seed: u64) -> Result<Self> {
        let s = Self {
            transition,
            initial,
            rng_seed,
        };
        s.validate()?;
        Ok(s)
    }

    /// Uniform i.i.d. switching.
    pub fn uniform(states: usize, rng_seed: u64) -> Self {
        let p = 1.0 / states as f64;
        Self {
            transition: vec![vec![p; states]; states],
            initial: vec![p; states],
            rng_seed,
        }
    }

    pub fn states(&self) -> usize {
        self.initial.len()
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.initial.len();
        if l == 0 || self.transition.len() != l || self.transition.iter().any(|r| r.len() != l) {
            return Err(Error::Dimension(format!(
                "chain must be {l}x{l} with an initial vector of length {l}"
            )));
        }
        for (i, row) in self
            .transition
            .iter()
            .chain(std::iter::once(&self.initial))
            .enumerate()
        {
            if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                return Err(Error::Domain(format!(
                    "row {i} has a negative or non-finite probability"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::Domain(format!("row {i} sums to {sum}, not 1")));
            }
        }
        Ok(())
    }

    /// Every transition has positive probability.
    pub fn is_full(&self) -> bool {
        self.transition.iter().flatten().all(|&p| p > 0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarkovEstimate {
    Lyapunov {
        lambda: f64,
        stderr: f64,
    },
    /// Some trials hit the zero matrix: fraction absorbed and the mean step
    /// at which it happened among those trials.
    ZeroAbsorption {
        prob: f64,
        mean_steps: f64,
    },
}

/// Monte Carlo estimate of lim (1/n) log ||L(x, n)|| for x drawn from the
/// chain. Trial t uses ChaCha stream t of the chain seed.
pub fn markov_lyapunov(
    set: &MatrixSet,
    chain: &MarkovChainSpec,
    horizon: usize,
    trials: usize,
) -> Result<MarkovEstimate> {
    chain.validate()?;
    if chain.states() != set.len() {
        return Err(Error::Dimension(format!(
            "chain has {} states for {} matrices",
            chain.states(),
            set.len()
        )));
    }
    if horizon == 0 || trials == 0 {
        return Err(Error::Domain("horizon and trials must be positive".into()));
    }
    let requested = horizon as u128 * trials as u128;
    if requested > DEFAULT_WORD_CAP * 64 {
        return Err(Error::Resource {
            requested,
            cap: DEFAULT_WORD_CAP * 64,
        });
    }
    let init = WeightedIndex::new(&chain.initial).map_err(|e| Error::Domain(e.to_string()))?;
    let rows = chain
        .transition
        .iter()
        .map(|r| WeightedIndex::new(r).map_err(|e| Error::Domain(e.to_string())))
        .collect::<Result<Vec<_>>>()?;

    // Ok(log-rate) or Err(absorption step)
    let outcomes: Vec<std::result::Result<f64, usize>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(chain.rng_seed);
            rng.set_stream(t as u64);
            let mut state = init.sample(&mut rng);
            let mut p = ScaledProduct::identity(set.dim());
            for step in 1..=horizon {
                if step > 1 {
                    state = rows[state].sample(&mut rng);
                }
                p = p.left_mul(&set.matrices()[state]);
                if p.product().max_entry_norm() < ZERO_THRESHOLD {
                    return Err(step);
                }
            }
            Ok(p.log_operator_norm() / horizon as f64)
        })
        .collect();

    let absorbed: Vec<f64> = outcomes
        .iter()
        .filter_map(|o| o.err())
        .map(|s| s as f64)
        .collect();
    if !absorbed.is_empty() {
        return Ok(MarkovEstimate::ZeroAbsorption {
            prob: absorbed.len() as f64 / trials as f64,
            mean_steps: kahan_sum(&absorbed) / absorbed.len() as f64,
        });
    }
    let rates: Vec<f64> = outcomes
        .into_iter()
        .map(|o| o.unwrap_or(f64::NAN))
        .collect();
    let mean = kahan_sum(&rates) / trials as f64;
    let dev: Vec<f64> = rates.iter().map(|r| (r - mean).powi(2)).collect();
    let var = if trials > 1 {
        kahan_sum(&dev) / (trials - 1) as f64
    } else {
        0.0
    };
    Ok(MarkovEstimate::Lyapunov {
        lambda: mean,
        stderr: (var / trials as f64).sqrt(),
    })
}

fn kahan_sum(xs: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for &x in xs {
        let y = x - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

/// First m at which L(w, m) is (numerically) the zero matrix.
pub fn absorbed_by(set: &MatrixSet, w: &Word) -> Result<Option<usize>> {
    let mut p = ScaledProduct::identity(set.dim());
    for (m, &s) in w.symbols().iter().enumerate() {
        p = p.left_mul(set.get(s as usize)?);
        if p.product().max_entry_norm() < ZERO_THRESHOLD {
            return Ok(Some(m + 1));
        }
    }
    Ok(None)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbsoluteStability {
    Stable,
    NotStable,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PeriodicStability {
    StableUpTo { max_period: usize },
    CounterexampleWord { word: Word, rho: f64 },
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarkovStability {
    StableEvidence { lambda: f64, stderr: f64 },
    ZeroAbsorption { prob: f64, mean_steps: f64 },
    NotStable { lambda: f64, stderr: f64 },
    Unknown { lambda: f64, stderr: f64 },
}

impl MarkovStability {
    pub fn is_stable_evidence(&self) -> bool {
        matches!(
            self,
            Self::StableEvidence { .. } | Self::ZeroAbsorption { .. }
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityConfig {
    pub max_period: usize,
    pub estimate: EstimateConfig,
    pub horizon: usize,
    pub trials: usize,
    pub mather_depth: usize,
    pub mather_tol: f64,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self {
            max_period: 8,
            estimate: EstimateConfig {
                gap: 1e-6,
                max_depth: 12,
                ..EstimateConfig::default()
            },
            horizon: 200,
            trials: 64,
            mather_depth: 8,
            mather_tol: DEFAULT_TOL,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub absolute: AbsoluteStability,
    pub periodic: PeriodicStability,
    pub markov: MarkovStability,
    pub jsr: JsrBounds,
    /// Whether the survivor set misses some word, when an extremal norm at
    /// rho = 1 was available to build it.
    pub mather_proper: Option<bool>,
    /// When the joint spectral radius is 1 and the survivor set is proper,
    /// Markov stability is expected; this records whether the simulation
    /// agrees. None when the hypothesis does not apply.
    pub markov_consistent: Option<bool>,
    pub rng_seed: u64,
}

const PERIODIC_SLACK: f64 = 1e-12;

pub fn classify(
    set: &MatrixSet,
    config: &StabilityConfig,
    chain: &MarkovChainSpec,
) -> Result<StabilityReport> {
    chain.validate()?;
    if !chain.is_full() {
        return Err(Error::Domain(
            "Markov chain must have every transition probability positive".into(),
        ));
    }
    let jsr = estimate(set, &config.estimate)?;
    let absolute = if jsr.upper < 1.0 {
        AbsoluteStability::Stable
    } else if jsr.lower >= 1.0 {
        AbsoluteStability::NotStable
    } else {
        AbsoluteStability::Unknown
    };

    let periodic = match lower_bound_periodic(set, config.max_period, DEFAULT_WORD_CAP) {
        Ok((rho, orbit)) if rho >= 1.0 - PERIODIC_SLACK => PeriodicStability::CounterexampleWord {
            word: orbit.word().clone(),
            rho,
        },
        Ok(_) => PeriodicStability::StableUpTo {
            max_period: config.max_period,
        },
        Err(Error::Resource { .. }) => PeriodicStability::Unknown,
        Err(e) => return Err(e),
    };

    let est = markov_lyapunov(set, chain, config.horizon, config.trials)?;
    let markov = match est {
        MarkovEstimate::ZeroAbsorption { prob, mean_steps } => {
            MarkovStability::ZeroAbsorption { prob, mean_steps }
        }
        MarkovEstimate::Lyapunov { lambda, stderr } if lambda + 3.0 * stderr < 0.0 => {
            MarkovStability::StableEvidence { lambda, stderr }
        }
        MarkovEstimate::Lyapunov { lambda, stderr } if lambda - 3.0 * stderr > 0.0 => {
            MarkovStability::NotStable { lambda, stderr }
        }
        MarkovEstimate::Lyapunov { lambda, stderr } => MarkovStability::Unknown { lambda, stderr },
    };

    let at_one = jsr.lower <= 1.0 + 1e-6 && jsr.upper >= 1.0 - 1e-6;
    let mather_proper = if at_one {
        mather_at_one(set, config)
    } else {
        None
    };
    let markov_consistent = match mather_proper {
        Some(true) => Some(markov.is_stable_evidence()),
        _ => None,
    };
    Ok(StabilityReport {
        absolute,
        periodic,
        markov,
        jsr,
        mather_proper,
        markov_consistent,
        rng_seed: chain.rng_seed,
    })
}

// survivor set at rho = 1 under the first available extremal norm
fn mather_at_one(set: &MatrixSet, config: &StabilityConfig) -> Option<bool> {
    let mut cands = vec![NormModel::Euclidean, NormModel::MaxEntryInduced];
    if set.is_real() && (2..=4).contains(&set.dim()) {
        let bc = BarabanovConfig {
            max_iters: 5000,
            ..BarabanovConfig::default()
        };
        if let Ok(cert) = barabanov_iterate(set, &bc, None) {
            cands.push(cert.norm);
        }
    }
    cands.into_iter().find_map(|nu| {
        let ok = check_extremal(&nu, set, 1.0, config.mather_tol)
            .ok()?
            .extremal;
        if !ok {
            return None;
        }
        build_mather_approx(set, &nu, 1.0, config.mather_depth, config.mather_tol)
            .ok()
            .map(|a| a.is_proper())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    fn nilpotent_pair() -> MatrixSet {
        MatrixSet::new(vec![
            Matrix::real(&[&[0.0, 1.0], &[0.0, 0.0]]),
            Matrix::real(&[&[0.0, 0.0], &[1.0, 0.0]]),
        ])
        .unwrap()
    }

    fn golden() -> MatrixSet {
        MatrixSet::new(vec![
            Matrix::real(&[&[1.0, 1.0], &[0.0, 1.0]]),
            Matrix::real(&[&[1.0, 0.0], &[1.0, 1.0]]),
        ])
        .unwrap()
    }

    fn diag_pair() -> MatrixSet {
        MatrixSet::new(vec![Matrix::diag(&[3.0, 1.0]), Matrix::diag(&[1.0, 3.0])]).unwrap()
    }

    // E[max(k, n - k)] / n for k ~ Binomial(n, 1/2), via log-space pmf
    fn binomial_max_mean(n: usize) -> f64 {
        let mut logc = 0.0f64;
        let mut acc = 0.0;
        for k in 0..=n {
            if k > 0 {
                logc += ((n - k + 1) as f64).ln() - (k as f64).ln();
            }
            acc += (logc - n as f64 * 2f64.ln()).exp() * k.max(n - k) as f64;
        }
        acc / n as f64
    }

    #[test]
    fn chain_validation() {
        assert!(
            MarkovChainSpec::new(vec![vec![0.5, 0.6], vec![0.5, 0.5]], vec![0.5, 0.5], 1).is_err()
        );
        assert!(MarkovChainSpec::new(vec![vec![1.0]], vec![0.5, 0.5], 1).is_err());
        let c =
            MarkovChainSpec::new(vec![vec![1.0, 0.0], vec![0.5, 0.5]], vec![0.5, 0.5], 1).unwrap();
        assert!(!c.is_full());
        assert!(matches!(
            classify(&golden(), &StabilityConfig::default(), &c),
            Err(Error::Domain(_))
        ));
        assert!(MarkovChainSpec::uniform(3, 0).is_full());
    }

    #[test]
    fn nilpotent_example() {
        let s = nilpotent_pair();
        let r = classify(
            &s,
            &StabilityConfig::default(),
            &MarkovChainSpec::uniform(2, 7),
        )
        .unwrap();
        assert_eq!(r.absolute, AbsoluteStability::NotStable);
        assert!((r.jsr.lower - 1.0).abs() < 1e-12 && (r.jsr.upper - 1.0).abs() < 1e-12);
        match &r.periodic {
            PeriodicStability::CounterexampleWord { word, rho } => {
                assert_eq!(word.to_string(), "12");
                assert_eq!(*rho, 1.0);
            }
            other => panic!("{other:?}"),
        }
        let m = markov_lyapunov(&s, &MarkovChainSpec::uniform(2, 7), 16, 8192).unwrap();
        match m {
            MarkovEstimate::ZeroAbsorption { prob, mean_steps } => {
                assert!(prob >= 1.0 - 2f64.powi(-15), "{prob}");
                assert!(mean_steps <= 4.0);
                assert!((mean_steps - 3.0).abs() < 0.1);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(
            absorbed_by(&s, &Word::parse(2, "12122").unwrap()).unwrap(),
            Some(5)
        );
        assert_eq!(
            absorbed_by(&s, &Word::parse(2, "1212").unwrap()).unwrap(),
            None
        );
    }

    #[test]
    fn halved_golden_is_stable() {
        let s = golden().scaled(0.5);
        let cfg = StabilityConfig {
            estimate: EstimateConfig {
                gap: 1e-3,
                max_depth: 8,
                ..EstimateConfig::default()
            },
            ..StabilityConfig::default()
        };
        let r = classify(&s, &cfg, &MarkovChainSpec::uniform(2, 3)).unwrap();
        assert_eq!(r.absolute, AbsoluteStability::Stable);
        assert!(r.jsr.upper < 1.0);
        assert_eq!(r.periodic, PeriodicStability::StableUpTo { max_period: 8 });
        assert!(r.markov.is_stable_evidence());
    }

    #[test]
    fn doubled_identity() {
        let s = MatrixSet::new(vec![Matrix::identity(2).scale_real(2.0)]).unwrap();
        let r = classify(
            &s,
            &StabilityConfig::default(),
            &MarkovChainSpec::uniform(1, 3),
        )
        .unwrap();
        assert_eq!(r.absolute, AbsoluteStability::NotStable);
        assert!(
            matches!(&r.periodic, PeriodicStability::CounterexampleWord { word, .. } if word.to_string() == "1")
        );
        assert!(matches!(r.markov, MarkovStability::NotStable { .. }));
    }

    #[test]
    fn diag_lyapunov_matches_binomial() {
        let s = diag_pair();
        let MarkovEstimate::Lyapunov { lambda, stderr } =
            markov_lyapunov(&s, &MarkovChainSpec::uniform(2, 11), 200, 64).unwrap()
        else {
            panic!()
        };
        let exact = 3f64.ln() * binomial_max_mean(200);
        assert!(
            (lambda - exact).abs() <= 3.0 * stderr,
            "{lambda} {exact} {stderr}"
        );
        let MarkovEstimate::Lyapunov { lambda, .. } =
            markov_lyapunov(&s, &MarkovChainSpec::uniform(2, 11), 10_000, 32).unwrap()
        else {
            panic!()
        };
        assert!((lambda - 3f64.ln() / 2.0).abs() < 0.01, "{lambda}");
    }

    #[test]
    fn rotation_exponent_is_zero() {
        let s = MatrixSet::new(vec![Matrix::rotation(0.3)]).unwrap();
        let MarkovEstimate::Lyapunov { lambda, stderr } =
            markov_lyapunov(&s, &MarkovChainSpec::uniform(1, 0), 500, 8).unwrap()
        else {
            panic!()
        };
        assert!(lambda.abs() < 1e-12 && stderr < 1e-12);
    }

    #[test]
    fn reproducible_and_scale_equivariant() {
        let s = golden();
        let c = MarkovChainSpec::uniform(2, 99);
        let a = markov_lyapunov(&s, &c, 200, 64).unwrap();
        assert_eq!(a, markov_lyapunov(&s, &c, 200, 64).unwrap());
        let b = markov_lyapunov(&s.scaled(0.25), &c, 200, 64).unwrap();
        let (
            MarkovEstimate::Lyapunov { lambda: la, .. },
            MarkovEstimate::Lyapunov { lambda: lb, .. },
        ) = (a, b)
        else {
            panic!()
        };
        assert!((lb - la - 0.25f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn normalised_golden_meets_markov_expectation() {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let s = golden().scaled(1.0 / phi);
        let r = classify(
            &s,
            &StabilityConfig::default(),
            &MarkovChainSpec::uniform(2, 5),
        )
        .unwrap();
        assert_eq!(r.mather_proper, Some(true));
        assert_eq!(r.markov_consistent, Some(true));
        assert!(r.markov.is_stable_evidence());
    }
}
