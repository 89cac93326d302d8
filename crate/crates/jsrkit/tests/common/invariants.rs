// Property suites shared by the per-module test files and the acceptance
// runner. Each returns the failing case as a message.

use super::*;
use jsrkit::bounds::{
    estimate, lower_bound_periodic, upper_bound_at_depth, EstimateConfig, MatrixNorm,
};
use jsrkit::cocycle::cocycle_check;
use jsrkit::mather::{build_mather_approx, MatherApprox};
use jsrkit::norms::NormModel;
use jsrkit::stability::{markov_lyapunov, MarkovChainSpec, MarkovEstimate};
use jsrkit::subadditive::{beta_sandwich, MatrixObservable};
use jsrkit::symbolic::DEFAULT_WORD_CAP;
use jsrkit::{Error, Matrix, MatrixSet, Word};
use proptest::test_runner::{TestCaseError, TestRunner};

pub const CASES: u32 = 500;
const CAP: u128 = DEFAULT_WORD_CAP;

fn run<S: Strategy>(
    seed: u64,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    TestRunner::new(config(CASES, seed))
        .run(&strategy, test)
        .map_err(|e| e.to_string())
}

pub fn small_estimate() -> EstimateConfig {
    EstimateConfig {
        gap: 1e-9,
        max_depth: 6,
        max_nodes: 5000,
        norm: MatrixNorm::Operator,
    }
}

pub fn cocycle_relation() -> Result<(), String> {
    run(
        1,
        (set_and_word(1..=4, 3, 1..=32), 0usize..=32),
        |((set, w), split)| {
            let n = split.min(w.len());
            prop_assert!(cocycle_check(&set, &w, n).unwrap());
            Ok(())
        },
    )
}

pub fn exterior_square_multiplicative() -> Result<(), String> {
    let pair = (2usize..=4).prop_flat_map(|d| {
        let m = || prop_oneof![real_matrix(d), complex_matrix(d)];
        (m(), m())
    });
    run(2, pair, |(a, b)| {
        let lhs = a.mul(&b).exterior_square().unwrap();
        let rhs = a
            .exterior_square()
            .unwrap()
            .mul(&b.exterior_square().unwrap());
        let scale = 1.0 + lhs.max_entry_norm().max(rhs.max_entry_norm());
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-9 * scale);
        Ok(())
    })
}

pub fn doubling_monotone() -> Result<(), String> {
    run(10, (any_set(1..=4, 3), 1usize..=3), |(set, n)| {
        let a = upper_bound_at_depth(&set, n, &MatrixNorm::Operator, CAP).unwrap();
        let b = upper_bound_at_depth(&set, 2 * n, &MatrixNorm::Operator, CAP).unwrap();
        prop_assert!(b <= a + 1e-12 * (1.0 + a));
        Ok(())
    })
}

pub fn anytime_sandwich() -> Result<(), String> {
    run(11, (any_set(1..=4, 3), 1usize..=5), |(set, n)| {
        let up = upper_bound_at_depth(&set, n, &MatrixNorm::Operator, CAP).unwrap();
        for m in 1..=n {
            let (lo, _) = lower_bound_periodic(&set, m, CAP).unwrap();
            prop_assert!(lo <= up + 1e-9 * (1.0 + up));
        }
        let b = estimate(&set, &small_estimate()).unwrap();
        prop_assert!(b.lower <= b.upper * (1.0 + 1e-12) + 1e-300);
        Ok(())
    })
}

pub fn estimate_scale_equivariant() -> Result<(), String> {
    run(12, (any_set(1..=4, 3), 0.25f64..4.0), |(set, c)| {
        let a = estimate(&set, &small_estimate()).unwrap();
        let b = estimate(&set.scaled(c), &small_estimate()).unwrap();
        let rel = |x: f64, y: f64| (x - y).abs() <= 1e-9 * x.abs().max(y.abs()).max(1e-300);
        prop_assert!(rel(b.lower, c * a.lower), "{} vs {}", b.lower, c * a.lower);
        prop_assert!(rel(b.upper, c * a.upper), "{} vs {}", b.upper, c * a.upper);
        Ok(())
    })
}

pub fn beta_matches_jsr_bounds() -> Result<(), String> {
    run(
        13,
        (any_set(1..=4, 3), 1usize..=5, 1usize..=5),
        |(set, n, p)| {
            let obs = MatrixObservable::new(&set, MatrixNorm::Operator).unwrap();
            let s = beta_sandwich(&obs, set.len(), n, p).unwrap();
            let up = (1..=n)
                .map(|k| upper_bound_at_depth(&set, k, &MatrixNorm::Operator, CAP).unwrap())
                .fold(f64::INFINITY, f64::min);
            let (lo, _) = lower_bound_periodic(&set, p, CAP).unwrap();
            let same = |a: f64, b: f64| (a == b) || (a - b).abs() <= 1e-9;
            prop_assert!(same(s.upper, up.ln()), "{} vs {}", s.upper, up.ln());
            prop_assert!(same(s.lower, lo.ln()), "{} vs {}", s.lower, lo.ln());
            prop_assert!(s.lower <= s.upper + 1e-9);
            Ok(())
        },
    )
}

// Markov simulation

// divisible by every depth up to 8, so a horizon-length product splits into
// whole blocks of the depth that attains the upper bound
pub const HORIZON: usize = 840;
pub const TRIALS: usize = 16;

pub fn full_chain(l: usize) -> impl Strategy<Value = MarkovChainSpec> {
    (prop::collection::vec(0.05f64..1.0, l * l + l), any::<u64>()).prop_map(move |(w, seed)| {
        let norm = |r: &[f64]| {
            let s: f64 = r.iter().sum();
            let mut v: Vec<f64> = r.iter().map(|x| x / s).collect();
            // push rounding into the last entry so rows sum to 1 to the ulp
            let head: f64 = v[..l - 1].iter().sum();
            v[l - 1] = 1.0 - head;
            v
        };
        let transition = w[..l * l].chunks(l).map(norm).collect();
        MarkovChainSpec::new(transition, norm(&w[l * l..]), seed).unwrap()
    })
}

pub fn set_and_chain() -> impl Strategy<Value = (MatrixSet, MarkovChainSpec)> {
    any_set(1..=4, 3).prop_flat_map(|s| {
        let l = s.len();
        (Just(s), full_chain(l))
    })
}

pub fn lyapunov(set: &MatrixSet, chain: &MarkovChainSpec) -> Option<(f64, f64)> {
    match markov_lyapunov(set, chain, HORIZON, TRIALS).unwrap() {
        MarkovEstimate::Lyapunov { lambda, stderr } => Some((lambda, stderr)),
        MarkovEstimate::ZeroAbsorption { .. } => None,
    }
}

pub fn lyapunov_scale_equivariant() -> Result<(), String> {
    run(31, (set_and_chain(), 0.25f64..4.0), |((set, chain), c)| {
        let Some((a, sa)) = lyapunov(&set, &chain) else {
            return Err(TestCaseError::reject("absorbed"));
        };
        let (b, sb) = lyapunov(&set.scaled(c), &chain).expect("scaling does not change absorption");
        prop_assert!(
            (b - a - c.ln()).abs() <= 3.0 * (sa + sb) + 1e-9,
            "{a} {b} {}",
            c.ln()
        );
        Ok(())
    })
}

// Mather survivors

// Random real sets, half of them carrying a scaled isometry block so that
// the Euclidean bound max ||A_i|| is attained by a periodic word.
pub fn mather_set() -> impl Strategy<Value = MatrixSet> {
    (
        real_set(2..=4, 3),
        any::<bool>(),
        0.0f64..std::f64::consts::TAU,
    )
        .prop_map(|(set, iso, theta)| {
            let mut mats = set.matrices().to_vec();
            if iso {
                let d = set.dim();
                let r = Matrix::rotation(theta);
                let mut rows = vec![vec![0.0; d]; d];
                for i in 0..d {
                    rows[i][i] = 1.0;
                }
                for i in 0..2 {
                    for j in 0..2 {
                        rows[i][j] = r.row(i)[j].re;
                    }
                }
                mats[0] = Matrix::from_parts(&rows, None).unwrap();
            }
            let top = mats.iter().map(Matrix::operator_norm).fold(0.0, f64::max);
            let own = mats[0].operator_norm();
            if own > 0.0 {
                mats[0] = mats[0].scale_real(top / own);
            }
            MatrixSet::new(mats).unwrap()
        })
}

pub fn rho_hat(set: &MatrixSet) -> f64 {
    set.matrices()
        .iter()
        .map(Matrix::operator_norm)
        .fold(0.0, f64::max)
}

pub fn build(set: &MatrixSet, depth: usize, tol: f64) -> Option<MatherApprox> {
    match build_mather_approx(set, &NormModel::Euclidean, rho_hat(set), depth, tol) {
        Ok(a) => Some(a),
        Err(Error::Inconsistent(_)) => None,
        Err(e) => panic!("{e}"),
    }
}

pub fn survivors_nest_and_shift() -> Result<(), String> {
    run(
        20,
        (mather_set(), 2usize..=6, 1e-3f64..0.3),
        |(set, depth, tol)| {
            let Some(a) = build(&set, depth, tol) else {
                return Err(TestCaseError::reject("empty"));
            };
            for n in 2..=depth {
                for s in a.at(n) {
                    let w = s.word.symbols();
                    let prefix = Word::new(set.len(), w[..n - 1].to_vec()).unwrap();
                    let shifted = Word::new(set.len(), w[1..].to_vec()).unwrap();
                    prop_assert!(a.contains(&prefix), "prefix of {:?}", w);
                    prop_assert!(a.contains(&shifted), "shift of {:?}", w);
                }
            }
            Ok(())
        },
    )
}

pub fn survivor_traces_stay_above_floor() -> Result<(), String> {
    run(
        21,
        (mather_set(), 1usize..=6, 1e-3f64..0.3),
        |(set, depth, tol)| {
            let Some(a) = build(&set, depth, tol) else {
                return Err(TestCaseError::reject("empty"));
            };
            prop_assert!(a.min_trace() >= (1.0 - tol).ln() - 1e-12);
            for n in 1..=depth {
                for s in a.at(n) {
                    prop_assert_eq!(s.log_trace.len(), n);
                }
            }
            Ok(())
        },
    )
}

/// The suites an acceptance run times as a group.
pub fn all() -> Vec<(&'static str, fn() -> Result<(), String>)> {
    vec![
        ("cocycle relation", cocycle_relation),
        ("doubling monotonicity", doubling_monotone),
        ("anytime sandwich", anytime_sandwich),
        (
            "exterior-square multiplicativity",
            exterior_square_multiplicative,
        ),
        ("estimate scale equivariance", estimate_scale_equivariant),
        ("markov scale equivariance", lyapunov_scale_equivariant),
        ("mather nesting and shift", survivors_nest_and_shift),
        ("survivor trace floor", survivor_traces_stay_above_floor),
        ("beta vs jsr bounds", beta_matches_jsr_bounds),
    ]
}
