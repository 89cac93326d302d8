// One line per acceptance criterion. Every check runs even when an earlier
// one fails, and the test fails at the end if any line says FAIL.

mod common;

use std::time::{Duration, Instant};

use common::invariants;
use jsrkit::bounds::{estimate, EstimateConfig};
use jsrkit::mather::{build_mather_approx, minimal_set_diagnostic, MinimalSetDiagnostic};
use jsrkit::norms::{barabanov_iterate, BarabanovConfig, NormModel};
use jsrkit::ratio::{alpha_grid, hmst_family, optimal_periodic_ratio, ratio_curve, DEFAULT_SLACK};
use jsrkit::reducibility::{triangularise, TriangulariseConfig};
use jsrkit::stability::{
    classify, markov_lyapunov, MarkovChainSpec, MarkovEstimate, MarkovStability, PeriodicStability,
    StabilityConfig,
};
use jsrkit::{Matrix, MatrixSet};
use rand::{Rng, SeedableRng};

struct Outcome {
    failures: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self {
            failures: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }
}

fn report(n: usize, title: &str, budget: Duration, body: impl FnOnce(&mut Outcome)) -> bool {
    let start = Instant::now();
    let mut out = Outcome::new();
    body(&mut out);
    let took = start.elapsed();
    out.check(
        took < budget,
        format!("runtime {:.2?} over budget {:?}", took, budget),
    );
    let ok = out.failures.is_empty();
    let verdict = if ok { "PASS" } else { "FAIL" };
    println!("criterion {n} {verdict}: {title} ({:.2?})", took);
    for f in &out.failures {
        println!("    {f}");
    }
    ok
}

fn diag_pair() -> MatrixSet {
    MatrixSet::new(vec![Matrix::diag(&[3.0, 1.0]), Matrix::diag(&[1.0, 3.0])]).unwrap()
}

fn nilpotent_pair() -> MatrixSet {
    MatrixSet::new(vec![
        Matrix::real(&[&[0.0, 1.0], &[0.0, 0.0]]),
        Matrix::real(&[&[0.0, 0.0], &[1.0, 0.0]]),
    ])
    .unwrap()
}

fn remark_set(out: &mut Outcome) {
    let set = diag_pair();
    let b = estimate(
        &set,
        &EstimateConfig {
            gap: 1e-9,
            ..EstimateConfig::default()
        },
    )
    .unwrap();
    out.check(
        (b.lower - 3.0).abs() <= 1e-12 && (b.upper - 3.0).abs() <= 1e-12,
        format!("jsr interval [{}, {}]", b.lower, b.upper),
    );

    let t = triangularise(&set, &TriangulariseConfig::default()).unwrap();
    let corner = t
        .corner_blocks
        .iter()
        .map(Matrix::max_entry_norm)
        .fold(0.0, f64::max);
    out.check(
        corner <= 1e-12,
        format!("corner blocks not zero: {corner:e}"),
    );
    let residual = t.residuals.iter().cloned().fold(0.0, f64::max);
    out.check(
        residual <= 1e-12,
        format!("lower-left residual {residual:e}"),
    );
    let entry = |s: &MatrixSet, i: usize| s.matrices()[i].row(0)[0].norm();
    let pairs: Vec<(f64, f64)> = (0..2)
        .map(|i| (entry(&t.upper_blocks, i), entry(&t.lower_blocks, i)))
        .collect();
    let near =
        |p: (f64, f64), q: (f64, f64)| (p.0 - q.0).abs() <= 1e-12 && (p.1 - q.1).abs() <= 1e-12;
    let blocks_ok = t.block_dim == 1
        && ((near(pairs[0], (3.0, 1.0)) && near(pairs[1], (1.0, 3.0)))
            || (near(pairs[0], (1.0, 3.0)) && near(pairs[1], (3.0, 1.0))));
    out.check(blocks_ok, format!("diagonal blocks {pairs:?}"));

    let a = build_mather_approx(&set, &NormModel::MaxEntryInduced, 3.0, 8, 1e-9).unwrap();
    let words: Vec<String> = a.words_at(8).iter().map(|w| w.to_string()).collect();
    out.check(
        words == ["11111111", "22222222"],
        format!("depth-8 survivors {words:?}"),
    );
    let diag = minimal_set_diagnostic(&a);
    out.check(
        diag == MinimalSetDiagnostic::MultipleScc(2),
        format!("diagnostic {diag:?}"),
    );
}

fn nilpotent_example(out: &mut Outcome) {
    let set = nilpotent_pair();
    let b = estimate(
        &set,
        &EstimateConfig {
            gap: 1e-9,
            max_depth: 2,
            ..EstimateConfig::default()
        },
    )
    .unwrap();
    out.check(
        (b.lower - 1.0).abs() <= 1e-9 && (b.upper - 1.0).abs() <= 1e-9,
        format!(
            "jsr interval [{}, {}] at depth {}",
            b.lower, b.upper, b.upper_depth
        ),
    );

    let chain = MarkovChainSpec::uniform(2, 0x5eed);
    let r = classify(&set, &StabilityConfig::default(), &chain).unwrap();
    match &r.periodic {
        PeriodicStability::CounterexampleWord { word, rho } => {
            out.check(
                word.to_string() == "12",
                format!("counterexample word {word}"),
            );
            out.check(
                (rho - 1.0).abs() <= 1e-12,
                format!("counterexample rho {rho}"),
            );
        }
        other => out.check(false, format!("periodic verdict {other:?}")),
    }
    out.check(
        matches!(r.markov, MarkovStability::ZeroAbsorption { .. }),
        format!("markov verdict {:?}", r.markov),
    );

    match markov_lyapunov(&set, &chain, 16, 1024).unwrap() {
        MarkovEstimate::ZeroAbsorption { prob, .. } => {
            let need = 1.0 - 2f64.powi(-10);
            out.check(prob >= need, format!("P(absorbed by 16) = {prob} < {need}"));
        }
        other => out.check(false, format!("no absorption: {other:?}")),
    }
}

fn golden_family(out: &mut Outcome) {
    const PHI_ROUNDED: f64 = 1.6180339887;
    let set = hmst_family(1.0).unwrap();
    let b = estimate(
        &set,
        &EstimateConfig {
            gap: 0.02,
            ..EstimateConfig::default()
        },
    )
    .unwrap();
    // the constant is phi rounded down at 1e-10, so allow that much below the
    // interval
    out.check(
        b.upper - b.lower <= 0.02
            && b.lower <= PHI_ROUNDED + 1e-10
            && PHI_ROUNDED <= b.upper + 1e-10,
        format!("jsr interval [{}, {}]", b.lower, b.upper),
    );
    out.check(
        b.lower_witness.word().to_string() == "12",
        format!("lower witness {}", b.lower_witness.word()),
    );

    let cfg = BarabanovConfig {
        resolution: 2048,
        ..BarabanovConfig::default()
    };
    match barabanov_iterate(&set, &cfg, Some(&b)) {
        Ok(cert) => {
            out.check(
                cert.residual <= 1e-3,
                format!("Barabanov residual {}", cert.residual),
            );
            out.check(
                b.lower - 1e-9 <= cert.rho_hat && cert.rho_hat <= b.upper + 1e-9,
                format!(
                    "Barabanov rho_hat {} outside [{}, {}]",
                    cert.rho_hat, b.lower, b.upper
                ),
            );
            match build_mather_approx(&set, &cert.norm, cert.rho_hat, 12, 5e-3) {
                Ok(a) => {
                    let d = minimal_set_diagnostic(&a);
                    out.check(
                        d == MinimalSetDiagnostic::UniqueScc,
                        format!("depth-12 diagnostic {d:?}"),
                    );
                }
                Err(e) => out.check(false, format!("mather build: {e}")),
            }
        }
        Err(e) => out.check(false, format!("Barabanov iteration: {e}")),
    }

    for alpha in [0.25, 0.5, 1.0] {
        let ext = hmst_family(alpha).unwrap().exterior_square().unwrap();
        let e = estimate(
            &ext,
            &EstimateConfig {
                gap: 1e-12,
                ..EstimateConfig::default()
            },
        )
        .unwrap();
        let want = 1.0f64.max(alpha);
        out.check(
            (e.lower - want).abs() <= 1e-12 && (e.upper - want).abs() <= 1e-12,
            format!(
                "exterior square at alpha {alpha}: [{}, {}] vs {want}",
                e.lower, e.upper
            ),
        );
    }

    let r = optimal_periodic_ratio(&set, 1, 8, DEFAULT_SLACK).unwrap();
    out.check(
        r.value == 0.5 && r.unique,
        format!("one-ratio {} unique {}", r.value, r.unique),
    );
}

fn invariant_suites(out: &mut Outcome) {
    for (name, suite) in invariants::all() {
        let start = Instant::now();
        let res = suite();
        println!(
            "    {name}: {} cases, {:.2?}",
            invariants::CASES,
            start.elapsed()
        );
        if let Err(e) = res {
            out.check(false, format!("{name}: {e}"));
        }
    }
}

fn consistency_sweep(out: &mut Outcome) {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x51);
    let cfg = StabilityConfig::default();
    let (mut flagged, mut violations) = (0, 0);
    for case in 0..100 {
        let mut mat = || {
            let rows: Vec<Vec<f64>> = (0..2)
                .map(|_| (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            Matrix::from_parts(&rows, None).unwrap()
        };
        let raw = MatrixSet::new(vec![mat(), mat()]).unwrap();
        let u = estimate(&raw, &cfg.estimate).unwrap().upper;
        let target = rng.gen_range(0.995..=1.005);
        let set = raw.scaled(target / u);
        let chain = MarkovChainSpec::uniform(2, 1000 + case);
        let r = classify(&set, &cfg, &chain).unwrap();
        let in_band = (0.995..=1.005).contains(&r.jsr.upper);
        out.check(
            in_band,
            format!("case {case}: rescaled upper {}", r.jsr.upper),
        );
        let periodic_ok =
            matches!(r.periodic, PeriodicStability::StableUpTo { max_period } if max_period >= 8);
        if periodic_ok && r.mather_proper == Some(true) {
            flagged += 1;
            if !r.markov.is_stable_evidence() {
                violations += 1;
                out.check(false, format!("case {case}: markov {:?}", r.markov));
            }
        }
    }
    println!("    {flagged} of 100 cases met the hypothesis, {violations} violations");
}

fn continuity(out: &mut Outcome) {
    let alphas = alpha_grid(0.1, 1.0, 0.05).unwrap();
    let c = ratio_curve(hmst_family, &alphas, 1, 10).unwrap();
    out.check(c.rows.len() == 19, format!("{} grid points", c.rows.len()));
    let unique = c.rows.iter().filter(|r| r.unique).count();
    match c.max_adjacent_jump {
        Some(j) => out.check(j <= 0.2, format!("max adjacent jump {j}")),
        None => out.check(false, "no adjacent unique-flagged pair"),
    }
    println!(
        "    {unique} of {} points unique, max adjacent jump {:?}",
        c.rows.len(),
        c.max_adjacent_jump
    );
}

#[test]
fn acceptance() {
    let results = [
        report(
            1,
            "remark set bounds, blocks, survivors",
            Duration::from_secs(1),
            remark_set,
        ),
        report(
            2,
            "nilpotent pair bounds, counterexample, absorption",
            Duration::from_secs(5),
            nilpotent_example,
        ),
        report(
            3,
            "A_alpha at alpha = 1",
            Duration::from_secs(60),
            golden_family,
        ),
        report(
            4,
            "invariant suites",
            Duration::from_secs(120),
            invariant_suites,
        ),
        report(
            5,
            "Markov consistency sweep",
            Duration::from_secs(600),
            consistency_sweep,
        ),
        report(
            6,
            "one-ratio continuity",
            Duration::from_secs(300),
            continuity,
        ),
    ];
    let failed: Vec<usize> = (1..=6).filter(|&n| !results[n - 1]).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
