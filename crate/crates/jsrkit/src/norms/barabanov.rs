// Fixed-point construction of a Barabanov norm,
//     rho * nu(v) = max_i nu(A_i v),
// for real sets: an angular grid in two dimensions and a polar polytope for
// dimensions up to four.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lp;
use super::model::{grid_directions, NormModel};
use crate::bounds::{estimate, EstimateConfig, JsrBounds};
use crate::error::{Error, Result};
use crate::matrix::MatrixSet;
use crate::reducibility::is_real_reducible;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarabanovCertificate {
    pub norm: NormModel,
    pub rho_hat: f64,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarabanovMethod {
    /// Grid for d = 2, polytope for 3 <= d <= 4.
    Auto,
    Grid,
    Polytope,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarabanovConfig {
    pub method: BarabanovMethod,
    /// Grid directions on [0, pi).
    pub resolution: usize,
    pub max_iters: usize,
    pub tol: f64,
    /// Refuse reducible input. Turning this off allows pure fixed-point
    /// experiments on reducible sets.
    pub require_irreducible: bool,
    pub irreducibility_tol: f64,
    pub vertex_cap: usize,
    /// Seed for the random test directions used by the polytope method.
    pub seed: u64,
}

impl Default for BarabanovConfig {
    fn default() -> Self {
        Self {
            method: BarabanovMethod::Auto,
            resolution: 2048,
            max_iters: 20_000,
            tol: 1e-10,
            require_irreducible: true,
            irreducibility_tol: 1e-9,
            vertex_cap: 10_000,
            seed: 0x5eed,
        }
    }
}

/// Run the iteration and check the result against `bounds` (computed here
/// when not supplied).
pub fn barabanov_iterate(
    set: &MatrixSet,
    config: &BarabanovConfig,
    bounds: Option<&JsrBounds>,
) -> Result<BarabanovCertificate> {
    if !set.is_real() {
        return Err(Error::Domain(
            "Barabanov construction needs real matrices".into(),
        ));
    }
    let d = set.dim();
    let method = match config.method {
        BarabanovMethod::Auto if d == 2 => BarabanovMethod::Grid,
        BarabanovMethod::Auto => BarabanovMethod::Polytope,
        m => m,
    };
    match method {
        BarabanovMethod::Grid if d != 2 => {
            return Err(Error::Domain(
                "the angular grid method is two-dimensional".into(),
            ))
        }
        BarabanovMethod::Polytope if !(2..=4).contains(&d) => {
            return Err(Error::Domain(
                "the polytope method handles dimensions 2 to 4".into(),
            ))
        }
        _ => {}
    }
    if config.require_irreducible && is_real_reducible(set, config.irreducibility_tol)? {
        return Err(Error::Domain("matrix set is reducible".into()));
    }

    let tests = test_directions(d, config, method);
    if let Some(cert) = euclidean_shortcut(set, &tests, config.tol) {
        return check_against(cert, set, bounds);
    }
    let cert = match method {
        BarabanovMethod::Grid => grid_iteration(set, config)?,
        _ => polytope_iteration(set, config, &tests)?,
    };
    check_against(cert, set, bounds)
}

/// max over test vectors of |max_i nu(A_i v) / (rho nu(v)) - 1|
pub fn barabanov_residual(nu: &NormModel, set: &MatrixSet, rho: f64, tests: &[Vec<f64>]) -> f64 {
    tests
        .iter()
        .map(|v| {
            let nv = nu.eval_real(v);
            let img = set
                .matrices()
                .iter()
                .map(|a| nu.eval_real(&a.apply_real(v)))
                .fold(0.0, f64::max);
            (img / (rho * nv) - 1.0).abs()
        })
        .fold(0.0, f64::max)
}

/// The directions residuals are measured on: grid nodes and midpoints for a
/// grid, random unit vectors plus the axes otherwise.
pub fn test_directions(
    d: usize,
    config: &BarabanovConfig,
    method: BarabanovMethod,
) -> Vec<Vec<f64>> {
    if d == 2 && method != BarabanovMethod::Polytope {
        return grid_directions(2 * config.resolution)
            .into_iter()
            .map(|u| u.to_vec())
            .collect();
    }
    random_unit_vectors(d, 512, config.seed)
}

pub fn random_unit_vectors(d: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<Vec<f64>> = (0..d)
        .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    while out.len() < count + d {
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 && n <= 1.0 {
            out.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    out
}

fn euclidean_shortcut(
    set: &MatrixSet,
    tests: &[Vec<f64>],
    tol: f64,
) -> Option<BarabanovCertificate> {
    let nu = NormModel::Euclidean;
    let rho = set.max_operator_norm();
    if rho == 0.0 {
        return None;
    }
    let residual = barabanov_residual(&nu, set, rho, tests);
    (residual <= tol).then_some(BarabanovCertificate {
        norm: nu,
        rho_hat: rho,
        residual,
        iterations: 1,
    })
}

fn check_against(
    cert: BarabanovCertificate,
    set: &MatrixSet,
    bounds: Option<&JsrBounds>,
) -> Result<BarabanovCertificate> {
    let owned;
    let b = match bounds {
        Some(b) => b,
        None => {
            let cfg = EstimateConfig {
                gap: 1e-3,
                max_depth: 16,
                ..EstimateConfig::default()
            };
            owned = estimate(set, &cfg)?;
            &owned
        }
    };
    let slack = cert.residual * cert.rho_hat + 1e-9;
    if !b.contains(cert.rho_hat, slack) {
        return Err(Error::Inconsistent(format!(
            "Barabanov estimate {} outside joint spectral radius bounds [{}, {}]",
            cert.rho_hat, b.lower, b.upper
        )));
    }
    Ok(cert)
}

// Damped iteration on grid values r_j = nu(u_j):
//     mu_j = max_i nu(A_i u_j),  rho = sqrt(max mu/r * min mu/r),
//     r <- normalise((r + mu / rho) / 2).
// The undamped map can cycle between two norms; averaging removes that while
// keeping the same fixed points.
fn grid_iteration(set: &MatrixSet, config: &BarabanovConfig) -> Result<BarabanovCertificate> {
    let m = config.resolution.max(8);
    let dirs = grid_directions(m);
    let mats: Vec<Vec<f64>> = set.matrices().iter().map(|a| a.real_part()).collect();
    let mut r = vec![1.0; m];
    let mut rho_prev = f64::NAN;
    let mut calm = 0;
    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    let mut last_change = f64::INFINITY;

    for it in 1..=config.max_iters {
        let nu = NormModel::AngularGrid2D { values: r.clone() };
        let mu: Vec<f64> = dirs
            .iter()
            .map(|u| {
                mats.iter()
                    .map(|a| nu.eval_real(&[a[0] * u[0] + a[1] * u[1], a[2] * u[0] + a[3] * u[1]]))
                    .fold(0.0, f64::max)
            })
            .collect();
        let (mut hi, mut lo) = (0.0f64, f64::INFINITY);
        for (x, y) in mu.iter().zip(&r) {
            hi = hi.max(x / y);
            lo = lo.min(x / y);
        }
        if hi == 0.0 {
            return Err(Error::Domain("every matrix annihilates the plane".into()));
        }
        let rho = (hi * lo).sqrt();
        let mut next: Vec<f64> = r
            .iter()
            .zip(&mu)
            .map(|(a, b)| 0.5 * (a + b / rho))
            .collect();
        let top = next.iter().cloned().fold(0.0, f64::max);
        next.iter_mut().for_each(|x| *x /= top);
        let change = next
            .iter()
            .zip(&r)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let spread = (hi - lo) / rho;
        if best.as_ref().map_or(true, |b| spread < b.2) {
            best = Some((rho, r.clone(), spread));
        }
        let drho = (rho - rho_prev).abs();
        r = next;
        rho_prev = rho;
        last_change = change;
        if drho <= config.tol && change <= config.tol {
            calm += 1;
            if calm >= 3 {
                let norm = NormModel::AngularGrid2D { values: r };
                let tests = test_directions(2, config, BarabanovMethod::Grid);
                let rho_hat = refine_rho(&norm, set, &tests, rho);
                let residual = barabanov_residual(&norm, set, rho_hat, &tests);
                return Ok(BarabanovCertificate {
                    norm,
                    rho_hat,
                    residual,
                    iterations: it,
                });
            }
        } else {
            calm = 0;
        }
    }
    let (rho, values, _) = best.expect("at least one iteration");
    let norm = NormModel::AngularGrid2D { values };
    let tests = test_directions(2, config, BarabanovMethod::Grid);
    let residual = barabanov_residual(&norm, set, rho, &tests);
    let _ = last_change;
    Err(Error::BarabanovNonConvergence {
        best: Box::new(BarabanovCertificate {
            norm,
            rho_hat: rho,
            residual,
            iterations: config.max_iters,
        }),
    })
}

// Centre rho between the extreme ratios on the test set so the residual is
// symmetric.
fn refine_rho(nu: &NormModel, set: &MatrixSet, tests: &[Vec<f64>], fallback: f64) -> f64 {
    let (mut hi, mut lo) = (0.0f64, f64::INFINITY);
    for v in tests {
        let img = set
            .matrices()
            .iter()
            .map(|a| nu.eval_real(&a.apply_real(v)))
            .fold(0.0, f64::max);
        let q = img / nu.eval_real(v);
        hi = hi.max(q);
        lo = lo.min(q);
    }
    if hi > 0.0 && lo.is_finite() {
        0.5 * (hi + lo)
    } else {
        fallback
    }
}

// Facet form: with nu_k(v) = max_{u in U_k} |<u, v>| the next iterate is
// realised exactly by the normals A_i^T u / rho_k. Normals lying inside the
// absolutely convex hull of the others are redundant and pruned.
fn polytope_iteration(
    set: &MatrixSet,
    config: &BarabanovConfig,
    tests: &[Vec<f64>],
) -> Result<BarabanovCertificate> {
    let d = set.dim();
    let transposes: Vec<Vec<f64>> = set
        .matrices()
        .iter()
        .map(|a| a.transpose().real_part())
        .collect();
    let mut normals: Vec<Vec<f64>> = (0..d)
        .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let eval = |ns: &[Vec<f64>], v: &[f64]| -> f64 {
        ns.iter()
            .map(|u| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>().abs())
            .fold(0.0, f64::max)
    };
    let mut prev_vals: Vec<f64> = tests.iter().map(|v| eval(&normals, v)).collect();
    let mut rho_prev = f64::NAN;
    let mut calm = 0;
    let mut best: Option<(f64, Vec<Vec<f64>>)> = None;

    for it in 1..=config.max_iters {
        let mut images: Vec<Vec<f64>> = Vec::with_capacity(normals.len() * transposes.len());
        for t in &transposes {
            for u in &normals {
                images.push(
                    (0..d)
                        .map(|r| (0..d).map(|c| t[r * d + c] * u[c]).sum())
                        .collect(),
                );
            }
        }
        let raw: Vec<f64> = tests.iter().map(|v| eval(&images, v)).collect();
        let top = raw.iter().cloned().fold(0.0, f64::max);
        if top == 0.0 {
            return Err(Error::Domain(
                "products vanish on every test direction".into(),
            ));
        }
        // rho_k keeps the sup over the test set at 1
        let rho = top;
        let scaled: Vec<Vec<f64>> = images
            .into_iter()
            .map(|u| u.into_iter().map(|x| x / rho).collect())
            .collect();
        let next = prune(scaled);
        if next.len() > config.vertex_cap {
            break;
        }
        let vals: Vec<f64> = tests.iter().map(|v| eval(&next, v)).collect();
        let change = vals
            .iter()
            .zip(&prev_vals)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let drho = (rho - rho_prev).abs();
        normals = next;
        prev_vals = vals;
        rho_prev = rho;
        best = Some((rho, normals.clone()));
        if drho <= config.tol && change <= config.tol {
            calm += 1;
            if calm >= 3 {
                let norm = NormModel::PolarPolytope { normals };
                let rho_hat = refine_rho(&norm, set, tests, rho);
                let residual = barabanov_residual(&norm, set, rho_hat, tests);
                return Ok(BarabanovCertificate {
                    norm,
                    rho_hat,
                    residual,
                    iterations: it,
                });
            }
        } else {
            calm = 0;
        }
    }
    let (rho, normals) = best.unwrap_or((f64::NAN, normals));
    let norm = NormModel::PolarPolytope { normals };
    let residual = barabanov_residual(&norm, set, rho, tests);
    Err(Error::BarabanovNonConvergence {
        best: Box::new(BarabanovCertificate {
            norm,
            rho_hat: rho,
            residual,
            iterations: config.max_iters,
        }),
    })
}

fn prune(mut gens: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    // drop near-zero and duplicate normals first; the LP handles the rest
    gens.retain(|u| u.iter().any(|x| x.abs() > 1e-14));
    gens.sort_by(|a, b| {
        let na: f64 = a.iter().map(|x| x * x).sum();
        let nb: f64 = b.iter().map(|x| x * x).sum();
        nb.total_cmp(&na)
    });
    let mut kept: Vec<Vec<f64>> = Vec::new();
    for u in gens {
        let dup = kept.iter().any(|k| {
            let same = k.iter().zip(&u).all(|(a, b)| (a - b).abs() <= 1e-12);
            let neg = k.iter().zip(&u).all(|(a, b)| (a + b).abs() <= 1e-12);
            same || neg
        });
        if !dup {
            kept.push(u);
        }
    }
    // a normal is redundant when it lies in the absolutely convex hull of the rest
    let mut i = 0;
    while i < kept.len() {
        let others: Vec<Vec<f64>> = kept
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, v)| v.clone())
            .collect();
        let redundant =
            !others.is_empty() && lp::gauge(&others, &kept[i]).is_some_and(|g| g <= 1.0 + 1e-12);
        if redundant {
            kept.remove(i);
        } else {
            i += 1;
        }
    }
    kept
}
