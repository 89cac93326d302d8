use serde::{Deserialize, Serialize};

use super::model::{grid_directions, NormModel};
use super::random_unit_vectors;
use crate::cocycle::ScaledProduct;
use crate::error::Result;
use crate::matrix::MatrixSet;
use crate::symbolic::Word;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremalCheck {
    pub extremal: bool,
    /// max_i nu(A_i) / rho - 1, positive when the check fails.
    pub max_violation: f64,
    pub induced: Vec<f64>,
}

/// nu(A_i) <= rho (1 + tol) for every member.
pub fn check_extremal(
    nu: &NormModel,
    set: &MatrixSet,
    rho: f64,
    tol: f64,
) -> Result<ExtremalCheck> {
    nu.validate(set.dim())?;
    let induced = set
        .matrices()
        .iter()
        .map(|a| nu.induced(a))
        .collect::<Result<Vec<_>>>()?;
    let top = induced.iter().cloned().fold(0.0, f64::max);
    let max_violation = if rho > 0.0 {
        top / rho - 1.0
    } else if top == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(ExtremalCheck {
        extremal: max_violation <= tol,
        max_violation,
        induced,
    })
}

/// m -> log(nu(L(w, m)) / rho^m) for m = 1..=|w|
pub fn log_trace(set: &MatrixSet, nu: &NormModel, rho: f64, w: &Word) -> Result<Vec<f64>> {
    let lr = rho.ln();
    let mut p = ScaledProduct::identity(set.dim());
    let mut out = Vec::with_capacity(w.len());
    for (m, &s) in w.symbols().iter().enumerate() {
        p = p.left_mul(set.get(s as usize)?);
        let v = nu.induced(p.product())?;
        let l = if v == 0.0 {
            f64::NEG_INFINITY
        } else {
            v.ln() + p.log_scale()
        };
        out.push(l - (m + 1) as f64 * lr);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extremality {
    StrongCandidate,
    WeakCandidate,
    Neither,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremalityReport {
    pub class: Extremality,
    /// log of nu(L(w, m)) / rho^m, m = 1..=|w|
    pub log_trace: Vec<f64>,
}

impl ExtremalityReport {
    pub fn ratios(&self) -> Vec<f64> {
        self.log_trace.iter().map(|x| x.exp()).collect()
    }
}

/// Strong: every prefix ratio is at least eps. Weak: the average growth over
/// the whole word is within eps of log rho.
pub fn classify_extremality(
    set: &MatrixSet,
    nu: &NormModel,
    rho: f64,
    w: &Word,
    eps: f64,
) -> Result<ExtremalityReport> {
    if w.is_empty() {
        return Err(crate::Error::Domain(
            "classification needs a non-empty word".into(),
        ));
    }
    let trace = log_trace(set, nu, rho, w)?;
    let le = eps.ln();
    let strong = trace.iter().all(|&t| t >= le);
    let weak = trace.last().copied().unwrap_or(f64::NEG_INFINITY) / w.len() as f64 >= -eps;
    let class = if strong {
        Extremality::StrongCandidate
    } else if weak {
        Extremality::WeakCandidate
    } else {
        Extremality::Neither
    };
    Ok(ExtremalityReport {
        class,
        log_trace: trace,
    })
}

/// Search for a unit vector v with nu(L(w, m) v) >= (1 - tol) rho^m for all
/// prefixes. Candidates are the grid directions (or sampled directions off
/// the plane) followed by the dominant right singular direction of L(w); the
/// first best candidate is kept.
pub fn kozyakin_extremal_witness(
    set: &MatrixSet,
    nu: &NormModel,
    rho: f64,
    w: &Word,
    tol: f64,
) -> Result<Option<Vec<f64>>> {
    let d = set.dim();
    let mut candidates: Vec<Vec<f64>> = match nu {
        NormModel::AngularGrid2D { values } => grid_directions(values.len())
            .into_iter()
            .map(|u| u.to_vec())
            .collect(),
        _ if d == 2 => grid_directions(2048)
            .into_iter()
            .map(|u| u.to_vec())
            .collect(),
        _ => random_unit_vectors(d, 4096, 0x6b6f7a),
    };
    let full = crate::cocycle::scaled_product(set, w)?;
    if !full.is_zero() {
        let p = full.product();
        let gram = p.adjoint().mul(p);
        let e = crate::matrix::hermitian_eigen(&gram);
        let v: Vec<f64> = e.vectors.column(0).iter().map(|z| z.re).collect();
        if v.iter().any(|x| *x != 0.0) {
            candidates.push(v);
        }
    }
    let mats: Vec<&crate::Matrix> = w
        .symbols()
        .iter()
        .map(|&s| set.get(s as usize))
        .collect::<Result<Vec<_>>>()?;
    let floor = (1.0 - tol).ln();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for c in candidates {
        let n0 = nu.eval_real(&c);
        if n0 == 0.0 {
            continue;
        }
        let v0: Vec<f64> = c.iter().map(|x| x / n0).collect();
        // running log of nu(L(w, m) v) / rho^m, renormalised each step
        let mut v = v0.clone();
        let mut acc = 0.0f64;
        let mut worst = f64::INFINITY;
        for a in &mats {
            let next = a.apply_real(&v);
            let n = nu.eval_real(&next);
            if n == 0.0 {
                worst = f64::NEG_INFINITY;
                break;
            }
            acc += (n / rho).ln();
            worst = worst.min(acc);
            if worst < floor && best.as_ref().is_some_and(|b| worst <= b.0) {
                break;
            }
            v = next.into_iter().map(|x| x / n).collect();
        }
        if best.as_ref().map_or(true, |b| worst > b.0) {
            best = Some((worst, v0));
        }
    }
    Ok(best.filter(|b| b.0 >= floor).map(|b| b.1))
}
