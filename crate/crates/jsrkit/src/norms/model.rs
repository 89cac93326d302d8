use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::lp;
use crate::error::{Error, Result};
use crate::matrix::{Matrix, C64};

/// A computable vector norm, together with the matrix norm it induces.
///
/// The polyhedral kinds are norms on R^d. `PolytopeVertices` is the gauge of
/// the absolutely convex hull of the listed vertices (negatives are implied),
/// `PolarPolytope` is `max_u |<u, v>|` over the listed normals, and
/// `AngularGrid2D` gives the norm's value on the unit directions at angles
/// k*pi/M, joined by straight chords.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormModel {
    Euclidean,
    MaxEntryInduced,
    WeightedDiag { weights: Vec<f64> },
    PolytopeVertices { vertices: Vec<Vec<f64>> },
    PolarPolytope { normals: Vec<Vec<f64>> },
    AngularGrid2D { values: Vec<f64> },
}

impl NormModel {
    pub fn id(&self) -> &'static str {
        match self {
            NormModel::Euclidean => "euclidean",
            NormModel::MaxEntryInduced => "max_entry_induced",
            NormModel::WeightedDiag { .. } => "weighted_diag",
            NormModel::PolytopeVertices { .. } => "polytope_vertices",
            NormModel::PolarPolytope { .. } => "polar_polytope",
            NormModel::AngularGrid2D { .. } => "angular_grid_2d",
        }
    }

    /// Induced matrix norms of every kind are submultiplicative.
    pub fn submultiplicative(&self) -> bool {
        true
    }

    pub fn is_polyhedral(&self) -> bool {
        matches!(
            self,
            NormModel::PolytopeVertices { .. }
                | NormModel::PolarPolytope { .. }
                | NormModel::AngularGrid2D { .. }
        )
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Domain(m));
        match self {
            NormModel::Euclidean | NormModel::MaxEntryInduced => Ok(()),
            NormModel::WeightedDiag { weights } => {
                if weights.len() != d {
                    return Err(Error::LengthMismatch {
                        left: weights.len(),
                        right: d,
                    });
                }
                if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                    return bad("weights must be positive and finite".into());
                }
                Ok(())
            }
            NormModel::PolytopeVertices { vertices: g }
            | NormModel::PolarPolytope { normals: g } => {
                if let Some(v) = g.iter().find(|v| v.len() != d) {
                    return Err(Error::LengthMismatch {
                        left: v.len(),
                        right: d,
                    });
                }
                if g.iter().flatten().any(|x| !x.is_finite()) {
                    return bad("polytope coordinates must be finite".into());
                }
                if real_rank(g, d) < d {
                    return bad("polytope generators do not span the space".into());
                }
                Ok(())
            }
            NormModel::AngularGrid2D { values } => {
                if d != 2 {
                    return bad("angular grid norms are two-dimensional".into());
                }
                if values.len() < 2 {
                    return bad("angular grid needs at least two directions".into());
                }
                if values.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
                    return bad("grid values must be positive and finite".into());
                }
                Ok(())
            }
        }
    }

    pub fn eval_real(&self, v: &[f64]) -> f64 {
        match self {
            NormModel::Euclidean => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            NormModel::MaxEntryInduced => v.iter().fold(0.0, |m, x| m.max(x.abs())),
            NormModel::WeightedDiag { weights } => v
                .iter()
                .zip(weights)
                .fold(0.0, |m, (x, w)| m.max(w * x.abs())),
            NormModel::PolytopeVertices { vertices } => {
                lp::gauge(vertices, v).unwrap_or(f64::INFINITY)
            }
            NormModel::PolarPolytope { normals } => normals
                .iter()
                .map(|u| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>().abs())
                .fold(0.0, f64::max),
            NormModel::AngularGrid2D { values } => grid_eval(values, v[0], v[1]),
        }
    }

    /// Complex vectors: the basic kinds extend directly; polyhedral kinds use
    /// the complexification sup_theta nu(Re(e^{i theta} v)), sampled.
    pub fn eval(&self, v: &[C64]) -> f64 {
        match self {
            NormModel::Euclidean => v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt(),
            NormModel::MaxEntryInduced => v.iter().fold(0.0, |m, z| m.max(z.norm())),
            NormModel::WeightedDiag { weights } => v
                .iter()
                .zip(weights)
                .fold(0.0, |m, (z, w)| m.max(w * z.norm())),
            _ => {
                if v.iter().all(|z| z.im == 0.0) {
                    let re: Vec<f64> = v.iter().map(|z| z.re).collect();
                    return self.eval_real(&re);
                }
                (0..64)
                    .map(|k| {
                        let ph = C64::from_polar(1.0, PI * k as f64 / 64.0);
                        let re: Vec<f64> = v.iter().map(|z| (z * ph).re).collect();
                        self.eval_real(&re)
                    })
                    .fold(0.0, f64::max)
            }
        }
    }

    /// The induced matrix norm sup_{nu(v)=1} nu(Av). Polyhedral kinds need a
    /// real matrix.
    pub fn induced(&self, a: &Matrix) -> Result<f64> {
        match self {
            NormModel::Euclidean => Ok(a.operator_norm()),
            NormModel::MaxEntryInduced => Ok(a.max_row_sum()),
            NormModel::WeightedDiag { weights } => {
                let mut best: f64 = 0.0;
                for i in 0..a.rows() {
                    let s: f64 = (0..a.cols())
                        .map(|j| weights[i] * a[(i, j)].norm() / weights[j])
                        .sum();
                    best = best.max(s);
                }
                Ok(best)
            }
            _ if !a.is_real() => Err(Error::Domain(format!(
                "{} norms are defined for real matrices only",
                self.id()
            ))),
            NormModel::PolytopeVertices { vertices } => Ok(vertices
                .iter()
                .map(|v| self.eval_real(&a.apply_real(v)))
                .fold(0.0, f64::max)),
            NormModel::PolarPolytope { normals } => {
                // nu(Av) = max_u |<A^T u, v>|, so the induced norm is the
                // largest dual norm of A^T u, a gauge over the normals
                let at = a.transpose();
                let mut best: f64 = 0.0;
                for u in normals {
                    let g = lp::gauge(normals, &at.apply_real(u)).unwrap_or(f64::INFINITY);
                    best = best.max(g);
                }
                Ok(best)
            }
            NormModel::AngularGrid2D { values } => Ok(grid_vertices(values)
                .iter()
                .map(|x| self.eval_real(&a.apply_real(x)))
                .fold(0.0, f64::max)),
        }
    }

    /// Whether the chord polygon of an angular grid is convex (otherwise its
    /// gauge fails the triangle inequality). Other kinds are always convex.
    pub fn is_convex(&self) -> bool {
        match self {
            NormModel::AngularGrid2D { values } => {
                let mut pts = grid_vertices(values);
                let neg: Vec<Vec<f64>> = pts.iter().map(|p| vec![-p[0], -p[1]]).collect();
                pts.extend(neg);
                let n = pts.len();
                (0..n).all(|k| {
                    let (a, b, c) = (&pts[k], &pts[(k + 1) % n], &pts[(k + 2) % n]);
                    let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
                    cross >= -1e-12 * (a[0].abs() + a[1].abs() + 1.0).powi(2)
                })
            }
            _ => true,
        }
    }
}

pub(crate) fn grid_angle(m: usize, k: usize) -> f64 {
    PI * k as f64 / m as f64
}

pub(crate) fn grid_directions(m: usize) -> Vec<[f64; 2]> {
    (0..m)
        .map(|k| {
            let (s, c) = grid_angle(m, k).sin_cos();
            [c, s]
        })
        .collect()
}

/// Boundary points u_k / r_k of the chord polygon on the upper half plane.
pub(crate) fn grid_vertices(values: &[f64]) -> Vec<Vec<f64>> {
    grid_directions(values.len())
        .iter()
        .zip(values)
        .map(|(u, r)| vec![u[0] / r, u[1] / r])
        .collect()
}

pub(crate) fn grid_eval(values: &[f64], x: f64, y: f64) -> f64 {
    if x == 0.0 && y == 0.0 {
        return 0.0;
    }
    let m = values.len();
    // fold onto the closed upper half plane, angle in [0, pi)
    let (x, y) = if y < 0.0 || (y == 0.0 && x < 0.0) {
        (-x, -y)
    } else {
        (x, y)
    };
    let theta = y.atan2(x);
    let h = PI / m as f64;
    let k = ((theta / h).floor() as usize).min(m - 1);
    let (s0, c0) = grid_angle(m, k).sin_cos();
    let (s1, c1) = grid_angle(m, k + 1).sin_cos();
    let r0 = values[k];
    let r1 = values[(k + 1) % m];
    let p = [c0 / r0, s0 / r0];
    let q = [c1 / r1, s1 / r1];
    // v = a p + b q with a, b >= 0; the chord gauge is a + b
    let det = p[0] * q[1] - p[1] * q[0];
    let a = (x * q[1] - y * q[0]) / det;
    let b = (p[0] * y - p[1] * x) / det;
    a + b
}

fn real_rank(g: &[Vec<f64>], d: usize) -> usize {
    // Gram-Schmidt with a relative threshold
    let scale = g
        .iter()
        .flatten()
        .fold(0.0f64, |m, x| m.max(x.abs()))
        .max(f64::MIN_POSITIVE);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in g {
        let mut w: Vec<f64> = v.iter().map(|x| x / scale).collect();
        for b in &basis {
            let p: f64 = w.iter().zip(b).map(|(x, y)| x * y).sum();
            for (x, y) in w.iter_mut().zip(b) {
                *x -= p * y;
            }
        }
        let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-10 {
            basis.push(w.into_iter().map(|x| x / n).collect());
            if basis.len() == d {
                break;
            }
        }
    }
    basis.len()
}
