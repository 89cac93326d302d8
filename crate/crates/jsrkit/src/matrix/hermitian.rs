// Cyclic Jacobi for Hermitian matrices. Each off-diagonal pair is first made
// real by a diagonal phase and then annihilated by a real plane rotation.

use super::{Matrix, C64, ZERO};

const MAX_SWEEPS: usize = 100;

#[derive(Clone, Debug)]
pub struct HermitianEigen {
    /// Eigenvalues in decreasing order.
    pub values: Vec<f64>,
    /// Unit eigenvectors as columns, aligned with `values`.
    pub vectors: Matrix,
}

pub fn hermitian_eigen(a: &Matrix) -> HermitianEigen {
    let n = a.rows();
    assert!(a.is_square(), "hermitian_eigen needs a square matrix");
    // symmetrise to guard against rounding asymmetry in products like A*A
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
        }
    }
    let mut v = Matrix::identity(n);
    let scale = m.frobenius().max(f64::MIN_POSITIVE);

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-17 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut m, &mut v, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].re.total_cmp(&m[(i, i)].re));
    let values = order.iter().map(|&i| m[(i, i)].re).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        for r in 0..n {
            vectors[(r, c)] = v[(r, i)];
        }
    }
    HermitianEigen { values, vectors }
}

fn rotate(m: &mut Matrix, v: &mut Matrix, p: usize, q: usize) {
    let n = m.rows();
    let apq = m[(p, q)];
    let g = apq.norm();
    if g == 0.0 {
        return;
    }
    let app = m[(p, p)].re;
    let aqq = m[(q, q)].re;
    if g <= 1e-300 || g * 1e-18 < f64::MIN_POSITIVE {
        m[(p, q)] = ZERO;
        m[(q, p)] = ZERO;
        return;
    }
    // phase: scale column q by conj(apq)/|apq| so that m[p][q] becomes real
    let ph = apq.conj() / g;
    for r in 0..n {
        m[(r, q)] *= ph;
    }
    for r in 0..n {
        m[(q, r)] *= ph.conj();
    }
    for r in 0..n {
        v[(r, q)] *= ph;
    }
    let theta = (aqq - app) / (2.0 * g);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    for r in 0..n {
        let x = m[(r, p)];
        let y = m[(r, q)];
        m[(r, p)] = x * c - y * s;
        m[(r, q)] = x * s + y * c;
    }
    for r in 0..n {
        let x = m[(p, r)];
        let y = m[(q, r)];
        m[(p, r)] = x * c - y * s;
        m[(q, r)] = x * s + y * c;
    }
    for r in 0..n {
        let x = v[(r, p)];
        let y = v[(r, q)];
        v[(r, p)] = x * c - y * s;
        v[(r, q)] = x * s + y * c;
    }
    m[(p, q)] = ZERO;
    m[(q, p)] = ZERO;
    m[(p, p)] = C64::new(m[(p, p)].re, 0.0);
    m[(q, q)] = C64::new(m[(q, q)].re, 0.0);
}

/// Orthonormal basis (columns) of the numerical null space of `a`, using the
/// singular values of `a` with an absolute threshold.
pub(crate) fn null_space(a: &Matrix, tol: f64) -> Vec<Vec<C64>> {
    let gram = a.adjoint().mul(a);
    let e = hermitian_eigen(&gram);
    let tol2 = tol * tol;
    (0..e.values.len())
        .filter(|&i| e.values[i] <= tol2)
        .map(|i| e.vectors.column(i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_spectrum_and_vectors() {
        let mut a = Matrix::zeros(3, 3);
        let entries = [
            (0, 0, C64::new(2.0, 0.0)),
            (0, 1, C64::new(1.0, 1.0)),
            (0, 2, C64::new(0.0, -0.5)),
            (1, 1, C64::new(-1.0, 0.0)),
            (1, 2, C64::new(0.3, 0.2)),
            (2, 2, C64::new(0.5, 0.0)),
        ];
        for (i, j, z) in entries {
            a[(i, j)] = z;
            a[(j, i)] = z.conj();
        }
        let e = hermitian_eigen(&a);
        for k in 0..3 {
            let x = e.vectors.column(k);
            let ax = a.apply(&x);
            for i in 0..3 {
                assert!((ax[i] - x[i] * e.values[k]).norm() < 1e-12);
            }
        }
        assert!(e.values[0] >= e.values[1] && e.values[1] >= e.values[2]);
        let tr: f64 = e.values.iter().sum();
        assert!((tr - 1.5).abs() < 1e-12);
    }

    #[test]
    fn null_space_of_rank_one() {
        let a = Matrix::real(&[&[1.0, 2.0], &[2.0, 4.0]]);
        let ns = null_space(&a, 1e-9);
        assert_eq!(ns.len(), 1);
        let r = a.apply(&ns[0]);
        assert!(r.iter().all(|z| z.norm() < 1e-12));
    }
}
