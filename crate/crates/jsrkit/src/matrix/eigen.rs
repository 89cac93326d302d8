// General (non-Hermitian) eigenvalues.
//
// Up to 3x3 the characteristic polynomial is solved directly and each root is
// polished by a few Newton steps. Larger matrices go through Householder
// reduction to Hessenberg form followed by single-shift complex QR.

use super::{Matrix, C64, ZERO};
use crate::error::{Error, Result};

const QR_ITER_CAP: usize = 500;
const UNSHIFTED_SWEEPS: usize = 2;

pub fn eigenvalues(a: &Matrix) -> Result<Vec<C64>> {
    if !a.is_square() {
        return Err(Error::Dimension("eigenvalues need a square matrix".into()));
    }
    match a.rows() {
        0 => Ok(vec![]),
        1 => Ok(vec![a[(0, 0)]]),
        2 => Ok(eig2(a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]).to_vec()),
        3 => Ok(eig3(a)),
        _ => eigenvalues_qr(a),
    }
}

fn eig2(a: C64, b: C64, c: C64, d: C64) -> [C64; 2] {
    let half_tr = (a + d) * 0.5;
    let det = a * d - b * c;
    let s = (half_tr * half_tr - det).sqrt();
    let (p, m) = (half_tr + s, half_tr - s);
    // take the larger root directly and recover the other from the product to
    // avoid cancellation
    let big = if p.norm() >= m.norm() { p } else { m };
    if big == ZERO {
        return [ZERO, ZERO];
    }
    [big, det / big]
}

fn eig3(m: &Matrix) -> Vec<C64> {
    let tr = m.trace();
    let minors = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)] + m[(0, 0)] * m[(2, 2)]
        - m[(0, 2)] * m[(2, 0)]
        + m[(1, 1)] * m[(2, 2)]
        - m[(1, 2)] * m[(2, 1)];
    let det = m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
        - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
        + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)]);
    // x^3 + a x^2 + b x + c
    let (a, b, c) = (-tr, minors, -det);
    let mut roots = cubic_roots(a, b, c);
    for r in roots.iter_mut() {
        *r = polish(*r, a, b, c);
    }
    roots.to_vec()
}

fn cubic_roots(a: C64, b: C64, c: C64) -> [C64; 3] {
    let shift = a / 3.0;
    let p = b - a * a / 3.0;
    let q = a * a * a * (2.0 / 27.0) - a * b / 3.0 + c;
    let disc = (q * q * 0.25 + p * p * p / 27.0).sqrt();
    let u3 = {
        let plus = -q * 0.5 + disc;
        let minus = -q * 0.5 - disc;
        if plus.norm() >= minus.norm() {
            plus
        } else {
            minus
        }
    };
    if u3.norm() == 0.0 {
        // p = q = 0: a triple root at the shift
        return [-shift; 3];
    }
    let u = u3.cbrt();
    let omega = C64::new(-0.5, 3f64.sqrt() / 2.0);
    let mut out = [ZERO; 3];
    let mut w = C64::new(1.0, 0.0);
    for r in out.iter_mut() {
        let uk = u * w;
        *r = uk - p / (uk * 3.0) - shift;
        w *= omega;
    }
    out
}

fn polish(mut x: C64, a: C64, b: C64, c: C64) -> C64 {
    let f = |x: C64| ((x + a) * x + b) * x + c;
    let mut fx = f(x);
    for _ in 0..4 {
        let df = (x * 3.0 + a * 2.0) * x + b;
        if df.norm() == 0.0 {
            break;
        }
        let next = x - fx / df;
        let fn_ = f(next);
        if fn_.norm() >= fx.norm() {
            break;
        }
        x = next;
        fx = fn_;
    }
    x
}

/// Hessenberg + shifted QR path, usable at any size. Exposed so the closed
/// forms can be cross-checked against it.
pub fn eigenvalues_qr(a: &Matrix) -> Result<Vec<C64>> {
    let n = a.rows();
    if n == 0 {
        return Ok(vec![]);
    }
    let mut h = hessenberg(a);
    let mut out = Vec::with_capacity(n);
    let mut hi = n - 1;
    let mut iter = 0usize;
    let mut total = 0usize;
    loop {
        if hi == 0 {
            out.push(h[(0, 0)]);
            break;
        }
        // locate the bottom of the current unreduced block
        let mut l = hi;
        while l > 0 {
            let s = h[(l - 1, l - 1)].norm() + h[(l, l)].norm();
            let s = if s == 0.0 { 1.0 } else { s };
            if h[(l, l - 1)].norm() <= f64::EPSILON * s {
                h[(l, l - 1)] = ZERO;
                break;
            }
            l -= 1;
        }
        if l == hi {
            out.push(h[(hi, hi)]);
            hi -= 1;
            iter = 0;
            continue;
        }
        if iter >= QR_ITER_CAP {
            return Err(Error::NonConvergence {
                matrix: Box::new(a.clone()),
            });
        }
        let mu = if total < UNSHIFTED_SWEEPS {
            ZERO
        } else if iter > 0 && iter % 10 == 0 {
            // exceptional shift to break cycles
            let t = h[(hi, hi - 1)].norm();
            h[(hi, hi)] + C64::new(1.5 * t, 0.5 * t)
        } else {
            wilkinson(&h, hi)
        };
        qr_step(&mut h, l, hi, mu);
        iter += 1;
        total += 1;
    }
    Ok(out)
}

fn wilkinson(h: &Matrix, hi: usize) -> C64 {
    let [x, y] = eig2(
        h[(hi - 1, hi - 1)],
        h[(hi - 1, hi)],
        h[(hi, hi - 1)],
        h[(hi, hi)],
    );
    let d = h[(hi, hi)];
    if (x - d).norm() <= (y - d).norm() {
        x
    } else {
        y
    }
}

fn qr_step(h: &mut Matrix, l: usize, hi: usize, mu: C64) {
    for k in l..=hi {
        h[(k, k)] -= mu;
    }
    let mut rots = Vec::with_capacity(hi - l);
    for k in l..hi {
        let (c, s) = givens(h[(k, k)], h[(k + 1, k)]);
        for j in k..=hi {
            let x = h[(k, j)];
            let y = h[(k + 1, j)];
            h[(k, j)] = x * c + s * y;
            h[(k + 1, j)] = -s.conj() * x + y * c;
        }
        rots.push((c, s));
    }
    for (idx, &(c, s)) in rots.iter().enumerate() {
        let k = l + idx;
        for i in l..=(k + 1).min(hi) {
            let x = h[(i, k)];
            let y = h[(i, k + 1)];
            h[(i, k)] = x * c + y * s.conj();
            h[(i, k + 1)] = -x * s + y * c;
        }
    }
    for k in l..=hi {
        h[(k, k)] += mu;
    }
}

/// Rotation [[c, s], [-conj(s), c]] with real c mapping (a, b) to (r, 0).
fn givens(a: C64, b: C64) -> (f64, C64) {
    let na = a.norm();
    let nb = b.norm();
    if nb == 0.0 {
        return (1.0, ZERO);
    }
    if na == 0.0 {
        return (0.0, b.conj() / nb);
    }
    let r = na.hypot(nb);
    (na / r, (a / na) * b.conj() / r)
}

fn hessenberg(a: &Matrix) -> Matrix {
    let n = a.rows();
    let mut h = a.clone();
    for k in 0..n.saturating_sub(2) {
        let x: Vec<C64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let phase = if x[0].norm() == 0.0 {
            C64::new(1.0, 0.0)
        } else {
            x[0] / x[0].norm()
        };
        let mut v = x;
        v[0] += phase * norm;
        let vn = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in v.iter_mut() {
            *z /= vn;
        }
        // H <- (I - 2 v v*) H
        for j in 0..n {
            let dot: C64 = (0..v.len()).map(|t| v[t].conj() * h[(k + 1 + t, j)]).sum();
            for t in 0..v.len() {
                h[(k + 1 + t, j)] -= v[t] * dot * 2.0;
            }
        }
        // H <- H (I - 2 v v*)
        for i in 0..n {
            let dot: C64 = (0..v.len()).map(|t| h[(i, k + 1 + t)] * v[t]).sum();
            for t in 0..v.len() {
                h[(i, k + 1 + t)] -= dot * v[t].conj() * 2.0;
            }
        }
        for i in k + 2..n {
            h[(i, k)] = ZERO;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, d: usize, complex: bool) -> Matrix {
        let data = (0..d * d)
            .map(|_| {
                let im = if complex {
                    rng.gen_range(-1.0..1.0)
                } else {
                    0.0
                };
                C64::new(rng.gen_range(-1.0..1.0), im)
            })
            .collect();
        Matrix::new(d, d, data).unwrap()
    }

    fn sorted_moduli(v: &[C64]) -> Vec<f64> {
        let mut m: Vec<f64> = v.iter().map(|z| z.norm()).collect();
        m.sort_by(|a, b| b.partial_cmp(a).unwrap());
        m
    }

    #[test]
    fn closed_forms_agree_with_qr() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..300 {
            let d = 2 + trial % 2;
            let a = random(&mut rng, d, trial % 3 == 0);
            let direct = sorted_moduli(&eigenvalues(&a).unwrap());
            let qr = sorted_moduli(&eigenvalues_qr(&a).unwrap());
            for (x, y) in direct.iter().zip(&qr) {
                assert!(
                    (x - y).abs() <= 1e-9 * (1.0 + x),
                    "{a:?}: {direct:?} vs {qr:?}"
                );
            }
        }
    }

    #[test]
    fn qr_reproduces_trace_and_known_spectra() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in 4..=8 {
            for _ in 0..20 {
                let a = random(&mut rng, d, true);
                let ev = eigenvalues(&a).unwrap();
                assert_eq!(ev.len(), d);
                let s: C64 = ev.iter().sum();
                assert!((s - a.trace()).norm() < 1e-9);
            }
        }
        // companion matrix of (x-1)(x-2)(x-3)(x-4)
        let c = Matrix::real(&[
            &[10.0, -35.0, 50.0, -24.0],
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 0.0],
        ]);
        let m = sorted_moduli(&eigenvalues(&c).unwrap());
        for (x, y) in m.iter().zip([4.0, 3.0, 2.0, 1.0]) {
            assert!((x - y).abs() < 1e-9, "{m:?}");
        }
        // permutation matrix: all eigenvalues on the unit circle
        let mut p = Matrix::zeros(5, 5);
        for i in 0..5 {
            p[(i, (i + 1) % 5)] = C64::new(1.0, 0.0);
        }
        for z in eigenvalues(&p).unwrap() {
            assert!((z.norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn triple_root_cubic() {
        let j = Matrix::real(&[&[2.0, 1.0, 0.0], &[0.0, 2.0, 1.0], &[0.0, 0.0, 2.0]]);
        for z in eigenvalues(&j).unwrap() {
            assert!((z - C64::new(2.0, 0.0)).norm() < 1e-4);
        }
        assert_eq!(eigenvalues(&Matrix::zeros(3, 3)).unwrap(), vec![ZERO; 3]);
    }
}
