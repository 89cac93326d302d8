// Dense two-phase simplex for the tiny programs behind polytope gauges:
//     minimise sum |lambda_k|  subject to  sum lambda_k g_k = v
// with at most a handful of equality rows. Bland's rule keeps it finite.

const EPS: f64 = 1e-11;

/// Gauge of the absolutely convex hull of `gens` at `v`, or `None` when `v`
/// lies outside the span of the generators.
pub(crate) fn gauge(gens: &[Vec<f64>], v: &[f64]) -> Option<f64> {
    let d = v.len();
    if v.iter().all(|x| *x == 0.0) {
        return Some(0.0);
    }
    let n = gens.len();
    // columns: +g_k, -g_k, then one artificial per row
    let cols = 2 * n + d;
    let width = cols + 1;
    let mut t = vec![0.0; (d + 1) * width];
    let at = |r: usize, c: usize| r * width + c;
    for r in 0..d {
        let sign = if v[r] < 0.0 { -1.0 } else { 1.0 };
        for (k, g) in gens.iter().enumerate() {
            t[at(r, k)] = sign * g[r];
            t[at(r, n + k)] = -sign * g[r];
        }
        t[at(r, 2 * n + r)] = 1.0;
        t[at(r, cols)] = sign * v[r];
    }
    let mut basis: Vec<usize> = (0..d).map(|r| 2 * n + r).collect();

    // phase I: minimise the sum of artificials
    set_objective(
        &mut t,
        width,
        d,
        &basis,
        |c| if c >= 2 * n { 1.0 } else { 0.0 },
    );
    run(&mut t, width, d, &mut basis, cols)?;
    if t[at(d, cols)].abs() > 1e-9 * (1.0 + v.iter().map(|x| x.abs()).sum::<f64>()) {
        return None;
    }
    // drive any artificial still in the basis (at zero level) out if possible
    for r in 0..d {
        if basis[r] >= 2 * n {
            if let Some(c) = (0..2 * n).find(|&c| t[at(r, c)].abs() > EPS) {
                pivot(&mut t, width, d, r, c);
                basis[r] = c;
            }
        }
    }
    // phase II over the structural columns only
    for r in 0..=d {
        for c in 2 * n..cols {
            if !basis.contains(&c) {
                t[at(r, c)] = 0.0;
            }
        }
    }
    set_objective(
        &mut t,
        width,
        d,
        &basis,
        |c| if c < 2 * n { 1.0 } else { 0.0 },
    );
    run(&mut t, width, d, &mut basis, 2 * n)?;
    Some((-t[at(d, cols)]).max(0.0))
}

// Objective row holds reduced costs c_j - c_B B^-1 a_j and minus the value.
fn set_objective(
    t: &mut [f64],
    width: usize,
    d: usize,
    basis: &[usize],
    cost: impl Fn(usize) -> f64,
) {
    let cols = width - 1;
    for c in 0..cols {
        t[d * width + c] = cost(c);
    }
    t[d * width + cols] = 0.0;
    for (r, &b) in basis.iter().enumerate() {
        let cb = cost(b);
        if cb != 0.0 {
            for c in 0..width {
                t[d * width + c] -= cb * t[r * width + c];
            }
        }
    }
}

fn run(t: &mut [f64], width: usize, d: usize, basis: &mut [usize], allowed: usize) -> Option<()> {
    let cols = width - 1;
    for _ in 0..10_000 {
        let Some(enter) = (0..allowed).find(|&c| t[d * width + c] < -EPS) else {
            return Some(());
        };
        let mut leave = None;
        let mut best = f64::INFINITY;
        for r in 0..d {
            let a = t[r * width + enter];
            if a > EPS {
                let ratio = t[r * width + cols] / a;
                if ratio < best - EPS
                    || (ratio < best + EPS && leave.is_some_and(|l: usize| basis[r] < basis[l]))
                {
                    best = ratio;
                    leave = Some(r);
                }
            }
        }
        // unbounded cannot happen for a gauge (objective is bounded below by 0)
        let r = leave?;
        pivot(t, width, d, r, enter);
        basis[r] = enter;
    }
    None
}

fn pivot(t: &mut [f64], width: usize, d: usize, r: usize, c: usize) {
    let p = t[r * width + c];
    for j in 0..width {
        t[r * width + j] /= p;
    }
    for i in 0..=d {
        if i == r {
            continue;
        }
        let f = t[i * width + c];
        if f != 0.0 {
            for j in 0..width {
                t[i * width + j] -= f * t[r * width + j];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_polytope_gauge_is_l1() {
        let gens = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!((gauge(&gens, &[0.3, -0.4]).unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(gauge(&gens, &[0.0, 0.0]), Some(0.0));
    }

    #[test]
    fn square_gauge_is_sup() {
        let gens = vec![vec![1.0, 1.0], vec![1.0, -1.0]];
        assert!((gauge(&gens, &[0.3, -0.8]).unwrap() - 0.8).abs() < 1e-12);
        assert!((gauge(&gens, &[2.0, 0.5]).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn outside_span() {
        let gens = vec![vec![1.0, 0.0, 0.0]];
        assert!(gauge(&gens, &[0.0, 1.0, 0.0]).is_none());
        assert!((gauge(&gens, &[-3.0, 0.0, 0.0]).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn redundant_generators() {
        let gens = vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![0.2, 0.2, 0.2],
            vec![1.0, 1.0, 1.0],
        ];
        // (1,1,1) is itself a generator
        assert!((gauge(&gens, &[1.0, 1.0, 1.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((gauge(&gens, &[1.0, 0.0, 1.0]).unwrap() - 2.0).abs() < 1e-12);
    }
}
