//! Common invariant subspaces, block upper triangularisation and relative
//! product boundedness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{estimate, EstimateConfig, JsrBounds};
use crate::cocycle::{scaled_product, ScaledProduct};
use crate::error::{Error, Result};
use crate::matrix::{eigenvalues, null_space, Matrix, MatrixSet, C64, ONE, ZERO};
use crate::norms::{
    barabanov_iterate, barabanov_residual, check_extremal, random_unit_vectors, BarabanovConfig,
    NormModel,
};
use crate::symbolic::{PeriodicOrbit, Word};

/// Seed of the random combination used by the subspace search.
pub const SUBSPACE_SEED: u64 = 0x1a2b3c;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantSubspace {
    /// Orthonormal basis vectors.
    pub basis: Vec<Vec<C64>>,
    /// max_i ||(I - P) A_i P|| for the orthogonal projector P onto the span.
    pub residual: f64,
}

impl InvariantSubspace {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }
}

// --- small complex vector helpers -------------------------------------------

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn vnorm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Remove components along an orthonormal family (two passes).
fn orthogonalise(v: &mut [C64], basis: &[Vec<C64>]) {
    for _ in 0..2 {
        for b in basis {
            let c = dot(b, v);
            for (x, y) in v.iter_mut().zip(b) {
                *x -= c * y;
            }
        }
    }
}

fn unit(d: usize, i: usize) -> Vec<C64> {
    (0..d).map(|j| if i == j { ONE } else { ZERO }).collect()
}

/// Canonical orthonormal basis of span(q): project e_1, e_2, ... in order,
/// keep those that extend the rank, Gram-Schmidt them and rotate each so its
/// pivot entry is real and positive. Returns the basis and the pivot indices.
fn canonical_basis(q: &[Vec<C64>], d: usize) -> (Vec<Vec<C64>>, Vec<usize>) {
    let mut out: Vec<Vec<C64>> = Vec::new();
    let mut pivots = Vec::new();
    for j in 0..d {
        if out.len() == q.len() {
            break;
        }
        // projection of e_j onto span(q)
        let mut p = vec![ZERO; d];
        for b in q {
            let c = b[j].conj();
            for (x, y) in p.iter_mut().zip(b) {
                *x += c * y;
            }
        }
        orthogonalise(&mut p, &out);
        let n = vnorm(&p);
        if n > 1e-6 {
            let ph = if p[j].norm() > 0.0 {
                p[j].conj() / p[j].norm()
            } else {
                ONE
            };
            out.push(p.iter().map(|z| z * ph / n).collect());
            pivots.push(j);
        }
    }
    (out, pivots)
}

/// Orthonormal basis of the orthogonal complement, canonically ordered.
fn complement(q: &[Vec<C64>], d: usize) -> Vec<Vec<C64>> {
    let mut all = q.to_vec();
    let mut out = Vec::new();
    for j in 0..d {
        let mut e = unit(d, j);
        orthogonalise(&mut e, &all);
        let n = vnorm(&e);
        if n > 1e-6 {
            let v: Vec<C64> = e.iter().map(|z| z / n).collect();
            let ph = if v[j].norm() > 0.0 {
                v[j].conj() / v[j].norm()
            } else {
                ONE
            };
            let v: Vec<C64> = v.iter().map(|z| z * ph).collect();
            all.push(v.clone());
            out.push(v);
        }
    }
    out
}

/// Smallest subspace containing `seeds` and invariant under `mats`, at
/// relative threshold `thr`.
fn closure(mats: &[Matrix], seeds: &[Vec<C64>], thr: f64) -> Vec<Vec<C64>> {
    let mut basis: Vec<Vec<C64>> = Vec::new();
    let mut queue: Vec<Vec<C64>> = seeds.to_vec();
    let d = seeds.first().map_or(0, Vec::len);
    while let Some(mut v) = queue.pop() {
        let n0 = vnorm(&v);
        if n0 == 0.0 {
            continue;
        }
        orthogonalise(&mut v, &basis);
        let n = vnorm(&v);
        if n <= thr * n0 {
            continue;
        }
        let u: Vec<C64> = v.iter().map(|z| z / n).collect();
        for a in mats {
            queue.push(a.apply(&u));
        }
        basis.push(u);
        if basis.len() == d {
            break;
        }
    }
    basis
}

/// max_i ||(I - QQ*) A_i Q|| with Q the orthonormal basis.
pub fn invariance_residual(set: &MatrixSet, basis: &[Vec<C64>]) -> f64 {
    if basis.is_empty() {
        return 0.0;
    }
    let q = Matrix::from_columns(basis);
    let proj = q.mul(&q.adjoint());
    let out = Matrix::identity(set.dim()).sub(&proj);
    set.matrices()
        .iter()
        .map(|a| out.mul(a).mul(&q).operator_norm())
        .fold(0.0, f64::max)
}

/// Dimension of the algebra generated by I and the A_i (the closure of I
/// under left multiplication). Fails when some accepted direction has a
/// relative residual between tol and sqrt(tol).
pub fn algebra_dimension(set: &MatrixSet, tol: f64) -> Result<usize> {
    let (dim, weakest) = algebra_span(set, tol);
    if weakest < tol.sqrt() {
        return Err(Error::NumericallyAmbiguous {
            residual: weakest,
            tol,
        });
    }
    Ok(dim)
}

// (dimension, smallest relative residual among accepted directions)
fn algebra_span(set: &MatrixSet, tol: f64) -> (usize, f64) {
    let d = set.dim();
    let full = d * d;
    let mut basis: Vec<Vec<C64>> = Vec::new();
    let mut queue = vec![Matrix::identity(d)];
    let mut weakest = f64::INFINITY;
    while let Some(x) = queue.pop() {
        let mut v = x.data().to_vec();
        let n0 = vnorm(&v);
        if n0 == 0.0 {
            continue;
        }
        orthogonalise(&mut v, &basis);
        let n = vnorm(&v);
        if n <= tol * n0 {
            continue;
        }
        weakest = weakest.min(n / n0);
        basis.push(v.iter().map(|z| z / n).collect());
        let xn = x.scale_real(1.0 / x.frobenius());
        for a in set.matrices() {
            queue.push(a.mul(&xn));
        }
        if basis.len() == full {
            break;
        }
    }
    (basis.len(), weakest)
}

/// A proper non-zero subspace invariant under every A_i, or `None` when the
/// generated algebra is all of M_d (Burnside).
pub fn find_common_invariant_subspace(
    set: &MatrixSet,
    tol: f64,
) -> Result<Option<InvariantSubspace>> {
    let d = set.dim();
    if d == 1 {
        return Ok(None);
    }
    let (alg_dim, weakest) = algebra_span(set, tol);
    if alg_dim == d * d && weakest >= tol.sqrt() {
        return Ok(None);
    }
    let scale = set
        .matrices()
        .iter()
        .map(Matrix::operator_norm)
        .fold(1.0, f64::max);
    let accept = tol * scale;
    let mats = set.matrices().to_vec();
    let adj: Vec<Matrix> = mats.iter().map(Matrix::adjoint).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(SUBSPACE_SEED);

    let mut candidates: Vec<Vec<Vec<C64>>> = Vec::new();
    for round in 0..4 {
        let coeffs: Vec<f64> = (0..mats.len()).map(|_| rng.gen_range(0.5..1.5)).collect();
        let r = combine(&mats, &coeffs);
        for v in eigenvectors(&r)? {
            let c = closure(&mats, &[v], 1e-8);
            if !c.is_empty() && c.len() < d {
                candidates.push(c);
            }
        }
        // invariant subspaces of the adjoints are orthogonal complements
        let rh = r.adjoint();
        for v in eigenvectors(&rh)? {
            let c = closure(&adj, &[v], 1e-8);
            if !c.is_empty() && c.len() < d {
                candidates.push(complement(&c, d));
            }
        }
        if round == 0 && !candidates.is_empty() {
            break;
        }
        // fall back to ranges and kernels of random algebra elements
        let x = random_word_combination(&mats, &mut rng);
        for v in eigenvectors(&x)? {
            let c = closure(&mats, &[v], 1e-8);
            if !c.is_empty() && c.len() < d {
                candidates.push(c);
            }
        }
        if !candidates.is_empty() {
            break;
        }
    }

    let mut best: Option<(usize, Vec<usize>, Vec<Vec<C64>>, f64)> = None;
    for c in candidates {
        let (basis, pivots) = canonical_basis(&c, d);
        let res = invariance_residual(set, &basis);
        if res > accept {
            continue;
        }
        let key = (basis.len(), pivots.clone());
        if best.as_ref().map_or(true, |b| key < (b.0, b.1.clone())) {
            best = Some((basis.len(), pivots, basis, res));
        }
    }
    match best {
        Some((_, _, basis, residual)) => Ok(Some(InvariantSubspace { basis, residual })),
        // a full algebra with weakly independent directions: cannot tell
        None if alg_dim == d * d => Err(Error::NumericallyAmbiguous {
            residual: weakest,
            tol,
        }),
        None => Err(Error::Inconsistent(
            "algebra is not full but no invariant subspace passed the residual test; loosen tol"
                .into(),
        )),
    }
}

/// For real sets: does a proper real subspace invariant under every A_i
/// exist? A complex invariant V gives the real invariant spaces V + conj V
/// and V ∩ conj V; the search reports reducible when either is proper.
pub fn is_real_reducible(set: &MatrixSet, tol: f64) -> Result<bool> {
    let d = set.dim();
    let Some(v) = find_common_invariant_subspace(set, tol)? else {
        return Ok(false);
    };
    let conj: Vec<Vec<C64>> = v
        .basis
        .iter()
        .map(|b| b.iter().map(|z| z.conj()).collect())
        .collect();
    let mut sum = v.basis.clone();
    sum.extend(conj.iter().cloned());
    let (span, _) = canonical_basis(&sum, d);
    if span.len() < d {
        return Ok(true);
    }
    // dim(V ∩ conj V) = 2 dim V - dim(V + conj V)
    Ok(2 * v.dim() > span.len())
}

fn combine(mats: &[Matrix], coeffs: &[f64]) -> Matrix {
    let mut r = Matrix::zeros(mats[0].rows(), mats[0].cols());
    for (a, &c) in mats.iter().zip(coeffs) {
        r = r.add(&a.scale_real(c));
    }
    r
}

fn random_word_combination(mats: &[Matrix], rng: &mut ChaCha8Rng) -> Matrix {
    let d = mats[0].rows();
    let mut total = Matrix::zeros(d, d);
    for _ in 0..4 {
        let len = rng.gen_range(1..=3);
        let mut p = Matrix::identity(d);
        for _ in 0..len {
            p = mats[rng.gen_range(0..mats.len())].mul(&p);
        }
        total = total.add(&p.scale_real(rng.gen_range(0.5..1.5)));
    }
    total
}

/// Eigenvectors of `r`, grouping nearby eigenvalues and using the group mean
/// (a better estimate than the individual members of a defective cluster).
fn eigenvectors(r: &Matrix) -> Result<Vec<Vec<C64>>> {
    let d = r.rows();
    let scale = r.operator_norm().max(f64::MIN_POSITIVE);
    let ev = eigenvalues(r)?;
    let mut groups: Vec<Vec<C64>> = Vec::new();
    for z in ev {
        match groups
            .iter_mut()
            .find(|g| (g[0] - z).norm() <= 1e-5 * scale)
        {
            Some(g) => g.push(z),
            None => groups.push(vec![z]),
        }
    }
    let mut out = Vec::new();
    for g in groups {
        let mean: C64 = g.iter().sum::<C64>() / g.len() as f64;
        let shifted = r.sub(&Matrix::identity(d).scale(mean));
        let ns = null_space(&shifted, 1e-7 * scale);
        out.extend(ns);
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Triangularisation {
    /// Unitary M with M^{-1} A_i M block upper triangular.
    pub basis_change: Matrix,
    pub block_dim: usize,
    pub upper_blocks: MatrixSet,
    pub lower_blocks: MatrixSet,
    pub corner_blocks: Vec<Matrix>,
    /// Per member: max-entry size of the lower-left block after conjugation.
    pub residuals: Vec<f64>,
    pub upper_bounds: JsrBounds,
    pub lower_bounds: JsrBounds,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriangulariseConfig {
    pub tol: f64,
    pub estimate: EstimateConfig,
}

impl Default for TriangulariseConfig {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            estimate: EstimateConfig {
                gap: 1e-6,
                max_depth: 16,
                ..EstimateConfig::default()
            },
        }
    }
}

/// Block upper triangular form adapted to an invariant subspace that is
/// enlarged greedily through the quotient action until the quotient is
/// irreducible.
pub fn triangularise(set: &MatrixSet, config: &TriangulariseConfig) -> Result<Triangularisation> {
    let d = set.dim();
    let Some(first) = find_common_invariant_subspace(set, config.tol)? else {
        return Err(Error::Domain(
            "matrix set is irreducible; no triangularisation exists".into(),
        ));
    };
    let mut u = first.basis;
    loop {
        let q2 = complement(&u, d);
        if q2.len() < 2 {
            break;
        }
        let q2m = Matrix::from_columns(&q2);
        let quotient = set.map(|a| q2m.adjoint().mul(a).mul(&q2m))?;
        match find_common_invariant_subspace(&quotient, config.tol) {
            Ok(Some(w)) => {
                let lifted: Vec<Vec<C64>> = w.basis.iter().map(|x| q2m.apply(x)).collect();
                let mut all = u.clone();
                all.extend(lifted);
                let (canon, _) = canonical_basis(&all, d);
                if canon.len() <= u.len()
                    || invariance_residual(set, &canon)
                        > config.tol * set.max_operator_norm().max(1.0)
                {
                    break;
                }
                u = canon;
            }
            _ => break,
        }
    }
    let q2 = complement(&u, d);
    let k = u.len();
    let mut cols = u.clone();
    cols.extend(q2);
    let m = Matrix::from_columns(&cols);
    let mi = m.adjoint();
    let mut up = Vec::new();
    let mut lo = Vec::new();
    let mut corners = Vec::new();
    let mut residuals = Vec::new();
    for a in set.matrices() {
        let c = mi.mul(a).mul(&m);
        up.push(c.block(0, k, 0, k));
        lo.push(c.block(k, d, k, d));
        corners.push(c.block(0, k, k, d));
        residuals.push(c.block(k, d, 0, k).max_entry_norm());
    }
    let upper_blocks = MatrixSet::new(up)?;
    let lower_blocks = MatrixSet::new(lo)?;
    let upper_bounds = estimate(&upper_blocks, &config.estimate)?;
    let lower_bounds = estimate(&lower_blocks, &config.estimate)?;
    Ok(Triangularisation {
        basis_change: m,
        block_dim: k,
        upper_blocks,
        lower_blocks,
        corner_blocks: corners,
        residuals,
        upper_bounds,
        lower_bounds,
        seed: SUBSPACE_SEED,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundedness {
    Bounded,
    Unbounded,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundednessVerdict {
    pub status: Boundedness,
    pub rho_hat: f64,
    pub depth: usize,
    pub max_scaled_norm: f64,
    pub certificate: Option<NormModel>,
    pub growth_exponent: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundednessConfig {
    pub depth: usize,
    pub tol: f64,
    /// Products kept per depth once exhaustive enumeration gets too large.
    pub beam_width: usize,
    pub gamma_threshold: f64,
    pub estimate: EstimateConfig,
    pub barabanov: BarabanovConfig,
}

impl Default for BoundednessConfig {
    fn default() -> Self {
        Self {
            depth: 64,
            tol: 1e-9,
            beam_width: 512,
            gamma_threshold: 0.5,
            estimate: EstimateConfig {
                gap: 1e-6,
                max_depth: 16,
                ..EstimateConfig::default()
            },
            barabanov: BarabanovConfig {
                max_iters: 5000,
                ..BarabanovConfig::default()
            },
        }
    }
}

/// Bounded when a candidate norm certifies nu(A_i) <= rho (1 + tol); Unbounded
/// when the normalised growth max ||L||/rho^n fits n^gamma with gamma above
/// the threshold; Unknown otherwise.
pub fn product_boundedness(
    set: &MatrixSet,
    config: &BoundednessConfig,
) -> Result<BoundednessVerdict> {
    let b = estimate(set, &config.estimate)?;
    let rho = b.lower;
    if rho == 0.0 {
        return Ok(BoundednessVerdict {
            status: Boundedness::Unknown,
            rho_hat: rho,
            depth: 0,
            max_scaled_norm: f64::NAN,
            certificate: None,
            growth_exponent: None,
        });
    }

    let d = set.dim();
    let mut cands: Vec<NormModel> = vec![NormModel::Euclidean, NormModel::MaxEntryInduced];
    if set.is_real() && (2..=4).contains(&d) {
        let cfg = BarabanovConfig {
            tol: config.barabanov.tol,
            ..config.barabanov.clone()
        };
        if let Ok(cert) = barabanov_iterate(set, &cfg, Some(&b)) {
            cands.push(cert.norm);
        }
    }
    let tests = if d == 2 {
        crate::norms::test_directions(
            2,
            &BarabanovConfig::default(),
            crate::norms::BarabanovMethod::Grid,
        )
    } else {
        random_unit_vectors(d, 512, 0xb0)
    };
    let mut first_extremal: Option<NormModel> = None;
    let mut barabanov: Option<NormModel> = None;
    for nu in cands {
        let Ok(chk) = check_extremal(&nu, set, rho, config.tol) else {
            continue;
        };
        if !chk.extremal {
            continue;
        }
        let real_ok = set.is_real() || !nu.is_polyhedral();
        if real_ok
            && barabanov.is_none()
            && set.is_real()
            && barabanov_residual(&nu, set, rho, &tests) <= 1e-6
        {
            barabanov = Some(nu.clone());
        }
        if first_extremal.is_none() {
            first_extremal = Some(nu);
        }
    }
    let growth = scaled_growth(set, rho, config.depth, config.beam_width)?;
    let max_scaled = growth.iter().cloned().fold(0.0, f64::max);
    if let Some(cert) = barabanov.or(first_extremal) {
        return Ok(BoundednessVerdict {
            status: Boundedness::Bounded,
            rho_hat: rho,
            depth: config.depth,
            max_scaled_norm: max_scaled,
            certificate: Some(cert),
            growth_exponent: None,
        });
    }
    let gamma = loglog_slope(&growth);
    let status = match gamma {
        Some(g) if g >= config.gamma_threshold => Boundedness::Unbounded,
        _ => Boundedness::Unknown,
    };
    Ok(BoundednessVerdict {
        status,
        rho_hat: rho,
        depth: config.depth,
        max_scaled_norm: max_scaled,
        certificate: None,
        growth_exponent: gamma,
    })
}

/// n -> max_{|w| = n} ||L(w)|| / rho^n, exhaustive while the level fits in
/// the beam and a beam search over the largest products beyond that.
pub fn scaled_growth(set: &MatrixSet, rho: f64, depth: usize, beam: usize) -> Result<Vec<f64>> {
    let lr = rho.ln();
    let mut level: Vec<ScaledProduct> = vec![ScaledProduct::identity(set.dim())];
    let mut out = Vec::with_capacity(depth);
    for n in 1..=depth {
        let mut next: Vec<(f64, ScaledProduct)> = Vec::with_capacity(level.len() * set.len());
        for p in &level {
            for a in set.matrices() {
                let q = p.left_mul(a);
                let l = q.log_operator_norm();
                next.push((l, q));
            }
        }
        next.sort_by(|x, y| y.0.total_cmp(&x.0));
        next.truncate(beam);
        let top = next.first().map_or(f64::NEG_INFINITY, |x| x.0);
        out.push((top - n as f64 * lr).exp());
        level = next.into_iter().map(|x| x.1).collect();
    }
    Ok(out)
}

// least-squares slope of log g against log n over the upper three quarters
fn loglog_slope(g: &[f64]) -> Option<f64> {
    let n = g.len();
    let start = (n / 4).max(1);
    let pts: Vec<(f64, f64)> = (start..=n)
        .filter(|&k| g[k - 1] > 0.0 && g[k - 1].is_finite())
        .map(|k| ((k as f64).ln(), g[k - 1].ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Integral of (1/n) log ||L(x, n)|| against a convex combination of
/// periodic-orbit measures (each orbit averaged over its rotations).
pub fn periodic_measure_growth(
    set: &MatrixSet,
    measure: &[(PeriodicOrbit, f64)],
    n: usize,
) -> Result<f64> {
    let mut total = 0.0;
    for (orbit, weight) in measure {
        let p = orbit.period();
        let mut acc = 0.0;
        for rot in orbit.word().rotations() {
            let w: Word = rot.cycle_to(n);
            acc += scaled_product(set, &w)?.log_operator_norm() / n as f64;
        }
        total += weight * acc / p as f64;
    }
    Ok(total)
}
