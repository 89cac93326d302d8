//! The cocycle L(w) = A_{w_n} ... A_{w_1}: every new symbol multiplies on the
//! left. Products are kept as (matrix, power-of-two exponent) so long words
//! neither overflow nor underflow.

use std::f64::consts::LN_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{Matrix, MatrixSet};
use crate::symbolic::Word;

const BAND_LO: f64 = 1.0 / 4294967296.0; // 2^-32
const BAND_HI: f64 = 4294967296.0; // 2^32

/// A product together with its factored-out scale: true value = product * 2^exp2.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledProduct {
    product: Matrix,
    exp2: i64,
}

impl ScaledProduct {
    pub fn identity(d: usize) -> Self {
        Self {
            product: Matrix::identity(d),
            exp2: 0,
        }
    }

    pub fn from_matrix(m: &Matrix) -> Self {
        let mut s = Self {
            product: m.clone(),
            exp2: 0,
        };
        s.renormalise();
        s
    }

    pub fn product(&self) -> &Matrix {
        &self.product
    }

    pub fn exp2(&self) -> i64 {
        self.exp2
    }

    pub fn log_scale(&self) -> f64 {
        self.exp2 as f64 * LN_2
    }

    pub fn is_zero(&self) -> bool {
        self.product.is_zero()
    }

    /// A * self
    pub fn left_mul(&self, a: &Matrix) -> Self {
        let mut s = Self {
            product: a.mul(&self.product),
            exp2: self.exp2,
        };
        s.renormalise();
        s
    }

    /// self * B
    pub fn right_mul(&self, other: &ScaledProduct) -> Self {
        let mut s = Self {
            product: self.product.mul(&other.product),
            exp2: self.exp2 + other.exp2,
        };
        s.renormalise();
        s
    }

    /// natural log of `f(true product)` for a positively homogeneous `f`;
    /// -inf for a zero product.
    pub fn log_with(&self, f: impl Fn(&Matrix) -> f64) -> f64 {
        let v = f(&self.product);
        if v == 0.0 {
            f64::NEG_INFINITY
        } else {
            v.ln() + self.log_scale()
        }
    }

    pub fn log_operator_norm(&self) -> f64 {
        self.log_with(Matrix::operator_norm)
    }

    pub fn log_spectral_radius(&self) -> Result<f64> {
        let r = self.product.spectral_radius()?;
        Ok(if r == 0.0 {
            f64::NEG_INFINITY
        } else {
            r.ln() + self.log_scale()
        })
    }

    /// Materialise the true product, which may overflow for long words.
    pub fn unscaled(&self) -> Matrix {
        self.product.scale_real(2f64.powi(self.exp2 as i32))
    }

    fn renormalise(&mut self) {
        let m = self.product.max_entry_norm();
        if m == 0.0 {
            // exact zero stays zero forever; reset the bookkeeping
            self.product = Matrix::zeros(self.product.rows(), self.product.cols());
            self.exp2 = 0;
            return;
        }
        if (BAND_LO..=BAND_HI).contains(&m) {
            return;
        }
        let k = m.log2().round() as i32;
        self.product = self.product.scale_real(2f64.powi(-k));
        self.exp2 += k as i64;
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CocycleValue {
    pub product: Matrix,
    pub log_scale: f64,
    pub word: Word,
}

pub fn scaled_product(set: &MatrixSet, w: &Word) -> Result<ScaledProduct> {
    check_word(set, w)?;
    let mut acc = ScaledProduct::identity(set.dim());
    for &s in w.symbols() {
        acc = acc.left_mul(set.get(s as usize)?);
    }
    Ok(acc)
}

pub fn evaluate(set: &MatrixSet, w: &Word) -> Result<CocycleValue> {
    let p = scaled_product(set, w)?;
    Ok(CocycleValue {
        log_scale: p.log_scale(),
        product: p.product,
        word: w.clone(),
    })
}

/// Evaluate many words in parallel; output order follows input order.
pub fn evaluate_batch(set: &MatrixSet, words: &[Word]) -> Result<Vec<CocycleValue>> {
    words.par_iter().map(|w| evaluate(set, w)).collect()
}

/// L(w) = L(sigma^n w, m) L(w, n) with m = |w| - n, compared at 1e-9 relative.
pub fn cocycle_check(set: &MatrixSet, w: &Word, n: usize) -> Result<bool> {
    if n > w.len() {
        return Err(Error::Domain(format!(
            "split {n} exceeds word length {}",
            w.len()
        )));
    }
    let whole = scaled_product(set, w)?;
    let head = scaled_product(set, &w.prefix(n))?;
    let tail = scaled_product(set, &w.skip(n))?;
    let rhs = tail.right_mul(&head);
    Ok(scaled_close(&whole, &rhs, 1e-9))
}

fn scaled_close(a: &ScaledProduct, b: &ScaledProduct, rel: f64) -> bool {
    if a.is_zero() || b.is_zero() {
        return a.is_zero() && b.is_zero();
    }
    // bring b onto a's exponent
    let shift = b.exp2 - a.exp2;
    if shift.abs() > 1000 {
        return false;
    }
    let bb = b.product.scale_real(2f64.powi(shift as i32));
    let scale = a.product.max_entry_norm().max(bb.max_entry_norm());
    a.product.max_abs_diff(&bb) <= rel * scale
}

fn check_word(set: &MatrixSet, w: &Word) -> Result<()> {
    if let Some(&s) = w.symbols().iter().find(|&&s| s as usize > set.len()) {
        return Err(Error::IndexOutOfRange {
            symbol: s as usize,
            alphabet: set.len(),
        });
    }
    Ok(())
}
