//! Power and error-rate coefficients of the Lagrangian.
//!
//! For sorted p-values `u_1 <= ... <= u_K` with likelihood ratios
//! `g_j = g(u_j)`, the power weight is `a = (K-1)! * prod_j g_j` for every
//! position, and the error weight of position `k` under the configuration
//! with `l` alternatives is
//!
//! ```text
//! b[l][k] = l! (K-l)! * (g_1 ... g_{k-1}) * e_{l-k+1}(g_{k+1}, ..., g_K)
//! ```
//!
//! where `e_m` is the `m`-th elementary symmetric polynomial. `b[l][k]` is
//! zero when `l < k - 1`. Every coefficient is non-negative, which is what
//! makes the dual decision rule monotone in the multipliers.

use crate::error::{Error, Result};
use crate::policy::DualVector;

/// Largest K handled with direct (non-log) factorial arithmetic.
pub const MAX_K: usize = 20;

/// `n!` for `n <= MAX_K`, exact in f64.
pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

/// Elementary symmetric polynomials `(e_0, ..., e_n)` of `values`.
pub fn esp_all(values: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; values.len() + 1];
    e[0] = 1.0;
    for (n, &x) in values.iter().enumerate() {
        for m in (1..=n + 1).rev() {
            e[m] += x * e[m - 1];
        }
    }
    e
}

fn check_inputs(k: usize, g_values: &[f64]) -> Result<()> {
    if k > MAX_K {
        return Err(Error::Overflow { k, max: MAX_K });
    }
    if k < 2 {
        return Err(Error::Parameter(format!("K must be at least 2, got {k}")));
    }
    if g_values.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            actual: g_values.len(),
        });
    }
    if let Some(g) = g_values.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
        return Err(Error::Domain(format!(
            "likelihood ratios must be finite and non-negative, got {g}"
        )));
    }
    Ok(())
}

/// Power weight `(K-1)! * prod_j g_j`, shared by every sorted position.
pub fn power_coeff(k: usize, g_values: &[f64]) -> Result<f64> {
    check_inputs(k, g_values)?;
    Ok(factorial(k - 1) * g_values.iter().product::<f64>())
}

/// Power weight and `K x K` error-weight table for one p-value vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientBundle {
    k: usize,
    a: f64,
    /// Row-major, `b[l * k + pos]` with `pos = k - 1` the 0-based sorted position.
    b: Vec<f64>,
}

impl CoefficientBundle {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// Error weight of 0-based sorted position `pos` under the configuration
    /// with `l` alternatives.
    pub fn b(&self, l: usize, pos: usize) -> f64 {
        self.b[l * self.k + pos]
    }

    /// Row `l` of the error-weight table, indexed by 0-based position.
    pub fn row(&self, l: usize) -> &[f64] {
        &self.b[l * self.k..(l + 1) * self.k]
    }
}

/// Builds the coefficient bundle for likelihood ratios given in sorted
/// p-value order.
pub fn error_coeffs(k: usize, g_values: &[f64]) -> Result<CoefficientBundle> {
    check_inputs(k, g_values)?;
    let factorials: Vec<f64> = (0..=k).map(factorial).collect();
    let mut b = vec![0.0; k * k];
    let a = fill_coefficients(g_values, &factorials, &mut b);
    Ok(CoefficientBundle { k, a, b })
}

/// Writes the error-weight table for `g` into `b` (length `K*K`, row-major)
/// and returns the power weight. `factorials` must hold `0!..=K!`.
///
/// Runs in `O(K^2)`: the suffix polynomials are grown one element at a time
/// from the right while the prefix product is accumulated from the left.
pub(crate) fn fill_coefficients(g: &[f64], factorials: &[f64], b: &mut [f64]) -> f64 {
    let k = g.len();
    debug_assert_eq!(b.len(), k * k);
    b.fill(0.0);

    // suffix[pos] holds e_0..e_{K-1-pos} of g[pos+1..]
    let mut suffix = [0.0; MAX_K * MAX_K];
    let mut esp = [0.0; MAX_K + 1];
    esp[0] = 1.0;
    for (len, pos) in (0..k).rev().enumerate() {
        suffix[pos * k..pos * k + len + 1].copy_from_slice(&esp[..len + 1]);
        let x = g[pos];
        for m in (1..=len + 1).rev() {
            esp[m] += x * esp[m - 1];
        }
    }

    let mut prefix = 1.0;
    for pos in 0..k {
        let tail = &suffix[pos * k..(pos + 1) * k];
        for l in pos..k {
            let weight = factorials[l] * factorials[k - l];
            b[l * k + pos] = weight * prefix * tail[l - pos];
        }
        prefix *= g[pos];
    }
    factorials[k - 1] * prefix
}

/// Net benefit `R_i = a - sum_l mu_l b[l][i]` of rejecting each sorted position.
pub fn net_benefits(bundle: &CoefficientBundle, mu: &DualVector) -> Result<Vec<f64>> {
    if mu.len() != bundle.k {
        return Err(Error::DimensionMismatch {
            expected: bundle.k,
            actual: mu.len(),
        });
    }
    let mut r = vec![0.0; bundle.k];
    net_benefits_into(bundle.k, bundle.a, &bundle.b, mu.as_slice(), &mut r);
    Ok(r)
}

pub(crate) fn net_benefits_into(k: usize, a: f64, b: &[f64], mu: &[f64], out: &mut [f64]) {
    out.fill(a);
    for (l, &m) in mu.iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        for (r, &coef) in out.iter_mut().zip(&b[l * k..(l + 1) * k]) {
            *r -= m * coef;
        }
    }
}
