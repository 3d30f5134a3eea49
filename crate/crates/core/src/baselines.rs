//! Classical family-wise error rate procedures.
//!
//! All four are threshold rules on the ordered p-values, so they reject a set
//! of the smallest p-values; results are reported by original index.

use crate::error::{Error, Result};
use crate::policy::{check_p_values, sort_order};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectionSet {
    /// Indexed like the input p-values.
    pub rejected: Vec<bool>,
    pub count: usize,
}

impl RejectionSet {
    fn from_flags(rejected: Vec<bool>) -> Self {
        let count = rejected.iter().filter(|&&r| r).count();
        RejectionSet { rejected, count }
    }

    /// Rejects every p-value at or below `threshold`.
    fn below(p: &[f64], threshold: f64) -> Self {
        Self::from_flags(p.iter().map(|&x| x <= threshold).collect())
    }

    /// True when every hypothesis rejected here is rejected by `other`.
    pub fn is_subset_of(&self, other: &RejectionSet) -> bool {
        self.rejected
            .iter()
            .zip(&other.rejected)
            .all(|(&a, &b)| !a || b)
    }
}

fn validate(p: &[f64], alpha: f64) -> Result<()> {
    if p.is_empty() {
        return Err(Error::Parameter("need at least one p-value".into()));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Parameter(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    check_p_values(p)
}

/// Rejects `p_i <= alpha / K`.
pub fn bonferroni(p: &[f64], alpha: f64) -> Result<RejectionSet> {
    validate(p, alpha)?;
    Ok(RejectionSet::below(p, alpha / p.len() as f64))
}

/// Step-down: walks up the ordered p-values while `p_(k) <= alpha / (K - k + 1)`.
pub fn holm(p: &[f64], alpha: f64) -> Result<RejectionSet> {
    validate(p, alpha)?;
    let k = p.len();
    let order = sort_order(p);
    let mut flags = vec![false; k];
    for (pos, &i) in order.iter().enumerate() {
        if p[i] > alpha / (k - pos) as f64 {
            break;
        }
        flags[i] = true;
    }
    Ok(RejectionSet::from_flags(flags))
}

/// Step-up with the Holm constants: rejects the `k_hat` smallest p-values,
/// `k_hat = max { k : p_(k) <= alpha / (K - k + 1) }`.
pub fn hochberg(p: &[f64], alpha: f64) -> Result<RejectionSet> {
    validate(p, alpha)?;
    let k = p.len();
    let order = sort_order(p);
    let k_hat = (0..k)
        .rev()
        .find(|&pos| p[order[pos]] <= alpha / (k - pos) as f64)
        .map_or(0, |pos| pos + 1);
    let mut flags = vec![false; k];
    for &i in &order[..k_hat] {
        flags[i] = true;
    }
    Ok(RejectionSet::from_flags(flags))
}

/// Hommel's procedure: with
/// `j = max { i : p_(K-i+m) > m alpha / i for m = 1..i }`, rejects
/// `p <= alpha / j`, or everything when no such `i` exists.
pub fn hommel(p: &[f64], alpha: f64) -> Result<RejectionSet> {
    validate(p, alpha)?;
    let k = p.len();
    let mut sorted = p.to_vec();
    sorted.sort_by(f64::total_cmp);
    let j = (1..=k).rev().find(|&i| {
        (1..=i).all(|m| sorted[k - i + m - 1] > m as f64 * alpha / i as f64)
    });
    Ok(match j {
        None => RejectionSet::from_flags(vec![true; k]),
        Some(j) => RejectionSet::below(p, alpha / j as f64),
    })
}

/// Largest K accepted by [`hommel_closure_oracle`].
pub const CLOSURE_MAX_K: usize = 12;

/// Simes test of the intersection hypothesis over `subset` (a bitmask).
fn simes_rejects(p: &[f64], subset: u32, alpha: f64) -> bool {
    let mut values: Vec<f64> = (0..p.len())
        .filter(|&i| subset & (1 << i) != 0)
        .map(|i| p[i])
        .collect();
    values.sort_by(f64::total_cmp);
    let size = values.len() as f64;
    values
        .iter()
        .enumerate()
        .any(|(idx, &x)| x * size / (idx + 1) as f64 <= alpha)
}

/// Closed testing over all non-empty subsets with Simes local tests:
/// `H_i` is rejected iff every subset containing `i` is Simes-rejected.
/// Exponential in K; used to check [`hommel`].
pub fn hommel_closure_oracle(p: &[f64], alpha: f64) -> Result<RejectionSet> {
    validate(p, alpha)?;
    let k = p.len();
    if k > CLOSURE_MAX_K {
        return Err(Error::Parameter(format!(
            "closed testing is limited to K <= {CLOSURE_MAX_K}, got {k}"
        )));
    }
    let mut flags = vec![true; k];
    for subset in 1u32..(1 << k) {
        if simes_rejects(p, subset, alpha) {
            continue;
        }
        for (i, flag) in flags.iter_mut().enumerate() {
            if subset & (1 << i) != 0 {
                *flag = false;
            }
        }
    }
    Ok(RejectionSet::from_flags(flags))
}
