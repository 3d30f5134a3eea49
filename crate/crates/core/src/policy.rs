//! The dual decision rule: reject the `l*` smallest p-values, where `l*`
//! maximises the cumulative net benefit.

use serde::{Deserialize, Serialize};

use crate::coefficients::{error_coeffs, net_benefits};
use crate::densities::AlternativeModel;
use crate::error::{Error, Result};

/// Lagrange multipliers `(mu_0, ..., mu_{K-1})`, one per error-rate
/// constraint, indexed by the number of alternatives in the configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DualVector(Vec<f64>);

impl DualVector {
    pub fn new(mu: Vec<f64>) -> Result<Self> {
        if let Some(m) = mu.iter().find(|m| !(m.is_finite() && **m >= 0.0)) {
            return Err(Error::Parameter(format!(
                "multipliers must be finite and non-negative, got {m}"
            )));
        }
        Ok(DualVector(mu))
    }

    pub fn zeros(k: usize) -> Self {
        DualVector(vec![0.0; k])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, gamma: usize) -> f64 {
        self.0[gamma]
    }

    /// Sets one coordinate. Negative or non-finite values are rejected.
    pub fn set(&mut self, gamma: usize, value: f64) -> Result<()> {
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::Parameter(format!(
                "multipliers must be finite and non-negative, got {value}"
            )));
        }
        self.0[gamma] = value;
        Ok(())
    }

    /// Euclidean distance to another vector of the same length.
    pub fn distance(&self, other: &DualVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl TryFrom<Vec<f64>> for DualVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        DualVector::new(v)
    }
}

impl From<DualVector> for Vec<f64> {
    fn from(d: DualVector) -> Vec<f64> {
        d.0
    }
}

/// Number of leading sorted positions rejected, with the matching decisions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyResult {
    pub l_star: usize,
    /// `decisions[pos]` is true iff `pos < l_star` (0-based sorted position).
    pub decisions: Vec<bool>,
}

impl PolicyResult {
    pub fn from_l_star(k: usize, l_star: usize) -> Self {
        PolicyResult {
            l_star,
            decisions: (0..k).map(|pos| pos < l_star).collect(),
        }
    }
}

/// The largest `l` in `0..=K` maximising `S_l = R_1 + ... + R_l` (`S_0 = 0`).
///
/// Taking the largest maximiser is what keeps `l*` monotone in the
/// multipliers.
pub fn optimal_l_star(r: &[f64]) -> usize {
    let mut best = 0.0;
    let mut best_l = 0;
    let mut sum = 0.0;
    for (i, &ri) in r.iter().enumerate() {
        sum += ri;
        if sum >= best {
            best = sum;
            best_l = i + 1;
        }
    }
    best_l
}

/// The optimal policy applied to one observed p-value vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub policy: PolicyResult,
    /// `order[pos]` is the input index of the `pos`-th smallest p-value.
    pub order: Vec<usize>,
    /// Rejection flags indexed like the input p-values.
    pub rejected: Vec<bool>,
}

/// Stable ascending order of `p`; equal values keep their input order.
pub(crate) fn sort_order(p: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&i, &j| p[i].total_cmp(&p[j]));
    order
}

pub(crate) fn check_p_values(p: &[f64]) -> Result<()> {
    if let Some(x) = p.iter().find(|x| !(**x > 0.0 && **x <= 1.0)) {
        return Err(Error::Domain(format!("p-values must lie in (0, 1], got {x}")));
    }
    Ok(())
}

/// Applies the decision rule with multipliers `mu` to raw p-values.
pub fn decide(model: &AlternativeModel, mu: &DualVector, p_values: &[f64]) -> Result<Decision> {
    let k = p_values.len();
    if k < 2 {
        return Err(Error::Parameter(format!("need at least 2 p-values, got {k}")));
    }
    if mu.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            actual: mu.len(),
        });
    }
    check_p_values(p_values)?;
    model.validate()?;

    let order = sort_order(p_values);
    let g: Vec<f64> = order.iter().map(|&i| model.g_unchecked(p_values[i])).collect();
    let bundle = error_coeffs(k, &g)?;
    let r = net_benefits(&bundle, mu)?;
    let policy = PolicyResult::from_l_star(k, optimal_l_star(&r));

    let mut rejected = vec![false; k];
    for (pos, &idx) in order.iter().enumerate() {
        rejected[idx] = policy.decisions[pos];
    }
    Ok(Decision {
        policy,
        order,
        rejected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l_star_examples() {
        assert_eq!(optimal_l_star(&[2.0, 2.0, 2.0]), 3);
        assert_eq!(optimal_l_star(&[-4.0, 2.0, 2.0]), 3);
        assert_eq!(optimal_l_star(&[-5.5, 0.0, 2.0]), 0);
        assert_eq!(optimal_l_star(&[]), 0);
        assert_eq!(optimal_l_star(&[0.0, 0.0]), 2);
        assert_eq!(optimal_l_star(&[1.0, -1.0, 1.0]), 3);
        assert_eq!(optimal_l_star(&[1.0, -2.0]), 1);
    }

    #[test]
    fn decide_with_zero_multipliers_rejects_all() {
        let model = AlternativeModel::beta(0.5).unwrap();
        let p = [0.9, 0.2, 0.5, 0.01];
        let d = decide(&model, &DualVector::zeros(4), &p).unwrap();
        assert_eq!(d.policy.l_star, 4);
        assert!(d.rejected.iter().all(|&r| r));
    }

    #[test]
    fn decide_maps_back_to_input_order() {
        let model = AlternativeModel::beta(0.5).unwrap();
        let p = [0.9, 0.2, 0.5, 0.01];
        // large mu_0 with a small power weight keeps only some leading positions
        let d = decide(&model, &DualVector::new(vec![0.0, 0.0, 0.0, 0.5]).unwrap(), &p).unwrap();
        assert_eq!(d.order, vec![3, 1, 2, 0]);
        for (pos, &idx) in d.order.iter().enumerate() {
            assert_eq!(d.rejected[idx], pos < d.policy.l_star);
        }
    }

    #[test]
    fn ties_break_by_index() {
        assert_eq!(sort_order(&[0.5, 0.1, 0.5, 0.1]), vec![1, 3, 0, 2]);
    }

    #[test]
    fn decide_errors() {
        let model = AlternativeModel::beta(0.5).unwrap();
        assert!(decide(&model, &DualVector::zeros(1), &[0.1]).is_err());
        assert!(decide(&model, &DualVector::zeros(3), &[0.1, 0.2]).is_err());
        assert!(matches!(
            decide(&model, &DualVector::zeros(2), &[0.0, 0.2]),
            Err(Error::Domain(_))
        ));
        assert!(DualVector::new(vec![1.0, -0.1]).is_err());
    }
}
