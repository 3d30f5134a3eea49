//! Alternative p-value densities.
//!
//! Each [`AlternativeModel`] describes how a p-value is distributed when the
//! alternative holds. The density `g(u)` doubles as the likelihood ratio
//! against the uniform null, and [`AlternativeModel::sample_p`] maps a single
//! uniform draw to an alternative p-value so that callers control the random
//! stream (common random numbers).

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, StudentsT};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};

/// Smallest p-value fed to a density; unbounded densities overflow below it.
pub const MIN_P: f64 = 1e-300;

/// Truncation bound used when a trunc-normal model string omits one.
pub const DEFAULT_TRUNC_BOUND: f64 = 4.0;

/// Standard normal CDF.
pub(crate) fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal quantile.
pub(crate) fn norm_quantile(p: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * p)
}

fn norm_ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - 0.5 * (2.0 * PI).ln()
}

/// The alternative distribution of a single p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum AlternativeModel {
    /// One-sided test of `N(0,1)` against `N(theta,1)`, both truncated to
    /// `[-bound, bound]`; p-values are `F_0(X)`.
    TruncNormal { theta: f64, bound: f64 },
    /// Two-sided test against `0.5 N(theta,1) + 0.5 N(-theta,1)`.
    Mixture { theta: f64 },
    /// Two-sided test against a standard Student-t with `df` degrees of freedom.
    StudentT { df: u32 },
    /// p-values distributed as `Beta(theta, 1)`.
    Beta { theta: f64 },
}

impl AlternativeModel {
    pub fn trunc_normal(theta: f64, bound: f64) -> Result<Self> {
        let m = AlternativeModel::TruncNormal { theta, bound };
        m.validate()?;
        Ok(m)
    }

    pub fn mixture(theta: f64) -> Result<Self> {
        let m = AlternativeModel::Mixture { theta };
        m.validate()?;
        Ok(m)
    }

    pub fn student_t(df: u32) -> Result<Self> {
        let m = AlternativeModel::StudentT { df };
        m.validate()?;
        Ok(m)
    }

    pub fn beta(theta: f64) -> Result<Self> {
        let m = AlternativeModel::Beta { theta };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            AlternativeModel::TruncNormal { theta, bound } => {
                if !(bound.is_finite() && bound > 0.0) {
                    return Err(Error::Parameter(format!(
                        "trunc-normal bound must be positive, got {bound}"
                    )));
                }
                if !(theta.is_finite() && (-bound..=0.0).contains(&theta)) {
                    return Err(Error::Parameter(format!(
                        "trunc-normal theta must lie in [-{bound}, 0], got {theta}"
                    )));
                }
            }
            AlternativeModel::Mixture { theta } => {
                if !theta.is_finite() {
                    return Err(Error::Parameter(format!(
                        "mixture theta must be finite, got {theta}"
                    )));
                }
            }
            AlternativeModel::StudentT { df } => {
                if df < 1 {
                    return Err(Error::Parameter("student-t df must be >= 1".into()));
                }
            }
            AlternativeModel::Beta { theta } => {
                if !(theta > 0.0 && theta <= 1.0) {
                    return Err(Error::Parameter(format!(
                        "beta theta must lie in (0, 1], got {theta}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Short family tag used in model strings and CSV output.
    pub fn family(&self) -> &'static str {
        match self {
            AlternativeModel::TruncNormal { .. } => "trunc",
            AlternativeModel::Mixture { .. } => "mixture",
            AlternativeModel::StudentT { .. } => "t",
            AlternativeModel::Beta { .. } => "beta",
        }
    }

    /// The signal parameter (theta, or df for the Student-t family).
    pub fn param(&self) -> f64 {
        match *self {
            AlternativeModel::TruncNormal { theta, .. } => theta,
            AlternativeModel::Mixture { theta } => theta,
            AlternativeModel::StudentT { df } => df as f64,
            AlternativeModel::Beta { theta } => theta,
        }
    }

    /// Density of the p-value under the alternative, i.e. the likelihood
    /// ratio `g(u)` against the uniform null.
    pub fn g_eval(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u <= 1.0) {
            return Err(Error::Domain(format!("p-value must lie in (0, 1], got {u}")));
        }
        self.validate()?;
        Ok(self.g_unchecked(u))
    }

    /// [`g_eval`](Self::g_eval) without validation, for hot loops over
    /// p-values already known to be in range.
    pub(crate) fn g_unchecked(&self, u: f64) -> f64 {
        let u = u.max(MIN_P);
        match *self {
            AlternativeModel::TruncNormal { theta, bound } => {
                let t = TruncConsts::new(theta, bound);
                let z = t.null_quantile(u);
                (theta * z - 0.5 * theta * theta).exp() * t.null_mass / t.alt_mass
            }
            AlternativeModel::Mixture { theta } => {
                let z = two_sided_stat(u);
                let a = theta.abs() * z;
                // e^{-theta^2/2} cosh(a), written to avoid overflowing cosh
                0.5 * (a - 0.5 * theta * theta).exp() * (1.0 + (-2.0 * a).exp())
            }
            AlternativeModel::StudentT { df } => {
                let z = two_sided_stat(u);
                let t = StudentsT::new(0.0, 1.0, df as f64).expect("validated df");
                (t.ln_pdf(z) - norm_ln_pdf(z)).exp()
            }
            AlternativeModel::Beta { theta } => theta * u.powf(theta - 1.0),
        }
    }

    /// Inverse-transform sampler: maps a uniform draw `v` in (0, 1) to a
    /// p-value distributed under the alternative. Deterministic in `v`.
    pub fn sample_p(&self, v: f64) -> Result<f64> {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::Domain(format!("uniform draw must lie in (0, 1), got {v}")));
        }
        self.validate()?;
        Ok(self.sample_unchecked(v))
    }

    pub(crate) fn sample_unchecked(&self, v: f64) -> f64 {
        let p = match *self {
            AlternativeModel::TruncNormal { theta, bound } => {
                let t = TruncConsts::new(theta, bound);
                let x = theta + norm_quantile(t.alt_lower + v * t.alt_mass);
                let x = x.clamp(-bound, bound);
                (norm_cdf(x) - t.null_lower) / t.null_mass
            }
            AlternativeModel::Mixture { theta } => {
                let x = mixture_lower_quantile(theta.abs(), v.min(1.0 - v));
                2.0 * norm_cdf(x)
            }
            AlternativeModel::StudentT { df } => {
                let t = StudentsT::new(0.0, 1.0, df as f64).expect("validated df");
                let x = t.inverse_cdf(v.min(1.0 - v));
                2.0 * norm_cdf(x.min(0.0))
            }
            AlternativeModel::Beta { theta } => v.powf(1.0 / theta),
        };
        p.clamp(MIN_P, 1.0)
    }
}

/// `|z|` such that a two-sided p-value of `u` equals `2 Phi(-|z|)`.
fn two_sided_stat(u: f64) -> f64 {
    -norm_quantile(0.5 * u)
}

struct TruncConsts {
    null_lower: f64,
    null_mass: f64,
    alt_lower: f64,
    alt_mass: f64,
    bound: f64,
}

impl TruncConsts {
    fn new(theta: f64, bound: f64) -> Self {
        let null_lower = norm_cdf(-bound);
        let null_mass = norm_cdf(bound) - null_lower;
        let alt_lower = norm_cdf(-bound - theta);
        let alt_mass = norm_cdf(bound - theta) - alt_lower;
        TruncConsts {
            null_lower,
            null_mass,
            alt_lower,
            alt_mass,
            bound,
        }
    }

    /// Quantile of the truncated null; uses its symmetry to stay in the
    /// accurate lower tail of `Phi^{-1}`.
    fn null_quantile(&self, u: f64) -> f64 {
        let z = if u <= 0.5 {
            norm_quantile(self.null_lower + u * self.null_mass)
        } else {
            -norm_quantile(self.null_lower + (1.0 - u) * self.null_mass)
        };
        z.clamp(-self.bound, self.bound)
    }
}

/// Solves `0.5 Phi(x - a) + 0.5 Phi(x + a) = w` for `x <= 0`, where `w <= 0.5`
/// and `a >= 0`. Newton steps safeguarded by the bracket
/// `[Phi^{-1}(w) - a, Phi^{-1}(w) + a]`.
fn mixture_lower_quantile(a: f64, w: f64) -> f64 {
    let cdf = |x: f64| 0.5 * (norm_cdf(x - a) + norm_cdf(x + a));
    let pdf = |x: f64| 0.5 * (norm_ln_pdf(x - a).exp() + norm_ln_pdf(x + a).exp());
    let base = norm_quantile(w);
    let mut lo = base - a;
    let mut hi = (base + a).min(0.0);
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = cdf(x) - w;
        if f == 0.0 {
            return x;
        }
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let d = pdf(x);
        let newton = x - f / d;
        let next = if d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - x).abs();
        x = next;
        if step <= 1e-15 * (1.0 + x.abs()) || hi - lo <= 1e-14 * (1.0 + x.abs()) {
            break;
        }
    }
    x
}

impl fmt::Display for AlternativeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            AlternativeModel::TruncNormal { theta, bound } => {
                if bound == DEFAULT_TRUNC_BOUND {
                    write!(f, "trunc:{theta:?}")
                } else {
                    write!(f, "trunc:{theta:?}:{bound:?}")
                }
            }
            AlternativeModel::Mixture { theta } => write!(f, "mixture:{theta:?}"),
            AlternativeModel::StudentT { df } => write!(f, "t:{df}"),
            AlternativeModel::Beta { theta } => write!(f, "beta:{theta:?}"),
        }
    }
}

impl FromStr for AlternativeModel {
    type Err = Error;

    /// Parses `trunc:-2.0[:T]`, `mixture:2.0`, `t:4` or `beta:0.5`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Format(format!("unrecognised model string '{s}'"));
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |x: &str| x.trim().parse::<f64>().map_err(|_| bad());
        match parts.as_slice() {
            ["trunc", theta] => AlternativeModel::trunc_normal(num(theta)?, DEFAULT_TRUNC_BOUND),
            ["trunc", theta, bound] => AlternativeModel::trunc_normal(num(theta)?, num(bound)?),
            ["mixture", theta] => AlternativeModel::mixture(num(theta)?),
            ["t", df] => AlternativeModel::student_t(df.trim().parse().map_err(|_| bad())?),
            ["beta", theta] => AlternativeModel::beta(num(theta)?),
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for AlternativeModel {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<AlternativeModel> for String {
    fn from(m: AlternativeModel) -> String {
        m.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn beta_closed_form() {
        let m = AlternativeModel::beta(0.25).unwrap();
        assert_relative_eq!(m.g_eval(0.0625).unwrap(), 2.0, max_relative = 1e-12);
        let null = AlternativeModel::beta(1.0).unwrap();
        for u in [1e-9, 0.3, 1.0] {
            assert_eq!(null.g_eval(u).unwrap(), 1.0);
        }
    }

    #[test]
    fn mixture_at_one() {
        let m = AlternativeModel::mixture(2.0).unwrap();
        assert_relative_eq!(m.g_eval(1.0).unwrap(), (-2.0f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn student_t_at_one() {
        // f_t(0; 2) / phi(0) = sqrt(pi) / 2
        let m = AlternativeModel::student_t(2).unwrap();
        assert_relative_eq!(m.g_eval(1.0).unwrap(), 0.886_226_925_452_758, max_relative = 1e-9);
    }

    #[test]
    fn sampler_examples() {
        let b = AlternativeModel::beta(0.5).unwrap();
        assert_relative_eq!(b.sample_p(0.5).unwrap(), 0.25, max_relative = 1e-15);
        let null = AlternativeModel::beta(1.0).unwrap();
        assert_eq!(null.sample_p(0.7).unwrap(), 0.7);
        // the mixture median draw is X = 0, so p = 1
        let m = AlternativeModel::mixture(2.0).unwrap();
        assert_relative_eq!(m.sample_p(0.5).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn domain_errors() {
        let m = AlternativeModel::beta(0.5).unwrap();
        assert!(matches!(m.g_eval(0.0), Err(Error::Domain(_))));
        assert!(matches!(m.g_eval(1.5), Err(Error::Domain(_))));
        assert!(matches!(m.sample_p(0.0), Err(Error::Domain(_))));
        assert!(matches!(m.sample_p(1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn parameter_errors() {
        assert!(AlternativeModel::beta(0.0).is_err());
        assert!(AlternativeModel::beta(1.2).is_err());
        assert!(AlternativeModel::student_t(0).is_err());
        assert!(AlternativeModel::trunc_normal(0.5, 4.0).is_err());
        assert!(AlternativeModel::trunc_normal(-5.0, 4.0).is_err());
        assert!(AlternativeModel::trunc_normal(-1.0, 0.0).is_err());
        assert!(AlternativeModel::mixture(f64::NAN).is_err());
    }

    #[test]
    fn model_strings_round_trip() {
        for s in ["trunc:-2.0", "trunc:-2.0:5.0", "mixture:2.0", "t:4", "beta:0.5"] {
            let m: AlternativeModel = s.parse().unwrap();
            assert_eq!(m.to_string(), s);
        }
        let m: AlternativeModel = "trunc:-2".parse().unwrap();
        assert_eq!(m, AlternativeModel::TruncNormal { theta: -2.0, bound: 4.0 });
        for bad in ["", "gamma:1", "beta", "beta:x", "t:2.5", "trunc:1:2:3"] {
            assert!(bad.parse::<AlternativeModel>().is_err(), "{bad}");
        }
    }

    #[test]
    fn unbounded_densities_stay_finite() {
        let models = [
            AlternativeModel::beta(0.2).unwrap(),
            AlternativeModel::mixture(4.0).unwrap(),
            AlternativeModel::student_t(1).unwrap(),
            AlternativeModel::student_t(2).unwrap(),
        ];
        for m in models {
            for u in [1e-12, 1e-100, 1e-300, 1e-320] {
                let g = m.g_eval(u).unwrap();
                assert!(g.is_finite() && g > 0.0, "{m} at {u}: {g}");
            }
        }
    }

    #[test]
    fn trunc_normal_is_bounded_and_positive() {
        let m = AlternativeModel::trunc_normal(-2.0, 4.0).unwrap();
        let hi = m.g_eval(1e-300).unwrap();
        let lo = m.g_eval(1.0).unwrap();
        assert!(hi.is_finite() && lo > 0.0 && hi > lo);
        // at the bounds z = -T and z = T
        let t = TruncConsts::new(-2.0, 4.0);
        assert_relative_eq!(hi, (8.0f64 - 2.0).exp() * t.null_mass / t.alt_mass, max_relative = 1e-9);
        assert_relative_eq!(lo, (-8.0f64 - 2.0).exp() * t.null_mass / t.alt_mass, max_relative = 1e-9);
    }

    #[test]
    fn mixture_quantile_inverts_cdf() {
        for a in [0.0, 0.5, 1.3, 2.0, 4.0] {
            for w in (1..=50).map(|i| i as f64 / 100.0).chain([1e-15, 1e-6]) {
                let x = mixture_lower_quantile(a, w);
                let back = 0.5 * (norm_cdf(x - a) + norm_cdf(x + a));
                assert_relative_eq!(back, w, max_relative = 1e-9);
            }
        }
    }
}
