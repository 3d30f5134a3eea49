//! Most powerful family-wise error rate control for `K` exchangeable
//! hypotheses.
//!
//! The optimal policy rejects the `l*` smallest p-values, where `l*`
//! maximises the cumulative net benefit `sum_{i<=l} R_i` with
//! `R_i = a - sum_l mu_l b[l][i]`. The coefficients come in closed form from
//! elementary symmetric polynomials of the likelihood ratios
//! ([`coefficients`]), and the multipliers `mu` are fitted by coordinate
//! descent with a bisection inner solver on fixed Monte-Carlo batches
//! ([`optimizer`]).

pub mod baselines;
pub mod coefficients;
pub mod densities;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod optimizer;
pub mod policy;
pub mod rng;

pub use coefficients::{error_coeffs, esp_all, net_benefits, power_coeff, CoefficientBundle};
pub use densities::AlternativeModel;
pub use error::{Error, Result};
pub use estimator::{
    avg_power_hat, fwer_hat, fwer_integral_oracle, make_batch, power_hat, Estimate,
    LabeledSampleBatch,
};
pub use optimizer::{fit, FitResult, OptimizerConfig};
pub use policy::{decide, optimal_l_star, Decision, DualVector, PolicyResult};
