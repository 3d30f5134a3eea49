//! Fits the optimal policy for six hypotheses and applies it to one vector
//! of p-values next to Hommel's procedure.

use optfwer::baselines::hommel;
use optfwer::{decide, fit, AlternativeModel, OptimizerConfig};

fn main() -> optfwer::Result<()> {
    let model: AlternativeModel = "beta:0.5".parse()?;
    let cfg = OptimizerConfig { alpha: 0.05, seed: 1, ..Default::default() };
    let fitted = fit(&model, 6, &cfg)?;
    println!(
        "multipliers {:?} ({} iterations, converged: {})",
        fitted.mu_hat.as_slice(),
        fitted.iterations,
        fitted.converged
    );

    let p = [0.068, 0.090, 0.071, 0.024, 0.006, 0.004];
    let decision = decide(&model, &fitted.mu_hat, &p)?;
    let baseline = hommel(&p, cfg.alpha)?;
    for (i, x) in p.iter().enumerate() {
        println!("p = {x:<6} optimal: {:<5} hommel: {}", decision.rejected[i], baseline.rejected[i]);
    }
    Ok(())
}
