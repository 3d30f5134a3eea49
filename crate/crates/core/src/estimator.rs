//! Monte-Carlo estimates of error rates and power on fixed sample batches.
//!
//! A [`LabeledSampleBatch`] is drawn once under one configuration (a fixed
//! number of alternatives) and keeps the coefficient table of every sample,
//! so re-evaluating the policy at new multipliers costs `O(K^2)` per sample
//! and involves no fresh randomness. For a fixed batch the estimated error
//! rate is therefore exactly non-increasing in every multiplier.

use rayon::prelude::*;

use crate::coefficients::{
    error_coeffs, factorial, fill_coefficients, net_benefits, net_benefits_into, MAX_K,
};
use crate::densities::AlternativeModel;
use crate::error::{Error, Result};
use crate::policy::{optimal_l_star, DualVector};
use crate::rng::{open_uniform, sample_stream};

/// A point estimate with its Monte-Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    /// A proportion `successes / n` with s.e. `sqrt(p (1 - p) / n)`.
    pub fn proportion(successes: usize, n: usize) -> Self {
        let p = successes as f64 / n as f64;
        Estimate {
            value: p,
            se: proportion_se(p, n),
        }
    }
}

pub fn proportion_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).max(0.0).sqrt()
}

/// `N` sorted p-value vectors drawn under the configuration with `gamma`
/// alternatives, with null flags and cached coefficients.
#[derive(Debug, Clone)]
pub struct LabeledSampleBatch {
    model: AlternativeModel,
    k: usize,
    gamma: usize,
    n: usize,
    seed: u64,
    /// Sorted p-values, `n * k`.
    p_sorted: Vec<f64>,
    /// p-values in draw order (alternatives first), `n * k`.
    p_raw: Vec<f64>,
    /// Null flag per sorted position, `n * k`.
    is_null: Vec<bool>,
    /// Likelihood ratios per sorted position, `n * k`.
    g: Vec<f64>,
    /// Power weight per sample.
    a: Vec<f64>,
    /// Error weights per sample, `n * k * k`, row-major per sample.
    b: Vec<f64>,
    /// First sorted position holding a null (`k` if none).
    first_null: Vec<u8>,
}

/// Builds a batch. Sample `i` consumes exactly `K` uniforms from stream
/// `(seed, i)`: the first `gamma` become alternative p-values through the
/// model's inverse CDF, the rest are null p-values as drawn.
pub fn make_batch(
    model: &AlternativeModel,
    k: usize,
    gamma: usize,
    n: usize,
    seed: u64,
) -> Result<LabeledSampleBatch> {
    model.validate()?;
    if !(2..=MAX_K).contains(&k) {
        return Err(Error::Parameter(format!("K must lie in 2..={MAX_K}, got {k}")));
    }
    if gamma > k {
        return Err(Error::Parameter(format!("gamma = {gamma} exceeds K = {k}")));
    }
    if n == 0 {
        return Err(Error::Parameter("batch size must be positive".into()));
    }

    let factorials: Vec<f64> = (0..=k).map(factorial).collect();
    let mut p_sorted = vec![0.0; n * k];
    let mut p_raw = vec![0.0; n * k];
    let mut is_null = vec![false; n * k];
    let mut g = vec![0.0; n * k];
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n * k * k];
    let mut first_null = vec![0u8; n];

    p_sorted
        .par_chunks_mut(k)
        .zip(p_raw.par_chunks_mut(k))
        .zip(is_null.par_chunks_mut(k))
        .zip(g.par_chunks_mut(k))
        .zip(a.par_iter_mut())
        .zip(b.par_chunks_mut(k * k))
        .zip(first_null.par_iter_mut())
        .enumerate()
        .for_each(|(i, ((((((ps, raw), nulls), gs), a_i), b_i), first))| {
            let mut rng = sample_stream(seed, i as u64);
            for (j, slot) in raw.iter_mut().enumerate() {
                let v = open_uniform(&mut rng);
                *slot = if j < gamma { model.sample_unchecked(v) } else { v };
            }
            let mut order = [0usize; MAX_K];
            for (j, o) in order[..k].iter_mut().enumerate() {
                *o = j;
            }
            order[..k].sort_by(|&x, &y| raw[x].total_cmp(&raw[y]));
            for (pos, &j) in order[..k].iter().enumerate() {
                ps[pos] = raw[j];
                nulls[pos] = j >= gamma;
                gs[pos] = model.g_unchecked(raw[j]);
            }
            *first = nulls.iter().position(|&x| x).unwrap_or(k) as u8;
            *a_i = fill_coefficients(gs, &factorials, b_i);
        });

    Ok(LabeledSampleBatch {
        model: *model,
        k,
        gamma,
        n,
        seed,
        p_sorted,
        p_raw,
        is_null,
        g,
        a,
        b,
        first_null,
    })
}

impl LabeledSampleBatch {
    pub fn model(&self) -> &AlternativeModel {
        &self.model
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn gamma(&self) -> usize {
        self.gamma
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Sorted p-values of sample `i`.
    pub fn p_sorted(&self, i: usize) -> &[f64] {
        &self.p_sorted[i * self.k..(i + 1) * self.k]
    }

    /// p-values of sample `i` in draw order: alternatives first.
    pub fn p_raw(&self, i: usize) -> &[f64] {
        &self.p_raw[i * self.k..(i + 1) * self.k]
    }

    /// Null flags of sample `i` by sorted position.
    pub fn is_null(&self, i: usize) -> &[bool] {
        &self.is_null[i * self.k..(i + 1) * self.k]
    }

    pub fn g_values(&self, i: usize) -> &[f64] {
        &self.g[i * self.k..(i + 1) * self.k]
    }

    pub fn power_weight(&self, i: usize) -> f64 {
        self.a[i]
    }

    /// Error weights of sample `i`, row-major `K x K`.
    pub fn error_weights(&self, i: usize) -> &[f64] {
        let kk = self.k * self.k;
        &self.b[i * kk..(i + 1) * kk]
    }

    /// First sorted position of sample `i` that holds a null, or `K`.
    pub fn first_null(&self, i: usize) -> usize {
        self.first_null[i] as usize
    }

    fn check_mu(&self, mu: &DualVector) -> Result<()> {
        if mu.len() != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                actual: mu.len(),
            });
        }
        Ok(())
    }

    /// `l*` of every sample at multipliers `mu`.
    pub fn l_stars(&self, mu: &DualVector) -> Result<Vec<u8>> {
        self.check_mu(mu)?;
        let k = self.k;
        let kk = k * k;
        let mu = mu.as_slice();
        Ok(self
            .a
            .par_iter()
            .zip(self.b.par_chunks(kk))
            .map(|(&a, b)| {
                let mut r = [0.0; MAX_K];
                net_benefits_into(k, a, b, mu, &mut r[..k]);
                optimal_l_star(&r[..k]) as u8
            })
            .collect())
    }

    /// Error-rate estimate given precomputed `l*` values.
    pub fn fwer_from_l_stars(&self, l_stars: &[u8]) -> Estimate {
        let hits = l_stars
            .par_iter()
            .zip(self.first_null.par_iter())
            .filter(|(&l, &f)| f < l)
            .count();
        Estimate::proportion(hits, self.n)
    }

    /// Average power `(1/l) E[#alternatives rejected]` given precomputed `l*`.
    pub fn avg_power_from_l_stars(&self, l_stars: &[u8]) -> Result<f64> {
        if self.gamma == 0 {
            return Err(Error::Parameter(
                "average power needs at least one alternative".into(),
            ));
        }
        let k = self.k;
        let hits: usize = l_stars
            .par_iter()
            .zip(self.is_null.par_chunks(k))
            .map(|(&l, nulls)| nulls[..l as usize].iter().filter(|&&n| !n).count())
            .sum();
        Ok(hits as f64 / (self.n * self.gamma) as f64)
    }
}

/// Fraction of samples in which the policy at `mu` rejects at least one null.
pub fn fwer_hat(batch: &LabeledSampleBatch, mu: &DualVector) -> Result<f64> {
    Ok(fwer_estimate(batch, mu)?.value)
}

/// [`fwer_hat`] with its standard error.
pub fn fwer_estimate(batch: &LabeledSampleBatch, mu: &DualVector) -> Result<Estimate> {
    let l = batch.l_stars(mu)?;
    Ok(batch.fwer_from_l_stars(&l))
}

/// Average power and any-rejection power on an all-alternatives batch.
pub fn power_hat(batch: &LabeledSampleBatch, mu: &DualVector) -> Result<(f64, f64)> {
    if batch.gamma != batch.k {
        return Err(Error::Parameter(format!(
            "power needs an all-alternatives batch, got gamma = {} with K = {}",
            batch.gamma, batch.k
        )));
    }
    let l = batch.l_stars(mu)?;
    let total: usize = l.iter().map(|&x| x as usize).sum();
    let any = l.iter().filter(|&&x| x > 0).count();
    Ok((
        total as f64 / (batch.n * batch.k) as f64,
        any as f64 / batch.n as f64,
    ))
}

/// Average power `Pi_l` on a batch with `l = gamma >= 1` alternatives.
pub fn avg_power_hat(batch: &LabeledSampleBatch, mu: &DualVector) -> Result<f64> {
    let l = batch.l_stars(mu)?;
    batch.avg_power_from_l_stars(&l)
}

/// Independent estimate of the error rate from its integral representation:
/// draws sorted uniforms and averages `sum_k b[gamma][k] D_k / K!`.
///
/// The `1/K!` turns the integral over the ordered simplex into an expectation
/// under sorted uniforms, whose density there is `K!`.
pub fn fwer_integral_oracle(
    model: &AlternativeModel,
    k: usize,
    gamma: usize,
    mu: &DualVector,
    n: usize,
    seed: u64,
) -> Result<Estimate> {
    model.validate()?;
    if gamma >= k {
        return Err(Error::Parameter(format!(
            "error rate needs at least one null: gamma = {gamma}, K = {k}"
        )));
    }
    if n < 2 {
        return Err(Error::Parameter("oracle needs at least two samples".into()));
    }
    if mu.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            actual: mu.len(),
        });
    }
    let k_fact = factorial(k);
    let values: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let mut rng = sample_stream(seed, i as u64);
            let mut u: Vec<f64> = (0..k).map(|_| open_uniform(&mut rng)).collect();
            u.sort_by(f64::total_cmp);
            let g: Vec<f64> = u.iter().map(|&x| model.g_unchecked(x)).collect();
            let bundle = error_coeffs(k, &g)?;
            let r = net_benefits(&bundle, mu)?;
            let l_star = optimal_l_star(&r);
            Ok(bundle.row(gamma)[..l_star].iter().sum::<f64>() / k_fact)
        })
        .collect::<Result<_>>()?;
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    Ok(Estimate {
        value: mean,
        se: (var / n as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trunc() -> AlternativeModel {
        AlternativeModel::trunc_normal(-2.0, 4.0).unwrap()
    }

    #[test]
    fn batch_layout() {
        let b = make_batch(&trunc(), 4, 2, 500, 11).unwrap();
        for i in 0..b.len() {
            let p = b.p_sorted(i);
            assert!(p.windows(2).all(|w| w[0] <= w[1]));
            assert_eq!(b.is_null(i).iter().filter(|&&x| x).count(), 2);
            let mut raw = b.p_raw(i).to_vec();
            raw.sort_by(f64::total_cmp);
            assert_eq!(raw, p);
            assert_eq!(b.first_null(i), b.is_null(i).iter().position(|&x| x).unwrap());
        }
    }

    #[test]
    fn extreme_configurations() {
        let null = make_batch(&trunc(), 3, 0, 200, 1).unwrap();
        assert!((0..200).all(|i| null.is_null(i).iter().all(|&x| x) && null.first_null(i) == 0));
        let alt = make_batch(&trunc(), 3, 3, 200, 1).unwrap();
        assert!((0..200).all(|i| alt.is_null(i).iter().all(|&x| !x) && alt.first_null(i) == 3));
    }

    #[test]
    fn deterministic_in_seed() {
        let x = make_batch(&trunc(), 3, 1, 300, 5).unwrap();
        let y = make_batch(&trunc(), 3, 1, 300, 5).unwrap();
        assert_eq!(x.p_sorted, y.p_sorted);
        assert_eq!(x.b, y.b);
        let z = make_batch(&trunc(), 3, 1, 300, 6).unwrap();
        assert_ne!(x.p_sorted, z.p_sorted);
    }

    #[test]
    fn zero_and_huge_multipliers() {
        let m = trunc();
        for gamma in 0..3 {
            let b = make_batch(&m, 3, gamma, 1000, 3).unwrap();
            assert_eq!(fwer_hat(&b, &DualVector::zeros(3)).unwrap(), 1.0);
        }
        let null = make_batch(&m, 3, 0, 1000, 3).unwrap();
        let big = DualVector::new(vec![1e6, 0.0, 0.0]).unwrap();
        assert_eq!(fwer_hat(&null, &big).unwrap(), 0.0);

        let alt = make_batch(&m, 3, 3, 1000, 3).unwrap();
        assert_eq!(power_hat(&alt, &DualVector::zeros(3)).unwrap(), (1.0, 1.0));
        let huge = DualVector::new(vec![1e12; 3]).unwrap();
        assert_eq!(power_hat(&alt, &huge).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn avg_power_cases() {
        let m = trunc();
        let alt = make_batch(&m, 4, 4, 2000, 9).unwrap();
        let mu = DualVector::new(vec![0.3, 0.1, 0.0, 0.05]).unwrap();
        assert_eq!(avg_power_hat(&alt, &mu).unwrap(), power_hat(&alt, &mu).unwrap().0);

        let one = make_batch(&m, 2, 1, 2000, 9).unwrap();
        assert_eq!(avg_power_hat(&one, &DualVector::zeros(2)).unwrap(), 1.0);
        let huge = DualVector::new(vec![1e12, 1e12]).unwrap();
        assert_eq!(avg_power_hat(&one, &huge).unwrap(), 0.0);

        let none = make_batch(&m, 2, 0, 10, 9).unwrap();
        assert!(avg_power_hat(&none, &DualVector::zeros(2)).is_err());
    }

    #[test]
    fn errors() {
        let m = trunc();
        assert!(make_batch(&m, 3, 4, 10, 0).is_err());
        assert!(make_batch(&m, 3, 1, 0, 0).is_err());
        assert!(make_batch(&m, 1, 0, 10, 0).is_err());
        let b = make_batch(&m, 3, 1, 10, 0).unwrap();
        assert!(matches!(
            fwer_hat(&b, &DualVector::zeros(2)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(power_hat(&b, &DualVector::zeros(3)).is_err());
    }

    #[test]
    fn oracle_normalisation() {
        let est = fwer_integral_oracle(&trunc(), 3, 0, &DualVector::zeros(3), 1000, 4).unwrap();
        // b[0][1] = K! on every sample, so each term is exactly 1
        assert!((est.value - 1.0).abs() < 1e-12);
        let huge = DualVector::new(vec![1e9; 3]).unwrap();
        let est = fwer_integral_oracle(&trunc(), 3, 1, &huge, 1000, 4).unwrap();
        assert_eq!(est.value, 0.0);
    }

    #[test]
    fn standard_error() {
        let e = Estimate::proportion(50, 1000);
        assert!((e.se - (0.05f64 * 0.95 / 1000.0).sqrt()).abs() < 1e-15);
    }
}
