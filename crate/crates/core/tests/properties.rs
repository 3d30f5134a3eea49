mod common;

use approx::assert_relative_eq;
use optfwer::baselines::{bonferroni, hochberg, holm, hommel, hommel_closure_oracle};
use optfwer::estimator::fwer_hat;
use optfwer::{
    error_coeffs, esp_all, make_batch, net_benefits, optimal_l_star, AlternativeModel, DualVector,
};
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use common::{brute_force_b, integrated_g, models};

fn g_vec(max_k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..8.0_f64, 2..=max_k)
}

fn mu_pair(k: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (
        prop::collection::vec(0.0..3.0_f64, k),
        prop::collection::vec(0.0..3.0_f64, k),
    )
        .prop_map(|(mu, extra)| {
            let hi = mu.iter().zip(&extra).map(|(a, b)| a + b).collect();
            (mu, hi)
        })
}

fn g_and_mus() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    g_vec(8).prop_flat_map(|g| {
        let k = g.len();
        (Just(g), mu_pair(k)).prop_map(|(g, (lo, hi))| (g, lo, hi))
    })
}

fn p_vec(max_k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(
        prop_oneof![1e-6..0.1_f64, 1e-6..1.0_f64, Just(0.01), Just(0.5)],
        1..=max_k,
    )
}

/// Closed-form probability that an alternative p-value is at most `x`.
fn alt_cdf(model: &AlternativeModel, x: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).unwrap();
    match *model {
        AlternativeModel::TruncNormal { theta, bound } => {
            let z = n.inverse_cdf(n.cdf(-bound) + x * (n.cdf(bound) - n.cdf(-bound)));
            (n.cdf(z - theta) - n.cdf(-bound - theta)) / (n.cdf(bound - theta) - n.cdf(-bound - theta))
        }
        AlternativeModel::Mixture { theta } => {
            let z = n.inverse_cdf(1.0 - x / 2.0);
            n.cdf(theta - z) + n.cdf(-theta - z)
        }
        AlternativeModel::StudentT { df } => {
            let z = n.inverse_cdf(1.0 - x / 2.0);
            2.0 * (1.0 - StudentsT::new(0.0, 1.0, df as f64).unwrap().cdf(z))
        }
        AlternativeModel::Beta { theta } => x.powf(theta),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn coefficients_match_enumeration(g in g_vec(7)) {
        let k = g.len();
        let bundle = error_coeffs(k, &g).unwrap();
        let brute = brute_force_b(&g);
        for (l, row) in brute.iter().enumerate() {
            for (pos, &y) in row.iter().enumerate() {
                let x = bundle.b(l, pos);
                prop_assert!((x - y).abs() <= 1e-12 * y.abs().max(1e-300), "b[{l}][{pos}] {x} vs {y}");
            }
        }
        let a: f64 = common::factorial(k - 1) * g.iter().product::<f64>();
        prop_assert!((bundle.a() - a).abs() <= 1e-12 * a.abs().max(1e-300));
    }

    #[test]
    fn zero_pattern(g in prop::collection::vec(0.1..5.0_f64, 2..=10)) {
        let k = g.len();
        let bundle = error_coeffs(k, &g).unwrap();
        for l in 0..k {
            for pos in 0..k {
                // 1-based position k = pos + 1 is zero iff l < k - 1
                prop_assert_eq!(bundle.b(l, pos) == 0.0, l < pos);
                prop_assert!(bundle.b(l, pos) >= 0.0);
            }
        }
    }

    #[test]
    fn penalty_is_monotone((g, lo, hi) in g_and_mus()) {
        let k = g.len();
        let bundle = error_coeffs(k, &g).unwrap();
        let r_lo = net_benefits(&bundle, &DualVector::new(lo).unwrap()).unwrap();
        let r_hi = net_benefits(&bundle, &DualVector::new(hi).unwrap()).unwrap();
        for (a, b) in r_hi.iter().zip(&r_lo) {
            prop_assert!(a <= b);
        }
    }

    #[test]
    fn esp_nonnegative_and_monotone(x in prop::collection::vec(0.0..4.0_f64, 0..10), bump in 0.0..2.0_f64, idx in 0usize..10) {
        let e = esp_all(&x);
        prop_assert_eq!(e.len(), x.len() + 1);
        prop_assert_eq!(e[0], 1.0);
        prop_assert!(e.iter().all(|&v| v >= 0.0));
        if !x.is_empty() {
            let mut y = x.clone();
            y[idx % x.len()] += bump;
            let f = esp_all(&y);
            for (a, b) in e.iter().zip(&f) {
                prop_assert!(*b >= *a * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn baseline_dominance_chain(p in p_vec(12), alpha in 0.001..0.5_f64) {
        let b = bonferroni(&p, alpha).unwrap();
        let h = holm(&p, alpha).unwrap();
        let hc = hochberg(&p, alpha).unwrap();
        let hm = hommel(&p, alpha).unwrap();
        prop_assert!(b.is_subset_of(&h));
        prop_assert!(h.is_subset_of(&hc));
        prop_assert!(hc.is_subset_of(&hm));
    }

    #[test]
    fn hommel_is_closed_simes(p in p_vec(6), alpha in 0.001..0.5_f64) {
        prop_assert_eq!(hommel(&p, alpha).unwrap(), hommel_closure_oracle(&p, alpha).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn l_star_monotone_in_mu((g, lo, hi) in g_and_mus()) {
        let k = g.len();
        let bundle = error_coeffs(k, &g).unwrap();
        let l_lo = optimal_l_star(&net_benefits(&bundle, &DualVector::new(lo).unwrap()).unwrap());
        let l_hi = optimal_l_star(&net_benefits(&bundle, &DualVector::new(hi).unwrap()).unwrap());
        prop_assert!(l_hi <= l_lo);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn fwer_hat_monotone_along_paths(
        model_idx in 0usize..4,
        k in 2usize..=6,
        gamma_frac in 0.0..1.0_f64,
        seed in any::<u64>(),
        steps in prop::collection::vec(prop::collection::vec(0.0..0.5_f64, 6), 1..15),
    ) {
        let model = models()[model_idx];
        let gamma = ((gamma_frac * k as f64) as usize).min(k - 1);
        let batch = make_batch(&model, k, gamma, 1_000, seed).unwrap();
        let mut mu = vec![0.0; k];
        let mut prev = fwer_hat(&batch, &DualVector::new(mu.clone()).unwrap()).unwrap();
        prop_assert_eq!(prev, 1.0);
        for step in steps {
            for (m, s) in mu.iter_mut().zip(step) {
                *m += s;
            }
            let cur = fwer_hat(&batch, &DualVector::new(mu.clone()).unwrap()).unwrap();
            prop_assert!(cur <= prev);
            prev = cur;
        }
    }
}

#[test]
fn densities_integrate_to_alternative_cdf() {
    for model in models() {
        for x in [1e-4, 1e-2, 0.05, 0.3, 0.7, 1.0] {
            // the t model keeps visible mass below any practical cut-off
            let lo = 1e-12;
            let numeric = integrated_g(&model, lo, x);
            let exact = alt_cdf(&model, x) - alt_cdf(&model, lo);
            assert!((numeric - exact).abs() < 2e-3, "{model} at {x}: {numeric} vs {exact}");
        }
        assert_relative_eq!(alt_cdf(&model, 1.0), 1.0, epsilon = 1e-12);
    }
}

#[test]
fn samplers_follow_alternative_cdf() {
    let n = 50_000;
    for model in models() {
        let mut p: Vec<f64> = (0..n)
            .map(|i| model.sample_p((i as f64 + 0.5) / n as f64).unwrap())
            .collect();
        p.sort_by(f64::total_cmp);
        let sup = p
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let g = alt_cdf(&model, x);
                (g - i as f64 / n as f64).abs().max((g - (i + 1) as f64 / n as f64).abs())
            })
            .fold(0.0, f64::max);
        assert!(sup <= 0.01, "{model}: sup distance {sup}");
    }
}

#[test]
fn likelihood_ratio_shapes() {
    // trunc, mixture and beta are non-increasing in u
    let grid: Vec<f64> = (1..=400).map(|i| i as f64 / 400.0).collect();
    for s in ["trunc:-2.0", "trunc:-1.0", "mixture:2.0", "mixture:0.5", "beta:0.3", "beta:0.8"] {
        let model: AlternativeModel = s.parse().unwrap();
        let g: Vec<f64> = grid.iter().map(|&u| model.g_eval(u).unwrap()).collect();
        assert!(g.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)), "{s}");
    }
    // the t ratio dips below its value at u = 1 and rises again: not monotone
    let t: AlternativeModel = "t:4".parse().unwrap();
    let g: Vec<f64> = grid.iter().map(|&u| t.g_eval(u).unwrap()).collect();
    assert!(g.windows(2).any(|w| w[1] > w[0]));
    assert!(g[0] > g[399]);
}

#[test]
fn baselines_control_global_null() {
    let model: AlternativeModel = "beta:0.5".parse().unwrap();
    let batch = make_batch(&model, 6, 0, 50_000, 99).unwrap();
    type Procedure = fn(&[f64], f64) -> optfwer::Result<optfwer::baselines::RejectionSet>;
    let procedures: [(&str, Procedure); 4] = [
        ("bonferroni", bonferroni),
        ("holm", holm),
        ("hochberg", hochberg),
        ("hommel", hommel),
    ];
    let se = (0.05_f64 * 0.95 / 50_000.0).sqrt();
    for (name, f) in procedures {
        let hits = (0..batch.len())
            .filter(|&i| f(batch.p_raw(i), 0.05).unwrap().count > 0)
            .count();
        let rate = hits as f64 / 50_000.0;
        assert!(rate <= 0.05 + 3.0 * se, "{name}: {rate}");
    }
}
