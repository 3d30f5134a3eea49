#![allow(dead_code)]

use optfwer::AlternativeModel;

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// `b[l][pos]` by enumerating every labelling of the sorted positions with
/// exactly `l` alternatives in which `pos` is the first null; each labelling
/// contributes the product of `g` over its alternatives.
pub fn brute_force_b(g: &[f64]) -> Vec<Vec<f64>> {
    let k = g.len();
    let mut b = vec![vec![0.0; k]; k];
    for mask in 0u32..(1 << k) {
        let l = mask.count_ones() as usize;
        if l == k {
            continue;
        }
        let first_null = (0..k).find(|&j| mask & (1 << j) == 0).unwrap();
        let weight: f64 = (0..k).filter(|&j| mask & (1 << j) != 0).map(|j| g[j]).product();
        b[l][first_null] += weight;
    }
    for (l, row) in b.iter_mut().enumerate() {
        let c = factorial(l) * factorial(k - l);
        for x in row.iter_mut() {
            *x *= c;
        }
    }
    b
}

/// Trapezoidal integral of `g` over `[lo, x]` on a geometric grid.
pub fn integrated_g(model: &AlternativeModel, lo: f64, x: f64) -> f64 {
    let n = 20_000;
    let mut total = 0.0;
    // geometric grid copes with the integrable singularity at zero
    let mut prev = lo;
    let mut prev_g = model.g_eval(prev).unwrap();
    for i in 1..=n {
        let t = lo * (x / lo).powf(i as f64 / n as f64);
        let gt = model.g_eval(t).unwrap();
        total += 0.5 * (gt + prev_g) * (t - prev);
        prev = t;
        prev_g = gt;
    }
    total
}

pub fn models() -> Vec<AlternativeModel> {
    ["trunc:-2.0", "mixture:2.0", "t:4", "beta:0.5"]
        .iter()
        .map(|s| s.parse().unwrap())
        .collect()
}
