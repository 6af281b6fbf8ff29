//! Small statistical toolbox shared by the validation harness: moment
//! summaries, z-scores, adaptive quadrature, Kolmogorov-Smirnov and
//! two-sample chi-square tests.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Sample mean and standard error.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    crate::point_measure::mean_and_se(values)
}

/// Two-sided z statistic for `empirical - oracle` with independent errors.
pub fn z_score(empirical: f64, emp_se: f64, oracle: f64, oracle_se: f64) -> f64 {
    let se = emp_se.hypot(oracle_se);
    if se == 0.0 {
        if empirical == oracle {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (empirical - oracle) / se
    }
}

/// Adaptive Simpson quadrature on [a, b].
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1)
                + recurse(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let (fa, fb) = (f(a), f(b));
    let (whole, m, fm) = simpson(&f, a, fa, b, fb);
    recurse(&f, a, fa, b, fb, whole, m, fm, tol, 48)
}

/// Survival function of the Kolmogorov distribution,
/// `Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut total = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64 * lambda).powi(2)).exp();
        total += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * total).clamp(0.0, 1.0)
}

/// One-sample KS distance of `samples` against `cdf`, plus the asymptotic
/// p-value (Stephens' small-sample correction).
pub fn ks_test<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> (f64, f64) {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in samples.iter().enumerate() {
        let c = cdf(x);
        let hi = (i as f64 + 1.0) / n - c;
        let lo = c - i as f64 / n;
        d = d.max(hi).max(lo);
    }
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    (d, kolmogorov_sf(lambda))
}

/// Upper tail of the chi-square distribution.
pub fn chi2_sf(stat: f64, dof: f64) -> f64 {
    if dof <= 0.0 {
        return 1.0;
    }
    1.0 - ChiSquared::new(dof).expect("positive dof").cdf(stat)
}

#[derive(Debug, Clone, Copy)]
pub struct ChiSquareOutcome {
    pub statistic: f64,
    pub dof: f64,
    pub p_value: f64,
}

/// Two-sample chi-square test that two collections of nonnegative counts
/// come from the same distribution. Count values become categories, pooled
/// from below so every pooled category holds at least `min_pool` combined
/// observations. Returns `None` when the data are too degenerate to test
/// (fewer than two pooled categories), which the callers treat as "no
/// evidence of difference".
pub fn two_sample_count_test(a: &[u64], b: &[u64], min_pool: u64) -> Option<ChiSquareOutcome> {
    let max_val = a.iter().chain(b).max().copied()?;
    let size = (max_val as usize).min(10_000) + 1;
    let mut hist_a = vec![0u64; size + 1];
    let mut hist_b = vec![0u64; size + 1];
    for &v in a {
        hist_a[(v as usize).min(size)] += 1;
    }
    for &v in b {
        hist_b[(v as usize).min(size)] += 1;
    }
    // pool adjacent count values until each category is populated enough
    let mut cats: Vec<(u64, u64)> = Vec::new();
    let mut acc = (0u64, 0u64);
    for i in 0..=size {
        acc.0 += hist_a[i];
        acc.1 += hist_b[i];
        if acc.0 + acc.1 >= min_pool {
            cats.push(acc);
            acc = (0, 0);
        }
    }
    if acc.0 + acc.1 > 0 {
        if let Some(last) = cats.last_mut() {
            last.0 += acc.0;
            last.1 += acc.1;
        } else {
            cats.push(acc);
        }
    }
    if cats.len() < 2 {
        return None;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ka, kb) = ((nb / na).sqrt(), (na / nb).sqrt());
    let mut stat = 0.0;
    for &(ca, cb) in &cats {
        let (ca, cb) = (ca as f64, cb as f64);
        stat += (ka * ca - kb * cb).powi(2) / (ca + cb);
    }
    let dof = (cats.len() - 1) as f64;
    Some(ChiSquareOutcome {
        statistic: stat,
        dof,
        p_value: chi2_sf(stat, dof),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quadrature_closed_forms() {
        let v = integrate(|x| x * x, 0.0, 1.0, 1e-12);
        assert!((v - 1.0 / 3.0).abs() < 1e-10);
        let v = integrate(|x| x.powf(-2.0), 1.0, 100.0, 1e-12);
        assert!((v - 0.99).abs() < 1e-9);
    }

    #[test]
    fn kolmogorov_tail_values() {
        // Q(0.828...) ~ 0.5 reference point of the Kolmogorov distribution
        assert!((kolmogorov_sf(0.8276) - 0.5).abs() < 1e-3);
        assert!(kolmogorov_sf(2.0) < 7e-4);
    }

    #[test]
    fn ks_accepts_true_cdf_rejects_wrong_one() {
        let mut r = ChaCha8Rng::seed_from_u64(2);
        let mut xs: Vec<f64> = (0..5_000).map(|_| r.random::<f64>()).collect();
        let (_, p) = ks_test(&mut xs.clone(), |x| x.clamp(0.0, 1.0));
        assert!(p > 0.001, "p = {p}");
        let (_, p_bad) = ks_test(&mut xs, |x| x.clamp(0.0, 1.0).powi(2));
        assert!(p_bad < 1e-10);
    }

    #[test]
    fn chi_square_two_sample_behaviour() {
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let pois = rand_distr::Poisson::new(2.0).unwrap();
        let draw = |r: &mut ChaCha8Rng| rand_distr::Distribution::sample(&pois, r) as u64;
        let a: Vec<u64> = (0..4000).map(|_| draw(&mut r)).collect();
        let b: Vec<u64> = (0..4000).map(|_| draw(&mut r)).collect();
        let same = two_sample_count_test(&a, &b, 10).unwrap();
        assert!(same.p_value > 0.001, "p = {}", same.p_value);

        let shifted: Vec<u64> = b.iter().map(|&v| v + 1).collect();
        let diff = two_sample_count_test(&a, &shifted, 10).unwrap();
        assert!(diff.p_value < 1e-6);

        // degenerate data: nothing to test
        assert!(two_sample_count_test(&[0, 0, 0], &[0, 0, 0], 10).is_none());
    }
}
