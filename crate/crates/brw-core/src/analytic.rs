//! Closed-form and quadrature oracles for the limit laws.
//!
//! These evaluate the limiting Laplace functionals directly from the
//! model's pgf and tail parameters, with no sampling, and are the
//! reference the Monte Carlo estimators are validated against. The
//! conditional progeny expectations reduce to pgf iterates:
//! `E(1 - exp(-Z_i t)) = 1 - pgf_i(exp(-t))`, so no pmf tabulation is
//! needed.

use crate::gw::OffspringLaw;
use crate::heavy_tails::TailIndexSpec;
use crate::point_measure::TestFunction;
use crate::stats;

const QUAD_TOL: f64 = 1e-11;

/// Exponent of the limiting Laplace functional for independent
/// displacements, conditional on `W = 1`:
///
/// `S(f) = sum_i mu^-i int (1 - pgf_i(exp(-f(x)))) nu_alpha(dx)`.
///
/// The test function depends on `|x|` only, so the two tail components
/// contribute `(p + q) = 1` times the one-sided integral, which splits
/// into a ramp part (adaptive quadrature) and a saturated closed-form
/// tail.
pub fn iid_limit_exponent(law: &OffspringLaw, tail: &TailIndexSpec, f: &TestFunction) -> f64 {
    let alpha = tail.alpha;
    let mu = law.mean();
    let sat = f.a + f.w;
    let mut total = 0.0;
    let mut weight = 1.0;
    for i in 0..10_000u32 {
        // term_i <= mu^-i * nu(|x| > a)
        if weight * f.a.powf(-alpha) < 1e-14 {
            break;
        }
        let integrand =
            |x: f64| (1.0 - law.pgf_iterate((-f.eval(x)).exp(), i)) * alpha * x.powf(-alpha - 1.0);
        // The integrand turns on over a layer of width ~ mu^-i at the ramp
        // foot, which can defeat a single adaptive pass; dyadic splits keep
        // every piece well scaled. The innermost stub contributes at most
        // mu^i * theta * 2^-120 * O(1).
        let mut ramp = 0.0;
        let mut hi = sat;
        for _ in 0..60 {
            let lo = f.a + 0.5 * (hi - f.a);
            ramp += stats::integrate(integrand, lo, hi, QUAD_TOL / 64.0);
            hi = lo;
        }
        let tail_part = (1.0 - law.pgf_iterate((-f.theta).exp(), i)) * sat.powf(-alpha);
        total += weight * (ramp + tail_part);
        weight /= mu;
    }
    total
}

/// Limiting Laplace functional for independent displacements,
/// `E exp(-W S(f))` averaged over the supplied `W` draws (pass `&[1.0]`
/// for the frozen-scale process). Returns the value and the Monte Carlo
/// standard error contributed by the `W` ensemble.
pub fn iid_limit_laplace(
    law: &OffspringLaw,
    tail: &TailIndexSpec,
    f: &TestFunction,
    w_draws: &[f64],
) -> (f64, f64) {
    let s = iid_limit_exponent(law, tail, f);
    let values: Vec<f64> = w_draws.iter().map(|&w| (-w * s).exp()).collect();
    stats::mean_se(&values)
}

/// Rightmost-particle limit CDF `E exp(-kappa W x^-alpha)` averaged over
/// the supplied `W` draws; returns value and `W`-ensemble standard error.
pub fn maxima_cdf(kappa: f64, alpha: f64, x: f64, w_draws: &[f64]) -> (f64, f64) {
    let rate = kappa * x.powf(-alpha);
    let values: Vec<f64> = w_draws.iter().map(|&w| (-rate * w).exp()).collect();
    stats::mean_se(&values)
}

/// Exponent of the limiting Laplace functional of a superposition of
/// scaled cluster templates `sum_j delta_{a_j X}`:
///
/// `S(f) = int (1 - exp(-sum_j f(a_j x))) nu_alpha(dx)`.
///
/// Quadrature is split at the ramp kinks `a / a_j` and `(a + w) / a_j`;
/// beyond the last kink the integrand saturates and the tail is closed
/// form.
pub fn superposition_limit_exponent(
    coeffs: &[f64],
    tail: &TailIndexSpec,
    f: &TestFunction,
) -> f64 {
    assert!(!coeffs.is_empty());
    let alpha = tail.alpha;
    let mut kinks: Vec<f64> = coeffs
        .iter()
        .flat_map(|&c| [f.a / c, (f.a + f.w) / c])
        .collect();
    kinks.sort_by(f64::total_cmp);
    let integrand = |x: f64| {
        let s: f64 = coeffs.iter().map(|&c| f.eval(c * x)).sum();
        (1.0 - (-s).exp()) * alpha * x.powf(-alpha - 1.0)
    };
    let mut total = 0.0;
    for pair in kinks.windows(2) {
        total += stats::integrate(integrand, pair[0], pair[1], QUAD_TOL);
    }
    let hi = *kinks.last().expect("nonempty");
    total += (1.0 - (-f.theta * coeffs.len() as f64).exp()) * hi.powf(-alpha);
    total
}

/// Expected exceedance count of the superposition limit:
/// `E N(x, inf) = p x^-alpha sum_j a_j^alpha`.
pub fn superposition_mean_exceedances(coeffs: &[f64], tail: &TailIndexSpec, x: f64) -> f64 {
    let sum: f64 = coeffs.iter().map(|&c| c.powf(tail.alpha)).sum();
    tail.p * x.powf(-tail.alpha) * sum
}
