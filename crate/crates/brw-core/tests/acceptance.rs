//! Acceptance suite: one test per validation criterion, each printing a
//! PASS/FAIL line (visible with `cargo test -- --nocapture`).
//!
//! Criteria 1-3 compare the finite-population simulation at n = 10
//! against the n -> infinity limit laws at Monte Carlo resolution 1e4.
//! For alpha = 1 the finite-n convergence error at n = 10 is ~2% of the
//! compared functionals, several standard errors at that resolution, so
//! those comparisons fail honestly; the companion tests run the identical
//! statistical checks at n = 14, where the convergence error has dropped
//! below noise and everything passes. The companion tests are the
//! evidence that the simulator and the limit theory agree and that the
//! n = 10 discrepancies are finite-size effects, not defects.

use brw_core::analytic;
use brw_core::brw::{self, BrwModel, SimOptions};
use brw_core::gw::OffspringLaw;
use brw_core::harness::{
    self, ExperimentConfig, ExperimentKind, ModelConfig, Report,
};
use brw_core::heavy_tails::{AngularMeasure, DisplacementModel, TailIndexSpec};
use brw_core::limit::{sample_n_star, SscdpppSpec, WScale};
use brw_core::point_measure::TestFunction;
use brw_core::rng::parallel_map;
use brw_core::stats;

const REPS: u64 = 10_000;

fn det2() -> OffspringLaw {
    OffspringLaw::deterministic(2).unwrap()
}

fn geo23() -> OffspringLaw {
    OffspringLaw::geometric(2.0 / 3.0).unwrap()
}

fn iid_alpha1() -> DisplacementModel {
    DisplacementModel::iid(1.0, 1.0).unwrap()
}

fn polar_diag() -> DisplacementModel {
    DisplacementModel::polar(2, 1.0, 1.0, AngularMeasure::diagonal(2)).unwrap()
}

fn config(
    experiment: ExperimentKind,
    offspring: OffspringLaw,
    displacement: DisplacementModel,
    seed: u64,
) -> ExperimentConfig {
    let mut cfg: ExperimentConfig = serde_json::from_value(serde_json::json!({
        "experiment": "validate_maxima",
        "model": {
            "offspring": {"kind": "deterministic", "k": 2},
            "displacement": {"kind": "iid", "alpha": 1.0, "p": 1.0}
        },
        "seed": 0
    }))
    .unwrap();
    cfg.experiment = experiment;
    cfg.model = ModelConfig {
        offspring: Some(offspring),
        displacement,
    };
    cfg.seed = seed;
    cfg.reps = Some(REPS);
    cfg
}

fn conclude(criterion: &str, pass: bool, detail: &str) {
    println!("{criterion}: {} — {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{criterion}: FAIL — {detail}");
}

fn summarize_z(report: &Report) -> String {
    report
        .statistics
        .iter()
        .filter_map(|row| row.z.map(|z| format!("{} z={z:+.2}", row.name)))
        .collect::<Vec<_>>()
        .join("; ")
}

// ---------------------------------------------------------------------
// criterion 1: rightmost-particle law
// ---------------------------------------------------------------------

fn rightmost_law_report(n: u32, seed: u64) -> Report {
    let mut cfg = config(ExperimentKind::ValidateMaxima, det2(), iid_alpha1(), seed);
    cfg.n = Some(n);
    cfg.x_grid = Some(vec![1.0, 2.0, 4.0, 8.0]);
    harness::validate_maxima(&cfg).unwrap().report
}

#[test]
fn criterion_1_rightmost_particle_law() {
    let report = rightmost_law_report(10, 101);
    conclude(
        "criterion 1 (rightmost law, n=10)",
        report.pass,
        &format!(
            "CDF of the scaled maximum vs exp(-2/x) at x = 1,2,4,8; {}",
            summarize_z(&report)
        ),
    );
}

#[test]
fn criterion_1_companion_rightmost_law_converges_by_n14() {
    let report = rightmost_law_report(14, 102);
    conclude(
        "criterion 1 companion (rightmost law, n=14)",
        report.pass,
        &summarize_z(&report),
    );
}

// ---------------------------------------------------------------------
// criterion 2: point-process limit, iid displacements
// ---------------------------------------------------------------------

fn laplace_report(offspring: OffspringLaw, n: u32, seed: u64) -> Report {
    let mut cfg = config(ExperimentKind::ValidateLaplace, offspring, iid_alpha1(), seed);
    cfg.n = Some(n);
    harness::validate_laplace(&cfg).unwrap().report
}

#[test]
fn criterion_2_laplace_functional_iid() {
    let det = laplace_report(det2(), 10, 201);
    let geo = laplace_report(geo23(), 10, 202);
    conclude(
        "criterion 2 (Laplace functional vs quadrature, n=10)",
        det.pass && geo.pass,
        &format!(
            "deterministic(2): {}; geometric(2/3): {}",
            summarize_z(&det),
            summarize_z(&geo)
        ),
    );
}

#[test]
fn criterion_2_companion_laplace_functional_converges_by_n14() {
    let det = laplace_report(det2(), 14, 203);
    let geo = laplace_report(geo23(), 14, 204);
    conclude(
        "criterion 2 companion (Laplace functional, n=14)",
        det.pass && geo.pass,
        &format!(
            "deterministic(2): {}; geometric(2/3): {}",
            summarize_z(&det),
            summarize_z(&geo)
        ),
    );
}

// ---------------------------------------------------------------------
// criterion 3: dependent displacements, simulator vs limit sampler
// ---------------------------------------------------------------------

struct PolarComparison {
    rows: Vec<(String, f64)>,
    pass: bool,
}

fn polar_brw_vs_limit(n: u32, seed: u64) -> PolarComparison {
    let model = BrwModel::new(det2(), polar_diag()).unwrap();
    let spec = SscdpppSpec::new(polar_diag(), det2()).unwrap();
    let x_grid = [1.0, 2.0, 4.0];
    let panel = [
        TestFunction::new(1.0, 1.0, 1.0).unwrap(),
        TestFunction::new(2.0, 1.0, 0.5).unwrap(),
        TestFunction::new(1.5, 2.0, 2.0).unwrap(),
    ];
    let opts = SimOptions::default();

    let brw_side: Vec<(Vec<f64>, Vec<f64>)> = parallel_map(seed, 0, REPS, |_, rng| {
        let run = brw::simulate_conditioned(&model, n, rng, 1_000_000, &opts).unwrap();
        let counts = x_grid
            .iter()
            .map(|&x| run.n_n.count_exceedances(x).0 as f64)
            .collect();
        let psis = panel
            .iter()
            .map(|f| (-run.n_n.integrate(f)).exp())
            .collect();
        (counts, psis)
    });
    // deterministic offspring: W is identically 1
    let star_side: Vec<(Vec<f64>, Vec<f64>)> = parallel_map(seed, 1, REPS, |_, rng| {
        let m = sample_n_star(&spec, &WScale::unit(), 0.999, rng).unwrap();
        let counts = x_grid
            .iter()
            .map(|&x| m.count_exceedances(x).0 as f64)
            .collect();
        let psis = panel.iter().map(|f| (-m.integrate(f)).exp()).collect();
        (counts, psis)
    });

    let mut rows = Vec::new();
    let mut pass = true;
    let column = |side: &[(Vec<f64>, Vec<f64>)], which: usize, idx: usize| -> Vec<f64> {
        side.iter()
            .map(|(c, p)| if which == 0 { c[idx] } else { p[idx] })
            .collect()
    };
    for (i, &x) in x_grid.iter().enumerate() {
        let (ea, sa) = stats::mean_se(&column(&brw_side, 0, i));
        let (eb, sb) = stats::mean_se(&column(&star_side, 0, i));
        let z = stats::z_score(ea, sa, eb, sb);
        pass &= z.abs() < 3.0;
        rows.push((format!("mean N(x={x},inf) z={z:+.2}"), z));
    }
    for (k, f) in panel.iter().enumerate() {
        let (ea, sa) = stats::mean_se(&column(&brw_side, 1, k));
        let (eb, sb) = stats::mean_se(&column(&star_side, 1, k));
        let z = stats::z_score(ea, sa, eb, sb);
        pass &= z.abs() < 3.0;
        rows.push((format!("psi {} z={z:+.2}", f.id()), z));
    }
    PolarComparison { rows, pass }
}

#[test]
fn criterion_3_polar_model_brw_vs_limit_sampler() {
    let cmp = polar_brw_vs_limit(10, 301);
    let detail: Vec<String> = cmp.rows.iter().map(|(s, _)| s.clone()).collect();
    conclude(
        "criterion 3 (polar diagonal, BRW n=10 vs limit sampler)",
        cmp.pass,
        &detail.join("; "),
    );
}

#[test]
fn criterion_3_companion_polar_model_converges_by_n14() {
    let cmp = polar_brw_vs_limit(14, 302);
    let detail: Vec<String> = cmp.rows.iter().map(|(s, _)| s.clone()).collect();
    conclude(
        "criterion 3 companion (polar diagonal, n=14)",
        cmp.pass,
        &detail.join("; "),
    );
}

// ---------------------------------------------------------------------
// criterion 4: superposition domain of attraction
// ---------------------------------------------------------------------

#[test]
fn criterion_4_superposition_domain_of_attraction() {
    let mut cfg = config(
        ExperimentKind::SuperpositionDoa,
        det2(), // unused by the experiment
        iid_alpha1(),
        401,
    );
    cfg.coeffs = Some(vec![1.0, 0.5]);
    cfg.sizes = Some(vec![10_000]);
    cfg.x_grid = Some(vec![1.0, 2.0, 4.0]);
    cfg.reps = Some(2_000);
    let report = harness::superposition_doa(&cfg).unwrap().report;
    conclude(
        "criterion 4 (superposition domain of attraction)",
        report.pass,
        &format!(
            "mean counts vs 1.5/x and Laplace panel vs analytic limit; {}",
            summarize_z(&report)
        ),
    );
}

// ---------------------------------------------------------------------
// criteria 5 and 6: stability and Frechet scale support of the frozen
// limit
// ---------------------------------------------------------------------

fn stability_report(alpha: f64, seed: u64) -> Report {
    let mut cfg = config(
        ExperimentKind::ValidateStability,
        det2(),
        DisplacementModel::iid(alpha, 1.0).unwrap(),
        seed,
    );
    cfg.b1 = Some(1.0);
    cfg.b2 = Some(1.0);
    harness::validate_stability(&cfg).unwrap().report
}

#[test]
fn criterion_5_stability_of_frozen_limit() {
    let mut pass = true;
    let mut detail = Vec::new();
    for (alpha, seed) in [(1.0, 501), (2.0, 502)] {
        let report = stability_report(alpha, seed);
        let chi_ok = report
            .chi_square
            .iter()
            .all(|row| row.p_adjusted > report.p_min);
        pass &= chi_ok;
        let min_p = report
            .chi_square
            .iter()
            .map(|r| r.p_adjusted)
            .fold(f64::INFINITY, f64::min);
        detail.push(format!(
            "alpha={alpha}: {} cells, min adjusted p = {min_p:.4}",
            report.chi_square.len()
        ));
    }
    conclude(
        "criterion 5 (strict stability, chi-square on annulus counts)",
        pass,
        &detail.join("; "),
    );
}

#[test]
fn criterion_6_frechet_scale_support() {
    let report = stability_report(1.0, 601);
    let frechet: Vec<_> = report
        .statistics
        .iter()
        .filter(|row| row.name.starts_with("frechet:"))
        .collect();
    assert!(!frechet.is_empty());
    let pass = frechet
        .iter()
        .all(|row| row.z.is_some_and(|z| z.abs() < 3.0));
    let worst = frechet
        .iter()
        .filter_map(|r| r.z)
        .fold(0.0f64, |m, z| m.max(z.abs()));
    conclude(
        "criterion 6 (Frechet scale support, pairwise constancy in y)",
        pass,
        &format!(
            "{} pairwise comparisons over y in {{0.5,1,2,4}}, worst |z| = {worst:.2}",
            frechet.len()
        ),
    );
}

// ---------------------------------------------------------------------
// criterion 7: exact/analytic invariants and determinism
// ---------------------------------------------------------------------

#[test]
fn criterion_7_exact_invariants_and_determinism() {
    // closed-form scaling sequences, exact
    let model = BrwModel::new(det2(), iid_alpha1()).unwrap();
    let exact_cn = model.scaling().c_n(10) == 1024.0;

    // homogeneity of the limit intensity at 1e-12
    let polar = polar_diag();
    let q = brw_core::heavy_tails::RectQuery::half_space(
        0,
        brw_core::heavy_tails::Side::Right,
        1.5,
    )
    .unwrap();
    let (lhs, rhs) = polar.homogeneity_check(&q, 3.0).unwrap();
    let homogeneous = (lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300);

    // kappa closed form for deterministic(2) at 1e-12
    let spec = SscdpppSpec::new(iid_alpha1(), det2()).unwrap();
    let kappa = brw_core::limit::kappa_lambda(
        &spec,
        &brw_core::limit::KappaMethod::ClosedFormIid,
        &mut brw_core::rng::stream_rng(7, 0, 0),
    )
    .unwrap();
    let kappa_exact = (kappa.value - 2.0).abs() < 1e-12;

    // byte-identical artifacts for identical (config, seed)
    let mut cfg = config(ExperimentKind::ValidateMaxima, geo23(), iid_alpha1(), 701);
    cfg.n = Some(6);
    cfg.reps = Some(400);
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    harness::run_to_dir(&cfg, dir_a.path()).unwrap();
    harness::run_to_dir(&cfg, dir_b.path()).unwrap();
    let mut deterministic = true;
    for name in ["report.json", "cdf.csv"] {
        let a = std::fs::read(dir_a.path().join(name)).unwrap();
        let b = std::fs::read(dir_b.path().join(name)).unwrap();
        deterministic &= a == b;
    }

    let pass = exact_cn && homogeneous && kappa_exact && deterministic;
    conclude(
        "criterion 7 (exact invariants and determinism)",
        pass,
        &format!(
            "c_n closed form exact: {exact_cn}; homogeneity 1e-12: {homogeneous}; \
             kappa closed form 1e-12: {kappa_exact}; byte-identical reruns: {deterministic}; \
             remaining exact suites (V/T tabulation 1e-10, extinction vs brute force, \
             point-measure algebra) run as unit tests in this workspace"
        ),
    );
}

// ---------------------------------------------------------------------
// criterion 8: one-big-jump diagnostic
// ---------------------------------------------------------------------

#[test]
fn criterion_8_one_big_jump_diagnostic() {
    let mut cfg = config(ExperimentKind::BigJump, det2(), iid_alpha1(), 801);
    cfg.n_grid = Some(vec![4, 6, 8, 10]);
    cfg.eps = Some(4.0);
    cfg.reps = Some(4_000);
    let report = harness::big_jump(&cfg).unwrap().report;
    let fractions: Vec<String> = report
        .statistics
        .iter()
        .map(|row| format!("{} = {:.4}", row.name, row.empirical))
        .collect();
    conclude(
        "criterion 8 (one-big-jump diagnostic)",
        report.pass,
        &format!(
            "nonincreasing within noise and < 0.05 at n = 10; {}",
            fractions.join("; ")
        ),
    );
}

// ---------------------------------------------------------------------
// spot checks reused by several criteria
// ---------------------------------------------------------------------

#[test]
fn oracle_cdf_value_matches_stated_constant() {
    // exp(-2/4) = 0.6065..., the stated oracle at x = 4 for criterion 1
    let (value, se) = analytic::maxima_cdf(2.0, 1.0, 4.0, &[1.0]);
    assert!(se == 0.0 && (value - 0.60653065971).abs() < 1e-10);
    let tail = TailIndexSpec::new(1.0, 1.0).unwrap();
    assert_eq!(
        analytic::superposition_mean_exceedances(&[1.0, 0.5], &tail, 1.0),
        1.5
    );
}
