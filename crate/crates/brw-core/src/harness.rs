//! Config-driven experiment runner.
//!
//! Each experiment ties the finite-population simulation to a limit-law
//! prediction and reports empirical values with standard errors, oracle
//! values with their own uncertainty, and combined z-scores. Runs are a
//! pure function of `(config, seed)`: replications draw from
//! counter-derived RNG streams and are merged in replication order, so
//! repeated runs produce byte-identical artifacts regardless of the
//! worker-pool size.

use crate::analytic;
use crate::brw::{self, BrwModel, SimError, SimOptions};
use crate::gw::{GwError, MartingaleLimitSampler, OffspringKind, OffspringLaw};
use crate::heavy_tails::{DisplacementModel, ModelError};
use crate::limit::{
    kappa_lambda, sample_n_star, KappaMethod, KappaResult, LimitError, SscdpppSpec, WScale,
};
use crate::point_measure::{MeasureError, PointMeasure, TestFunction, ANNULUS_GRID};
use crate::rng::{parallel_map, stream_rng};
use crate::stats;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;
const MAX_CONDITION_ATTEMPTS: u64 = 1_000_000;
const ORACLE_W_DRAWS: u64 = 100_000;

// stream-space phases; every sampling stage gets its own block
const PHASE_RUNS: u64 = 0;
const PHASE_ORACLE_W: u64 = 1;
const PHASE_KAPPA: u64 = 2;
const PHASE_ORACLE_NSTAR: u64 = 3;
const PHASE_STABILITY: u64 = 4;
const PHASE_FRECHET: u64 = 8; // + y index
const PHASE_SUPERPOSITION: u64 = 16; // + size index
const PHASE_BIG_JUMP: u64 = 32; // + n index
const PHASE_SAMPLE: u64 = 48;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Limit(#[from] LimitError),
    #[error(transparent)]
    Gw(#[from] GwError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    ValidateMaxima,
    ValidateLaplace,
    ValidateStability,
    SuperpositionDoa,
    BigJump,
    ComputeKappa,
    Sample,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::ValidateMaxima => "validate_maxima",
            ExperimentKind::ValidateLaplace => "validate_laplace",
            ExperimentKind::ValidateStability => "validate_stability",
            ExperimentKind::SuperpositionDoa => "superposition_doa",
            ExperimentKind::BigJump => "big_jump",
            ExperimentKind::ComputeKappa => "compute_kappa",
            ExperimentKind::Sample => "sample",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offspring: Option<OffspringLaw>,
    pub displacement: DisplacementModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleSource {
    Brw,
    Limit,
}

/// Declarative experiment description. `seed` is mandatory: every run is
/// reproducible by contract.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub model: ModelConfig,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_grid: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_params: Option<Vec<TestFunction>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// Cluster-template coefficients for the superposition experiment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<f64>>,
    /// Superposition sizes (number of i.i.d. copies per replication).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_min: Option<f64>,
    /// Pass threshold for the big-jump disagreement fraction at the
    /// largest n.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bj_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SampleSource>,
    /// How many replications get a points_<rep>.csv dump.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dump_points: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
}

impl ExperimentConfig {
    pub fn reps(&self) -> u64 {
        self.reps.unwrap_or(match self.experiment {
            ExperimentKind::SuperpositionDoa => 2_000,
            ExperimentKind::BigJump => 4_000,
            ExperimentKind::Sample => 10,
            _ => 10_000,
        })
    }

    pub fn z_max(&self) -> f64 {
        self.z_max.unwrap_or(3.0)
    }

    pub fn p_min(&self) -> f64 {
        self.p_min.unwrap_or(0.001)
    }

    pub fn panel(&self) -> Result<Vec<TestFunction>, HarnessError> {
        match &self.f_params {
            Some(panel) if panel.is_empty() => {
                Err(HarnessError::Config("f_params must not be empty".into()))
            }
            Some(panel) => Ok(panel.clone()),
            None => Ok(vec![
                TestFunction::new(1.0, 1.0, 1.0).expect("valid"),
                TestFunction::new(2.0, 1.0, 0.5).expect("valid"),
                TestFunction::new(1.5, 2.0, 2.0).expect("valid"),
            ]),
        }
    }

    fn offspring(&self) -> Result<&OffspringLaw, HarnessError> {
        self.model.offspring.as_ref().ok_or_else(|| {
            HarnessError::Config(format!(
                "experiment {:?} requires model.offspring",
                self.experiment.name()
            ))
        })
    }

    fn brw_model(&self) -> Result<BrwModel, HarnessError> {
        Ok(BrwModel::new(
            self.offspring()?.clone(),
            self.model.displacement.clone(),
        )?)
    }

    fn sscdppp_spec(&self) -> Result<SscdpppSpec, HarnessError> {
        Ok(SscdpppSpec::new(
            self.model.displacement.clone(),
            self.offspring()?.clone(),
        )?)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.experiment != ExperimentKind::Sample && self.reps() < 100 {
            return Err(HarnessError::Config(format!(
                "statistical experiments need reps >= 100, got {}",
                self.reps()
            )));
        }
        if let Some(grid) = &self.x_grid {
            if grid.iter().any(|&x| !(x > 0.0)) {
                return Err(HarnessError::Config("x_grid values must be positive".into()));
            }
        }
        match self.experiment {
            ExperimentKind::SuperpositionDoa => {
                if self.model.displacement.scalar().is_none() {
                    return Err(HarnessError::Config(
                        "superposition_doa needs an iid displacement model".into(),
                    ));
                }
            }
            _ => {
                self.offspring()?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StatRow {
    pub name: String,
    pub empirical: f64,
    pub std_error: f64,
    pub oracle: f64,
    pub oracle_se: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
}

impl StatRow {
    fn with_z(name: String, empirical: f64, se: f64, oracle: f64, oracle_se: f64) -> Self {
        let z = stats::z_score(empirical, se, oracle, oracle_se);
        StatRow {
            name,
            empirical,
            std_error: se,
            oracle,
            oracle_se,
            z: Some(z),
        }
    }

    fn without_z(name: String, empirical: f64, se: f64, oracle: f64) -> Self {
        StatRow {
            name,
            empirical,
            std_error: se,
            oracle,
            oracle_se: 0.0,
            z: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChiRow {
    pub name: String,
    pub statistic: f64,
    pub dof: f64,
    pub p_value: f64,
    pub p_adjusted: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub experiment: String,
    pub seed: u64,
    pub statistics: Vec<StatRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub chi_square: Vec<ChiRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub kappa: Vec<KappaResult>,
    pub max_abs_z: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ks_distance: Option<f64>,
    pub z_max: f64,
    pub p_min: f64,
    pub pass: bool,
    pub notes: Vec<String>,
}

impl Report {
    fn new(cfg: &ExperimentConfig) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            experiment: cfg.experiment.name().to_string(),
            seed: cfg.seed,
            statistics: Vec::new(),
            chi_square: Vec::new(),
            kappa: Vec::new(),
            max_abs_z: 0.0,
            ks_distance: None,
            z_max: cfg.z_max(),
            p_min: cfg.p_min(),
            pass: true,
            notes: Vec::new(),
        }
    }

    fn push_z_row(&mut self, row: StatRow) {
        if let Some(z) = row.z {
            self.max_abs_z = self.max_abs_z.max(z.abs());
            if z.abs() > self.z_max {
                self.pass = false;
            }
        }
        self.statistics.push(row);
    }
}

/// Experiment output: the report plus named CSV tables, both fully
/// deterministic given the config.
#[derive(Debug)]
pub struct Artifacts {
    pub report: Report,
    pub tables: Vec<(String, String)>,
}

fn csv_opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

fn w_draws_for(
    offspring: &OffspringLaw,
    seed: u64,
) -> Result<Vec<f64>, HarnessError> {
    if matches!(offspring.kind(), OffspringKind::Deterministic { .. }) {
        // W is identically 1: the oracle expectation over W is exact
        return Ok(vec![1.0]);
    }
    let sampler = MartingaleLimitSampler::new(offspring.clone(), 30, true);
    let draws = parallel_map(seed, PHASE_ORACLE_W, ORACLE_W_DRAWS, |_, rng| {
        sampler.sample(rng)
    });
    Ok(draws.into_iter().collect::<Result<Vec<_>, _>>()?)
}

/// Rightmost-particle validation: empirical CDF of the scaled maximum
/// over conditioned runs against `E exp(-kappa W x^-alpha)`.
pub fn validate_maxima(cfg: &ExperimentConfig) -> Result<Artifacts, HarnessError> {
    cfg.validate()?;
    let model = cfg.brw_model()?;
    let n = cfg.n.unwrap_or(10);
    let reps = cfg.reps();
    let x_grid = cfg
        .x_grid
        .clone()
        .unwrap_or_else(|| vec![1.0, 2.0, 4.0, 8.0]);
    let mut report = Report::new(cfg);

    let opts = SimOptions::default();
    let maxima: Vec<f64> = parallel_map(cfg.seed, PHASE_RUNS, reps, |_, rng| {
        brw::simulate_conditioned(&model, n, rng, MAX_CONDITION_ATTEMPTS, &opts)
            .map(|run| run.m_n_scaled.unwrap_or(f64::NEG_INFINITY))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;

    let spec = cfg.sscdppp_spec()?;
    let kappa = match cfg.model.displacement {
        DisplacementModel::Iid { .. } => {
            kappa_lambda(&spec, &KappaMethod::ClosedFormIid, &mut stream_rng(cfg.seed, PHASE_KAPPA, 0))?
        }
        DisplacementModel::Polar { .. } => kappa_lambda(
            &spec,
            &KappaMethod::MonteCarlo {
                x_grid: x_grid.clone(),
                reps,
            },
            &mut stream_rng(cfg.seed, PHASE_KAPPA, 0),
        )?,
    };
    let kappa_se = kappa.std_error.unwrap_or(0.0);
    let w_draws = w_draws_for(cfg.offspring()?, cfg.seed)?;
    let alpha = cfg.model.displacement.alpha();

    let mut ks = 0.0f64;
    let mut csv = String::from("x,empirical,se,oracle,z\n");
    for &x in &x_grid {
        let hits = maxima.iter().filter(|&&m| m <= x).count();
        let emp = hits as f64 / reps as f64;
        let emp_se = (emp * (1.0 - emp) / reps as f64).sqrt();
        let (oracle, w_se) = analytic::maxima_cdf(kappa.value, alpha, x, &w_draws);
        // first-order effect of kappa uncertainty on the oracle
        let rate = x.powf(-alpha);
        let dkdmean: f64 = w_draws
            .iter()
            .map(|&w| w * (-kappa.value * rate * w).exp())
            .sum::<f64>()
            / w_draws.len() as f64;
        let oracle_se = w_se.hypot(rate * dkdmean * kappa_se);
        let row = StatRow::with_z(format!("cdf(x={x})"), emp, emp_se, oracle, oracle_se);
        csv.push_str(&format!(
            "{x},{emp},{emp_se},{oracle},{}\n",
            csv_opt(row.z)
        ));
        ks = ks.max((emp - oracle).abs());
        report.push_z_row(row);
    }
    report.ks_distance = Some(ks);
    report.kappa.push(kappa);
    report
        .notes
        .push(format!("{reps} conditioned runs at n = {n}; survival conditioning via rejection at the simulated horizon"));

    Ok(Artifacts {
        report,
        tables: vec![("cdf.csv".into(), csv)],
    })
}

fn laplace_rows_from_runs(
    values_per_f: &[Vec<f64>],
    panel: &[TestFunction],
) -> Vec<(f64, f64)> {
    panel
        .iter()
        .enumerate()
        .map(|(k, _)| stats::mean_se(&values_per_f[k]))
        .collect()
}

/// Point-process limit validation: the empirical Laplace functional of the
/// conditioned finite-n process against the limit (quadrature for iid
/// models, limit-sampler Monte Carlo for polar ones).
pub fn validate_laplace(cfg: &ExperimentConfig) -> Result<Artifacts, HarnessError> {
    cfg.validate()?;
    let model = cfg.brw_model()?;
    let n = cfg.n.unwrap_or(10);
    let reps = cfg.reps();
    let panel = cfg.panel()?;
    let mut report = Report::new(cfg);

    let opts = SimOptions::default();
    let per_run: Vec<Vec<f64>> = parallel_map(cfg.seed, PHASE_RUNS, reps, |_, rng| {
        brw::simulate_conditioned(&model, n, rng, MAX_CONDITION_ATTEMPTS, &opts)
            .map(|run| panel.iter().map(|f| (-run.n_n.integrate(f)).exp()).collect())
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let mut emp_values: Vec<Vec<f64>> = vec![Vec::with_capacity(reps as usize); panel.len()];
    for row in per_run {
        for (k, v) in row.into_iter().enumerate() {
            emp_values[k].push(v);
        }
    }
    let empirical = laplace_rows_from_runs(&emp_values, &panel);

    let oracle: Vec<(f64, f64)> = match &cfg.model.displacement {
        DisplacementModel::Iid { scalar } => {
            let w_draws = w_draws_for(cfg.offspring()?, cfg.seed)?;
            panel
                .iter()
                .map(|f| analytic::iid_limit_laplace(cfg.offspring().expect("validated"), &scalar.spec, f, &w_draws))
                .collect()
        }
        DisplacementModel::Polar { .. } => {
            let spec = cfg.sscdppp_spec()?;
            let offspring = cfg.offspring()?.clone();
            let threshold =
                0.999 * panel.iter().map(|f| f.a).fold(f64::INFINITY, f64::min);
            let star_values: Vec<Vec<f64>> =
                parallel_map(cfg.seed, PHASE_ORACLE_NSTAR, reps, |_, rng| {
                    let w_scale = if matches!(offspring.kind(), OffspringKind::Deterministic { .. })
                    {
                        WScale::unit()
                    } else {
                        WScale::Martingale(MartingaleLimitSampler::new(offspring.clone(), 30, true))
                    };
                    sample_n_star(&spec, &w_scale, threshold, rng)
                        .map(|m| panel.iter().map(|f| (-m.integrate(f)).exp()).collect())
                })
                .into_iter()
                .collect::<Result<Vec<_>, _>>()?;
            let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(reps as usize); panel.len()];
            for row in star_values {
                for (k, v) in row.into_iter().enumerate() {
                    cols[k].push(v);
                }
            }
            laplace_rows_from_runs(&cols, &panel)
        }
    };

    let mut csv = String::from("f_id,y,empirical,se,oracle,z\n");
    for ((f, &(emp, emp_se)), &(orc, orc_se)) in
        panel.iter().zip(&empirical).zip(&oracle)
    {
        let row = StatRow::with_z(f.id(), emp, emp_se, orc, orc_se);
        csv.push_str(&format!(
            "{},1,{emp},{emp_se},{orc},{}\n",
            f.id(),
            csv_opt(row.z)
        ));
        report.push_z_row(row);
    }
    report.notes.push(format!(
        "{reps} conditioned runs at n = {n} against the limiting Laplace functional"
    ));

    Ok(Artifacts {
        report,
        tables: vec![("laplace.csv".into(), csv)],
    })
}

/// Strict stability of the frozen-scale limit: superposing two scaled
/// independent copies matches a single copy at the combined scale, in
/// annulus-count distribution (chi-square) and Laplace functionals; plus
/// the Frechet scale-support diagnostic in y.
pub fn validate_stability(cfg: &ExperimentConfig) -> Result<Artifacts, HarnessError> {
    cfg.validate()?;
    let spec = cfg.sscdppp_spec()?;
    let alpha = cfg.model.displacement.alpha();
    let (b1, b2) = (cfg.b1.unwrap_or(1.0), cfg.b2.unwrap_or(1.0));
    if !(b1 > 0.0 && b2 > 0.0) {
        return Err(HarnessError::Config("b1, b2 must be positive".into()));
    }
    let combined = (b1.powf(alpha) + b2.powf(alpha)).powf(1.0 / alpha);
    let reps = cfg.reps();
    let panel = cfg.panel()?;
    let mut report = Report::new(cfg);
    report.notes.push(format!(
        "superposed scales ({b1}, {b2}) against the single scale {combined}; W frozen at 1"
    ));

    let tau = ANNULUS_GRID[0];
    struct RepOutcome {
        sig_a: Vec<u64>,
        sig_b: Vec<u64>,
        psi_a: Vec<f64>,
        psi_b: Vec<f64>,
    }
    let outcomes: Vec<RepOutcome> = parallel_map(cfg.seed, PHASE_STABILITY, reps, |_, rng| {
        let d1 = sample_n_star(&spec, &WScale::unit(), tau / b1, rng)?;
        let d2 = sample_n_star(&spec, &WScale::unit(), tau / b2, rng)?;
        let d3 = sample_n_star(&spec, &WScale::unit(), tau / combined, rng)?;
        let a = PointMeasure::superpose([&d1.scale(b1)?, &d2.scale(b2)?])?;
        let b = d3.scale(combined)?;
        Ok::<RepOutcome, LimitError>(RepOutcome {
            sig_a: a.annulus_signature(tau),
            sig_b: b.annulus_signature(tau),
            psi_a: panel.iter().map(|f| (-a.integrate(f)).exp()).collect(),
            psi_b: panel.iter().map(|f| (-b.integrate(f)).exp()).collect(),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;

    // chi-square per annulus cell, Bonferroni-adjusted over testable cells
    let n_cells = outcomes[0].sig_a.len();
    let mut testable = Vec::new();
    for cell in 0..n_cells {
        let col_a: Vec<u64> = outcomes.iter().map(|o| o.sig_a[cell]).collect();
        let col_b: Vec<u64> = outcomes.iter().map(|o| o.sig_b[cell]).collect();
        if let Some(outcome) = stats::two_sample_count_test(&col_a, &col_b, 10) {
            testable.push((cell, outcome));
        }
    }
    let m = testable.len().max(1) as f64;
    for (cell, outcome) in &testable {
        let radius = ANNULUS_GRID[cell % (n_cells / 2)];
        let side = if *cell < n_cells / 2 { "+" } else { "-" };
        let adjusted = (outcome.p_value * m).min(1.0);
        if adjusted <= cfg.p_min() {
            report.pass = false;
        }
        report.chi_square.push(ChiRow {
            name: format!("annulus({side}{radius})"),
            statistic: outcome.statistic,
            dof: outcome.dof,
            p_value: outcome.p_value,
            p_adjusted: adjusted,
        });
    }
    report.notes.push(format!(
        "chi-square p-values Bonferroni-adjusted over {} testable cells",
        testable.len()
    ));

    // Laplace z-tests between the two sides
    let mut csv = String::from("f_id,y,empirical,se,oracle,z\n");
    for (k, f) in panel.iter().enumerate() {
        let a: Vec<f64> = outcomes.iter().map(|o| o.psi_a[k]).collect();
        let b: Vec<f64> = outcomes.iter().map(|o| o.psi_b[k]).collect();
        let (ea, sa) = stats::mean_se(&a);
        let (eb, sb) = stats::mean_se(&b);
        let row = StatRow::with_z(format!("stability:{}", f.id()), ea, sa, eb, sb);
        csv.push_str(&format!("{},1,{ea},{sa},{eb},{}\n", f.id(), csv_opt(row.z)));
        report.push_z_row(row);
    }

    // Frechet scale support: y^alpha * (-log Psi(f || y)) constant in y
    let y_grid = [0.5, 1.0, 2.0, 4.0];
    for (k, f) in panel.iter().enumerate() {
        let mut constants = Vec::new();
        for (yi, &y) in y_grid.iter().enumerate() {
            let threshold = 0.999 * f.a * y;
            let vals: Vec<f64> =
                parallel_map(cfg.seed, PHASE_FRECHET + yi as u64, reps, |_, rng| {
                    let m = sample_n_star(&spec, &WScale::unit(), threshold, rng)?;
                    Ok::<f64, LimitError>((-m.integrate_with(|x| f.eval(x / y))).exp())
                })
                .into_iter()
                .collect::<Result<Vec<_>, _>>()?;
            let (psi, psi_se) = stats::mean_se(&vals);
            let constant = y.powf(alpha) * (-psi.ln());
            let se = y.powf(alpha) * psi_se / psi;
            csv.push_str(&format!(
                "frechet:{},{y},{psi},{psi_se},,\n",
                f.id()
            ));
            constants.push((y, constant, se));
        }
        for i in 0..constants.len() {
            for j in i + 1..constants.len() {
                let (yi, ci, si) = constants[i];
                let (yj, cj, sj) = constants[j];
                let row = StatRow::with_z(
                    format!("frechet:{}:y{yi}-vs-y{yj}", f.id()),
                    ci,
                    si,
                    cj,
                    sj,
                );
                report.push_z_row(row);
            }
        }
        let _ = k;
    }

    Ok(Artifacts {
        report,
        tables: vec![("laplace.csv".into(), csv)],
    })
}

/// Superposition domain of attraction: scaled superpositions of i.i.d.
/// cluster templates against the analytic stable limit.
pub fn superposition_doa(cfg: &ExperimentConfig) -> Result<Artifacts, HarnessError> {
    cfg.validate()?;
    let scalar = *cfg
        .model
        .displacement
        .scalar()
        .ok_or_else(|| HarnessError::Config("superposition_doa needs an iid model".into()))?;
    let tail = scalar.spec;
    let coeffs = cfg.coeffs.clone().unwrap_or_else(|| vec![1.0, 0.5]);
    if coeffs.is_empty() || coeffs.iter().any(|&c| !(c > 0.0)) {
        return Err(HarnessError::Config(
            "cluster coefficients must be positive".into(),
        ));
    }
    let sizes = cfg.sizes.clone().unwrap_or_else(|| vec![10_000]);
    let reps = cfg.reps();
    let x_grid = cfg.x_grid.clone().unwrap_or_else(|| vec![1.0, 2.0, 4.0]);
    let panel = cfg.panel()?;
    let mut report = Report::new(cfg);

    let mut cdf_csv = String::from("x,empirical,se,oracle,z\n");
    let mut lap_csv = String::from("f_id,y,empirical,se,oracle,z\n");
    for (si, &size) in sizes.iter().enumerate() {
        let b_n = crate::heavy_tails::root_alpha(size as f64, tail.alpha);
        // per-replication exceedance counts and Laplace integrands
        let results: Vec<(Vec<u64>, Vec<f64>)> =
            parallel_map(cfg.seed, PHASE_SUPERPOSITION + si as u64, reps, |_, rng| {
                let mut counts = vec![0u64; x_grid.len()];
                let mut integrals = vec![0.0f64; panel.len()];
                for _ in 0..size {
                    let x = scalar.sample(rng);
                    for &c in &coeffs {
                        let atom = c * x / b_n;
                        for (slot, &level) in counts.iter_mut().zip(&x_grid) {
                            if atom > level {
                                *slot += 1;
                            }
                        }
                        for (acc, f) in integrals.iter_mut().zip(&panel) {
                            *acc += f.eval(atom);
                        }
                    }
                }
                (counts, integrals)
            });

        for (xi, &x) in x_grid.iter().enumerate() {
            let vals: Vec<f64> = results.iter().map(|(c, _)| c[xi] as f64).collect();
            let (emp, se) = stats::mean_se(&vals);
            let oracle = analytic::superposition_mean_exceedances(&coeffs, &tail, x);
            let row = StatRow::with_z(
                format!("mean_count(size={size},x={x})"),
                emp,
                se,
                oracle,
                0.0,
            );
            cdf_csv.push_str(&format!("{x},{emp},{se},{oracle},{}\n", csv_opt(row.z)));
            report.push_z_row(row);
        }
        for (k, f) in panel.iter().enumerate() {
            let vals: Vec<f64> = results.iter().map(|(_, i)| (-i[k]).exp()).collect();
            let (emp, se) = stats::mean_se(&vals);
            let oracle = (-analytic::superposition_limit_exponent(&coeffs, &tail, f)).exp();
            let row = StatRow::with_z(
                format!("psi(size={size}):{}", f.id()),
                emp,
                se,
                oracle,
                0.0,
            );
            lap_csv.push_str(&format!(
                "{},1,{emp},{se},{oracle},{}\n",
                f.id(),
                csv_opt(row.z)
            ));
            report.push_z_row(row);
        }
    }
    report.notes.push(format!(
        "cluster template with coefficients {coeffs:?}; exceedance oracle is exact for the pure power tail"
    ));

    Ok(Artifacts {
        report,
        tables: vec![("cdf.csv".into(), cdf_csv), ("laplace.csv".into(), lap_csv)],
    })
}

/// One-big-jump diagnostic: disagreement fraction of the annulus counts of
/// the extremal process and its single-jump companion, over an n grid.
pub fn big_jump(cfg: &ExperimentConfig) -> Result<Artifacts, HarnessError> {
    cfg.validate()?;
    let model = cfg.brw_model()?;
    let n_grid = cfg.n_grid.clone().unwrap_or_else(|| vec![4, 6, 8, 10]);
    let eps = cfg.eps.unwrap_or(4.0);
    if !(eps > 0.0) {
        return Err(HarnessError::Config("eps must be positive".into()));
    }
    let reps = cfg.reps();
    let bj_max = cfg.bj_max.unwrap_or(0.05);
    let mut report = Report::new(cfg);

    let opts = SimOptions::with_big_jumps();
    let mut fractions = Vec::new();
    for (ni, &n) in n_grid.iter().enumerate() {
        let disagreements: Vec<bool> =
            parallel_map(cfg.seed, PHASE_BIG_JUMP + ni as u64, reps, |_, rng| {
                let run =
                    brw::simulate_conditioned(&model, n, rng, MAX_CONDITION_ATTEMPTS, &opts)?;
                let tilde = run.n_tilde.as_ref().expect("tracking enabled");
                Ok::<bool, SimError>(
                    run.n_n.annulus_signature(eps) != tilde.annulus_signature(eps),
                )
            })
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;
        let frac = disagreements.iter().filter(|&&d| d).count() as f64 / reps as f64;
        let se = (frac * (1.0 - frac) / reps as f64).sqrt();
        fractions.push((n, frac, se));
        report.statistics.push(StatRow::without_z(
            format!("disagreement(n={n},eps={eps})"),
            frac,
            se,
            0.0,
        ));
    }

    // pass: monotone within noise, and small at the largest n
    for pair in fractions.windows(2) {
        let (n0, f0, s0) = pair[0];
        let (n1, f1, s1) = pair[1];
        if f1 > f0 + 3.0 * s0.hypot(s1) {
            report.pass = false;
            report
                .notes
                .push(format!("fraction increased from n={n0} to n={n1} beyond noise"));
        }
    }
    if let Some(&(n_last, f_last, _)) = fractions.last() {
        if f_last >= bj_max {
            report.pass = false;
            report.notes.push(format!(
                "fraction {f_last} at n={n_last} is not below {bj_max}"
            ));
        }
    }
    report.notes.push(format!(
        "annulus counts compared outside radius {eps}; fractions must be nonincreasing and < {bj_max} at the largest n"
    ));

    Ok(Artifacts {
        report,
        tables: Vec::new(),
    })
}

/// Rightmost-particle constant: closed form and/or Monte Carlo, with
/// cross-method and grid-constancy checks.
pub fn compute_kappa(cfg: &ExperimentConfig) -> Result<Artifacts, HarnessError> {
    cfg.validate()?;
    let spec = cfg.sscdppp_spec()?;
    let x_grid = cfg.x_grid.clone().unwrap_or_else(|| vec![1.0, 2.0, 4.0]);
    let reps = cfg.reps();
    let mut report = Report::new(cfg);

    let mc = kappa_lambda(
        &spec,
        &KappaMethod::MonteCarlo {
            x_grid: x_grid.clone(),
            reps,
        },
        &mut stream_rng(cfg.seed, PHASE_KAPPA, 0),
    )?;

    if cfg.model.displacement.scalar().is_some() {
        let closed = kappa_lambda(
            &spec,
            &KappaMethod::ClosedFormIid,
            &mut stream_rng(cfg.seed, PHASE_KAPPA, 1),
        )?;
        let row = StatRow::with_z(
            "kappa:mc_vs_closed_form".into(),
            mc.value,
            mc.std_error.unwrap_or(0.0),
            closed.value,
            0.0,
        );
        report.push_z_row(row);
        report.kappa.push(closed);
    }

    for i in 0..mc.per_point.len() {
        for j in i + 1..mc.per_point.len() {
            let (a, b) = (&mc.per_point[i], &mc.per_point[j]);
            let row = StatRow::with_z(
                format!("kappa:constancy(x={} vs x={})", a.x, b.x),
                a.value,
                a.std_error,
                b.value,
                b.std_error,
            );
            report.push_z_row(row);
        }
    }
    report.kappa.push(mc);
    report
        .notes
        .push("monte carlo kappa estimated with the scale frozen at W = 1".into());

    Ok(Artifacts {
        report,
        tables: Vec::new(),
    })
}

/// Point-measure dumps: per-run summary rows plus optional per-replication
/// atom tables.
pub fn sample(cfg: &ExperimentConfig) -> Result<Artifacts, HarnessError> {
    cfg.validate()?;
    let reps = cfg.reps();
    let source = cfg.source.unwrap_or(if cfg.n.is_some() {
        SampleSource::Brw
    } else {
        SampleSource::Limit
    });
    let dump = cfg.dump_points.unwrap_or(reps).min(reps);
    let mut report = Report::new(cfg);
    let mut tables = Vec::new();
    let mut runs_csv = String::from("rep,n,Z_n,M_n_scaled,survived\n");

    match source {
        SampleSource::Brw => {
            let model = cfg.brw_model()?;
            let n = cfg.n.unwrap_or(10);
            let opts = SimOptions::default();
            let runs: Vec<(u64, brw::BrwRunResult)> =
                parallel_map(cfg.seed, PHASE_SAMPLE, reps, |rep, rng| {
                    brw::simulate(&model, n, rng, &opts).map(|r| (rep, r))
                })
                .into_iter()
                .collect::<Result<Vec<_>, _>>()?;
            for (rep, run) in &runs {
                runs_csv.push_str(&format!(
                    "{rep},{},{},{},{}\n",
                    run.n,
                    run.z_n,
                    csv_opt(run.m_n_scaled),
                    run.survived
                ));
                if *rep < dump {
                    let mut buf = Vec::new();
                    run.n_n.write_csv(&mut buf)?;
                    tables.push((
                        format!("points_{rep}.csv"),
                        String::from_utf8(buf).expect("csv is utf8"),
                    ));
                }
            }
            report
                .notes
                .push(format!("{reps} unconditioned runs at n = {n}"));
        }
        SampleSource::Limit => {
            let spec = cfg.sscdppp_spec()?;
            let offspring = cfg.offspring()?.clone();
            let threshold = cfg.threshold.unwrap_or(0.25);
            let draws: Vec<(u64, PointMeasure)> =
                parallel_map(cfg.seed, PHASE_SAMPLE, reps, |rep, rng| {
                    let w_scale = if matches!(offspring.kind(), OffspringKind::Deterministic { .. })
                    {
                        WScale::unit()
                    } else {
                        WScale::Martingale(MartingaleLimitSampler::new(offspring.clone(), 30, true))
                    };
                    sample_n_star(&spec, &w_scale, threshold, rng).map(|m| (rep, m))
                })
                .into_iter()
                .collect::<Result<Vec<_>, _>>()?;
            for (rep, m) in &draws {
                runs_csv.push_str(&format!(
                    "{rep},,{},{},true\n",
                    m.total_mass(),
                    csv_opt(m.rightmost())
                ));
                if *rep < dump {
                    let mut buf = Vec::new();
                    m.write_csv(&mut buf)?;
                    tables.push((
                        format!("points_{rep}.csv"),
                        String::from_utf8(buf).expect("csv is utf8"),
                    ));
                }
            }
            report.notes.push(format!(
                "{reps} limit-process draws above threshold {threshold}"
            ));
        }
    }
    tables.insert(0, ("runs.csv".into(), runs_csv));
    Ok(Artifacts { report, tables })
}

/// Dispatches one experiment.
pub fn execute(cfg: &ExperimentConfig) -> Result<Artifacts, HarnessError> {
    match cfg.experiment {
        ExperimentKind::ValidateMaxima => validate_maxima(cfg),
        ExperimentKind::ValidateLaplace => validate_laplace(cfg),
        ExperimentKind::ValidateStability => validate_stability(cfg),
        ExperimentKind::SuperpositionDoa => superposition_doa(cfg),
        ExperimentKind::BigJump => big_jump(cfg),
        ExperimentKind::ComputeKappa => compute_kappa(cfg),
        ExperimentKind::Sample => sample(cfg),
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, HarnessError> {
    let text = fs::read_to_string(path)?;
    let cfg: ExperimentConfig = serde_json::from_str(&text)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Runs the experiment and writes `report.json` plus the CSV tables into
/// `out_dir`, creating it if needed. Returns the report.
pub fn run_to_dir(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Report, HarnessError> {
    let artifacts = execute(cfg)?;
    fs::create_dir_all(out_dir)?;
    let mut json = serde_json::to_string_pretty(&artifacts.report)?;
    json.push('\n');
    fs::write(out_dir.join("report.json"), json)?;
    for (name, contents) in &artifacts.tables {
        fs::write(out_dir.join(name), contents)?;
    }
    Ok(artifacts.report)
}
