//! Exact sampling of the limiting point process.
//!
//! The weak limit of the scaled extremal process is a randomly scaled
//! scale-decorated Poisson point process: Poisson radial scales dressed
//! with independent cluster decorations and multiplied by a power of the
//! martingale limit `W`. Clusters carry a size mark `V` (the offspring
//! count size-biased by descendant survival) and multiplicity marks `T`
//! (generation-mixed progeny counts conditioned nonzero):
//!
//! * `P(V = v)` is proportional to `P(Z_1 = v) * sum_i mu^-i (1 - q_i^v)`;
//! * given `V = v`, the mark vector `T` has pmf proportional to
//!   `sum_i mu^-i prod_m P(Z_i = y_m)` on nonzero vectors, realized here by
//!   drawing the generation index `i` with weight `mu^-i (1 - q_i^v)` and
//!   then `v` progeny counts of depth `i` rejected until not all zero
//!   (the factorization reproduces the stated pmf exactly; see the tests).
//!
//! For independent displacements the decoration degenerates to a single
//! signed atom with multiplicity `T` and the random scale uses
//! `r = sum_i mu^-i P(Z_i > 0)`; for bounded-offspring polar models the
//! decoration places `T_k` at the k-th coordinate of one angular draw and
//! the scale constant is `s / mu` with `s` the `V` normalizer.

use crate::gw::{
    extinction_profile, GwError, MartingaleLimitSampler, OffspringLaw, DEFAULT_REJECTION_BUDGET,
};
use crate::heavy_tails::{root_alpha, DisplacementModel, ModelError};
use crate::point_measure::{MeasureError, PointMeasure};
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LimitError {
    #[error("this operation requires an iid displacement model")]
    RequiresIid,
    #[error("polar displacements of dimension {dim} require an offspring law bounded by {dim}")]
    UnboundedOffspringForPolar { dim: usize },
    #[error("random scale must be positive, got W = {w}")]
    NonpositiveW { w: f64 },
    #[error("threshold {threshold} would require about {expected:.3e} Poisson points")]
    SeriesBudget { threshold: f64, expected: f64 },
    #[error("series truncation did not converge (mu too close to 1?)")]
    TruncationNotConverged,
    #[error("rejection budget exhausted while conditioning marks nonzero")]
    MarkRejectionBudget,
    #[error("zero-exceedance fraction at x = {x} is degenerate; enlarge the grid point")]
    DegenerateZeroFraction { x: f64 },
    #[error(transparent)]
    Gw(#[from] GwError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// Tabulated law of the cluster marks `(V, T)`.
///
/// Series over generations are truncated at `i_max` with
/// `mu^-i_max < 1e-12`; laws with unbounded progeny support are tabulated
/// to the `1 - 1e-12` quantile. Both cutoffs sit far below the statistical
/// tolerances of every consumer.
#[derive(Debug, Clone)]
pub struct VtLaw {
    offspring: OffspringLaw,
    mu: f64,
    i_max: u32,
    q: Vec<f64>,
    v_values: Vec<u64>,
    v_pmf: Vec<f64>,
    v_cum: Vec<f64>,
    s: f64,
    s_v: Vec<f64>,
    r: f64,
    /// per-v cumulative generation-index weights for the T draw
    t_index_cum: Vec<Vec<f64>>,
    /// cumulative index weights for the scalar (iid) T draw
    iid_index_cum: Vec<f64>,
}

impl VtLaw {
    pub fn new(offspring: OffspringLaw, i_max: Option<u32>) -> Result<Self, LimitError> {
        let mu = offspring.mean();
        let i_max = match i_max {
            Some(i) => i,
            None => {
                // smallest I with mu^-I < 1e-12
                let i = (12.0 * std::f64::consts::LN_10 / mu.ln()).ceil() as u32 + 1;
                i.clamp(8, 200_000)
            }
        };
        if mu.powi(-(i_max as i32)) >= 1e-12 {
            return Err(LimitError::TruncationNotConverged);
        }
        let profile = extinction_profile(&offspring, i_max);
        let q = profile.q().to_vec();

        let v_cap = offspring.support_quantile(1e-12);
        let mut v_values = Vec::new();
        let mut weights = Vec::new();
        let mut s_v = Vec::new();
        let mut t_index_cum = Vec::new();
        for v in 1..=v_cap {
            let pv = offspring.pmf(v);
            if pv == 0.0 {
                continue;
            }
            let mut idx_weights = Vec::with_capacity(q.len());
            let mut total = 0.0;
            for (i, &qi) in q.iter().enumerate() {
                let w = mu.powi(-(i as i32)) * (1.0 - qi.powi(v as i32));
                total += w;
                idx_weights.push(total);
            }
            v_values.push(v);
            s_v.push(total);
            weights.push(pv * total);
            t_index_cum.push(idx_weights);
        }
        if v_values.is_empty() {
            return Err(LimitError::Gw(GwError::InvalidParameter(
                "offspring law has no mass on positive values".into(),
            )));
        }
        let s: f64 = weights.iter().sum();
        let v_pmf: Vec<f64> = weights.iter().map(|w| w / s).collect();
        let mut v_cum = Vec::with_capacity(v_pmf.len());
        let mut acc = 0.0;
        for p in &v_pmf {
            acc += p;
            v_cum.push(acc);
        }

        let mut iid_index_cum = Vec::with_capacity(q.len());
        let mut r = 0.0;
        for (i, &qi) in q.iter().enumerate() {
            r += mu.powi(-(i as i32)) * (1.0 - qi);
            iid_index_cum.push(r);
        }

        Ok(VtLaw {
            offspring,
            mu,
            i_max,
            q,
            v_values,
            v_pmf,
            v_cum,
            s,
            s_v,
            r,
            t_index_cum,
            iid_index_cum,
        })
    }

    pub fn offspring(&self) -> &OffspringLaw {
        &self.offspring
    }

    pub fn i_max(&self) -> u32 {
        self.i_max
    }

    /// `q[i] = P(Z_i = 0)`.
    pub fn extinction(&self) -> &[f64] {
        &self.q
    }

    pub fn v_support(&self) -> &[u64] {
        &self.v_values
    }

    /// Normalizer of the `V` pmf: `sum_v P(Z_1 = v) sum_i mu^-i (1 - q_i^v)`.
    pub fn s(&self) -> f64 {
        self.s
    }

    /// Per-v normalizer `sum_i mu^-i (1 - q_i^v)`.
    pub fn s_v(&self, v: u64) -> Option<f64> {
        self.v_values
            .iter()
            .position(|&val| val == v)
            .map(|idx| self.s_v[idx])
    }

    /// `r = sum_i mu^-i P(Z_i > 0)`, the scalar-decoration normalizer.
    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn pmf_v(&self, v: u64) -> f64 {
        self.v_values
            .iter()
            .position(|&val| val == v)
            .map_or(0.0, |idx| self.v_pmf[idx])
    }

    /// Normalized generation-index weights of the `T | V = v` mixture.
    pub fn t_index_weights(&self, v: u64) -> Option<Vec<f64>> {
        let idx = self.v_values.iter().position(|&val| val == v)?;
        let cum = &self.t_index_cum[idx];
        let total = *cum.last().expect("nonempty");
        let mut prev = 0.0;
        Some(
            cum.iter()
                .map(|&c| {
                    let w = (c - prev) / total;
                    prev = c;
                    w
                })
                .collect(),
        )
    }

    /// Normalized index weights of the scalar `T` mixture (iid case).
    pub fn iid_index_weights(&self) -> Vec<f64> {
        let total = self.r;
        let mut prev = 0.0;
        self.iid_index_cum
            .iter()
            .map(|&c| {
                let w = (c - prev) / total;
                prev = c;
                w
            })
            .collect()
    }

    pub fn sample_v<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.random();
        let idx = self
            .v_cum
            .partition_point(|&c| c < u)
            .min(self.v_values.len() - 1);
        self.v_values[idx]
    }

    /// One `Z_i` draw, by evolving the generation-size chain `i` steps.
    pub fn sample_z_i<R: Rng + ?Sized>(&self, i: u32, rng: &mut R) -> Result<u64, LimitError> {
        let mut z = 1u64;
        for _ in 0..i {
            z = self.offspring.sample_progeny_sum(z, rng)?;
            if z == 0 {
                return Ok(0);
            }
        }
        Ok(z)
    }

    fn sample_index(cum: &[f64], rng: &mut (impl Rng + ?Sized)) -> u32 {
        let total = *cum.last().expect("nonempty");
        let u: f64 = rng.random::<f64>() * total;
        cum.partition_point(|&c| c < u).min(cum.len() - 1) as u32
    }

    /// The mark vector for a cluster of size `v` at a forced generation
    /// index `i`: `v` i.i.d. progeny counts of depth `i`, conditioned not
    /// all zero.
    pub fn sample_t_at_index<R: Rng + ?Sized>(
        &self,
        v: u64,
        i: u32,
        rng: &mut R,
    ) -> Result<Vec<u64>, LimitError> {
        for _ in 0..DEFAULT_REJECTION_BUDGET {
            let draw: Result<Vec<u64>, LimitError> =
                (0..v).map(|_| self.sample_z_i(i, rng)).collect();
            let draw = draw?;
            if draw.iter().any(|&t| t > 0) {
                return Ok(draw);
            }
        }
        Err(LimitError::MarkRejectionBudget)
    }

    /// Draws `T | V = v` through the generation-index mixture.
    pub fn sample_t_given_v<R: Rng + ?Sized>(
        &self,
        v: u64,
        rng: &mut R,
    ) -> Result<Vec<u64>, LimitError> {
        let idx = self
            .v_values
            .iter()
            .position(|&val| val == v)
            .unwrap_or_else(|| panic!("v = {v} outside the tabulated support"));
        let i = Self::sample_index(&self.t_index_cum[idx], rng);
        self.sample_t_at_index(v, i, rng)
    }

    /// Scalar multiplicity mark for the iid decoration:
    /// `P(T = y) = (1/r) sum_i mu^-i P(Z_i = y)`, `y >= 1`.
    pub fn sample_t_scalar<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<u64, LimitError> {
        let i = Self::sample_index(&self.iid_index_cum, rng);
        for _ in 0..DEFAULT_REJECTION_BUDGET {
            let z = self.sample_z_i(i, rng)?;
            if z > 0 {
                return Ok(z);
            }
        }
        Err(LimitError::MarkRejectionBudget)
    }
}

/// Random scale: the martingale limit `W`, or a frozen constant (`W == 1`
/// turns the limit into a strictly alpha-stable process).
#[derive(Debug, Clone)]
pub enum WScale {
    Frozen(f64),
    Martingale(MartingaleLimitSampler),
}

impl WScale {
    pub fn frozen(w: f64) -> Result<Self, LimitError> {
        if !(w > 0.0 && w.is_finite()) {
            return Err(LimitError::NonpositiveW { w });
        }
        Ok(WScale::Frozen(w))
    }

    pub fn unit() -> Self {
        WScale::Frozen(1.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64, LimitError> {
        let w = match self {
            WScale::Frozen(w) => *w,
            WScale::Martingale(sampler) => sampler.sample(rng)?,
        };
        if w > 0.0 {
            Ok(w)
        } else {
            Err(LimitError::NonpositiveW { w })
        }
    }
}

/// Everything needed to draw the limiting point process for one model.
#[derive(Debug, Clone)]
pub struct SscdpppSpec {
    model: DisplacementModel,
    vt: VtLaw,
}

impl SscdpppSpec {
    pub fn new(model: DisplacementModel, offspring: OffspringLaw) -> Result<Self, LimitError> {
        if let Some(dim) = model.dim_bound() {
            match offspring.support_max() {
                Some(max) if max as usize <= dim => {}
                _ => return Err(LimitError::UnboundedOffspringForPolar { dim }),
            }
        }
        Ok(SscdpppSpec {
            vt: VtLaw::new(offspring, None)?,
            model,
        })
    }

    pub fn model(&self) -> &DisplacementModel {
        &self.model
    }

    pub fn vt(&self) -> &VtLaw {
        &self.vt
    }

    /// Deterministic part of the random scale: `r` for iid decorations,
    /// `s / mu` for polar ones.
    pub fn scale_constant(&self) -> f64 {
        match self.model {
            DisplacementModel::Iid { .. } => self.vt.r,
            DisplacementModel::Polar { .. } => self.vt.s / self.vt.mu,
        }
    }

    /// `(scale_constant * w)^(1/alpha)`.
    pub fn scale_factor(&self, w: f64) -> f64 {
        root_alpha(self.scale_constant() * w, self.model.alpha())
    }
}

/// Angular or sign mark attached to one Poisson radial point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClusterMark {
    /// +-1 sign for axis-concentrated (iid) intensities.
    Sign(f64),
    /// Index into the angular measure's atom list.
    Angular(usize),
}

/// Radial Poisson series for the intensity `tail_constant * m_alpha`:
/// points `j_l = (c / Gamma_l)^(1/alpha)` for unit-rate arrivals
/// `Gamma_1 < Gamma_2 < ...`, stopped at the first point below `r_min`,
/// each paired with an independent sign or angular mark.
pub fn sample_poisson_series<R: Rng + ?Sized>(
    model: &DisplacementModel,
    r_min: f64,
    rng: &mut R,
) -> Result<Vec<(f64, ClusterMark)>, LimitError> {
    assert!(r_min > 0.0, "series threshold must be positive");
    let alpha = model.alpha();
    let c = model.tail_constant();
    let expected = c * r_min.powf(-alpha);
    if expected > 5e7 {
        return Err(LimitError::SeriesBudget {
            threshold: r_min,
            expected,
        });
    }
    let mut points = Vec::new();
    let mut gamma = 0.0f64;
    loop {
        let step: f64 = Exp1.sample(rng);
        gamma += step;
        let j = root_alpha(c / gamma, alpha);
        if j < r_min {
            break;
        }
        let mark = match model {
            DisplacementModel::Iid { scalar } => {
                let sign = if scalar.spec.p >= 1.0 || rng.random::<f64>() < scalar.spec.p {
                    1.0
                } else {
                    -1.0
                };
                ClusterMark::Sign(sign)
            }
            DisplacementModel::Polar { angular, .. } => {
                ClusterMark::Angular(angular.sample_index(rng))
            }
        };
        points.push((j, mark));
    }
    Ok(points)
}

/// One draw of the limiting process, restricted to clusters whose scale
/// reaches `threshold`.
///
/// The random scale is realized first, then the Poisson series is extended
/// adaptively until its next point falls below `threshold / scale`; since
/// every decoration atom has modulus at most 1, every discarded atom lies
/// below `threshold` with certainty. Atoms the decoration places below the
/// threshold are kept, so the draw restricted to `|x| >= threshold` has
/// exactly the limit law.
pub fn sample_n_star<R: Rng + ?Sized>(
    spec: &SscdpppSpec,
    w_scale: &WScale,
    threshold: f64,
    rng: &mut R,
) -> Result<PointMeasure, LimitError> {
    assert!(threshold > 0.0, "observation threshold must be positive");
    let w = w_scale.sample(rng)?;
    let scale = spec.scale_factor(w);
    let r_min = threshold / scale;
    let series = sample_poisson_series(&spec.model, r_min, rng)?;

    let mut atoms: Vec<(f64, u64)> = Vec::new();
    for (j, mark) in series {
        match mark {
            ClusterMark::Sign(sign) => {
                let t = spec.vt.sample_t_scalar(rng)?;
                atoms.push((scale * j * sign, t));
            }
            ClusterMark::Angular(idx) => {
                let v = spec.vt.sample_v(rng);
                let t = spec.vt.sample_t_given_v(v, rng)?;
                let dir = match &spec.model {
                    DisplacementModel::Polar { angular, .. } => &angular.atoms()[idx].dir,
                    DisplacementModel::Iid { .. } => unreachable!("mark kinds match model"),
                };
                for (k, &mult) in t.iter().enumerate() {
                    let coord = dir[k];
                    if mult > 0 && coord != 0.0 {
                        atoms.push((scale * j * coord, mult));
                    }
                }
            }
        }
    }
    Ok(PointMeasure::new(atoms)?)
}

/// Generic scale-decorated Poisson point process: Poisson scales from the
/// series representation of `radial_constant * m_alpha`, each multiplied
/// into an independent decoration draw.
///
/// The decoration sampler must emit measures whose atoms are bounded above
/// by `decoration_sup` in modulus; this makes the truncation at
/// `threshold` exact.
pub fn sample_scdppp<R, D>(
    radial_constant: f64,
    alpha: f64,
    mut decoration: D,
    decoration_sup: f64,
    threshold: f64,
    rng: &mut R,
) -> Result<PointMeasure, LimitError>
where
    R: Rng + ?Sized,
    D: FnMut(&mut R) -> Result<PointMeasure, LimitError>,
{
    assert!(threshold > 0.0 && decoration_sup > 0.0);
    let expected = radial_constant * (threshold / decoration_sup).powf(-alpha);
    if expected > 5e7 {
        return Err(LimitError::SeriesBudget {
            threshold,
            expected,
        });
    }
    let mut gamma = 0.0f64;
    let mut parts = Vec::new();
    loop {
        let step: f64 = Exp1.sample(rng);
        gamma += step;
        let j = root_alpha(radial_constant / gamma, alpha);
        if j * decoration_sup < threshold {
            break;
        }
        parts.push(decoration(rng)?.scale(j)?);
    }
    Ok(PointMeasure::superpose(parts.iter())?)
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaMethod {
    ClosedFormIid,
    MonteCarlo { x_grid: Vec<f64>, reps: u64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct KappaPoint {
    pub x: f64,
    pub value: f64,
    pub std_error: f64,
}

/// The constant governing the Frechet-type law of the rightmost particle.
#[derive(Debug, Clone, Serialize)]
pub struct KappaResult {
    pub value: f64,
    pub method: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub per_point: Vec<KappaPoint>,
}

/// The rightmost-particle constant `kappa`.
///
/// Closed form (iid displacements): `p * sum_i mu^-i P(Z_i > 0)`, the
/// tail-balance weight entering because only right tails contribute to the
/// rightmost particle. Monte Carlo (any model): freeze `W = 1`, estimate
/// `-log P(N(x, inf) = 0) * x^alpha` on a grid and pool by inverse
/// variance.
pub fn kappa_lambda<R: Rng + ?Sized>(
    spec: &SscdpppSpec,
    method: &KappaMethod,
    rng: &mut R,
) -> Result<KappaResult, LimitError> {
    match method {
        KappaMethod::ClosedFormIid => {
            let scalar = spec.model().scalar().ok_or(LimitError::RequiresIid)?;
            let law = spec.vt().offspring();
            let mu = law.mean();
            let mut acc = 0.0;
            let mut q = 0.0;
            let mut weight = 1.0;
            for _ in 0..2_000_000u32 {
                acc += weight * (1.0 - q);
                // remaining tail is at most weight/(mu - 1)
                if weight / (mu - 1.0) < 1e-13 * acc {
                    return Ok(KappaResult {
                        value: scalar.spec.p * acc,
                        method: "closed_form_iid",
                        std_error: None,
                        per_point: Vec::new(),
                    });
                }
                q = law.pgf(q);
                weight /= mu;
            }
            Err(LimitError::TruncationNotConverged)
        }
        KappaMethod::MonteCarlo { x_grid, reps } => {
            assert!(!x_grid.is_empty() && *reps >= 2);
            let threshold = x_grid.iter().copied().fold(f64::INFINITY, f64::min) * 0.999;
            let alpha = spec.model().alpha();
            let mut zero_counts = vec![0u64; x_grid.len()];
            for _ in 0..*reps {
                let draw = sample_n_star(spec, &WScale::unit(), threshold, rng)?;
                for (slot, &x) in zero_counts.iter_mut().zip(x_grid) {
                    if draw.count_exceedances(x).0 == 0 {
                        *slot += 1;
                    }
                }
            }
            let mut per_point = Vec::with_capacity(x_grid.len());
            let mut inv_var_sum = 0.0;
            let mut weighted = 0.0;
            for (&x, &zeros) in x_grid.iter().zip(&zero_counts) {
                if zeros == 0 {
                    return Err(LimitError::DegenerateZeroFraction { x });
                }
                let p0 = zeros as f64 / *reps as f64;
                let xa = x.powf(alpha);
                let value = -p0.ln() * xa;
                let std_error = xa * ((1.0 - p0) / (p0 * *reps as f64)).sqrt();
                if std_error > 0.0 {
                    inv_var_sum += std_error.powi(-2);
                    weighted += value * std_error.powi(-2);
                }
                per_point.push(KappaPoint {
                    x,
                    value,
                    std_error,
                });
            }
            let (value, std_error) = if inv_var_sum > 0.0 {
                (weighted / inv_var_sum, inv_var_sum.sqrt().recip())
            } else {
                (per_point[0].value, 0.0)
            };
            Ok(KappaResult {
                value,
                method: "monte_carlo",
                std_error: Some(std_error),
                per_point,
            })
        }
    }
}
