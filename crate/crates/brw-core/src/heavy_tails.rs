//! Regularly varying displacement models.
//!
//! Scalar draws have an exact power tail (`P(|X| > x) = x^-alpha` for
//! `x >= 1`) with tail-balance weights `p`/`q`, so the normalizing
//! sequences and the limit intensity of the scaled displacement vector are
//! closed-form and every tail statement in the validation suites has an
//! analytic oracle. Two joint families ship: independent coordinates
//! (limit intensity concentrated on the axes) and a polar family
//! `R * eta` with Pareto radius and an atomic angular measure on the
//! sup-norm unit sphere.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),
    #[error("query threshold must be positive, got {0}")]
    NonpositiveThreshold(f64),
    #[error("query constrains coordinate {coord} but the model has dimension {dim}")]
    CoordinateOutOfRange { coord: usize, dim: usize },
    #[error("requested {count} coordinates from a polar model of dimension {dim}")]
    VectorTooLong { count: usize, dim: usize },
    #[error("queries must constrain at least one coordinate")]
    EmptyQuery,
}

/// Tail index and balance: `P(X > x) / P(|X| > x) -> p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailIndexSpec {
    pub alpha: f64,
    pub p: f64,
}

impl TailIndexSpec {
    pub fn new(alpha: f64, p: f64) -> Result<Self, ModelError> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(ModelError::InvalidParameter(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(ModelError::InvalidParameter(format!(
                "tail weight p must lie in [0,1], got {p}"
            )));
        }
        Ok(TailIndexSpec { alpha, p })
    }

    pub fn q(&self) -> f64 {
        1.0 - self.p
    }
}

/// `x^(1/alpha)` with the exponents that matter kept exact.
pub(crate) fn root_alpha(x: f64, alpha: f64) -> f64 {
    if alpha == 1.0 {
        x
    } else if alpha == 2.0 {
        x.sqrt()
    } else {
        x.powf(1.0 / alpha)
    }
}

/// Scalar law with an exact Pareto modulus: `P(|X| > x) = x^-alpha` for
/// `x >= 1`, sign `+1` with probability `p` independent of the modulus.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScalarHeavyLaw {
    pub spec: TailIndexSpec,
}

impl ScalarHeavyLaw {
    pub fn pareto(alpha: f64, p: f64) -> Result<Self, ModelError> {
        Ok(ScalarHeavyLaw {
            spec: TailIndexSpec::new(alpha, p)?,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
        let modulus = root_alpha(u.recip(), self.spec.alpha);
        if self.spec.p >= 1.0 || rng.random::<f64>() < self.spec.p {
            modulus
        } else {
            -modulus
        }
    }

    /// `nu_alpha((t, inf))` for t > 0.
    pub fn right_tail(&self, t: f64) -> f64 {
        self.spec.p * t.powf(-self.spec.alpha)
    }

    /// `nu_alpha((-inf, -t))` for t > 0.
    pub fn left_tail(&self, t: f64) -> f64 {
        self.spec.q() * t.powf(-self.spec.alpha)
    }
}

/// Atomic probability measure on the sup-norm unit sphere.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "Vec<AngularAtom>", into = "Vec<AngularAtom>")]
pub struct AngularMeasure {
    atoms: Vec<AngularAtom>,
    dim: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AngularAtom {
    pub dir: Vec<f64>,
    pub w: f64,
}

impl TryFrom<Vec<AngularAtom>> for AngularMeasure {
    type Error = ModelError;
    fn try_from(atoms: Vec<AngularAtom>) -> Result<Self, ModelError> {
        AngularMeasure::new(atoms)
    }
}

impl From<AngularMeasure> for Vec<AngularAtom> {
    fn from(m: AngularMeasure) -> Vec<AngularAtom> {
        m.atoms
    }
}

impl AngularMeasure {
    pub fn new(atoms: Vec<AngularAtom>) -> Result<Self, ModelError> {
        if atoms.is_empty() {
            return Err(ModelError::InvalidParameter(
                "angular measure needs at least one atom".into(),
            ));
        }
        let dim = atoms[0].dir.len();
        if dim == 0 {
            return Err(ModelError::InvalidParameter(
                "angular atoms must have positive dimension".into(),
            ));
        }
        let mut total = 0.0;
        for atom in &atoms {
            if atom.dir.len() != dim {
                return Err(ModelError::InvalidParameter(
                    "angular atoms must share one dimension".into(),
                ));
            }
            let sup = atom.dir.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
            if (sup - 1.0).abs() > 1e-12 {
                return Err(ModelError::InvalidParameter(format!(
                    "angular atom must have sup-norm 1, got {sup}"
                )));
            }
            if !(atom.w >= 0.0 && atom.w.is_finite()) {
                return Err(ModelError::InvalidParameter(format!(
                    "angular weight {} invalid",
                    atom.w
                )));
            }
            total += atom.w;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(ModelError::InvalidParameter(format!(
                "angular weights sum to {total}, expected 1"
            )));
        }
        Ok(AngularMeasure { atoms, dim })
    }

    pub fn diagonal(dim: usize) -> Self {
        AngularMeasure::new(vec![AngularAtom {
            dir: vec![1.0; dim],
            w: 1.0,
        }])
        .expect("diagonal atom is valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[AngularAtom] {
        &self.atoms
    }

    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let mut u: f64 = rng.random();
        for (i, atom) in self.atoms.iter().enumerate() {
            if u < atom.w {
                return i;
            }
            u -= atom.w;
        }
        self.atoms.len() - 1
    }
}

/// Joint law of the displacements of one family of children.
///
/// `Iid`: independent copies of the scalar law; the limit intensity
/// charges only the coordinate axes. `Polar`: `X = R * eta` with
/// `P(R > r) = c r^-alpha` and `eta ~ Theta`; requires offspring bounded
/// by the model dimension, and identical marginals across coordinates
/// (the angular measure must weigh every coordinate equally).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "DisplacementConfig", into = "DisplacementConfig")]
pub enum DisplacementModel {
    Iid {
        scalar: ScalarHeavyLaw,
    },
    Polar {
        dim: usize,
        alpha: f64,
        radial_scale: f64,
        angular: AngularMeasure,
    },
}

/// Wire format: `{"kind":"iid","alpha":..,"p":..}` or
/// `{"kind":"polar","alpha":..,"B":..,"c":..,"angular":[{"dir":[..],"w":..}]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DisplacementConfig {
    pub kind: String,
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(rename = "B", skip_serializing_if = "Option::is_none")]
    pub b: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angular: Option<Vec<AngularAtom>>,
}

impl TryFrom<DisplacementConfig> for DisplacementModel {
    type Error = ModelError;
    fn try_from(cfg: DisplacementConfig) -> Result<Self, ModelError> {
        match cfg.kind.as_str() {
            "iid" => DisplacementModel::iid(cfg.alpha, cfg.p.unwrap_or(1.0)),
            "polar" => {
                let atoms = cfg.angular.ok_or_else(|| {
                    ModelError::InvalidParameter("polar model requires \"angular\"".into())
                })?;
                let angular = AngularMeasure::new(atoms)?;
                let dim = cfg.b.unwrap_or(angular.dim());
                DisplacementModel::polar(dim, cfg.alpha, cfg.c.unwrap_or(1.0), angular)
            }
            other => Err(ModelError::InvalidParameter(format!(
                "unknown displacement kind {other:?}"
            ))),
        }
    }
}

impl From<DisplacementModel> for DisplacementConfig {
    fn from(model: DisplacementModel) -> DisplacementConfig {
        match model {
            DisplacementModel::Iid { scalar } => DisplacementConfig {
                kind: "iid".into(),
                alpha: scalar.spec.alpha,
                p: Some(scalar.spec.p),
                b: None,
                c: None,
                angular: None,
            },
            DisplacementModel::Polar {
                dim,
                alpha,
                radial_scale,
                angular,
            } => DisplacementConfig {
                kind: "polar".into(),
                alpha,
                p: None,
                b: Some(dim),
                c: Some(radial_scale),
                angular: Some(angular.atoms.clone()),
            },
        }
    }
}

impl DisplacementModel {
    pub fn iid(alpha: f64, p: f64) -> Result<Self, ModelError> {
        Ok(DisplacementModel::Iid {
            scalar: ScalarHeavyLaw::pareto(alpha, p)?,
        })
    }

    pub fn polar(
        dim: usize,
        alpha: f64,
        radial_scale: f64,
        angular: AngularMeasure,
    ) -> Result<Self, ModelError> {
        TailIndexSpec::new(alpha, 1.0)?;
        if !(radial_scale > 0.0 && radial_scale.is_finite()) {
            return Err(ModelError::InvalidParameter(format!(
                "radial scale must be positive, got {radial_scale}"
            )));
        }
        if angular.dim() != dim {
            return Err(ModelError::InvalidParameter(format!(
                "angular atoms have dimension {}, expected {dim}",
                angular.dim()
            )));
        }
        let model = DisplacementModel::Polar {
            dim,
            alpha,
            radial_scale,
            angular,
        };
        // The theory assumes identically distributed marginals; an angular
        // measure that weighs coordinates unequally breaks that.
        let t = 1.0;
        let reference_right = model.marginal_right_tail(0, t)?;
        let reference_left = model.marginal_left_tail(0, t)?;
        if let DisplacementModel::Polar { dim, .. } = &model {
            for k in 1..*dim {
                let r = model.marginal_right_tail(k, t)?;
                let l = model.marginal_left_tail(k, t)?;
                if (r - reference_right).abs() > 1e-9 || (l - reference_left).abs() > 1e-9 {
                    return Err(ModelError::InvalidParameter(
                        "angular measure induces unequal coordinate marginals".into(),
                    ));
                }
            }
        }
        Ok(model)
    }

    pub fn alpha(&self) -> f64 {
        match self {
            DisplacementModel::Iid { scalar } => scalar.spec.alpha,
            DisplacementModel::Polar { alpha, .. } => *alpha,
        }
    }

    /// Radial tail constant: `lambda(|x| > t) = tail_constant * t^-alpha`.
    pub fn tail_constant(&self) -> f64 {
        match self {
            DisplacementModel::Iid { .. } => 1.0,
            DisplacementModel::Polar { radial_scale, .. } => *radial_scale,
        }
    }

    /// Dimension bound for polar models; iid models are unconstrained.
    pub fn dim_bound(&self) -> Option<usize> {
        match self {
            DisplacementModel::Iid { .. } => None,
            DisplacementModel::Polar { dim, .. } => Some(*dim),
        }
    }

    pub fn scalar(&self) -> Option<&ScalarHeavyLaw> {
        match self {
            DisplacementModel::Iid { scalar } => Some(scalar),
            DisplacementModel::Polar { .. } => None,
        }
    }

    /// One joint displacement draw for `count` children. The children of a
    /// single parent share one draw: independent scalars for `Iid`, a
    /// single `R * eta` for `Polar`.
    pub fn sample_vector<R: Rng + ?Sized>(
        &self,
        count: usize,
        rng: &mut R,
    ) -> Result<Vec<f64>, ModelError> {
        match self {
            DisplacementModel::Iid { scalar } => {
                Ok((0..count).map(|_| scalar.sample(rng)).collect())
            }
            DisplacementModel::Polar {
                dim,
                alpha,
                radial_scale,
                angular,
            } => {
                if count > *dim {
                    return Err(ModelError::VectorTooLong {
                        count,
                        dim: *dim,
                    });
                }
                if count == 0 {
                    return Ok(Vec::new());
                }
                let u: f64 = 1.0 - rng.random::<f64>();
                let radius = root_alpha(radial_scale / u, *alpha);
                let dir = &angular.atoms[angular.sample_index(rng)].dir;
                Ok(dir[..count].iter().map(|&e| radius * e).collect())
            }
        }
    }

    fn marginal_right_tail(&self, coord: usize, t: f64) -> Result<f64, ModelError> {
        self.lambda(&RectQuery::half_space(coord, Side::Right, t)?)
    }

    fn marginal_left_tail(&self, coord: usize, t: f64) -> Result<f64, ModelError> {
        self.lambda(&RectQuery::half_space(coord, Side::Left, t)?)
    }

    /// Analytic limit intensity `lambda(set)` for rectangular queries.
    pub fn lambda(&self, query: &RectQuery) -> Result<f64, ModelError> {
        let mut total = 0.0;
        // inclusion-exclusion over the union of conjunctions
        let m = query.clauses.len();
        assert!(m <= 20, "union too large");
        for mask in 1u32..(1 << m) {
            let mut merged: Vec<HalfSpace> = Vec::new();
            for (i, clause) in query.clauses.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    merged.extend_from_slice(clause);
                }
            }
            let sign = if mask.count_ones() % 2 == 1 { 1.0 } else { -1.0 };
            total += sign * self.lambda_conjunction(&merged)?;
        }
        Ok(total.max(0.0))
    }

    fn lambda_conjunction(&self, constraints: &[HalfSpace]) -> Result<f64, ModelError> {
        if constraints.is_empty() {
            return Err(ModelError::EmptyQuery);
        }
        // reduce to one (side, threshold) pair per coordinate
        let mut reduced: Vec<(usize, Option<f64>, Option<f64>)> = Vec::new();
        for hs in constraints {
            if let Some(dim) = self.dim_bound() {
                if hs.coord >= dim {
                    return Err(ModelError::CoordinateOutOfRange {
                        coord: hs.coord,
                        dim,
                    });
                }
            }
            let entry = match reduced.iter_mut().find(|(c, _, _)| *c == hs.coord) {
                Some(e) => e,
                None => {
                    reduced.push((hs.coord, None, None));
                    reduced.last_mut().expect("just pushed")
                }
            };
            match hs.side {
                Side::Right => entry.1 = Some(entry.1.map_or(hs.threshold, |t: f64| t.max(hs.threshold))),
                Side::Left => entry.2 = Some(entry.2.map_or(hs.threshold, |t: f64| t.max(hs.threshold))),
            }
        }
        // both sides on one coordinate is an empty set
        if reduced.iter().any(|(_, r, l)| r.is_some() && l.is_some()) {
            return Ok(0.0);
        }

        match self {
            DisplacementModel::Iid { scalar } => {
                if reduced.len() >= 2 {
                    // axis-concentrated intensity: a second constrained
                    // coordinate forces a nonzero off-axis value
                    return Ok(0.0);
                }
                let (_, right, left) = reduced[0];
                Ok(match (right, left) {
                    (Some(t), None) => scalar.right_tail(t),
                    (None, Some(t)) => scalar.left_tail(t),
                    _ => unreachable!("one side present"),
                })
            }
            DisplacementModel::Polar {
                alpha,
                radial_scale,
                angular,
                ..
            } => {
                let mut mass = 0.0;
                for atom in angular.atoms() {
                    let mut r_min = 0.0f64;
                    let mut feasible = true;
                    for &(coord, right, left) in &reduced {
                        let e = atom.dir[coord];
                        let needed = match (right, left) {
                            (Some(t), None) => {
                                if e > 0.0 {
                                    t / e
                                } else {
                                    feasible = false;
                                    break;
                                }
                            }
                            (None, Some(t)) => {
                                if e < 0.0 {
                                    t / -e
                                } else {
                                    feasible = false;
                                    break;
                                }
                            }
                            _ => unreachable!("one side present"),
                        };
                        r_min = r_min.max(needed);
                    }
                    if feasible && r_min > 0.0 {
                        mass += atom.w * r_min.powf(-alpha);
                    }
                }
                Ok(radial_scale * mass)
            }
        }
    }

    /// Returns `(lambda(b * set), b^-alpha * lambda(set))`; the two agree
    /// up to floating error by the homogeneity of the limit intensity.
    pub fn homogeneity_check(
        &self,
        query: &RectQuery,
        b: f64,
    ) -> Result<(f64, f64), ModelError> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(ModelError::NonpositiveThreshold(b));
        }
        let lhs = self.lambda(&query.scale(b))?;
        let rhs = b.powf(-self.alpha()) * self.lambda(query)?;
        Ok((lhs, rhs))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `{x_coord > t}`
    Right,
    /// `{x_coord < -t}`
    Left,
}

/// One half-space constraint `{x_coord > t}` or `{x_coord < -t}`, `t > 0`.
#[derive(Debug, Clone, Copy)]
pub struct HalfSpace {
    pub coord: usize,
    pub side: Side,
    pub threshold: f64,
}

impl HalfSpace {
    pub fn new(coord: usize, side: Side, threshold: f64) -> Result<Self, ModelError> {
        if !(threshold > 0.0 && threshold.is_finite()) {
            return Err(ModelError::NonpositiveThreshold(threshold));
        }
        Ok(HalfSpace {
            coord,
            side,
            threshold,
        })
    }
}

/// Finite union of intersections of coordinate half-spaces, all bounded
/// away from zero.
#[derive(Debug, Clone)]
pub struct RectQuery {
    clauses: Vec<Vec<HalfSpace>>,
}

impl RectQuery {
    pub fn half_space(coord: usize, side: Side, threshold: f64) -> Result<Self, ModelError> {
        Ok(RectQuery {
            clauses: vec![vec![HalfSpace::new(coord, side, threshold)?]],
        })
    }

    pub fn conjunction(constraints: Vec<HalfSpace>) -> Result<Self, ModelError> {
        if constraints.is_empty() {
            return Err(ModelError::EmptyQuery);
        }
        Ok(RectQuery {
            clauses: vec![constraints],
        })
    }

    pub fn union(queries: Vec<RectQuery>) -> Result<Self, ModelError> {
        let clauses: Vec<_> = queries.into_iter().flat_map(|q| q.clauses).collect();
        if clauses.is_empty() {
            return Err(ModelError::EmptyQuery);
        }
        Ok(RectQuery { clauses })
    }

    /// The dilated set `b * set`.
    pub fn scale(&self, b: f64) -> RectQuery {
        RectQuery {
            clauses: self
                .clauses
                .iter()
                .map(|clause| {
                    clause
                        .iter()
                        .map(|hs| HalfSpace {
                            threshold: hs.threshold * b,
                            ..*hs
                        })
                        .collect()
                })
                .collect(),
        }
    }
}

/// Normalizing sequences: `b(n) = (n c)^(1/alpha)` and
/// `c_n = b(floor(mu^n))`, so the n-th generation (of expected size
/// `mu^n`) is scaled on the same footing as a superposition of
/// `floor(mu^n)` displacement draws.
#[derive(Debug, Clone, Copy)]
pub struct ScalingSequence {
    pub alpha: f64,
    pub mu: f64,
    pub c: f64,
}

impl ScalingSequence {
    pub fn new(alpha: f64, mu: f64, c: f64) -> Result<Self, ModelError> {
        if !(alpha > 0.0) || !(mu > 1.0) || !(c > 0.0) {
            return Err(ModelError::InvalidParameter(format!(
                "scaling sequence needs alpha > 0, mu > 1, c > 0; got {alpha}, {mu}, {c}"
            )));
        }
        Ok(ScalingSequence { alpha, mu, c })
    }

    pub fn b(&self, n: f64) -> f64 {
        root_alpha(n * self.c, self.alpha)
    }

    /// `c_n = b(floor(mu^n))`. The count `mu^n` is carried in f64 (it can
    /// exceed u64 well inside the usable range of n).
    pub fn c_n(&self, n: u32) -> f64 {
        let count = self.mu.powi(n as i32).floor();
        self.b(count)
    }
}
