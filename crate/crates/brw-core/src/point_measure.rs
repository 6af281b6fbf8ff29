//! Finite point measures on the punctured line and Laplace-functional
//! estimators.
//!
//! A [`PointMeasure`] is a finite multiset of nonzero real atoms held in
//! canonical form (locations sorted ascending, equal locations merged), so
//! exceedance queries are binary searches and serialization is
//! deterministic. Mass at zero or at infinity is rejected at construction.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("atom location must be nonzero and finite, got {0}")]
    InvalidLocation(f64),
    #[error("atom multiplicity must be >= 1")]
    ZeroMultiplicity,
    #[error("scale factor must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("invalid test function: {0}")]
    InvalidTestFunction(String),
    #[error("laplace estimation needs at least 2 replications, got {0}")]
    TooFewReps(u64),
}

/// Radii of the fixed annulus grid used as the surrogate process-distance
/// signature: exceedance cells at +-2^k for k = -2..=6.
pub const ANNULUS_GRID: [f64; 9] = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0];

/// Finite point measure on `R \ {0}` in canonical merged form.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointMeasure {
    atoms: Vec<(f64, u64)>,
}

impl PointMeasure {
    pub fn empty() -> Self {
        PointMeasure::default()
    }

    /// Builds the canonical form: validates atoms, sorts by location and
    /// merges duplicates.
    pub fn new(mut atoms: Vec<(f64, u64)>) -> Result<Self, MeasureError> {
        for &(x, m) in &atoms {
            if x == 0.0 || !x.is_finite() {
                return Err(MeasureError::InvalidLocation(x));
            }
            if m == 0 {
                return Err(MeasureError::ZeroMultiplicity);
            }
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, u64)> = Vec::with_capacity(atoms.len());
        for (x, m) in atoms {
            match merged.last_mut() {
                Some((last, mult)) if *last == x => *mult += m,
                _ => merged.push((x, m)),
            }
        }
        Ok(PointMeasure { atoms: merged })
    }

    pub fn from_locations<I: IntoIterator<Item = f64>>(locs: I) -> Result<Self, MeasureError> {
        PointMeasure::new(locs.into_iter().map(|x| (x, 1)).collect())
    }

    pub fn singleton(location: f64) -> Result<Self, MeasureError> {
        PointMeasure::new(vec![(location, 1)])
    }

    pub fn atoms(&self) -> &[(f64, u64)] {
        &self.atoms
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Total mass (sum of multiplicities), saturating at `u64::MAX`.
    pub fn total_mass(&self) -> u64 {
        self.atoms
            .iter()
            .fold(0u64, |acc, &(_, m)| acc.saturating_add(m))
    }

    /// `S_b`: multiply every atom location by `b > 0`.
    pub fn scale(&self, b: f64) -> Result<PointMeasure, MeasureError> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(MeasureError::InvalidScale(b));
        }
        PointMeasure::new(self.atoms.iter().map(|&(x, m)| (x * b, m)).collect())
    }

    /// Superposition: multiset union with multiplicity addition.
    pub fn superpose<'a, I: IntoIterator<Item = &'a PointMeasure>>(
        measures: I,
    ) -> Result<PointMeasure, MeasureError> {
        let mut atoms = Vec::new();
        for m in measures {
            atoms.extend_from_slice(&m.atoms);
        }
        PointMeasure::new(atoms)
    }

    /// `N(f)` for an arbitrary integrand.
    pub fn integrate_with<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.atoms.iter().map(|&(x, m)| m as f64 * f(x)).sum()
    }

    /// `N(f)` for a ramp test function.
    pub fn integrate(&self, f: &TestFunction) -> f64 {
        self.integrate_with(|x| f.eval(x))
    }

    /// Counts of mass in `(x, inf)` and `(-inf, -x)`.
    pub fn count_exceedances(&self, x: f64) -> (u64, u64) {
        assert!(x > 0.0, "exceedance level must be positive");
        let above_start = self.atoms.partition_point(|&(loc, _)| loc <= x);
        let above = self.atoms[above_start..]
            .iter()
            .fold(0u64, |a, &(_, m)| a.saturating_add(m));
        let below_end = self.atoms.partition_point(|&(loc, _)| loc < -x);
        let below = self.atoms[..below_end]
            .iter()
            .fold(0u64, |a, &(_, m)| a.saturating_add(m));
        (above, below)
    }

    pub fn rightmost(&self) -> Option<f64> {
        self.atoms.last().map(|&(x, _)| x)
    }

    pub fn leftmost(&self) -> Option<f64> {
        self.atoms.first().map(|&(x, _)| x)
    }

    /// Exceedance-cell counts on the annulus grid, restricted to cells whose
    /// inner radius is at least `min_radius`. Cells are
    /// `(g_k, g_{k+1}]` for consecutive grid radii plus the unbounded tail,
    /// on the positive side and mirrored on the negative side.
    pub fn annulus_signature(&self, min_radius: f64) -> Vec<u64> {
        let radii: Vec<f64> = ANNULUS_GRID
            .iter()
            .copied()
            .filter(|&g| g >= min_radius)
            .collect();
        let mut sig = Vec::with_capacity(2 * radii.len());
        for (i, &g) in radii.iter().enumerate() {
            let (above, _) = self.count_exceedances(g);
            let outer = radii.get(i + 1).map(|&h| self.count_exceedances(h).0);
            sig.push(above - outer.unwrap_or(0));
        }
        for (i, &g) in radii.iter().enumerate() {
            let (_, below) = self.count_exceedances(g);
            let outer = radii.get(i + 1).map(|&h| self.count_exceedances(h).1);
            sig.push(below - outer.unwrap_or(0));
        }
        sig
    }

    /// CSV serialization: one `location,multiplicity` line per atom.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "location,multiplicity")?;
        for &(x, m) in &self.atoms {
            writeln!(out, "{x},{m}")?;
        }
        Ok(())
    }
}

/// Continuous ramp test function
/// `f(x) = theta * clamp((|x| - a) / w, 0, 1)`: nonnegative, bounded by
/// `theta`, vanishing on `(-a, a)`, so it is a legitimate test function
/// for point processes on the punctured line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestFunction {
    pub a: f64,
    pub w: f64,
    pub theta: f64,
}

impl TestFunction {
    pub fn new(a: f64, w: f64, theta: f64) -> Result<Self, MeasureError> {
        if !(a > 0.0 && w > 0.0 && theta > 0.0)
            || !(a.is_finite() && w.is_finite() && theta.is_finite())
        {
            return Err(MeasureError::InvalidTestFunction(format!(
                "need a, w, theta positive and finite; got {a}, {w}, {theta}"
            )));
        }
        Ok(TestFunction { a, w, theta })
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.theta * ((x.abs() - self.a) / self.w).clamp(0.0, 1.0)
    }

    /// Label used in report tables.
    pub fn id(&self) -> String {
        format!("ramp(a={},w={},theta={})", self.a, self.w, self.theta)
    }
}

/// Monte Carlo estimate of a Laplace functional, always in [0, 1].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LaplaceEstimate {
    pub value: f64,
    pub std_error: f64,
    pub reps: u64,
}

pub(crate) fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Empirical Laplace functional `E exp(-N(f))` over `reps` fresh samples.
pub fn estimate_laplace<R: Rng + ?Sized, S: FnMut(&mut R) -> PointMeasure>(
    mut sampler: S,
    f: &TestFunction,
    reps: u64,
    rng: &mut R,
) -> Result<LaplaceEstimate, MeasureError> {
    if reps < 2 {
        return Err(MeasureError::TooFewReps(reps));
    }
    let values: Vec<f64> = (0..reps)
        .map(|_| (-sampler(rng).integrate(f)).exp())
        .collect();
    let (value, std_error) = mean_and_se(&values);
    Ok(LaplaceEstimate {
        value,
        std_error,
        reps,
    })
}

/// Scaled Laplace functional `E exp(-int f(x / y) N(dx))`; at `y = 1` this
/// is the plain Laplace functional.
pub fn scaled_laplace<R: Rng + ?Sized, S: FnMut(&mut R) -> PointMeasure>(
    mut sampler: S,
    f: &TestFunction,
    y: f64,
    reps: u64,
    rng: &mut R,
) -> Result<LaplaceEstimate, MeasureError> {
    if !(y > 0.0 && y.is_finite()) {
        return Err(MeasureError::InvalidScale(y));
    }
    if reps < 2 {
        return Err(MeasureError::TooFewReps(reps));
    }
    let values: Vec<f64> = (0..reps)
        .map(|_| (-sampler(rng).integrate_with(|x| f.eval(x / y))).exp())
        .collect();
    let (value, std_error) = mean_and_se(&values);
    Ok(LaplaceEstimate {
        value,
        std_error,
        reps,
    })
}
