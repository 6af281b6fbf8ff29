//! Forward simulation of the branching random walk.
//!
//! A run evolves one generation at a time, keeping only the current
//! particle positions (plus, when requested, each live lineage's multiset
//! of ancestral edge displacements). It produces the extremal point
//! process of scaled generation-n positions, its one-big-jump companion
//! built from single ancestral displacements, and the scaled rightmost
//! position.

use crate::gw::{GwError, OffspringLaw, DEFAULT_POPULATION_CAP};
use crate::heavy_tails::{DisplacementModel, ModelError, ScalingSequence};
use crate::point_measure::{MeasureError, PointMeasure};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("population {population} at generation {generation} exceeds cap {cap}")]
    PopulationCap {
        population: u64,
        generation: u32,
        cap: u64,
    },
    #[error("no surviving run in {attempts} attempts")]
    AttemptsExhausted { attempts: u64 },
    #[error(transparent)]
    Gw(#[from] GwError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// Branching random walk model: offspring law plus the joint displacement
/// law of one family. All children of a parent receive a single
/// displacement-vector draw whose length is that parent's offspring count,
/// drawn independently of the count.
#[derive(Debug, Clone)]
pub struct BrwModel {
    offspring: OffspringLaw,
    displacement: DisplacementModel,
}

impl BrwModel {
    pub fn new(offspring: OffspringLaw, displacement: DisplacementModel) -> Result<Self, SimError> {
        if let Some(dim) = displacement.dim_bound() {
            match offspring.support_max() {
                Some(max) if max as usize <= dim => {}
                _ => {
                    return Err(ModelError::InvalidParameter(format!(
                        "polar displacements of dimension {dim} require an offspring law \
                         bounded by {dim}"
                    ))
                    .into())
                }
            }
        }
        Ok(BrwModel {
            offspring,
            displacement,
        })
    }

    pub fn offspring(&self) -> &OffspringLaw {
        &self.offspring
    }

    pub fn displacement(&self) -> &DisplacementModel {
        &self.displacement
    }

    /// The normalizing sequence matched to this model: alpha and tail
    /// constant from the displacement law, growth rate from the offspring
    /// mean.
    pub fn scaling(&self) -> ScalingSequence {
        ScalingSequence::new(
            self.displacement.alpha(),
            self.offspring.mean(),
            self.displacement.tail_constant(),
        )
        .expect("validated model parameters")
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    /// Track per-lineage ancestral displacements and emit the one-big-jump
    /// process. Costs O(n * Z_n) memory; off by default.
    pub track_big_jumps: bool,
    pub population_cap: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            track_big_jumps: false,
            population_cap: DEFAULT_POPULATION_CAP,
        }
    }
}

impl SimOptions {
    pub fn with_big_jumps() -> Self {
        SimOptions {
            track_big_jumps: true,
            ..Default::default()
        }
    }
}

/// Outcome of one forward run to generation `n`.
#[derive(Debug, Clone)]
pub struct BrwRunResult {
    pub n: u32,
    pub survived: bool,
    pub z_n: u64,
    /// Scaled positions `c_n^-1 S_v` of the generation-n particles.
    pub n_n: PointMeasure,
    /// One-big-jump companion: scaled ancestral edge displacements, one
    /// atom per (surviving particle, ancestral edge) pair. Present only
    /// when big-jump tracking was requested.
    pub n_tilde: Option<PointMeasure>,
    /// `c_n^-1 M_n`, the scaled rightmost position on surviving runs.
    pub m_n_scaled: Option<f64>,
    /// Atoms discarded because they fell exactly at zero (possible only
    /// when a displacement is exactly zero, a null event for the shipped
    /// laws).
    pub dropped_zero_atoms: u64,
}

/// One forward run of `n` generations.
pub fn simulate<R: Rng + ?Sized>(
    model: &BrwModel,
    n: u32,
    rng: &mut R,
    opts: &SimOptions,
) -> Result<BrwRunResult, SimError> {
    assert!(n >= 1, "need at least one generation");
    let mut positions: Vec<f64> = vec![0.0];
    // ancestral edge displacements per live particle, root to particle
    let mut ancestry: Vec<Vec<f64>> = if opts.track_big_jumps {
        vec![Vec::new()]
    } else {
        Vec::new()
    };

    for generation in 1..=n {
        let mut next_positions = Vec::with_capacity(positions.len() * 2);
        let mut next_ancestry = Vec::new();
        let mut bookkeeping_total = 0u64;
        for (idx, &parent_pos) in positions.iter().enumerate() {
            let children = model.offspring.sample(rng);
            bookkeeping_total += children;
            if children == 0 {
                continue;
            }
            let displacements = model
                .displacement
                .sample_vector(children as usize, rng)?;
            for &d in &displacements {
                next_positions.push(parent_pos + d);
                if opts.track_big_jumps {
                    let mut edges = ancestry[idx].clone();
                    edges.push(d);
                    next_ancestry.push(edges);
                }
            }
            if next_positions.len() as u64 > opts.population_cap {
                return Err(SimError::PopulationCap {
                    population: next_positions.len() as u64,
                    generation,
                    cap: opts.population_cap,
                });
            }
        }
        debug_assert_eq!(bookkeeping_total as usize, next_positions.len());
        positions = next_positions;
        ancestry = next_ancestry;
        if positions.is_empty() {
            break;
        }
    }

    let z_n = positions.len() as u64;
    let survived = z_n > 0;
    let c_n = model.scaling().c_n(n);
    let mut dropped = 0u64;

    let mut scaled: Vec<(f64, u64)> = Vec::with_capacity(positions.len());
    for &pos in &positions {
        let x = pos / c_n;
        if x == 0.0 {
            dropped += 1;
        } else {
            scaled.push((x, 1));
        }
    }
    let n_n = PointMeasure::new(scaled)?;

    let n_tilde = if opts.track_big_jumps {
        let mut atoms = Vec::new();
        for edges in &ancestry {
            for &edge in edges {
                let x = edge / c_n;
                if x == 0.0 {
                    dropped += 1;
                } else {
                    atoms.push((x, 1));
                }
            }
        }
        Some(PointMeasure::new(atoms)?)
    } else {
        None
    };

    let m_n_scaled = if survived { n_n.rightmost() } else { None };

    Ok(BrwRunResult {
        n,
        survived,
        z_n,
        n_n,
        n_tilde,
        m_n_scaled,
        dropped_zero_atoms: dropped,
    })
}

/// Rejection-resamples [`simulate`] until the run survives to generation
/// `n`; this realizes conditioning on survival up to the simulated horizon.
pub fn simulate_conditioned<R: Rng + ?Sized>(
    model: &BrwModel,
    n: u32,
    rng: &mut R,
    max_attempts: u64,
    opts: &SimOptions,
) -> Result<BrwRunResult, SimError> {
    assert!(max_attempts >= 1);
    for _ in 0..max_attempts {
        let run = simulate(model, n, rng, opts)?;
        if run.survived {
            return Ok(run);
        }
    }
    Err(SimError::AttemptsExhausted {
        attempts: max_attempts,
    })
}

/// Fraction of conditioned runs whose annulus-grid count vectors (cells
/// with inner radius at least `eps`) differ between the extremal process
/// and its one-big-jump companion. The one-large-jump principle says this
/// fraction vanishes as `n` grows, for every `eps`.
pub fn big_jump_diagnostic<R: Rng + ?Sized>(
    model: &BrwModel,
    n: u32,
    eps: f64,
    reps: u64,
    rng: &mut R,
) -> Result<f64, SimError> {
    assert!(eps > 0.0);
    let opts = SimOptions::with_big_jumps();
    let mut disagreements = 0u64;
    for _ in 0..reps {
        let run = simulate_conditioned(model, n, rng, 1_000_000, &opts)?;
        let tilde = run.n_tilde.as_ref().expect("tracking enabled");
        if run.n_n.annulus_signature(eps) != tilde.annulus_signature(eps) {
            disagreements += 1;
        }
    }
    Ok(disagreements as f64 / reps as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gw::OffspringKind;
    use crate::stats;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn det2_iid() -> BrwModel {
        BrwModel::new(
            OffspringLaw::deterministic(2).unwrap(),
            DisplacementModel::iid(1.0, 1.0).unwrap(),
        )
        .unwrap()
    }

    fn geo_iid() -> BrwModel {
        BrwModel::new(
            OffspringLaw::geometric(2.0 / 3.0).unwrap(),
            DisplacementModel::iid(1.0, 1.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn polar_requires_bounded_offspring() {
        let polar = DisplacementModel::polar(
            2,
            1.0,
            1.0,
            crate::heavy_tails::AngularMeasure::diagonal(2),
        )
        .unwrap();
        assert!(BrwModel::new(OffspringLaw::geometric(2.0 / 3.0).unwrap(), polar.clone()).is_err());
        assert!(BrwModel::new(OffspringLaw::deterministic(2).unwrap(), polar).is_ok());
    }

    #[test]
    fn one_generation_mass_two() {
        let model = det2_iid();
        let mut r = rng(0);
        let run = simulate(&model, 1, &mut r, &SimOptions::default()).unwrap();
        assert_eq!(run.z_n, 2);
        assert_eq!(run.n_n.total_mass(), 2);
        assert!(run.survived);
    }

    #[test]
    fn extinct_runs_are_empty() {
        // table law with mass at zero dies often at n = 6
        let law = OffspringLaw::new(OffspringKind::Table {
            pmf: vec![(0, 0.4), (3, 0.6)],
        })
        .unwrap();
        let model = BrwModel::new(law, DisplacementModel::iid(1.0, 1.0).unwrap()).unwrap();
        let mut r = rng(1);
        let mut saw_extinct = false;
        for _ in 0..100 {
            let run = simulate(&model, 6, &mut r, &SimOptions::default()).unwrap();
            if !run.survived {
                saw_extinct = true;
                assert_eq!(run.z_n, 0);
                assert!(run.n_n.is_empty());
                assert!(run.m_n_scaled.is_none());
            }
        }
        assert!(saw_extinct);
    }

    #[test]
    fn mass_identities_and_scaling_coherence() {
        let model = geo_iid();
        let mut r = rng(2);
        let opts = SimOptions::with_big_jumps();
        for _ in 0..50 {
            let run = simulate(&model, 6, &mut r, &opts).unwrap();
            assert_eq!(run.n_n.total_mass() + run.dropped_zero_atoms, run.z_n);
            let tilde = run.n_tilde.as_ref().unwrap();
            assert_eq!(tilde.total_mass(), 6 * run.z_n);
            if run.survived {
                assert_eq!(run.m_n_scaled, run.n_n.rightmost());
            }
        }
    }

    #[test]
    fn deterministic_population_is_exact() {
        let model = det2_iid();
        let mut r = rng(3);
        let run = simulate(&model, 8, &mut r, &SimOptions::default()).unwrap();
        assert_eq!(run.z_n, 256);
    }

    #[test]
    fn conditioned_runs_survive() {
        let model = geo_iid();
        let mut r = rng(4);
        // expected attempts approach 1 / (1 - q_inf) = 2 for large n
        let mut attempts_total = 0u64;
        let reps = 2_000;
        for _ in 0..reps {
            loop {
                attempts_total += 1;
                let run = simulate(&model, 10, &mut r, &SimOptions::default()).unwrap();
                if run.survived {
                    assert!(run.z_n > 0);
                    break;
                }
            }
        }
        let mean_attempts = attempts_total as f64 / reps as f64;
        assert!(
            (mean_attempts - 2.0).abs() < 0.15,
            "mean attempts {mean_attempts}"
        );

        let run = simulate_conditioned(&model, 10, &mut r, 100_000, &SimOptions::default())
            .unwrap();
        assert!(run.survived);
    }

    #[test]
    fn first_generation_positions_have_exact_pareto_tail() {
        // at n = 1 the scaled positions are X / c_1 with X Pareto(alpha);
        // KS against the analytic cdf, p > 0.001
        let model = det2_iid();
        let c1 = model.scaling().c_n(1);
        assert_eq!(c1, 2.0);
        let mut r = rng(5);
        let mut samples = Vec::new();
        for _ in 0..10_000 {
            let run = simulate(&model, 1, &mut r, &SimOptions::default()).unwrap();
            for &(x, m) in run.n_n.atoms() {
                for _ in 0..m {
                    samples.push(x);
                }
            }
        }
        // P(X / 2 <= t) = 1 - (2t)^-1 for t >= 1/2
        let (d, p) = stats::ks_test(&mut samples, |t| {
            if t < 0.5 {
                0.0
            } else {
                1.0 - (2.0 * t).recip()
            }
        });
        assert!(p > 0.001, "KS distance {d}, p {p}");
    }

    #[test]
    fn big_jump_identical_at_one_generation() {
        let model = det2_iid();
        let mut r = rng(6);
        let fraction = big_jump_diagnostic(&model, 1, 1e-9, 200, &mut r).unwrap();
        assert_eq!(fraction, 0.0, "N_1 and its companion coincide");
    }

    #[test]
    fn big_jump_trivial_beyond_all_points() {
        let model = det2_iid();
        let mut r = rng(7);
        let fraction = big_jump_diagnostic(&model, 3, 1e12, 100, &mut r).unwrap();
        assert_eq!(fraction, 0.0);
    }

    #[test]
    fn population_cap_is_enforced() {
        let model = det2_iid();
        let mut r = rng(8);
        let opts = SimOptions {
            track_big_jumps: false,
            population_cap: 100,
        };
        match simulate(&model, 10, &mut r, &opts) {
            Err(SimError::PopulationCap { generation, .. }) => assert_eq!(generation, 7),
            other => panic!("expected population cap error, got {other:?}"),
        }
    }

    #[test]
    fn polar_diagonal_children_share_position_atoms() {
        let polar = DisplacementModel::polar(
            2,
            1.0,
            1.0,
            crate::heavy_tails::AngularMeasure::diagonal(2),
        )
        .unwrap();
        let model = BrwModel::new(OffspringLaw::deterministic(2).unwrap(), polar).unwrap();
        let mut r = rng(9);
        let run = simulate(&model, 1, &mut r, &SimOptions::default()).unwrap();
        // both children of the root get the same displacement, so the two
        // atoms merge into one location of multiplicity 2
        assert_eq!(run.n_n.atoms().len(), 1);
        assert_eq!(run.n_n.total_mass(), 2);
    }
}
