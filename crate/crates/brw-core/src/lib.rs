//! Simulation and validation toolkit for branching random walks with
//! heavy-tailed (regularly varying) displacements.
//!
//! The crate has three layers:
//!
//! * building blocks: Galton-Watson machinery ([`gw`]), heavy-tailed
//!   displacement models with analytic tail intensities ([`heavy_tails`]),
//!   and finite point-measure algebra with Laplace-functional estimators
//!   ([`point_measure`]);
//! * samplers: forward simulation of the branching random walk ([`brw`])
//!   and exact sampling of its weak limit, a randomly scaled
//!   scale-decorated Poisson point process ([`limit`]);
//! * validation: closed-form/quadrature oracles ([`analytic`]) and the
//!   config-driven experiment harness ([`harness`]) that cross-checks the
//!   finite-population simulation against the limit laws.

pub mod analytic;
pub mod brw;
pub mod gw;
pub mod harness;
pub mod heavy_tails;
pub mod limit;
pub mod point_measure;
pub mod rng;
pub mod stats;

pub use brw::{BrwModel, BrwRunResult, SimOptions};
pub use gw::{ExtinctionProfile, MartingaleLimitSampler, OffspringKind, OffspringLaw};
pub use heavy_tails::{
    AngularMeasure, DisplacementModel, RectQuery, ScalarHeavyLaw, ScalingSequence, TailIndexSpec,
};
pub use limit::{KappaMethod, KappaResult, SscdpppSpec, VtLaw};
pub use point_measure::{LaplaceEstimate, PointMeasure, TestFunction};
