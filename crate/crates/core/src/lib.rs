//! Stochastic cooling of a trapped thermal cloud by a collective measurement of
//! momentum followed by a feedback kick through a Gaussian beam.
//!
//! The crate provides
//!
//! - dimensionless trap/cloud/beam parameters ([`model`]),
//! - closed-form single-step energy budgets ([`energy`]),
//! - cooling/heating boundaries in the beam-radius/offset plane ([`boundary`]),
//! - an independent numerical evaluation of the same expectation values ([`oracle`]),
//! - a seeded Monte Carlo of repeated measure-kick-evolve cycles ([`sim`]).
//!
//! All physics is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix it to `f64`.

// `!(x > 0)` style tests are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boundary;
pub mod energy;
pub mod error;
pub mod model;
pub mod oracle;
pub mod scalar;
pub mod sim;

pub use boundary::{
    boundary_curve, boundary_d_at_s, d_of_s_asymptotic, energy_change, s_min_asymptotic,
    s_min_numeric, BoundaryCurve, BoundaryMode, RootOptions,
};
pub use energy::{
    delta_e_parallel, delta_e_perp, delta_e_total, delta_e_total_asymptotic, mean_atoms_in_beam,
    EnergyBudget, MeasurementSetting, ParallelTerms, PerpTerms,
};
pub use error::{BoundaryError, ModelError, OracleError, SimError};
pub use model::{
    BeamGeometry, CloudParams, NaturalScales, ScaledGeometry, TrapEnsembleParams, Units,
};
pub use scalar::Scalar;
pub use sim::{run_replicas, FeedbackStepRecord, PhasePolicy, ProtocolSetup, ReplicaRun};

pub type TrapEnsembleParams64 = TrapEnsembleParams<f64>;
pub type CloudParams64 = CloudParams<f64>;
pub type ScaledGeometry64 = ScaledGeometry<f64>;
pub type BeamGeometry64 = BeamGeometry<f64>;
pub type NaturalScales64 = NaturalScales<f64>;
pub type MeasurementSetting64 = MeasurementSetting<f64>;
pub type EnergyBudget64 = EnergyBudget<f64>;
pub type BoundaryCurve64 = BoundaryCurve<f64>;
pub type ProtocolSetup64 = ProtocolSetup<f64>;
pub type FeedbackStepRecord64 = FeedbackStepRecord<f64>;
pub type ReplicaRun64 = ReplicaRun<f64>;
