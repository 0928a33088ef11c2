//! Classical Monte Carlo of the measure, kick and evolve protocol.

pub mod protocol;
pub mod replicas;
pub mod state;

pub use protocol::{
    apply_feedback_kick, evolve_harmonic, feedback_step, measure_total_momentum, run_protocol,
    weighted_momentum, BeamProfile, FeedbackStepRecord, Measurement, MeasurementNoise, PhasePolicy,
    ProtocolSetup,
};
pub use replicas::{
    replica_rng, run_replicas, run_summarized, simulate_replicas, worker_pool, MeanSe, ReplicaRun,
    StepSummary, SummarizedRun,
};
pub use state::{classical_regime_advisory, sample_thermal, EnergyComponents, EnsembleState};
