//! Independent numerical evaluation of the single-step expectation values for
//! distinguishable atoms in a thermal state.
//!
//! Nothing here calls into [`crate::energy`]; agreement between the two is
//! what [`report`] checks. The oracle is `f64` only.

pub mod collective;
pub mod kernel;
pub mod moments;
pub mod quadrature;
pub mod report;
pub mod sampling;

pub use collective::{
    oracle_delta_e_parallel, oracle_delta_e_perp, oracle_mean_nw, CollectiveAverages, Oracle,
    OracleParallel, OraclePerp, OraclePoint,
};
pub use kernel::{
    build_thermal_kernel, fock_agreement, DensityKernel, FockKernel, KernelMoments, ThermalKernel1D,
};
pub use moments::{transverse_moments, MomentTable, TransverseMoments};
pub use quadrature::{GaussHermite, RulePair};
pub use report::{
    run_verification, Check, Diagnostic, GridPoint, Tamper, TamperTarget, VerificationGrid,
    VerificationReport,
};
pub use sampling::{sample_collective_averages, SampledAverage};
