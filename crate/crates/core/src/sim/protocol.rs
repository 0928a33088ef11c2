//! One measure, kick and evolve cycle on a classical ensemble, and repeated cycles.
//!
//! The measurement returns `P = Σ w_i p_{z,i} + η` with Gaussian noise `η` of
//! variance `σ²`. Its back-action is a single random momentum transfer
//! `q ~ N(0, 1/(4σ²))` conjugate to `P_w`, which shifts `z_i` by `q w_i` and,
//! because `w_i` depends on `ρ_i`, shifts `p⊥,i` by `−q p_{z,i} ∇w_i`. The
//! kick is generated by `(P/N_e) Σ w_i z_i`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::energy::{mean_atoms_in_beam, MeasurementSetting};
use crate::error::ModelError;
use crate::model::{BeamGeometry, CloudParams, ScaledGeometry};
use crate::scalar::{c, Scalar};

use super::state::{sample_thermal, EnergyComponents, EnsembleState, X, Y, Z};

/// Transverse profile of the kick beam.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BeamProfile<T> {
    Gaussian(BeamGeometry<T>),
    /// `w ≡ 1`: every atom takes part equally and there is no transverse force.
    Uniform,
}

impl<T: Scalar> BeamProfile<T> {
    #[inline]
    pub fn eval(&self, x: T, y: T) -> (T, T, T) {
        match self {
            Self::Gaussian(b) => b.profile_and_gradient(x, y),
            Self::Uniform => (T::one(), T::zero(), T::zero()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum MeasurementNoise<T> {
    /// Outcome noise with standard deviation `sigma` (momentum units) and the matching back-action.
    Gaussian { sigma: T },
    /// The idealised readout `P = P_w` with no back-action applied.
    Exact,
}

/// Outcome of [`measure_total_momentum`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement<T> {
    pub outcome: T,
    pub p_w: T,
    pub back_action: T,
}

/// `P_w = Σ w_i p_{z,i}` at the current positions.
pub fn weighted_momentum<T: Scalar>(state: &EnsembleState<T>, beam: &BeamProfile<T>) -> T {
    state
        .positions
        .iter()
        .zip(&state.momenta)
        .fold(T::zero(), |acc, (r, p)| {
            acc + beam.eval(r[X], r[Y]).0 * p[Z]
        })
}

/// Reads out `P` and applies the back-action to `state`.
pub fn measure_total_momentum<T: Scalar, R: Rng + ?Sized>(
    state: &mut EnsembleState<T>,
    beam: &BeamProfile<T>,
    noise: &MeasurementNoise<T>,
    rng: &mut R,
) -> Measurement<T> {
    let p_w = weighted_momentum(state, beam);
    let MeasurementNoise::Gaussian { sigma } = *noise else {
        return Measurement {
            outcome: p_w,
            p_w,
            back_action: T::zero(),
        };
    };
    let [eta, xi]: [f64; 2] = std::array::from_fn(|_| StandardNormal.sample(rng));
    let outcome = p_w + sigma * c::<T>(eta);
    let q = c::<T>(xi) / (c::<T>(2.0) * sigma);
    for (r, p) in state.positions.iter_mut().zip(state.momenta.iter_mut()) {
        let (w, gx, gy) = beam.eval(r[X], r[Y]);
        r[Z] = r[Z] + q * w;
        p[X] = p[X] - q * p[Z] * gx;
        p[Y] = p[Y] - q * p[Z] * gy;
    }
    Measurement {
        outcome,
        p_w,
        back_action: q,
    }
}

/// Applies the feedback kick for outcome `p` and normalisation `n_e`.
pub fn apply_feedback_kick<T: Scalar>(
    state: &mut EnsembleState<T>,
    beam: &BeamProfile<T>,
    p: T,
    n_e: T,
) {
    let k = p / n_e;
    for (r, mom) in state.positions.iter().zip(state.momenta.iter_mut()) {
        let (w, gx, gy) = beam.eval(r[X], r[Y]);
        mom[Z] = mom[Z] - k * w;
        mom[X] = mom[X] - k * r[Z] * gx;
        mom[Y] = mom[Y] - k * r[Z] * gy;
    }
}

/// Free evolution by trap phase `phase`: a rotation in each `(x, p)` plane.
pub fn evolve_harmonic<T: Scalar>(state: &mut EnsembleState<T>, phase: T) {
    let (sn, cs) = phase.sin_cos();
    for (r, p) in state.positions.iter_mut().zip(state.momenta.iter_mut()) {
        for k in 0..3 {
            let (x, v) = (r[k], p[k]);
            r[k] = x * cs + v * sn;
            p[k] = v * cs - x * sn;
        }
    }
    state.time = state.time + phase;
}

/// Trap phase accumulated between consecutive measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PhasePolicy<T> {
    /// Uniform in `[0, 2π)`, drawn independently per step.
    Random,
    Fixed {
        phase: T,
    },
}

/// Everything needed to run the protocol on one replica.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolSetup<T> {
    pub cloud: CloudParams<T>,
    pub n_atoms: usize,
    pub beam: BeamProfile<T>,
    pub noise: MeasurementNoise<T>,
    pub n_effective: T,
    pub phase: PhasePolicy<T>,
}

impl<T: Scalar> ProtocolSetup<T> {
    /// Gaussian beam at scaled geometry `geom`; `n_effective` defaults to `⟨N_w⟩`.
    pub fn gaussian(
        geom: &ScaledGeometry<T>,
        cloud: &CloudParams<T>,
        meas: &MeasurementSetting<T>,
        n_effective: Option<T>,
        phase: PhasePolicy<T>,
    ) -> Result<Self, ModelError> {
        let n_atoms = cloud.n_atoms.to_f64_lossy();
        if n_atoms.fract() != 0.0 || n_atoms > usize::MAX as f64 {
            return Err(ModelError::InvalidParameter {
                field: "n_atoms",
                value: n_atoms,
            });
        }
        if let Some(ne) = n_effective {
            if !(ne > T::zero() && ne.is_finite()) {
                return Err(ModelError::InvalidParameter {
                    field: "n_effective",
                    value: ne.to_f64_lossy(),
                });
            }
        }
        if let PhasePolicy::Fixed { phase } = phase {
            if !phase.is_finite() {
                return Err(ModelError::InvalidParameter {
                    field: "phase",
                    value: phase.to_f64_lossy(),
                });
            }
        }
        let rms = (c::<T>(0.5) * cloud.l_th_sq).sqrt();
        let sigma = meas.sigma_over_dp0(geom, cloud)? * c::<T>(std::f64::consts::FRAC_1_SQRT_2);
        Ok(Self {
            cloud: *cloud,
            n_atoms: n_atoms as usize,
            beam: BeamProfile::Gaussian(geom.to_beam(rms)),
            noise: MeasurementNoise::Gaussian { sigma },
            n_effective: n_effective.unwrap_or_else(|| mean_atoms_in_beam(geom, cloud.n_atoms)),
            phase,
        })
    }
}

/// Diagnostics of one measure-kick-evolve cycle. Energies are taken just
/// before the measurement and just after the kick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackStepRecord<T> {
    pub step: usize,
    pub measured_p: T,
    pub p_w: T,
    pub back_action: T,
    /// `P / N_e`, the z-momentum removed from an atom at the beam centre.
    pub kick: T,
    pub phase: T,
    pub before: EnergyComponents<T>,
    pub after: EnergyComponents<T>,
}

impl<T: Scalar> FeedbackStepRecord<T> {
    pub fn dv_par(&self) -> T {
        self.after.v_par - self.before.v_par
    }

    pub fn dt_par(&self) -> T {
        self.after.t_par - self.before.t_par
    }

    pub fn de_par(&self) -> T {
        self.after.e_par() - self.before.e_par()
    }

    pub fn de_perp(&self) -> T {
        self.after.e_perp() - self.before.e_perp()
    }

    pub fn de_total(&self) -> T {
        self.after.total() - self.before.total()
    }
}

/// One cycle on an existing state.
pub fn feedback_step<T: Scalar, R: Rng + ?Sized>(
    state: &mut EnsembleState<T>,
    setup: &ProtocolSetup<T>,
    step: usize,
    rng: &mut R,
) -> FeedbackStepRecord<T> {
    let before = state.energy();
    let m = measure_total_momentum(state, &setup.beam, &setup.noise, rng);
    apply_feedback_kick(state, &setup.beam, m.outcome, setup.n_effective);
    let after = state.energy();
    let phase = match setup.phase {
        PhasePolicy::Random => c::<T>(rng.random::<f64>() * std::f64::consts::TAU),
        PhasePolicy::Fixed { phase } => phase,
    };
    evolve_harmonic(state, phase);
    FeedbackStepRecord {
        step,
        measured_p: m.outcome,
        p_w: m.p_w,
        back_action: m.back_action,
        kick: m.outcome / setup.n_effective,
        phase,
        before,
        after,
    }
}

/// A fresh thermal sample followed by `n_steps` cycles.
pub fn run_protocol<T: Scalar, R: Rng + ?Sized>(
    setup: &ProtocolSetup<T>,
    n_steps: usize,
    rng: &mut R,
) -> Vec<FeedbackStepRecord<T>> {
    let mut state = sample_thermal(&setup.cloud, setup.n_atoms, rng);
    (0..n_steps)
        .map(|k| feedback_step(&mut state, setup, k, rng))
        .collect()
}
