//! Closed-form single-step energy changes for a non-degenerate thermal cloud.
//!
//! Everything is in quanta of the trap frequency. Temperature enters only
//! through `l_th²`, the beam only through `(s, d)` and the measurement
//! resolution only through `(σ/Δp0)²`.
//!
//! The expressions are evaluated in `t = 1/s²` with the Gaussian factors of
//! `⟨N_w⟩` cancelled analytically against those of the individual terms, so the
//! results stay finite for `s → ∞` and for offsets where `⟨N_w⟩` underflows.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::model::{CloudParams, NaturalScales, ScaledGeometry};
use crate::scalar::{c, Scalar};

/// Momentum resolution of the collective measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum MeasurementSetting<T> {
    /// `σ = Δp0 sqrt(⟨N_w⟩)` for whatever geometry is in use.
    Optimal,
    /// Fixed resolution in units of `Δp0`.
    Explicit { sigma_over_dp0: T },
}

impl<T: Scalar> MeasurementSetting<T> {
    pub fn explicit(sigma_over_dp0: T) -> Result<Self, ModelError> {
        let m = Self::Explicit { sigma_over_dp0 };
        m.validate()?;
        Ok(m)
    }

    /// Explicit resolution from a dimensional `σ`.
    pub fn from_physical(sigma: T, scales: &NaturalScales<T>) -> Result<Self, ModelError> {
        Self::explicit(sigma / scales.dp0)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match *self {
            Self::Optimal => Ok(()),
            Self::Explicit { sigma_over_dp0 }
                if sigma_over_dp0 > T::zero() && sigma_over_dp0.is_finite() =>
            {
                Ok(())
            }
            Self::Explicit { sigma_over_dp0 } => Err(ModelError::InvalidParameter {
                field: "sigma",
                value: sigma_over_dp0.to_f64_lossy(),
            }),
        }
    }

    pub fn is_optimal(&self) -> bool {
        matches!(self, Self::Optimal)
    }

    /// `σ/Δp0` for the given geometry.
    pub fn sigma_over_dp0(
        &self,
        geom: &ScaledGeometry<T>,
        cloud: &CloudParams<T>,
    ) -> Result<T, ModelError> {
        self.validate()?;
        Ok(match *self {
            Self::Optimal => mean_atoms_in_beam(geom, cloud.n_atoms).sqrt(),
            Self::Explicit { sigma_over_dp0 } => sigma_over_dp0,
        })
    }

    /// `r = (σ/Δp0)² / ⟨N_w⟩`, equal to one at the optimum.
    fn noise_ratio(&self, g: &Reduced<T>, cloud: &CloudParams<T>) -> Result<T, ModelError> {
        self.validate()?;
        Ok(match *self {
            Self::Optimal => T::one(),
            Self::Explicit { sigma_over_dp0 } => {
                sigma_over_dp0 * sigma_over_dp0 / (cloud.n_atoms * g.a) * g.b.exp()
            }
        })
    }
}

/// Geometry in the reduced variables used throughout this module.
#[derive(Debug, Clone, Copy)]
struct Reduced<T> {
    t: T,
    d2: T,
    /// `s² / (2 + s²)`
    a: T,
    /// `d² / (2 + s²)`
    b: T,
}

impl<T: Scalar> Reduced<T> {
    fn new(geom: &ScaledGeometry<T>) -> Self {
        let t = (geom.s * geom.s).recip();
        let d2 = geom.d * geom.d;
        let one_2t = T::one() + c::<T>(2.0) * t;
        Self {
            t,
            d2,
            a: one_2t.recip(),
            b: d2 * t / one_2t,
        }
    }

    fn one_plus(&self, k: f64) -> T {
        T::one() + c::<T>(k) * self.t
    }

    /// `t² (k t + 2 + d²)`: the common numerator `k + s²(2 + d²)` divided by `s⁶`.
    fn numerator(&self, k: f64) -> T {
        self.t * self.t * (c::<T>(k) * self.t + c::<T>(2.0) + self.d2)
    }
}

/// `⟨N_w⟩ = N s²/(2+s²) exp(−d²/(2+s²))`.
pub fn mean_atoms_in_beam<T: Scalar>(geom: &ScaledGeometry<T>, n_atoms: T) -> T {
    let g = Reduced::new(geom);
    n_atoms * g.a * (-g.b).exp()
}

/// Resolution minimising the measurement-noise heating, `σ = Δp0 sqrt(⟨N_w⟩)` (dimensional).
pub fn sigma_optimal<T: Scalar>(mean_nw: T, scales: &NaturalScales<T>) -> T {
    scales.dp0 * mean_nw.sqrt()
}

/// Potential-energy heating from the back-action on the z coordinate, `⟨N_w⟩ / 4(σ/Δp0)²`.
pub fn delta_v_parallel<T: Scalar>(
    meas: &MeasurementSetting<T>,
    mean_nw: T,
) -> Result<T, ModelError> {
    meas.validate()?;
    Ok(match *meas {
        MeasurementSetting::Optimal => c(0.25),
        MeasurementSetting::Explicit { sigma_over_dp0 } => {
            mean_nw / (c::<T>(4.0) * sigma_over_dp0 * sigma_over_dp0)
        }
    })
}

/// Longitudinal energy change split by physical origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParallelTerms<T> {
    /// Back-action heating of the longitudinal potential energy.
    pub dv_par: T,
    /// Kinetic energy left behind by the finite measurement resolution.
    pub dt_par_meas: T,
    /// Removed centre-of-mass kinetic energy, `−l_th²/4`.
    pub dt_par_cool: T,
    /// Heating from atom-number fluctuations in the beam.
    pub dt_par_fluct: T,
}

impl<T: Scalar> ParallelTerms<T> {
    pub fn total(&self) -> T {
        self.dv_par + self.dt_par_meas + self.dt_par_cool + self.dt_par_fluct
    }
}

pub fn delta_e_parallel<T: Scalar>(
    geom: &ScaledGeometry<T>,
    cloud: &CloudParams<T>,
    meas: &MeasurementSetting<T>,
) -> Result<ParallelTerms<T>, ModelError> {
    let g = Reduced::new(geom);
    let r = meas.noise_ratio(&g, cloud)?;
    let quarter = c::<T>(0.25);
    Ok(ParallelTerms {
        dv_par: quarter / r,
        dt_par_meas: quarter * r,
        dt_par_cool: -quarter * cloud.l_th_sq,
        dt_par_fluct: cloud.l_th_sq * quarter / cloud.n_atoms * fluctuation_factor(&g),
    })
}

/// `(2+s²)²/(s²(4+s²)) exp[4d²/((2+s²)(4+s²))] − 1`, rearranged without cancellation.
fn fluctuation_factor<T: Scalar>(g: &Reduced<T>) -> T {
    let t = g.t;
    let one_4t = g.one_plus(4.0);
    let big_b = c::<T>(4.0) * g.d2 * t * t / (g.one_plus(2.0) * one_4t);
    c::<T>(4.0) * t * t / one_4t * big_b.exp() + big_b.exp_m1()
}

/// The five transverse heating contributions, in the order they are usually written:
///
/// 0. back-action on the transverse momenta from the measurement noise,
/// 1. single-atom kick noise (`∝ ⟨w²|∇w|²⟩`),
/// 2. correlated kicks of different atoms (`∝ N(N−1)`),
/// 3. single-atom back-action × kick cross term,
/// 4. the same cross term between different atoms (`∝ N(N−1)`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerpTerms<T> {
    pub terms: [T; 5],
}

impl<T: Scalar> PerpTerms<T> {
    pub fn total(&self) -> T {
        self.terms.iter().fold(T::zero(), |acc, &x| acc + x)
    }
}

pub fn delta_e_perp<T: Scalar>(
    geom: &ScaledGeometry<T>,
    cloud: &CloudParams<T>,
    meas: &MeasurementSetting<T>,
) -> Result<PerpTerms<T>, ModelError> {
    let g = Reduced::new(geom);
    let r = meas.noise_ratio(&g, cloud)?;
    let n = cloud.n_atoms;
    let l2 = cloud.l_th_sq;
    let pairs = (n - T::one()) / n;
    let quarter = c::<T>(0.25);
    let (one_2t, one_4t, one_6t) = (g.one_plus(2.0), g.one_plus(4.0), g.one_plus(6.0));
    let t2d2 = g.t * g.t * g.d2;
    // Gaussian factors left over after dividing by powers of ⟨N_w⟩.
    let e2 = (c::<T>(4.0) * t2d2 / (one_2t * one_4t)).exp();
    let e4 = (c::<T>(12.0) * t2d2 / (one_2t * one_6t)).exp();

    let f1 = g.numerator(4.0) / (one_2t * one_2t);
    let f2 = g.numerator(8.0) / (one_4t * one_4t * one_4t);
    let f4 = g.numerator(12.0) / (one_6t * one_6t * one_6t);
    let a2 = g.a * g.a;

    let t0 = quarter * (r + r.recip()) * f1;
    let t1 = quarter / (n * a2) * (l2 + l2.recip() + c::<T>(2.0) / r) * f2 * e2;
    let t2 = pairs * quarter * l2 * f1 / (one_2t * one_2t * a2);
    let t3 = quarter / (r * n * n * a2 * g.a) * f4 * e4;
    let t4 = pairs * quarter / (r * n * a2) * f2 * e2;
    Ok(PerpTerms {
        terms: [t0, t1, t2, t3, t4],
    })
}

/// Per-term energy budget of one measure-and-kick step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBudget<T> {
    pub mean_nw: T,
    pub sigma_over_dp0: T,
    pub dv_par: T,
    pub dt_par_meas: T,
    pub dt_par_cool: T,
    pub dt_par_fluct: T,
    pub de_perp_terms: [T; 5],
    pub de_par: T,
    pub de_perp: T,
    pub de_total: T,
}

pub fn delta_e_total<T: Scalar>(
    geom: &ScaledGeometry<T>,
    cloud: &CloudParams<T>,
    meas: &MeasurementSetting<T>,
) -> Result<EnergyBudget<T>, ModelError> {
    let par = delta_e_parallel(geom, cloud, meas)?;
    let perp = delta_e_perp(geom, cloud, meas)?;
    let de_par = par.total();
    let de_perp = perp.total();
    Ok(EnergyBudget {
        mean_nw: mean_atoms_in_beam(geom, cloud.n_atoms),
        sigma_over_dp0: meas.sigma_over_dp0(geom, cloud)?,
        dv_par: par.dv_par,
        dt_par_meas: par.dt_par_meas,
        dt_par_cool: par.dt_par_cool,
        dt_par_fluct: par.dt_par_fluct,
        de_perp_terms: perp.terms,
        de_par,
        de_perp,
        de_total: de_par + de_perp,
    })
}

/// `g(s, d) = [4 + s²(2+d²)] / [s²(2+s²)²]`.
pub fn asymptotic_geometry_factor<T: Scalar>(geom: &ScaledGeometry<T>) -> T {
    let g = Reduced::new(geom);
    let one_2t = g.one_plus(2.0);
    g.numerator(4.0) / (one_2t * one_2t)
}

/// Large-`N` transverse energy change.
pub fn delta_e_perp_asymptotic<T: Scalar>(
    geom: &ScaledGeometry<T>,
    cloud: &CloudParams<T>,
    meas: &MeasurementSetting<T>,
) -> Result<T, ModelError> {
    let r = meas.noise_ratio(&Reduced::new(geom), cloud)?;
    Ok(c::<T>(0.25) * (r + r.recip() + cloud.l_th_sq) * asymptotic_geometry_factor(geom))
}

/// Large-`N` total energy change; at the optimal resolution this is
/// `(1 + g)/2 − (l_th²/4)(1 − g)`.
pub fn delta_e_total_asymptotic<T: Scalar>(
    geom: &ScaledGeometry<T>,
    cloud: &CloudParams<T>,
    meas: &MeasurementSetting<T>,
) -> Result<T, ModelError> {
    let r = meas.noise_ratio(&Reduced::new(geom), cloud)?;
    let g = asymptotic_geometry_factor(geom);
    let quarter = c::<T>(0.25);
    Ok(quarter * (r + r.recip()) * (T::one() + g) - quarter * cloud.l_th_sq * (T::one() - g))
}

/// Transverse kinetic-energy contribution of the kick term `∝ z ∇w · p⊥` that
/// survives for a quantum thermal state through `⟨z p_z⟩ = i/2`.
///
/// Equal to `−g(s, d) / (2 l_th²)`; it is not part of [`delta_e_perp`].
pub fn perp_ordering_correction<T: Scalar>(geom: &ScaledGeometry<T>, cloud: &CloudParams<T>) -> T {
    -asymptotic_geometry_factor(geom) / (c::<T>(2.0) * cloud.l_th_sq)
}
