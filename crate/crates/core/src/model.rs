//! Physical parameters, natural scales and the scaled beam geometry.
//!
//! All downstream formulas work in trap units: energies in quanta of `ħω`,
//! the cloud size through `l_th = L_th / Δx0`, and the beam through the
//! dimensionless radius `s` and offset `d`.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::scalar::{c, Scalar};

/// Apéry's constant ζ(3).
pub const ZETA_3: f64 = 1.202_056_903_159_594_3;

/// Reduced Planck constant in J·s.
pub const HBAR_SI: f64 = 1.054_571_817e-34;

/// Boltzmann constant in J/K.
pub const K_B_SI: f64 = 1.380_649e-23;

/// Values of `ħ` and `k_B` in the unit system the parameters are written in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Units<T> {
    pub hbar: T,
    pub k_b: T,
}

impl<T: Scalar> Units<T> {
    /// `ħ = k_B = 1`; with `ω = m = 1` the temperature field is `k_B T / ħω`.
    pub fn trap() -> Self {
        Self {
            hbar: T::one(),
            k_b: T::one(),
        }
    }

    pub fn si() -> Self {
        Self {
            hbar: c(HBAR_SI),
            k_b: c(K_B_SI),
        }
    }
}

/// Isotropic harmonic trap holding `n_atoms` distinguishable atoms at temperature `temperature`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapEnsembleParams<T> {
    /// Angular trap frequency.
    pub omega: T,
    pub mass: T,
    pub temperature: T,
    pub n_atoms: u64,
    pub units: Units<T>,
}

impl<T: Scalar> TrapEnsembleParams<T> {
    /// Trap-unit parameters: `ω = m = ħ = k_B = 1`, temperature given as `k_B T / ħω`.
    pub fn trap_units(kt_over_omega: T, n_atoms: u64) -> Result<Self, ModelError> {
        let p = Self {
            omega: T::one(),
            mass: T::one(),
            temperature: kt_over_omega,
            n_atoms,
            units: Units::trap(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn new(
        omega: T,
        mass: T,
        temperature: T,
        n_atoms: u64,
        units: Units<T>,
    ) -> Result<Self, ModelError> {
        let p = Self {
            omega,
            mass,
            temperature,
            n_atoms,
            units,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        positive("omega", self.omega)?;
        positive("mass", self.mass)?;
        positive("temperature", self.temperature)?;
        positive("hbar", self.units.hbar)?;
        positive("k_b", self.units.k_b)?;
        if self.n_atoms == 0 {
            return Err(ModelError::InvalidParameter {
                field: "n_atoms",
                value: 0.0,
            });
        }
        Ok(())
    }

    /// `ħω / (2 k_B T)`.
    pub fn half_inverse_temperature(&self) -> T {
        self.units.hbar * self.omega / (c::<T>(2.0) * self.units.k_b * self.temperature)
    }

    /// Cloud parameters consumed by the energy formulas.
    pub fn cloud(&self) -> Result<CloudParams<T>, ModelError> {
        self.validate()?;
        CloudParams::new(
            c(self.n_atoms as f64),
            l_th_squared(self.half_inverse_temperature()),
        )
    }
}

/// Scales derived from a [`TrapEnsembleParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NaturalScales<T> {
    /// Ground-state position uncertainty `Δx0 = sqrt(ħ / 2mω)`.
    pub dx0: T,
    /// Ground-state momentum uncertainty `Δp0 = sqrt(ħmω / 2)`.
    pub dp0: T,
    /// Thermal rms cloud extension per axis.
    pub cloud_rms: T,
    /// Dimensionless cloud size `L_th / Δx0`.
    pub l_th: T,
    /// Condensation temperature in the thermodynamic limit.
    pub t0: T,
}

impl<T: Scalar> NaturalScales<T> {
    pub fn l_th_sq(&self) -> T {
        self.l_th * self.l_th
    }
}

/// `l_th² = coth(x)` with `x = ħω / 2k_BT`, evaluated as `1 + 2 / expm1(2x)`.
pub fn l_th_squared<T: Scalar>(x: T) -> T {
    T::one() + c::<T>(2.0) / (c::<T>(2.0) * x).exp_m1()
}

/// `T0 = (ħω / k_B) (N / ζ(3))^(1/3)`; `n_atoms` may be fractional.
pub fn condensation_temperature<T: Scalar>(omega: T, n_atoms: T, units: Units<T>) -> T {
    units.hbar * omega / units.k_b * (n_atoms / c(ZETA_3)).cbrt()
}

/// Trap-unit temperature `k_B T / ħω` for a temperature given as a multiple of `T0`.
pub fn kt_over_omega_from_t0_ratio<T: Scalar>(t_over_t0: T, n_atoms: T) -> T {
    t_over_t0 * (n_atoms / c(ZETA_3)).cbrt()
}

pub fn natural_scales<T: Scalar>(
    params: &TrapEnsembleParams<T>,
) -> Result<NaturalScales<T>, ModelError> {
    params.validate()?;
    let two = c::<T>(2.0);
    let hbar = params.units.hbar;
    let dx0 = (hbar / (two * params.mass * params.omega)).sqrt();
    let dp0 = (hbar * params.mass * params.omega / two).sqrt();
    let l_th = l_th_squared(params.half_inverse_temperature()).sqrt();
    Ok(NaturalScales {
        dx0,
        dp0,
        cloud_rms: dx0 * l_th,
        l_th,
        t0: condensation_temperature(params.omega, c(params.n_atoms as f64), params.units),
    })
}

/// Gaussian control beam: effective radius `r0` and centre `(x0, y0)` in the transverse plane.
///
/// The profile is `w(x, y) = exp(-ρ² / 2r0²)` with `ρ` the distance to the
/// beam centre, so that `∫ w² dA = π r0²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamGeometry<T> {
    pub r0: T,
    pub x0: T,
    pub y0: T,
}

impl<T: Scalar> BeamGeometry<T> {
    pub fn new(r0: T, x0: T, y0: T) -> Result<Self, ModelError> {
        positive("r0", r0)?;
        finite("x0", x0)?;
        finite("y0", y0)?;
        Ok(Self { r0, x0, y0 })
    }

    /// Beam centred on the trap axis.
    pub fn centred(r0: T) -> Result<Self, ModelError> {
        Self::new(r0, T::zero(), T::zero())
    }

    /// `w(x, y)`.
    pub fn profile(&self, x: T, y: T) -> T {
        let dx = x - self.x0;
        let dy = y - self.y0;
        (-(dx * dx + dy * dy) / (c::<T>(2.0) * self.r0 * self.r0)).exp()
    }

    /// `(w, ∂x w, ∂y w)` at `(x, y)`.
    pub fn profile_and_gradient(&self, x: T, y: T) -> (T, T, T) {
        let w = self.profile(x, y);
        let r2 = self.r0 * self.r0;
        (w, -(x - self.x0) / r2 * w, -(y - self.y0) / r2 * w)
    }
}

/// Beam radius and offset in units of the thermal cloud size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledGeometry<T> {
    pub s: T,
    pub d: T,
}

impl<T: Scalar> ScaledGeometry<T> {
    pub fn new(s: T, d: T) -> Result<Self, ModelError> {
        positive("s", s)?;
        if !(d >= T::zero()) || !d.is_finite() {
            return Err(ModelError::InvalidParameter {
                field: "d",
                value: d.to_f64_lossy(),
            });
        }
        Ok(Self { s, d })
    }

    /// A beam of this scaled geometry for a cloud of rms size `cloud_rms`, offset along x.
    pub fn to_beam(&self, cloud_rms: T) -> BeamGeometry<T> {
        BeamGeometry {
            r0: self.s * cloud_rms,
            x0: self.d * cloud_rms,
            y0: T::zero(),
        }
    }
}

pub fn scale_geometry<T: Scalar>(
    beam: &BeamGeometry<T>,
    scales: &NaturalScales<T>,
) -> ScaledGeometry<T> {
    ScaledGeometry {
        s: beam.r0 / scales.cloud_rms,
        d: beam.x0.hypot(beam.y0) / scales.cloud_rms,
    }
}

/// The two numbers through which the cloud enters the energy formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloudParams<T> {
    /// Total atom number `N` (real-valued so that figure sweeps can use any `N ≥ 1`).
    pub n_atoms: T,
    pub l_th_sq: T,
}

impl<T: Scalar> CloudParams<T> {
    pub fn new(n_atoms: T, l_th_sq: T) -> Result<Self, ModelError> {
        if !(n_atoms >= T::one()) || !n_atoms.is_finite() {
            return Err(ModelError::InvalidParameter {
                field: "n_atoms",
                value: n_atoms.to_f64_lossy(),
            });
        }
        if !(l_th_sq >= T::one()) || !l_th_sq.is_finite() {
            return Err(ModelError::InvalidParameter {
                field: "l_th_sq",
                value: l_th_sq.to_f64_lossy(),
            });
        }
        Ok(Self { n_atoms, l_th_sq })
    }

    /// Cloud at temperature `k_B T / ħω`.
    pub fn from_kt_over_omega(n_atoms: T, kt_over_omega: T) -> Result<Self, ModelError> {
        positive("kt_over_omega", kt_over_omega)?;
        Self::new(
            n_atoms,
            l_th_squared(T::one() / (c::<T>(2.0) * kt_over_omega)),
        )
    }

    /// Cloud at `T = ratio · T0(N)`.
    pub fn from_t0_ratio(n_atoms: T, ratio: T) -> Result<Self, ModelError> {
        positive("t_over_t0", ratio)?;
        Self::from_kt_over_omega(n_atoms, kt_over_omega_from_t0_ratio(ratio, n_atoms))
    }
}

fn positive<T: Scalar>(field: &'static str, v: T) -> Result<(), ModelError> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter {
            field,
            value: v.to_f64_lossy(),
        })
    }
}

fn finite<T: Scalar>(field: &'static str, v: T) -> Result<(), ModelError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter {
            field,
            value: v.to_f64_lossy(),
        })
    }
}
